//! Segment-averaged periodogram estimates of spectra and coherence.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::sde::StimulusRecord;
use crate::analysis::SpectrumCurve;
use crate::error::{Result, SnnError};

/// Fewest segments an estimate is computed from.
pub const MIN_SEGMENTS: usize = 20;

/// Spectra at the angular frequencies `2 pi k / L`, `k = 1 .. M/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedSpectra {
    pub omegas: Vec<f64>,
    /// Power spectrum of the first series.
    pub sxx: Vec<f64>,
    /// Power spectrum of the second series.
    pub sss: Vec<f64>,
    /// `<conj(X) S> / L`.
    pub sxs: Vec<Complex64>,
    pub segments: usize,
}

impl EstimatedSpectra {
    pub fn coherence(&self) -> Vec<f64> {
        self.sxs
            .iter()
            .zip(&self.sxx)
            .zip(&self.sss)
            .map(|((c, &a), &b)| {
                let d = a * b;
                if d > 0.0 {
                    (c.norm_sqr() / d).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Segment-weighted average of estimates on the same frequency grid.
pub fn combine_spectra(parts: &[EstimatedSpectra]) -> Result<EstimatedSpectra> {
    let first = parts
        .first()
        .ok_or_else(|| SnnError::InsufficientData("no spectra to combine".into()))?;
    let total: usize = parts.iter().map(|p| p.segments).sum();
    let mut out = EstimatedSpectra {
        omegas: first.omegas.clone(),
        sxx: vec![0.0; first.omegas.len()],
        sss: vec![0.0; first.omegas.len()],
        sxs: vec![Complex64::new(0.0, 0.0); first.omegas.len()],
        segments: total,
    };
    for p in parts {
        if p.omegas != first.omegas {
            return Err(SnnError::InvalidArgument("spectra on different frequency grids".into()));
        }
        let w = p.segments as f64 / total as f64;
        for k in 0..out.omegas.len() {
            out.sxx[k] += w * p.sxx[k];
            out.sss[k] += w * p.sss[k];
            out.sxs[k] += p.sxs[k] * w;
        }
    }
    Ok(out)
}

/// Spectra of two equally binned series (`bin` time units per sample), cut
/// into non-overlapping segments of `segment_bins` samples.
pub fn spectra_from_series(x: &[f64], s: &[f64], bin: f64, segment_bins: usize) -> Result<EstimatedSpectra> {
    if x.len() != s.len() {
        return Err(SnnError::mismatch("binned series", x.len(), s.len()));
    }
    if segment_bins < 2 || !(bin > 0.0) {
        return Err(SnnError::InvalidArgument(format!(
            "segments need at least 2 bins of positive width, got {segment_bins} x {bin}"
        )));
    }
    let segments = x.len() / segment_bins;
    if segments < MIN_SEGMENTS {
        return Err(SnnError::InsufficientData(format!(
            "{segments} segments of {segment_bins} bins available, need {MIN_SEGMENTS}"
        )));
    }
    let m = segment_bins;
    let half = m / 2;
    let len = m as f64 * bin;
    let fft = FftPlanner::new().plan_fft_forward(m);
    let mut sxx = vec![0.0; half];
    let mut sss = vec![0.0; half];
    let mut sxs = vec![Complex64::new(0.0, 0.0); half];
    let mut bx = vec![Complex64::new(0.0, 0.0); m];
    let mut bs = vec![Complex64::new(0.0, 0.0); m];
    for seg in 0..segments {
        let range = seg * m..(seg + 1) * m;
        for (dst, &v) in bx.iter_mut().zip(&x[range.clone()]) {
            *dst = Complex64::new(v * bin, 0.0);
        }
        for (dst, &v) in bs.iter_mut().zip(&s[range]) {
            *dst = Complex64::new(v * bin, 0.0);
        }
        fft.process(&mut bx);
        fft.process(&mut bs);
        for k in 1..=half {
            let (a, b) = (bx[k], bs[k]);
            sxx[k - 1] += a.norm_sqr();
            sss[k - 1] += b.norm_sqr();
            sxs[k - 1] += a.conj() * b;
        }
    }
    let norm = 1.0 / (segments as f64 * len);
    Ok(EstimatedSpectra {
        omegas: (1..=half).map(|k| 2.0 * std::f64::consts::PI * k as f64 / len).collect(),
        sxx: sxx.into_iter().map(|v| v * norm).collect(),
        sss: sss.into_iter().map(|v| v * norm).collect(),
        sxs: sxs.into_iter().map(|v| v * norm).collect(),
        segments,
    })
}

/// Spike train (as a delta sum on the stimulus bins) against the stimulus.
///
/// `segment_length` is in time units and is rounded to whole bins.
pub fn estimate_spectra(spike_times: &[f64], stimulus: &StimulusRecord, segment_length: f64) -> Result<EstimatedSpectra> {
    let bin = stimulus.bin;
    let n = stimulus.values.len();
    let mut train = vec![0.0; n];
    for &t in spike_times {
        // spikes on a bin edge belong to the bin they close
        let k = ((t / bin).ceil() as usize).saturating_sub(1);
        if k < n {
            train[k] += 1.0 / bin;
        }
    }
    let segment_bins = (segment_length / bin).round() as usize;
    spectra_from_series(&train, &stimulus.values, bin, segment_bins)
}

/// Coherence between stimulus and spike train, `|S_xs|^2 / (S_xx S_ss)`.
pub fn estimate_coherence_mc(spike_times: &[f64], stimulus: &StimulusRecord, segment_length: f64) -> Result<SpectrumCurve> {
    let est = estimate_spectra(spike_times, stimulus, segment_length)?;
    let c = est.coherence();
    SpectrumCurve::new(est.omegas, c)
}
