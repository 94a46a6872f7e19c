//! Input-output coherence of a white-noise-driven LIF neuron.
//!
//! Time is measured in units of the membrane time constant, so the model is
//! `dv/dt = -v + mu + sqrt(2 D) xi(t)` with threshold `v_th` and reset
//! `u_rest`. A stronger leak corresponds to smaller `mu` and `D`.
//!
//! The analytic spectra are cross-checked by an Euler-Maruyama simulator
//! ([`simulate_lif_sde`]) and a segment-averaged periodogram estimator
//! ([`estimate_coherence_mc`]).

mod estimate;
pub mod quadrature;
mod sde;
pub mod special;

use num_complex::Complex64;
use rayon::prelude::*;

pub use estimate::{combine_spectra, estimate_coherence_mc, estimate_spectra, spectra_from_series, EstimatedSpectra, MIN_SEGMENTS};
pub use sde::{simulate_lif_sde, simulate_trajectories, SdeConfig, SdeRun, StimulusRecord};

use crate::analysis::SpectrumCurve;
use crate::error::{Result, SnnError};
use quadrature::{integrate, QuadSettings};
use special::{erfcx, pcf_triplet};

/// Parameters of the scaled LIF diffusion model.
///
/// `d` is the total noise intensity and `d_st` the part of it that is the
/// stimulus. With `d_st < d` the remainder acts as background noise that the
/// output cannot be coherent with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceParams {
    pub mu: f64,
    pub d: f64,
    pub d_st: f64,
    pub tau_r: f64,
    pub v_th: f64,
    pub u_rest: f64,
}

impl CoherenceParams {
    /// Pure stimulus drive (`d_st = d`), no refractoriness, `v_th = 1`, `u_rest = 0`.
    pub fn new(mu: f64, d: f64) -> Result<Self> {
        let p = Self {
            mu,
            d,
            d_st: d,
            tau_r: 0.0,
            v_th: 1.0,
            u_rest: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_stimulus(mut self, d_st: f64) -> Result<Self> {
        self.d_st = d_st;
        self.validate()?;
        Ok(self)
    }

    pub fn with_refractory(mut self, tau_r: f64) -> Result<Self> {
        self.tau_r = tau_r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_threshold(mut self, v_th: f64, u_rest: f64) -> Result<Self> {
        self.v_th = v_th;
        self.u_rest = u_rest;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SnnError::InvalidArgument(m));
        if ![self.mu, self.d, self.d_st, self.tau_r, self.v_th, self.u_rest]
            .iter()
            .all(|x| x.is_finite())
        {
            return bad(format!("non-finite coherence parameter in {self:?}"));
        }
        if self.d <= 0.0 {
            return bad(format!("noise intensity D must be positive, got {}", self.d));
        }
        if !(0.0..=self.d).contains(&self.d_st) {
            return bad(format!("stimulus intensity must lie in [0, D], got {}", self.d_st));
        }
        if self.tau_r < 0.0 {
            return bad(format!("refractory period must be non-negative, got {}", self.tau_r));
        }
        if self.v_th <= self.u_rest {
            return bad(format!("v_th ({}) must exceed u_rest ({})", self.v_th, self.u_rest));
        }
        Ok(())
    }

    /// Scaled distance of the threshold from the mean, `(mu - v_th) / sqrt(D)`.
    pub fn y_threshold(&self) -> f64 {
        (self.mu - self.v_th) / self.d.sqrt()
    }

    /// Scaled distance of the reset from the mean, `(mu - u_rest) / sqrt(D)`.
    pub fn y_reset(&self) -> f64 {
        (self.mu - self.u_rest) / self.d.sqrt()
    }

    /// `(u_rest^2 - v_th^2 + 2 mu (v_th - u_rest)) / (4 D)`.
    pub fn delta(&self) -> f64 {
        (self.u_rest * self.u_rest - self.v_th * self.v_th + 2.0 * self.mu * (self.v_th - self.u_rest)) / (4.0 * self.d)
    }
}

/// Stationary firing rate
/// `r0 = 1 / (tau_r + sqrt(pi) * int_{(mu-v_th)/sqrt(2D)}^{(mu-u_rest)/sqrt(2D)} erfcx(z) dz)`.
pub fn firing_rate(p: &CoherenceParams) -> Result<f64> {
    p.validate()?;
    let s = (2.0 * p.d).sqrt();
    let lo = (p.mu - p.v_th) / s;
    let hi = (p.mu - p.u_rest) / s;
    if erfcx(lo).is_infinite() {
        // mean first-passage time overflows: the neuron is silent
        return Ok(0.0);
    }
    let settings = QuadSettings {
        abs_tol: 0.0,
        rel_tol: 1e-13,
        max_intervals: 4000,
        initial_pieces: ((hi - lo) * 4.0).ceil().max(1.0) as usize,
    };
    let integral = integrate(erfcx, lo, hi, &settings)?.value;
    Ok(1.0 / (p.tau_r + std::f64::consts::PI.sqrt() * integral))
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(SnnError::InvalidArgument(format!("frequency must be positive and finite, got {omega}")))
    }
}

/// Parabolic cylinder values shared by all spectra at one frequency.
struct Pieces {
    r0: f64,
    /// `D_{iw-1}(y_T) - e^Delta D_{iw-1}(y_R)`
    num: Complex64,
    /// `D_{iw}(y_T) - e^Delta e^{i w tau_r} D_{iw}(y_R)`
    den: Complex64,
    /// `|D_{iw}(y_T)|^2 - e^{2 Delta} |D_{iw}(y_R)|^2`
    power: f64,
}

fn pieces(omega: f64, p: &CoherenceParams) -> Result<Pieces> {
    check_omega(omega)?;
    let r0 = firing_rate(p)?;
    let [_, dt1, dt0] = pcf_triplet(omega, p.y_threshold())?;
    let [_, dr1, dr0] = pcf_triplet(omega, p.y_reset())?;
    let e = p.delta().exp();
    let num = dt1 - dr1 * e;
    let den = dt0 - dr0 * e * Complex64::new(0.0, omega * p.tau_r).exp();
    let power = dt0.norm_sqr() - e * e * dr0.norm_sqr();
    Ok(Pieces { r0, num, den, power })
}

/// Cross-spectrum between the stimulus and the output spike train.
pub fn cross_spectrum(omega: f64, p: &CoherenceParams) -> Result<Complex64> {
    let q = pieces(omega, p)?;
    let iw = Complex64::new(0.0, omega);
    let pre = 2.0 * p.d_st / p.d.sqrt() * q.r0 * iw / (iw - 1.0);
    Ok(pre * q.num / q.den)
}

/// `|S_xs(omega)|^2` from the magnitude-square formula, without going
/// through the complex cross-spectrum.
pub fn cross_spectrum_norm_sqr(omega: f64, p: &CoherenceParams) -> Result<f64> {
    let q = pieces(omega, p)?;
    let w2 = omega * omega;
    Ok(4.0 * p.d_st * p.d_st / p.d * q.r0 * q.r0 * w2 / (1.0 + w2) * q.num.norm_sqr() / q.den.norm_sqr())
}

/// Power spectrum of the output spike train.
pub fn power_spectrum(omega: f64, p: &CoherenceParams) -> Result<f64> {
    let q = pieces(omega, p)?;
    Ok(q.r0 * q.power / q.den.norm_sqr())
}

/// Power spectrum of the stimulus, `2 D_st`.
pub fn stimulus_spectrum(p: &CoherenceParams) -> f64 {
    2.0 * p.d_st
}

const BOUND_SLACK: f64 = 1e-9;

fn check_bound(omega: f64, value: f64) -> Result<f64> {
    if (-BOUND_SLACK..=1.0 + BOUND_SLACK).contains(&value) {
        Ok(value.clamp(0.0, 1.0))
    } else {
        Err(SnnError::CoherenceBound { omega, value })
    }
}

/// Closed-form coherence
/// `C = 2 D_st / D * r0 w^2 / (1 + w^2) * |num|^2 / (|D_iw(y_T)|^2 - e^{2 Delta} |D_iw(y_R)|^2)`.
///
/// Fails with [`SnnError::CoherenceBound`] if the value leaves `[0, 1]`.
pub fn coherence_fn(omega: f64, p: &CoherenceParams) -> Result<f64> {
    let q = pieces(omega, p)?;
    let w2 = omega * omega;
    let c = 2.0 * p.d_st / p.d * q.r0 * w2 / (1.0 + w2) * q.num.norm_sqr() / q.power;
    check_bound(omega, c)
}

/// `|S_xs|^2 / (S_xx S_ss)` assembled from the individual spectra.
pub fn coherence_compositional(omega: f64, p: &CoherenceParams) -> Result<f64> {
    if p.d_st == 0.0 {
        return Ok(0.0);
    }
    let sxs = cross_spectrum(omega, p)?;
    let sxx = power_spectrum(omega, p)?;
    check_bound(omega, sxs.norm_sqr() / (sxx * stimulus_spectrum(p)))
}

/// [`coherence_fn`] over a frequency grid, evaluated in parallel.
pub fn coherence_curve(omegas: &[f64], p: &CoherenceParams) -> Result<SpectrumCurve> {
    if omegas.iter().any(|&w| !(w > 0.0)) {
        return Err(SnnError::InvalidArgument("coherence frequencies must be positive".into()));
    }
    let values = omegas
        .par_iter()
        .map(|&w| coherence_fn(w, p))
        .collect::<Result<Vec<_>>>()?;
    SpectrumCurve::new(omegas.to_vec(), values)
}
