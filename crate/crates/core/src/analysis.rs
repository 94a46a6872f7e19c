//! Measurements over forward traces: spectra, critical frequency, ENWSI,
//! spiking activity, synaptic operations, and noisy evaluation.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::dataset::Dataset;
use crate::encoding::{encode_noisy, stream_rng, NoiseSpec};
use crate::error::{Result, SnnError};
use crate::network::{ForwardTrace, LayerKind, Network};
use crate::training::{argmax, compute_loss, mix_seed, one_hot};

/// Values sampled on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpectrumCurve {
    pub fn new(frequencies: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if frequencies.len() != values.len() {
            return Err(SnnError::mismatch("spectrum curve", frequencies.len(), values.len()));
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SnnError::InvalidArgument("frequencies must be strictly increasing".into()));
        }
        Ok(Self { frequencies, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Single-sided DFT magnitude of a length-`T` series, bins `0..=T/2`.
///
/// Frequencies are normalized (`k / T`, so Nyquist is 0.5). With `remove_mean`
/// the series is centered first, which empties the DC bin.
pub fn spike_spectrum(series: &[f64], remove_mean: bool) -> Result<SpectrumCurve> {
    let n = series.len();
    if n < 2 {
        return Err(SnnError::InvalidArgument("spectrum needs at least 2 time-steps".into()));
    }
    let mean = if remove_mean {
        series.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x - mean, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let frequencies = (0..bins).map(|k| k as f64 / n as f64).collect();
    let values = buf[..bins].iter().map(|c| c.norm()).collect();
    SpectrumCurve::new(frequencies, values)
}

/// Mean single-sided spectrum over several equal-length series.
pub fn mean_spectrum<'a, I>(series: I, remove_mean: bool) -> Result<SpectrumCurve>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc: Option<SpectrumCurve> = None;
    let mut count = 0usize;
    for s in series {
        let sp = spike_spectrum(s, remove_mean)?;
        match acc.as_mut() {
            None => acc = Some(sp),
            Some(a) => {
                if a.len() != sp.len() {
                    return Err(SnnError::mismatch("mean spectrum", a.len(), sp.len()));
                }
                a.values.iter_mut().zip(&sp.values).for_each(|(x, y)| *x += y);
            }
        }
        count += 1;
    }
    let mut a = acc.ok_or_else(|| SnnError::InsufficientData("no series to average".into()))?;
    a.values.iter_mut().for_each(|v| *v /= count as f64);
    Ok(a)
}

/// Smallest frequency whose cumulative power (squared magnitude) reaches
/// `fraction` of the total.
pub fn critical_frequency(spectrum: &SpectrumCurve, fraction: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(SnnError::InvalidArgument(format!("fraction {fraction} outside [0, 1]")));
    }
    let total: f64 = spectrum.values.iter().map(|v| v * v).sum();
    if !(total > 0.0) {
        return Err(SnnError::InsufficientData("spectrum has zero total power".into()));
    }
    let target = fraction * total;
    let mut cum = 0.0;
    for (f, v) in spectrum.frequencies.iter().zip(&spectrum.values) {
        cum += v * v;
        // relative slack absorbs summation rounding at fraction = 1
        if cum >= target * (1.0 - 1e-12) {
            return Ok(*f);
        }
    }
    Ok(*spectrum.frequencies.last().expect("non-empty spectrum"))
}

/// Euclidean norm of every weighted input `W_l O_{l-1}[t]` per spiking layer.
///
/// Layers that do not spike report 0.
pub fn enwsi(trace: &ForwardTrace, net: &Network) -> Vec<f64> {
    net.layers
        .iter()
        .zip(&trace.layers)
        .map(|(l, lt)| {
            if l.spec.kind.spikes() {
                lt.weighted.iter().map(|x| x * x).sum::<f64>().sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// Event-driven synaptic operations: every nonzero activation entering a
/// weighted layer costs that input's fan-out.
pub fn count_synaptic_ops(net: &Network, trace: &ForwardTrace) -> u64 {
    let mut ops = 0u64;
    for (l, layer) in net.layers.iter().enumerate() {
        if !layer.spec.kind.has_weights() {
            continue;
        }
        for t in 0..trace.steps {
            for (j, &v) in trace.layer_input(net, l, t).iter().enumerate() {
                if v != 0.0 {
                    ops += layer.fan_out(j);
                }
            }
        }
    }
    ops
}

/// Spikes emitted per layer (0 for non-spiking layers).
pub fn spike_counts(net: &Network, trace: &ForwardTrace) -> Vec<u64> {
    net.layers
        .iter()
        .zip(&trace.layers)
        .map(|(l, lt)| {
            if l.spec.kind.spikes() {
                lt.output.iter().filter(|&&o| o != 0.0).count() as u64
            } else {
                0
            }
        })
        .collect()
}

/// Hidden spikes over `hidden units x T`.
pub fn spike_activity(net: &Network, trace: &ForwardTrace) -> f64 {
    let units: usize = net
        .layers
        .iter()
        .filter(|l| l.spec.kind.spikes())
        .map(|l| l.spec.out_shape.len())
        .sum();
    if units == 0 {
        return 0.0;
    }
    let spikes: u64 = spike_counts(net, trace).iter().sum();
    spikes as f64 / (units * trace.steps) as f64
}

/// Per-step weighted input of one output unit.
pub fn target_neuron_series(net: &Network, trace: &ForwardTrace, unit: usize) -> Vec<f64> {
    let n = net.output_size();
    let last = trace.layers.last().expect("network has an output layer");
    (0..trace.steps).map(|t| last.weighted[t * n + unit]).collect()
}

/// 70%-power critical frequency of the target output neuron's input stream.
///
/// `None` when the stream carries no power (the neuron received nothing).
pub fn target_critical_frequency(net: &Network, trace: &ForwardTrace, unit: usize, fraction: f64) -> Result<Option<f64>> {
    let series = target_neuron_series(net, trace, unit);
    let sp = spike_spectrum(&series, true)?;
    match critical_frequency(&sp, fraction) {
        Ok(f) => Ok(Some(f)),
        Err(SnnError::InsufficientData(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Aggregate metrics of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub accuracy: f64,
    /// Mean over samples of `sum((pred - label)^2)`.
    pub sse: f64,
    pub spike_activity: f64,
    /// Total over every evaluated (sample, seed) pair.
    pub synaptic_ops: u64,
    pub evaluations: usize,
    /// Mean per-sample ENWSI for each layer (0 for non-spiking layers).
    pub enwsi: Vec<f64>,
    /// Target-neuron critical frequency per evaluation that carried power.
    pub critical_freqs: Vec<f64>,
}

impl RunMetrics {
    pub fn synaptic_ops_per_sample(&self) -> f64 {
        self.synaptic_ops as f64 / self.evaluations.max(1) as f64
    }

    pub fn mean_critical_frequency(&self) -> Option<f64> {
        if self.critical_freqs.is_empty() {
            None
        } else {
            Some(self.critical_freqs.iter().sum::<f64>() / self.critical_freqs.len() as f64)
        }
    }
}

pub const CRITICAL_POWER_FRACTION: f64 = 0.7;

struct SampleEval {
    correct: bool,
    sse: f64,
    spikes: u64,
    ops: u64,
    enwsi: Vec<f64>,
    critical: Option<f64>,
}

/// Encoding seed used for sample `i` under evaluation seed `seed`.
pub fn evaluation_rng(seed: u64, i: usize) -> rand_chacha::ChaCha8Rng {
    stream_rng(mix_seed(seed, 0xe7a1), i as u64)
}

/// Run every sample under `noise` for each seed and average.
pub fn evaluate(net: &Network, data: &Dataset, noise: &NoiseSpec, steps: usize, seeds: &[u64]) -> Result<RunMetrics> {
    if seeds.is_empty() {
        return Err(SnnError::InvalidArgument("no evaluation seeds".into()));
    }
    if data.is_empty() {
        return Err(SnnError::InvalidArgument("empty dataset".into()));
    }
    let normalized = data.normalized()?;
    let n_classes = net.output_size();
    let hidden_units: usize = net
        .layers
        .iter()
        .filter(|l| l.spec.kind.spikes())
        .map(|l| l.spec.out_shape.len())
        .sum();

    let jobs: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| (0..data.len()).map(move |i| (s, i)))
        .collect();
    let per: Vec<Result<SampleEval>> = jobs
        .par_iter()
        .map(|&(seed, i)| {
            let x = encode_noisy(&normalized[i], steps, noise, &mut evaluation_rng(seed, i))?;
            let (pred, trace) = net.forward(&x)?;
            let label = data.labels[i];
            Ok(SampleEval {
                correct: argmax(&pred) == label,
                sse: 2.0 * compute_loss(&pred, &one_hot(label, n_classes))?,
                spikes: spike_counts(net, &trace).iter().sum(),
                ops: count_synaptic_ops(net, &trace),
                enwsi: enwsi(&trace, net),
                critical: target_critical_frequency(net, &trace, label, CRITICAL_POWER_FRACTION)?,
            })
        })
        .collect();

    let evaluations = jobs.len();
    let mut correct = 0usize;
    let mut sse = 0.0;
    let mut spikes = 0u64;
    let mut ops = 0u64;
    let mut enwsi_sum = vec![0.0; net.layers.len()];
    let mut critical_freqs = Vec::new();
    for r in per {
        let r = r?;
        correct += r.correct as usize;
        sse += r.sse;
        spikes += r.spikes;
        ops += r.ops;
        enwsi_sum.iter_mut().zip(&r.enwsi).for_each(|(a, b)| *a += b);
        critical_freqs.extend(r.critical);
    }
    let n = evaluations as f64;
    Ok(RunMetrics {
        accuracy: correct as f64 / n,
        sse: sse / n,
        spike_activity: if hidden_units == 0 {
            0.0
        } else {
            spikes as f64 / (n * steps as f64 * hidden_units as f64)
        },
        synaptic_ops: ops,
        evaluations,
        enwsi: enwsi_sum.into_iter().map(|v| v / n).collect(),
        critical_freqs,
    })
}

/// Kind of layer each ENWSI entry belongs to, for labelling output.
pub fn spiking_layer_indices(net: &Network) -> Vec<usize> {
    net.layers
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l.spec.kind, LayerKind::Conv3x3 | LayerKind::FullyConnected))
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_of_zeros_and_constant() {
        let z = spike_spectrum(&[0.0; 100], false).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert_eq!(z.len(), 51);

        let c = spike_spectrum(&[1.0; 100], false).unwrap();
        assert!((c.values[0] - 100.0).abs() < 1e-9);
        assert!(c.values[1..].iter().all(|&v| v < 1e-9));
        assert_eq!(critical_frequency(&c, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn alternating_train_peaks_at_nyquist() {
        let s: Vec<f64> = (0..100).map(|t| if t % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let sp = spike_spectrum(&s, true).unwrap();
        let (imax, _) = sp
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(imax, 50);
        assert_eq!(sp.frequencies[50], 0.5);
    }

    #[test]
    fn flat_spectrum_critical_frequency() {
        let freqs: Vec<f64> = (0..=50).map(|k| k as f64 / 100.0).collect();
        let sp = SpectrumCurve::new(freqs, vec![1.0; 51]).unwrap();
        // 36 of 51 bins is the first to reach 70%
        assert!((critical_frequency(&sp, 0.7).unwrap() - 0.35).abs() < 1e-12);
        assert!(critical_frequency(&SpectrumCurve::new(vec![0.0, 0.5], vec![0.0, 0.0]).unwrap(), 0.7).is_err());
    }

    #[test]
    fn critical_frequency_monotone_in_fraction() {
        let freqs: Vec<f64> = (0..=20).map(|k| k as f64 / 40.0).collect();
        let vals: Vec<f64> = (0..=20).map(|k| ((k * 7919) % 13) as f64 + 0.5).collect();
        let sp = SpectrumCurve::new(freqs, vals).unwrap();
        let mut prev = 0.0;
        for i in 0..=100 {
            let f = critical_frequency(&sp, i as f64 / 100.0).unwrap();
            assert!(f >= prev);
            prev = f;
        }
    }
}
