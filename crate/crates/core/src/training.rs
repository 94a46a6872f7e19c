//! Surrogate-gradient backpropagation through time and mini-batch SGD.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::analysis::{count_synaptic_ops, spike_counts};
use crate::dataset::Dataset;
use crate::encoding::{encode_noisy, stream_rng, NoiseSpec};
use crate::error::{check_len, Result, SnnError};
use crate::network::{grad, ForwardTrace, LayerKind, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.05,
            lr_decay_epochs: Vec::new(),
            lr_decay_factor: 0.1,
            steps: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(SnnError::InvalidArgument("batch_size must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(SnnError::InvalidArgument("steps must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(SnnError::InvalidArgument(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let drops = self.lr_decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.learning_rate * self.lr_decay_factor.powi(drops as i32)
    }
}

/// Per-layer weight gradients; empty for pooling layers.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.layers.iter_mut().flatten().for_each(|g| *g *= c);
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().flatten().all(|&g| g == 0.0)
    }
}

/// `0.5 * sum((prediction - label)^2)`.
pub fn compute_loss(prediction: &[f64], label: &[f64]) -> Result<f64> {
    check_len("loss", label.len(), prediction.len())?;
    Ok(0.5 * prediction.iter().zip(label).map(|(p, y)| (p - y).powi(2)).sum::<f64>())
}

pub fn one_hot(class: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[class] = 1.0;
    v
}

/// Weight gradients of the loss for one forward trace.
///
/// Time runs backwards from the last step; within a step, layers run from the
/// output down. The spike derivative is the surrogate `1/(v_th + eps)` on
/// units that fired. Membrane credit flows to the previous step through the
/// decay factor on non-spiking steps and is cut at resets.
pub fn backward(net: &Network, trace: &ForwardTrace, label: &[f64]) -> Result<GradientSet> {
    check_len("backward label", net.output_size(), label.len())?;
    check_len("backward trace layers", net.layers.len(), trace.layers.len())?;
    let steps = trace.steps;
    let n_layers = net.layers.len();
    for (layer, lt) in net.layers.iter().zip(&trace.layers) {
        let n = layer.spec.out_shape.len();
        let expected = if layer.spec.kind == LayerKind::AvgPool2x2 { 0 } else { steps * n };
        check_len("backward trace length", expected, lt.potential.len())?;
    }

    let cfg = &net.neuron;
    let decay = cfg.decay_factor();
    let n_out = net.output_size();
    let u_final = &trace.output_potential()[(steps - 1) * n_out..];
    // dLoss/dU_L[T]
    let err_final: Vec<f64> = u_final
        .iter()
        .zip(label)
        .map(|(u, y)| (u / steps as f64 - y) / steps as f64)
        .collect();

    let mut grads = GradientSet::zeros_like(net);
    if err_final.iter().all(|&e| e == 0.0) {
        return Ok(grads);
    }
    let mut carry: Vec<Vec<f64>> = net
        .layers
        .iter()
        .map(|l| {
            if l.spec.kind.spikes() {
                vec![0.0; l.spec.out_shape.len()]
            } else {
                Vec::new()
            }
        })
        .collect();

    let mut out_delta = err_final.clone();
    // U_L[T] = sum_t d^(T-t) W_L O[t]; walk t downward multiplying by d.
    for t in (0..steps).rev() {
        if t + 1 < steps {
            out_delta.iter_mut().for_each(|e| *e *= decay);
        }
        let mut delta = out_delta.clone();
        for l in (0..n_layers).rev() {
            let layer = &net.layers[l];
            let spec = &layer.spec;
            let n = spec.out_shape.len();
            if spec.kind.spikes() {
                let spikes = &trace.layers[l].output[t * n..(t + 1) * n];
                let c = &mut carry[l];
                for i in 0..n {
                    let o = spikes[i];
                    let through_membrane = if o > 0.0 { 0.0 } else { c[i] * decay };
                    let d = delta[i] * cfg.surrogate_grad(o) + through_membrane;
                    delta[i] = d;
                    c[i] = d;
                }
            }
            if spec.kind.has_weights() {
                grad::accumulate_weight_grad(spec, trace.layer_input(net, l, t), &delta, &mut grads.layers[l]);
            }
            if l > 0 {
                let mut d_in = vec![0.0; spec.in_shape.len()];
                grad::backprop_input(spec, &layer.weights, &delta, &mut d_in);
                delta = d_in;
            }
        }
    }
    Ok(grads)
}

/// `W <- W - lr * grad`.
pub fn apply_update(net: &mut Network, grads: &GradientSet, lr: f64) -> Result<()> {
    check_len("update layers", net.layers.len(), grads.layers.len())?;
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        check_len("update weights", layer.weights.len(), g.len())?;
        for (w, dg) in layer.weights.iter_mut().zip(g) {
            *w -= lr * dg;
        }
    }
    Ok(())
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What happened during one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    /// Mean over training samples of `sum((pred - label)^2)`, from the training passes.
    pub sse_train: f64,
    pub train_accuracy: f64,
    pub sse_test: Option<f64>,
    pub test_accuracy: Option<f64>,
    /// Fraction of hidden units firing per time-step.
    pub spike_activity: f64,
    /// Same fraction, per spiking layer.
    pub layer_activity: Vec<f64>,
    /// Mean synaptic operations per training sample.
    pub synaptic_ops: f64,
}

struct SampleResult {
    loss: f64,
    sse: f64,
    correct: bool,
    grads: GradientSet,
    spikes: Vec<u64>,
    ops: u64,
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Train `net` in place. `test` (if given) is scored clean after every epoch.
pub fn train(
    net: &mut Network,
    data: &Dataset,
    test: Option<&Dataset>,
    tcfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    tcfg.validate()?;
    if data.is_empty() {
        return Err(SnnError::InvalidArgument("training set is empty".into()));
    }
    check_len("dataset pixels", net.input_size(), data.pixel_count())?;
    let n_classes = net.output_size();
    let normalized = data.normalized()?;
    let spiking: Vec<usize> = (0..net.layers.len())
        .filter(|&l| net.layers[l].spec.kind.spikes())
        .collect();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(tcfg.epochs);
    for epoch in 0..tcfg.epochs {
        let lr = tcfg.learning_rate_at(epoch);
        let epoch_seed = mix_seed(tcfg.seed, epoch as u64 + 1);
        order.shuffle(&mut stream_rng(epoch_seed, u64::MAX));

        let (mut loss_sum, mut sse_sum, mut correct) = (0.0, 0.0, 0usize);
        let mut spike_sum = vec![0u64; net.layers.len()];
        let mut ops_sum = 0u64;
        for (b, batch) in order.chunks(tcfg.batch_size).enumerate() {
            let frozen: &Network = net;
            let results: Vec<Result<SampleResult>> = batch
                .par_iter()
                .map(|&idx| {
                    let mut rng = stream_rng(epoch_seed, idx as u64);
                    let x = encode_noisy(&normalized[idx], tcfg.steps, &NoiseSpec::clean(), &mut rng)?;
                    let (pred, trace) = frozen.forward(&x)?;
                    let label = one_hot(data.labels[idx], n_classes);
                    let loss = compute_loss(&pred, &label)?;
                    let grads = backward(frozen, &trace, &label)?;
                    Ok(SampleResult {
                        loss,
                        sse: 2.0 * loss,
                        correct: argmax(&pred) == data.labels[idx],
                        grads,
                        spikes: spike_counts(frozen, &trace),
                        ops: count_synaptic_ops(frozen, &trace),
                    })
                })
                .collect();

            // fixed-order reduction
            let mut total = GradientSet::zeros_like(net);
            let mut batch_loss = 0.0;
            for r in results {
                let r = r?;
                batch_loss += r.loss;
                sse_sum += r.sse;
                correct += r.correct as usize;
                total.add_assign(&r.grads);
                for (s, c) in spike_sum.iter_mut().zip(&r.spikes) {
                    *s += c;
                }
                ops_sum += r.ops;
            }
            if !batch_loss.is_finite() || total.layers.iter().flatten().any(|g| !g.is_finite()) {
                return Err(SnnError::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss / batch.len() as f64,
                });
            }
            loss_sum += batch_loss;
            total.scale(1.0 / batch.len() as f64);
            apply_update(net, &total, lr)?;
        }

        let n = data.len() as f64;
        let layer_activity: Vec<f64> = spiking
            .iter()
            .map(|&l| spike_sum[l] as f64 / (n * tcfg.steps as f64 * net.layers[l].spec.out_shape.len() as f64))
            .collect();
        let hidden_units: usize = spiking.iter().map(|&l| net.layers[l].spec.out_shape.len()).sum();
        let hidden_spikes: u64 = spiking.iter().map(|&l| spike_sum[l]).sum();
        let spike_activity = if hidden_units == 0 {
            0.0
        } else {
            hidden_spikes as f64 / (n * tcfg.steps as f64 * hidden_units as f64)
        };

        let (sse_test, test_accuracy) = match test {
            Some(ts) => {
                let s = score(net, ts, tcfg.steps, mix_seed(tcfg.seed ^ 0x7e57, epoch as u64))?;
                (Some(s.sse), Some(s.accuracy))
            }
            None => (None, None),
        };
        history.push(EpochRecord {
            epoch,
            learning_rate: lr,
            mean_loss: loss_sum / n,
            sse_train: sse_sum / n,
            train_accuracy: correct as f64 / n,
            sse_test,
            test_accuracy,
            spike_activity,
            layer_activity,
            synaptic_ops: ops_sum as f64 / n,
        });
    }
    Ok(history)
}

/// Accuracy and mean SSE on clean inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub accuracy: f64,
    pub sse: f64,
}

pub fn score(net: &Network, data: &Dataset, steps: usize, seed: u64) -> Result<Score> {
    if data.is_empty() {
        return Err(SnnError::InvalidArgument("empty dataset".into()));
    }
    let normalized = data.normalized()?;
    let n_classes = net.output_size();
    let per: Vec<Result<(bool, f64)>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let x = encode_noisy(&normalized[i], steps, &NoiseSpec::clean(), &mut stream_rng(seed, i as u64))?;
            let (pred, _) = net.forward(&x)?;
            let label = one_hot(data.labels[i], n_classes);
            Ok((argmax(&pred) == data.labels[i], 2.0 * compute_loss(&pred, &label)?))
        })
        .collect();
    let (mut correct, mut sse) = (0usize, 0.0);
    for r in per {
        let (c, s) = r?;
        correct += c as usize;
        sse += s;
    }
    let n = data.len() as f64;
    Ok(Score {
        accuracy: correct as f64 / n,
        sse: sse / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::SpikeTensor;
    use crate::network::Architecture;
    use crate::neuron::{NeuronConfig, TimeConstant};
    use rand::Rng;

    #[test]
    fn loss_examples() {
        assert_eq!(compute_loss(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(compute_loss(&[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 0.5);
        assert!((compute_loss(&[0.2, 0.9], &[0.0, 1.0]).unwrap() - 0.025).abs() < 1e-15);
        assert!(compute_loss(&[0.0], &[0.0, 1.0]).is_err());
    }

    fn random_input(steps: usize, units: usize, p: f64, seed: u64) -> SpikeTensor {
        let mut rng = stream_rng(seed, 0);
        let v = (0..steps * units)
            .map(|_| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            .collect();
        SpikeTensor::new(steps, units, v, true).unwrap()
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let arch = Architecture::parse("3x1-2o").unwrap();
        let net = Network::from_layers(arch, NeuronConfig::default(), vec![vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]]).unwrap();
        let x = SpikeTensor::new(1, 3, vec![1.0, 1.0, 0.0], true).unwrap();
        let (pred, trace) = net.forward(&x).unwrap();
        assert_eq!(pred, vec![1.0, 1.0]);
        let g = backward(&net, &trace, &pred).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn single_hidden_unit_chain_rule() {
        // input(1) -> hidden FC(1) -> output(1), T = 1.
        let arch = Architecture::parse("1x1-1FC-1o").unwrap();
        let cfg = NeuronConfig::new(TimeConstant::Finite(30.0), 1.0, 0.0, 0.25).unwrap();
        let (w1, w2) = (1.5, 0.8);
        let net = Network::from_layers(arch, cfg, vec![vec![w1], vec![w2]]).unwrap();
        let x = SpikeTensor::new(1, 1, vec![1.0], true).unwrap();
        let (pred, trace) = net.forward(&x).unwrap();
        assert_eq!(pred, vec![w2]);
        let label = [0.0];
        let g = backward(&net, &trace, &label).unwrap();
        // dL/dU = (U/T - y)/T = 0.8; dU/dO = w2; dO/da = 1/(1 + 0.25); da/dw1 = x = 1
        let expect_w1 = 0.8 * w2 * (1.0 / 1.25) * 1.0;
        let expect_w2 = 0.8 * 1.0;
        assert!((g.layers[0][0] - expect_w1).abs() < 1e-15);
        assert!((g.layers[1][0] - expect_w2).abs() < 1e-15);
    }

    #[test]
    fn non_spiking_carry_uses_decay() {
        // Hidden unit fires only at t = 1 after integrating at t = 0.
        let arch = Architecture::parse("1x1-1FC-1o").unwrap();
        let cfg = NeuronConfig::lif(10.0).unwrap();
        let d = cfg.decay_factor();
        let net = Network::from_layers(arch, cfg, vec![vec![0.8], vec![2.0]]).unwrap();
        let x = SpikeTensor::new(2, 1, vec![1.0, 1.0], true).unwrap();
        let (pred, trace) = net.forward(&x).unwrap();
        let spikes = &trace.layers[0].output;
        assert_eq!(spikes, &vec![0.0, 1.0]);
        assert_eq!(pred, vec![1.0]);
        let g = backward(&net, &trace, &[0.0]).unwrap();
        // dL/dU_L[T] = (1 - 0)/2 = 0.5; dL/dO[1] = 0.5 * 2; delta a_1 = 1.0 * 1;
        // delta a_0 = d * delta a_1 (no spike at t=0); dw1 = (delta a_1 + delta a_0) * 1
        let da1 = 0.5 * 2.0 * 1.0;
        let da0 = d * da1;
        assert!((g.layers[0][0] - (da1 + da0)).abs() < 1e-14);
        assert!((g.layers[1][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_shapes_match_weights() {
        for arch in ["8x8-4C3-2P-6FC-3o", "4x4x2-3C3-3C3-2P-2o", "5x1-7FC-4FC-2o"] {
            let a = Architecture::parse(arch).unwrap();
            let net = Network::build(a, NeuronConfig::lif(30.0).unwrap(), 3, 2.0).unwrap();
            let x = random_input(10, net.input_size(), 0.4, 8);
            let (_, trace) = net.forward(&x).unwrap();
            let g = backward(&net, &trace, &one_hot(1, net.output_size())).unwrap();
            for (gl, l) in g.layers.iter().zip(&net.layers) {
                assert_eq!(gl.len(), l.weights.len());
            }
        }
    }

    #[test]
    fn output_gradient_matches_finite_differences() {
        let a = Architecture::parse("6x6-3C3-2P-8FC-4o").unwrap();
        let net = Network::build(a, NeuronConfig::lif(20.0).unwrap(), 17, 3.0).unwrap();
        let x = random_input(15, 36, 0.3, 4);
        let label = one_hot(2, 4);
        let (_, trace) = net.forward(&x).unwrap();
        let g = backward(&net, &trace, &label).unwrap();
        let last = net.layers.len() - 1;
        let h = 1e-4;
        for k in 0..net.layers[last].weights.len() {
            let mut plus = net.clone();
            plus.layers[last].weights[k] += h;
            let mut minus = net.clone();
            minus.layers[last].weights[k] -= h;
            let lp = compute_loss(&plus.forward(&x).unwrap().0, &label).unwrap();
            let lm = compute_loss(&minus.forward(&x).unwrap().0, &label).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let an = g.layers[last][k];
            let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-4, "coord {k}: {an} vs {fd}");
        }
    }

    #[test]
    fn lr_schedule() {
        let cfg = TrainConfig {
            learning_rate: 1.0,
            lr_decay_epochs: vec![70, 100],
            lr_decay_factor: 0.1,
            ..Default::default()
        };
        assert_eq!(cfg.learning_rate_at(0), 1.0);
        assert!((cfg.learning_rate_at(70) - 0.1).abs() < 1e-15);
        assert!((cfg.learning_rate_at(120) - 0.01).abs() < 1e-15);
    }
}
