//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snnlab::encoding::SpikeTensor;
use snnlab::network::{Architecture, ForwardTrace, LayerKind, Network};
use snnlab::neuron::NeuronConfig;
use snnlab::training::{backward, compute_loss, one_hot};

/// Input index read by each (output unit, weight) pair, enumerated from the
/// output side. `None` where the tap falls into zero padding.
fn connections(net: &Network, l: usize) -> Vec<Option<usize>> {
    let s = net.layers[l].spec;
    match s.kind {
        LayerKind::AvgPool2x2 => Vec::new(),
        LayerKind::FullyConnected | LayerKind::Output => {
            let n_in = s.in_shape.len();
            (0..s.out_shape.len()).flat_map(|_| (0..n_in).map(Some)).collect()
        }
        LayerKind::Conv3x3 => {
            let (cin, h, w) = (s.in_shape.channels, s.in_shape.height as isize, s.in_shape.width as isize);
            let mut out = Vec::new();
            for _k in 0..s.out_shape.channels {
                for oy in 0..h {
                    for ox in 0..w {
                        for c in 0..cin {
                            for ky in 0..3isize {
                                for kx in 0..3isize {
                                    let (y, x) = (oy + ky - 1, ox + kx - 1);
                                    out.push(
                                        (y >= 0 && y < h && x >= 0 && x < w)
                                            .then(|| c * (h * w) as usize + (y * w + x) as usize),
                                    );
                                }
                            }
                        }
                    }
                }
            }
            out
        }
    }
}

/// Synaptic operations recounted event by event from the raw trace.
pub fn brute_force_ops(net: &Network, trace: &ForwardTrace) -> u64 {
    let mut ops = 0u64;
    for l in 0..net.layers.len() {
        let links = connections(net, l);
        for t in 0..trace.steps {
            let input = trace.layer_input(net, l, t);
            ops += links.iter().flatten().filter(|&&j| input[j] != 0.0).count() as u64;
        }
    }
    ops
}

/// `W_l O_{l-1}[t]` computed output-first with explicit loops.
fn weighted_input(net: &Network, l: usize, input: &[f64]) -> Vec<f64> {
    let layer = &net.layers[l];
    let s = layer.spec;
    match s.kind {
        LayerKind::AvgPool2x2 => Vec::new(),
        LayerKind::FullyConnected | LayerKind::Output => {
            let n = s.in_shape.len();
            (0..s.out_shape.len())
                .map(|o| (0..n).map(|j| layer.weights[o * n + j] * input[j]).sum())
                .collect()
        }
        LayerKind::Conv3x3 => {
            let (cin, h, w) = (s.in_shape.channels, s.in_shape.height as isize, s.in_shape.width as isize);
            let mut out = Vec::new();
            for k in 0..s.out_shape.channels {
                for oy in 0..h {
                    for ox in 0..w {
                        let mut acc = 0.0;
                        for c in 0..cin {
                            for ky in 0..3isize {
                                for kx in 0..3isize {
                                    let (y, x) = (oy + ky - 1, ox + kx - 1);
                                    if y >= 0 && y < h && x >= 0 && x < w {
                                        let wi = ((k * cin + c) * 9) + (ky * 3 + kx) as usize;
                                        acc += layer.weights[wi] * input[c * (h * w) as usize + (y * w + x) as usize];
                                    }
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
            out
        }
    }
}

/// ENWSI recomputed from the recorded layer inputs.
pub fn brute_force_enwsi(net: &Network, trace: &ForwardTrace) -> Vec<f64> {
    (0..net.layers.len())
        .map(|l| {
            if !net.layers[l].spec.kind.spikes() {
                return 0.0;
            }
            let mut sq = 0.0;
            for t in 0..trace.steps {
                sq += weighted_input(net, l, trace.layer_input(net, l, t)).iter().map(|v| v * v).sum::<f64>();
            }
            sq.sqrt()
        })
        .collect()
}

/// Network with random weights and a binary random input.
pub fn random_case(arch: &str, neuron: NeuronConfig, seed: u64, steps: usize, gain: f64) -> (Network, SpikeTensor) {
    let arch = Architecture::parse(arch).unwrap();
    let net = Network::build(arch, neuron, seed, gain).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
    let n = net.input_size();
    let values = (0..steps * n)
        .map(|_| match rng.random_range(0..4) {
            0 => 1.0,
            1 => -1.0,
            _ => 0.0,
        })
        .collect();
    (net, SpikeTensor::new(steps, n, values, true).unwrap())
}

/// Worst relative gap between backpropagated output-layer gradients and
/// central differences over `coords` random weights, plus how many were checked.
pub fn output_gradient_gap(net: &Network, x: &SpikeTensor, label: usize, coords: usize, h: f64, seed: u64) -> (usize, f64) {
    let y = one_hot(label, net.output_size());
    let (_, trace) = net.forward(x).unwrap();
    let grads = backward(net, &trace, &y).unwrap();
    let last = net.layers.len() - 1;
    let n = net.layers[last].weights.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..coords {
        let i = rng.random_range(0..n);
        let loss_at = |delta: f64| {
            let mut probe = net.clone();
            probe.layers[last].weights[i] += delta;
            let (pred, _) = probe.forward(x).unwrap();
            compute_loss(&pred, &y).unwrap()
        };
        let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        let g = grads.layers[last][i];
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(rel);
        checked += 1;
    }
    (checked, worst)
}
