//! Layered SNN: architecture strings, weights and the T-step forward pass.
//!
//! Hidden convolution and fully-connected layers spike; average pooling is a
//! weightless linear stage whose real-valued output feeds the next layer's
//! weighted sum; the final layer accumulates without spiking.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::encoding::{stream_rng, SpikeTensor};
use crate::error::{check_len, Result, SnnError};
use crate::neuron::{LayerState, NeuronConfig};

/// Channel-major activation shape. Dense vectors are `(n, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn flat(n: usize) -> Self {
        Self::new(n, 1, 1)
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.height == 1 && self.width == 1 {
            write!(f, "{}", self.channels)
        } else {
            write!(f, "{}x{}x{}", self.channels, self.height, self.width)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv3x3,
    AvgPool2x2,
    FullyConnected,
    Output,
}

impl LayerKind {
    pub fn has_weights(&self) -> bool {
        !matches!(self, LayerKind::AvgPool2x2)
    }

    /// Hidden layers made of spiking neurons.
    pub fn spikes(&self) -> bool {
        matches!(self, LayerKind::Conv3x3 | LayerKind::FullyConnected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_shape: Shape,
    pub out_shape: Shape,
}

impl LayerSpec {
    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv3x3 => self.out_shape.channels * self.in_shape.channels * 9,
            LayerKind::AvgPool2x2 => 0,
            LayerKind::FullyConnected | LayerKind::Output => self.out_shape.len() * self.in_shape.len(),
        }
    }

    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv3x3 => self.in_shape.channels * 9,
            LayerKind::AvgPool2x2 => 4,
            LayerKind::FullyConnected | LayerKind::Output => self.in_shape.len(),
        }
    }
}

/// Parsed architecture string such as `16x16-8C3-2P-64FC-2o`.
///
/// Grammar: tokens joined by `-`; the first is `<H>x<W>` or `<H>x<W>x<C>`
/// (`×` is accepted for `x`); then `<n>C3`, `2P` (alias `2s`), `<n>FC`, and a
/// final `<n>o`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    pub fn parse(text: &str) -> Result<Self> {
        let err = |m: String| SnnError::Architecture(m);
        let norm = text.trim().replace('×', "x");
        let mut tokens = norm.split('-').map(str::trim);
        let head = tokens
            .next()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| err("empty architecture".into()))?;
        let dims: Vec<usize> = head
            .split(['x', 'X'])
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(format!("bad input token {head:?}")))?;
        let input = match dims.as_slice() {
            [h, w] => Shape::new(1, *h, *w),
            [h, w, c] => Shape::new(*c, *h, *w),
            _ => return Err(err(format!("bad input token {head:?}"))),
        };
        if input.is_empty() {
            return Err(err("input has zero size".into()));
        }

        let mut layers = Vec::new();
        let mut cur = input;
        for tok in tokens {
            if layers.last().is_some_and(|l: &LayerSpec| l.kind == LayerKind::Output) {
                return Err(err(format!("token {tok:?} after the output layer")));
            }
            let count = |suffix: &str| -> Result<usize> {
                let n: usize = tok[..tok.len() - suffix.len()]
                    .parse()
                    .map_err(|_| err(format!("bad layer token {tok:?}")))?;
                if n == 0 {
                    return Err(err(format!("zero-width layer {tok:?}")));
                }
                Ok(n)
            };
            let spec = if tok.ends_with("C3") {
                let n = count("C3")?;
                if cur.height == 1 && cur.width == 1 && !layers.is_empty() {
                    return Err(err(format!("convolution {tok:?} after a dense layer")));
                }
                LayerSpec {
                    kind: LayerKind::Conv3x3,
                    in_shape: cur,
                    out_shape: Shape::new(n, cur.height, cur.width),
                }
            } else if tok == "2P" || tok == "2p" || tok == "2s" {
                if cur.height < 2 || cur.width < 2 || cur.height % 2 != 0 || cur.width % 2 != 0 {
                    return Err(err(format!("cannot 2x2-pool a {cur} map")));
                }
                LayerSpec {
                    kind: LayerKind::AvgPool2x2,
                    in_shape: cur,
                    out_shape: Shape::new(cur.channels, cur.height / 2, cur.width / 2),
                }
            } else if tok.ends_with("FC") {
                LayerSpec {
                    kind: LayerKind::FullyConnected,
                    in_shape: cur,
                    out_shape: Shape::flat(count("FC")?),
                }
            } else if tok.ends_with('o') {
                LayerSpec {
                    kind: LayerKind::Output,
                    in_shape: cur,
                    out_shape: Shape::flat(count("o")?),
                }
            } else {
                return Err(err(format!("unknown layer token {tok:?}")));
            };
            cur = spec.out_shape;
            layers.push(spec);
        }
        match layers.last() {
            Some(l) if l.kind == LayerKind::Output => {}
            _ => return Err(err("missing output layer (\"<n>o\")".into())),
        }
        Ok(Self { input, layers })
    }

    /// Validate a hand-built layer list.
    pub fn from_layers(input: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(SnnError::Architecture("no layers".into()));
        }
        let mut cur = input;
        for (i, l) in layers.iter().enumerate() {
            if l.in_shape != cur {
                return Err(SnnError::Architecture(format!(
                    "layer {i} expects {} but receives {cur}",
                    l.in_shape
                )));
            }
            let ok = match l.kind {
                LayerKind::Conv3x3 => {
                    l.out_shape.height == cur.height && l.out_shape.width == cur.width
                }
                LayerKind::AvgPool2x2 => {
                    cur.height % 2 == 0
                        && cur.width % 2 == 0
                        && l.out_shape == Shape::new(cur.channels, cur.height / 2, cur.width / 2)
                }
                LayerKind::FullyConnected | LayerKind::Output => {
                    l.out_shape.height == 1 && l.out_shape.width == 1
                }
            };
            if !ok || l.out_shape.is_empty() {
                return Err(SnnError::Architecture(format!("layer {i} has inconsistent shapes")));
            }
            let is_last = i + 1 == layers.len();
            if (l.kind == LayerKind::Output) != is_last {
                return Err(SnnError::Architecture(
                    "exactly one output layer, placed last, is required".into(),
                ));
            }
            cur = l.out_shape;
        }
        Ok(Self { input, layers })
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map(|l| l.out_shape.len()).unwrap_or(0)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.input.height, self.input.width)?;
        if self.input.channels != 1 {
            write!(f, "x{}", self.input.channels)?;
        }
        for l in &self.layers {
            match l.kind {
                LayerKind::Conv3x3 => write!(f, "-{}C3", l.out_shape.channels)?,
                LayerKind::AvgPool2x2 => f.write_str("-2P")?,
                LayerKind::FullyConnected => write!(f, "-{}FC", l.out_shape.len())?,
                LayerKind::Output => write!(f, "-{}o", l.out_shape.len())?,
            }
        }
        Ok(())
    }
}

impl FromStr for Architecture {
    type Err = SnnError;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// A layer's spec plus its weights.
///
/// Conv weights are `[out_c][in_c][ky][kx]`; dense weights are `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
}

impl Layer {
    /// `out = W * input` (or the 2x2 mean for pooling). Zero inputs are skipped.
    pub fn apply(&self, input: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("layer input", self.spec.in_shape.len(), input.len())?;
        check_len("layer output", self.spec.out_shape.len(), out.len())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.spec.kind {
            LayerKind::Conv3x3 => conv_forward(&self.spec, &self.weights, input, out),
            LayerKind::AvgPool2x2 => pool_forward(&self.spec, input, out),
            LayerKind::FullyConnected | LayerKind::Output => {
                let n_in = input.len();
                let active: Vec<(usize, f64)> = input
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect();
                for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(n_in)) {
                    *o = active.iter().map(|&(j, v)| row[j] * v).sum();
                }
            }
        }
        Ok(())
    }

    /// Number of weights engaged by a nonzero activation at input index `j`.
    pub fn fan_out(&self, j: usize) -> u64 {
        let s = &self.spec;
        match s.kind {
            LayerKind::AvgPool2x2 => 0,
            LayerKind::FullyConnected | LayerKind::Output => s.out_shape.len() as u64,
            LayerKind::Conv3x3 => {
                let (h, w) = (s.in_shape.height, s.in_shape.width);
                let pix = j % (h * w);
                let (y, x) = (pix / w, pix % w);
                let rows = 1 + (y > 0) as u64 + (y + 1 < h) as u64;
                let cols = 1 + (x > 0) as u64 + (x + 1 < w) as u64;
                s.out_shape.channels as u64 * rows * cols
            }
        }
    }
}

fn conv_forward(spec: &LayerSpec, w: &[f64], input: &[f64], out: &mut [f64]) {
    let (cin, h, wd) = (spec.in_shape.channels, spec.in_shape.height, spec.in_shape.width);
    let cout = spec.out_shape.channels;
    let plane = h * wd;
    for c in 0..cin {
        for y in 0..h {
            for x in 0..wd {
                let v = input[c * plane + y * wd + x];
                if v == 0.0 {
                    continue;
                }
                // input (y, x) feeds output (y - ky + 1, x - kx + 1)
                for k in 0..cout {
                    let kbase = (k * cin + c) * 9;
                    let obase = k * plane;
                    for ky in 0..3 {
                        let oy = y as isize - ky as isize + 1;
                        if oy < 0 || oy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let ox = x as isize - kx as isize + 1;
                            if ox < 0 || ox >= wd as isize {
                                continue;
                            }
                            out[obase + oy as usize * wd + ox as usize] += w[kbase + ky * 3 + kx] * v;
                        }
                    }
                }
            }
        }
    }
}

fn pool_forward(spec: &LayerSpec, input: &[f64], out: &mut [f64]) {
    let (c, h, w) = (spec.in_shape.channels, spec.in_shape.height, spec.in_shape.width);
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let i = ch * h * w + 2 * oy * w + 2 * ox;
                out[ch * oh * ow + oy * ow + ox] =
                    0.25 * (input[i] + input[i + 1] + input[i + w] + input[i + w + 1]);
            }
        }
    }
}

/// Weighted layers' gradient accumulation and input-gradient routines.
pub(crate) mod grad {
    use super::*;

    /// `grad_w += delta (outer) input`, with conv semantics for conv layers.
    pub fn accumulate_weight_grad(spec: &LayerSpec, input: &[f64], delta: &[f64], grad_w: &mut [f64]) {
        match spec.kind {
            LayerKind::Conv3x3 => {
                let (cin, h, wd) = (spec.in_shape.channels, spec.in_shape.height, spec.in_shape.width);
                let plane = h * wd;
                for c in 0..cin {
                    for y in 0..h {
                        for x in 0..wd {
                            let v = input[c * plane + y * wd + x];
                            if v == 0.0 {
                                continue;
                            }
                            for k in 0..spec.out_shape.channels {
                                let kbase = (k * cin + c) * 9;
                                for ky in 0..3 {
                                    let oy = y as isize - ky as isize + 1;
                                    if oy < 0 || oy >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..3 {
                                        let ox = x as isize - kx as isize + 1;
                                        if ox < 0 || ox >= wd as isize {
                                            continue;
                                        }
                                        grad_w[kbase + ky * 3 + kx] +=
                                            delta[k * plane + oy as usize * wd + ox as usize] * v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::FullyConnected | LayerKind::Output => {
                let n_in = input.len();
                let active: Vec<(usize, f64)> = input
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect();
                if active.is_empty() {
                    return;
                }
                for (row, &d) in grad_w.chunks_exact_mut(n_in).zip(delta) {
                    if d == 0.0 {
                        continue;
                    }
                    for &(j, v) in &active {
                        row[j] += d * v;
                    }
                }
            }
            LayerKind::AvgPool2x2 => {}
        }
    }

    /// `d_input += W^T delta` (or the pooling adjoint).
    pub fn backprop_input(spec: &LayerSpec, weights: &[f64], delta: &[f64], d_input: &mut [f64]) {
        match spec.kind {
            LayerKind::Conv3x3 => {
                let (cin, h, wd) = (spec.in_shape.channels, spec.in_shape.height, spec.in_shape.width);
                let plane = h * wd;
                for k in 0..spec.out_shape.channels {
                    for oy in 0..h {
                        for ox in 0..wd {
                            let d = delta[k * plane + oy * wd + ox];
                            if d == 0.0 {
                                continue;
                            }
                            for c in 0..cin {
                                let kbase = (k * cin + c) * 9;
                                for ky in 0..3 {
                                    let y = oy as isize + ky as isize - 1;
                                    if y < 0 || y >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..3 {
                                        let x = ox as isize + kx as isize - 1;
                                        if x < 0 || x >= wd as isize {
                                            continue;
                                        }
                                        d_input[c * plane + y as usize * wd + x as usize] +=
                                            weights[kbase + ky * 3 + kx] * d;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::AvgPool2x2 => {
                let (c, h, w) = (spec.in_shape.channels, spec.in_shape.height, spec.in_shape.width);
                let (oh, ow) = (h / 2, w / 2);
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = 0.25 * delta[ch * oh * ow + oy * ow + ox];
                            let i = ch * h * w + 2 * oy * w + 2 * ox;
                            d_input[i] += g;
                            d_input[i + 1] += g;
                            d_input[i + w] += g;
                            d_input[i + w + 1] += g;
                        }
                    }
                }
            }
            LayerKind::FullyConnected | LayerKind::Output => {
                let n_in = d_input.len();
                for (row, &d) in weights.chunks_exact(n_in).zip(delta) {
                    if d == 0.0 {
                        continue;
                    }
                    for (di, &w) in d_input.iter_mut().zip(row) {
                        *di += w * d;
                    }
                }
            }
        }
    }
}

/// Weights and neuron parameters of a whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: Architecture,
    pub layers: Vec<Layer>,
    pub neuron: NeuronConfig,
}

/// Per-layer record of one forward pass, each buffer laid out `[t * size + i]`.
///
/// `weighted` holds `W_l O_{l-1}[t]`; `potential` is the pre-reset membrane
/// potential for spiking layers and `U_L[t]` for the output layer; `output`
/// holds spikes (spiking layers) or pooled values (pooling layers).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerTrace {
    pub weighted: Vec<f64>,
    pub potential: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub steps: usize,
    pub input: SpikeTensor,
    pub layers: Vec<LayerTrace>,
}

impl ForwardTrace {
    /// What layer `l` received at step `t`.
    pub fn layer_input<'a>(&'a self, net: &Network, l: usize, t: usize) -> &'a [f64] {
        if l == 0 {
            self.input.step(t)
        } else {
            let n = net.layers[l - 1].spec.out_shape.len();
            &self.layers[l - 1].output[t * n..(t + 1) * n]
        }
    }

    /// Output-layer potential history `U_L[1..=T]`, one row per step.
    pub fn output_potential(&self) -> &[f64] {
        &self.layers.last().expect("network has an output layer").potential
    }
}

impl Network {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights times `gain`, no biases.
    pub fn build(arch: Architecture, neuron: NeuronConfig, init_seed: u64, gain: f64) -> Result<Self> {
        let arch = Architecture::from_layers(arch.input, arch.layers)?;
        let mut rng = stream_rng(init_seed, 0x5eed);
        let layers = arch
            .layers
            .iter()
            .map(|&spec| {
                let bound = gain / (spec.fan_in() as f64).sqrt();
                let weights = (0..spec.weight_count())
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Layer { spec, weights }
            })
            .collect();
        Ok(Self { arch, layers, neuron })
    }

    pub fn from_layers(arch: Architecture, neuron: NeuronConfig, weights: Vec<Vec<f64>>) -> Result<Self> {
        let arch = Architecture::from_layers(arch.input, arch.layers)?;
        check_len("layer weight sets", arch.layers.len(), weights.len())?;
        let layers = arch
            .layers
            .iter()
            .zip(weights)
            .map(|(&spec, w)| {
                check_len("layer weights", spec.weight_count(), w.len())?;
                Ok(Layer { spec, weights: w })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { arch, layers, neuron })
    }

    pub fn input_size(&self) -> usize {
        self.arch.input.len()
    }

    pub fn output_size(&self) -> usize {
        self.arch.output_size()
    }

    /// Run `input.steps()` time-steps from zero membrane state.
    ///
    /// Returns the prediction `U_L[T] / T` and the full trace.
    pub fn forward(&self, input: &SpikeTensor) -> Result<(Vec<f64>, ForwardTrace)> {
        check_len("forward input units", self.input_size(), input.units())?;
        let steps = input.steps();
        if steps == 0 {
            return Err(SnnError::InvalidArgument("input has no time-steps".into()));
        }
        let mut states: Vec<LayerState> = self
            .layers
            .iter()
            .map(|l| LayerState::zeros(l.spec.out_shape.len()))
            .collect();
        let mut traces: Vec<LayerTrace> = self
            .layers
            .iter()
            .map(|l| {
                let n = l.spec.out_shape.len();
                match l.spec.kind {
                    LayerKind::AvgPool2x2 => LayerTrace {
                        output: vec![0.0; steps * n],
                        ..Default::default()
                    },
                    LayerKind::Output => LayerTrace {
                        weighted: vec![0.0; steps * n],
                        potential: vec![0.0; steps * n],
                        output: Vec::new(),
                    },
                    _ => LayerTrace {
                        weighted: vec![0.0; steps * n],
                        potential: vec![0.0; steps * n],
                        output: vec![0.0; steps * n],
                    },
                }
            })
            .collect();

        let mut buf = Vec::new();
        for t in 0..steps {
            for (l, layer) in self.layers.iter().enumerate() {
                let n = layer.spec.out_shape.len();
                let (done, rest) = traces.split_at_mut(l);
                let trace = &mut rest[0];
                let src: &[f64] = if l == 0 {
                    input.step(t)
                } else {
                    let m = self.layers[l - 1].spec.out_shape.len();
                    &done[l - 1].output[t * m..(t + 1) * m]
                };
                let row = t * n..(t + 1) * n;
                match layer.spec.kind {
                    LayerKind::AvgPool2x2 => layer.apply(src, &mut trace.output[row])?,
                    LayerKind::Output => {
                        buf.resize(n, 0.0);
                        layer.apply(src, &mut buf)?;
                        states[l].accumulate_output_step(&buf, &self.neuron)?;
                        trace.weighted[row.clone()].copy_from_slice(&buf);
                        trace.potential[row].copy_from_slice(&states[l].u);
                    }
                    LayerKind::Conv3x3 | LayerKind::FullyConnected => {
                        buf.resize(n, 0.0);
                        layer.apply(src, &mut buf)?;
                        states[l].integrate_step(&buf, &self.neuron, Some(&mut trace.potential[row.clone()]))?;
                        trace.weighted[row.clone()].copy_from_slice(&buf);
                        trace.output[row].copy_from_slice(&states[l].o);
                    }
                }
            }
        }
        let last = states.last().expect("network has an output layer");
        let prediction = last.u.iter().map(|u| u / steps as f64).collect();
        Ok((
            prediction,
            ForwardTrace {
                steps,
                input: input.clone(),
                layers: traces,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::TimeConstant;

    #[test]
    fn parse_desk_architecture() {
        let a = Architecture::parse("16×16-8C3-2P-10o").unwrap();
        assert_eq!(a.input, Shape::new(1, 16, 16));
        let shapes: Vec<Shape> = a.layers.iter().map(|l| l.out_shape).collect();
        assert_eq!(
            shapes,
            vec![Shape::new(8, 16, 16), Shape::new(8, 8, 8), Shape::flat(10)]
        );
        assert_eq!(a.to_string(), "16x16-8C3-2P-10o");
    }

    #[test]
    fn parse_cifar_string() {
        let a = Architecture::parse(
            "32×32×3-64C3-64C3-2P-128C3-128C3-2P-256C3-256C3-256C3-2s-1024FC-10o",
        )
        .unwrap();
        assert_eq!(a.layers.len(), 12);
        assert_eq!(a.layers[10].in_shape, Shape::new(256, 4, 4));
        assert_eq!(a.output_size(), 10);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "16x16", "16x16-8C3", "16x16-10o-4FC", "16x16-0FC-2o", "15x15-2P-2o", "16x16-7Q-2o"] {
            assert!(Architecture::parse(bad).is_err(), "{bad}");
        }
        assert!(Architecture::from_layers(Shape::flat(4), vec![]).is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Architecture::parse("8x8-4C3-2P-6FC-3o").unwrap();
        let n1 = Network::build(a.clone(), NeuronConfig::default(), 42, 1.0).unwrap();
        let n2 = Network::build(a.clone(), NeuronConfig::default(), 42, 1.0).unwrap();
        let n3 = Network::build(a, NeuronConfig::default(), 43, 1.0).unwrap();
        assert_eq!(n1, n2);
        assert_ne!(n1.layers[0].weights, n3.layers[0].weights);
    }

    fn layer(kind: LayerKind, i: Shape, o: Shape, w: Vec<f64>) -> Layer {
        Layer {
            spec: LayerSpec {
                kind,
                in_shape: i,
                out_shape: o,
            },
            weights: w,
        }
    }

    #[test]
    fn pool_of_constant() {
        let l = layer(LayerKind::AvgPool2x2, Shape::new(2, 4, 4), Shape::new(2, 2, 2), vec![]);
        let mut out = vec![0.0; 8];
        l.apply(&[1.0; 32], &mut out).unwrap();
        assert_eq!(out, vec![1.0; 8]);
    }

    #[test]
    fn conv_zero_weights() {
        let l = layer(LayerKind::Conv3x3, Shape::new(1, 4, 4), Shape::new(2, 4, 4), vec![0.0; 18]);
        let mut out = vec![1.0; 32];
        l.apply(&[1.0; 16], &mut out).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_ones_kernel_hand_oracle() {
        let input: Vec<f64> = (1..=16).map(f64::from).collect();
        let l = layer(LayerKind::Conv3x3, Shape::new(1, 4, 4), Shape::new(1, 4, 4), vec![1.0; 9]);
        let mut out = vec![0.0; 16];
        l.apply(&input, &mut out).unwrap();
        // Hand-summed neighborhoods of the grid 1..=16 (row-major 4x4).
        let expect = [
            14.0, 24.0, 30.0, 22.0, //
            33.0, 54.0, 63.0, 45.0, //
            57.0, 90.0, 99.0, 69.0, //
            46.0, 72.0, 78.0, 54.0,
        ];
        assert_eq!(out, expect);
    }

    #[test]
    fn conv_matches_direct_correlation() {
        let spec = LayerSpec {
            kind: LayerKind::Conv3x3,
            in_shape: Shape::new(2, 5, 4),
            out_shape: Shape::new(3, 5, 4),
        };
        let mut rng = stream_rng(5, 5);
        let w: Vec<f64> = (0..spec.weight_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l = Layer { spec, weights: w.clone() };
        let mut out = vec![0.0; 60];
        l.apply(&x, &mut out).unwrap();
        for k in 0..3 {
            for oy in 0..5i64 {
                for ox in 0..4i64 {
                    let mut s = 0.0;
                    for c in 0..2 {
                        for ky in 0..3i64 {
                            for kx in 0..3i64 {
                                let (y, xx) = (oy + ky - 1, ox + kx - 1);
                                if (0..5).contains(&y) && (0..4).contains(&xx) {
                                    s += w[(k * 2 + c) * 9 + (ky * 3 + kx) as usize]
                                        * x[c * 20 + (y * 4 + xx) as usize];
                                }
                            }
                        }
                    }
                    assert!((out[k * 20 + (oy * 4 + ox) as usize] - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_input_predicts_zero() {
        let a = Architecture::parse("8x8-4C3-2P-6FC-3o").unwrap();
        let net = Network::build(a, NeuronConfig::lif(30.0).unwrap(), 1, 1.0).unwrap();
        let (pred, trace) = net.forward(&SpikeTensor::zeros(12, 64)).unwrap();
        assert_eq!(pred, vec![0.0; 3]);
        assert!(trace.layers.iter().all(|l| l.potential.len() == 0 || l.potential.len() % 12 == 0));
    }

    #[test]
    fn single_step_fc_hand_trace() {
        // identity hidden layer with threshold 0.5: unit 0 fires on the first step
        let arch = Architecture::parse("2x1-2FC-3o").unwrap();
        let cfg = NeuronConfig::new(TimeConstant::Infinite, 0.5, 0.0, 0.0).unwrap();
        let out_w = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let net = Network::from_layers(arch, cfg, vec![vec![1.0, 0.0, 0.0, 1.0], out_w]).unwrap();
        let input = SpikeTensor::new(1, 2, vec![1.0, 0.0], true).unwrap();
        let (pred, _) = net.forward(&input).unwrap();
        // hidden spike on unit 0 selects column 0 of the output weights
        assert_eq!(pred, vec![0.1, 0.3, 0.5]);
    }

    #[test]
    fn if_output_grows_linearly_in_steps() {
        let arch = Architecture::parse("3x1-2FC-2o").unwrap();
        let cfg = NeuronConfig::new(TimeConstant::Infinite, 1e9, 0.0, 0.0).unwrap();
        let net = Network::from_layers(arch, cfg, vec![vec![0.5; 6], vec![1.0, -1.0, 2.0, 0.5]]).unwrap();
        for steps in [1usize, 2, 7] {
            let input = SpikeTensor::new(steps, 3, vec![1.0; steps * 3], true).unwrap();
            let (_, trace) = net.forward(&input).unwrap();
            // hidden layer never fires, so the output layer sees nothing
            assert!(trace.output_potential().iter().all(|&u| u == 0.0));
        }
        // drive the output directly from the input instead
        let arch = Architecture::parse("3x1-2o").unwrap();
        let net = Network::from_layers(arch, cfg, vec![vec![0.5, 0.25, 0.25, 1.0, 0.0, -1.0]]).unwrap();
        for steps in [1usize, 2, 7] {
            let input = SpikeTensor::new(steps, 3, vec![1.0; steps * 3], true).unwrap();
            let (pred, trace) = net.forward(&input).unwrap();
            let u = trace.output_potential();
            assert_eq!(&u[(steps - 1) * 2..], &[steps as f64, 0.0]);
            assert_eq!(pred, vec![1.0, 0.0]);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let a = Architecture::parse("6x6-3C3-2P-5FC-2o").unwrap();
        let net = Network::build(a, NeuronConfig::lif(30.0).unwrap(), 9, 2.0).unwrap();
        let mut rng = stream_rng(1, 1);
        let vals: Vec<f64> = (0..20 * 36).map(|_| if rng.random::<f64>() < 0.3 { 1.0 } else { 0.0 }).collect();
        let x = SpikeTensor::new(20, 36, vals, true).unwrap();
        let (p1, t1) = net.forward(&x).unwrap();
        let (p2, t2) = net.forward(&x).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(t1, t2);
        // hidden outputs stay binary
        for (l, layer) in net.layers.iter().enumerate() {
            if layer.spec.kind.spikes() {
                assert!(t1.layers[l].output.iter().all(|&o| o == 0.0 || o == 1.0));
            }
        }
    }

    #[test]
    fn conv_fan_out_boundaries() {
        let l = layer(LayerKind::Conv3x3, Shape::new(1, 4, 4), Shape::new(2, 4, 4), vec![0.0; 18]);
        assert_eq!(l.fan_out(0), 2 * 4); // corner
        assert_eq!(l.fan_out(1), 2 * 6); // edge
        assert_eq!(l.fan_out(5), 2 * 9); // interior
    }
}
