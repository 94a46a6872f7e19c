//! Versioned little-endian network checkpoints.
//!
//! Layout:
//!
//! ```text
//! magic      8 bytes  "SNNLABCK"
//! version    u32      1
//! arch_len   u32      byte length of the architecture string
//! arch       bytes    UTF-8, e.g. "16x16-8C3-2P-64FC-2o"
//! tau_m      f64      +inf for the IF neuron
//! v_th       f64
//! u_rest     f64
//! epsilon    f64
//! layers     u32
//! per layer:
//!   kind     u8       0 conv3x3, 1 avgpool2x2, 2 fully connected, 3 output
//!   in       3 x u32  channels, height, width
//!   out      3 x u32
//!   count    u64      number of weights
//!   weights  count x f64
//! ```

use std::path::Path;

use crate::error::{Result, SnnError};
use crate::network::{Architecture, LayerKind, Network, Shape};
use crate::neuron::{NeuronConfig, TimeConstant};

pub const MAGIC: &[u8; 8] = b"SNNLABCK";
pub const VERSION: u32 = 1;

fn kind_code(kind: LayerKind) -> u8 {
    match kind {
        LayerKind::Conv3x3 => 0,
        LayerKind::AvgPool2x2 => 1,
        LayerKind::FullyConnected => 2,
        LayerKind::Output => 3,
    }
}

fn put_shape(out: &mut Vec<u8>, s: Shape) {
    for d in [s.channels, s.height, s.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
}

pub fn write_checkpoint(net: &Network) -> Vec<u8> {
    let arch = net.arch.to_string();
    let mut out = Vec::with_capacity(64 + 8 * net.layers.iter().map(|l| l.weights.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
    out.extend_from_slice(arch.as_bytes());
    let tau = match net.neuron.tau_m() {
        TimeConstant::Finite(t) => t,
        TimeConstant::Infinite => f64::INFINITY,
    };
    for v in [tau, net.neuron.v_th(), net.neuron.u_rest(), net.neuron.epsilon()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for layer in &net.layers {
        out.push(kind_code(layer.spec.kind));
        put_shape(&mut out, layer.spec.in_shape);
        put_shape(&mut out, layer.spec.out_shape);
        out.extend_from_slice(&(layer.weights.len() as u64).to_le_bytes());
        for w in &layer.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            SnnError::Checkpoint(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn shape(&mut self, what: &str) -> Result<Shape> {
        let c = self.u32(what)? as usize;
        let h = self.u32(what)? as usize;
        let w = self.u32(what)? as usize;
        Ok(Shape::new(c, h, w))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(SnnError::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(SnnError::Checkpoint(format!("unsupported version {version}")));
    }
    let len = r.u32("architecture length")? as usize;
    let text = std::str::from_utf8(r.take(len, "architecture")?)
        .map_err(|_| SnnError::Checkpoint("architecture string is not UTF-8".into()))?;
    let arch = Architecture::parse(text)?;
    let tau = r.f64("tau_m")?;
    let tau = if tau == f64::INFINITY {
        TimeConstant::Infinite
    } else {
        TimeConstant::Finite(tau)
    };
    let neuron = NeuronConfig::new(tau, r.f64("v_th")?, r.f64("u_rest")?, r.f64("epsilon")?)?;
    let count = r.u32("layer count")? as usize;
    if count != arch.layers.len() {
        return Err(SnnError::Checkpoint(format!(
            "{count} layers stored, architecture {text} has {}",
            arch.layers.len()
        )));
    }
    let mut weights = Vec::with_capacity(count);
    for (i, spec) in arch.layers.iter().enumerate() {
        let kind = r.u8("layer kind")?;
        let in_shape = r.shape("input shape")?;
        let out_shape = r.shape("output shape")?;
        if kind != kind_code(spec.kind) || in_shape != spec.in_shape || out_shape != spec.out_shape {
            return Err(SnnError::Checkpoint(format!("layer {i} does not match the architecture")));
        }
        let n = r.u64("weight count")? as usize;
        if n != spec.weight_count() {
            return Err(SnnError::Checkpoint(format!(
                "layer {i}: {n} weights stored, expected {}",
                spec.weight_count()
            )));
        }
        let raw = r.take(n.checked_mul(8).ok_or_else(|| SnnError::Checkpoint("weight count overflow".into()))?, "weights")?;
        weights.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        );
    }
    if r.pos != bytes.len() {
        return Err(SnnError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Network::from_layers(arch, neuron, weights)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(net)).map_err(|e| SnnError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path).map_err(|e| SnnError::io(path, e))?;
    read_checkpoint(&bytes)
}
