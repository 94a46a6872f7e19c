//! Pixel normalization and Poisson rate coding, clean and noisy.
//!
//! Normalized pixels live in `[-1, 1]`. A unit fires with probability
//! `|pixel|` per time-step and the spike carries the pixel's sign.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SnnError};

/// Deterministic random stream for `(seed, stream)`, e.g. one per sample.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    None,
    Gaussian,
    Impulse,
}

/// Where noise enters the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Added to the pixel before the uniform comparison; output stays binary.
    PixelNoise,
    /// Added to the spike values after Poisson generation; output is real-valued.
    SpikeNoise,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::None => "none",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Impulse => "impulse",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = SnnError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(NoiseKind::None),
            "gaussian" => Ok(NoiseKind::Gaussian),
            "impulse" => Ok(NoiseKind::Impulse),
            other => Err(SnnError::InvalidArgument(format!("unknown noise kind {other:?}"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::PixelNoise => "1",
            Scenario::SpikeNoise => "2",
        })
    }
}

impl FromStr for Scenario {
    type Err = SnnError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "pixel" => Ok(Scenario::PixelNoise),
            "2" | "spike" => Ok(Scenario::SpikeNoise),
            other => Err(SnnError::InvalidArgument(format!("unknown scenario {other:?}"))),
        }
    }
}

/// Strength of one severity level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScale {
    pub gaussian_sigma_per_level: f64,
    pub impulse_prob_per_level: f64,
    pub impulse_amplitude: f64,
}

impl Default for NoiseScale {
    fn default() -> Self {
        Self {
            gaussian_sigma_per_level: 0.05,
            impulse_prob_per_level: 0.02,
            impulse_amplitude: 1.0,
        }
    }
}

pub const MAX_SEVERITY: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    kind: NoiseKind,
    severity: u8,
    scenario: Scenario,
    scale: NoiseScale,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, severity: u8, scenario: Scenario) -> Result<Self> {
        Self::with_scale(kind, severity, scenario, NoiseScale::default())
    }

    pub fn with_scale(kind: NoiseKind, severity: u8, scenario: Scenario, scale: NoiseScale) -> Result<Self> {
        if severity > MAX_SEVERITY {
            return Err(SnnError::InvalidArgument(format!(
                "severity {severity} outside 0..={MAX_SEVERITY}"
            )));
        }
        if (severity == 0) != (kind == NoiseKind::None) {
            return Err(SnnError::InvalidArgument(format!(
                "severity 0 must pair with kind none (got {kind} at {severity})"
            )));
        }
        Ok(Self {
            kind,
            severity,
            scenario,
            scale,
        })
    }

    pub fn clean() -> Self {
        Self {
            kind: NoiseKind::None,
            severity: 0,
            scenario: Scenario::PixelNoise,
            scale: NoiseScale::default(),
        }
    }

    /// `kind` at `severity`, collapsing severity 0 to the clean spec.
    pub fn at_level(kind: NoiseKind, severity: u8, scenario: Scenario, scale: NoiseScale) -> Result<Self> {
        if severity == 0 || kind == NoiseKind::None {
            let mut spec = Self::clean();
            spec.scenario = scenario;
            spec.scale = scale;
            Ok(spec)
        } else {
            Self::with_scale(kind, severity, scenario, scale)
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }
    pub fn severity(&self) -> u8 {
        self.severity
    }
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }
    pub fn scale(&self) -> NoiseScale {
        self.scale
    }

    pub fn is_clean(&self) -> bool {
        self.kind == NoiseKind::None
    }

    pub fn gaussian_sigma(&self) -> f64 {
        self.scale.gaussian_sigma_per_level * self.severity as f64
    }

    pub fn impulse_probability(&self) -> f64 {
        self.scale.impulse_prob_per_level * self.severity as f64
    }
}

/// Spike values laid out `[t * units + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTensor {
    steps: usize,
    units: usize,
    values: Vec<f64>,
    binary: bool,
}

impl SpikeTensor {
    pub fn new(steps: usize, units: usize, values: Vec<f64>, binary: bool) -> Result<Self> {
        if values.len() != steps * units {
            return Err(SnnError::mismatch("SpikeTensor", steps * units, values.len()));
        }
        if binary && values.iter().any(|&v| v != 0.0 && v != 1.0 && v != -1.0) {
            return Err(SnnError::InvalidArgument(
                "binary spike tensor holds a value outside {-1, 0, 1}".into(),
            ));
        }
        Ok(Self {
            steps,
            units,
            values,
            binary,
        })
    }

    pub fn zeros(steps: usize, units: usize) -> Self {
        Self {
            steps,
            units,
            values: vec![0.0; steps * units],
            binary: true,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn units(&self) -> usize {
        self.units
    }
    pub fn is_binary(&self) -> bool {
        self.binary
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.values[t * self.units..(t + 1) * self.units]
    }

    /// Time series of a single unit.
    pub fn unit_series(&self, i: usize) -> Vec<f64> {
        (0..self.steps).map(|t| self.values[t * self.units + i]).collect()
    }
}

/// Zero mean, then scale so the largest magnitude is 1.
pub fn normalize(pixels: &[f64]) -> Result<Vec<f64>> {
    if pixels.is_empty() {
        return Err(SnnError::InvalidArgument("cannot normalize an empty image".into()));
    }
    let mean = pixels.iter().sum::<f64>() / pixels.len() as f64;
    let centered: Vec<f64> = pixels.iter().map(|&p| p - mean).collect();
    let max_abs = centered.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Ok(vec![0.0; pixels.len()]);
    }
    Ok(centered.into_iter().map(|v| v / max_abs).collect())
}

#[inline]
fn signed_spike<R: Rng + ?Sized>(intensity: f64, rng: &mut R) -> f64 {
    let x: f64 = rng.random();
    if intensity.abs() > x {
        intensity.signum()
    } else {
        0.0
    }
}

/// Clean Poisson encoding over `steps` time-steps.
pub fn poisson_encode<R: Rng + ?Sized>(pixels: &[f64], steps: usize, rng: &mut R) -> Result<SpikeTensor> {
    encode_noisy(pixels, steps, &NoiseSpec::clean(), rng)
}

/// One draw of the additive noise described by `spec`.
pub fn sample_noise<R: Rng + ?Sized>(spec: &NoiseSpec, rng: &mut R) -> f64 {
    match spec.kind {
        NoiseKind::None => 0.0,
        NoiseKind::Gaussian => {
            let z: f64 = rng.sample(StandardNormal);
            spec.gaussian_sigma() * z
        }
        NoiseKind::Impulse => {
            let hit: f64 = rng.random();
            if hit < spec.impulse_probability() {
                if rng.random::<bool>() {
                    spec.scale.impulse_amplitude
                } else {
                    -spec.scale.impulse_amplitude
                }
            } else {
                0.0
            }
        }
    }
}

/// Poisson encoding with noise injected at the input layer.
///
/// A clean spec consumes the random stream exactly like [`poisson_encode`].
pub fn encode_noisy<R: Rng + ?Sized>(
    pixels: &[f64],
    steps: usize,
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<SpikeTensor> {
    if steps == 0 {
        return Err(SnnError::InvalidArgument("need at least one time-step".into()));
    }
    let units = pixels.len();
    let mut values = Vec::with_capacity(steps * units);
    let clean = spec.is_clean();
    for _ in 0..steps {
        for &p in pixels {
            let v = if clean {
                signed_spike(p, rng)
            } else {
                match spec.scenario {
                    Scenario::PixelNoise => {
                        let noisy = p + sample_noise(spec, rng);
                        signed_spike(noisy, rng)
                    }
                    Scenario::SpikeNoise => {
                        let s = signed_spike(p, rng);
                        s + sample_noise(spec, rng)
                    }
                }
            };
            values.push(v);
        }
    }
    let binary = clean || spec.scenario == Scenario::PixelNoise;
    Ok(SpikeTensor {
        steps,
        units,
        values,
        binary,
    })
}
