//! Experiment configuration and the studies behind each CLI subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{evaluate, mean_spectrum, RunMetrics, SpectrumCurve};
use crate::coherence::{
    coherence_fn, combine_spectra, estimate_spectra, simulate_trajectories, CoherenceParams, SdeConfig,
};
use crate::dataset::{load_idx_dataset, synth_dataset, Dataset, SynthKind, SynthOptions};
use crate::encoding::{encode_noisy, NoiseKind, NoiseScale, NoiseSpec, Scenario, MAX_SEVERITY};
use crate::error::{Result, SnnError};
use crate::io::checkpoint::{load_checkpoint, save_checkpoint};
use crate::io::config::ConfigFile;
use crate::io::csv::CsvTable;
use crate::network::{Architecture, Network};
use crate::neuron::{NeuronConfig, TimeConstant};
use crate::training::{mix_seed, train, EpochRecord, TrainConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SNNLAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "snnlab-out";

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic {
        kind: SynthKind,
        train_samples: usize,
        test_samples: usize,
        options: SynthOptions,
        seed: u64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweep {
    pub kinds: Vec<NoiseKind>,
    pub scenarios: Vec<Scenario>,
    pub severities: Vec<u8>,
    pub scale: NoiseScale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSettings {
    pub kind: NoiseKind,
    pub scenario: Scenario,
    pub severity: u8,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceSettings {
    pub params: CoherenceParams,
    /// Simulated time per trajectory.
    pub duration: f64,
    pub trajectories: usize,
    pub dt: f64,
    pub bin: f64,
    pub segment_length: f64,
    /// Largest tabulated angular frequency.
    pub omega_max: f64,
    /// Also estimate the coherence of the leak-free integrator.
    pub include_if: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub architecture: Architecture,
    /// One model family per entry.
    pub tau_m: Vec<TimeConstant>,
    pub v_th: f64,
    pub u_rest: f64,
    pub epsilon: f64,
    pub init_gain: f64,
    /// `seed` is replaced by each experiment seed.
    pub training: TrainConfig,
    pub data: DataSource,
    pub noise: NoiseSweep,
    pub spectrum: SpectrumSettings,
    pub coherence: CoherenceSettings,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    /// Load trained networks from here instead of training.
    pub checkpoint_dir: Option<PathBuf>,
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("experiment", &["seeds", "out_dir", "checkpoint_dir"]),
    ("model", &["architecture", "tau_m", "v_th", "u_rest", "epsilon", "init_gain"]),
    (
        "training",
        &["epochs", "batch_size", "learning_rate", "lr_decay_epochs", "lr_decay_factor", "steps"],
    ),
    (
        "data",
        &[
            "source",
            "kind",
            "train_samples",
            "test_samples",
            "size",
            "pixel_noise",
            "seed",
            "train_images",
            "train_labels",
            "test_images",
            "test_labels",
        ],
    ),
    (
        "noise",
        &[
            "kinds",
            "scenarios",
            "severities",
            "gaussian_sigma_per_level",
            "impulse_prob_per_level",
            "impulse_amplitude",
        ],
    ),
    ("spectrum", &["kind", "scenario", "severity", "histogram_bins"]),
    (
        "coherence",
        &[
            "mu",
            "d",
            "d_st",
            "tau_r",
            "v_th",
            "u_rest",
            "duration",
            "trajectories",
            "dt",
            "bin",
            "segment_length",
            "omega_max",
            "include_if",
        ],
    ),
];

fn invalid(line: usize, message: impl Into<String>) -> SnnError {
    SnnError::Config {
        line,
        message: message.into(),
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_config_file(&ConfigFile::default()).expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_config_file(&ConfigFile::parse(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_config_file(&ConfigFile::read(path)?)
    }

    pub fn from_config_file(c: &ConfigFile) -> Result<Self> {
        if let Some((line, key)) = c.unknown_keys(KNOWN_KEYS).into_iter().next() {
            return Err(invalid(line, format!("unknown key {key}")));
        }
        let architecture: Architecture = c.parse_or("model", "architecture", Architecture::parse("16x16-8C3-2P-64FC-2o")?)?;
        let tau_m: Vec<TimeConstant> =
            c.list_or("model", "tau_m", vec![TimeConstant::Infinite, TimeConstant::Finite(100.0), TimeConstant::Finite(30.0)])?;
        let defaults = TrainConfig::default();
        let training = TrainConfig {
            epochs: c.parse_or("training", "epochs", 15)?,
            batch_size: c.parse_or("training", "batch_size", defaults.batch_size)?,
            learning_rate: c.parse_or("training", "learning_rate", defaults.learning_rate)?,
            lr_decay_epochs: c.list_or("training", "lr_decay_epochs", defaults.lr_decay_epochs)?,
            lr_decay_factor: c.parse_or("training", "lr_decay_factor", defaults.lr_decay_factor)?,
            steps: c.parse_or("training", "steps", defaults.steps)?,
            seed: 0,
        };
        let source: String = c.parse_or("data", "source", "synthetic".to_string())?;
        let data = match source.as_str() {
            "synthetic" => DataSource::Synthetic {
                kind: c.parse_or("data", "kind", SynthKind::Bars)?,
                train_samples: c.parse_or("data", "train_samples", 200)?,
                test_samples: c.parse_or("data", "test_samples", 200)?,
                options: SynthOptions {
                    size: c.parse_or("data", "size", SynthOptions::default().size)?,
                    pixel_noise: c.parse_or("data", "pixel_noise", SynthOptions::default().pixel_noise)?,
                },
                seed: c.parse_or("data", "seed", 1)?,
            },
            "idx" => {
                let path = |key: &str| -> Result<PathBuf> {
                    c.get("data", key)
                        .map(PathBuf::from)
                        .ok_or_else(|| invalid(0, format!("[data] source = idx requires {key}")))
                };
                DataSource::Idx {
                    train_images: path("train_images")?,
                    train_labels: path("train_labels")?,
                    test_images: path("test_images")?,
                    test_labels: path("test_labels")?,
                }
            }
            other => return Err(invalid(0, format!("[data] unknown source {other:?}"))),
        };
        let noise = NoiseSweep {
            kinds: c.list_or("noise", "kinds", vec![NoiseKind::Gaussian, NoiseKind::Impulse])?,
            scenarios: c.list_or("noise", "scenarios", vec![Scenario::PixelNoise, Scenario::SpikeNoise])?,
            severities: c.list_or("noise", "severities", (0..=MAX_SEVERITY).collect())?,
            scale: NoiseScale {
                gaussian_sigma_per_level: c.parse_or(
                    "noise",
                    "gaussian_sigma_per_level",
                    NoiseScale::default().gaussian_sigma_per_level,
                )?,
                impulse_prob_per_level: c.parse_or(
                    "noise",
                    "impulse_prob_per_level",
                    NoiseScale::default().impulse_prob_per_level,
                )?,
                impulse_amplitude: c.parse_or("noise", "impulse_amplitude", NoiseScale::default().impulse_amplitude)?,
            },
        };
        let spectrum = SpectrumSettings {
            kind: c.parse_or("spectrum", "kind", NoiseKind::Gaussian)?,
            scenario: c.parse_or("spectrum", "scenario", Scenario::PixelNoise)?,
            severity: c.parse_or("spectrum", "severity", 5)?,
            histogram_bins: c.parse_or("spectrum", "histogram_bins", 20)?,
        };
        let d: f64 = c.parse_or("coherence", "d", 0.1)?;
        let params = CoherenceParams {
            mu: c.parse_or("coherence", "mu", 0.8)?,
            d,
            d_st: c.parse_or("coherence", "d_st", d)?,
            tau_r: c.parse_or("coherence", "tau_r", 0.0)?,
            v_th: c.parse_or("coherence", "v_th", 1.0)?,
            u_rest: c.parse_or("coherence", "u_rest", 0.0)?,
        };
        let coherence = CoherenceSettings {
            params,
            duration: c.parse_or("coherence", "duration", 2.5e4)?,
            trajectories: c.parse_or("coherence", "trajectories", 4)?,
            dt: c.parse_or("coherence", "dt", 1e-3)?,
            bin: c.parse_or("coherence", "bin", 0.05)?,
            segment_length: c.parse_or("coherence", "segment_length", 100.0)?,
            omega_max: c.parse_or("coherence", "omega_max", 5.0)?,
            include_if: c.parse_or("coherence", "include_if", true)?,
        };
        let cfg = Self {
            architecture,
            tau_m,
            v_th: c.parse_or("model", "v_th", 1.0)?,
            u_rest: c.parse_or("model", "u_rest", 0.0)?,
            epsilon: c.parse_or("model", "epsilon", 0.0)?,
            init_gain: c.parse_or("model", "init_gain", 1.0)?,
            training,
            data,
            noise,
            spectrum,
            coherence,
            seeds: c.list_or("experiment", "seeds", vec![0, 1, 2])?,
            out_dir: c.get("experiment", "out_dir").map(PathBuf::from),
            checkpoint_dir: c.get("experiment", "checkpoint_dir").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(invalid(0, "[experiment] seeds must not be empty"));
        }
        if self.tau_m.is_empty() {
            return Err(invalid(0, "[model] tau_m must not be empty"));
        }
        for &tau in &self.tau_m {
            self.neuron(tau)?;
        }
        self.training.validate()?;
        if self.noise.severities.iter().any(|&s| s > MAX_SEVERITY) {
            return Err(invalid(0, format!("[noise] severities must lie in 0..={MAX_SEVERITY}")));
        }
        if self.spectrum.severity == 0 || self.spectrum.severity > MAX_SEVERITY || self.spectrum.kind == NoiseKind::None {
            return Err(invalid(0, "[spectrum] needs a noise kind and a severity in 1..=8"));
        }
        if self.spectrum.histogram_bins == 0 {
            return Err(invalid(0, "[spectrum] histogram_bins must be positive"));
        }
        self.coherence.params.validate()?;
        let co = &self.coherence;
        if co.trajectories == 0 || co.omega_max.is_nan() || co.omega_max <= 0.0 || co.segment_length.is_nan() || co.segment_length <= 0.0 {
            return Err(invalid(0, "[coherence] needs trajectories >= 1, omega_max > 0 and segment_length > 0"));
        }
        Ok(())
    }

    pub fn neuron(&self, tau: TimeConstant) -> Result<NeuronConfig> {
        NeuronConfig::new(tau, self.v_th, self.u_rest, self.epsilon)
    }

    pub fn to_config_file(&self) -> ConfigFile {
        let mut c = ConfigFile::default();
        let join = |v: Vec<String>| v.join(", ");
        c.set("experiment", "seeds", join(self.seeds.iter().map(u64::to_string).collect()));
        if let Some(p) = &self.out_dir {
            c.set("experiment", "out_dir", p.display());
        }
        if let Some(p) = &self.checkpoint_dir {
            c.set("experiment", "checkpoint_dir", p.display());
        }
        c.set("model", "architecture", &self.architecture);
        c.set("model", "tau_m", join(self.tau_m.iter().map(|t| t.to_string()).collect()));
        c.set("model", "v_th", self.v_th);
        c.set("model", "u_rest", self.u_rest);
        c.set("model", "epsilon", self.epsilon);
        c.set("model", "init_gain", self.init_gain);
        let t = &self.training;
        c.set("training", "epochs", t.epochs);
        c.set("training", "batch_size", t.batch_size);
        c.set("training", "learning_rate", t.learning_rate);
        c.set("training", "lr_decay_epochs", join(t.lr_decay_epochs.iter().map(usize::to_string).collect()));
        c.set("training", "lr_decay_factor", t.lr_decay_factor);
        c.set("training", "steps", t.steps);
        match &self.data {
            DataSource::Synthetic {
                kind,
                train_samples,
                test_samples,
                options,
                seed,
            } => {
                c.set("data", "source", "synthetic");
                c.set("data", "kind", kind);
                c.set("data", "train_samples", train_samples);
                c.set("data", "test_samples", test_samples);
                c.set("data", "size", options.size);
                c.set("data", "pixel_noise", options.pixel_noise);
                c.set("data", "seed", seed);
            }
            DataSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                c.set("data", "source", "idx");
                c.set("data", "train_images", train_images.display());
                c.set("data", "train_labels", train_labels.display());
                c.set("data", "test_images", test_images.display());
                c.set("data", "test_labels", test_labels.display());
            }
        }
        let n = &self.noise;
        c.set("noise", "kinds", join(n.kinds.iter().map(|k| k.to_string()).collect()));
        c.set("noise", "scenarios", join(n.scenarios.iter().map(|s| s.to_string()).collect()));
        c.set("noise", "severities", join(n.severities.iter().map(u8::to_string).collect()));
        c.set("noise", "gaussian_sigma_per_level", n.scale.gaussian_sigma_per_level);
        c.set("noise", "impulse_prob_per_level", n.scale.impulse_prob_per_level);
        c.set("noise", "impulse_amplitude", n.scale.impulse_amplitude);
        let s = &self.spectrum;
        c.set("spectrum", "kind", s.kind);
        c.set("spectrum", "scenario", s.scenario);
        c.set("spectrum", "severity", s.severity);
        c.set("spectrum", "histogram_bins", s.histogram_bins);
        let co = &self.coherence;
        c.set("coherence", "mu", co.params.mu);
        c.set("coherence", "d", co.params.d);
        c.set("coherence", "d_st", co.params.d_st);
        c.set("coherence", "tau_r", co.params.tau_r);
        c.set("coherence", "v_th", co.params.v_th);
        c.set("coherence", "u_rest", co.params.u_rest);
        c.set("coherence", "duration", co.duration);
        c.set("coherence", "trajectories", co.trajectories);
        c.set("coherence", "dt", co.dt);
        c.set("coherence", "bin", co.bin);
        c.set("coherence", "segment_length", co.segment_length);
        c.set("coherence", "omega_max", co.omega_max);
        c.set("coherence", "include_if", co.include_if);
        c
    }

    pub fn to_text(&self) -> String {
        self.to_config_file().to_text()
    }

    /// `--out`, then the config, then `$SNNLAB_OUT_DIR`, then `snnlab-out`.
    pub fn resolve_out_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

/// Training and test sets described by the config.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match &cfg.data {
        DataSource::Synthetic {
            kind,
            train_samples,
            test_samples,
            options,
            seed,
        } => Ok((
            synth_dataset(*kind, *train_samples, *seed, *options)?,
            synth_dataset(*kind, *test_samples, mix_seed(*seed, 0x7e57), *options)?,
        )),
        DataSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => Ok((
            load_idx_dataset(train_images, train_labels)?,
            load_idx_dataset(test_images, test_labels)?,
        )),
    }
}

/// A network of one model family trained from one seed.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub tau_m: TimeConstant,
    pub seed: u64,
    pub net: Network,
    /// Empty when the network was loaded from a checkpoint.
    pub history: Vec<EpochRecord>,
}

pub fn tau_label(tau: TimeConstant) -> String {
    tau.to_string()
}

pub fn checkpoint_name(tau: TimeConstant, seed: u64) -> String {
    format!("model_tau{}_seed{seed}.ckpt", tau_label(tau))
}

/// Train (or load) one network per `(tau_m, seed)` in config order.
///
/// Models are independent, so they are fitted concurrently.
pub fn obtain_models(cfg: &ExperimentConfig, train_set: &Dataset, test_set: &Dataset) -> Result<Vec<TrainedModel>> {
    let jobs: Vec<(TimeConstant, u64)> = cfg
        .tau_m
        .iter()
        .flat_map(|&tau| cfg.seeds.iter().map(move |&seed| (tau, seed)))
        .collect();
    jobs.into_par_iter()
        .map(|(tau, seed)| obtain_model(cfg, tau, seed, train_set, test_set))
        .collect()
}

fn obtain_model(cfg: &ExperimentConfig, tau: TimeConstant, seed: u64, train_set: &Dataset, test_set: &Dataset) -> Result<TrainedModel> {
    let neuron = cfg.neuron(tau)?;
    if let Some(dir) = &cfg.checkpoint_dir {
        let net = load_checkpoint(&dir.join(checkpoint_name(tau, seed)))?;
        if net.arch != cfg.architecture || net.neuron != neuron {
            return Err(SnnError::Checkpoint(format!(
                "{} does not match the configured model",
                checkpoint_name(tau, seed)
            )));
        }
        return Ok(TrainedModel {
            tau_m: tau,
            seed,
            net,
            history: Vec::new(),
        });
    }
    let mut net = Network::build(cfg.architecture.clone(), neuron, seed, cfg.init_gain)?;
    let tcfg = TrainConfig {
        seed,
        ..cfg.training.clone()
    };
    let history = train(&mut net, train_set, Some(test_set), &tcfg)?;
    Ok(TrainedModel {
        tau_m: tau,
        seed,
        net,
        history,
    })
}

/// One point of a noise sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub tau_m: TimeConstant,
    pub seed: u64,
    pub kind: NoiseKind,
    pub scenario: Scenario,
    pub severity: u8,
    pub metrics: RunMetrics,
}

/// Evaluate every model at every `(kind, scenario, severity)` of the sweep.
/// Severity 0 is the clean encoding.
pub fn noise_sweep(cfg: &ExperimentConfig, models: &[TrainedModel], test_set: &Dataset) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for m in models {
        for &kind in &cfg.noise.kinds {
            for &scenario in &cfg.noise.scenarios {
                for &severity in &cfg.noise.severities {
                    let spec = NoiseSpec::at_level(kind, severity, scenario, cfg.noise.scale)?;
                    let metrics = evaluate(&m.net, test_set, &spec, cfg.training.steps, &[m.seed])?;
                    out.push(SweepPoint {
                        tau_m: m.tau_m,
                        seed: m.seed,
                        kind,
                        scenario,
                        severity,
                        metrics,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Mean accuracy drop from severity 0 to `severity` for one model family,
/// averaged over seeds.
pub fn mean_accuracy_drop(points: &[SweepPoint], tau: TimeConstant, kind: NoiseKind, scenario: Scenario, severity: u8) -> Option<f64> {
    let mut drops = Vec::new();
    let seeds: Vec<u64> = {
        let mut s: Vec<u64> = points.iter().filter(|p| p.tau_m == tau).map(|p| p.seed).collect();
        s.dedup();
        s
    };
    for seed in seeds {
        let find = |sev: u8| {
            points
                .iter()
                .find(|p| p.tau_m == tau && p.seed == seed && p.kind == kind && p.scenario == scenario && p.severity == sev)
                .map(|p| p.metrics.accuracy)
        };
        drops.push(find(0)? - find(severity)?);
    }
    (!drops.is_empty()).then(|| mean(&drops))
}

/// Critical frequencies of the target output neuron, clean and noisy.
#[derive(Debug, Clone)]
pub struct CriticalStudy {
    pub tau_m: TimeConstant,
    pub seed: u64,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
}

pub fn critical_study(cfg: &ExperimentConfig, models: &[TrainedModel], test_set: &Dataset) -> Result<Vec<CriticalStudy>> {
    let s = &cfg.spectrum;
    let noisy = NoiseSpec::with_scale(s.kind, s.severity, s.scenario, cfg.noise.scale)?;
    models
        .iter()
        .map(|m| {
            let steps = cfg.training.steps;
            let clean = evaluate(&m.net, test_set, &NoiseSpec::clean(), steps, &[m.seed])?;
            let noisy = evaluate(&m.net, test_set, &noisy, steps, &[m.seed])?;
            Ok(CriticalStudy {
                tau_m: m.tau_m,
                seed: m.seed,
                clean: clean.critical_freqs,
                noisy: noisy.critical_freqs,
            })
        })
        .collect()
}

/// Mean single-sided spectrum of the input spike trains over test samples,
/// clean and with the configured spectrum noise.
pub fn input_spectra(cfg: &ExperimentConfig, test_set: &Dataset, seed: u64) -> Result<(SpectrumCurve, SpectrumCurve)> {
    let s = &cfg.spectrum;
    let noisy = NoiseSpec::with_scale(s.kind, s.severity, s.scenario, cfg.noise.scale)?;
    let normalized = test_set.normalized()?;
    let per_sample = |spec: &NoiseSpec| -> Result<SpectrumCurve> {
        let curves: Vec<SpectrumCurve> = normalized
            .par_iter()
            .enumerate()
            .map(|(i, px)| {
                let x = encode_noisy(px, cfg.training.steps, spec, &mut crate::analysis::evaluation_rng(seed, i))?;
                let series: Vec<Vec<f64>> = (0..x.units()).map(|u| x.unit_series(u)).collect();
                mean_spectrum(series.iter().map(Vec::as_slice), false)
            })
            .collect::<Result<_>>()?;
        let values: Vec<&[f64]> = curves.iter().map(|c| c.values.as_slice()).collect();
        let mut acc = curves[0].clone();
        for (k, v) in acc.values.iter_mut().enumerate() {
            *v = values.iter().map(|c| c[k]).sum::<f64>() / values.len() as f64;
        }
        Ok(acc)
    };
    Ok((per_sample(&NoiseSpec::clean())?, per_sample(&noisy)?))
}

/// Interpolate a model's `(train SSE, test SSE)` trajectory at `target`
/// train SSE, on log-log axes. `None` if training never reached it.
pub fn test_sse_at(history: &[EpochRecord], target: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = history
        .iter()
        .filter_map(|r| Some((r.sse_train, r.sse_test?)))
        .filter(|(a, b)| *a > 0.0 && *b > 0.0)
        .collect();
    let first = pts.first()?;
    if first.0 <= target {
        return Some(first.1);
    }
    for w in pts.windows(2) {
        let ((a0, b0), (a1, b1)) = (w[0], w[1]);
        if a0 >= target && a1 <= target {
            if a0 == a1 {
                return Some(b1);
            }
            let f = (target.ln() - a0.ln()) / (a1.ln() - a0.ln());
            return Some((b0.ln() + f * (b1.ln() - b0.ln())).exp());
        }
    }
    None
}

/// Table-style summary for one model family, averaged over seeds.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub tau_m: TimeConstant,
    pub accuracy: f64,
    pub sse_test: f64,
    pub sse_train: f64,
    pub spikes_percent: f64,
    pub synaptic_ops: f64,
    pub enwsi: Vec<f64>,
    pub critical_frequency: Option<f64>,
}

pub fn report_rows(cfg: &ExperimentConfig, models: &[TrainedModel], train_set: &Dataset, test_set: &Dataset) -> Result<Vec<ReportRow>> {
    let steps = cfg.training.steps;
    let mut rows = Vec::new();
    for &tau in &cfg.tau_m {
        let mut test = Vec::new();
        let mut train_m = Vec::new();
        for m in models.iter().filter(|m| m.tau_m == tau) {
            test.push(evaluate(&m.net, test_set, &NoiseSpec::clean(), steps, &[m.seed])?);
            train_m.push(evaluate(&m.net, train_set, &NoiseSpec::clean(), steps, &[m.seed])?);
        }
        if test.is_empty() {
            continue;
        }
        let pick = |f: &dyn Fn(&RunMetrics) -> f64, v: &[RunMetrics]| mean(&v.iter().map(f).collect::<Vec<_>>());
        let layers = test[0].enwsi.len();
        let enwsi = (0..layers)
            .map(|l| mean(&test.iter().map(|m| m.enwsi[l]).collect::<Vec<_>>()))
            .collect();
        let crit: Vec<f64> = test.iter().filter_map(RunMetrics::mean_critical_frequency).collect();
        rows.push(ReportRow {
            tau_m: tau,
            accuracy: pick(&|m| m.accuracy, &test),
            sse_test: pick(&|m| m.sse, &test),
            sse_train: pick(&|m| m.sse, &train_m),
            spikes_percent: 100.0 * pick(&|m| m.spike_activity, &test),
            synaptic_ops: pick(&|m| m.synaptic_ops_per_sample(), &test),
            enwsi,
            critical_frequency: (!crit.is_empty()).then(|| mean(&crit)),
        });
    }
    Ok(rows)
}

/// Analytic and simulated coherence on the estimator's frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceTable {
    pub omegas: Vec<f64>,
    pub analytic: Vec<f64>,
    pub monte_carlo: Vec<f64>,
    /// Simulated coherence of the leak-free integrator, if requested.
    pub integrator: Option<Vec<f64>>,
    pub analytic_rate: f64,
    pub simulated_rate: f64,
}

impl CoherenceTable {
    pub fn mean_abs_gap(&self) -> f64 {
        mean(
            &self
                .analytic
                .iter()
                .zip(&self.monte_carlo)
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>(),
        )
    }
}

fn simulated_coherence(co: &CoherenceSettings, leak: bool, seed: u64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let sde = SdeConfig {
        dt: co.dt,
        duration: co.duration,
        bin: co.bin,
        leak,
        bridge: true,
    };
    let runs = simulate_trajectories(&co.params, &sde, seed, co.trajectories)?;
    let parts = runs
        .iter()
        .map(|r| estimate_spectra(&r.spike_times, &r.stimulus, co.segment_length))
        .collect::<Result<Vec<_>>>()?;
    let est = combine_spectra(&parts)?;
    let rate = mean(&runs.iter().map(|r| r.rate()).collect::<Vec<_>>());
    Ok((est.omegas.clone(), est.coherence(), rate))
}

pub fn coherence_table(cfg: &ExperimentConfig, seed: u64) -> Result<CoherenceTable> {
    let co = &cfg.coherence;
    let (omegas, mc, simulated_rate) = simulated_coherence(co, true, seed)?;
    let keep: Vec<usize> = (0..omegas.len()).filter(|&k| omegas[k] <= co.omega_max).collect();
    let omegas: Vec<f64> = keep.iter().map(|&k| omegas[k]).collect();
    let monte_carlo: Vec<f64> = keep.iter().map(|&k| mc[k]).collect();
    let analytic = omegas
        .par_iter()
        .map(|&w| coherence_fn(w, &co.params))
        .collect::<Result<Vec<_>>>()?;
    let integrator = if co.include_if {
        let (_, c, _) = simulated_coherence(co, false, mix_seed(seed, 0x1f))?;
        Some(keep.iter().map(|&k| c[k]).collect())
    } else {
        None
    };
    Ok(CoherenceTable {
        omegas,
        analytic,
        monte_carlo,
        integrator,
        analytic_rate: crate::coherence::firing_rate(&co.params)?,
        simulated_rate,
    })
}

/// The CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    EvaluateNoise,
    CoherenceTable,
    Spectrum,
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::EvaluateNoise => "evaluate-noise",
            Command::CoherenceTable => "coherence-table",
            Command::Spectrum => "spectrum",
            Command::Report => "report",
        }
    }
}

/// Process exit code for an error: 2 usage or configuration, 3 I/O or file
/// format, 4 training divergence, 5 numerical failure, 1 anything else.
pub fn exit_code(err: &SnnError) -> i32 {
    match err {
        SnnError::Config { .. } | SnnError::InvalidArgument(_) | SnnError::Architecture(_) | SnnError::InvalidNeuron(_) => 2,
        SnnError::Io { .. }
        | SnnError::IdxFormat { .. }
        | SnnError::IdxTruncated { .. }
        | SnnError::IdxOverflow(_)
        | SnnError::Checkpoint(_) => 3,
        SnnError::Diverged { .. } => 4,
        SnnError::Quadrature { .. } | SnnError::CoherenceBound { .. } => 5,
        SnnError::InsufficientData(_) | SnnError::DimensionMismatch { .. } => 1,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_table(out: &Path, name: &str, table: &CsvTable, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    table.write(&path)?;
    written.push(path);
    Ok(())
}

/// Run one subcommand, writing its artifacts under `out`. Returns the files written.
pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| SnnError::io(out, e))?;
    let mut written = Vec::new();
    match cmd {
        Command::Train => run_train(cfg, out, &mut written)?,
        Command::EvaluateNoise => run_noise(cfg, out, &mut written)?,
        Command::CoherenceTable => run_coherence(cfg, out, &mut written)?,
        Command::Spectrum => run_spectrum(cfg, out, &mut written)?,
        Command::Report => run_report(cfg, out, &mut written)?,
    }
    Ok(written)
}

fn run_train(cfg: &ExperimentConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let (train_set, test_set) = load_data(cfg)?;
    let cfg = ExperimentConfig {
        checkpoint_dir: None,
        ..cfg.clone()
    };
    let models = obtain_models(&cfg, &train_set, &test_set)?;
    let mut table = CsvTable::new([
        "tau_m",
        "seed",
        "epoch",
        "learning_rate",
        "mean_loss",
        "sse_train",
        "train_accuracy",
        "sse_test",
        "test_accuracy",
        "spike_activity",
        "synaptic_ops",
    ]);
    for m in &models {
        let path = out.join(checkpoint_name(m.tau_m, m.seed));
        save_checkpoint(&m.net, &path)?;
        written.push(path);
        for r in &m.history {
            table.push([
                tau_label(m.tau_m),
                m.seed.to_string(),
                r.epoch.to_string(),
                r.learning_rate.to_string(),
                r.mean_loss.to_string(),
                r.sse_train.to_string(),
                r.train_accuracy.to_string(),
                fmt_opt(r.sse_test),
                fmt_opt(r.test_accuracy),
                r.spike_activity.to_string(),
                r.synaptic_ops.to_string(),
            ])?;
        }
    }
    write_table(out, "train_history.csv", &table, written)
}

fn run_noise(cfg: &ExperimentConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let (train_set, test_set) = load_data(cfg)?;
    let models = obtain_models(cfg, &train_set, &test_set)?;
    let points = noise_sweep(cfg, &models, &test_set)?;
    let mut table = CsvTable::new([
        "tau_m",
        "seed",
        "kind",
        "scenario",
        "severity",
        "accuracy",
        "sse",
        "spike_activity",
        "synaptic_ops_per_sample",
    ]);
    for p in &points {
        table.push([
            tau_label(p.tau_m),
            p.seed.to_string(),
            p.kind.to_string(),
            p.scenario.to_string(),
            p.severity.to_string(),
            p.metrics.accuracy.to_string(),
            p.metrics.sse.to_string(),
            p.metrics.spike_activity.to_string(),
            p.metrics.synaptic_ops_per_sample().to_string(),
        ])?;
    }
    write_table(out, "noise_sweep.csv", &table, written)
}

fn run_coherence(cfg: &ExperimentConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let t = coherence_table(cfg, cfg.seeds[0])?;
    let mut table = CsvTable::new(["omega", "C_analytic", "C_montecarlo"]);
    for k in 0..t.omegas.len() {
        table.push([t.omegas[k], t.analytic[k], t.monte_carlo[k]])?;
    }
    write_table(out, "coherence.csv", &table, written)?;
    if let Some(c) = &t.integrator {
        let mut table = CsvTable::new(["omega", "C_montecarlo_if"]);
        for (&w, &v) in t.omegas.iter().zip(c) {
            table.push([w, v])?;
        }
        write_table(out, "coherence_if.csv", &table, written)?;
    }
    let mut table = CsvTable::new(["quantity", "value"]);
    table.push(["rate_analytic".to_string(), t.analytic_rate.to_string()])?;
    table.push(["rate_montecarlo".to_string(), t.simulated_rate.to_string()])?;
    table.push(["mean_abs_gap".to_string(), t.mean_abs_gap().to_string()])?;
    write_table(out, "coherence_summary.csv", &table, written)
}

fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = ((v / 0.5) * bins as f64).floor() as usize;
        counts[k.min(bins - 1)] += 1;
    }
    counts
}

fn run_spectrum(cfg: &ExperimentConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let (train_set, test_set) = load_data(cfg)?;
    let (clean, noisy) = input_spectra(cfg, &test_set, cfg.seeds[0])?;
    let mut table = CsvTable::new(["frequency", "clean", "noisy"]);
    for k in 0..clean.len() {
        table.push([clean.frequencies[k], clean.values[k], noisy.values[k]])?;
    }
    write_table(out, "input_spectrum.csv", &table, written)?;

    let models = obtain_models(cfg, &train_set, &test_set)?;
    let study = critical_study(cfg, &models, &test_set)?;
    let bins = cfg.spectrum.histogram_bins;
    let mut hist = CsvTable::new(["tau_m", "condition", "bin_low", "bin_high", "count"]);
    let mut summary = CsvTable::new(["tau_m", "condition", "mean_critical_frequency", "samples"]);
    for &tau in &cfg.tau_m {
        for (condition, pick) in [("clean", 0usize), ("noisy", 1)] {
            let values: Vec<f64> = study
                .iter()
                .filter(|s| s.tau_m == tau)
                .flat_map(|s| if pick == 0 { s.clean.clone() } else { s.noisy.clone() })
                .collect();
            for (k, c) in histogram(&values, bins).into_iter().enumerate() {
                let lo = 0.5 * k as f64 / bins as f64;
                let hi = 0.5 * (k + 1) as f64 / bins as f64;
                hist.push([tau_label(tau), condition.to_string(), lo.to_string(), hi.to_string(), c.to_string()])?;
            }
            summary.push([tau_label(tau), condition.to_string(), mean(&values).to_string(), values.len().to_string()])?;
        }
    }
    write_table(out, "critical_frequency_histogram.csv", &hist, written)?;
    write_table(out, "critical_frequency_summary.csv", &summary, written)
}

fn run_report(cfg: &ExperimentConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let (train_set, test_set) = load_data(cfg)?;
    let models = obtain_models(cfg, &train_set, &test_set)?;
    let rows = report_rows(cfg, &models, &train_set, &test_set)?;
    let mut table = CsvTable::new([
        "tau_m",
        "accuracy",
        "sse_test",
        "sse_train",
        "spikes_percent",
        "synaptic_ops_per_sample",
        "enwsi",
        "critical_frequency",
    ]);
    let mut text = String::new();
    for r in &rows {
        let enwsi: Vec<String> = r.enwsi.iter().map(f64::to_string).collect();
        table.push([
            tau_label(r.tau_m),
            r.accuracy.to_string(),
            r.sse_test.to_string(),
            r.sse_train.to_string(),
            r.spikes_percent.to_string(),
            r.synaptic_ops.to_string(),
            enwsi.join(";"),
            fmt_opt(r.critical_frequency),
        ])?;
        let _ = writeln!(text, "[tau_m = {}]", tau_label(r.tau_m));
        let _ = writeln!(text, "accuracy = {}", r.accuracy);
        let _ = writeln!(text, "sse_test = {}", r.sse_test);
        let _ = writeln!(text, "sse_train = {}", r.sse_train);
        let _ = writeln!(text, "spikes_percent = {}", r.spikes_percent);
        let _ = writeln!(text, "synaptic_ops_per_sample = {}", r.synaptic_ops);
        let _ = writeln!(text, "enwsi = {}", enwsi.join(", "));
        let _ = writeln!(text, "critical_frequency = {}", fmt_opt(r.critical_frequency));
        text.push('\n');
    }
    write_table(out, "report.csv", &table, written)?;
    let path = out.join("report.txt");
    std::fs::write(&path, text).map_err(|e| SnnError::io(&path, e))?;
    written.push(path);

    let mut gen = CsvTable::new(["tau_m", "seed", "epoch", "sse_train", "sse_test"]);
    for m in &models {
        for r in &m.history {
            gen.push([
                tau_label(m.tau_m),
                m.seed.to_string(),
                r.epoch.to_string(),
                r.sse_train.to_string(),
                fmt_opt(r.sse_test),
            ])?;
        }
    }
    write_table(out, "generalization.csv", &gen, written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = ExperimentConfig::default();
        let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn custom_config_round_trips() {
        let text = "[experiment]\nseeds = 4, 5\nout_dir = /tmp/x\n[model]\ntau_m = inf, 30\n[data]\nsource = idx\ntrain_images = a\ntrain_labels = b\ntest_images = c\ntest_labels = d\n[noise]\nseverities = 0-2\nkinds = gaussian\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.seeds, vec![4, 5]);
        assert_eq!(cfg.noise.severities, vec![0, 1, 2]);
        assert!(matches!(cfg.data, DataSource::Idx { .. }));
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("[experiment]\nseeds =\n").is_err());
        assert!(ExperimentConfig::parse("[model]\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("[model]\narchitecture = 16x16-3Q-2o\n").is_err());
        assert!(ExperimentConfig::parse("[noise]\nseverities = 9\n").is_err());
        assert!(ExperimentConfig::parse("[data]\nsource = idx\n").is_err());
    }

    #[test]
    fn out_dir_precedence() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.resolve_out_dir(Some(Path::new("cli"))), PathBuf::from("cli"));
        cfg.out_dir = Some(PathBuf::from("cfg"));
        assert_eq!(cfg.resolve_out_dir(None), PathBuf::from("cfg"));
    }

    #[test]
    fn matched_sse_interpolates_on_log_axes() {
        let rec = |a: f64, b: f64| EpochRecord {
            epoch: 0,
            learning_rate: 0.1,
            mean_loss: a / 2.0,
            sse_train: a,
            train_accuracy: 1.0,
            sse_test: Some(b),
            test_accuracy: Some(1.0),
            spike_activity: 0.0,
            layer_activity: vec![],
            synaptic_ops: 0.0,
        };
        let h = vec![rec(1.0, 1.0), rec(0.01, 0.04)];
        // halfway on the log axis: train 0.1 -> test 0.2
        assert!((test_sse_at(&h, 0.1).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(test_sse_at(&h, 0.001), None);
        assert_eq!(test_sse_at(&h, 2.0), Some(1.0));
    }

    #[test]
    fn histogram_covers_band() {
        assert_eq!(histogram(&[0.0, 0.1, 0.26, 0.5], 2), vec![2, 2]);
    }
}
