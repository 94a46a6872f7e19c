//! Euler-Maruyama simulation of the scaled LIF diffusion model.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::CoherenceParams;
use crate::encoding::stream_rng;
use crate::error::{Result, SnnError};

/// Largest accepted time step.
pub const MAX_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeConfig {
    pub dt: f64,
    pub duration: f64,
    /// Width of the bins the stimulus is averaged over.
    pub bin: f64,
    /// `false` drops the `-v` term (perfect integrator).
    pub leak: bool,
    /// Count threshold crossings hidden inside a step (Brownian-bridge test).
    pub bridge: bool,
}

impl SdeConfig {
    pub fn new(duration: f64) -> Self {
        Self {
            dt: MAX_DT,
            duration,
            bin: 0.05,
            leak: true,
            bridge: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(SnnError::InvalidArgument(format!(
                "time step must lie in (0, {MAX_DT}], got {}",
                self.dt
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SnnError::InvalidArgument(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.bin >= self.dt && self.bin <= self.duration) {
            return Err(SnnError::InvalidArgument(format!(
                "stimulus bin {} must lie between dt and the duration",
                self.bin
            )));
        }
        Ok(())
    }
}

/// The stimulus path `sqrt(2 D_st) xi(t)` averaged over consecutive bins.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusRecord {
    pub bin: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeRun {
    pub spike_times: Vec<f64>,
    pub stimulus: StimulusRecord,
    pub duration: f64,
}

impl SdeRun {
    pub fn rate(&self) -> f64 {
        self.spike_times.len() as f64 / self.duration
    }
}

/// Integrate `dv = (-v + mu) dt + sqrt(2 D_st dt) N1 + sqrt(2 (D - D_st) dt) N2`
/// from `v = u_rest`, spiking and resetting when `v > v_th`.
///
/// `p.d` may be zero here (deterministic runs); all other parameter checks
/// apply. After a spike the voltage is clamped at `u_rest` for `tau_r`.
pub fn simulate_lif_sde<R: Rng>(p: &CoherenceParams, cfg: &SdeConfig, rng: &mut R) -> Result<SdeRun> {
    cfg.validate()?;
    if p.d == 0.0 && p.d_st == 0.0 {
        let probe = CoherenceParams { d: 1.0, d_st: 0.0, ..*p };
        probe.validate()?;
    } else {
        p.validate()?;
    }
    let dt = cfg.dt;
    let steps = (cfg.duration / dt).round() as u64;
    let per_bin = ((cfg.bin / dt).round() as u64).max(1);
    let bin = per_bin as f64 * dt;
    let stim_scale = (2.0 * p.d_st * dt).sqrt();
    let bg_scale = (2.0 * (p.d - p.d_st).max(0.0) * dt).sqrt();
    let leak = if cfg.leak { 1.0 } else { 0.0 };
    let bridge_scale = if cfg.bridge && p.d > 0.0 { 1.0 / (p.d * dt) } else { 0.0 };
    let refractory_steps = (p.tau_r / dt).round() as u64;

    let mut v = p.u_rest;
    let mut spike_times = Vec::new();
    let mut stimulus = Vec::with_capacity((steps / per_bin) as usize + 1);
    let mut bin_sum = 0.0;
    let mut hold = 0u64;
    for k in 0..steps {
        let n1: f64 = if stim_scale > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        let n2: f64 = if bg_scale > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        let ds = stim_scale * n1;
        bin_sum += ds;
        if (k + 1) % per_bin == 0 {
            stimulus.push(bin_sum / bin);
            bin_sum = 0.0;
        }
        if hold > 0 {
            hold -= 1;
            continue;
        }
        let next = v + (p.mu - leak * v) * dt + ds + bg_scale * n2;
        let mut fired = next > p.v_th;
        if !fired && bridge_scale > 0.0 {
            let exponent = (p.v_th - v) * (p.v_th - next) * bridge_scale;
            if exponent < 40.0 {
                fired = rng.random::<f64>() < (-exponent).exp();
            }
        }
        if fired {
            spike_times.push((k + 1) as f64 * dt);
            v = p.u_rest;
            hold = refractory_steps;
        } else {
            v = next;
        }
    }
    Ok(SdeRun {
        spike_times,
        stimulus: StimulusRecord { bin, values: stimulus },
        duration: steps as f64 * dt,
    })
}

/// `count` independent trajectories, run in parallel on distinct streams of `seed`.
pub fn simulate_trajectories(p: &CoherenceParams, cfg: &SdeConfig, seed: u64, count: usize) -> Result<Vec<SdeRun>> {
    (0..count)
        .into_par_iter()
        .map(|i| simulate_lif_sde(p, cfg, &mut stream_rng(seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deterministic(mu: f64) -> CoherenceParams {
        CoherenceParams {
            mu,
            d: 0.0,
            d_st: 0.0,
            tau_r: 0.0,
            v_th: 1.0,
            u_rest: 0.0,
        }
    }

    #[test]
    fn subthreshold_noiseless_is_silent() {
        let cfg = SdeConfig::new(20.0);
        let run = simulate_lif_sde(&deterministic(0.8), &cfg, &mut stream_rng(1, 0)).unwrap();
        assert!(run.spike_times.is_empty());
        assert!(run.stimulus.values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn noiseless_period() {
        let cfg = SdeConfig::new(10.0);
        let run = simulate_lif_sde(&deterministic(2.0), &cfg, &mut stream_rng(1, 0)).unwrap();
        assert!(run.spike_times.len() >= 10);
        for w in run.spike_times.windows(2) {
            assert!((w[1] - w[0] - 2f64.ln()).abs() <= cfg.dt + 1e-12);
        }
    }

    #[test]
    fn perfect_integrator_period() {
        // without leak, v grows as mu t: period v_th / mu
        let cfg = SdeConfig {
            leak: false,
            ..SdeConfig::new(10.0)
        };
        let run = simulate_lif_sde(&deterministic(0.5), &cfg, &mut stream_rng(1, 0)).unwrap();
        for w in run.spike_times.windows(2) {
            assert!((w[1] - w[0] - 2.0).abs() <= cfg.dt + 1e-12);
        }
    }

    #[test]
    fn refractory_delays_spikes() {
        let p = CoherenceParams { tau_r: 1.0, ..deterministic(2.0) };
        let run = simulate_lif_sde(&p, &SdeConfig::new(10.0), &mut stream_rng(1, 0)).unwrap();
        let gap = run.spike_times[2] - run.spike_times[1];
        assert!((gap - 1.0 - 2f64.ln()).abs() <= 2e-3);
    }

    #[test]
    fn rejects_coarse_step() {
        let cfg = SdeConfig {
            dt: 1e-2,
            ..SdeConfig::new(1.0)
        };
        let p = CoherenceParams::new(0.8, 0.1).unwrap();
        assert!(simulate_lif_sde(&p, &cfg, &mut stream_rng(1, 0)).is_err());
    }

    #[test]
    fn stimulus_record_statistics() {
        let p = CoherenceParams::new(0.8, 0.1).unwrap();
        let cfg = SdeConfig::new(200.0);
        let run = simulate_lif_sde(&p, &cfg, &mut stream_rng(3, 0)).unwrap();
        let s = &run.stimulus.values;
        assert_eq!(s.len(), 4000);
        // bin average of white noise with intensity 2 D has variance 2 D / bin
        let var = s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
        let want = 2.0 * p.d / cfg.bin;
        assert!(((var - want) / want).abs() < 0.08, "var {var} vs {want}");
    }

    #[test]
    fn trajectories_are_reproducible() {
        let p = CoherenceParams::new(0.8, 0.1).unwrap();
        let cfg = SdeConfig::new(20.0);
        let a = simulate_trajectories(&p, &cfg, 9, 3).unwrap();
        let b = simulate_trajectories(&p, &cfg, 9, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].spike_times, a[1].spike_times);
    }
}
