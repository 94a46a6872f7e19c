//! Integrate-and-fire membrane dynamics.
//!
//! One discrete time-step of a hidden unit is: integrate the weighted input,
//! compare against the threshold (strict `>`), then either reset to the
//! resting potential or decay by `exp(-1/tau_m)`. The output layer never
//! spikes; it decays first and then accumulates.

use std::fmt;

use crate::error::{check_len, Result, SnnError};

/// Membrane time constant in time-steps. `Infinite` is the IF neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeConstant {
    Finite(f64),
    Infinite,
}

impl TimeConstant {
    pub fn is_leaky(&self) -> bool {
        matches!(self, TimeConstant::Finite(_))
    }
}

impl fmt::Display for TimeConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeConstant::Finite(tau) => write!(f, "{tau}"),
            TimeConstant::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for TimeConstant {
    type Err = SnnError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinite" | "infinity") {
            return Ok(TimeConstant::Infinite);
        }
        let tau: f64 = t
            .parse()
            .map_err(|_| SnnError::InvalidNeuron(format!("cannot parse time constant {s:?}")))?;
        if tau.is_infinite() && tau > 0.0 {
            Ok(TimeConstant::Infinite)
        } else {
            Ok(TimeConstant::Finite(tau))
        }
    }
}

/// Parameters shared by every neuron of a network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronConfig {
    tau_m: TimeConstant,
    v_th: f64,
    u_rest: f64,
    epsilon: f64,
    decay: f64,
}

impl NeuronConfig {
    pub fn new(tau_m: TimeConstant, v_th: f64, u_rest: f64, epsilon: f64) -> Result<Self> {
        if let TimeConstant::Finite(tau) = tau_m {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(SnnError::InvalidNeuron(format!(
                    "tau_m must be positive, got {tau}"
                )));
            }
        }
        if !(v_th.is_finite() && u_rest.is_finite() && v_th > u_rest) {
            return Err(SnnError::InvalidNeuron(format!(
                "threshold {v_th} must exceed resting potential {u_rest}"
            )));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(SnnError::InvalidNeuron(format!(
                "epsilon must be non-negative, got {epsilon}"
            )));
        }
        let decay = match tau_m {
            TimeConstant::Finite(tau) => (-1.0 / tau).exp(),
            TimeConstant::Infinite => 1.0,
        };
        Ok(Self {
            tau_m,
            v_th,
            u_rest,
            epsilon,
            decay,
        })
    }

    /// LIF neuron with the default threshold 1, resting potential 0 and epsilon 0.
    pub fn lif(tau_m: f64) -> Result<Self> {
        Self::new(TimeConstant::Finite(tau_m), 1.0, 0.0, 0.0)
    }

    /// Non-leaky IF neuron with the default threshold and resting potential.
    pub fn integrate_and_fire() -> Self {
        Self::new(TimeConstant::Infinite, 1.0, 0.0, 0.0).expect("default IF config is valid")
    }

    pub fn with_tau(self, tau_m: TimeConstant) -> Result<Self> {
        Self::new(tau_m, self.v_th, self.u_rest, self.epsilon)
    }

    pub fn tau_m(&self) -> TimeConstant {
        self.tau_m
    }

    pub fn v_th(&self) -> f64 {
        self.v_th
    }

    pub fn u_rest(&self) -> f64 {
        self.u_rest
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `exp(-1/tau_m)`, exactly 1 for the IF neuron.
    pub fn decay_factor(&self) -> f64 {
        self.decay
    }

    /// Derivative of the spike function used in place of the true (Dirac) one.
    pub fn surrogate_grad(&self, spike: f64) -> f64 {
        if spike > 0.0 {
            1.0 / (self.v_th + self.epsilon)
        } else {
            0.0
        }
    }

    /// A single hidden unit step. Returns `(spike, pre_reset, post)`.
    #[inline]
    pub fn step_unit(&self, u: f64, input: f64) -> (f64, f64, f64) {
        let integrated = u + input;
        if integrated > self.v_th {
            (1.0, integrated, self.u_rest)
        } else {
            (0.0, integrated, self.decay * integrated)
        }
    }
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self::integrate_and_fire()
    }
}

/// Membrane potentials and last spike outputs of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub u: Vec<f64>,
    pub o: Vec<f64>,
}

impl LayerState {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            o: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Integrate, fire on `u > v_th`, then reset or decay.
    ///
    /// Writes the pre-reset potential of each unit into `pre_reset` when given;
    /// backpropagation needs it.
    pub fn integrate_step(
        &mut self,
        weighted_input: &[f64],
        cfg: &NeuronConfig,
        mut pre_reset: Option<&mut [f64]>,
    ) -> Result<()> {
        check_len("integrate_step", self.u.len(), weighted_input.len())?;
        if let Some(buf) = pre_reset.as_deref() {
            check_len("integrate_step trace", self.u.len(), buf.len())?;
        }
        for (i, (u, &x)) in self.u.iter_mut().zip(weighted_input).enumerate() {
            let (spike, integrated, post) = cfg.step_unit(*u, x);
            self.o[i] = spike;
            *u = post;
            if let Some(buf) = pre_reset.as_deref_mut() {
                buf[i] = integrated;
            }
        }
        Ok(())
    }

    /// Non-spiking output accumulation: decay the previous potential, then add.
    pub fn accumulate_output_step(&mut self, weighted_input: &[f64], cfg: &NeuronConfig) -> Result<()> {
        check_len("accumulate_output_step", self.u.len(), weighted_input.len())?;
        let d = cfg.decay_factor();
        for (u, &x) in self.u.iter_mut().zip(weighted_input) {
            *u = d * *u + x;
        }
        Ok(())
    }
}
