use snnlab::coherence::{
    coherence_fn, combine_spectra, estimate_spectra, firing_rate, simulate_trajectories, CoherenceParams, SdeConfig,
};

fn simulated_rate(p: &CoherenceParams, cfg: &SdeConfig, seed: u64, count: usize) -> f64 {
    let runs = simulate_trajectories(p, cfg, seed, count).unwrap();
    let spikes: usize = runs.iter().map(|r| r.spike_times.len()).sum();
    spikes as f64 / (cfg.duration * count as f64)
}

#[test]
fn analytic_rate_matches_simulation() {
    for (mu, d) in [(0.8, 0.1), (1.5, 0.1), (0.5, 0.3)] {
        let p = CoherenceParams::new(mu, d).unwrap();
        let r0 = firing_rate(&p).unwrap();
        let mc = simulated_rate(&p, &SdeConfig::new(2.5e4), 5, 4);
        let rel = (mc - r0).abs() / r0;
        assert!(rel < 0.02, "mu {mu}, D {d}: analytic {r0}, simulated {mc} ({:.2}%)", 100.0 * rel);
    }
}

#[test]
fn refractory_rate_matches_simulation() {
    let p = CoherenceParams::new(1.2, 0.2).unwrap().with_refractory(0.5).unwrap();
    let r0 = firing_rate(&p).unwrap();
    let mc = simulated_rate(&p, &SdeConfig::new(2e4), 9, 2);
    assert!((mc - r0).abs() / r0 < 0.02, "analytic {r0}, simulated {mc}");
}

#[test]
fn rate_is_stable_under_step_refinement() {
    let p = CoherenceParams::new(1.5, 0.1).unwrap();
    let r0 = firing_rate(&p).unwrap();
    for dt in [1e-3, 2.5e-4] {
        let cfg = SdeConfig {
            dt,
            ..SdeConfig::new(1e4)
        };
        let mc = simulated_rate(&p, &cfg, 3, 2);
        assert!((mc - r0).abs() / r0 < 0.02, "dt {dt}: analytic {r0}, simulated {mc}");
    }
}

#[test]
fn simulated_coherence_matches_closed_form() {
    let p = CoherenceParams::new(0.8, 0.1).unwrap();
    let runs = simulate_trajectories(&p, &SdeConfig::new(2.5e4), 21, 4).unwrap();
    let parts: Vec<_> = runs
        .iter()
        .map(|r| estimate_spectra(&r.spike_times, &r.stimulus, 100.0).unwrap())
        .collect();
    let est = combine_spectra(&parts).unwrap();
    let mc = est.coherence();
    let mut gaps = Vec::new();
    for (w, c) in est.omegas.iter().zip(&mc) {
        if (0.1..=5.0).contains(w) {
            gaps.push((coherence_fn(*w, &p).unwrap() - c).abs());
        }
    }
    let mad = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(gaps.len() > 50);
    assert!(mad < 0.05, "mean absolute deviation {mad}");
}

#[test]
fn integrator_transmits_more_at_high_frequency() {
    // without the leak the membrane does not low-pass the stimulus
    let p = CoherenceParams::new(0.8, 0.1).unwrap();
    let estimate = |leak: bool| {
        let cfg = SdeConfig {
            leak,
            ..SdeConfig::new(1e4)
        };
        let runs = simulate_trajectories(&p, &cfg, 4, 1).unwrap();
        let est = estimate_spectra(&runs[0].spike_times, &runs[0].stimulus, 100.0).unwrap();
        let c = est.coherence();
        let band: Vec<f64> = est
            .omegas
            .iter()
            .zip(&c)
            .filter(|(w, _)| (3.0..=5.0).contains(*w))
            .map(|(_, v)| *v)
            .collect();
        band.iter().sum::<f64>() / band.len() as f64
    };
    let lif = estimate(true);
    let integrator = estimate(false);
    assert!(integrator > lif, "IF {integrator} vs LIF {lif} in omega 3..5");
}
