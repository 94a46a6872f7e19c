use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snnlab::coherence::special::{gamma, pcf, pcf_triplet};
use snnlab::coherence::{coherence_compositional, coherence_fn, cross_spectrum, cross_spectrum_norm_sqr, CoherenceParams};

const PI: f64 = std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// ln Gamma by upward shift and the Stirling series.
fn ln_gamma_stirling(z: Complex64) -> Complex64 {
    let shift = 20;
    let mut acc = c(0.0, 0.0);
    let mut w = z;
    for _ in 0..shift {
        acc += w.ln();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))));
    (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series - acc
}

fn rgamma_oracle(z: Complex64) -> Complex64 {
    // 1/Gamma via reflection on the left half-plane so poles become zeros
    if z.re < 0.5 {
        (PI * z).sin() / PI * ln_gamma_stirling(1.0 - z).exp()
    } else {
        (-ln_gamma_stirling(z)).exp()
    }
}

/// Series value and the sum of absolute terms.
fn kummer(a: Complex64, b: f64, x: f64) -> (Complex64, f64) {
    let mut term = c(1.0, 0.0);
    let mut sum = term;
    let mut abs = 1.0;
    for k in 0..400 {
        let k = k as f64;
        term *= (a + k) / (b + k) * x / (k + 1.0);
        sum += term;
        abs += term.norm();
        if term.norm() < 1e-18 * abs && k > 5.0 {
            break;
        }
    }
    (sum, abs)
}

/// D_nu(z) from the pair of confluent hypergeometric series, with a bound on
/// the rounding error lost to cancellation.
fn pcf_kummer(nu: Complex64, z: f64) -> (Complex64, f64) {
    let x = z * z / 2.0;
    let pre = (nu * 0.5 * 2f64.ln()).exp() * (-z * z / 4.0).exp();
    let (me, ae) = kummer(-nu * 0.5, 0.5, x);
    let (mo, ao) = kummer((1.0 - nu) * 0.5, 1.5, x);
    let ge = PI.sqrt() * rgamma_oracle((1.0 - nu) * 0.5);
    let go = (2.0 * PI).sqrt() * z * rgamma_oracle(-nu * 0.5);
    let value = pre * (ge * me - go * mo);
    let bound = 1e-14 * pre.norm() * (ge.norm() * ae + go.norm() * ao);
    (value, bound)
}

fn grid() -> Vec<(f64, f64)> {
    let omegas = [0.1, 0.3, 0.7, 1.0, 2.0, 3.5, 5.0, 8.0, 12.0, 16.0, 20.0];
    let zs: Vec<f64> = (0..=12).map(|k| -3.0 + 0.5 * k as f64).collect();
    omegas.iter().flat_map(|&w| zs.iter().map(move |&z| (w, z))).collect()
}

#[test]
fn gamma_on_test_strip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let z = c(rng.random_range(-2.0..1.0), rng.random_range(-15.0..15.0));
        if (z.im).abs() < 1e-3 && (z.re - z.re.round()).abs() < 1e-3 && z.re <= 0.0 {
            continue;
        }
        let reference = rgamma_oracle(z).inv();
        let got = gamma(z);
        assert!((got - reference).norm() <= 1e-12 * reference.norm(), "Gamma({z}) = {got}, oracle {reference}");
    }
}

#[test]
fn pcf_special_values() {
    for z in [-3.0, -1.2, 0.0, 0.4, 2.5] {
        let d0 = pcf(c(0.0, 0.0), z).unwrap();
        assert!((d0 - c((-z * z / 4.0).exp(), 0.0)).norm() < 1e-10, "D_0({z}) = {d0}");
    }
    let dm1 = pcf(c(-1.0, 0.0), 0.0).unwrap();
    assert!((dm1 - c((PI / 2.0).sqrt(), 0.0)).norm() < 1e-10, "{dm1}");
}

#[test]
fn pcf_matches_series_oracle() {
    for (w, z) in grid() {
        let [dm2, dm1, d0] = pcf_triplet(w, z).unwrap();
        for (order, got) in [(-2.0, dm2), (-1.0, dm1), (0.0, d0)] {
            let nu = c(order, w);
            let (want, bound) = pcf_kummer(nu, z);
            let err = (got - want).norm();
            assert!(
                err < (1e-8 * want.norm()).max(bound),
                "D_{nu}({z}): {got} vs series {want} (err {err:e}, oracle bound {bound:e})"
            );
        }
    }
}

#[test]
fn recurrence_residual_on_grid() {
    // every order here lies in Re < 0, so each value is an independent integral
    let mut worst = 0.0f64;
    for (w, z) in grid() {
        let nu = c(-2.0, w);
        let lo = pcf(nu - 1.0, z).unwrap();
        let mid = pcf(nu, z).unwrap();
        let hi = pcf(nu + 1.0, z).unwrap();
        let residual = hi - mid * z + nu * lo;
        let scale = hi.norm() + (mid * z).norm() + (nu * lo).norm();
        worst = worst.max(residual.norm() / scale);
    }
    assert!(worst < 1e-8, "worst relative recurrence residual {worst:e}");
}

fn random_params(rng: &mut ChaCha8Rng) -> CoherenceParams {
    let mu = rng.random_range(0.3..2.0);
    let d = rng.random_range(0.05..0.5);
    CoherenceParams::new(mu, d)
        .unwrap()
        .with_stimulus(rng.random_range(0.2..1.0) * d)
        .unwrap()
        .with_refractory(rng.random_range(0.0..0.5))
        .unwrap()
}

#[test]
fn closed_form_matches_compositional() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let w = rng.random_range(0.05..15.0);
        let a = coherence_fn(w, &p).unwrap();
        let b = coherence_compositional(w, &p).unwrap();
        assert!((0.0..=1.0).contains(&a), "C({w}) = {a} for {p:?}");
        assert!((a - b).abs() < 1e-10, "closed {a} vs compositional {b} at omega {w}, {p:?}");
    }
}

#[test]
fn cross_spectrum_two_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let w = rng.random_range(0.05..15.0);
        let direct = cross_spectrum(w, &p).unwrap().norm_sqr();
        let split = cross_spectrum_norm_sqr(w, &p).unwrap();
        assert!((direct - split).abs() <= 1e-10 * direct.max(1e-300), "{direct} vs {split}");
    }
}

#[test]
fn coherence_decays_at_high_frequency() {
    let p = CoherenceParams::new(0.8, 0.1).unwrap();
    let low = coherence_fn(0.2, &p).unwrap();
    let high = coherence_fn(15.0, &p).unwrap();
    assert!(high < low, "C(0.2) = {low}, C(15) = {high}");
}
