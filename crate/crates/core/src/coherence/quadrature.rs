//! Globally adaptive 15-point Gauss–Kronrod quadrature on finite intervals.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Result, SnnError};

/// Values the integrator can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// 7-point Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Equal pieces the interval is cut into before adapting.
    pub initial_pieces: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_intervals: 4000,
            initial_pieces: 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let sum = f(c - dx) + f(c + dx);
        kronrod = kronrod + sum * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + sum * WG[j / 2];
        }
    }
    let kronrod = kronrod * h;
    let gauss = gauss * h;
    (kronrod, (kronrod - gauss).magnitude())
}

struct Piece<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

/// Integrate `f` over `[a, b]`, bisecting the worst piece until the summed
/// error estimate meets `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadSettings,
) -> Result<QuadResult<T>> {
    let n0 = settings.initial_pieces.max(1);
    let width = (b - a) / n0 as f64;
    let mut pieces: Vec<Piece<T>> = (0..n0)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == n0 { b } else { lo + width };
            let (value, error) = gk15(&mut f, lo, hi);
            Piece { a: lo, b: hi, value, error }
        })
        .collect();
    let mut evaluations = 15 * n0;

    loop {
        let total = pieces.iter().fold(T::zero(), |s, p| s + p.value);
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        let tol = settings.abs_tol.max(settings.rel_tol * total.magnitude());
        if error <= tol {
            return Ok(QuadResult {
                value: total,
                error,
                evaluations,
            });
        }
        if pieces.len() >= settings.max_intervals {
            return Err(SnnError::Quadrature {
                estimate: error,
                tolerance: tol,
            });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one piece");
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // cannot split further in floating point
            return Err(SnnError::Quadrature {
                estimate: error,
                tolerance: tol,
            });
        }
        let (v1, e1) = gk15(&mut f, p.a, mid);
        let (v2, e2) = gk15(&mut f, mid, p.b);
        evaluations += 30;
        pieces.push(Piece { a: p.a, b: mid, value: v1, error: e1 });
        pieces.push(Piece { a: mid, b: p.b, value: v2, error: e2 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, &QuadSettings::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn peaked_and_oscillatory() {
        let s = QuadSettings::default();
        let r = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, &s).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        let r = integrate(|x: f64| (40.0 * x).cos(), 0.0, 3.0, &s).unwrap();
        assert!((r.value - (120.0f64).sin() / 40.0).abs() < 1e-13);
    }

    #[test]
    fn complex_values() {
        // integral of e^{ix} over [0, pi] = 2i
        let r = integrate(|x: f64| Complex64::new(0.0, x).exp(), 0.0, std::f64::consts::PI, &QuadSettings::default()).unwrap();
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn reports_failure() {
        let s = QuadSettings {
            max_intervals: 3,
            ..Default::default()
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &s).unwrap_err();
        assert!(matches!(err, SnnError::Quadrature { .. }));
    }
}
