//! Complex log-gamma, the scaled complementary error function, and
//! parabolic cylinder functions `D_nu(z)` of complex order and real argument.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::quadrature::{integrate, QuadSettings};
use crate::error::{Result, SnnError};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(z)` on any branch (only its exponential is meaningful).
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // reflection: Gamma(z) Gamma(1 - z) = pi / sin(pi z)
        let s = (z * PI).sin();
        Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(Complex64::new(1.0, 0.0) - z)
    } else {
        let z = z - 1.0;
        let mut x = Complex64::new(LANCZOS[0], 0.0);
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            x += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
    }
}

pub fn gamma(z: Complex64) -> Complex64 {
    ln_gamma(z).exp()
}

/// `exp(x^2) erfc(x)` without overflow for large positive `x`.
///
/// Returns `+inf` once the true value overflows (`x < -26.6`).
pub fn erfcx(x: f64) -> f64 {
    if x < 10.0 {
        let hi = x * x;
        let lo = x.mul_add(x, -hi);
        if x < 0.0 {
            // erfc(x) = 2 - erfc(-x)
            return 2.0 * hi.exp() * lo.exp() - erfcx(-x);
        }
        libm::erfc(x) * hi.exp() * lo.exp()
    } else {
        // 1 / (x sqrt(pi)) * sum_n (-1)^n (2n-1)!! / (2x^2)^n
        let y = 0.5 / (x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..40 {
            term *= -((2 * n - 1) as f64) * y;
            sum += term;
            if term.abs() < 1e-17 {
                break;
            }
        }
        sum / (x * PI.sqrt())
    }
}

/// `D_nu(z)` for complex order and real argument.
///
/// Orders with `Re nu < 0` come from the integral representation
/// `D_nu(z) = exp(-z^2/4) / Gamma(-nu) * int_0^inf exp(-z t - t^2/2) t^(-nu-1) dt`;
/// other orders are reached by the three-term recurrence
/// `D_{nu+1}(z) = z D_nu(z) - nu D_{nu-1}(z)` from two such values.
pub fn pcf(nu: Complex64, z: f64) -> Result<Complex64> {
    if !(nu.re.is_finite() && nu.im.is_finite() && z.is_finite()) {
        return Err(SnnError::InvalidArgument(format!("pcf at non-finite input nu={nu}, z={z}")));
    }
    if nu.re < 0.0 {
        return pcf_integral(nu, z);
    }
    let steps = nu.re.floor() as usize + 1;
    let base = nu - steps as f64;
    let mut lower = pcf_integral(base - 1.0, z)?;
    let mut upper = pcf_integral(base, z)?;
    let mut order = base;
    for _ in 0..steps {
        let next = upper * z - order * lower;
        lower = upper;
        upper = next;
        order += 1.0;
    }
    Ok(upper)
}

/// The three orders the spectra need: `(D_{iw-2}, D_{iw-1}, D_{iw})` at `z`.
pub fn pcf_triplet(omega: f64, z: f64) -> Result<[Complex64; 3]> {
    let nu = Complex64::new(0.0, omega);
    let d2 = pcf_integral(nu - 2.0, z)?;
    let d1 = pcf_integral(nu - 1.0, z)?;
    // D_{iw} = z D_{iw-1} - (iw - 1) D_{iw-2}
    let d0 = d1 * z - (nu - 1.0) * d2;
    Ok([d2, d1, d0])
}

/// Ray angle for the integral. Turning the ray away from the oscillation
/// damps `|t^(-nu)|` and avoids cancellation for large `|Im nu|`; the Gaussian
/// factor still decays for `|theta| < pi/4`.
fn ray_angle(nu: Complex64) -> f64 {
    let turn = (0.25 * nu.im.abs()).min(PI / 5.0);
    -nu.im.signum() * turn * (nu.im != 0.0) as u8 as f64
}

fn pcf_integral(nu: Complex64, z: f64) -> Result<Complex64> {
    debug_assert!(nu.re < 0.0);
    let a = -nu;
    let theta = ray_angle(nu);
    let (ct, st) = (theta.cos(), theta.sin());
    let (c2t, s2t) = ((2.0 * theta).cos(), (2.0 * theta).sin());

    // log-magnitude of the integrand in s = ln|t|
    let log_mag = |s: f64| {
        let r = s.exp();
        -z * r * ct - 0.5 * r * r * c2t + a.re * s - a.im * theta
    };
    let (lo_scan, hi_scan, step) = (-120.0, 8.0, 0.02);
    let grid = ((hi_scan - lo_scan) / step) as usize;
    let peak = (0..=grid)
        .map(|i| log_mag(lo_scan + step * i as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = peak - 46.0;
    let mut s_lo = lo_scan;
    let mut s_hi = hi_scan;
    if let Some(i) = (0..=grid).find(|&i| log_mag(lo_scan + step * i as f64) > floor) {
        s_lo = lo_scan + step * i.saturating_sub(1) as f64;
    }
    if let Some(i) = (0..=grid).rev().find(|&i| log_mag(lo_scan + step * i as f64) > floor) {
        s_hi = (lo_scan + step * (i + 1) as f64).min(hi_scan);
    }

    let integrand = |s: f64| {
        let r = s.exp();
        let re_t = r * ct;
        let im_t = r * st;
        // -z t - t^2/2 + a (s + i theta)
        let re = -z * re_t - 0.5 * r * r * c2t + a.re * s - a.im * theta;
        let im = -z * im_t - 0.5 * r * r * s2t + a.im * s + a.re * theta;
        Complex64::from_polar((re - peak).exp(), im)
    };
    let pieces = ((s_hi - s_lo) * (a.im.abs() + 2.0) / 2.0).ceil() as usize + 8;
    let settings = QuadSettings {
        abs_tol: 4e-15,
        rel_tol: 1e-14,
        max_intervals: 20_000,
        initial_pieces: pieces,
    };
    let res = integrate(integrand, s_lo, s_hi, &settings)?;
    // dt = t ds, so t^(-nu-1) dt = t^a ds
    let scale = (Complex64::new(peak - 0.25 * z * z, 0.0) - ln_gamma(a)).exp();
    Ok(res.value * scale)
}
