//! Jacobi theta functions and Dedekind eta for purely imaginary modular
//! parameter.
//!
//! Only the two parameter families that appear in the cylinder formulas are
//! supported: `theta1(z | i p / pi)` with nome `q = exp(-p)` and
//! `theta4(z | 2 i p / pi)` with nome `q = exp(-2 p)`. Every function has two
//! representations: the defining q-series, geometrically convergent for large
//! `p`, and the modular (Gaussian-image) form obtained by Poisson summation,
//! geometrically convergent for small `p`. The crossover sits at `p = pi/2`
//! where both converge fast; agreement of the two forms is part of the test
//! suite.

use crate::{require_finite, require_positive, Result};
use std::f64::consts::PI;

/// Representation crossover: q-series for `p >= pi/2`, Gaussian image below.
pub const CROSSOVER: f64 = PI / 2.0;

/// Relative truncation threshold for the series.
const TRUNC: f64 = 1e-15;
const MAX_TERMS: usize = 4000;

/// Arguments `(z, p)` of the theta functions. `p` is the cylinder modulus;
/// the modular parameter is `i p / pi` (nome `exp(-p)`) for `theta1` and
/// `2 i p / pi` (nome `exp(-2p)`) for `theta4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaParams {
    pub z: f64,
    pub p: f64,
}

impl ThetaParams {
    pub fn new(z: f64, p: f64) -> Result<Self> {
        require_finite("z", z)?;
        require_positive("p", p)?;
        Ok(Self { z, p })
    }
}

/// Reduce `z` into `[-1/2, 1/2)` using `theta1(z+1) = -theta1(z)`.
fn reduce_z1(z: f64) -> (f64, f64) {
    let k = z.round();
    let sign = if (k as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    (z - k, sign)
}

/// Reduce `z` into `[-1/2, 1/2)`; `theta4` has period 1.
fn reduce_z4(z: f64) -> f64 {
    z - z.round()
}

fn theta1_qseries(z: f64, p: f64) -> f64 {
    let mut sum = 0.0;
    let mut mag: f64 = 0.0;
    for n in 0..MAX_TERMS {
        let half = n as f64 + 0.5;
        let amp = 2.0 * (-p * half * half).exp();
        let term = if n % 2 == 0 { amp } else { -amp } * ((2 * n + 1) as f64 * PI * z).sin();
        sum += term;
        mag = mag.max(sum.abs()).max(amp);
        if amp < TRUNC * mag {
            break;
        }
    }
    sum
}

fn theta1_dz_qseries(z: f64, p: f64) -> f64 {
    let mut sum = 0.0;
    let mut mag: f64 = 0.0;
    for n in 0..MAX_TERMS {
        let half = n as f64 + 0.5;
        let k = (2 * n + 1) as f64 * PI;
        let amp = 2.0 * k * (-p * half * half).exp();
        let term = if n % 2 == 0 { amp } else { -amp } * (k * z).cos();
        sum += term;
        mag = mag.max(sum.abs()).max(amp);
        if amp < TRUNC * mag {
            break;
        }
    }
    sum
}

/// Gaussian-image form of `theta1(z | i p / pi)` for reduced `z`:
/// `sqrt(pi/p) * sum_{n>=0} (-1)^n (exp(-pi^2 (z-n-1/2)^2 / p)
///                                 - exp(-pi^2 (z+n+1/2)^2 / p))`.
fn theta1_image(z: f64, p: f64) -> f64 {
    let pref = (PI / p).sqrt();
    let mut sum = 0.0;
    for n in 0..MAX_TERMS {
        let c = n as f64 + 0.5;
        let a = (-PI * PI * (z - c) * (z - c) / p).exp();
        let b = (-PI * PI * (z + c) * (z + c) / p).exp();
        let term = if n % 2 == 0 { a - b } else { b - a };
        sum += term;
        if a.max(b) < TRUNC * sum.abs().max(1e-300) {
            break;
        }
    }
    pref * sum
}

fn theta1_dz_image(z: f64, p: f64) -> f64 {
    let pref = (PI / p).sqrt();
    let scale = 2.0 * PI * PI / p;
    let mut sum = 0.0;
    let mut mag: f64 = 0.0;
    for n in 0..MAX_TERMS {
        let c = n as f64 + 0.5;
        let a = -scale * (z - c) * (-PI * PI * (z - c) * (z - c) / p).exp();
        let b = -scale * (z + c) * (-PI * PI * (z + c) * (z + c) / p).exp();
        let term = if n % 2 == 0 { a - b } else { b - a };
        sum += term;
        mag = mag.max(sum.abs()).max(a.abs()).max(b.abs());
        if a.abs().max(b.abs()) < TRUNC * mag.max(1e-300) {
            break;
        }
    }
    pref * sum
}

/// `theta1(z | i p / pi) = 2 sum_{n>=0} (-1)^n exp(-p (n+1/2)^2) sin((2n+1) pi z)`.
pub fn theta1(z: f64, p: f64) -> Result<f64> {
    let ThetaParams { z, p } = ThetaParams::new(z, p)?;
    let (zr, sign) = reduce_z1(z);
    Ok(sign * if p >= CROSSOVER { theta1_qseries(zr, p) } else { theta1_image(zr, p) })
}

/// z-derivative of [`theta1`], term-wise analytic.
pub fn theta1_dz(z: f64, p: f64) -> Result<f64> {
    let ThetaParams { z, p } = ThetaParams::new(z, p)?;
    let (zr, sign) = reduce_z1(z);
    Ok(sign * if p >= CROSSOVER { theta1_dz_qseries(zr, p) } else { theta1_dz_image(zr, p) })
}

fn theta4_qseries(z: f64, p: f64) -> f64 {
    let mut sum = 1.0;
    for n in 1..MAX_TERMS {
        let amp = 2.0 * (-2.0 * p * (n * n) as f64).exp();
        let term = if n % 2 == 0 { amp } else { -amp } * (2.0 * PI * n as f64 * z).cos();
        sum += term;
        if amp < TRUNC * sum.abs().max(1.0) {
            break;
        }
    }
    sum
}

fn theta4_dz_qseries(z: f64, p: f64) -> f64 {
    let mut sum = 0.0;
    let mut mag: f64 = 0.0;
    for n in 1..MAX_TERMS {
        let k = 2.0 * PI * n as f64;
        let amp = 2.0 * k * (-2.0 * p * (n * n) as f64).exp();
        let term = if n % 2 == 0 { -amp } else { amp } * (k * z).sin();
        sum += term;
        mag = mag.max(sum.abs()).max(amp);
        if amp < TRUNC * mag.max(1e-300) {
            break;
        }
    }
    sum
}

/// Gaussian-image form of `theta4(z | 2 i p / pi)`:
/// `sqrt(pi/2p) * sum_{n>=0} (exp(-pi^2 (z-n-1/2)^2 / 2p)
///                          + exp(-pi^2 (z+n+1/2)^2 / 2p))`.
fn theta4_image(z: f64, p: f64) -> f64 {
    let pref = (PI / (2.0 * p)).sqrt();
    let mut sum = 0.0;
    for n in 0..MAX_TERMS {
        let c = n as f64 + 0.5;
        let a = (-PI * PI * (z - c) * (z - c) / (2.0 * p)).exp();
        let b = (-PI * PI * (z + c) * (z + c) / (2.0 * p)).exp();
        sum += a + b;
        if a.max(b) < TRUNC * sum.max(1e-300) {
            break;
        }
    }
    pref * sum
}

fn theta4_dz_image(z: f64, p: f64) -> f64 {
    let pref = (PI / (2.0 * p)).sqrt();
    let scale = PI * PI / p;
    let mut sum = 0.0;
    let mut mag: f64 = 0.0;
    for n in 0..MAX_TERMS {
        let c = n as f64 + 0.5;
        let a = -scale * (z - c) * (-PI * PI * (z - c) * (z - c) / (2.0 * p)).exp();
        let b = -scale * (z + c) * (-PI * PI * (z + c) * (z + c) / (2.0 * p)).exp();
        sum += a + b;
        mag = mag.max(sum.abs()).max(a.abs()).max(b.abs());
        if a.abs().max(b.abs()) < TRUNC * mag.max(1e-300) {
            break;
        }
    }
    pref * sum
}

/// `theta4(z | 2 i p / pi) = 1 + 2 sum_{n>=1} (-1)^n exp(-2 p n^2) cos(2 pi n z)`.
pub fn theta4(z: f64, p: f64) -> Result<f64> {
    let ThetaParams { z, p } = ThetaParams::new(z, p)?;
    let zr = reduce_z4(z);
    Ok(if p >= CROSSOVER { theta4_qseries(zr, p) } else { theta4_image(zr, p) })
}

/// z-derivative of [`theta4`], term-wise analytic.
pub fn theta4_dz(z: f64, p: f64) -> Result<f64> {
    let ThetaParams { z, p } = ThetaParams::new(z, p)?;
    let zr = reduce_z4(z);
    Ok(if p >= CROSSOVER { theta4_dz_qseries(zr, p) } else { theta4_dz_image(zr, p) })
}

/// Dedekind `eta(i p / pi) = exp(-p/12) prod_{n>=1} (1 - exp(-2 n p))`.
pub fn dedekind_eta(p: f64) -> Result<f64> {
    require_positive("p", p)?;
    let mut prod = (-p / 12.0).exp();
    for n in 1..100_000u64 {
        let f = 1.0 - (-2.0 * n as f64 * p).exp();
        prod *= f;
        if 1.0 - f < 1e-16 {
            break;
        }
    }
    Ok(prod)
}

/// Second z-derivative of [`theta1`], term-wise analytic.
pub fn theta1_d2z(z: f64, p: f64) -> Result<f64> {
    let ThetaParams { z, p } = ThetaParams::new(z, p)?;
    let (zr, sign) = reduce_z1(z);
    if p >= CROSSOVER {
        let mut sum = 0.0;
        let mut mag: f64 = 0.0;
        for n in 0..MAX_TERMS {
            let half = n as f64 + 0.5;
            let k = (2 * n + 1) as f64 * PI;
            let amp = 2.0 * k * k * (-p * half * half).exp();
            let term = if n % 2 == 0 { -amp } else { amp } * (k * zr).sin();
            sum += term;
            mag = mag.max(sum.abs()).max(amp);
            if amp < TRUNC * mag.max(1e-300) {
                break;
            }
        }
        Ok(sign * sum)
    } else {
        // d^2/dz^2 exp(-a (z-c)^2) = (4 a^2 (z-c)^2 - 2a) exp(-a (z-c)^2)
        let a = PI * PI / p;
        let pref = (PI / p).sqrt();
        let mut sum = 0.0;
        let mut mag: f64 = 0.0;
        for n in 0..MAX_TERMS {
            let c = n as f64 + 0.5;
            let ta = (4.0 * a * a * (zr - c) * (zr - c) - 2.0 * a)
                * (-a * (zr - c) * (zr - c)).exp();
            let tb = (4.0 * a * a * (zr + c) * (zr + c) - 2.0 * a)
                * (-a * (zr + c) * (zr + c)).exp();
            let term = if n % 2 == 0 { ta - tb } else { tb - ta };
            sum += term;
            mag = mag.max(sum.abs()).max(ta.abs()).max(tb.abs());
            if ta.abs().max(tb.abs()) < TRUNC * mag.max(1e-300) {
                break;
            }
        }
        Ok(sign * pref * sum)
    }
}

// Alternate-representation entry points, exposed for the dual-agreement
// checks in the test suite and the `check` command.
#[doc(hidden)]
pub fn theta1_alt(z: f64, p: f64) -> Result<f64> {
    let ThetaParams { z, p } = ThetaParams::new(z, p)?;
    let (zr, sign) = reduce_z1(z);
    Ok(sign * if p >= CROSSOVER { theta1_image(zr, p) } else { theta1_qseries(zr, p) })
}

#[doc(hidden)]
pub fn theta4_alt(z: f64, p: f64) -> Result<f64> {
    let ThetaParams { z, p } = ThetaParams::new(z, p)?;
    let zr = reduce_z4(z);
    Ok(if p >= CROSSOVER { theta4_image(zr, p) } else { theta4_qseries(zr, p) })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from direct high-precision summation of the defining series.
    const THETA1_QUARTER_Q01: f64 = 0.78731722620944666; // z=1/4, q=e^{-p}=0.1
    const THETA4_ZERO_Q01: f64 = 0.8001999980000002; // z=0, nome e^{-2p}=0.1
    const ETA_I: f64 = 0.768225422326056659; // p = pi, i.e. tau = i

    #[test]
    fn theta1_odd_at_zero() {
        assert_eq!(theta1(0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn theta1_reference_value() {
        let p = 10f64.ln(); // q = 0.1
        assert!((theta1(0.25, p).unwrap() - THETA1_QUARTER_Q01).abs() < 1e-12);
    }

    #[test]
    fn theta1_quasi_period() {
        let p = 10f64.ln();
        let a = theta1(1.25, p).unwrap();
        let b = theta1(0.25, p).unwrap();
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn theta4_reference_value() {
        let p = 10f64.ln() / 2.0; // nome e^{-2p} = 0.1
        assert!((theta4(0.0, p).unwrap() - THETA4_ZERO_Q01).abs() < 1e-12);
    }

    #[test]
    fn theta4_large_p_tends_to_one() {
        assert!((theta4(0.37, 40.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn theta4_dz_vanishes_at_half() {
        assert!(theta4_dz(0.5, 1.3).unwrap().abs() < 1e-14);
        assert!(theta4_dz(0.5, 0.3).unwrap().abs() < 1e-12);
    }

    #[test]
    fn eta_reference_and_asymptotics() {
        assert!((dedekind_eta(PI).unwrap() - ETA_I).abs() < 1e-14);
        let p = 60.0;
        let ratio = dedekind_eta(p).unwrap() / (-p / 12.0).exp();
        assert!((ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eta_cubed_is_theta1_slope() {
        // theta1(x/2pi | ip/pi) ~ eta(ip/pi)^3 x as x -> 0
        for &p in &[0.4, 1.0, PI, 5.0] {
            let eta3 = dedekind_eta(p).unwrap().powi(3);
            let x = 1e-6;
            let slope = theta1(x / (2.0 * PI), p).unwrap() / x;
            assert!((slope / eta3 - 1.0).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn small_x_slope_cubic_remainder() {
        let p = 1.0;
        let eta3 = dedekind_eta(p).unwrap().powi(3);
        // |theta1(x/2pi) - eta^3 x| <= C x^3 with a finite fitted C.
        let mut c_max: f64 = 0.0;
        for i in 1..=20 {
            let x = 0.1 * i as f64 / 20.0;
            let r = (theta1(x / (2.0 * PI), p).unwrap() - eta3 * x).abs();
            c_max = c_max.max(r / x.powi(3));
        }
        assert!(c_max.is_finite() && c_max < 1.0);
    }

    #[test]
    fn dual_representation_agreement() {
        for i in 0..=20 {
            let p = 0.1 + 9.9 * i as f64 / 20.0;
            for j in 0..=10 {
                let z = j as f64 / 10.0;
                let a = theta1(z, p).unwrap();
                let b = theta1_alt(z, p).unwrap();
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "theta1 p={p} z={z}");
                let a = theta4(z, p).unwrap();
                let b = theta4_alt(z, p).unwrap();
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "theta4 p={p} z={z}");
            }
        }
    }

    #[test]
    fn parity() {
        for &(z, p) in &[(0.13, 0.3), (0.41, 2.0), (0.77, 1.0)] {
            let t1p = theta1(z, p).unwrap();
            let t1m = theta1(-z, p).unwrap();
            assert!((t1p + t1m).abs() <= 1e-14 * t1p.abs().max(1.0));
            let t4p = theta4(z, p).unwrap();
            let t4m = theta4(-z, p).unwrap();
            assert!((t4p - t4m).abs() <= 1e-14 * t4p.abs().max(1.0));
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-6;
        for &(z, p) in &[(0.2, 0.4), (0.33, 1.7), (0.48, 3.0)] {
            let fd = (theta1(z + h, p).unwrap() - theta1(z - h, p).unwrap()) / (2.0 * h);
            let an = theta1_dz(z, p).unwrap();
            assert!((fd - an).abs() < 1e-8 * an.abs().max(1.0), "theta1_dz z={z} p={p}");
            let fd = (theta4(z + h, p).unwrap() - theta4(z - h, p).unwrap()) / (2.0 * h);
            let an = theta4_dz(z, p).unwrap();
            assert!((fd - an).abs() < 1e-8 * an.abs().max(1.0), "theta4_dz z={z} p={p}");
            let fd = (theta1_dz(z + h, p).unwrap() - theta1_dz(z - h, p).unwrap()) / (2.0 * h);
            let an = theta1_d2z(z, p).unwrap();
            assert!(
                (fd - an).abs() < 1e-7 * an.abs().max(1.0),
                "theta1_d2z z={z} p={p}"
            );
        }
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(theta1(0.2, 0.0).is_err());
        assert!(theta1(0.2, -1.0).is_err());
        assert!(theta1(f64::NAN, 1.0).is_err());
        assert!(theta4(0.2, f64::INFINITY).is_err());
        assert!(dedekind_eta(-0.1).is_err());
    }
}
