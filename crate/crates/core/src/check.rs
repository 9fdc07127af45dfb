//! Fast self-consistency suite wired to the `check` CLI command: exact
//! identities, dual-representation agreements and PDE residuals across all
//! modules. Every check is cheap (the whole suite runs in seconds); the slow
//! statistical cross-validations live in the acceptance tests instead.

use crate::correlators::{self, BoundaryCondition};
use crate::loewner;
use crate::probabilities::{self, Branch};
use crate::special_fn;
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(
    out: &mut Vec<CheckResult>,
    name: &str,
    body: impl FnOnce() -> Result<(f64, f64), crate::Error>,
    tol: f64,
) {
    let (passed, detail) = match body() {
        Ok((err, _)) if err.is_nan() => (false, "produced NaN".to_string()),
        Ok((err, scale)) => (
            err <= tol * scale,
            format!("error {err:.3e}, tolerance {:.3e}", tol * scale),
        ),
        Err(e) => (false, format!("failed: {e}")),
    };
    out.push(CheckResult {
        name: name.to_string(),
        passed,
        detail,
    });
}

/// Run the full suite. `perturbation` shifts one reference constant and must
/// be 0.0 for real use; a nonzero value exists so callers can verify that the
/// suite is actually capable of failing.
pub fn run_suite(perturbation: f64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let su2 = |re: f64, im: f64| {
        let a = Complex64::new(re, im);
        let b = Complex64::new((1.0 - a.norm_sqr()).max(0.0).sqrt(), 0.0);
        BoundaryCondition::su2(a, b).unwrap()
    };

    check(
        &mut out,
        "theta dual representation",
        || {
            let mut worst: f64 = 0.0;
            for i in 0..=10 {
                let p = 0.1 + i as f64;
                for j in 1..10 {
                    let z = j as f64 / 10.0;
                    worst = worst.max(
                        (special_fn::theta1(z, p)? - special_fn::theta1_alt(z, p)?).abs(),
                    );
                    worst = worst.max(
                        (special_fn::theta4(z, p)? - special_fn::theta4_alt(z, p)?).abs(),
                    );
                }
            }
            Ok((worst, 1.0))
        },
        1e-12,
    );

    check(
        &mut out,
        "theta parity",
        || {
            let mut worst: f64 = 0.0;
            for &(z, p) in &[(0.13, 0.4), (0.37, 2.0)] {
                worst = worst.max((special_fn::theta1(z, p)? + special_fn::theta1(-z, p)?).abs());
                worst = worst.max((special_fn::theta4(z, p)? - special_fn::theta4(-z, p)?).abs());
            }
            Ok((worst, 1.0))
        },
        1e-14,
    );

    check(
        &mut out,
        "eta cubed small-x slope",
        || {
            let p = 1.7;
            let eta3 = special_fn::dedekind_eta(p)?.powi(3);
            let x = 1e-6;
            Ok(((special_fn::theta1(x / (2.0 * PI), p)? / x / eta3 - 1.0).abs(), 1.0))
        },
        1e-9,
    );

    check(
        &mut out,
        "v field dual representation",
        || {
            let mut worst: f64 = 0.0;
            for &p in &[0.3, 1.0, 2.0, 5.0] {
                for &y in &[0.7, PI, 5.3] {
                    worst = worst
                        .max((loewner::v_field(y, p)? - loewner::v_field_theta(y, p)?).abs());
                }
            }
            Ok((worst, 1.0))
        },
        1e-10,
    );

    check(
        &mut out,
        "drift dual representation",
        || {
            let bc = su2(0.5, 0.5);
            let mut worst: f64 = 0.0;
            for &p in &[0.8, 1.6, 3.0] {
                for &x in &[0.9, PI, 5.0] {
                    let d = correlators::drift(&bc, x, p)?;
                    let alt = 4.0 * correlators::f_dx(&bc, x, p)? / correlators::f_factor(&bc, x, p)?;
                    worst = worst.max((d - alt).abs());
                }
            }
            Ok((worst, 1.0))
        },
        1e-9,
    );

    check(
        &mut out,
        "probability sum rule and range",
        || {
            let bcs = [BoundaryCondition::dd(0.4), BoundaryCondition::dn(), su2(0.3, -0.5)];
            let grid: Vec<f64> = (1..16).map(|i| 2.0 * PI * i as f64 / 16.0).collect();
            let mut worst: f64 = 0.0;
            for bc in &bcs {
                for &p in &[0.5, PI] {
                    for (_, t) in probabilities::probability_curve(bc, p, &grid)? {
                        worst = worst.max((t.sum() - 1.0).abs());
                        for v in [t.alpha, t.beta, t.gamma] {
                            if !(0.0..=1.0).contains(&v) {
                                worst = worst.max(1.0);
                            }
                        }
                    }
                }
            }
            Ok((worst, 1.0))
        },
        1e-12,
    );

    check(
        &mut out,
        "Dirichlet bridge anchor",
        || {
            let t = probabilities::dd_probabilities(PI, PI, 0.0)?;
            let err = (t.alpha - 0.206012858554144)
                .abs()
                .max((t.gamma - 0.587974282891712).abs())
                .max((t.alpha - t.beta).abs());
            Ok((err, 1.0))
        },
        1e-12,
    );

    check(
        &mut out,
        "Dirichlet-Neumann exact constants",
        || {
            let t = probabilities::dn_probabilities(PI, PI)?;
            let gamma_ref = std::f64::consts::SQRT_2 - 1.0 + perturbation;
            let err = (t.gamma - gamma_ref)
                .abs()
                .max((t.beta - (1.0 - gamma_ref) / 2.0).abs());
            Ok((err, 1.0))
        },
        1e-10,
    );

    check(
        &mut out,
        "SU(2) reduction to Dirichlet-Neumann",
        || {
            let mut worst: f64 = 0.0;
            for &(x, p) in &[(1.0, 0.5), (PI, PI), (4.4, 2.0)] {
                let a = probabilities::su2_probabilities(x, p, Complex64::new(0.0, 0.0), Branch::Lower)?;
                let b = probabilities::dn_probabilities(x, p)?;
                worst = worst
                    .max((a.beta - b.beta).abs())
                    .max((a.gamma - b.gamma).abs());
            }
            Ok((worst, 1.0))
        },
        1e-10,
    );

    check(
        &mut out,
        "SU(2) branch invariance",
        || {
            let a = Complex64::new(0.4, -0.6);
            let mut worst: f64 = 0.0;
            for &(x, p) in &[(1.3, 0.7), (PI, PI)] {
                let lo = probabilities::su2_probabilities(x, p, a, Branch::Lower)?;
                let hi = probabilities::su2_probabilities(x, p, a, Branch::Upper)?;
                worst = worst
                    .max((lo.alpha - hi.alpha).abs())
                    .max((lo.beta - hi.beta).abs())
                    .max((lo.gamma - hi.gamma).abs());
            }
            Ok((worst, 1.0))
        },
        1e-12,
    );

    check(
        &mut out,
        "b-phase invariance",
        || {
            let a = Complex64::new(0.3, 0.4);
            let b = Complex64::new(0.5, (1.0 - a.norm_sqr() - 0.25).sqrt());
            let rot = Complex64::new(0.36f64.cos(), 0.36f64.sin());
            let bc1 = BoundaryCondition::su2(a, b)?;
            let bc2 = BoundaryCondition::su2(a, b * rot)?;
            let err = (correlators::f_factor(&bc1, 1.7, 0.9)?
                - correlators::f_factor(&bc2, 1.7, 0.9)?)
            .abs();
            Ok((err, 1.0))
        },
        0.0,
    );

    check(
        &mut out,
        "heat equation residual",
        || {
            let h = 1e-4;
            let bcs = [BoundaryCondition::dd(0.3), BoundaryCondition::dn(), su2(0.5, -0.3)];
            let mut worst: f64 = 0.0;
            for bc in &bcs {
                for &(x, p) in &[(1.5, 0.7), (PI, 1.5), (4.5, 3.0)] {
                    let f = |x: f64, p: f64| correlators::f_factor(bc, x, p).unwrap();
                    let d2x = (f(x + h, p) - 2.0 * f(x, p) + f(x - h, p)) / (h * h);
                    let dp = (f(x, p + h) - f(x, p - h)) / (2.0 * h);
                    worst = worst.max((dp - 2.0 * d2x).abs() / (dp.abs() + d2x.abs() + 1.0));
                }
            }
            Ok((worst, 1.0))
        },
        1e-6,
    );

    check(
        &mut out,
        "null vector PDE residual",
        || {
            let bcs = [BoundaryCondition::dd(0.0), BoundaryCondition::dn(), su2(0.3, 0.4)];
            let mut worst: f64 = 0.0;
            for bc in &bcs {
                for &(x, p) in &[(PI, PI), (2.0, 2.0)] {
                    worst = worst.max(correlators::null_vector_residual(bc, x, p)?);
                }
            }
            Ok((worst, 1.0))
        },
        1e-5,
    );

    check(
        &mut out,
        "simply-connected passage formula at kappa 4",
        || {
            let mut worst: f64 = 0.0;
            for &x in &[1.0, PI, 5.0] {
                worst = worst
                    .max((probabilities::schramm_beta(x, 4.0)? - (1.0 - x / (2.0 * PI))).abs());
            }
            Ok((worst, 1.0))
        },
        1e-12,
    );

    out
}

/// The production entry point: the unperturbed suite.
pub fn run_all() -> Vec<CheckResult> {
    run_suite(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let results = run_all();
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert!(results.len() >= 10);
    }

    #[test]
    fn suite_detects_mutation() {
        let results = run_suite(1e-3);
        assert!(results.iter().any(|r| !r.passed));
    }
}
