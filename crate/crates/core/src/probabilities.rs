//! Closed-form passage and hitting probabilities.
//!
//! `schramm_beta` is the simply-connected left-passage formula (general
//! kappa). The cylinder formulas come in three families: the uncompactified
//! Dirichlet case is a single Gaussian bridge target handled by the method of
//! images, while Dirichlet-Neumann and SU(2) conditions condition the walk
//! onto a lattice of landing points; the SU(2) image-sum kernel is the master
//! implementation and Dirichlet-Neumann is its `alpha = pi/2` special case
//! (cross-checked against the theta-quotient form).

use crate::correlators::{su2_params, BoundaryCondition, Su2Params};
use crate::special_fn::{theta1, theta4, theta4_dz};
use crate::{require_positive, Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Right-passage, left-passage and upper-boundary hitting probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityTriple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ProbabilityTriple {
    /// Clamp tiny negative round-off to zero; anything further out of range
    /// is a genuine numeric failure.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let clamp = |v: f64, name: &str| -> Result<f64> {
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::Numerical(format!("{name} = {v} outside [0,1]")));
            }
            Ok(v.clamp(0.0, 1.0))
        };
        Ok(Self {
            alpha: clamp(alpha, "alpha")?,
            beta: clamp(beta, "beta")?,
            gamma: clamp(gamma, "gamma")?,
        })
    }

    pub fn sum(&self) -> f64 {
        self.alpha + self.beta + self.gamma
    }
}

/// Which parametrization branch an SU(2) matrix was specified in. Both
/// describe the same boundary state and must yield identical triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// alpha in [0, pi]
    Lower,
    /// alpha in [pi, 2 pi]
    Upper,
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0 && x < 2.0 * PI) {
        return Err(Error::Domain(format!("x = {x} outside (0, 2pi)")));
    }
    Ok(())
}

/// Gauss series of 2F1(a, b; c; u) for 0 <= u < 1.
fn hyp2f1_series(a: f64, b: f64, c: f64, u: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..200_000u64 {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * u;
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Numerical(format!(
        "2F1({a},{b};{c};{u}) did not converge"
    )))
}

/// Simply-connected left-passage probability:
/// `1/2 + Gamma(4/k)/(sqrt(pi) Gamma((8-k)/2k)) cot(x/2) 2F1(1/2, 4/k; 3/2; -cot(x/2)^2)`.
///
/// Evaluated by the direct Gauss series when the argument is small and
/// through the Pfaff transformation `u = t^2/(1+t^2)` otherwise. Note that at
/// kappa = 4 this evaluates to `1 - x/2pi`: the formula is kept exactly as
/// stated in its original (disc-picture) orientation, which is reflected
/// relative to the cylinder convention used elsewhere in this crate.
pub fn schramm_beta(x: f64, kappa: f64) -> Result<f64> {
    check_x(x)?;
    if !(kappa > 0.0 && kappa < 8.0) {
        return Err(Error::Domain(format!("kappa = {kappa} outside (0, 8)")));
    }
    let t = (x / 2.0).cos() / (x / 2.0).sin(); // cot(x/2)
    let b = 4.0 / kappa;
    let pref = statrs::function::gamma::gamma(b)
        / (PI.sqrt() * statrs::function::gamma::gamma((8.0 - kappa) / (2.0 * kappa)));
    let z = -t * t;
    let hyp = if z.abs() < 0.5 {
        hyp2f1_series(0.5, b, 1.5, z)?
    } else {
        // Pfaff: (1-z)^{-1/2} 2F1(1/2, 3/2 - b; 3/2; z/(z-1))
        let u = t * t / (1.0 + t * t);
        (1.0 - z).powf(-0.5) * hyp2f1_series(0.5, 1.5 - b, 1.5, u)?
    };
    Ok(0.5 + pref * t * hyp)
}

/// Image-sum range wide enough that the discarded Gaussian tail is < 1e-16.
fn image_range(x: f64, c: f64, p: f64) -> i64 {
    (((320.0 * p).sqrt() + x.abs() + c.abs()) / (4.0 * PI)).ceil() as i64 + 1
}

/// Passage probabilities for the uncompactified Dirichlet condition with
/// bridge target `y = pi + sqrt(2) mu`, by the method of images. The hitting
/// probability vanishes identically unless the target lies strictly inside
/// `(0, 2pi)`.
pub fn dd_probabilities(x: f64, p: f64, mu: f64) -> Result<ProbabilityTriple> {
    check_x(x)?;
    require_positive("p", p)?;
    let y = BoundaryCondition::dd_target(mu);
    // each image term carries the bridge normalization, so combine the
    // exponents: E * G(u) = exp(((x-y)^2 - u^2) / 8p)
    let e = |u: f64| (((x - y) * (x - y) - u * u) / (8.0 * p)).exp();
    let n_max = image_range(x, y, p).max(8);

    if y <= 0.0 {
        let mut beta = 0.0;
        for n in 1..=n_max {
            let s = 4.0 * PI * n as f64;
            beta += e(x + y - s) - e(x - y + s);
        }
        return ProbabilityTriple::new(1.0 - beta, beta, 0.0);
    }
    if y >= 2.0 * PI {
        let mut beta = 0.0;
        for n in 0..=n_max {
            let s = 4.0 * PI * n as f64;
            beta += e(x - y - s) - e(x + y + s);
        }
        return ProbabilityTriple::new(1.0 - beta, beta, 0.0);
    }
    let mut alpha_def = 0.0;
    for n in 0..=n_max {
        let s = 4.0 * PI * n as f64;
        alpha_def += e(x - y - s) - e(x + y + s);
    }
    let mut beta = 0.0;
    for n in 1..=n_max {
        let s = 4.0 * PI * n as f64;
        beta += e(x + y - s) - e(x - y + s);
    }
    let mut gamma = 0.0;
    for n in -n_max..=n_max {
        let s = 4.0 * PI * n as f64;
        gamma += e(x - y - s) - e(x + y + s);
    }
    ProbabilityTriple::new(1.0 - alpha_def, beta, gamma)
}

/// Lattice-conditioned exit probabilities shared by the Dirichlet-Neumann and
/// SU(2) families. `params.alpha` may lie anywhere in `(0, 2pi)`; the one
/// landing point inside the strip determines the hitting numerator.
fn lattice_probabilities(x: f64, p: f64, params: &Su2Params) -> Result<ProbabilityTriple> {
    let g = |u: f64| (-u * u / (8.0 * p)).exp();
    let a2 = 2.0 * params.alpha;
    let n_max = image_range(x, a2, p).max(8);

    let mut den = 0.0;
    for n in -n_max..=n_max {
        let s = 4.0 * PI * n as f64;
        den += params.omega_plus * g(x - a2 - s) + params.omega_minus * g(x + a2 - s);
    }
    if den <= 0.0 {
        return Err(Error::Numerical(format!(
            "lattice denominator underflow at x={x}, p={p}"
        )));
    }

    // hitting: the lattice point inside (0, 2pi) is 2 alpha (weight omega_+)
    // for alpha in (0, pi) and 4 pi - 2 alpha (weight omega_-) above; at the
    // degenerate alpha in {0, pi} the image sum telescopes to zero.
    let (c0, w0) = if params.alpha <= PI {
        (a2, params.omega_plus)
    } else {
        (4.0 * PI - a2, params.omega_minus)
    };
    let mut gamma = 0.0;
    if w0 > 0.0 {
        for n in -n_max..=n_max {
            let s = 4.0 * PI * n as f64;
            gamma += g(x - c0 - s) - g(x + c0 - s);
        }
        gamma *= w0 / den;
    }

    // winding numerator, written for the canonical alpha in [0, pi]
    let ac = if params.alpha <= PI { params.alpha } else { 2.0 * PI - params.alpha };
    let mut beta = 0.0;
    for n in -n_max..=n_max {
        let s = 4.0 * PI * n as f64;
        beta += n as f64 * (g(x - 2.0 * ac - s) + g(x + 2.0 * ac - s));
    }
    beta /= den;

    ProbabilityTriple::new(1.0 - beta - gamma, beta, gamma)
}

/// Dirichlet-Neumann passage probabilities from the circle-bridge
/// martingales: `gamma = theta1(x/2pi | 2ip/pi) / theta4(x/2pi | 2ip/pi)` and
/// `beta = u2 - gamma/2` with `u2 = (2p theta4'/(pi theta4) + x)/2pi`.
pub fn dn_probabilities(x: f64, p: f64) -> Result<ProbabilityTriple> {
    check_x(x)?;
    require_positive("p", p)?;
    let z = x / (2.0 * PI);
    let t4 = theta4(z, p)?;
    let gamma = theta1(z, 2.0 * p)? / t4;
    let u2 = (2.0 * p * theta4_dz(z, p)? / (PI * t4) + x) / (2.0 * PI);
    let beta = u2 - gamma / 2.0;
    ProbabilityTriple::new(1.0 - beta - gamma, beta, gamma)
}

/// Gaussian-image form of the Dirichlet-Neumann probabilities, exposed for
/// the duality cross-checks.
#[doc(hidden)]
pub fn dn_probabilities_image(x: f64, p: f64) -> Result<ProbabilityTriple> {
    check_x(x)?;
    require_positive("p", p)?;
    lattice_probabilities(
        x,
        p,
        &Su2Params {
            alpha: PI / 2.0,
            omega_plus: 0.5,
            omega_minus: 0.5,
        },
    )
}

/// SU(2) passage probabilities. `branch` selects which parametrization of the
/// matrix the caller means; the result is branch-independent.
pub fn su2_probabilities(
    x: f64,
    p: f64,
    a: Complex64,
    branch: Branch,
) -> Result<ProbabilityTriple> {
    check_x(x)?;
    require_positive("p", p)?;
    if a == Complex64::new(0.0, 0.0) {
        // exact Neumann point: use the theta-quotient forms directly so the
        // reduction is exact rather than merely within series tolerance
        return dn_probabilities(x, p);
    }
    let params = su2_params(a)?;
    let params = match branch {
        Branch::Lower => params,
        Branch::Upper => params.other_branch(),
    };
    lattice_probabilities(x, p, &params)
}

/// Evaluate the closed-form triple for any boundary condition on a grid of
/// `x` values. Element failures carry the offending `x`.
pub fn probability_curve(
    bc: &BoundaryCondition,
    p: f64,
    grid: &[f64],
) -> Result<Vec<(f64, ProbabilityTriple)>> {
    bc.validate()?;
    grid.iter()
        .map(|&x| {
            let triple = match *bc {
                BoundaryCondition::DirichletUncompactified { mu } => dd_probabilities(x, p, mu),
                BoundaryCondition::DirichletNeumann => dn_probabilities(x, p),
                BoundaryCondition::Su2 { a, .. } => su2_probabilities(x, p, a, Branch::Lower),
            }
            .map_err(|e| Error::Numerical(format!("at x = {x}: {e}")))?;
            Ok((x, triple))
        })
        .collect()
}
