//! Chordal SLE(4) on the cylinder `T_p` (circumference `2*pi`, height `p`).
//!
//! The crate computes closed-form left/right-passage and boundary-hitting
//! probabilities for traces anchored on the lower boundary, with Dirichlet,
//! Neumann or SU(2) boundary conditions on the upper boundary, and
//! cross-verifies them against path-level simulation of the conditioned
//! relative coordinate, a dynamic-programming exit solver, and the cylinder
//! Loewner flow.
//!
//! Module layout:
//! - [`special_fn`]: Jacobi theta functions and Dedekind eta for purely
//!   imaginary modular parameter, with dual series/Gaussian-image
//!   representations.
//! - [`correlators`]: cylinder amplitudes, the heat-equation factor `f(x,p)`
//!   of the boundary two-point function, and the drift `4 f'/f`.
//! - [`probabilities`]: the closed-form probability triples.
//! - [`sde`]: Euler-Maruyama simulation of the conditioned bridge, Monte
//!   Carlo estimation, and an independent finite-difference exit oracle.
//! - [`loewner`]: the cylinder Loewner flow, trace reconstruction and
//!   martingale verification.
//! - [`check`]: the machine-readable self-check suite used by the CLI.

pub mod check;
pub mod correlators;
pub mod loewner;
pub mod probabilities;
pub mod sde;
pub mod special_fn;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// `a` does not define a valid SU(2) boundary condition.
    #[error("invalid SU(2) parameter: {0}")]
    InvalidSu2(String),
    /// A numeric failure at runtime (overflow, underflow of a denominator,
    /// a diverged path). Never silently misclassified.
    #[error("numeric failure: {0}")]
    Numerical(String),
    /// The explicit finite-difference scheme would be unstable on the
    /// requested grid.
    #[error("stability violation: {0}")]
    Stability(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

pub(crate) fn require_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Domain(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}
