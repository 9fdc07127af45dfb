//! Cylinder amplitudes, boundary two-point functions and the heat-kernel
//! factor `f(x,p)` whose logarithmic derivative drives the conditioned
//! diffusion.
//!
//! Three upper-boundary conditions are supported. The lower boundary always
//! carries the +/- jump pair at 0 and x. For the SU(2) family everything is
//! parametrized by the matrix entry `a` through an angle `alpha` and lattice
//! weights `omega_{+/-}`; the Dirichlet-Neumann case is the `alpha = pi/2`
//! specialization and the uncompactified Dirichlet case is a single Gaussian
//! target rather than a lattice.

use crate::special_fn::{dedekind_eta, theta1, theta4, theta4_dz, CROSSOVER};
use crate::{require_finite, require_positive, Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Upper-boundary condition of the cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    /// Uncompactified Dirichlet with field value `mu` on the upper boundary.
    DirichletUncompactified { mu: f64 },
    /// Free (Neumann) upper boundary.
    DirichletNeumann,
    /// SU(2)-matrix boundary state with first row `(a, b)`.
    Su2 { a: Complex64, b: Complex64 },
}

impl BoundaryCondition {
    pub fn dd(mu: f64) -> Self {
        Self::DirichletUncompactified { mu }
    }

    pub fn dn() -> Self {
        Self::DirichletNeumann
    }

    pub fn su2(a: Complex64, b: Complex64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSu2(format!(
                "|a|^2 + |b|^2 = {norm}, expected 1"
            )));
        }
        Ok(Self::Su2 { a, b })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::DirichletUncompactified { mu } => require_finite("mu", mu),
            Self::DirichletNeumann => Ok(()),
            Self::Su2 { a, b } => {
                let norm = a.norm_sqr() + b.norm_sqr();
                if (norm - 1.0).abs() > 1e-12 {
                    Err(Error::InvalidSu2(format!(
                        "|a|^2 + |b|^2 = {norm}, expected 1"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Bridge target of the uncompactified Dirichlet condition.
    pub fn dd_target(mu: f64) -> f64 {
        PI + std::f64::consts::SQRT_2 * mu
    }
}

/// Angle/weight parametrization of an SU(2) boundary state.
///
/// `alpha = arccos(-Im a)` and the conditioned walk lands on the lattices
/// `+2 alpha + 4 pi n` (weight `omega_plus`) and `-2 alpha + 4 pi n` (weight
/// `omega_minus`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2Params {
    pub alpha: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
}

impl Su2Params {
    /// The equivalent description with `alpha' = 2 pi - alpha` and swapped
    /// weights; both describe the same matrix.
    pub fn other_branch(&self) -> Self {
        Self {
            alpha: 2.0 * PI - self.alpha,
            omega_plus: self.omega_minus,
            omega_minus: self.omega_plus,
        }
    }
}

/// Extract `(alpha, omega_{+/-})` from the matrix entry `a`.
///
/// When `sin alpha = 0` (forces `a = -/+ i`) the two lattices coincide and the
/// split is immaterial; we set `omega_{+/-} = 1/2`.
pub fn su2_params(a: Complex64) -> Result<Su2Params> {
    if a.norm() > 1.0 + 1e-12 {
        return Err(Error::InvalidSu2(format!("|a| = {} > 1", a.norm())));
    }
    let alpha = (-a.im).clamp(-1.0, 1.0).acos();
    let sin_alpha = (1.0 - a.im * a.im).max(0.0).sqrt();
    let omega_plus = if sin_alpha < 1e-12 {
        0.5
    } else {
        ((sin_alpha + a.re) / (2.0 * sin_alpha)).clamp(0.0, 1.0)
    };
    Ok(Su2Params {
        alpha,
        omega_plus,
        omega_minus: 1.0 - omega_plus,
    })
}

/// Cylinder amplitude for the uncompactified Dirichlet condition:
/// `eta^{-1} sqrt(pi/p) exp(-(pi + sqrt(2) mu)^2 / 8p)`.
pub fn dd_amplitude(mu: f64, p: f64) -> Result<f64> {
    require_finite("mu", mu)?;
    require_positive("p", p)?;
    let y = BoundaryCondition::dd_target(mu);
    Ok((PI / p).sqrt() * (-y * y / (8.0 * p)).exp() / dedekind_eta(p)?)
}

/// Cylinder amplitude for the Dirichlet-Neumann condition:
/// `theta4(0 | 2ip/pi) / (sqrt(2) eta)`.
pub fn dn_amplitude(p: f64) -> Result<f64> {
    Ok(theta4(0.0, p)? / (std::f64::consts::SQRT_2 * dedekind_eta(p)?))
}

/// Cylinder amplitude for an SU(2) boundary state with angle `alpha`:
/// `(sqrt(2) eta)^{-1} sum_{n in Z} exp(-n^2 p / 2) cos(n alpha)`.
pub fn su2_amplitude(alpha: f64, p: f64) -> Result<f64> {
    require_finite("alpha", alpha)?;
    require_positive("p", p)?;
    let mut s = 1.0;
    for n in 1..10_000u64 {
        let amp = 2.0 * (-((n * n) as f64) * p / 2.0).exp();
        s += amp * (n as f64 * alpha).cos();
        if amp < 1e-16 * s.abs().max(1.0) {
            break;
        }
    }
    Ok(s / (std::f64::consts::SQRT_2 * dedekind_eta(p)?))
}

/// Amplitude-weighted one-point function of the U(1) current across the
/// cylinder: `Re a / (2 sqrt(2) eta sin alpha) * sum_n n exp(-n^2 p/2) sin(n alpha)`.
/// Vanishes for `Re a = 0`; the degenerate `sin alpha = 0` case is the pure
/// Dirichlet limit where it also vanishes.
pub fn j3_one_point(a: Complex64, p: f64) -> Result<f64> {
    require_positive("p", p)?;
    let params = su2_params(a)?;
    let sin_alpha = params.alpha.sin();
    if a.re == 0.0 || sin_alpha.abs() < 1e-12 {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for n in 1..10_000u64 {
        let amp = n as f64 * (-((n * n) as f64) * p / 2.0).exp();
        s += amp * (n as f64 * params.alpha).sin();
        if amp < 1e-18 {
            break;
        }
    }
    // sum over Z doubles the n >= 1 part
    Ok(a.re * s / (std::f64::consts::SQRT_2 * dedekind_eta(p)? * sin_alpha))
}

/// Lattice centers and log-weights of the Gaussian-image form of the SU(2)
/// factor `f`. Shared by the drift and by the passage-probability kernels.
pub(crate) fn su2_lattice(params: &Su2Params, x: f64, p: f64) -> Vec<(i64, f64, f64)> {
    // enough images that the discarded tail is < 1e-16 relative to the peak
    let reach = (8.0 * p * 80.0).sqrt() + x.abs() + 2.0 * params.alpha.abs();
    let n_max = ((reach / (4.0 * PI)).ceil() as i64).max(8);
    let mut out = Vec::with_capacity((4 * n_max + 2) as usize);
    for n in -n_max..=n_max {
        let shift = 4.0 * PI * n as f64;
        if params.omega_plus > 0.0 {
            out.push((
                n,
                2.0 * params.alpha + shift,
                params.omega_plus.ln(),
            ));
        }
        if params.omega_minus > 0.0 {
            out.push((
                n,
                -2.0 * params.alpha + shift,
                params.omega_minus.ln(),
            ));
        }
    }
    out
}

fn su2_f_image(params: &Su2Params, x: f64, p: f64) -> f64 {
    let mut s = 0.0;
    for (_, c, lw) in su2_lattice(params, x, p) {
        s += (lw - (x - c) * (x - c) / (8.0 * p)).exp();
    }
    (PI / p).sqrt() * s
}

fn su2_f_fourier(a_re: f64, params: &Su2Params, x: f64, p: f64) -> f64 {
    let sin_alpha = params.alpha.sin();
    let mut s = std::f64::consts::FRAC_1_SQRT_2;
    for n in 1..10_000u64 {
        let e = (-((n * n) as f64) * p / 2.0).exp();
        let nf = n as f64;
        let c = if sin_alpha.abs() < 1e-12 {
            0.0
        } else {
            a_re * (nf * params.alpha).sin() / sin_alpha
        };
        s += std::f64::consts::SQRT_2
            * e
            * ((nf * params.alpha).cos() * (nf * x / 2.0).cos() + c * (nf * x / 2.0).sin());
        if e * (1.0 + c.abs()) * std::f64::consts::SQRT_2 < 1e-16 {
            break;
        }
    }
    s
}

fn su2_f_fourier_dx(a_re: f64, params: &Su2Params, x: f64, p: f64) -> f64 {
    let sin_alpha = params.alpha.sin();
    let mut s = 0.0;
    for n in 1..10_000u64 {
        let e = (-((n * n) as f64) * p / 2.0).exp();
        let nf = n as f64;
        let c = if sin_alpha.abs() < 1e-12 {
            0.0
        } else {
            a_re * (nf * params.alpha).sin() / sin_alpha
        };
        s += std::f64::consts::SQRT_2
            * e
            * (nf / 2.0)
            * (-(nf * params.alpha).cos() * (nf * x / 2.0).sin() + c * (nf * x / 2.0).cos());
        if e * nf * (1.0 + c.abs()) < 1e-16 {
            break;
        }
    }
    s
}

enum FParams {
    Dd { y: f64 },
    Su2 { a_re: f64, params: Su2Params },
}

fn f_params(bc: &BoundaryCondition) -> Result<FParams> {
    bc.validate()?;
    Ok(match *bc {
        BoundaryCondition::DirichletUncompactified { mu } => FParams::Dd {
            y: BoundaryCondition::dd_target(mu),
        },
        BoundaryCondition::DirichletNeumann => FParams::Su2 {
            a_re: 0.0,
            params: Su2Params {
                alpha: PI / 2.0,
                omega_plus: 0.5,
                omega_minus: 0.5,
            },
        },
        BoundaryCondition::Su2 { a, .. } => FParams::Su2 {
            a_re: a.re,
            params: su2_params(a)?,
        },
    })
}

/// Heat-kernel factor `f(x,p)` of the boundary two-point function.
pub fn f_factor(bc: &BoundaryCondition, x: f64, p: f64) -> Result<f64> {
    require_finite("x", x)?;
    require_positive("p", p)?;
    Ok(match f_params(bc)? {
        FParams::Dd { y } => (PI / p).sqrt() * (-(x - y) * (x - y) / (8.0 * p)).exp(),
        FParams::Su2 { a_re, params } => {
            if p >= CROSSOVER {
                su2_f_fourier(a_re, &params, x, p)
            } else {
                su2_f_image(&params, x, p)
            }
        }
    })
}

/// Term-wise analytic x-derivative of [`f_factor`].
pub fn f_dx(bc: &BoundaryCondition, x: f64, p: f64) -> Result<f64> {
    require_finite("x", x)?;
    require_positive("p", p)?;
    Ok(match f_params(bc)? {
        FParams::Dd { y } => {
            (PI / p).sqrt() * (-(x - y) * (x - y) / (8.0 * p)).exp() * (y - x) / (4.0 * p)
        }
        FParams::Su2 { a_re, params } => {
            if p >= CROSSOVER {
                su2_f_fourier_dx(a_re, &params, x, p)
            } else {
                let mut s = 0.0;
                for (_, c, lw) in su2_lattice(&params, x, p) {
                    s += (lw - (x - c) * (x - c) / (8.0 * p)).exp() * (c - x) / (4.0 * p);
                }
                (PI / p).sqrt() * s
            }
        }
    })
}

/// Stable evaluation of `4 f'(x,p)/f(x,p)`, the drift of the conditioned
/// coordinate. In the lattice picture this is `(<c> - x)/p` with `<c>` the
/// Gaussian-weighted mean of the landing points, computed with a shifted
/// exponent so it stays finite as `p -> 0` where `f` itself underflows.
pub fn drift(bc: &BoundaryCondition, x: f64, p: f64) -> Result<f64> {
    require_finite("x", x)?;
    require_positive("p", p)?;
    match f_params(bc)? {
        FParams::Dd { y } => Ok((y - x) / p),
        FParams::Su2 { a_re, params } => {
            if a_re == 0.0 && (params.alpha - PI / 2.0).abs() < 1e-15 && p >= CROSSOVER {
                // Dirichlet-Neumann specialization
                let z = x / (2.0 * PI);
                return Ok(2.0 / PI * theta4_dz(z, p)? / theta4(z, p)?);
            }
            let lattice = su2_lattice(&params, x, p);
            let mut m = f64::NEG_INFINITY;
            for &(_, c, lw) in &lattice {
                m = m.max(lw - (x - c) * (x - c) / (8.0 * p));
            }
            if !m.is_finite() {
                return Err(Error::Numerical(format!(
                    "drift underflow at x={x}, p={p}"
                )));
            }
            let (mut num, mut den) = (0.0, 0.0);
            for (_, c, lw) in lattice {
                let w = (lw - (x - c) * (x - c) / (8.0 * p) - m).exp();
                num += w * (c - x);
                den += w;
            }
            Ok(num / den / p)
        }
    }
}

/// Allocation-free drift evaluator for the simulation hot loops. Centers of
/// the Gaussian mixture are scanned outward from the nearest lattice point
/// with a shifted exponent, so the evaluation stays exact (to 1e-16 relative)
/// and finite for arbitrarily small modulus.
#[derive(Debug, Clone, Copy)]
pub(crate) enum DriftKernel {
    Dd { y: f64 },
    Lattice { alpha: f64, lwp: f64, lwm: f64 },
}

impl DriftKernel {
    pub(crate) fn new(bc: &BoundaryCondition) -> Result<Self> {
        Ok(match f_params(bc)? {
            FParams::Dd { y } => Self::Dd { y },
            FParams::Su2 { params, .. } => Self::Lattice {
                alpha: params.alpha,
                lwp: if params.omega_plus > 0.0 {
                    params.omega_plus.ln()
                } else {
                    f64::NEG_INFINITY
                },
                lwm: if params.omega_minus > 0.0 {
                    params.omega_minus.ln()
                } else {
                    f64::NEG_INFINITY
                },
            },
        })
    }

    /// Drift `4 f'/f` at position `x` and modulus `q`.
    pub(crate) fn eval(&self, x: f64, q: f64) -> f64 {
        match *self {
            Self::Dd { y } => (y - x) / q,
            Self::Lattice { alpha, lwp, lwm } => {
                let inv8q = 1.0 / (8.0 * q);
                let families = [(2.0 * alpha, lwp), (-2.0 * alpha, lwm)];
                // peak exponent over both families
                let mut m = f64::NEG_INFINITY;
                for &(base, lw) in &families {
                    if lw.is_finite() {
                        let d = x - base - 4.0 * PI * ((x - base) / (4.0 * PI)).round();
                        m = m.max(lw - d * d * inv8q);
                    }
                }
                let (mut num, mut den) = (0.0, 0.0);
                for &(base, lw) in &families {
                    if !lw.is_finite() {
                        continue;
                    }
                    let n0 = ((x - base) / (4.0 * PI)).round();
                    for dir in [1.0f64, -1.0] {
                        let mut k = if dir > 0.0 { 0.0 } else { -1.0 };
                        loop {
                            let c = base + 4.0 * PI * (n0 + k);
                            let e = lw - (x - c) * (x - c) * inv8q - m;
                            if e < -40.0 {
                                break;
                            }
                            let w = e.exp();
                            num += w * (c - x);
                            den += w;
                            k += dir;
                        }
                    }
                }
                num / den / q
            }
        }
    }
}

/// Amplitude-weighted boundary two-point function
/// `|eta / theta1(x/2pi | ip/pi)|^{1/2} f(x,p)` for `x` in `(0, 2pi)`.
pub fn two_point(bc: &BoundaryCondition, x: f64, p: f64) -> Result<f64> {
    if !(x > 0.0 && x < 2.0 * PI) {
        return Err(Error::Domain(format!("x = {x} outside (0, 2pi)")));
    }
    let t1 = theta1(x / (2.0 * PI), p)?;
    Ok((dedekind_eta(p)? / t1).abs().sqrt() * f_factor(bc, x, p)?)
}

/// Relative residual of the degenerate-level PDE
/// `(2 d^2/dx^2 + v d/dx + v'/4) G = dG/dp` on `G = two_point / sqrt(eta)`,
/// evaluated by central differences (h = 1e-4). Diagnostic only.
pub fn null_vector_residual(bc: &BoundaryCondition, x: f64, p: f64) -> Result<f64> {
    if !(x > 0.1 && x < 2.0 * PI - 0.1) {
        return Err(Error::Domain(format!("x = {x} too close to an endpoint")));
    }
    if !(0.5..=5.0).contains(&p) {
        return Err(Error::Domain(format!("p = {p} outside [0.5, 5]")));
    }
    let h = 1e-4;
    let g = |x: f64, p: f64| -> Result<f64> { Ok(two_point(bc, x, p)? / dedekind_eta(p)?.sqrt()) };
    let g0 = g(x, p)?;
    let gxp = g(x + h, p)?;
    let gxm = g(x - h, p)?;
    let gpp = g(x, p + h)?;
    let gpm = g(x, p - h)?;
    let d2x = (gxp - 2.0 * g0 + gxm) / (h * h);
    let dx = (gxp - gxm) / (2.0 * h);
    let dp = (gpp - gpm) / (2.0 * h);
    let v = crate::loewner::v_field(x, p)?;
    let vp = crate::loewner::v_field_dy(x, p)?;
    let lhs = 2.0 * d2x + v * dx + vp / 4.0 * g0;
    Ok((lhs - dp).abs() / (lhs.abs() + dp.abs() + 1.0))
}
