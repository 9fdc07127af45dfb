//! Loewner flow on the finite cylinder: the vector field `v`, the joint SDE
//! for the driving process and the relative coordinate, trace reconstruction
//! by backward composition, and an empirical martingale check.

use crate::correlators::{BoundaryCondition, DriftKernel};
use crate::sde::{advance, path_rng, ExitOutcome, SimConfig};
use crate::special_fn::{theta1, theta1_d2z, theta1_dz, CROSSOVER};
use crate::{require_positive, Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::PI;

fn check_y(y: f64) -> Result<()> {
    if (y / (2.0 * PI) - (y / (2.0 * PI)).round()).abs() < 1e-12 {
        return Err(Error::Domain(format!("v is singular at y = {y}")));
    }
    Ok(())
}

/// The Loewner vector field
/// `v(y, p) = cot(y/2) + 4 sum_{n>=1} sin(n y)/(e^{2np} - 1)`,
/// equivalently `(1/pi) d/dz ln theta1(z | ip/pi)` at `z = y/2pi` (used for
/// small `p` where the sine series converges slowly).
pub fn v_field(y: f64, p: f64) -> Result<f64> {
    check_y(y)?;
    require_positive("p", p)?;
    if p >= CROSSOVER {
        let mut s = (y / 2.0).cos() / (y / 2.0).sin();
        for n in 1..100_000u64 {
            let w = 4.0 / ((2.0 * n as f64 * p).exp() - 1.0);
            s += w * (n as f64 * y).sin();
            if w < 1e-16 {
                break;
            }
        }
        Ok(s)
    } else {
        let z = y / (2.0 * PI);
        Ok(theta1_dz(z, p)? / (PI * theta1(z, p)?))
    }
}

/// y-derivative of [`v_field`], term-wise analytic.
pub fn v_field_dy(y: f64, p: f64) -> Result<f64> {
    check_y(y)?;
    require_positive("p", p)?;
    if p >= CROSSOVER {
        let sin_half = (y / 2.0).sin();
        let mut s = -0.5 / (sin_half * sin_half);
        for n in 1..100_000u64 {
            let w = 4.0 * n as f64 / ((2.0 * n as f64 * p).exp() - 1.0);
            s += w * (n as f64 * y).cos();
            if w < 1e-16 {
                break;
            }
        }
        Ok(s)
    } else {
        let z = y / (2.0 * PI);
        let t = theta1(z, p)?;
        let t1 = theta1_dz(z, p)?;
        let t2 = theta1_d2z(z, p)?;
        Ok((t2 / t - (t1 / t) * (t1 / t)) / (2.0 * PI * PI))
    }
}

/// Log-derivative form of `v` at any `p`, for the dual-representation checks.
#[doc(hidden)]
pub fn v_field_theta(y: f64, p: f64) -> Result<f64> {
    check_y(y)?;
    let z = y / (2.0 * PI);
    Ok(theta1_dz(z, p)? / (PI * theta1(z, p)?))
}

/// `v` for complex argument, needed by the backward trace integration. The
/// sine series is used when it converges comfortably (`|Im y|` well inside
/// `2p`); otherwise the theta log-derivative is evaluated through the
/// Gaussian-image sums, which converge for any modulus.
fn v_complex(y: Complex64, p: f64) -> Result<Complex64> {
    let half = y / 2.0;
    if half.sin().norm() < 1e-12 {
        return Err(Error::Domain(format!("v is singular at y = {y}")));
    }
    if p >= CROSSOVER && y.im.abs() < 1.5 * p {
        let mut s = half.cos() / half.sin();
        for n in 1..100_000u64 {
            let nf = n as f64;
            let w = 4.0 / ((2.0 * nf * p).exp() - 1.0);
            s += w * (y * nf).sin();
            let bound = 2.0 * w * (nf * y.im.abs()).exp();
            if bound < 1e-16 * s.norm().max(1.0) {
                break;
            }
        }
        Ok(s)
    } else {
        let z = y / (2.0 * PI);
        let a = PI * PI / p;
        let mut th = Complex64::new(0.0, 0.0);
        let mut dth = Complex64::new(0.0, 0.0);
        let lim = ((40.0 * p).sqrt() / PI + z.re.abs() + z.im.abs()).ceil() as i64 + 2;
        for n in 0..=lim.max(8) {
            let c = n as f64 + 0.5;
            let em = (-a * (z - c) * (z - c)).exp();
            let ep = (-a * (z + c) * (z + c)).exp();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            th += sign * (em - ep);
            dth += sign * (-2.0 * a) * ((z - c) * em - (z + c) * ep);
        }
        // common sqrt(pi/p) prefactor cancels in the quotient
        Ok(dth / th / PI)
    }
}

/// Deterministic flow of one boundary point under a frozen driving value
/// `w0`: integrates `dg = v(g - w0, p - u) du` from 0 to `t` by RK4.
pub fn flow_point(g0: f64, w0: f64, p: f64, t: f64, dt: f64) -> Result<f64> {
    require_positive("p", p)?;
    if t >= p {
        return Err(Error::Domain(format!("t = {t} beyond the modulus {p}")));
    }
    let mut g = g0;
    let mut u = 0.0;
    while u < t {
        let h = dt.min(t - u);
        let f = |u: f64, g: f64| v_field(g - w0, p - u);
        let k1 = f(u, g)?;
        let k2 = f(u + h / 2.0, g + h / 2.0 * k1)?;
        let k3 = f(u + h / 2.0, g + h / 2.0 * k2)?;
        let k4 = f(u + h, g + h * k3)?;
        g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        u += h;
    }
    Ok(g)
}

/// State of the joint flow at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LoewnerState {
    pub t: f64,
    /// driving value
    pub w: f64,
    /// relative coordinate X - W of the far endpoint image
    pub y: f64,
    /// boundary points carried along by the flow; NaN once absorbed
    pub tracked: Vec<f64>,
    /// modulus of the original cylinder (current modulus is p - t)
    pub p: f64,
}

/// Integrate the joint SDE for `(W_t, Y_t)` of the deformed (conditioned)
/// SLE(4): `dW = 2 dB + (v - 4f'/f) dt`, `dY = -dW + v dt`. Both increments
/// are assembled from the same noise, so the drift of `Y` cancels to
/// `4 f'/f` exactly and the `Y` marginal coincides step by step with
/// `sde::simulate_exit` at the same `(seed, path_index)`.
pub fn evolve(
    bc: &BoundaryCondition,
    x_target: f64,
    cfg: &SimConfig,
    path_index: u64,
    tracked: &[f64],
) -> Result<(Vec<LoewnerState>, ExitOutcome)> {
    cfg.validate()?;
    if !(x_target > 0.0 && x_target < 2.0 * PI) {
        return Err(Error::Domain(format!("x_target = {x_target} outside (0, 2pi)")));
    }
    let kernel = DriftKernel::new(bc)?;
    let mut rng = path_rng(cfg.seed, path_index);
    let mut t = 0.0;
    let mut w = 0.0;
    let mut y = x_target;
    let mut pts: Vec<f64> = tracked.to_vec();
    let mut states = vec![LoewnerState {
        t,
        w,
        y,
        tracked: pts.clone(),
        p: cfg.p,
    }];
    loop {
        let step = advance(&mut rng, &kernel, cfg, t, y)?;
        if let Some(outcome) = step.exit {
            if step.dt > 0.0 {
                let q = cfg.p - t;
                let v = v_field(y, q)?;
                let dw = 2.0 * step.dt.sqrt() * step.z + (v - step.drift) * step.dt;
                for g in pts.iter_mut() {
                    if g.is_finite() {
                        let rel = *g - w;
                        if (rel / (2.0 * PI) - (rel / (2.0 * PI)).round()).abs() < 1e-9 {
                            *g = f64::NAN; // absorbed into the hull
                        } else {
                            *g += v_field(rel, q)? * step.dt;
                        }
                    }
                }
                w += dw;
                y = step.y_new.clamp(0.0, 2.0 * PI);
                t += step.dt;
            }
            states.push(LoewnerState {
                t,
                w,
                y,
                tracked: pts.clone(),
                p: cfg.p,
            });
            return Ok((states, outcome));
        }
        let q = cfg.p - t;
        let v = v_field(y, q)?;
        let dw = 2.0 * step.dt.sqrt() * step.z + (v - step.drift) * step.dt;
        for g in pts.iter_mut() {
            if g.is_finite() {
                let rel = *g - w;
                if (rel / (2.0 * PI) - (rel / (2.0 * PI)).round()).abs() < 1e-9 {
                    *g = f64::NAN;
                } else {
                    *g += v_field(rel, q)? * step.dt;
                }
            }
        }
        w += dw;
        y = step.y_new;
        t += step.dt;
        states.push(LoewnerState {
            t,
            w,
            y,
            tracked: pts.clone(),
            p: cfg.p,
        });
    }
}

/// Driving process for trace reconstruction.
#[derive(Debug, Clone)]
pub enum Driver {
    Constant(f64),
    Sle(BoundaryCondition),
}

/// Recover trace points by backward composition: for each sample time `t`,
/// integrate `dz/ds = -v(z - W(t-s), p - (t-s))` from the analytic first step
/// `z = W(t) + 2 i sqrt(s0)` down to `s = t`; the endpoint is the tip.
pub fn trace(
    driver: &Driver,
    cfg: &SimConfig,
    sample_times: &[f64],
    path_index: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    Ok(trace_raw(driver, cfg, sample_times, path_index)?
        .into_iter()
        .map(|(t, re, im)| (t, re.rem_euclid(2.0 * PI), im))
        .collect())
}

/// As [`trace`] but with the real part left in the covering space (not
/// reduced mod 2 pi), which preserves the winding of the tip.
#[doc(hidden)]
pub fn trace_raw(
    driver: &Driver,
    cfg: &SimConfig,
    sample_times: &[f64],
    path_index: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    cfg.validate()?;
    // driving path as a piecewise-linear function of t
    let (ts, ws, t_end): (Vec<f64>, Vec<f64>, f64) = match driver {
        Driver::Constant(w0) => (vec![0.0, cfg.p], vec![*w0, *w0], cfg.p),
        Driver::Sle(bc) => {
            let (states, outcome) = evolve(bc, cfg.x0, cfg, path_index, &[])?;
            let ts: Vec<f64> = states.iter().map(|s| s.t).collect();
            let ws: Vec<f64> = states.iter().map(|s| s.w).collect();
            (ts, ws, outcome.tau)
        }
    };
    let w_at = |t: f64| -> f64 {
        match ts.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => ws[i],
            Err(i) => {
                if i == 0 {
                    ws[0]
                } else if i >= ts.len() {
                    *ws.last().unwrap()
                } else {
                    let f = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
                    ws[i - 1] * (1.0 - f) + ws[i] * f
                }
            }
        }
    };

    let mut out = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        if !(t > 0.0 && t < t_end) {
            return Err(Error::Domain(format!(
                "sample time {t} outside (0, {t_end})"
            )));
        }
        let s0 = cfg.dt0.min(t / 2.0);
        let mut z = Complex64::new(w_at(t), 2.0 * s0.sqrt());
        let mut s = s0;
        while s < t {
            let wd = w_at(t - s);
            let dist = (z - wd).norm();
            if dist < 1e-9 {
                return Err(Error::Numerical(format!(
                    "backward integration hit the singularity at sample t = {t}"
                )));
            }
            let h = cfg.dt0.min(0.05 * dist * dist).min(t - s);
            let f = |s: f64, z: Complex64| -> Result<Complex64> {
                Ok(-v_complex(z - w_at(t - s), cfg.p - t + s)?)
            };
            let k1 = f(s, z)?;
            let k2 = f(s + h / 2.0, z + k1 * (h / 2.0))?;
            let k3 = f(s + h / 2.0, z + k2 * (h / 2.0))?;
            let k4 = f(s + h, z + k3 * h)?;
            z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            s += h;
        }
        out.push((t, z.re, z.im));
    }
    Ok(out)
}

/// Margin at which martingale paths are stopped and their value frozen.
/// `M_t` is only a local martingale on the open strip: its mean over
/// freely running paths decays as mass concentrates near the seam.
/// Stopping at a fixed margin and carrying the stopped value forward
/// (optional stopping) restores a flat mean.
const MARTINGALE_STOP_MARGIN: f64 = 0.05;

/// Empirical check that
/// `M_t = |g'_t(x)|^{1/4} f(Y_t, p-t) / |theta1(Y_t/2pi | i(p-t)/pi)|^{1/2}`
/// is flat in mean under the undeformed driving `W = 2B`. Paths are
/// stopped when `Y` comes within a small margin of the seam and the
/// stopped value of `M` is carried forward. Returns
/// `(t, mean M_t, stderr)` per requested time.
pub fn martingale_check(
    bc: &BoundaryCondition,
    cfg: &SimConfig,
    t_grid: &[f64],
) -> Result<Vec<(f64, f64, f64)>> {
    cfg.validate()?;
    bc.validate()?;
    let mut grid: Vec<f64> = t_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if grid.is_empty() || grid[0] <= 0.0 || *grid.last().unwrap() > cfg.p / 2.0 {
        return Err(Error::Domain("t_grid must lie in (0, p/2]".into()));
    }
    let t_max = *grid.last().unwrap();
    let m_of = |y: f64, q: f64, lng: f64| -> Result<f64> {
        let f = crate::correlators::f_factor(bc, y, q)?;
        let th = theta1(y / (2.0 * PI), q)?.abs();
        Ok((lng / 4.0).exp() * f / th.sqrt())
    };

    let samples: Vec<(Vec<f64>, u64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut rng = path_rng(cfg.seed, i);
            let mut t = 0.0;
            let mut y = cfg.x0;
            let mut lng = 0.0;
            let mut vals = Vec::with_capacity(grid.len());
            let mut next = 0;
            let mut frozen: Option<f64> = None;
            let eps = MARTINGALE_STOP_MARGIN;
            while next < grid.len() {
                if let Some(m) = frozen {
                    vals.push(m);
                    next += 1;
                    continue;
                }
                let q = cfg.p - t;
                let margin = y.min(2.0 * PI - y);
                let dt = cfg
                    .dt0
                    .min(0.1 * q)
                    .min(0.02 * margin * margin)
                    .min(grid[next] - t + 1e-12)
                    .max(1e-9);
                let v = v_field(y, q)?;
                let vd = v_field_dy(y, q)?;
                let z: f64 = rng.sample(StandardNormal);
                lng += vd * dt;
                y = y - 2.0 * dt.sqrt() * z + v * dt;
                t += dt;
                if y < eps || y > 2.0 * PI - eps {
                    y = y.clamp(eps, 2.0 * PI - eps);
                    frozen = Some(m_of(y, cfg.p - t, lng)?);
                }
                if t >= grid[next] - 1e-12 {
                    vals.push(match frozen {
                        Some(m) => m,
                        None => m_of(y, cfg.p - t, lng)?,
                    });
                    next += 1;
                }
                if t > t_max + 1.0 {
                    return Err(Error::Numerical("martingale path stalled".into()));
                }
            }
            Ok(vals)
        })
        .map(|r| match r {
            Ok(v) => (v, 0u64),
            Err(_) => (vec![0.0; grid.len()], 1),
        })
        .collect();

    let failed: u64 = samples.iter().map(|(_, f)| f).sum();
    if failed * 1000 > cfg.n_paths {
        return Err(Error::Numerical(format!("{failed} martingale paths failed")));
    }
    let n = (cfg.n_paths - failed) as f64;
    let mut out = Vec::with_capacity(grid.len());
    for (j, &t) in grid.iter().enumerate() {
        let (mut s, mut s2) = (0.0, 0.0);
        for (vals, f) in &samples {
            if *f == 0 {
                s += vals[j];
                s2 += vals[j] * vals[j];
            }
        }
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0);
        out.push((t, mean, (var / n).sqrt()));
    }
    Ok(out)
}

/// `M_0`, the initial value of the martingale above (`g'_0 = 1`).
pub fn martingale_initial(bc: &BoundaryCondition, x: f64, p: f64) -> Result<f64> {
    let f = crate::correlators::f_factor(bc, x, p)?;
    Ok(f / theta1(x / (2.0 * PI), p)?.abs().sqrt())
}
