//! Path-level simulation of the conditioned coordinate `Y_t` and two
//! independent estimators of the exit statistics: Monte Carlo over
//! Euler-Maruyama paths (with an optional Brownian-bridge barrier-crossing
//! correction) and a backward dynamic-programming solve of the exit PDE.

use crate::correlators::{BoundaryCondition, DriftKernel};
use crate::probabilities::ProbabilityTriple;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Parameters of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub x0: f64,
    pub p: f64,
    /// base time step; the effective step is `min(dt0, 0.1 (p - t))`
    pub dt0: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub barrier_correction: bool,
    /// terminal cutoff: paths still inside at `p - t_cut` are classified Hit
    pub t_cut: f64,
}

impl SimConfig {
    pub fn new(x0: f64, p: f64, dt0: f64, n_paths: u64, seed: u64) -> Result<Self> {
        let cfg = Self {
            x0,
            p,
            dt0,
            n_paths,
            seed,
            barrier_correction: true,
            t_cut: dt0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn barrier_correction(mut self, on: bool) -> Self {
        self.barrier_correction = on;
        self
    }

    pub fn t_cut(mut self, t_cut: f64) -> Result<Self> {
        self.t_cut = t_cut;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 > 0.0 && self.x0 < 2.0 * PI) {
            return Err(Error::Domain(format!("x0 = {} outside (0, 2pi)", self.x0)));
        }
        crate::require_positive("p", self.p)?;
        crate::require_positive("dt0", self.dt0)?;
        if self.dt0 > self.p / 100.0 {
            return Err(Error::Domain(format!(
                "dt0 = {} exceeds p/100 = {}",
                self.dt0,
                self.p / 100.0
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Domain("n_paths must be positive".into()));
        }
        if self.t_cut < self.dt0 {
            return Err(Error::Domain(format!(
                "t_cut = {} below dt0 = {}",
                self.t_cut, self.dt0
            )));
        }
        Ok(())
    }
}

/// How one path left the strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Y reached 0
    Right,
    /// Y reached 2 pi
    Left,
    /// still inside at the terminal cutoff (tau = p)
    Hit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitOutcome {
    pub kind: ExitKind,
    pub tau: f64,
}

/// One Euler-Maruyama increment, shared by the Y-only simulator and the full
/// Loewner integrator so that same-seed paths agree exactly.
pub(crate) struct StepInfo {
    pub dt: f64,
    /// standard-normal draw of this step
    pub z: f64,
    /// drift value used
    pub drift: f64,
    pub y_new: f64,
    pub exit: Option<ExitOutcome>,
}

pub(crate) fn advance(
    rng: &mut ChaCha8Rng,
    kernel: &DriftKernel,
    cfg: &SimConfig,
    t: f64,
    y: f64,
) -> Result<StepInfo> {
    let q = cfg.p - t;
    if q <= cfg.t_cut {
        return Ok(StepInfo {
            dt: 0.0,
            z: 0.0,
            drift: 0.0,
            y_new: y,
            exit: Some(ExitOutcome {
                kind: ExitKind::Hit,
                tau: cfg.p,
            }),
        });
    }
    let dt = cfg.dt0.min(0.1 * q);
    let d = kernel.eval(y, q);
    if !d.is_finite() {
        return Err(Error::Numerical(format!(
            "drift overflow at y = {y}, modulus {q}"
        )));
    }
    let z: f64 = rng.sample(StandardNormal);
    let y_new = y - 2.0 * dt.sqrt() * z + d * dt;
    let tau = t + dt;
    let exit = if y_new <= 0.0 {
        Some(ExitOutcome {
            kind: ExitKind::Right,
            tau,
        })
    } else if y_new >= 2.0 * PI {
        Some(ExitOutcome {
            kind: ExitKind::Left,
            tau,
        })
    } else if cfg.barrier_correction {
        // Brownian-bridge probability that the step crossed a barrier even
        // though both endpoints are inside (variance 4 dt)
        let u: f64 = rng.gen();
        if u < (-y * y_new / (2.0 * dt)).exp() {
            Some(ExitOutcome {
                kind: ExitKind::Right,
                tau,
            })
        } else {
            let w = (2.0 * PI - y) * (2.0 * PI - y_new);
            let u2: f64 = rng.gen();
            if u2 < (-w / (2.0 * dt)).exp() {
                Some(ExitOutcome {
                    kind: ExitKind::Left,
                    tau,
                })
            } else {
                None
            }
        }
    } else {
        None
    };
    Ok(StepInfo {
        dt,
        z,
        drift: d,
        y_new,
        exit,
    })
}

pub(crate) fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Simulate one conditioned path until it exits the strip or reaches the
/// terminal cutoff. Deterministic given `(cfg.seed, path_index)`.
pub fn simulate_exit(
    bc: &BoundaryCondition,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<ExitOutcome> {
    cfg.validate()?;
    let kernel = DriftKernel::new(bc)?;
    simulate_exit_kernel(&kernel, cfg, path_index)
}

fn simulate_exit_kernel(
    kernel: &DriftKernel,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<ExitOutcome> {
    let mut rng = path_rng(cfg.seed, path_index);
    let mut t = 0.0;
    let mut y = cfg.x0;
    // generous iteration bound: adaptive steps only shrink near the cutoff
    let max_steps = (cfg.p / cfg.dt0) as u64 + (10.0 / cfg.t_cut.min(1.0)) as u64 + 1_000;
    for _ in 0..10 * max_steps {
        let step = advance(&mut rng, kernel, cfg, t, y)?;
        if let Some(outcome) = step.exit {
            return Ok(outcome);
        }
        t += step.dt;
        y = step.y_new;
    }
    Err(Error::Numerical(format!(
        "path {path_index} exceeded the step budget"
    )))
}

/// Monte Carlo estimate of `(alpha, beta, gamma)` with binomial standard
/// errors. Paths run in parallel; per-path counter-based substreams make the
/// result identical for any worker count.
pub fn mc_estimate(
    bc: &BoundaryCondition,
    cfg: &SimConfig,
) -> Result<(ProbabilityTriple, [f64; 3])> {
    cfg.validate()?;
    if cfg.n_paths < 100 {
        return Err(Error::Domain(format!(
            "n_paths = {} below the minimum of 100",
            cfg.n_paths
        )));
    }
    let kernel = DriftKernel::new(bc)?;
    let (right, left, hit, failed) = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| match simulate_exit_kernel(&kernel, cfg, i) {
            Ok(o) => match o.kind {
                ExitKind::Right => (1u64, 0u64, 0u64, 0u64),
                ExitKind::Left => (0, 1, 0, 0),
                ExitKind::Hit => (0, 0, 1, 0),
            },
            Err(_) => (0, 0, 0, 1),
        })
        .reduce(
            || (0, 0, 0, 0),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3),
        );
    if failed * 1000 > cfg.n_paths {
        return Err(Error::Numerical(format!(
            "{failed} of {} paths failed",
            cfg.n_paths
        )));
    }
    let n = (right + left + hit) as f64;
    let freq = |k: u64| k as f64 / n;
    let se = |f: f64| (f * (1.0 - f) / n).sqrt();
    let (a, b, g) = (freq(right), freq(left), freq(hit));
    Ok((ProbabilityTriple::new(a, b, g)?, [se(a), se(b), se(g)]))
}

/// Backward dynamic-programming solve of the exit problem on a uniform
/// space-time grid (explicit scheme). Independent of both the closed forms
/// and the Monte Carlo path simulator; used as an arbitration oracle.
///
/// The drift blows up like `1/(p - t)` toward the pinning time, so the
/// integration stops at a terminal cutoff `eps = 8 dx`, where interior mass is
/// classified as hitting; the induced error vanishes with the grid and is
/// covered by the grid-doubling convergence estimate.
pub fn dp_exit_oracle(
    bc: &BoundaryCondition,
    x: f64,
    p: f64,
    n_space: usize,
    n_time: usize,
) -> Result<ProbabilityTriple> {
    if !(x > 0.0 && x < 2.0 * PI) {
        return Err(Error::Domain(format!("x = {x} outside (0, 2pi)")));
    }
    crate::require_positive("p", p)?;
    if n_space < 200 || n_time < 200 {
        return Err(Error::Domain(
            "need n_space >= 200 and n_time >= 200".into(),
        ));
    }
    let dx = 2.0 * PI / n_space as f64;
    let dt = p / n_time as f64;
    if dt > dx * dx / 8.0 {
        return Err(Error::Stability(format!(
            "dt = {dt} violates dt <= dx^2/8 = {}",
            dx * dx / 8.0
        )));
    }
    let kernel = DriftKernel::new(bc)?;
    let eps = 8.0 * dx;
    if eps >= p {
        return Err(Error::Domain("grid too coarse for this p".into()));
    }
    let n_steps = ((p - eps) / dt).ceil() as usize;
    let h = (p - eps) / n_steps as f64;

    let m = n_space;
    let mut u_r = vec![0.0f64; m + 1];
    let mut u_l = vec![0.0f64; m + 1];
    u_r[0] = 1.0;
    u_l[m] = 1.0;
    let mut new_r = u_r.clone();
    let mut new_l = u_l.clone();

    // the drift row changes slowly in the modulus; refresh it when the
    // modulus has moved by 0.1%
    let mut mu = vec![0.0f64; m + 1];
    let mut q_row = -1.0f64;

    let mut t = p - eps;
    for _ in 0..n_steps {
        let q = p - t;
        if (q - q_row).abs() > 1e-3 * q_row {
            for (i, v) in mu.iter_mut().enumerate().take(m).skip(1) {
                *v = kernel.eval(i as f64 * dx, q);
            }
            q_row = q;
        }
        for i in 1..m {
            let lap_r = (u_r[i + 1] - 2.0 * u_r[i] + u_r[i - 1]) / (dx * dx);
            let adv_r = mu[i] * (u_r[i + 1] - u_r[i - 1]) / (2.0 * dx);
            new_r[i] = u_r[i] + h * (2.0 * lap_r + adv_r);
            let lap_l = (u_l[i + 1] - 2.0 * u_l[i] + u_l[i - 1]) / (dx * dx);
            let adv_l = mu[i] * (u_l[i + 1] - u_l[i - 1]) / (2.0 * dx);
            new_l[i] = u_l[i] + h * (2.0 * lap_l + adv_l);
        }
        std::mem::swap(&mut u_r, &mut new_r);
        std::mem::swap(&mut u_l, &mut new_l);
        t -= h;
    }

    let s = x / dx;
    let i = (s.floor() as usize).min(m - 1);
    let w = s - i as f64;
    let a = u_r[i] * (1.0 - w) + u_r[i + 1] * w;
    let b = u_l[i] * (1.0 - w) + u_l[i + 1] * w;
    ProbabilityTriple::new(a, b, 1.0 - a - b)
}
