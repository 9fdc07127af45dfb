//! `cylsle`: evaluate passage/hitting probability curves, run Monte Carlo
//! verification, sample Loewner traces, and run the self-check suite.
//!
//! Exit codes: 0 success, 1 numeric failure, 2 usage error, 3 check-suite
//! failure.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use cylsle::correlators::BoundaryCondition;
use cylsle::loewner::{self, Driver};
use cylsle::probabilities::{self, Branch, ProbabilityTriple};
use cylsle::sde::{self, SimConfig};
use num_complex::Complex64;
use serde::Deserialize;

const LAMBDA: f64 = PI / std::f64::consts::SQRT_2;

#[derive(Parser)]
#[command(name = "cylsle", version, about = "Chordal SLE(4) on the cylinder")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form (alpha, beta, gamma) at a point or on an x-grid
    Prob(Flags),
    /// Monte Carlo estimate vs. the closed forms (JSON report)
    Mc(Flags),
    /// Sample points of a seeded trace (CSV/JSON `t,re,im`)
    Trace(Flags),
    /// Run the cross-verification suite
    Check(Flags),
}

/// Every flag is optional here; requiredness is enforced per command after
/// merging with an optional JSON run-spec file (`--spec`), whose keys mirror
/// the flag names (`mu_lambda` for `--mu-lambda`, etc.). Explicit flags
/// override file values.
#[derive(Args, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
struct Flags {
    /// JSON file with the same keys as the flags below
    #[arg(long)]
    #[serde(skip)]
    spec: Option<PathBuf>,
    /// Boundary condition: dd, dn or su2
    #[arg(long)]
    bc: Option<String>,
    /// Dirichlet jump mu (radians convention), bc = dd only
    #[arg(long)]
    mu: Option<f64>,
    /// mu in units of lambda = pi/sqrt(2); alternative to --mu
    #[arg(long)]
    mu_lambda: Option<f64>,
    /// Re a of the SU(2) matrix, bc = su2 only
    #[arg(long)]
    a_re: Option<f64>,
    /// Im a of the SU(2) matrix
    #[arg(long)]
    a_im: Option<f64>,
    /// Re b of the SU(2) matrix
    #[arg(long)]
    b_re: Option<f64>,
    /// Im b of the SU(2) matrix
    #[arg(long)]
    b_im: Option<f64>,
    /// Modulus of the cylinder (height; circumference is 2 pi)
    #[arg(long)]
    p: Option<f64>,
    /// Seam coordinate in (0, 2 pi)
    #[arg(long)]
    x: Option<f64>,
    /// Number of grid points (x-grid for prob, sample times for trace)
    #[arg(long)]
    grid: Option<usize>,
    /// Number of Monte Carlo paths
    #[arg(long)]
    paths: Option<u64>,
    /// Base time step dt0
    #[arg(long)]
    dt: Option<f64>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output format: csv or json
    #[arg(long)]
    format: Option<String>,
    /// Output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Constant driving value: trace a deterministic slit instead of SLE
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long, hide = true)]
    perturb: Option<f64>,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<cylsle::Error> for Failure {
    fn from(e: cylsle::Error) -> Self {
        Failure::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("i/o: {e}"))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl Flags {
    /// File values first, explicit flags on top.
    fn merged(self) -> Result<Flags, Failure> {
        let Some(path) = self.spec.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let mut base: Flags = serde_json::from_str(&text)
            .map_err(|e| usage(format!("bad run spec {}: {e}", path.display())))?;
        macro_rules! overlay {
            ($($f:ident),*) => { $( if self.$f.is_some() { base.$f = self.$f; } )* };
        }
        overlay!(bc, mu, mu_lambda, a_re, a_im, b_re, b_im, p, x, grid, paths, dt, seed, format, out, w0, perturb);
        Ok(base)
    }

    fn boundary_condition(&self) -> Result<BoundaryCondition, Failure> {
        let name = self.bc.as_deref().ok_or_else(|| usage("--bc is required"))?;
        match name {
            "dd" => {
                let mu = match (self.mu, self.mu_lambda) {
                    (Some(_), Some(_)) => {
                        return Err(usage("--mu and --mu-lambda are mutually exclusive"))
                    }
                    (Some(m), None) => m,
                    (None, Some(l)) => l * LAMBDA,
                    (None, None) => 0.0,
                };
                Ok(BoundaryCondition::dd(mu))
            }
            "dn" => Ok(BoundaryCondition::dn()),
            "su2" => {
                let a = Complex64::new(self.a_re.unwrap_or(0.0), self.a_im.unwrap_or(0.0));
                let b = Complex64::new(self.b_re.unwrap_or(0.0), self.b_im.unwrap_or(0.0));
                BoundaryCondition::su2(a, b)
                    .map_err(|e| usage(format!("invalid SU(2) entries: {e}")))
            }
            other => Err(usage(format!("unknown boundary condition `{other}`"))),
        }
    }

    fn p(&self) -> Result<f64, Failure> {
        let p = self.p.ok_or_else(|| usage("--p is required"))?;
        if !(p.is_finite() && p > 0.0) {
            return Err(usage(format!("--p must be positive, got {p}")));
        }
        Ok(p)
    }

    fn x_checked(&self, x: f64) -> Result<f64, Failure> {
        if !(x > 0.0 && x < 2.0 * PI) {
            return Err(usage(format!("x = {x} outside (0, 2 pi)")));
        }
        Ok(x)
    }

    fn format(&self) -> Result<Format, Failure> {
        match self.format.as_deref() {
            None | Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            Some(other) => Err(usage(format!("unknown format `{other}`"))),
        }
    }

    fn write(&self, body: &str) -> Result<(), Failure> {
        match &self.out {
            Some(path) => std::fs::write(path, body)?,
            None => print!("{body}"),
        }
        Ok(())
    }
}

#[derive(PartialEq, Clone, Copy)]
enum Format {
    Csv,
    Json,
}

/// 17 significant digits: round-trips f64 exactly.
fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

fn closed_form(bc: &BoundaryCondition, x: f64, p: f64) -> cylsle::Result<ProbabilityTriple> {
    match *bc {
        BoundaryCondition::DirichletUncompactified { mu } => {
            probabilities::dd_probabilities(x, p, mu)
        }
        BoundaryCondition::DirichletNeumann => probabilities::dn_probabilities(x, p),
        BoundaryCondition::Su2 { a, .. } => probabilities::su2_probabilities(x, p, a, Branch::Lower),
    }
}

fn cmd_prob(flags: &Flags) -> Result<u8, Failure> {
    let bc = flags.boundary_condition()?;
    let p = flags.p()?;
    let grid: Vec<f64> = match (flags.x, flags.grid) {
        (Some(_), Some(_)) => return Err(usage("--x and --grid are mutually exclusive")),
        (Some(x), None) => vec![flags.x_checked(x)?],
        (None, Some(n)) => {
            if n == 0 {
                return Err(usage("--grid must be positive"));
            }
            (1..=n).map(|i| 2.0 * PI * i as f64 / (n + 1) as f64).collect()
        }
        (None, None) => return Err(usage("prob needs --x or --grid")),
    };
    let rows = probabilities::probability_curve(&bc, p, &grid)?;
    let mut body = String::new();
    match flags.format()? {
        Format::Csv => {
            body.push_str("x,alpha,beta,gamma\n");
            for (x, t) in &rows {
                let _ = writeln!(
                    body,
                    "{},{},{},{}",
                    sig17(*x),
                    sig17(t.alpha),
                    sig17(t.beta),
                    sig17(t.gamma)
                );
            }
        }
        Format::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|(x, t)| {
                    serde_json::json!({
                        "x": x, "alpha": t.alpha, "beta": t.beta, "gamma": t.gamma
                    })
                })
                .collect();
            body = serde_json::to_string_pretty(&items).unwrap();
            body.push('\n');
        }
    }
    flags.write(&body)?;
    Ok(0)
}

/// Residual discretization bias allowed on top of the statistical error;
/// matches the bias budget used by the library's own Monte Carlo tests.
const MC_BIAS_BUDGET: f64 = 0.01;

fn cmd_mc(flags: &Flags) -> Result<u8, Failure> {
    let bc = flags.boundary_condition()?;
    let p = flags.p()?;
    let x = flags.x_checked(flags.x.unwrap_or(PI))?;
    if flags.format()? == Format::Csv && flags.format.is_some() {
        return Err(usage("mc emits a JSON report; --format csv is not supported"));
    }
    let n_paths = flags.paths.unwrap_or(10_000);
    let dt0 = flags.dt.unwrap_or(1e-3);
    let seed = flags.seed.unwrap_or(1);
    let cfg = SimConfig::new(x, p, dt0, n_paths, seed)?.barrier_correction(true);
    let exact = closed_form(&bc, x, p)?;
    let start = Instant::now();
    let (est, se) = sde::mc_estimate(&bc, &cfg)?;
    let wall_time = start.elapsed().as_secs_f64();
    // z-score of the gap left after the documented bias budget
    let z = |got: f64, want: f64, s: f64| {
        let gap = got - want;
        gap.signum() * ((gap.abs() - MC_BIAS_BUDGET).max(0.0) / s)
    };
    let z_scores = [
        z(est.alpha, exact.alpha, se[0]),
        z(est.beta, exact.beta, se[1]),
        z(est.gamma, exact.gamma, se[2]),
    ];
    let report = serde_json::json!({
        "estimate": [est.alpha, est.beta, est.gamma],
        "stderr": se,
        "closed_form": [exact.alpha, exact.beta, exact.gamma],
        "z_scores": z_scores,
        "n_paths": n_paths,
        "dt0": dt0,
        "seed": seed,
        "wall_time": wall_time,
    });
    let mut body = serde_json::to_string_pretty(&report).unwrap();
    body.push('\n');
    flags.write(&body)?;
    if z_scores.iter().any(|z| z.abs() > 4.0) {
        eprintln!("error: Monte Carlo disagrees with the closed form beyond 4 sigma");
        return Ok(1);
    }
    Ok(0)
}

fn cmd_trace(flags: &Flags) -> Result<u8, Failure> {
    let p = flags.p()?;
    let x = flags.x_checked(flags.x.unwrap_or(PI))?;
    let n = flags.grid.unwrap_or(100);
    if n == 0 {
        return Err(usage("--grid must be positive"));
    }
    let dt0 = flags.dt.unwrap_or(1e-3);
    let seed = flags.seed.unwrap_or(1);
    let cfg = SimConfig::new(x, p, dt0, 1, seed)?;
    let (driver, t_end) = match flags.w0 {
        Some(w0) => (Driver::Constant(w0), p / 2.0),
        None => {
            let bc = flags.boundary_condition()?;
            // run the path once to learn its exit time, then sample within it
            let (_, outcome) = loewner::evolve(&bc, x, &cfg, 0, &[])?;
            (Driver::Sle(bc), 0.98 * outcome.tau)
        }
    };
    let times: Vec<f64> = (1..=n).map(|i| t_end * i as f64 / n as f64).collect();
    let pts = loewner::trace(&driver, &cfg, &times, 0)?;
    let mut body = String::new();
    match flags.format()? {
        Format::Csv => {
            body.push_str("t,re,im\n");
            for &(t, re, im) in &pts {
                let _ = writeln!(body, "{},{},{}", sig17(t), sig17(re), sig17(im));
            }
        }
        Format::Json => {
            let items: Vec<serde_json::Value> = pts
                .iter()
                .map(|&(t, re, im)| serde_json::json!({"t": t, "re": re, "im": im}))
                .collect();
            body = serde_json::to_string_pretty(&items).unwrap();
            body.push('\n');
        }
    }
    flags.write(&body)?;
    Ok(0)
}

fn cmd_check(flags: &Flags) -> Result<u8, Failure> {
    let results = cylsle::check::run_suite(flags.perturb.unwrap_or(0.0));
    let mut body = String::new();
    match flags.format()? {
        Format::Csv => {
            body.push_str("name,passed,detail\n");
            for r in &results {
                let _ = writeln!(body, "{},{},{}", r.name, r.passed, r.detail.replace(',', ";"));
            }
        }
        Format::Json => {
            let items: Vec<serde_json::Value> = results
                .iter()
                .map(|r| {
                    serde_json::json!({"name": r.name, "passed": r.passed, "detail": r.detail})
                })
                .collect();
            body = serde_json::to_string_pretty(&items).unwrap();
            body.push('\n');
        }
    }
    flags.write(&body)?;
    if results.iter().all(|r| r.passed) {
        Ok(0)
    } else {
        eprintln!("error: {} check(s) failed", results.iter().filter(|r| !r.passed).count());
        Ok(3)
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.cmd {
        Cmd::Prob(f) => cmd_prob(&f.merged()?),
        Cmd::Mc(f) => cmd_mc(&f.merged()?),
        Cmd::Trace(f) => cmd_trace(&f.merged()?),
        Cmd::Check(f) => cmd_check(&f.merged()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
