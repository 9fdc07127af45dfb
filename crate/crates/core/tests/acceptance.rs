//! The release gate: one test per acceptance criterion, each printing a
//! single `ACCEPTANCE n: PASS/FAIL` line with the measured numbers.
//!
//! The tests serialize on a shared lock so that the stated runtime budgets
//! are measured without interference from sibling tests.

use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::Instant;

use cylsle::correlators::{self, BoundaryCondition};
use cylsle::loewner::{self, Driver};
use cylsle::probabilities::{self, Branch};
use cylsle::sde::{self, SimConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static GATE: Mutex<()> = Mutex::new(());

fn lock() -> std::sync::MutexGuard<'static, ()> {
    // a failed criterion poisons the lock; later criteria still run
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {n}: {verdict} — {detail}");
    assert!(passed, "criterion {n} failed: {detail}");
}

fn su2(re: f64, im: f64) -> BoundaryCondition {
    let a = Complex64::new(re, im);
    let b = Complex64::new((1.0 - a.norm_sqr()).max(0.0).sqrt(), 0.0);
    BoundaryCondition::su2(a, b).unwrap()
}

const LAMBDA: f64 = PI / std::f64::consts::SQRT_2;

#[test]
fn criterion_01_sum_rule() {
    let _g = lock();
    let start = Instant::now();
    let mut bcs = vec![
        BoundaryCondition::dd(-2.0 * LAMBDA),
        BoundaryCondition::dd(0.0),
        BoundaryCondition::dd(LAMBDA / 2.0),
        BoundaryCondition::dd(2.0 * LAMBDA),
        BoundaryCondition::dn(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    while bcs.len() < 25 {
        let r: f64 = rng.gen_range(0.0..1.0);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        bcs.push(su2(r.sqrt() * phi.cos(), r.sqrt() * phi.sin()));
    }
    let grid: Vec<f64> = (1..=50).map(|i| 2.0 * PI * i as f64 / 51.0).collect();
    let mut worst: f64 = 0.0;
    for bc in &bcs {
        for &p in &[0.3, 1.0, PI, 10.0] {
            for (x, t) in probabilities::probability_curve(bc, p, &grid).unwrap() {
                let err = (t.sum() - 1.0).abs();
                if err > worst {
                    worst = err;
                }
                assert!(err <= 1e-12, "{bc:?} p={p} x={x}: sum off by {err:.3e}");
            }
        }
    }
    let dt = start.elapsed().as_secs_f64();
    report(
        1,
        worst <= 1e-12 && dt < 5.0,
        &format!("worst |alpha+beta+gamma-1| = {worst:.3e} over 5000 points in {dt:.2}s"),
    );
}

#[test]
fn criterion_02_dd_anchor() {
    let _g = lock();
    let start = Instant::now();
    // frozen high-precision series oracle values
    let oracle = (0.206012858554144, 0.206012858554144, 0.587974282891712);
    let t = probabilities::dd_probabilities(PI, PI, 0.0).unwrap();
    let err = (t.alpha - oracle.0)
        .abs()
        .max((t.beta - oracle.1).abs())
        .max((t.gamma - oracle.2).abs());
    let sym = (t.alpha - t.beta).abs();
    let dt = start.elapsed().as_secs_f64();
    report(
        2,
        err <= 5e-4 && sym <= 1e-12 && dt < 1.0,
        &format!(
            "(alpha,beta,gamma) = ({:.6},{:.6},{:.6}), oracle gap {err:.3e}, |alpha-beta| = {sym:.3e}, {dt:.2}s",
            t.alpha, t.beta, t.gamma
        ),
    );
}

#[test]
fn criterion_03_dn_constants() {
    let _g = lock();
    let t = probabilities::dn_probabilities(PI, PI).unwrap();
    let gamma_ref = std::f64::consts::SQRT_2 - 1.0;
    let e_gamma = (t.gamma - gamma_ref).abs();
    let e_beta = (t.beta - (1.0 - gamma_ref) / 2.0).abs();
    report(
        3,
        e_gamma <= 1e-10 && e_beta <= 1e-10,
        &format!("gamma(pi,pi) off sqrt(2)-1 by {e_gamma:.3e}, beta off (1-gamma)/2 by {e_beta:.3e}"),
    );
}

#[test]
fn criterion_04_dn_arbitration() {
    let _g = lock();
    let start = Instant::now();
    let bc = BoundaryCondition::dn();
    let coarse = sde::dp_exit_oracle(&bc, PI, PI, 400, 110_000).unwrap();
    let fine = sde::dp_exit_oracle(&bc, PI, PI, 800, 440_000).unwrap();
    // second-order scheme (dt tied to dx^2): Richardson with factor 4
    let beta = (4.0 * fine.beta - coarse.beta) / 3.0;
    let sigma = ((fine.beta - coarse.beta) / 3.0).abs();
    let series_value = 0.29289;
    let printed_variant = 0.14645;
    let agree = (beta - series_value).abs();
    let discord = (beta - printed_variant).abs() / sigma;
    let dt = start.elapsed().as_secs_f64();
    report(
        4,
        agree <= 5e-3 && discord > 20.0 && dt < 60.0,
        &format!(
            "Richardson beta = {beta:.6} (sigma {sigma:.2e}): {agree:.2e} from {series_value}, {discord:.0} sigma from {printed_variant}; {dt:.1}s"
        ),
    );
}

#[test]
fn criterion_05_monte_carlo_concordance() {
    let _g = lock();
    let start = Instant::now();
    let bcs = [
        BoundaryCondition::dd(0.0),
        BoundaryCondition::dn(),
        su2(0.32, -0.54),
        su2(-0.61, 0.20),
    ];
    let mut worst_pull: f64 = 0.0;
    for bc in &bcs {
        for &(x, p) in &[(PI / 2.0, PI), (PI, PI), (1.5 * PI, 1.0)] {
            let exact = match *bc {
                BoundaryCondition::DirichletUncompactified { mu } => {
                    probabilities::dd_probabilities(x, p, mu)
                }
                BoundaryCondition::DirichletNeumann => probabilities::dn_probabilities(x, p),
                BoundaryCondition::Su2 { a, .. } => {
                    probabilities::su2_probabilities(x, p, a, Branch::Lower)
                }
            }
            .unwrap();
            let cfg = SimConfig::new(x, p, 1e-3, 100_000, 42)
                .unwrap()
                .barrier_correction(true);
            let (mc, se) = sde::mc_estimate(bc, &cfg).unwrap();
            for (got, (want, s)) in [mc.alpha, mc.beta, mc.gamma].into_iter().zip([
                (exact.alpha, se[0]),
                (exact.beta, se[1]),
                (exact.gamma, se[2]),
            ]) {
                let gap = (got - want).abs();
                let budget = 3.0 * s + 0.01;
                worst_pull = worst_pull.max(gap / budget);
                assert!(
                    gap <= budget,
                    "{bc:?} x={x} p={p}: |{got:.5}-{want:.5}| = {gap:.2e} > {budget:.2e}"
                );
            }
        }
    }
    let dt = start.elapsed().as_secs_f64();
    report(
        5,
        worst_pull <= 1.0 && dt < 180.0,
        &format!("12 runs x 1e5 paths, worst gap at {:.0}% of its 3*se+0.01 budget, {dt:.0}s", worst_pull * 100.0),
    );
}

#[test]
fn criterion_06_heat_equation() {
    let _g = lock();
    let bcs = [
        BoundaryCondition::dd(0.3),
        BoundaryCondition::dn(),
        su2(0.5, -0.3),
    ];
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for bc in &bcs {
        for i in 1..=8 {
            let x = 2.0 * PI * i as f64 / 9.0;
            for &p in &[0.7, 1.5, 3.0] {
                let f = |x: f64, p: f64| correlators::f_factor(bc, x, p).unwrap();
                let d2x = (f(x + h, p) - 2.0 * f(x, p) + f(x - h, p)) / (h * h);
                let dp = (f(x, p + h) - f(x, p - h)) / (2.0 * h);
                worst = worst.max((dp - 2.0 * d2x).abs() / (dp.abs() + d2x.abs() + 1.0));
            }
        }
    }
    report(
        6,
        worst <= 1e-6,
        &format!("worst relative residual of dp f = 2 d2x f: {worst:.3e} (3 families x 24 points)"),
    );
}

#[test]
fn criterion_07_null_vector_pde() {
    let _g = lock();
    let bcs = [
        BoundaryCondition::dd(0.0),
        BoundaryCondition::dn(),
        su2(0.3, 0.4),
    ];
    let mut worst: f64 = 0.0;
    for bc in &bcs {
        for &x in &[1.2, 2.2, PI, 4.2] {
            for &p in &[0.8, 1.8, 3.0] {
                worst = worst.max(correlators::null_vector_residual(bc, x, p).unwrap());
            }
        }
    }
    report(
        7,
        worst <= 1e-5,
        &format!("worst relative residual at 12 (x,p) points per family: {worst:.3e}"),
    );
}

#[test]
fn criterion_08_su2_reductions() {
    let _g = lock();
    let grid: Vec<f64> = (1..=19).map(|i| 2.0 * PI * i as f64 / 20.0).collect();

    // a = 0 reduces to Dirichlet-Neumann
    let mut e_dn: f64 = 0.0;
    for &p in &[0.5, PI, 4.0] {
        for &x in &grid {
            let s = probabilities::su2_probabilities(x, p, Complex64::new(0.0, 0.0), Branch::Lower)
                .unwrap();
            let d = probabilities::dn_probabilities(x, p).unwrap();
            e_dn = e_dn
                .max((s.alpha - d.alpha).abs())
                .max((s.beta - d.beta).abs())
                .max((s.gamma - d.gamma).abs());
        }
    }

    // pure-Dirichlet direction: gamma vanishes identically
    let mut e_gamma: f64 = 0.0;
    for &alpha in &[0.3, 1.0, PI / 2.0, 2.5] {
        let a = Complex64::new(-alpha.sin(), -alpha.cos());
        for &x in &grid {
            let t = probabilities::su2_probabilities(x, 1.5, a, Branch::Lower).unwrap();
            e_gamma = e_gamma.max(t.gamma.abs());
        }
    }

    // branch and b-phase invariance
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut e_branch: f64 = 0.0;
    let mut e_phase: f64 = 0.0;
    for _ in 0..10 {
        let r: f64 = rng.gen_range(0.05..0.95);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let a = Complex64::new(r * phi.cos(), r * phi.sin());
        for &(x, p) in &[(1.3, 0.7), (PI, PI), (5.0, 2.0)] {
            let lo = probabilities::su2_probabilities(x, p, a, Branch::Lower).unwrap();
            let hi = probabilities::su2_probabilities(x, p, a, Branch::Upper).unwrap();
            e_branch = e_branch
                .max((lo.alpha - hi.alpha).abs())
                .max((lo.beta - hi.beta).abs())
                .max((lo.gamma - hi.gamma).abs());
        }
        let bmod = (1.0 - a.norm_sqr()).sqrt();
        let psi: f64 = rng.gen_range(0.0..2.0 * PI);
        let bc1 = BoundaryCondition::su2(a, Complex64::new(bmod, 0.0)).unwrap();
        let bc2 =
            BoundaryCondition::su2(a, bmod * Complex64::new(psi.cos(), psi.sin())).unwrap();
        e_phase = e_phase.max(
            (correlators::f_factor(&bc1, 2.1, 1.1).unwrap()
                - correlators::f_factor(&bc2, 2.1, 1.1).unwrap())
            .abs(),
        );
    }

    report(
        8,
        e_dn <= 1e-12 && e_gamma <= 1e-14 && e_branch <= 1e-12 && e_phase <= 1e-12,
        &format!(
            "a=0 vs DN {e_dn:.2e}; pure-Dirichlet gamma {e_gamma:.2e}; branch {e_branch:.2e}; b-phase {e_phase:.2e}"
        ),
    );
}

#[test]
fn criterion_09_simply_connected_limit() {
    let _g = lock();
    let x = PI / 2.0;
    let target = x / (2.0 * PI);
    let betas: Vec<f64> = [10.0, 20.0, 40.0, 80.0]
        .iter()
        .map(|&p| probabilities::dd_probabilities(x, p, 0.0).unwrap().beta)
        .collect();
    let gaps: Vec<f64> = betas.iter().map(|b| (b - target).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let converged = gaps[3] <= 2e-2;
    report(
        9,
        monotone && converged,
        &format!(
            "beta(pi/2, p) = {betas:.6?} vs {target}; |gaps| = {gaps:.4?}, monotone: {monotone}, final <= 2e-2: {converged}"
        ),
    );
}

#[test]
fn criterion_10_martingale_flatness() {
    let _g = lock();
    let start = Instant::now();
    let mut detail = String::new();
    let mut ok = true;
    for bc in [BoundaryCondition::dd(0.0), BoundaryCondition::dn()] {
        let cfg = SimConfig::new(PI, PI, 2e-3, 20_000, 13).unwrap();
        let m0 = loewner::martingale_initial(&bc, PI, PI).unwrap();
        for (t, mean, se) in loewner::martingale_check(&bc, &cfg, &[0.2, 0.5, 1.0]).unwrap() {
            let pulls = (mean - m0).abs() / se;
            ok &= pulls <= 3.0;
            detail.push_str(&format!("t={t}: {:.4} ({pulls:.1}sd) ", mean / m0));
        }
    }
    let dt = start.elapsed().as_secs_f64();
    report(
        10,
        ok && dt < 120.0,
        &format!("E[M_t]/M_0 for DD then DN, N=2e4: {detail}in {dt:.0}s"),
    );
}

#[test]
fn criterion_11_loewner_determinism() {
    let _g = lock();
    let w0 = 2.0;
    let p = 2.0;
    let cfg = SimConfig::new(PI, p, 1e-3, 200, 99).unwrap();
    let times: Vec<f64> = (1..=10).map(|i| i as f64 * p / 40.0).collect();
    let pts = loewner::trace(&Driver::Constant(w0), &cfg, &times, 0).unwrap();
    let mut e_slit: f64 = 0.0;
    for &(_, re, _) in &pts {
        e_slit = e_slit.max((re - w0).abs());
    }

    // byte-identical results for 1 vs 4 rayon workers
    let bc = BoundaryCondition::dd(0.0);
    let mc_cfg = SimConfig::new(PI, PI, 2e-3, 2_000, 5).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sde::mc_estimate(&bc, &mc_cfg).unwrap())
    };
    let (t1, _) = run(1);
    let (t4, _) = run(4);
    let reproducible = t1.alpha.to_bits() == t4.alpha.to_bits()
        && t1.beta.to_bits() == t4.beta.to_bits()
        && t1.gamma.to_bits() == t4.gamma.to_bits();

    let again = loewner::trace(&Driver::Constant(w0), &cfg, &times, 0).unwrap();
    let trace_stable = pts
        .iter()
        .zip(&again)
        .all(|(a, b)| a.1.to_bits() == b.1.to_bits() && a.2.to_bits() == b.2.to_bits());

    report(
        11,
        e_slit <= 1e-3 && reproducible && trace_stable,
        &format!(
            "constant driver: max |Re - w0| = {e_slit:.2e} for t <= p/4; 1 vs 4 workers identical: {reproducible}; rerun identical: {trace_stable}"
        ),
    );
}
