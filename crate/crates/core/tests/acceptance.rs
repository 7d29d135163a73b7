//! Acceptance suite: one line per criterion, nonzero exit if a criterion
//! outside [`KNOWN_RED`] fails. Runs under `cargo test` without libtest.

mod common;

use std::time::Instant;

use lrfact::dense::{self, DenseMatrix};
use lrfact::diagnostics::{
    build_balanced_factors, certify_optimal_pair, degenerate_example, kl_curve, kl_inequality_probe, kl_moduli,
    ProbeOptions,
};
use lrfact::harness::{run_fig1, run_fig2, run_fig3, solver_config, ExperimentConfig, RunBundle, FIG3_C_VALUES};
use lrfact::{Exec, Model, ModelSpec, PenaltyParams, SamplingOperator};
use rand::Rng;

/// Criteria that are expected to stay red. Each one has an entry in the
/// decisions ledger explaining why.
const KNOWN_RED: &[usize] = &[2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn relative(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn example_curves() -> Outcome {
    let mut worst = 0.0f64;
    for (nu, mu) in [(0.5, 1.0), (2.0, 0.7), (10.0, 3.0)] {
        let (spec, wbar, d) = degenerate_example(nu, mu).unwrap();
        for p in kl_curve(&spec, &wbar, &d, &[0.5, 0.1, 0.01], &[]).unwrap() {
            worst = worst.max(relative(p.gap, 8.0 * nu * p.t.powi(4)));
            worst = worst.max(relative(p.dist, 8.0 * 2f64.sqrt() * nu * p.t.powi(3)));
        }
    }
    outcome(worst <= 1e-10, format!("worst relative deviation from 8 nu t^4 and 8 sqrt(2) nu t^3 = {worst:.2e}"))
}

fn convergence_line(b: &RunBundle) -> String {
    let s = &b.summary;
    format!(
        "c = {}, relerr = {:.2e}, R2 = {:.4}, nnz = ({}, {}), {} iterations, {}",
        s.config.c, s.relative_error, s.r_squared, s.nnz_u, s.nnz_v, s.iterations, s.termination
    )
}

fn converged_well(b: &RunBundle) -> bool {
    b.summary.relative_error <= 1e-8 && b.summary.r_squared >= 0.95
}

fn fig1_literal() -> Outcome {
    let cfg = ExperimentConfig::fig1();
    let b = run_fig1(&cfg, &solver_config(&cfg)).unwrap();
    outcome(converged_well(&b), convergence_line(&b))
}

fn fig2(dc: &mut Option<RunBundle>) -> Outcome {
    let cfg = ExperimentConfig::fig2();
    let b = run_fig2(&cfg, &solver_config(&cfg)).unwrap();
    let line = format!("{}, saturated = {:?}", convergence_line(&b), b.summary.saturated);
    let pass = converged_well(&b);
    *dc = Some(b);
    outcome(pass, line)
}

fn fig3() -> Outcome {
    let cfg = ExperimentConfig::fig3();
    let (sweep, _) = run_fig3(&cfg, &FIG3_C_VALUES, &solver_config(&cfg), Exec::default()).unwrap();
    let rows = &sweep.rows;
    let span = FIG3_C_VALUES[3] / FIG3_C_VALUES[0];
    let full_rank = rows[0].nnz_u == cfg.kappa && rows[0].nnz_v == cfg.kappa;
    let middle_recovers = rows[1..3]
        .iter()
        .any(|r| r.nnz_u == cfg.r && r.nnz_v == cfg.r && r.relative_error <= 1e-8);
    let cols: Vec<String> = rows
        .iter()
        .map(|r| format!("c={} -> {} cols, relerr {:.1e}", r.c, r.nnz_u, r.relative_error))
        .collect();
    outcome(span >= 1e3 && full_rank && middle_recovers, cols.join("; "))
}

fn oracles() -> Outcome {
    let p = PenaltyParams::new(3.7, 1.0, 1.0, 0.0).unwrap();
    let psi = common::psi_star_grid_error(&p, 2001, 100_001);
    let (e20, edc) = common::prox_oracle_errors(100, 11);
    let g20 = common::gradient_fd_error(Model::L20, 20, 3);
    let gdc = common::gradient_fd_error(Model::Dc, 20, 3);
    let bf = common::l20_brute_force_mismatches(20, 8);
    let pass = psi <= 1e-6 && e20 <= 1e-6 && edc <= 1e-6 && g20 <= 1e-5 && gdc <= 1e-5 && bf == 0;
    outcome(
        pass,
        format!("psi* {psi:.1e}, prox l20 {e20:.1e} dc {edc:.1e}, gradient l20 {g20:.1e} dc {gdc:.1e}, brute-force mismatches {bf}"),
    )
}

fn kl_probe() -> Outcome {
    let mut m = DenseMatrix::zeros(6, 6);
    m.col_mut(0)[0] = 2.0;
    m.col_mut(1)[1] = 2.0;
    let (nu, mu, sigma_r) = (2.0, 1.0, 2.0);
    let op = SamplingOperator::full(6, 6);
    let b = op.apply(&m).unwrap();
    let spec = ModelSpec::new(Model::L20, op, b, PenaltyParams::l20(1.0 / nu, mu / nu).unwrap()).unwrap();
    let wbar = build_balanced_factors(&m, 3).unwrap();
    let k = kl_moduli(2.0, sigma_r, 2, nu, mu, 1.0, 1.0, None).unwrap();
    let alpha_condition = 1.0 > 4.0 / (nu * sigma_r * sigma_r);
    let rep = kl_inequality_probe(&spec, &wbar, &k, &ProbeOptions::default()).unwrap();
    outcome(
        alpha_condition && k.hypotheses_ok() && rep.kept == 100 && rep.worst_slack >= -1e-10,
        format!(
            "gamma = {:.3e}, radius = {:.3}, {} kept of {} drawn, worst slack = {:.2e}",
            k.gamma, rep.radius, rep.kept, rep.drawn, rep.worst_slack
        ),
    )
}

fn counterexample() -> Outcome {
    let nu = 1.0;
    let (spec, wbar, d) = degenerate_example(nu, 1.0).unwrap();
    let ts = [0.01, 3e-3, 1e-3, 3e-4, 1e-4];
    let gammas = [1e-2, 1e-1, 1.0, 10.0, 100.0];
    let pts = kl_curve(&spec, &wbar, &d, &ts, &gammas).unwrap();
    let all_negative = pts.iter().all(|p| p.slacks.iter().all(|&s| s < 0.0));
    // Smaller gamma only moves the crossover closer to the critical point.
    let tiny = [1e-3, 1e-4];
    let crossings_ok = tiny.iter().all(|&g| {
        let t0: f64 = (g / (16.0 * nu)).sqrt();
        let pts = kl_curve(&spec, &wbar, &d, &[0.5 * t0, 0.1 * t0], &[g]).unwrap();
        pts.iter().all(|p| p.slacks[0] < 0.0)
    });
    let worst = pts.iter().flat_map(|p| p.slacks.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        all_negative && crossings_ok,
        format!("max slack over t <= 0.01, gamma in [1e-2, 1e2] = {worst:.2e}; tiny gamma crossings negative = {crossings_ok}"),
    )
}

fn certificates(dc: Option<&RunBundle>) -> Outcome {
    let mut r = common::rng(77);
    let mut failures = 0;
    for _ in 0..20 {
        let m = r.random_range(1..12);
        let n = r.random_range(1..12);
        let rank = r.random_range(1..=m.min(n));
        let kappa = r.random_range(rank..=m.min(n));
        let x = dense::matmul(&common::gaussian(m, rank, &mut r), &common::gaussian(n, rank, &mut r), false, true).unwrap();
        let w = build_balanced_factors(&x, kappa).unwrap();
        let c = certify_optimal_pair(&w, &x, 1e-8, 1e-8 * x.frobenius_norm()).unwrap();
        if !(c.pass && c.col_count_u == rank && c.col_count_v == rank) {
            failures += 1;
        }
    }
    let Some(dc) = dc else {
        return outcome(false, "DC run unavailable".into());
    };
    // Same instance as the DC run, with a lambda that separates the
    // spurious spectrum of X0 from the true one.
    let cfg = ExperimentConfig {
        c: 15.0,
        ..ExperimentConfig::fig1()
    };
    let l20 = run_fig1(&cfg, &solver_config(&cfg)).unwrap();
    let pl = l20.result.w.product();
    let agree = pl.sub(&dc.result.w.product()).frobenius_norm() / pl.frobenius_norm();
    outcome(
        failures == 0 && agree <= 1e-6,
        format!("{failures} certificate failures of 20; L20 (c = 15) vs DC product gap = {agree:.2e}"),
    )
}

fn main() {
    let mut dc_run = None;
    let mut results = Vec::new();
    let mut run = |id: usize, name: &str, limit_s: f64, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let pass = o.pass && secs < limit_s;
        let tag = match (pass, KNOWN_RED.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known red)",
            (false, false) => "FAIL",
        };
        println!("criterion {id} [{tag}] {name}: {} ({secs:.2} s, limit {limit_s} s)", o.detail);
        results.push((id, pass));
    };
    run(1, "example curves", 1.0, &mut example_curves);
    run(2, "l2,0 convergence at desk scale", 60.0, &mut fig1_literal);
    run(3, "DC convergence at desk scale", 60.0, &mut || fig2(&mut dc_run));
    run(4, "lambda sweep", 120.0, &mut fig3);
    run(5, "oracle suites", 30.0, &mut oracles);
    run(6, "KL inequality probe", 10.0, &mut kl_probe);
    run(7, "counterexample probe", 5.0, &mut counterexample);
    run(8, "structure certificates", 60.0, &mut || certificates(dc_run.as_ref()));

    let unexpected: Vec<usize> = results
        .iter()
        .filter(|(id, pass)| !pass && !KNOWN_RED.contains(id))
        .map(|(id, _)| *id)
        .collect();
    if !unexpected.is_empty() {
        eprintln!("acceptance: criteria failed: {unexpected:?}");
        std::process::exit(1);
    }
}
