//! Experiment drivers: single-run convergence studies, the lambda sweep and
//! post-hoc diagnostics of a stored solution.

use super::config::ExperimentConfig;
use super::instance::{gen_instance, Instance};
use super::io::KeyValues;
use super::HarnessError;
use crate::dense;
use crate::diagnostics::{
    build_balanced_factors, certify_optimal_pair, exact_penalty_threshold, kl_inequality_probe, kl_moduli,
    subdiff_distance_psi, subdiff_distance_theta_upper, KlModuli, OptimalSetCertificate, ProbeOptions, ProbeReport,
    RANK_CUTOFF,
};
use crate::exec::Exec;
use crate::objective::{FactorPair, Model, ModelSpec};
use crate::penalty::PenaltyParams;
use crate::sampling::{estimate_restricted_eigs, RestrictedEigEstimate};
use crate::solver::{solve, IterRecord, SolveResult, SolverConfig, Termination};

/// Least-squares fit of `ln y` against `k`: `(slope, r_squared)`.
/// NaN when fewer than three usable points remain.
pub fn log_linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| y.is_finite() && *y > 0.0)
        .map(|&(k, y)| (k, y.ln()))
        .collect();
    if pts.len() < 3 {
        return (f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Fit of `||U^k - U^f||_F` over the last half of the iterations, leaving out
/// the final iterate itself.
pub fn convergence_fit(records: &[IterRecord]) -> (f64, f64) {
    let Some(last) = records.last() else {
        return (f64::NAN, f64::NAN);
    };
    let half = last.iter / 2;
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.iter >= half && r.iter < last.iter)
        .map(|r| (r.iter as f64, r.dist_u_final))
        .collect();
    log_linear_fit(&pts)
}

/// Everything a single experiment run produces.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub specnorm_x0: f64,
    pub params: PenaltyParams,
    pub iterations: usize,
    pub termination: Termination,
    pub relative_error: f64,
    pub nnz_u: usize,
    pub nnz_v: usize,
    pub slope: f64,
    pub r_squared: f64,
    pub wall_s: f64,
    pub restarts: usize,
    pub iterate_stride: usize,
    /// DC only: every nonzero column satisfies `rho ||U_j|| >= 2a/(a+1)`.
    pub saturated: Option<bool>,
}

impl RunSummary {
    pub fn to_key_values(&self, deterministic: bool) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.push("model", self.config.model);
        kv.push("m", self.config.m);
        kv.push("n", self.config.n);
        kv.push("r", self.config.r);
        kv.push("kappa", self.config.kappa);
        kv.push("seed", self.config.seed);
        kv.push_f64("specnorm_x0", self.specnorm_x0);
        kv.push_f64("lambda", self.params.lambda());
        kv.push_f64("rho", self.params.rho());
        kv.push_f64("mu_tilde", self.params.mu_tilde());
        kv.push("iterations", self.iterations);
        kv.push("termination", self.termination);
        kv.push_f64("relative_error", self.relative_error);
        kv.push("nnz_u", self.nnz_u);
        kv.push("nnz_v", self.nnz_v);
        kv.push_f64("slope", self.slope);
        kv.push_f64("r_squared", self.r_squared);
        kv.push("restarts", self.restarts);
        kv.push("iterate_stride", self.iterate_stride);
        if let Some(s) = self.saturated {
            kv.push("saturated", s);
        }
        kv.push_f64("wall_s", if deterministic { 0.0 } else { self.wall_s });
        kv
    }
}

/// A run's summary plus the data needed to write or re-check it.
#[derive(Debug, Clone)]
pub struct RunBundle {
    pub summary: RunSummary,
    pub instance: Instance,
    pub spec: ModelSpec,
    pub result: SolveResult,
}

pub fn solver_config(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        epsilon: cfg.epsilon,
        max_iters: cfg.max_iters,
        seed: cfg.seed,
        ..SolverConfig::default()
    }
}

/// Generates the instance, solves, and summarizes.
pub fn run_single(cfg: &ExperimentConfig, solver: &SolverConfig) -> Result<RunBundle, HarnessError> {
    let instance = gen_instance(cfg)?;
    let specnorm_x0 = instance.specnorm_x0()?;
    let spec = instance.spec(cfg)?;
    let start = std::time::Instant::now();
    let result = solve(&spec, solver, None, cfg.kappa)?;
    let wall_s = start.elapsed().as_secs_f64();
    let summary = summarize(cfg, &instance, &spec, &result, specnorm_x0, wall_s);
    Ok(RunBundle {
        summary,
        instance,
        spec,
        result,
    })
}

fn summarize(
    cfg: &ExperimentConfig,
    instance: &Instance,
    spec: &ModelSpec,
    result: &SolveResult,
    specnorm_x0: f64,
    wall_s: f64,
) -> RunSummary {
    let (nnz_u, nnz_v) = result.w.column_counts(0.0);
    let (slope, r_squared) = convergence_fit(&result.trace.records);
    let saturated = (spec.model == Model::Dc).then(|| saturation_holds(&result.w, &spec.params));
    RunSummary {
        config: cfg.clone(),
        specnorm_x0,
        params: spec.params,
        iterations: result.iterations,
        termination: result.termination,
        relative_error: instance.relative_error(&result.w.product()),
        nnz_u,
        nnz_v,
        slope,
        r_squared,
        wall_s,
        restarts: result.trace.restarts,
        iterate_stride: result.trace.iterate_stride,
        saturated,
    }
}

/// Every nonzero column of `U` and `V` sits on the saturated branch.
pub fn saturation_holds(w: &FactorPair, p: &PenaltyParams) -> bool {
    [&w.u, &w.v].iter().all(|z| {
        dense::column_norms(z)
            .into_iter()
            .all(|t| t == 0.0 || p.rho() * t >= p.upper_break())
    })
}

fn require_model(cfg: &ExperimentConfig, model: Model, what: &str) -> Result<(), HarnessError> {
    if cfg.model != model {
        return Err(HarnessError::Config(format!("{what} needs model = {model}, got {}", cfg.model)));
    }
    Ok(())
}

/// Convergence study for the l2,0 model.
pub fn run_fig1(cfg: &ExperimentConfig, solver: &SolverConfig) -> Result<RunBundle, HarnessError> {
    require_model(cfg, Model::L20, "fig1")?;
    run_single(cfg, solver)
}

/// Convergence study for the DC surrogate.
pub fn run_fig2(cfg: &ExperimentConfig, solver: &SolverConfig) -> Result<RunBundle, HarnessError> {
    require_model(cfg, Model::Dc, "fig2")?;
    run_single(cfg, solver)
}

/// One row of the lambda sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub c: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub relative_error: f64,
    pub nnz_u: usize,
    pub nnz_v: usize,
    pub slope: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: &str = "c,lambda,iterations,termination,relative_error,nnzU,nnzV,slope,r_squared";

impl SweepSummary {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{SWEEP_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:?},{:?},{},{},{:?},{},{},{:?},{:?}\n",
                r.c, r.lambda, r.iterations, r.termination, r.relative_error, r.nnz_u, r.nnz_v, r.slope, r.r_squared
            ));
        }
        s
    }
}

/// Default sweep for [`run_fig3`]: too small, too small, recovering, recovering.
pub const FIG3_C_VALUES: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

/// Solves the same instance once per `c`, with `lambda` from the config's
/// rule evaluated at that `c`. Runs are independent and execute in parallel.
pub fn run_fig3(
    cfg: &ExperimentConfig,
    c_values: &[f64],
    solver: &SolverConfig,
    exec: Exec,
) -> Result<(SweepSummary, Vec<RunBundle>), HarnessError> {
    if c_values.len() < 2 {
        return Err(HarnessError::Config("fig3 needs at least two c values".into()));
    }
    let instance = gen_instance(cfg)?;
    let specnorm_x0 = instance.specnorm_x0()?;
    let results = exec.map_indexed(c_values.len(), |i| -> Result<RunBundle, HarnessError> {
        let run_cfg = ExperimentConfig {
            c: c_values[i],
            ..cfg.clone()
        };
        let spec = instance.spec(&run_cfg)?;
        let start = std::time::Instant::now();
        let result = solve(&spec, solver, None, cfg.kappa)?;
        let wall_s = start.elapsed().as_secs_f64();
        let summary = summarize(&run_cfg, &instance, &spec, &result, specnorm_x0, wall_s);
        Ok(RunBundle {
            summary,
            instance: instance.clone(),
            spec,
            result,
        })
    });
    let bundles = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows = bundles
        .iter()
        .map(|b| {
            let s = &b.summary;
            SweepRow {
                c: s.config.c,
                lambda: s.params.lambda(),
                iterations: s.iterations,
                termination: s.termination,
                relative_error: s.relative_error,
                nnz_u: s.nnz_u,
                nnz_v: s.nnz_v,
                slope: s.slope,
                r_squared: s.r_squared,
            }
        })
        .collect();
    Ok((SweepSummary { rows }, bundles))
}

/// Diagnostics of a stored solution against its instance.
#[derive(Debug, Clone)]
pub struct DiagnoseReport {
    pub certificate: OptimalSetCertificate,
    pub sigma1: f64,
    pub sigma_r: f64,
    pub rank: usize,
    pub eigs: RestrictedEigEstimate,
    pub moduli: Option<KlModuli>,
    pub threshold: Result<f64, String>,
    pub probe: Result<ProbeReport, String>,
    /// `dist(0, dPsi)` for l2,0, or the DC bracket value.
    pub distance: f64,
    pub distance_exact: bool,
}

impl DiagnoseReport {
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        let c = &self.certificate;
        kv.push("certificate", if c.pass { "pass" } else { "fail" });
        kv.push_f64("product_error", c.product_error);
        kv.push_f64("balance_error", c.balance_error);
        kv.push("col_count_u", c.col_count_u);
        kv.push("col_count_v", c.col_count_v);
        kv.push("rank_product", c.rank_product);
        kv.push("rank_m", self.rank);
        kv.push_f64("sigma1", self.sigma1);
        kv.push_f64("sigma_r", self.sigma_r);
        kv.push("eig_method", format!("{:?}", self.eigs.method));
        kv.push_f64("alpha_lower", self.eigs.alpha_lower);
        kv.push_f64("beta_upper", self.eigs.beta_upper);
        match &self.moduli {
            Some(m) => {
                kv.push_f64("gamma", m.gamma);
                kv.push_f64("gamma_prime", m.gamma_prime);
                kv.push("condition_ok", m.condition_ok);
                kv.push("alpha_ok", m.alpha_ok);
            }
            None => kv.push("gamma", "unavailable"),
        }
        match &self.threshold {
            Ok(t) => kv.push_f64("rho_bar", *t),
            Err(e) => kv.push("rho_bar", format!("unavailable ({e})")),
        }
        match &self.probe {
            Ok(p) => {
                kv.push_f64("probe_worst_slack", p.worst_slack);
                kv.push("probe_kept", p.kept);
                kv.push("probe_drawn", p.drawn);
                kv.push_f64("probe_radius", p.radius);
                kv.push("probe_seed", p.seed);
            }
            Err(e) => kv.push("probe", format!("skipped ({e})")),
        }
        kv.push_f64("distance", self.distance);
        kv.push("distance_kind", if self.distance_exact { "exact" } else { "lower bracket" });
        kv
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiagnoseOptions {
    pub eig_samples: usize,
    pub probe: ProbeOptions,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            eig_samples: 16,
            probe: ProbeOptions::default(),
        }
    }
}

pub fn diagnose(
    cfg: &ExperimentConfig,
    instance: &Instance,
    w: &FactorPair,
    opts: &DiagnoseOptions,
) -> Result<DiagnoseReport, HarnessError> {
    let spec = instance.spec(cfg)?;
    spec.check(w)?;
    let m = &instance.m_true;
    let mnorm = m.frobenius_norm();
    let certificate = certify_optimal_pair(w, m, 1e-8, 1e-8 * mnorm)?;

    let sv = dense::svd(m)?.sigma;
    let sigma1 = sv[0];
    let rank = sv.iter().filter(|&&s| s > RANK_CUTOFF * sigma1).count();
    let sigma_r = if rank > 0 { sv[rank - 1] } else { 0.0 };
    let (mm, nn) = spec.op.shape();
    let k = (2 * rank.max(1)).min(mm.min(nn));
    let eigs = estimate_restricted_eigs(&spec.op, k, opts.eig_samples, cfg.seed)?;

    let lambda = spec.params.lambda();
    let (alpha, beta) = (eigs.alpha_lower, eigs.beta_upper);
    let mut moduli = None;
    let mut threshold = Err("needs lambda > 0".to_string());
    let mut probe = Err("needs lambda > 0".to_string());
    if lambda > 0.0 && sigma_r > 0.0 {
        let nu = 1.0 / lambda;
        let mu = spec.params.mu_tilde() / lambda;
        threshold = exact_penalty_threshold(nu, mu, rank, cfg.kappa, sigma_r, alpha, spec.op.operator_norm(), &spec.params)
            .map_err(|e| e.to_string());
        if alpha > 0.0 {
            let dc_params = (spec.model == Model::Dc).then_some(&spec.params);
            let k = kl_moduli(sigma1, sigma_r, rank, nu, mu, alpha, beta, dc_params)?;
            moduli = Some(k);
            probe = if k.hypotheses_ok() {
                let wbar = build_balanced_factors(m, cfg.kappa)?;
                kl_inequality_probe(&spec, &wbar, &k, &opts.probe).map_err(|e| e.to_string())
            } else {
                Err(format!(
                    "hypotheses fail: condition_ok = {}, alpha_ok = {}",
                    k.condition_ok, k.alpha_ok
                ))
            };
        } else {
            probe = Err(format!("restricted smallest eigenvalue alpha = {alpha} is not positive"));
        }
    }

    let (distance, distance_exact) = if lambda > 0.0 {
        match spec.model {
            Model::L20 => (subdiff_distance_psi(&spec, w)?, true),
            Model::Dc => {
                let b = subdiff_distance_theta_upper(&spec, w)?;
                (b.value, b.exact)
            }
        }
    } else {
        (f64::NAN, false)
    };

    Ok(DiagnoseReport {
        certificate,
        sigma1,
        sigma_r,
        rank,
        eigs,
        moduli,
        threshold,
        probe,
        distance,
        distance_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_fit_exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 3.0 * 0.5f64.powi(k))).collect();
        let (slope, r2) = log_linear_fit(&pts);
        assert!((slope - 0.5f64.ln()).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
        assert!(log_linear_fit(&pts[..2]).0.is_nan());
    }

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            m: 20,
            n: 16,
            r: 2,
            kappa: 2,
            operator: crate::sampling::OperatorKind::Full,
            c: 0.05,
            ..ExperimentConfig::fig1()
        }
    }

    #[test]
    fn exact_parametrization_converges_quickly() {
        let cfg = tiny();
        let b = run_fig1(&cfg, &solver_config(&cfg)).unwrap();
        assert_eq!(b.summary.termination, Termination::Converged);
        assert!(b.summary.iterations <= 200, "{}", b.summary.iterations);
        assert!(b.summary.relative_error <= 1e-8);
    }

    #[test]
    fn one_iteration_budget() {
        let cfg = ExperimentConfig {
            max_iters: 1,
            operator: crate::sampling::OperatorKind::UniformMask,
            sample_ratio: 0.5,
            ..tiny()
        };
        let b = run_fig1(&cfg, &solver_config(&cfg)).unwrap();
        assert_eq!(b.result.trace.records.len(), 1);
        assert_eq!(b.summary.termination, Termination::Budget);
    }

    #[test]
    fn wrong_model_rejected() {
        let cfg = tiny();
        assert!(run_fig2(&cfg, &solver_config(&cfg)).is_err());
    }

    #[test]
    fn diagnose_full_sampling() {
        let cfg = tiny();
        let b = run_fig1(&cfg, &solver_config(&cfg)).unwrap();
        let rep = diagnose(&cfg, &b.instance, &b.result.w, &DiagnoseOptions::default()).unwrap();
        assert!(rep.certificate.pass, "{:?}", rep.certificate);
        assert_eq!((rep.eigs.alpha_lower, rep.eigs.beta_upper), (1.0, 1.0));
        assert!(rep.eigs.is_exact());
    }

    #[test]
    fn diagnose_skips_probe_on_masks() {
        let cfg = ExperimentConfig {
            operator: crate::sampling::OperatorKind::UniformMask,
            sample_ratio: 0.6,
            ..tiny()
        };
        let inst = gen_instance(&cfg).unwrap();
        let w = build_balanced_factors(&inst.m_true, cfg.kappa).unwrap();
        let rep = diagnose(&cfg, &inst, &w, &DiagnoseOptions::default()).unwrap();
        assert!(rep.moduli.is_none());
        assert!(rep.probe.is_err());
    }
}
