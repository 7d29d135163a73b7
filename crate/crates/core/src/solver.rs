//! Accelerated proximal linearized alternating minimization over `(U, V)`.
//!
//! Each iteration extrapolates both factors with the momentum weight
//! `(t_{k-1} - 1) / t_k`, takes a linearized prox step in `U` at `(U~, V)`,
//! then one in `V` at `(U+, V~)`, and advances
//! `t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`.
//!
//! The balance term is quartic, so there is no global Lipschitz constant for
//! the partial gradients. Step constants start from a local curvature bound
//! (see [`estimate_step_constants`]) and are enforced by a backtracking
//! majorization check. When a step increases the objective, the momentum is
//! reset and the step retaken without extrapolation.

use std::time::Instant;

use thiserror::Error;

use crate::dense::{self, DenseMatrix};
use crate::objective::{balance, FactorPair, ModelSpec, ObjectiveError};
use crate::prox::{prox_matrix, ProxRequest};
use crate::sampling::SamplingOperator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("iterates diverged (non-finite values) at iteration {iter}")]
    Divergence { iter: usize },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

impl From<crate::dense::DenseError> for SolverError {
    fn from(e: crate::dense::DenseError) -> Self {
        SolverError::Objective(e.into())
    }
}

impl From<crate::sampling::SamplingError> for SolverError {
    fn from(e: crate::sampling::SamplingError) -> Self {
        SolverError::Objective(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepInit {
    /// Local curvature bound at the current point.
    Auto,
    /// User-supplied starting constants (still backtracked).
    Fixed { lu: f64, lv: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub step_init: StepInit,
    pub backtrack_factor: f64,
    pub restart_on_increase: bool,
    /// `false` fixes `t_k = 1`, which is the plain (non-accelerated) method.
    pub extrapolate: bool,
    /// Reuse the last accepted step constant, relaxed by `1/backtrack_factor^(1/4)`
    /// and capped by the curvature bound. With `false` every iteration starts
    /// from the bound.
    pub adaptive_steps: bool,
    /// Store iterates for the distance-to-final backfill.
    pub record_iterates: bool,
    /// Upper limit on stored iterate memory; the stride doubles when exceeded.
    pub iterate_budget_bytes: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            max_iters: 20_000,
            step_init: StepInit::Auto,
            backtrack_factor: 2.0,
            restart_on_increase: true,
            extrapolate: true,
            adaptive_steps: true,
            record_iterates: true,
            iterate_budget_bytes: 256 << 20,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.epsilon > 0.0) {
            return Err(SolverError::Config(format!("epsilon = {} must be > 0", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(SolverError::Config("max_iters must be >= 1".into()));
        }
        if !(self.backtrack_factor > 1.0) {
            return Err(SolverError::Config(format!(
                "backtrack factor {} must exceed 1",
                self.backtrack_factor
            )));
        }
        if let StepInit::Fixed { lu, lv } = self.step_init {
            if !(lu > 0.0 && lv > 0.0) {
                return Err(SolverError::Config("fixed step constants must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Iterate plus momentum bookkeeping.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub w: FactorPair,
    pub w_prev: FactorPair,
    /// `t_k`
    pub t_k: f64,
    /// `t_{k-1}`
    pub t_prev: f64,
    pub iter: usize,
    /// Step constants accepted in the last step.
    pub lu: f64,
    pub lv: f64,
    /// Momentum weight actually used by the step that produced `w`.
    pub beta_used: f64,
    /// Scaled objective at `w`.
    pub objective: f64,
}

impl SolverState {
    /// `(U^{-1}, V^{-1}) = (U^0, V^0)` and `t_0 = t_{-1} = 1`.
    pub fn initial(spec: &ModelSpec, w0: FactorPair) -> Result<Self, SolverError> {
        let objective = spec.full_value(&w0)?.scaled;
        let (lu, lv) = estimate_step_constants(spec, &w0)?;
        Ok(Self {
            w_prev: w0.clone(),
            w: w0,
            t_k: 1.0,
            t_prev: 1.0,
            iter: 0,
            lu,
            lv,
            beta_used: 0.0,
            objective,
        })
    }
}

/// `t_{k+1}` from `t_k`.
pub fn next_t(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub u: f64,
    pub v: f64,
}

/// Result of one iteration.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SolverState,
    pub residuals: Residuals,
    pub restarted: bool,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    Budget,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::Budget => "budget",
        })
    }
}

/// One row of the solve trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub obj_scaled: f64,
    pub obj_paper: f64,
    pub res_u: f64,
    pub res_v: f64,
    pub nnz_u: usize,
    pub nnz_v: usize,
    /// `||U^k - U^f||_F`; NaN for iterates that were not stored.
    pub dist_u_final: f64,
    pub dist_v_final: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub records: Vec<IterRecord>,
    /// Every `iterate_stride`-th iterate has backfilled distances.
    pub iterate_stride: usize,
    pub restarts: usize,
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub w: FactorPair,
    pub trace: SolveTrace,
    pub termination: Termination,
    pub iterations: usize,
}

/// Balanced spectral start: `(P diag(sqrt(sigma^kappa)), Q diag(sqrt(sigma^kappa)))`
/// from the SVD of `X0 = A*(b)`.
pub fn initial_point(op: &SamplingOperator, b: &[f64], kappa: usize) -> Result<FactorPair, SolverError> {
    let (m, n) = op.shape();
    if kappa == 0 || kappa > m.min(n) {
        return Err(SolverError::Config(format!(
            "kappa = {kappa} must lie in [1, {}]",
            m.min(n)
        )));
    }
    let x0 = op.adjoint(b)?;
    let s = dense::svd(&x0)?;
    Ok(balanced_from_svd(&s, kappa))
}

pub(crate) fn balanced_from_svd(s: &dense::SvdResult, kappa: usize) -> FactorPair {
    let mut u = s.p.columns(0, kappa);
    let mut v = s.q.columns(0, kappa);
    for j in 0..kappa {
        let r = s.sigma[j].sqrt();
        u.col_mut(j).iter_mut().for_each(|x| *x *= r);
        v.col_mut(j).iter_mut().for_each(|x| *x *= r);
    }
    FactorPair { u, v }
}

const STEP_MARGIN: f64 = 1.1;
const STEP_FLOOR: f64 = 1e-8;

fn spectral_sq_of_gram(z: &DenseMatrix) -> Result<f64, SolverError> {
    let g = dense::matmul(z, z, true, false)?;
    Ok(dense::svd(&g)?.sigma[0])
}

/// Local curvature bounds for `nabla_U Phi(., V)` and `nabla_V Phi(U, .)`:
/// `L_U = 1.1 (||A||^2 ||V||^2 + mu (2 ||U||^2 + ||U^T U - V^T V||))`, floored
/// at `1e-8`. The DC tilt only lowers the curvature, so it is ignored.
pub fn estimate_step_constants(spec: &ModelSpec, w: &FactorPair) -> Result<(f64, f64), SolverError> {
    let a = spec.op.operator_norm();
    step_bounds(spec, &w.u, &w.v, a * a)
}

fn step_bounds(spec: &ModelSpec, u: &DenseMatrix, v: &DenseMatrix, a_sq: f64) -> Result<(f64, f64), SolverError> {
    let mu = spec.params.mu_tilde();
    let su = spectral_sq_of_gram(u)?;
    let sv = spectral_sq_of_gram(v)?;
    let bal = dense::svd(&balance(u, v))?.sigma[0];
    let lu = STEP_MARGIN * (a_sq * sv + mu * (2.0 * su + bal));
    let lv = STEP_MARGIN * (a_sq * su + mu * (2.0 * sv + bal));
    Ok((lu.max(STEP_FLOOR), lv.max(STEP_FLOOR)))
}

/// Whether `Phi(U', V) <= Phi(U, V) + <grad, U' - U> + (L/2) ||U' - U||^2`.
pub fn u_majorization_holds(
    spec: &ModelSpec,
    w: &FactorPair,
    u_new: &DenseMatrix,
    lu: f64,
) -> Result<bool, SolverError> {
    let r0 = spec.residual(&w.u, &w.v)?;
    let g = spec.grad_u_from(&w.u, &w.v, &r0, &balance(&w.u, &w.v), true)?;
    let r1 = spec.residual(u_new, &w.v)?;
    let delta = spec.smooth_delta((&w.u, &w.v, &r0), (u_new, &w.v, &r1));
    Ok(majorized(delta, &g, &u_new.sub(&w.u), lu))
}

/// `delta <= <g, d> + (L/2) ||d||^2` up to a few ulps of the terms involved.
fn majorized(delta: f64, g: &DenseMatrix, d: &DenseMatrix, l: f64) -> bool {
    let lin = g.frob_dot(d);
    let quad = 0.5 * l * d.frob_dot(d);
    delta - lin <= quad + 1e-14 * (lin.abs() + quad + delta.abs())
}

fn extrapolate(cur: &DenseMatrix, prev: &DenseMatrix, beta: f64) -> DenseMatrix {
    let mut out = cur.clone();
    if beta != 0.0 {
        out.axpy(beta, &cur.sub(prev));
    }
    out
}

/// One prox-gradient block update with backtracking.
struct BlockUpdate {
    z_new: DenseMatrix,
    step: f64,
    grad: DenseMatrix,
    residual_new: Vec<f64>,
    backtracks: usize,
}

#[allow(clippy::too_many_arguments)]
fn block_update(
    spec: &ModelSpec,
    cfg: &SolverConfig,
    is_u: bool,
    point: &DenseMatrix,
    other: &DenseMatrix,
    step0: f64,
    iter: usize,
) -> Result<BlockUpdate, SolverError> {
    let (u, v) = if is_u { (point, other) } else { (other, point) };
    let r0 = spec.residual(u, v)?;
    let phi0 = spec.smooth_from_residual(u, v, &r0);
    if !phi0.is_finite() {
        return Err(SolverError::Divergence { iter });
    }
    let bal = balance(u, v);
    let grad = if is_u {
        spec.grad_u_from(u, v, &r0, &bal, true)?
    } else {
        spec.grad_v_from(u, v, &r0, &bal, true)?
    };
    let mut step = step0;
    let cap = step0 * 2f64.powi(60);
    let mut backtracks = 0;
    loop {
        let mut z = point.clone();
        z.axpy(-1.0 / step, &grad);
        let z_new = prox_matrix(&ProxRequest {
            z: &z,
            step,
            params: spec.params,
            model: spec.model,
        });
        if !z_new.is_finite() {
            return Err(SolverError::Divergence { iter });
        }
        let (un, vn) = if is_u { (&z_new, other) } else { (other, &z_new) };
        let r1 = spec.residual(un, vn)?;
        let delta = spec.smooth_delta((u, v, &r0), (un, vn, &r1));
        if !delta.is_finite() {
            return Err(SolverError::Divergence { iter });
        }
        if majorized(delta, &grad, &z_new.sub(point), step) || step >= cap {
            return Ok(BlockUpdate {
                z_new,
                step,
                grad,
                residual_new: r1,
                backtracks,
            });
        }
        step *= cfg.backtrack_factor;
        backtracks += 1;
    }
}

struct Attempt {
    state: SolverState,
    residuals: Residuals,
    backtracks: usize,
}

fn attempt(
    spec: &ModelSpec,
    cfg: &SolverConfig,
    st: &SolverState,
    beta: f64,
    a_sq: f64,
) -> Result<Attempt, SolverError> {
    let iter = st.iter + 1;
    let u_t = extrapolate(&st.w.u, &st.w_prev.u, beta);
    let v_t = extrapolate(&st.w.v, &st.w_prev.v, beta);

    let (bound_u, _) = step_bounds(spec, &u_t, &st.w.v, a_sq)?;
    let lu0 = start_step(cfg, bound_u, st.lu, st.iter, true);
    let up = block_update(spec, cfg, true, &u_t, &st.w.v, lu0, iter)?;
    let u_new = up.z_new;

    let (_, bound_v) = step_bounds(spec, &u_new, &v_t, a_sq)?;
    let lv0 = start_step(cfg, bound_v, st.lv, st.iter, false);
    let vp = block_update(spec, cfg, false, &v_t, &u_new, lv0, iter)?;
    let v_new = vp.z_new;

    // residual at (U+, V+) was computed by the last accepted V trial
    let r_new = vp.residual_new;
    let smooth_new = spec.smooth_from_residual(&u_new, &v_new, &r_new);
    let w_new = FactorPair { u: u_new, v: v_new };
    let objective = spec.full_from_smooth(smooth_new, &w_new).scaled;
    if !objective.is_finite() {
        return Err(SolverError::Divergence { iter });
    }

    let bal_new = balance(&w_new.u, &w_new.v);
    let gu_new = spec.grad_u_from(&w_new.u, &w_new.v, &r_new, &bal_new, true)?;
    let gv_new = spec.grad_v_from(&w_new.u, &w_new.v, &r_new, &bal_new, true)?;
    let denom = 1.0 + dense::norm2(&spec.b);
    let res_u = residual_norm(&up.grad, &gu_new, up.step, &w_new.u, &u_t) / denom;
    let res_v = residual_norm(&vp.grad, &gv_new, vp.step, &w_new.v, &v_t) / denom;

    let state = SolverState {
        w_prev: st.w.clone(),
        w: w_new,
        t_k: st.t_k,
        t_prev: st.t_prev,
        iter,
        lu: up.step,
        lv: vp.step,
        beta_used: beta,
        objective,
    };
    Ok(Attempt {
        state,
        residuals: Residuals { u: res_u, v: res_v },
        backtracks: up.backtracks + vp.backtracks,
    })
}

fn start_step(cfg: &SolverConfig, bound: f64, last: f64, iter: usize, is_u: bool) -> f64 {
    if iter == 0 {
        if let StepInit::Fixed { lu, lv } = cfg.step_init {
            return if is_u { lu } else { lv };
        }
    }
    if cfg.adaptive_steps && iter > 0 {
        let relaxed = last / cfg.backtrack_factor.powf(0.25);
        relaxed.min(bound).max(STEP_FLOOR)
    } else {
        bound
    }
}

/// `||g_tilde - g_new + L (Z_new - Z_tilde)||_F`.
fn residual_norm(g_tilde: &DenseMatrix, g_new: &DenseMatrix, l: f64, z_new: &DenseMatrix, z_tilde: &DenseMatrix) -> f64 {
    let mut r = g_tilde.sub(g_new);
    r.axpy(l, &z_new.sub(z_tilde));
    r.frobenius_norm()
}

/// One full `U`-then-`V` update.
pub fn step(spec: &ModelSpec, cfg: &SolverConfig, st: &SolverState) -> Result<StepOutcome, SolverError> {
    let a = spec.op.operator_norm();
    step_with_norm(spec, cfg, st, a * a)
}

fn step_with_norm(
    spec: &ModelSpec,
    cfg: &SolverConfig,
    st: &SolverState,
    a_sq: f64,
) -> Result<StepOutcome, SolverError> {
    let beta = if cfg.extrapolate {
        (st.t_prev - 1.0) / st.t_k
    } else {
        0.0
    };
    let mut att = attempt(spec, cfg, st, beta, a_sq)?;
    let mut restarted = false;
    let mut t_k = st.t_k;
    if cfg.restart_on_increase && beta > 0.0 && att.state.objective > st.objective {
        let retry = attempt(spec, cfg, st, 0.0, a_sq)?;
        att = Attempt {
            backtracks: att.backtracks + retry.backtracks,
            ..retry
        };
        restarted = true;
        t_k = 1.0;
    }
    let mut state = att.state;
    if cfg.extrapolate {
        state.t_prev = t_k;
        state.t_k = next_t(t_k);
    } else {
        state.t_prev = 1.0;
        state.t_k = 1.0;
    }
    Ok(StepOutcome {
        state,
        residuals: att.residuals,
        restarted,
        backtracks: att.backtracks,
    })
}

/// Stopping residuals of the step `st_prev -> st_new`, recomputed from scratch:
/// `||grad_U Phi(U~, V^k) - grad_U Phi(U+, V+) + L_U (U+ - U~)|| / (1 + ||b||)`
/// and the `V` analogue with `grad_V Phi(U+, V~)`.
pub fn stopping_residuals(
    spec: &ModelSpec,
    st_prev: &SolverState,
    st_new: &SolverState,
) -> Result<Residuals, SolverError> {
    let beta = st_new.beta_used;
    let u_t = extrapolate(&st_prev.w.u, &st_prev.w_prev.u, beta);
    let v_t = extrapolate(&st_prev.w.v, &st_prev.w_prev.v, beta);
    let (un, vn) = (&st_new.w.u, &st_new.w.v);
    let g_ut = spec.smooth_gradient(&FactorPair {
        u: u_t.clone(),
        v: st_prev.w.v.clone(),
    })?;
    let g_vt = spec.smooth_gradient(&FactorPair {
        u: un.clone(),
        v: v_t.clone(),
    })?;
    let g_new = spec.smooth_gradient(&st_new.w)?;
    let denom = 1.0 + dense::norm2(&spec.b);
    Ok(Residuals {
        u: residual_norm(&g_ut.grad_u, &g_new.grad_u, st_new.lu, un, &u_t) / denom,
        v: residual_norm(&g_vt.grad_v, &g_new.grad_v, st_new.lv, vn, &v_t) / denom,
    })
}

/// Runs until both stopping residuals are `<= epsilon` or the iteration budget
/// is spent. `w0 = None` uses [`initial_point`] with the spec's kappa taken
/// from `kappa`.
pub fn solve(
    spec: &ModelSpec,
    cfg: &SolverConfig,
    w0: Option<FactorPair>,
    kappa: usize,
) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    let w0 = match w0 {
        Some(w) => {
            spec.check(&w)?;
            w
        }
        None => initial_point(&spec.op, &spec.b, kappa)?,
    };
    let (m, n) = spec.op.shape();
    let a = spec.op.operator_norm();
    let a_sq = a * a;
    let mut st = SolverState::initial(spec, w0)?;
    let start = Instant::now();
    let mut trace = SolveTrace {
        iterate_stride: if m * n <= 1_000_000 { 1 } else { 10 },
        ..Default::default()
    };
    let iterate_bytes = (m + n) * st.w.kappa() * 8;
    let mut stored: Vec<(usize, FactorPair)> = Vec::new();
    let mut termination = Termination::Budget;

    for _ in 0..cfg.max_iters {
        let out = step_with_norm(spec, cfg, &st, a_sq)?;
        st = out.state;
        trace.restarts += usize::from(out.restarted);
        trace.backtracks += out.backtracks;
        let obj = spec.normalize(st.objective);
        let (nnz_u, nnz_v) = st.w.column_counts(0.0);
        trace.records.push(IterRecord {
            iter: st.iter,
            obj_scaled: obj.scaled,
            obj_paper: obj.nu_scaled,
            res_u: out.residuals.u,
            res_v: out.residuals.v,
            nnz_u,
            nnz_v,
            dist_u_final: f64::NAN,
            dist_v_final: f64::NAN,
            time_s: start.elapsed().as_secs_f64(),
        });
        if cfg.record_iterates && st.iter % trace.iterate_stride == 0 {
            stored.push((st.iter, st.w.clone()));
            if stored.len() * iterate_bytes > cfg.iterate_budget_bytes {
                trace.iterate_stride *= 2;
                let stride = trace.iterate_stride;
                stored.retain(|(k, _)| k % stride == 0);
            }
        }
        if out.residuals.u <= cfg.epsilon && out.residuals.v <= cfg.epsilon {
            termination = Termination::Converged;
            break;
        }
    }

    let last = st.iter;
    if cfg.record_iterates {
        if stored.last().map(|(k, _)| *k) != Some(last) {
            stored.push((last, st.w.clone()));
        }
        for (k, w) in &stored {
            let rec = &mut trace.records[*k - 1];
            rec.dist_u_final = w.u.sub(&st.w.u).frobenius_norm();
            rec.dist_v_final = w.v.sub(&st.w.v).frobenius_norm();
        }
    }
    Ok(SolveResult {
        w: st.w,
        trace,
        termination,
        iterations: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Model;
    use crate::penalty::PenaltyParams;

    fn full_spec(m: &DenseMatrix, lambda: f64, mu: f64) -> ModelSpec {
        let op = SamplingOperator::full(m.rows(), m.cols());
        let b = op.apply(m).unwrap();
        ModelSpec::new(Model::L20, op, b, PenaltyParams::l20(lambda, mu).unwrap()).unwrap()
    }

    #[test]
    fn t_sequence() {
        assert!((next_t(1.0) - 1.618_033_988_749_895).abs() < 1e-15);
    }

    #[test]
    fn initial_point_of_diagonal() {
        let m = DenseMatrix::diag(&[3.0, 1.0]);
        let op = SamplingOperator::full(2, 2);
        let b = op.apply(&m).unwrap();
        let w = initial_point(&op, &b, 2).unwrap();
        assert!((w.u[(0, 0)].abs() - 3f64.sqrt()).abs() < 1e-14);
        assert!((w.u[(1, 1)].abs() - 1.0).abs() < 1e-14);
        assert!(w.balance().frobenius_norm() < 1e-14);
        assert!(w.product().sub(&m).frobenius_norm() < 1e-14);
    }

    #[test]
    fn initial_point_rank_one_exact() {
        let m = DenseMatrix::from_fn(4, 3, |i, j| (i as f64 + 1.0) * (2.0 - j as f64));
        let op = SamplingOperator::full(4, 3);
        let b = op.apply(&m).unwrap();
        let w = initial_point(&op, &b, 1).unwrap();
        assert!(w.product().sub(&m).frobenius_norm() < 1e-12 * m.frobenius_norm());
    }

    #[test]
    fn first_extrapolation_is_identity() {
        let m = DenseMatrix::diag(&[2.0, 1.0, 0.5]);
        let spec = full_spec(&m, 0.1, 0.1);
        let w0 = initial_point(&spec.op, &spec.b, 2).unwrap();
        let st = SolverState::initial(&spec, w0).unwrap();
        let cfg = SolverConfig::default();
        let out = step(&spec, &cfg, &st).unwrap();
        assert_eq!(out.state.beta_used, 0.0);
        assert!((out.state.t_k - next_t(1.0)).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_stays_put() {
        let m = DenseMatrix::diag(&[2.0, 1.0]);
        let spec = full_spec(&m, 0.01, 0.5);
        let w = FactorPair::new(DenseMatrix::diag(&[2f64.sqrt(), 1.0]), DenseMatrix::diag(&[2f64.sqrt(), 1.0])).unwrap();
        let st = SolverState::initial(&spec, w.clone()).unwrap();
        let out = step(&spec, &SolverConfig::default(), &st).unwrap();
        assert!(out.state.w.distance(&w) < 1e-14);
        assert!(out.residuals.u < 1e-14 && out.residuals.v < 1e-14);
    }

    #[test]
    fn step_constant_cases() {
        let spec = full_spec(&DenseMatrix::identity(3), 1.0, 0.0);
        let (lu, lv) = estimate_step_constants(&spec, &FactorPair::zeros(3, 3, 2)).unwrap();
        assert_eq!((lu, lv), (1e-8, 1e-8));
        let w = FactorPair::new(DenseMatrix::zeros(3, 3), DenseMatrix::identity(3)).unwrap();
        let (lu, _) = estimate_step_constants(&spec, &w).unwrap();
        assert!((lu - 1.1).abs() < 1e-14);
    }

    #[test]
    fn huge_epsilon_stops_after_one_iteration() {
        let m = DenseMatrix::diag(&[2.0, 1.0, 0.5]);
        let spec = full_spec(&m, 0.1, 0.1);
        let cfg = SolverConfig {
            epsilon: 1e3,
            ..Default::default()
        };
        let res = solve(&spec, &cfg, None, 2).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.termination, Termination::Converged);
        assert_eq!(res.trace.records.len(), 1);
    }

    #[test]
    fn budget_of_one() {
        let m = DenseMatrix::diag(&[2.0, 1.0, 0.5]);
        let spec = full_spec(&m, 0.1, 0.1);
        let cfg = SolverConfig {
            max_iters: 1,
            ..Default::default()
        };
        let w0 = FactorPair::new(DenseMatrix::identity(3), DenseMatrix::identity(3)).unwrap();
        let res = solve(&spec, &cfg, Some(w0), 3).unwrap();
        assert_eq!(res.termination, Termination::Budget);
        assert_eq!(res.trace.records.len(), 1);
        assert_eq!(res.trace.records[0].dist_u_final, 0.0);
    }

    #[test]
    fn invalid_config() {
        let spec = full_spec(&DenseMatrix::identity(2), 0.1, 0.1);
        let cfg = SolverConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(matches!(solve(&spec, &cfg, None, 1), Err(SolverError::Config(_))));
        assert!(matches!(
            initial_point(&spec.op, &spec.b, 3),
            Err(SolverError::Config(_))
        ));
    }
}
