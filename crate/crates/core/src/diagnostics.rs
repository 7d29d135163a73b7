//! Stationarity measures, KL moduli and probes, exact-penalty thresholds and
//! optimal-set certificates.
//!
//! Distances and objective gaps here use the `nu`-normalization
//! (`nu = 1/lambda`, `mu = mu_tilde / lambda`), in which the column penalty
//! weight is 1/2 per nonzero column.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dense::{self, DenseMatrix};
use crate::exec::Exec;
use crate::objective::{FactorPair, Model, ModelSpec, ObjectiveError};
use crate::penalty::PenaltyParams;
use crate::sampling::SamplingOperator;
use crate::solver::balanced_from_svd;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("no admissible samples among {drawn} draws")]
    NoAdmissibleSamples { drawn: usize },
    #[error("the nu-normalization needs lambda > 0")]
    NeedsLambda,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

impl From<dense::DenseError> for DiagnosticsError {
    fn from(e: dense::DenseError) -> Self {
        DiagnosticsError::Objective(e.into())
    }
}

fn nu_of(spec: &ModelSpec) -> Result<f64, DiagnosticsError> {
    let lambda = spec.params.lambda();
    if lambda > 0.0 {
        Ok(1.0 / lambda)
    } else {
        Err(DiagnosticsError::NeedsLambda)
    }
}

/// Singular values at or below this fraction of `sigma_1` count as zero.
pub const RANK_CUTOFF: f64 = 1e-8;

/// `(P_k diag(sqrt(sigma)), Q_k diag(sqrt(sigma)))` from the SVD of `x`, with
/// the columns of numerically zero singular values set exactly to zero.
pub fn build_balanced_factors(x: &DenseMatrix, kappa: usize) -> Result<FactorPair, DiagnosticsError> {
    let (m, n) = x.shape();
    if kappa == 0 || kappa > m.min(n) {
        return Err(DiagnosticsError::BadArgument(format!(
            "kappa = {kappa} must lie in [1, {}]",
            m.min(n)
        )));
    }
    let s = dense::svd(x)?;
    let mut w = balanced_from_svd(&s, kappa);
    let cut = RANK_CUTOFF * s.sigma.first().copied().unwrap_or(0.0);
    for j in 0..kappa {
        if s.sigma[j] <= cut {
            w.u.col_mut(j).fill(0.0);
            w.v.col_mut(j).fill(0.0);
        }
    }
    Ok(w)
}

fn nonzero_columns_sq(g: &DenseMatrix, z: &DenseMatrix) -> f64 {
    (0..z.cols())
        .filter(|&j| z.col(j).iter().any(|&x| x != 0.0))
        .map(|j| dense::dot(g.col(j), g.col(j)))
        .sum()
}

/// `dist(0, dPsi(U, V))`: the smooth gradient restricted to nonzero columns
/// (a zero column's subdifferential component is the whole space).
pub fn subdiff_distance_psi(spec: &ModelSpec, w: &FactorPair) -> Result<f64, DiagnosticsError> {
    if spec.model != Model::L20 {
        return Err(DiagnosticsError::BadArgument("subdiff_distance_psi needs the l2,0 model".into()));
    }
    let nu = nu_of(spec)?;
    let g = spec.smooth_gradient(w)?;
    let sq = nonzero_columns_sq(&g.grad_u, &w.u) + nonzero_columns_sq(&g.grad_v, &w.v);
    Ok(nu * sq.sqrt())
}

/// Distance to the outer approximation of the DC subdifferential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdiffBracket {
    /// A lower bound on `dist(0, dTheta)`; equal to it when `exact`.
    pub value: f64,
    /// No zero columns were present.
    pub exact: bool,
}

/// Nonzero column `j` contributes `nu g_j + (rho/2) theta'(rho ||U_j||) U_j/||U_j||`;
/// a zero column contributes `max(0, nu ||g_j|| - rho/2)`, the distance from
/// `nu g_j` to the ball of radius `rho theta'(0) / 2`.
pub fn subdiff_distance_theta_upper(spec: &ModelSpec, w: &FactorPair) -> Result<SubdiffBracket, DiagnosticsError> {
    if spec.model != Model::Dc {
        return Err(DiagnosticsError::BadArgument("subdiff_distance_theta_upper needs the DC model".into()));
    }
    let nu = nu_of(spec)?;
    let p = spec.params;
    let g = spec.loss_balance_gradient(w)?;
    let mut sq = 0.0;
    let mut exact = true;
    for (grad, z) in [(&g.grad_u, &w.u), (&g.grad_v, &w.v)] {
        for j in 0..z.cols() {
            let col = z.col(j);
            let nrm = dense::norm2(col);
            if nrm == 0.0 {
                exact = false;
                let d = (nu * dense::norm2(grad.col(j)) - 0.5 * p.rho()).max(0.0);
                sq += d * d;
            } else {
                let coef = 0.5 * p.rho() * p.theta_prime_plus(p.rho() * nrm) / nrm;
                sq += grad
                    .col(j)
                    .iter()
                    .zip(col)
                    .map(|(&gi, &ui)| {
                        let c = nu * gi + coef * ui;
                        c * c
                    })
                    .sum::<f64>();
            }
        }
    }
    Ok(SubdiffBracket {
        value: sq.sqrt(),
        exact,
    })
}

/// `Psi(W) - Psi(Wbar)` (or the DC analogue) in the `nu`-normalization. The
/// smooth and penalty differences are formed separately so that equal column
/// supports cancel exactly.
pub fn objective_gap(spec: &ModelSpec, w: &FactorPair, wbar: &FactorPair) -> Result<f64, DiagnosticsError> {
    let nu = nu_of(spec)?;
    let smooth = spec.smooth_value(w)? - spec.smooth_value(wbar)?;
    let pen = (spec.column_penalty(&w.u) - spec.column_penalty(&wbar.u))
        + (spec.column_penalty(&w.v) - spec.column_penalty(&wbar.v));
    Ok(nu * (smooth + pen))
}

/// Moduli of the local error-bound (KL exponent 1/2) inequalities and the
/// flags for their hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlModuli {
    /// For the l2,0 model.
    pub gamma: f64,
    /// For the DC surrogate; equals `gamma` when no penalty parameters were given.
    pub gamma_prime: f64,
    /// `beta/alpha` is below the restricted condition-number bound.
    pub condition_ok: bool,
    /// `alpha > 4 / (nu sigma_r^2)`.
    pub alpha_ok: bool,
    pub sigma1: f64,
    pub sigma_r: f64,
    pub r: usize,
    pub nu: f64,
    pub mu: f64,
}

impl KlModuli {
    pub fn hypotheses_ok(&self) -> bool {
        self.condition_ok && self.alpha_ok
    }

    /// Neighbourhood radius for the l2,0 inequality, `sqrt(sigma_r)/4`.
    pub fn radius(&self) -> f64 {
        self.sigma_r.sqrt() / 4.0
    }

    /// Neighbourhood radius for the DC inequality:
    /// `min(sqrt(sigma_r)/4, varpi/rho, c rho / (4 sqrt(nu) ||A|| + 16 mu sigma_1))`
    /// with `c = 1` and `varpi = 2/(a+1)`.
    pub fn radius_dc(&self, op_norm: f64, params: &PenaltyParams) -> f64 {
        let rho = params.rho();
        let third = rho / (4.0 * self.nu.sqrt() * op_norm + 16.0 * self.mu * self.sigma1);
        self.radius().min(params.lower_break() / rho).min(third)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn kl_moduli(
    sigma1: f64,
    sigma_r: f64,
    r: usize,
    nu: f64,
    mu: f64,
    alpha: f64,
    beta: f64,
    params: Option<&PenaltyParams>,
) -> Result<KlModuli, DiagnosticsError> {
    if !(sigma1 >= sigma_r && sigma_r > 0.0) {
        return Err(DiagnosticsError::BadArgument(format!(
            "need sigma1 >= sigma_r > 0 (got {sigma1}, {sigma_r})"
        )));
    }
    if !(alpha > 0.0 && alpha <= beta) {
        return Err(DiagnosticsError::BadArgument(format!(
            "need 0 < alpha <= beta (got {alpha}, {beta})"
        )));
    }
    if !(nu > 0.0 && mu >= 0.0) {
        return Err(DiagnosticsError::BadArgument(format!("need nu > 0, mu >= 0 (got {nu}, {mu})")));
    }
    let s4 = sigma_r.powi(4);
    let k = 128.0 * sigma1 * sigma1 * (4.0 * sigma1 + sigma_r).powi(2);
    let inner = (beta + alpha) * s4 / (128.0 * sigma1.powf(1.5) * (4.0 * sigma1 + sigma_r).powi(2))
        - sigma1.sqrt() * (beta - alpha);
    // the bracket is positive exactly when the condition-number hypothesis
    // holds; outside it no modulus is guaranteed
    let inner = inner.max(0.0);
    let first = (nu / beta) * inner * inner;
    let gamma = first.min(2.0 * mu * sigma_r);
    let gamma_prime = match params {
        Some(p) => gamma.min(32.0 / (p.rho() * p.rho())),
        None => gamma,
    };
    Ok(KlModuli {
        gamma,
        gamma_prime,
        condition_ok: beta / alpha < (k + s4) / (k - s4),
        alpha_ok: alpha > 4.0 / (nu * sigma_r * sigma_r),
        sigma1,
        sigma_r,
        r,
        nu,
        mu,
    })
}

/// Outcome of [`kl_inequality_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    /// `min dist^2 - gamma * gap` over kept samples.
    pub worst_slack: f64,
    pub kept: usize,
    pub drawn: usize,
    pub radius: f64,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub samples: usize,
    pub max_draws: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            samples: 100,
            max_draws: 100_000,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

const PROBE_BATCH: usize = 256;

/// Samples `W = Wbar + D` with `D` uniform in the Frobenius ball of the
/// theorem's radius and keeps samples whose gap lies in `(0, 1/2)`.
///
/// For the l2,0 model `D` lives on the support columns of `Wbar`: turning on
/// a zero column adds `1/2` to the gap, so such samples are never admissible.
pub fn kl_inequality_probe(
    spec: &ModelSpec,
    wbar: &FactorPair,
    moduli: &KlModuli,
    opts: &ProbeOptions,
) -> Result<ProbeReport, DiagnosticsError> {
    spec.check(wbar)?;
    let (radius, gamma) = match spec.model {
        Model::L20 => (moduli.radius(), moduli.gamma),
        Model::Dc => (
            moduli.radius_dc(spec.op.operator_norm(), &spec.params),
            moduli.gamma_prime,
        ),
    };
    let support: Vec<usize> = match spec.model {
        Model::L20 => (0..wbar.kappa())
            .filter(|&j| wbar.u.col(j).iter().chain(wbar.v.col(j)).any(|&x| x != 0.0))
            .collect(),
        Model::Dc => (0..wbar.kappa()).collect(),
    };
    let (m, n) = spec.op.shape();
    let dim = (m + n) * support.len();

    let sample = |s: usize| -> Result<Option<f64>, DiagnosticsError> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(s as u64 + 1);
        let mut d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = dense::norm2(&d);
        let scale = radius * rng.random::<f64>().powf(1.0 / dim as f64) / nrm;
        d.iter_mut().for_each(|x| *x *= scale);
        let mut w = wbar.clone();
        for (k, &j) in support.iter().enumerate() {
            let base = k * (m + n);
            dense::axpy(1.0, &d[base..base + m], w.u.col_mut(j));
            dense::axpy(1.0, &d[base + m..base + m + n], w.v.col_mut(j));
        }
        let gap = objective_gap(spec, &w, wbar)?;
        if !(gap > 0.0 && gap < 0.5) {
            return Ok(None);
        }
        let dist = match spec.model {
            Model::L20 => subdiff_distance_psi(spec, &w)?,
            Model::Dc => subdiff_distance_theta_upper(spec, &w)?.value,
        };
        Ok(Some(dist * dist - gamma * gap))
    };

    let mut slacks = Vec::with_capacity(opts.samples);
    let mut drawn = 0;
    while slacks.len() < opts.samples && drawn < opts.max_draws {
        let batch = PROBE_BATCH.min(opts.max_draws - drawn);
        let results = opts.exec.map_indexed(batch, |i| sample(drawn + i));
        for res in results {
            drawn += 1;
            if let Some(slack) = res? {
                slacks.push(slack);
                if slacks.len() == opts.samples {
                    break;
                }
            }
        }
    }
    if slacks.is_empty() {
        return Err(DiagnosticsError::NoAdmissibleSamples { drawn });
    }
    Ok(ProbeReport {
        worst_slack: slacks.iter().copied().fold(f64::INFINITY, f64::min),
        kept: slacks.len(),
        drawn,
        radius,
        gamma,
        seed: opts.seed,
    })
}

/// One point of the degenerate-critical-point sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub gap: f64,
    pub dist: f64,
    /// `dist^2 - gamma * gap` for each requested `gamma`.
    pub slacks: Vec<f64>,
}

/// Walks `W(t) = Wbar + t (D, D)` for each `t` and evaluates gap, distance
/// and the KL slack for every `gamma`.
pub fn kl_curve(
    spec: &ModelSpec,
    wbar: &FactorPair,
    direction: &DenseMatrix,
    ts: &[f64],
    gammas: &[f64],
) -> Result<Vec<CurvePoint>, DiagnosticsError> {
    ts.iter()
        .map(|&t| {
            let mut w = wbar.clone();
            w.u.axpy(t, direction);
            w.v.axpy(t, direction);
            let gap = objective_gap(spec, &w, wbar)?;
            let dist = subdiff_distance_psi(spec, &w)?;
            Ok(CurvePoint {
                t,
                gap,
                dist,
                slacks: gammas.iter().map(|g| dist * dist - g * gap).collect(),
            })
        })
        .collect()
}

/// The degenerate critical point: full sampling of `M = 4E` (`E` the 4x4
/// all-ones matrix), `Wbar = (E, E)`, and the direction `D` with the block
/// `[[1, -1], [-1, 1]]` in its top-left corner.
pub fn degenerate_example(nu: f64, mu: f64) -> Result<(ModelSpec, FactorPair, DenseMatrix), DiagnosticsError> {
    if !(nu > 0.0 && mu >= 0.0) {
        return Err(DiagnosticsError::BadArgument(format!("need nu > 0, mu >= 0 (got {nu}, {mu})")));
    }
    let e = DenseMatrix::from_fn(4, 4, |_, _| 1.0);
    let m = e.scaled(4.0);
    let op = SamplingOperator::full(4, 4);
    let b = op.apply(&m).map_err(ObjectiveError::from)?;
    let params = PenaltyParams::l20(1.0 / nu, mu / nu).map_err(|e| DiagnosticsError::BadArgument(e.to_string()))?;
    let spec = ModelSpec::new(Model::L20, op, b, params)?;
    let d = DenseMatrix::from_fn(4, 4, |i, j| match (i, j) {
        (0, 0) | (1, 1) => 1.0,
        (0, 1) | (1, 0) => -1.0,
        _ => 0.0,
    });
    Ok((spec, FactorPair { u: e.clone(), v: e }, d))
}

/// ```text
/// rho_bar = max(1, sqrt(nu) ||A|| sqrt(kappa) / (sqrt(nu alpha) sigma_r - sqrt 2)
///                  * sqrt(1 + 2 sqrt(r)/sqrt(mu))) * phi'_-(1)
/// ```
/// Above it the DC surrogate has the same global minimizers as the l2,0 model.
#[allow(clippy::too_many_arguments)]
pub fn exact_penalty_threshold(
    nu: f64,
    mu: f64,
    r: usize,
    kappa: usize,
    sigma_r: f64,
    alpha: f64,
    op_norm: f64,
    params: &PenaltyParams,
) -> Result<f64, DiagnosticsError> {
    if !(nu > 0.0 && mu > 0.0 && alpha > 0.0) {
        return Err(DiagnosticsError::BadArgument(format!(
            "need nu, mu, alpha > 0 (got {nu}, {mu}, {alpha})"
        )));
    }
    let lhs = (nu * alpha).sqrt() * sigma_r;
    if lhs <= std::f64::consts::SQRT_2 {
        return Err(DiagnosticsError::Hypothesis(format!(
            "sqrt(nu alpha) sigma_r = {lhs} must exceed sqrt(2)"
        )));
    }
    let core = nu.sqrt() * op_norm * (kappa as f64).sqrt() / (lhs - std::f64::consts::SQRT_2)
        * (1.0 + 2.0 * (r as f64).sqrt() / mu.sqrt()).sqrt();
    Ok(core.max(1.0) * params.phi_prime_left_one())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalSetCertificate {
    /// `||U V^T - M||_F / ||M||_F`.
    pub product_error: f64,
    /// `||U^T U - V^T V||_F`.
    pub balance_error: f64,
    pub col_count_u: usize,
    pub col_count_v: usize,
    pub rank_product: usize,
    pub pass: bool,
}

/// Checks the three clauses describing the global minimizers: `U V^T = M`,
/// balance, and `||U||_{2,0} = ||V||_{2,0} = rank(M)`.
pub fn certify_optimal_pair(
    w: &FactorPair,
    m: &DenseMatrix,
    tol_p: f64,
    tol_b: f64,
) -> Result<OptimalSetCertificate, DiagnosticsError> {
    if w.u.rows() != m.rows() || w.v.rows() != m.cols() || w.u.cols() != w.v.cols() {
        return Err(DiagnosticsError::BadArgument(format!(
            "factors {:?}, {:?} do not match M {:?}",
            w.u.shape(),
            w.v.shape(),
            m.shape()
        )));
    }
    let mn = m.frobenius_norm();
    let diff = w.product().sub(m).frobenius_norm();
    let product_error = if mn > 0.0 { diff / mn } else { diff };
    let balance_error = w.balance().frobenius_norm();
    let sv = dense::factored_singular_values(&w.u, &w.v)?;
    let cut = RANK_CUTOFF * sv.first().copied().unwrap_or(0.0);
    let rank_product = sv.iter().filter(|&&s| s > cut).count();
    let col_count_u = dense::l20_norm(&w.u, dense::default_zero_tol(&w.u));
    let col_count_v = dense::l20_norm(&w.v, dense::default_zero_tol(&w.v));
    let pass = product_error <= tol_p
        && balance_error <= tol_b
        && col_count_u == rank_product
        && col_count_v == rank_product;
    Ok(OptimalSetCertificate {
        product_error,
        balance_error,
        col_count_u,
        col_count_v,
        rank_product,
        pass,
    })
}
