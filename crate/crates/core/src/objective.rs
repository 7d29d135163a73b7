//! Objective values and smooth-part gradients for both models.
//!
//! Everything is evaluated in the loss-scaled form (loss coefficient 1,
//! `lambda = 1/nu`, `mu_tilde = mu/nu`):
//!
//! ```text
//! Phi(U,V) = 1/2 ||A(U V^T) - b||^2 + mu_tilde/4 ||U^T U - V^T V||_F^2  [- tau/4 (||U||^2 + ||V||^2)]
//! F(U,V)   = Phi(U,V) + 1/2 sum_j [h(||U_j||) + h(||V_j||)]
//! ```
//!
//! with `h(t) = lambda * [t != 0]` for the l2,0 model and `h = g` (see
//! [`crate::penalty`]) for the DC model; the bracketed `tau` term is present
//! only for the DC model, where it cancels the quadratic part of `g`.
//! Values in the `nu`-scaled normalization are `F / lambda`.

use thiserror::Error;

use crate::dense::{self, matmul, DenseError, DenseMatrix};
use crate::penalty::PenaltyParams;
use crate::sampling::{SamplingError, SamplingOperator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("factor shapes {u:?} and {v:?} do not fit a {m}x{n} operator")]
    ShapeMismatch {
        u: (usize, usize),
        v: (usize, usize),
        m: usize,
        n: usize,
    },
    #[error("observation vector has length {got}, operator expects {expected}")]
    ObservationLength { expected: usize, got: usize },
    #[error("the DC model needs lambda > 0")]
    DcNeedsLambda,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Dense(#[from] DenseError),
}

/// `(U, V)` with `U: m x kappa`, `V: n x kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl FactorPair {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self, DenseError> {
        if u.cols() != v.cols() {
            return Err(DenseError::DimensionMismatch {
                op: "FactorPair",
                left: u.shape(),
                right: v.shape(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn zeros(m: usize, n: usize, kappa: usize) -> Self {
        Self {
            u: DenseMatrix::zeros(m, kappa),
            v: DenseMatrix::zeros(n, kappa),
        }
    }

    pub fn kappa(&self) -> usize {
        self.u.cols()
    }

    pub fn product(&self) -> DenseMatrix {
        matmul(&self.u, &self.v, false, true).expect("factor pair shares kappa")
    }

    /// `U^T U - V^T V`.
    pub fn balance(&self) -> DenseMatrix {
        let mut d = matmul(&self.u, &self.u, true, false).expect("square gram");
        d.axpy(-1.0, &matmul(&self.v, &self.v, true, false).expect("square gram"));
        d
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// `||[U - U' , V - V']||_F`.
    pub fn distance(&self, other: &FactorPair) -> f64 {
        let du = self.u.sub(&other.u).frobenius_norm();
        let dv = self.v.sub(&other.v).frobenius_norm();
        du.hypot(dv)
    }

    /// Nonzero-column counts `(||U||_{2,0}, ||V||_{2,0})` with threshold `tol`.
    pub fn column_counts(&self, tol: f64) -> (usize, usize) {
        (dense::l20_norm(&self.u, tol), dense::l20_norm(&self.v, tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Hard column-count penalty.
    L20,
    /// DC surrogate `theta(rho ||.||)`.
    Dc,
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l20" | "psi" => Ok(Model::L20),
            "dc" | "theta" => Ok(Model::Dc),
            other => Err(format!("unknown model `{other}` (expected l20 or dc)")),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::L20 => "l20",
            Model::Dc => "dc",
        })
    }
}

/// Which objective, with its data. Ground truth never enters here: only the
/// operator and the observations `b`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub model: Model,
    pub op: SamplingOperator,
    pub b: Vec<f64>,
    pub params: PenaltyParams,
}

/// Smooth-part gradients with the cached residual and balance matrix.
#[derive(Debug, Clone)]
pub struct SmoothGradient {
    pub grad_u: DenseMatrix,
    pub grad_v: DenseMatrix,
    pub residual: Vec<f64>,
    pub balance: DenseMatrix,
}

/// Full objective in both normalizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    /// `lambda`-scaled (loss coefficient 1).
    pub scaled: f64,
    /// `nu`-scaled, `scaled / lambda`; NaN when `lambda = 0`.
    pub nu_scaled: f64,
}

impl ModelSpec {
    pub fn new(
        model: Model,
        op: SamplingOperator,
        b: Vec<f64>,
        params: PenaltyParams,
    ) -> Result<Self, ObjectiveError> {
        if b.len() != op.p() {
            return Err(ObjectiveError::ObservationLength {
                expected: op.p(),
                got: b.len(),
            });
        }
        if model == Model::Dc && params.lambda() <= 0.0 {
            return Err(ObjectiveError::DcNeedsLambda);
        }
        Ok(Self { model, op, b, params })
    }

    /// Same data, other model.
    pub fn with_model(&self, model: Model) -> Result<Self, ObjectiveError> {
        Self::new(model, self.op.clone(), self.b.clone(), self.params)
    }

    fn tau_active(&self) -> f64 {
        match self.model {
            Model::L20 => 0.0,
            Model::Dc => self.params.tau(),
        }
    }

    pub fn check(&self, w: &FactorPair) -> Result<(), ObjectiveError> {
        let (m, n) = self.op.shape();
        if w.u.rows() != m || w.v.rows() != n || w.u.cols() != w.v.cols() {
            return Err(ObjectiveError::ShapeMismatch {
                u: w.u.shape(),
                v: w.v.shape(),
                m,
                n,
            });
        }
        Ok(())
    }

    pub fn residual(&self, u: &DenseMatrix, v: &DenseMatrix) -> Result<Vec<f64>, ObjectiveError> {
        Ok(self.op.residual_factored(u, v, &self.b)?)
    }

    /// `Phi(u1, v1) - Phi(u0, v0)` from the two residuals, formed as sums of
    /// `<x1 - x0, x1 + x0>` terms so that nearby points do not cancel
    /// catastrophically.
    pub(crate) fn smooth_delta(
        &self,
        (u0, v0, r0): (&DenseMatrix, &DenseMatrix, &[f64]),
        (u1, v1, r1): (&DenseMatrix, &DenseMatrix, &[f64]),
    ) -> f64 {
        fn diff_dot(a1: &[f64], a0: &[f64]) -> f64 {
            a1.iter().zip(a0).map(|(&x, &y)| (x - y) * (x + y)).sum()
        }
        let mut val = 0.5 * diff_dot(r1, r0);
        let mu = self.params.mu_tilde();
        if mu != 0.0 {
            let b0 = balance(u0, v0);
            let b1 = balance(u1, v1);
            val += 0.25 * mu * diff_dot(b1.as_slice(), b0.as_slice());
        }
        let tau = self.tau_active();
        if tau != 0.0 {
            val -= 0.25 * tau * (diff_dot(u1.as_slice(), u0.as_slice()) + diff_dot(v1.as_slice(), v0.as_slice()));
        }
        val
    }

    /// `Phi` from a precomputed residual.
    pub(crate) fn smooth_from_residual(&self, u: &DenseMatrix, v: &DenseMatrix, residual: &[f64]) -> f64 {
        let bal = balance(u, v);
        let mut val = 0.5 * dense::dot(residual, residual)
            + 0.25 * self.params.mu_tilde() * dense::dot(bal.as_slice(), bal.as_slice());
        let tau = self.tau_active();
        if tau != 0.0 {
            let nu = u.frobenius_norm();
            let nv = v.frobenius_norm();
            val -= 0.25 * tau * (nu * nu + nv * nv);
        }
        val
    }

    pub fn smooth_value(&self, w: &FactorPair) -> Result<f64, ObjectiveError> {
        self.check(w)?;
        let r = self.residual(&w.u, &w.v)?;
        Ok(self.smooth_from_residual(&w.u, &w.v, &r))
    }

    /// `nabla_U Phi` given the residual at `(u, v)`.
    pub(crate) fn grad_u_from(
        &self,
        u: &DenseMatrix,
        v: &DenseMatrix,
        residual: &[f64],
        bal: &DenseMatrix,
        with_tau: bool,
    ) -> Result<DenseMatrix, ObjectiveError> {
        let mut g = self.op.adjoint_mul(residual, v)?;
        let mu = self.params.mu_tilde();
        if mu != 0.0 {
            g.axpy(mu, &matmul(u, bal, false, false)?);
        }
        let tau = self.tau_active();
        if with_tau && tau != 0.0 {
            g.axpy(-0.5 * tau, u);
        }
        Ok(g)
    }

    /// `nabla_V Phi` given the residual at `(u, v)`.
    pub(crate) fn grad_v_from(
        &self,
        u: &DenseMatrix,
        v: &DenseMatrix,
        residual: &[f64],
        bal: &DenseMatrix,
        with_tau: bool,
    ) -> Result<DenseMatrix, ObjectiveError> {
        let mut g = self.op.adjoint_t_mul(residual, u)?;
        let mu = self.params.mu_tilde();
        if mu != 0.0 {
            g.axpy(-mu, &matmul(v, bal, false, false)?);
        }
        let tau = self.tau_active();
        if with_tau && tau != 0.0 {
            g.axpy(-0.5 * tau, v);
        }
        Ok(g)
    }

    pub fn smooth_gradient(&self, w: &FactorPair) -> Result<SmoothGradient, ObjectiveError> {
        self.gradient_impl(w, true)
    }

    /// Gradient of the loss plus balance term only (no `tau` tilt), which is
    /// the smooth part of the unsplit objective.
    pub(crate) fn loss_balance_gradient(&self, w: &FactorPair) -> Result<SmoothGradient, ObjectiveError> {
        self.gradient_impl(w, false)
    }

    fn gradient_impl(&self, w: &FactorPair, with_tau: bool) -> Result<SmoothGradient, ObjectiveError> {
        self.check(w)?;
        let residual = self.residual(&w.u, &w.v)?;
        let bal = balance(&w.u, &w.v);
        let grad_u = self.grad_u_from(&w.u, &w.v, &residual, &bal, with_tau)?;
        let grad_v = self.grad_v_from(&w.u, &w.v, &residual, &bal, with_tau)?;
        Ok(SmoothGradient {
            grad_u,
            grad_v,
            residual,
            balance: bal,
        })
    }

    /// `1/2 sum_j h(||Z_j||)` for one factor.
    pub fn column_penalty(&self, z: &DenseMatrix) -> f64 {
        let lambda = self.params.lambda();
        dense::column_norms(z)
            .into_iter()
            .map(|t| match self.model {
                Model::L20 => {
                    if t > 0.0 {
                        0.5 * lambda
                    } else {
                        0.0
                    }
                }
                Model::Dc => 0.5 * self.params.g_scalar(t),
            })
            .sum()
    }

    pub(crate) fn full_from_smooth(&self, smooth: f64, w: &FactorPair) -> ObjectiveValue {
        let scaled = smooth + self.column_penalty(&w.u) + self.column_penalty(&w.v);
        self.normalize(scaled)
    }

    pub(crate) fn normalize(&self, scaled: f64) -> ObjectiveValue {
        let lambda = self.params.lambda();
        ObjectiveValue {
            scaled,
            nu_scaled: if lambda > 0.0 { scaled / lambda } else { f64::NAN },
        }
    }

    pub fn full_value(&self, w: &FactorPair) -> Result<ObjectiveValue, ObjectiveError> {
        let smooth = self.smooth_value(w)?;
        Ok(self.full_from_smooth(smooth, w))
    }
}

/// `U^T U - V^T V`.
pub(crate) fn balance(u: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
    let mut d = matmul(u, u, true, false).expect("gram");
    d.axpy(-1.0, &matmul(v, v, true, false).expect("gram"));
    d
}
