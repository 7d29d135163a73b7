//! The scalar penalty family behind the DC surrogate.
//!
//! With `phi(t) = ((a-1) t^2 + 2t) / (a+1)` restricted to `[0, 1]` (call it
//! `psi`), the conjugate `psi*` is piecewise quadratic with breakpoints
//! `2/(a+1)` and `2a/(a+1)`, and `theta(t) = |t| - psi*(|t|)` is a concave,
//! nondecreasing cap that equals `|t|` near zero and saturates at 1.
//!
//! `g(t) = lambda * theta(rho t) + (tau/2) t^2` with
//! `tau = lambda (a+1) rho^2 / (2(a-1))` is convex: `tau` exactly cancels the
//! negative curvature of the middle branch of `theta`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PenaltyError {
    #[error("shape parameter a = {0} must exceed 1")]
    BadShape(f64),
    #[error("{name} = {value} must be {constraint}")]
    BadParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

/// Validated scalar parameters. `tau` is derived on demand and never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    a: f64,
    lambda: f64,
    rho: f64,
    mu_tilde: f64,
}

impl PenaltyParams {
    /// `lambda >= 0` is accepted here; the DC model additionally needs
    /// `lambda > 0`, which [`crate::objective::ModelSpec`] enforces.
    pub fn new(a: f64, lambda: f64, rho: f64, mu_tilde: f64) -> Result<Self, PenaltyError> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(PenaltyError::BadShape(a));
        }
        check("lambda", lambda, lambda >= 0.0, "finite and >= 0")?;
        check("rho", rho, rho > 0.0, "finite and > 0")?;
        check("mu_tilde", mu_tilde, mu_tilde >= 0.0, "finite and >= 0")?;
        Ok(Self {
            a,
            lambda,
            rho,
            mu_tilde,
        })
    }

    /// Parameters for the l2,0 model, where `a` and `rho` are irrelevant.
    pub fn l20(lambda: f64, mu_tilde: f64) -> Result<Self, PenaltyError> {
        Self::new(3.7, lambda, 1.0, mu_tilde)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn mu_tilde(&self) -> f64 {
        self.mu_tilde
    }

    pub fn tau(&self) -> f64 {
        self.lambda * (self.a + 1.0) * self.rho * self.rho / (2.0 * (self.a - 1.0))
    }

    /// Left derivative of `phi` at 1, `2a/(a+1)`.
    pub fn phi_prime_left_one(&self) -> f64 {
        2.0 * self.a / (self.a + 1.0)
    }

    /// Lower breakpoint `2/(a+1)`; also the constant below which `theta' = 1`.
    pub fn lower_break(&self) -> f64 {
        2.0 / (self.a + 1.0)
    }

    /// Upper breakpoint `2a/(a+1)`, where `theta` saturates.
    pub fn upper_break(&self) -> f64 {
        2.0 * self.a / (self.a + 1.0)
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self, PenaltyError> {
        Self::new(self.a, lambda, self.rho, self.mu_tilde)
    }

    pub fn with_rho(self, rho: f64) -> Result<Self, PenaltyError> {
        Self::new(self.a, self.lambda, rho, self.mu_tilde)
    }

    pub fn phi(&self, t: f64) -> f64 {
        ((self.a - 1.0) * t * t + 2.0 * t) / (self.a + 1.0)
    }

    pub fn psi_star(&self, s: f64) -> f64 {
        let a = self.a;
        if s <= self.lower_break() {
            0.0
        } else if s <= self.upper_break() {
            let d = (a + 1.0) * s - 2.0;
            d * d / (4.0 * (a * a - 1.0))
        } else {
            s - 1.0
        }
    }

    pub fn theta(&self, t: f64) -> f64 {
        let at = t.abs();
        at - self.psi_star(at)
    }

    /// Right derivative of `theta` on `[0, inf)`.
    pub fn theta_prime_plus(&self, t: f64) -> f64 {
        let a = self.a;
        if t < self.lower_break() {
            1.0
        } else if t < self.upper_break() {
            1.0 - ((a + 1.0) * t - 2.0) * (a + 1.0) / (2.0 * (a * a - 1.0))
        } else {
            0.0
        }
    }

    /// `g(t) = lambda theta(rho t) + (tau/2) t^2`.
    pub fn g_scalar(&self, t: f64) -> f64 {
        self.lambda * self.theta(self.rho * t) + 0.5 * self.tau() * t * t
    }

    /// Coefficients `(c2, c1, c0)` of `theta(t) = c2 t^2 + c1 t + c0` on the
    /// branch containing `t >= 0` (0: linear, 1: quadratic, 2: saturated).
    pub(crate) fn theta_branch_coeffs(&self, branch: usize) -> (f64, f64, f64) {
        let a = self.a;
        match branch {
            0 => (0.0, 1.0, 0.0),
            1 => (
                -(a + 1.0) / (4.0 * (a - 1.0)),
                a / (a - 1.0),
                -1.0 / (a * a - 1.0),
            ),
            _ => (0.0, 0.0, 1.0),
        }
    }
}

fn check(name: &'static str, value: f64, ok: bool, constraint: &'static str) -> Result<(), PenaltyError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(PenaltyError::BadParameter {
            name,
            value,
            constraint,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64) -> PenaltyParams {
        PenaltyParams::new(a, 0.7, 1.3, 1e-3).unwrap()
    }

    #[test]
    fn phi_values() {
        let q = p(3.0);
        assert_eq!(q.phi(0.0), 0.0);
        assert!((q.phi(1.0) - 1.0).abs() < 1e-15);
        assert!((q.phi(2.0) - 3.0).abs() < 1e-15);
        assert!((p(3.7).phi(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_star_branches() {
        let q = p(3.0);
        assert_eq!(q.psi_star(2.0 / 4.0), 0.0);
        assert!((q.psi_star(1.0) - 0.125).abs() < 1e-15);
        assert!((p(3.7).psi_star(2.0) - 1.0).abs() < 1e-15);
        assert_eq!(q.psi_star(-1.0), 0.0);
    }

    #[test]
    fn theta_shape() {
        let q = p(3.7);
        assert_eq!(q.theta(0.0), 0.0);
        assert!((q.theta(5.0) - 1.0).abs() < 1e-15);
        assert!((q.theta(q.upper_break()) - 1.0).abs() < 1e-14);
        assert!((q.theta(0.3) - 0.3).abs() < 1e-15);
        assert_eq!(q.theta(-0.3), q.theta(0.3));
    }

    #[test]
    fn theta_prime_values() {
        let q = p(3.0);
        assert_eq!(q.theta_prime_plus(0.0), 1.0);
        assert_eq!(q.theta_prime_plus(q.upper_break()), 0.0);
        assert!((q.theta_prime_plus(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn g_values() {
        let q = p(3.7);
        assert_eq!(q.g_scalar(0.0), 0.0);
        let t = 10.0 * q.upper_break() / q.rho();
        assert!((q.g_scalar(t) - (q.lambda() + 0.5 * q.tau() * t * t)).abs() < 1e-12);
    }

    #[test]
    fn branch_coefficients_reproduce_theta() {
        let q = p(2.5);
        for &(t, b) in &[(0.2, 0usize), (0.9, 1), (2.0, 2)] {
            let (c2, c1, c0) = q.theta_branch_coeffs(b);
            assert!((c2 * t * t + c1 * t + c0 - q.theta(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_parameters_fail_at_construction() {
        assert_eq!(PenaltyParams::new(1.0, 1.0, 1.0, 1.0), Err(PenaltyError::BadShape(1.0)));
        assert!(PenaltyParams::new(2.0, -1.0, 1.0, 1.0).is_err());
        assert!(PenaltyParams::new(2.0, 1.0, 0.0, 1.0).is_err());
        assert!(PenaltyParams::new(2.0, 1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn tau_tracks_parameters() {
        let q = p(3.0).with_rho(2.0).unwrap();
        assert!((q.tau() - 0.7 * 4.0 * 4.0 / 4.0).abs() < 1e-15);
    }
}
