//! Column-group proximal maps used by the solver subproblems.
//!
//! Both penalties depend on a column only through its norm, so each prox is
//! radial: `u = s* z / ||z||` where `s*` minimizes a one-dimensional problem.

use crate::dense::{self, DenseMatrix};
use crate::objective::Model;
use crate::penalty::PenaltyParams;

/// Minimizer of `(step/2) ||u - z||^2 + (weight/2) [u != 0]`.
/// Returns `z` when `||z||^2 > weight / step`, otherwise zero (ties go to zero).
pub fn prox_l20_column(z: &[f64], step: f64, weight: f64) -> Vec<f64> {
    debug_assert!(step > 0.0 && weight >= 0.0);
    let sq = dense::dot(z, z);
    if step * sq > weight {
        z.to_vec()
    } else {
        vec![0.0; z.len()]
    }
}

/// The radial objective `(step/2)(s - zeta)^2 + 1/2 g(s)` minimized by
/// [`dc_radial_minimizer`].
pub fn dc_radial_objective(s: f64, zeta: f64, step: f64, params: &PenaltyParams) -> f64 {
    0.5 * step * (s - zeta) * (s - zeta) + 0.5 * params.g_scalar(s)
}

/// `argmin_{s >= 0} (step/2)(s - zeta)^2 + 1/2 [lambda theta(rho s) + (tau/2) s^2]`.
///
/// On each branch of `theta` the objective is a quadratic; its clamped
/// minimizer, the two breakpoints and 0 are compared by value, ascending in
/// `s`, first minimum wins.
pub fn dc_radial_minimizer(zeta: f64, step: f64, params: &PenaltyParams) -> f64 {
    let (lambda, rho, tau) = (params.lambda(), params.rho(), params.tau());
    let s1 = params.lower_break() / rho;
    let s2 = params.upper_break() / rho;
    let intervals = [(0.0, s1), (s1, s2), (s2, f64::INFINITY)];
    let mut cands = vec![0.0, s1, s2];
    for (branch, &(lo, hi)) in intervals.iter().enumerate() {
        let (c2, c1, _) = params.theta_branch_coeffs(branch);
        let q2 = 0.5 * step + 0.25 * tau + 0.5 * lambda * c2 * rho * rho;
        let q1 = -step * zeta + 0.5 * lambda * c1 * rho;
        if q2 > 0.0 {
            cands.push((-q1 / (2.0 * q2)).clamp(lo, hi));
        }
    }
    cands.sort_by(f64::total_cmp);
    let mut best = cands[0];
    let mut best_val = dc_radial_objective(best, zeta, step, params);
    for &s in &cands[1..] {
        let val = dc_radial_objective(s, zeta, step, params);
        if val < best_val {
            best = s;
            best_val = val;
        }
    }
    best
}

/// Minimizer of `(step/2) ||u - z||^2 + 1/2 g(||u||)`.
pub fn prox_dc_column(z: &[f64], step: f64, params: &PenaltyParams) -> Vec<f64> {
    let zeta = dense::norm2(z);
    if zeta == 0.0 {
        return vec![0.0; z.len()];
    }
    let s = dc_radial_minimizer(zeta, step, params);
    z.iter().map(|&x| x * (s / zeta)).collect()
}

/// A columnwise prox at a gradient-step point.
#[derive(Debug, Clone)]
pub struct ProxRequest<'a> {
    pub z: &'a DenseMatrix,
    pub step: f64,
    pub params: PenaltyParams,
    pub model: Model,
}

/// Applies the per-column prox to each column independently.
/// The l2,0 column weight is `lambda`.
pub fn prox_matrix(req: &ProxRequest<'_>) -> DenseMatrix {
    let mut out = req.z.clone();
    for j in 0..out.cols() {
        let col = match req.model {
            Model::L20 => prox_l20_column(req.z.col(j), req.step, req.params.lambda()),
            Model::Dc => prox_dc_column(req.z.col(j), req.step, &req.params),
        };
        out.col_mut(j).copy_from_slice(&col);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l20_obj(u: &[f64], z: &[f64], step: f64, weight: f64) -> f64 {
        let d: f64 = u.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        let nz = if u.iter().any(|&x| x != 0.0) { 0.5 * weight } else { 0.0 };
        0.5 * step * d + nz
    }

    #[test]
    fn l20_keeps_large_column() {
        let z = [2.0, 0.0];
        let u = prox_l20_column(&z, 1.0, 1.0);
        assert_eq!(u, z.to_vec());
        // the kept candidate beats zero
        assert!(l20_obj(&z, &z, 1.0, 1.0) < l20_obj(&[0.0, 0.0], &z, 1.0, 1.0));
    }

    #[test]
    fn l20_kills_small_column() {
        let z = [0.3, 0.4];
        assert_eq!(prox_l20_column(&z, 1.0, 1.0), vec![0.0, 0.0]);
        assert!(l20_obj(&[0.0, 0.0], &z, 1.0, 1.0) < l20_obj(&z, &z, 1.0, 1.0));
    }

    #[test]
    fn l20_zero_weight_is_identity_and_tie_is_zero() {
        let z = [1e-9, -3.0];
        assert_eq!(prox_l20_column(&z, 2.0, 0.0), z.to_vec());
        // ||z||^2 = 1 = weight / step
        assert_eq!(prox_l20_column(&[1.0, 0.0], 2.0, 2.0), vec![0.0, 0.0]);
    }

    #[test]
    fn dc_zero_input() {
        let p = PenaltyParams::new(3.7, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(prox_dc_column(&[0.0, 0.0, 0.0], 1.0, &p), vec![0.0; 3]);
    }

    #[test]
    fn dc_saturated_branch_closed_form() {
        let p = PenaltyParams::new(3.7, 1e-3, 1.0, 0.0).unwrap();
        let step = 2.0;
        let zeta = 50.0;
        let s = dc_radial_minimizer(zeta, step, &p);
        let expect = step * zeta / (step + p.tau() / 2.0);
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn dc_prox_is_radial() {
        let p = PenaltyParams::new(3.0, 0.5, 2.0, 0.0).unwrap();
        let z = [0.6, -0.8];
        let u = prox_dc_column(&z, 1.5, &p);
        assert!((u[0] * z[1] - u[1] * z[0]).abs() < 1e-15);
        assert!(u[0] * z[0] >= 0.0);
    }

    #[test]
    fn matrix_prox_columnwise() {
        let z = DenseMatrix::from_rows(&[&[3.0, 0.01], &[4.0, 0.0]]).unwrap();
        let req = ProxRequest {
            z: &z,
            step: 1.0,
            params: PenaltyParams::l20(1.0, 0.0).unwrap(),
            model: Model::L20,
        };
        let out = prox_matrix(&req);
        assert_eq!(out.col(0), z.col(0));
        assert_eq!(out.col(1), &[0.0, 0.0]);
        let zero = DenseMatrix::zeros(2, 2);
        let req0 = ProxRequest { z: &zero, ..req };
        assert_eq!(prox_matrix(&req0), zero);
    }

    #[test]
    fn matrix_prox_permutation_equivariant() {
        let z = DenseMatrix::from_rows(&[&[1.0, 0.2, -2.0], &[0.5, 0.1, 0.3]]).unwrap();
        let p = PenaltyParams::new(3.7, 0.3, 1.5, 0.0).unwrap();
        let perm = [2usize, 0, 1];
        let zp = DenseMatrix::from_fn(2, 3, |i, j| z[(i, perm[j])]);
        for model in [Model::L20, Model::Dc] {
            let a = prox_matrix(&ProxRequest { z: &z, step: 1.2, params: p, model });
            let b = prox_matrix(&ProxRequest { z: &zp, step: 1.2, params: p, model });
            assert_eq!(DenseMatrix::from_fn(2, 3, |i, j| a[(i, perm[j])]), b);
        }
    }
}
