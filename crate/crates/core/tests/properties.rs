mod common;

use lrfact::dense::{self, DenseMatrix};
use lrfact::diagnostics::{build_balanced_factors, certify_optimal_pair, kl_moduli};
use lrfact::{FactorPair, Model, ModelSpec, PenaltyParams, SamplingOperator};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-5.0f64..5.0, rows * cols).prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

fn shaped() -> impl Strategy<Value = DenseMatrix> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| matrix(r, c))
}

fn dc(a: f64, rho: f64) -> PenaltyParams {
    common::dc_params(a, rho, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn theta_concave_nondecreasing_bounded(a in 1.2f64..8.0, x in 0.0f64..4.0, y in 0.0f64..4.0) {
        let p = dc(a, 1.0);
        let (lo, hi) = (x.min(y), x.max(y));
        prop_assert!(p.theta(lo) <= p.theta(hi) + 1e-12);
        prop_assert!(p.theta(0.5 * (x + y)) + 1e-12 >= 0.5 * (p.theta(x) + p.theta(y)));
        prop_assert!((0.0..=1.0).contains(&p.theta(x)));
        if x >= p.upper_break() {
            prop_assert_eq!(p.theta(x), 1.0);
        }
    }

    #[test]
    fn l20_prox_is_all_or_nothing(z in prop::collection::vec(-3.0f64..3.0, 1..6), step in 0.01f64..10.0, w in 0.0f64..5.0) {
        let u = lrfact::prox::prox_l20_column(&z, step, w);
        prop_assert!(u == z || u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dc_prox_is_lipschitz(
        z in prop::collection::vec(-3.0f64..3.0, 1..6),
        dir in prop::collection::vec(-1.0f64..1.0, 6),
        a in 2.0f64..6.0,
        rho in 0.2f64..4.0,
        step in 0.1f64..10.0,
    ) {
        let p = dc(a, rho);
        let d = &dir[..z.len()];
        let nd = dense::norm2(d);
        prop_assume!(nd > 1e-3);
        let zp: Vec<f64> = z.iter().zip(d).map(|(x, e)| x + 1e-6 * e / nd).collect();
        let u0 = lrfact::prox::prox_dc_column(&z, step, &p);
        let u1 = lrfact::prox::prox_dc_column(&zp, step, &p);
        let du: Vec<f64> = u0.iter().zip(&u1).map(|(x, y)| x - y).collect();
        prop_assert!(dense::norm2(&du) <= 2e-6 * (1.0 + 1e-9));
    }

    #[test]
    fn l20_norm_ignores_permutation_and_signs(x in shaped(), seed in any::<u64>(), kill in any::<u8>()) {
        let mut x = x;
        for j in 0..x.cols() {
            if kill >> (j % 8) & 1 == 1 {
                x.col_mut(j).fill(0.0);
            }
        }
        let c = x.cols();
        let perm: Vec<usize> = (0..c).map(|j| (j + seed as usize % c) % c).collect();
        let y = DenseMatrix::from_fn(x.rows(), c, |i, j| {
            let s = if (seed >> (j % 64)) & 1 == 1 { -1.0 } else { 1.0 };
            s * x[(i, perm[j])]
        });
        prop_assert_eq!(dense::l20_norm(&x, 0.0), dense::l20_norm(&y, 0.0));
    }

    #[test]
    fn svd_round_trip_and_norm_bounds(x in shaped()) {
        let s = dense::svd(&x).unwrap();
        let fro = x.frobenius_norm();
        prop_assert!(s.reconstruct().sub(&x).frobenius_norm() <= 1e-8 * fro.max(1e-300));
        prop_assert!(dense::spectral_norm(&x).unwrap() <= fro * (1.0 + 1e-12));
    }

    #[test]
    fn rank_one_spectral_equals_frobenius(u in prop::collection::vec(-3.0f64..3.0, 1..6), v in prop::collection::vec(-3.0f64..3.0, 1..6)) {
        let x = DenseMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j]);
        let fro = x.frobenius_norm();
        prop_assert!((dense::spectral_norm(&x).unwrap() - fro).abs() <= 1e-10 * fro.max(1e-300));
    }

    #[test]
    fn adjoint_pairing(seed in any::<u64>(), m in 1usize..6, n in 1usize..6, p in 1usize..20, full in any::<bool>()) {
        let op = if full { SamplingOperator::full(m, n) } else { SamplingOperator::gaussian(m, n, p, seed).unwrap() };
        let mut r = common::rng(seed);
        let x = common::gaussian(m, n, &mut r);
        let y: Vec<f64> = (0..op.p()).map(|k| (k as f64 * 0.37).sin()).collect();
        let lhs = dense::dot(&op.apply(&x).unwrap(), &y);
        let rhs = x.frob_dot(&op.adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn balanced_factors_certify(seed in any::<u64>(), m in 1usize..8, n in 1usize..8, r in 1usize..4) {
        let mut g = common::rng(seed);
        let r = r.min(m).min(n);
        let x = dense::matmul(&common::gaussian(m, r, &mut g), &common::gaussian(n, r, &mut g), false, true).unwrap();
        let kappa = m.min(n);
        let w = build_balanced_factors(&x, kappa).unwrap();
        let cert = certify_optimal_pair(&w, &x, 1e-8, 1e-8 * x.frobenius_norm()).unwrap();
        prop_assert!(cert.pass, "{:?}", cert);
        prop_assert_eq!(cert.col_count_u, r);
    }

    #[test]
    fn moduli_nonincreasing_in_beta(b1 in 1.0f64..3.0, db in 0.0f64..3.0, nu in 1.0f64..100.0, mu in 0.01f64..10.0) {
        let g = |beta: f64| kl_moduli(4.0, 1.0, 2, nu, mu, 1.0, beta, None).unwrap().gamma;
        prop_assert!(g(b1 + db) <= g(b1));
    }

    #[test]
    fn balance_term_is_swap_invariant(u in matrix(4, 3), v in matrix(5, 3)) {
        let w = FactorPair::new(u.clone(), v.clone()).unwrap();
        let ws = FactorPair::new(v, u).unwrap();
        let a = w.balance().frobenius_norm();
        let b = ws.balance().frobenius_norm();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn saturated_dc_penalty_counts_columns(a in 2.0f64..6.0, rho in 0.5f64..3.0, scales in prop::collection::vec(1.01f64..5.0, 3), zero in 0usize..3) {
        let p = dc(a, rho);
        let mut z = DenseMatrix::zeros(4, 3);
        for (j, s) in scales.iter().enumerate() {
            if j != zero {
                z.col_mut(j)[j] = s * p.upper_break() / rho;
            }
        }
        let spec = ModelSpec::new(Model::Dc, SamplingOperator::full(4, 3), vec![0.0; 12], p).unwrap();
        let counted = spec.column_penalty(&z);
        let tau_part: f64 = dense::column_norms(&z).iter().map(|t| 0.25 * p.tau() * t * t).sum();
        let l20 = spec.with_model(Model::L20).unwrap().column_penalty(&z);
        prop_assert_eq!(l20, p.lambda());
        prop_assert!((counted - tau_part - l20).abs() <= 1e-12 * (1.0 + counted.abs()), "{} {}", counted, tau_part);
    }
}
