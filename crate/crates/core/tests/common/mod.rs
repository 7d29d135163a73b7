//! Independent oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use lrfact::dense::{self, DenseMatrix};
use lrfact::{FactorPair, Model, ModelSpec, PenaltyParams, SamplingOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// DC parameters obeying `lambda rho^2 = 2/(a+1)`.
pub fn dc_params(a: f64, rho: f64, mu_tilde: f64) -> PenaltyParams {
    PenaltyParams::new(a, 2.0 / ((a + 1.0) * rho * rho), rho, mu_tilde).unwrap()
}

/// Max over `s` in `[-3, 3]` of `|psi*(s) - max_t (s t - phi(t))|`, `t` on a
/// uniform grid of `[0, 1]`.
pub fn psi_star_grid_error(params: &PenaltyParams, s_points: usize, t_points: usize) -> f64 {
    let ts: Vec<f64> = linspace(0.0, 1.0, t_points).collect();
    let phis: Vec<f64> = ts.iter().map(|&t| params.phi(t)).collect();
    linspace(-3.0, 3.0, s_points)
        .map(|s| {
            let grid = ts
                .iter()
                .zip(&phis)
                .map(|(&t, &p)| s * t - p)
                .fold(f64::NEG_INFINITY, f64::max);
            (params.psi_star(s) - grid).abs()
        })
        .fold(0.0, f64::max)
}

/// Grid search followed by golden-section refinement around the best point.
pub fn grid_golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize) -> f64 {
    let h = (hi - lo) / (grid - 1) as f64;
    let best = linspace(lo, hi, grid)
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap();
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while b - a > 1e-12 * (1.0 + b.abs()) {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let mid = 0.5 * (a + b);
    [best, mid].into_iter().min_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap()
}

/// Largest radial gap between the library prox and a 1-D search, for both
/// penalties over `cases` random columns: `(l20, dc)`.
pub fn prox_oracle_errors(cases: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let (mut e20, mut edc) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let dim = r.random_range(1..6);
        let step = r.random_range(0.1..10.0);

        let weight: f64 = r.random_range(0.0..5.0);
        let z: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let zeta = dense::norm2(&z);
        let got = dense::norm2(&lrfact::prox::prox_l20_column(&z, step, weight));
        let obj = |s: f64| 0.5 * step * (s - zeta).powi(2) + 0.5 * weight * f64::from(u8::from(s != 0.0));
        let inner = grid_golden_min(obj, zeta * 1e-9, 2.0 * zeta, 2000);
        let oracle = if obj(0.0) <= obj(inner) { 0.0 } else { inner };
        e20 = e20.max((got - oracle).abs());

        let a = r.random_range(2.5..5.0);
        let rho = r.random_range(0.2..5.0);
        let p = dc_params(a, rho, 0.0);
        let zeta = r.random_range(0.0..3.0) * p.upper_break() / rho;
        let z: Vec<f64> = {
            let dir: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let nd = dense::norm2(&dir);
            dir.iter().map(|x| x * zeta / nd).collect()
        };
        let got = dense::norm2(&lrfact::prox::prox_dc_column(&z, step, &p));
        let obj = |s: f64| {
            0.5 * step * (s - zeta).powi(2) + 0.5 * (p.lambda() * p.theta(p.rho() * s) + 0.5 * p.tau() * s * s)
        };
        let oracle = grid_golden_min(obj, 0.0, 2.0 * zeta.max(1e-3), 2000);
        edc = edc.max((got - oracle).abs());
    }
    (e20, edc)
}

/// Small random instance with a Gaussian operator.
pub fn random_spec(model: Model, r: &mut ChaCha8Rng) -> (ModelSpec, FactorPair) {
    let (m, n, k, p) = (6, 5, 3, 20);
    let op = SamplingOperator::gaussian(m, n, p, r.random()).unwrap();
    let b: Vec<f64> = (0..p).map(|_| r.sample(StandardNormal)).collect();
    let a = r.random_range(2.5..5.0);
    let rho = r.random_range(0.3..3.0);
    let mu = r.random_range(0.01..1.0);
    let params = match model {
        Model::L20 => PenaltyParams::l20(r.random_range(0.1..2.0), mu).unwrap(),
        Model::Dc => dc_params(a, rho, mu),
    };
    let spec = ModelSpec::new(model, op, b, params).unwrap();
    let w = FactorPair::new(gaussian(m, k, r), gaussian(n, k, r)).unwrap();
    (spec, w)
}

/// Worst relative gap between the analytic smooth gradient and central
/// differences of the smooth value.
pub fn gradient_fd_error(model: Model, instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (spec, w) = random_spec(model, &mut r);
        let g = spec.smooth_gradient(&w).unwrap();
        let (mut diff, mut norm) = (0.0, 0.0);
        for (which, grad) in [(0, &g.grad_u), (1, &g.grad_v)] {
            let base = if which == 0 { &w.u } else { &w.v };
            for idx in 0..base.as_slice().len() {
                let eval = |delta: f64| {
                    let mut x = base.clone();
                    x.as_mut_slice()[idx] += delta;
                    let wp = if which == 0 {
                        FactorPair::new(x, w.v.clone())
                    } else {
                        FactorPair::new(w.u.clone(), x)
                    };
                    spec.smooth_value(&wp.unwrap()).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grad.as_slice()[idx];
                diff += (fd - an).powi(2);
                norm += an * an;
            }
        }
        worst = worst.max(diff.sqrt() / norm.sqrt().max(1e-12));
    }
    worst
}

/// `min sum phi(w_i)` over `w` in `{0, 0.1, ..., 1}^cols` with
/// `<e - w, G(Z)> = 0`.
pub fn l20_brute_force(z: &DenseMatrix, phi: impl Fn(f64) -> f64) -> f64 {
    let norms = dense::column_norms(z);
    let levels: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let cols = norms.len();
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; cols];
    loop {
        let w: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
        let slack: f64 = w.iter().zip(&norms).map(|(wi, g)| (1.0 - wi) * g).sum();
        if slack == 0.0 {
            best = best.min(w.iter().map(|&t| phi(t)).sum());
        }
        let mut k = 0;
        loop {
            if k == cols {
                return best;
            }
            idx[k] += 1;
            if idx[k] < levels.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Random 3x4 matrices with at least one zeroed column; returns how many
/// disagree with [`dense::l20_norm`].
pub fn l20_brute_force_mismatches(cases: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    (0..cases)
        .filter(|_| {
            let mut z = gaussian(3, 4, &mut r);
            for j in 0..4 {
                if j == 0 || r.random_bool(0.3) {
                    let col = (j + r.random_range(0..4)) % 4;
                    z.col_mut(col).fill(0.0);
                }
            }
            l20_brute_force(&z, |t| t) != dense::l20_norm(&z, 0.0) as f64
        })
        .count()
}
