//! Linear measurement operators `A: R^{m x n} -> R^p`, their adjoints and
//! restricted-eigenvalue estimates.
//!
//! Three kinds are provided:
//!
//! * [`OperatorKind::UniformMask`] samples entries without replacement,
//! * [`OperatorKind::Full`] is the column-wise vectorization (`A*A = I`),
//! * [`OperatorKind::Gaussian`] takes inner products with `p` sensing matrices
//!   whose entries are i.i.d. `N(0, 1/p)`, so that `E[A*A] = I`.
//!
//! Besides the plain `apply`/`adjoint` pair the operator exposes the factored
//! products the solver needs (`A(U V^T) - b`, `A*(y) V`, `A*(y)^T U`). For
//! masks these never form an m x n matrix.
//!
//! Restricted eigenvalues are NP-hard in general. [`estimate_restricted_eigs`]
//! returns brackets; the conservative pair is `(alpha_lower, beta_upper)` and
//! the Monte Carlo values `alpha_upper`/`beta_lower` are only witnesses.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dense::{self, matmul, thin_qr, DenseError, DenseMatrix};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("input shape {got:?} does not match operator shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("measurement vector has length {got}, operator has p = {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("mask entry ({i}, {j}) is out of range for a {m}x{n} operator")]
    MaskOutOfRange { i: usize, j: usize, m: usize, n: usize },
    #[error("mask entry ({i}, {j}) appears more than once")]
    DuplicateMaskEntry { i: usize, j: usize },
    #[error("invalid operator: {0}")]
    Invalid(String),
    #[error("cannot parse operator text: {0}")]
    Parse(String),
    #[error(transparent)]
    Dense(#[from] DenseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    UniformMask,
    Full,
    Gaussian,
}

impl std::str::FromStr for OperatorKind {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniformmask" | "uniform_mask" | "mask" | "uniform" => Ok(Self::UniformMask),
            "full" => Ok(Self::Full),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(SamplingError::Parse(format!("unknown operator kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::UniformMask => "uniform_mask",
            Self::Full => "full",
            Self::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone)]
struct Mask {
    rows: Vec<u32>,
    cols: Vec<u32>,
    // sample indices grouped by row, with row_ptr offsets (CSR view)
    by_row: Vec<u32>,
    row_ptr: Vec<usize>,
    by_col: Vec<u32>,
    col_ptr: Vec<usize>,
}

impl Mask {
    fn build(m: usize, n: usize, pairs: &[(usize, usize)]) -> Result<Self, SamplingError> {
        let mut seen = vec![false; m * n];
        for &(i, j) in pairs {
            if i >= m || j >= n {
                return Err(SamplingError::MaskOutOfRange { i, j, m, n });
            }
            let lin = i + j * m;
            if seen[lin] {
                return Err(SamplingError::DuplicateMaskEntry { i, j });
            }
            seen[lin] = true;
        }
        let rows: Vec<u32> = pairs.iter().map(|&(i, _)| i as u32).collect();
        let cols: Vec<u32> = pairs.iter().map(|&(_, j)| j as u32).collect();
        let (by_row, row_ptr) = group(&rows, &cols, m);
        let (by_col, col_ptr) = group(&cols, &rows, n);
        Ok(Self {
            rows,
            cols,
            by_row,
            row_ptr,
            by_col,
            col_ptr,
        })
    }
}

/// Stable grouping of sample indices by `key`, ties ordered by `minor`.
fn group(key: &[u32], minor: &[u32], buckets: usize) -> (Vec<u32>, Vec<usize>) {
    let mut idx: Vec<u32> = (0..key.len() as u32).collect();
    idx.sort_by_key(|&k| (key[k as usize], minor[k as usize]));
    let mut ptr = vec![0usize; buckets + 1];
    for &k in key {
        ptr[k as usize + 1] += 1;
    }
    for b in 0..buckets {
        ptr[b + 1] += ptr[b];
    }
    (idx, ptr)
}

#[derive(Debug, Clone)]
struct Gaussian {
    seed: Option<u64>,
    // p x (m n): row i is vec(G_i)
    stacked: DenseMatrix,
}

#[derive(Debug, Clone)]
enum Inner {
    Mask(Mask),
    Full,
    Gaussian(Gaussian),
}

/// Immutable measurement operator.
#[derive(Debug, Clone)]
pub struct SamplingOperator {
    m: usize,
    n: usize,
    p: usize,
    inner: Inner,
    exec: Exec,
}

impl SamplingOperator {
    pub fn full(m: usize, n: usize) -> Self {
        assert!(m > 0 && n > 0);
        Self {
            m,
            n,
            p: m * n,
            inner: Inner::Full,
            exec: Exec::default(),
        }
    }

    /// Explicit mask of 0-based `(i, j)` pairs; the order is the measurement order.
    pub fn from_mask(m: usize, n: usize, pairs: &[(usize, usize)]) -> Result<Self, SamplingError> {
        if m == 0 || n == 0 || pairs.is_empty() {
            return Err(SamplingError::Invalid(
                "a mask needs positive dimensions and at least one entry".into(),
            ));
        }
        Ok(Self {
            m,
            n,
            p: pairs.len(),
            inner: Inner::Mask(Mask::build(m, n, pairs)?),
            exec: Exec::default(),
        })
    }

    /// Uniform sampling without replacement of `round(ratio * m * n)` entries,
    /// stored in column-major order.
    pub fn uniform_mask(m: usize, n: usize, ratio: f64, rng: &mut impl Rng) -> Result<Self, SamplingError> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(SamplingError::Invalid(format!("sample ratio {ratio} outside (0, 1]")));
        }
        let total = m * n;
        let p = ((ratio * total as f64).round() as usize).clamp(1, total);
        let mut lin: Vec<usize> = rand::seq::index::sample(rng, total, p).into_vec();
        lin.sort_unstable();
        let pairs: Vec<(usize, usize)> = lin.iter().map(|&l| (l % m, l / m)).collect();
        Self::from_mask(m, n, &pairs)
    }

    /// `p` Gaussian sensing matrices generated from `seed`.
    pub fn gaussian(m: usize, n: usize, p: usize, seed: u64) -> Result<Self, SamplingError> {
        if m == 0 || n == 0 || p == 0 {
            return Err(SamplingError::Invalid("gaussian operator needs m, n, p > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (p as f64).sqrt();
        let mut stacked = DenseMatrix::zeros(p, m * n);
        for x in stacked.as_mut_slice() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = z * scale;
        }
        Ok(Self {
            m,
            n,
            p,
            inner: Inner::Gaussian(Gaussian {
                seed: Some(seed),
                stacked,
            }),
            exec: Exec::default(),
        })
    }

    /// Gaussian-kind operator from explicit sensing matrices (not serializable).
    pub fn from_sensing_matrices(matrices: &[DenseMatrix]) -> Result<Self, SamplingError> {
        let first = matrices
            .first()
            .ok_or_else(|| SamplingError::Invalid("no sensing matrices".into()))?;
        let (m, n) = first.shape();
        let p = matrices.len();
        let mut stacked = DenseMatrix::zeros(p, m * n);
        for (i, g) in matrices.iter().enumerate() {
            if g.shape() != (m, n) {
                return Err(SamplingError::ShapeMismatch {
                    expected: (m, n),
                    got: g.shape(),
                });
            }
            for (c, &v) in g.as_slice().iter().enumerate() {
                stacked[(i, c)] = v;
            }
        }
        Ok(Self {
            m,
            n,
            p,
            inner: Inner::Gaussian(Gaussian { seed: None, stacked }),
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn kind(&self) -> OperatorKind {
        match self.inner {
            Inner::Mask(_) => OperatorKind::UniformMask,
            Inner::Full => OperatorKind::Full,
            Inner::Gaussian(_) => OperatorKind::Gaussian,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Mask entries in measurement order, `None` for other kinds.
    pub fn mask_entries(&self) -> Option<Vec<(usize, usize)>> {
        match &self.inner {
            Inner::Mask(mask) => Some(
                mask.rows
                    .iter()
                    .zip(&mask.cols)
                    .map(|(&i, &j)| (i as usize, j as usize))
                    .collect(),
            ),
            _ => None,
        }
    }

    fn check_shape(&self, x: &DenseMatrix) -> Result<(), SamplingError> {
        if x.shape() != (self.m, self.n) {
            return Err(SamplingError::ShapeMismatch {
                expected: (self.m, self.n),
                got: x.shape(),
            });
        }
        Ok(())
    }

    fn check_len(&self, y: &[f64]) -> Result<(), SamplingError> {
        if y.len() != self.p {
            return Err(SamplingError::LengthMismatch {
                expected: self.p,
                got: y.len(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<Vec<f64>, SamplingError> {
        self.check_shape(x)?;
        Ok(match &self.inner {
            Inner::Full => x.as_slice().to_vec(),
            Inner::Mask(mask) => mask
                .rows
                .iter()
                .zip(&mask.cols)
                .map(|(&i, &j)| x[(i as usize, j as usize)])
                .collect(),
            Inner::Gaussian(g) => {
                let v = DenseMatrix::new(self.m * self.n, 1, x.as_slice().to_vec())?;
                matmul(&g.stacked, &v, false, false)?.into_vec()
            }
        })
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<DenseMatrix, SamplingError> {
        self.check_len(y)?;
        Ok(match &self.inner {
            Inner::Full => DenseMatrix::new(self.m, self.n, y.to_vec())?,
            Inner::Mask(mask) => {
                let mut x = DenseMatrix::zeros(self.m, self.n);
                for ((&i, &j), &v) in mask.rows.iter().zip(&mask.cols).zip(y) {
                    x[(i as usize, j as usize)] = v;
                }
                x
            }
            Inner::Gaussian(g) => {
                let yv = DenseMatrix::new(self.p, 1, y.to_vec())?;
                let v = matmul(&g.stacked, &yv, true, false)?;
                DenseMatrix::new(self.m, self.n, v.into_vec())?
            }
        })
    }

    /// Residual `A(U V^T) - b`.
    pub fn residual_factored(
        &self,
        u: &DenseMatrix,
        v: &DenseMatrix,
        b: &[f64],
    ) -> Result<Vec<f64>, SamplingError> {
        self.check_len(b)?;
        self.check_factors(u, v)?;
        match &self.inner {
            Inner::Mask(mask) => {
                let ut = u.transpose();
                let vt = v.transpose();
                let mut r = vec![0.0; self.p];
                let exec = if self.p < 4096 { Exec::Sequential } else { self.exec };
                const CHUNK: usize = 2048;
                exec.for_each_chunk_mut(&mut r, CHUNK, |c, out| {
                    let base = c * CHUNK;
                    for (o, k) in out.iter_mut().zip(base..) {
                        let i = mask.rows[k] as usize;
                        let j = mask.cols[k] as usize;
                        *o = dense::dot(ut.col(i), vt.col(j)) - b[k];
                    }
                });
                Ok(r)
            }
            _ => {
                let x = dense::matmul_with(self.exec, u, v, false, true)?;
                let mut r = self.apply(&x)?;
                r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= bi);
                Ok(r)
            }
        }
    }

    /// `A*(y) V`, an m x kappa matrix.
    pub fn adjoint_mul(&self, y: &[f64], v: &DenseMatrix) -> Result<DenseMatrix, SamplingError> {
        self.check_len(y)?;
        if v.rows() != self.n {
            return Err(SamplingError::ShapeMismatch {
                expected: (self.n, v.cols()),
                got: v.shape(),
            });
        }
        match &self.inner {
            Inner::Mask(mask) => Ok(scatter(
                self.exec,
                y,
                &mask.by_row,
                &mask.row_ptr,
                &mask.cols,
                &v.transpose(),
            )),
            _ => {
                let ay = self.adjoint(y)?;
                Ok(dense::matmul_with(self.exec, &ay, v, false, false)?)
            }
        }
    }

    /// `A*(y)^T U`, an n x kappa matrix.
    pub fn adjoint_t_mul(&self, y: &[f64], u: &DenseMatrix) -> Result<DenseMatrix, SamplingError> {
        self.check_len(y)?;
        if u.rows() != self.m {
            return Err(SamplingError::ShapeMismatch {
                expected: (self.m, u.cols()),
                got: u.shape(),
            });
        }
        match &self.inner {
            Inner::Mask(mask) => Ok(scatter(
                self.exec,
                y,
                &mask.by_col,
                &mask.col_ptr,
                &mask.rows,
                &u.transpose(),
            )),
            _ => {
                let ay = self.adjoint(y)?;
                Ok(dense::matmul_with(self.exec, &ay, u, true, false)?)
            }
        }
    }

    fn check_factors(&self, u: &DenseMatrix, v: &DenseMatrix) -> Result<(), SamplingError> {
        if u.rows() != self.m || v.rows() != self.n || u.cols() != v.cols() {
            return Err(SamplingError::ShapeMismatch {
                expected: (self.m, self.n),
                got: (u.rows(), v.rows()),
            });
        }
        Ok(())
    }

    /// `||A|| = sup ||A(X)|| / ||X||_F`; exact for masks and full sampling,
    /// power iteration on `A*A` otherwise.
    pub fn operator_norm(&self) -> f64 {
        match &self.inner {
            Inner::Full | Inner::Mask(_) => 1.0,
            Inner::Gaussian(g) => {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
                let dim = self.m * self.n;
                let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                normalize(&mut x);
                let mut lambda = 0.0;
                for _ in 0..20_000 {
                    let xv = DenseMatrix::new(dim, 1, x.clone()).expect("dim > 0");
                    let ax = matmul(&g.stacked, &xv, false, false).expect("conforming");
                    let ata = matmul(&g.stacked, &ax, true, false).expect("conforming");
                    let mut next = ata.into_vec();
                    let q = dense::dot(&x, &next);
                    let nrm = dense::norm2(&next);
                    if nrm == 0.0 {
                        return 0.0;
                    }
                    next.iter_mut().for_each(|v| *v /= nrm);
                    x = next;
                    if (q - lambda).abs() <= 1e-15 * q {
                        lambda = q;
                        break;
                    }
                    lambda = q;
                }
                lambda.sqrt()
            }
        }
    }

    /// Text form. Masks: header `m n` followed by one 0-based `i j` pair per
    /// line. Seeded Gaussian operators: `gaussian m n p seed`. Full: `full m n`.
    pub fn to_text(&self) -> Result<String, SamplingError> {
        let mut s = String::new();
        match &self.inner {
            Inner::Full => writeln!(s, "full {} {}", self.m, self.n).expect("string write"),
            Inner::Mask(mask) => {
                writeln!(s, "{} {}", self.m, self.n).expect("string write");
                for (&i, &j) in mask.rows.iter().zip(&mask.cols) {
                    writeln!(s, "{i} {j}").expect("string write");
                }
            }
            Inner::Gaussian(g) => match g.seed {
                Some(seed) => {
                    writeln!(s, "gaussian {} {} {} {}", self.m, self.n, self.p, seed).expect("string write")
                }
                None => {
                    return Err(SamplingError::Invalid(
                        "explicit sensing matrices have no seed and cannot be serialized".into(),
                    ))
                }
            },
        }
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Self, SamplingError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| SamplingError::Parse("empty operator text".into()))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let num = |t: &str| -> Result<u64, SamplingError> {
            t.parse::<u64>()
                .map_err(|e| SamplingError::Parse(format!("`{t}`: {e}")))
        };
        match tokens.as_slice() {
            ["full", m, n] => Ok(Self::full(num(m)? as usize, num(n)? as usize)),
            ["gaussian", m, n, p, seed] => {
                Self::gaussian(num(m)? as usize, num(n)? as usize, num(p)? as usize, num(seed)?)
            }
            [m, n] => {
                let (m, n) = (num(m)? as usize, num(n)? as usize);
                let mut pairs = Vec::new();
                for line in lines {
                    let mut it = line.split_whitespace();
                    let (Some(i), Some(j), None) = (it.next(), it.next(), it.next()) else {
                        return Err(SamplingError::Parse(format!("bad mask line `{line}`")));
                    };
                    pairs.push((num(i)? as usize, num(j)? as usize));
                }
                Self::from_mask(m, n, &pairs)
            }
            _ => Err(SamplingError::Parse(format!("bad header `{header}`"))),
        }
    }
}

/// Row `t` of the output (stored transposed, kappa entries per column) is
/// `sum_k y_k * other_t.col(partner_k)` over the samples of group `t`.
fn scatter(
    exec: Exec,
    y: &[f64],
    order: &[u32],
    ptr: &[usize],
    partner: &[u32],
    other_t: &DenseMatrix,
) -> DenseMatrix {
    let kappa = other_t.rows();
    let groups = ptr.len() - 1;
    let mut out_t = DenseMatrix::zeros(kappa, groups);
    let exec = if y.len() < 4096 { Exec::Sequential } else { exec };
    exec.for_each_chunk_mut(out_t.as_mut_slice(), kappa, |t, out| {
        for &k in &order[ptr[t]..ptr[t + 1]] {
            let k = k as usize;
            dense::axpy(y[k], other_t.col(partner[k] as usize), out);
        }
    });
    out_t.transpose()
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = dense::norm2(x);
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMethod {
    /// Full sampling: `A*A = I`.
    ExactFull,
    /// Masks: `alpha` is 0 with witness `e_i e_j^T` unless every entry is
    /// sampled, and `beta = 1` with a sampled witness.
    ExactMask,
    /// `k = min(m, n)`: extreme eigenvalues of the stacked Gram matrix.
    ExactDense,
    /// Random rank-k starts refined by alternating power steps.
    MonteCarlo,
}

/// Brackets for the k-restricted smallest (`alpha`) and largest (`beta`)
/// eigenvalues of `A*A`. Consumers needing a guarantee must use
/// `alpha_lower` and `beta_upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedEigEstimate {
    pub k: usize,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub beta_lower: f64,
    pub beta_upper: f64,
    pub samples: usize,
    pub method: EigMethod,
}

impl RestrictedEigEstimate {
    fn exact(k: usize, alpha: f64, beta: f64, method: EigMethod) -> Self {
        Self {
            k,
            alpha_lower: alpha,
            alpha_upper: alpha,
            beta_lower: beta,
            beta_upper: beta,
            samples: 0,
            method,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.alpha_lower == self.alpha_upper && self.beta_lower == self.beta_upper
    }
}

const DENSE_EXACT_LIMIT: usize = 4096;
const REFINE_STEPS: usize = 25;

pub fn estimate_restricted_eigs(
    op: &SamplingOperator,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<RestrictedEigEstimate, SamplingError> {
    let (m, n) = op.shape();
    if k == 0 || k > m.min(n) || samples == 0 {
        return Err(SamplingError::Invalid(format!(
            "need 1 <= k <= min(m, n) = {} and samples >= 1 (k = {k}, samples = {samples})",
            m.min(n)
        )));
    }
    match &op.inner {
        Inner::Full => return Ok(RestrictedEigEstimate::exact(k, 1.0, 1.0, EigMethod::ExactFull)),
        Inner::Mask(_) => {
            let alpha = if op.p == m * n { 1.0 } else { 0.0 };
            return Ok(RestrictedEigEstimate::exact(k, alpha, 1.0, EigMethod::ExactMask));
        }
        Inner::Gaussian(_) => {}
    }
    if k == m.min(n) && m * n <= DENSE_EXACT_LIMIT {
        let (alpha, beta) = dense_gram_extremes(op)?;
        return Ok(RestrictedEigEstimate::exact(k, alpha, beta, EigMethod::ExactDense));
    }

    let norm = op.operator_norm();
    let shift = norm * norm * (1.0 + 1e-12);
    let results = op.exec.map_indexed(samples, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64 + 1);
        let r0 = gaussian_matrix(&mut rng, m, k);
        let l0 = gaussian_matrix(&mut rng, n, k);
        let lo = refine(op, r0.clone(), l0.clone(), false, shift);
        let hi = refine(op, r0, l0, true, shift);
        (lo, hi)
    });
    let mut alpha_upper = f64::INFINITY;
    let mut beta_lower: f64 = 0.0;
    for (lo, hi) in results {
        alpha_upper = alpha_upper.min(lo?);
        beta_lower = beta_lower.max(hi?);
    }
    Ok(RestrictedEigEstimate {
        k,
        alpha_lower: 0.0,
        alpha_upper,
        beta_lower,
        beta_upper: (norm * norm).max(beta_lower),
        samples,
        method: EigMethod::MonteCarlo,
    })
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn quotient(op: &SamplingOperator, r: &DenseMatrix, l: &DenseMatrix) -> Result<f64, SamplingError> {
    let x = matmul(r, l, false, true)?;
    let nx = x.frobenius_norm();
    if nx == 0.0 {
        return Ok(f64::NAN);
    }
    let y = op.apply(&x)?;
    Ok(dense::dot(&y, &y) / (nx * nx))
}

/// Alternating power steps on the factored manifold `X = R L^T`.
/// Maximizing uses `A*A`, minimizing uses the shifted `shift I - A*A`; both
/// Rayleigh quotients are monotone along the iteration.
fn refine(
    op: &SamplingOperator,
    mut r: DenseMatrix,
    mut l: DenseMatrix,
    maximize: bool,
    shift: f64,
) -> Result<f64, SamplingError> {
    let better = |a: f64, b: f64| if maximize { a.max(b) } else { a.min(b) };
    let mut best = quotient(op, &r, &l)?;
    if best.is_nan() {
        best = if maximize { 0.0 } else { f64::INFINITY };
    }
    for _ in 0..REFINE_STEPS {
        for side in 0..2 {
            // orthonormalize the fixed factor, absorbing its R-factor
            let (fixed, free) = if side == 0 { (&mut l, &mut r) } else { (&mut r, &mut l) };
            let (q, t) = thin_qr(fixed)?;
            *free = matmul(free, &t, false, true)?;
            *fixed = q;
            let (rr, ll) = if side == 0 { (&*free, &*fixed) } else { (&*fixed, &*free) };
            let y = op.apply(&matmul(rr, ll, false, true)?)?;
            let g = if side == 0 {
                op.adjoint_mul(&y, ll)?
            } else {
                op.adjoint_t_mul(&y, rr)?
            };
            let mut next = if maximize {
                g
            } else {
                let mut s = free.scaled(shift);
                s.axpy(-1.0, &g);
                s
            };
            if normalize(next.as_mut_slice()) == 0.0 {
                continue;
            }
            *free = next;
            let qv = quotient(op, &r, &l)?;
            if qv.is_finite() {
                best = better(best, qv);
            }
        }
    }
    Ok(best)
}

fn dense_gram_extremes(op: &SamplingOperator) -> Result<(f64, f64), SamplingError> {
    let (m, n) = op.shape();
    let dim = m * n;
    let stacked = match &op.inner {
        Inner::Gaussian(g) => g.stacked.clone(),
        _ => {
            let mut s = DenseMatrix::zeros(op.p, dim);
            for c in 0..dim {
                let mut e = DenseMatrix::zeros(m, n);
                e.as_mut_slice()[c] = 1.0;
                s.col_mut(c).copy_from_slice(&op.apply(&e)?);
            }
            s
        }
    };
    let sv = dense::svd(&stacked)?.sigma;
    let beta = sv[0] * sv[0];
    let alpha = if op.p < dim {
        0.0
    } else {
        let s = *sv.last().expect("nonempty");
        s * s
    };
    Ok((alpha, beta))
}

/// Slack of `|2/(alpha+beta) <A(X), A(Y)> - <X, Y>| <= (beta-alpha)/(beta+alpha) ||X|| ||Y||`;
/// nonnegative means the inequality holds. `(alpha, beta)` must be
/// r-restricted values with `rank([X Y]) <= r`; this is not checked.
pub fn check_restricted_inner_product(
    op: &SamplingOperator,
    alpha: f64,
    beta: f64,
    x: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<f64, SamplingError> {
    let ax = op.apply(x)?;
    let ay = op.apply(y)?;
    let lhs = (2.0 / (alpha + beta) * dense::dot(&ax, &ay) - x.frob_dot(y)).abs();
    let rhs = (beta - alpha) / (beta + alpha) * x.frobenius_norm() * y.frobenius_norm();
    Ok(rhs - lhs)
}
