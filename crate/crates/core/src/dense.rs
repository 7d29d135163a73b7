//! Dense real matrices and the handful of kernels the solver needs:
//! products, Frobenius and spectral norms, thin QR and a one-sided Jacobi SVD.
//!
//! Storage is column-major: entry `(i, j)` lives at `data[i + j * rows]`, so
//! every column is a contiguous slice. The factor matrices `U` (m x kappa)
//! and `V` (n x kappa) are therefore stored as kappa contiguous columns, which
//! is what the column-group penalties operate on.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DenseError {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid shape {rows}x{cols} for {len} entries")]
    InvalidShape { rows: usize, cols: usize, len: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("SVD did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },
}

/// Column-major dense matrix with at least one row and one column.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                write!(f, "{:>12.5e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

impl DenseMatrix {
    /// Wraps column-major `data`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DenseError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(DenseError::InvalidShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row slices, which reads naturally in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, DenseError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(DenseError::InvalidShape {
                rows: r,
                cols: c,
                len: rows.iter().map(|row| row.len()).sum(),
            });
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Column-major entries.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.data[j + i * self.cols] = self.data[i + j * self.rows];
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Frobenius inner product; panics on shape mismatch.
    pub fn frob_dot(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "frob_dot shape mismatch");
        dot(&self.data, &other.data)
    }

    pub fn scale_mut(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.scale_mut(alpha);
        m
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        axpy(alpha, &other.data, &mut self.data);
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut m = self.clone();
        m.axpy(-1.0, other);
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = self.clone();
        m.axpy(1.0, other);
        m
    }

    /// Copy of the columns `range`.
    pub fn columns(&self, start: usize, count: usize) -> Self {
        assert!(count > 0 && start + count <= self.cols);
        Self {
            rows: self.rows,
            cols: count,
            data: self.data[start * self.rows..(start + count) * self.rows].to_vec(),
        }
    }

    /// Zero-padded copy with `cols` columns (truncates when smaller).
    pub fn resize_cols(&self, cols: usize) -> Self {
        let mut m = Self::zeros(self.rows, cols);
        let keep = cols.min(self.cols) * self.rows;
        m.data[..keep].copy_from_slice(&self.data[..keep]);
        m
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators; the order is fixed so results are reproducible.
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `op(A) * op(B)` where `op` optionally transposes.
pub fn matmul(
    a: &DenseMatrix,
    b: &DenseMatrix,
    transpose_a: bool,
    transpose_b: bool,
) -> Result<DenseMatrix, DenseError> {
    matmul_with(Exec::default(), a, b, transpose_a, transpose_b)
}

pub fn matmul_with(
    exec: Exec,
    a: &DenseMatrix,
    b: &DenseMatrix,
    transpose_a: bool,
    transpose_b: bool,
) -> Result<DenseMatrix, DenseError> {
    let (m, ka) = if transpose_a {
        (a.cols, a.rows)
    } else {
        (a.rows, a.cols)
    };
    let (kb, n) = if transpose_b {
        (b.cols, b.rows)
    } else {
        (b.rows, b.cols)
    };
    if ka != kb {
        return Err(DenseError::DimensionMismatch {
            op: "matmul",
            left: (m, ka),
            right: (kb, n),
        });
    }
    let k = ka;
    let mut c = DenseMatrix::zeros(m, n);
    // Small products are not worth a rayon dispatch.
    let exec = if m * n * k < 32_768 {
        Exec::Sequential
    } else {
        exec
    };
    exec.for_each_chunk_mut(&mut c.data, m, |j, out| {
        let gathered;
        let bj: &[f64] = if transpose_b {
            gathered = (0..k).map(|l| b.data[j + l * b.rows]).collect::<Vec<_>>();
            &gathered
        } else {
            b.col(j)
        };
        if transpose_a {
            for (i, o) in out.iter_mut().enumerate() {
                *o = dot(a.col(i), bj);
            }
        } else {
            for (l, &blj) in bj.iter().enumerate() {
                if blj != 0.0 {
                    axpy(blj, a.col(l), out);
                }
            }
        }
    });
    Ok(c)
}

/// Euclidean norm of every column.
pub fn column_norms(x: &DenseMatrix) -> Vec<f64> {
    (0..x.cols).map(|j| norm2(x.col(j))).collect()
}

/// Number of columns whose Euclidean norm exceeds `tol`.
pub fn l20_norm(x: &DenseMatrix, tol: f64) -> usize {
    column_norms(x).into_iter().filter(|&v| v > tol).count()
}

/// Default zero-column tolerance, `1e-8 * max(1, ||X||_F)`.
pub fn default_zero_tol(x: &DenseMatrix) -> f64 {
    1e-8 * x.frobenius_norm().max(1.0)
}

/// Thin QR of a matrix with `rows >= cols` via Householder reflections.
/// Returns `(Q, R)` with `Q` of size rows x cols and `R` upper triangular.
pub fn thin_qr(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix), DenseError> {
    let (m, n) = a.shape();
    if m < n {
        return Err(DenseError::DimensionMismatch {
            op: "thin_qr",
            left: (m, n),
            right: (n, n),
        });
    }
    let mut work = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let col = &work.col(k)[k..];
        let alpha = norm2(col);
        let mut v = col.to_vec();
        if alpha == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm = norm2(&v);
        v.iter_mut().for_each(|x| *x /= vnorm);
        for j in k..n {
            let cj = &mut work.col_mut(j)[k..];
            let s = 2.0 * dot(&v, cj);
            axpy(-s, &v, cj);
        }
        reflectors.push(v);
    }
    let mut r = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            r[(i, j)] = work[(i, j)];
        }
    }
    let mut q = DenseMatrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = 1.0;
    }
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..n {
            let cj = &mut q.col_mut(j)[k..];
            let s = 2.0 * dot(v, cj);
            axpy(-s, v, cj);
        }
    }
    Ok((q, r))
}

/// Thin singular value decomposition `X = P diag(sigma) Q^T`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// m x k, orthonormal columns.
    pub p: DenseMatrix,
    /// Nonincreasing, length `k = min(m, n)`.
    pub sigma: Vec<f64>,
    /// n x k, orthonormal columns.
    pub q: DenseMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut ps = self.p.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            ps.col_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        matmul(&ps, &self.q, false, true).expect("svd factors conform")
    }

    /// Numerical rank with cutoff `rel_tol * sigma_1`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let s1 = self.sigma.first().copied().unwrap_or(0.0);
        if s1 == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > rel_tol * s1).count()
    }
}

const MAX_SWEEPS: usize = 80;

pub fn svd(x: &DenseMatrix) -> Result<SvdResult, DenseError> {
    svd_with(Exec::default(), x)
}

pub fn svd_with(exec: Exec, x: &DenseMatrix) -> Result<SvdResult, DenseError> {
    if !x.is_finite() {
        return Err(DenseError::NonFinite);
    }
    let (m, n) = x.shape();
    if m < n {
        let t = svd_with(exec, &x.transpose())?;
        return Ok(SvdResult {
            p: t.q,
            sigma: t.sigma,
            q: t.p,
        });
    }
    if m > n {
        let (qa, r) = thin_qr(x)?;
        let inner = jacobi_square(exec, &r)?;
        let p = matmul_with(exec, &qa, &inner.p, false, false)?;
        return Ok(SvdResult {
            p,
            sigma: inner.sigma,
            q: inner.q,
        });
    }
    jacobi_square(exec, x)
}

/// Round-robin pairing: `n` (even) players, `n - 1` rounds of disjoint pairs.
fn round_robin(n: usize) -> Vec<Vec<(usize, usize)>> {
    let np = n + (n % 2);
    let mut ring: Vec<usize> = (0..np).collect();
    let mut rounds = Vec::with_capacity(np - 1);
    for _ in 0..np.saturating_sub(1) {
        let mut pairs = Vec::with_capacity(np / 2);
        for k in 0..np / 2 {
            let (a, b) = (ring[k], ring[np - 1 - k]);
            if a < n && b < n {
                pairs.push((a.min(b), a.max(b)));
            }
        }
        rounds.push(pairs);
        // keep ring[0] fixed, rotate the rest
        let last = ring[np - 1];
        for k in (2..np).rev() {
            ring[k] = ring[k - 1];
        }
        if np > 1 {
            ring[1] = last;
        }
    }
    rounds
}

struct PairTask<'a> {
    ap: &'a mut [f64],
    aq: &'a mut [f64],
    vp: &'a mut [f64],
    vq: &'a mut [f64],
    alpha: f64,
    beta: f64,
    ratio: f64,
}

/// One-sided (Hestenes) Jacobi on a square matrix. Disjoint column pairs of a
/// round are rotated concurrently; the schedule is fixed, so the result does
/// not depend on the execution policy.
fn jacobi_square(exec: Exec, x: &DenseMatrix) -> Result<SvdResult, DenseError> {
    let (m, n) = x.shape();
    let mut a = x.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = x.frobenius_norm();
    if scale == 0.0 {
        return Ok(SvdResult {
            p: identity_cols(m, n),
            sigma: vec![0.0; n],
            q: DenseMatrix::identity(n),
        });
    }
    let tol = 1e-15;
    let tiny = (f64::EPSILON * scale).powi(2) * 1e-4;
    let rounds = round_robin(n);
    let exec = if n < 24 { Exec::Sequential } else { exec };
    let mut converged = false;
    let mut last_residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut norms: Vec<f64> = (0..n).map(|j| dot(a.col(j), a.col(j))).collect();
        let mut max_ratio: f64 = 0.0;
        {
            let mut acols: Vec<Option<&mut [f64]>> = a.data.chunks_mut(m).map(Some).collect();
            let mut vcols: Vec<Option<&mut [f64]>> = v.data.chunks_mut(n).map(Some).collect();
            for pairs in &rounds {
                let mut tasks: Vec<(usize, usize, PairTask<'_>)> = pairs
                    .iter()
                    .map(|&(p, q)| {
                        let task = PairTask {
                            ap: acols[p].take().expect("disjoint pairs"),
                            aq: acols[q].take().expect("disjoint pairs"),
                            vp: vcols[p].take().expect("disjoint pairs"),
                            vq: vcols[q].take().expect("disjoint pairs"),
                            alpha: norms[p],
                            beta: norms[q],
                            ratio: 0.0,
                        };
                        (p, q, task)
                    })
                    .collect();
                exec.for_each_mut(&mut tasks, |(_, _, t)| rotate_pair(t, tol, tiny));
                for (p, q, t) in tasks {
                    norms[p] = t.alpha;
                    norms[q] = t.beta;
                    max_ratio = max_ratio.max(t.ratio);
                    acols[p] = Some(t.ap);
                    acols[q] = Some(t.aq);
                    vcols[p] = Some(t.vp);
                    vcols[q] = Some(t.vq);
                }
            }
        }
        last_residual = max_ratio;
        if max_ratio <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(DenseError::NonConvergence {
            sweeps,
            residual: last_residual,
        });
    }

    let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, norm2(a.col(j)))).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let sigma: Vec<f64> = order.iter().map(|&(_, s)| s).collect();
    let cutoff = f64::EPSILON * scale * 16.0;
    let mut p = DenseMatrix::zeros(m, n);
    let mut q = DenseMatrix::zeros(n, n);
    let mut deficient = Vec::new();
    for (k, &(j, s)) in order.iter().enumerate() {
        q.col_mut(k).copy_from_slice(v.col(j));
        if s > cutoff {
            let pk = p.col_mut(k);
            for (o, &x) in pk.iter_mut().zip(a.col(j)) {
                *o = x / s;
            }
        } else {
            deficient.push(k);
        }
    }
    complete_basis(&mut p, &deficient);
    Ok(SvdResult { p, sigma, q })
}

fn rotate_pair(t: &mut PairTask<'_>, tol: f64, tiny: f64) {
    let (alpha, beta) = (t.alpha, t.beta);
    if alpha <= tiny || beta <= tiny {
        t.ratio = 0.0;
        return;
    }
    let gamma = dot(t.ap, t.aq);
    let ratio = gamma.abs() / (alpha * beta).sqrt();
    t.ratio = ratio;
    if ratio <= tol {
        return;
    }
    let zeta = (beta - alpha) / (2.0 * gamma);
    let tan = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let c = 1.0 / (1.0 + tan * tan).sqrt();
    let s = c * tan;
    for (x, y) in t.ap.iter_mut().zip(t.aq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
    for (x, y) in t.vp.iter_mut().zip(t.vq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
    t.alpha = alpha - tan * gamma;
    t.beta = beta + tan * gamma;
}

fn identity_cols(m: usize, n: usize) -> DenseMatrix {
    let mut p = DenseMatrix::zeros(m, n);
    for j in 0..n.min(m) {
        p[(j, j)] = 1.0;
    }
    p
}

/// Fills the listed columns of `p` with unit vectors orthogonal to every
/// other column (twice-iterated Gram-Schmidt against standard basis vectors).
fn complete_basis(p: &mut DenseMatrix, deficient: &[usize]) {
    if deficient.is_empty() {
        return;
    }
    let m = p.rows;
    let mut filled: Vec<bool> = vec![true; p.cols];
    for &k in deficient {
        filled[k] = false;
    }
    let mut next_basis = 0usize;
    for &k in deficient {
        while next_basis < m {
            let mut cand = vec![0.0; m];
            cand[next_basis] = 1.0;
            next_basis += 1;
            for _ in 0..2 {
                for j in 0..p.cols {
                    if filled[j] {
                        let c = dot(p.col(j), &cand);
                        axpy(-c, p.col(j), &mut cand);
                    }
                }
            }
            let nrm = norm2(&cand);
            if nrm > 0.5 {
                cand.iter_mut().for_each(|x| *x /= nrm);
                p.col_mut(k).copy_from_slice(&cand);
                filled[k] = true;
                break;
            }
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(x: &DenseMatrix) -> Result<f64, DenseError> {
    Ok(svd(x)?.sigma[0])
}

/// Singular values of `U V^T` computed from the small core `R_U R_V^T`
/// when both factors are tall, without forming the m x n product.
pub fn factored_singular_values(u: &DenseMatrix, v: &DenseMatrix) -> Result<Vec<f64>, DenseError> {
    if u.cols() != v.cols() {
        return Err(DenseError::DimensionMismatch {
            op: "factored_singular_values",
            left: u.shape(),
            right: v.shape(),
        });
    }
    let k = u.cols();
    if u.rows() >= k && v.rows() >= k {
        let (_, ru) = thin_qr(u)?;
        let (_, rv) = thin_qr(v)?;
        let core = matmul(&ru, &rv, false, true)?;
        Ok(svd(&core)?.sigma)
    } else {
        Ok(svd(&matmul(u, v, false, true)?)?.sigma)
    }
}
