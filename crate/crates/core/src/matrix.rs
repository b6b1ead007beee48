//! Dense real matrices and the deterministic kernels the decompositions are
//! built from.
//!
//! [`DenseMatrix`] stores its entries column-major (entry `(i, j)` lives at
//! offset `i + j * rows`), which is the nalgebra layout it wraps. It is
//! immutable after construction and dereferences to the underlying
//! `DMatrix<f64>` for read-only access.

use std::collections::HashSet;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use nalgebra_lapack::QrDecomposition;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Wraps an nalgebra matrix, rejecting NaN and infinite entries.
    pub fn from_nalgebra(m: DMatrix<f64>) -> Result<Self> {
        check_finite(&m)?;
        Ok(Self(m))
    }

    /// Entries are given row by row.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::from_nalgebra(DMatrix::from_row_slice(rows, cols, data))
    }

    /// Entries are given column by column (the storage order).
    pub fn from_column_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::from_nalgebra(DMatrix::from_column_slice(rows, cols, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {ncols}",
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), ncols, &flat)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        Self::from_nalgebra(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    /// Internal constructor for kernel outputs, which are finite whenever
    /// their inputs are.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(m.iter().all(|v| v.is_finite()), "non-finite kernel output");
        Self(m)
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self::from_trusted(&self.0 * &rhs.0))
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<Self> {
        same_shape(self, rhs)?;
        Ok(Self::from_trusted(&self.0 - &rhs.0))
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<Self> {
        same_shape(self, rhs)?;
        Ok(Self::from_trusted(&self.0 + &rhs.0))
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        Self::from_nalgebra(&self.0 * factor)
    }

    /// Copies of the addressed columns, in the order given by `idx`.
    pub fn select_columns(&self, idx: &IndexList) -> Result<Self> {
        idx.check_bound(self.cols())?;
        Ok(Self(self.0.select_columns(idx.as_slice())))
    }

    /// Copies of the addressed rows, in the order given by `idx`.
    pub fn select_rows(&self, idx: &IndexList) -> Result<Self> {
        idx.check_bound(self.rows())?;
        Ok(Self(self.0.select_rows(idx.as_slice())))
    }

    /// The leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> Result<Self> {
        if k > self.cols() {
            return Err(Error::Dimension(format!(
                "requested {k} leading columns of a matrix with {}",
                self.cols()
            )));
        }
        Ok(Self(self.0.columns(0, k).into_owned()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl TryFrom<DMatrix<f64>> for DenseMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        Self::from_nalgebra(m)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::NonFinite {
            row: pos % m.nrows(),
            col: pos / m.nrows(),
        }),
        None => Ok(()),
    }
}

fn same_shape(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Ordered list of pairwise distinct zero-based row or column positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexList(Vec<usize>);

impl IndexList {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(indices.len());
        for &i in &indices {
            if !seen.insert(i) {
                return Err(Error::DuplicateIndex(i));
            }
        }
        Ok(Self(indices))
    }

    /// Like [`IndexList::new`], additionally requiring every index `< bound`.
    pub fn with_bound(indices: Vec<usize>, bound: usize) -> Result<Self> {
        let list = Self::new(indices)?;
        list.check_bound(bound)?;
        Ok(list)
    }

    pub fn check_bound(&self, bound: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= bound) {
            Some(&index) => Err(Error::IndexOutOfRange { index, bound }),
            None => Ok(()),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl<'a> IntoIterator for &'a IndexList {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Thin Householder QR, `A = QR` with `Q` having orthonormal columns and `R`
/// upper triangular with a nonnegative diagonal.
pub fn qr_thin(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if a.rows() < a.cols() {
        return Err(Error::Dimension(format!(
            "thin QR needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let (q, r) = qr_parts(a);
    Ok((DenseMatrix::from_trusted(q), DenseMatrix::from_trusted(r)))
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    /// rows × r, r = min(rows, cols)
    pub u: DenseMatrix,
    /// Non-increasing, nonnegative.
    pub s: Vec<f64>,
    /// cols × r
    pub v: DenseMatrix,
}

pub fn svd_thin(a: &DenseMatrix) -> ThinSvd {
    let (u, s, v) = svd_parts(a);
    ThinSvd {
        u: DenseMatrix::from_trusted(u),
        s,
        v: DenseMatrix::from_trusted(v),
    }
}

/// Minimum-norm least-squares solution of `A X ≈ B`.
pub fn lstsq_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "least squares with {} equations but right-hand side has {} rows",
            a.rows(),
            b.rows()
        )));
    }
    let (x, _rank) = lstsq_parts(a, b);
    Ok(DenseMatrix::from_trusted(x))
}

/// Spectral norm (largest singular value).
pub fn two_norm(a: &DenseMatrix) -> f64 {
    spectral_norm(a)
}

// ---------------------------------------------------------------------------
// Kernels on raw nalgebra storage, shared by the other modules.

pub(crate) fn qr_parts(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    if n == 0 {
        return (DMatrix::zeros(m, 0), DMatrix::zeros(0, 0));
    }
    if m >= 4 * n {
        if let Some(qr) = cholesky_qr2(a) {
            return qr;
        }
    }
    let (mut q, mut r) = match nalgebra_lapack::QR::new(a.clone()) {
        Ok(qr) => (qr.q(), qr.r()),
        Err(_) => {
            let qr = a.clone().qr();
            (qr.q(), qr.r())
        }
    };
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            r.row_mut(j).neg_mut();
            q.column_mut(j).neg_mut();
        }
    }
    (q, r)
}

/// Two passes of Cholesky QR. `None` once the first pass is too far from
/// orthonormal for the second to repair it.
fn cholesky_qr2(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.ncols();
    let pass = |x: &DMatrix<f64>| -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let r = (x.transpose() * x).cholesky()?.l().transpose();
        let r_inv = r.clone().try_inverse()?;
        Some((x * r_inv, r))
    };
    let (q1, r1) = pass(a)?;
    let gram = q1.transpose() * &q1;
    if (gram - DMatrix::<f64>::identity(n, n)).norm() > 0.5 {
        return None;
    }
    let (q, r2) = pass(&q1)?;
    let r = r2 * r1;
    (q.iter().all(|v| v.is_finite()) && r.iter().all(|v| v.is_finite())).then_some((q, r))
}

/// Returns `(U, s, V)` with `s` sorted non-increasingly.
pub(crate) fn svd_parts(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    if m.min(n) == 0 {
        return (DMatrix::zeros(m, 0), Vec::new(), DMatrix::zeros(n, 0));
    }
    if m < n {
        let (u, s, v) = svd_parts(&a.transpose());
        return (v, s, u);
    }
    // Reduce to the square triangular factor so LAPACK never forms an m × m U.
    let (q, r) = if m > n { qr_parts(a) } else { (DMatrix::identity(n, n), a.clone()) };
    let (ur, s, v) = square_svd(r);
    (q * ur, s, v)
}

fn square_svd(r: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    match nalgebra_lapack::SVD::new(r.clone()) {
        Some(svd) => (svd.u, svd.singular_values.iter().copied().collect(), svd.vt.transpose()),
        None => {
            let svd = r.svd(true, true);
            let n = svd.singular_values.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
            let u = svd.u.expect("left vectors requested").select_columns(&order);
            let v = svd.v_t.expect("right vectors requested").transpose().select_columns(&order);
            (u, order.iter().map(|&i| svd.singular_values[i]).collect(), v)
        }
    }
}

pub(crate) fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let (m, n) = a.shape();
    if m.min(n) == 0 {
        return Vec::new();
    }
    let r = match m.cmp(&n) {
        std::cmp::Ordering::Greater => a.clone().qr().r(),
        std::cmp::Ordering::Less => a.transpose().qr().r(),
        std::cmp::Ordering::Equal => a.clone(),
    };
    square_svd(r).1
}

/// Numerical rank threshold used throughout: `max(m, n) · ε · σ_max`.
pub(crate) fn rank_tolerance(m: usize, n: usize, smax: f64) -> f64 {
    (m.max(n) as f64) * f64::EPSILON * smax
}

pub(crate) fn lstsq_parts(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (m, n) = a.shape();
    let (u, s, v) = svd_parts(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let tol = rank_tolerance(m, n, smax);
    let rank = s.iter().take_while(|&&x| x > tol).count();
    if rank == 0 {
        return (DMatrix::zeros(n, b.ncols()), 0);
    }
    let ur = u.columns(0, rank);
    let mut coeff = ur.transpose() * b;
    for (i, sv) in s.iter().take(rank).enumerate() {
        coeff.row_mut(i).scale_mut(1.0 / sv);
    }
    (v.columns(0, rank) * coeff, rank)
}

pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0.0;
    }
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    // The Gram matrix of the short side is small and its top eigenvalue is
    // well conditioned; prescaling keeps the squares in range.
    let scaled = a / scale;
    let gram = if m >= n {
        scaled.transpose() * &scaled
    } else {
        &scaled * scaled.transpose()
    };
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0_f64, f64::max);
    top.max(0.0).sqrt() * scale
}

/// Extends a matrix with orthonormal columns (p×r) to a square orthogonal
/// matrix `[Q, Q⊥]`. The first `r` columns are `q` itself.
pub(crate) fn complete_orthonormal(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, r) = q.shape();
    let mut full = DMatrix::zeros(p, p);
    full.columns_mut(0, r).copy_from(q);
    if r < p {
        full.columns_mut(r, p - r).copy_from(&orthonormal_complement(q));
    }
    full
}

/// Orthonormal basis (p×(p−r)) of the orthogonal complement of the column
/// space of `q`, via the compact WY form `I − V T Vᵀ` of a Householder QR.
pub(crate) fn orthonormal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, r) = q.shape();
    assert!(r <= p, "complement of a wide matrix");
    if r == 0 {
        return DMatrix::identity(p, p);
    }
    let mut work = q.clone();
    let mut v = DMatrix::<f64>::zeros(p, r);
    let mut tau = vec![0.0; r];

    for j in 0..r {
        let (t, beta) = {
            let x = work.view((j, j), (p - j, 1));
            let alpha = x[0];
            let tail_sq: f64 = x.iter().skip(1).map(|v| v * v).sum();
            if tail_sq == 0.0 {
                (0.0, alpha)
            } else {
                let norm = (alpha * alpha + tail_sq).sqrt();
                let beta = if alpha >= 0.0 { -norm } else { norm };
                ((beta - alpha) / beta, beta)
            }
        };
        tau[j] = t;
        v[(j, j)] = 1.0;
        if t != 0.0 {
            let denom = work[(j, j)] - beta;
            for i in j + 1..p {
                v[(i, j)] = work[(i, j)] / denom;
            }
            // Apply H = I − τ v vᵀ to the trailing columns.
            for c in j + 1..r {
                let mut dot = 0.0;
                for i in j..p {
                    dot += v[(i, j)] * work[(i, c)];
                }
                let f = t * dot;
                for i in j..p {
                    work[(i, c)] -= f * v[(i, j)];
                }
            }
        }
    }

    // T upper triangular with Q = I − V T Vᵀ.
    let mut tmat = DMatrix::<f64>::zeros(r, r);
    for j in 0..r {
        tmat[(j, j)] = tau[j];
        if j > 0 && tau[j] != 0.0 {
            let w = v.columns(0, j).transpose() * v.column(j);
            let col = tmat.view((0, 0), (j, j)) * w * (-tau[j]);
            tmat.view_mut((0, j), (j, 1)).copy_from(&col);
        }
    }

    // Columns r..p of Q: E − V T (Vᵀ E) where Vᵀ E is the lower block of V.
    let vt_e = v.rows(r, p - r).transpose();
    let mut comp = -(&v * (&tmat * vt_e));
    for i in 0..p - r {
        comp[(r + i, i)] += 1.0;
    }
    comp
}
