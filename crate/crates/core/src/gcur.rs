//! Generalized CUR of a matrix pair: `A ≈ A(:,p) M_A A(s_A,:)` and
//! `B ≈ B(:,p) M_B B(s_B,:)` with a shared column index list `p`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gsvd::{gsvd, randomized_gsvd_width, GsvdFactors};
use crate::matrix::{
    lstsq_parts, singular_values, spectral_norm, svd_parts, DenseMatrix, IndexList,
};
use crate::selection::{deim_select, ldeim_select};
use crate::sketch::SketchConfig;
use crate::synth::relative_error;

/// Index selector applied to the factor bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Selector {
    Deim,
    Ldeim,
}

/// Which matrices of a pair get their own factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Sides {
    #[default]
    Both,
    /// Skip the row selection and middle matrix of `B`.
    AOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcurFactors {
    pub p: IndexList,
    pub s_a: IndexList,
    pub s_b: Option<IndexList>,
    pub m_a: DenseMatrix,
    pub m_b: Option<DenseMatrix>,
    pub k: usize,
}

impl GcurFactors {
    pub fn approx_a(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        cur_product(a, &self.p, &self.m_a, &self.s_a)
    }

    pub fn approx_b(&self, b: &DenseMatrix) -> Result<Option<DenseMatrix>> {
        match (&self.s_b, &self.m_b) {
            (Some(s), Some(m)) => Ok(Some(cur_product(b, &self.p, m, s)?)),
            _ => Ok(None),
        }
    }
}

/// One-sided CUR `A ≈ A(:,p) M A(s,:)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurFactors {
    pub p: IndexList,
    pub s: IndexList,
    pub m: DenseMatrix,
}

impl CurFactors {
    pub fn approx(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        cur_product(a, &self.p, &self.m, &self.s)
    }
}

/// `M(:,p) · mid · M(s,:)`.
pub fn cur_product(
    m: &DenseMatrix,
    p: &IndexList,
    mid: &DenseMatrix,
    s: &IndexList,
) -> Result<DenseMatrix> {
    let c = m.select_columns(p)?;
    let r = m.select_rows(s)?;
    if mid.shape() != (p.len(), s.len()) {
        return Err(Error::Dimension(format!(
            "middle matrix is {}x{}, expected {}x{}",
            mid.rows(),
            mid.cols(),
            p.len(),
            s.len()
        )));
    }
    Ok(DenseMatrix::from_trusted(&*c * (&**mid * &*r)))
}

/// `C† M R†` with `C = M(:,p)`, `R = M(s,:)`, computed as `C \ (M / R)`.
pub fn middle_matrix(m: &DenseMatrix, p: &IndexList, s: &IndexList) -> Result<DenseMatrix> {
    let k = p.len();
    if s.len() != k {
        return Err(Error::Dimension(format!(
            "{k} column indices but {} row indices",
            s.len()
        )));
    }
    let c = m.select_columns(p)?;
    let r = m.select_rows(s)?;
    let (right, rank_r) = lstsq_parts(&r.transpose(), &m.transpose());
    if rank_r < k {
        return Err(Error::SingularBlock { side: "row", rank: rank_r, k });
    }
    let (mid, rank_c) = lstsq_parts(&c, &right.transpose());
    if rank_c < k {
        return Err(Error::SingularBlock { side: "column", rank: rank_c, k });
    }
    Ok(DenseMatrix::from_trusted(mid))
}

/// Indices from the leading columns of `basis`: DEIM on `k` columns, or
/// L-DEIM on `khat` columns extended to `k` indices.
pub(crate) fn select_from(
    basis: &DMatrix<f64>,
    selector: Selector,
    k: usize,
    khat: usize,
) -> Result<IndexList> {
    let width = match selector {
        Selector::Deim => k,
        Selector::Ldeim => khat,
    };
    if width > basis.ncols() {
        return Err(Error::InvalidParameter(format!(
            "selector needs {width} basis columns but only {} are available",
            basis.ncols()
        )));
    }
    let v = DenseMatrix::from_trusted(basis.columns(0, width).into_owned());
    Ok(match selector {
        Selector::Deim => deim_select(&v)?.indices,
        Selector::Ldeim => ldeim_select(&v, k)?.indices,
    })
}

fn check_budget(k: usize, khat: usize, n: usize, selector: Selector) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("rank {k} must lie in 1..={n}")));
    }
    if selector == Selector::Ldeim && (khat == 0 || khat > k) {
        return Err(Error::InvalidParameter(format!(
            "L-DEIM budget {khat} must lie in 1..={k}"
        )));
    }
    Ok(())
}

fn assemble(
    a: &DenseMatrix,
    b: &DenseMatrix,
    f: &GsvdFactors,
    k: usize,
    selector: Selector,
    khat: usize,
    sides: Sides,
) -> Result<GcurFactors> {
    let pick = |basis: &DMatrix<f64>| select_from(basis, selector, k, khat);
    let (p, (s_a, s_b)) = rayon::join(
        || pick(&f.y),
        || {
            rayon::join(
                || pick(&f.u),
                || match sides {
                    Sides::Both => pick(&f.v).map(Some),
                    Sides::AOnly => Ok(None),
                },
            )
        },
    );
    let (p, s_a, s_b) = (p?, s_a?, s_b?);
    let m_a = middle_matrix(a, &p, &s_a)?;
    let m_b = match &s_b {
        Some(s) => Some(middle_matrix(b, &p, s)?),
        None => None,
    };
    Ok(GcurFactors { p, s_a, s_b, m_a, m_b, k })
}

/// GCUR from the full GSVD of `(A, B)`.
pub fn gcur_deterministic(
    a: &DenseMatrix,
    b: &DenseMatrix,
    k: usize,
    selector: Selector,
    khat: usize,
    sides: Sides,
) -> Result<GcurFactors> {
    check_budget(k, khat, a.cols(), selector)?;
    let f = gsvd(a, b)?;
    assemble(a, b, &f, k, selector, khat, sides)
}

/// GCUR from a randomized GSVD with sketch width `k + p`, DEIM selection.
pub fn r_deim_gcur(
    a: &DenseMatrix,
    b: &DenseMatrix,
    cfg: &SketchConfig,
    sides: Sides,
) -> Result<GcurFactors> {
    let k = cfg.k();
    check_budget(k, k, a.cols(), Selector::Deim)?;
    let (f, _) = randomized_gsvd_width(a, b, k + cfg.p(), cfg.seed())?;
    assemble(a, b, &f, k, Selector::Deim, k, sides)
}

/// GCUR from a randomized GSVD with sketch width `k̂ + p`, L-DEIM selection.
pub fn r_ldeim_gcur(
    a: &DenseMatrix,
    b: &DenseMatrix,
    cfg: &SketchConfig,
    sides: Sides,
) -> Result<GcurFactors> {
    let (k, khat) = (cfg.k(), cfg.khat());
    check_budget(k, khat, a.cols(), Selector::Ldeim)?;
    let (f, _) = randomized_gsvd_width(a, b, khat + cfg.p(), cfg.seed())?;
    assemble(a, b, &f, k, Selector::Ldeim, khat, sides)
}

/// Ordinary CUR from the SVD of `A`.
pub fn cur(a: &DenseMatrix, k: usize, selector: Selector, khat: usize) -> Result<CurFactors> {
    check_budget(k, khat, a.rows().min(a.cols()), selector)?;
    let (u, _, v) = svd_parts(a);
    let (p, s) = rayon::join(
        || select_from(&v, selector, k, khat),
        || select_from(&u, selector, k, khat),
    );
    let (p, s) = (p?, s?);
    let m = middle_matrix(a, &p, &s)?;
    Ok(CurFactors { p, s, m })
}

/// `‖A − C_A M_A R_A‖ / ‖A‖`.
pub fn gcur_error(a: &DenseMatrix, f: &GcurFactors) -> Result<f64> {
    relative_error(a, &f.approx_a(a)?)
}

/// `‖B − C_B M_B R_B‖ / ‖B‖`, `None` when the B side was skipped.
pub fn gcur_error_b(b: &DenseMatrix, f: &GcurFactors) -> Result<Option<f64>> {
    match f.approx_b(b)? {
        Some(approx) => Ok(Some(relative_error(b, &approx)?)),
        None => Ok(None),
    }
}

/// Terms of the probabilistic error bound for randomized GCUR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GcurBound {
    /// Range-finder tail `(1+6√((k+p)p log p))σ_{k+1}(A) + 3√(k+p)·√(Σ_{j>k}σ_j²)`.
    pub theta_k: f64,
    /// `√(nk/3)·2^k + √(mk/3)·2^k`.
    pub eta_k: f64,
    /// Bound on `‖A − C_A M_A R_A‖`.
    pub bound_a: f64,
    /// Bound on `‖B − C_B M_B R_B‖`.
    pub bound_b: f64,
    pub k: usize,
    pub p: usize,
}

/// Range-finder error bound for a rank-`k` target with oversampling `p`,
/// given the singular values of the sketched matrix. `p log p` is taken as
/// 0 for `p ≤ 1`.
pub fn range_tail_bound(sigma: &[f64], k: usize, p: usize) -> f64 {
    let plogp = if p <= 1 { 0.0 } else { p as f64 * (p as f64).ln() };
    let next = sigma.get(k).copied().unwrap_or(0.0);
    let tail: f64 = sigma.iter().skip(k).map(|s| s * s).sum::<f64>().sqrt();
    let width = (k + p) as f64;
    (1.0 + 6.0 * (width * plogp).sqrt()) * next + 3.0 * width.sqrt() * tail
}

/// DEIM growth pair `√(ak/3)·2^k + √(bk/3)·2^k`.
pub(crate) fn eta(a_dim: usize, b_dim: usize, k: usize) -> f64 {
    let g = 2f64.powi(k as i32);
    ((a_dim * k) as f64 / 3.0).sqrt() * g + ((b_dim * k) as f64 / 3.0).sqrt() * g
}

/// Evaluates the GCUR error bound at rank `k` (pass `k̂` for the L-DEIM
/// variant) and oversampling `p`.
pub fn gcur_bound(a: &DenseMatrix, b: &DenseMatrix, k: usize, p: usize) -> Result<GcurBound> {
    let (m, n) = a.shape();
    let d = b.rows();
    let f = gsvd(a, b)?;
    let sigma = singular_values(a);
    let theta_k = range_tail_bound(&sigma, k, p);
    let eta_k = eta(n, m, k);

    let mut stacked = DMatrix::zeros(m + d, n);
    stacked.rows_mut(0, m).copy_from(&**a);
    stacked.rows_mut(m, d).copy_from(&**b);
    let smin = singular_values(&stacked).last().copied().unwrap_or(0.0);
    let pinv = if smin > 0.0 { 1.0 / smin } else { f64::INFINITY };

    let norms = spectral_norm(a) + spectral_norm(b);
    let coupling = if k < n {
        let (g, bt) = (f.gamma[k], f.beta[k]);
        g / bt + theta_k / bt * pinv
    } else {
        0.0
    };
    let bound_a = eta_k * (theta_k + norms * coupling);
    let bound_b = eta(n, d, k) * norms;
    Ok(GcurBound { theta_k, eta_k, bound_a, bound_b, k, p })
}
