//! RSVD-CUR of a triplet: coordinated CUR approximations
//!
//! ```text
//! A ≈ A(:,p) M_A A(s,:),   B ≈ B(:,p_B) M_B B(s,:),   G ≈ G(:,p) M_G G(s_G,:)
//! ```
//!
//! with indices chosen from `W`, `Z`, `U` and `V` of a restricted SVD.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gcur::{cur_product, eta, middle_matrix, range_tail_bound, select_from, Selector};
use crate::matrix::{qr_parts, singular_values, spectral_norm, DenseMatrix, IndexList};
use crate::rsvd::{randomized_rsvd_width, rsvd_deterministic, RsvdFactors};
use crate::sketch::SketchConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RsvdCurFactors {
    /// Columns of `A` and `G`.
    pub p: IndexList,
    /// Columns of `B`.
    pub p_b: IndexList,
    /// Rows of `A` and `B`.
    pub s: IndexList,
    /// Rows of `G`.
    pub s_g: IndexList,
    pub m_a: DenseMatrix,
    pub m_b: DenseMatrix,
    pub m_g: DenseMatrix,
    pub k: usize,
}

impl RsvdCurFactors {
    pub fn approx_a(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        cur_product(a, &self.p, &self.m_a, &self.s)
    }

    pub fn approx_b(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        cur_product(b, &self.p_b, &self.m_b, &self.s)
    }

    pub fn approx_g(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        cur_product(g, &self.p, &self.m_g, &self.s_g)
    }
}

/// Selects indices from the restricted SVD factors and forms the three
/// middle matrices.
pub fn rsvd_cur_from_factors(
    a: &DenseMatrix,
    b: &DenseMatrix,
    g: &DenseMatrix,
    f: &RsvdFactors,
    k: usize,
    selector: Selector,
    khat: usize,
) -> Result<RsvdCurFactors> {
    if k == 0 || k > a.cols() {
        return Err(Error::InvalidParameter(format!(
            "rank {k} must lie in 1..={}",
            a.cols()
        )));
    }
    if selector == Selector::Ldeim && (khat == 0 || khat > k) {
        return Err(Error::InvalidParameter(format!(
            "L-DEIM budget {khat} must lie in 1..={k}"
        )));
    }
    let pick = |basis: &DMatrix<f64>| select_from(basis, selector, k, khat);
    let ((p, s), (p_b, s_g)) = rayon::join(
        || rayon::join(|| pick(f.w.as_nalgebra()), || pick(f.z.as_nalgebra())),
        || rayon::join(|| pick(f.u.as_nalgebra()), || pick(f.v.as_nalgebra())),
    );
    let (p, s, p_b, s_g) = (p?, s?, p_b?, s_g?);
    let m_a = middle_matrix(a, &p, &s)?;
    let m_b = middle_matrix(b, &p_b, &s)?;
    let m_g = middle_matrix(g, &p, &s_g)?;
    Ok(RsvdCurFactors { p, p_b, s, s_g, m_a, m_b, m_g, k })
}

/// RSVD-CUR from the deterministic restricted SVD.
pub fn rsvd_cur(
    a: &DenseMatrix,
    b: &DenseMatrix,
    g: &DenseMatrix,
    k: usize,
    selector: Selector,
    khat: usize,
) -> Result<RsvdCurFactors> {
    let f = rsvd_deterministic(a, b, g)?;
    rsvd_cur_from_factors(a, b, g, &f, k, selector, khat)
}

/// RSVD-CUR from a randomized restricted SVD with second sketch width
/// `k̂ + p`, L-DEIM selection on `k̂` columns.
pub fn r_ldeim_rsvd_cur(
    a: &DenseMatrix,
    b: &DenseMatrix,
    g: &DenseMatrix,
    cfg: &SketchConfig,
) -> Result<RsvdCurFactors> {
    let f = randomized_rsvd_width(a, b, g, cfg.khat() + cfg.p(), cfg.seed())?;
    rsvd_cur_from_factors(a, b, g, &f, cfg.k(), Selector::Ldeim, cfg.khat())
}

/// Right-hand sides of the RSVD-CUR error bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RsvdCurBound {
    pub bound_a: f64,
    pub bound_b: f64,
    pub bound_g: f64,
    /// `√(nk̂/3)·2^k̂ + √(dk̂/3)·2^k̂`.
    pub eta_g: f64,
    /// `√(ℓk̂/3)·2^k̂ + √(mk̂/3)·2^k̂`.
    pub eta_b: f64,
    /// `‖T̂_W‖` from the QR factorization of `W`.
    pub t_w: f64,
    /// `‖T̂_Z‖` from the QR factorization of `Z`.
    pub t_z: f64,
    /// Bound on the restricted SVD error in `G`.
    pub e_g: f64,
    /// Bound on the restricted SVD error in `B`.
    pub e_b: f64,
}

/// Randomized restricted SVD bound on `‖G − G̃‖` at rank `k`: the first
/// sketch has oversampling `n − k`.
pub fn rsvd_g_bound(g: &DenseMatrix, k: usize) -> f64 {
    let n = g.cols();
    let sigma = singular_values(g);
    let over = n.saturating_sub(k);
    let olog = if over <= 1 { 0.0 } else { over as f64 * (over as f64).ln() };
    let next = sigma.get(k).copied().unwrap_or(0.0);
    let tail: f64 = sigma.iter().skip(k).map(|s| s * s).sum();
    (1.0 + 6.0 * (n as f64 * olog).sqrt()) * next + 3.0 * (n as f64 * tail).sqrt()
}

/// Randomized restricted SVD bound on `‖B − B̃‖` at rank `k`, oversampling `p`.
pub fn rsvd_b_bound(b: &DenseMatrix, k: usize, p: usize) -> f64 {
    range_tail_bound(&singular_values(b), k, p)
}

/// `‖T̂‖` where `X = Q T` and `T̂ = T(:, khat..)`.
fn trailing_factor_norm(x: &DMatrix<f64>, khat: usize) -> f64 {
    let (_, t) = qr_parts(x);
    let c = t.ncols();
    if khat >= c {
        return 0.0;
    }
    spectral_norm(&t.columns(khat, c - khat).into_owned())
}

/// Evaluates the RSVD-CUR bounds for factors `f` of rank `k`, L-DEIM budget
/// `k̂` and oversampling `p`.
pub fn rsvdcur_bound(
    a: &DenseMatrix,
    b: &DenseMatrix,
    g: &DenseMatrix,
    f: &RsvdFactors,
    k: usize,
    khat: usize,
    p: usize,
) -> Result<RsvdCurBound> {
    let (m, n) = a.shape();
    let (l, d) = (b.cols(), g.rows());
    if khat == 0 || khat > k || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= khat <= k <= n, got khat={khat}, k={k}, n={n}"
        )));
    }
    let alpha_next = f.alpha.get(k).copied().unwrap_or(0.0);
    let t_w = trailing_factor_norm(&f.w, khat);
    let t_z = trailing_factor_norm(&f.z, khat);
    let e_g = rsvd_g_bound(g, khat);
    let e_b = rsvd_b_bound(b, khat, p);
    let eta_g = eta(n, d, khat);
    let eta_b = eta(l, m, khat);
    Ok(RsvdCurBound {
        bound_a: alpha_next * eta(n, m, khat) * t_w * t_z,
        bound_b: eta_b * (e_b + t_z),
        bound_g: eta_g * (e_g + t_w),
        eta_g,
        eta_b,
        t_w,
        t_z,
        e_g,
        e_b,
    })
}
