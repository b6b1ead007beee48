//! Generalized SVD of a matrix pair, `A = U Γ Yᵀ`, `B = V Σ Yᵀ`, with
//! `γ_i² + β_i² = 1` and the ratios `γ_i/β_i` non-increasing.
//!
//! The factorization goes through a thin QR of the stacked matrix `[A; B]`,
//! an SVD of one block of the orthonormal factor and a QR of the other block
//! (a CS decomposition), so it also covers pairs where one matrix has fewer
//! rows than columns. In that case the short side only has `min(rows, n)`
//! nonzero coefficients and its orthonormal factor only that many columns.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{
    complete_orthonormal, qr_parts, rank_tolerance, singular_values, svd_parts, DenseMatrix,
};
use crate::sketch::{range_basis, SketchConfig};

/// β below this is reported through [`GsvdFactors::near_zero_beta`].
pub const NEAR_ZERO_BETA: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct GsvdFactors {
    /// Orthonormal columns for the pairs `0..u.cols()` (all `n` when A has
    /// at least `n` rows).
    pub u: DenseMatrix,
    /// Orthonormal columns for the trailing pairs `n - v.cols()..n`.
    pub v: DenseMatrix,
    /// n × n, nonsingular.
    pub y: DenseMatrix,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    /// Some β is below [`NEAR_ZERO_BETA`].
    pub near_zero_beta: bool,
}

impl GsvdFactors {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// First pair index covered by the columns of `v`.
    pub fn v_offset(&self) -> usize {
        self.n() - self.v.cols()
    }

    /// `γ_i/β_i`, infinite where β vanishes.
    pub fn ratios(&self) -> Vec<f64> {
        self.gamma
            .iter()
            .zip(&self.beta)
            .map(|(g, b)| if *b == 0.0 { f64::INFINITY } else { g / b })
            .collect()
    }

    pub fn reconstruct_a(&self) -> DenseMatrix {
        let r = self.u.cols();
        DenseMatrix::from_trusted(scaled_product(&self.u, &self.gamma[..r], &self.y, 0))
    }

    pub fn reconstruct_b(&self) -> DenseMatrix {
        let off = self.v_offset();
        DenseMatrix::from_trusted(scaled_product(&self.v, &self.beta[off..], &self.y, off))
    }
}

/// `F diag(d) Y(:, off..off+len)ᵀ`.
fn scaled_product(f: &DMatrix<f64>, d: &[f64], y: &DMatrix<f64>, off: usize) -> DMatrix<f64> {
    let mut fd = f.clone();
    for (j, s) in d.iter().enumerate() {
        fd.column_mut(j).scale_mut(*s);
    }
    fd * y.columns(off, d.len()).transpose()
}

/// GSVD of `A` (m×n) and `B` (d×n) with `m ≥ n`, `d ≥ n` and `[A; B]` of
/// full column rank.
pub fn gsvd(a: &DenseMatrix, b: &DenseMatrix) -> Result<GsvdFactors> {
    let n = a.cols();
    if a.rows() < n || b.rows() < n {
        return Err(Error::Dimension(format!(
            "GSVD needs both matrices to have at least n = {n} rows, got {} and {}",
            a.rows(),
            b.rows()
        )));
    }
    gsvd_general(a, b)
}

/// GSVD of a pair with a common column count `n` and `m + d ≥ n` rows in
/// total. Either matrix may have fewer than `n` rows.
pub fn gsvd_general(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GsvdFactors> {
    let (ma, n) = a.shape();
    let mb = b.nrows();
    if b.ncols() != n {
        return Err(Error::Dimension(format!(
            "pair has {n} and {} columns",
            b.ncols()
        )));
    }
    if n == 0 || ma + mb < n {
        return Err(Error::Dimension(format!(
            "stacked pair is {}x{n}; need at least as many rows as columns and n >= 1",
            ma + mb
        )));
    }

    let mut stacked = DMatrix::zeros(ma + mb, n);
    stacked.rows_mut(0, ma).copy_from(a);
    stacked.rows_mut(ma, mb).copy_from(b);
    let (q, r) = qr_parts(&stacked);
    let sv = singular_values(&r);
    if sv[n - 1] <= 10.0 * rank_tolerance(ma + mb, n, sv[0]) {
        return Err(Error::RankDeficient(format!(
            "stacked pair has numerical rank below {n} (sigma_min {:.3e}, sigma_max {:.3e})",
            sv[n - 1], sv[0]
        )));
    }
    let qa = q.rows(0, ma).into_owned();
    let qb = q.rows(ma, mb).into_owned();

    let (u, mut gamma, x, v, mut beta) = if mb >= n && (ma < n || mb <= ma) {
        // Split on the B block, then reverse so β ascends.
        let cs = cs_split(&qb, &qa);
        let order: Vec<usize> = (0..n).rev().collect();
        let flip = |m: &DMatrix<f64>| {
            let rev: Vec<usize> = (0..m.ncols()).rev().collect();
            m.select_columns(&rev)
        };
        (
            flip(&cs.u2),
            order.iter().map(|&i| cs.s[i]).collect::<Vec<_>>(),
            cs.x.select_columns(&order),
            flip(&cs.u1),
            order.iter().map(|&i| cs.c[i]).collect::<Vec<_>>(),
        )
    } else {
        let cs = cs_split(&qa, &qb);
        (cs.u1, cs.c, cs.x, cs.u2, cs.s)
    };

    let mut y = r.transpose() * &x;
    for i in 0..n {
        let c = gamma[i].hypot(beta[i]);
        gamma[i] = (gamma[i] / c).clamp(0.0, 1.0);
        beta[i] = (beta[i] / c).clamp(0.0, 1.0);
        y.column_mut(i).scale_mut(c);
    }

    let (u, v, y) = sort_pairs(&mut gamma, &mut beta, u, v, y);
    let near_zero_beta = beta.iter().any(|&b| b < NEAR_ZERO_BETA);
    Ok(GsvdFactors {
        u: DenseMatrix::from_trusted(u),
        v: DenseMatrix::from_trusted(v),
        y: DenseMatrix::from_trusted(y),
        gamma,
        beta,
        near_zero_beta,
    })
}

/// CS decomposition of the blocks of an orthonormal `[Q1; Q2]`:
/// `Q1 = U1 diag(c) Xᵀ` with `c` descending over the first `U1.cols()`
/// pairs, `Q2 = U2 diag(s) Xᵀ` over the trailing `U2.cols()` pairs.
struct CsSplit {
    u1: DMatrix<f64>,
    c: Vec<f64>,
    x: DMatrix<f64>,
    u2: DMatrix<f64>,
    s: Vec<f64>,
}

/// Pairs with `c > 1/√2` have small `s`, which a QR of the `Q2` image cannot
/// resolve when the `c` cluster; those are taken from an SVD of their `Q2`
/// image instead, and `X` and `U1` are rotated to match.
fn cs_split(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> CsSplit {
    let n = q1.ncols();
    let (mut u1, c1, x1) = svd_parts(q1);
    let r1 = c1.len();
    let mut c = vec![0.0; n];
    c[..r1].copy_from_slice(&c1);
    let mut x = complete_orthonormal(&x1);

    let r2 = q2.nrows().min(n);
    let lo = n - r2;
    let hi = lo.max(c.iter().take_while(|&&v| v > std::f64::consts::FRAC_1_SQRT_2).count());
    let mut s = vec![0.0; n];

    let (vg, rg) = qr_parts(&(q2 * x.columns(hi, n - hi)));
    for i in 0..n - hi {
        s[hi + i] = rg[(i, i)];
    }
    if hi == lo {
        return CsSplit { u1, c, x, u2: vg, s };
    }

    // All pairs with c > 1/√2, including the ones Q2 cannot see at all.
    let w = hi - lo;
    let t = q2 * x.columns(0, hi);
    let t = &t - &vg * (vg.transpose() * &t);
    let (vb, sb, zb) = svd_parts(&t);
    let rev: Vec<usize> = (0..w).rev().collect();
    let vb = vb.columns(0, w).select_columns(&rev);
    let z_top = zb.columns(0, w).select_columns(&rev);
    for (i, &j) in rev.iter().enumerate() {
        s[lo + i] = sb[j];
    }
    let z = complete_orthonormal(&z_top);
    let mut z_sorted = DMatrix::zeros(hi, hi);
    z_sorted.columns_mut(0, lo).copy_from(&z.columns(w, lo));
    z_sorted.columns_mut(lo, w).copy_from(&z_top);
    let xb = x.columns(0, hi) * z_sorted;
    x.columns_mut(0, hi).copy_from(&xb);
    let (ub, rb) = qr_parts(&(q1 * &xb));
    u1.columns_mut(0, hi).copy_from(&ub);
    for i in 0..hi {
        c[i] = rb[(i, i)];
    }

    let vb = &vb - &vg * (vg.transpose() * &vb);
    let vb = qr_parts(&vb).0;
    let mut u2 = DMatrix::zeros(q2.nrows(), r2);
    u2.columns_mut(0, w).copy_from(&vb);
    u2.columns_mut(w, n - hi).copy_from(&vg);
    CsSplit { u1, c, x, u2, s }
}

/// Stable sort by non-increasing `γ/β` (ties: larger γ first). Rounding can
/// leave the construction order slightly off; pairs with a zero coefficient
/// sit at the ends and never cross the blocks covered by `u` and `v`.
fn sort_pairs(
    gamma: &mut Vec<f64>,
    beta: &mut Vec<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    y: DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = gamma.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&i, &j| compare_pairs(gamma[i], beta[i], gamma[j], beta[j]));
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return (u, v, y);
    }
    let ra = u.ncols();
    let off = n - v.ncols();
    debug_assert!(perm[..ra].iter().all(|&p| p < ra));
    debug_assert!(perm[off..].iter().all(|&p| p >= off));
    let u_order: Vec<usize> = perm[..ra].to_vec();
    let v_order: Vec<usize> = perm[off..].iter().map(|&p| p - off).collect();
    *gamma = perm.iter().map(|&p| gamma[p]).collect();
    *beta = perm.iter().map(|&p| beta[p]).collect();
    (
        u.select_columns(&u_order),
        v.select_columns(&v_order),
        y.select_columns(&perm),
    )
}

fn compare_pairs(gi: f64, bi: f64, gj: f64, bj: f64) -> Ordering {
    (gj * bi)
        .total_cmp(&(gi * bj))
        .then_with(|| gj.total_cmp(&gi))
}

/// Randomized GSVD over a sketch of width `k + p`: `Q` spans `AΩ`, then the
/// GSVD of `(QᵀA, B)` is lifted with `U = QW`. `B` stays exactly factored.
pub fn randomized_gsvd(
    a: &DenseMatrix,
    b: &DenseMatrix,
    cfg: &SketchConfig,
) -> Result<(GsvdFactors, DenseMatrix)> {
    randomized_gsvd_width(a, b, cfg.k() + cfg.p(), cfg.seed())
}

pub(crate) fn randomized_gsvd_width(
    a: &DenseMatrix,
    b: &DenseMatrix,
    width: usize,
    seed: u64,
) -> Result<(GsvdFactors, DenseMatrix)> {
    let n = a.cols();
    if b.cols() != n {
        return Err(Error::Dimension(format!("pair has {n} and {} columns", b.cols())));
    }
    if a.rows() < n || b.rows() < n {
        return Err(Error::Dimension(format!(
            "GSVD needs both matrices to have at least n = {n} rows, got {} and {}",
            a.rows(),
            b.rows()
        )));
    }
    if width > n {
        return Err(Error::InvalidParameter(format!(
            "sketch width {width} exceeds n = {n}"
        )));
    }
    let q = range_basis(a, width, seed)?;
    let mut f = gsvd_general(&(q.transpose() * &**a), b)?;
    f.u = DenseMatrix::from_trusted(&q * &*f.u);
    Ok((f, DenseMatrix::from_trusted(q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::spectral_norm;
    use crate::sketch::gaussian;

    fn dm(m: DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::from_nalgebra(m).unwrap()
    }

    fn check_invariants(f: &GsvdFactors, a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        for (g, bt) in f.gamma.iter().zip(&f.beta) {
            assert!((g * g + bt * bt - 1.0).abs() < 1e-10);
        }
        let r = f.ratios();
        assert!(r.windows(2).all(|w| w[0] >= w[1]), "{r:?}");
        let ea = spectral_norm(&(&*f.reconstruct_a() - a));
        let eb = spectral_norm(&(&*f.reconstruct_b() - b));
        assert!(ea <= tol * spectral_norm(a), "A residual {ea}");
        assert!(eb <= tol * spectral_norm(b), "B residual {eb}");
    }

    #[test]
    fn diagonal_pair() {
        let a = dm(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0])));
        let f = gsvd(&a, &DenseMatrix::identity(2)).unwrap();
        let r = f.ratios();
        assert!((r[0] - 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
        assert!((f.gamma[0] - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((f.beta[0] - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((f.gamma[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn equal_pair() {
        let a = gaussian(4, 4, 3);
        let f = gsvd(&dm(a.clone()), &dm(a.clone())).unwrap();
        for (g, b) in f.gamma.iter().zip(&f.beta) {
            assert!((g - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
            assert!((b - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        }
        check_invariants(&f, &a, &a, 1e-9);
    }

    #[test]
    fn random_pairs() {
        for seed in 0..20 {
            let a = gaussian(9, 4, seed);
            let b = gaussian(7, 4, 100 + seed);
            let f = gsvd(&dm(a.clone()), &dm(b.clone())).unwrap();
            check_invariants(&f, &a, &b, 1e-9);
            assert_eq!(f.u.shape(), (9, 4));
            assert_eq!(f.v.shape(), (7, 4));
        }
    }

    #[test]
    fn short_sides() {
        for (ma, mb, n) in [(3, 8, 6), (8, 3, 6), (4, 4, 6), (2, 10, 10), (10, 1, 5)] {
            let a = gaussian(ma, n, (ma * 31 + mb) as u64);
            let b = gaussian(mb, n, (mb * 17 + n) as u64);
            let f = gsvd_general(&a, &b).unwrap();
            check_invariants(&f, &a, &b, 1e-9);
            assert_eq!(f.u.ncols(), ma.min(n));
            assert_eq!(f.v.ncols(), mb.min(n));
            for i in ma.min(n)..n {
                assert_eq!(f.gamma[i], 0.0);
            }
            for i in 0..n - mb.min(n) {
                assert_eq!(f.beta[i], 0.0);
            }
        }
    }

    #[test]
    fn rejects_rank_deficient_and_bad_shapes() {
        let a = DMatrix::zeros(3, 3);
        let mut b = DMatrix::identity(3, 3);
        b[(2, 2)] = 0.0;
        assert!(matches!(gsvd_general(&a, &b), Err(Error::RankDeficient(_))));
        assert!(gsvd(&dm(gaussian(2, 3, 0)), &DenseMatrix::identity(3)).is_err());
        assert!(gsvd_general(&gaussian(3, 2, 0), &gaussian(3, 3, 0)).is_err());
    }

    #[test]
    fn near_zero_beta_flag() {
        let a = dm(gaussian(4, 3, 1));
        let b = DenseMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1e-15])
            .unwrap();
        assert!(gsvd(&a, &b).unwrap().near_zero_beta);
        assert!(!gsvd(&a, &DenseMatrix::identity(3)).unwrap().near_zero_beta);
    }

    #[test]
    fn randomized_full_width_matches_deterministic() {
        let a = gaussian(12, 5, 4);
        let b = gaussian(8, 5, 5);
        let det = gsvd(&dm(a.clone()), &dm(b.clone())).unwrap();
        let cfg = SketchConfig::new(5, 0, 5, 9).unwrap();
        let (rnd, q) = randomized_gsvd(&dm(a.clone()), &dm(b.clone()), &cfg).unwrap();
        assert_eq!(q.shape(), (12, 5));
        for i in 0..5 {
            assert!((det.gamma[i] - rnd.gamma[i]).abs() < 1e-8);
            assert!((det.beta[i] - rnd.beta[i]).abs() < 1e-8);
        }
        check_invariants(&rnd, &a, &b, 1e-9);
    }

    #[test]
    fn randomized_exact_rank_and_determinism() {
        let a = gaussian(30, 3, 1) * gaussian(3, 10, 2);
        let b = gaussian(12, 10, 3);
        let cfg = SketchConfig::new(3, 2, 2, 11).unwrap();
        let (f, _) = randomized_gsvd(&dm(a.clone()), &dm(b.clone()), &cfg).unwrap();
        check_invariants(&f, &a, &b, 1e-9);
        let det = gsvd(&dm(a.clone()), &dm(b.clone())).unwrap();
        for i in 0..3 {
            assert!((det.gamma[i] - f.gamma[i]).abs() < 1e-8);
        }
        let (g, _) = randomized_gsvd(&dm(a), &dm(b), &cfg).unwrap();
        assert_eq!(f.y, g.y);
        assert_eq!(f.gamma, g.gamma);
    }

    #[test]
    fn randomized_width_checked() {
        let cfg = SketchConfig::new(4, 3, 2, 0).unwrap();
        let a = dm(gaussian(10, 5, 0));
        assert!(randomized_gsvd(&a, &DenseMatrix::identity(5), &cfg).is_err());
    }
}
