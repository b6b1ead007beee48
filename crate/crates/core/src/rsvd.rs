//! Restricted SVD of a triplet `A` (m×n), `B` (m×ℓ), `G` (d×n) with
//! `ℓ ≥ d ≥ m ≥ n`:
//!
//! ```text
//! A = Z D_A Wᵀ,   B = Z D_B Uᵀ,   G = V D_G Wᵀ
//! ```
//!
//! built from two GSVDs, first of `(A, G)` and then of `(BᵀU₁, Σ₁⁻¹Γ₁ᵀ)`,
//! with the scaling `γ_i = σ_i/√(σ_i²+1)`, `α_i = σ_i²/√(σ_i²+1)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gsvd::{gsvd_general, GsvdFactors};
use crate::matrix::{complete_orthonormal, qr_parts, DenseMatrix};
use crate::sketch::{derive_seed, gaussian, SketchConfig};

/// σ below this is treated as an exactly vanishing restricted value.
const ZERO_SIGMA: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct RsvdFactors {
    /// m × m, nonsingular.
    pub z: DenseMatrix,
    /// n × n, nonsingular.
    pub w: DenseMatrix,
    /// Orthonormal columns; column `j` pairs with `Z(:, u_offset + j)`.
    pub u: DenseMatrix,
    /// Orthonormal columns; the first `n` pair with the columns of `W`.
    pub v: DenseMatrix,
    /// Diagonal of `D_A`, non-increasing.
    pub alpha: Vec<f64>,
    /// First `n` diagonal entries of `D_B`.
    pub beta: Vec<f64>,
    /// Diagonal of `D_G`.
    pub gamma: Vec<f64>,
    /// Full diagonal of `D_B` (length m; ones after the first `n` in the
    /// deterministic factorization).
    pub b_diag: Vec<f64>,
    pub u_offset: usize,
}

impl RsvdFactors {
    pub fn reconstruct_a(&self) -> DenseMatrix {
        let n = self.alpha.len();
        DenseMatrix::from_trusted(diag_product(
            &self.z.columns(0, n).into_owned(),
            &self.alpha,
            &self.w,
        ))
    }

    pub fn reconstruct_b(&self) -> DenseMatrix {
        let off = self.u_offset;
        let width = self.b_diag.len() - off;
        DenseMatrix::from_trusted(diag_product(
            &self.z.columns(off, width).into_owned(),
            &self.b_diag[off..],
            &self.u.columns(0, width).into_owned(),
        ))
    }

    pub fn reconstruct_g(&self) -> DenseMatrix {
        let n = self.gamma.len();
        DenseMatrix::from_trusted(diag_product(
            &self.v.columns(0, n).into_owned(),
            &self.gamma,
            &self.w,
        ))
    }
}

/// `L diag(d) Rᵀ`.
fn diag_product(l: &DMatrix<f64>, d: &[f64], r: &DMatrix<f64>) -> DMatrix<f64> {
    let mut ld = l.clone();
    for (j, s) in d.iter().enumerate() {
        ld.column_mut(j).scale_mut(*s);
    }
    ld * r.transpose()
}

fn check_triplet(a: &DenseMatrix, b: &DenseMatrix, g: &DenseMatrix) -> Result<()> {
    let (m, n) = a.shape();
    let l = b.cols();
    let d = g.rows();
    if b.rows() != m || g.cols() != n {
        return Err(Error::Dimension(format!(
            "triplet shapes A {m}x{n}, B {}x{l}, G {d}x{} do not conform",
            b.rows(),
            g.cols()
        )));
    }
    if !(l >= d && d >= m && m >= n && n >= 1) {
        return Err(Error::Dimension(format!(
            "need l >= d >= m >= n >= 1, got l={l}, d={d}, m={m}, n={n}"
        )));
    }
    Ok(())
}

/// Result of the `(A, G)` stage, ordered with `Γ₁` non-decreasing.
struct Stage1 {
    /// m × m
    u1: DMatrix<f64>,
    y1: DMatrix<f64>,
    gamma1: Vec<f64>,
    sigma1: Vec<f64>,
    /// d × n (thin) or d × d (completed); first n columns pair with `Σ₁`.
    v1: DMatrix<f64>,
}

fn reversed(n: usize) -> Vec<usize> {
    (0..n).rev().collect()
}

fn stage1(a: &DMatrix<f64>, g: &DMatrix<f64>, lift: Option<&DMatrix<f64>>) -> Result<Stage1> {
    let n = a.ncols();
    let f = gsvd_general(a, g)?;
    if f.near_zero_beta {
        return Err(Error::RankDeficient(
            "first-stage GSVD has a vanishing sigma; G must have full column rank".into(),
        ));
    }
    let order = reversed(n);
    let u1 = complete_orthonormal(&f.u.as_nalgebra().select_columns(&order));
    let v1 = f.v.as_nalgebra().select_columns(&order);
    let v1 = match lift {
        Some(h) => h * v1,
        None => complete_orthonormal(&v1),
    };
    Ok(Stage1 {
        u1,
        y1: f.y.as_nalgebra().select_columns(&order),
        gamma1: order.iter().map(|&i| f.gamma[i]).collect(),
        sigma1: order.iter().map(|&i| f.beta[i]).collect(),
        v1,
    })
}

/// `Σ₁⁻¹Γ₁ᵀ` as an n×m matrix.
fn scaled_gamma(s1: &Stage1, m: usize) -> DMatrix<f64> {
    let n = s1.sigma1.len();
    let mut s = DMatrix::zeros(n, m);
    for i in 0..n {
        s[(i, i)] = s1.gamma1[i] / s1.sigma1[i];
    }
    s
}

/// Combines the stage-1 factors with the stage-2 GSVD `f2` of
/// `(X, Σ₁⁻¹Γ₁ᵀ)`, where `X = BᵀU₁` or its sketch `H₂ᵀBᵀU₁`.
fn assemble(s1: Stage1, f2: GsvdFactors, lift: Option<(&DMatrix<f64>, &DMatrix<f64>)>) -> RsvdFactors {
    let m = s1.u1.ncols();
    let n = s1.sigma1.len();
    let order = reversed(m);

    // Reverse to σ non-increasing: the n pairs carried by the Σ side first.
    let mut y2 = f2.y.as_nalgebra().select_columns(&order);
    let g2: Vec<f64> = order.iter().map(|&i| f2.gamma[i]).collect();
    let sig2: Vec<f64> = order.iter().map(|&i| f2.beta[i]).collect();
    let ra = f2.u.ncols();
    let u_offset = m - ra;
    let u2 = f2.u.as_nalgebra().select_columns(&reversed(ra));
    let mut v2 = f2.v.as_nalgebra().select_columns(&reversed(n));
    debug_assert_eq!(f2.v.ncols(), n);

    // A sketch of width w < m leaves m − w leading pairs that X cannot see,
    // all with σ = 1 and β = 0. Any rotation of that block keeps the
    // factorization, so order it by the energy B actually has there.
    if let (Some((_, b)), true) = (lift, u_offset > 1) {
        // The pair vectors are the columns of Y₂⁻ᵀ.
        let mut unit = DMatrix::zeros(m, u_offset);
        unit.fill_diagonal(1.0);
        let xi = y2.transpose().lu().solve(&unit).unwrap_or_else(|| DMatrix::zeros(m, u_offset));
        let bx = b.transpose() * (&s1.u1 * xi);
        let eig = (bx.transpose() * bx).symmetric_eigen();
        let mut idx: Vec<usize> = (0..u_offset).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let q = eig.eigenvectors.select_columns(&idx);
        let rotated = y2.columns(0, u_offset) * &q;
        y2.columns_mut(0, u_offset).copy_from(&rotated);
        let rotated = v2.columns(0, u_offset) * &q;
        v2.columns_mut(0, u_offset).copy_from(&rotated);
    }

    let mut alpha = vec![0.0; n];
    let mut gamma = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut z = &s1.u1 * &y2;
    for i in 0..n {
        let s = sig2[i];
        if s <= ZERO_SIGMA {
            beta[i] = std::f64::consts::FRAC_1_SQRT_2;
            gamma[i] = std::f64::consts::FRAC_1_SQRT_2;
            z.column_mut(i).scale_mut(g2[i] / beta[i]);
        } else {
            let h = (s * s + 1.0).sqrt();
            gamma[i] = s / h;
            alpha[i] = s * s / h;
            beta[i] = g2[i];
        }
    }
    let mut b_diag = g2;
    b_diag[..n].copy_from_slice(&beta);

    let mut w = s1.y1.clone();
    for (j, s) in s1.sigma1.iter().enumerate() {
        w.column_mut(j).scale_mut(*s);
    }
    let mut w = w * &v2;
    for (j, gm) in gamma.iter().enumerate() {
        w.column_mut(j).scale_mut(1.0 / gm);
    }

    let u = match lift {
        Some((h, _)) => h * u2,
        None => complete_orthonormal(&u2),
    };
    let mut v = s1.v1;
    let head = v.columns(0, n) * &v2;
    v.columns_mut(0, n).copy_from(&head);

    RsvdFactors {
        z: DenseMatrix::from_trusted(z),
        w: DenseMatrix::from_trusted(w),
        u: DenseMatrix::from_trusted(u),
        v: DenseMatrix::from_trusted(v),
        alpha,
        beta,
        gamma,
        b_diag,
        u_offset,
    }
}

/// Restricted SVD via two full GSVDs. `U` (ℓ×ℓ) and `V` (d×d) are returned
/// as complete orthogonal matrices.
pub fn rsvd_deterministic(a: &DenseMatrix, b: &DenseMatrix, g: &DenseMatrix) -> Result<RsvdFactors> {
    check_triplet(a, b, g)?;
    let m = a.rows();
    let s1 = stage1(a, g, None)?;
    let x = b.transpose() * &s1.u1;
    let f2 = gsvd_general(&x, &scaled_gamma(&s1, m))?;
    Ok(assemble(s1, f2, None))
}

/// Randomized restricted SVD. `G` is sketched to its full column width
/// `n`; `BᵀU₁` is sketched to width `k + p`, clamped to `[m − n, m]`. The A
/// factorization stays exact; `U` (ℓ × width) and `V` (d × n) are thin.
pub fn randomized_rsvd(
    a: &DenseMatrix,
    b: &DenseMatrix,
    g: &DenseMatrix,
    cfg: &SketchConfig,
) -> Result<RsvdFactors> {
    randomized_rsvd_width(a, b, g, cfg.k() + cfg.p(), cfg.seed())
}

pub(crate) fn randomized_rsvd_width(
    a: &DenseMatrix,
    b: &DenseMatrix,
    g: &DenseMatrix,
    width: usize,
    seed: u64,
) -> Result<RsvdFactors> {
    check_triplet(a, b, g)?;
    let (m, n) = a.shape();
    let width = width.clamp(m - n, m).max(1);

    let omega1 = gaussian(n, n, derive_seed(seed, 1));
    let h1 = qr_parts(&(&**g * omega1)).0;
    let s1 = stage1(a, &(h1.transpose() * &**g), Some(&h1))?;

    let (h2, x) = if width >= m {
        qr_parts(&(b.transpose() * &s1.u1))
    } else {
        let omega2 = gaussian(m, width, derive_seed(seed, 2));
        let h2 = qr_parts(&(b.transpose() * (&s1.u1 * omega2))).0;
        let x = (&**b * &h2).transpose() * &s1.u1;
        (h2, x)
    };
    let f2 = gsvd_general(&x, &scaled_gamma(&s1, m))?;
    Ok(assemble(s1, f2, Some((&h2, &**b))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::spectral_norm;

    fn dm(m: DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::from_nalgebra(m).unwrap()
    }

    fn triplet(l: usize, d: usize, m: usize, n: usize, seed: u64) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
        (
            dm(gaussian(m, n, seed)),
            dm(gaussian(m, l, seed + 1000)),
            dm(gaussian(d, n, seed + 2000)),
        )
    }

    fn rel(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
        spectral_norm(&(&**x - &**y)) / spectral_norm(y)
    }

    fn orth_defect(q: &DMatrix<f64>) -> f64 {
        let c = q.ncols();
        spectral_norm(&(q.transpose() * q - DMatrix::identity(c, c)))
    }

    #[test]
    fn deterministic_residuals_and_invariants() {
        let (a, b, g) = triplet(40, 30, 20, 10, 1);
        let f = rsvd_deterministic(&a, &b, &g).unwrap();
        assert!(rel(&f.reconstruct_a(), &a) < 1e-8);
        assert!(rel(&f.reconstruct_b(), &b) < 1e-8);
        assert!(rel(&f.reconstruct_g(), &g) < 1e-8);
        assert_eq!(f.z.shape(), (20, 20));
        assert_eq!(f.u.shape(), (40, 40));
        assert_eq!(f.v.shape(), (30, 30));
        for i in 0..10 {
            let s = f.alpha[i].powi(2) + f.beta[i].powi(2) + f.gamma[i].powi(2);
            assert!((s - 1.0).abs() < 1e-9);
            assert!(f.alpha[i] > 0.0 && f.alpha[i] < 1.0);
            assert!(f.beta[i] > 0.0 && f.beta[i] < 1.0);
        }
        assert!(f.alpha.windows(2).all(|w| w[0] >= w[1]));
        assert!(orth_defect(&f.u) < 1e-10 && orth_defect(&f.v) < 1e-10);
    }

    #[test]
    fn identity_embeddings_recover_singular_values() {
        let (m, n, l, d) = (6, 4, 8, 7);
        let a = dm(gaussian(m, n, 3));
        let b = dm(DMatrix::identity(m, l));
        let g = dm(DMatrix::identity(d, n));
        let f = rsvd_deterministic(&a, &b, &g).unwrap();
        let mut restricted: Vec<f64> = (0..n)
            .map(|i| f.alpha[i] / (f.beta[i] * f.gamma[i]))
            .collect();
        restricted.sort_by(|x, y| y.total_cmp(x));
        let sv = crate::matrix::singular_values(&a);
        for (r, s) in restricted.iter().zip(&sv) {
            assert!((r - s).abs() <= 1e-7 * s, "{r} vs {s}");
        }
    }

    #[test]
    fn zero_a_is_exact() {
        let (_, b, g) = triplet(9, 8, 6, 4, 5);
        let a = DenseMatrix::zeros(6, 4);
        let f = rsvd_deterministic(&a, &b, &g).unwrap();
        assert!(f.alpha.iter().all(|&x| x == 0.0));
        assert!(spectral_norm(&f.reconstruct_a()) == 0.0);
        assert!(rel(&f.reconstruct_b(), &b) < 1e-8);
        assert!(rel(&f.reconstruct_g(), &g) < 1e-8);
    }

    #[test]
    fn randomized_a_exact_and_deterministic() {
        let (a, b, g) = triplet(40, 30, 20, 10, 7);
        let cfg = SketchConfig::new(5, 5, 3, 21).unwrap();
        let f = randomized_rsvd(&a, &b, &g, &cfg).unwrap();
        assert!(rel(&f.reconstruct_a(), &a) < 1e-8);
        assert!(rel(&f.reconstruct_g(), &g) < 1e-8);
        assert_eq!(f.u.shape(), (40, 10));
        assert_eq!(f.u_offset, 10);
        assert!(orth_defect(&f.u) < 1e-10 && orth_defect(&f.v) < 1e-10);
        let again = randomized_rsvd(&a, &b, &g, &cfg).unwrap();
        assert_eq!(f.z, again.z);
        assert_eq!(f.u, again.u);
    }

    #[test]
    fn randomized_full_width_is_exact() {
        let (a, b, g) = triplet(30, 20, 12, 8, 9);
        let cfg = SketchConfig::new(10, 5, 5, 2).unwrap();
        let f = randomized_rsvd(&a, &b, &g, &cfg).unwrap();
        assert_eq!(f.u_offset, 0);
        assert!(rel(&f.reconstruct_b(), &b) < 1e-8);
    }

    #[test]
    fn rejects_bad_orders() {
        let (a, b, g) = triplet(10, 12, 6, 4, 1);
        assert!(matches!(rsvd_deterministic(&a, &b, &g), Err(Error::Dimension(_))));
        let (a, b, _) = triplet(10, 8, 6, 4, 1);
        let g = DenseMatrix::zeros(8, 4);
        assert!(rsvd_deterministic(&a, &b, &g).is_err());
    }
}
