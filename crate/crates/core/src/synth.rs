//! Seeded synthetic test problems and the relative error metric.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::{spectral_norm, DenseMatrix};
use crate::sketch::{derive_seed, gaussian};

/// Expected fill of each sparse factor vector.
pub const DEFAULT_DENSITY: f64 = 0.025;

/// Correlation decay of the Toeplitz noise covariance.
pub const TOEPLITZ_DECAY: f64 = 0.99;

/// Weight of the `j`-th outer product (1-based over all terms).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightRule {
    Constant(f64),
    /// `c / j`.
    Harmonic(f64),
}

impl WeightRule {
    pub fn weight(&self, j: usize) -> f64 {
        match *self {
            WeightRule::Constant(c) => c,
            WeightRule::Harmonic(c) => c / j as f64,
        }
    }
}

/// A run of `count` consecutive outer products sharing one weight rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub count: usize,
    pub rule: WeightRule,
}

impl Term {
    pub fn new(count: usize, rule: WeightRule) -> Self {
        Term { count, rule }
    }
}

/// `2/j` for the first ten terms, `1/j` for the next forty.
pub fn default_terms() -> Vec<Term> {
    vec![
        Term::new(10, WeightRule::Harmonic(2.0)),
        Term::new(40, WeightRule::Harmonic(1.0)),
    ]
}

/// `2/j` for the first ten terms, `1/j` up to term one hundred.
pub fn rank100_terms() -> Vec<Term> {
    vec![
        Term::new(10, WeightRule::Harmonic(2.0)),
        Term::new(90, WeightRule::Harmonic(1.0)),
    ]
}

fn sparse_vector(len: usize, density: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| {
        if rng.random_bool(density) {
            rng.random::<f64>()
        } else {
            0.0
        }
    })
}

/// `Σ_j w_j x_j y_jᵀ` with sparse nonnegative random `x_j`, `y_j`.
pub fn sparse_lowrank(
    m: usize,
    n: usize,
    terms: &[Term],
    density: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::Dimension(format!("empty shape {m}x{n}")));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density {density} must lie in (0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(m, n);
    let mut j = 0;
    for term in terms {
        for _ in 0..term.count {
            j += 1;
            let x = sparse_vector(m, density, &mut rng);
            let y = sparse_vector(n, density, &mut rng);
            a.ger(term.rule.weight(j), &x, &y, 1.0);
        }
    }
    Ok(DenseMatrix::from_trusted(a))
}

/// `T(i,j) = decay^|i−j|`.
pub fn toeplitz_covariance(n: usize, decay: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| decay.powi(i.abs_diff(j) as i32))
}

/// `F = N R` where `N` is standard normal and `RᵀR` is the Toeplitz
/// covariance.
pub fn correlated_gaussian(m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let t = toeplitz_covariance(n, TOEPLITZ_DECAY);
    let l = Cholesky::new(t)
        .ok_or_else(|| Error::RankDeficient("Toeplitz covariance is not positive definite".into()))?
        .unpack();
    Ok(gaussian(m, n, seed) * l.transpose())
}

/// Correlated Gaussian noise scaled to `‖E‖ = ε‖signal‖`.
pub fn toeplitz_noise(
    m: usize,
    n: usize,
    epsilon: f64,
    signal: &DenseMatrix,
    seed: u64,
) -> Result<DenseMatrix> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise level {epsilon} must be finite and nonnegative"
        )));
    }
    if signal.shape() != (m, n) {
        return Err(Error::Dimension(format!(
            "signal is {:?}, expected ({m}, {n})",
            signal.shape()
        )));
    }
    if epsilon == 0.0 {
        return Ok(DenseMatrix::zeros(m, n));
    }
    let f = correlated_gaussian(m, n, seed)?;
    let factor = epsilon * spectral_norm(signal) / spectral_norm(&f);
    Ok(DenseMatrix::from_trusted(f * factor))
}

/// `A_E = A + ε (‖A‖/‖BFG‖) BFG` with standard normal `B` (m×ℓ), `F` (ℓ×d)
/// and `G` (d×n). Returns `(A_E, B, G)`.
pub fn bfg_perturb(
    a: &DenseMatrix,
    l: usize,
    d: usize,
    epsilon: f64,
    seed: u64,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let (m, n) = a.shape();
    if !(l >= d && d >= m && m >= n) {
        return Err(Error::Dimension(format!(
            "need l >= d >= m >= n, got l={l}, d={d}, m={m}, n={n}"
        )));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise level {epsilon} must be finite and nonnegative"
        )));
    }
    let b = gaussian(m, l, derive_seed(seed, 1));
    let f = gaussian(l, d, derive_seed(seed, 2));
    let g = gaussian(d, n, derive_seed(seed, 3));
    let a_e = if epsilon == 0.0 {
        a.as_nalgebra().clone()
    } else {
        let bfg = &b * (f * &g);
        let factor = epsilon * spectral_norm(a) / spectral_norm(&bfg);
        a.as_nalgebra() + bfg * factor
    };
    Ok((
        DenseMatrix::from_trusted(a_e),
        DenseMatrix::from_trusted(b),
        DenseMatrix::from_trusted(g),
    ))
}

/// Mean and variance of one block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockStats {
    pub mean: f64,
    pub variance: f64,
}

impl BlockStats {
    pub const fn new(mean: f64, variance: f64) -> Self {
        BlockStats { mean, variance }
    }
}

/// Block layout of the subgroup problem: four groups of rows in the target,
/// three column blocks everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgroupLayout {
    pub target: [[BlockStats; 3]; 4],
    pub background: [BlockStats; 3],
}

impl Default for SubgroupLayout {
    fn default() -> Self {
        let wide = BlockStats::new(0.0, 100.0);
        let unit = BlockStats::new(0.0, 1.0);
        SubgroupLayout {
            target: [
                [wide, unit, unit],
                [wide, unit, BlockStats::new(3.0, 1.0)],
                [wide, BlockStats::new(6.0, 1.0), unit],
                [wide, BlockStats::new(6.0, 1.0), BlockStats::new(3.0, 1.0)],
            ],
            background: [
                BlockStats::new(0.0, 100.0),
                BlockStats::new(0.0, 9.0),
                BlockStats::new(0.0, 1.0),
            ],
        }
    }
}

fn fill_blocks(
    out: &mut DMatrix<f64>,
    row0: usize,
    rows: usize,
    d: usize,
    stats: &[BlockStats; 3],
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    for (b, s) in stats.iter().enumerate() {
        let dist = Normal::new(s.mean, s.variance.sqrt())
            .map_err(|e| Error::InvalidParameter(format!("block ({}, {}): {e}", s.mean, s.variance)))?;
        for j in b * d..(b + 1) * d {
            for i in row0..row0 + rows {
                out[(i, j)] = dist.sample(rng);
            }
        }
    }
    Ok(())
}

/// Target `A` (4m × 3d) and background `B` (m × 3d) with the given layout.
pub fn subgroup_data_with(
    m: usize,
    d: usize,
    layout: &SubgroupLayout,
    seed: u64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if m == 0 || d == 0 {
        return Err(Error::Dimension(format!("need m, d >= 1, got m={m}, d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(4 * m, 3 * d);
    for (g, stats) in layout.target.iter().enumerate() {
        fill_blocks(&mut a, g * m, m, d, stats, &mut rng)?;
    }
    let mut b = DMatrix::zeros(m, 3 * d);
    fill_blocks(&mut b, 0, m, d, &layout.background, &mut rng)?;
    Ok((DenseMatrix::from_trusted(a), DenseMatrix::from_trusted(b)))
}

/// [`subgroup_data_with`] using the default layout.
pub fn subgroup_data(m: usize, d: usize, seed: u64) -> Result<(DenseMatrix, DenseMatrix)> {
    subgroup_data_with(m, d, &SubgroupLayout::default(), seed)
}

/// `‖A − Â‖ / ‖A‖` in the 2-norm.
pub fn relative_error(a: &DenseMatrix, ahat: &DenseMatrix) -> Result<f64> {
    if a.shape() != ahat.shape() {
        return Err(Error::Dimension(format!(
            "shapes differ: {:?} vs {:?}",
            a.shape(),
            ahat.shape()
        )));
    }
    let denom = spectral_norm(a);
    if denom == 0.0 {
        return Err(Error::InvalidParameter("reference matrix has zero norm".into()));
    }
    Ok(spectral_norm(&(a.as_nalgebra() - ahat.as_nalgebra())) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::singular_values;

    #[test]
    fn single_term_is_rank_one() {
        let terms = [Term::new(1, WeightRule::Constant(2.0))];
        let a = sparse_lowrank(30, 20, &terms, 1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sparse_vector(30, 1.0, &mut rng);
        let y = sparse_vector(20, 1.0, &mut rng);
        let want = 2.0 * x.norm() * y.norm();
        assert!((spectral_norm(&a) - want).abs() <= 1e-12 * want);
        let s = singular_values(&a);
        assert!(s[1] <= 1e-12 * s[0]);
    }

    #[test]
    fn default_terms_have_numerical_rank_at_most_50() {
        let a = sparse_lowrank(400, 120, &default_terms(), 0.1, 5).unwrap();
        let s = singular_values(&a);
        assert!(s[50] / s[0] < 1e-12);
        assert!(a.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rank100_rule_weights() {
        let t = rank100_terms();
        assert_eq!(t.iter().map(|t| t.count).sum::<usize>(), 100);
        assert_eq!(t[0].rule.weight(10), 0.2);
        assert_eq!(t[1].rule.weight(100), 0.01);
    }

    #[test]
    fn sparse_lowrank_rejects_bad_density() {
        assert!(sparse_lowrank(5, 5, &default_terms(), 0.0, 1).is_err());
        assert!(sparse_lowrank(5, 5, &default_terms(), 1.5, 1).is_err());
    }

    #[test]
    fn toeplitz_noise_scaling() {
        let a = DenseMatrix::from_trusted(gaussian(50, 20, 1));
        let zero = toeplitz_noise(50, 20, 0.0, &a, 2).unwrap();
        assert_eq!(zero.as_nalgebra(), &DMatrix::zeros(50, 20));
        let e = toeplitz_noise(50, 20, 0.2, &a, 2).unwrap();
        assert!((spectral_norm(&e) / spectral_norm(&a) - 0.2).abs() < 1e-10);
        assert!(toeplitz_noise(50, 20, -1.0, &a, 2).is_err());
    }

    #[test]
    fn correlated_gaussian_covariance() {
        let rows = 20000;
        let n = 6;
        let f = correlated_gaussian(rows, n, 11).unwrap();
        let cov = f.transpose() * &f / rows as f64;
        let t = toeplitz_covariance(n, TOEPLITZ_DECAY);
        assert!((cov - t).amax() < 0.05);
    }

    #[test]
    fn bfg_perturbation_level() {
        let a = DenseMatrix::from_trusted(gaussian(12, 8, 1));
        let (ae, b, g) = bfg_perturb(&a, 20, 15, 0.1, 4).unwrap();
        assert_eq!(b.shape(), (12, 20));
        assert_eq!(g.shape(), (15, 8));
        let rel = relative_error(&a, &ae).unwrap();
        assert!((rel - 0.1).abs() < 1e-10);
        let (ae0, _, _) = bfg_perturb(&a, 20, 15, 0.0, 4).unwrap();
        assert_eq!(ae0, a);
        assert_eq!(bfg_perturb(&a, 20, 15, 0.1, 4).unwrap().0, ae);
        assert!(bfg_perturb(&a, 10, 15, 0.1, 4).is_err());
    }

    #[test]
    fn subgroup_blocks() {
        let (m, d) = (2500, 10);
        let (a, b) = subgroup_data(m, d, 8).unwrap();
        assert_eq!(a.shape(), (4 * m, 3 * d));
        assert_eq!(b.shape(), (m, 3 * d));
        let layout = SubgroupLayout::default();
        let check = |x: &DMatrix<f64>, rows: std::ops::Range<usize>, blk: usize, s: BlockStats| {
            let vals: Vec<f64> = rows
                .flat_map(|i| (blk * d..(blk + 1) * d).map(move |j| (i, j)))
                .map(|(i, j)| x[(i, j)])
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            assert!((var - s.variance).abs() <= 0.1 * s.variance, "variance {var} vs {}", s.variance);
            assert!((mean - s.mean).abs() <= 0.2, "mean {mean} vs {}", s.mean);
        };
        for (g, stats) in layout.target.iter().enumerate() {
            for (blk, s) in stats.iter().enumerate() {
                check(&a, g * m..(g + 1) * m, blk, *s);
            }
        }
        for (blk, s) in layout.background.iter().enumerate() {
            check(&b, 0..m, blk, *s);
        }
    }

    #[test]
    fn relative_error_cases() {
        let a = DenseMatrix::from_trusted(gaussian(5, 4, 1));
        assert_eq!(relative_error(&a, &a).unwrap(), 0.0);
        assert!((relative_error(&a, &DenseMatrix::zeros(5, 4)).unwrap() - 1.0).abs() < 1e-14);
        assert!((relative_error(&a, &a.scale(2.0).unwrap()).unwrap() - 1.0).abs() < 1e-14);
        assert!(relative_error(&DenseMatrix::zeros(5, 4), &a).is_err());
        assert!(relative_error(&a, &DenseMatrix::zeros(4, 4)).is_err());
    }
}
