//! Gaussian test matrices and the one-pass randomized range finder.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{qr_parts, DenseMatrix};

pub const DEFAULT_OVERSAMPLING: usize = 5;

/// Default L-DEIM budget `⌈k/2⌉`.
pub fn default_khat(k: usize) -> usize {
    k.div_ceil(2)
}

/// Target rank, oversampling, L-DEIM budget and seed of a randomized run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SketchConfig {
    k: usize,
    p: usize,
    khat: usize,
    seed: u64,
}

impl SketchConfig {
    pub fn new(k: usize, p: usize, khat: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("target rank must be at least 1".into()));
        }
        if khat == 0 || khat > k {
            return Err(Error::InvalidParameter(format!(
                "L-DEIM budget {khat} must lie in 1..={k}"
            )));
        }
        Ok(Self { k, p, khat, seed })
    }

    /// `p = 5` and `k̂ = ⌈k/2⌉`.
    pub fn with_defaults(k: usize, seed: u64) -> Result<Self> {
        Self::new(k, DEFAULT_OVERSAMPLING, default_khat(k), seed)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn khat(&self) -> usize {
        self.khat
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Seed for the `stream`-th independent sketch of a run seeded with `seed`
/// (SplitMix64 finalizer over the pair).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// i.i.d. standard normal matrix, filled column by column from a ChaCha8
/// stream keyed by `seed`.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    DenseMatrix::from_trusted(gaussian(rows, cols, seed))
}

pub(crate) fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = StandardNormal
        .sample_iter(&mut rng)
        .take(rows * cols)
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Orthonormal `Q` (rows × ℓ) from the QR factorization of `AΩ`.
pub fn range_finder(a: &DenseMatrix, width: usize, seed: u64) -> Result<DenseMatrix> {
    Ok(DenseMatrix::from_trusted(range_basis(a, width, seed)?))
}

pub(crate) fn range_basis(a: &DMatrix<f64>, width: usize, seed: u64) -> Result<DMatrix<f64>> {
    let (m, n) = a.shape();
    if width == 0 || width > m.min(n) {
        return Err(Error::InvalidParameter(format!(
            "sketch width {width} must lie in 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    let omega = gaussian(n, width, seed);
    Ok(qr_parts(&(a * omega)).0)
}
