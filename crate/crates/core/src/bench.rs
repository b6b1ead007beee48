//! Seeded experiment drivers producing per-run error and timing rows.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::Cholesky;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcur::{cur, gcur_deterministic, r_deim_gcur, r_ldeim_gcur, Selector, Sides};
use crate::matrix::DenseMatrix;
use crate::rsvd_cur::{r_ldeim_rsvd_cur, rsvd_cur};
use crate::sketch::{derive_seed, SketchConfig};
use crate::synth::{
    bfg_perturb, default_terms, rank100_terms, relative_error, sparse_lowrank, toeplitz_covariance,
    toeplitz_noise, DEFAULT_DENSITY, TOEPLITZ_DECAY,
};

/// Noisy low-rank recovery problem for matrix pairs.
#[derive(Clone, Debug)]
pub struct PairProblem {
    /// Clean low-rank matrix.
    pub a: DenseMatrix,
    /// `A + E` with correlated noise `E`.
    pub a_e: DenseMatrix,
    /// Cholesky factor of the noise covariance (n × n, upper triangular).
    pub b: DenseMatrix,
}

/// Builds the pair problem at noise level `eps`.
pub fn pair_problem(m: usize, n: usize, eps: f64, seed: u64) -> Result<PairProblem> {
    let a = sparse_lowrank(m, n, &default_terms(), DEFAULT_DENSITY, derive_seed(seed, 10))?;
    let e = toeplitz_noise(m, n, eps, &a, derive_seed(seed, 11))?;
    let a_e = a.add(&e)?;
    let l = Cholesky::new(toeplitz_covariance(n, TOEPLITZ_DECAY))
        .ok_or_else(|| Error::RankDeficient("Toeplitz covariance is not positive definite".into()))?
        .unpack();
    let b = DenseMatrix::from_nalgebra(l.transpose())?;
    Ok(PairProblem { a, a_e, b })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairMethod {
    DeimCur,
    Gcur,
    RDeimGcur,
    RLdeimGcur,
}

impl PairMethod {
    pub const ALL: [PairMethod; 4] =
        [PairMethod::DeimCur, PairMethod::Gcur, PairMethod::RDeimGcur, PairMethod::RLdeimGcur];

    pub fn name(self) -> &'static str {
        match self {
            PairMethod::DeimCur => "DEIM-CUR",
            PairMethod::Gcur => "GCUR",
            PairMethod::RDeimGcur => "R-DEIM-GCUR",
            PairMethod::RLdeimGcur => "R-LDEIM-GCUR",
        }
    }
}

impl fmt::Display for PairMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Approximates `A_E` with `method` and measures the error against the clean
/// `A`. Timing covers the factorization only.
pub fn run_pair(
    prob: &PairProblem,
    method: PairMethod,
    k: usize,
    khat: usize,
    p: usize,
    seed: u64,
) -> Result<(f64, Duration)> {
    let a_e = &prob.a_e;
    let start = Instant::now();
    let approx_input = match method {
        PairMethod::DeimCur => {
            let f = cur(a_e, k, Selector::Deim, k)?;
            let t = start.elapsed();
            return Ok((relative_error(&prob.a, &f.approx(a_e)?)?, t));
        }
        PairMethod::Gcur => gcur_deterministic(a_e, &prob.b, k, Selector::Deim, k, Sides::AOnly)?,
        PairMethod::RDeimGcur => {
            let cfg = SketchConfig::new(k, p, k, seed)?;
            r_deim_gcur(a_e, &prob.b, &cfg, Sides::AOnly)?
        }
        PairMethod::RLdeimGcur => {
            let cfg = SketchConfig::new(k, p, khat, seed)?;
            r_ldeim_gcur(a_e, &prob.b, &cfg, Sides::AOnly)?
        }
    };
    let t = start.elapsed();
    Ok((relative_error(&prob.a, &approx_input.approx_a(a_e)?)?, t))
}

/// One row of a benchmark report.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub experiment: &'static str,
    pub method: String,
    pub k: usize,
    pub khat: usize,
    pub p: usize,
    pub seed: u64,
    pub eps: f64,
    pub err: f64,
    pub wall_ms: f64,
}

/// Error-versus-rank sweep on the pair problem.
#[derive(Clone, Debug)]
pub struct PairSweep {
    pub m: usize,
    pub n: usize,
    pub eps: f64,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub p: usize,
    pub methods: Vec<PairMethod>,
}

/// L-DEIM budget `⌈k/2⌉`, as used by the benchmark drivers.
fn half(k: usize) -> usize {
    k.div_ceil(2)
}

pub fn exp1(cfg: &PairSweep) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let prob = pair_problem(cfg.m, cfg.n, cfg.eps, seed)?;
        for &k in &cfg.ks {
            for &method in &cfg.methods {
                let khat = half(k);
                let (err, t) = run_pair(&prob, method, k, khat, cfg.p, derive_seed(seed, 12))?;
                rows.push(BenchRow {
                    experiment: "exp1",
                    method: method.name().into(),
                    k,
                    khat: if method == PairMethod::RLdeimGcur { khat } else { k },
                    p: cfg.p,
                    seed,
                    eps: cfg.eps,
                    err,
                    wall_ms: t.as_secs_f64() * 1e3,
                });
            }
        }
    }
    Ok(rows)
}

/// Noisy low-rank recovery problem for triplets.
#[derive(Clone, Debug)]
pub struct TripletProblem {
    pub a: DenseMatrix,
    pub a_e: DenseMatrix,
    pub b: DenseMatrix,
    pub g: DenseMatrix,
}

/// Rank-100 sparse `A` (m × n) perturbed by `ε(‖A‖/‖BFG‖)BFG`.
pub fn triplet_problem(l: usize, d: usize, m: usize, n: usize, eps: f64, seed: u64) -> Result<TripletProblem> {
    let a = sparse_lowrank(m, n, &rank100_terms(), DEFAULT_DENSITY, derive_seed(seed, 20))?;
    let (a_e, b, g) = bfg_perturb(&a, l, d, eps, derive_seed(seed, 21))?;
    Ok(TripletProblem { a, a_e, b, g })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TripletMethod {
    DeimRsvdCur,
    LdeimRsvdCur,
    RLdeimRsvdCur,
}

impl TripletMethod {
    pub const ALL: [TripletMethod; 3] =
        [TripletMethod::DeimRsvdCur, TripletMethod::LdeimRsvdCur, TripletMethod::RLdeimRsvdCur];

    pub fn name(self) -> &'static str {
        match self {
            TripletMethod::DeimRsvdCur => "DEIM-RSVD-CUR",
            TripletMethod::LdeimRsvdCur => "LDEIM-RSVD-CUR",
            TripletMethod::RLdeimRsvdCur => "R-LDEIM-RSVD-CUR",
        }
    }
}

impl fmt::Display for TripletMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Approximates `A_E` from the triplet `(A_E, B, G)` and measures the error
/// against the clean `A`.
pub fn run_triplet(
    prob: &TripletProblem,
    method: TripletMethod,
    k: usize,
    khat: usize,
    p: usize,
    seed: u64,
) -> Result<(f64, Duration)> {
    let (a_e, b, g) = (&prob.a_e, &prob.b, &prob.g);
    let start = Instant::now();
    let f = match method {
        TripletMethod::DeimRsvdCur => rsvd_cur(a_e, b, g, k, Selector::Deim, k)?,
        TripletMethod::LdeimRsvdCur => rsvd_cur(a_e, b, g, k, Selector::Ldeim, khat)?,
        TripletMethod::RLdeimRsvdCur => {
            r_ldeim_rsvd_cur(a_e, b, g, &SketchConfig::new(k, p, khat, seed)?)?
        }
    };
    let t = start.elapsed();
    Ok((relative_error(&prob.a, &f.approx_a(a_e)?)?, t))
}

/// Triplet experiment at one problem size.
#[derive(Clone, Debug)]
pub struct TripletRun {
    pub l: usize,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub p: usize,
    pub seeds: Vec<u64>,
}

/// DEIM-RSVD-CUR, LDEIM-RSVD-CUR (`k̂ = k/2`) and R-LDEIM-RSVD-CUR with
/// `k̂ = k` and `k̂ = k/2`.
pub fn exp4(cfg: &TripletRun) -> Result<Vec<BenchRow>> {
    let k = cfg.k;
    let plan = [
        (TripletMethod::DeimRsvdCur, k),
        (TripletMethod::LdeimRsvdCur, half(k)),
        (TripletMethod::RLdeimRsvdCur, k),
        (TripletMethod::RLdeimRsvdCur, half(k)),
    ];
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let prob = triplet_problem(cfg.l, cfg.d, cfg.m, cfg.n, cfg.eps, seed)?;
        for &(method, khat) in &plan {
            let (err, t) = run_triplet(&prob, method, k, khat, cfg.p, derive_seed(seed, 22))?;
            rows.push(BenchRow {
                experiment: "exp4",
                method: method.name().into(),
                k,
                khat,
                p: cfg.p,
                seed,
                eps: cfg.eps,
                err,
                wall_ms: t.as_secs_f64() * 1e3,
            });
        }
    }
    Ok(rows)
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_sweeps_run() {
        let rows = exp1(&PairSweep {
            m: 200,
            n: 40,
            eps: 0.1,
            ks: vec![4, 8],
            seeds: vec![1],
            p: 5,
            methods: PairMethod::ALL.to_vec(),
        })
        .unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.err.is_finite()));
        let rows = exp4(&TripletRun { l: 60, d: 50, m: 40, n: 30, k: 6, eps: 0.1, p: 10, seeds: vec![2] }).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.err.is_finite()));
    }
}
