//! Row/column index selection: DEIM, L-DEIM and leverage scores.
//!
//! Every argmax breaks ties toward the lowest index.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{spectral_norm, DenseMatrix, IndexList};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SelectionMethod {
    Deim,
    Ldeim,
    Leverage,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionResult {
    pub indices: IndexList,
    pub method: SelectionMethod,
}

/// Greedy DEIM selection of one index per column of `v` (m×k, k ≤ m).
pub fn deim_select(v: &DenseMatrix) -> Result<SelectionResult> {
    if v.cols() > v.rows() {
        return Err(Error::Dimension(format!(
            "DEIM needs k <= m, got a {}x{} basis",
            v.rows(),
            v.cols()
        )));
    }
    let (indices, _) = deflate_and_pivot(v, v.cols())?;
    Ok(SelectionResult {
        indices: IndexList::new(indices)?,
        method: SelectionMethod::Deim,
    })
}

/// L-DEIM: DEIM on the `k̂ = v.cols()` columns, then the `k − k̂` largest
/// row norms of the deflated basis among the rows not yet chosen.
pub fn ldeim_select(v: &DenseMatrix, k: usize) -> Result<SelectionResult> {
    let (m, khat) = v.shape();
    if k > m {
        return Err(Error::InvalidParameter(format!(
            "L-DEIM target {k} exceeds the {m} available rows"
        )));
    }
    if khat > k {
        return Err(Error::InvalidParameter(format!(
            "L-DEIM basis has {khat} columns but the target is only {k}"
        )));
    }
    let (mut indices, deflated) = deflate_and_pivot(v, khat)?;
    if k > khat {
        let mut chosen = vec![false; m];
        for &i in &indices {
            chosen[i] = true;
        }
        let scores = row_norms_squared(&deflated);
        let extra: Vec<usize> = ranked_desc(&scores)
            .into_iter()
            .filter(|&i| !chosen[i])
            .take(k - khat)
            .collect();
        indices.extend(extra);
    }
    Ok(SelectionResult {
        indices: IndexList::new(indices)?,
        method: SelectionMethod::Ldeim,
    })
}

/// Squared row norms `ℓ_i = ‖V(i,:)‖²`.
pub fn leverage_scores(v: &DenseMatrix) -> Vec<f64> {
    let k = v.cols();
    let defect = spectral_norm(&(v.transpose() * &**v - DMatrix::identity(k, k)));
    if defect > 1e-8 {
        log::warn!("leverage scores of a basis that is not orthonormal (defect {defect:.3e})");
    }
    row_norms_squared(v)
}

/// The `k` rows with the largest leverage scores, largest first.
pub fn leverage_select(v: &DenseMatrix, k: usize) -> Result<SelectionResult> {
    if k > v.rows() {
        return Err(Error::InvalidParameter(format!(
            "cannot select {k} of {} rows",
            v.rows()
        )));
    }
    let scores = leverage_scores(v);
    let mut order = ranked_desc(&scores);
    order.truncate(k);
    Ok(SelectionResult {
        indices: IndexList::new(order)?,
        method: SelectionMethod::Leverage,
    })
}

/// Worst-case growth `√(mk/3)·2^k` of `‖(PᵀV)⁻¹‖` for DEIM indices.
pub fn deim_growth_bound(m: usize, k: usize) -> f64 {
    ((m * k) as f64 / 3.0).sqrt() * 2f64.powi(k as i32)
}

/// `‖(PᵀV)⁻¹‖` for the selected rows, infinite when `PᵀV` is singular.
pub fn interpolation_growth(v: &DenseMatrix, idx: &IndexList) -> Result<f64> {
    let pv = v.select_rows(idx)?;
    if pv.rows() != pv.cols() {
        return Err(Error::Dimension(format!(
            "{} indices for a basis with {} columns",
            pv.rows(),
            pv.cols()
        )));
    }
    let s = crate::matrix::singular_values(&pv);
    Ok(match s.last() {
        Some(&smin) if smin > 0.0 => 1.0 / smin,
        Some(_) => f64::INFINITY,
        None => 0.0,
    })
}

/// Algorithm-2 style pivoting over the first `count` columns: pick the
/// argmax of column j, then remove from column j+1 its interpolant on the
/// columns chosen so far. Returns the pivots and the deflated columns.
fn deflate_and_pivot(v: &DenseMatrix, count: usize) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let m = v.rows();
    let mut basis = v.columns(0, count).into_owned();
    let mut pivots = Vec::with_capacity(count);
    let mut taken = vec![false; m];

    for j in 0..count {
        let col = basis.column(j);
        let mut best: Option<(usize, f64)> = None;
        for (i, x) in col.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let a = x.abs();
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((i, a));
            }
        }
        let (pj, mag) = best.ok_or_else(|| {
            Error::RankDeficient("no rows left to select".into())
        })?;
        if mag == 0.0 {
            return Err(Error::RankDeficient(format!(
                "residual of basis column {j} vanishes"
            )));
        }
        pivots.push(pj);
        taken[pj] = true;

        if j + 1 < count {
            let vp = basis.view((0, 0), (m, j + 1)).select_rows(&pivots);
            let rhs = DMatrix::from_iterator(
                j + 1,
                1,
                pivots.iter().map(|&p| basis[(p, j + 1)]),
            );
            let coeff = vp.lu().solve(&rhs).ok_or_else(|| {
                Error::RankDeficient(format!("interpolation block singular at step {j}"))
            })?;
            let correction = basis.columns(0, j + 1) * coeff;
            let mut next = basis.column_mut(j + 1);
            next -= correction;
        }
    }
    Ok((pivots, basis))
}

fn row_norms_squared(v: &DMatrix<f64>) -> Vec<f64> {
    (0..v.nrows())
        .map(|i| v.row(i).iter().map(|x| x * x).sum())
        .collect()
}

/// Positions sorted by descending score, ties by lowest position.
fn ranked_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DenseMatrix {
        DenseMatrix::from_row_slice(rows, cols, data).unwrap()
    }

    fn basis_columns(m: usize, k: usize) -> DenseMatrix {
        DenseMatrix::from_nalgebra(DMatrix::identity(m, k)).unwrap()
    }

    #[test]
    fn deim_examples() {
        let r = deim_select(&basis_columns(3, 2)).unwrap();
        assert_eq!(r.indices.as_slice(), &[0, 1]);
        assert_eq!(r.method, SelectionMethod::Deim);

        let r = deim_select(&mat(3, 1, &[0.2, -0.9, 0.5])).unwrap();
        assert_eq!(r.indices.as_slice(), &[1]);

        let v = mat(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        assert_eq!(deim_select(&v).unwrap().indices.as_slice(), &[0, 1]);
    }

    #[test]
    fn deim_rejects_zero_residual() {
        let v = mat(3, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(deim_select(&v), Err(Error::RankDeficient(_))));
        assert!(matches!(
            deim_select(&DenseMatrix::zeros(3, 1)),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn ldeim_examples() {
        let v = basis_columns(4, 2);
        assert_eq!(
            ldeim_select(&v, 3).unwrap().indices.as_slice(),
            &[0, 1, 2]
        );
        assert_eq!(
            ldeim_select(&v, 2).unwrap().indices,
            deim_select(&v).unwrap().indices
        );
        assert!(ldeim_select(&v, 5).is_err());
        assert!(ldeim_select(&v, 1).is_err());
    }

    #[test]
    fn leverage_examples() {
        let s = leverage_scores(&basis_columns(3, 2));
        assert_eq!(s, vec![1.0, 1.0, 0.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = leverage_scores(&mat(3, 2, &[h, 0.0, h, 0.0, 0.0, 1.0]));
        assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);
        assert_eq!(s[2], 1.0);

        let r = leverage_select(&basis_columns(3, 2), 1).unwrap();
        assert_eq!(r.indices.as_slice(), &[0]);

        let scores = mat(3, 1, &[0.1f64.sqrt(), 0.9f64.sqrt(), 0.5f64.sqrt()]);
        assert_eq!(
            leverage_select(&scores, 2).unwrap().indices.as_slice(),
            &[1, 2]
        );
        assert!(leverage_select(&scores, 4).is_err());
    }

    #[test]
    fn growth_bound_values() {
        assert!((deim_growth_bound(3, 1) - 2.0).abs() < 1e-15);
        let v = basis_columns(3, 2);
        let idx = IndexList::new(vec![0, 1]).unwrap();
        assert!((interpolation_growth(&v, &idx).unwrap() - 1.0).abs() < 1e-15);
    }

    fn orthonormal(m: usize, k: usize, data: &[f64]) -> DenseMatrix {
        let raw = DMatrix::from_column_slice(m, k, &data[..m * k]);
        DenseMatrix::from_nalgebra(crate::matrix::qr_parts(&raw).0).unwrap()
    }

    proptest! {
        #[test]
        fn deim_ignores_column_signs(
            data in proptest::collection::vec(-1.0f64..1.0, 60),
            flips in proptest::collection::vec(any::<bool>(), 4),
        ) {
            let v = orthonormal(15, 4, &data);
            let mut flipped = v.clone().into_inner();
            for (j, &f) in flips.iter().enumerate() {
                if f {
                    flipped.column_mut(j).neg_mut();
                }
            }
            let flipped = DenseMatrix::from_nalgebra(flipped).unwrap();
            prop_assert_eq!(deim_select(&v).unwrap().indices, deim_select(&flipped).unwrap().indices);
        }

        #[test]
        fn ldeim_full_budget_is_deim(data in proptest::collection::vec(-1.0f64..1.0, 60)) {
            let v = orthonormal(12, 5, &data);
            prop_assert_eq!(ldeim_select(&v, 5).unwrap().indices, deim_select(&v).unwrap().indices);
        }

        #[test]
        fn interpolation_identity(
            data in proptest::collection::vec(-1.0f64..1.0, 60),
            x in proptest::collection::vec(-10.0f64..10.0, 20),
        ) {
            let v = orthonormal(20, 3, &data);
            let idx = deim_select(&v).unwrap().indices;
            let pv = v.select_rows(&idx).unwrap();
            let xp = DMatrix::from_iterator(3, 1, idx.iter().map(|&i| x[i]));
            let c = pv.clone_owned().lu().solve(&xp).unwrap();
            let proj = &*v * c;
            for (r, &i) in idx.iter().enumerate() {
                prop_assert!((proj[(i, 0)] - xp[(r, 0)]).abs() <= 1e-10 * (1.0 + xp[(r, 0)].abs()));
            }
        }

        #[test]
        fn leverage_sums_to_rank(data in proptest::collection::vec(-1.0f64..1.0, 60)) {
            let v = orthonormal(15, 4, &data);
            let total: f64 = leverage_scores(&v).iter().sum();
            prop_assert!((total - 4.0).abs() < 1e-10);
        }
    }
}
