//! Set systems and general real constraint matrices.
//!
//! A [`SparseInstance`] is the matrix `A` whose rows are sets (or general
//! constraint rows) and whose columns are elements. Instances are immutable
//! after construction and safe to share across threads.

mod generate;
mod io;

pub use generate::{Family, generate};
pub use io::{
    fingerprint, parse_instance, parse_weights, write_instance, write_weights,
};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Whether the coefficients are 0-1 set-membership or arbitrary reals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeHint {
    /// All stored coefficients are exactly 1 and every row is non-empty.
    SetSystem,
    /// Arbitrary finite real coefficients.
    General,
}

impl ModeHint {
    pub fn token(self) -> &'static str {
        match self {
            ModeHint::SetSystem => "setsystem",
            ModeHint::General => "general",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceError {
    ColumnOutOfRange { row: usize, col: u32, n: usize },
    DuplicateEntry { row: usize, col: u32 },
    NonFinite { row: usize, col: u32 },
    NotUnitCoefficient { row: usize, col: u32 },
    EmptyRow { row: usize },
    LengthMismatch { expected: usize, got: usize },
    ScaleOutOfRange { index: usize },
    NegativeWeight { row: usize },
    NonFiniteWeight { row: usize },
    InfeasibleParams(String),
    Parse { line: usize, msg: String },
}

impl std::fmt::Display for InstanceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use InstanceError::*;
        match self {
            ColumnOutOfRange { row, col, n } => {
                write!(f, "row {row}: column {col} out of range [0, {n})")
            }
            DuplicateEntry { row, col } => write!(f, "row {row}: duplicate column {col}"),
            NonFinite { row, col } => write!(f, "row {row}: non-finite coefficient at column {col}"),
            NotUnitCoefficient { row, col } => {
                write!(f, "row {row}: set-system coefficient at column {col} is not 1")
            }
            EmptyRow { row } => write!(f, "row {row} is empty"),
            LengthMismatch { expected, got } => {
                write!(f, "coloring length {got} does not match n = {expected}")
            }
            ScaleOutOfRange { index } => write!(f, "|x({index})| > 1"),
            NegativeWeight { row } => write!(f, "negative weight for row {row}"),
            NonFiniteWeight { row } => write!(f, "non-finite weight for row {row}"),
            InfeasibleParams(msg) => write!(f, "infeasible generator parameters: {msg}"),
            Parse { line, msg } => write!(f, "parse error on line {line}: {msg}"),
        }
    }
}

impl std::error::Error for InstanceError {}

/// Sparse matrix in CSR layout: `m` rows over `n` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance<S> {
    n: usize,
    indptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<S>,
    mode: ModeHint,
}

/// Sparsity and norm metadata reported by [`SparseInstance::validate`].
///
/// `t` is the max column membership count for set systems, and the max
/// column squared l2-norm for general matrices. `s[j]` is the row size for
/// set systems and the row l1-norm for general matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityProfile<S> {
    pub t: S,
    pub s: Vec<S>,
    pub column_l2: Vec<S>,
    pub mode: ModeHint,
}

impl<S: Scalar> SparsityProfile<S> {
    pub fn max_row_mass(&self) -> S {
        self.s.iter().copied().fold(S::zero(), S::max)
    }
}

/// Non-negative per-row weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowWeights<S>(pub Vec<S>);

impl<S: Scalar> RowWeights<S> {
    pub fn uniform(m: usize) -> Self {
        RowWeights(vec![S::one(); m])
    }
}

impl<S: Scalar> SparseInstance<S> {
    /// Build an instance from per-row entry lists, enforcing the structural
    /// invariants (index range, no duplicates, finite coefficients, and for
    /// set systems: unit coefficients and non-empty rows).
    pub fn from_rows(
        n: usize,
        rows: Vec<Vec<(u32, S)>>,
        mode: ModeHint,
    ) -> Result<Self, InstanceError> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0usize);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        let mut seen = vec![u32::MAX; n];
        for (j, row) in rows.into_iter().enumerate() {
            if mode == ModeHint::SetSystem && row.is_empty() {
                return Err(InstanceError::EmptyRow { row: j });
            }
            let mut entries = row;
            entries.sort_unstable_by_key(|&(c, _)| c);
            for &(c, a) in &entries {
                if (c as usize) >= n {
                    return Err(InstanceError::ColumnOutOfRange { row: j, col: c, n });
                }
                if seen[c as usize] == j as u32 {
                    return Err(InstanceError::DuplicateEntry { row: j, col: c });
                }
                seen[c as usize] = j as u32;
                if !a.is_finite() {
                    return Err(InstanceError::NonFinite { row: j, col: c });
                }
                if mode == ModeHint::SetSystem && a != S::one() {
                    return Err(InstanceError::NotUnitCoefficient { row: j, col: c });
                }
                cols.push(c);
                vals.push(a);
            }
            indptr.push(cols.len());
        }
        Ok(SparseInstance { n, indptr, cols, vals, mode })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn mode(&self) -> ModeHint {
        self.mode
    }

    /// Column indices and coefficients of row `j`.
    pub fn row(&self, j: usize) -> (&[u32], &[S]) {
        let lo = self.indptr[j];
        let hi = self.indptr[j + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[u32], &[S])> {
        (0..self.m()).map(move |j| self.row(j))
    }

    /// Check the sparsity/norm hypotheses and compute the profile.
    /// Empty rows are rejected: a set with no elements has trivial zero
    /// discrepancy and pollutes run statistics.
    pub fn validate(&self) -> Result<SparsityProfile<S>, InstanceError> {
        let mut col_count = vec![0usize; self.n];
        let mut col_sq = vec![S::zero(); self.n];
        let mut s = Vec::with_capacity(self.m());
        for j in 0..self.m() {
            let (cols, vals) = self.row(j);
            if cols.is_empty() {
                return Err(InstanceError::EmptyRow { row: j });
            }
            let mut l1 = S::zero();
            for (&c, &a) in cols.iter().zip(vals) {
                col_count[c as usize] += 1;
                col_sq[c as usize] = col_sq[c as usize] + a * a;
                l1 = l1 + a.abs();
            }
            s.push(match self.mode {
                ModeHint::SetSystem => S::of(cols.len() as f64),
                ModeHint::General => l1,
            });
        }
        let t = match self.mode {
            ModeHint::SetSystem => S::of(col_count.iter().copied().max().unwrap_or(0) as f64),
            ModeHint::General => col_sq.iter().copied().fold(S::zero(), S::max),
        };
        let column_l2 = col_sq.iter().map(|&v| v.sqrt()).collect();
        Ok(SparsityProfile { t, s, column_l2, mode: self.mode })
    }

    /// Per-row signed sums `sum_i a_ji x(i)`, their absolute values, and the
    /// max absolute value over rows.
    pub fn discrepancy(&self, x: &[S]) -> Result<(Vec<S>, S), InstanceError> {
        if x.len() != self.n {
            return Err(InstanceError::LengthMismatch { expected: self.n, got: x.len() });
        }
        let mut per_row = Vec::with_capacity(self.m());
        let mut max = S::zero();
        for j in 0..self.m() {
            let d = self.row_sum(j, x).abs();
            max = max.max(d);
            per_row.push(d);
        }
        Ok((per_row, max))
    }

    /// Signed row sum `sum_i a_ji x(i)` for a single row.
    pub fn row_sum(&self, j: usize, x: &[S]) -> S {
        let (cols, vals) = self.row(j);
        let mut acc = S::zero();
        for (&c, &a) in cols.iter().zip(vals) {
            acc = acc + a * x[c as usize];
        }
        acc
    }

    /// The 2m-row matrix whose rows are `A_j` followed by the coordinate
    /// scalings `A_j diag(x)` (or `|A_j| diag(x)` when `absolute_values` is
    /// set, as the l1-energy form requires). Every output column's squared
    /// l2-norm is at most twice the input one for `|x| <= 1`.
    pub fn augment_with_scaled_rows(
        &self,
        x: &[S],
        absolute_values: bool,
    ) -> Result<SparseInstance<S>, InstanceError> {
        if x.len() != self.n {
            return Err(InstanceError::LengthMismatch { expected: self.n, got: x.len() });
        }
        if let Some(i) = x.iter().position(|&v| v.abs() > S::one()) {
            return Err(InstanceError::ScaleOutOfRange { index: i });
        }
        let m = self.m();
        let mut indptr = Vec::with_capacity(2 * m + 1);
        indptr.extend_from_slice(&self.indptr);
        let mut cols = Vec::with_capacity(2 * self.nnz());
        cols.extend_from_slice(&self.cols);
        let mut vals = Vec::with_capacity(2 * self.nnz());
        vals.extend_from_slice(&self.vals);
        for j in 0..m {
            let (rcols, rvals) = self.row(j);
            for (&c, &a) in rcols.iter().zip(rvals) {
                let base = if absolute_values { a.abs() } else { a };
                cols.push(c);
                vals.push(base * x[c as usize]);
            }
            indptr.push(cols.len());
        }
        Ok(SparseInstance { n: self.n, indptr, cols, vals, mode: ModeHint::General })
    }

    /// Scale row `j` by `w_j`. Returns the reweighted matrix and the new max
    /// column l2-norm `beta`. Reported discrepancies on the reweighted rows
    /// divide back by `w_j` to give original-row discrepancies.
    pub fn reweight_rows(
        &self,
        weights: &RowWeights<S>,
    ) -> Result<(SparseInstance<S>, S), InstanceError> {
        if weights.0.len() != self.m() {
            return Err(InstanceError::LengthMismatch { expected: self.m(), got: weights.0.len() });
        }
        for (j, &w) in weights.0.iter().enumerate() {
            if !w.is_finite() {
                return Err(InstanceError::NonFiniteWeight { row: j });
            }
            if w < S::zero() {
                return Err(InstanceError::NegativeWeight { row: j });
            }
        }
        let mut vals = self.vals.clone();
        for j in 0..self.m() {
            let w = weights.0[j];
            for v in &mut vals[self.indptr[j]..self.indptr[j + 1]] {
                *v = *v * w;
            }
        }
        let all_unit = weights.0.iter().all(|&w| w == S::one());
        let mode = if self.mode == ModeHint::SetSystem && all_unit {
            ModeHint::SetSystem
        } else {
            ModeHint::General
        };
        let out = SparseInstance { n: self.n, indptr: self.indptr.clone(), cols: self.cols.clone(), vals, mode };
        let mut col_sq = vec![S::zero(); self.n];
        for (&c, &v) in out.cols.iter().zip(&out.vals) {
            col_sq[c as usize] = col_sq[c as usize] + v * v;
        }
        let beta = col_sq.iter().copied().fold(S::zero(), S::max).sqrt();
        Ok((out, beta))
    }
}

/// Weight for a size class: `sqrt(i + log2 t)`, with the log clamped below
/// at 0 so small `t` stays sane. Class 0 (rows smaller than `t`) gets 1.
pub fn class_weight<S: Scalar>(class: u32, t: S) -> S {
    if class == 0 {
        return S::one();
    }
    let log_t = if t > S::one() { t.log2() } else { S::zero() };
    (S::of(class as f64) + log_t).sqrt()
}

/// Size class of a row of mass `s` relative to `t`: 0 when `s < t`, else the
/// unique `i >= 1` with `t * 2^(i-1) <= s < t * 2^i`.
pub fn size_class<S: Scalar>(s: S, t: S) -> u32 {
    if t <= S::zero() || s < t {
        return 0;
    }
    let ratio = (s / t).as_f64();
    (ratio.log2().floor() as i64 + 1).max(1) as u32
}

/// The tail-decay weight vector: weight `sqrt(i + log2 t)` for rows in size
/// class `i >= 1`, weight 1 for rows smaller than `t`.
pub fn tail_class_weights<S: Scalar>(profile: &SparsityProfile<S>) -> RowWeights<S> {
    let t = profile.t;
    RowWeights(
        profile
            .s
            .iter()
            .map(|&s| class_weight(size_class(s, t), t))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> SparseInstance<f64> {
        generate(&Family::Identity { n }, 0).unwrap()
    }

    fn fano() -> SparseInstance<f64> {
        generate(&Family::FanoPlane, 0).unwrap()
    }

    #[test]
    fn validate_identity() {
        let p = identity(3).validate().unwrap();
        assert_eq!(p.t, 1.0);
        assert_eq!(p.s, vec![1.0, 1.0, 1.0]);
        assert_eq!(p.column_l2, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn validate_fano() {
        let p = fano().validate().unwrap();
        assert_eq!(p.t, 3.0);
        assert!(p.s.iter().all(|&s| s == 3.0));
    }

    #[test]
    fn validate_general_unit_column() {
        let c = 0.5f64.sqrt();
        let inst = SparseInstance::from_rows(
            1,
            vec![vec![(0, c)], vec![(0, c)]],
            ModeHint::General,
        )
        .unwrap();
        let p = inst.validate().unwrap();
        assert!((p.t - 1.0).abs() < 1e-12);
        assert!((p.column_l2[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_empty_row() {
        let inst =
            SparseInstance::<f64>::from_rows(2, vec![vec![(0, 1.0)], vec![]], ModeHint::General)
                .unwrap();
        assert_eq!(inst.validate().unwrap_err(), InstanceError::EmptyRow { row: 1 });
    }

    #[test]
    fn construction_rejects_bad_rows() {
        assert!(matches!(
            SparseInstance::from_rows(2, vec![vec![(2, 1.0)]], ModeHint::General),
            Err(InstanceError::ColumnOutOfRange { .. })
        ));
        assert!(matches!(
            SparseInstance::from_rows(2, vec![vec![(0, 1.0), (0, 1.0)]], ModeHint::General),
            Err(InstanceError::DuplicateEntry { .. })
        ));
        assert!(matches!(
            SparseInstance::from_rows(2, vec![vec![(0, f64::NAN)]], ModeHint::General),
            Err(InstanceError::NonFinite { .. })
        ));
        assert!(matches!(
            SparseInstance::from_rows(2, vec![vec![(0, 0.5)]], ModeHint::SetSystem),
            Err(InstanceError::NotUnitCoefficient { .. })
        ));
    }

    #[test]
    fn discrepancy_balanced_pair() {
        let inst =
            SparseInstance::from_rows(3, vec![vec![(1, 1.0), (2, 1.0)]], ModeHint::SetSystem)
                .unwrap();
        let (rows, max) = inst.discrepancy(&[0.0, 1.0, -1.0]).unwrap();
        assert_eq!(rows, vec![0.0]);
        assert_eq!(max, 0.0);
    }

    #[test]
    fn discrepancy_identity() {
        let (rows, max) = identity(3).discrepancy(&[1.0, 1.0, -1.0]).unwrap();
        assert_eq!(rows, vec![1.0, 1.0, 1.0]);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn discrepancy_length_mismatch() {
        assert!(matches!(
            identity(3).discrepancy(&[1.0, 1.0]),
            Err(InstanceError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn augment_zero_coloring_gives_zero_rows() {
        let inst = fano();
        let aug = inst.augment_with_scaled_rows(&[0.0; 7], false).unwrap();
        assert_eq!(aug.m(), 14);
        for j in 7..14 {
            let (_, vals) = aug.row(j);
            assert!(vals.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn augment_all_ones_duplicates_rows_and_doubles_column_norms() {
        let inst = fano();
        let aug = inst.augment_with_scaled_rows(&[1.0; 7], false).unwrap();
        for j in 0..7 {
            assert_eq!(aug.row(j + 7), inst.row(j));
        }
        let before = inst.validate().unwrap().column_l2;
        let after = aug.validate().unwrap().column_l2;
        for (b, a) in before.iter().zip(&after) {
            assert!((a - b * 2.0f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn augment_absolute_values() {
        let inst =
            SparseInstance::from_rows(2, vec![vec![(0, 1.0), (1, -2.0)]], ModeHint::General)
                .unwrap();
        let aug = inst.augment_with_scaled_rows(&[0.5, 0.5], true).unwrap();
        let (_, vals) = aug.row(1);
        assert_eq!(vals, &[0.5, 1.0]);
    }

    #[test]
    fn augment_rejects_out_of_range_coloring() {
        assert!(matches!(
            fano().augment_with_scaled_rows(&[0.0, 0.0, 1.5, 0.0, 0.0, 0.0, 0.0], false),
            Err(InstanceError::ScaleOutOfRange { index: 2 })
        ));
    }

    #[test]
    fn reweight_identity_weights() {
        let inst = fano();
        let (out, beta) = inst.reweight_rows(&RowWeights::uniform(7)).unwrap();
        assert_eq!(out, inst);
        assert!((beta - 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn reweight_zero_weights() {
        let inst = fano();
        let (out, beta) = inst.reweight_rows(&RowWeights(vec![0.0; 7])).unwrap();
        assert_eq!(beta, 0.0);
        assert!(out.vals.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reweight_rejects_negative() {
        let mut w = vec![1.0; 7];
        w[3] = -0.5;
        assert!(matches!(
            fano().reweight_rows(&RowWeights(w)),
            Err(InstanceError::NegativeWeight { row: 3 })
        ));
    }

    #[test]
    fn class_weight_examples() {
        assert!((class_weight(1, 16.0f64) - 5.0f64.sqrt()).abs() < 1e-12);
        assert!((class_weight(3, 2.0f64) - 2.0).abs() < 1e-12);
        assert_eq!(class_weight(0, 16.0f64), 1.0);
    }

    #[test]
    fn size_class_boundaries() {
        assert_eq!(size_class(7.0f64, 8.0), 0);
        assert_eq!(size_class(8.0f64, 8.0), 1);
        assert_eq!(size_class(15.0f64, 8.0), 1);
        assert_eq!(size_class(16.0f64, 8.0), 2);
    }

    #[test]
    fn tail_class_weights_small_rows_get_one() {
        let inst = fano();
        let profile = inst.validate().unwrap();
        // t = 3, all rows have size 3 >= t: class 1, weight sqrt(1 + log2 3).
        let w = tail_class_weights(&profile);
        let expect = (1.0 + 3.0f64.log2()).sqrt();
        assert!(w.0.iter().all(|&v| (v - expect).abs() < 1e-12));
    }
}
