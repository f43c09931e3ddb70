//! Ground truth at small scale: exact minimum discrepancy by enumeration,
//! plus a random-coloring baseline for context.

use serde::Serialize;

use crate::instance::SparseInstance;
use crate::rng::{self, Domain};
use crate::scalar::Scalar;

pub const DEFAULT_N_MAX: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    TooLarge { n: usize, n_max: usize },
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::TooLarge { n, n_max } => {
                write!(f, "instance has n = {n} elements, enumeration capped at n_max = {n_max}")
            }
        }
    }
}

impl std::error::Error for OracleError {}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult<S> {
    /// Exact minimum over all two-colorings of the max row discrepancy.
    pub optimal: S,
    /// A coloring achieving `optimal`. Ties break toward the witness whose
    /// `-1` positions form the lexicographically least bit pattern, with
    /// element 0 pinned to +1 (a global sign flip never changes the value).
    pub witness: Vec<i8>,
    /// Number of sign patterns enumerated (`2^(n-1)`).
    pub enumerated: u64,
}

/// Exact minimum discrepancy over all `2^(n-1)` essentially-distinct sign
/// patterns, walking colorings in Gray-code order with incremental row-sum
/// updates.
pub fn brute_force<S: Scalar>(
    inst: &SparseInstance<S>,
    n_max: usize,
) -> Result<OracleResult<S>, OracleError> {
    let n = inst.n();
    if n > n_max {
        return Err(OracleError::TooLarge { n, n_max });
    }
    if n == 0 {
        return Ok(OracleResult { optimal: S::zero(), witness: Vec::new(), enumerated: 1 });
    }

    // Columns of the matrix, for O(column) flip updates.
    let m = inst.m();
    let mut col_rows: Vec<Vec<(u32, S)>> = vec![Vec::new(); n];
    for j in 0..m {
        let (cols, vals) = inst.row(j);
        for (&c, &a) in cols.iter().zip(vals) {
            col_rows[c as usize].push((j as u32, a));
        }
    }

    // Start from the all +1 coloring.
    let mut sums: Vec<S> = (0..m).map(|j| inst.row(j).1.iter().copied().sum()).collect();
    let max_abs = |sums: &[S]| sums.iter().fold(S::zero(), |acc, &v| acc.max(v.abs()));

    let mut signs = vec![1i8; n];
    let mut best = max_abs(&sums);
    let mut best_mask: u64 = 0;
    let mut mask: u64 = 0;

    let total: u64 = 1u64 << (n - 1);
    for counter in 1..total {
        // Gray code over elements 1..n; element 0 stays +1.
        let bit = counter.trailing_zeros() as usize;
        let elem = bit + 1;
        let flipped = -signs[elem];
        signs[elem] = flipped;
        mask ^= 1u64 << elem;
        let delta = S::of(2.0 * flipped as f64);
        for &(j, a) in &col_rows[elem] {
            sums[j as usize] = sums[j as usize] + delta * a;
        }
        let val = max_abs(&sums);
        if val < best || (val == best && mask < best_mask) {
            best = val;
            best_mask = mask;
        }
    }

    let witness = (0..n).map(|i| if best_mask >> i & 1 == 1 { -1 } else { 1 }).collect();
    Ok(OracleResult { optimal: best, witness, enumerated: total })
}

/// Independent re-evaluation used to cross-check the Gray-code enumeration:
/// every one of the `2^n` sign patterns, each row sum recomputed from
/// scratch. Only sensible for very small `n`.
pub fn brute_force_reference<S: Scalar>(inst: &SparseInstance<S>) -> S {
    let n = inst.n();
    assert!(n <= 20, "reference enumeration is for small n only");
    let mut best: Option<S> = None;
    for mask in 0u64..(1u64 << n) {
        let x: Vec<S> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { -S::one() } else { S::one() })
            .collect();
        let (_, max) = inst.discrepancy(&x).expect("coloring length matches");
        best = Some(match best {
            None => max,
            Some(b) => b.min(max),
        });
    }
    best.unwrap_or(S::zero())
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineSummary<S> {
    pub trials: u64,
    pub min: S,
    pub median: S,
    pub mean: S,
    pub max: S,
}

/// Max-row-discrepancy distribution of seeded uniform random colorings.
pub fn random_baseline<S: Scalar>(
    inst: &SparseInstance<S>,
    trials: u64,
    seed: u64,
) -> BaselineSummary<S> {
    assert!(trials >= 1, "need at least one trial");
    let mut maxima: Vec<S> = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut rng = rng::stream(seed, Domain::Baseline, trial);
        let x: Vec<S> = (0..inst.n()).map(|_| S::of(rng::sign(&mut rng) as f64)).collect();
        let (_, max) = inst.discrepancy(&x).expect("coloring length matches");
        maxima.push(max);
    }
    maxima.sort_by(|a, b| a.partial_cmp(b).expect("finite discrepancies"));
    let sum: S = maxima.iter().copied().sum();
    BaselineSummary {
        trials,
        min: maxima[0],
        median: maxima[maxima.len() / 2],
        mean: sum / S::of(trials as f64),
        max: *maxima.last().expect("non-empty"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Family, ModeHint};

    fn single_row(elems: &[u32], n: usize) -> SparseInstance<f64> {
        SparseInstance::from_rows(
            n,
            vec![elems.iter().map(|&i| (i, 1.0)).collect()],
            ModeHint::SetSystem,
        )
        .unwrap()
    }

    #[test]
    fn balanced_pair_has_zero_discrepancy() {
        let res = brute_force(&single_row(&[0, 1], 2), DEFAULT_N_MAX).unwrap();
        assert_eq!(res.optimal, 0.0);
        assert_eq!(res.enumerated, 2);
        let (_, max) = single_row(&[0, 1], 2)
            .discrepancy(&res.witness.iter().map(|&s| s as f64).collect::<Vec<_>>())
            .unwrap();
        assert_eq!(max, 0.0);
    }

    #[test]
    fn odd_set_has_discrepancy_one() {
        let res = brute_force(&single_row(&[0, 1, 2], 3), DEFAULT_N_MAX).unwrap();
        assert_eq!(res.optimal, 1.0);
    }

    #[test]
    fn rejects_oversized_instances() {
        let inst = generate::<f64>(&Family::Identity { n: 5 }, 0).unwrap();
        assert!(matches!(
            brute_force(&inst, 4),
            Err(OracleError::TooLarge { n: 5, n_max: 4 })
        ));
    }

    #[test]
    fn witness_achieves_optimum_and_ties_break_low() {
        let inst = generate::<f64>(&Family::Identity { n: 3 }, 0).unwrap();
        let res = brute_force(&inst, DEFAULT_N_MAX).unwrap();
        assert_eq!(res.optimal, 1.0);
        // Every coloring of the identity achieves 1; the all +1 pattern is
        // the lexicographically least witness.
        assert_eq!(res.witness, vec![1, 1, 1]);
    }

    #[test]
    fn gray_matches_reference_on_random_instances() {
        for seed in 0..8 {
            let inst = generate::<f64>(&Family::RandomTSparse { n: 9, m: 7, t: 3 }, seed).unwrap();
            let gray = brute_force(&inst, DEFAULT_N_MAX).unwrap().optimal;
            let naive = brute_force_reference(&inst);
            assert_eq!(gray, naive, "seed {seed}");
        }
    }

    #[test]
    fn baseline_identity_is_always_one() {
        let inst = generate::<f64>(&Family::Identity { n: 6 }, 0).unwrap();
        let summary = random_baseline(&inst, 50, 3);
        assert_eq!(summary.min, 1.0);
        assert_eq!(summary.max, 1.0);
    }

    #[test]
    fn baseline_zero_rows_is_zero() {
        let inst = SparseInstance::<f64>::from_rows(4, vec![], ModeHint::General).unwrap();
        let summary = random_baseline(&inst, 20, 1);
        assert_eq!(summary.max, 0.0);
    }

    #[test]
    fn baseline_single_large_row_scales_like_sqrt_s() {
        let s = 400;
        let inst = single_row(&(0..s as u32).collect::<Vec<_>>(), s);
        let summary = random_baseline(&inst, 1000, 7);
        let sqrt_s = (s as f64).sqrt();
        assert!(summary.median >= 0.4 * sqrt_s, "median {} too small", summary.median);
        assert!(summary.median <= 2.5 * sqrt_s, "median {} too large", summary.median);
    }
}
