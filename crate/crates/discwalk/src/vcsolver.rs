//! Vector-coloring feasibility solver.
//!
//! Given sparse constraint rows `C_j` and a bound `lambda^2`, find unit
//! vectors `v_i` on the alive coordinates (zero vectors on frozen ones) with
//! `||sum_i c_ji v_i||^2 <= bound` for every row. The solver works on a
//! low-rank factor: it minimizes the hinge-squared infeasibility
//! `Phi(V) = sum_j max(0, ||C_j V||^2 - bound)^2` over the product of unit
//! spheres by tangent-projected gradient descent with backtracking line
//! search and exact renormalization after every step. When the descent
//! stagnates above tolerance the rank is doubled (up to `rank_max`) and the
//! factor re-jittered; a final cold restart is attempted before giving up.
//!
//! [`check`] re-evaluates an assignment against the constraints from
//! scratch, sharing no state with the solver, and is what the walk uses to
//! certify every per-step solution.

use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::instance::SparseInstance;
use crate::rng::{self, Domain};
use crate::scalar::Scalar;

/// Sparse constraint rows with a common norm bound.
#[derive(Debug, Clone)]
pub struct ConstraintSet<S> {
    n: usize,
    indptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<S>,
    pub bound: S,
}

impl<S: Scalar> ConstraintSet<S> {
    pub fn new(n: usize, rows: Vec<Vec<(u32, S)>>, bound: S) -> Self {
        let mut indptr = vec![0usize];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (c, a) in row {
                assert!((c as usize) < n, "constraint column out of range");
                assert!(a.is_finite(), "constraint coefficient must be finite");
                cols.push(c);
                vals.push(a);
            }
            indptr.push(cols.len());
        }
        ConstraintSet { n, indptr, cols, vals, bound }
    }

    /// All rows of an instance as constraints under one bound.
    pub fn from_instance(inst: &SparseInstance<S>, bound: S) -> Self {
        let rows = inst
            .rows()
            .map(|(cols, vals)| cols.iter().copied().zip(vals.iter().copied()).collect())
            .collect();
        ConstraintSet::new(inst.n(), rows, bound)
    }

    pub(crate) fn from_csr(
        n: usize,
        indptr: Vec<usize>,
        cols: Vec<u32>,
        vals: Vec<S>,
        bound: S,
    ) -> Self {
        debug_assert_eq!(*indptr.first().unwrap_or(&1), 0);
        debug_assert_eq!(*indptr.last().unwrap_or(&usize::MAX), cols.len());
        ConstraintSet { n, indptr, cols, vals, bound }
    }

    /// Hand the storage back so a caller rebuilding constraints every step
    /// can reuse the buffers.
    pub(crate) fn into_parts(self) -> (Vec<usize>, Vec<u32>, Vec<S>) {
        (self.indptr, self.cols, self.vals)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn row(&self, j: usize) -> (&[u32], &[S]) {
        let lo = self.indptr[j];
        let hi = self.indptr[j + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }
}

/// The low-rank factor: one `rank`-dimensional vector per element, unit for
/// alive elements, exactly zero for frozen ones.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorAssignment<S> {
    n: usize,
    rank: usize,
    v: Vec<S>,
    alive: Vec<bool>,
}

impl<S: Scalar> VectorAssignment<S> {
    pub fn zero(n: usize, rank: usize) -> Self {
        VectorAssignment { n, rank, v: vec![S::zero(); n * rank], alive: vec![false; n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    pub fn vector(&self, i: usize) -> &[S] {
        &self.v[i * self.rank..(i + 1) * self.rank]
    }

    /// `<r, v_i>` for a sign vector over the factor dimension.
    pub fn sign_projection(&self, i: usize, signs: &[i8]) -> S {
        debug_assert_eq!(signs.len(), self.rank);
        let mut acc = S::zero();
        for (d, &s) in signs.iter().enumerate() {
            let coord = self.v[i * self.rank + d];
            acc = if s > 0 { acc + coord } else { acc - coord };
        }
        acc
    }

    /// Build from explicit per-element vectors (testing hook).
    pub fn from_vectors(vectors: Vec<Vec<S>>, alive: Vec<bool>) -> Self {
        let n = vectors.len();
        assert_eq!(alive.len(), n);
        let rank = vectors.first().map_or(1, Vec::len);
        let mut v = Vec::with_capacity(n * rank);
        for vec_i in &vectors {
            assert_eq!(vec_i.len(), rank);
            v.extend_from_slice(vec_i);
        }
        VectorAssignment { n, rank, v, alive }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    pub iterations: u64,
    pub rank: usize,
    pub max_rel_violation: f64,
    pub warm_start: bool,
    pub rank_escalations: u32,
    pub cold_restarts: u32,
    #[serde(skip)]
    pub wall: Duration,
}

#[derive(Debug)]
pub enum SolveError<S> {
    /// Descent stagnated above tolerance at the rank cap. Carries the best
    /// assignment found so the caller can inspect the violations.
    RankExhausted { best: VectorAssignment<S>, diagnostics: SolveDiagnostics },
    IterationBudgetExceeded { best: VectorAssignment<S>, diagnostics: SolveDiagnostics },
}

impl<S> SolveError<S> {
    pub fn diagnostics(&self) -> &SolveDiagnostics {
        match self {
            SolveError::RankExhausted { diagnostics, .. } => diagnostics,
            SolveError::IterationBudgetExceeded { diagnostics, .. } => diagnostics,
        }
    }
}

impl<S> std::fmt::Display for SolveError<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveError::RankExhausted { diagnostics, .. } => write!(
                f,
                "solver stagnated at rank {} with relative violation {:.3e}",
                diagnostics.rank, diagnostics.max_rel_violation
            ),
            SolveError::IterationBudgetExceeded { diagnostics, .. } => write!(
                f,
                "solver exceeded its iteration budget ({} iterations, violation {:.3e})",
                diagnostics.iterations, diagnostics.max_rel_violation
            ),
        }
    }
}

impl<S: std::fmt::Debug> std::error::Error for SolveError<S> {}

/// Solver tolerances and budgets.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverConfig<S> {
    /// Initial factor rank.
    pub rank0: usize,
    /// Cap for rank escalation; `None` resolves to
    /// `min(n, ceil(sqrt(2 * m)) + 4)`, floored at `rank0`.
    pub rank_max: Option<usize>,
    /// Relative feasibility tolerance on `||C_j V||^2 / bound - 1`.
    pub tol_feas: S,
    /// Absolute tolerance on `| ||v_i|| - 1 |` for alive elements.
    pub tol_unit: S,
    /// Total gradient-iteration budget per solve call.
    pub max_iters: u64,
}

impl<S: Scalar> Default for SolverConfig<S> {
    fn default() -> Self {
        SolverConfig {
            rank0: 16,
            rank_max: None,
            tol_feas: S::of(1e-3),
            tol_unit: S::of(1e-6),
            max_iters: 50_000,
        }
    }
}

impl<S: Scalar> SolverConfig<S> {
    pub fn resolved_rank_max(&self, n: usize, m: usize) -> usize {
        match self.rank_max {
            Some(r) => r.max(2),
            None => {
                let bm = ((2.0 * m as f64).sqrt().ceil() as usize) + 4;
                bm.min(n.max(2)).max(self.rank0.max(2))
            }
        }
    }
}

/// One violation record from [`check`].
#[derive(Debug, Clone, Serialize)]
pub struct RowViolation<S> {
    pub row: usize,
    pub sq_norm: S,
    pub rel_excess: S,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport<S> {
    pub row_violations: Vec<RowViolation<S>>,
    /// Alive elements whose norm strays from 1 by more than `tol_unit`.
    pub unit_violations: Vec<(usize, S)>,
    /// Frozen elements with a non-zero vector.
    pub frozen_violations: Vec<usize>,
    /// Max over rows of `max(0, ||C_j V||^2 - bound) / bound`, violating
    /// or not.
    pub max_rel_violation: S,
}

impl<S: Scalar> CheckReport<S> {
    pub fn is_clean(&self) -> bool {
        self.row_violations.is_empty()
            && self.unit_violations.is_empty()
            && self.frozen_violations.is_empty()
    }
}

/// Exact recomputation of every constraint norm and every vector norm.
/// Shares nothing with the solver path.
pub fn check<S: Scalar>(
    va: &VectorAssignment<S>,
    cs: &ConstraintSet<S>,
    tol_feas: S,
    tol_unit: S,
) -> CheckReport<S> {
    assert_eq!(va.n, cs.n, "assignment and constraints disagree on n");
    let rank = va.rank;
    let mut row_violations = Vec::new();
    let mut max_rel = S::zero();
    let mut u = vec![S::zero(); rank];
    let floor = S::of(1e-30);
    for j in 0..cs.m() {
        let (cols, vals) = cs.row(j);
        for d in u.iter_mut() {
            *d = S::zero();
        }
        for (&c, &a) in cols.iter().zip(vals) {
            let vi = va.vector(c as usize);
            for d in 0..rank {
                u[d] = u[d] + a * vi[d];
            }
        }
        let sq: S = u.iter().map(|&d| d * d).sum();
        let rel = (sq - cs.bound) / cs.bound.max(floor);
        if rel > max_rel {
            max_rel = rel;
        }
        if rel > tol_feas {
            row_violations.push(RowViolation { row: j, sq_norm: sq, rel_excess: rel });
        }
    }
    let mut unit_violations = Vec::new();
    let mut frozen_violations = Vec::new();
    for i in 0..va.n {
        let norm: S = va.vector(i).iter().map(|&d| d * d).sum::<S>().sqrt();
        if va.alive[i] {
            if (norm - S::one()).abs() > tol_unit {
                unit_violations.push((i, norm));
            }
        } else if norm != S::zero() {
            frozen_violations.push(i);
        }
    }
    CheckReport { row_violations, unit_violations, frozen_violations, max_rel_violation: max_rel.max(S::zero()) }
}

/// Find a feasible assignment for `cs` on the alive coordinates.
pub fn solve<S: Scalar>(
    cs: &ConstraintSet<S>,
    alive: &[bool],
    cfg: &SolverConfig<S>,
    warm: Option<&VectorAssignment<S>>,
    seed: u64,
) -> Result<(VectorAssignment<S>, SolveDiagnostics), SolveError<S>> {
    assert_eq!(alive.len(), cs.n, "alive mask length mismatch");
    let start = Instant::now();
    let mut rng = rng::stream(seed, Domain::SolverInit, 0);

    // Compact to the alive coordinates; frozen columns are deleted from the
    // rows, empty rows drop out entirely.
    let n_alive = alive.iter().filter(|&&a| a).count();
    let mut compact_of = vec![u32::MAX; cs.n];
    let mut full_of = Vec::with_capacity(n_alive);
    for (i, &a) in alive.iter().enumerate() {
        if a {
            compact_of[i] = full_of.len() as u32;
            full_of.push(i as u32);
        }
    }
    let mut rows: Vec<(u32, u32)> = Vec::new(); // (start, len) into entry arrays
    let mut entry_cols: Vec<u32> = Vec::new();
    let mut entry_vals: Vec<S> = Vec::new();
    for j in 0..cs.m() {
        let (cols, vals) = cs.row(j);
        let start_idx = entry_cols.len();
        for (&c, &a) in cols.iter().zip(vals) {
            if alive[c as usize] && a != S::zero() {
                entry_cols.push(compact_of[c as usize]);
                entry_vals.push(a);
            }
        }
        if entry_cols.len() > start_idx {
            rows.push((start_idx as u32, (entry_cols.len() - start_idx) as u32));
        }
    }
    let mc = rows.len();

    let rank_max = cfg.resolved_rank_max(cs.n.max(2), cs.m().max(1));
    let mut rank = match warm {
        Some(w) => w.rank.max(2),
        None => cfg.rank0.clamp(2, rank_max.max(cfg.rank0.min(2))),
    };
    let mut diagnostics = SolveDiagnostics {
        iterations: 0,
        rank,
        max_rel_violation: 0.0,
        warm_start: warm.is_some(),
        rank_escalations: 0,
        cold_restarts: 0,
        wall: Duration::ZERO,
    };

    // Trivial cases: nothing alive, or nothing constrained at all.
    if n_alive == 0 {
        diagnostics.wall = start.elapsed();
        return Ok((VectorAssignment::zero(cs.n, rank), diagnostics));
    }

    let mut v = init_factor(n_alive, rank, warm, &full_of, &mut rng);
    let mut problem = Workspace::new(mc, rank);

    let tol = cfg.tol_feas;
    let polish = tol * S::of(0.2);
    let mut cold_restarted = false;

    loop {
        let outcome = descend(
            &mut v,
            n_alive,
            rank,
            &rows,
            &entry_cols,
            &entry_vals,
            cs.bound,
            polish,
            tol,
            cfg.max_iters,
            &mut diagnostics.iterations,
            &mut problem,
        );
        match outcome {
            Descent::Feasible { max_rel } => {
                diagnostics.rank = rank;
                diagnostics.max_rel_violation = max_rel.as_f64();
                diagnostics.wall = start.elapsed();
                let out = scatter(cs.n, rank, &v, &full_of, alive);
                return Ok((out, diagnostics));
            }
            Descent::Budget { max_rel } => {
                diagnostics.rank = rank;
                diagnostics.max_rel_violation = max_rel.as_f64();
                diagnostics.wall = start.elapsed();
                let best = scatter(cs.n, rank, &v, &full_of, alive);
                return Err(SolveError::IterationBudgetExceeded { best, diagnostics });
            }
            Descent::Stagnant { max_rel } => {
                if rank < rank_max {
                    let new_rank = (rank * 2).min(rank_max);
                    v = escalate(&v, n_alive, rank, new_rank, &mut rng);
                    rank = new_rank;
                    problem = Workspace::new(mc, rank);
                    diagnostics.rank_escalations += 1;
                } else if !cold_restarted {
                    cold_restarted = true;
                    diagnostics.cold_restarts += 1;
                    v = init_factor(n_alive, rank, None, &full_of, &mut rng);
                } else {
                    diagnostics.rank = rank;
                    diagnostics.max_rel_violation = max_rel.as_f64();
                    diagnostics.wall = start.elapsed();
                    let best = scatter(cs.n, rank, &v, &full_of, alive);
                    return Err(SolveError::RankExhausted { best, diagnostics });
                }
            }
        }
    }
}

struct Workspace<S> {
    u: Vec<S>,
    hinge: Vec<S>,
    grad: Vec<S>,
    trial: Vec<S>,
}

impl<S: Scalar> Workspace<S> {
    fn new(mc: usize, rank: usize) -> Self {
        Workspace {
            u: vec![S::zero(); mc * rank],
            hinge: vec![S::zero(); mc],
            grad: Vec::new(),
            trial: Vec::new(),
        }
    }
}

enum Descent<S> {
    Feasible { max_rel: S },
    Stagnant { max_rel: S },
    Budget { max_rel: S },
}

#[allow(clippy::too_many_arguments)]
fn descend<S: Scalar>(
    v: &mut Vec<S>,
    n_alive: usize,
    rank: usize,
    rows: &[(u32, u32)],
    entry_cols: &[u32],
    entry_vals: &[S],
    bound: S,
    polish: S,
    tol: S,
    max_iters: u64,
    iterations: &mut u64,
    ws: &mut Workspace<S>,
) -> Descent<S> {
    let armijo = S::of(1e-4);
    let eta_min = S::of(1e-14);
    let mut eta = S::of(0.05);

    let (mut phi, mut max_rel) = eval_phi(v, rank, rows, entry_cols, entry_vals, bound, ws);
    let mut last_improvement_at = *iterations;
    let mut phi_at_last_improvement = phi;

    loop {
        if max_rel <= polish {
            return Descent::Feasible { max_rel };
        }
        if *iterations >= max_iters {
            return Descent::Budget { max_rel };
        }
        // Stagnation: no meaningful decrease in a while.
        if *iterations - last_improvement_at > 60 {
            if max_rel <= tol {
                return Descent::Feasible { max_rel };
            }
            return Descent::Stagnant { max_rel };
        }
        *iterations += 1;

        // Euclidean gradient of Phi, accumulated row by row.
        ws.grad.clear();
        ws.grad.resize(n_alive * rank, S::zero());
        for (j, &(start, len)) in rows.iter().enumerate() {
            let h = ws.hinge[j];
            if h <= S::zero() {
                continue;
            }
            let scale = S::of(4.0) * h;
            let uj = &ws.u[j * rank..(j + 1) * rank];
            let lo = start as usize;
            let hi = lo + len as usize;
            for k in lo..hi {
                let c = entry_cols[k] as usize;
                let coeff = scale * entry_vals[k];
                let g = &mut ws.grad[c * rank..(c + 1) * rank];
                for d in 0..rank {
                    g[d] = g[d] + coeff * uj[d];
                }
            }
        }
        // Project onto the tangent spaces of the unit spheres.
        let mut grad_sq = S::zero();
        for i in 0..n_alive {
            let vi = &v[i * rank..(i + 1) * rank];
            let g = &mut ws.grad[i * rank..(i + 1) * rank];
            let mut dot = S::zero();
            for d in 0..rank {
                dot = dot + g[d] * vi[d];
            }
            for d in 0..rank {
                g[d] = g[d] - dot * vi[d];
                grad_sq = grad_sq + g[d] * g[d];
            }
        }
        if grad_sq <= S::of(1e-28) {
            // First-order stationary but infeasible: spurious critical point.
            if max_rel <= tol {
                return Descent::Feasible { max_rel };
            }
            return Descent::Stagnant { max_rel };
        }

        // Backtracking line search on the retracted step.
        let mut accepted = false;
        let mut trial = std::mem::take(&mut ws.trial);
        while eta >= eta_min {
            trial.clear();
            trial.extend_from_slice(v);
            let mut degenerate = false;
            for i in 0..n_alive {
                let g = &ws.grad[i * rank..(i + 1) * rank];
                let tv = &mut trial[i * rank..(i + 1) * rank];
                let mut norm_sq = S::zero();
                for d in 0..rank {
                    tv[d] = tv[d] - eta * g[d];
                    norm_sq = norm_sq + tv[d] * tv[d];
                }
                let norm = norm_sq.sqrt();
                if norm < S::of(1e-12) {
                    degenerate = true;
                    break;
                }
                for d in 0..rank {
                    tv[d] = tv[d] / norm;
                }
            }
            if !degenerate {
                let (phi_trial, rel_trial) =
                    eval_phi(&trial, rank, rows, entry_cols, entry_vals, bound, ws);
                if phi_trial <= phi - armijo * eta * grad_sq {
                    std::mem::swap(v, &mut trial);
                    phi = phi_trial;
                    max_rel = rel_trial;
                    accepted = true;
                    eta = (eta * S::of(1.5)).min(S::of(1.0));
                    break;
                }
            }
            eta = eta * S::of(0.5);
        }
        ws.trial = trial;
        if !accepted {
            if max_rel <= tol {
                return Descent::Feasible { max_rel };
            }
            return Descent::Stagnant { max_rel };
        }
        if phi < phi_at_last_improvement * S::of(0.9999) || phi == S::zero() {
            phi_at_last_improvement = phi;
            last_improvement_at = *iterations;
        }
    }
}

/// Phi and the max relative violation; fills `ws.u` and `ws.hinge`.
fn eval_phi<S: Scalar>(
    v: &[S],
    rank: usize,
    rows: &[(u32, u32)],
    entry_cols: &[u32],
    entry_vals: &[S],
    bound: S,
    ws: &mut Workspace<S>,
) -> (S, S) {
    let floor = S::of(1e-30);
    let mut phi = S::zero();
    let mut max_rel = S::zero();
    // `eval_phi` may be called on a trial vector while `ws.u` holds the
    // current one, so recompute into fresh slots.
    let mut u_all = std::mem::take(&mut ws.u);
    for (j, &(start, len)) in rows.iter().enumerate() {
        let uj = &mut u_all[j * rank..(j + 1) * rank];
        for d in uj.iter_mut() {
            *d = S::zero();
        }
        let lo = start as usize;
        let hi = lo + len as usize;
        for k in lo..hi {
            let c = entry_cols[k] as usize;
            let a = entry_vals[k];
            let vi = &v[c * rank..(c + 1) * rank];
            for d in 0..rank {
                uj[d] = uj[d] + a * vi[d];
            }
        }
        let sq: S = uj.iter().map(|&d| d * d).sum();
        let excess = sq - bound;
        let h = excess.max(S::zero());
        ws.hinge[j] = h;
        phi = phi + h * h;
        let rel = excess / bound.max(floor);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    ws.u = u_all;
    (phi, max_rel)
}

fn init_factor<S: Scalar>(
    n_alive: usize,
    rank: usize,
    warm: Option<&VectorAssignment<S>>,
    full_of: &[u32],
    rng: &mut ChaCha8Rng,
) -> Vec<S> {
    let mut v = vec![S::zero(); n_alive * rank];
    for i in 0..n_alive {
        let vi = &mut v[i * rank..(i + 1) * rank];
        let mut have = false;
        if let Some(w) = warm {
            let src = w.vector(full_of[i] as usize);
            let take = src.len().min(rank);
            vi[..take].copy_from_slice(&src[..take]);
            let norm: S = vi.iter().map(|&d| d * d).sum::<S>().sqrt();
            if norm > S::of(1e-9) {
                // Keep bit-exact unit vectors untouched so a feasible warm
                // start round-trips identically.
                if (norm - S::one()).abs() > S::of(1e-12) {
                    for d in vi.iter_mut() {
                        *d = *d / norm;
                    }
                }
                have = true;
            }
        }
        if !have {
            random_unit(vi, rng);
        }
    }
    v
}

fn random_unit<S: Scalar>(out: &mut [S], rng: &mut ChaCha8Rng) {
    loop {
        let mut norm_sq = S::zero();
        for d in out.iter_mut() {
            *d = S::of(rng::gaussian(rng));
            norm_sq = norm_sq + *d * *d;
        }
        let norm = norm_sq.sqrt();
        if norm > S::of(1e-9) {
            for d in out.iter_mut() {
                *d = *d / norm;
            }
            return;
        }
    }
}

/// Widen the factor and jitter it off the stationary point. A plain zero
/// padding would keep the gradient inside the old subspace.
fn escalate<S: Scalar>(
    v: &[S],
    n_alive: usize,
    old_rank: usize,
    new_rank: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<S> {
    let sigma = S::of(0.05);
    let mut out = vec![S::zero(); n_alive * new_rank];
    for i in 0..n_alive {
        let src = &v[i * old_rank..(i + 1) * old_rank];
        let dst = &mut out[i * new_rank..(i + 1) * new_rank];
        dst[..old_rank].copy_from_slice(src);
        let mut norm_sq = S::zero();
        for d in dst.iter_mut() {
            *d = *d + sigma * S::of(rng::gaussian(rng));
            norm_sq = norm_sq + *d * *d;
        }
        let norm = norm_sq.sqrt();
        if norm > S::of(1e-9) {
            for d in dst.iter_mut() {
                *d = *d / norm;
            }
        } else {
            random_unit(dst, rng);
        }
    }
    out
}

fn scatter<S: Scalar>(
    n: usize,
    rank: usize,
    v: &[S],
    full_of: &[u32],
    alive: &[bool],
) -> VectorAssignment<S> {
    let mut out = VectorAssignment::zero(n, rank);
    out.alive.copy_from_slice(alive);
    for (ci, &fi) in full_of.iter().enumerate() {
        let dst = fi as usize * rank;
        out.v[dst..dst + rank].copy_from_slice(&v[ci * rank..(ci + 1) * rank]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Family};

    fn cfg() -> SolverConfig<f64> {
        SolverConfig::default()
    }

    #[test]
    fn single_element_single_row_is_immediate() {
        let cs = ConstraintSet::new(1, vec![vec![(0, 1.0)]], 2.0);
        let (va, diag) = solve(&cs, &[true], &cfg(), None, 1).unwrap();
        assert_eq!(diag.iterations, 0);
        let norm: f64 = va.vector(0).iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(check(&va, &cs, 1e-3, 1e-6).is_clean());
    }

    #[test]
    fn all_frozen_returns_zero_assignment() {
        let cs = ConstraintSet::new(3, vec![vec![(0, 1.0), (1, 1.0), (2, 1.0)]], 2.0);
        let (va, diag) = solve(&cs, &[false, false, false], &cfg(), None, 1).unwrap();
        assert_eq!(diag.iterations, 0);
        for i in 0..3 {
            assert!(va.vector(i).iter().all(|&d| d == 0.0));
        }
        assert!(check(&va, &cs, 1e-3, 1e-6).is_clean());
    }

    #[test]
    fn komlos_instance_feasible_at_eleven_tenths() {
        let inst = generate::<f64>(&Family::KomlosRandom { n: 64, m: 64 }, 42).unwrap();
        let cs = ConstraintSet::from_instance(&inst, 1.1f64.powi(2));
        let alive = vec![true; 64];
        let (va, diag) = solve(&cs, &alive, &cfg(), None, 7).unwrap();
        assert!(diag.max_rel_violation <= 1e-3);
        assert!(check(&va, &cs, 1e-3, 1e-6).is_clean());
    }

    #[test]
    fn check_flags_scaled_row() {
        let cs = ConstraintSet::new(2, vec![vec![(0, 1.0), (1, 1.0)]], 4.0);
        let mut vectors = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        vectors[0] = vec![2.0, 0.0];
        let va = VectorAssignment::from_vectors(vectors, vec![true, true]);
        let report = check(&va, &cs, 1e-3, 1e-6);
        assert_eq!(report.unit_violations.len(), 1);
        assert_eq!(report.unit_violations[0].0, 0);
    }

    #[test]
    fn check_flags_zero_assignment_with_alive_mask() {
        let cs = ConstraintSet::new(3, vec![vec![(0, 1.0)]], 4.0);
        let va = VectorAssignment::from_vectors(vec![vec![0.0; 4]; 3], vec![true; 3]);
        let report = check(&va, &cs, 1e-3, 1e-6);
        assert_eq!(report.unit_violations.len(), 3);
    }

    #[test]
    fn solve_is_deterministic() {
        let inst = generate::<f64>(&Family::RandomTSparse { n: 24, m: 24, t: 3 }, 5).unwrap();
        let x: Vec<f64> = (0..24).map(|i| 0.02 * i as f64 - 0.2).collect();
        let aug = inst.augment_with_scaled_rows(&x, false).unwrap();
        let cs = ConstraintSet::from_instance(&aug, 6.0);
        let alive = vec![true; 24];
        let (va1, _) = solve(&cs, &alive, &cfg(), None, 11).unwrap();
        let (va2, _) = solve(&cs, &alive, &cfg(), None, 11).unwrap();
        assert_eq!(va1, va2);
    }

    #[test]
    fn warm_start_reuses_feasible_assignment() {
        let inst = generate::<f64>(&Family::KomlosRandom { n: 32, m: 32 }, 2).unwrap();
        let cs = ConstraintSet::from_instance(&inst, 1.21);
        let alive = vec![true; 32];
        let (va, _) = solve(&cs, &alive, &cfg(), None, 3).unwrap();
        let (va2, diag) = solve(&cs, &alive, &cfg(), Some(&va), 3).unwrap();
        assert_eq!(diag.iterations, 0);
        assert!(diag.warm_start);
        assert_eq!(va, va2);
    }

    #[test]
    fn feasibility_across_families_with_margin() {
        // Unit-norm columns and a (1+eps)^2 bound must always be solvable.
        for seed in 0..20 {
            let inst = generate::<f64>(&Family::KomlosRandom { n: 20, m: 28 }, seed).unwrap();
            let cs = ConstraintSet::from_instance(&inst, 1.21);
            let alive: Vec<bool> = (0..20).map(|i| i % 5 != 0 || seed % 2 == 0).collect();
            let (va, _) = solve(&cs, &alive, &cfg(), None, seed).unwrap();
            assert!(check(&va, &cs, 1e-3, 1e-6).is_clean(), "seed {seed}");
        }
    }
}
