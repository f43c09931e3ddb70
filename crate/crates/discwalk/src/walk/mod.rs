//! The phase-structured coloring walk.
//!
//! Starting from the all-zero fractional coloring, each step solves the
//! vector-coloring SDP on the alive elements (row constraints plus the
//! x-scaled energy constraints, both under the `2t` bound), draws a fresh
//! random sign vector `r`, and moves every alive coordinate by
//! `gamma * <r, v_i>`. Coordinates reaching the freeze band are fixed and
//! leave all subsequent SDPs. After the step budget (or once everything is
//! frozen) the fractional coloring is rounded to thresholded signs, with
//! seeded coins for any coordinate still alive.

mod report;
mod runner;

pub use report::{
    report_json, report_rows_csv, InstanceMeta, InstanceSourceEcho, InvariantTallies, PhaseRow,
    ResolvedConfig, RowReport, RunReport, SolverSummary, Tally, WorkStats,
};
pub use runner::{run, run_with_source};

use serde::{Deserialize, Serialize};

use crate::instance::{InstanceError, RowWeights, SparseInstance};
use crate::rng::{self, Domain};
use crate::scalar::{log2_usize, Scalar};
use crate::vcsolver::{SolveError, SolverConfig, VectorAssignment};

/// Which energy form the walk runs under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum WalkMode<S> {
    /// 0-1 set systems; bound `2t` with `t` the max column count.
    BeckFiala,
    /// Real matrices with unit-or-smaller column norms; bound 2, absolute
    /// values in the energy rows and l1 alive masses.
    Komlos,
    /// Row-reweighted run: reweight first, then Komlos semantics against
    /// the bound `2 beta^2`. Reported discrepancies divide back by `w_j`.
    Weighted { weights: RowWeights<S> },
}

/// How per-row safety thresholds are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum SafetyPolicy<S> {
    /// One fixed threshold for every row.
    Threshold { lambda: S },
    /// `20 * sqrt(t * log2 n)` for every row.
    ScaledDefault,
    /// Per-size-class thresholds via [`class_safety_threshold`].
    PerSizeClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig<S> {
    /// Step scale; `None` resolves to `1 / (4 sqrt(n))`.
    pub gamma: Option<S>,
    /// Steps per phase; `None` resolves to `ceil(1 / gamma^2)`.
    pub steps_per_phase: Option<usize>,
    /// Phase budget; `None` resolves to `ceil(10 log2 n)`.
    pub max_phases: Option<usize>,
    /// Freeze band half-width; `None` resolves to `min(1/n, 1e-3)`.
    pub freeze_delta: Option<S>,
    pub safety: SafetyPolicy<S>,
    /// Drop safe rows from subsequent SDPs.
    pub drop_safe_sets: bool,
    pub mode: WalkMode<S>,
    pub solver: SolverConfig<S>,
    /// Abort on hard invariant breaches (x-range, deficit sign, SDP checks
    /// beyond 10x tolerance) instead of recording them.
    pub enforce_hard: bool,
    pub seed: u64,
}

impl<S: Scalar> WalkConfig<S> {
    pub fn new(mode: WalkMode<S>, seed: u64) -> Self {
        WalkConfig {
            gamma: None,
            steps_per_phase: None,
            max_phases: None,
            freeze_delta: None,
            safety: SafetyPolicy::ScaledDefault,
            drop_safe_sets: true,
            mode,
            solver: SolverConfig::default(),
            enforce_hard: true,
            seed,
        }
    }
}

#[derive(Debug)]
pub enum WalkError<S> {
    Precondition(String),
    Instance(InstanceError),
    Solver { step: usize, source: SolveError<S> },
    HardInvariant { step: usize, row: Option<usize>, detail: String },
}

impl<S> std::fmt::Display for WalkError<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WalkError::Precondition(msg) => write!(f, "precondition failed: {msg}"),
            WalkError::Instance(e) => write!(f, "instance error: {e}"),
            WalkError::Solver { step, source } => {
                write!(f, "SDP solve failed at step {step}: {source}")
            }
            WalkError::HardInvariant { step, row, detail } => match row {
                Some(j) => write!(f, "invariant breach at step {step}, row {j}: {detail}"),
                None => write!(f, "invariant breach at step {step}: {detail}"),
            },
        }
    }
}

impl<S: std::fmt::Debug> std::error::Error for WalkError<S> {}

impl<S> From<InstanceError> for WalkError<S> {
    fn from(e: InstanceError) -> Self {
        WalkError::Instance(e)
    }
}

/// Mutable walk state: the fractional coloring, the alive mask, and per-row
/// energy bookkeeping.
#[derive(Debug, Clone)]
pub struct WalkState<S> {
    /// Step counter.
    pub k: usize,
    /// Fractional coloring, always inside `[-1, 1]`.
    pub x: Vec<S>,
    pub alive: Vec<bool>,
    pub alive_count: usize,
    pub rows: Vec<RowState<S>>,
}

#[derive(Debug, Clone)]
pub struct RowState<S> {
    /// Energy deficit `sum_i |a_ji| (1 - x_i^2)`.
    pub deficit: S,
    /// l1 mass of the row restricted to alive elements (the element count
    /// for set systems).
    pub alive_mass: S,
    pub frozen_mass: S,
    /// Signed row sum under the current fractional coloring.
    pub disc: S,
    pub max_abs_disc: S,
    pub safe: bool,
    pub phase_safe: Option<u32>,
}

impl<S: Scalar> WalkState<S> {
    pub fn init(inst: &SparseInstance<S>) -> Self {
        let n = inst.n();
        let rows = (0..inst.m())
            .map(|j| {
                let (_, vals) = inst.row(j);
                let mass: S = vals.iter().map(|&a| a.abs()).sum();
                RowState {
                    deficit: mass,
                    alive_mass: mass,
                    frozen_mass: S::zero(),
                    disc: S::zero(),
                    max_abs_disc: S::zero(),
                    safe: false,
                    phase_safe: None,
                }
            })
            .collect();
        WalkState { k: 0, x: vec![S::zero(); n], alive: vec![true; n], alive_count: n, rows }
    }
}

/// What one step did to the coordinates.
#[derive(Debug, Default, Clone)]
pub struct StepOutcome {
    /// Elements whose update overshot `[-1, 1]` and were clamped to the
    /// boundary sign.
    pub clamped: Vec<u32>,
    /// Elements that entered the freeze band (includes the clamped ones).
    pub frozen: Vec<u32>,
}

/// Energy deficit of row `j` under the coloring `x`:
/// `sum_i |a_ji| (1 - x_i^2)`. Coincides with `sum_{i in S_j} (1 - x_i^2)`
/// on set systems and with `s_j - sum_i |a_ji| x_i^2` in general.
pub fn energy_deficit<S: Scalar>(inst: &SparseInstance<S>, x: &[S], row: usize) -> S {
    let (cols, vals) = inst.row(row);
    let mut acc = S::zero();
    for (&c, &a) in cols.iter().zip(vals) {
        let xi = x[c as usize];
        acc = acc + a.abs() * (S::one() - xi * xi);
    }
    acc
}

/// The two terms of the per-step deficit change for row `j`:
/// the linear martingale term `-2 gamma sum_i |a_ji| x_i <r, v_i>` and the
/// drift term `-gamma^2 sum_i |a_ji| <r, v_i>^2`. Their sum equals
/// `D_j(after) - D_j(before)` exactly when no coordinate was clamped this
/// step.
pub fn deficit_decomposition<S: Scalar>(
    inst: &SparseInstance<S>,
    x_before: &[S],
    va: &VectorAssignment<S>,
    signs: &[i8],
    row: usize,
    gamma: S,
) -> (S, S) {
    let (cols, vals) = inst.row(row);
    let mut linear = S::zero();
    let mut drift = S::zero();
    for (&c, &a) in cols.iter().zip(vals) {
        let i = c as usize;
        let q = va.sign_projection(i, signs);
        let w = a.abs();
        linear = linear + w * x_before[i] * q;
        drift = drift + w * q * q;
    }
    (
        S::of(-2.0) * gamma * linear,
        -gamma * gamma * drift,
    )
}

/// Advance the coloring by one step: `x_i += gamma * <r, v_i>` on alive
/// coordinates, clamping overshoots to the boundary and freezing anything
/// that lands in the band `|x| >= 1 - freeze_delta`. Deficits, masses and
/// row sums are recomputed for the new coloring.
pub fn step<S: Scalar>(
    state: &mut WalkState<S>,
    inst: &SparseInstance<S>,
    va: &VectorAssignment<S>,
    signs: &[i8],
    gamma: S,
    freeze_delta: S,
) -> StepOutcome {
    let mut outcome = StepOutcome::default();
    state.k += 1;
    let band = S::one() - freeze_delta;
    for i in 0..state.x.len() {
        if !state.alive[i] {
            continue;
        }
        let q = va.sign_projection(i, signs);
        let mut xi = state.x[i] + gamma * q;
        if xi > S::one() {
            xi = S::one();
            outcome.clamped.push(i as u32);
        } else if xi < -S::one() {
            xi = -S::one();
            outcome.clamped.push(i as u32);
        }
        state.x[i] = xi;
        if xi.abs() >= band {
            state.alive[i] = false;
            state.alive_count -= 1;
            outcome.frozen.push(i as u32);
        }
    }
    refresh_rows(state, inst);
    outcome
}

/// Recompute every row's deficit, masses and signed sum from the current
/// coloring.
pub fn refresh_rows<S: Scalar>(state: &mut WalkState<S>, inst: &SparseInstance<S>) {
    for j in 0..inst.m() {
        let (cols, vals) = inst.row(j);
        let mut deficit = S::zero();
        let mut alive_mass = S::zero();
        let mut frozen_mass = S::zero();
        let mut disc = S::zero();
        for (&c, &a) in cols.iter().zip(vals) {
            let i = c as usize;
            let xi = state.x[i];
            let w = a.abs();
            deficit = deficit + w * (S::one() - xi * xi);
            disc = disc + a * xi;
            if state.alive[i] {
                alive_mass = alive_mass + w;
            } else {
                frozen_mass = frozen_mass + w;
            }
        }
        let row = &mut state.rows[j];
        row.deficit = deficit;
        row.alive_mass = alive_mass;
        row.frozen_mass = frozen_mass;
        row.disc = disc;
        row.max_abs_disc = row.max_abs_disc.max(disc.abs());
    }
}

/// Mark rows whose alive mass has dropped to the threshold (or below) as
/// safe; returns the newly safe rows. The residual discrepancy exposure of a
/// safe row is at most its threshold.
pub fn safety_sweep<S: Scalar>(
    state: &mut WalkState<S>,
    lambdas: &[S],
    phase: u32,
) -> Vec<usize> {
    let mut newly = Vec::new();
    for (j, row) in state.rows.iter_mut().enumerate() {
        if !row.safe && row.alive_mass <= lambdas[j] {
            row.safe = true;
            row.phase_safe = Some(phase);
            newly.push(j);
        }
    }
    newly
}

/// Default safety threshold `20 sqrt(t log2 n)`.
pub fn default_safety_threshold<S: Scalar>(t: S, n: usize) -> S {
    S::of(20.0) * (t * log2_usize::<S>(n)).sqrt()
}

/// Per-class safety threshold `20 sqrt(t (log2 m_i + loglog n))`, with the
/// inner `loglog` clamped below at 1.
pub fn class_safety_threshold<S: Scalar>(t: S, m_i: usize, n: usize) -> S {
    let loglog = log2_usize::<f64>(n).max(2.0).log2().max(1.0);
    S::of(20.0) * (t * (log2_usize::<S>(m_i) + S::of(loglog))).sqrt()
}

/// Shrinkage target phase for a row of mass `s` under threshold `lambda`:
/// `ceil(1 + 3 log2(s / lambda))`, floored at 1. By that phase a row is
/// expected to hold at most `2 lambda + 2` alive mass.
pub fn shrink_target_phase<S: Scalar>(s: S, lambda: S) -> u32 {
    let lam = lambda.max(S::one());
    if s <= lam {
        return 1;
    }
    let raw = (S::one() + S::of(3.0) * (s / lam).log2()).ceil().as_f64();
    raw.max(1.0) as u32
}

/// Round the fractional coloring to signs: thresholded for coordinates in
/// the freeze band, seeded fair coins for coordinates still alive.
pub fn final_round<S: Scalar>(state: &WalkState<S>, freeze_delta: S, seed: u64) -> Vec<i8> {
    let band = S::one() - freeze_delta;
    let mut rng = rng::stream(seed, Domain::FinalRound, 0);
    state
        .x
        .iter()
        .map(|&xi| {
            if xi >= band {
                1
            } else if xi <= -band {
                -1
            } else {
                rng::sign(&mut rng)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Family, ModeHint};
    use crate::rng;

    fn pair_instance() -> SparseInstance<f64> {
        SparseInstance::from_rows(
            2,
            vec![vec![(0, 1.0), (1, 1.0)]],
            ModeHint::SetSystem,
        )
        .unwrap()
    }

    fn basis_assignment(n: usize, alive: Vec<bool>) -> VectorAssignment<f64> {
        let vectors = (0..n)
            .map(|i| {
                let mut v = vec![0.0; n];
                if alive[i] {
                    v[i] = 1.0;
                }
                v
            })
            .collect();
        VectorAssignment::from_vectors(vectors, alive)
    }

    #[test]
    fn energy_deficit_examples() {
        let inst = pair_instance();
        assert_eq!(energy_deficit(&inst, &[0.0, 0.0], 0), 2.0);
        assert_eq!(energy_deficit(&inst, &[1.0, -1.0], 0), 0.0);
        assert_eq!(energy_deficit(&inst, &[0.5, -0.5], 0), 1.5);
    }

    #[test]
    fn energy_deficit_komlos_form() {
        let inst = SparseInstance::from_rows(
            2,
            vec![vec![(0, -0.5), (1, 2.0)]],
            ModeHint::General,
        )
        .unwrap();
        // s_j - sum |a| x^2 = 2.5 - (0.5 * 0.25 + 2.0 * 0.25)
        let d = energy_deficit(&inst, &[0.5, 0.5], 0);
        assert!((d - (2.5 - 0.625)).abs() < 1e-12);
    }

    #[test]
    fn step_with_coordinate_basis_moves_by_gamma_signs() {
        let inst = pair_instance();
        let mut state = WalkState::init(&inst);
        let va = basis_assignment(2, vec![true, true]);
        let signs = vec![1i8, -1];
        let out = step(&mut state, &inst, &va, &signs, 0.125, 1e-3);
        assert!(out.clamped.is_empty() && out.frozen.is_empty());
        assert_eq!(state.x, vec![0.125, -0.125]);
        assert_eq!(state.rows[0].disc, 0.25);
    }

    #[test]
    fn step_on_frozen_state_is_identity() {
        let inst = pair_instance();
        let mut state = WalkState::init(&inst);
        state.alive = vec![false, false];
        state.alive_count = 0;
        state.x = vec![0.3, -0.2];
        refresh_rows(&mut state, &inst);
        let before = state.x.clone();
        let va = basis_assignment(2, vec![false, false]);
        let out = step(&mut state, &inst, &va, &[1, 1], 0.5, 1e-3);
        assert_eq!(state.x, before);
        assert!(out.frozen.is_empty());
    }

    #[test]
    fn step_clamps_overshoot_and_freezes() {
        let inst = pair_instance();
        let mut state = WalkState::init(&inst);
        state.x[0] = 0.9;
        let va = basis_assignment(2, vec![true, true]);
        let out = step(&mut state, &inst, &va, &[1, 1], 0.5, 1e-3);
        assert_eq!(state.x[0], 1.0);
        assert_eq!(out.clamped, vec![0]);
        assert!(out.frozen.contains(&0));
        assert!(!state.alive[0]);
    }

    #[test]
    fn decomposition_zero_coloring_has_no_linear_term() {
        let inst = pair_instance();
        let va = basis_assignment(2, vec![true, true]);
        let (t, _) = deficit_decomposition(&inst, &[0.0, 0.0], &va, &[1, -1], 0, 0.1);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn decomposition_basis_drift_counts_alive_elements() {
        let inst = pair_instance();
        let mut alive = vec![true, true];
        let va = basis_assignment(2, alive.clone());
        let gamma = 0.1;
        let (_, r) = deficit_decomposition(&inst, &[0.0, 0.0], &va, &[1, 1], 0, gamma);
        assert!((r + gamma * gamma * 2.0).abs() < 1e-15);
        alive[1] = false;
        let va = basis_assignment(2, alive);
        let (_, r) = deficit_decomposition(&inst, &[0.0, 0.0], &va, &[1, 1], 0, gamma);
        assert!((r + gamma * gamma).abs() < 1e-15);
    }

    #[test]
    fn decomposition_matches_direct_deficit_change() {
        // Random small case: sum of the two terms equals the recomputed
        // deficit change to 1e-8 when nothing clamps.
        let inst = SparseInstance::from_rows(
            3,
            vec![vec![(0, 1.0), (1, 1.0), (2, 1.0)], vec![(0, 1.0), (2, 1.0)]],
            ModeHint::SetSystem,
        )
        .unwrap();
        let mut rng = rng::stream(99, rng::Domain::SolverInit, 1);
        for trial in 0..50 {
            let mut vectors = Vec::new();
            for _ in 0..3 {
                let mut v = vec![0.0; 4];
                let mut norm = 0.0;
                for d in v.iter_mut() {
                    *d = rng::gaussian(&mut rng);
                    norm += *d * *d;
                }
                let norm = norm.sqrt();
                for d in v.iter_mut() {
                    *d /= norm;
                }
                vectors.push(v);
            }
            let va = VectorAssignment::from_vectors(vectors, vec![true; 3]);
            let x: Vec<f64> = (0..3).map(|_| rng::unit_f64(&mut rng) * 0.8 - 0.4).collect();
            let signs: Vec<i8> = (0..4).map(|_| rng::sign(&mut rng)).collect();
            let gamma = 0.05;

            let mut state = WalkState::init(&inst);
            state.x = x.clone();
            refresh_rows(&mut state, &inst);
            let before: Vec<f64> = state.rows.iter().map(|r| r.deficit).collect();
            let out = step(&mut state, &inst, &va, &signs, gamma, 1e-3);
            assert!(out.clamped.is_empty(), "trial {trial} clamped unexpectedly");
            for j in 0..2 {
                let (t, r) = deficit_decomposition(&inst, &x, &va, &signs, j, gamma);
                let direct = state.rows[j].deficit - before[j];
                assert!(
                    (t + r - direct).abs() < 1e-8,
                    "trial {trial} row {j}: {t} + {r} != {direct}"
                );
            }
        }
    }

    #[test]
    fn safety_sweep_examples() {
        let inst = generate::<f64>(&Family::Identity { n: 3 }, 0).unwrap();
        let mut state = WalkState::init(&inst);
        // lambda = 0: nothing with positive mass ever goes safe.
        assert!(safety_sweep(&mut state, &[0.0; 3], 0).is_empty());
        // Singleton rows at lambda = 2 are safe immediately.
        let newly = safety_sweep(&mut state, &[2.0; 3], 0);
        assert_eq!(newly, vec![0, 1, 2]);
        assert!(state.rows.iter().all(|r| r.phase_safe == Some(0)));
        // lambda = 1 marks singleton rows safe too (mass <= threshold).
        let mut state2 = WalkState::init(&inst);
        assert_eq!(safety_sweep(&mut state2, &[1.0; 3], 0).len(), 3);
    }

    #[test]
    fn fully_frozen_rows_go_safe_at_lambda_zero() {
        let inst = pair_instance();
        let mut state = WalkState::init(&inst);
        state.alive = vec![false, false];
        state.alive_count = 0;
        state.x = vec![1.0, -1.0];
        refresh_rows(&mut state, &inst);
        let newly = safety_sweep(&mut state, &[0.0], 3);
        assert_eq!(newly, vec![0]);
    }

    #[test]
    fn thresholds_match_formulas() {
        // loglog clamp binding: n = 4 gives log2 log2 n = 1.
        let v = class_safety_threshold(1.0f64, 2, 4);
        assert!((v - 20.0 * 2.0f64.sqrt()).abs() < 1e-9);
        // m_i = 1: log2 m_i = 0, clamped loglog.
        let v = class_safety_threshold(2.0f64, 1, 4);
        assert!((v - 20.0 * 2.0f64.sqrt()).abs() < 1e-9);
        // t = 100, m_i = 1024, n = 2^16 so loglog = 4.
        let v = class_safety_threshold(100.0f64, 1024, 1 << 16);
        assert!((v - 20.0 * 1400.0f64.sqrt()).abs() < 1e-6);
        let v = default_safety_threshold(4.0f64, 256);
        assert!((v - 20.0 * 32.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn final_round_thresholds_and_coins() {
        let inst = pair_instance();
        let mut state = WalkState::init(&inst);
        state.x = vec![0.9995, -0.9995];
        state.alive = vec![false, false];
        state.alive_count = 0;
        let coloring = final_round(&state, 1e-3, 1);
        assert_eq!(coloring, vec![1, -1]);

        // A still-alive coordinate gets a per-seed deterministic coin.
        let mut state = WalkState::init(&inst);
        state.x = vec![0.0, 0.0];
        let a = final_round(&state, 1e-3, 5);
        let b = final_round(&state, 1e-3, 5);
        assert_eq!(a, b);
        assert!(a.iter().all(|&s| s == 1 || s == -1));
    }

    #[test]
    fn shrink_target_phase_floors_at_one() {
        assert_eq!(shrink_target_phase(8.0f64, 226.0), 1);
        assert_eq!(shrink_target_phase(64.0f64, 1.0), 19);
        assert_eq!(shrink_target_phase(1.0f64, 0.0), 1);
    }
}
