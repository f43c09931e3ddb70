//! Run reports: schema `report v1`.
//!
//! A report is a single JSON document whose bytes are a pure function of
//! `(instance, config)`; wall-clock timings stay in memory only. The flat
//! per-row metrics also serialize to CSV for plotting.

use serde::{Deserialize, Serialize};

use super::{SafetyPolicy, WalkConfig, WalkMode};
use crate::instance::{Family, ModeHint};
use crate::scalar::Scalar;
use crate::vcsolver::SolverConfig;

pub const REPORT_SCHEMA: &str = "report v1";

/// Where the instance came from, echoed so `verify` can rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSourceEcho {
    File { path: String, fingerprint: String },
    Generated { #[serde(flatten)] family: Family, seed: u64 },
    Inline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta<S> {
    pub n: usize,
    pub m: usize,
    pub mode: ModeHint,
    /// Effective sparsity parameter the bound `2t` was computed from.
    pub t: S,
    pub source: InstanceSourceEcho,
}

/// The concrete parameter values a run executed with. Convertible back into
/// a [`WalkConfig`] for byte-exact replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig<S> {
    pub gamma: S,
    pub steps_per_phase: usize,
    pub max_phases: usize,
    pub freeze_delta: S,
    pub safety: SafetyPolicy<S>,
    pub drop_safe_sets: bool,
    pub mode: WalkMode<S>,
    pub solver: SolverConfig<S>,
    pub enforce_hard: bool,
    pub seed: u64,
}

impl<S: Scalar> ResolvedConfig<S> {
    pub fn to_config(&self) -> WalkConfig<S> {
        WalkConfig {
            gamma: Some(self.gamma),
            steps_per_phase: Some(self.steps_per_phase),
            max_phases: Some(self.max_phases),
            freeze_delta: Some(self.freeze_delta),
            safety: self.safety.clone(),
            drop_safe_sets: self.drop_safe_sets,
            mode: self.mode.clone(),
            solver: self.solver.clone(),
            enforce_hard: self.enforce_hard,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub checks: u64,
    pub violations: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub first_failures: Vec<String>,
}

impl Tally {
    pub fn record(&mut self, violation: Option<String>) {
        self.checks += 1;
        if let Some(detail) = violation {
            self.violations += 1;
            if self.first_failures.len() < 5 {
                self.first_failures.push(detail);
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantTallies {
    /// `x(i) in [-1, 1]` for every coordinate, every step.
    pub x_range: Tally,
    /// `D_j >= 0` for every row, every step.
    pub deficit_nonneg: Tally,
    /// `D_j <= alive_mass_j + frozen_mass_j * (1 - (1-delta)^2)`: each
    /// frozen element contributes at most `1 - (1-delta)^2` per unit of
    /// coefficient mass.
    pub frozen_deficit_bound: Tally,
    /// Independent per-step certification of every active constraint row.
    pub sdp_rows: Tally,
    /// Unit/zero vector norms from the same certification.
    pub sdp_norms: Tally,
    /// Per-step conditional variance cap on the plain row constraints
    /// (`gamma^2 ||sum v_i||^2 <= 2 t gamma^2 (1 + tol)`).
    pub variance_cap: Tally,
    /// Deficit decomposition identity on clamp-free steps (1e-8).
    pub decomposition: Tally,
    /// Row-steps skipped because a clamp broke the algebraic identity.
    pub decomposition_skipped_clamped: u64,
    /// Final coloring entries are exactly +/-1.
    pub final_pm_one: Tally,
}

impl InvariantTallies {
    pub fn total_violations(&self) -> u64 {
        self.x_range.violations
            + self.deficit_nonneg.violations
            + self.frozen_deficit_bound.violations
            + self.sdp_rows.violations
            + self.sdp_norms.violations
            + self.variance_cap.violations
            + self.decomposition.violations
            + self.final_pm_one.violations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport<S> {
    pub row: usize,
    /// Row mass: element count for set systems, l1-norm otherwise (of the
    /// reweighted row in weighted mode).
    pub s: S,
    /// Size class `ceil(log2 s)` used for aggregation, 0 for s <= 1.
    pub class: u32,
    pub lambda: S,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weight: Option<S>,
    /// |row sum| of the final +/-1 coloring on the original row.
    pub final_disc: S,
    /// Weighted-row final discrepancy, weighted mode only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_disc_weighted: Option<S>,
    /// Max |row sum| seen at any step of the run (including the final
    /// rounded coloring), on the rows the walk ran with.
    pub max_abs_disc: S,
    pub phase_safe: Option<u32>,
    pub fully_frozen: bool,
    /// Phase by which the row was expected to shrink to `2 lambda + 2`.
    pub target_phase: u32,
    /// Alive mass still above `2 lambda + 2` at the target phase.
    pub overdue_at_target: bool,
    /// |disc change| caused by the final rounding.
    pub round_shift: S,
    /// Bound component from frozen coordinates: `delta * l1(row)`.
    pub round_frozen_bound: S,
    /// Bound component from coordinates still alive at rounding time.
    pub round_alive_mass: S,
    /// Normalized score; see [`RunReport`] docs for the per-mode formula.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow<S> {
    pub phase: u32,
    pub steps: usize,
    pub alive_elements: usize,
    pub rows_safe: usize,
    pub rows_fully_frozen: usize,
    /// Fraction of rows with alive mass above `2 lambda + 2` at phase end.
    pub frac_rows_over_threshold: f64,
    pub max_abs_disc: S,
    pub solver_iterations: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solves: u64,
    /// Solves settled by the warm start alone (zero iterations).
    pub warm_reused: u64,
    pub descents: u64,
    pub iterations: u64,
    pub rank_escalations: u64,
    pub cold_restarts: u64,
    pub max_rank: usize,
    pub max_rel_violation: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkStats {
    pub steps: usize,
    pub clamps: u64,
    pub freezes: u64,
}

/// Everything one walk produced.
///
/// Normalized scores: `|disc| / sqrt(t log2 n log2(2 s_j))` for set systems,
/// `|disc| / sqrt(log2 n log2(2 + s_j))` in Komlos mode, and
/// `|weighted disc| / (beta sqrt(log2 n log2(2 + w_j s_j)))` in weighted
/// mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport<S> {
    pub schema: String,
    pub instance: InstanceMeta<S>,
    pub config: ResolvedConfig<S>,
    /// `2 t (1 + 0)`: the SDP norm bound the run used.
    pub bound: S,
    /// Weighted mode: max column l2-norm of the reweighted matrix.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<S>,
    pub steps_run: usize,
    pub phases_completed: u32,
    pub not_fully_colored: bool,
    pub final_coloring: Vec<i8>,
    /// Max final |disc| over rows (original rows).
    pub final_max_disc: S,
    /// Max |disc| over rows and steps.
    pub run_max_disc: S,
    /// Fraction of rows still above `2 lambda + 2` alive mass at their
    /// shrinkage target phase.
    pub overdue_fraction: f64,
    pub rows: Vec<RowReport<S>>,
    pub phases: Vec<PhaseRow<S>>,
    pub invariants: InvariantTallies,
    pub solver: SolverSummary,
    pub work: WorkStats,
}

/// Canonical JSON bytes of a report (pretty-printed, trailing newline).
pub fn report_json<S: Scalar>(report: &RunReport<S>) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Flat per-row CSV: `row,s,final_disc,max_disc,phase_safe,score`.
pub fn report_rows_csv<S: Scalar>(report: &RunReport<S>) -> String {
    let mut out = String::from("row,s,final_disc,max_disc,phase_safe,score\n");
    for r in &report.rows {
        let phase = r.phase_safe.map(|p| p.to_string()).unwrap_or_default();
        let score = r.score.map(|v| format!("{v}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.row, r.s, r.final_disc, r.max_abs_disc, phase, score
        ));
    }
    out
}
