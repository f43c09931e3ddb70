//! Low-discrepancy coloring of sparse set systems.
//!
//! The centerpiece is a random walk over fractional colorings in which every
//! step is guided by a feasible solution of a vector-coloring SDP with
//! per-row energy constraints. The crate also ships the supporting cast: a
//! validated sparse-instance type with seeded generators, a low-rank
//! feasibility solver with independent certification, an exact brute-force
//! oracle for small instances, and an experiment harness that produces
//! byte-reproducible reports.
//!
//! All numeric code is generic over the scalar type ([`scalar::Scalar`],
//! implemented for `f32` and `f64`); the aliases below pin the common
//! `f64` instantiation used by the CLI.

pub mod instance;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod vcsolver;

pub use scalar::Scalar;

/// `f64` instantiations, the default throughout the CLI and harness.
pub type Instance64 = instance::SparseInstance<f64>;
pub type Profile64 = instance::SparsityProfile<f64>;
pub type Weights64 = instance::RowWeights<f64>;

/// `f32` instantiations for memory-bound experiments.
pub type Instance32 = instance::SparseInstance<f32>;
