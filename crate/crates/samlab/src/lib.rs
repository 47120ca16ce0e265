//! samlab: a numerical laboratory for sharpness-aware minimization.
//!
//! The crate implements three optimizers over a common oracle interface —
//! SGD, SAM (perturb along the normalized gradient, then descend), and
//! sparse SAM (the perturbation gated by a binary mask) — together with the
//! machinery to study them:
//!
//! - mask generation via empirical Fisher top-k, dynamic drop/grow updates
//!   and random baselines ([`mask`]);
//! - loss-geometry diagnostics: gradient-difference ratio histograms,
//!   Lanczos Hessian spectra, filter-normalized landscape slices, and a
//!   relative-FLOPs cost model ([`diagnostics`]);
//! - a theory bench that checks the descent lemmas and the
//!   `O(log T / sqrt(T))` convergence bounds numerically on objectives with
//!   exactly known constants ([`theory`]);
//! - a seeded, reproducible experiment runner with CSV/JSON run records and
//!   ablation sweeps ([`experiment`]).
//!
//! Start with the runnable examples (`cargo run --release --example ...`):
//! each major capability has one. The `samlab` binary wraps the same entry
//! points behind `train`, `ablate`, `spectrum`, `landscape`, `ratio`,
//! `theory` and `flops` subcommands.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod hvp;
pub mod mask;
pub mod mlp;
pub mod objective;
pub mod optim;
pub mod param;
pub mod seed;
pub mod theory;

pub use data::{Batch, Dataset};
pub use error::{Error, Result};
pub use hvp::HvpOracle;
pub use mask::{MaskKind, MaskPolicy, SparseMask};
pub use mlp::MlpClassifier;
pub use objective::{
    KnownConstants, NoisyQuadratic, Objective, StochasticObjective, TrigNonconvex,
};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState, Schedule, ScheduleRule, StepInfo};
pub use param::{GroupSpan, ParamVector, Partition};
