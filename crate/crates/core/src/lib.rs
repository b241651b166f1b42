//! Simulation and numerical verification toolkit for the maximal position of
//! critical and subcritical branching α-stable processes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branching;
pub mod curve;
pub mod error;
pub mod fk;
pub mod integral;
pub mod offspring;
pub mod rng;
pub mod special;
pub mod stable;
pub mod stats;
pub mod tail;

pub use branching::{
    estimate_survival, estimate_tail, estimate_tail_refinement, simulate_tree,
    simulate_tree_refined, SimConfig, SurvivalCurve, TailEstimate, TreeOutcome,
};
pub use curve::{geometric_grid, uniform_grid, MonotoneCurve, TailModel};
pub use error::{Error, Result};
pub use fk::{
    check_fk_identity, default_phi_grid, envelope_checks, estimate_plateau_constant, picard_phi,
    FkCheck, PhiEnsemble, PhiGrid, PhiOptions, PhiStart, Plateau,
};
pub use integral::{
    apply_t, build_kernel, residual, solve_u, PairKernel, SolveOptions, SolveReport,
};
pub use offspring::{make_explicit, make_heavy_tail, OffspringDist, OffspringSpec};
pub use rng::Streams;
pub use stable::{PathSkeleton, StableParams, StableSampler};
pub use tail::{
    classify_regime, critical_sandwich, fit_exponential, fit_power, fit_tail, numeric_laplace,
    phi_functionals, select_window, verify_small_lambda_limits, LaplaceTail, LimitReport, Regime,
    RegimePrediction, TailFit, TailKind, WindowPolicy,
};
