//! Doubly-robust, Neyman-orthogonal estimation of sorted group average
//! treatment effects (DO GATES), plus the simulation harness used to validate
//! the estimator against a CATE-quantile benchmark.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: datasets, sample splits, CSV ingestion and validation.
//! - [`forest`]: a seeded regression random forest used for every nuisance.
//! - [`linreg`]: weighted least squares with HC0 robust inference.
//! - [`pipeline`]: cross-fitted scores, grouping, the GATES projections and
//!   median aggregation over repeated splits.
//! - [`simulation`]: the data-generating process behind scenarios A to L.
//! - [`metrics`]: true group effects, MAE and squared bias.
//! - [`harness`]: Monte Carlo benchmark runs and result bundles.

pub mod data;
pub mod error;
pub mod forest;
pub mod harness;
pub mod linreg;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod simulation;
pub mod stats;

pub use data::{make_split, validate_dataset, Dataset, Matrix, SimulatedDataset, SplitPlan, Violation};
pub use error::{Error, Result};
pub use forest::{ForestModel, ForestParams, PropensityModel};
pub use linreg::{wls, WlsFit};
pub use metrics::{bias2, mae, true_group_effects, BenchmarkRecord, Method};
pub use pipeline::{
    assign_groups, run_benchmark_cate_quantiles, run_dogates, CateEnsemble, GatesMode, GatesResult,
    GroupAssignment, RunConfig,
};
pub use simulation::{gen_scenario, Assignment, EffectShape, ScenarioConfig, ScenarioId};
