//! Trust scoring for bipartite rating networks.
//!
//! Users rate products; every user has a latent *fairness* in `[0, 1]`,
//! every product a latent *goodness* in `[-1, 1]`, and every rating a
//! latent *reliability* in `[0, 1]`. The three quantities are defined in
//! terms of each other and solved by a fixed-point iteration that is
//! guaranteed to converge in a bounded number of steps ([`engine`]).
//!
//! The crate is organized around that solver:
//!
//! - [`graph`] — the bipartite rating network, CSV ingestion, score
//!   rescaling, unipartite splitting, and ground-truth labels.
//! - [`behavior`] — behavioral normality priors from inter-rating time
//!   distributions, plus a loader for externally computed priors.
//! - [`engine`] — the fixed-point solver and its convergence bounds.
//! - [`ensemble`] — runs the solver across a hyperparameter grid,
//!   averages the scores, and exports per-combination fairness features.
//! - [`eval`] — average precision, ROC AUC, top-k suspect reports, and
//!   reliability-distribution histograms.
//! - [`synth`] — synthetic benign networks, planted shill attacks, and a
//!   scaling benchmark.
//!
//! All numeric code is generic over the scalar type through the
//! [`scalar::Real`] trait; `f64` aliases for the main types live at the
//! crate root.

pub mod behavior;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod graph;
pub mod scalar;
pub mod sum;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

/// Bipartite rating network over `f64` scores.
pub type RatingGraph64 = graph::RatingGraph<f64>;
/// Bipartite rating network over `f32` scores.
pub type RatingGraph32 = graph::RatingGraph<f32>;
/// Solver state (fairness / goodness / reliability) over `f64`.
pub type ScoreState64 = engine::ScoreState<f64>;
/// Solver state over `f32`.
pub type ScoreState32 = engine::ScoreState<f32>;
/// Prior-strength constants over `f64`.
pub type HyperParams64 = engine::HyperParams<f64>;
/// Prior-strength constants over `f32`.
pub type HyperParams32 = engine::HyperParams<f32>;
/// Behavioral normality priors over `f64`.
pub type BehaviorPriors64 = behavior::BehaviorPriors<f64>;
/// Behavioral normality priors over `f32`.
pub type BehaviorPriors32 = behavior::BehaviorPriors<f32>;
