//! Evaluation of individualized treatment rules on data from completely
//! randomized experiments.
//!
//! The library estimates how much a treatment-prioritization rule improves on
//! randomly treating the same share of units: the rule's average value, its
//! prescriptive effect with and without a budget cap, head-to-head differences
//! between rules, and the area between a rule's budget curve and the
//! random-treatment baseline. Standard errors come from the repeated-sampling
//! distribution alone (random sampling of units plus randomization of
//! treatment), with no outcome model, asymptotics, or resampling.
//!
//! Cross-validation support evaluates a *learning algorithm* rather than a
//! fixed rule, correcting the variance for the overlap between folds. An
//! exhaustive-enumeration oracle and a simulation harness verify the
//! estimators end to end.

pub mod betafn;
pub mod bounds;
pub mod cv;
pub mod data;
pub mod error;
pub mod estimate;
pub mod kappa;
pub mod learners;
pub mod metrics;
pub mod oracle;
mod par;
pub mod rule;
pub mod sim;
pub mod zmoments;

pub use bounds::{bias_bound_aupec, bias_bound_papd, bias_bound_pape_budget, papd_cov_bound, BiasBound};
pub use data::{center_outcomes, load_experiment, load_experiment_path, ColumnSpec, ExperimentData, LoadedExperiment};
pub use error::{Error, Result};
pub use estimate::{Diagnostics, Metric, MetricEstimate};
pub use kappa::{kappa_hat, kappa_profile, KappaProfile};
pub use learners::{FittedScorer, LearnerSpec};
pub use metrics::{
    estimate_aupec, estimate_aupec_normalized, estimate_papd_budget, estimate_pape,
    estimate_pape_budget, estimate_pav, value_difference, AupecCurve, CurvePoint,
};
pub use oracle::{enumerate_randomizations, true_metric, ExactDistribution, MetricSpec, PotentialPopulation};
pub use rule::{floor_np, threshold_for_budget, Rule};
pub use zmoments::{ZMomentEngine, ZMomentMode};
