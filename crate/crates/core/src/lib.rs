//! Bayesian random-effects meta-analysis under the normal-normal hierarchical model.

// Negated comparisons such as `!(x >= 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod effect;
pub mod engine;
pub mod error;
pub mod forest;
pub mod io;
pub mod mixture;
pub mod numeric;
pub mod par;
pub mod report;
pub mod sensitivity;
pub mod special;
pub mod toolkit;
pub mod uisd;

pub use dist::{DistributionSummary, HeterogeneityPrior};
pub use effect::{EffectEstimate, Measure};
pub use engine::{analyze, AnalysisOptions, AnalysisReport, CiKind, Dataset, EffectPrior, Summary};
pub use error::{Error, Result};
pub use par::Execution;
