//! EM, Monte Carlo EM and quantile EM for interval-censored lifetime data.

pub mod data;
pub mod dist;
pub mod engine;
pub mod error;
pub mod estep;
pub mod fixtures;
pub mod oracle;
mod root;
pub mod serde_ext;
pub mod simulation;
pub mod weibull_root;

pub use data::{Dataset, GroupedRow, IntervalObservation};
pub use dist::{LifetimeModel, ModelKind, ModelParams};
pub use engine::{run_fit, FitConfig, FitFailure, FitResult, GridScheme, StrategyRegistry};
pub use error::{DataError, FitError, StudyError};
