//! The EM iteration driver.
//!
//! An E-step strategy (looked up by name in a [`StrategyRegistry`]) turns the
//! current parameters into conditional moments or an `n x K` sample matrix;
//! the model's M-step turns that into the next parameters. Iteration stops
//! when every coordinate has changed by less than `eps` relative, twice in a
//! row, or when the iteration cap is reached.

mod strategy;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use strategy::{
    estep_matrix, mcem_uniform_stream, monte_carlo_matrix, quantile_matrix, EStepStrategy,
    ExactEm, MonteCarloEm, QuantileEm, StrategyRegistry,
};

use crate::data::{validate_for_model, Dataset};
use crate::dist::{observed_loglik, ModelKind, ModelParams};
use crate::error::FitError;

/// Fraction grid used by the quantile E-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScheme {
    /// `(k - 1/2) / K`: the extended midpoint rule.
    #[default]
    Midpoint,
    /// `k / K` for `k = 0..K-1`: left endpoints, level 0 maps to the lower bound.
    Left,
    /// `k / (K + 1)` for `k = 1..K`.
    Shifted,
}

impl FromStr for GridScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "midpoint" => Ok(GridScheme::Midpoint),
            "left" => Ok(GridScheme::Left),
            "shifted" => Ok(GridScheme::Shifted),
            other => Err(format!("unknown grid scheme '{other}'")),
        }
    }
}

impl fmt::Display for GridScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridScheme::Midpoint => "midpoint",
            GridScheme::Left => "left",
            GridScheme::Shifted => "shifted",
        })
    }
}

/// The `K` fractions of `scheme`, strictly increasing.
pub fn quantile_grid(k: usize, scheme: GridScheme) -> Vec<f64> {
    let kf = k as f64;
    (1..=k)
        .map(|i| {
            let i = i as f64;
            match scheme {
                GridScheme::Midpoint => (i - 0.5) / kf,
                GridScheme::Left => (i - 1.0) / kf,
                GridScheme::Shifted => i / (kf + 1.0),
            }
        })
        .collect()
}

/// Settings for one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Registered E-step strategy name: `em`, `mcem` or `qem`.
    pub strategy: String,
    /// Grid or sample size per observation; ignored by `em`.
    pub k: usize,
    pub scheme: GridScheme,
    /// Relative precision of the stopping rule.
    pub eps: f64,
    pub max_iterations: usize,
    /// Seed of the Monte Carlo stream; `None` draws one from the OS.
    pub seed: Option<u64>,
    /// Starting parameters; `None` uses the model's default.
    pub initial: Option<ModelParams>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            strategy: "qem".to_string(),
            k: 1000,
            scheme: GridScheme::Midpoint,
            eps: 1e-5,
            max_iterations: 500,
            seed: None,
            initial: None,
        }
    }
}

impl FitConfig {
    pub fn with_strategy(strategy: &str) -> Self {
        Self {
            strategy: strategy.to_string(),
            ..Self::default()
        }
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn initial(mut self, initial: ModelParams) -> Self {
        self.initial = Some(initial);
        self
    }

    pub fn scheme(mut self, scheme: GridScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub(crate) fn validate(&self, kind: ModelKind, registry: &StrategyRegistry) -> Result<(), FitError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(FitError::InvalidConfig(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if self.k == 0 {
            return Err(FitError::InvalidConfig("K must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(FitError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if let Some(init) = &self.initial {
            if init.kind() != kind {
                return Err(FitError::ModelMismatch(init.kind(), kind));
            }
            init.validate()?;
        }
        let strategy = registry.get(&self.strategy)?;
        if !strategy.supports(kind) {
            return Err(FitError::UnsupportedStrategy {
                strategy: strategy.name().to_string(),
                model: kind,
            });
        }
        Ok(())
    }
}

/// Outcome of a fit: the final estimate and the full iteration history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub strategy: String,
    pub estimate: ModelParams,
    /// `theta^(0), theta^(1), ...`; length `iterations + 1`.
    pub trace: Vec<ModelParams>,
    /// Observed-data log-likelihood at each entry of `trace`.
    #[serde(with = "crate::serde_ext::nonfinite_vec")]
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Seed actually used by the Monte Carlo stream, if any.
    pub seed: Option<u64>,
}

/// A failed fit, carrying whatever trace was built before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct FitFailure {
    pub error: FitError,
    pub partial: Option<FitResult>,
}

impl fmt::Display for FitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.partial {
            Some(p) => write!(f, "{} (after {} iteration(s))", self.error, p.iterations),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for FitFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<FitError> for FitFailure {
    fn from(error: FitError) -> Self {
        Self {
            error,
            partial: None,
        }
    }
}

/// Relative-change stopping rule: `|new_j - old_j| < eps * max(|new_j|, 1e-300)` for every `j`.
pub fn check_convergence(
    previous: &ModelParams,
    next: &ModelParams,
    eps: f64,
) -> Result<bool, FitError> {
    if previous.kind() != next.kind() {
        return Err(FitError::ModelMismatch(previous.kind(), next.kind()));
    }
    Ok(previous
        .coordinates()
        .iter()
        .zip(next.coordinates())
        .all(|(old, new)| (new - old).abs() < eps * new.abs().max(1e-300)))
}

/// Fits `kind` to `dataset` using the built-in strategies.
pub fn run_fit(
    kind: ModelKind,
    dataset: &Dataset,
    config: &FitConfig,
) -> Result<FitResult, FitFailure> {
    run_fit_with(StrategyRegistry::global(), kind, dataset, config)
}

/// Fits `kind` to `dataset`, resolving the strategy in `registry`.
pub fn run_fit_with(
    registry: &StrategyRegistry,
    kind: ModelKind,
    dataset: &Dataset,
    config: &FitConfig,
) -> Result<FitResult, FitFailure> {
    validate_for_model(dataset, kind).map_err(FitError::from)?;
    config.validate(kind, registry)?;
    let strategy = registry.get(&config.strategy)?;

    let mut config = config.clone();
    if strategy.is_stochastic() && config.seed.is_none() {
        config.seed = Some(rand::random());
    }
    let initial = config.initial.unwrap_or_else(|| kind.default_initial());

    let mut result = FitResult {
        strategy: strategy.name().to_string(),
        estimate: initial,
        trace: vec![initial],
        loglik_trace: vec![observed_loglik(&initial, dataset)],
        converged: false,
        iterations: 0,
        seed: config.seed.filter(|_| strategy.is_stochastic()),
    };

    let mut passes = 0;
    for iteration in 0..config.max_iterations {
        let current = result.estimate;
        let step = strategy
            .expectation(&current, dataset, &config, iteration)
            .and_then(|e| ModelParams::maximize(kind, &e));
        let next = match step {
            Ok(next) => next,
            Err(error) => {
                return Err(FitFailure {
                    error,
                    partial: Some(result),
                })
            }
        };
        let pass = check_convergence(&current, &next, config.eps)?;
        result.trace.push(next);
        result.loglik_trace.push(observed_loglik(&next, dataset));
        result.estimate = next;
        result.iterations += 1;
        passes = if pass { passes + 1 } else { 0 };
        if passes >= 2 {
            result.converged = true;
            break;
        }
    }
    Ok(result)
}
