//! E-step strategies and the name-keyed registry that selects them at runtime.

use std::sync::{Arc, OnceLock};

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quantile_grid, FitConfig};
use crate::data::Dataset;
use crate::dist::{truncated_quantile, ModelKind, ModelParams};
use crate::error::FitError;
use crate::estep::{Expectation, SampleMatrix};

/// One way of computing the E-step.
pub trait EStepStrategy: Send + Sync {
    /// Registry key.
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn supports(&self, kind: ModelKind) -> bool;

    /// Whether the output depends on a random stream.
    fn is_stochastic(&self) -> bool {
        false
    }

    /// E-step at `params` for iteration `iteration` (0-based).
    fn expectation(
        &self,
        params: &ModelParams,
        dataset: &Dataset,
        config: &FitConfig,
        iteration: usize,
    ) -> Result<Expectation, FitError>;
}

/// Ordinary EM with closed-form conditional moments (exponential, normal).
#[derive(Debug, Default, Clone, Copy)]
pub struct ExactEm;

impl EStepStrategy for ExactEm {
    fn name(&self) -> &'static str {
        "em"
    }

    fn description(&self) -> &'static str {
        "closed-form conditional moments"
    }

    fn supports(&self, kind: ModelKind) -> bool {
        kind.has_closed_form_estep()
    }

    fn expectation(
        &self,
        params: &ModelParams,
        dataset: &Dataset,
        _config: &FitConfig,
        _iteration: usize,
    ) -> Result<Expectation, FitError> {
        match params.closed_form_moments(dataset) {
            Some(m) => m.map(Expectation::Moments),
            None => Err(FitError::UnsupportedStrategy {
                strategy: self.name().into(),
                model: params.kind(),
            }),
        }
    }
}

/// Monte Carlo EM: `K` inverse-transform draws per observation, fresh every iteration.
#[derive(Debug, Default, Clone, Copy)]
pub struct MonteCarloEm;

impl EStepStrategy for MonteCarloEm {
    fn name(&self) -> &'static str {
        "mcem"
    }

    fn description(&self) -> &'static str {
        "Monte Carlo draws from the truncated conditional law"
    }

    fn supports(&self, _kind: ModelKind) -> bool {
        true
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn expectation(
        &self,
        params: &ModelParams,
        dataset: &Dataset,
        config: &FitConfig,
        iteration: usize,
    ) -> Result<Expectation, FitError> {
        let seed = config.seed.ok_or_else(|| {
            FitError::InvalidConfig("Monte Carlo E-step needs a seed".into())
        })?;
        monte_carlo_matrix(params, dataset, config.k, seed, iteration).map(Expectation::Samples)
    }
}

/// Quantile EM: conditional quantiles at a deterministic fraction grid.
#[derive(Debug, Default, Clone, Copy)]
pub struct QuantileEm;

impl EStepStrategy for QuantileEm {
    fn name(&self) -> &'static str {
        "qem"
    }

    fn description(&self) -> &'static str {
        "conditional quantiles on a fixed fraction grid"
    }

    fn supports(&self, _kind: ModelKind) -> bool {
        true
    }

    fn expectation(
        &self,
        params: &ModelParams,
        dataset: &Dataset,
        config: &FitConfig,
        _iteration: usize,
    ) -> Result<Expectation, FitError> {
        quantile_matrix(params, dataset, &quantile_grid(config.k, config.scheme))
            .map(Expectation::Samples)
    }
}

/// Name-keyed collection of E-step strategies.
#[derive(Clone, Default)]
pub struct StrategyRegistry {
    entries: Vec<Arc<dyn EStepStrategy>>,
}

impl StrategyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `em`, `mcem` and `qem`.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(ExactEm));
        r.register(Arc::new(MonteCarloEm));
        r.register(Arc::new(QuantileEm));
        r
    }

    /// Shared instance of [`StrategyRegistry::builtin`].
    pub fn global() -> &'static StrategyRegistry {
        static GLOBAL: OnceLock<StrategyRegistry> = OnceLock::new();
        GLOBAL.get_or_init(StrategyRegistry::builtin)
    }

    /// Adds a strategy, replacing any existing one with the same name.
    pub fn register(&mut self, strategy: Arc<dyn EStepStrategy>) {
        self.entries.retain(|s| s.name() != strategy.name());
        self.entries.push(strategy);
    }

    /// Looks up a strategy by name, case-insensitively. `exact-em` is accepted for `em`.
    pub fn get(&self, name: &str) -> Result<Arc<dyn EStepStrategy>, FitError> {
        let key = name.trim().to_ascii_lowercase();
        let key = match key.as_str() {
            "exact-em" | "exact" => "em".to_string(),
            _ => key,
        };
        self.entries
            .iter()
            .find(|s| s.name() == key)
            .cloned()
            .ok_or_else(|| FitError::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }
}

impl std::fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

/// Conditional quantiles `q_ik` of every observation at the given levels.
///
/// Exact observations give constant rows; level 0 maps to the lower bound.
pub fn quantile_matrix(
    params: &ModelParams,
    dataset: &Dataset,
    levels: &[f64],
) -> Result<SampleMatrix, FitError> {
    let k = levels.len();
    let mut values = Vec::with_capacity(dataset.len() * k);
    let mut previous = None;
    for (index, obs) in dataset.iter().enumerate() {
        // Grouped data repeats identical rows; reuse the last one.
        if previous == Some(*obs) {
            let start = values.len() - k;
            values.extend_from_within(start..);
            continue;
        }
        if obs.is_exact() {
            values.extend(std::iter::repeat_n(obs.lower(), k));
        } else {
            for &xi in levels {
                let q = if xi == 0.0 {
                    if obs.lower() == f64::NEG_INFINITY {
                        return Err(FitError::InvalidConfig(format!(
                            "observation {index}: the left grid needs a finite lower bound"
                        )));
                    }
                    obs.lower()
                } else {
                    truncated_quantile(params, obs, xi).map_err(|e| with_index(e, index))?
                };
                values.push(q);
            }
        }
        previous = Some(*obs);
    }
    Ok(SampleMatrix::from_vec(dataset.len(), k, values))
}

/// Counter-based uniform stream for one observation at one iteration.
///
/// The ChaCha key comes from `seed`, the stream id from `iteration`, and the
/// block position from `(observation, k)`, so draw `(s, i, k)` is the same
/// no matter which rows are computed or in what order.
pub fn mcem_uniform_stream(seed: u64, iteration: usize, observation: usize, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    // Each f64 draw consumes one u64, i.e. two 32-bit words.
    rng.set_word_pos(2 * observation as u128 * k as u128);
    rng
}

/// Inverse-transform draws `z_ik` for every observation at iteration `iteration`.
pub fn monte_carlo_matrix(
    params: &ModelParams,
    dataset: &Dataset,
    k: usize,
    seed: u64,
    iteration: usize,
) -> Result<SampleMatrix, FitError> {
    let mut values = Vec::with_capacity(dataset.len() * k);
    for (index, obs) in dataset.iter().enumerate() {
        if obs.is_exact() {
            values.extend(std::iter::repeat_n(obs.lower(), k));
            continue;
        }
        let mut rng = mcem_uniform_stream(seed, iteration, index, k);
        for _ in 0..k {
            let u: f64 = rng.sample(Open01);
            values.push(truncated_quantile(params, obs, u).map_err(|e| with_index(e, index))?);
        }
    }
    Ok(SampleMatrix::from_vec(dataset.len(), k, values))
}

/// The `n x K` E-step matrix for the sample-based strategy named in `config`.
pub fn estep_matrix(
    params: &ModelParams,
    dataset: &Dataset,
    config: &FitConfig,
    iteration: usize,
) -> Result<SampleMatrix, FitError> {
    let strategy = StrategyRegistry::global().get(&config.strategy)?;
    match strategy.expectation(params, dataset, config, iteration)? {
        Expectation::Samples(s) => Ok(s),
        Expectation::Moments(_) => Err(FitError::InvalidConfig(format!(
            "strategy '{}' does not produce a sample matrix",
            strategy.name()
        ))),
    }
}

fn with_index(error: FitError, index: usize) -> FitError {
    match error {
        FitError::ZeroMass { .. } => FitError::ZeroMass { index },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::GridScheme;
    use approx::assert_relative_eq;

    fn exp_sigma1() -> ModelParams {
        ModelParams::exponential(1.0).unwrap()
    }

    #[test]
    fn registry_lookup() {
        let r = StrategyRegistry::builtin();
        assert_eq!(r.names(), vec!["em", "mcem", "qem"]);
        assert_eq!(r.get("QEM").unwrap().name(), "qem");
        assert_eq!(r.get("exact-em").unwrap().name(), "em");
        assert!(matches!(r.get("sem"), Err(FitError::UnknownStrategy(_))));
        assert!(!r.get("em").unwrap().supports(ModelKind::Laplace));
        assert!(r.get("mcem").unwrap().is_stochastic());
    }

    #[test]
    fn qem_rows() {
        let ds = Dataset::from_pairs([(6.0, 6.0), (6.0, f64::INFINITY)]).unwrap();
        let m = quantile_matrix(&exp_sigma1(), &ds, &quantile_grid(2, GridScheme::Midpoint)).unwrap();
        assert_eq!(m.row(0), &[6.0, 6.0]);
        assert_relative_eq!(m.row(1)[0], 6.0 - 0.75f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(m.row(1)[1], 6.0 - 0.25f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(m.row(1)[0], 6.2877, epsilon = 1e-4);
        assert_relative_eq!(m.row(1)[1], 7.3863, epsilon = 1e-4);
    }

    #[test]
    fn repeated_rows_match_fresh_computation() {
        let ds = Dataset::from_pairs([(1.0, 3.0), (1.0, 3.0), (3.0, 9.0)]).unwrap();
        let p = ModelParams::weibull(0.2, 1.4).unwrap();
        let levels = quantile_grid(7, GridScheme::Shifted);
        let m = quantile_matrix(&p, &ds, &levels).unwrap();
        for (i, obs) in ds.iter().enumerate() {
            for (k, &xi) in levels.iter().enumerate() {
                assert_eq!(m.row(i)[k], truncated_quantile(&p, obs, xi).unwrap());
            }
        }
    }

    #[test]
    fn left_grid_uses_lower_bound() {
        let ds = Dataset::from_pairs([(2.0, 4.0)]).unwrap();
        let m = quantile_matrix(&exp_sigma1(), &ds, &quantile_grid(4, GridScheme::Left)).unwrap();
        assert_eq!(m.row(0)[0], 2.0);
        let ds = Dataset::from_pairs([(f64::NEG_INFINITY, 4.0)]).unwrap();
        let n = ModelParams::normal(0.0, 1.0).unwrap();
        assert!(quantile_matrix(&n, &ds, &quantile_grid(4, GridScheme::Left)).is_err());
    }

    #[test]
    fn mcem_is_reproducible_and_order_free() {
        let ds = Dataset::from_pairs([(1.0, 1.0), (0.5, f64::INFINITY), (2.0, 3.0)]).unwrap();
        let p = exp_sigma1();
        let a = monte_carlo_matrix(&p, &ds, 16, 42, 3).unwrap();
        let b = monte_carlo_matrix(&p, &ds, 16, 42, 3).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_matrix(&p, &ds, 16, 42, 4).unwrap();
        assert_ne!(a.row(1), c.row(1));
        // Row 2 drawn alone from its own stream matches the full-matrix row.
        let mut rng = mcem_uniform_stream(42, 3, 2, 16);
        let obs = ds.observations()[2];
        for k in 0..16 {
            let u: f64 = rng.sample(Open01);
            assert_eq!(a.row(2)[k], truncated_quantile(&p, &obs, u).unwrap());
        }
        assert!(a.row(2).iter().all(|&z| (2.0..=3.0).contains(&z)));
    }

    #[test]
    fn zero_mass_carries_the_observation_index() {
        let ds = Dataset::from_pairs([(0.0, 1.0), (1e5, 1e5 + 1.0)]).unwrap();
        let p = ModelParams::normal(0.0, 1.0).unwrap();
        let err = quantile_matrix(&p, &ds, &[0.5]).unwrap_err();
        assert_eq!(err, FitError::ZeroMass { index: 1 });
    }

    #[test]
    fn estep_matrix_dispatch() {
        let ds = Dataset::from_pairs([(1.0, 2.0)]).unwrap();
        let cfg = FitConfig::with_strategy("qem").k(3);
        assert_eq!(estep_matrix(&exp_sigma1(), &ds, &cfg, 0).unwrap().cols(), 3);
        let cfg = FitConfig::with_strategy("em");
        assert!(estep_matrix(&exp_sigma1(), &ds, &cfg, 0).is_err());
    }
}
