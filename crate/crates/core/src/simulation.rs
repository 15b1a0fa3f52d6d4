//! Monte Carlo study harness: censored samples, repeated fits, bias/MSE/SRE tables.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, IntervalObservation};
use crate::dist::{ModelKind, ModelParams};
use crate::engine::{run_fit, FitConfig, StrategyRegistry};
use crate::error::{FitError, StudyError};
use crate::oracle::mle_grid_refine;

/// One estimator under study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyCell {
    pub strategy: String,
    pub k: usize,
}

impl StudyCell {
    pub fn new(strategy: &str, k: usize) -> Self {
        Self {
            strategy: strategy.to_string(),
            k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// True parameters the samples are drawn from.
    pub truth: ModelParams,
    pub n: usize,
    /// Number of largest order statistics censored.
    pub r: usize,
    pub replications: usize,
    pub cells: Vec<StudyCell>,
    /// EM iterations per cell fit.
    pub iterations: usize,
    pub seed: u64,
    /// Stopping tolerance for cell fits; small enough that `iterations` is the binding limit.
    pub eps: f64,
}

/// Reference fits run to convergence with these settings.
pub const REFERENCE_EPS: f64 = 1e-12;
pub const REFERENCE_MAX_ITERATIONS: usize = 10_000;

impl StudyConfig {
    pub fn new(truth: ModelParams, n: usize, r: usize, replications: usize, cells: Vec<StudyCell>) -> Self {
        Self {
            truth,
            n,
            r,
            replications,
            cells,
            iterations: 10,
            seed: 1,
            eps: REFERENCE_EPS,
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        self.truth.validate()?;
        if self.n == 0 || self.r >= self.n {
            return Err(StudyError::Invalid(format!(
                "need 0 <= r < n, got n = {}, r = {}",
                self.n, self.r
            )));
        }
        if self.replications == 0 {
            return Err(StudyError::Invalid("replications must be at least 1".into()));
        }
        if self.cells.is_empty() {
            return Err(StudyError::Invalid("no estimator cells".into()));
        }
        if self.iterations == 0 {
            return Err(StudyError::Invalid("iterations must be at least 1".into()));
        }
        for cell in &self.cells {
            self.cell_config(cell, 0, 0)
                .validate(self.truth.kind(), StrategyRegistry::global())?;
        }
        Ok(())
    }

    fn cell_config(&self, cell: &StudyCell, index: usize, replication: usize) -> FitConfig {
        FitConfig::with_strategy(&cell.strategy)
            .k(cell.k)
            .eps(self.eps)
            .max_iterations(self.iterations)
            .seed(derived_seed(self.seed, 1 + index as u64, replication))
            .initial(self.truth)
    }

    /// Parses the flat `key = value` format.
    ///
    /// Required keys: `model`, `params`, `n`, `r`, `replications`, `cells`,
    /// `iterations`. Optional: `seed` (default 1), `eps`.
    /// `cells` is a comma list of `strategy:K`; `params` a comma list in
    /// coordinate order. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, StudyError> {
        const KEYS: [&str; 9] = [
            "model",
            "params",
            "n",
            "r",
            "replications",
            "cells",
            "iterations",
            "seed",
            "eps",
        ];
        let mut values: Vec<(&str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(StudyError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(StudyError::UnknownKey(key.to_string()));
            }
            values.retain(|(k, _)| *k != key);
            values.push((key, value.trim()));
        }
        let get = |key: &str| -> Option<&str> { values.iter().find(|(k, _)| *k == key).map(|(_, v)| *v) };
        let need = |key: &str| get(key).ok_or_else(|| StudyError::MissingKey(key.to_string()));
        fn parse_as<T: FromStr>(key: &str, v: &str) -> Result<T, StudyError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e: T::Err| StudyError::BadValue {
                key: key.to_string(),
                message: e.to_string(),
            })
        }

        let kind: ModelKind = parse_as("model", need("model")?)?;
        let params = need("params")?
            .split(',')
            .map(|p| parse_as::<f64>("params", p.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        let truth = ModelParams::from_coordinates(kind, &params).map_err(|e| StudyError::BadValue {
            key: "params".into(),
            message: e.to_string(),
        })?;
        let cells = need("cells")?
            .split(',')
            .map(|c| {
                let (s, k) = c.trim().split_once(':').ok_or_else(|| StudyError::BadValue {
                    key: "cells".into(),
                    message: format!("'{}' is not strategy:K", c.trim()),
                })?;
                Ok(StudyCell::new(s.trim(), parse_as("cells", k.trim())?))
            })
            .collect::<Result<Vec<_>, StudyError>>()?;
        let mut config = Self::new(
            truth,
            parse_as("n", need("n")?)?,
            parse_as("r", need("r")?)?,
            parse_as("replications", need("replications")?)?,
            cells,
        );
        config.iterations = parse_as("iterations", need("iterations")?)?;
        if let Some(v) = get("seed") {
            config.seed = parse_as("seed", v)?;
        }
        if let Some(v) = get("eps") {
            config.eps = parse_as("eps", v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Seed for stream `stream` of replication `replication`.
fn derived_seed(base: u64, stream: u64, replication: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.set_word_pos(2 * replication as u128);
    rng.next_u64()
}

/// Draws `n` variates, keeps the smallest `n - r` exactly and censors the rest
/// at the largest kept value.
pub fn simulate_type2_censored(
    model: &ModelParams,
    n: usize,
    r: usize,
    seed: u64,
) -> Result<Dataset, FitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        draws.push(draw(model, rng.sample(Open01))?);
    }
    censor_type2(draws, r)
}

/// Inverse-transform draw at uniform `u`.
fn draw(model: &ModelParams, u: f64) -> Result<f64, FitError> {
    let lower = if model.kind().nonnegative_support() {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    model.model().quantile_within(lower, f64::INFINITY, u)
}

/// The Type-II transformation on raw draws.
pub fn censor_type2(mut draws: Vec<f64>, r: usize) -> Result<Dataset, FitError> {
    let n = draws.len();
    if r >= n {
        return Err(FitError::InvalidConfig(format!("need r < n, got r = {r}, n = {n}")));
    }
    draws.sort_by(f64::total_cmp);
    let last = draws[n - r - 1];
    let mut obs = Vec::with_capacity(n);
    for &x in &draws[..n - r] {
        obs.push(IntervalObservation::exact(x)?);
    }
    for _ in 0..r {
        obs.push(IntervalObservation::right_censored(last)?);
    }
    Ok(Dataset::new(obs)?)
}

/// Maximum-likelihood reference for one replication: the converged exact-EM
/// fixed point where a closed-form E-step exists, the grid oracle otherwise.
pub fn reference_estimate(truth: &ModelParams, dataset: &Dataset) -> Result<ModelParams, FitError> {
    let kind = truth.kind();
    if kind.has_closed_form_estep() {
        let config = FitConfig::with_strategy("em")
            .eps(REFERENCE_EPS)
            .max_iterations(REFERENCE_MAX_ITERATIONS)
            .initial(*truth);
        let fit = run_fit(kind, dataset, &config).map_err(|f| f.error)?;
        if !fit.converged {
            return Err(FitError::InvalidConfig("reference EM did not converge".into()));
        }
        Ok(fit.estimate)
    } else {
        mle_grid_refine(kind, dataset, &search_box(truth))
    }
}

fn search_box(truth: &ModelParams) -> Vec<(f64, f64)> {
    let c = truth.coordinates();
    match truth {
        ModelParams::Normal(_) | ModelParams::Laplace(_) => {
            vec![(c[0] - 50.0 * c[1], c[0] + 50.0 * c[1]), (c[1] / 100.0, c[1] * 100.0)]
        }
        _ => c.iter().map(|&v| (v / 100.0, v * 100.0)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub strategy: String,
    pub k: usize,
    pub parameter: String,
    /// Mean of `estimate - reference`.
    pub bias: f64,
    /// Sample variance of `estimate - reference`.
    pub mse: f64,
    /// Mean of `(estimate - reference)^2`.
    pub mean_sq_diff: f64,
    /// Exact-EM MSE over this row's MSE; NaN without an `em` cell.
    pub sre: f64,
    /// Replications this cell could not be scored on.
    pub failures: usize,
    pub replications: usize,
    /// False when more than 1% of replications failed.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// Replications whose reference fit failed.
    pub reference_failures: usize,
}

pub const CSV_HEADER: &str = "strategy,k,parameter,bias,mse,sre,mean_sq_diff,failures,replications,valid";

impl StudyTable {
    pub fn row(&self, strategy: &str, k: usize, parameter: &str) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.k == k && r.parameter == parameter)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e},{},{:e},{},{},{}",
                r.strategy,
                r.k,
                r.parameter,
                r.bias,
                r.mse,
                if r.sre.is_nan() { String::new() } else { format!("{:e}", r.sre) },
                r.mean_sq_diff,
                r.failures,
                r.replications,
                r.valid
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8} {:>7} {:<10} {:>13} {:>13} {:>13} {:>8}\n",
            "strategy", "K", "parameter", "bias", "mse", "sre", "failures"
        );
        for r in &self.rows {
            let sre = if r.sre.is_nan() {
                "-".to_string()
            } else {
                format!("{:.6e}", r.sre)
            };
            let _ = writeln!(
                out,
                "{:<8} {:>7} {:<10} {:>13.6e} {:>13.6e} {:>13} {:>8}{}",
                r.strategy,
                r.k,
                r.parameter,
                r.bias,
                r.mse,
                sre,
                r.failures,
                if r.valid { "" } else { "  INVALID" }
            );
        }
        if self.reference_failures > 0 {
            let _ = writeln!(out, "reference fit failed in {} replication(s)", self.reference_failures);
        }
        out
    }
}

struct Replication {
    reference: Result<Vec<f64>, FitError>,
    cells: Vec<Result<Vec<f64>, FitError>>,
}

fn replicate(config: &StudyConfig, replication: usize) -> Replication {
    let kind = config.truth.kind();
    let seed = derived_seed(config.seed, 0, replication);
    let dataset = match simulate_type2_censored(&config.truth, config.n, config.r, seed) {
        Ok(d) => d,
        Err(e) => {
            return Replication {
                reference: Err(e.clone()),
                cells: vec![Err(e); config.cells.len()],
            }
        }
    };
    let reference = reference_estimate(&config.truth, &dataset).map(|p| p.coordinates());
    let cells = config
        .cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            run_fit(kind, &dataset, &config.cell_config(cell, i, replication))
                .map(|f| f.estimate.coordinates())
                .map_err(|f| f.error)
        })
        .collect();
    Replication { reference, cells }
}

/// Runs every replication (in parallel) and aggregates in replication order.
pub fn run_study(config: &StudyConfig) -> Result<StudyTable, StudyError> {
    config.validate()?;
    let outcomes: Vec<Replication> = (0..config.replications)
        .into_par_iter()
        .map(|rep| replicate(config, rep))
        .collect();
    let reference_failures = outcomes.iter().filter(|o| o.reference.is_err()).count();
    let names = config.truth.kind().parameter_names();

    let mut rows = Vec::new();
    for (ci, cell) in config.cells.iter().enumerate() {
        let scored: Vec<(&Vec<f64>, &Vec<f64>)> = outcomes
            .iter()
            .filter_map(|o| match (&o.reference, &o.cells[ci]) {
                (Ok(r), Ok(e)) => Some((r, e)),
                _ => None,
            })
            .collect();
        let failures = config.replications - scored.len();
        for (j, name) in names.iter().enumerate() {
            let diffs: Vec<f64> = scored.iter().map(|(r, e)| e[j] - r[j]).collect();
            let (bias, mse, msd) = moments(&diffs);
            rows.push(StudyRow {
                strategy: cell.strategy.clone(),
                k: cell.k,
                parameter: name.to_string(),
                bias,
                mse,
                mean_sq_diff: msd,
                sre: f64::NAN,
                failures,
                replications: config.replications,
                valid: failures * 100 <= config.replications,
            });
        }
    }

    let em_mse: Vec<(String, f64)> = rows
        .iter()
        .filter(|r| r.strategy == "em")
        .map(|r| (r.parameter.clone(), r.mse))
        .collect();
    for row in &mut rows {
        if row.strategy == "em" {
            row.sre = 1.0;
        } else if let Some((_, m)) = em_mse.iter().find(|(p, _)| *p == row.parameter) {
            row.sre = m / row.mse;
        }
    }
    Ok(StudyTable {
        rows,
        reference_failures,
    })
}

/// `(mean, sample variance, mean square)`; the variance is 0 below two values.
fn moments(x: &[f64]) -> (f64, f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let mean = pairwise_sum(x) / n;
    let centered: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if x.len() < 2 {
        0.0
    } else {
        pairwise_sum(&centered) / (n - 1.0)
    };
    let squares: Vec<f64> = x.iter().map(|v| v * v).collect();
    (mean, var, pairwise_sum(&squares) / n)
}

fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let (a, b) = x.split_at(x.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type2_examples() {
        let ds = censor_type2(vec![5.0, 2.0, 9.0], 1).unwrap();
        let got: Vec<_> = ds.iter().map(|o| (o.lower(), o.upper())).collect();
        assert_eq!(got, vec![(2.0, 2.0), (5.0, 5.0), (5.0, f64::INFINITY)]);
        assert!(censor_type2(vec![1.0, 2.0], 2).is_err());

        let truth = ModelParams::normal(50.0, 5.0).unwrap();
        let a = simulate_type2_censored(&truth, 20, 0, 9).unwrap();
        assert_eq!(a.exact_count(), 20);
        assert!(a.iter().zip(a.iter().skip(1)).all(|(x, y)| x.lower() <= y.lower()));
        assert_eq!(a, simulate_type2_censored(&truth, 20, 0, 9).unwrap());
        let b = simulate_type2_censored(&truth, 20, 5, 9).unwrap();
        assert_eq!(b.exact_count(), 15);
        assert_eq!(&a.observations()[..15], &b.observations()[..15]);
    }

    #[test]
    fn config_parsing() {
        let text = "model = normal\nparams = 50, 5\nn = 20\nr = 5 # censored\nreplications = 3\ncells = em:1, qem:100\niterations = 10\n";
        let c = StudyConfig::parse(text).unwrap();
        assert_eq!(c.cells, vec![StudyCell::new("em", 1), StudyCell::new("qem", 100)]);
        assert_eq!((c.n, c.r, c.seed), (20, 5, 1));
        let missing = text.replace("iterations = 10\n", "");
        assert_eq!(StudyConfig::parse(&missing), Err(StudyError::MissingKey("iterations".into())));
        assert!(matches!(StudyConfig::parse("bogus = 1"), Err(StudyError::UnknownKey(_))));
        assert!(matches!(StudyConfig::parse(&text.replace("r = 5", "r = 20")), Err(StudyError::Invalid(_))));
    }

    #[test]
    fn reference_cell_is_exactly_zero() {
        let truth = ModelParams::normal(50.0, 5.0).unwrap();
        let mut c = StudyConfig::new(truth, 20, 5, 6, vec![StudyCell::new("em", 1)]);
        c.iterations = REFERENCE_MAX_ITERATIONS;
        let t = run_study(&c).unwrap();
        for row in &t.rows {
            assert_eq!((row.bias, row.mse, row.mean_sq_diff, row.sre), (0.0, 0.0, 0.0, 1.0));
        }
    }

    #[test]
    fn study_is_deterministic() {
        let truth = ModelParams::rayleigh(10.0).unwrap();
        let cells = vec![StudyCell::new("mcem", 10), StudyCell::new("qem", 10)];
        let c = StudyConfig::new(truth, 20, 5, 4, cells);
        let (a, b) = (run_study(&c).unwrap(), run_study(&c).unwrap());
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.rows.iter().all(|r| r.sre.is_nan() && r.mse >= 0.0));
        assert!(a.to_csv().starts_with("strategy,k,parameter,bias,mse,sre"));
    }
}
