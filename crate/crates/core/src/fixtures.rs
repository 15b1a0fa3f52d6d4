//! Embedded reference datasets with the runs and reported values they are checked against.

use crate::data::{expand_grouped, Dataset, GroupedRow, IntervalObservation};
use crate::dist::{ModelKind, ModelParams};
use crate::engine::{run_fit, FitConfig, FitFailure, FitResult};
use crate::error::FitError;

pub const NAMES: [&str; 5] = ["leukemia", "gupta", "balakrishnan", "rayleigh20", "nelson-cracks"];

/// Remission times in weeks; `+` marks a censored time.
const LEUKEMIA: &str = "6,6,6,6+,7,9+,10,10+,11+,13,16,17+,19+,20+,22,23,25+,32+,32+,34+,35+";

const GUPTA: [f64; 7] = [1.613, 1.644, 1.663, 1.732, 1.740, 1.763, 1.778];

const BALAKRISHNAN: [f64; 18] = [
    32.00692, 37.75687, 43.84736, 46.26761, 46.90651, 47.26220, 47.28952, 47.59391, 48.06508,
    49.25429, 50.27790, 50.48675, 50.66167, 53.33585, 53.49258, 53.56681, 53.98112, 54.94154,
];

const RAYLEIGH20: [f64; 15] = [
    1.950, 2.295, 4.282, 4.339, 4.411, 4.460, 4.699, 5.319, 5.440, 5.777, 7.485, 7.620, 8.181,
    8.443, 10.627,
];

/// Inspection windows and failure counts for cracked parts.
pub const NELSON_CRACKS: [(f64, f64, u64); 9] = [
    (0.0, 6.12, 5),
    (6.12, 19.92, 16),
    (19.92, 29.64, 12),
    (29.64, 35.40, 18),
    (35.40, 39.72, 18),
    (39.72, 45.24, 2),
    (45.24, 52.32, 6),
    (52.32, 63.48, 17),
    (63.48, f64::INFINITY, 73),
];

/// A reported number and how to read it off an estimate.
#[derive(Debug, Clone, Copy)]
pub struct Reported {
    pub label: &'static str,
    pub value: f64,
    /// Decimal places shown in the source.
    pub decimals: usize,
    pub extract: fn(&ModelParams) -> f64,
}

impl Reported {
    pub fn measured(&self, params: &ModelParams) -> f64 {
        (self.extract)(params)
    }

    /// Whether `params` is within half a unit of the last reported digit.
    pub fn matches_rounded(&self, params: &ModelParams) -> bool {
        let half_unit = 0.5 * 10f64.powi(-(self.decimals as i32));
        (self.measured(params) - self.value).abs() <= half_unit * (1.0 + 1e-6)
    }
}

/// One reference iteration table column set: `rows[s-1]` holds the values at iteration `s`.
#[derive(Debug, Clone)]
pub struct ReportedTrace {
    pub labels: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub decimals: usize,
}

#[derive(Debug, Clone)]
pub struct FixtureRun {
    pub label: &'static str,
    pub kind: ModelKind,
    pub config: FitConfig,
    pub reported: Vec<Reported>,
    pub trace: Option<ReportedTrace>,
}

impl FixtureRun {
    pub fn run(&self, dataset: &Dataset) -> Result<FitResult, FitFailure> {
        run_fit(self.kind, dataset, &self.config)
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub dataset: Dataset,
    pub runs: Vec<FixtureRun>,
    /// Reported maximum-likelihood estimate, one entry per model fitted.
    pub mle: Vec<(ModelKind, Vec<f64>)>,
    /// Search box for the brute-force maximizer, per model.
    pub search_box: Vec<(ModelKind, Vec<(f64, f64)>)>,
}

pub fn all() -> Vec<Fixture> {
    NAMES.iter().map(|n| get(n).expect("builtin fixture")).collect()
}

pub fn get(name: &str) -> Result<Fixture, FitError> {
    match name.to_ascii_lowercase().as_str() {
        "leukemia" => Ok(leukemia()),
        "gupta" => Ok(gupta()),
        "balakrishnan" => Ok(balakrishnan()),
        "rayleigh20" => Ok(rayleigh20()),
        "nelson-cracks" | "nelson" => Ok(nelson_cracks()),
        _ => Err(FitError::InvalidConfig(format!(
            "unknown fixture '{name}' (expected one of {})",
            NAMES.join(", ")
        ))),
    }
}

/// Exact values followed by `censored` right-censored copies of the largest one.
pub fn type2_sample(exact: &[f64], censored: usize) -> Dataset {
    let last = exact.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut obs: Vec<_> = exact
        .iter()
        .map(|&x| IntervalObservation::exact(x).unwrap())
        .collect();
    obs.extend((0..censored).map(|_| IntervalObservation::right_censored(last).unwrap()));
    Dataset::new(obs).unwrap()
}

pub fn leukemia_dataset() -> Dataset {
    let obs = LEUKEMIA
        .split(',')
        .map(|t| match t.strip_suffix('+') {
            Some(x) => IntervalObservation::right_censored(x.parse().unwrap()),
            None => IntervalObservation::exact(t.parse().unwrap()),
        })
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
    Dataset::new(obs).unwrap()
}

pub fn nelson_dataset() -> Dataset {
    let rows: Vec<_> = NELSON_CRACKS
        .iter()
        .map(|&(a, b, c)| GroupedRow::new(a, b, c).unwrap())
        .collect();
    expand_grouped(&rows).unwrap()
}

fn coord(i: usize) -> fn(&ModelParams) -> f64 {
    match i {
        0 => |p| p.coordinates()[0],
        _ => |p| p.coordinates()[1],
    }
}

fn reported(label: &'static str, value: f64, decimals: usize, i: usize) -> Reported {
    Reported {
        label,
        value,
        decimals,
        extract: coord(i),
    }
}

/// Fixed-length runs that mirror a reference iteration table.
fn table_config(strategy: &str, initial: ModelParams) -> FitConfig {
    FitConfig::with_strategy(strategy)
        .k(1000)
        .eps(1e-14)
        .max_iterations(10)
        .initial(initial)
}

fn leukemia() -> Fixture {
    let mean = Reported {
        label: "sigma = 1/lambda",
        value: 39.89,
        decimals: 2,
        extract: |p| 1.0 / p.coordinates()[0],
    };
    Fixture {
        name: "leukemia",
        description: "remission times, 21 patients, 12 right-censored; exponential",
        dataset: leukemia_dataset(),
        runs: vec![FixtureRun {
            label: "em",
            kind: ModelKind::Exponential,
            config: FitConfig::with_strategy("em")
                .eps(1e-12)
                .max_iterations(1000)
                .initial(ModelParams::exponential(1.0).unwrap()),
            reported: vec![mean],
            trace: None,
        }],
        mle: vec![(ModelKind::Exponential, vec![1.0 / 39.89])],
        search_box: vec![(ModelKind::Exponential, vec![(1e-4, 1.0)])],
    }
}

fn gupta() -> Fixture {
    let init = ModelParams::normal(0.0, 1.0).unwrap();
    let em_rows = [
        (1.8467, 0.2968),
        (1.8058, 0.1931),
        (1.7761, 0.1370),
        (1.7593, 0.1070),
        (1.7504, 0.0919),
        (1.7459, 0.0848),
        (1.7439, 0.0816),
        (1.7429, 0.0802),
        (1.7425, 0.0796),
        (1.7424, 0.0793),
    ];
    let qem_rows = [
        (1.8467, 0.2966),
        (1.8057, 0.1930),
        (1.7760, 0.1369),
        (1.7593, 0.1069),
        (1.7503, 0.0919),
        (1.7459, 0.0848),
        (1.7439, 0.0816),
        (1.7429, 0.0802),
        (1.7425, 0.0796),
        (1.7424, 0.0793),
    ];
    let trace = |rows: &[(f64, f64)]| ReportedTrace {
        labels: vec!["mu", "sigma"],
        rows: rows.iter().map(|&(m, s)| vec![m, s]).collect(),
        decimals: 4,
    };
    Fixture {
        name: "gupta",
        description: "10 items, largest 3 censored at 1.778; normal",
        dataset: type2_sample(&GUPTA, 3),
        runs: vec![
            FixtureRun {
                label: "em",
                kind: ModelKind::Normal,
                config: table_config("em", init),
                reported: vec![reported("mu", 1.7424, 4, 0), reported("sigma", 0.0793, 4, 1)],
                trace: Some(trace(&em_rows)),
            },
            FixtureRun {
                label: "qem",
                kind: ModelKind::Normal,
                config: table_config("qem", init),
                reported: vec![reported("mu", 1.7424, 4, 0), reported("sigma", 0.0793, 4, 1)],
                trace: Some(trace(&qem_rows)),
            },
        ],
        mle: vec![(ModelKind::Normal, vec![1.742, 0.079])],
        search_box: vec![(ModelKind::Normal, vec![(1.0, 2.5), (0.01, 1.0)])],
    }
}

fn balakrishnan() -> Fixture {
    let sigma = [
        4.318817, 4.650584, 4.683749, 4.687064, 4.687395, 4.687429, 4.687432, 4.687432, 4.687432,
        4.687432,
    ];
    Fixture {
        name: "balakrishnan",
        description: "20 items, largest 2 censored at 54.94154; Laplace",
        dataset: type2_sample(&BALAKRISHNAN, 2),
        runs: vec![FixtureRun {
            label: "qem",
            kind: ModelKind::Laplace,
            config: table_config("qem", ModelParams::laplace(0.0, 1.0).unwrap()),
            reported: vec![
                reported("mu", 49.76609, 5, 0),
                reported("sigma", 4.687432, 6, 1),
            ],
            trace: Some(ReportedTrace {
                labels: vec!["mu", "sigma"],
                rows: sigma.iter().map(|&s| vec![49.76609, s]).collect(),
                decimals: 6,
            }),
        }],
        mle: vec![(ModelKind::Laplace, vec![49.76609, 4.68761])],
        search_box: vec![(ModelKind::Laplace, vec![(40.0, 60.0), (0.5, 20.0)])],
    }
}

fn rayleigh20() -> Fixture {
    let from_one = [
        5.3358, 5.9444, 6.0870, 6.1221, 6.1309, 6.1330, 6.1336, 6.1337, 6.1338, 6.1338,
    ];
    let from_ten = [
        7.2946, 6.4435, 6.2126, 6.1536, 6.1387, 6.1350, 6.1341, 6.1338, 6.1338, 6.1338,
    ];
    let run = |label, start: f64, rows: &[f64]| FixtureRun {
        label,
        kind: ModelKind::Rayleigh,
        config: table_config("qem", ModelParams::rayleigh(start).unwrap()),
        reported: vec![reported("beta", 6.1338, 4, 0)],
        trace: Some(ReportedTrace {
            labels: vec!["beta"],
            rows: rows.iter().map(|&b| vec![b]).collect(),
            decimals: 4,
        }),
    };
    Fixture {
        name: "rayleigh20",
        description: "20 simulated items, largest 5 censored at 10.627; Rayleigh",
        dataset: type2_sample(&RAYLEIGH20, 5),
        runs: vec![
            run("qem from beta=1", 1.0, &from_one),
            run("qem from beta=10", 10.0, &from_ten),
        ],
        mle: vec![(ModelKind::Rayleigh, vec![6.1341])],
        search_box: vec![(ModelKind::Rayleigh, vec![(0.5, 50.0)])],
    }
}

fn nelson_cracks() -> Fixture {
    let qem = |initial| {
        FitConfig::with_strategy("qem")
            .k(1000)
            .eps(1e-5)
            .max_iterations(500)
            .initial(initial)
    };
    Fixture {
        name: "nelson-cracks",
        description: "167 parts inspected at 8 times, grouped counts; Weibull and exponential",
        dataset: nelson_dataset(),
        runs: vec![
            FixtureRun {
                label: "qem weibull",
                kind: ModelKind::Weibull,
                config: qem(ModelParams::weibull(1.0, 1.0).unwrap()),
                reported: vec![
                    reported("lambda", 0.001674018, 9, 0),
                    reported("beta", 1.497657, 6, 1),
                ],
                trace: None,
            },
            FixtureRun {
                label: "qem exponential",
                kind: ModelKind::Exponential,
                config: qem(ModelParams::exponential(1.0).unwrap()),
                reported: vec![reported("lambda", 0.01209699, 8, 0)],
                trace: None,
            },
        ],
        mle: vec![
            (ModelKind::Weibull, vec![0.001674018, 1.497657]),
            (ModelKind::Exponential, vec![0.01209699]),
        ],
        search_box: vec![
            (ModelKind::Weibull, vec![(1e-6, 1.0), (0.2, 5.0)]),
            (ModelKind::Exponential, vec![(1e-4, 1.0)]),
        ],
    }
}
