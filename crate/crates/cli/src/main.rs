use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qem::data::{expand_grouped, parse_grouped_csv, parse_interval_csv};
use qem::engine::{run_fit, FitConfig, FitFailure, FitResult, GridScheme, StrategyRegistry};
use qem::fixtures;
use qem::oracle::mle_grid_refine;
use qem::simulation::{run_study, StudyConfig};
use qem::{Dataset, FitError, ModelKind, ModelParams, StudyError};

// Write to stdout, ignoring a closed pipe.
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

/// Exit status for malformed flags or configuration.
const EXIT_USAGE: u8 = 2;
/// Exit status for unreadable or invalid data.
const EXIT_DATA: u8 = 3;
/// Exit status for a fit that broke down.
const EXIT_FIT: u8 = 4;

#[derive(Parser)]
#[command(name = "qem", version, about = "EM, Monte Carlo EM and quantile EM for censored lifetime data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to interval or grouped data.
    Fit(FitArgs),
    /// Run a Monte Carlo study described by a key = value config file.
    Simulate(SimulateArgs),
    /// Replay a built-in reference dataset against its reported values.
    Fixtures(FixturesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(clap::Args)]
struct FitArgs {
    #[arg(long)]
    model: ModelKind,
    /// CSV of `lower,upper` rows, or `lower,upper,count` with --grouped.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    grouped: bool,
    #[arg(long, default_value = "qem", value_parser = strategy_name)]
    strategy: String,
    /// Quantiles or draws per observation.
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long, default_value = "midpoint")]
    scheme: GridScheme,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Starting values in coordinate order, e.g. `1,1`.
    #[arg(long)]
    init: Option<String>,
    /// Print every iterate.
    #[arg(long)]
    trace: bool,
    #[arg(long, value_enum, default_value = "text")]
    output: Output,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for study.csv and study.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct FixturesArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(fixtures::NAMES))]
    name: String,
}

fn strategy_name(s: &str) -> Result<String, String> {
    let registry = StrategyRegistry::global();
    registry
        .get(s)
        .map(|st| st.name().to_string())
        .map_err(|_| format!("expected one of {}", registry.names().join(", ")))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn fit_error_code(e: &FitError) -> u8 {
    match e {
        FitError::Data(_) => EXIT_DATA,
        FitError::InvalidConfig(_)
        | FitError::InvalidParams(_)
        | FitError::UnknownStrategy(_)
        | FitError::UnsupportedStrategy { .. }
        | FitError::ModelMismatch(..) => EXIT_USAGE,
        _ => EXIT_FIT,
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        Failure::new(fit_error_code(&e), e.to_string())
    }
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        let code = match &e {
            StudyError::Fit(f) => fit_error_code(f),
            _ => EXIT_USAGE,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fixtures(args) => cmd_fixtures(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qem: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_text(path: &Path, code: u8) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(code, format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path, grouped: bool) -> Result<Dataset, Failure> {
    let text = read_text(path, EXIT_DATA)?;
    let parsed = if grouped {
        parse_grouped_csv(&text).and_then(|rows| expand_grouped(&rows))
    } else {
        parse_interval_csv(&text)
    };
    parsed.map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn parse_init(kind: ModelKind, text: &str) -> Result<ModelParams, Failure> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::new(EXIT_USAGE, format!("--init: {e}")))?;
    ModelParams::from_coordinates(kind, &values)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("--init: {e}")))
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    let dataset = load_dataset(&args.data, args.grouped)?;
    let mut config = FitConfig::with_strategy(&args.strategy)
        .k(args.k)
        .scheme(args.scheme)
        .eps(args.eps)
        .max_iterations(args.max_iter);
    if let Some(seed) = args.seed {
        config = config.seed(seed);
    }
    if let Some(init) = &args.init {
        config = config.initial(parse_init(args.model, init)?);
    }
    match run_fit(args.model, &dataset, &config) {
        Ok(result) => {
            match args.output {
                Output::Json => outln!("{}", to_json(&result)),
                Output::Text => out!("{}", fit_report(&result, &config, args.trace)),
            }
            Ok(())
        }
        Err(FitFailure { error, partial }) => {
            if let (Some(p), true, Output::Text) = (&partial, args.trace, args.output) {
                out!("{}", trace_table(p));
            }
            let mut f = Failure::from(error);
            if let Some(p) = partial {
                f.message = format!("{} (after {} iteration(s))", f.message, p.iterations);
            }
            Err(f)
        }
    }
}

fn to_json(result: &FitResult) -> String {
    serde_json::to_string_pretty(result).expect("fit results serialize")
}

fn num(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e7) {
        format!("{x:.9e}")
    } else {
        format!("{x:.10}")
    }
}

fn fit_report(result: &FitResult, config: &FitConfig, trace: bool) -> String {
    let kind = result.estimate.kind();
    let mut out = String::new();
    out += &format!("model       {kind}\n");
    out += &format!("strategy    {}", result.strategy);
    if result.strategy != "em" {
        out += &format!(" (K = {}", config.k);
        if result.strategy == "qem" {
            out += &format!(", {} grid", config.scheme);
        }
        out += ")";
    }
    out += "\n";
    for (name, v) in kind.parameter_names().iter().zip(result.estimate.coordinates()) {
        out += &format!("{name:<11} {}\n", num(v));
    }
    out += &format!("iterations  {}\n", result.iterations);
    out += &format!("converged   {}\n", result.converged);
    if let Some(seed) = result.seed {
        out += &format!("seed        {seed}\n");
    }
    if let Some(ll) = result.loglik_trace.last() {
        out += &format!("loglik      {}\n", num(*ll));
    }
    if trace {
        out += "\n";
        out += &trace_table(result);
    }
    out
}

fn trace_table(result: &FitResult) -> String {
    let names = result.estimate.kind().parameter_names();
    let mut out = format!("{:>5}", "s");
    for n in names {
        out += &format!(" {n:>18}");
    }
    out += &format!(" {:>18}\n", "loglik");
    for (s, (p, ll)) in result.trace.iter().zip(&result.loglik_trace).enumerate() {
        out += &format!("{s:>5}");
        for v in p.coordinates() {
            out += &format!(" {:>18}", num(v));
        }
        out += &format!(" {:>18}\n", num(*ll));
    }
    out
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let text = read_text(&args.config, EXIT_USAGE)?;
    let config = StudyConfig::parse(&text)?;
    let table = run_study(&config)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", args.out.display())))?;
    for (file, body) in [("study.csv", table.to_csv()), ("study.txt", table.to_text())] {
        let path = args.out.join(file);
        fs::write(&path, body).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    }
    for cell in &config.cells {
        let rows: Vec<_> = table
            .rows
            .iter()
            .filter(|r| r.strategy == cell.strategy && r.k == cell.k)
            .collect();
        let mut line = format!("{} K={}:", cell.strategy, cell.k);
        for r in &rows {
            line += &format!(" {} mse={:.3e}", r.parameter, r.mse);
        }
        if let Some(r) = rows.first() {
            line += &format!(", failures {}/{}", r.failures, r.replications);
            if !r.valid {
                line += " (invalid: more than 1% failed)";
            }
        }
        outln!("{line}");
    }
    if table.reference_failures > 0 {
        outln!("reference fit failed in {} replication(s)", table.reference_failures);
    }
    outln!("wrote {}", args.out.join("study.csv").display());
    Ok(())
}

fn cmd_fixtures(args: FixturesArgs) -> Result<(), Failure> {
    let fixture = fixtures::get(&args.name)?;
    outln!("{}: {}", fixture.name, fixture.description);
    for run in &fixture.runs {
        let result = run.run(&fixture.dataset).map_err(|f| Failure::from(f.error))?;
        outln!();
        outln!(
            "[{}] {} iteration(s), converged = {}",
            run.label, result.iterations, result.converged
        );
        if let Some(trace) = &run.trace {
            let mut head = format!("{:>4}", "s");
            for l in &trace.labels {
                head += &format!(" {:>12} {:>12}", format!("{l} ref"), l);
            }
            outln!("{head}");
            for (i, row) in trace.rows.iter().enumerate() {
                let Some(ours) = result.trace.get(i + 1) else { break };
                let mut line = format!("{:>4}", i + 1);
                for (r, o) in row.iter().zip(ours.coordinates()) {
                    line += &format!(" {:>12.*} {:>12.*}", trace.decimals, r, trace.decimals, o);
                }
                outln!("{line}");
            }
        }
        for rep in &run.reported {
            let ours = rep.measured(&result.estimate);
            outln!(
                "{:<18} reported {:<12} ours {:<14.*} {}",
                rep.label,
                rep.value,
                rep.decimals + 2,
                ours,
                if rep.matches_rounded(&result.estimate) { "match" } else { "differs" }
            );
        }
    }
    outln!();
    for ((kind, bounds), (_, reported)) in fixture.search_box.iter().zip(&fixture.mle) {
        let mle = mle_grid_refine(*kind, &fixture.dataset, bounds)?;
        let ours: Vec<String> = mle.coordinates().iter().map(|v| num(*v)).collect();
        let theirs: Vec<String> = reported.iter().map(|v| v.to_string()).collect();
        outln!(
            "{kind} mle (grid oracle) [{}], reported [{}]",
            ours.join(", "),
            theirs.join(", ")
        );
    }
    Ok(())
}
