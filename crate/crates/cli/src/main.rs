//! `tomosel`: simulate tomography experiments, fit competing state
//! models to count data, and rank them to flag failed assumptions.

mod io;
mod report;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tomosel::likelihood::{block_max_loglik, empirical_averages, BlockAverages, ExperimentRecord};
use tomosel::models::{
    aic, aicc, components, fit_model, rank_models, FittedModel, ModelError, ModelSpec,
    Observable, Scoring,
};
use tomosel::qstate::{bloch_to_density, BlochVector, DensityMatrix, MeasurementSetting, PauliAxis};
use tomosel::qubit_analytic::{standard_mle_qubit, AnalyticError, QubitSummary};
use tomosel::simulator::{
    monte_carlo_power, run_experiment, BlockOrdering, Schedule, SimulatorError, SourceConfig,
};

#[derive(Parser)]
#[command(
    name = "tomosel",
    version,
    about = "Detects drifting or setting-dependent sources in tomography count data by ranking candidate models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an experiment against a possibly drifting source
    Simulate(SimulateArgs),
    /// Fit models to a recorded experiment and rank them
    Analyze(AnalyzeArgs),
    /// Estimate detection power over a grid of drift rates
    Power(PowerArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleKind {
    /// Run each block's shots consecutively
    Blocked,
    /// Shuffle the per-shot setting assignment over the whole run
    Randomized,
}

impl From<ScheduleKind> for BlockOrdering {
    fn from(kind: ScheduleKind) -> Self {
        match kind {
            ScheduleKind::Blocked => BlockOrdering::Blocked,
            ScheduleKind::Randomized => BlockOrdering::Randomized,
        }
    }
}

#[derive(Args)]
struct SourceArgs {
    /// Number of qubits the source emits
    #[arg(long, default_value_t = 1)]
    qubits: u8,
    /// Blocks as setting:shots pairs, e.g. "X:500,Y:500" or "XX:500,XY:500".
    /// Defaults to six 500-shot blocks X,Y,Z,X,Y,Z (one qubit) or one
    /// 500-shot block per pair setting (two qubits)
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long, value_enum, default_value_t = ScheduleKind::Blocked)]
    schedule: ScheduleKind,
    /// Weight of the rotating pure component; 1-p is maximally mixed
    #[arg(long, default_value_t = 0.9)]
    p: f64,
    /// Initial phase of the source rotation, radians
    #[arg(long, default_value_t = 0.0)]
    phi0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Standard deviation of the per-shot phase step, radians
    #[arg(long = "drift-sigma", default_value_t = 0.0)]
    drift_sigma: f64,
    /// Output record path (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing output files
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input record path (JSON)
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated models: standard, per-block, per-setting, or
    /// mask:<group digits>[+<freed observables separated by '.'>],
    /// e.g. mask:000111+X.Y frees X and Y between two halves
    #[arg(long, default_value = "standard,per-block")]
    models: String,
    /// Rank with the small-sample corrected score
    #[arg(long)]
    aicc: bool,
    /// Use the single-qubit closed forms (standard and per-block only)
    #[arg(long)]
    analytic: bool,
    /// Write the report JSON here
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write per-block spin-up counts as CSV here
    #[arg(long = "plot-data")]
    plot_data: Option<PathBuf>,
    /// Overwrite existing output files
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Monte Carlo trials per grid point
    #[arg(long, default_value_t = 200)]
    trials: u64,
    /// Comma-separated drift-sigma values, e.g. "0,0.02,0.05"
    #[arg(long = "sigma-grid")]
    sigma_grid: String,
    /// Model set to rank in each trial (same syntax as analyze)
    #[arg(long, default_value = "standard,per-block")]
    models: String,
    /// Rank with the small-sample corrected score
    #[arg(long)]
    aicc: bool,
    /// Output CSV path; prints to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing output files
    #[arg(long)]
    force: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Analysis(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Analysis(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) | CliError::Analysis(msg) => {
                f.write_str(msg)
            }
        }
    }
}

impl From<io::IoError> for CliError {
    fn from(err: io::IoError) -> Self {
        match err {
            io::IoError::Write { .. } => CliError::Usage(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(err: ModelError) -> Self {
        CliError::Analysis(err.to_string())
    }
}

impl From<AnalyticError> for CliError {
    fn from(err: AnalyticError) -> Self {
        CliError::Analysis(err.to_string())
    }
}

impl From<SimulatorError> for CliError {
    fn from(err: SimulatorError) -> Self {
        match err {
            SimulatorError::Model(inner) => CliError::Analysis(inner.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Power(args) => cmd_power(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.code());
    }
}

fn ensure_writable(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Usage(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn parse_axis(c: char) -> Option<PauliAxis> {
    match c {
        'X' => Some(PauliAxis::X),
        'Y' => Some(PauliAxis::Y),
        'Z' => Some(PauliAxis::Z),
        _ => None,
    }
}

fn default_blocks(qubits: u8) -> &'static str {
    match qubits {
        2 => "XX:500,XY:500,XZ:500,YX:500,YY:500,YZ:500,ZX:500,ZY:500,ZZ:500",
        _ => "X:500,Y:500,Z:500,X:500,Y:500,Z:500",
    }
}

fn parse_blocks(args: &SourceArgs) -> Result<Vec<(MeasurementSetting, u64)>, CliError> {
    if !matches!(args.qubits, 1 | 2) {
        return Err(CliError::Usage(format!(
            "--qubits must be 1 or 2, got {}",
            args.qubits
        )));
    }
    let spec = args
        .blocks
        .as_deref()
        .unwrap_or_else(|| default_blocks(args.qubits));
    let mut blocks = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (setting_str, shots_str) = item.split_once(':').ok_or_else(|| {
            CliError::Usage(format!("block {item:?} is not of the form SETTING:SHOTS"))
        })?;
        let axes: Vec<PauliAxis> = setting_str
            .chars()
            .map(parse_axis)
            .collect::<Option<_>>()
            .ok_or_else(|| {
                CliError::Usage(format!("unknown setting {setting_str:?} in {item:?}"))
            })?;
        let setting = match (axes.as_slice(), args.qubits) {
            (&[a], 1) => MeasurementSetting::Single(a),
            (&[a, b], 2) => MeasurementSetting::Pair(a, b),
            _ => {
                return Err(CliError::Usage(format!(
                    "setting {setting_str:?} does not fit --qubits {}",
                    args.qubits
                )))
            }
        };
        let shots: u64 = shots_str.parse().map_err(|_| {
            CliError::Usage(format!("shot count {shots_str:?} in {item:?} is not a number"))
        })?;
        blocks.push((setting, shots));
    }
    Ok(blocks)
}

fn build_schedule(args: &SourceArgs) -> Result<Schedule, CliError> {
    let blocks = parse_blocks(args)?;
    Ok(Schedule::new(blocks, args.schedule.into())?)
}

fn parse_mask(item: &str, record: &ExperimentRecord) -> Result<ModelSpec, CliError> {
    let body = &item["mask:".len()..];
    let (group_part, free_part) = match body.split_once('+') {
        Some((groups, freed)) => (groups, Some(freed)),
        None => (body, None),
    };
    let grouping: Vec<usize> = group_part
        .chars()
        .map(|c| c.to_digit(10).map(|d| d as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| {
            CliError::Usage(format!(
                "mask grouping must be one digit (0-9) per block, got {group_part:?}"
            ))
        })?;
    if grouping.len() != record.blocks().len() {
        return Err(CliError::Usage(format!(
            "mask {item:?} lists {} blocks, the record has {}",
            grouping.len(),
            record.blocks().len()
        )));
    }
    let mut freed = BTreeSet::new();
    for name in free_part
        .unwrap_or("")
        .split('.')
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        let observable: Observable = name.parse().map_err(|_| {
            CliError::Usage(format!("unknown observable {name:?} in {item:?}"))
        })?;
        if observable.n_qubits() != record.n_qubits() as usize {
            return Err(CliError::Usage(format!(
                "observable {name} does not fit a {}-qubit record",
                record.n_qubits()
            )));
        }
        freed.insert(observable);
    }
    let shared: BTreeSet<Observable> = components(record.n_qubits())
        .into_iter()
        .filter(|obs| !freed.contains(obs))
        .collect();
    Ok(ModelSpec::masked(item, grouping, shared))
}

fn parse_models(list: &str, record: &ExperimentRecord) -> Result<Vec<ModelSpec>, CliError> {
    let n_blocks = record.blocks().len();
    let mut specs = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let spec = match item {
            "standard" => ModelSpec::standard(n_blocks),
            "per-block" => ModelSpec::per_block(n_blocks),
            "per-setting" => ModelSpec::per_setting(record),
            masked if masked.starts_with("mask:") => parse_mask(masked, record)?,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown model {other:?}; expected standard, per-block, per-setting, or mask:<spec>"
                )))
            }
        };
        specs.push(spec);
    }
    if specs.len() < 2 {
        return Err(CliError::Usage(
            "at least two models are needed for a comparison".to_string(),
        ));
    }
    Ok(specs)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let schedule = build_schedule(&args.source)?;
    let cfg = SourceConfig::new(
        args.source.p,
        args.source.phi0,
        args.drift_sigma,
        args.source.seed,
    )?;
    let record = run_experiment(&cfg, &schedule)?;
    ensure_writable(&args.out, args.force)?;
    io::write_record(&args.out, &record)?;
    println!(
        "wrote {} ({} blocks, {} shots)",
        args.out.display(),
        record.blocks().len(),
        record.total_shots()
    );
    Ok(())
}

/// Closed-form single-qubit fits, bypassing the generic optimizer.
fn analytic_fits(
    record: &ExperimentRecord,
    specs: &[ModelSpec],
    scoring: Scoring,
) -> Result<Vec<FittedModel<f64>>, CliError> {
    let summary = QubitSummary::<f64>::from_record(record)?;
    let n_samples = record.total_shots();
    let mut out = Vec::new();
    for spec in specs {
        let (ln_likelihood, param_count, estimates) = match spec.label.as_str() {
            "standard" => {
                let fit = standard_mle_qubit(&summary);
                (fit.ln_likelihood, fit.param_count, vec![fit.state])
            }
            "per-block" => {
                let mut states = Vec::new();
                let mut lnl = 0.0;
                for block in record.blocks() {
                    lnl += block_max_loglik::<f64>(block);
                    let BlockAverages::Single { axis, mean } =
                        empirical_averages::<f64>(block).map_err(|e| {
                            CliError::Analysis(e.to_string())
                        })?
                    else {
                        unreachable!("single-qubit record");
                    };
                    let mut b = [0.0; 3];
                    b[axis.index()] = mean;
                    let state = DensityMatrix::new(
                        bloch_to_density(&BlochVector::new(b[0], b[1], b[2]))
                            .matrix()
                            .clone(),
                    )
                    .expect("block average lies in the ball");
                    states.push(state);
                }
                (lnl, record.blocks().len(), states)
            }
            other => {
                return Err(CliError::Analysis(format!(
                    "the analytic path covers standard and per-block, not {other:?}"
                )))
            }
        };
        let omega = match scoring {
            Scoring::Aic => aic(ln_likelihood, param_count),
            Scoring::Aicc => aicc(ln_likelihood, param_count, n_samples)?,
        };
        out.push(FittedModel {
            spec: spec.clone(),
            estimates,
            ln_likelihood,
            param_count,
            omega,
            scoring,
            converged: true,
            notes: Vec::new(),
        });
    }
    Ok(out)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let (record, input_sha256) = io::read_record(&args.input)?;
    let specs = parse_models(&args.models, &record)?;
    let scoring = if args.aicc { Scoring::Aicc } else { Scoring::Aic };

    let mut excluded = Vec::new();
    let fitted = if args.analytic {
        analytic_fits(&record, &specs, scoring)?
    } else {
        let mut fitted = Vec::new();
        for spec in &specs {
            match fit_model::<f64>(spec, &record, scoring) {
                Ok(fit) => fitted.push(fit),
                Err(err) => excluded.push(report::ExcludedModel {
                    name: spec.label.clone(),
                    note: err.to_string(),
                }),
            }
        }
        fitted
    };
    let ranking = rank_models(fitted).map_err(|err| {
        let mut msg = err.to_string();
        for skip in &excluded {
            msg.push_str(&format!("; {} excluded: {}", skip.name, skip.note));
        }
        CliError::Analysis(msg)
    })?;

    let doc = report::build_report(
        &ranking,
        record.total_shots(),
        excluded,
        report::Provenance {
            input_sha256,
            seed: record.metadata().seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    );
    print!("{}", report::render_table(&doc, scoring));
    if let Some(path) = &args.report {
        ensure_writable(path, args.force)?;
        io::write_text(path, &report::report_json(&doc))?;
    }
    if let Some(path) = &args.plot_data {
        ensure_writable(path, args.force)?;
        io::write_text(path, &report::plot_csv(&record))?;
    }
    Ok(())
}

fn cmd_power(args: PowerArgs) -> Result<(), CliError> {
    let schedule = build_schedule(&args.source)?;
    let sigmas: Vec<f64> = args
        .sigma_grid
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad sigma value {s:?} in --sigma-grid")))
        })
        .collect::<Result<_, _>>()?;
    if sigmas.is_empty() {
        return Err(CliError::Usage("--sigma-grid lists no values".to_string()));
    }
    let scoring = if args.aicc { Scoring::Aicc } else { Scoring::Aic };

    // A throwaway frozen-source record supplies the block structure that
    // model parsing validates against.
    let probe_cfg = SourceConfig::new(args.source.p, args.source.phi0, 0.0, args.source.seed)?;
    let probe = run_experiment(&probe_cfg, &schedule)?;
    let specs = parse_models(&args.models, &probe)?;

    let mut csv = String::from("sigma,fraction,std_error\n");
    for &sigma in &sigmas {
        let cfg = SourceConfig::new(args.source.p, args.source.phi0, sigma, args.source.seed)?;
        let estimate = monte_carlo_power(&cfg, &schedule, &specs, scoring, args.trials)?;
        csv.push_str(&format!(
            "{},{},{}\n",
            sigma, estimate.fraction, estimate.std_error
        ));
    }
    match &args.out {
        Some(path) => {
            ensure_writable(path, args.force)?;
            io::write_text(path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
