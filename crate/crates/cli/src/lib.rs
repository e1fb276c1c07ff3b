//! Command implementations behind the `lbfs` binary.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowshop::gantt::Gantt;
use flowshop::instance_io::{parse_carlier_neron, InstanceIoError};
use flowshop::report::{curve_table, mean_curve, summary_table, BatchSummary, CurveError};
use flowshop::woa::ParamError;
use flowshop::{
    bundled_bus_instance, load_instance, run_iwoa, run_woa, save_instance, verify_schedule, Algorithm, Instance,
    IwoaParams, RunReport, WoaParams,
};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INVALID: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Instance { path: PathBuf, source: InstanceIoError },
    #[error("invalid parameters: {0}")]
    Params(#[from] ParamError),
    #[error("{path}: not a run report: {source}")]
    Report { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("{0}")]
    Usage(String),
    #[error("schedule fails verification: {0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_INVALID,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lbfs", version, about = "Limited-buffer flow shop scheduling with whale optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one seeded optimization and write its report.
    Solve(SolveArgs),
    /// Run seeded batches and summarize optimum/worst/average metrics.
    Bench(BenchArgs),
    /// Render the schedule of a report as a Gantt chart.
    Gantt(GanttArgs),
    /// Tabulate best-so-far curves of one or more reports.
    Curve(CurveArgs),
    /// Instance file utilities.
    #[command(subcommand)]
    Instance(InstanceCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Woa,
    Iwoa,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Woa => Algorithm::Woa,
            AlgoArg::Iwoa => Algorithm::Iwoa,
        }
    }
}

/// Optimizer parameters; unset flags keep the library defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Maximum number of generations.
    #[arg(long)]
    pub r#gen: Option<usize>,
    /// Population size.
    #[arg(long)]
    pub np: Option<usize>,
    /// Probability threshold of the spiral move.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Levy exponent.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Congestion degree below which opposition-based learning fires.
    #[arg(long)]
    pub congestion_threshold: Option<f64>,
    /// Elite share kept out of opposition-based learning.
    #[arg(long)]
    pub elite_frac: Option<f64>,
    /// Initial annealing temperature (default: a tenth of the initial best).
    #[arg(long)]
    pub t0: Option<f64>,
    /// Geometric cooling factor.
    #[arg(long)]
    pub cooling: Option<f64>,
    /// Wrap the Levy update in an absolute value.
    #[arg(long)]
    pub literal_abs: bool,
}

impl ParamArgs {
    pub fn woa(&self) -> WoaParams {
        let d = WoaParams::default();
        WoaParams {
            population: self.np.unwrap_or(d.population),
            max_generations: self.r#gen.unwrap_or(d.max_generations),
            spiral_choice_prob: self.pi.unwrap_or(d.spiral_choice_prob),
            ..d
        }
    }

    pub fn iwoa(&self) -> IwoaParams {
        let d = IwoaParams::default();
        IwoaParams {
            woa: self.woa(),
            levy_gamma: self.gamma.unwrap_or(d.levy_gamma),
            congestion_threshold: self.congestion_threshold.unwrap_or(d.congestion_threshold),
            elite_fraction: self.elite_frac.unwrap_or(d.elite_fraction),
            sa_initial_temp: self.t0.or(d.sa_initial_temp),
            sa_cooling: self.cooling.unwrap_or(d.sa_cooling),
            literal_abs: self.literal_abs,
        }
    }

    pub fn run(&self, algo: Algorithm, inst: &Instance, seed: u64) -> Result<RunReport, ParamError> {
        match algo {
            Algorithm::Woa => run_woa(inst, &self.woa(), seed),
            Algorithm::Iwoa => run_iwoa(inst, &self.iwoa(), seed),
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.iwoa().validate()
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file; the bundled bus instance when omitted.
    pub instance: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "iwoa")]
    pub algo: AlgoArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Record the wall-clock duration in the report (makes it
    /// non-reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SummaryFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Instance file; the bundled bus instance when omitted.
    pub instance: Option<PathBuf>,
    /// Algorithms to run, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "woa,iwoa")]
    pub algo: Vec<AlgoArg>,
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    /// Base seed; run `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Concurrent runs; all cores when omitted.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Machine-readable summary file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format of the machine-readable summary.
    #[arg(long, value_enum, default_value = "json")]
    pub format: SummaryFormat,
    /// Directory receiving every individual run report.
    #[arg(long)]
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChartFormat {
    Svg,
    Json,
}

#[derive(Debug, Args)]
pub struct GanttArgs {
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "svg")]
    pub format: ChartFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Emit the mean curve per algorithm instead of one column per report.
    #[arg(long)]
    pub average: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum InstanceCommand {
    /// Write the bundled bus instance.
    Bus {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an instance file and print a short description.
    Validate { path: PathBuf },
    /// Convert a Carlier–Néron style text file (`n m`, machine counts, then
    /// an n×m processing-time matrix).
    ConvertCn {
        path: PathBuf,
        /// Capacity given to every intermediate buffer.
        #[arg(long, default_value_t = 0)]
        buffer: usize,
        /// Instance name; the file stem when omitted.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_owned(),
            source,
        }),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

pub fn load(path: Option<&Path>) -> Result<Instance, CliError> {
    match path {
        None => Ok(bundled_bus_instance()),
        Some(p) => load_instance(&read(p)?).map_err(|source| CliError::Instance {
            path: p.to_owned(),
            source,
        }),
    }
}

pub fn read_report(path: &Path) -> Result<RunReport, CliError> {
    serde_json::from_str(&read(path)?).map_err(|source| CliError::Report {
        path: path.to_owned(),
        source,
    })
}

pub fn report_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize") + "\n"
}

fn check_feasible(inst: &Instance, report: &RunReport) -> Result<(), CliError> {
    let violations = verify_schedule(inst, &report.schedule);
    match violations.first() {
        None => Ok(()),
        Some(v) => Err(CliError::Infeasible(v.to_string())),
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<RunReport, CliError> {
    let inst = load(args.instance.as_deref())?;
    let started = Instant::now();
    let mut report = args.params.run(args.algo.into(), &inst, args.seed)?;
    if args.timing {
        report.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    }
    check_feasible(&inst, &report)?;
    write(args.out.as_deref(), &report_json(&report))?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct BenchOutput<'a> {
    instance: &'a str,
    runs: usize,
    base_seed: u64,
    summaries: &'a [BatchSummary],
}

/// Runs `runs` seeds per algorithm, seeds `base + i`, in input order.
pub fn run_batch(
    inst: &Instance,
    params: &ParamArgs,
    algo: Algorithm,
    runs: usize,
    base_seed: u64,
) -> Result<Vec<RunReport>, ParamError> {
    (0..runs as u64)
        .into_par_iter()
        .map(|i| params.run(algo, inst, base_seed + i))
        .collect()
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BatchSummary>, CliError> {
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    args.params.validate()?;
    let inst = load(args.instance.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut summaries = Vec::new();
    for &algo in &args.algo {
        let algo: Algorithm = algo.into();
        let reports = pool.install(|| run_batch(&inst, &args.params, algo, args.runs, args.seed))?;
        for r in &reports {
            check_feasible(&inst, r)?;
        }
        if let Some(dir) = &args.reports {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.clone(),
                source,
            })?;
            for r in &reports {
                let file = dir.join(format!("{}-{}.json", serde_json::to_value(algo).unwrap().as_str().unwrap(), r.seed));
                write(Some(&file), &report_json(r))?;
            }
        }
        summaries.push(BatchSummary::from_reports(algo, &reports));
    }

    let table = summary_table(&summaries);
    write(None, &table)?;
    if let Some(out) = &args.out {
        let text = match args.format {
            SummaryFormat::Text => table,
            SummaryFormat::Json => {
                let body = BenchOutput {
                    instance: inst.name(),
                    runs: args.runs,
                    base_seed: args.seed,
                    summaries: &summaries,
                };
                serde_json::to_string_pretty(&body).expect("summaries serialize") + "\n"
            }
        };
        write(Some(out), &text)?;
    }
    Ok(summaries)
}

pub fn cmd_gantt(args: &GanttArgs) -> Result<Gantt, CliError> {
    let report = read_report(&args.report)?;
    let chart = Gantt::from_schedule(&report.schedule);
    let text = match args.format {
        ChartFormat::Svg => chart.to_svg(),
        ChartFormat::Json => chart.to_json(),
    };
    write(args.out.as_deref(), &text)?;
    Ok(chart)
}

pub fn cmd_curve(args: &CurveArgs) -> Result<String, CliError> {
    let reports = args
        .reports
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>, _>>()?;
    let table = if args.average {
        let mut algos: Vec<Algorithm> = reports.iter().map(|r| r.algorithm).collect();
        algos.sort_unstable();
        algos.dedup();
        let means = algos
            .iter()
            .map(|&a| {
                let curves: Vec<&[f64]> = reports.iter().filter(|r| r.algorithm == a).map(|r| &r.curve[..]).collect();
                Ok((format!("{}_mean", a.label()), mean_curve(&curves)?))
            })
            .collect::<Result<Vec<_>, CurveError>>()?;
        let columns: Vec<(String, &[f64])> = means.iter().map(|(n, c)| (n.clone(), &c[..])).collect();
        curve_table(&columns)?
    } else {
        let columns: Vec<(String, &[f64])> = reports
            .iter()
            .map(|r| (format!("{}_seed{}", r.algorithm.label(), r.seed), &r.curve[..]))
            .collect();
        curve_table(&columns)?
    };
    write(args.out.as_deref(), &table)?;
    Ok(table)
}

pub fn cmd_instance(cmd: &InstanceCommand) -> Result<(), CliError> {
    match cmd {
        InstanceCommand::Bus { out } => write(out.as_deref(), &save_instance(&bundled_bus_instance())),
        InstanceCommand::Validate { path } => {
            let inst = load(Some(path))?;
            let machines: Vec<String> = (0..inst.stage_count()).map(|s| inst.machines(s).to_string()).collect();
            write(
                None,
                &format!(
                    "{}: {} jobs, {} stages, machines [{}], {} properties\n",
                    inst.name(),
                    inst.job_count(),
                    inst.stage_count(),
                    machines.join(", "),
                    inst.property_count()
                ),
            )
        }
        InstanceCommand::ConvertCn { path, buffer, name, out } => {
            let name = name.clone().unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "instance".into())
            });
            let inst = parse_carlier_neron(&read(path)?, &name, *buffer).map_err(|source| CliError::Instance {
                path: path.clone(),
                source,
            })?;
            write(out.as_deref(), &save_instance(&inst))
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a).map(drop),
        Command::Bench(a) => cmd_bench(a).map(drop),
        Command::Gantt(a) => cmd_gantt(a).map(drop),
        Command::Curve(a) => cmd_curve(a).map(drop),
        Command::Instance(c) => cmd_instance(c),
    }
}
