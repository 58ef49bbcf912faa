//! Command-line front-end for the monotone-regression library.
//!
//! One job per invocation. `fit` and `project` solve on an ingested grid CSV
//! and certify the result, `converge` refines a continuous field over dyadic
//! grids until a certified error bound meets the target, `point` evaluates
//! the continuous fit at a single point, `verify` replays a fit against
//! random monotone competitors under a convexity spec, and `run` executes a
//! job described by a JSON file. Exit codes: 0 success, 1 input or usage
//! error, 2 numerical-certificate failure.

mod builtins;
mod jobs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jobs::{CommandKind, JobConfig, NormArg};
use monoreg::Result;

#[derive(Parser)]
#[command(
    name = "monoreg",
    version,
    about = "Monotone regression on boxes: exact grid fits, certificates, refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit grid data to the nearest monotone function and certify optimality.
    Fit(FitArgs),
    /// Project cell-constant data on an equidistant grid; the fitted values
    /// describe the continuous projection of its lift.
    Project(FitArgs),
    /// Refine dyadic grids until a certified error bound meets the target.
    Converge(ConvergeArgs),
    /// Evaluate the continuous fit at one point by local refinement.
    Point(PointArgs),
    /// Check a fit against random monotone competitors for a convexity spec.
    Verify(VerifyArgs),
    /// Execute a job described by a JSON config file.
    Run(RunArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with header `i1,...,id,value[,weight]`.
    #[arg(long = "in", value_name = "CSV")]
    input: PathBuf,
    /// Sidecar JSON describing the grid [default: the input with extension `json`].
    #[arg(long, value_name = "JSON")]
    meta: Option<PathBuf>,
    /// Per-axis directions, e.g. `+1,0,-1` [default: the sidecar's signature].
    #[arg(long, value_name = "SIG")]
    sig: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Certificate tolerance on the normalized optimality conditions.
    #[arg(long, value_name = "TOL")]
    tol: Option<f64>,
    /// Fitted CSV path; the certificate JSON lands next to it as `.cert.json`.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Args)]
struct SourceArgs {
    /// Builtin analytic field: paraboloid1d, monotone-plane, saddle, steps1d, steps2d.
    #[arg(long, value_name = "NAME", conflicts_with = "input")]
    builtin: Option<String>,
    /// Fine-grid CSV treated as a cell-constant field.
    #[arg(long = "in", value_name = "CSV")]
    input: Option<PathBuf>,
    /// Sidecar JSON for `--in` [default: the input with extension `json`].
    #[arg(long, value_name = "JSON")]
    meta: Option<PathBuf>,
    /// Box for a builtin as per-axis `lo:hi` pairs, e.g. `0:1,0:2` [default: unit].
    #[arg(long = "box", value_name = "SPEC")]
    box_spec: Option<String>,
    /// Per-axis directions, e.g. `+1,0,-1`.
    #[arg(long, value_name = "SIG")]
    sig: Option<String>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Norm for discretization errors and bounds.
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    norm: NormArg,
    /// Dyadic levels `lo..hi`, or a single top level.
    #[arg(long, value_name = "RANGE", default_value = "2..8")]
    levels: String,
    /// Certified bound at which refinement stops.
    #[arg(long, value_name = "BOUND", default_value_t = 1e-2)]
    target: f64,
    /// Report JSON path; the plot-ready CSV lands next to it as `.csv`.
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Probe coordinates, comma separated.
    #[arg(long, value_name = "X1,...,XD", value_delimiter = ',', required = true)]
    at: Vec<f64>,
    /// Required agreement between successive refinements.
    #[arg(long, value_name = "TOL")]
    tol: Option<f64>,
    /// Report JSON path [default: stdout].
    #[arg(long, value_name = "JSON")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Convexity spec: square, entropy, exp, neglog.
    #[arg(long, value_name = "SPEC", default_value = "square")]
    bregman: String,
    /// Number of random monotone competitors.
    #[arg(long, value_name = "N", default_value_t = 200)]
    trials: usize,
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Report JSON path [default: stdout].
    #[arg(long, value_name = "JSON")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Job description JSON; the schema mirrors the other subcommands' flags.
    #[arg(long, value_name = "JSON")]
    config: PathBuf,
}

impl Cmd {
    fn into_config(self) -> Result<JobConfig> {
        Ok(match self {
            Cmd::Fit(a) => fit_config(CommandKind::Fit, a),
            Cmd::Project(a) => fit_config(CommandKind::Project, a),
            Cmd::Converge(a) => JobConfig {
                command: CommandKind::Converge,
                input: a.source.input,
                meta: a.source.meta,
                builtin: a.source.builtin,
                sig: a.source.sig,
                box_spec: a.source.box_spec,
                norm: Some(a.norm),
                levels: Some(a.levels),
                target: Some(a.target),
                tol: None,
                bregman: None,
                trials: None,
                seed: 0,
                at: None,
                out: Some(a.out),
            },
            Cmd::Point(a) => JobConfig {
                command: CommandKind::Point,
                input: a.source.input,
                meta: a.source.meta,
                builtin: a.source.builtin,
                sig: a.source.sig,
                box_spec: a.source.box_spec,
                norm: None,
                levels: None,
                target: None,
                tol: a.tol,
                bregman: None,
                trials: None,
                seed: 0,
                at: Some(a.at),
                out: a.out,
            },
            Cmd::Verify(a) => JobConfig {
                command: CommandKind::Verify,
                input: Some(a.data.input),
                meta: a.data.meta,
                builtin: None,
                sig: a.data.sig,
                box_spec: None,
                norm: None,
                levels: None,
                target: None,
                tol: None,
                bregman: Some(a.bregman),
                trials: Some(a.trials),
                seed: a.seed,
                at: None,
                out: a.out,
            },
            Cmd::Run(a) => JobConfig::load(&a.config)?,
        })
    }
}

fn fit_config(command: CommandKind, a: FitArgs) -> JobConfig {
    JobConfig {
        command,
        input: Some(a.data.input),
        meta: a.data.meta,
        builtin: None,
        sig: a.data.sig,
        box_spec: None,
        norm: None,
        levels: None,
        target: None,
        tol: a.tol,
        bregman: None,
        trials: None,
        seed: 0,
        at: None,
        out: Some(a.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests land here too; only real usage
            // errors take the failure code.
            let failed = e.use_stderr();
            let _ = e.print();
            return if failed { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let config = match cli.command.into_config() {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match jobs::run(&config) {
        Ok(outcome) => ExitCode::from(jobs::exit_code(outcome)),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
