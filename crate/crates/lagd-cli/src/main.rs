//! `lagd` — benchmark CLI for LAGD beamforming against WMMSE and projected
//! GD/Adam baselines.
//!
//! Every flag can also be set through an `LAGD_`-prefixed environment
//! variable (e.g. `LAGD_SEED=7`), which is convenient in CI.
//!
//! Exit codes: 0 success, 1 usage error, 2 solver-failure threshold
//! exceeded, 3 I/O error.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::time::Instant;

use lagd::harness::{emit_results, emit_trace};
use lagd::net::parse_hidden_spec;
use lagd::{run_experiment, run_trace, Error, ExperimentSpec, OutputFormat, ReportMode};

const EXIT_USAGE: i32 = 1;
const EXIT_SOLVER_FAILURES: i32 = 2;
const EXIT_IO: i32 = 3;

/// Failure fraction above which a sweep is considered broken.
const FAILURE_RATE_LIMIT: f64 = 0.01;

#[derive(Parser)]
#[command(
    name = "lagd",
    version,
    about = "Sum-rate beamforming benchmarks: LAGD, WMMSE, GD, Adam"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark sweep and write raw + aggregate results.
    Bench(BenchArgs),
    /// Write the per-iteration trace of a single run (one algorithm, one
    /// cell, one realization).
    Trace(TraceArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Comma list from {lagd, wmmse, gd, adam}.
    #[arg(long, default_value = "lagd,wmmse,gd,adam", env = "LAGD_ALGOS")]
    algos: String,

    /// Comma list of user counts N.
    #[arg(long, default_value = "4", env = "LAGD_USERS")]
    users: String,

    /// Comma list of antenna counts M.
    #[arg(long, default_value = "4", env = "LAGD_ANTENNAS")]
    antennas: String,

    /// SNR values in dB: a comma list ("0,10,30") or a range "a:b:step".
    #[arg(long = "snr-db", default_value = "10", env = "LAGD_SNR_DB")]
    snr_db: String,

    /// Random restarts per record; the best reported run wins.
    #[arg(long, default_value_t = 10, env = "LAGD_RESTARTS")]
    restarts: usize,

    #[arg(long = "iters-lagd", default_value_t = 500, env = "LAGD_ITERS_LAGD")]
    iters_lagd: usize,

    #[arg(long = "iters-wmmse", default_value_t = 50, env = "LAGD_ITERS_WMMSE")]
    iters_wmmse: usize,

    /// Iterations for both the GD and Adam baselines.
    #[arg(long = "iters-gd", default_value_t = 500, env = "LAGD_ITERS_GD")]
    iters_gd: usize,

    #[arg(long = "gd-step", default_value_t = 1e-2, env = "LAGD_GD_STEP")]
    gd_step: f64,

    #[arg(long = "adam-lr", default_value_t = 1e-2, env = "LAGD_ADAM_LR")]
    adam_lr: f64,

    /// Hidden layers of the LAGD update network, e.g. "40,40".
    #[arg(long, default_value = "40,40", env = "LAGD_ARCH")]
    arch: String,

    #[arg(long = "theta-lr", default_value_t = 1e-4, env = "LAGD_THETA_LR")]
    theta_lr: f64,

    /// Which iterate each run reports: final | best.
    #[arg(long, default_value = "final", env = "LAGD_REPORT")]
    report: String,

    /// Master seed; everything else derives from it.
    #[arg(long, default_value_t = 1, env = "LAGD_SEED")]
    seed: u64,

    /// Output format: csv | json.
    #[arg(long, default_value = "csv", env = "LAGD_FORMAT")]
    format: String,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    sweep: SweepArgs,

    /// Channel realizations per cell.
    #[arg(long, default_value_t = 100, env = "LAGD_REALIZATIONS")]
    realizations: usize,

    /// Output base path; files are written as <out>.raw.csv and
    /// <out>.agg.csv (or <out>.json).
    #[arg(long, default_value = "bench", env = "LAGD_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    sweep: SweepArgs,

    /// Must stay at 1 for traces.
    #[arg(long, default_value_t = 1, env = "LAGD_REALIZATIONS")]
    realizations: usize,

    /// Path of the trace CSV.
    #[arg(long, default_value = "trace.csv", env = "LAGD_OUT")]
    out: PathBuf,
}

fn parse_usize_list(what: &str, s: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Error::Usage(format!("bad {what} value `{tok}`")))
        })
        .collect()
}

fn parse_snr_list(s: &str) -> Result<Vec<f64>, Error> {
    let bad = |_| Error::Usage(format!("bad SNR spec `{s}`"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Usage(format!(
                "SNR range must be a:b:step, got `{s}`"
            )));
        }
        let a: f64 = parts[0].trim().parse().map_err(bad)?;
        let b: f64 = parts[1].trim().parse().map_err(bad)?;
        let step: f64 = parts[2].trim().parse().map_err(bad)?;
        if !step.is_finite() || step <= 0.0 || b < a {
            return Err(Error::Usage(format!("empty SNR range `{s}`")));
        }
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let v = a + step * k as f64;
            if v > b + 1e-9 {
                break;
            }
            out.push(v);
            k += 1;
        }
        Ok(out)
    } else {
        s.split(',')
            .map(|tok| tok.trim().parse::<f64>().map_err(bad))
            .collect()
    }
}

fn build_spec(args: &SweepArgs, realizations: usize) -> Result<ExperimentSpec, Error> {
    let algorithms = args
        .algos
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<_>, _>>()?;
    let report_mode: ReportMode = args.report.parse()?;
    Ok(ExperimentSpec {
        algorithms,
        users_list: parse_usize_list("user count", &args.users)?,
        antennas_list: parse_usize_list("antenna count", &args.antennas)?,
        snr_db_list: parse_snr_list(&args.snr_db)?,
        realizations,
        restarts: args.restarts,
        iters_lagd: args.iters_lagd,
        iters_wmmse: args.iters_wmmse,
        iters_gd: args.iters_gd,
        gd_step: args.gd_step,
        adam_lr: args.adam_lr,
        hidden: parse_hidden_spec(&args.arch)?,
        theta_lr: args.theta_lr,
        master_seed: args.seed,
        report_mode,
    })
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Json(_) => EXIT_IO,
        Error::Solver(_) => EXIT_SOLVER_FAILURES,
        _ => EXIT_USAGE,
    }
}

fn run_bench(args: &BenchArgs) -> Result<i32, Error> {
    let spec = build_spec(&args.sweep, args.realizations)?;
    let format: OutputFormat = args.sweep.format.parse()?;
    let started = Instant::now();
    let output = run_experiment(&spec)?;
    let elapsed = started.elapsed();
    let paths = emit_results(&output, format, &args.out)?;
    let total = output.raw.len() + output.failures.len();
    eprintln!(
        "bench: {} records ({} failed) in {:.1}s",
        total,
        output.failures.len(),
        elapsed.as_secs_f64()
    );
    for row in &output.aggregates {
        eprintln!(
            "  {} N={} M={} snr={}dB: mean wsr {:.4} (var {:.4}, n={})",
            row.algo, row.users, row.antennas, row.snr_db, row.mean_wsr, row.var_wsr, row.n
        );
    }
    for path in &paths {
        eprintln!("wrote {}", path.display());
    }
    if output.failure_rate() > FAILURE_RATE_LIMIT {
        for f in output.failures.iter().take(5) {
            eprintln!(
                "failure: {} N={} M={} snr={}dB r={}: {}",
                f.algo, f.users, f.antennas, f.snr_db, f.realization, f.error
            );
        }
        return Ok(EXIT_SOLVER_FAILURES);
    }
    Ok(0)
}

fn run_trace_cmd(args: &TraceArgs) -> Result<i32, Error> {
    let spec = build_spec(&args.sweep, args.realizations)?;
    let started = Instant::now();
    let trace = run_trace(&spec)?;
    let path = emit_trace(&trace, &args.out)?;
    eprintln!(
        "trace: {} N={} M={} snr={}dB, {} iterates in {:.1}s",
        trace.algo,
        trace.users,
        trace.antennas,
        trace.snr_db,
        trace.run.wsr_trace.len(),
        started.elapsed().as_secs_f64()
    );
    eprintln!("wrote {}", path.display());
    Ok(0)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let outcome = match &cli.command {
        Command::Bench(args) => run_bench(args),
        Command::Trace(args) => run_trace_cmd(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code_for(&err));
        }
    }
}
