//! Benchmark harness: sweeps over SNR / user / antenna grids with paired
//! channel realizations, per-algorithm multistart, deterministic seeding
//! under any execution order, and CSV/JSON emission of raw and aggregated
//! results.
//!
//! Output files never contain wall-clock measurements (the `wall_ms`
//! columns are zero) so that a sweep re-run with the same seed is byte
//! identical; real elapsed times are available on the `RunResult`s and are
//! reported by the CLI on stderr.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::baselines::{adam_solve, gd_solve};
use crate::error::{Error, Result};
use crate::model::{random_precoder, sample_channel, snr_to_power, ChannelSet, SystemConfig};
use crate::run::{derive_seed, multistart, precoder_seed, seed_tag, ReportMode, RunResult};
use crate::solver::{lagd_solve, LagdConfig, NetMode};
use crate::wmmse::wmmse_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lagd,
    Wmmse,
    Gd,
    Adam,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Lagd,
        Algorithm::Wmmse,
        Algorithm::Gd,
        Algorithm::Adam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lagd => "lagd",
            Algorithm::Wmmse => "wmmse",
            Algorithm::Gd => "gd",
            Algorithm::Adam => "adam",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lagd" => Ok(Algorithm::Lagd),
            "wmmse" => Ok(Algorithm::Wmmse),
            "gd" => Ok(Algorithm::Gd),
            "adam" => Ok(Algorithm::Adam),
            other => Err(Error::Usage(format!(
                "unknown algorithm `{other}` (expected lagd, wmmse, gd or adam)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Usage(format!("unknown output format `{other}`"))),
        }
    }
}

/// Full description of one benchmark sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub algorithms: Vec<Algorithm>,
    pub users_list: Vec<usize>,
    pub antennas_list: Vec<usize>,
    pub snr_db_list: Vec<f64>,
    pub realizations: usize,
    pub restarts: usize,
    pub iters_lagd: usize,
    pub iters_wmmse: usize,
    /// Iteration count shared by the GD and Adam baselines.
    pub iters_gd: usize,
    pub gd_step: f64,
    pub adam_lr: f64,
    /// Hidden-layer widths of the LAGD update network.
    pub hidden: Vec<usize>,
    pub theta_lr: f64,
    pub master_seed: u64,
    pub report_mode: ReportMode,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            users_list: vec![4],
            antennas_list: vec![4],
            snr_db_list: vec![10.0],
            realizations: 100,
            restarts: 10,
            iters_lagd: 500,
            iters_wmmse: 50,
            iters_gd: 500,
            gd_step: 1e-2,
            adam_lr: 1e-2,
            hidden: vec![40, 40],
            theta_lr: 1e-4,
            master_seed: 1,
            report_mode: ReportMode::Final,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Usage("no algorithms selected".into()));
        }
        if self.users_list.is_empty()
            || self.antennas_list.is_empty()
            || self.snr_db_list.is_empty()
        {
            return Err(Error::Usage(
                "users, antennas and snr lists must be non-empty".into(),
            ));
        }
        if self.users_list.contains(&0) || self.antennas_list.contains(&0) {
            return Err(Error::Usage(
                "user and antenna counts must be positive".into(),
            ));
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return Err(Error::Usage("SNR values must be finite".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Usage("need at least one realization".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Usage("need at least one restart".into()));
        }
        if [self.gd_step, self.adam_lr, self.theta_lr]
            .iter()
            .any(|x| !x.is_finite() || *x <= 0.0)
        {
            return Err(Error::Usage(
                "step sizes and learning rates must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Usage("hidden layers need at least one unit".into()));
        }
        Ok(())
    }

    fn lagd_config(&self) -> LagdConfig {
        LagdConfig {
            iters: self.iters_lagd,
            theta_lr: self.theta_lr,
            restarts: self.restarts,
            hidden: self.hidden.clone(),
            report_mode: self.report_mode,
            net_mode: NetMode::Flattened,
        }
    }

    fn cells(&self) -> Vec<(usize, usize, f64)> {
        let mut cells = Vec::new();
        for &n in &self.users_list {
            for &m in &self.antennas_list {
                for &snr in &self.snr_db_list {
                    cells.push((n, m, snr));
                }
            }
        }
        cells
    }
}

/// One successful (algorithm, cell, realization) record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub algo: Algorithm,
    pub users: usize,
    pub antennas: usize,
    pub snr_db: f64,
    pub realization: usize,
    /// Index of the winning restart.
    pub restart_best: usize,
    /// Reported sum rate (final or best iterate per the spec's report mode).
    pub wsr: f64,
    /// Always zero in emitted files; see the module docs.
    pub wall_ms: u64,
    /// Seed of the winning restart.
    pub seed: u64,
    /// FNV-1a hash of the channel realization, hex encoded.
    pub channel_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algo: Algorithm,
    pub users: usize,
    pub antennas: usize,
    pub snr_db: f64,
    pub mean_wsr: f64,
    /// Population variance of the per-realization reported sum rate.
    pub var_wsr: f64,
    pub mean_wall_ms: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureRecord {
    pub algo: Algorithm,
    pub users: usize,
    pub antennas: usize,
    pub snr_db: f64,
    pub realization: usize,
    pub error: String,
}

/// Everything a sweep produced, plus the spec for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub aggregates: Vec<AggregateRow>,
    pub raw: Vec<RawRecord>,
    pub failures: Vec<FailureRecord>,
}

impl ExperimentOutput {
    /// Failed records as a fraction of all attempted records.
    pub fn failure_rate(&self) -> f64 {
        let total = self.raw.len() + self.failures.len();
        if total == 0 {
            0.0
        } else {
            self.failures.len() as f64 / total as f64
        }
    }
}

/// FNV-1a over the little-endian bytes of every channel entry.
pub fn channel_hash(channels: &ChannelSet) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    let mut eat = |x: f64| {
        for b in x.to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for h in channels.users() {
        for z in h {
            eat(z.re);
            eat(z.im);
        }
    }
    hash
}

fn cell_seed(
    tag: u64,
    master: u64,
    users: usize,
    antennas: usize,
    snr_db: f64,
    realization: usize,
) -> u64 {
    derive_seed(&[
        tag,
        master,
        users as u64,
        antennas as u64,
        snr_db.to_bits(),
        realization as u64,
    ])
}

/// Runs one algorithm on one already-sampled realization through the shared
/// multistart wrapper. `base_seed` is algorithm-independent so every solver
/// restarts from identical precoders.
pub fn run_algorithm(
    spec: &ExperimentSpec,
    algo: Algorithm,
    config: &SystemConfig,
    channels: &ChannelSet,
    base_seed: u64,
) -> Result<(RunResult, usize)> {
    let mode = spec.report_mode;
    match algo {
        Algorithm::Lagd => {
            let cfg = spec.lagd_config();
            multistart(spec.restarts, base_seed, mode, |restart_seed| {
                lagd_solve(config, channels, &cfg, restart_seed)
            })
        }
        Algorithm::Wmmse => multistart(spec.restarts, base_seed, mode, |restart_seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(precoder_seed(restart_seed));
            let v0 = random_precoder(config, &mut rng);
            let mut run = wmmse_solve(config, channels, &v0, spec.iters_wmmse)?;
            run.seed = restart_seed;
            Ok(run)
        }),
        Algorithm::Gd => multistart(spec.restarts, base_seed, mode, |restart_seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(precoder_seed(restart_seed));
            let v0 = random_precoder(config, &mut rng);
            let mut run = gd_solve(config, channels, &v0, spec.iters_gd, spec.gd_step)?;
            run.seed = restart_seed;
            Ok(run)
        }),
        Algorithm::Adam => multistart(spec.restarts, base_seed, mode, |restart_seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(precoder_seed(restart_seed));
            let v0 = random_precoder(config, &mut rng);
            let mut run = adam_solve(config, channels, &v0, spec.iters_gd, spec.adam_lr)?;
            run.seed = restart_seed;
            Ok(run)
        }),
    }
}

fn run_record(
    spec: &ExperimentSpec,
    algo: Algorithm,
    users: usize,
    antennas: usize,
    snr_db: f64,
    realization: usize,
) -> std::result::Result<RawRecord, FailureRecord> {
    let fail = |error: String| FailureRecord {
        algo,
        users,
        antennas,
        snr_db,
        realization,
        error,
    };
    let config = SystemConfig::uniform(users, antennas, 1.0, snr_to_power(snr_db))
        .map_err(|e| fail(e.to_string()))?;
    let ch_seed = cell_seed(
        seed_tag::CHANNEL,
        spec.master_seed,
        users,
        antennas,
        snr_db,
        realization,
    );
    let channels = sample_channel(&config, &mut ChaCha8Rng::seed_from_u64(ch_seed));
    let base_seed = cell_seed(
        seed_tag::SOLVER,
        spec.master_seed,
        users,
        antennas,
        snr_db,
        realization,
    );
    let (run, restart_best) = run_algorithm(spec, algo, &config, &channels, base_seed)
        .map_err(|e| fail(e.to_string()))?;
    Ok(RawRecord {
        algo,
        users,
        antennas,
        snr_db,
        realization,
        restart_best,
        wsr: run.reported_wsr(spec.report_mode),
        wall_ms: 0,
        seed: run.seed,
        channel_hash: format!("{:016x}", channel_hash(&channels)),
    })
}

/// Executes the whole sweep. Realizations run in parallel; the output is
/// identical to a serial run because every record derives its own seeds and
/// results are collected in task order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let cells = spec.cells();
    let mut tasks = Vec::new();
    for &(users, antennas, snr_db) in &cells {
        for realization in 0..spec.realizations {
            for &algo in &spec.algorithms {
                tasks.push((algo, users, antennas, snr_db, realization));
            }
        }
    }

    let results: Vec<std::result::Result<RawRecord, FailureRecord>> = tasks
        .par_iter()
        .map(|&(algo, users, antennas, snr_db, realization)| {
            run_record(spec, algo, users, antennas, snr_db, realization)
        })
        .collect();

    let mut raw = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => raw.push(rec),
            Err(f) => failures.push(f),
        }
    }

    let mut aggregates = Vec::new();
    for &(users, antennas, snr_db) in &cells {
        for &algo in &spec.algorithms {
            let values: Vec<f64> = raw
                .iter()
                .filter(|r| {
                    r.algo == algo
                        && r.users == users
                        && r.antennas == antennas
                        && r.snr_db == snr_db
                })
                .map(|r| r.wsr)
                .collect();
            if values.is_empty() {
                continue;
            }
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            aggregates.push(AggregateRow {
                algo,
                users,
                antennas,
                snr_db,
                mean_wsr: mean,
                var_wsr: var,
                mean_wall_ms: 0.0,
                n,
            });
        }
    }

    Ok(ExperimentOutput {
        spec: spec.clone(),
        aggregates,
        raw,
        failures,
    })
}

pub const RAW_CSV_HEADER: &str =
    "algo,users,antennas,snr_db,realization,restart_best,wsr,wall_ms,seed,channel_hash";
pub const AGG_CSV_HEADER: &str = "algo,users,antennas,snr_db,mean_wsr,var_wsr,mean_wall_ms,n";

pub fn raw_csv(records: &[RawRecord]) -> String {
    let mut out = String::from(RAW_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.algo,
            r.users,
            r.antennas,
            r.snr_db,
            r.realization,
            r.restart_best,
            r.wsr,
            r.wall_ms,
            r.seed,
            r.channel_hash
        ));
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGG_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.algo, r.users, r.antennas, r.snr_db, r.mean_wsr, r.var_wsr, r.mean_wall_ms, r.n
        ));
    }
    out
}

fn prepare_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

/// Writes results under `out_base`: `<base>.raw.csv` and `<base>.agg.csv`
/// for CSV, or a single `<base>.json` envelope. Returns the written paths.
pub fn emit_results(
    output: &ExperimentOutput,
    format: OutputFormat,
    out_base: &Path,
) -> Result<Vec<PathBuf>> {
    if output.aggregates.is_empty() {
        return Err(Error::Usage("no aggregate rows to emit".into()));
    }
    prepare_parent(out_base)?;
    let with_ext = |ext: &str| {
        let mut os = out_base.as_os_str().to_owned();
        os.push(ext);
        PathBuf::from(os)
    };
    match format {
        OutputFormat::Csv => {
            let raw_path = with_ext(".raw.csv");
            let agg_path = with_ext(".agg.csv");
            fs::write(&raw_path, raw_csv(&output.raw))?;
            fs::write(&agg_path, aggregate_csv(&output.aggregates))?;
            Ok(vec![raw_path, agg_path])
        }
        OutputFormat::Json => {
            let path = with_ext(".json");
            let mut file = fs::File::create(&path)?;
            serde_json::to_writer_pretty(&mut file, output)?;
            file.write_all(b"\n")?;
            Ok(vec![path])
        }
    }
}

/// Per-iteration trace of a single run (the winning restart of one cell).
#[derive(Debug, Clone)]
pub struct TraceData {
    pub algo: Algorithm,
    pub users: usize,
    pub antennas: usize,
    pub snr_db: f64,
    pub run: RunResult,
}

/// Runs exactly one (algorithm, cell, realization) and keeps the winning
/// restart's full iterate trace.
pub fn run_trace(spec: &ExperimentSpec) -> Result<TraceData> {
    spec.validate()?;
    if spec.algorithms.len() != 1
        || spec.users_list.len() != 1
        || spec.antennas_list.len() != 1
        || spec.snr_db_list.len() != 1
        || spec.realizations != 1
    {
        return Err(Error::Usage(
            "trace needs exactly one algorithm, one cell and one realization".into(),
        ));
    }
    let algo = spec.algorithms[0];
    let (users, antennas, snr_db) = (
        spec.users_list[0],
        spec.antennas_list[0],
        spec.snr_db_list[0],
    );
    let config = SystemConfig::uniform(users, antennas, 1.0, snr_to_power(snr_db))?;
    let ch_seed = cell_seed(
        seed_tag::CHANNEL,
        spec.master_seed,
        users,
        antennas,
        snr_db,
        0,
    );
    let channels = sample_channel(&config, &mut ChaCha8Rng::seed_from_u64(ch_seed));
    let base_seed = cell_seed(
        seed_tag::SOLVER,
        spec.master_seed,
        users,
        antennas,
        snr_db,
        0,
    );
    let (run, _) = run_algorithm(spec, algo, &config, &channels, base_seed)?;
    Ok(TraceData {
        algo,
        users,
        antennas,
        snr_db,
        run,
    })
}

pub fn trace_csv(trace: &TraceData) -> String {
    let mut out = String::new();
    match &trace.run.objective_trace {
        Some(obj) => {
            out.push_str("iter,wsr,objective\n");
            for (k, (w, o)) in trace.run.wsr_trace.iter().zip(obj).enumerate() {
                out.push_str(&format!("{k},{w},{o}\n"));
            }
        }
        None => {
            out.push_str("iter,wsr\n");
            for (k, w) in trace.run.wsr_trace.iter().enumerate() {
                out.push_str(&format!("{k},{w}\n"));
            }
        }
    }
    out
}

/// Writes the `iter,wsr[,objective]` trace CSV to `<path>`.
pub fn emit_trace(trace: &TraceData, path: &Path) -> Result<PathBuf> {
    prepare_parent(path)?;
    fs::write(path, trace_csv(trace))?;
    Ok(path.to_path_buf())
}
