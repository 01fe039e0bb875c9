//! Command-line pipeline: train, eval, sweep and sample.
//!
//! Exit codes: 0 success, 2 config error, 3 solver failure, 4 I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{solve_dare, AugmentedLti, LqrController, MpcController};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::evaluation::{run_all, summarize, Actuator, ClosedLoopRun, ComparisonRow, Controller, PolicyController};
use crate::ipm::{ipm_run, IpmStats};
use crate::policy::ThetaFile;
use crate::process_model::{sample_scenarios, AffineQuadraticProblem, LinearEmbedding, ScenarioSet};
use crate::rollout::SampleNlp;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

const DARE_TOL: f64 = 1e-12;
const DARE_MAX_ITER: usize = 100_000;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Csv(_) | Error::Format(_) => EXIT_IO,
        _ => EXIT_SOLVER,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub train_seed: Option<u64>,
    pub init_seed: Option<u64>,
    pub validation_seed: Option<u64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub kkt: Option<f64>,
    pub failure: Option<String>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    /// File name (relative to the manifest) to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    fn new(command: &str, config: &ExperimentConfig, hash: &str) -> Self {
        Self {
            command: command.into(),
            config_hash: hash.into(),
            train_seed: Some(config.training.seed),
            init_seed: Some(config.training.init_seed),
            validation_seed: Some(config.validation.seed),
            ..Self::default()
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Writes `bytes` to `dir/name` and records its digest.
    fn artifact(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.artifacts.insert(name.into(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub config_hash: String,
    pub theta: ThetaFile,
    pub stats: IpmStats,
    /// Set when the solver stopped short of the KKT tolerance; `theta` is
    /// then the last accepted iterate.
    pub failure: Option<String>,
    pub sampling_seconds: f64,
    pub training_seconds: f64,
}

impl TrainReport {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }
}

/// Trains the policy described by `config` without touching the disk
/// (except to read an external problem file).
pub fn train(config: &ExperimentConfig) -> Result<TrainReport> {
    config.validate()?;
    let config_hash = config.hash()?;
    let (problem, embedding) = config.build_problem()?;
    let policy = config.policy_for(&problem)?;
    let t = &config.training;
    let clock = Instant::now();
    let scenarios = sample_scenarios(&problem, &embedding, t.samples, t.horizon, t.seed)?;
    let sampling_seconds = clock.elapsed().as_secs_f64();
    let theta0 = policy.init_params(t.init_seed, t.init_scale)?;
    let nlp = SampleNlp::new(problem, policy.clone(), scenarios)?;
    let clock = Instant::now();
    let outcome = ipm_run(&nlp, &theta0, &config.ipm)?;
    let training_seconds = clock.elapsed().as_secs_f64();
    Ok(TrainReport {
        config_hash,
        theta: ThetaFile::new(&policy, outcome.result.theta)?,
        stats: outcome.result.stats,
        failure: outcome.failure.map(|e| e.to_string()),
        sampling_seconds,
        training_seconds,
    })
}

fn theta_text(report: &TrainReport) -> Result<Vec<u8>> {
    let mut buf = format!("# config {}\n", report.config_hash).into_bytes();
    report.theta.write_text(&mut buf)?;
    Ok(buf)
}

fn log_text(report: &TrainReport) -> Result<Vec<u8>> {
    let mut buf = format!("# config {}\n", report.config_hash).into_bytes();
    report.stats.write_log(&mut buf)?;
    Ok(buf)
}

/// `theta.txt`, `ipm.log` and `manifest.json` in `dir`.
pub fn write_train_artifacts(dir: &Path, config: &ExperimentConfig, report: &TrainReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut m = Manifest::new("train", config, &report.config_hash);
    m.converged = Some(report.converged());
    m.iterations = Some(report.stats.iterations);
    m.kkt = Some(report.stats.kkt);
    m.failure = report.failure.clone();
    m.timings.insert("sampling".into(), report.sampling_seconds);
    m.timings.insert("training".into(), report.training_seconds);
    m.artifact(dir, "theta.txt", &theta_text(report)?)?;
    m.artifact(dir, "ipm.log", &log_text(report)?)?;
    m.write(dir)
}

/// Trains and writes artifacts to `config.out_dir`. A run that stops short
/// of the tolerance still writes its artifacts; the report says so.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainReport> {
    let report = train(config)?;
    write_train_artifacts(&config.out_dir, config, &report)?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Lqr,
    Mpc,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalSource {
    Theta(PathBuf),
    Baseline(Baseline),
}

/// Problem, validation set and baselines shared by eval and sweep.
pub struct EvalContext {
    pub problem: AffineQuadraticProblem,
    pub embedding: LinearEmbedding,
    pub validation: ScenarioSet,
    pub actuator: Actuator,
    pub lqr: LqrController,
    pub mpc: MpcController,
    pub stages: usize,
}

impl EvalContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (problem, embedding) = config.build_problem()?;
        let v = &config.validation;
        let validation = sample_scenarios(&problem, &embedding, v.samples, v.stages, v.seed)?;
        let model = AugmentedLti::from_problem(&problem, &embedding)?;
        let dare = solve_dare(&model, DARE_TOL, DARE_MAX_ITER)?;
        let lqr = LqrController::new(&dare, problem.u_lo.clone(), problem.u_hi.clone())?;
        let mpc = MpcController::new(
            &model,
            v.mpc_horizon,
            problem.state_box(),
            problem.input_box(),
            lqr.clone(),
        )?;
        let actuator = Actuator {
            lo: problem.u_lo.clone(),
            hi: problem.u_hi.clone(),
        };
        Ok(Self {
            problem,
            embedding,
            validation,
            actuator,
            lqr,
            mpc,
            stages: v.stages,
        })
    }

    pub fn run(&self, controllers: &[&dyn Controller]) -> Result<Vec<Vec<ClosedLoopRun>>> {
        run_all(
            controllers,
            &self.problem,
            &self.embedding,
            &self.actuator,
            &self.validation,
            self.stages,
        )
    }

    pub fn policy_controller(&self, name: &str, theta: &ThetaFile, config: &ExperimentConfig) -> Result<PolicyController> {
        let expected = config.policy_for(&self.problem)?;
        if theta.layer_sizes != expected.layer_sizes() {
            return Err(Error::Config(format!(
                "theta file layers {:?} do not match the config's {:?}",
                theta.layer_sizes,
                expected.layer_sizes()
            )));
        }
        Ok(PolicyController {
            name: name.into(),
            policy: theta.policy()?,
            theta: theta.theta.clone(),
        })
    }
}

/// One line of a comparison or sweep CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub controller: String,
    #[serde(rename = "S")]
    pub samples: Option<usize>,
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    pub status: String,
    pub iterations: Option<usize>,
    pub kkt: Option<f64>,
    pub train_seconds: Option<f64>,
    pub performance: Option<f64>,
    pub performance_undiscounted: Option<f64>,
    pub violations: Option<f64>,
    pub config_hash: String,
}

impl TableRecord {
    fn from_row(row: &ComparisonRow, hash: &str) -> Self {
        Self {
            controller: row.controller.clone(),
            samples: row.samples,
            horizon: row.horizon,
            status: row.status.clone(),
            iterations: None,
            kkt: None,
            train_seconds: None,
            performance: Some(row.performance),
            performance_undiscounted: Some(row.performance_undiscounted),
            violations: Some(row.violations),
            config_hash: hash.into(),
        }
    }
}

pub fn write_records(records: &[TableRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_records(path: &Path) -> Result<Vec<TableRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

/// Evaluates each source on the validation set; writes `comparison.csv`,
/// per-run trajectories and `manifest.json` to `config.out_dir`.
pub fn cmd_eval(config: &ExperimentConfig, sources: &[EvalSource]) -> Result<Vec<TableRecord>> {
    if sources.is_empty() {
        return Err(Error::Config("nothing to evaluate".into()));
    }
    let hash = config.hash()?;
    let clock = Instant::now();
    let ctx = EvalContext::new(config)?;
    let mut policies = Vec::new();
    for (i, s) in sources.iter().enumerate() {
        if let EvalSource::Theta(path) = s {
            let theta = ThetaFile::read_any(&fs::read(path)?)?;
            let name = if i == 0 { "PO".to_string() } else { format!("PO{i}") };
            policies.push(ctx.policy_controller(&name, &theta, config)?);
        }
    }
    let mut controllers: Vec<&dyn Controller> = Vec::new();
    let mut next_policy = policies.iter();
    for s in sources {
        controllers.push(match s {
            EvalSource::Theta(_) => next_policy.next().expect("one policy per theta source"),
            EvalSource::Baseline(Baseline::Lqr) => &ctx.lqr,
            EvalSource::Baseline(Baseline::Mpc) => &ctx.mpc,
        });
    }
    let grouped = ctx.run(&controllers)?;
    let elapsed = clock.elapsed().as_secs_f64();

    let dir = &config.out_dir;
    fs::create_dir_all(dir)?;
    let mut m = Manifest::new("eval", config, &hash);
    m.train_seed = None;
    m.init_seed = None;
    m.timings.insert("evaluation".into(), elapsed);
    let mut records = Vec::new();
    for (c, runs) in controllers.iter().zip(&grouped) {
        records.push(TableRecord::from_row(&summarize(&c.id(), runs)?, &hash));
        for run in runs {
            let mut buf = Vec::new();
            run.write_csv(&mut buf)?;
            m.artifact(dir, &format!("trajectories/{}_s{}.csv", run.controller, run.scenario), &buf)?;
        }
    }
    m.artifact(dir, "comparison.csv", &write_records(&records)?)?;
    m.write(dir)?;
    Ok(records)
}

pub const SWEEP_VALUES: [usize; 4] = [5, 10, 15, 20];

/// Trains one policy per `(S, T)` cell in parallel, each in its own
/// `S{S}_T{T}` subdirectory, and writes `sweep.csv` with the baselines
/// appended. Cells that error or stop short of the tolerance are marked
/// `FAILED`; the others are unaffected.
pub fn cmd_sweep(config: &ExperimentConfig, s_list: &[usize], t_list: &[usize]) -> Result<Vec<TableRecord>> {
    if s_list.is_empty() || t_list.is_empty() || s_list.contains(&0) || t_list.contains(&0) {
        return Err(Error::Config("sweep lists must be non-empty and positive".into()));
    }
    let hash = config.hash()?;
    let ctx = EvalContext::new(config)?;
    let cells: Vec<(usize, usize)> = s_list
        .iter()
        .flat_map(|&s| t_list.iter().map(move |&t| (s, t)))
        .collect();
    let records: Vec<TableRecord> = cells
        .par_iter()
        .map(|&(s, t)| sweep_cell(config, &ctx, s, t))
        .collect();

    let baselines: [&dyn Controller; 2] = [&ctx.lqr, &ctx.mpc];
    let grouped = ctx.run(&baselines)?;
    let mut all = records;
    for (c, runs) in baselines.iter().zip(&grouped) {
        all.push(TableRecord::from_row(&summarize(&c.id(), runs)?, &hash));
    }
    let dir = &config.out_dir;
    fs::create_dir_all(dir)?;
    let mut m = Manifest::new("sweep", config, &hash);
    m.artifact(dir, "sweep.csv", &write_records(&all)?)?;
    m.write(dir)?;
    Ok(all)
}

fn sweep_cell(config: &ExperimentConfig, ctx: &EvalContext, s: usize, t: usize) -> TableRecord {
    let mut cell = config.clone();
    cell.training.samples = s;
    cell.training.horizon = t;
    cell.out_dir = config.out_dir.join(format!("S{s}_T{t}"));
    let mut rec = TableRecord {
        controller: "PO".into(),
        samples: Some(s),
        horizon: Some(t),
        status: String::new(),
        iterations: None,
        kkt: None,
        train_seconds: None,
        performance: None,
        performance_undiscounted: None,
        violations: None,
        config_hash: cell.hash().unwrap_or_default(),
    };
    let result = (|| -> Result<(TrainReport, ComparisonRow)> {
        let report = cmd_train(&cell)?;
        let pc = ctx.policy_controller("PO", &report.theta, &cell)?;
        let runs = ctx.run(&[&pc])?;
        Ok((report, summarize("PO", &runs[0])?))
    })();
    match result {
        Ok((report, row)) => {
            rec.status = match &report.failure {
                None => "ok".into(),
                Some(f) => format!("FAILED: {f}"),
            };
            rec.iterations = Some(report.stats.iterations);
            rec.kkt = Some(report.stats.kkt);
            rec.train_seconds = Some(report.training_seconds);
            rec.performance = Some(row.performance);
            rec.performance_undiscounted = Some(row.performance_undiscounted);
            rec.violations = Some(row.violations);
        }
        Err(e) => rec.status = format!("FAILED: {e}"),
    }
    rec
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioKind {
    Train,
    Validation,
}

/// Dumps the training or validation scenario set as CSV.
pub fn cmd_sample(config: &ExperimentConfig, kind: ScenarioKind, output: Option<&Path>) -> Result<PathBuf> {
    config.validate()?;
    let (problem, embedding) = config.build_problem()?;
    let (count, horizon, seed, name) = match kind {
        ScenarioKind::Train => {
            let t = &config.training;
            (t.samples, t.horizon, t.seed, "train_scenarios.csv")
        }
        ScenarioKind::Validation => {
            let v = &config.validation;
            (v.samples, v.stages, v.seed, "validation_scenarios.csv")
        }
    };
    let set = sample_scenarios(&problem, &embedding, count, horizon, seed)?;
    let path = output.map_or_else(|| config.out_dir.join(name), Path::to_path_buf);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    set.write_csv(fs::File::create(&path)?)?;
    Ok(path)
}

#[derive(Debug, Parser)]
#[command(name = "policyopt", version, about = "Constrained policy optimization for stochastic control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy and write theta, solver log and manifest.
    Train(Common),
    /// Evaluate trained policies and baselines on the validation set.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Trained parameter file; repeatable.
        #[arg(long)]
        theta: Vec<PathBuf>,
        /// Baseline controller; repeatable. Defaults to both when no theta is given.
        #[arg(long, value_enum)]
        baseline: Vec<Baseline>,
    },
    /// Train and evaluate over a grid of sample counts and horizons.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long = "s-list", value_delimiter = ',', default_values_t = SWEEP_VALUES)]
        s_list: Vec<usize>,
        #[arg(long = "t-list", value_delimiter = ',', default_values_t = SWEEP_VALUES)]
        t_list: Vec<usize>,
    },
    /// Dump a scenario set as CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "train")]
        set: ScenarioKind,
        /// Output file; defaults to a file in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Config file plus overrides applied on top of it.
#[derive(Debug, Default, Args)]
pub struct Common {
    /// TOML experiment config; the benchmark defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub noisy: Option<bool>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Training sample count S.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Training horizon T.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub init_seed: Option<u64>,
    #[arg(long)]
    pub validation_seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

impl Common {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
            }
            None => ExperimentConfig::benchmark(false),
        };
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.noisy {
            c.problem.noisy = v;
        }
        if let Some(v) = self.gamma {
            c.problem.gamma = v;
        }
        if let Some(v) = self.samples {
            c.training.samples = v;
        }
        if let Some(v) = self.horizon {
            c.training.horizon = v;
        }
        if let Some(v) = &self.hidden {
            c.training.hidden = v.clone();
        }
        if let Some(v) = self.seed {
            c.training.seed = v;
        }
        if let Some(v) = self.init_seed {
            c.training.init_seed = v;
        }
        if let Some(v) = self.validation_seed {
            c.validation.seed = v;
        }
        if let Some(v) = self.max_iter {
            c.ipm.max_iter = v;
        }
        if let Some(v) = self.tol {
            c.ipm.tol = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn print_records(records: &[TableRecord]) {
    for r in records {
        let cell = match (r.samples, r.horizon) {
            (Some(s), Some(t)) => format!(" S={s} T={t}"),
            _ => String::new(),
        };
        let num = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!(
            "{}{cell}: performance {} violations {} [{}]",
            r.controller,
            num(r.performance),
            r.violations.map_or("-".to_string(), |v| v.to_string()),
            r.status
        );
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Train(common) => {
            let config = common.resolve()?;
            let report = cmd_train(&config)?;
            println!(
                "trained {} parameters in {:.2}s, {} iterations, KKT {:.3e}; artifacts in {}",
                report.theta.theta.len(),
                report.training_seconds,
                report.stats.iterations,
                report.stats.kkt,
                config.out_dir.display()
            );
            if let Some(f) = &report.failure {
                eprintln!("error: solver did not converge: {f}");
                return Ok(EXIT_SOLVER);
            }
            Ok(EXIT_OK)
        }
        Command::Eval { common, theta, baseline } => {
            let config = common.resolve()?;
            let mut sources: Vec<EvalSource> = theta.into_iter().map(EvalSource::Theta).collect();
            let baselines = if baseline.is_empty() && sources.is_empty() {
                vec![Baseline::Lqr, Baseline::Mpc]
            } else {
                baseline
            };
            sources.extend(baselines.into_iter().map(EvalSource::Baseline));
            print_records(&cmd_eval(&config, &sources)?);
            Ok(EXIT_OK)
        }
        Command::Sweep { common, s_list, t_list } => {
            let config = common.resolve()?;
            let records = cmd_sweep(&config, &s_list, &t_list)?;
            print_records(&records);
            let failed = records.iter().filter(|r| r.status.starts_with("FAILED")).count();
            if failed > 0 {
                eprintln!("warning: {failed} sweep cell(s) marked FAILED");
            }
            Ok(EXIT_OK)
        }
        Command::Sample { common, set, output } => {
            let config = common.resolve()?;
            let path = cmd_sample(&config, set, output.as_deref())?;
            println!("wrote {}", path.display());
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_SOLVER);
    }

    #[test]
    fn overrides_apply_on_defaults() {
        let cli = Cli::try_parse_from([
            "policyopt", "train", "--samples", "3", "--horizon", "4", "--noisy", "--hidden", "4,5",
        ])
        .unwrap();
        let Command::Train(common) = cli.command else { panic!() };
        let c = common.resolve().unwrap();
        assert_eq!((c.training.samples, c.training.horizon), (3, 4));
        assert!(c.problem.noisy);
        assert_eq!(c.training.hidden, vec![4, 5]);
    }

    #[test]
    fn zero_samples_is_a_config_error() {
        assert_eq!(run(["policyopt", "sample", "--samples", "0"]), EXIT_CONFIG);
        assert_eq!(run(["policyopt", "frobnicate"]), EXIT_CONFIG);
    }

    #[test]
    fn records_round_trip_through_csv() {
        let rec = TableRecord {
            controller: "PO".into(),
            samples: Some(5),
            horizon: Some(10),
            status: "ok".into(),
            iterations: Some(12),
            kkt: Some(3.0e-7),
            train_seconds: None,
            performance: Some(-0.123456789012345),
            performance_undiscounted: Some(-0.2),
            violations: Some(0.1),
            config_hash: "ab".into(),
        };
        let bytes = write_records(std::slice::from_ref(&rec)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, bytes).unwrap();
        assert_eq!(read_records(&path).unwrap(), vec![rec]);
    }
}
