//! Experiment runner: flat-text config, subcommand dispatch, CSV output.
//!
//! Config files are UTF-8 `key = value` lines with `#` comments. Unknown keys
//! are errors. Every run writes one CSV (header row first, trailing
//! `# config_sha256=…` comment last) plus a `.config` echo file, and reruns
//! with identical config and seed are byte-identical.

use crate::data;
use crate::estimator::{
    estimator_variance_trace, optimal_positive_probability, two_term_variance_trace,
    GradientVector, PhaseMoments,
};
use crate::ff;
use crate::phases::{
    learning_rate_line_search, run_training, third_moment_check, BudgetUnit, PhaseLengthLaw,
    ScheduleConfig, TrialRecord, UpdateMode,
};
use crate::rbm::{RbmParams, RbmTrainer};
use crate::theory::{
    coupled_tau, measure_bias, scaling_fit, InitMode, ToyDeterministicSpec, ToyMarkovSpec,
};
use anyhow::{anyhow, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FLEXPHASE_OUT";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` expects {expected}, got `{got}`")]
    TypeMismatch { line: usize, key: String, expected: &'static str, got: String },
    #[error("line {line}: key `{key}` out of range: {message}")]
    Range { line: usize, key: String, message: String },
    #[error("missing required key `{key}`")]
    MissingRequired { key: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    TrainRbm,
    TrainFf,
    VarianceScan,
    BiasScan,
    LineSearch,
    BasNllOracle,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::TrainRbm => "train-rbm",
            Experiment::TrainFf => "train-ff",
            Experiment::VarianceScan => "variance-scan",
            Experiment::BiasScan => "bias-scan",
            Experiment::LineSearch => "line-search",
            Experiment::BasNllOracle => "bas-nll-oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "train-rbm" => Experiment::TrainRbm,
            "train-ff" => Experiment::TrainFf,
            "variance-scan" => Experiment::VarianceScan,
            "bias-scan" => Experiment::BiasScan,
            "line-search" => Experiment::LineSearch,
            "bas-nll-oracle" => Experiment::BasNllOracle,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyDynamics {
    Stochastic,
    Deterministic,
}

/// Fully resolved experiment configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub out_dir: PathBuf,
    // Schedule.
    pub mode: UpdateMode,
    pub b: f64,
    pub tau: u64,
    pub eta: f64,
    pub budget: u64,
    pub budget_unit: BudgetUnit,
    pub cadence: u64,
    // RBM / BAS.
    pub bas_side: usize,
    pub n_hidden: usize,
    pub init_std: f64,
    pub prob_hidden: bool,
    // Forward-Forward.
    pub ff_hidden: Vec<usize>,
    pub ff_threshold: f64,
    pub ff_lr: f64,
    pub ff_train_n: usize,
    pub ff_test_n: usize,
    pub pass_budget: u64,
    // Learning-rate search.
    pub lr_min: f64,
    pub lr_max: f64,
    pub n_rates: usize,
    pub search_budget: u64,
    // Toy-system bias scan.
    pub alpha: f64,
    pub theta0: f64,
    pub target: f64,
    pub n_trials: u64,
    pub dynamics: ToyDynamics,
    pub etas: Vec<f64>,
    pub random_length: bool,
    // Variance scan.
    pub scan_dim: usize,
    pub b_step: f64,
}

impl RunConfig {
    /// Full-scale defaults: 16×16 RBM on 4×4 BAS, τ=100, 10⁵-phase budget;
    /// FF 784-500-500 trained by Adam.
    pub fn defaults(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            out_dir: default_out_dir(),
            mode: UpdateMode::IsdEndOfPhase,
            b: 0.5,
            tau: 100,
            eta: 0.01,
            budget: 100_000,
            budget_unit: BudgetUnit::Phases,
            cadence: 1000,
            bas_side: 4,
            n_hidden: 16,
            init_std: 0.01,
            prob_hidden: true,
            ff_hidden: vec![500, 500],
            ff_threshold: 2.0,
            ff_lr: 0.01,
            ff_train_n: 10_000,
            ff_test_n: 2_000,
            pass_budget: 120_000,
            lr_min: 0.001,
            lr_max: 0.04,
            n_rates: 10,
            search_budget: 10_000,
            alpha: 1.0,
            theta0: 0.4,
            target: 0.2,
            n_trials: 10_000,
            dynamics: ToyDynamics::Stochastic,
            etas: vec![0.1, 0.05, 0.025, 0.0125],
            random_length: false,
            scan_dim: 8,
            b_step: 0.05,
        }
    }
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn mode_label(mode: UpdateMode) -> String {
    mode.label()
}

fn parse_mode(s: &str) -> Option<UpdateMode> {
    if let Some(k) = s.strip_prefix("cdk") {
        return k.parse::<u64>().ok().filter(|&k| k >= 1).map(|k| UpdateMode::TwoTermCdk { k });
    }
    Some(match s {
        "isd" => UpdateMode::IsdEndOfPhase,
        "aol" => UpdateMode::IsdAlwaysOnFixedT,
        "aol_random_t" => UpdateMode::IsdAlwaysOnRandomT,
        _ => return None,
    })
}

macro_rules! scalar {
    ($cfg:ident, $field:ident, $value:expr, $line:expr, $key:expr, $ty:ty, $tyname:expr) => {{
        $cfg.$field = $value.parse::<$ty>().map_err(|_| ConfigError::TypeMismatch {
            line: $line,
            key: $key.to_string(),
            expected: $tyname,
            got: $value.to_string(),
        })?;
    }};
}

/// Applies one `key = value` assignment. `line` labels diagnostics; CLI
/// overrides pass 0.
pub fn set_key(cfg: &mut RunConfig, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
    let range = |message: String| ConfigError::Range { line, key: key.to_string(), message };
    let mismatch = |expected: &'static str| ConfigError::TypeMismatch {
        line,
        key: key.to_string(),
        expected,
        got: value.to_string(),
    };
    match key {
        "experiment" => {
            cfg.experiment = Experiment::parse(value).ok_or_else(|| mismatch("an experiment name"))?
        }
        "seed" => scalar!(cfg, seed, value, line, key, u64, "an unsigned integer"),
        "out_dir" => cfg.out_dir = PathBuf::from(value),
        "mode" => cfg.mode = parse_mode(value).ok_or_else(|| mismatch("cdk<K>|isd|aol|aol_random_t"))?,
        "b" => {
            scalar!(cfg, b, value, line, key, f64, "a real in (0, 1)");
            if !(cfg.b > 0.0 && cfg.b < 1.0) {
                return Err(range(format!("b = {} must lie in (0, 1)", cfg.b)));
            }
        }
        "tau" => {
            let v: i64 = value.parse().map_err(|_| mismatch("a positive integer"))?;
            if v < 1 {
                return Err(range(format!("tau = {v} must be >= 1")));
            }
            cfg.tau = v as u64;
        }
        "eta" => {
            scalar!(cfg, eta, value, line, key, f64, "a positive real");
            if !(cfg.eta > 0.0) {
                return Err(range(format!("eta = {} must be positive", cfg.eta)));
            }
        }
        "budget" => scalar!(cfg, budget, value, line, key, u64, "an unsigned integer"),
        "budget_unit" => {
            cfg.budget_unit = match value {
                "phases" => BudgetUnit::Phases,
                "gradient_steps" => BudgetUnit::GradientSteps,
                "time_steps" => BudgetUnit::TimeSteps,
                _ => return Err(mismatch("phases|gradient_steps|time_steps")),
            }
        }
        "cadence" => {
            scalar!(cfg, cadence, value, line, key, u64, "a positive integer");
            if cfg.cadence == 0 {
                return Err(range("cadence must be >= 1".to_string()));
            }
        }
        "bas_side" => {
            scalar!(cfg, bas_side, value, line, key, usize, "an integer in 2..=5");
            if !(2..=5).contains(&cfg.bas_side) {
                return Err(range(format!("bas_side = {} outside 2..=5", cfg.bas_side)));
            }
        }
        "n_hidden" => {
            scalar!(cfg, n_hidden, value, line, key, usize, "a positive integer");
            if cfg.n_hidden == 0 {
                return Err(range("n_hidden must be >= 1".to_string()));
            }
        }
        "init_std" => scalar!(cfg, init_std, value, line, key, f64, "a non-negative real"),
        "prob_hidden" => scalar!(cfg, prob_hidden, value, line, key, bool, "true|false"),
        "ff_hidden" => {
            let widths: Result<Vec<usize>, _> =
                value.split(',').map(|p| p.trim().parse::<usize>()).collect();
            cfg.ff_hidden = widths.map_err(|_| mismatch("comma-separated widths"))?;
            if cfg.ff_hidden.is_empty() || cfg.ff_hidden.contains(&0) {
                return Err(range("ff_hidden widths must all be >= 1".to_string()));
            }
        }
        "ff_threshold" => scalar!(cfg, ff_threshold, value, line, key, f64, "a real"),
        "ff_lr" => {
            scalar!(cfg, ff_lr, value, line, key, f64, "a positive real");
            if !(cfg.ff_lr > 0.0) {
                return Err(range("ff_lr must be positive".to_string()));
            }
        }
        "ff_train_n" => scalar!(cfg, ff_train_n, value, line, key, usize, "an unsigned integer"),
        "ff_test_n" => scalar!(cfg, ff_test_n, value, line, key, usize, "an unsigned integer"),
        "pass_budget" => scalar!(cfg, pass_budget, value, line, key, u64, "an unsigned integer"),
        "lr_min" => scalar!(cfg, lr_min, value, line, key, f64, "a positive real"),
        "lr_max" => scalar!(cfg, lr_max, value, line, key, f64, "a positive real"),
        "n_rates" => {
            scalar!(cfg, n_rates, value, line, key, usize, "an integer >= 2");
            if cfg.n_rates < 2 {
                return Err(range("n_rates must be >= 2".to_string()));
            }
        }
        "search_budget" => scalar!(cfg, search_budget, value, line, key, u64, "an unsigned integer"),
        "alpha" => {
            scalar!(cfg, alpha, value, line, key, f64, "a real in (0, 1]");
            if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
                return Err(range(format!("alpha = {} outside (0, 1]", cfg.alpha)));
            }
        }
        "theta0" => scalar!(cfg, theta0, value, line, key, f64, "a real"),
        "target" => scalar!(cfg, target, value, line, key, f64, "a real"),
        "n_trials" => {
            scalar!(cfg, n_trials, value, line, key, u64, "a positive integer");
            if cfg.n_trials == 0 {
                return Err(range("n_trials must be >= 1".to_string()));
            }
        }
        "dynamics" => {
            cfg.dynamics = match value {
                "stochastic" => ToyDynamics::Stochastic,
                "deterministic" => ToyDynamics::Deterministic,
                _ => return Err(mismatch("stochastic|deterministic")),
            }
        }
        "etas" => {
            let parsed: Result<Vec<f64>, _> =
                value.split(',').map(|p| p.trim().parse::<f64>()).collect();
            cfg.etas = parsed.map_err(|_| mismatch("comma-separated positive reals"))?;
            if cfg.etas.is_empty() || cfg.etas.iter().any(|&e| !(e > 0.0)) {
                return Err(range("etas must all be positive".to_string()));
            }
        }
        "random_length" => scalar!(cfg, random_length, value, line, key, bool, "true|false"),
        "scan_dim" => {
            scalar!(cfg, scan_dim, value, line, key, usize, "a positive integer");
            if cfg.scan_dim == 0 {
                return Err(range("scan_dim must be >= 1".to_string()));
            }
        }
        "b_step" => {
            scalar!(cfg, b_step, value, line, key, f64, "a real in (0, 0.5)");
            if !(cfg.b_step > 0.0 && cfg.b_step < 0.5) {
                return Err(range(format!("b_step = {} outside (0, 0.5)", cfg.b_step)));
            }
        }
        _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
    }
    Ok(())
}

/// Parses a flat config file into a typed config, starting from the defaults
/// for `experiment` (which an `experiment =` line may override).
pub fn parse_config(text: &str, experiment: Experiment) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::defaults(experiment);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, text: raw.trim().to_string() })?;
        set_key(&mut cfg, key.trim(), value.trim(), line)?;
    }
    Ok(cfg)
}

fn fmt_f64_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Serializes a config so that `parse_config(render(c), c.experiment) == c`.
pub fn render(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment = {}", cfg.experiment.label());
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "out_dir = {}", cfg.out_dir.display());
    let _ = writeln!(s, "mode = {}", mode_label(cfg.mode));
    let _ = writeln!(s, "b = {}", cfg.b);
    let _ = writeln!(s, "tau = {}", cfg.tau);
    let _ = writeln!(s, "eta = {}", cfg.eta);
    let _ = writeln!(s, "budget = {}", cfg.budget);
    let _ = writeln!(s, "budget_unit = {}", cfg.budget_unit.label());
    let _ = writeln!(s, "cadence = {}", cfg.cadence);
    let _ = writeln!(s, "bas_side = {}", cfg.bas_side);
    let _ = writeln!(s, "n_hidden = {}", cfg.n_hidden);
    let _ = writeln!(s, "init_std = {}", cfg.init_std);
    let _ = writeln!(s, "prob_hidden = {}", cfg.prob_hidden);
    let _ = writeln!(
        s,
        "ff_hidden = {}",
        cfg.ff_hidden.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(s, "ff_threshold = {}", cfg.ff_threshold);
    let _ = writeln!(s, "ff_lr = {}", cfg.ff_lr);
    let _ = writeln!(s, "ff_train_n = {}", cfg.ff_train_n);
    let _ = writeln!(s, "ff_test_n = {}", cfg.ff_test_n);
    let _ = writeln!(s, "pass_budget = {}", cfg.pass_budget);
    let _ = writeln!(s, "lr_min = {}", cfg.lr_min);
    let _ = writeln!(s, "lr_max = {}", cfg.lr_max);
    let _ = writeln!(s, "n_rates = {}", cfg.n_rates);
    let _ = writeln!(s, "search_budget = {}", cfg.search_budget);
    let _ = writeln!(s, "alpha = {}", cfg.alpha);
    let _ = writeln!(s, "theta0 = {}", cfg.theta0);
    let _ = writeln!(s, "target = {}", cfg.target);
    let _ = writeln!(s, "n_trials = {}", cfg.n_trials);
    let _ = writeln!(
        s,
        "dynamics = {}",
        match cfg.dynamics {
            ToyDynamics::Stochastic => "stochastic",
            ToyDynamics::Deterministic => "deterministic",
        }
    );
    let _ = writeln!(s, "etas = {}", fmt_f64_list(&cfg.etas));
    let _ = writeln!(s, "random_length = {}", cfg.random_length);
    let _ = writeln!(s, "scan_dim = {}", cfg.scan_dim);
    let _ = writeln!(s, "b_step = {}", cfg.b_step);
    s
}

/// SHA-256 of the rendered config, hex-encoded.
pub fn config_hash(rendered: &str) -> String {
    let digest = Sha256::digest(rendered.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

/// Writes a CSV: header, rows, then a trailing config-hash comment line.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
    rendered_config: &str,
) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    let _ = writeln!(out, "# config_sha256={}", config_hash(rendered_config));
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub const TRIAL_HEADER: [&str; 10] =
    ["step", "unit", "metric_name", "metric_value", "diverged", "b", "eta", "tau", "mode", "seed"];

/// TrialRecords as CSV rows; a diverged row carries the `DIVERGED` sentinel
/// in the metric column.
pub fn trial_rows(records: &[TrialRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                r.unit.label().to_string(),
                r.metric_name.clone(),
                if r.diverged { "DIVERGED".to_string() } else { r.metric_value.to_string() },
                r.diverged.to_string(),
                r.b.to_string(),
                r.eta.to_string(),
                r.tau.to_string(),
                r.mode.clone(),
                r.seed.to_string(),
            ]
        })
        .collect()
}

/// Output of one experiment: files written plus human-readable summary lines.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn csv_path(cfg: &RunConfig, stem: &str) -> PathBuf {
    cfg.out_dir.join(format!("{stem}-seed{}.csv", cfg.seed))
}

fn emit(
    cfg: &RunConfig,
    stem: &str,
    header: &[&str],
    rows: &[Vec<String>],
    out: &mut RunOutput,
) -> Result<()> {
    let rendered = render(cfg);
    let path = csv_path(cfg, stem);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_csv(&path, header, rows, &rendered)?;
    let echo = path.with_extension("config");
    std::fs::write(&echo, &rendered).with_context(|| format!("writing {}", echo.display()))?;
    out.files.push(path);
    out.files.push(echo);
    Ok(())
}

/// Builds the BAS dataset and an RBM trainer for the config.
pub fn build_rbm_trainer(cfg: &RunConfig) -> Result<RbmTrainer> {
    let dataset = data::generate_bas(cfg.bas_side)?;
    let n_v = cfg.bas_side * cfg.bas_side;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = RbmParams::init_white_noise(n_v, cfg.n_hidden, cfg.init_std, &mut rng);
    let mut trainer = RbmTrainer::new(params, &dataset.samples)?;
    trainer.prob_hidden = cfg.prob_hidden;
    trainer.restart_negative_from_data = matches!(cfg.mode, UpdateMode::TwoTermCdk { .. });
    Ok(trainer)
}

fn schedule_of(cfg: &RunConfig) -> ScheduleConfig {
    ScheduleConfig {
        mode: cfg.mode,
        b: cfg.b,
        tau: cfg.tau,
        eta: cfg.eta,
        total_budget: cfg.budget,
        budget_unit: cfg.budget_unit,
        metric_cadence: cfg.cadence,
    }
}

fn run_train_rbm(cfg: &RunConfig) -> Result<RunOutput> {
    let mut trainer = build_rbm_trainer(cfg)?;
    let run = run_training(&mut trainer, &schedule_of(cfg), cfg.seed)?;
    let mut out = RunOutput::default();
    emit(cfg, "train-rbm", &TRIAL_HEADER, &trial_rows(&run.records), &mut out)?;
    let last = run.records.last().expect("run always records");
    out.summary.push(format!(
        "train-rbm mode={} final_nll={} phases={} time_steps={}",
        mode_label(cfg.mode),
        if last.diverged { "DIVERGED".to_string() } else { last.metric_value.to_string() },
        run.stats.phases,
        run.stats.time_steps
    ));
    Ok(out)
}

fn run_train_ff(cfg: &RunConfig) -> Result<RunOutput> {
    let (train, test) = data::mnist_or_surrogate(cfg.ff_train_n, cfg.ff_test_n, cfg.seed)?;
    let mode = match cfg.mode {
        UpdateMode::TwoTermCdk { .. } => ff::FfMode::TwoTerm,
        _ => ff::FfMode::Isd { b: cfg.b },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let input_dim = train.sample_dim();
    let mut net = ff::FfNetwork::new(input_dim, &cfg.ff_hidden, &mut rng);
    let train_cfg = ff::FfTrainConfig {
        mode,
        lr: cfg.ff_lr,
        threshold: cfg.ff_threshold,
        pass_budget: cfg.pass_budget,
        seed: cfg.seed,
    };
    let counters = ff::train(&train, &train_cfg, &mut net)?;
    let err = ff::test_error(&net, &test)?;
    let rows = vec![vec![
        mode_label(cfg.mode),
        err.to_string(),
        counters.updates.to_string(),
        counters.passes.to_string(),
        counters.max_samples_per_update.to_string(),
        counters.max_phases_per_update.to_string(),
        cfg.seed.to_string(),
    ]];
    let mut out = RunOutput::default();
    emit(
        cfg,
        "train-ff",
        &["mode", "test_error", "updates", "passes", "max_samples_per_update", "max_phases_per_update", "seed"],
        &rows,
        &mut out,
    )?;
    out.summary.push(format!(
        "train-ff mode={} test_error={err} updates={} passes={}",
        mode_label(cfg.mode),
        counters.updates,
        counters.passes
    ));
    Ok(out)
}

/// Synthetic phase moments drawn reproducibly from the seed, used by the
/// variance scan.
pub fn random_moments(dim: usize, seed: u64) -> PhaseMoments {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_pos: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean_neg: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let trace_cov_pos: f64 = rng.gen_range(0.5..5.0);
    let trace_cov_neg: f64 = rng.gen_range(0.5..5.0);
    let bound = (trace_cov_pos * trace_cov_neg).sqrt();
    let trace_cross = rng.gen_range(-bound..bound);
    PhaseMoments::new(
        GradientVector::new(mean_pos).expect("finite"),
        GradientVector::new(mean_neg).expect("finite"),
        trace_cov_pos,
        trace_cov_neg,
        trace_cross,
    )
    .expect("valid synthetic moments")
}

fn run_variance_scan(cfg: &RunConfig) -> Result<RunOutput> {
    let m = random_moments(cfg.scan_dim, cfg.seed);
    let two_term = two_term_variance_trace(&m);
    let b_min = optimal_positive_probability(&m)?;
    let mut rows = vec![];
    let mut b = cfg.b_step;
    while b < 1.0 - cfg.b_step / 2.0 {
        let trace = estimator_variance_trace(&m, b)?;
        rows.push(vec![b.to_string(), trace.to_string(), two_term.to_string(), b_min.to_string()]);
        b += cfg.b_step;
    }
    let mut out = RunOutput::default();
    emit(cfg, "variance-scan", &["b", "isd_trace", "two_term_trace", "b_min"], &rows, &mut out)?;
    out.summary.push(format!("variance-scan b_min={b_min} two_term_trace={two_term}"));
    Ok(out)
}

fn run_bias_scan(cfg: &RunConfig) -> Result<RunOutput> {
    let mut rows = vec![];
    let mut points = vec![];
    for &eta in &cfg.etas {
        let tau = coupled_tau(eta);
        let law = if cfg.random_length {
            PhaseLengthLaw::Geometric { tau }
        } else {
            PhaseLengthLaw::Deterministic(tau as u64)
        };
        let m = match cfg.dynamics {
            ToyDynamics::Stochastic => {
                let spec = ToyMarkovSpec {
                    alpha: cfg.alpha,
                    theta0: cfg.theta0,
                    target: cfg.target,
                    eta,
                    tau,
                };
                measure_bias(&spec, law, InitMode::Stationary, cfg.n_trials, cfg.seed)
            }
            ToyDynamics::Deterministic => {
                let spec = ToyDeterministicSpec {
                    alpha: cfg.alpha,
                    theta0: cfg.theta0,
                    target: cfg.target,
                    eta,
                    tau,
                };
                measure_bias(&spec, law, InitMode::Stationary, cfg.n_trials, cfg.seed)
            }
        }
        .map_err(|e| anyhow!("bias measurement failed: {e}"))?;
        rows.push(vec![
            m.eta.to_string(),
            m.tau.to_string(),
            m.s.to_string(),
            m.n_trials.to_string(),
            m.mean_g.to_string(),
            m.stderr.to_string(),
            m.truth.to_string(),
            m.bias.to_string(),
        ]);
        points.push((eta, m.bias.max(m.stderr)));
    }
    let mut out = RunOutput::default();
    emit(
        cfg,
        "bias-scan",
        &["eta", "tau", "s", "n_trials", "mean_g", "stderr", "truth", "bias"],
        &rows,
        &mut out,
    )?;
    if points.len() >= 2 {
        if let Ok((slope, _, r2)) = scaling_fit(&points) {
            out.summary.push(format!("bias-scan slope={slope} r2={r2}"));
        }
    }
    // Phase-length third-moment cross-check rides along with the scan.
    let check = third_moment_check(cfg.tau);
    out.summary.push(format!(
        "third-moment tau={} series={} plus_linear_agrees={} minus_linear_agrees={}",
        cfg.tau, check.series, check.plus_agrees, check.minus_agrees
    ));
    Ok(out)
}

fn run_line_search(cfg: &RunConfig) -> Result<RunOutput> {
    let result = learning_rate_line_search(
        |lr| {
            let mut c = cfg.clone();
            c.eta = lr;
            c.budget = cfg.search_budget;
            match build_rbm_trainer(&c) {
                Ok(mut trainer) => match run_training(&mut trainer, &schedule_of(&c), c.seed) {
                    Ok(run) => {
                        let last = run.records.last().expect("run always records");
                        if last.diverged {
                            f64::NAN
                        } else {
                            last.metric_value
                        }
                    }
                    Err(_) => f64::NAN,
                },
                Err(_) => f64::NAN,
            }
        },
        cfg.lr_min,
        cfg.lr_max,
        cfg.n_rates,
    )?;
    let rows: Vec<Vec<String>> = result
        .table
        .iter()
        .map(|&(lr, m)| {
            vec![lr.to_string(), m.map_or("DIVERGED".to_string(), |v| v.to_string())]
        })
        .collect();
    let mut out = RunOutput::default();
    emit(cfg, "line-search", &["lr", "final_nll"], &rows, &mut out)?;
    out.summary.push(format!(
        "line-search best_lr={} best_nll={}",
        result.best_lr, result.best_metric
    ));
    Ok(out)
}

fn run_bas_nll_oracle(cfg: &RunConfig) -> Result<RunOutput> {
    let dataset = data::generate_bas(cfg.bas_side)?;
    let n = dataset.len() as f64;
    let floor = n.ln();
    let rows = vec![vec![cfg.bas_side.to_string(), dataset.len().to_string(), floor.to_string()]];
    let mut out = RunOutput::default();
    emit(cfg, "bas-nll-oracle", &["side", "patterns", "ln_patterns"], &rows, &mut out)?;
    out.summary.push(format!("bas-nll-oracle side={} ln {} = {floor}", cfg.bas_side, dataset.len()));
    Ok(out)
}

/// Runs the configured experiment, writing CSVs into `cfg.out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    if cfg.experiment != Experiment::VarianceScan && cfg.experiment != Experiment::BasNllOracle {
        schedule_of(cfg).validate().map_err(|e| anyhow!("invalid config: {e}"))?;
    }
    match cfg.experiment {
        Experiment::TrainRbm => run_train_rbm(cfg),
        Experiment::TrainFf => run_train_ff(cfg),
        Experiment::VarianceScan => run_variance_scan(cfg),
        Experiment::BiasScan => run_bias_scan(cfg),
        Experiment::LineSearch => run_line_search(cfg),
        Experiment::BasNllOracle => run_bas_nll_oracle(cfg),
    }
}
