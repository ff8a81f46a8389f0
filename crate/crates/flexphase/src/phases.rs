//! Phase-dynamics engine: end-of-phase updates, always-on learning with fixed
//! and stochastic phase lengths, and phase-length distribution utilities.
//!
//! A training run is a sequence of phases. The classic baseline runs a
//! positive and a negative phase back to back and applies one two-term update.
//! The single-phase schedules draw the phase kind from a Bernoulli coin and
//! either update once at the end of the phase, or at every dynamics step with
//! the learning rate scaled down by the (mean) phase length.

use crate::estimator::{
    isd_gradient, sample_phase, two_term_gradient, EstimatorError, GradientVector, PhaseKind,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhasesError {
    #[error("positive-phase probability {0} outside (0, 1)")]
    BadProbability(f64),
    #[error("mean phase length {0} must be >= 1")]
    BadTau(u64),
    #[error("learning rate {0} must be positive and finite")]
    BadEta(f64),
    #[error("budget must be positive")]
    BadBudget,
    #[error("no viable learning rate: every candidate diverged")]
    NoViableRate,
    #[error("line-search bounds must satisfy 0 < lr_min < lr_max (got {min}, {max})")]
    BadSearchBounds { min: f64, max: f64 },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Phase-selection and update policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateMode {
    /// Paired clamped/free phases of `k` steps each with one two-term update
    /// per pair; the temporally non-local baseline.
    TwoTermCdk { k: u64 },
    /// Coin-selected phase, one reweighted update at the end of each phase.
    IsdEndOfPhase,
    /// Coin-selected phase, an update at every dynamics step at rate η/τ.
    IsdAlwaysOnFixedT,
    /// As above, but the phase ends by a per-step coin with probability 1/τ.
    IsdAlwaysOnRandomT,
}

impl UpdateMode {
    pub fn label(&self) -> String {
        match self {
            UpdateMode::TwoTermCdk { k } => format!("cdk{k}"),
            UpdateMode::IsdEndOfPhase => "isd".to_string(),
            UpdateMode::IsdAlwaysOnFixedT => "aol".to_string(),
            UpdateMode::IsdAlwaysOnRandomT => "aol_random_t".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetUnit {
    Phases,
    GradientSteps,
    TimeSteps,
}

impl BudgetUnit {
    pub fn label(&self) -> &'static str {
        match self {
            BudgetUnit::Phases => "phases",
            BudgetUnit::GradientSteps => "gradient_steps",
            BudgetUnit::TimeSteps => "time_steps",
        }
    }
}

/// Phase-dynamics policy for one training run.
#[derive(Debug, Clone)]
pub struct ScheduleConfig {
    pub mode: UpdateMode,
    /// Positive-phase probability; ignored by the two-term baseline.
    pub b: f64,
    /// Phase length (mean length for the random-length mode), in steps.
    pub tau: u64,
    /// Learning rate before any 1/τ scaling.
    pub eta: f64,
    pub total_budget: u64,
    pub budget_unit: BudgetUnit,
    /// Record the metric every this many phases.
    pub metric_cadence: u64,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), PhasesError> {
        if !matches!(self.mode, UpdateMode::TwoTermCdk { .. }) && !(self.b > 0.0 && self.b < 1.0) {
            return Err(PhasesError::BadProbability(self.b));
        }
        if self.tau < 1 {
            return Err(PhasesError::BadTau(self.tau));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(PhasesError::BadEta(self.eta));
        }
        if self.total_budget == 0 {
            return Err(PhasesError::BadBudget);
        }
        Ok(())
    }
}

/// Distribution of a single phase's length in dynamics steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseLengthLaw {
    Deterministic(u64),
    /// Support {1, 2, …} with P(T = t) = (1 − μ)^{t−1} μ and μ = 1/τ.
    Geometric { tau: f64 },
}

/// Draws one phase length.
pub fn sample_phase_length<R: Rng + ?Sized>(law: PhaseLengthLaw, rng: &mut R) -> u64 {
    match law {
        PhaseLengthLaw::Deterministic(t) => t,
        PhaseLengthLaw::Geometric { tau } => {
            let mu = 1.0 / tau;
            if mu >= 1.0 {
                // τ = 1: the end coin succeeds on the first step.
                let _ = rng.gen::<f64>();
                return 1;
            }
            // A phase lasts at least one step; the end coin runs from step one.
            let mut t = 1u64;
            while rng.gen::<f64>() >= mu {
                t += 1;
            }
            t
        }
    }
}

/// First three raw moments of the geometric phase length with mean τ:
/// E(T) = τ, E(T²) = 2τ² − τ, E(T³) = 6τ³ − 6τ² + τ.
pub fn phase_length_moments(tau: u64) -> (f64, f64, f64) {
    let t = tau as f64;
    (t, 2.0 * t * t - t, 6.0 * t * t * t - 6.0 * t * t + t)
}

/// Direct series evaluation of E(T³) = Σ t³ (1 − μ)^{t−1} μ, truncated when
/// the tail falls below 1e−15 of the running sum.
pub fn third_moment_series(tau: f64) -> f64 {
    let mu = 1.0 / tau;
    if mu >= 1.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut weight = mu; // (1 − μ)^{t−1} μ at t = 1
    let mut t = 1u64;
    loop {
        let term = (t as f64).powi(3) * weight;
        sum += term;
        if term < 1e-15 * sum.max(1.0) && t as f64 > 10.0 * tau {
            return sum;
        }
        weight *= 1.0 - mu;
        t += 1;
    }
}

/// Side-by-side check of the two candidate closed forms for E(T³), which
/// differ in the sign of the linear term.
#[derive(Debug, Clone, Copy)]
pub struct ThirdMomentCheck {
    pub series: f64,
    /// 6τ³ − 6τ² + τ
    pub plus_linear: f64,
    /// 6τ³ − 6τ² − τ
    pub minus_linear: f64,
    pub plus_agrees: bool,
    pub minus_agrees: bool,
}

pub fn third_moment_check(tau: u64) -> ThirdMomentCheck {
    let t = tau as f64;
    let series = third_moment_series(t);
    let plus_linear = 6.0 * t * t * t - 6.0 * t * t + t;
    let minus_linear = 6.0 * t * t * t - 6.0 * t * t - t;
    let rel = |x: f64| (x - series).abs() / series.abs().max(1.0);
    ThirdMomentCheck {
        series,
        plus_linear,
        minus_linear,
        plus_agrees: rel(plus_linear) < 1e-9,
        minus_agrees: rel(minus_linear) < 1e-9,
    }
}

/// Model-side hooks driven by the schedule engine.
pub trait PhaseModel {
    /// Start a new phase: draw the sample or context and reset clamping.
    fn begin_phase<R: Rng + ?Sized>(&mut self, phase: PhaseKind, rng: &mut R);
    /// One step of internal dynamics under the current phase.
    fn dynamics_step<R: Rng + ?Sized>(&mut self, phase: PhaseKind, rng: &mut R);
    /// Single-phase gradient term read off the current state.
    fn phase_gradient(&self, phase: PhaseKind) -> GradientVector;
    /// `θ += rate · g` in the model's own sign convention.
    fn apply_update(&mut self, g: &GradientVector, rate: f64);
    fn metric(&mut self) -> f64;
    fn metric_name(&self) -> &'static str;
}

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub step: u64,
    pub unit: BudgetUnit,
    pub metric_name: String,
    pub metric_value: f64,
    pub diverged: bool,
    pub b: f64,
    pub eta: f64,
    pub tau: u64,
    pub mode: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunStats {
    pub phases: u64,
    pub positive_phases: u64,
    pub gradient_steps: u64,
    pub time_steps: u64,
    pub diverged: bool,
}

#[derive(Debug)]
pub struct TrainingRun {
    pub records: Vec<TrialRecord>,
    pub stats: RunStats,
}

struct Recorder<'a> {
    records: Vec<TrialRecord>,
    sched: &'a ScheduleConfig,
    seed: u64,
    metric_name: &'static str,
}

impl<'a> Recorder<'a> {
    fn push(&mut self, stats: &RunStats, value: f64, diverged: bool) {
        for (unit, step) in [
            (BudgetUnit::Phases, stats.phases),
            (BudgetUnit::GradientSteps, stats.gradient_steps),
            (BudgetUnit::TimeSteps, stats.time_steps),
        ] {
            self.records.push(TrialRecord {
                step,
                unit,
                metric_name: self.metric_name.to_string(),
                metric_value: value,
                diverged,
                b: self.sched.b,
                eta: self.sched.eta,
                tau: self.sched.tau,
                mode: self.sched.mode.label(),
                seed: self.seed,
            });
        }
    }
}

/// Runs one training loop to the configured budget, recording the metric
/// every `metric_cadence` phases plus once at the start and once at the end.
///
/// A non-finite metric writes a terminal diverged row and stops the run.
pub fn run_training<M: PhaseModel>(
    model: &mut M,
    sched: &ScheduleConfig,
    seed: u64,
) -> Result<TrainingRun, PhasesError> {
    sched.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = RunStats::default();
    let mut rec =
        Recorder { records: vec![], sched, seed, metric_name: model.metric_name() };

    let initial = model.metric();
    rec.push(&stats, initial, false);
    let mut phases_since_metric = 0u64;

    loop {
        let spent = match sched.budget_unit {
            BudgetUnit::Phases => stats.phases,
            BudgetUnit::GradientSteps => stats.gradient_steps,
            BudgetUnit::TimeSteps => stats.time_steps,
        };
        if spent >= sched.total_budget {
            break;
        }

        match sched.mode {
            UpdateMode::TwoTermCdk { k } => {
                model.begin_phase(PhaseKind::Positive, &mut rng);
                for _ in 0..k {
                    model.dynamics_step(PhaseKind::Positive, &mut rng);
                }
                let g_pos = model.phase_gradient(PhaseKind::Positive);
                model.begin_phase(PhaseKind::Negative, &mut rng);
                for _ in 0..k {
                    model.dynamics_step(PhaseKind::Negative, &mut rng);
                }
                let g_neg = model.phase_gradient(PhaseKind::Negative);
                let g = two_term_gradient(&g_pos, &g_neg)?;
                model.apply_update(&g, sched.eta);
                stats.phases += 2;
                stats.positive_phases += 1;
                stats.gradient_steps += 1;
                stats.time_steps += 2 * k;
                phases_since_metric += 2;
            }
            UpdateMode::IsdEndOfPhase => {
                let phase = sample_phase(sched.b, &mut rng)?;
                model.begin_phase(phase, &mut rng);
                for _ in 0..sched.tau {
                    model.dynamics_step(phase, &mut rng);
                }
                let g = isd_gradient(phase, &model.phase_gradient(phase), sched.b)?;
                model.apply_update(&g, sched.eta);
                stats.phases += 1;
                stats.positive_phases += (phase == PhaseKind::Positive) as u64;
                stats.gradient_steps += 1;
                stats.time_steps += sched.tau;
                phases_since_metric += 1;
            }
            UpdateMode::IsdAlwaysOnFixedT | UpdateMode::IsdAlwaysOnRandomT => {
                let phase = sample_phase(sched.b, &mut rng)?;
                model.begin_phase(phase, &mut rng);
                let rate = sched.eta / sched.tau as f64;
                let mu = 1.0 / sched.tau as f64;
                let mut t = 0u64;
                loop {
                    model.dynamics_step(phase, &mut rng);
                    let g = isd_gradient(phase, &model.phase_gradient(phase), sched.b)?;
                    model.apply_update(&g, rate);
                    t += 1;
                    stats.gradient_steps += 1;
                    stats.time_steps += 1;
                    match sched.mode {
                        UpdateMode::IsdAlwaysOnFixedT => {
                            if t >= sched.tau {
                                break;
                            }
                        }
                        _ => {
                            // End-of-phase coin, evaluated once per completed step.
                            if rng.gen::<f64>() < mu {
                                break;
                            }
                        }
                    }
                }
                stats.phases += 1;
                stats.positive_phases += (phase == PhaseKind::Positive) as u64;
                phases_since_metric += 1;
            }
        }

        if phases_since_metric >= sched.metric_cadence {
            phases_since_metric = 0;
            let value = model.metric();
            if !value.is_finite() {
                stats.diverged = true;
                rec.push(&stats, f64::NAN, true);
                return Ok(TrainingRun { records: rec.records, stats });
            }
            rec.push(&stats, value, false);
        }
    }

    let final_value = model.metric();
    if final_value.is_finite() {
        rec.push(&stats, final_value, false);
    } else {
        stats.diverged = true;
        rec.push(&stats, f64::NAN, true);
    }
    Ok(TrainingRun { records: rec.records, stats })
}

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub best_lr: f64,
    pub best_metric: f64,
    /// (learning rate, final metric); None marks a diverged rate.
    pub table: Vec<(f64, Option<f64>)>,
}

/// Log10-equispaced grid of `n` learning rates including both endpoints.
pub fn line_search_grid(lr_min: f64, lr_max: f64, n: usize) -> Result<Vec<f64>, PhasesError> {
    if !(lr_min > 0.0 && lr_min < lr_max) || n < 2 {
        return Err(PhasesError::BadSearchBounds { min: lr_min, max: lr_max });
    }
    let (lo, hi) = (lr_min.log10(), lr_max.log10());
    Ok((0..n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect())
}

/// Evaluates a training closure at each grid rate and returns the one with
/// the lowest final training metric. Rates producing a non-finite metric are
/// marked failed and excluded.
pub fn learning_rate_line_search<F>(
    train: F,
    lr_min: f64,
    lr_max: f64,
    n: usize,
) -> Result<LineSearchResult, PhasesError>
where
    F: Fn(f64) -> f64 + Sync,
{
    let grid = line_search_grid(lr_min, lr_max, n)?;
    let metrics = eval_grid(&grid, &train);
    let table: Vec<(f64, Option<f64>)> = grid
        .iter()
        .zip(metrics)
        .map(|(&lr, m)| (lr, if m.is_finite() { Some(m) } else { None }))
        .collect();
    let best = table
        .iter()
        .filter_map(|&(lr, m)| m.map(|v| (lr, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match best {
        Some((best_lr, best_metric)) => Ok(LineSearchResult { best_lr, best_metric, table }),
        None => Err(PhasesError::NoViableRate),
    }
}

#[cfg(feature = "parallel")]
fn eval_grid<F: Fn(f64) -> f64 + Sync>(grid: &[f64], train: &F) -> Vec<f64> {
    use rayon::prelude::*;
    grid.par_iter().map(|&lr| train(lr)).collect()
}

#[cfg(not(feature = "parallel"))]
fn eval_grid<F: Fn(f64) -> f64>(grid: &[f64], train: &F) -> Vec<f64> {
    grid.iter().map(|&lr| train(lr)).collect()
}
