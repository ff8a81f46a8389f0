//! Bias-scaling analysis on one-dimensional toy systems.
//!
//! Always-on learning updates parameters while the sampler is still mixing, so
//! the accumulated within-phase update `G = Σ_t (η/τ) ĝ(z_t, θ_t)` is a biased
//! stand-in for the end-of-phase update `η ĝ(z, θ₀)` taken at equilibrium.
//! The bias shrinks as O(η s/τ) + O(η² τ) for a stochastic sampler and
//! O(η s/τ) + O(η²) for a deterministic one, where `s` bounds the distance of
//! the initial state from stationarity. Coupling τ = 1/√η and s = τ² turns
//! both into a single power law in η, which [`scaling_fit`] recovers from
//! measured biases.

use crate::phases::{sample_phase_length, PhaseLengthLaw};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("mixing rate alpha {0} outside (0, 1]")]
    BadAlpha(f64),
    #[error("mean phase length tau {0} must be >= 1")]
    BadTau(f64),
    #[error("need at least one trial")]
    NoTrials,
    #[error("log-log fit needs strictly positive values, got {0}")]
    NonPositiveFitValue(f64),
    #[error("log-log fit needs at least two distinct x values")]
    DegenerateFit,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary Markov chain z ∈ {0, 1} with kernel
/// p(z' = 1 | z, θ) = (1 − α) z + α σ(θ); stationary law Bernoulli(σ(θ)).
#[derive(Debug, Clone, Copy)]
pub struct ToyMarkovSpec {
    pub alpha: f64,
    pub theta0: f64,
    pub target: f64,
    pub eta: f64,
    pub tau: f64,
}

/// Deterministic relaxation z' = (1 − α) z + α σ(θ) with fixed point σ(θ).
#[derive(Debug, Clone, Copy)]
pub struct ToyDeterministicSpec {
    pub alpha: f64,
    pub theta0: f64,
    pub target: f64,
    pub eta: f64,
    pub tau: f64,
}

/// Initial state of the sampler at phase start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// Draw from (or sit at) the stationary law of θ₀.
    Stationary,
    /// Start at the given state value, however far from stationarity.
    Fixed(f64),
}

/// Shared shape of the two toy systems.
pub trait ToySystem {
    fn alpha(&self) -> f64;
    fn theta0(&self) -> f64;
    fn target(&self) -> f64;
    fn eta(&self) -> f64;
    fn tau(&self) -> f64;
    fn init_state<R: Rng + ?Sized>(&self, init: InitMode, rng: &mut R) -> f64;
    fn advance<R: Rng + ?Sized>(&self, z: f64, theta: f64, rng: &mut R) -> f64;

    fn validate(&self) -> Result<(), TheoryError> {
        if !(self.alpha() > 0.0 && self.alpha() <= 1.0) {
            return Err(TheoryError::BadAlpha(self.alpha()));
        }
        if !(self.tau() >= 1.0) {
            return Err(TheoryError::BadTau(self.tau()));
        }
        Ok(())
    }
}

impl ToySystem for ToyMarkovSpec {
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn theta0(&self) -> f64 {
        self.theta0
    }
    fn target(&self) -> f64 {
        self.target
    }
    fn eta(&self) -> f64 {
        self.eta
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn init_state<R: Rng + ?Sized>(&self, init: InitMode, rng: &mut R) -> f64 {
        match init {
            InitMode::Stationary => (rng.gen::<f64>() < sigmoid(self.theta0)) as u8 as f64,
            InitMode::Fixed(z) => z,
        }
    }
    fn advance<R: Rng + ?Sized>(&self, z: f64, theta: f64, rng: &mut R) -> f64 {
        let p = (1.0 - self.alpha) * z + self.alpha * sigmoid(theta);
        (rng.gen::<f64>() < p) as u8 as f64
    }
}

impl ToySystem for ToyDeterministicSpec {
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn theta0(&self) -> f64 {
        self.theta0
    }
    fn target(&self) -> f64 {
        self.target
    }
    fn eta(&self) -> f64 {
        self.eta
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn init_state<R: Rng + ?Sized>(&self, init: InitMode, _rng: &mut R) -> f64 {
        match init {
            InitMode::Stationary => sigmoid(self.theta0),
            InitMode::Fixed(z) => z,
        }
    }
    fn advance<R: Rng + ?Sized>(&self, z: f64, theta: f64, _rng: &mut R) -> f64 {
        (1.0 - self.alpha) * z + self.alpha * sigmoid(theta)
    }
}

/// Runs one always-on phase of length drawn from `law` and returns the
/// accumulated update G = Σ_t (η/τ) ĝ(z_t, θ_t) with ĝ(z, θ) = z − target.
///
/// Each step reads the gradient off the pre-transition state, advances the
/// state under the pre-update parameter, then (unless `freeze_parameters`)
/// applies θ ← θ − (η/τ) ĝ.
pub fn run_always_on_phase<S: ToySystem, R: Rng + ?Sized>(
    spec: &S,
    law: PhaseLengthLaw,
    init: InitMode,
    freeze_parameters: bool,
    rng: &mut R,
) -> Result<f64, TheoryError> {
    spec.validate()?;
    let t_len = sample_phase_length(law, rng);
    let rate = spec.eta() / spec.tau();
    let mut z = spec.init_state(init, rng);
    let mut theta = spec.theta0();
    let mut g_acc = 0.0;
    for _ in 0..t_len {
        let g = z - spec.target();
        let z_next = spec.advance(z, theta, rng);
        if !freeze_parameters {
            theta -= rate * g;
        }
        g_acc += rate * g;
        z = z_next;
    }
    Ok(g_acc)
}

/// Monte-Carlo estimate of E(G) against the idealized end-of-phase update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasMeasurement {
    pub eta: f64,
    pub tau: f64,
    /// Distance-from-stationarity scale implied by the init mode.
    pub s: f64,
    pub n_trials: u64,
    pub mean_g: f64,
    pub stderr: f64,
    /// η (σ(θ₀) − target): the unbiased update at equilibrium.
    pub truth: f64,
    /// |mean_g − truth|.
    pub bias: f64,
}

/// Averages G over `n_trials` independent phases. Trials use per-trial RNG
/// streams derived from `seed`, so results are reproducible and independent
/// of the parallel execution order.
pub fn measure_bias<S: ToySystem + Sync>(
    spec: &S,
    law: PhaseLengthLaw,
    init: InitMode,
    n_trials: u64,
    seed: u64,
) -> Result<BiasMeasurement, TheoryError> {
    spec.validate()?;
    if n_trials == 0 {
        return Err(TheoryError::NoTrials);
    }
    let sums = trial_sums(spec, law, init, n_trials, seed)?;
    let n = n_trials as f64;
    let mean_g = sums.0 / n;
    let var = (sums.1 / n - mean_g * mean_g).max(0.0);
    let stderr = (var / n).sqrt();
    let truth = spec.eta() * (sigmoid(spec.theta0()) - spec.target());
    let s = match init {
        InitMode::Stationary => 0.0,
        InitMode::Fixed(z) => (z - sigmoid(spec.theta0())).abs(),
    };
    Ok(BiasMeasurement {
        eta: spec.eta(),
        tau: spec.tau(),
        s,
        n_trials,
        mean_g,
        stderr,
        truth,
        bias: (mean_g - truth).abs(),
    })
}

fn trial_g<S: ToySystem>(
    spec: &S,
    law: PhaseLengthLaw,
    init: InitMode,
    seed: u64,
    trial: u64,
) -> Result<f64, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    run_always_on_phase(spec, law, init, false, &mut rng)
}

#[cfg(feature = "parallel")]
fn trial_sums<S: ToySystem + Sync>(
    spec: &S,
    law: PhaseLengthLaw,
    init: InitMode,
    n_trials: u64,
    seed: u64,
) -> Result<(f64, f64), TheoryError> {
    use rayon::prelude::*;
    // Fixed-size chunks reduced in index order keep the floating-point sum
    // identical to the sequential path.
    const CHUNK: u64 = 4096;
    let n_chunks = n_trials.div_ceil(CHUNK);
    let partials: Result<Vec<(f64, f64)>, TheoryError> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n_trials);
            let mut acc = (0.0, 0.0);
            for t in lo..hi {
                let g = trial_g(spec, law, init, seed, t)?;
                acc.0 += g;
                acc.1 += g * g;
            }
            Ok(acc)
        })
        .collect();
    let partials = partials?;
    Ok(partials.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1)))
}

#[cfg(not(feature = "parallel"))]
fn trial_sums<S: ToySystem>(
    spec: &S,
    law: PhaseLengthLaw,
    init: InitMode,
    n_trials: u64,
    seed: u64,
) -> Result<(f64, f64), TheoryError> {
    const CHUNK: u64 = 4096;
    let n_chunks = n_trials.div_ceil(CHUNK);
    let mut total = (0.0, 0.0);
    for c in 0..n_chunks {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n_trials);
        let mut acc = (0.0, 0.0);
        for t in lo..hi {
            let g = trial_g(spec, law, init, seed, t)?;
            acc.0 += g;
            acc.1 += g * g;
        }
        total.0 += acc.0;
        total.1 += acc.1;
    }
    Ok(total)
}

/// Ordinary least squares of ln y on ln x: returns (slope, intercept, r²).
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<(f64, f64, f64), TheoryError> {
    if points.len() < 2 {
        return Err(TheoryError::DegenerateFit);
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(x > 0.0) || !(y > 0.0) {
            return Err(TheoryError::NonPositiveFitValue(if x > 0.0 { y } else { x }));
        }
        xs.push(x.ln());
        ys.push(y.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(TheoryError::DegenerateFit);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// One point of the coupled-schedule scan: τ = ⌈η^{−1/2}⌉ so both bias terms
/// scale together, giving an overall O(η^{5/4}) rate when s = √τ.
pub fn coupled_tau(eta: f64) -> f64 {
    (1.0 / eta.sqrt()).ceil()
}
