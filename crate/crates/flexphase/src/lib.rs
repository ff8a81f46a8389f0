//! Contrastive learning with flexible phase dynamics.
//!
//! Two-term contrastive learning computes its gradient as the difference of a
//! positive-phase and a negative-phase term. This crate implements a
//! temporally local alternative: at each step a Bernoulli coin picks a single
//! phase, and the resulting one-phase gradient is importance-reweighted so the
//! estimate stays unbiased. On top of that estimator sit phase-dynamics
//! schedules (end-of-phase updates, always-on learning with fixed or random
//! phase lengths), two model families to drive them (a Restricted Boltzmann
//! Machine with block Gibbs sampling and a Forward-Forward classifier), and
//! harnesses that validate the variance analytics and bias-scaling behaviour
//! on systems with known equilibria.
//!
//! - [`estimator`] — phase-sampled gradient estimators and variance analytics
//! - [`rbm`] — RBM conditionals, Gibbs chains, exact likelihood for small models
//! - [`ff`] — Forward-Forward network trained layerwise by goodness contrast
//! - [`phases`] — training schedules and phase-length laws
//! - [`theory`] — bias measurement on toy systems with known equilibria
//! - [`data`] — Bars-And-Stripes generation, IDX parsing, binarization
//! - [`cli`] — experiment runner, flat-text config, CSV emission
//!
//! Hot loops (likelihood enumeration, Monte-Carlo trials, line search) run on
//! rayon when the default `parallel` feature is enabled and fall back to
//! sequential code otherwise; reduction order is fixed either way so results
//! are bit-identical.

pub mod cli;
pub mod data;
pub mod estimator;
pub mod ff;
pub mod phases;
pub mod rbm;
pub mod theory;

pub use estimator::{GradientVector, PhaseKind, PhaseMoments};
pub use phases::{ScheduleConfig, TrialRecord, UpdateMode};
