//! Restricted Boltzmann Machine: block Gibbs sampling, phase gradients, and
//! exact log-likelihood for small visible dimension.
//!
//! Parameters flatten into a [`GradientVector`] as weights (row-major,
//! visible × hidden), then visible biases, then hidden biases; the phase
//! gradients and SGD updates all share that layout.

use crate::estimator::{GradientVector, PhaseKind};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RbmError {
    #[error("state length {got} does not match expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("exact likelihood needs n_v <= {max}, model has {got} visible units")]
    TooManyVisibleUnits { max: usize, got: usize },
}

/// Weight matrix plus bias vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    n_v: usize,
    n_h: usize,
    /// Row-major n_v × n_h.
    weights: Vec<f64>,
    vis_bias: Vec<f64>,
    hid_bias: Vec<f64>,
}

/// Joint binary state of the two unit blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmState {
    pub visible: Vec<u8>,
    pub hidden: Vec<u8>,
}

impl RbmState {
    pub fn zeros(n_v: usize, n_h: usize) -> Self {
        Self { visible: vec![0; n_v], hidden: vec![0; n_h] }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl RbmParams {
    pub fn zeros(n_v: usize, n_h: usize) -> Self {
        Self {
            n_v,
            n_h,
            weights: vec![0.0; n_v * n_h],
            vis_bias: vec![0.0; n_v],
            hid_bias: vec![0.0; n_h],
        }
    }

    /// White-noise weight init with the given standard deviation, zero biases.
    pub fn init_white_noise<R: Rng + ?Sized>(n_v: usize, n_h: usize, std: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(n_v, n_h);
        for w in p.weights.iter_mut() {
            *w = std * standard_normal(rng);
        }
        p
    }

    pub fn n_visible(&self) -> usize {
        self.n_v
    }

    pub fn n_hidden(&self) -> usize {
        self.n_h
    }

    pub fn param_count(&self) -> usize {
        self.n_v * self.n_h + self.n_v + self.n_h
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_h + j]
    }

    pub fn to_gradient_vector(&self) -> GradientVector {
        let mut values = Vec::with_capacity(self.param_count());
        values.extend_from_slice(&self.weights);
        values.extend_from_slice(&self.vis_bias);
        values.extend_from_slice(&self.hid_bias);
        GradientVector::new(values).expect("parameters are finite")
    }

    pub fn from_flat(n_v: usize, n_h: usize, flat: &[f64]) -> Result<Self, RbmError> {
        let expected = n_v * n_h + n_v + n_h;
        if flat.len() != expected {
            return Err(RbmError::ShapeMismatch { expected, got: flat.len() });
        }
        Ok(Self {
            n_v,
            n_h,
            weights: flat[..n_v * n_h].to_vec(),
            vis_bias: flat[n_v * n_h..n_v * n_h + n_v].to_vec(),
            hid_bias: flat[n_v * n_h + n_v..].to_vec(),
        })
    }

    /// `θ += rate * g`, with `g` in the flattened layout.
    pub fn apply_gradient(&mut self, g: &GradientVector, rate: f64) -> Result<(), RbmError> {
        if g.dim() != self.param_count() {
            return Err(RbmError::ShapeMismatch { expected: self.param_count(), got: g.dim() });
        }
        let flat = g.as_slice();
        let nw = self.n_v * self.n_h;
        for (w, v) in self.weights.iter_mut().zip(&flat[..nw]) {
            *w += rate * v;
        }
        for (b, v) in self.vis_bias.iter_mut().zip(&flat[nw..nw + self.n_v]) {
            *b += rate * v;
        }
        for (c, v) in self.hid_bias.iter_mut().zip(&flat[nw + self.n_v..]) {
            *c += rate * v;
        }
        Ok(())
    }

    /// σ(Wᵀv + hid_bias), elementwise.
    pub fn hidden_conditional(&self, v: &[u8]) -> Result<Vec<f64>, RbmError> {
        if v.len() != self.n_v {
            return Err(RbmError::ShapeMismatch { expected: self.n_v, got: v.len() });
        }
        let mut probs = self.hid_bias.clone();
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0 {
                let row = &self.weights[i * self.n_h..(i + 1) * self.n_h];
                for (p, w) in probs.iter_mut().zip(row) {
                    *p += w;
                }
            }
        }
        for p in probs.iter_mut() {
            *p = sigmoid(*p);
        }
        Ok(probs)
    }

    /// σ(Wh + vis_bias), elementwise.
    pub fn visible_conditional(&self, h: &[u8]) -> Result<Vec<f64>, RbmError> {
        if h.len() != self.n_h {
            return Err(RbmError::ShapeMismatch { expected: self.n_h, got: h.len() });
        }
        let mut probs = self.vis_bias.clone();
        for (i, p) in probs.iter_mut().enumerate() {
            let row = &self.weights[i * self.n_h..(i + 1) * self.n_h];
            for (j, &hj) in h.iter().enumerate() {
                if hj != 0 {
                    *p += row[j];
                }
            }
            *p = sigmoid(*p);
        }
        Ok(probs)
    }

    /// Runs `steps` alternating block Gibbs updates (hidden given visible,
    /// then visible given hidden). With `clamp` present the visible block is
    /// reset to the clamp vector after every visible update.
    pub fn gibbs_chain<R: Rng + ?Sized>(
        &self,
        init: &RbmState,
        steps: usize,
        clamp: Option<&[u8]>,
        rng: &mut R,
    ) -> Result<RbmState, RbmError> {
        if init.visible.len() != self.n_v {
            return Err(RbmError::ShapeMismatch { expected: self.n_v, got: init.visible.len() });
        }
        if init.hidden.len() != self.n_h {
            return Err(RbmError::ShapeMismatch { expected: self.n_h, got: init.hidden.len() });
        }
        if let Some(c) = clamp {
            if c.len() != self.n_v {
                return Err(RbmError::ShapeMismatch { expected: self.n_v, got: c.len() });
            }
        }
        let mut state = init.clone();
        for _ in 0..steps {
            self.gibbs_step(&mut state, clamp, rng)?;
        }
        Ok(state)
    }

    /// One block update pair, in place.
    pub fn gibbs_step<R: Rng + ?Sized>(
        &self,
        state: &mut RbmState,
        clamp: Option<&[u8]>,
        rng: &mut R,
    ) -> Result<(), RbmError> {
        let ph = self.hidden_conditional(&state.visible)?;
        for (h, p) in state.hidden.iter_mut().zip(&ph) {
            *h = (rng.gen::<f64>() < *p) as u8;
        }
        let pv = self.visible_conditional(&state.hidden)?;
        for (v, p) in state.visible.iter_mut().zip(&pv) {
            *v = (rng.gen::<f64>() < *p) as u8;
        }
        if let Some(c) = clamp {
            state.visible.copy_from_slice(c);
        }
        Ok(())
    }

    /// Single-phase gradient term in the flattened layout: v hᵀ for weights,
    /// v for visible biases, h for hidden biases. With `use_prob_hidden` the
    /// sampled hidden vector is replaced by its conditional mean given v.
    pub fn phase_gradient(&self, s: &RbmState, use_prob_hidden: bool) -> Result<GradientVector, RbmError> {
        let h: Vec<f64> = if use_prob_hidden {
            self.hidden_conditional(&s.visible)?
        } else {
            if s.hidden.len() != self.n_h {
                return Err(RbmError::ShapeMismatch { expected: self.n_h, got: s.hidden.len() });
            }
            s.hidden.iter().map(|&x| x as f64).collect()
        };
        if s.visible.len() != self.n_v {
            return Err(RbmError::ShapeMismatch { expected: self.n_v, got: s.visible.len() });
        }
        let mut values = Vec::with_capacity(self.param_count());
        for &vi in &s.visible {
            if vi == 0 {
                values.extend(std::iter::repeat(0.0).take(self.n_h));
            } else {
                values.extend_from_slice(&h);
            }
        }
        values.extend(s.visible.iter().map(|&v| v as f64));
        values.extend_from_slice(&h);
        Ok(GradientVector::new(values).expect("phase gradient is finite"))
    }

    /// F(v) = −vis_biasᵀ v − Σⱼ softplus(hid_biasⱼ + (Wᵀv)ⱼ).
    pub fn free_energy(&self, v: &[u8]) -> Result<f64, RbmError> {
        if v.len() != self.n_v {
            return Err(RbmError::ShapeMismatch { expected: self.n_v, got: v.len() });
        }
        let mut linear = 0.0;
        let mut acts = self.hid_bias.clone();
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0 {
                linear += self.vis_bias[i];
                let row = &self.weights[i * self.n_h..(i + 1) * self.n_h];
                for (a, w) in acts.iter_mut().zip(row) {
                    *a += w;
                }
            }
        }
        Ok(-linear - acts.iter().map(|&a| softplus(a)).sum::<f64>())
    }

    /// Mean negative log-likelihood of the dataset in nats per example,
    /// with ln Z computed by enumerating all 2^{n_v} visible states.
    pub fn exact_nll(&self, dataset: &[Vec<f64>]) -> Result<f64, RbmError> {
        let ln_z = self.exact_ln_z()?;
        let mut acc = 0.0;
        for x in dataset {
            let v: Vec<u8> = x.iter().map(|&p| (p != 0.0) as u8).collect();
            acc += self.free_energy(&v)?;
        }
        Ok(ln_z + acc / dataset.len() as f64)
    }

    const MAX_EXACT_VISIBLE: usize = 24;
    const ENUM_CHUNK: usize = 4096;

    /// ln Z by enumeration. Work is partitioned into fixed index chunks so the
    /// parallel and sequential paths reduce in the same order bit for bit.
    pub fn exact_ln_z(&self) -> Result<f64, RbmError> {
        if self.n_v > Self::MAX_EXACT_VISIBLE {
            return Err(RbmError::TooManyVisibleUnits {
                max: Self::MAX_EXACT_VISIBLE,
                got: self.n_v,
            });
        }
        let total = 1u64 << self.n_v;
        let chunks: Vec<(u64, u64)> = (0..total)
            .step_by(Self::ENUM_CHUNK)
            .map(|start| (start, (start + Self::ENUM_CHUNK as u64).min(total)))
            .collect();

        let per_chunk: Vec<(f64, f64)> = map_chunks(&chunks, |&(start, end)| {
            let mut buf = vec![0u8; self.n_v];
            let mut max = f64::NEG_INFINITY;
            let mut energies = Vec::with_capacity((end - start) as usize);
            for code in start..end {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = (code >> i & 1) as u8;
                }
                let e = -self.free_energy(&buf).expect("buffer sized to n_v");
                if e > max {
                    max = e;
                }
                energies.push(e);
            }
            let sum: f64 = energies.iter().map(|&e| (e - max).exp()).sum();
            (max, sum)
        });

        let global_max = per_chunk.iter().fold(f64::NEG_INFINITY, |m, &(c, _)| m.max(c));
        let total_sum: f64 =
            per_chunk.iter().map(|&(max, sum)| sum * (max - global_max).exp()).sum();
        Ok(global_max + total_sum.ln())
    }
}

#[cfg(feature = "parallel")]
fn map_chunks<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<T, U, F: Fn(&T) -> U>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Sequential ln Z, kept alongside the dispatching version for benchmarking.
pub fn exact_ln_z_serial(p: &RbmParams) -> Result<f64, RbmError> {
    if p.n_v > RbmParams::MAX_EXACT_VISIBLE {
        return Err(RbmError::TooManyVisibleUnits { max: RbmParams::MAX_EXACT_VISIBLE, got: p.n_v });
    }
    let total = 1u64 << p.n_v;
    let mut buf = vec![0u8; p.n_v];
    let mut max = f64::NEG_INFINITY;
    let mut energies = Vec::with_capacity(total as usize);
    for code in 0..total {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = (code >> i & 1) as u8;
        }
        let e = -p.free_energy(&buf)?;
        max = max.max(e);
        energies.push(e);
    }
    let sum: f64 = energies.iter().map(|&e| (e - max).exp()).sum();
    Ok(max + sum.ln())
}

/// RBM wired into the phase-dynamics engine.
///
/// Positive phases clamp the visible units to a freshly drawn data sample;
/// negative phases run the free chain. In persistent mode the negative chain
/// carries its state across phases; in restart mode (the classic baseline) it
/// is reseeded from the most recent data sample at the start of each negative
/// phase. The training metric is the exact dataset NLL.
pub struct RbmTrainer {
    pub params: RbmParams,
    chain: RbmState,
    data: Vec<Vec<u8>>,
    data_f: Vec<Vec<f64>>,
    clamp: Option<Vec<u8>>,
    current_sample: Vec<u8>,
    /// Use conditional hidden means instead of samples in the gradient.
    pub prob_hidden: bool,
    /// Restart the negative chain from data each negative phase.
    pub restart_negative_from_data: bool,
}

impl RbmTrainer {
    pub fn new(params: RbmParams, dataset: &[Vec<f64>]) -> Result<Self, RbmError> {
        let n_v = params.n_visible();
        for x in dataset {
            if x.len() != n_v {
                return Err(RbmError::ShapeMismatch { expected: n_v, got: x.len() });
            }
        }
        let data: Vec<Vec<u8>> =
            dataset.iter().map(|x| x.iter().map(|&p| (p != 0.0) as u8).collect()).collect();
        let chain = RbmState::zeros(n_v, params.n_hidden());
        let first = data.first().cloned().unwrap_or_else(|| vec![0; n_v]);
        Ok(Self {
            params,
            chain,
            data,
            data_f: dataset.to_vec(),
            clamp: None,
            current_sample: first,
            prob_hidden: true,
            restart_negative_from_data: false,
        })
    }
}

impl crate::phases::PhaseModel for RbmTrainer {
    fn begin_phase<R: Rng + ?Sized>(&mut self, phase: PhaseKind, rng: &mut R) {
        match phase {
            PhaseKind::Positive => {
                let idx = rng.gen_range(0..self.data.len());
                self.current_sample = self.data[idx].clone();
                self.chain.visible.copy_from_slice(&self.current_sample);
                self.clamp = Some(self.current_sample.clone());
            }
            PhaseKind::Negative => {
                if self.restart_negative_from_data {
                    self.chain.visible.copy_from_slice(&self.current_sample);
                }
                self.clamp = None;
            }
        }
    }

    fn dynamics_step<R: Rng + ?Sized>(&mut self, _phase: PhaseKind, rng: &mut R) {
        self.params
            .gibbs_step(&mut self.chain, self.clamp.as_deref(), rng)
            .expect("state shape fixed at construction");
    }

    fn phase_gradient(&self, _phase: PhaseKind) -> GradientVector {
        self.params
            .phase_gradient(&self.chain, self.prob_hidden)
            .expect("state shape fixed at construction")
    }

    fn apply_update(&mut self, g: &GradientVector, rate: f64) {
        // Likelihood ascent: θ += η (g₊ − g₋) in expectation.
        self.params.apply_gradient(g, rate).expect("gradient dimension fixed");
    }

    fn metric(&mut self) -> f64 {
        self.params.exact_nll(&self.data_f).unwrap_or(f64::NAN)
    }

    fn metric_name(&self) -> &'static str {
        "nll"
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
