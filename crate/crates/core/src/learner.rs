//! Online identification of the learnable thermal offsets.
//!
//! Telemetry is cut into fixed-length windows of `(c1_est, c2, f)` sampled
//! every `dt_data`. Each window seeds the model at its first sample, rolls the
//! two-state Euler recurrence across the window under the recorded tensions
//! and scores the predicted housing temperature against the measured one.
//! Gradients of that score with respect to `P1..P5` come from a hand-written
//! reverse sweep over the recurrence.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coefficients, ThermalParams, ThermalState, N_PARAMS};

pub type Gradient = [f64; N_PARAMS];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Sampling interval of the windows (s).
    pub dt_data: f64,
    /// Samples per window.
    pub n_seq: usize,
    /// Windows per gradient step.
    pub n_batch: usize,
    /// Learning rate.
    pub alpha: f64,
    /// Cap on the L2 norm of the averaged gradient.
    pub d_clip: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            dt_data: 1.0,
            n_seq: 30,
            n_batch: 10,
            alpha: 0.02,
            d_clip: 5.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_seq < 2 {
            return Err(Error::Config(format!("n_seq must be at least 2, got {}", self.n_seq)));
        }
        if self.n_batch < 1 {
            return Err(Error::Config("n_batch must be at least 1".into()));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("d_clip", self.d_clip),
            ("dt_data", self.dt_data),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `n_seq` consecutive samples spaced `dt_data` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    /// Estimated core temperature (°C). Only the first entry is used.
    pub c1: Vec<f64>,
    /// Measured housing temperature (°C).
    pub c2: Vec<f64>,
    /// Measured tension (N).
    pub f: Vec<f64>,
    pub start_time: f64,
}

impl SampleWindow {
    pub fn new(c1: Vec<f64>, c2: Vec<f64>, f: Vec<f64>, start_time: f64) -> Result<Self> {
        let w = Self { c1, c2, f, start_time };
        w.validate()?;
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.c2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c2.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c2.len();
        if n < 2 || self.c1.len() != n || self.f.len() != n {
            return Err(Error::InvalidArgument(format!(
                "window sequences must share a length of at least 2 (c1={}, c2={}, f={})",
                self.c1.len(),
                n,
                self.f.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.c1.iter().chain(&self.c2).chain(&self.f).all(|v| v.is_finite())
    }

    fn seed(&self) -> ThermalState {
        ThermalState::new(self.c1[0], self.c2[0])
    }
}

/// Predicted states `x_0..x_{n-1}` with `x_0` the window seed.
fn predict(window: &SampleWindow, k: &Coefficients, dt: f64) -> Vec<ThermalState> {
    let mut states = Vec::with_capacity(window.len());
    let mut x = window.seed();
    states.push(x);
    for &f in &window.f[..window.len() - 1] {
        x = k.step(x, f, dt);
        states.push(x);
    }
    states
}

/// Mean squared housing-temperature error over the `n_seq − 1` predicted
/// steps (°C²).
pub fn window_loss(window: &SampleWindow, params: &ThermalParams, dt_data: f64) -> f64 {
    let k = params.coefficients();
    let states = predict(window, &k, dt_data);
    let n = (window.len() - 1) as f64;
    states[1..]
        .iter()
        .zip(&window.c2[1..])
        .map(|(x, m)| (x.c2 - m).powi(2))
        .sum::<f64>()
        / n
}

/// Loss and its gradient with respect to `P1..P5`.
pub fn window_loss_and_gradient(window: &SampleWindow, params: &ThermalParams, dt_data: f64) -> (f64, Gradient) {
    let k = params.coefficients();
    let w5 = params.base[4];
    let dt = dt_data;
    let states = predict(window, &k, dt);
    let last = window.len() - 1;
    let scale = 2.0 / last as f64;

    let loss = states[1..]
        .iter()
        .zip(&window.c2[1..])
        .map(|(x, m)| (x.c2 - m).powi(2))
        .sum::<f64>()
        / last as f64;

    // adjoint of the state after the final step
    let mut adj1 = 0.0;
    let mut adj2 = scale * (states[last].c2 - window.c2[last]);
    let mut grad = [0.0; N_PARAMS];

    for step in (0..last).rev() {
        let ThermalState { c1, c2 } = states[step];
        let f = window.f[step];
        let gap = c1 - c2;

        // d(next state)/dP, scaled by dt
        grad[0] += adj1 * dt * k.heat_gain * f * f;
        grad[1] += adj1 * dt * gap / k.core_tau;
        grad[2] -= adj2 * dt * gap / k.housing_in_tau;
        grad[3] += adj2 * dt * (c2 - k.ambient) / k.housing_out_tau;
        grad[4] += adj2 * dt * w5 / k.housing_out_tau;

        // transpose of the step Jacobian
        let next1 = adj1 * (1.0 - dt / k.core_tau) + adj2 * dt / k.housing_in_tau;
        let next2 = adj1 * dt / k.core_tau + adj2 * (1.0 - dt / k.housing_in_tau - dt / k.housing_out_tau);
        adj1 = next1;
        adj2 = next2;
        if step > 0 {
            adj2 += scale * (c2 - window.c2[step]);
        }
    }
    (loss, grad)
}

/// Gradient of [`window_loss`] with respect to `P1..P5`.
pub fn window_gradient(window: &SampleWindow, params: &ThermalParams, dt_data: f64) -> Gradient {
    window_loss_and_gradient(window, params, dt_data).1
}

/// FIFO of the most recent windows, bounded by `n_batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchBuffer {
    windows: VecDeque<SampleWindow>,
    capacity: usize,
}

impl BatchBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            windows: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.windows.len() >= self.capacity
    }

    pub fn windows(&self) -> impl Iterator<Item = &SampleWindow> {
        self.windows.iter()
    }

    /// Appends a window and reports whether an update is due. When the
    /// buffer is already full the oldest window is dropped first.
    pub fn push(&mut self, window: SampleWindow) -> bool {
        while self.windows.len() >= self.capacity {
            self.windows.pop_front();
        }
        self.windows.push_back(window);
        self.is_full()
    }

    pub fn evict_oldest(&mut self) -> Option<SampleWindow> {
        self.windows.pop_front()
    }
}

pub fn learner_push(buffer: &mut BatchBuffer, window: SampleWindow) -> bool {
    buffer.push(window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateReport {
    pub params: ThermalParams,
    /// Mean window loss before the step (°C²).
    pub mean_loss: f64,
    /// Norm of the averaged gradient before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// Rescales `grad` in place to norm `cap` if it is longer; returns the
/// original norm.
pub fn clip_norm(grad: &mut Gradient, cap: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > cap {
        let s = cap / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Applies one clipped gradient step `P ← P − alpha·clip(mean gradient)`.
pub fn apply_gradient(params: &ThermalParams, mut grad: Gradient, cfg: &LearnerConfig) -> (ThermalParams, f64) {
    let norm = clip_norm(&mut grad, cfg.d_clip);
    let mut next = *params;
    for (p, g) in next.learned.iter_mut().zip(grad) {
        *p -= cfg.alpha * g;
    }
    (next, norm)
}

/// One gradient step on the averaged batch gradient, then evicts the oldest
/// window.
pub fn learner_update(buffer: &mut BatchBuffer, params: &ThermalParams, cfg: &LearnerConfig) -> Result<UpdateReport> {
    if !buffer.is_full() {
        return Err(Error::NotReady {
            have: buffer.len(),
            need: buffer.capacity(),
        });
    }
    let n = buffer.len() as f64;
    let mut mean = [0.0; N_PARAMS];
    let mut loss = 0.0;
    for w in buffer.windows() {
        let (l, g) = window_loss_and_gradient(w, params, cfg.dt_data);
        loss += l;
        mean.iter_mut().zip(g).for_each(|(m, g)| *m += g);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let (next, grad_norm) = apply_gradient(params, mean, cfg);
    buffer.evict_oldest();
    Ok(UpdateReport {
        params: next,
        mean_loss: loss / n,
        grad_norm,
        clipped: grad_norm > cfg.d_clip,
    })
}

/// Streaming learner: cuts samples into non-overlapping windows and steps
/// the parameters whenever the batch fills.
#[derive(Debug, Clone)]
pub struct Learner {
    cfg: LearnerConfig,
    params: ThermalParams,
    buffer: BatchBuffer,
    pending: SampleWindow,
    updates: usize,
}

impl Learner {
    pub fn new(params: ThermalParams, cfg: LearnerConfig) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        Ok(Self {
            cfg,
            params,
            buffer: BatchBuffer::new(cfg.n_batch),
            pending: Self::empty_window(cfg.n_seq),
            updates: 0,
        })
    }

    fn empty_window(n: usize) -> SampleWindow {
        SampleWindow {
            c1: Vec::with_capacity(n),
            c2: Vec::with_capacity(n),
            f: Vec::with_capacity(n),
            start_time: 0.0,
        }
    }

    pub fn params(&self) -> &ThermalParams {
        &self.params
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Records one sample taken at time `t`. Returns the update report when
    /// this sample completed a window that triggered a gradient step.
    pub fn push_sample(&mut self, t: f64, c1: f64, c2: f64, f: f64) -> Result<Option<UpdateReport>> {
        if self.pending.is_empty() {
            self.pending.start_time = t;
        }
        self.pending.c1.push(c1);
        self.pending.c2.push(c2);
        self.pending.f.push(f);
        if self.pending.len() < self.cfg.n_seq {
            return Ok(None);
        }
        let window = std::mem::replace(&mut self.pending, Self::empty_window(self.cfg.n_seq));
        if !window.is_finite() {
            return Ok(None);
        }
        if !self.buffer.push(window) {
            return Ok(None);
        }
        let report = learner_update(&mut self.buffer, &self.params, &self.cfg)?;
        self.params = report.params;
        self.updates += 1;
        Ok(Some(report))
    }
}

/// Schema tag written into parameter snapshots.
pub const SNAPSHOT_SCHEMA: &str = "actherm.params/v1";

/// Serializable parameter snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    pub schema: String,
    pub motor_id: String,
    pub timestamp: f64,
    #[serde(rename = "W")]
    pub base: [f64; N_PARAMS],
    #[serde(rename = "P")]
    pub learned: [f64; N_PARAMS],
}

impl ParamSnapshot {
    pub fn new(motor_id: impl Into<String>, timestamp: f64, params: &ThermalParams) -> Self {
        Self {
            schema: SNAPSHOT_SCHEMA.to_string(),
            motor_id: motor_id.into(),
            timestamp,
            base: params.base,
            learned: params.learned,
        }
    }

    pub fn params(&self) -> ThermalParams {
        ThermalParams {
            base: self.base,
            learned: self.learned,
        }
    }
}
