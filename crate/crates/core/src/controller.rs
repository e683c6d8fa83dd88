//! Receding-horizon schedule of maximum tension.
//!
//! A plan of `n_control` tension ceilings is rolled through the model from
//! the current state. The loss is the mean squared gap between predicted core
//! temperature and `c1_max`, plus `w_control` times the mean squared tension.
//! The plan is improved by projected gradient steps and warm-started from the
//! previous tick's plan shifted by one slot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ThermalParams, ThermalState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Control period and horizon step (s).
    pub dt_control: f64,
    /// Plan length.
    pub n_control: usize,
    /// Core temperature ceiling (°C).
    pub c1_max: f64,
    /// Weight of the tension magnitude penalty.
    pub w_control: f64,
    /// Step size of the plan update (N).
    pub beta: f64,
    /// Lower tension bound (N).
    pub f_min: f64,
    /// Upper tension bound (N).
    pub f_max: f64,
    /// Gradient steps per tick at most.
    pub iters_per_tick: usize,
    /// Stop once a step improves the loss by less than this.
    pub loss_improvement_tol: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            dt_control: 1.0,
            n_control: 30,
            c1_max: 80.0,
            w_control: 0.001,
            beta: 30.0,
            f_min: 10.0,
            f_max: 300.0,
            iters_per_tick: 50,
            loss_improvement_tol: 1e-6,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_control < 2 {
            return Err(Error::Config(format!(
                "n_control must be at least 2, got {}",
                self.n_control
            )));
        }
        if !(self.f_min < self.f_max) || self.f_min < 0.0 {
            return Err(Error::Config(format!(
                "tension box must satisfy 0 <= f_min < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        for (name, v) in [
            ("dt_control", self.dt_control),
            ("beta", self.beta),
            ("f_max", self.f_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.w_control >= 0.0) || !(self.loss_improvement_tol >= 0.0) || !self.c1_max.is_finite() {
            return Err(Error::Config(
                "w_control, loss_improvement_tol and c1_max must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensionPlan {
    pub f_limit: Vec<f64>,
    pub created_at: f64,
}

impl TensionPlan {
    pub fn constant(value: f64, len: usize, created_at: f64) -> Self {
        Self {
            f_limit: vec![value; len],
            created_at,
        }
    }

    /// Active ceiling.
    pub fn head(&self) -> f64 {
        self.f_limit[0]
    }

    /// Previous plan advanced one slot, last entry repeated.
    pub fn shifted(&self, created_at: f64) -> Self {
        let mut f_limit = self.f_limit[1..].to_vec();
        f_limit.push(*self.f_limit.last().expect("non-empty plan"));
        Self { f_limit, created_at }
    }
}

fn predict_core(plan: &[f64], current: ThermalState, params: &ThermalParams, dt: f64) -> Vec<ThermalState> {
    let k = params.coefficients();
    let mut x = current;
    let mut states = Vec::with_capacity(plan.len());
    states.push(x);
    for &f in &plan[..plan.len() - 1] {
        x = k.step(x, f, dt);
        states.push(x);
    }
    states
}

fn loss_of(states: &[ThermalState], plan: &[f64], cfg: &ControllerConfig) -> f64 {
    let n = plan.len();
    let tracking = states[1..].iter().map(|s| (s.c1 - cfg.c1_max).powi(2)).sum::<f64>() / (n - 1) as f64;
    let effort = plan.iter().map(|f| f * f).sum::<f64>() / n as f64;
    tracking + cfg.w_control * effort
}

pub fn control_loss(plan: &[f64], current: ThermalState, params: &ThermalParams, cfg: &ControllerConfig) -> f64 {
    let states = predict_core(plan, current, params, cfg.dt_control);
    loss_of(&states, plan, cfg)
}

/// Loss and `∂loss/∂f_limit[j]` for every slot.
pub fn control_loss_and_gradient(
    plan: &[f64],
    current: ThermalState,
    params: &ThermalParams,
    cfg: &ControllerConfig,
) -> (f64, Vec<f64>) {
    let n = plan.len();
    let dt = cfg.dt_control;
    let k = params.coefficients();
    let states = predict_core(plan, current, params, dt);
    let loss = loss_of(&states, plan, cfg);

    let track = 2.0 / (n - 1) as f64;
    let mut grad: Vec<f64> = plan.iter().map(|f| 2.0 * cfg.w_control * f / n as f64).collect();
    let mut adj1 = track * (states[n - 1].c1 - cfg.c1_max);
    let mut adj2 = 0.0;
    for j in (0..n - 1).rev() {
        grad[j] += adj1 * dt * 2.0 * k.heat_gain * plan[j];
        let next1 = adj1 * (1.0 - dt / k.core_tau) + adj2 * dt / k.housing_in_tau;
        let next2 = adj1 * dt / k.core_tau + adj2 * (1.0 - dt / k.housing_in_tau - dt / k.housing_out_tau);
        adj1 = next1;
        adj2 = next2;
        if j > 0 {
            adj1 += track * (states[j].c1 - cfg.c1_max);
        }
    }
    (loss, grad)
}

pub fn plan_gradient(plan: &[f64], current: ThermalState, params: &ThermalParams, cfg: &ControllerConfig) -> Vec<f64> {
    control_loss_and_gradient(plan, current, params, cfg).1
}

/// Result of one controller tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    pub plan: TensionPlan,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
}

/// Optimizes the plan for one control period.
///
/// Steps that would raise the loss are rejected and end the tick, so the
/// returned loss never exceeds the warm-start loss.
pub fn controller_tick(
    prev: Option<&TensionPlan>,
    current: ThermalState,
    params: &ThermalParams,
    cfg: &ControllerConfig,
    now: f64,
) -> Result<TickOutcome> {
    if !current.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "controller state must be finite: {current:?}"
        )));
    }
    let mut plan = match prev {
        Some(p) if p.f_limit.len() == cfg.n_control => p.shifted(now),
        _ => TensionPlan::constant(cfg.f_max, cfg.n_control, now),
    };
    for f in &mut plan.f_limit {
        *f = f.clamp(cfg.f_min, cfg.f_max);
    }

    let (mut loss, mut grad) = control_loss_and_gradient(&plan.f_limit, current, params, cfg);
    let initial_loss = loss;
    let mut iterations = 0;
    let mut candidate = plan.f_limit.clone();
    for _ in 0..cfg.iters_per_tick {
        for ((c, f), g) in candidate.iter_mut().zip(&plan.f_limit).zip(&grad) {
            *c = (f - cfg.beta * g).clamp(cfg.f_min, cfg.f_max);
        }
        let (next_loss, next_grad) = control_loss_and_gradient(&candidate, current, params, cfg);
        if !(next_loss <= loss) {
            break;
        }
        let improvement = loss - next_loss;
        std::mem::swap(&mut plan.f_limit, &mut candidate);
        loss = next_loss;
        grad = next_grad;
        iterations += 1;
        if improvement < cfg.loss_improvement_tol {
            break;
        }
    }
    Ok(TickOutcome {
        plan,
        initial_loss,
        final_loss: loss,
        iterations,
    })
}

/// Per-motor controller holding the last plan for warm starts.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    plan: Option<TensionPlan>,
}

impl Controller {
    pub fn new(cfg: ControllerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, plan: None })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn plan(&self) -> Option<&TensionPlan> {
        self.plan.as_ref()
    }

    /// Current ceiling; `f_max` before the first tick.
    pub fn head(&self) -> f64 {
        self.plan.as_ref().map_or(self.cfg.f_max, TensionPlan::head)
    }

    pub fn tick(&mut self, current: ThermalState, params: &ThermalParams, now: f64) -> Result<TickOutcome> {
        let outcome = controller_tick(self.plan.as_ref(), current, params, &self.cfg, now)?;
        self.plan = Some(outcome.plan.clone());
        Ok(outcome)
    }
}
