//! Ground-truth actuator plant, scenario generators and fault injection.
//!
//! Randomness comes from [`ChaCha8Rng`] seeded through
//! [`SeedableRng::seed_from_u64`], which produces the same stream on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coefficients, MotorSpec, ThermalParams, ThermalState, N_PARAMS};

pub type SimRng = ChaCha8Rng;

pub fn sim_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// What the plant hides from or misreports to the observer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultMode {
    #[default]
    None,
    /// The housing sensor reports a constant temperature.
    StuckSensor { c2_reported: f64 },
    /// The plant is loaded with a constant tension while the commanded value
    /// is reported.
    StuckTension { f_true: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub spec: MotorSpec,
    /// True parameter offsets of the simulated motor.
    pub p_sim: [f64; N_PARAMS],
    /// Ambient temperature (°C).
    pub ambient: f64,
    /// Integration step (s).
    pub dt_plant: f64,
    pub seed: u64,
}

impl PlantConfig {
    pub fn new(spec: MotorSpec, p_sim: [f64; N_PARAMS]) -> Self {
        Self {
            spec,
            p_sim,
            ambient: 30.0,
            dt_plant: 0.02,
            seed: 0,
        }
    }

    pub fn true_params(&self) -> Result<ThermalParams> {
        Ok(ThermalParams::from_spec(&self.spec, self.ambient)?.with_learned(self.p_sim))
    }
}

/// One reading of the plant's sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub c2: f64,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct Plant {
    params: ThermalParams,
    coeffs: Coefficients,
    state: ThermalState,
    fault: FaultMode,
    dt: f64,
}

impl Plant {
    pub fn new(cfg: &PlantConfig, initial: ThermalState, fault: FaultMode) -> Result<Self> {
        if !(cfg.dt_plant > 0.0) {
            return Err(Error::Config(format!(
                "dt_plant must be positive, got {}",
                cfg.dt_plant
            )));
        }
        let params = cfg.true_params()?;
        Ok(Self {
            params,
            coeffs: params.coefficients(),
            state: initial,
            fault,
            dt: cfg.dt_plant,
        })
    }

    pub fn state(&self) -> ThermalState {
        self.state
    }

    pub fn params(&self) -> &ThermalParams {
        &self.params
    }

    pub fn fault(&self) -> FaultMode {
        self.fault
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Tension the plant actually receives for a commanded value.
    pub fn true_tension(&self, f_commanded: f64) -> f64 {
        match self.fault {
            FaultMode::StuckTension { f_true } => f_true,
            _ => f_commanded,
        }
    }

    /// Sensor readings of the current state under `f_commanded`.
    pub fn observe(&self, f_commanded: f64) -> Observation {
        let c2 = match self.fault {
            FaultMode::StuckSensor { c2_reported } => c2_reported,
            _ => self.state.c2,
        };
        Observation { c2, f: f_commanded }
    }

    /// Integrates one plant step and returns the new true state with its
    /// observation.
    pub fn step(&mut self, f_commanded: f64) -> (ThermalState, Observation) {
        let f = self.true_tension(f_commanded);
        self.state = self.coeffs.step(self.state, f, self.dt);
        (self.state, self.observe(f_commanded))
    }
}

pub fn plant_step(plant: &mut Plant, f_commanded: f64) -> (ThermalState, Observation) {
    plant.step(f_commanded)
}

/// Bounded random walk `f ← clamp(f + U(−step, step), lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensionWalk {
    pub step: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for TensionWalk {
    fn default() -> Self {
        Self {
            step: 50.0,
            lo: 10.0,
            hi: 200.0,
        }
    }
}

impl TensionWalk {
    pub fn apply(&self, f_prev: f64, draw: f64) -> f64 {
        (f_prev + draw).clamp(self.lo, self.hi)
    }

    pub fn next<R: Rng + ?Sized>(&self, rng: &mut R, f_prev: f64) -> f64 {
        let draw = rng.random_range(-self.step..=self.step);
        self.apply(f_prev, draw)
    }
}

pub fn random_tension_walk<R: Rng + ?Sized>(rng: &mut R, f_prev: f64) -> f64 {
    TensionWalk::default().next(rng, f_prev)
}

/// Random offset vector with `sqrt(mean(p²)) = target_rmse`.
pub fn perturbed_params<R: Rng + ?Sized>(rng: &mut R, target_rmse: f64) -> Result<[f64; N_PARAMS]> {
    if !(target_rmse >= 0.0 && target_rmse.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target RMSE must be non-negative, got {target_rmse}"
        )));
    }
    if target_rmse == 0.0 {
        return Ok([0.0; N_PARAMS]);
    }
    loop {
        let v: [f64; N_PARAMS] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let rms = (v.iter().map(|x| x * x).sum::<f64>() / N_PARAMS as f64).sqrt();
        if rms > 1e-6 {
            return Ok(v.map(|x| x * target_rmse / rms));
        }
    }
}

/// RMSE between two parameter vectors over their common prefix.
pub fn param_rmse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64).sqrt()
}

/// Linear spring standing in for a muscle pulled against a fixed endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticMuscle {
    /// N/mm.
    pub stiffness: f64,
    /// Command at which the muscle goes slack (mm).
    pub rest_command: f64,
}

impl Default for ElasticMuscle {
    fn default() -> Self {
        Self {
            stiffness: 12.5,
            rest_command: 0.0,
        }
    }
}

/// Tension for a length command; pulling (below rest) generates tension.
pub fn elastic_tension(muscle: &ElasticMuscle, command: f64) -> f64 {
    muscle.stiffness * (muscle.rest_command - command).max(0.0)
}
