//! Scenario configuration, loadable from TOML.
//!
//! Every field has a default, so an empty file is a valid configuration and
//! `dump-config` prints the full effective set.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anomaly::AutoArmConfig;
use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::learner::LearnerConfig;
use crate::limiter::LimiterConfig;
use crate::model::{MotorSpec, N_PARAMS};
use crate::sim::{ElasticMuscle, FaultMode, TensionWalk};

/// Offsets of the reference mis-modelled plant.
pub const REFERENCE_P_SIM: [f64; N_PARAMS] = [0.5, 0.5, -0.5, -0.5, 0.5];

/// Which motor datasheet to simulate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MotorSelector {
    Ec4pole90W,
    Ec16_60W,
    /// TOML or JSON file holding a [`MotorSpec`].
    Custom(PathBuf),
}

impl MotorSelector {
    pub fn spec(&self) -> Result<MotorSpec> {
        let spec = match self {
            MotorSelector::Ec4pole90W => MotorSpec::ec4pole_22_90w(),
            MotorSelector::Ec16_60W => MotorSpec::ec16_60w(),
            MotorSelector::Custom(path) => load_spec(path)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn load_spec(path: &Path) -> Result<MotorSpec> {
    let text = crate::error::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

impl FromStr for MotorSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ec4pole_90w" | "ec4pole" => Ok(MotorSelector::Ec4pole90W),
            "ec16_60w" | "ec16" => Ok(MotorSelector::Ec16_60W),
            "" => Err(Error::Config("empty motor id".into())),
            other => Ok(MotorSelector::Custom(PathBuf::from(other))),
        }
    }
}

impl TryFrom<String> for MotorSelector {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MotorSelector> for String {
    fn from(m: MotorSelector) -> Self {
        m.to_string()
    }
}

impl fmt::Display for MotorSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MotorSelector::Ec4pole90W => f.write_str("ec4pole_90w"),
            MotorSelector::Ec16_60W => f.write_str("ec16_60w"),
            MotorSelector::Custom(p) => write!(f, "{}", p.display()),
        }
    }
}

/// When the anomaly reference is captured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ArmPolicy {
    /// Reference is the initial model.
    AtStart,
    /// Reference is captured once learning settles.
    Auto(AutoArmConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalySection {
    pub d_detect: f64,
    pub arm: ArmPolicy,
}

impl Default for AnomalySection {
    fn default() -> Self {
        Self {
            d_detect: 1.0,
            arm: ArmPolicy::Auto(AutoArmConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantSection {
    /// Ambient temperature of the simulated plant (°C).
    pub ambient: f64,
    /// Plant integration step (s).
    pub dt_plant: f64,
    /// Initial core and housing temperature (°C).
    pub initial_temp: f64,
    /// Starting value of the tension walk (N).
    pub initial_tension: f64,
    pub walk: TensionWalk,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            ambient: 30.0,
            dt_plant: 0.02,
            initial_temp: 30.0,
            initial_tension: 100.0,
            walk: TensionWalk::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimLearnSection {
    pub duration: f64,
    pub p_sim: [f64; N_PARAMS],
    /// Seed each window with the plant's true core temperature.
    pub true_core_seed: bool,
    /// Also write every plant-rate observation as replayable telemetry.
    pub write_telemetry: bool,
}

impl Default for SimLearnSection {
    fn default() -> Self {
        Self {
            duration: 3600.0,
            p_sim: REFERENCE_P_SIM,
            true_core_seed: false,
            write_telemetry: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimQuantSection {
    pub duration: f64,
    pub plants: usize,
    pub target_rmse: f64,
    pub checkpoint_interval: f64,
}

impl Default for SimQuantSection {
    fn default() -> Self {
        Self {
            duration: 3600.0,
            plants: 10,
            target_rmse: 0.5,
            checkpoint_interval: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimFaultSection {
    pub duration: f64,
    pub p_sim: [f64; N_PARAMS],
    pub faults: Vec<FaultMode>,
}

impl Default for SimFaultSection {
    fn default() -> Self {
        Self {
            duration: 1800.0,
            p_sim: [0.0; N_PARAMS],
            faults: vec![
                FaultMode::StuckSensor { c2_reported: 30.0 },
                FaultMode::StuckTension { f_true: 200.0 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimControlSection {
    pub duration: f64,
    pub p_sim: [f64; N_PARAMS],
    pub initial_temps: Vec<f64>,
    /// Learning run used to obtain the learned model (s).
    pub learn_duration: f64,
    /// Learned offsets to use instead of running the learner first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_p: Option<[f64; N_PARAMS]>,
}

impl Default for SimControlSection {
    fn default() -> Self {
        Self {
            duration: 600.0,
            p_sim: REFERENCE_P_SIM,
            initial_temps: vec![60.0, 75.0],
            learn_duration: 3600.0,
            model_p: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClosedLoopSection {
    pub duration: f64,
    pub p_sim: [f64; N_PARAMS],
    pub muscle: ElasticMuscle,
    /// Length command requested by the motion layer (mm).
    pub l_ref: f64,
    /// Interval between trace rows (s).
    pub trace_interval: f64,
}

impl Default for ClosedLoopSection {
    fn default() -> Self {
        Self {
            duration: 1200.0,
            p_sim: [0.0; N_PARAMS],
            muscle: ElasticMuscle::default(),
            l_ref: -16.0,
            trace_interval: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ReplaySection {
    /// Telemetry CSV with header `t,c2,f`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Learned offsets to start from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_p: Option<[f64; N_PARAMS]>,
}

/// Full configuration for every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub seed: u64,
    pub motor: MotorSelector,
    /// Ambient temperature assumed by the model (°C).
    pub model_ambient: f64,
    pub motor_id: String,
    pub plant: PlantSection,
    pub estimator: EstimatorConfig,
    pub learner: LearnerConfig,
    pub anomaly: AnomalySection,
    pub controller: ControllerConfig,
    pub limiter: LimiterConfig,
    pub sim_learn: SimLearnSection,
    pub sim_quant: SimQuantSection,
    pub sim_fault: SimFaultSection,
    pub sim_control: SimControlSection,
    pub closed_loop: ClosedLoopSection,
    pub replay: ReplaySection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            motor: MotorSelector::Ec4pole90W,
            model_ambient: 30.0,
            motor_id: "motor0".into(),
            plant: PlantSection::default(),
            estimator: EstimatorConfig::default(),
            learner: LearnerConfig::default(),
            anomaly: AnomalySection::default(),
            controller: ControllerConfig::default(),
            limiter: LimiterConfig::default(),
            sim_learn: SimLearnSection::default(),
            sim_quant: SimQuantSection::default(),
            sim_fault: SimFaultSection::default(),
            sim_control: SimControlSection::default(),
            closed_loop: ClosedLoopSection::default(),
            replay: ReplaySection::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::error::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        self.learner.validate()?;
        self.controller.validate()?;
        self.limiter.validate()?;
        if !(self.anomaly.d_detect > 0.0) {
            return Err(Error::Config("anomaly.d_detect must be positive".into()));
        }
        if !(self.plant.dt_plant > 0.0) {
            return Err(Error::Config("plant.dt_plant must be positive".into()));
        }
        for (name, d) in [
            ("sim_learn", self.sim_learn.duration),
            ("sim_quant", self.sim_quant.duration),
            ("sim_fault", self.sim_fault.duration),
            ("sim_control", self.sim_control.duration),
            ("closed_loop", self.closed_loop.duration),
        ] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("{name}.duration must be positive, got {d}")));
            }
        }
        if self.sim_quant.plants == 0 || !(self.sim_quant.checkpoint_interval > 0.0) {
            return Err(Error::Config(
                "sim_quant needs at least one plant and a positive checkpoint interval".into(),
            ));
        }
        if !(self.closed_loop.muscle.stiffness > 0.0) || !(self.closed_loop.trace_interval > 0.0) {
            return Err(Error::Config(
                "closed_loop muscle stiffness and trace interval must be positive".into(),
            ));
        }
        Ok(())
    }
}
