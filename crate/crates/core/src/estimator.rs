//! Running estimate of core temperature from housing temperature and tension.
//!
//! Only the core equation is integrated; the housing temperature always comes
//! from the sensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ThermalParams;

/// How the first core estimate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum InitialCorePolicy {
    /// Core starts at the first housing reading.
    #[default]
    FirstHousingReading,
    /// Core starts at a fixed temperature (°C).
    FixedAmbient(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Update interval (s).
    pub dt_est: f64,
    pub initial_c1: InitialCorePolicy,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            dt_est: 0.02,
            initial_c1: InitialCorePolicy::FirstHousingReading,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_est > 0.0 && self.dt_est.is_finite()) {
            return Err(Error::Config(format!("dt_est must be positive, got {}", self.dt_est)));
        }
        if let InitialCorePolicy::FixedAmbient(t) = self.initial_c1 {
            if !t.is_finite() {
                return Err(Error::Config("fixed initial core temperature must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    /// Estimated core temperature (°C).
    pub c1_est: f64,
    /// Time of the last update (s).
    pub last_update: f64,
}

fn check_measurement(c2: f64, f: f64) -> Result<()> {
    if c2.is_finite() && f.is_finite() {
        Ok(())
    } else {
        Err(Error::Measurement { c2, f })
    }
}

pub fn estimator_init(first_c2: f64, cfg: &EstimatorConfig) -> Result<EstimatorState> {
    check_measurement(first_c2, 0.0)?;
    let c1_est = match cfg.initial_c1 {
        InitialCorePolicy::FirstHousingReading => first_c2,
        InitialCorePolicy::FixedAmbient(t) => t,
    };
    Ok(EstimatorState {
        c1_est,
        last_update: 0.0,
    })
}

/// Advances the core estimate by one step of `cfg.dt_est`.
///
/// On a non-finite measurement the error is returned and the caller keeps its
/// previous state.
pub fn estimator_tick(
    state: EstimatorState,
    c2_meas: f64,
    f_meas: f64,
    params: &ThermalParams,
    cfg: &EstimatorConfig,
) -> Result<EstimatorState> {
    check_measurement(c2_meas, f_meas)?;
    let k = params.coefficients();
    Ok(EstimatorState {
        c1_est: state.c1_est + k.core_rate(f_meas, state.c1_est, c2_meas) * cfg.dt_est,
        last_update: state.last_update + cfg.dt_est,
    })
}

/// Per-motor estimator driven by timestamped measurements.
#[derive(Debug, Clone)]
pub struct Estimator {
    cfg: EstimatorConfig,
    state: Option<EstimatorState>,
    held: Option<(f64, f64)>,
}

impl Estimator {
    pub fn new(cfg: EstimatorConfig) -> Self {
        Self {
            cfg,
            state: None,
            held: None,
        }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// Current estimate, if the estimator has seen a measurement.
    pub fn state(&self) -> Option<EstimatorState> {
        self.state
    }

    pub fn c1_est(&self) -> Option<f64> {
        self.state.map(|s| s.c1_est)
    }

    /// Feeds a measurement taken at time `t`.
    ///
    /// The interval since the previous measurement is integrated with the
    /// previous (held) readings, split into `ceil(gap / dt_est)` equal
    /// sub-steps so no step exceeds `dt_est`. The new readings are then held
    /// for the next interval.
    pub fn observe(&mut self, t: f64, c2: f64, f: f64, params: &ThermalParams) -> Result<f64> {
        check_measurement(c2, f)?;
        let state = match (self.state, self.held) {
            (Some(prev), Some((c2_held, f_held))) => {
                let gap = t - prev.last_update;
                if gap < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "measurement at t={t} precedes last update at {}",
                        prev.last_update
                    )));
                }
                let k = params.coefficients();
                let n = substeps(gap, self.cfg.dt_est);
                let h = if n > 0 { gap / n as f64 } else { 0.0 };
                let mut c1 = prev.c1_est;
                for _ in 0..n {
                    c1 += k.core_rate(f_held, c1, c2_held) * h;
                }
                EstimatorState {
                    c1_est: c1,
                    last_update: t,
                }
            }
            _ => {
                let mut s = estimator_init(c2, &self.cfg)?;
                s.last_update = t;
                s
            }
        };
        self.state = Some(state);
        self.held = Some((c2, f));
        Ok(state.c1_est)
    }

    /// Fixed-step update used by lockstep simulation.
    pub fn tick(&mut self, c2: f64, f: f64, params: &ThermalParams) -> Result<f64> {
        let state = match self.state {
            Some(s) => estimator_tick(s, c2, f, params, &self.cfg)?,
            None => {
                // the first reading seeds the estimate, then one step is taken
                let s = estimator_init(c2, &self.cfg)?;
                estimator_tick(s, c2, f, params, &self.cfg)?
            }
        };
        self.state = Some(state);
        self.held = Some((c2, f));
        Ok(state.c1_est)
    }

    /// Forces the estimate, e.g. when starting from a known state.
    pub fn reset(&mut self, c1_est: f64, t: f64) {
        self.state = Some(EstimatorState { c1_est, last_update: t });
        self.held = None;
    }
}

/// Number of sub-steps covering `gap` with steps no longer than `dt`.
fn substeps(gap: f64, dt: f64) -> usize {
    if gap <= 0.0 {
        return 0;
    }
    let ratio = gap / dt;
    // absorb representation error so an exact multiple is not rounded up
    let n = (ratio - 1e-9).ceil();
    n.max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::model::{MotorSpec, ThermalState};

    fn ec4() -> ThermalParams {
        ThermalParams::from_spec(&MotorSpec::ec4pole_22_90w(), 30.0).unwrap()
    }

    fn st(c1: f64) -> EstimatorState {
        EstimatorState {
            c1_est: c1,
            last_update: 0.0,
        }
    }

    #[test]
    fn tick_examples() {
        let cfg = EstimatorConfig::default();
        let p = ec4();
        assert_eq!(estimator_tick(st(30.0), 30.0, 0.0, &p, &cfg).unwrap().c1_est, 30.0);
        assert_relative_eq!(
            estimator_tick(st(30.0), 30.0, 200.0, &p, &cfg).unwrap().c1_est,
            30.113_142_857_142_858,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            estimator_tick(st(80.0), 40.0, 0.0, &p, &cfg).unwrap().c1_est,
            79.682_539_682_539_68,
            max_relative = 1e-14
        );
    }

    #[test]
    fn non_finite_measurement_is_rejected() {
        let cfg = EstimatorConfig::default();
        let err = estimator_tick(st(30.0), f64::NAN, 0.0, &ec4(), &cfg).unwrap_err();
        assert!(matches!(err, Error::Measurement { .. }));

        let mut est = Estimator::new(cfg);
        est.tick(30.0, 10.0, &ec4()).unwrap();
        let before = est.state();
        assert!(est.tick(30.0, f64::INFINITY, &ec4()).is_err());
        assert_eq!(est.state(), before);
    }

    #[test]
    fn init_policies() {
        let cfg = EstimatorConfig::default();
        assert_eq!(estimator_init(30.0, &cfg).unwrap().c1_est, 30.0);
        let fixed = EstimatorConfig {
            initial_c1: InitialCorePolicy::FixedAmbient(25.0),
            ..cfg
        };
        assert_eq!(estimator_init(31.0, &fixed).unwrap().c1_est, 25.0);
        assert!(estimator_init(f64::NAN, &cfg).is_err());
    }

    #[test]
    fn housing_parameters_do_not_affect_estimate() {
        let cfg = EstimatorConfig::default();
        let p = ec4().with_learned([0.1, -0.2, 0.0, 0.0, 0.0]);
        let mut q = p.with_learned([0.1, -0.2, 0.7, -0.9, 0.4]);
        q.base[2] *= 3.0;
        q.base[3] *= 0.5;
        q.base[4] = 12.0;
        let a = estimator_tick(st(55.0), 41.0, 130.0, &p, &cfg).unwrap();
        let b = estimator_tick(st(55.0), 41.0, 130.0, &q, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gap_is_substepped_with_held_measurements() {
        let p = ec4();
        let mut est = Estimator::new(EstimatorConfig::default());
        est.observe(0.0, 30.0, 200.0, &p).unwrap();
        let c1 = est.observe(0.1, 31.0, 0.0, &p).unwrap();

        let mut reference = st(30.0);
        for _ in 0..5 {
            reference = estimator_tick(reference, 30.0, 200.0, &p, &EstimatorConfig::default()).unwrap();
        }
        assert_relative_eq!(c1, reference.c1_est, max_relative = 1e-12);
        assert_eq!(substeps(0.1, 0.02), 5);
        assert_eq!(substeps(0.105, 0.02), 6);
        assert_eq!(substeps(0.0, 0.02), 0);
    }

    #[test]
    fn converges_to_plant_core_from_offset_start() {
        let p = ec4();
        let cfg = EstimatorConfig::default();
        let mut plant = ThermalState::uniform(30.0);
        let mut est = st(40.0);
        for _ in 0..(600.0 / cfg.dt_est) as usize {
            est = estimator_tick(est, plant.c2, 100.0, &p, &cfg).unwrap();
            plant = crate::model::step(plant, 100.0, &p, cfg.dt_est);
        }
        assert!((est.c1_est - plant.c1).abs() < 0.5, "{} vs {}", est.c1_est, plant.c1);
    }
}
