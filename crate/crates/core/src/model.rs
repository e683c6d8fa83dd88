//! Parameterized two-resistor thermal model of a tendon-driving motor.
//!
//! The lumped network has a heat capacity at the core (`C1`) and at the
//! housing (`C2`), a thermal resistance from core to housing (`R1`) and from
//! housing to ambient (`R2`). Joule heating enters the core proportionally to
//! the square of muscle tension through the composite coefficient `K`.
//!
//! Five learnable offsets `P1..P5` scale the datasheet-derived base constants:
//!
//! ```text
//! dc1/dt = W1·e^P1·f² − (c1 − c2) / (W2·e^P2)
//! dc2/dt = (c1 − c2) / (W3·e^P3) − (c2 − W5·(1 + P5)) / (W4·e^P4)
//! ```
//!
//! Units are fixed throughout the crate: °C, N, s, J/K, K/W.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Number of learnable parameters.
pub const N_PARAMS: usize = 5;

/// Drivetrain and winding constants from which `K` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawConstants {
    /// Winding resistance R_e (Ω).
    pub winding_resistance: f64,
    /// Torque constant K_t (N·m/A).
    pub torque_constant: f64,
    /// Motor efficiency, in (0, 1].
    pub efficiency_motor: f64,
    /// Gear efficiency, in (0, 1].
    pub efficiency_gear: f64,
    /// Gear reduction ratio.
    pub gear_ratio: f64,
    /// Pulley radius (m).
    pub pulley_radius: f64,
}

/// Thermal time constants of core and housing (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeConstants {
    pub core: f64,
    pub housing: f64,
}

/// Datasheet description of a motor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorSpec {
    /// C1 (J/K).
    pub heat_capacity_core: f64,
    /// C2 (J/K).
    pub heat_capacity_housing: f64,
    /// R1 (K/W).
    pub thermal_resistance_core_housing: f64,
    /// R2 (K/W).
    pub thermal_resistance_housing_ambient: f64,
    /// K (J/(N²·s)).
    pub heat_coefficient: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawConstants>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_constants: Option<TimeConstants>,
}

impl MotorSpec {
    /// Maxon EC-4pole 22 90W with a 29:1 gear.
    pub fn ec4pole_22_90w() -> Self {
        Self::from_lumped(2.10, 29.0, 1.20, 10.3, 2.97e-4)
    }

    /// Maxon EC 16 60W with a 128:1 gear.
    pub fn ec16_60w() -> Self {
        Self::from_lumped(1.19, 12.2, 4.30, 39.5, 4.50e-5)
    }

    pub fn from_lumped(c1: f64, c2: f64, r1: f64, r2: f64, k: f64) -> Self {
        Self {
            heat_capacity_core: c1,
            heat_capacity_housing: c2,
            thermal_resistance_core_housing: r1,
            thermal_resistance_housing_ambient: r2,
            heat_coefficient: k,
            raw: None,
            time_constants: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("C1", self.heat_capacity_core)?;
        ensure_positive("C2", self.heat_capacity_housing)?;
        ensure_positive("R1", self.thermal_resistance_core_housing)?;
        ensure_positive("R2", self.thermal_resistance_housing_ambient)?;
        ensure_positive("K", self.heat_coefficient)?;
        if let Some(raw) = &self.raw {
            let k = k_from_raw(raw)?;
            let rel = (k - self.heat_coefficient).abs() / k;
            if rel > 1e-9 {
                return Err(Error::InvalidSpec(format!(
                    "K={} disagrees with raw constants (K={k})",
                    self.heat_coefficient
                )));
            }
        }
        if let Some(tc) = &self.time_constants {
            ensure_positive("T1", tc.core)?;
            ensure_positive("T2", tc.housing)?;
        }
        Ok(())
    }
}

/// `K = R_e · (D_pulley / (E_gear · D_gear · E_motor · K_t))²`.
pub fn k_from_raw(raw: &RawConstants) -> Result<f64> {
    ensure_positive("winding resistance", raw.winding_resistance)?;
    ensure_positive("torque constant", raw.torque_constant)?;
    ensure_positive("motor efficiency", raw.efficiency_motor)?;
    ensure_positive("gear efficiency", raw.efficiency_gear)?;
    ensure_positive("gear ratio", raw.gear_ratio)?;
    ensure_positive("pulley radius", raw.pulley_radius)?;
    let ratio = raw.pulley_radius / (raw.efficiency_gear * raw.gear_ratio * raw.efficiency_motor * raw.torque_constant);
    Ok(raw.winding_resistance * ratio * ratio)
}

/// Approximates a heat capacity from a thermal time constant: `C = T / R`.
pub fn capacity_from_time_constant(time_constant: f64, resistance: f64) -> Result<f64> {
    ensure_positive("time constant", time_constant)?;
    ensure_positive("thermal resistance", resistance)?;
    Ok(time_constant / resistance)
}

/// Base constants `W1..W5` plus the learnable offsets `P1..P5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    #[serde(rename = "W")]
    pub base: [f64; N_PARAMS],
    #[serde(rename = "P")]
    pub learned: [f64; N_PARAMS],
}

/// Effective coefficients of the dynamics for one parameter snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// W1·e^P1
    pub heat_gain: f64,
    /// W2·e^P2
    pub core_tau: f64,
    /// W3·e^P3
    pub housing_in_tau: f64,
    /// W4·e^P4
    pub housing_out_tau: f64,
    /// W5·(1+P5)
    pub ambient: f64,
}

impl ThermalParams {
    /// Base constants from a motor spec, all offsets zero.
    pub fn from_spec(spec: &MotorSpec, ambient: f64) -> Result<Self> {
        spec.validate()?;
        if !ambient.is_finite() {
            return Err(Error::InvalidSpec(format!("ambient must be finite, got {ambient}")));
        }
        let c1 = spec.heat_capacity_core;
        let c2 = spec.heat_capacity_housing;
        let r1 = spec.thermal_resistance_core_housing;
        let r2 = spec.thermal_resistance_housing_ambient;
        Ok(Self {
            base: [spec.heat_coefficient / c1, r1 * c1, r1 * c2, r2 * c2, ambient],
            learned: [0.0; N_PARAMS],
        })
    }

    pub fn with_learned(mut self, learned: [f64; N_PARAMS]) -> Self {
        self.learned = learned;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.base[..4].iter().enumerate() {
            ensure_positive(&format!("W{}", i + 1), *w)?;
        }
        if self.base.iter().chain(self.learned.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("thermal parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> Coefficients {
        let [w1, w2, w3, w4, w5] = self.base;
        let [p1, p2, p3, p4, p5] = self.learned;
        Coefficients {
            heat_gain: w1 * p1.exp(),
            core_tau: w2 * p2.exp(),
            housing_in_tau: w3 * p3.exp(),
            housing_out_tau: w4 * p4.exp(),
            ambient: w5 * (1.0 + p5),
        }
    }
}

/// Core and housing temperature of one motor (°C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub c1: f64,
    pub c2: f64,
}

impl ThermalState {
    pub const fn new(c1: f64, c2: f64) -> Self {
        Self { c1, c2 }
    }

    pub const fn uniform(temp: f64) -> Self {
        Self { c1: temp, c2: temp }
    }

    pub fn is_finite(&self) -> bool {
        self.c1.is_finite() && self.c2.is_finite()
    }
}

impl Coefficients {
    /// Core-temperature rate (°C/s).
    #[inline]
    pub fn core_rate(&self, f: f64, c1: f64, c2: f64) -> f64 {
        self.heat_gain * f * f - (c1 - c2) / self.core_tau
    }

    /// Housing-temperature rate (°C/s).
    #[inline]
    pub fn housing_rate(&self, c1: f64, c2: f64) -> f64 {
        (c1 - c2) / self.housing_in_tau - (c2 - self.ambient) / self.housing_out_tau
    }

    /// Forward-Euler step. `c1` is advanced fully before `c2`, both from the
    /// pre-step state.
    #[inline]
    pub fn step(&self, state: ThermalState, f: f64, dt: f64) -> ThermalState {
        let dc1 = self.core_rate(f, state.c1, state.c2);
        let dc2 = self.housing_rate(state.c1, state.c2);
        ThermalState {
            c1: state.c1 + dc1 * dt,
            c2: state.c2 + dc2 * dt,
        }
    }
}

/// Time derivatives `(dc1/dt, dc2/dt)` at `state` under tension `f`.
pub fn derivatives(state: ThermalState, f: f64, params: &ThermalParams) -> (f64, f64) {
    let k = params.coefficients();
    let dc1 = k.core_rate(f, state.c1, state.c2);
    let dc2 = k.housing_rate(state.c1, state.c2);
    (dc1, dc2)
}

/// One forward-Euler step of length `dt`.
pub fn step(state: ThermalState, f: f64, params: &ThermalParams, dt: f64) -> ThermalState {
    params.coefficients().step(state, f, dt)
}

/// Rolls the dynamics forward once per tension sample; `out[j]` is the state
/// after `j + 1` steps.
pub fn rollout(initial: ThermalState, tensions: &[f64], params: &ThermalParams, dt: f64) -> Result<Vec<ThermalState>> {
    if tensions.is_empty() {
        return Err(Error::InvalidArgument("tension sequence is empty".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let k = params.coefficients();
    let mut state = initial;
    Ok(tensions
        .iter()
        .map(|&f| {
            state = k.step(state, f, dt);
            state
        })
        .collect())
}

/// Analytic fixed point of the dynamics under constant tension `f`.
pub fn steady_state(f: f64, params: &ThermalParams) -> ThermalState {
    let k = params.coefficients();
    let gap = k.heat_gain * k.core_tau * f * f;
    let c2 = k.ambient + (k.housing_out_tau / k.housing_in_tau) * gap;
    ThermalState { c1: c2 + gap, c2 }
}

/// Constant tension at which the steady-state core temperature equals `c1_max`.
pub fn sustainable_tension(c1_max: f64, params: &ThermalParams) -> f64 {
    let k = params.coefficients();
    let per_f2 = k.heat_gain * k.core_tau * (1.0 + k.housing_out_tau / k.housing_in_tau);
    ((c1_max - k.ambient).max(0.0) / per_f2).sqrt()
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn ec4() -> ThermalParams {
        ThermalParams::from_spec(&MotorSpec::ec4pole_22_90w(), 30.0).unwrap()
    }

    #[test]
    fn base_constants_ec4pole() {
        let p = ec4();
        assert_relative_eq!(p.base[0], 1.4143e-4, max_relative = 1e-4);
        assert_relative_eq!(p.base[1], 2.52, max_relative = 1e-12);
        assert_relative_eq!(p.base[2], 34.8, max_relative = 1e-12);
        assert_relative_eq!(p.base[3], 298.7, max_relative = 1e-12);
        assert_eq!(p.base[4], 30.0);
        assert_eq!(p.learned, [0.0; 5]);
    }

    #[test]
    fn base_constants_ec16() {
        let p = ThermalParams::from_spec(&MotorSpec::ec16_60w(), 30.0).unwrap();
        assert_relative_eq!(p.base[0], 3.7815e-5, max_relative = 1e-4);
        assert_relative_eq!(p.base[1], 5.117, max_relative = 1e-12);
        assert_relative_eq!(p.base[2], 52.46, max_relative = 1e-12);
        assert_relative_eq!(p.base[3], 481.9, max_relative = 1e-12);
    }

    #[test]
    fn zero_capacity_rejected() {
        let mut spec = MotorSpec::ec4pole_22_90w();
        spec.heat_capacity_core = 0.0;
        assert!(matches!(
            ThermalParams::from_spec(&spec, 30.0),
            Err(Error::InvalidSpec(_))
        ));
        assert!(ThermalParams::from_spec(&MotorSpec::ec4pole_22_90w(), f64::NAN).is_err());
    }

    fn ones() -> RawConstants {
        RawConstants {
            winding_resistance: 1.0,
            torque_constant: 1.0,
            efficiency_motor: 1.0,
            efficiency_gear: 1.0,
            gear_ratio: 1.0,
            pulley_radius: 1.0,
        }
    }

    #[test]
    fn k_from_raw_cases() {
        assert_eq!(k_from_raw(&ones()).unwrap(), 1.0);
        let doubled = RawConstants {
            pulley_radius: 2.0,
            ..ones()
        };
        assert_eq!(k_from_raw(&doubled).unwrap(), 4.0);

        let raw = RawConstants {
            winding_resistance: 0.5,
            torque_constant: 0.02,
            efficiency_motor: 0.9,
            efficiency_gear: 0.9,
            gear_ratio: 29.0,
            pulley_radius: 0.01,
        };
        // hand arithmetic: 0.5 * (0.01 / 0.4698)^2
        assert_relative_eq!(k_from_raw(&raw).unwrap(), 2.265_395_218_131_28e-4, max_relative = 1e-12);

        let bad = RawConstants {
            gear_ratio: -1.0,
            ..ones()
        };
        assert!(k_from_raw(&bad).is_err());
    }

    #[test]
    fn spec_with_inconsistent_raw_constants_is_rejected() {
        let mut spec = MotorSpec::from_lumped(1.0, 1.0, 1.0, 1.0, 1.0);
        spec.raw = Some(ones());
        assert!(spec.validate().is_ok());
        spec.heat_coefficient = 1.1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn capacity_from_time_constant_cases() {
        assert_relative_eq!(
            capacity_from_time_constant(2.52, 1.20).unwrap(),
            2.10,
            max_relative = 1e-12
        );
        assert_eq!(capacity_from_time_constant(3.0, 3.0).unwrap(), 1.0);
        assert!(capacity_from_time_constant(0.0, 1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let p = ec4();
        assert_eq!(derivatives(ThermalState::uniform(30.0), 0.0, &p), (0.0, 0.0));

        let (d1, d2) = derivatives(ThermalState::uniform(30.0), 200.0, &p);
        assert_relative_eq!(d1, 5.657_142_857_142_857, max_relative = 1e-12);
        assert_eq!(d2, 0.0);

        let (d1, d2) = derivatives(ThermalState::new(80.0, 40.0), 100.0, &p);
        assert_relative_eq!(d1, -14.458_730_158_730_159, max_relative = 1e-12);
        assert_relative_eq!(d2, 1.115_946_880_928_468, max_relative = 1e-12);
    }

    #[test]
    fn step_examples() {
        let p = ec4();
        let s = step(ThermalState::uniform(30.0), 200.0, &p, 0.02);
        assert_relative_eq!(s.c1, 30.113_142_857_142_858, max_relative = 1e-14);
        assert_eq!(s.c2, 30.0);

        let shifted = p.with_learned([0.3, -0.2, 0.1, 0.4, 0.5]);
        let eq = ThermalState::uniform(30.0 * 1.5);
        assert_eq!(step(eq, 0.0, &shifted, 0.02), eq);
    }

    #[test]
    fn rollout_cases() {
        let p = ec4();
        assert!(matches!(
            rollout(ThermalState::uniform(30.0), &[], &p, 1.0),
            Err(Error::InvalidArgument(_))
        ));
        let flat = rollout(ThermalState::uniform(30.0), &[0.0; 10], &p, 1.0).unwrap();
        assert!(flat.iter().all(|s| *s == ThermalState::uniform(30.0)));

        let one = rollout(ThermalState::new(50.0, 40.0), &[120.0], &p, 0.5).unwrap();
        assert_eq!(one, vec![step(ThermalState::new(50.0, 40.0), 120.0, &p, 0.5)]);

        let long = rollout(ThermalState::uniform(30.0), &vec![100.0; 200_000], &p, 0.02).unwrap();
        let last = long.last().unwrap();
        assert!((last.c2 - 60.591).abs() < 1e-3, "{last:?}");
        assert!((last.c1 - 64.155).abs() < 1e-3, "{last:?}");
    }

    #[test]
    fn steady_state_examples() {
        let p = ec4();
        assert_eq!(steady_state(0.0, &p), ThermalState::uniform(30.0));
        let s = steady_state(100.0, &p);
        assert_relative_eq!(s.c2, 60.591, max_relative = 1e-12);
        assert_relative_eq!(s.c1, 64.155, max_relative = 1e-12);

        let shifted = p.with_learned([0.0, 0.0, 0.0, 0.0, 0.2]);
        assert_eq!(steady_state(0.0, &shifted), ThermalState::uniform(36.0));
    }

    #[test]
    fn sustainable_tension_ec4pole() {
        let f = sustainable_tension(80.0, &ec4());
        assert_relative_eq!(f, 120.992_334_773_437_95, max_relative = 1e-9);
        assert_relative_eq!(steady_state(f, &ec4()).c1, 80.0, max_relative = 1e-12);
    }

    #[test]
    fn params_json_shape() {
        let json = serde_json::to_value(ec4()).unwrap();
        assert_eq!(json["W"].as_array().unwrap().len(), 5);
        assert_eq!(json["P"].as_array().unwrap().len(), 5);
    }
}
