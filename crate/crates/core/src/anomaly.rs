//! Anomaly detection from drift of the learned parameters.
//!
//! The score is the RMSE of `P1..P4` against a reference captured once the
//! model has settled. `P5` tracks ambient temperature and is left out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ThermalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Normal,
    Anomaly,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Normal => "normal",
            Verdict::Anomaly => "anomaly",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyConfig {
    pub d_detect: f64,
    /// `P1..P4` at arming time.
    pub reference: [f64; 4],
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            d_detect: 1.0,
            reference: [0.0; 4],
        }
    }
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_detect > 0.0) {
            return Err(Error::Config(format!(
                "d_detect must be positive, got {}",
                self.d_detect
            )));
        }
        Ok(())
    }
}

/// Captures the current `P1..P4` as the reference.
pub fn anomaly_arm(params: &ThermalParams) -> [f64; 4] {
    let p = params.learned;
    [p[0], p[1], p[2], p[3]]
}

pub fn anomaly_score(params: &ThermalParams, cfg: &AnomalyConfig) -> f64 {
    let sq: f64 = params.learned[..4]
        .iter()
        .zip(&cfg.reference)
        .map(|(p, r)| (p - r).powi(2))
        .sum();
    (sq / 4.0).sqrt()
}

pub fn anomaly_check(params: &ThermalParams, cfg: &AnomalyConfig) -> Verdict {
    if anomaly_score(params, cfg) > cfg.d_detect {
        Verdict::Anomaly
    } else {
        Verdict::Normal
    }
}

/// Settings for arming the detector automatically once learning settles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoArmConfig {
    /// Mean window loss below which an update counts as converged (°C²).
    pub loss_tolerance: f64,
    /// Consecutive converged updates required.
    pub consecutive: usize,
}

impl Default for AutoArmConfig {
    fn default() -> Self {
        Self {
            loss_tolerance: 0.05,
            consecutive: 5,
        }
    }
}

/// Verdict transition, emitted when the verdict changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictEvent {
    pub timestamp: f64,
    pub motor_id: u32,
    pub g: f64,
    pub verdict: Verdict,
}

/// Stateful detector: tracks arming and verdict transitions for one motor.
#[derive(Debug, Clone)]
pub struct AnomalyMonitor {
    motor_id: u32,
    d_detect: f64,
    reference: Option<[f64; 4]>,
    auto_arm: Option<AutoArmConfig>,
    converged_streak: usize,
    verdict: Verdict,
    score: f64,
    first_anomaly: Option<f64>,
    events: Vec<VerdictEvent>,
}

impl AnomalyMonitor {
    pub fn new(motor_id: u32, d_detect: f64, auto_arm: Option<AutoArmConfig>) -> Self {
        Self {
            motor_id,
            d_detect,
            reference: None,
            auto_arm,
            converged_streak: 0,
            verdict: Verdict::Normal,
            score: 0.0,
            first_anomaly: None,
            events: Vec::new(),
        }
    }

    pub fn arm(&mut self, params: &ThermalParams) {
        self.reference = Some(anomaly_arm(params));
        self.score = 0.0;
        self.verdict = Verdict::Normal;
    }

    pub fn is_armed(&self) -> bool {
        self.reference.is_some()
    }

    pub fn config(&self) -> Option<AnomalyConfig> {
        self.reference.map(|reference| AnomalyConfig {
            d_detect: self.d_detect,
            reference,
        })
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn first_anomaly(&self) -> Option<f64> {
        self.first_anomaly
    }

    pub fn events(&self) -> &[VerdictEvent] {
        &self.events
    }

    /// Per-parameter drift `P_i − P_i,ref` for `i = 1..4`.
    pub fn deltas(&self, params: &ThermalParams) -> Option<[f64; 4]> {
        self.reference
            .map(|r| std::array::from_fn(|i| params.learned[i] - r[i]))
    }

    /// Feeds a learner update. `mean_loss` drives auto-arming.
    pub fn on_update(&mut self, t: f64, params: &ThermalParams, mean_loss: f64) -> Verdict {
        if self.reference.is_none() {
            if let Some(auto) = self.auto_arm {
                if mean_loss < auto.loss_tolerance {
                    self.converged_streak += 1;
                } else {
                    self.converged_streak = 0;
                }
                if self.converged_streak >= auto.consecutive {
                    self.arm(params);
                }
            }
            return self.verdict;
        }
        self.evaluate(t, params)
    }

    pub fn evaluate(&mut self, t: f64, params: &ThermalParams) -> Verdict {
        let Some(cfg) = self.config() else {
            return self.verdict;
        };
        self.score = anomaly_score(params, &cfg);
        let verdict = anomaly_check(params, &cfg);
        if verdict != self.verdict {
            self.events.push(VerdictEvent {
                timestamp: t,
                motor_id: self.motor_id,
                g: self.score,
                verdict,
            });
            if verdict == Verdict::Anomaly && self.first_anomaly.is_none() {
                self.first_anomaly = Some(t);
            }
        }
        self.verdict = verdict;
        verdict
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MotorSpec;

    fn params(p: [f64; 5]) -> ThermalParams {
        ThermalParams::from_spec(&MotorSpec::ec4pole_22_90w(), 30.0)
            .unwrap()
            .with_learned(p)
    }

    fn cfg(reference: [f64; 4]) -> AnomalyConfig {
        AnomalyConfig {
            d_detect: 1.0,
            reference,
        }
    }

    #[test]
    fn score_examples() {
        let p = params([0.3, -0.2, 0.1, 0.9, 2.0]);
        assert_eq!(anomaly_score(&p, &cfg(anomaly_arm(&p))), 0.0);
        assert_eq!(anomaly_score(&params([1.0, 1.0, 1.0, 1.0, 0.0]), &cfg([0.0; 4])), 1.0);
        assert_eq!(anomaly_score(&params([2.0, 0.0, 0.0, 0.0, 0.0]), &cfg([0.0; 4])), 1.0);
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(check([1.0, 1.0, 1.0, 1.0]), Verdict::Normal);
        assert_eq!(check([1.1, 1.1, 1.1, 1.1]), Verdict::Anomaly);

        fn check(p: [f64; 4]) -> Verdict {
            anomaly_check(&params([p[0], p[1], p[2], p[3], 0.0]), &cfg([0.0; 4]))
        }
    }

    #[test]
    fn arm_then_drift() {
        let mut mon = AnomalyMonitor::new(0, 1.0, None);
        mon.arm(&params([0.0; 5]));
        assert_eq!(mon.evaluate(0.0, &params([0.0; 5])), Verdict::Normal);
        let drifted = params([0.0, 0.0, 0.0, 2.1, 0.0]);
        assert_eq!(mon.evaluate(10.0, &drifted), Verdict::Anomaly);
        assert!((mon.score() - 1.05).abs() < 1e-12);
        assert_eq!(mon.first_anomaly(), Some(10.0));
        assert_eq!(mon.events().len(), 1);

        mon.arm(&drifted);
        assert_eq!(mon.evaluate(11.0, &drifted), Verdict::Normal);
        assert_eq!(mon.score(), 0.0);
    }

    #[test]
    fn p5_does_not_move_the_score() {
        let c = cfg([0.1, 0.2, 0.3, 0.4]);
        let a = anomaly_score(&params([0.5, 0.5, 0.5, 0.5, 0.0]), &c);
        let b = anomaly_score(&params([0.5, 0.5, 0.5, 0.5, 9.0]), &c);
        assert_eq!(a, b);
    }

    #[test]
    fn auto_arm_after_consecutive_converged_updates() {
        let auto = AutoArmConfig {
            loss_tolerance: 0.05,
            consecutive: 3,
        };
        let mut mon = AnomalyMonitor::new(1, 1.0, Some(auto));
        let p = params([0.2, 0.0, 0.0, 0.0, 0.0]);
        mon.on_update(0.0, &p, 0.01);
        mon.on_update(1.0, &p, 0.2);
        mon.on_update(2.0, &p, 0.01);
        mon.on_update(3.0, &p, 0.01);
        assert!(!mon.is_armed());
        mon.on_update(4.0, &p, 0.01);
        assert!(mon.is_armed());
        assert_eq!(mon.config().unwrap().reference, [0.2, 0.0, 0.0, 0.0]);
    }
}
