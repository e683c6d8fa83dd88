//! Tension limiter for length-controlled muscles.
//!
//! Sign convention: a more negative length command pulls harder. The limiter
//! adds a non-negative elongation `dl` to the reference command so measured
//! tension stays under the published ceiling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimiterConfig {
    /// Relaxation rate when under the ceiling (mm per N of error per tick).
    pub dl_minus: f64,
    /// Elongation rate when over the ceiling (mm per N of error per tick).
    pub dl_plus: f64,
    /// Largest elongation per N of error (mm/N).
    pub d_gain: f64,
    /// Tick period (s).
    pub period: f64,
}

impl Default for LimiterConfig {
    fn default() -> Self {
        Self {
            dl_minus: 0.001,
            dl_plus: 0.003,
            d_gain: 2.0,
            period: 0.008,
        }
    }
}

impl LimiterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dl_minus", self.dl_minus),
            ("dl_plus", self.dl_plus),
            ("d_gain", self.d_gain),
            ("period", self.period),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("limiter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LimiterState {
    /// Elongation offset (mm), never negative.
    pub dl: f64,
}

pub fn limiter_tick(state: LimiterState, f_meas: f64, f_limit: f64, cfg: &LimiterConfig) -> LimiterState {
    let d = (f_meas - f_limit).abs();
    let dl = state.dl;
    let next = if f_meas > f_limit {
        dl + (cfg.d_gain * d - dl).min(cfg.dl_plus * d)
    } else {
        dl + (0.0 - dl).max(-cfg.dl_minus * d)
    };
    LimiterState { dl: next }
}

/// Length command actually sent: `l_ref + dl` (mm).
pub fn apply_offset(l_ref: f64, state: LimiterState) -> f64 {
    l_ref + state.dl
}
