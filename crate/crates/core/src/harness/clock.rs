//! Integer simulation clock shared by loops running at different periods.

use crate::error::{Error, Result};

const MICROS: f64 = 1e6;

fn to_micros(period: f64) -> Result<u64> {
    let us = (period * MICROS).round();
    if !(us >= 1.0) || ((us / MICROS) - period).abs() > 1e-12 * period.max(1.0) {
        return Err(Error::Config(format!(
            "period {period} s is not a whole number of microseconds"
        )));
    }
    Ok(us as u64)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Lockstep clock ticking at the greatest common divisor of its periods.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    base_us: u64,
}

impl Clock {
    pub fn for_periods(periods: &[f64]) -> Result<Self> {
        let mut base = 0;
        for &p in periods {
            base = gcd(base, to_micros(p)?);
        }
        if base == 0 {
            return Err(Error::Config("clock needs at least one period".into()));
        }
        Ok(Self { base_us: base })
    }

    /// Base tick length (s).
    pub fn base(&self) -> f64 {
        self.base_us as f64 / MICROS
    }

    /// Number of base ticks per `period`.
    pub fn ticks(&self, period: f64) -> Result<u64> {
        let us = to_micros(period)?;
        if us % self.base_us != 0 {
            return Err(Error::Config(format!(
                "period {period} s is not a multiple of the clock base"
            )));
        }
        Ok(us / self.base_us)
    }

    /// Ticks needed to cover `duration` seconds, rounded down.
    pub fn ticks_in(&self, duration: f64) -> u64 {
        (duration * MICROS / self.base_us as f64 + 1e-9).floor() as u64
    }

    pub fn time(&self, tick: u64) -> f64 {
        (tick * self.base_us) as f64 / MICROS
    }
}
