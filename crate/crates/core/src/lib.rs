//! Learned thermal models for tendon-driven actuators.
//!
//! A two-state core/housing model is identified online from housing
//! temperature and tension ([`learner`]), used to estimate the unmeasured
//! core temperature ([`estimator`]), to plan a tension ceiling that keeps the
//! core below its rating ([`controller`], [`limiter`]) and to flag parameter
//! drift ([`anomaly`]). [`sim`] and [`harness`] provide the simulated plant
//! and the scenarios built on it.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anomaly;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod learner;
pub mod limiter;
pub mod model;
pub mod sim;
pub mod sync;

pub use error::{Error, Result};
pub use model::{MotorSpec, ThermalParams, ThermalState};
