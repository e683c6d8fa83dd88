//! Single-writer publication of values read by other loops.
//!
//! The lockstep harness does not need these; they let a live deployment run
//! the learner, controller and limiter on separate threads while every
//! reader sees a complete value.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

/// Shared slot holding the latest published copy of `T`.
#[derive(Debug)]
pub struct SnapshotCell<T> {
    inner: Arc<RwLock<T>>,
}

impl<T> Clone for SnapshotCell<T> {
    fn clone(&self) -> Self {
        Self {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Clone> SnapshotCell<T> {
    pub fn new(value: T) -> Self {
        Self {
            inner: Arc::new(RwLock::new(value)),
        }
    }

    /// Replaces the published value as a whole.
    pub fn publish(&self, value: T) {
        *self.inner.write().unwrap_or_else(|e| e.into_inner()) = value;
    }

    pub fn load(&self) -> T {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// Lock-free `f64` slot, used for the active tension ceiling.
#[derive(Debug, Clone)]
pub struct PublishedF64 {
    bits: Arc<AtomicU64>,
}

impl PublishedF64 {
    pub fn new(value: f64) -> Self {
        Self {
            bits: Arc::new(AtomicU64::new(value.to_bits())),
        }
    }

    pub fn publish(&self, value: f64) {
        self.bits.store(value.to_bits(), Ordering::Release);
    }

    pub fn load(&self) -> f64 {
        f64::from_bits(self.bits.load(Ordering::Acquire))
    }
}
