//! Poisson-strip enumeration and coupling of random dense countable sets.
//!
//! A single unit-intensity Poisson process on the strip `(0,1) x [0, inf)`
//! is enumerated by exponential races whose speeds are conditional
//! densities. Different density families list the same strip points in
//! different orders, which couples their laws on one countable set. Around
//! that core sit concrete set models, Brownian local minima, and the
//! statistical checks used to verify all of it.

pub mod brownian;
pub mod cli;
pub mod coupling;
pub mod densities;
pub mod enumeration;
pub mod error;
pub mod replicate;
pub mod rng;
pub mod selftest;
pub mod set_models;
pub mod stats;
pub mod strip;

pub use error::{Error, Result};
