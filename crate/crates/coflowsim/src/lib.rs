//! Trace-driven coflow scheduling simulator: an online contention-aware
//! scheduler, coordinated and uncoordinated baselines, offline clairvoyant
//! policies, and the shared discrete-interval engine they all run on.

pub mod metrics;
pub mod policy;
pub mod sim;
pub mod synth;
pub mod trace;
pub mod types;
