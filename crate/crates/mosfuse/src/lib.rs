//! Score-fusion and evaluation toolkit for MOS prediction ensembles.
//!
//! The crate fits and compares fusion methods over per-subsystem prediction
//! tables, runs a semi-supervised out-of-domain pipeline at the fusion
//! level, computes the challenge's utterance- and system-level correlation
//! metrics, and ships a seeded synthetic generator so every claim can be
//! exercised at desk scale.

pub mod data;
pub mod fusers;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod semisup;
mod solve;
pub mod synth;
