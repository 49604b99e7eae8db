//! Device-level simulation of a memristor-crossbar attention memory for
//! few-shot learning.
//!
//! The pipeline mirrors the hardware dataflow:
//!
//! 1. [`device`] models programming error, conductance-dependent read
//!    fluctuation and the stochastic RESET state of each memristor.
//! 2. [`crossbar`] runs tiled vector-matrix multiplication on programmed
//!    conductance tiles, with the adjacent-column difference readout.
//! 3. [`hashing`] turns real-valued feature vectors into binary (LSH) or
//!    ternary (TLSH) signatures using randomly RESET crossbar columns as
//!    hashing planes.
//! 4. [`tcam`] stores ternary words as conductance pairs and returns the
//!    degree of mismatch for every stored word as an output current.
//! 5. [`mann`] is the memory controller: nearest-neighbour classification,
//!    majority-vote score updates and N-way K-shot episodes.
//! 6. [`metrics`] accounts energy and latency, and drives the fluctuation
//!    sweeps.
//! 7. [`harness`] holds configuration, feature ingestion, synthetic data and
//!    the experiment drivers behind the `xbar-mann` binary.
//!
//! All conductances, voltages and currents are carried in SI units
//! (siemens, volts, amperes). The [`units`] module has the scale constants
//! used to express the usual µS / µA quantities.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crossbar;
pub mod device;
pub mod harness;
pub mod hashing;
pub mod mann;
pub mod metrics;
pub mod stats;
pub mod tcam;

mod error;

pub use error::{Error, Result};

/// Deterministic, portable RNG used throughout the simulator.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds a [`SimRng`] from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

/// Scale factors between SI units and the engineering units used in the
/// device literature.
pub mod units {
    pub const MICRO: f64 = 1e-6;
    pub const NANO: f64 = 1e-9;
    pub const PICO: f64 = 1e-12;
    pub const FEMTO: f64 = 1e-15;

    /// Microsiemens to siemens.
    pub fn us(v: f64) -> f64 {
        v * MICRO
    }

    /// Microamperes to amperes.
    pub fn ua(v: f64) -> f64 {
        v * MICRO
    }
}
