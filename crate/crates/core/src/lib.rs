//! Spiking models of the hippocampal CA3 region as associative memories.
//!
//! Two networks share one engine: an oscillatory attractor that learns and recalls
//! in a single continuous run, and a regulated variant that gates activity during
//! learning and recalls from frozen weights.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod harness;
pub mod memory;
pub mod plasticity;

pub use engine::{run_simulation, NetworkTopology, SimulationConfig, Simulator, SpikeRecord, StimulusSchedule};
pub use memory::{ModelKind, OscillatoryConfig, OscillatoryMemory, Pattern, RegulatedConfig, RegulatedMemory};
pub use plasticity::{StdpParams, WeightSnapshot};
