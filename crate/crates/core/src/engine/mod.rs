//! Clock-driven simulation kernel.

mod neuron;
mod record;
mod sim;
mod topology;

pub use neuron::{integrate_neuron_step, NeuronParams, NeuronState, Propagator};
pub use record::{fmt_ms, SpikeRecord};
pub use sim::{run_simulation, weights_of, SimulationConfig, Simulator, StimulusSchedule};
pub use topology::{
    steps_of, Connectivity, NetworkTopology, PopId, Population, PopulationKind, Projection, ProjectionKind, Receptor,
    StaticSynapse,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("stimulus error: {0}")]
    Stimulus(String),
}
