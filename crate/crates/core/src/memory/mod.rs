//! DG-CA3 network builders and the learn/recall facade for both memory models.

mod calibrate;
mod oscillatory;
mod regulated;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{
    EngineError, NetworkTopology, NeuronParams, PopulationKind, Receptor, SimulationConfig, Simulator, SpikeRecord,
    StimulusSchedule,
};

pub use calibrate::{calibrate_inhibition, CalibrationError, CalibrationRow, Probe, Workload};
pub use oscillatory::{build_oscillatory, OscillatoryConfig, OscillatoryMemory};
pub use regulated::{build_regulated, RegulatedConfig, RegulatedMemory};

pub const DG: &str = "DG";
pub const PC: &str = "PC";
pub const INH: &str = "INH";
pub const LEARNING: &str = "LEARNING";
pub const DG_PC: &str = "dg_pc";
pub const PC_PC_EXC: &str = "pc_pc_exc";
pub const PC_PC_INH: &str = "pc_pc_inh";
pub const DG_INH: &str = "dg_inh";
pub const INH_PC: &str = "inh_pc";
pub const LEARNING_INH: &str = "learning_inh";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Oscillatory,
    Regulated,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Oscillatory => "oscillatory",
            ModelKind::Regulated => "regulated",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "oscillatory" => Ok(ModelKind::Oscillatory),
            "regulated" => Ok(ModelKind::Regulated),
            other => Err(format!("unknown model '{}'", other)),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("pattern error: {0}")]
    Pattern(String),
    #[error("{0}")]
    Phase(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Active DG indices of a population of `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    active: BTreeSet<usize>,
    n: usize,
}

impl Pattern {
    pub fn new(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Self, MemoryError> {
        let active: BTreeSet<usize> = indices.into_iter().collect();
        if active.is_empty() {
            return Err(MemoryError::Pattern("empty pattern".into()));
        }
        if let Some(&i) = active.iter().find(|&&i| i >= n) {
            return Err(MemoryError::Pattern(format!("index {} out of range for n={}", i, n)));
        }
        Ok(Self { active, n })
    }

    pub fn active(&self) -> &BTreeSet<usize> {
        &self.active
    }

    pub fn indices(&self) -> Vec<usize> {
        self.active.iter().copied().collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_set(&self.active))
    }
}

/// Partial input used to trigger completion. Same validity rules as a pattern.
pub type Cue = Pattern;

pub fn fmt_set(s: &BTreeSet<usize>) -> String {
    let parts: Vec<String> = s.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

/// One operation on the shared clock, all bounds in ms.
#[derive(Debug, Clone, PartialEq)]
pub struct OpSlot {
    pub start: f64,
    /// Last millisecond on which input was delivered.
    pub input_end: f64,
    /// First millisecond at which output counts as recalled.
    pub window_start: f64,
    /// Exclusive.
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallOutcome {
    pub cue: BTreeSet<usize>,
    /// PCs spiking inside the evaluation window, cue indices removed.
    pub recalled: BTreeSet<usize>,
    pub slot: OpSlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResourceCounts {
    pub neurons: usize,
    /// Counted the way the comparison table counts them (input pathways only).
    pub static_synapses: usize,
    pub stdp_synapses: usize,
    pub learning_latency_ms: u32,
    pub recall_latency_ms: u32,
    pub recurrent_inhibitory_synapses: usize,
    /// Every static synapse actually built.
    pub static_synapses_full: usize,
}

pub fn count_resources(kind: ModelKind, n: usize) -> ResourceCounts {
    let recurrent = n * n.saturating_sub(1);
    match kind {
        ModelKind::Oscillatory => ResourceCounts {
            neurons: 2 * n,
            static_synapses: n,
            stdp_synapses: recurrent,
            learning_latency_ms: 14,
            recall_latency_ms: 14,
            recurrent_inhibitory_synapses: recurrent,
            static_synapses_full: n + recurrent,
        },
        ModelKind::Regulated => ResourceCounts {
            neurons: 3 * n + 1,
            static_synapses: 4 * n,
            stdp_synapses: recurrent,
            learning_latency_ms: 50,
            recall_latency_ms: 14,
            recurrent_inhibitory_synapses: recurrent,
            static_synapses_full: 4 * n + recurrent,
        },
    }
}

/// Tally a built topology under the same convention as [`count_resources`].
pub fn tally(topology: &NetworkTopology) -> ResourceCounts {
    let recurrent_inh = topology.projection(PC_PC_INH).map(|p| p.len()).unwrap_or(0);
    let full = topology.static_synapse_count();
    let regulated = topology.population(INH).is_some();
    ResourceCounts {
        neurons: topology.neuron_count(),
        static_synapses: full - recurrent_inh,
        stdp_synapses: topology.plastic_synapse_count(),
        learning_latency_ms: if regulated { 50 } else { 14 },
        recall_latency_ms: 14,
        recurrent_inhibitory_synapses: recurrent_inh,
        static_synapses_full: full,
    }
}

/// Smallest DG->PC weight that makes a resting PC fire from one input spike.
pub fn min_suprathreshold_weight(params: &NeuronParams, dt: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while !single_spike_fires(params, dt, hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if single_spike_fires(params, dt, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Probe: does one spike of weight `w` make a resting neuron fire?
pub fn single_spike_fires(params: &NeuronParams, dt: f64, w: f64) -> bool {
    let mut t = NetworkTopology::new();
    let src = t.add_population("src", 1, PopulationKind::Source);
    let dst = t.add_population("dst", 1, PopulationKind::Lif(*params));
    t.connect_static("probe", src, dst, crate::engine::Connectivity::OneToOne, w, Receptor::Excitatory, dt);
    let cfg = SimulationConfig { dt, duration: 20.0 * dt, ..Default::default() };
    let Ok(mut sim) = Simulator::new(t, &cfg) else { return false };
    if sim.schedule(src, &StimulusSchedule::volleys(&[0], [0.0])).is_err() {
        return false;
    }
    sim.run_steps(20);
    sim.record().count("dst") > 0
}

pub(crate) fn recalled_in(sim: &Simulator, cue: &BTreeSet<usize>, window_start: f64, end: f64) -> BTreeSet<usize> {
    let dt = sim.dt();
    let from = (window_start / dt).round() as u64;
    let to = (end / dt).round() as u64;
    sim.record().active_between(PC, from, to).difference(cue).copied().collect()
}
