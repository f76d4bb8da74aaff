use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::*;
use crate::engine::{Connectivity, PopId};
use crate::plasticity::{StdpParams, Transmission, WeightSnapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatoryConfig {
    pub n: usize,
    pub w_dg_pc: f64,
    pub w_pc_pc_inh: f64,
    pub stdp: StdpParams,
    pub tau_refrac: f64,
    pub transmission: Transmission,
    pub dt: f64,
    /// Consecutive milliseconds each pattern is shown during learning.
    pub presentations: u32,
    /// Consecutive milliseconds a cue is shown.
    pub cue_ms: u32,
    pub slot_ms: f64,
    /// Start of the first operation.
    pub first_slot_ms: f64,
}

impl Default for OscillatoryConfig {
    fn default() -> Self {
        Self {
            n: 15,
            w_dg_pc: 30.0,
            w_pc_pc_inh: 0.7,
            stdp: StdpParams::default(),
            tau_refrac: 1.8,
            transmission: Transmission::AfterCommit,
            dt: 1.0,
            presentations: 5,
            cue_ms: 6,
            slot_ms: 14.0,
            first_slot_ms: 1.0,
        }
    }
}

impl OscillatoryConfig {
    pub fn with_n(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn neuron(&self) -> NeuronParams {
        NeuronParams::default().with_refractory(self.tau_refrac)
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.n < 2 {
            return Err(MemoryError::Config("n must be at least 2".into()));
        }
        self.stdp.validate().map_err(MemoryError::Config)?;
        if !(self.w_pc_pc_inh >= 0.0) {
            return Err(MemoryError::Config("w_pc_pc_inh must be >= 0".into()));
        }
        if self.presentations == 0 || self.cue_ms == 0 {
            return Err(MemoryError::Config("presentations and cue_ms must be positive".into()));
        }
        let span = self.presentations.max(self.cue_ms) as f64 * self.dt;
        if !(self.slot_ms > span) {
            return Err(MemoryError::Config("slot_ms must exceed the input span".into()));
        }
        self.neuron().validate()?;
        if !single_spike_fires(&self.neuron(), self.dt, self.w_dg_pc) {
            return Err(MemoryError::Config(format!(
                "w_dg_pc={} nA does not make a resting PC fire (minimum {:.3} nA)",
                self.w_dg_pc,
                min_suprathreshold_weight(&self.neuron(), self.dt)
            )));
        }
        Ok(())
    }
}

/// DG relays one-to-one into PCs, which are wired all-to-all (no self loops)
/// with plastic excitation and static inhibition.
pub fn build_oscillatory(cfg: &OscillatoryConfig) -> Result<NetworkTopology, MemoryError> {
    cfg.validate()?;
    let mut t = NetworkTopology::new();
    let dg = t.add_population(DG, cfg.n, PopulationKind::Source);
    let pc = t.add_population(PC, cfg.n, PopulationKind::Lif(cfg.neuron()));
    let d = cfg.stdp.delay;
    t.connect_static(DG_PC, dg, pc, Connectivity::OneToOne, cfg.w_dg_pc, Receptor::Excitatory, d);
    t.connect_plastic(PC_PC_EXC, pc, pc, Connectivity::AllToAllNoSelf, cfg.stdp, cfg.transmission);
    t.connect_static(PC_PC_INH, pc, pc, Connectivity::AllToAllNoSelf, cfg.w_pc_pc_inh, Receptor::Inhibitory, d);
    Ok(t)
}

/// Learning and recall share one continuous simulation, so every recall keeps
/// rewriting the weights it reads.
pub struct OscillatoryMemory {
    cfg: OscillatoryConfig,
    sim: Simulator,
    dg: PopId,
    next_slot: f64,
    recalled_once: bool,
    slots: Vec<OpSlot>,
}

impl OscillatoryMemory {
    pub fn new(cfg: OscillatoryConfig) -> Result<Self, MemoryError> {
        let topo = build_oscillatory(&cfg)?;
        let dg = topo.population(DG).expect("dg population");
        let sim = Simulator::new(topo, &SimulationConfig { dt: cfg.dt, ..Default::default() })?;
        Ok(Self { next_slot: cfg.first_slot_ms, cfg, sim, dg, recalled_once: false, slots: Vec::new() })
    }

    pub fn config(&self) -> &OscillatoryConfig {
        &self.cfg
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn record(&self) -> &SpikeRecord {
        self.sim.record()
    }

    pub fn slots(&self) -> &[OpSlot] {
        &self.slots
    }

    pub fn now_ms(&self) -> f64 {
        self.next_slot
    }

    pub fn weights(&self) -> WeightSnapshot {
        self.sim.weights(PC_PC_EXC).expect("plastic projection")
    }

    fn check(&self, p: &Pattern) -> Result<(), MemoryError> {
        if p.n() != self.cfg.n {
            return Err(MemoryError::Pattern(format!("pattern built for n={}, memory has n={}", p.n(), self.cfg.n)));
        }
        Ok(())
    }

    fn present(&mut self, p: &Pattern, ms: u32) -> Result<OpSlot, MemoryError> {
        let start = self.next_slot;
        let dt = self.cfg.dt;
        let times: Vec<f64> = (0..ms).map(|k| start + k as f64 * dt).collect();
        let input_end = *times.last().expect("nonempty");
        self.sim.schedule(self.dg, &StimulusSchedule::volleys(&p.indices(), times))?;
        let end = start + self.cfg.slot_ms;
        self.sim.run_until(end)?;
        self.next_slot = end;
        // The last input reaches the PCs one delay later; anything after that is
        // produced by the recurrent network alone.
        let window_start = input_end + self.cfg.stdp.delay + dt;
        let slot = OpSlot { start, input_end, window_start, end };
        self.slots.push(slot.clone());
        Ok(slot)
    }

    /// Show each pattern on consecutive milliseconds, one slot per pattern.
    pub fn learn(&mut self, patterns: &[Pattern]) -> Result<WeightSnapshot, MemoryError> {
        if patterns.is_empty() {
            return Err(MemoryError::Pattern("no patterns to learn".into()));
        }
        if self.recalled_once {
            return Err(MemoryError::Phase(
                "learning after recall would store the current state along with the input".into(),
            ));
        }
        for p in patterns {
            self.check(p)?;
        }
        for p in patterns {
            self.present(p, self.cfg.presentations)?;
        }
        Ok(self.weights())
    }

    pub fn recall(&mut self, cue: &Cue) -> Result<RecallOutcome, MemoryError> {
        self.check(cue)?;
        self.recalled_once = true;
        let slot = self.present(cue, self.cfg.cue_ms)?;
        let recalled = recalled_in(&self.sim, cue.active(), slot.window_start, slot.end);
        Ok(RecallOutcome { cue: cue.active().clone(), recalled, slot })
    }

    /// Let the network run without input.
    pub fn idle(&mut self, ms: f64) -> Result<(), MemoryError> {
        let end = self.next_slot + ms;
        self.sim.run_until(end)?;
        self.next_slot = end;
        Ok(())
    }

    /// PCs active in `[from, to)` ms.
    pub fn active_between(&self, from: f64, to: f64) -> BTreeSet<usize> {
        let dt = self.cfg.dt;
        self.record().active_between(PC, (from / dt).round() as u64, (to / dt).round() as u64)
    }
}
