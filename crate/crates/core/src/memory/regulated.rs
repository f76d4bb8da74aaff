use serde::{Deserialize, Serialize};

use super::*;
use crate::engine::{Connectivity, PopId};
use crate::plasticity::{apply_snapshot, freeze, StdpParams, Transmission, WeightSnapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegulatedConfig {
    pub n: usize,
    pub w_dg_pc: f64,
    /// Recurrent lateral inhibition; needs calibration per workload.
    pub w_pc_pc_inh: f64,
    pub w_learning_inh: f64,
    pub w_dg_inh: f64,
    /// Gate strength; has to outweigh saturated recurrent drive onto a gated PC.
    pub w_inh_pc: f64,
    pub stdp: StdpParams,
    pub tau_refrac: f64,
    pub inh_tau_refrac: f64,
    pub transmission: Transmission,
    pub dt: f64,
    pub presentations: u32,
    /// Gap between successive presentations of one pattern.
    pub presentation_spacing_ms: f64,
    pub learn_slot_ms: f64,
    pub recall_slot_ms: f64,
    pub cue_repeats: u32,
    pub cue_spacing_ms: f64,
    pub first_slot_ms: f64,
    /// Apply uncommitted changes when freezing instead of dropping them.
    pub final_commit: bool,
}

impl Default for RegulatedConfig {
    fn default() -> Self {
        Self {
            n: 15,
            w_dg_pc: 20.0,
            w_pc_pc_inh: 0.5,
            w_learning_inh: 6.0,
            w_dg_inh: 12.0,
            w_inh_pc: 200.0,
            stdp: StdpParams::default(),
            tau_refrac: 2.0,
            inh_tau_refrac: 0.0,
            transmission: Transmission::AfterCommit,
            dt: 1.0,
            presentations: 4,
            presentation_spacing_ms: 3.0,
            learn_slot_ms: 50.0,
            recall_slot_ms: 14.0,
            cue_repeats: 1,
            cue_spacing_ms: 3.0,
            first_slot_ms: 1.0,
            final_commit: false,
        }
    }
}

impl RegulatedConfig {
    pub fn with_n(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn pc_neuron(&self) -> NeuronParams {
        NeuronParams::default().with_refractory(self.tau_refrac)
    }

    pub fn inh_neuron(&self) -> NeuronParams {
        NeuronParams::default().with_refractory(self.inh_tau_refrac)
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.n < 2 {
            return Err(MemoryError::Config("n must be at least 2".into()));
        }
        self.stdp.validate().map_err(MemoryError::Config)?;
        for (name, w) in [
            ("w_pc_pc_inh", self.w_pc_pc_inh),
            ("w_learning_inh", self.w_learning_inh),
            ("w_dg_inh", self.w_dg_inh),
            ("w_inh_pc", self.w_inh_pc),
        ] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(MemoryError::Config(format!("{} must be finite and >= 0", name)));
            }
        }
        if self.presentations == 0 || self.cue_repeats == 0 {
            return Err(MemoryError::Config("presentations and cue_repeats must be positive".into()));
        }
        let learn_span = (self.presentations - 1) as f64 * self.presentation_spacing_ms;
        if !(self.learn_slot_ms > learn_span + 2.0 * self.dt) {
            return Err(MemoryError::Config("presentations do not fit in learn_slot_ms".into()));
        }
        let cue_span = (self.cue_repeats - 1) as f64 * self.cue_spacing_ms;
        if !(self.recall_slot_ms > cue_span + 2.0 * self.dt) {
            return Err(MemoryError::Config("cue repeats do not fit in recall_slot_ms".into()));
        }
        self.pc_neuron().validate()?;
        self.inh_neuron().validate()?;
        if !single_spike_fires(&self.pc_neuron(), self.dt, self.w_dg_pc) {
            return Err(MemoryError::Config(format!(
                "w_dg_pc={} nA does not make a resting PC fire (minimum {:.3} nA)",
                self.w_dg_pc,
                min_suprathreshold_weight(&self.pc_neuron(), self.dt)
            )));
        }
        Ok(())
    }
}

/// The oscillatory wiring plus a gating layer: LEARNING excites every INH cell,
/// DG silences its own INH cell, and INH cells inhibit their own PC. During
/// learning only PCs receiving input escape inhibition.
pub fn build_regulated(cfg: &RegulatedConfig) -> Result<NetworkTopology, MemoryError> {
    cfg.validate()?;
    let mut t = NetworkTopology::new();
    let dg = t.add_population(DG, cfg.n, PopulationKind::Source);
    let pc = t.add_population(PC, cfg.n, PopulationKind::Lif(cfg.pc_neuron()));
    let inh = t.add_population(INH, cfg.n, PopulationKind::Lif(cfg.inh_neuron()));
    let learning = t.add_population(LEARNING, 1, PopulationKind::Source);
    let d = cfg.stdp.delay;
    t.connect_static(DG_PC, dg, pc, Connectivity::OneToOne, cfg.w_dg_pc, Receptor::Excitatory, d);
    t.connect_static(DG_INH, dg, inh, Connectivity::OneToOne, cfg.w_dg_inh, Receptor::Inhibitory, d);
    t.connect_static(INH_PC, inh, pc, Connectivity::OneToOne, cfg.w_inh_pc, Receptor::Inhibitory, d);
    t.connect_static(LEARNING_INH, learning, inh, Connectivity::AllToAll, cfg.w_learning_inh, Receptor::Excitatory, d);
    t.connect_plastic(PC_PC_EXC, pc, pc, Connectivity::AllToAllNoSelf, cfg.stdp, cfg.transmission);
    t.connect_static(PC_PC_INH, pc, pc, Connectivity::AllToAllNoSelf, cfg.w_pc_pc_inh, Receptor::Inhibitory, d);
    Ok(t)
}

enum Phase {
    Learning { sim: Simulator, next: f64 },
    Recall { sim: Simulator, next: f64, learning_record: Option<SpikeRecord> },
}

/// Learns in a gated network, then recalls in a fresh copy whose recurrent
/// weights are frozen at the learned values.
pub struct RegulatedMemory {
    cfg: RegulatedConfig,
    phase: Phase,
    snapshot: WeightSnapshot,
    learn_slots: Vec<OpSlot>,
    recall_slots: Vec<OpSlot>,
}

fn pops(topo: &NetworkTopology) -> (PopId, PopId) {
    (topo.population(DG).expect("dg"), topo.population(LEARNING).expect("learning"))
}

impl RegulatedMemory {
    pub fn new(cfg: RegulatedConfig) -> Result<Self, MemoryError> {
        let topo = build_regulated(&cfg)?;
        let snapshot = crate::engine::weights_of(&topo, PC_PC_EXC).expect("plastic projection");
        let sim = Simulator::new(topo, &SimulationConfig { dt: cfg.dt, ..Default::default() })?;
        Ok(Self {
            phase: Phase::Learning { sim, next: cfg.first_slot_ms },
            cfg,
            snapshot,
            learn_slots: Vec::new(),
            recall_slots: Vec::new(),
        })
    }

    /// Skip learning and recall from previously exported weights.
    pub fn from_snapshot(cfg: RegulatedConfig, snapshot: &WeightSnapshot) -> Result<Self, MemoryError> {
        for e in &snapshot.entries {
            if e.pre >= cfg.n || e.post >= cfg.n || e.pre == e.post {
                return Err(MemoryError::Config(format!(
                    "snapshot entry {}->{} invalid for n={}",
                    e.pre, e.post, cfg.n
                )));
            }
        }
        let mut m = Self::new(cfg)?;
        if let Phase::Learning { sim, .. } = &m.phase {
            let mut topo = sim.topology().clone();
            apply_snapshot(&mut topo, snapshot);
            m.snapshot = crate::engine::weights_of(&topo, PC_PC_EXC).expect("plastic projection");
            m.enter_recall(topo)?;
        }
        Ok(m)
    }

    pub fn config(&self) -> &RegulatedConfig {
        &self.cfg
    }

    pub fn snapshot(&self) -> &WeightSnapshot {
        &self.snapshot
    }

    pub fn learn_slots(&self) -> &[OpSlot] {
        &self.learn_slots
    }

    pub fn recall_slots(&self) -> &[OpSlot] {
        &self.recall_slots
    }

    pub fn learning_record(&self) -> Option<&SpikeRecord> {
        match &self.phase {
            Phase::Learning { sim, .. } => Some(sim.record()),
            Phase::Recall { learning_record, .. } => learning_record.as_ref(),
        }
    }

    pub fn recall_record(&self) -> Option<&SpikeRecord> {
        match &self.phase {
            Phase::Recall { sim, .. } => Some(sim.record()),
            Phase::Learning { .. } => None,
        }
    }

    pub fn recall_simulator(&self) -> Option<&Simulator> {
        match &self.phase {
            Phase::Recall { sim, .. } => Some(sim),
            Phase::Learning { .. } => None,
        }
    }

    fn check(&self, p: &Pattern) -> Result<(), MemoryError> {
        if p.n() != self.cfg.n {
            return Err(MemoryError::Pattern(format!("pattern built for n={}, memory has n={}", p.n(), self.cfg.n)));
        }
        Ok(())
    }

    /// Each pattern gets one learning slot holding all its presentations; the
    /// LEARNING source fires alongside every presentation.
    pub fn learn(&mut self, patterns: &[Pattern]) -> Result<WeightSnapshot, MemoryError> {
        if patterns.is_empty() {
            return Err(MemoryError::Pattern("no patterns to learn".into()));
        }
        for p in patterns {
            self.check(p)?;
        }
        let Phase::Learning { sim, next } = &mut self.phase else {
            return Err(MemoryError::Phase("weights are frozen; learning is over".into()));
        };
        let (dg, learning) = pops(sim.topology());
        for p in patterns {
            let start = *next;
            let times: Vec<f64> =
                (0..self.cfg.presentations).map(|r| start + r as f64 * self.cfg.presentation_spacing_ms).collect();
            sim.schedule(dg, &StimulusSchedule::volleys(&p.indices(), times.iter().copied()))?;
            sim.schedule(learning, &StimulusSchedule::volleys(&[0], times.iter().copied()))?;
            let end = start + self.cfg.learn_slot_ms;
            sim.run_until(end)?;
            *next = end;
            let input_end = *times.last().expect("nonempty");
            self.learn_slots.push(OpSlot { start, input_end, window_start: input_end + self.cfg.dt, end });
        }
        self.snapshot = sim.weights(PC_PC_EXC).expect("plastic projection");
        Ok(self.snapshot.clone())
    }

    fn enter_recall(&mut self, learned: NetworkTopology) -> Result<(), MemoryError> {
        let frozen = freeze(&learned, self.cfg.final_commit);
        let learning_record = match &self.phase {
            Phase::Learning { sim, .. } if sim.current_step() > 0 => Some(sim.record().clone()),
            _ => None,
        };
        if self.cfg.final_commit {
            self.snapshot = crate::engine::weights_of(&frozen, PC_PC_EXC).expect("frozen projection");
        }
        let sim = Simulator::new(frozen, &SimulationConfig { dt: self.cfg.dt, ..Default::default() })?;
        self.phase = Phase::Recall { sim, next: self.cfg.first_slot_ms, learning_record };
        Ok(())
    }

    /// Switch to the frozen recall network. Does nothing once recall has begun.
    pub fn freeze(&mut self) -> Result<(), MemoryError> {
        if let Phase::Learning { sim, .. } = &self.phase {
            let topo = sim.topology().clone();
            self.enter_recall(topo)?;
        }
        Ok(())
    }

    pub fn recall(&mut self, cue: &Cue) -> Result<RecallOutcome, MemoryError> {
        self.recall_repeated(cue, self.cfg.cue_repeats)
    }

    /// Present the cue `repeats` times, `cue_spacing_ms` apart, in one recall slot.
    pub fn recall_repeated(&mut self, cue: &Cue, repeats: u32) -> Result<RecallOutcome, MemoryError> {
        self.check(cue)?;
        if repeats == 0 {
            return Err(MemoryError::Config("cue must be shown at least once".into()));
        }
        self.freeze()?;
        let Phase::Recall { sim, next, .. } = &mut self.phase else { unreachable!() };
        let dg = sim.topology().population(DG).expect("dg");
        let start = *next;
        let times: Vec<f64> = (0..repeats).map(|r| start + r as f64 * self.cfg.cue_spacing_ms).collect();
        let input_end = *times.last().expect("nonempty");
        let end = start + self.cfg.recall_slot_ms.max(input_end - start + 3.0 * self.cfg.dt);
        sim.schedule(dg, &StimulusSchedule::volleys(&cue.indices(), times))?;
        sim.run_until(end)?;
        *next = end;
        let window_start = input_end + self.cfg.stdp.delay + self.cfg.dt;
        let slot = OpSlot { start, input_end, window_start, end };
        self.recall_slots.push(slot.clone());
        let recalled = recalled_in(sim, cue.active(), window_start, end);
        Ok(RecallOutcome { cue: cue.active().clone(), recalled, slot })
    }

    /// Clock of the current phase, in ms.
    pub fn now_ms(&self) -> f64 {
        match &self.phase {
            Phase::Learning { next, .. } | Phase::Recall { next, .. } => *next,
        }
    }

    /// Advance the recall network without input.
    pub fn idle(&mut self, ms: f64) -> Result<(), MemoryError> {
        self.freeze()?;
        let Phase::Recall { sim, next, .. } = &mut self.phase else { unreachable!() };
        let end = *next + ms;
        sim.run_until(end)?;
        *next = end;
        Ok(())
    }
}
