use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::neuron::{integrate_neuron_step, NeuronState, Propagator};
use super::topology::steps_of;
use super::{EngineError, NetworkTopology, PopId, PopulationKind, ProjectionKind, Receptor, SpikeRecord};
use crate::plasticity::{Transmission, WeightEntry, WeightSnapshot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    /// ms
    pub dt: f64,
    /// ms
    pub duration: f64,
    pub record_voltages: bool,
    /// Integrate neurons in a seeded random order instead of ascending index.
    pub shuffle_seed: Option<u64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { dt: 1.0, duration: 100.0, record_voltages: false, shuffle_seed: None }
    }
}

/// Scheduled spikes for one source population.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StimulusSchedule {
    /// `(neuron, time_ms)`
    pub spikes: Vec<(usize, f64)>,
}

impl StimulusSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every neuron of `indices` once at each of `times`.
    pub fn volleys(indices: &[usize], times: impl IntoIterator<Item = f64>) -> Self {
        let mut s = Self::new();
        for t in times {
            for &i in indices {
                s.spikes.push((i, t));
            }
        }
        s
    }

    pub fn push(&mut self, neuron: usize, t: f64) {
        self.spikes.push((neuron, t));
    }

    pub fn extend(&mut self, other: &StimulusSchedule) {
        self.spikes.extend_from_slice(&other.spikes);
    }

    /// Times must be non-negative and strictly increasing per neuron once sorted;
    /// a duplicate `(neuron, time)` is an error.
    pub fn validate(&self, size: usize) -> Result<(), EngineError> {
        let mut seen: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &(i, t) in &self.spikes {
            if i >= size {
                return Err(EngineError::Stimulus(format!("neuron {} out of range {}", i, size)));
            }
            if !(t >= 0.0) || !t.is_finite() {
                return Err(EngineError::Stimulus(format!("bad spike time {}", t)));
            }
            seen.entry(i).or_default().push(t);
        }
        for (i, mut ts) in seen {
            ts.sort_by(f64::total_cmp);
            if ts.windows(2).any(|w| w[0] == w[1]) {
                return Err(EngineError::Stimulus(format!("neuron {} has duplicate spike times", i)));
            }
        }
        Ok(())
    }
}

struct StaticOut {
    post_pop: usize,
    /// `targets[pre]` = `(post, signed weight, delay steps)`
    targets: Vec<Vec<(usize, f64, usize)>>,
}

struct PlasticIndex {
    proj: usize,
    pre_pop: usize,
    post_pop: usize,
    delay: usize,
    out: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    /// Arrival ring: presynaptic indices reaching the synapses at each slot.
    arrivals: Vec<Vec<usize>>,
}

/// Clock-driven simulator. Each step: deliver pending input (committing plastic
/// synapses on arrival) -> integrate every neuron -> pair postsynaptic spikes ->
/// enqueue outgoing spikes.
pub struct Simulator {
    topology: NetworkTopology,
    dt: f64,
    step: u64,
    states: Vec<Vec<NeuronState>>,
    props: Vec<Option<Propagator>>,
    ring_len: usize,
    /// `ring[pop][slot][neuron]` = (exc, inh) nA
    ring: Vec<Vec<Vec<(f64, f64)>>>,
    statics: Vec<Vec<StaticOut>>,
    plastics: Vec<PlasticIndex>,
    stimuli: Vec<BTreeMap<u64, Vec<usize>>>,
    record: SpikeRecord,
    voltages: Option<Vec<Vec<Vec<f64>>>>,
    order: Vec<Vec<usize>>,
}

impl Simulator {
    pub fn new(topology: NetworkTopology, config: &SimulationConfig) -> Result<Self, EngineError> {
        let dt = config.dt;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(EngineError::InvalidParams("dt must be positive".into()));
        }
        topology.validate(dt)?;
        let np = topology.populations.len();
        let mut max_delay = 1usize;
        let mut statics: Vec<Vec<StaticOut>> = (0..np).map(|_| Vec::new()).collect();
        let mut plastics = Vec::new();
        for (pi, proj) in topology.projections.iter().enumerate() {
            let pre_size = topology.populations[proj.pre.0].size;
            let post_size = topology.populations[proj.post.0].size;
            match &proj.kind {
                ProjectionKind::Static(syns) => {
                    let mut targets = vec![Vec::new(); pre_size];
                    for s in syns {
                        let d = steps_of(s.delay, dt).unwrap_or(1) as usize;
                        max_delay = max_delay.max(d);
                        let w = match s.receptor {
                            Receptor::Excitatory => s.weight,
                            Receptor::Inhibitory => -s.weight,
                        };
                        targets[s.pre].push((s.post, w, d));
                    }
                    statics[proj.pre.0].push(StaticOut { post_pop: proj.post.0, targets });
                }
                ProjectionKind::Plastic { params, synapses, .. } => {
                    let d = steps_of(params.delay, dt).unwrap_or(1) as usize;
                    max_delay = max_delay.max(d);
                    let mut out = vec![Vec::new(); pre_size];
                    let mut incoming = vec![Vec::new(); post_size];
                    for (k, s) in synapses.iter().enumerate() {
                        out[s.pre].push(k);
                        incoming[s.post].push(k);
                    }
                    plastics.push(PlasticIndex {
                        proj: pi,
                        pre_pop: proj.pre.0,
                        post_pop: proj.post.0,
                        delay: d,
                        out,
                        incoming,
                        arrivals: Vec::new(),
                    });
                }
            }
        }
        let ring_len = max_delay + 1;
        for p in &mut plastics {
            p.arrivals = vec![Vec::new(); ring_len];
        }
        let states = topology
            .populations
            .iter()
            .map(|p| match &p.kind {
                PopulationKind::Lif(params) => vec![NeuronState::at_rest(params); p.size],
                PopulationKind::Source => Vec::new(),
            })
            .collect();
        let props = topology
            .populations
            .iter()
            .map(|p| match &p.kind {
                PopulationKind::Lif(params) => Some(Propagator::new(params, dt)),
                PopulationKind::Source => None,
            })
            .collect();
        let ring = topology.populations.iter().map(|p| vec![vec![(0.0, 0.0); p.size]; ring_len]).collect();
        let mut rng = config.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
        let order = topology
            .populations
            .iter()
            .map(|p| {
                let mut o: Vec<usize> = (0..p.size).collect();
                if let Some(rng) = rng.as_mut() {
                    o.shuffle(rng);
                }
                o
            })
            .collect();
        let record = SpikeRecord::new(
            dt,
            topology.populations.iter().map(|p| p.name.clone()).collect(),
            topology.populations.iter().map(|p| p.size).collect(),
        );
        let voltages =
            config.record_voltages.then(|| topology.populations.iter().map(|p| vec![Vec::new(); p.size]).collect());
        Ok(Self {
            stimuli: vec![BTreeMap::new(); np],
            topology,
            dt,
            step: 0,
            states,
            props,
            ring_len,
            ring,
            statics,
            plastics,
            record,
            voltages,
            order,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Index of the next step to be simulated.
    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn now_ms(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn record(&self) -> &SpikeRecord {
        &self.record
    }

    pub fn into_parts(self) -> (NetworkTopology, SpikeRecord) {
        (self.topology, self.record)
    }

    pub fn state(&self, pop: PopId, neuron: usize) -> Option<&NeuronState> {
        self.states.get(pop.0).and_then(|s| s.get(neuron))
    }

    /// Membrane trace per step of one neuron, when recording is enabled.
    pub fn voltage_trace(&self, pop: PopId, neuron: usize) -> Option<&[f64]> {
        self.voltages.as_ref().and_then(|v| v.get(pop.0)).and_then(|p| p.get(neuron)).map(|t| t.as_slice())
    }

    /// Queue spikes of a source population. Times must not lie in the past.
    pub fn schedule(&mut self, pop: PopId, schedule: &StimulusSchedule) -> Result<(), EngineError> {
        let p = self
            .topology
            .populations
            .get(pop.0)
            .ok_or_else(|| EngineError::Stimulus(format!("unknown population {}", pop.0)))?;
        if !matches!(p.kind, PopulationKind::Source) {
            return Err(EngineError::Stimulus(format!("population '{}' is not a spike source", p.name)));
        }
        schedule.validate(p.size)?;
        for &(i, t) in &schedule.spikes {
            let k =
                steps_of(t, self.dt).ok_or_else(|| EngineError::Stimulus(format!("time {} not aligned to dt", t)))?;
            if k < self.step {
                return Err(EngineError::Stimulus(format!(
                    "spike at {} ms lies before the current time {} ms",
                    t,
                    self.now_ms()
                )));
            }
            let slot = self.stimuli[pop.0].entry(k).or_default();
            if slot.contains(&i) {
                return Err(EngineError::Stimulus(format!("neuron {} already scheduled at {} ms", i, t)));
            }
            slot.push(i);
        }
        Ok(())
    }

    /// Simulate until the clock reads `t_ms` (exclusive of that step).
    pub fn run_until(&mut self, t_ms: f64) -> Result<(), EngineError> {
        let end = steps_of(t_ms, self.dt)
            .ok_or_else(|| EngineError::InvalidParams(format!("time {} not aligned to dt", t_ms)))?;
        while self.step < end {
            self.advance();
        }
        Ok(())
    }

    pub fn run_steps(&mut self, n: u64) {
        for _ in 0..n {
            self.advance();
        }
    }

    /// Committed weights of the named plastic projection.
    pub fn weights(&self, projection: &str) -> Option<WeightSnapshot> {
        weights_of(&self.topology, projection)
    }

    fn advance(&mut self) {
        let k = self.step;
        let slot = (k % self.ring_len as u64) as usize;
        let t = k as f64 * self.dt;

        for (pop, states) in self.states.iter_mut().enumerate() {
            for (n, st) in states.iter_mut().enumerate() {
                let (e, i) = self.ring[pop][slot][n];
                st.i_exc += e;
                st.i_inh += i;
            }
        }
        for pop in &mut self.ring {
            pop[slot].iter_mut().for_each(|x| *x = (0.0, 0.0));
        }

        for pl in &mut self.plastics {
            let arrivals = std::mem::take(&mut pl.arrivals[slot]);
            if arrivals.is_empty() {
                continue;
            }
            let ProjectionKind::Plastic { params, transmission, synapses } =
                &mut self.topology.projections[pl.proj].kind
            else {
                unreachable!()
            };
            for pre in arrivals {
                for &si in &pl.out[pre] {
                    let syn = &mut synapses[si];
                    let (before, after) = syn.on_pre_spike(t, params);
                    let w = match transmission {
                        Transmission::AfterCommit => after,
                        Transmission::BeforeCommit => before,
                    };
                    self.states[pl.post_pop][syn.post].i_exc += w;
                }
            }
        }

        let mut fired: Vec<Vec<usize>> = vec![Vec::new(); self.states.len()];
        for (pop, p) in self.topology.populations.iter().enumerate() {
            match &p.kind {
                PopulationKind::Source => {
                    if let Some(mut due) = self.stimuli[pop].remove(&k) {
                        due.sort_unstable();
                        fired[pop] = due;
                    }
                }
                PopulationKind::Lif(params) => {
                    let prop = self.props[pop].as_ref().expect("lif propagator");
                    for &n in &self.order[pop] {
                        if integrate_neuron_step(&mut self.states[pop][n], params, prop) {
                            fired[pop].push(n);
                        }
                    }
                    fired[pop].sort_unstable();
                    if let Some(v) = self.voltages.as_mut() {
                        for (trace, state) in v[pop].iter_mut().zip(&self.states[pop]) {
                            trace.push(state.v);
                        }
                    }
                }
            }
        }

        for pl in &self.plastics {
            if fired[pl.post_pop].is_empty() {
                continue;
            }
            let ProjectionKind::Plastic { params, synapses, .. } = &mut self.topology.projections[pl.proj].kind else {
                unreachable!()
            };
            for &post in &fired[pl.post_pop] {
                for &si in &pl.incoming[post] {
                    synapses[si].on_post_spike(t, params);
                }
            }
        }

        for (pop, spikes) in fired.iter().enumerate() {
            for &n in spikes {
                self.record.events[pop].push((n, k));
                for out in &self.statics[pop] {
                    for &(post, w, d) in &out.targets[n] {
                        let s = (slot + d) % self.ring_len;
                        let cell = &mut self.ring[out.post_pop][s][post];
                        if w >= 0.0 {
                            cell.0 += w;
                        } else {
                            cell.1 -= w;
                        }
                    }
                }
            }
        }
        for pl in &mut self.plastics {
            if fired[pl.pre_pop].is_empty() {
                continue;
            }
            let s = (slot + pl.delay) % self.ring_len;
            pl.arrivals[s].extend_from_slice(&fired[pl.pre_pop]);
        }

        self.step += 1;
    }
}

pub fn weights_of(topology: &NetworkTopology, projection: &str) -> Option<WeightSnapshot> {
    match &topology.projection(projection)?.kind {
        ProjectionKind::Plastic { synapses, .. } => Some(WeightSnapshot {
            entries: synapses.iter().map(|s| WeightEntry { pre: s.pre, post: s.post, weight: s.weight }).collect(),
        }),
        ProjectionKind::Static(syns) => Some(WeightSnapshot {
            entries: syns.iter().map(|s| WeightEntry { pre: s.pre, post: s.post, weight: s.weight }).collect(),
        }),
    }
}

/// One-shot run over `config.duration`. Returns the record and the final
/// topology, whose plastic projections hold the committed weights.
pub fn run_simulation(
    topology: NetworkTopology,
    stimuli: &[(PopId, StimulusSchedule)],
    config: &SimulationConfig,
) -> Result<(SpikeRecord, NetworkTopology), EngineError> {
    steps_of(config.duration, config.dt)
        .ok_or_else(|| EngineError::InvalidParams("duration must be a multiple of dt".into()))?;
    let mut sim = Simulator::new(topology, config)?;
    for (pop, sched) in stimuli {
        if let Some(&(_, t)) = sched.spikes.iter().find(|(_, t)| *t >= config.duration) {
            return Err(EngineError::Stimulus(format!("spike at {} ms beyond duration {}", t, config.duration)));
        }
        sim.schedule(*pop, sched)?;
    }
    sim.run_until(config.duration)?;
    let (topo, record) = sim.into_parts();
    Ok((record, topo))
}
