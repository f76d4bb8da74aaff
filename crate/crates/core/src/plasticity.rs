//! Pair-based additive STDP whose weight changes accumulate silently and are
//! applied only when a presynaptic spike reaches the synapse.
//!
//! Presynaptic times are arrival times at the synapse (emission + delay), so a
//! spike that travels for one step pairs with the postsynaptic activity it can
//! actually influence.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{NetworkTopology, ProjectionKind, Receptor, StaticSynapse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StdpParams {
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub w_max: f64,
    pub w_min: f64,
    pub w_init: f64,
    pub delay: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        Self {
            tau_plus: 3.0,
            tau_minus: 2.0,
            a_plus: 6.0,
            a_minus: 3.0,
            w_max: 12.0,
            w_min: 0.0,
            w_init: 0.0,
            delay: 1.0,
        }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau_plus > 0.0 && self.tau_minus > 0.0) {
            return Err("STDP time constants must be positive".into());
        }
        if !(self.a_plus >= 0.0 && self.a_minus >= 0.0) {
            return Err("STDP amplitudes must be non-negative".into());
        }
        if !(self.w_min <= self.w_init && self.w_init <= self.w_max) {
            return Err("need w_min <= w_init <= w_max".into());
        }
        if !(self.delay > 0.0) {
            return Err("STDP delay must be positive".into());
        }
        Ok(())
    }

    /// Age beyond which a history entry contributes less than ~1e-12 nA.
    pub fn horizon(&self) -> f64 {
        let amp = self.a_plus.max(self.a_minus).max(1e-300);
        let tau = self.tau_plus.max(self.tau_minus);
        tau * (amp / 1e-12).ln().max(1.0)
    }

    pub fn clamp(&self, w: f64) -> f64 {
        w.clamp(self.w_min, self.w_max)
    }
}

/// Weight change for one pre/post pairing, `delta_t = t_post - t_pre`.
pub fn stdp_pairing_delta(delta_t: f64, p: &StdpParams) -> f64 {
    if delta_t > 0.0 {
        p.a_plus * (-delta_t / p.tau_plus).exp()
    } else if delta_t < 0.0 {
        -p.a_minus * (delta_t / p.tau_minus).exp()
    } else {
        0.0
    }
}

/// Which weight a committing presynaptic spike carries to its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transmission {
    #[default]
    AfterCommit,
    BeforeCommit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlasticSynapse {
    pub pre: usize,
    pub post: usize,
    pub weight: f64,
    pub pre_history: VecDeque<f64>,
    pub post_history: VecDeque<f64>,
    pub pending_delta: f64,
}

impl PlasticSynapse {
    pub fn new(pre: usize, post: usize, p: &StdpParams) -> Self {
        Self {
            pre,
            post,
            weight: p.w_init,
            pre_history: VecDeque::new(),
            post_history: VecDeque::new(),
            pending_delta: 0.0,
        }
    }

    fn prune(&mut self, t: f64, horizon: f64) {
        while self.pre_history.front().is_some_and(|&s| t - s > horizon) {
            self.pre_history.pop_front();
        }
        while self.post_history.front().is_some_and(|&s| t - s > horizon) {
            self.post_history.pop_front();
        }
    }

    /// Pair a postsynaptic spike at `t` with earlier presynaptic arrivals.
    pub fn on_post_spike(&mut self, t: f64, p: &StdpParams) {
        self.prune(t, p.horizon());
        let pot: f64 = self.pre_history.iter().map(|&s| stdp_pairing_delta(t - s, p)).sum();
        self.pending_delta += pot;
        self.post_history.push_back(t);
    }

    /// Pair a presynaptic arrival at `t` with earlier postsynaptic spikes, then
    /// commit. Returns `(weight before, weight after)`.
    pub fn on_pre_spike(&mut self, t: f64, p: &StdpParams) -> (f64, f64) {
        self.prune(t, p.horizon());
        let dep: f64 = self.post_history.iter().map(|&s| stdp_pairing_delta(s - t, p)).sum();
        self.pending_delta += dep;
        self.pre_history.push_back(t);
        let before = self.weight;
        self.weight = p.clamp(self.weight + self.pending_delta);
        self.pending_delta = 0.0;
        (before, self.weight)
    }

    /// Apply whatever is pending without a presynaptic spike.
    pub fn flush(&mut self, p: &StdpParams) {
        self.weight = p.clamp(self.weight + self.pending_delta);
        self.pending_delta = 0.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub pre: usize,
    pub post: usize,
    pub weight: f64,
}

/// Committed weights of one plastic projection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightSnapshot {
    pub entries: Vec<WeightEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl WeightSnapshot {
    pub fn get(&self, pre: usize, post: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.pre == pre && e.post == post).map(|e| e.weight)
    }

    /// Dense `n x n` matrix, zero where no synapse exists.
    pub fn matrix(&self, n: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for e in &self.entries {
            if e.pre < n && e.post < n {
                m[e.pre][e.post] = e.weight;
            }
        }
        m
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "pre,post,weight_nA")?;
        let mut rows = self.entries.clone();
        rows.sort_by_key(|e| (e.pre, e.post));
        for e in rows {
            writeln!(w, "{},{},{}", e.pre, e.post, e.weight)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, SnapshotError> {
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("pre")) {
                continue;
            }
            let bad = |msg: &str| SnapshotError::Parse { line: i + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(bad("expected 3 fields"));
            }
            entries.push(WeightEntry {
                pre: f[0].parse().map_err(|_| bad("bad pre index"))?,
                post: f[1].parse().map_err(|_| bad("bad post index"))?,
                weight: f[2].parse().map_err(|_| bad("bad weight"))?,
            });
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

impl fmt::Display for WeightSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

/// Replace every plastic projection by static excitatory synapses carrying the
/// committed weights. Uncommitted changes are dropped unless `final_commit`.
pub fn freeze(topology: &NetworkTopology, final_commit: bool) -> NetworkTopology {
    let mut out = topology.clone();
    for proj in &mut out.projections {
        if let ProjectionKind::Plastic { params, synapses, .. } = &proj.kind {
            let dropped: f64 = synapses.iter().map(|s| s.pending_delta.abs()).sum();
            if dropped > 0.0 && !final_commit {
                log::info!("freezing '{}' discards {:.4} nA of uncommitted weight change", proj.name, dropped);
            }
            let statics = synapses
                .iter()
                .map(|s| {
                    let w = if final_commit { params.clamp(s.weight + s.pending_delta) } else { s.weight };
                    StaticSynapse {
                        pre: s.pre,
                        post: s.post,
                        weight: w,
                        receptor: Receptor::Excitatory,
                        delay: params.delay,
                    }
                })
                .collect();
            proj.kind = ProjectionKind::Static(statics);
        }
    }
    out
}

/// Overwrite committed plastic weights with the snapshot's values where present.
pub fn apply_snapshot(topology: &mut NetworkTopology, snapshot: &WeightSnapshot) {
    for proj in &mut topology.projections {
        match &mut proj.kind {
            ProjectionKind::Plastic { synapses, .. } => {
                for s in synapses.iter_mut() {
                    if let Some(w) = snapshot.get(s.pre, s.post) {
                        s.weight = w;
                    }
                }
            }
            ProjectionKind::Static(_) => {}
        }
    }
}
