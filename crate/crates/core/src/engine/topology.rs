use serde::{Deserialize, Serialize};

use super::{EngineError, NeuronParams};
use crate::plasticity::{PlasticSynapse, StdpParams, Transmission};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PopId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum PopulationKind {
    /// Emits only scheduled spikes.
    Source,
    Lif(NeuronParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub name: String,
    pub size: usize,
    pub kind: PopulationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receptor {
    Excitatory,
    Inhibitory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticSynapse {
    pub pre: usize,
    pub post: usize,
    /// Magnitude in nA; the receptor gives the sign.
    pub weight: f64,
    pub receptor: Receptor,
    /// ms
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionKind {
    Static(Vec<StaticSynapse>),
    /// Excitatory synapses under STDP, all with `params.delay`.
    Plastic {
        params: StdpParams,
        transmission: Transmission,
        synapses: Vec<PlasticSynapse>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub name: String,
    pub pre: PopId,
    pub post: PopId,
    pub kind: ProjectionKind,
}

impl Projection {
    pub fn len(&self) -> usize {
        match &self.kind {
            ProjectionKind::Static(s) => s.len(),
            ProjectionKind::Plastic { synapses, .. } => synapses.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_plastic(&self) -> bool {
        matches!(self.kind, ProjectionKind::Plastic { .. })
    }
}

/// Connection patterns used by the builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    OneToOne,
    AllToAll,
    AllToAllNoSelf,
}

impl Connectivity {
    pub fn pairs(self, n_pre: usize, n_post: usize) -> Vec<(usize, usize)> {
        match self {
            Connectivity::OneToOne => (0..n_pre.min(n_post)).map(|i| (i, i)).collect(),
            Connectivity::AllToAll => (0..n_pre).flat_map(|i| (0..n_post).map(move |j| (i, j))).collect(),
            Connectivity::AllToAllNoSelf => {
                (0..n_pre).flat_map(|i| (0..n_post).filter(move |&j| j != i).map(move |j| (i, j))).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkTopology {
    pub populations: Vec<Population>,
    pub projections: Vec<Projection>,
}

impl NetworkTopology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_population(&mut self, name: &str, size: usize, kind: PopulationKind) -> PopId {
        self.populations.push(Population { name: name.to_string(), size, kind });
        PopId(self.populations.len() - 1)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn connect_static(
        &mut self,
        name: &str,
        pre: PopId,
        post: PopId,
        conn: Connectivity,
        weight: f64,
        receptor: Receptor,
        delay: f64,
    ) {
        let synapses = conn
            .pairs(self.populations[pre.0].size, self.populations[post.0].size)
            .into_iter()
            .map(|(i, j)| StaticSynapse { pre: i, post: j, weight, receptor, delay })
            .collect();
        self.projections.push(Projection { name: name.to_string(), pre, post, kind: ProjectionKind::Static(synapses) });
    }

    pub fn connect_plastic(
        &mut self,
        name: &str,
        pre: PopId,
        post: PopId,
        conn: Connectivity,
        params: StdpParams,
        transmission: Transmission,
    ) {
        let synapses = conn
            .pairs(self.populations[pre.0].size, self.populations[post.0].size)
            .into_iter()
            .map(|(i, j)| PlasticSynapse::new(i, j, &params))
            .collect();
        self.projections.push(Projection {
            name: name.to_string(),
            pre,
            post,
            kind: ProjectionKind::Plastic { params, transmission, synapses },
        });
    }

    pub fn population(&self, name: &str) -> Option<PopId> {
        self.populations.iter().position(|p| p.name == name).map(PopId)
    }

    pub fn projection(&self, name: &str) -> Option<&Projection> {
        self.projections.iter().find(|p| p.name == name)
    }

    pub fn projection_mut(&mut self, name: &str) -> Option<&mut Projection> {
        self.projections.iter_mut().find(|p| p.name == name)
    }

    pub fn neuron_count(&self) -> usize {
        self.populations.iter().map(|p| p.size).sum()
    }

    pub fn static_synapse_count(&self) -> usize {
        self.projections.iter().filter(|p| !p.is_plastic()).map(Projection::len).sum()
    }

    pub fn plastic_synapse_count(&self) -> usize {
        self.projections.iter().filter(|p| p.is_plastic()).map(Projection::len).sum()
    }

    /// Check indices, delays and parameters against `dt`.
    pub fn validate(&self, dt: f64) -> Result<(), EngineError> {
        for p in &self.populations {
            if let PopulationKind::Lif(params) = &p.kind {
                params.validate()?;
            }
        }
        for proj in &self.projections {
            let (Some(pre), Some(post)) = (self.populations.get(proj.pre.0), self.populations.get(proj.post.0)) else {
                return Err(EngineError::Topology(format!("{}: unknown population", proj.name)));
            };
            if matches!(post.kind, PopulationKind::Source) {
                return Err(EngineError::Topology(format!(
                    "{}: target population '{}' is a spike source",
                    proj.name, post.name
                )));
            }
            let check = |i: usize, j: usize, delay: f64, w: f64| -> Result<(), EngineError> {
                if i >= pre.size || j >= post.size {
                    return Err(EngineError::Topology(format!(
                        "{}: synapse {}->{} out of range ({}x{})",
                        proj.name, i, j, pre.size, post.size
                    )));
                }
                steps_of(delay, dt).filter(|&d| d >= 1).ok_or_else(|| {
                    EngineError::Topology(format!(
                        "{}: delay {} ms is not a positive multiple of dt={}",
                        proj.name, delay, dt
                    ))
                })?;
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(EngineError::Topology(format!("{}: weight {} must be finite and >= 0", proj.name, w)));
                }
                Ok(())
            };
            match &proj.kind {
                ProjectionKind::Static(syns) => {
                    for s in syns {
                        check(s.pre, s.post, s.delay, s.weight)?;
                    }
                }
                ProjectionKind::Plastic { params, synapses, .. } => {
                    params.validate().map_err(EngineError::InvalidParams)?;
                    for s in synapses {
                        check(s.pre, s.post, params.delay, s.weight)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Whole number of steps in `ms`, or `None` if not aligned to `dt`.
pub fn steps_of(ms: f64, dt: f64) -> Option<u64> {
    if !(ms >= 0.0) || !ms.is_finite() {
        return None;
    }
    let r = ms / dt;
    let k = r.round();
    ((r - k).abs() < 1e-6).then_some(k as u64)
}
