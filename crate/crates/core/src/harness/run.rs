use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::metrics::{detect_state_persistence, evaluate_recall, merged_state, CueSlot, Persistence, RecallMetrics};
use super::raster::{RasterData, SlotMark};
use super::spec::{Expectation, ExperimentSpec, ModelConfig, Plan, ResolvedOp, ResolvedRecall, SpecError};
use crate::engine::SpikeRecord;
use crate::memory::{
    count_resources, fmt_set, MemoryError, ModelKind, OpSlot, OscillatoryMemory, Pattern, RecallOutcome,
    RegulatedMemory, ResourceCounts, DG, PC,
};
use crate::plasticity::WeightSnapshot;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{context}: {source}")]
    Model { context: String, source: MemoryError },
}

fn at(context: impl Into<String>) -> impl FnOnce(MemoryError) -> RunError {
    let context = context.into();
    move |source| RunError::Model { context, source }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeCounts {
    pub total: usize,
    pub by_population: BTreeMap<String, usize>,
}

impl SpikeCounts {
    /// Spikes emitted in `[from_ms, to_ms)`.
    pub fn between(record: &SpikeRecord, from_ms: f64, to_ms: f64) -> Self {
        let (from, to) = ((from_ms / record.dt).round() as u64, (to_ms / record.dt).round() as u64);
        let by_population: BTreeMap<String, usize> = record
            .names
            .iter()
            .zip(&record.events)
            .map(|(name, ev)| (name.clone(), ev.iter().filter(|(_, k)| *k >= from && *k < to).count()))
            .collect();
        Self { total: by_population.values().sum(), by_population }
    }

    pub fn all(record: &SpikeRecord) -> Self {
        Self::between(record, 0.0, f64::MAX / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallReport {
    pub op: usize,
    pub pattern: String,
    pub cue: BTreeSet<usize>,
    pub expect: Expectation,
    pub met: bool,
    pub start_ms: f64,
    pub input_end_ms: f64,
    pub window_start_ms: f64,
    pub end_ms: f64,
    #[serde(flatten)]
    pub metrics: RecallMetrics,
    /// From the start of the recall window until the next recall or the end of the run.
    pub hold_window_ms: [f64; 2],
    pub persistence: Persistence,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge_with: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merged_at_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merged_set: Option<BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdleReport {
    pub op: usize,
    pub start_ms: f64,
    pub end_ms: f64,
    pub pc_spikes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub model: ModelKind,
    pub seed: u64,
    /// Every recall expectation met.
    pub passed: bool,
    pub duration_ms: f64,
    /// Start of the recall phase on the report clock.
    pub recall_offset_ms: f64,
    pub patterns: BTreeMap<String, BTreeSet<usize>>,
    pub resources: ResourceCounts,
    /// Spike-count energy proxy.
    pub spikes: SpikeCounts,
    pub learn_slots: Vec<SlotMark>,
    pub recalls: Vec<RecallReport>,
    pub idles: Vec<IdleReport>,
    #[serde(skip)]
    pub record: SpikeRecord,
    #[serde(skip)]
    pub weights: WeightSnapshot,
    #[serde(skip)]
    pub raster: RasterData,
}

impl Report {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    /// One line per recall, for terminals.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} ({}): {} | {} spikes over {} ms\n",
            self.name,
            self.model,
            if self.passed { "PASS" } else { "FAIL" },
            self.spikes.total,
            self.duration_ms
        );
        for r in &self.recalls {
            out.push_str(&format!(
                "  recall {} cue {} expected {} got {} [{:?}: {}]",
                r.pattern,
                fmt_set(&r.cue),
                fmt_set(&r.metrics.expected),
                fmt_set(&r.metrics.recalled),
                r.expect,
                if r.met { "met" } else { "not met" }
            ));
            if let Some(t) = r.merged_at_ms {
                out.push_str(&format!(" merged at {} ms", t));
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<name>.report.toml`, `.spikes.csv`, `.weights.csv` and
    /// optionally `.svg` into `dir`.
    pub fn write_to(&self, dir: &Path, svg: bool) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let path = |ext: &str| dir.join(format!("{}.{}", self.name, ext));
        let mut spikes = Vec::new();
        self.record.write_csv(&mut spikes)?;
        let mut weights = Vec::new();
        self.weights.write_csv(&mut weights)?;
        let mut files = vec![
            (path("report.toml"), self.to_toml().into_bytes()),
            (path("spikes.csv"), spikes),
            (path("weights.csv"), weights),
        ];
        if svg {
            files.push((path("svg"), self.raster.to_svg(&[DG, PC]).into_bytes()));
        }
        let mut written = Vec::new();
        for (p, bytes) in files {
            fs::write(&p, bytes)?;
            written.push(p);
        }
        Ok(written)
    }
}

enum Model {
    Oscillatory(OscillatoryMemory),
    Regulated(RegulatedMemory),
}

impl Model {
    fn now_ms(&self) -> f64 {
        match self {
            Model::Oscillatory(m) => m.now_ms(),
            Model::Regulated(m) => m.now_ms(),
        }
    }

    fn idle(&mut self, ms: f64) -> Result<(), MemoryError> {
        match self {
            Model::Oscillatory(m) => m.idle(ms),
            Model::Regulated(m) => m.idle(ms),
        }
    }

    fn recall(&mut self, cue: &Pattern, repeats: u32) -> Result<RecallOutcome, MemoryError> {
        match self {
            Model::Oscillatory(m) => m.recall(cue),
            Model::Regulated(m) => m.recall_repeated(cue, repeats),
        }
    }
}

enum Step {
    Recall(usize, ResolvedRecall, OpSlot),
    Idle(usize, f64, f64),
}

pub fn run_experiment(spec: &ExperimentSpec, seed: Option<u64>) -> Result<Report, RunError> {
    let plan = spec.resolve(seed)?;
    run_plan(&plan)
}

/// Build, learn, freeze when regulated, run every operation, then score.
/// The regulated model's recall network has its own clock; the report places
/// it after the last learning slot.
pub fn run_plan(plan: &Plan) -> Result<Report, RunError> {
    let to_learn: Vec<Pattern> = plan.learn.iter().map(|n| plan.pattern(n).expect("resolved").clone()).collect();
    let mut model = match &plan.config {
        ModelConfig::Oscillatory(c) => Model::Oscillatory(OscillatoryMemory::new(c.clone()).map_err(at("build"))?),
        ModelConfig::Regulated(c) => Model::Regulated(RegulatedMemory::new(c.clone()).map_err(at("build"))?),
    };
    match &mut model {
        Model::Oscillatory(m) => {
            m.learn(&to_learn).map_err(at("learn"))?;
        }
        Model::Regulated(m) => {
            m.learn(&to_learn).map_err(at("learn"))?;
            m.freeze().map_err(at("freeze"))?;
        }
    }

    let mut steps = Vec::new();
    for (k, op) in plan.ops.iter().enumerate() {
        match op {
            ResolvedOp::Idle(ms) => {
                let start = model.now_ms();
                model.idle(*ms).map_err(at(format!("op {} idle", k)))?;
                steps.push(Step::Idle(k, start, model.now_ms()));
            }
            ResolvedOp::Recall(r) => {
                if let Some(t) = r.start_ms {
                    let wait = t - model.now_ms();
                    if wait > 0.0 {
                        model.idle(wait).map_err(at(format!("op {} wait", k)))?;
                    }
                }
                let out = model
                    .recall(&r.cue, r.repeats)
                    .map_err(at(format!("op {} recall {} cue {}", k, r.pattern, r.cue)))?;
                steps.push(Step::Recall(k, r.clone(), out.slot));
            }
        }
    }
    if let Some(t) = plan.run_until_ms {
        let wait = t - model.now_ms();
        if wait > 0.0 {
            model.idle(wait).map_err(at("final idle"))?;
        }
    }

    let (record, weights, learn_slots, offset, end) = match &model {
        Model::Oscillatory(m) => {
            let slots = m.slots()[..plan.learn.len()].to_vec();
            (m.record().clone(), m.weights(), slots, 0.0, m.now_ms())
        }
        Model::Regulated(m) => {
            let learn = m.learning_record().expect("learned").clone();
            let offset = m.learn_slots().last().map(|s| s.end).unwrap_or(0.0);
            let mut record = learn;
            let shift = (offset / record.dt).round() as u64;
            let mut recall = m.recall_record().expect("frozen").clone();
            for ev in &mut recall.events {
                for e in ev.iter_mut() {
                    e.1 += shift;
                }
            }
            record.extend(&recall);
            (record, m.snapshot().clone(), m.learn_slots().to_vec(), offset, offset + m.now_ms())
        }
    };

    let learn_marks: Vec<SlotMark> = learn_slots
        .iter()
        .zip(&plan.learn)
        .map(|(s, name)| SlotMark { label: format!("learn {}", name), start_ms: s.start, end_ms: s.end })
        .collect();
    let recall_starts: Vec<f64> = steps
        .iter()
        .filter_map(|s| match s {
            Step::Recall(_, _, slot) => Some(slot.start + offset),
            Step::Idle(..) => None,
        })
        .collect();

    let mut recalls = Vec::new();
    let mut idles = Vec::new();
    let mut marks = learn_marks.clone();
    for step in &steps {
        match step {
            Step::Idle(k, s, e) => {
                let counts = SpikeCounts::between(&record, s + offset, e + offset);
                idles.push(IdleReport {
                    op: *k,
                    start_ms: s + offset,
                    end_ms: e + offset,
                    pc_spikes: counts.by_population.get(PC).copied().unwrap_or(0),
                });
            }
            Step::Recall(k, r, local) => {
                let slot = OpSlot {
                    start: local.start + offset,
                    input_end: local.input_end + offset,
                    window_start: local.window_start + offset,
                    end: local.end + offset,
                };
                marks.push(SlotMark { label: format!("cue {}", r.pattern), start_ms: slot.start, end_ms: slot.end });
                let cue = r.cue.active().clone();
                let metrics = evaluate_recall(&record, &CueSlot { cue: cue.clone(), slot: slot.clone() }, &r.expected);
                // the state only has to last until the next cue reaches the PCs
                let hold_end = recall_starts
                    .iter()
                    .copied()
                    .find(|&t| t > slot.start)
                    .map_or(end, |t| (t + plan.config.input_delay_ms()).min(end));
                let hold = [slot.window_start, hold_end.max(slot.window_start)];
                let pattern = plan.pattern(&r.pattern).expect("resolved").active().clone();
                let persistence = detect_state_persistence(&record, &pattern, (hold[0], hold[1]));
                let merged = r.merge_with.as_ref().and_then(|other| {
                    let b = plan.pattern(other).expect("resolved").active();
                    merged_state(&record, (hold[0], hold[1]), &cue, &pattern, b)
                });
                let met = match r.expect {
                    Expectation::Exact => metrics.exact,
                    Expectation::Mismatch => !metrics.exact,
                    Expectation::Merge => merged.is_some(),
                };
                recalls.push(RecallReport {
                    op: *k,
                    pattern: r.pattern.clone(),
                    cue,
                    expect: r.expect,
                    met,
                    start_ms: slot.start,
                    input_end_ms: slot.input_end,
                    window_start_ms: slot.window_start,
                    end_ms: slot.end,
                    metrics,
                    hold_window_ms: hold,
                    persistence,
                    merge_with: r.merge_with.clone(),
                    merged_at_ms: merged.as_ref().map(|c| c.start_ms),
                    merged_set: merged.map(|c| c.emitted),
                });
            }
        }
    }

    let n = plan.config.n();
    Ok(Report {
        name: plan.name.clone(),
        model: plan.model,
        seed: plan.seed,
        passed: recalls.iter().all(|r| r.met),
        duration_ms: end,
        recall_offset_ms: offset,
        patterns: plan.patterns.iter().map(|(k, p)| (k.clone(), p.active().clone())).collect(),
        resources: count_resources(plan.model, n),
        spikes: SpikeCounts::all(&record),
        learn_slots: learn_marks,
        recalls,
        idles,
        raster: RasterData::from_record(&record, marks, end),
        record,
        weights,
    })
}
