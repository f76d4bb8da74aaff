use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::engine::SpikeRecord;
use crate::memory::{OpSlot, PC};

/// Longest inter-spike interval still read as one oscillation cycle.
pub const MAX_CYCLE_MS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CueSlot {
    pub cue: BTreeSet<usize>,
    pub slot: OpSlot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallMetrics {
    pub recalled: BTreeSet<usize>,
    pub expected: BTreeSet<usize>,
    pub exact: bool,
    pub spurious: usize,
    pub missing: usize,
    pub spurious_neurons: BTreeSet<usize>,
    pub missing_neurons: BTreeSet<usize>,
    /// Time from the last cue input until every expected neuron has fired.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
    /// Absolute time of that completion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completed_at_ms: Option<f64>,
}

fn steps(record: &SpikeRecord, ms: f64) -> u64 {
    (ms / record.dt).round().max(0.0) as u64
}

/// Compare PC output after the cue has been delivered against `expected`.
/// Cue neurons firing in the window are neither recalled nor spurious.
pub fn evaluate_recall(record: &SpikeRecord, cue_slot: &CueSlot, expected: &BTreeSet<usize>) -> RecallMetrics {
    let from = steps(record, cue_slot.slot.window_start);
    let to = steps(record, cue_slot.slot.end);
    let mut first: BTreeMap<usize, u64> = BTreeMap::new();
    for &(i, k) in record.spikes(PC) {
        if k >= from && k < to && !cue_slot.cue.contains(&i) {
            first.entry(i).or_insert(k);
        }
    }
    let recalled: BTreeSet<usize> = first.keys().copied().collect();
    let spurious_neurons: BTreeSet<usize> = recalled.difference(expected).copied().collect();
    let missing_neurons: BTreeSet<usize> = expected.difference(&recalled).copied().collect();
    let completed_at_ms = if expected.is_empty() || !missing_neurons.is_empty() {
        None
    } else {
        expected.iter().map(|i| first[i]).max().map(|k| record.time_ms(k))
    };
    RecallMetrics {
        exact: spurious_neurons.is_empty() && missing_neurons.is_empty(),
        spurious: spurious_neurons.len(),
        missing: missing_neurons.len(),
        latency_ms: completed_at_ms.map(|t| t - cue_slot.slot.input_end),
        completed_at_ms,
        recalled,
        expected: expected.clone(),
        spurious_neurons,
        missing_neurons,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cycle {
    pub start_ms: f64,
    /// Shorter than the period when the window ends mid-cycle.
    pub len_ms: f64,
    pub emitted: BTreeSet<usize>,
}

fn emitted_between(record: &SpikeRecord, from: u64, to: u64) -> BTreeSet<usize> {
    record.spikes(PC).iter().filter(|&&(_, k)| k >= from && k < to).map(|&(i, _)| i).collect()
}

/// Most common PC inter-spike interval up to [`MAX_CYCLE_MS`], in steps.
fn cycle_period(record: &SpikeRecord, from: u64, to: u64) -> u64 {
    let max = steps(record, MAX_CYCLE_MS).max(1);
    let mut last: BTreeMap<usize, u64> = BTreeMap::new();
    let mut hist: BTreeMap<u64, usize> = BTreeMap::new();
    for &(i, k) in record.spikes(PC) {
        if k < from || k >= to {
            continue;
        }
        if let Some(prev) = last.insert(i, k) {
            let isi = k - prev;
            if isi >= 1 && isi <= max {
                *hist.entry(isi).or_default() += 1;
            }
        }
    }
    // ties go to the shorter period
    hist.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&p, _)| p).unwrap_or(1)
}

/// Split `[from_ms, to_ms)` into consecutive cycles of the dominant PC period
/// and list what each cycle emitted. The last cycle may be partial.
pub fn oscillation_cycles(record: &SpikeRecord, from_ms: f64, to_ms: f64) -> Vec<Cycle> {
    let (from, to) = (steps(record, from_ms), steps(record, to_ms));
    if to <= from {
        return Vec::new();
    }
    let period = cycle_period(record, from, to);
    (from..to)
        .step_by(period as usize)
        .map(|start| {
            let end = (start + period).min(to);
            Cycle {
                start_ms: record.time_ms(start),
                len_ms: (end - start) as f64 * record.dt,
                emitted: emitted_between(record, start, end),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum Persistence {
    Persistent,
    NoActivity,
    /// First cycle whose output differed from the pattern.
    Broken {
        cycle_start_ms: f64,
        emitted: BTreeSet<usize>,
    },
}

impl Persistence {
    pub fn holds(&self) -> bool {
        matches!(self, Persistence::Persistent)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Persistence::Persistent => "persistent",
            Persistence::NoActivity => "no-activity",
            Persistence::Broken { .. } => "broken",
        }
    }
}

/// Persistent iff every cycle in the window emits exactly `pattern`. A trailing
/// partial cycle must repeat what the same stretch of the previous cycle emitted.
/// Silence throughout is reported separately from a broken state.
pub fn detect_state_persistence(record: &SpikeRecord, pattern: &BTreeSet<usize>, window: (f64, f64)) -> Persistence {
    let cycles = oscillation_cycles(record, window.0, window.1);
    if cycles.iter().all(|c| c.emitted.is_empty()) {
        return Persistence::NoActivity;
    }
    let period = cycles[0].len_ms;
    for (k, c) in cycles.iter().enumerate() {
        let expected = if c.len_ms < period && k > 0 {
            let prev = steps(record, cycles[k - 1].start_ms);
            emitted_between(record, prev, prev + steps(record, c.len_ms))
        } else {
            pattern.clone()
        };
        if c.emitted != expected {
            return Persistence::Broken { cycle_start_ms: c.start_ms, emitted: c.emitted.clone() };
        }
    }
    Persistence::Persistent
}

/// First cycle whose output strictly contains the non-cue parts of both stored
/// patterns.
pub fn merged_state(
    record: &SpikeRecord,
    window: (f64, f64),
    cue: &BTreeSet<usize>,
    a: &BTreeSet<usize>,
    b: &BTreeSet<usize>,
) -> Option<Cycle> {
    let target: BTreeSet<usize> = a.union(b).filter(|i| !cue.contains(i)).copied().collect();
    oscillation_cycles(record, window.0, window.1)
        .into_iter()
        .find(|c| c.emitted.is_superset(&target) && c.emitted.len() > target.len())
}
