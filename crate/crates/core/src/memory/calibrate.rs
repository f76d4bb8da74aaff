use std::collections::BTreeSet;

use super::*;

/// A cue, what it should complete to, and how many times it is shown.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub cue: Cue,
    pub expected: BTreeSet<usize>,
    pub repeats: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub patterns: Vec<Pattern>,
    pub probes: Vec<Probe>,
}

impl Workload {
    /// Each pattern probed with itself minus its highest index.
    pub fn leave_last_out(patterns: Vec<Pattern>) -> Result<Self, MemoryError> {
        let mut probes = Vec::new();
        for p in &patterns {
            let mut cue = p.active().clone();
            let last = *cue.iter().next_back().expect("nonempty pattern");
            cue.remove(&last);
            if cue.is_empty() {
                return Err(MemoryError::Pattern(format!("pattern {} too small to cue", p)));
            }
            probes.push(Probe { cue: Pattern::new(cue, p.n())?, expected: BTreeSet::from([last]), repeats: 1 });
        }
        Ok(Self { patterns, probes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub weight: f64,
    pub exact: usize,
    pub total: usize,
    pub recalled: Vec<BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("empty or inverted search bounds")]
    Bounds,
    #[error("no inhibition weight in bounds gives perfect recall")]
    NotFound { rows: Vec<CalibrationRow> },
    #[error("{0}")]
    Model(String),
}

fn score(base: &RegulatedConfig, w: f64, workload: &Workload) -> Result<CalibrationRow, CalibrationError> {
    let cfg = RegulatedConfig { w_pc_pc_inh: w, ..base.clone() };
    let err = |e: MemoryError| CalibrationError::Model(e.to_string());
    let mut mem = RegulatedMemory::new(cfg).map_err(err)?;
    mem.learn(&workload.patterns).map_err(err)?;
    let mut exact = 0;
    let mut recalled = Vec::new();
    for probe in &workload.probes {
        let out = mem.recall_repeated(&probe.cue, probe.repeats).map_err(err)?;
        if out.recalled == probe.expected {
            exact += 1;
        }
        recalled.push(out.recalled);
    }
    Ok(CalibrationRow { weight: w, exact, total: workload.probes.len(), recalled })
}

/// Grid search over the recurrent inhibition weight. Each candidate learns the
/// workload from scratch and replays every probe. Returns the smallest weight
/// with all probes exact, plus the per-candidate table.
pub fn calibrate_inhibition(
    base: &RegulatedConfig,
    workload: &Workload,
    bounds: (f64, f64),
    step: f64,
) -> Result<(f64, Vec<CalibrationRow>), CalibrationError> {
    let (lo, hi) = bounds;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) || workload.probes.is_empty() {
        return Err(CalibrationError::Bounds);
    }
    if !(step > 0.0) && lo != hi {
        return Err(CalibrationError::Bounds);
    }
    let count = if lo == hi { 1 } else { ((hi - lo) / step + 1e-9).floor() as usize + 1 };
    let mut rows = Vec::with_capacity(count);
    for k in 0..count {
        // integer stepping keeps grid values reproducible
        let w = ((lo + k as f64 * step) * 1e9).round() / 1e9;
        let row = score(base, w, workload)?;
        let perfect = row.exact == row.total;
        rows.push(row);
        if perfect {
            return Ok((w, rows));
        }
    }
    Err(CalibrationError::NotFound { rows })
}
