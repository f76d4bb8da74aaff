use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use super::patterns::generate_orthogonal_patterns;
use crate::memory::{
    build_oscillatory, build_regulated, ModelKind, OscillatoryConfig, Pattern, Probe, RegulatedConfig, Workload,
};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed spec: {0}")]
    Parse(String),
    #[error("invalid spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternDecl {
    pub name: String,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateDecl {
    pub size: usize,
    pub count: usize,
    /// Consecutive blocks instead of seeded shuffles.
    #[serde(default)]
    pub contiguous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Output equals the pattern minus the cue.
    #[default]
    Exact,
    /// Output must differ from the pattern minus the cue.
    Mismatch,
    /// Some cycle after the cue merges this pattern with `merge_with`.
    Merge,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpDecl {
    Recall {
        pattern: String,
        /// Defaults to the pattern without its highest index.
        cue: Option<Vec<usize>>,
        #[serde(default)]
        expect: Expectation,
        merge_with: Option<String>,
        /// Regulated model only.
        repeats: Option<u32>,
        /// Absolute start; the network idles until then.
        start_ms: Option<f64>,
    },
    Idle {
        ms: f64,
    },
}

/// Experiment file. Model parameters not given under `[config]` keep their
/// defaults.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub model: ModelKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config: Option<toml::Table>,
    #[serde(default)]
    pub patterns: Vec<PatternDecl>,
    pub generate: Option<GenerateDecl>,
    /// Pattern names in learning order; all patterns in order when omitted.
    pub learn: Option<Vec<String>>,
    #[serde(default)]
    pub ops: Vec<OpDecl>,
    /// Idle after the last operation until this absolute time.
    pub run_until_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Oscillatory(OscillatoryConfig),
    Regulated(RegulatedConfig),
}

impl ModelConfig {
    pub fn n(&self) -> usize {
        match self {
            ModelConfig::Oscillatory(c) => c.n,
            ModelConfig::Regulated(c) => c.n,
        }
    }

    /// Transmission delay from the input population to the PCs (ms).
    pub fn input_delay_ms(&self) -> f64 {
        match self {
            ModelConfig::Oscillatory(c) => c.stdp.delay,
            ModelConfig::Regulated(c) => c.stdp.delay,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRecall {
    pub pattern: String,
    pub cue: Pattern,
    pub expected: BTreeSet<usize>,
    pub expect: Expectation,
    pub merge_with: Option<String>,
    pub repeats: u32,
    pub start_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedOp {
    Recall(ResolvedRecall),
    Idle(f64),
}

/// A spec after every name, index and timing has been checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub name: String,
    pub model: ModelKind,
    pub seed: u64,
    pub config: ModelConfig,
    pub patterns: Vec<(String, Pattern)>,
    pub learn: Vec<String>,
    pub ops: Vec<ResolvedOp>,
    pub run_until_ms: Option<f64>,
}

impl Plan {
    pub fn pattern(&self, name: &str) -> Option<&Pattern> {
        self.patterns.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }
}

const BUNDLED: &[(&str, &str)] = &[
    ("fig4_orthogonal", include_str!("../../specs/fig4_orthogonal.toml")),
    ("fig4_nonorthogonal", include_str!("../../specs/fig4_nonorthogonal.toml")),
    ("fig4_volatility", include_str!("../../specs/fig4_volatility.toml")),
    ("fig5_orthogonal", include_str!("../../specs/fig5_orthogonal.toml")),
    ("fig5_nonorthogonal", include_str!("../../specs/fig5_nonorthogonal.toml")),
    ("capacity", include_str!("../../specs/capacity.toml")),
];

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

fn invalid(msg: impl Into<String>) -> SpecError {
    SpecError::Invalid(msg.into())
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))
    }

    /// A bundled spec name or a path to a TOML file.
    pub fn load(name_or_path: &str) -> Result<Self, SpecError> {
        if let Some(text) = bundled(name_or_path) {
            return Self::parse(text);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path)
            .map_err(|source| SpecError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    fn model_config(&self) -> Result<ModelConfig, SpecError> {
        let table = self.config.clone().unwrap_or_default();
        let value = toml::Value::Table(table);
        let parse_err = |e: toml::de::Error| SpecError::Parse(format!("[config]: {}", e));
        let cfg = match self.model {
            ModelKind::Oscillatory => {
                let c: OscillatoryConfig = value.try_into().map_err(parse_err)?;
                build_oscillatory(&c).map_err(|e| invalid(e.to_string()))?;
                ModelConfig::Oscillatory(c)
            }
            ModelKind::Regulated => {
                let c: RegulatedConfig = value.try_into().map_err(parse_err)?;
                build_regulated(&c).map_err(|e| invalid(e.to_string()))?;
                ModelConfig::Regulated(c)
            }
        };
        Ok(cfg)
    }

    /// Check everything that can be checked without simulating.
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<Plan, SpecError> {
        let seed = seed_override.unwrap_or(self.seed);
        if i64::try_from(seed).is_err() {
            return Err(SpecError::Invalid(format!("seed {} does not fit a signed 64-bit integer", seed)));
        }
        let config = self.model_config()?;
        let n = config.n();

        let mut patterns: Vec<(String, Pattern)> = Vec::new();
        for d in &self.patterns {
            let p = Pattern::new(d.indices.iter().copied(), n)
                .map_err(|e| invalid(format!("pattern {}: {}", d.name, e)))?;
            if p.len() != d.indices.len() {
                return Err(invalid(format!("pattern {} repeats an index", d.name)));
            }
            patterns.push((d.name.clone(), p));
        }
        if let Some(g) = &self.generate {
            let s = if g.contiguous { None } else { Some(seed) };
            let generated = generate_orthogonal_patterns(n, g.size, g.count, s).map_err(|e| invalid(e.to_string()))?;
            patterns.extend(generated.into_iter().enumerate().map(|(i, p)| (format!("P{}", i), p)));
        }
        if patterns.is_empty() {
            return Err(invalid("no patterns declared"));
        }
        let mut names = BTreeSet::new();
        for (name, _) in &patterns {
            if !names.insert(name.as_str()) {
                return Err(invalid(format!("duplicate pattern name {}", name)));
            }
        }
        let learn = self.learn.clone().unwrap_or_else(|| patterns.iter().map(|(n, _)| n.clone()).collect());
        if learn.is_empty() {
            return Err(invalid("learn list is empty"));
        }
        for name in &learn {
            if !names.contains(name.as_str()) {
                return Err(invalid(format!("learn references unknown pattern {}", name)));
            }
        }

        let mut ops = Vec::new();
        for (k, op) in self.ops.iter().enumerate() {
            let ctx = |msg: String| invalid(format!("op {}: {}", k, msg));
            match op {
                OpDecl::Idle { ms } => {
                    if !(ms.is_finite() && *ms > 0.0) {
                        return Err(ctx("idle time must be positive".into()));
                    }
                    ops.push(ResolvedOp::Idle(*ms));
                }
                OpDecl::Recall { pattern, cue, expect, merge_with, repeats, start_ms } => {
                    let p = patterns
                        .iter()
                        .find(|(n, _)| n == pattern)
                        .map(|(_, p)| p)
                        .ok_or_else(|| ctx(format!("unknown pattern {}", pattern)))?;
                    let cue_set: BTreeSet<usize> = match cue {
                        Some(c) => c.iter().copied().collect(),
                        None => {
                            let mut s = p.active().clone();
                            let last = *s.iter().next_back().expect("nonempty");
                            s.remove(&last);
                            s
                        }
                    };
                    if cue_set.is_empty() {
                        return Err(ctx("cue is empty".into()));
                    }
                    if !cue_set.is_subset(p.active()) {
                        return Err(ctx(format!("cue is not a subset of pattern {}", pattern)));
                    }
                    let cue = Pattern::new(cue_set, n).map_err(|e| ctx(e.to_string()))?;
                    match (expect, merge_with) {
                        (Expectation::Merge, None) => return Err(ctx("merge expectation needs merge_with".into())),
                        (Expectation::Merge, Some(m)) if m == pattern || !names.contains(m.as_str()) => {
                            return Err(ctx(format!("merge_with must name another declared pattern, got {}", m)))
                        }
                        (Expectation::Exact | Expectation::Mismatch, Some(_)) => {
                            return Err(ctx("merge_with only applies to merge expectations".into()))
                        }
                        _ => {}
                    }
                    if repeats.is_some() && self.model == ModelKind::Oscillatory {
                        return Err(ctx("repeats only applies to the regulated model".into()));
                    }
                    let repeats = match (&config, repeats) {
                        (_, Some(0)) => return Err(ctx("repeats must be positive".into())),
                        (_, Some(r)) => *r,
                        (ModelConfig::Regulated(c), None) => c.cue_repeats,
                        (ModelConfig::Oscillatory(_), None) => 1,
                    };
                    if let Some(t) = start_ms {
                        if !t.is_finite() {
                            return Err(ctx("start_ms must be finite".into()));
                        }
                    }
                    let expected = p.active().difference(cue.active()).copied().collect();
                    ops.push(ResolvedOp::Recall(ResolvedRecall {
                        pattern: pattern.clone(),
                        cue,
                        expected,
                        expect: *expect,
                        merge_with: merge_with.clone(),
                        repeats,
                        start_ms: *start_ms,
                    }));
                }
            }
        }
        let plan = Plan {
            name: self.name.clone(),
            model: self.model,
            seed,
            config,
            patterns,
            learn,
            ops,
            run_until_ms: self.run_until_ms,
        };
        check_timeline(&plan)?;
        Ok(plan)
    }
}

/// Replay slot lengths without simulating so explicit start times cannot
/// overlap an earlier operation.
fn check_timeline(plan: &Plan) -> Result<(), SpecError> {
    let mut clock = match &plan.config {
        ModelConfig::Oscillatory(c) => c.first_slot_ms + plan.learn.len() as f64 * c.slot_ms,
        ModelConfig::Regulated(c) => c.first_slot_ms,
    };
    for (k, op) in plan.ops.iter().enumerate() {
        match op {
            ResolvedOp::Idle(ms) => clock += ms,
            ResolvedOp::Recall(r) => {
                if let Some(t) = r.start_ms {
                    if t < clock {
                        return Err(invalid(format!(
                            "op {}: start_ms {} overlaps the previous slot ending at {}",
                            k, t, clock
                        )));
                    }
                    clock = t;
                }
                clock += match &plan.config {
                    ModelConfig::Oscillatory(c) => c.slot_ms,
                    ModelConfig::Regulated(c) => {
                        let span = (r.repeats - 1) as f64 * c.cue_spacing_ms;
                        c.recall_slot_ms.max(span + 3.0 * c.dt)
                    }
                };
            }
        }
    }
    if let Some(t) = plan.run_until_ms {
        if t < clock {
            return Err(invalid(format!("run_until_ms {} is before the last slot ends at {}", t, clock)));
        }
    }
    Ok(())
}


#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeDecl {
    cue: Vec<usize>,
    expected: Vec<usize>,
    #[serde(default = "one")]
    repeats: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkloadDecl {
    patterns: Vec<Vec<usize>>,
    #[serde(default)]
    probes: Vec<ProbeDecl>,
}

const BUNDLED_WORKLOADS: &[(&str, &str)] = &[
    ("orthogonal", include_str!("../../specs/workload_orthogonal.toml")),
    ("nonorthogonal", include_str!("../../specs/workload_nonorthogonal.toml")),
];

/// Calibration workload from TOML: `patterns` as index lists and optional
/// `probes`. Without probes every pattern is cued with all but its highest index.
pub fn parse_workload(text: &str, n: usize) -> Result<Workload, SpecError> {
    let decl: WorkloadDecl = toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
    let patterns = decl
        .patterns
        .iter()
        .map(|p| Pattern::new(p.iter().copied(), n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| invalid(e.to_string()))?;
    if patterns.is_empty() {
        return Err(invalid("workload has no patterns"));
    }
    if decl.probes.is_empty() {
        return Workload::leave_last_out(patterns).map_err(|e| invalid(e.to_string()));
    }
    let mut probes = Vec::new();
    for p in &decl.probes {
        if p.repeats == 0 {
            return Err(invalid("probe repeats must be positive"));
        }
        let cue = Pattern::new(p.cue.iter().copied(), n).map_err(|e| invalid(e.to_string()))?;
        if let Some(&bad) = p.expected.iter().find(|&&i| i >= n) {
            return Err(invalid(format!("expected index {} out of range for n={}", bad, n)));
        }
        probes.push(Probe { cue, expected: p.expected.iter().copied().collect(), repeats: p.repeats });
    }
    Ok(Workload { patterns, probes })
}

/// A bundled workload name or a path to a TOML file.
pub fn load_workload(name_or_path: &str, n: usize) -> Result<Workload, SpecError> {
    if let Some((_, text)) = BUNDLED_WORKLOADS.iter().find(|(k, _)| *k == name_or_path) {
        return parse_workload(text, n);
    }
    let text = std::fs::read_to_string(name_or_path)
        .map_err(|source| SpecError::Io { path: name_or_path.to_string(), source })?;
    parse_workload(&text, n)
}
