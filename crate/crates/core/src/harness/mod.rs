//! Experiment specs, workload generation, recall scoring and export.

mod metrics;
mod patterns;
mod raster;
mod run;
mod spec;

pub use metrics::{
    detect_state_persistence, evaluate_recall, merged_state, oscillation_cycles, CueSlot, Cycle, Persistence,
    RecallMetrics, MAX_CYCLE_MS,
};
pub use patterns::{generate_orthogonal_patterns, overlap_matrix, OverlapMatrix};
pub use raster::{RasterData, RasterPanel, SlotMark};
pub use run::{run_experiment, run_plan, IdleReport, RecallReport, Report, RunError, SpikeCounts};
pub use spec::{
    bundled, bundled_names, load_workload, parse_workload, Expectation, ExperimentSpec, GenerateDecl, ModelConfig,
    OpDecl, PatternDecl, Plan, ResolvedOp, ResolvedRecall, SpecError,
};
