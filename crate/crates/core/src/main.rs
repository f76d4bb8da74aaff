use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ca3mem::harness::{self, ExperimentSpec, Plan, Report, SpecError};
use ca3mem::memory::{
    calibrate_inhibition, count_resources, CalibrationError, ModelKind, OscillatoryConfig, OscillatoryMemory, Pattern,
    RegulatedConfig, RegulatedMemory,
};

const OK: u8 = 0;
const MISMATCH: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "ca3mem", version, about = "Spiking CA3 associative memory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiment specs (bundled names or TOML paths) and write their outputs.
    Run {
        specs: Vec<String>,
        /// Run every bundled spec.
        #[arg(long)]
        all: bool,
        #[arg(long, env = "CA3MEM_OUT_DIR", default_value = "ca3mem-out")]
        out: PathBuf,
        /// Overrides the seed used for generated workloads.
        #[arg(long)]
        seed: Option<u64>,
        /// Model parameter override, e.g. `--set w_pc_pc_inh=0.75` or `--set stdp.a_plus=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Skip the SVG raster.
        #[arg(long)]
        no_svg: bool,
    },
    /// Search the regulated model's recurrent inhibition weight for perfect recall.
    Calibrate {
        #[arg(long, default_value_t = 15)]
        n: usize,
        /// Bundled workload (`orthogonal`, `nonorthogonal`) or a TOML path.
        #[arg(long, default_value = "orthogonal")]
        workload: String,
        /// Inclusive search range `LO,HI` in nA.
        #[arg(long, default_value = "0,3")]
        bounds: String,
        #[arg(long, default_value_t = 0.25)]
        step: f64,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long, env = "CA3MEM_OUT_DIR", default_value = "ca3mem-out")]
        out: PathBuf,
    },
    /// Neuron, synapse and latency counts for a model of size n.
    Resources {
        kind: ModelKind,
        n: usize,
        #[arg(long)]
        csv: bool,
    },
    /// Write default configs, learned weights or spike trains.
    Export {
        what: ExportKind,
        /// Model kind for `config`; spec name or path otherwise.
        target: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportKind {
    /// Default model parameters as TOML.
    Config,
    /// Recurrent weights right after learning, as CSV.
    Weights,
    /// Spike record of a full run, as CSV.
    Spikes,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { specs, all, out, seed, sets, no_svg } => cmd_run(specs, all, &out, seed, &sets, no_svg),
        Command::Calibrate { n, workload, bounds, step, sets, out } => {
            cmd_calibrate(n, &workload, &bounds, step, &sets, &out)
        }
        Command::Resources { kind, n, csv } => cmd_resources(kind, n, csv),
        Command::Export { what, target, out, seed } => cmd_export(what, &target, out.as_deref(), seed),
    };
    ExitCode::from(code)
}

/// Parse `a.b=value` into nested tables; values are TOML literals, bare words
/// fall back to strings.
fn apply_sets(mut table: toml::Table, sets: &[String]) -> Result<toml::Table, String> {
    for s in sets {
        let (key, raw) = s.split_once('=').ok_or_else(|| format!("--set {}: expected KEY=VALUE", s))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
        let parts: Vec<&str> = key.trim().split('.').collect();
        let mut cur = &mut table;
        for p in &parts[..parts.len() - 1] {
            let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry.as_table_mut().ok_or_else(|| format!("--set {}: {} is not a table", s, p))?;
        }
        cur.insert(parts[parts.len() - 1].to_string(), value);
    }
    Ok(table)
}

fn load_plan(name: &str, seed: Option<u64>, sets: &[String]) -> Result<Plan, SpecError> {
    let mut spec = ExperimentSpec::load(name)?;
    if !sets.is_empty() {
        let merged = apply_sets(spec.config.take().unwrap_or_default(), sets).map_err(SpecError::Invalid)?;
        spec.config = Some(merged);
    }
    spec.resolve(seed)
}

fn cmd_run(specs: Vec<String>, all: bool, out: &Path, seed: Option<u64>, sets: &[String], no_svg: bool) -> u8 {
    let mut names = specs;
    if all {
        names.extend(harness::bundled_names().into_iter().map(String::from));
    }
    if names.is_empty() {
        eprintln!("error: give at least one spec or --all");
        return USAGE;
    }
    // every spec is validated before anything runs or is written
    let mut plans = Vec::new();
    for name in &names {
        match load_plan(name, seed, sets) {
            Ok(p) => plans.push(p),
            Err(e) => {
                eprintln!("error: {}: {}", name, e);
                return USAGE;
            }
        }
    }
    let results: Vec<Result<Report, harness::RunError>> = std::thread::scope(|s| {
        let handles: Vec<_> = plans.iter().map(|p| s.spawn(move || harness::run_plan(p))).collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread")).collect()
    });
    let mut reports = Vec::new();
    for (name, r) in names.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => {
                eprintln!("error: {}: {}", name, e);
                return USAGE;
            }
        }
    }
    let mut code = OK;
    for rep in &reports {
        print!("{}", rep.summary());
        match rep.write_to(out, !no_svg) {
            Ok(files) => {
                for f in files {
                    println!("  wrote {}", f.display());
                }
            }
            Err(e) => {
                eprintln!("error: writing {}: {}", out.display(), e);
                return USAGE;
            }
        }
        if !rep.passed {
            code = MISMATCH;
        }
    }
    code
}

fn parse_bounds(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(',')?;
    let lo: f64 = a.trim().parse().ok()?;
    let hi: f64 = b.trim().parse().ok()?;
    (lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi).then_some((lo, hi))
}

fn cmd_calibrate(n: usize, workload: &str, bounds: &str, step: f64, sets: &[String], out: &Path) -> u8 {
    let Some(bounds) = parse_bounds(bounds) else {
        eprintln!("error: bounds must be LO,HI with 0 <= LO <= HI, got '{}'", bounds);
        return USAGE;
    };
    let base = match apply_sets(toml::Table::new(), sets).and_then(|mut t| {
        t.insert("n".into(), toml::Value::Integer(n as i64));
        toml::Value::Table(t).try_into::<RegulatedConfig>().map_err(|e| e.to_string())
    }) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e);
            return USAGE;
        }
    };
    let work = match harness::load_workload(workload, n) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {}", e);
            return USAGE;
        }
    };
    let print_rows = |rows: &[ca3mem::memory::CalibrationRow]| {
        println!("weight_nA,exact,total");
        for r in rows {
            println!("{},{},{}", r.weight, r.exact, r.total);
        }
    };
    match calibrate_inhibition(&base, &work, bounds, step) {
        Ok((w, rows)) => {
            print_rows(&rows);
            println!("calibrated w_pc_pc_inh = {}", w);
            let path = out.join("calibrated_inhibition.toml");
            let write = std::fs::create_dir_all(out).and_then(|_| {
                std::fs::write(&path, format!("# regulated model [config] fragment\nw_pc_pc_inh = {:?}\n", w))
            });
            if let Err(e) = write {
                eprintln!("error: writing {}: {}", path.display(), e);
                return USAGE;
            }
            println!("wrote {}", path.display());
            OK
        }
        Err(CalibrationError::NotFound { rows }) => {
            print_rows(&rows);
            eprintln!("calibration failed: no weight in [{}, {}] recalls every probe exactly", bounds.0, bounds.1);
            MISMATCH
        }
        Err(e) => {
            eprintln!("error: {}", e);
            USAGE
        }
    }
}

fn cmd_resources(kind: ModelKind, n: usize, csv: bool) -> u8 {
    if n < 2 {
        eprintln!("error: n must be at least 2");
        return USAGE;
    }
    let r = count_resources(kind, n);
    if csv {
        println!("model,n,neurons,static_synapses,stdp_synapses,learning_latency_ms,recall_latency_ms,recurrent_inhibitory_synapses,static_synapses_full");
        println!(
            "{},{},{},{},{},{},{},{},{}",
            kind,
            n,
            r.neurons,
            r.static_synapses,
            r.stdp_synapses,
            r.learning_latency_ms,
            r.recall_latency_ms,
            r.recurrent_inhibitory_synapses,
            r.static_synapses_full
        );
    } else {
        println!("{} model, n = {}", kind, n);
        println!("  neurons                        {}", r.neurons);
        println!("  static synapses (table)        {}", r.static_synapses);
        println!("  static synapses (built)        {}", r.static_synapses_full);
        println!("  recurrent inhibitory synapses  {}", r.recurrent_inhibitory_synapses);
        println!("  STDP synapses                  {}", r.stdp_synapses);
        println!("  learning latency               {} ms", r.learning_latency_ms);
        println!("  recall latency                 {} ms", r.recall_latency_ms);
    }
    OK
}

fn learned_weights(plan: &Plan) -> Result<ca3mem::WeightSnapshot, String> {
    let pats: Vec<Pattern> = plan.learn.iter().map(|n| plan.pattern(n).expect("resolved").clone()).collect();
    match &plan.config {
        harness::ModelConfig::Oscillatory(c) => {
            let mut m = OscillatoryMemory::new(c.clone()).map_err(|e| e.to_string())?;
            m.learn(&pats).map_err(|e| e.to_string())
        }
        harness::ModelConfig::Regulated(c) => {
            let mut m = RegulatedMemory::new(c.clone()).map_err(|e| e.to_string())?;
            m.learn(&pats).map_err(|e| e.to_string())
        }
    }
}

fn cmd_export(what: ExportKind, target: &str, out: Option<&Path>, seed: Option<u64>) -> u8 {
    let bytes: Vec<u8> = match what {
        ExportKind::Config => {
            let kind: ModelKind = match target.parse() {
                Ok(k) => k,
                Err(e) => {
                    eprintln!("error: {}", e);
                    return USAGE;
                }
            };
            let text = match kind {
                ModelKind::Oscillatory => toml::to_string(&OscillatoryConfig::default()),
                ModelKind::Regulated => toml::to_string(&RegulatedConfig::default()),
            };
            text.expect("config serializes").into_bytes()
        }
        ExportKind::Weights | ExportKind::Spikes => {
            let plan = match load_plan(target, seed, &[]) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {}: {}", target, e);
                    return USAGE;
                }
            };
            let mut buf = Vec::new();
            let res = if matches!(what, ExportKind::Weights) {
                learned_weights(&plan).and_then(|w| w.write_csv(&mut buf).map_err(|e| e.to_string()))
            } else {
                harness::run_plan(&plan)
                    .map_err(|e| e.to_string())
                    .and_then(|r| r.record.write_csv(&mut buf).map_err(|e| e.to_string()))
            };
            if let Err(e) = res {
                eprintln!("error: {}", e);
                return USAGE;
            }
            buf
        }
    };
    let res = match out {
        Some(p) => std::fs::write(p, &bytes),
        None => std::io::Write::write_all(&mut std::io::stdout(), &bytes),
    };
    if let Err(e) = res {
        eprintln!("error: {}", e);
        return USAGE;
    }
    OK
}
