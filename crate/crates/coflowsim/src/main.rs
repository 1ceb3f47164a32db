//! Command-line front end: single runs, policy comparisons, parameter
//! sweeps, trace validation and workload synthesis.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use coflowsim::metrics;
use coflowsim::sim::{self, RunResult, SimError, Workload};
use coflowsim::synth::{self, SynthError};
use coflowsim::trace::{self, ParseError};
use coflowsim::types::{
    AvailabilityMode, ContentionScope, Micros, PolicyKind, QueueConfig, SimConfig, BYTES_PER_MB,
};

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Parser)]
#[command(name = "coflowsim", version, about = "Trace-driven coflow scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one policy on a trace and emit per-coflow CCTs.
    Run(RunArgs),
    /// Replay the same trace under several policies and emit CCT speedups of
    /// the first policy over each of the others.
    Compare(CompareArgs),
    /// Rerun a comparison while varying one parameter; one summary row per value.
    Sweep(SweepArgs),
    /// Check a trace (and optional sidecars) and report its shape statistics.
    Validate(ValidateArgs),
    /// Generate a synthetic trace.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Trace file in the mapper/reducer text format.
    #[arg(long)]
    trace: PathBuf,
    /// Optional DAG sidecar: "<child_id> <parent_id>" per line.
    #[arg(long)]
    dag: Option<PathBuf>,
    /// Optional dynamics sidecar: stragglers, restarts, coordinator restarts.
    #[arg(long)]
    dynamics: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SimArgs {
    /// Number of priority queues (K).
    #[arg(long = "K", value_name = "K", default_value_t = 10)]
    queues: usize,
    /// Exponential queue threshold growth factor (E).
    #[arg(long = "E", value_name = "E", default_value_t = 10)]
    growth: u64,
    /// First queue threshold (S) in MB.
    #[arg(long = "S", value_name = "MB", default_value_t = 10)]
    base_threshold_mb: u64,
    /// Scheduling interval in milliseconds.
    #[arg(long, default_value_t = 8.0)]
    delta_ms: f64,
    /// Starvation deadline factor (d).
    #[arg(long, default_value_t = 2.0)]
    deadline_factor: f64,
    /// Arrival time scale (A); arrivals are divided by A.
    #[arg(long, default_value_t = 1.0)]
    arrival_scale: f64,
    /// Per-port-side line rate in Gbps.
    #[arg(long, default_value_t = 1.0)]
    port_rate_gbps: f64,
    /// When flow data becomes sendable.
    #[arg(long, value_enum, default_value_t = AvailabilityArg::Arrival)]
    availability: AvailabilityArg,
    /// Which coflows count toward contention.
    #[arg(long, value_enum, default_value_t = ScopeArg::Global)]
    contention_scope: ScopeArg,
    /// RNG seed, echoed into every summary.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable length-estimate requeueing after dynamics events.
    #[arg(long)]
    no_requeue: bool,
    /// Abort a run after this many intervals.
    #[arg(long, default_value_t = 50_000_000)]
    max_intervals: u64,
    /// Write the per-interval grant log here (slower: disables batching).
    #[arg(long)]
    audit_log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AvailabilityArg {
    /// All bytes sendable when the coflow arrives.
    Arrival,
    /// Bytes become sendable at the producer rate.
    Pipelined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    Global,
    Queue,
}

impl SimArgs {
    fn to_config(&self) -> SimConfig {
        SimConfig {
            delta_us: (self.delta_ms * 1000.0).round() as Micros,
            queues: QueueConfig {
                count: self.queues,
                base_threshold: self.base_threshold_mb * BYTES_PER_MB,
                growth: self.growth,
            },
            deadline_factor: self.deadline_factor,
            arrival_scale: self.arrival_scale,
            port_rate: (self.port_rate_gbps * 125_000_000.0).round() as u64,
            rng_seed: self.seed,
            availability: match self.availability {
                AvailabilityArg::Arrival => AvailabilityMode::AllAtArrival,
                AvailabilityArg::Pipelined => AvailabilityMode::Pipelined,
            },
            producer_rate: None,
            contention_scope: match self.contention_scope {
                ScopeArg::Global => ContentionScope::Global,
                ScopeArg::Queue => ContentionScope::Queue,
            },
            requeue_on_dynamics: !self.no_requeue,
            max_intervals: self.max_intervals,
            audit: self.audit_log.is_some(),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Policy to simulate.
    #[arg(long)]
    policy: PolicyKind,
    #[command(flatten)]
    sim: SimArgs,
    /// Directory for output tables; stdout-only when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated policies; the first is the test policy, the rest are
    /// baselines (speedup = baseline CCT / test CCT).
    #[arg(long, value_delimiter = ',', required = true)]
    policies: Vec<PolicyKind>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    DeltaMs,
    ArrivalScale,
    DeadlineFactor,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    policies: Vec<PolicyKind>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Start from a preset shape and apply any overrides below.
    #[arg(long, value_enum, default_value_t = SynthPreset::FbLike)]
    preset: SynthPreset,
    #[arg(long)]
    coflows: Option<usize>,
    #[arg(long)]
    ports: Option<usize>,
    #[arg(long)]
    single_flow_fraction: Option<f64>,
    #[arg(long)]
    equal_flow_fraction: Option<f64>,
    #[arg(long)]
    max_mappers: Option<usize>,
    #[arg(long)]
    max_reducers: Option<usize>,
    #[arg(long)]
    small_fraction: Option<f64>,
    #[arg(long)]
    small_max_mb: Option<u64>,
    #[arg(long)]
    min_reducer_mb: Option<u64>,
    #[arg(long)]
    max_reducer_mb: Option<u64>,
    #[arg(long)]
    mean_interarrival_ms: Option<f64>,
    #[arg(long)]
    port_skew: Option<f64>,
    /// Generator seed; defaults to the preset's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output trace file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthPreset {
    /// 526 coflows over 150 ports with production-like shape statistics.
    FbLike,
    /// Small, highly contended workload for trend checks.
    Contended,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Write via a temp file + rename so readers never see partial output.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |source| CliError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

fn load_workload(input: &InputArgs) -> Result<Workload, CliError> {
    let text = read_file(&input.trace)?;
    let (header, parsed) = trace::parse_trace(&text)?;
    let coflows = trace::expand(&parsed);
    let mut workload = Workload::new(header.port_count, coflows);
    if let Some(dag_path) = &input.dag {
        let ids: HashSet<_> = workload.coflows.iter().map(|c| c.coflow_id).collect();
        workload.dag = trace::parse_dag(&read_file(dag_path)?, &ids)?;
    }
    if let Some(dyn_path) = &input.dynamics {
        let flow_ids: HashSet<_> = workload
            .coflows
            .iter()
            .flat_map(|c| c.flows.iter().map(|f| f.spec.flow_id))
            .collect();
        workload.dynamics = trace::parse_dynamics(&read_file(dyn_path)?, &flow_ids)?;
    }
    Ok(workload)
}

fn audit_table(run: &RunResult) -> String {
    let mut out = String::from("interval\tflow_id\tcoflow_id\tbytes\torigin\n");
    for e in run.audit.iter().flatten() {
        let origin = match e.origin {
            coflowsim::types::Origin::AllOrNone => "all-or-none",
            coflowsim::types::Origin::WorkConservation => "work-conservation",
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.interval, e.flow_id, e.coflow_id, e.bytes, origin
        ));
    }
    out
}

fn cct_summary(run: &RunResult) -> metrics::SpeedupSummary {
    let ccts: Vec<f64> = run.coflows.iter().map(|c| c.cct_us as f64).collect();
    metrics::summarize(&ccts)
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let workload = load_workload(&args.input)?;
    let config = args.sim.to_config();
    let result = sim::run(&workload, args.policy, &config)?;
    let summary = cct_summary(&result);
    println!(
        "policy={} seed={} coflows={} intervals={} mean_cct_ms={:.3} median_cct_ms={:.3} p90_cct_ms={:.3}",
        result.policy,
        result.rng_seed,
        result.coflows.len(),
        result.intervals,
        result.mean_cct_us() / 1000.0,
        summary.median / 1000.0,
        summary.p90 / 1000.0,
    );
    if let Some(dir) = &args.out {
        write_atomic(&dir.join(format!("cct_{}.tsv", result.policy)), &metrics::cct_table(&result))?;
        let doc = serde_json::json!({
            "policy": result.policy,
            "rng_seed": result.rng_seed,
            "coflow_count": result.coflows.len(),
            "intervals": result.intervals,
            "mean_cct_us": result.mean_cct_us(),
            "median_cct_us": summary.median,
            "p10_cct_us": summary.p10,
            "p90_cct_us": summary.p90,
        });
        write_atomic(
            &dir.join(format!("run_{}.json", result.policy)),
            &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()),
        )?;
    }
    if let Some(path) = &args.sim.audit_log {
        write_atomic(path, &audit_table(&result))?;
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    if args.policies.len() < 2 {
        return Err(CliError::Usage("--policies needs at least two entries".into()));
    }
    let workload = load_workload(&args.input)?;
    let config = args.sim.to_config();
    let runs = sim::run_comparison(&workload, &args.policies, &config)?;
    let (_, test) = &runs[0];
    for (baseline_kind, baseline) in &runs[1..] {
        let (records, summary) = metrics::speedups(baseline, test)?;
        let doc = metrics::comparison_summary(baseline, test)?;
        println!(
            "{} vs {}: median={:.3} p10={:.3} p90={:.3} (seed={}, {} coflows)",
            test.policy, baseline.policy, summary.median, summary.p10, summary.p90,
            test.rng_seed, records.len(),
        );
        for (i, m) in doc.bin_medians.iter().enumerate() {
            if let Some(m) = m {
                println!("  bin-{} ({}): median={:.3}", i + 1, metrics::BIN_LABELS[i], m);
            }
        }
        if let Some(dir) = &args.out {
            let stem = format!("{}_vs_{}", test.policy, baseline.policy);
            write_atomic(&dir.join(format!("speedup_{stem}.tsv")), &metrics::speedup_table(&records))?;
            write_atomic(
                &dir.join(format!("summary_{stem}.json")),
                &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()),
            )?;
        }
        let _ = baseline_kind;
    }
    if let Some(dir) = &args.out {
        for (_, run) in &runs {
            write_atomic(&dir.join(format!("cct_{}.tsv", run.policy)), &metrics::cct_table(run))?;
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    if args.policies.is_empty() {
        return Err(CliError::Usage("--policies needs at least one entry".into()));
    }
    if args.values.is_empty() {
        return Err(CliError::Usage("--values needs at least one entry".into()));
    }
    let workload = load_workload(&args.input)?;
    let base = args.sim.to_config();

    let points: Result<Vec<_>, SimError> = args
        .values
        .par_iter()
        .map(|&value| {
            let mut config = base.clone();
            match args.param {
                SweepParam::DeltaMs => config.delta_us = (value * 1000.0).round() as Micros,
                SweepParam::ArrivalScale => config.arrival_scale = value,
                SweepParam::DeadlineFactor => config.deadline_factor = value,
            }
            let runs = sim::run_comparison(&workload, &args.policies, &config)
                .or_else(|e| match e {
                    // A single policy is a degenerate comparison.
                    SimError::TooFewPolicies => {
                        sim::run(&workload, args.policies[0], &config).map(|r| vec![(args.policies[0], r)])
                    }
                    other => Err(other),
                })?;
            Ok((value, runs))
        })
        .collect();
    let points = points?;

    let param_name = match args.param {
        SweepParam::DeltaMs => "delta_ms",
        SweepParam::ArrivalScale => "arrival_scale",
        SweepParam::DeadlineFactor => "deadline_factor",
    };
    let mut table = format!("{param_name}\tpolicy\tmean_cct_us\tmedian_cct_us\tspeedup_median_vs_first\n");
    let mut json_rows = Vec::new();
    for (value, runs) in &points {
        let (_, test) = &runs[0];
        for (_, run) in runs {
            let summary = cct_summary(run);
            let speedup = if std::ptr::eq(run, test) {
                1.0
            } else {
                metrics::speedups(run, test)?.1.median
            };
            println!(
                "{param_name}={value} policy={} mean_cct_ms={:.3} median_cct_ms={:.3} speedup_median={:.3}",
                run.policy,
                run.mean_cct_us() / 1000.0,
                summary.median / 1000.0,
                speedup,
            );
            table.push_str(&format!(
                "{value}\t{}\t{:.3}\t{:.3}\t{:.6}\n",
                run.policy,
                run.mean_cct_us(),
                summary.median,
                speedup
            ));
            json_rows.push(serde_json::json!({
                param_name: value,
                "policy": run.policy,
                "rng_seed": run.rng_seed,
                "mean_cct_us": run.mean_cct_us(),
                "median_cct_us": summary.median,
                "speedup_median_vs_first": speedup,
            }));
        }
    }
    if let Some(dir) = &args.out {
        write_atomic(&dir.join(format!("sweep_{param_name}.tsv")), &table)?;
        write_atomic(
            &dir.join(format!("sweep_{param_name}.json")),
            &format!("{}\n", serde_json::to_string_pretty(&json_rows).unwrap()),
        )?;
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let workload = load_workload(&args.input)?;
    let stats = metrics::flow_length_stats(&workload.coflows);
    println!("{} coflows, {} ports", stats.coflow_count, workload.port_count);
    let pct = |n: usize| 100.0 * n as f64 / stats.coflow_count as f64;
    println!(
        "single-flow: {} ({:.1}%), equal multi-flow: {} ({:.1}%), unequal multi-flow: {} ({:.1}%)",
        stats.single_flow,
        pct(stats.single_flow),
        stats.equal_multi,
        pct(stats.equal_multi),
        stats.unequal_multi,
        pct(stats.unequal_multi),
    );
    let max_width = stats.width_distribution.last().map(|&(w, _)| w).unwrap_or(0);
    let total_flows: u64 = stats.width_distribution.iter().map(|&(w, n)| w * n as u64).sum();
    println!("flows: {total_flows}, max width: {max_width}");
    if !workload.dag.is_empty() {
        println!("dag: {} coflows with parents", workload.dag.len());
    }
    if !workload.dynamics.is_empty() {
        println!("dynamics: {} events", workload.dynamics.len());
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let mut spec = match args.preset {
        SynthPreset::FbLike => synth::fb_like(),
        SynthPreset::Contended => synth::contended(200, 0),
    };
    if let Some(seed) = args.seed {
        spec.rng_seed = seed;
    }
    if let Some(v) = args.coflows {
        spec.coflow_count = v;
    }
    if let Some(v) = args.ports {
        spec.port_count = v;
    }
    if let Some(v) = args.single_flow_fraction {
        spec.single_flow_fraction = v;
    }
    if let Some(v) = args.equal_flow_fraction {
        spec.equal_flow_fraction = v;
    }
    if let Some(v) = args.max_mappers {
        spec.max_mappers = v;
    }
    if let Some(v) = args.max_reducers {
        spec.max_reducers = v;
    }
    if let Some(v) = args.small_fraction {
        spec.small_fraction = v;
    }
    if let Some(v) = args.small_max_mb {
        spec.small_max_mb = v;
    }
    if let Some(v) = args.min_reducer_mb {
        spec.min_reducer_mb = v;
    }
    if let Some(v) = args.max_reducer_mb {
        spec.max_reducer_mb = v;
    }
    if let Some(v) = args.mean_interarrival_ms {
        spec.mean_interarrival_ms = v;
    }
    if let Some(v) = args.port_skew {
        spec.port_skew = v;
    }
    let trace = synth::synthesize(&spec)?;
    let text = trace::emit_trace(&trace);
    match &args.out {
        Some(path) => write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}
