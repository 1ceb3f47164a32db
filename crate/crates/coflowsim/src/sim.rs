//! Discrete-interval simulation of the coordinator/agent pipeline.
//!
//! Time advances in intervals of delta. At each interval boundary the policy
//! computes a schedule from state as of the end of the previous interval (one
//! interval staleness), which is then applied for the interval: each flow
//! sends min(rate * delta, remaining, available - sent) and a flow finishing
//! mid-interval idles its residual capacity until the next schedule. Arrivals
//! bind at the next interval boundary strictly after the arrival time; the
//! sub-interval arrival time still anchors CCT accounting.
//!
//! As an optimization the engine batches intervals during which the schedule
//! provably repeats (no finish, no arrival or dynamics boundary, no queue
//! threshold crossing or deadline expiry as reported by the policy). The
//! batched run is byte-identical to the interval-by-interval one.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{self, make_scheduler, set_deadline, ClusterState, Scheduler};
use crate::trace::{DynamicsEvent, DynamicsKind};
use crate::types::{
    bytes_per_interval, AvailabilityMode, Coflow, CoflowId, ConfigError, FlowId, Micros, Origin,
    PolicyKind, QueueRange, SimConfig, MICROS_PER_SEC,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("dynamics event references unknown flow {0}")]
    UnknownFlow(FlowId),
    #[error("flow {0} restarted after it already finished")]
    FlowAlreadyFinished(FlowId),
    #[error("run did not terminate within {0} intervals")]
    MaxIntervalsExceeded(u64),
    #[error("need at least two policies to compare")]
    TooFewPolicies,
}

/// Everything one simulation replays: the expanded trace plus sidecar inputs.
#[derive(Debug, Clone, Default)]
pub struct Workload {
    pub port_count: usize,
    pub coflows: Vec<Coflow>,
    /// child coflow id -> parent coflow ids; children register only after all
    /// parents complete.
    pub dag: HashMap<CoflowId, Vec<CoflowId>>,
    pub dynamics: Vec<DynamicsEvent>,
}

impl Workload {
    pub fn new(port_count: usize, coflows: Vec<Coflow>) -> Self {
        Workload { port_count, coflows, dag: HashMap::new(), dynamics: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoflowRecord {
    pub coflow_id: CoflowId,
    pub arrival: Micros,
    pub width: u64,
    pub total_size: u64,
    pub registered_at: Micros,
    pub completion_time: Micros,
    /// completion_time - arrival.
    pub cct_us: u64,
    /// Per flow: (flow id, size, finish_time - coflow arrival).
    pub flows: Vec<(FlowId, u64, Micros)>,
    pub queue_transition_count: u64,
    /// (time, queue entered), including the initial entry into queue 0.
    pub queue_transitions: Vec<(Micros, usize)>,
    pub deadline_expiries: u64,
}

/// Run-length encoded port utilization: `intervals` consecutive intervals
/// starting at `start_interval` carried `bytes` in total.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UtilSpan {
    pub start_interval: u64,
    pub intervals: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub interval: u64,
    pub flow_id: FlowId,
    pub coflow_id: CoflowId,
    pub bytes: u64,
    pub origin: Origin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: String,
    pub rng_seed: u64,
    pub coflows: Vec<CoflowRecord>,
    pub intervals: u64,
    pub utilization: Vec<UtilSpan>,
    /// One line per (interval, flow) grant; only collected when
    /// `SimConfig::audit` is set (which disables interval batching).
    pub audit: Option<Vec<AuditEntry>>,
}

impl RunResult {
    pub fn mean_cct_us(&self) -> f64 {
        if self.coflows.is_empty() {
            return 0.0;
        }
        self.coflows.iter().map(|c| c.cct_us as f64).sum::<f64>() / self.coflows.len() as f64
    }
}

pub fn run(workload: &Workload, policy: PolicyKind, config: &SimConfig) -> Result<RunResult, SimError> {
    let mut scheduler = make_scheduler(policy);
    run_with_scheduler(workload, scheduler.as_mut(), config)
}

/// Replay the same workload under each policy; per-coflow records stay
/// aligned for speedup computation.
pub fn run_comparison(
    workload: &Workload,
    policies: &[PolicyKind],
    config: &SimConfig,
) -> Result<Vec<(PolicyKind, RunResult)>, SimError> {
    if policies.len() < 2 {
        return Err(SimError::TooFewPolicies);
    }
    policies
        .par_iter()
        .map(|&p| run(workload, p, config).map(|r| (p, r)))
        .collect()
}

/// Next interval boundary strictly after `t`.
fn bind_boundary(t: Micros, delta: Micros) -> Micros {
    (t / delta) * delta + delta
}

/// First boundary at or after `t` (dynamics take effect here).
fn effect_boundary(t: Micros, delta: Micros) -> Micros {
    t.div_ceil(delta) * delta
}

pub fn run_with_scheduler(
    workload: &Workload,
    scheduler: &mut dyn Scheduler,
    config: &SimConfig,
) -> Result<RunResult, SimError> {
    config.validate()?;
    let thresholds = config.queues.derive_thresholds()?;
    let delta = config.delta_us;
    let budget = config.interval_budget();
    let port_count = workload.port_count;
    let producer_rate = config.producer_rate.unwrap_or(config.port_rate);

    let mut coflows = workload.coflows.clone();
    crate::trace::scale_arrivals(&mut coflows, config.arrival_scale)?;

    let mut flow_map: HashMap<FlowId, (usize, usize)> = HashMap::new();
    for (ci, c) in coflows.iter().enumerate() {
        for (fi, f) in c.flows.iter().enumerate() {
            flow_map.insert(f.spec.flow_id, (ci, fi));
        }
    }
    if config.availability == AvailabilityMode::AllAtArrival {
        for c in &mut coflows {
            for f in &mut c.flows {
                f.available_bytes = f.spec.size_bytes;
            }
        }
    }

    let id_index: HashMap<CoflowId, usize> =
        coflows.iter().enumerate().map(|(i, c)| (c.coflow_id, i)).collect();
    let mut children: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut pending_parents = vec![0usize; coflows.len()];
    for (child_id, parents) in &workload.dag {
        let child = id_index[child_id];
        pending_parents[child] = parents.len();
        for pid in parents {
            children.entry(id_index[pid]).or_default().push(child);
        }
    }

    // (bind boundary, coflow id) min-heap of coflows ready to register.
    let mut bind_heap: BinaryHeap<Reverse<(Micros, CoflowId, usize)>> = coflows
        .iter()
        .enumerate()
        .filter(|(i, _)| pending_parents[*i] == 0)
        .map(|(i, c)| Reverse((bind_boundary(c.arrival, delta), c.coflow_id, i)))
        .collect();

    let mut dynamics = workload.dynamics.clone();
    dynamics.sort_by_key(|e| e.time);
    let mut dyn_idx = 0;

    let mut active: Vec<usize> = Vec::new();
    let mut now: Micros = 0;
    let mut interval: u64 = 0;
    let mut utilization: Vec<UtilSpan> = Vec::new();
    let mut audit: Option<Vec<AuditEntry>> = config.audit.then(Vec::new);

    loop {
        // Register arrivals and released DAG stages bound to this boundary.
        let mut registered_any = false;
        while let Some(&Reverse((bind_at, _, ci))) = bind_heap.peek() {
            if bind_at > now {
                break;
            }
            bind_heap.pop();
            let c = &mut coflows[ci];
            c.registered_at = Some(now);
            c.queue = 0;
            c.queue_entry_time = now;
            c.queue_transitions.push((now, 0));
            active.push(ci);
            registered_any = true;
        }
        if registered_any {
            active.sort_by_key(|&ci| (coflows[ci].arrival, coflows[ci].coflow_id));
        }

        // Dynamics whose time has been reached.
        while dyn_idx < dynamics.len() && dynamics[dyn_idx].time <= now {
            let event = dynamics[dyn_idx];
            dyn_idx += 1;
            inject(&event, &mut coflows, &flow_map, &active, now, config, &thresholds)?;
        }

        if active.is_empty() && bind_heap.is_empty() && dyn_idx == dynamics.len() {
            break;
        }

        if config.availability == AvailabilityMode::Pipelined {
            for &ci in &active {
                let arrival = coflows[ci].arrival;
                let produced = (producer_rate as u128 * (now - arrival) as u128
                    / MICROS_PER_SEC as u128) as u64;
                for f in &mut coflows[ci].flows {
                    f.available_bytes = produced.min(f.spec.size_bytes).max(f.bytes_sent);
                }
            }
        }

        let (schedule, stable) = {
            let mut state = ClusterState {
                now,
                interval,
                config,
                thresholds: &thresholds,
                coflows: &mut coflows,
                active: active.clone(),
                port_count,
                egress: vec![budget; port_count],
                ingress: vec![budget; port_count],
            };
            let schedule = scheduler.schedule(&mut state);
            let stable = scheduler.stable_intervals(&state, &schedule);
            (schedule, stable)
        };
        debug_assert!(schedule_respects_capacity(&schedule, &flow_map, &coflows, port_count, budget));

        // How many intervals this schedule can be replayed unchanged.
        let mut safe = stable;
        if config.availability == AvailabilityMode::Pipelined || audit.is_some() {
            safe = 1;
        }
        for e in &schedule.entries {
            let (ci, fi) = flow_map[&e.flow_id];
            let f = &coflows[ci].flows[fi];
            let step = effective_step(e.bytes, f.rate_cap, delta);
            if step > 0 {
                safe = safe.min(f.remaining().div_ceil(step));
            }
        }
        let mut next_boundary: Option<Micros> = bind_heap.peek().map(|&Reverse((b, _, _))| b);
        if dyn_idx < dynamics.len() {
            let b = effect_boundary(dynamics[dyn_idx].time, delta);
            next_boundary = Some(next_boundary.map_or(b, |nb| nb.min(b)));
        }
        if let Some(b) = next_boundary {
            debug_assert!(b > now);
            safe = safe.min((b - now) / delta);
        }
        let safe = safe.clamp(1, config.max_intervals.saturating_sub(interval).max(1));

        // Apply the schedule for `safe` intervals.
        let mut span_bytes: u64 = 0;
        for e in &schedule.entries {
            let (ci, fi) = flow_map[&e.flow_id];
            let f = &mut coflows[ci].flows[fi];
            debug_assert!(!f.finished());
            let step = effective_step(e.bytes, f.rate_cap, delta);
            if step == 0 {
                continue;
            }
            let remaining = f.remaining();
            let unread = f.available_bytes - f.bytes_sent;
            let send = (step as u128 * safe as u128).min(remaining as u128).min(unread as u128) as u64;
            f.bytes_sent += send;
            span_bytes += send;
            if f.bytes_sent == f.spec.size_bytes {
                let full = (remaining / step) * step;
                let (done_intervals, last) = if full == remaining {
                    (remaining / step - 1, step)
                } else {
                    (remaining / step, remaining - full)
                };
                let tail = (last as u128 * delta as u128).div_ceil(step as u128) as Micros;
                f.finish_time = Some(now + done_intervals * delta + tail);
            }
            if let Some(log) = audit.as_mut() {
                log.push(AuditEntry {
                    interval,
                    flow_id: e.flow_id,
                    coflow_id: e.coflow_id,
                    bytes: e.bytes,
                    origin: e.origin,
                });
            }
        }
        utilization.push(UtilSpan { start_interval: interval, intervals: safe, bytes: span_bytes });

        now += safe * delta;
        interval += safe;

        // Deregister completed coflows and release their DAG children.
        let mut idx = 0;
        while idx < active.len() {
            let ci = active[idx];
            if coflows[ci].finished() {
                let completion = coflows[ci]
                    .flows
                    .iter()
                    .map(|f| f.finish_time.unwrap())
                    .max()
                    .unwrap();
                coflows[ci].completion_time = Some(completion);
                active.remove(idx);
                if let Some(kids) = children.get(&ci) {
                    for &child in kids {
                        pending_parents[child] -= 1;
                        if pending_parents[child] == 0 {
                            let c = &coflows[child];
                            let bind_at =
                                bind_boundary(c.arrival, delta).max(bind_boundary(completion, delta));
                            bind_heap.push(Reverse((bind_at, c.coflow_id, child)));
                        }
                    }
                }
            } else {
                idx += 1;
            }
        }

        if interval >= config.max_intervals {
            return Err(SimError::MaxIntervalsExceeded(config.max_intervals));
        }
    }

    let mut records: Vec<CoflowRecord> = coflows
        .iter()
        .filter(|c| c.registered_at.is_some())
        .map(|c| {
            let completion = c.completion_time.expect("registered coflow must complete");
            CoflowRecord {
                coflow_id: c.coflow_id,
                arrival: c.arrival,
                width: c.width(),
                total_size: c.total_size(),
                registered_at: c.registered_at.unwrap(),
                completion_time: completion,
                cct_us: completion - c.arrival,
                flows: c
                    .flows
                    .iter()
                    .map(|f| (f.spec.flow_id, f.spec.size_bytes, f.finish_time.unwrap() - c.arrival))
                    .collect(),
                queue_transition_count: c.queue_transitions.len().saturating_sub(1) as u64,
                queue_transitions: c.queue_transitions.clone(),
                deadline_expiries: c.deadline_expiries,
            }
        })
        .collect();
    records.sort_by_key(|r| r.coflow_id);

    Ok(RunResult {
        policy: scheduler.kind().name().to_string(),
        rng_seed: config.rng_seed,
        coflows: records,
        intervals: interval,
        utilization,
        audit,
    })
}

fn effective_step(granted: u64, rate_cap: Option<u64>, delta: Micros) -> u64 {
    match rate_cap {
        Some(cap) => granted.min(bytes_per_interval(cap, delta)),
        None => granted,
    }
}

/// Apply one dynamics event to the cluster state.
pub fn inject(
    event: &DynamicsEvent,
    coflows: &mut [Coflow],
    flow_map: &HashMap<FlowId, (usize, usize)>,
    active: &[usize],
    now: Micros,
    config: &SimConfig,
    thresholds: &[QueueRange],
) -> Result<(), SimError> {
    match event.kind {
        DynamicsKind::Straggler { flow_id, rate_cap } => {
            let &(ci, fi) = flow_map.get(&flow_id).ok_or(SimError::UnknownFlow(flow_id))?;
            coflows[ci].flows[fi].rate_cap = Some(rate_cap);
            mark_for_requeue(&mut coflows[ci], config);
        }
        DynamicsKind::FlowRestart { flow_id } => {
            let &(ci, fi) = flow_map.get(&flow_id).ok_or(SimError::UnknownFlow(flow_id))?;
            if coflows[ci].flows[fi].finished() {
                return Err(SimError::FlowAlreadyFinished(flow_id));
            }
            coflows[ci].flows[fi].bytes_sent = 0;
            mark_for_requeue(&mut coflows[ci], config);
        }
        DynamicsKind::CoordinatorRestart => {
            let mut in_queue: HashMap<usize, u64> = HashMap::new();
            for &ci in active {
                *in_queue.entry(coflows[ci].queue).or_insert(0) += 1;
            }
            for &ci in active {
                let (queue, width) = (coflows[ci].queue, coflows[ci].width());
                let deadline =
                    set_deadline(now, queue, in_queue[&queue] - 1, width, config, thresholds);
                coflows[ci].deadline = Some(deadline);
                coflows[ci].expired = false;
            }
        }
    }
    Ok(())
}

fn mark_for_requeue(coflow: &mut Coflow, config: &SimConfig) {
    if config.requeue_on_dynamics
        && coflow.flows.iter().any(|f| f.finished())
        && coflow.flows.iter().any(|f| !f.finished())
    {
        coflow.length_estimate_mode = true;
    }
}

fn schedule_respects_capacity(
    schedule: &crate::types::Schedule,
    flow_map: &HashMap<FlowId, (usize, usize)>,
    coflows: &[Coflow],
    port_count: usize,
    budget: u64,
) -> bool {
    let mut egress = vec![0u128; port_count];
    let mut ingress = vec![0u128; port_count];
    for e in &schedule.entries {
        let (ci, fi) = flow_map[&e.flow_id];
        let spec = &coflows[ci].flows[fi].spec;
        egress[spec.src_port] += e.bytes as u128;
        ingress[spec.dst_port] += e.bytes as u128;
    }
    egress.iter().chain(ingress.iter()).all(|&b| b <= budget as u128)
}

/// Convenience: contention records for the current active set, exposed for
/// analysis and tests.
pub fn contention_snapshot(workload: &Workload, config: &SimConfig) -> Vec<(CoflowId, u64)> {
    let active: Vec<usize> = (0..workload.coflows.len()).collect();
    let k = policy::compute_contention(&workload.coflows, &active, config.contention_scope);
    workload
        .coflows
        .iter()
        .zip(k)
        .map(|(c, k)| (c.coflow_id, k))
        .collect()
}
