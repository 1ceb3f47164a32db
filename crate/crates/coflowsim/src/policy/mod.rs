//! Scheduling policies. Each policy maps the cluster state at an interval
//! boundary to a rate assignment (`Schedule`) for the next interval.
//!
//! The state a policy sees is one interval stale by construction: the engine
//! computes the schedule for interval n from flow statistics as of the end of
//! interval n-1.

mod aalo;
mod offline;
mod saath;
mod uc_tcp;

pub use aalo::AaloScheduler;
pub use offline::{FixedOrderScheduler, OfflineKey, OfflineScheduler};
pub use saath::{remaining_length_estimate, requeue_on_dynamics, SaathScheduler, SaathVariant};
pub use uc_tcp::UcTcpScheduler;

use crate::types::{
    AvailabilityMode, Coflow, ContentionScope, FlowState, Micros, Origin, PolicyKind, QueueRange,
    Schedule, ScheduleEntry, SimConfig, MICROS_PER_SEC,
};

/// Scheduler-visible cluster state at one interval boundary.
pub struct ClusterState<'a> {
    pub now: Micros,
    pub interval: u64,
    pub config: &'a SimConfig,
    pub thresholds: &'a [QueueRange],
    pub coflows: &'a mut [Coflow],
    /// Indices into `coflows` of registered, unfinished coflows, ordered by
    /// (arrival, coflow id).
    pub active: Vec<usize>,
    pub port_count: usize,
    /// Remaining per-port byte budgets for the interval being scheduled.
    pub egress: Vec<u64>,
    pub ingress: Vec<u64>,
}

pub trait Scheduler: Send {
    fn kind(&self) -> PolicyKind;

    fn schedule(&mut self, state: &mut ClusterState) -> Schedule;

    /// How many consecutive intervals (counting the one just scheduled) the
    /// returned schedule provably repeats, assuming no flow finishes and no
    /// arrival/dynamics event occurs; the engine bounds those separately.
    /// `u64::MAX` means "until something the engine tracks changes".
    fn stable_intervals(&self, _state: &ClusterState, _schedule: &Schedule) -> u64 {
        1
    }
}

pub fn make_scheduler(kind: PolicyKind) -> Box<dyn Scheduler> {
    match kind {
        PolicyKind::Saath => Box::new(SaathScheduler::new(SaathVariant::Full)),
        PolicyKind::SaathAn => Box::new(SaathScheduler::new(SaathVariant::AllOrNone)),
        PolicyKind::SaathAnPf => Box::new(SaathScheduler::new(SaathVariant::AllOrNonePerFlow)),
        PolicyKind::Aalo => Box::new(AaloScheduler::default()),
        PolicyKind::Scf => Box::new(OfflineScheduler::new(OfflineKey::Scf)),
        PolicyKind::Srtf => Box::new(OfflineScheduler::new(OfflineKey::Srtf)),
        PolicyKind::Sebf => Box::new(OfflineScheduler::new(OfflineKey::Sebf)),
        PolicyKind::Lwtf => Box::new(OfflineScheduler::new(OfflineKey::Lwtf)),
        PolicyKind::Lcof => Box::new(OfflineScheduler::new(OfflineKey::Lcof)),
        PolicyKind::UcTcp => Box::new(UcTcpScheduler::default()),
    }
}

/// Per-flow threshold rule: smallest q with m_c * N_c <= Q^hi_q; the last
/// queue catches the rest. A coflow exactly at a threshold stays in the
/// higher-priority queue.
pub fn assign_queue(m_c: u64, width: u64, thresholds: &[QueueRange]) -> usize {
    let load = m_c as u128 * width as u128;
    for (q, range) in thresholds.iter().enumerate() {
        match range.hi {
            Some(hi) if load > hi => continue,
            _ => return q,
        }
    }
    thresholds.len() - 1
}

/// Total-bytes threshold lookup used by Aalo and the A/N ablation.
pub fn total_bytes_queue(total_sent: u64, thresholds: &[QueueRange]) -> usize {
    for (q, range) in thresholds.iter().enumerate() {
        match range.hi {
            Some(hi) if total_sent as u128 > hi => continue,
            _ => return q,
        }
    }
    thresholds.len() - 1
}

/// k_c per active coflow: the number of other active coflows with at least one
/// unfinished flow touching any of this coflow's ports (src and dst sets,
/// side-agnostic). Result is aligned with `active`.
pub fn compute_contention(
    coflows: &[Coflow],
    active: &[usize],
    scope: ContentionScope,
) -> Vec<u64> {
    let port_sets: Vec<Vec<usize>> = active.iter().map(|&i| coflows[i].port_set()).collect();
    let mut by_port: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for (pos, ports) in port_sets.iter().enumerate() {
        for &p in ports {
            by_port.entry(p).or_default().push(pos);
        }
    }
    let mut result = Vec::with_capacity(active.len());
    for (pos, ports) in port_sets.iter().enumerate() {
        let mut sharers: Vec<usize> = ports
            .iter()
            .flat_map(|p| by_port[p].iter().copied())
            .filter(|&other| other != pos)
            .collect();
        sharers.sort_unstable();
        sharers.dedup();
        let count = match scope {
            ContentionScope::Global => sharers.len(),
            ContentionScope::Queue => {
                let my_queue = coflows[active[pos]].queue;
                sharers
                    .iter()
                    .filter(|&&other| coflows[active[other]].queue == my_queue)
                    .count()
            }
        };
        result.push(count as u64);
    }
    result
}

/// Threshold gap of queue q in bytes; the infinite last queue extrapolates by
/// E from the previous gap (by E from S when there is a single queue).
fn queue_gap_bytes(queue: usize, thresholds: &[QueueRange], growth: u64, base: u64) -> u128 {
    match thresholds[queue].hi {
        Some(hi) => hi - thresholds[queue].lo,
        None => {
            if queue == 0 {
                base as u128 * growth as u128
            } else {
                let prev = &thresholds[queue - 1];
                (prev.hi.unwrap() - prev.lo) * growth as u128
            }
        }
    }
}

/// Starvation deadline on queue entry: now + d * C_q * t_q, where t_q is the
/// minimum residence time of this coflow in queue q at line rate
/// ((Q^hi_q - Q^lo_q) / (N_c * R)) and C_q counts the other coflows already
/// in the queue. C_q = 0 yields an immediately expired deadline.
pub fn set_deadline(
    now: Micros,
    queue: usize,
    others_in_queue: u64,
    width: u64,
    config: &SimConfig,
    thresholds: &[QueueRange],
) -> Micros {
    let gap = queue_gap_bytes(queue, thresholds, config.queues.growth, config.queues.base_threshold);
    let t_q_us = gap * MICROS_PER_SEC as u128 / (width as u128 * config.port_rate as u128);
    let wait = config.deadline_factor * others_in_queue as f64 * t_q_us as f64;
    now + wait.round() as Micros
}

/// One interval worth of data at line rate; a flow with less unread data than
/// this (and more left to send) is not schedulable in pipelined mode.
pub fn flow_schedulable(flow: &FlowState, config: &SimConfig) -> bool {
    if flow.finished() {
        return false;
    }
    match config.availability {
        AvailabilityMode::AllAtArrival => true,
        AvailabilityMode::Pipelined => {
            let unread = flow.available_bytes - flow.bytes_sent;
            unread >= flow.remaining().min(config.interval_budget())
        }
    }
}

/// Shared all-or-none grant plus work-conservation fill, scanning coflows in
/// the given consideration order.
///
/// A coflow is granted if every unfinished flow is schedulable, every port
/// side it touches has budget left, and the resulting equal rate is nonzero;
/// the equal per-flow budget is min over port sides of remaining / multiplicity.
/// Work conservation then re-walks the un-granted coflows and grants
/// individual flows at min(remaining egress, remaining ingress).
pub fn allocate_all_or_none(
    order: &[usize],
    coflows: &[Coflow],
    egress: &mut [u64],
    ingress: &mut [u64],
    config: &SimConfig,
    interval: u64,
) -> Schedule {
    let mut schedule = Schedule { interval, entries: Vec::new() };
    let mut granted = vec![false; order.len()];

    let mut mult_e: std::collections::HashMap<usize, u64> = std::collections::HashMap::new();
    let mut mult_i: std::collections::HashMap<usize, u64> = std::collections::HashMap::new();

    for (pos, &ci) in order.iter().enumerate() {
        let coflow = &coflows[ci];
        let unfinished: Vec<&FlowState> = coflow.unfinished_flows().collect();
        if unfinished.is_empty() || unfinished.iter().any(|f| !flow_schedulable(f, config)) {
            continue;
        }
        mult_e.clear();
        mult_i.clear();
        for f in &unfinished {
            *mult_e.entry(f.spec.src_port).or_insert(0) += 1;
            *mult_i.entry(f.spec.dst_port).or_insert(0) += 1;
        }
        let mut rate = u64::MAX;
        for (&p, &m) in &mult_e {
            rate = rate.min(egress[p] / m);
        }
        for (&p, &m) in &mult_i {
            rate = rate.min(ingress[p] / m);
        }
        if rate == 0 {
            continue;
        }
        for f in &unfinished {
            schedule.entries.push(ScheduleEntry {
                flow_id: f.spec.flow_id,
                coflow_id: coflow.coflow_id,
                bytes: rate,
                origin: Origin::AllOrNone,
            });
            egress[f.spec.src_port] -= rate;
            ingress[f.spec.dst_port] -= rate;
        }
        granted[pos] = true;
    }

    // Work conservation over the same ordered list.
    for (pos, &ci) in order.iter().enumerate() {
        if granted[pos] {
            continue;
        }
        let coflow = &coflows[ci];
        for f in coflow.flows.iter().filter(|f| flow_schedulable(f, config)) {
            let budget = egress[f.spec.src_port].min(ingress[f.spec.dst_port]);
            if budget > 0 {
                schedule.entries.push(ScheduleEntry {
                    flow_id: f.spec.flow_id,
                    coflow_id: coflow.coflow_id,
                    bytes: budget,
                    origin: Origin::WorkConservation,
                });
                egress[f.spec.src_port] -= budget;
                ingress[f.spec.dst_port] -= budget;
            }
        }
    }

    schedule
}
