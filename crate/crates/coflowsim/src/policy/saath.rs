//! The contention-aware online scheduler: all-or-none grants, per-flow queue
//! thresholds, least-contention-first ordering within queues, FIFO-derived
//! starvation deadlines and work conservation. The two ablation variants keep
//! all-or-none but fall back to FIFO ordering and (for the first) total-bytes
//! queue thresholds.

use std::collections::HashMap;

use crate::policy::{
    allocate_all_or_none, assign_queue, compute_contention, set_deadline, total_bytes_queue,
    ClusterState, Scheduler,
};
use crate::types::{Coflow, CoflowId, FlowId, PolicyKind, QueueRange, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaathVariant {
    /// All-or-none + per-flow thresholds + LCoF + deadlines.
    Full,
    /// All-or-none + FIFO, total-bytes thresholds.
    AllOrNone,
    /// All-or-none + FIFO, per-flow thresholds.
    AllOrNonePerFlow,
}

pub struct SaathScheduler {
    variant: SaathVariant,
    /// Consideration order of the most recent schedule, for inspection.
    last_order: Vec<CoflowId>,
}

impl SaathScheduler {
    pub fn new(variant: SaathVariant) -> Self {
        SaathScheduler { variant, last_order: Vec::new() }
    }

    pub fn last_order(&self) -> &[CoflowId] {
        &self.last_order
    }

    fn per_flow_thresholds(&self) -> bool {
        matches!(self.variant, SaathVariant::Full | SaathVariant::AllOrNonePerFlow)
    }
}

/// Remaining-length estimate after dynamics: the median size of the finished
/// flows stands in for the unknown full length of each unfinished flow, and
/// the coflow's remaining length is the largest estimated per-flow remainder.
/// None when no flow has finished yet.
pub fn remaining_length_estimate(coflow: &Coflow) -> Option<u64> {
    let mut finished: Vec<u64> = coflow
        .flows
        .iter()
        .filter(|f| f.finished())
        .map(|f| f.spec.size_bytes)
        .collect();
    if finished.is_empty() {
        return None;
    }
    finished.sort_unstable();
    let n = finished.len();
    let median = if n % 2 == 1 {
        finished[n / 2]
    } else {
        (finished[n / 2 - 1] + finished[n / 2]) / 2
    };
    Some(
        coflow
            .unfinished_flows()
            .map(|f| median.saturating_sub(f.bytes_sent))
            .max()
            .unwrap_or(0),
    )
}

/// Queue the coflow would be re-assigned to from the dynamics estimate.
/// None (no-op) when no flow has finished.
pub fn requeue_on_dynamics(coflow: &Coflow, thresholds: &[QueueRange]) -> Option<usize> {
    remaining_length_estimate(coflow).map(|m| assign_queue(m, coflow.width(), thresholds))
}

fn effective_m(coflow: &Coflow) -> u64 {
    if coflow.length_estimate_mode {
        remaining_length_estimate(coflow).unwrap_or_else(|| coflow.max_bytes_sent())
    } else {
        coflow.max_bytes_sent()
    }
}

impl Scheduler for SaathScheduler {
    fn kind(&self) -> PolicyKind {
        match self.variant {
            SaathVariant::Full => PolicyKind::Saath,
            SaathVariant::AllOrNone => PolicyKind::SaathAn,
            SaathVariant::AllOrNonePerFlow => PolicyKind::SaathAnPf,
        }
    }

    fn schedule(&mut self, state: &mut ClusterState) -> Schedule {
        let now = state.now;
        let queue_count = state.thresholds.len();

        // Recompute queues from one-interval-stale progress.
        let mut transitioned: Vec<usize> = Vec::new();
        for &ci in &state.active {
            let coflow = &state.coflows[ci];
            let new_queue = if self.per_flow_thresholds() {
                assign_queue(effective_m(coflow), coflow.width(), state.thresholds)
            } else {
                total_bytes_queue(coflow.total_bytes_sent(), state.thresholds)
            };
            let needs_deadline =
                self.variant == SaathVariant::Full && coflow.deadline.is_none();
            if new_queue != coflow.queue || needs_deadline {
                let coflow = &mut state.coflows[ci];
                if new_queue != coflow.queue {
                    coflow.queue = new_queue;
                    coflow.queue_entry_time = now;
                    coflow.queue_transitions.push((now, new_queue));
                }
                transitioned.push(ci);
            }
        }
        if self.variant == SaathVariant::Full && !transitioned.is_empty() {
            let mut in_queue = vec![0u64; queue_count];
            for &ci in &state.active {
                in_queue[state.coflows[ci].queue] += 1;
            }
            for &ci in &transitioned {
                let (queue, width) = {
                    let c = &state.coflows[ci];
                    (c.queue, c.width())
                };
                let deadline = set_deadline(
                    now,
                    queue,
                    in_queue[queue] - 1,
                    width,
                    state.config,
                    state.thresholds,
                );
                let coflow = &mut state.coflows[ci];
                coflow.deadline = Some(deadline);
                coflow.expired = false;
            }
        }

        // Mark newly expired deadlines.
        if self.variant == SaathVariant::Full {
            for &ci in &state.active {
                let coflow = &mut state.coflows[ci];
                if let Some(deadline) = coflow.deadline {
                    if !coflow.expired && deadline <= now {
                        coflow.expired = true;
                        coflow.deadline_expiries += 1;
                    }
                }
            }
        }

        // Consideration order: expired coflows by expiry time, then queues in
        // priority order, LCoF (or FIFO for the ablations) within each.
        let contention = if self.variant == SaathVariant::Full {
            compute_contention(state.coflows, &state.active, state.config.contention_scope)
        } else {
            vec![0; state.active.len()]
        };
        let mut expired: Vec<usize> = Vec::new();
        let mut per_queue: Vec<Vec<usize>> = vec![Vec::new(); queue_count];
        for (pos, &ci) in state.active.iter().enumerate() {
            let coflow = &state.coflows[ci];
            if self.variant == SaathVariant::Full && coflow.expired {
                expired.push(pos);
            } else {
                per_queue[coflow.queue].push(pos);
            }
        }
        expired.sort_by_key(|&pos| {
            let c = &state.coflows[state.active[pos]];
            (c.deadline.unwrap(), c.arrival, c.coflow_id)
        });
        let mut order: Vec<usize> = expired.iter().map(|&pos| state.active[pos]).collect();
        for members in &mut per_queue {
            members.sort_by_key(|&pos| {
                let c = &state.coflows[state.active[pos]];
                (contention[pos], c.arrival, c.coflow_id)
            });
            order.extend(members.iter().map(|&pos| state.active[pos]));
        }

        self.last_order = order.iter().map(|&ci| state.coflows[ci].coflow_id).collect();

        let schedule = allocate_all_or_none(
            &order,
            state.coflows,
            &mut state.egress,
            &mut state.ingress,
            state.config,
            state.interval,
        );

        // An expired coflow that received its whole-coflow grant has been
        // served; re-arm its deadline so it returns to its queue position
        // instead of staying pinned at the front.
        if self.variant == SaathVariant::Full {
            let granted: std::collections::HashSet<CoflowId> = schedule
                .entries
                .iter()
                .filter(|e| e.origin == crate::types::Origin::AllOrNone)
                .map(|e| e.coflow_id)
                .collect();
            let mut in_queue = vec![0u64; queue_count];
            for &ci in &state.active {
                in_queue[state.coflows[ci].queue] += 1;
            }
            for &ci in &state.active {
                let c = &state.coflows[ci];
                if c.expired && granted.contains(&c.coflow_id) {
                    let deadline = set_deadline(
                        now,
                        c.queue,
                        in_queue[c.queue] - 1,
                        c.width(),
                        state.config,
                        state.thresholds,
                    );
                    let c = &mut state.coflows[ci];
                    c.deadline = Some(deadline);
                    c.expired = false;
                }
            }
        }

        schedule
    }

    fn stable_intervals(&self, state: &ClusterState, schedule: &Schedule) -> u64 {
        let step: HashMap<FlowId, u64> =
            schedule.entries.iter().map(|e| (e.flow_id, e.bytes)).collect();
        let delta = state.config.delta_us;
        let mut bound = u64::MAX;
        for &ci in &state.active {
            let coflow = &state.coflows[ci];
            if coflow.length_estimate_mode {
                return 1;
            }
            if self.variant == SaathVariant::Full {
                if let Some(deadline) = coflow.deadline {
                    if !coflow.expired && deadline > state.now {
                        bound = bound.min((deadline - state.now).div_ceil(delta));
                    }
                }
            }
            let hi = state.thresholds[coflow.queue].hi;
            let Some(hi) = hi else { continue };
            if self.per_flow_thresholds() {
                let limit = u64::try_from(hi / coflow.width() as u128).unwrap_or(u64::MAX);
                for f in coflow.unfinished_flows() {
                    let s = step.get(&f.spec.flow_id).copied().unwrap_or(0);
                    if s == 0 {
                        continue;
                    }
                    bound = bound.min(if f.bytes_sent > limit {
                        1
                    } else {
                        (limit - f.bytes_sent) / s + 1
                    });
                }
            } else {
                let hi = u64::try_from(hi).unwrap_or(u64::MAX);
                let step_total: u64 = coflow
                    .flows
                    .iter()
                    .map(|f| step.get(&f.spec.flow_id).copied().unwrap_or(0))
                    .sum();
                if step_total > 0 {
                    let total = coflow.total_bytes_sent();
                    bound = bound.min(if total > hi { 1 } else { (hi - total) / step_total + 1 });
                }
            }
        }
        bound.max(1)
    }
}
