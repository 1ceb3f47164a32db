//! The priority-queue + FIFO baseline. Coflows move down queues on total
//! bytes sent; each port then offers its capacity to flows independently in
//! (queue, coflow arrival, flow id) order, each flow capped by the smaller of
//! its two port-side offers. There is no cross-port coordination of a
//! coflow's flows.

use std::collections::HashMap;

use crate::policy::{flow_schedulable, total_bytes_queue, ClusterState, Scheduler};
use crate::types::{FlowId, Micros, Origin, PolicyKind, Schedule, ScheduleEntry};

#[derive(Default)]
pub struct AaloScheduler;

impl Scheduler for AaloScheduler {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Aalo
    }

    fn schedule(&mut self, state: &mut ClusterState) -> Schedule {
        let now = state.now;
        for &ci in &state.active {
            let coflow = &state.coflows[ci];
            let new_queue = total_bytes_queue(coflow.total_bytes_sent(), state.thresholds);
            if new_queue != coflow.queue {
                let coflow = &mut state.coflows[ci];
                coflow.queue = new_queue;
                coflow.queue_entry_time = now;
                coflow.queue_transitions.push((now, new_queue));
            }
        }

        // (queue, arrival, coflow id, flow id) priority over all ports.
        let mut flows: Vec<(usize, Micros, u64, FlowId, usize, usize)> = Vec::new();
        for &ci in &state.active {
            let coflow = &state.coflows[ci];
            for f in coflow.flows.iter().filter(|f| flow_schedulable(f, state.config)) {
                flows.push((
                    coflow.queue,
                    coflow.arrival,
                    coflow.coflow_id,
                    f.spec.flow_id,
                    f.spec.src_port,
                    f.spec.dst_port,
                ));
            }
        }
        flows.sort_unstable();

        let mut schedule = Schedule { interval: state.interval, entries: Vec::new() };
        for (_, _, coflow_id, flow_id, src, dst) in flows {
            let budget = state.egress[src].min(state.ingress[dst]);
            if budget > 0 {
                schedule.entries.push(ScheduleEntry {
                    flow_id,
                    coflow_id,
                    bytes: budget,
                    origin: Origin::WorkConservation,
                });
                state.egress[src] -= budget;
                state.ingress[dst] -= budget;
            }
        }
        schedule
    }

    fn stable_intervals(&self, state: &ClusterState, schedule: &Schedule) -> u64 {
        let step: HashMap<FlowId, u64> =
            schedule.entries.iter().map(|e| (e.flow_id, e.bytes)).collect();
        let mut bound = u64::MAX;
        for &ci in &state.active {
            let coflow = &state.coflows[ci];
            let Some(hi) = state.thresholds[coflow.queue].hi else { continue };
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
        bound.max(1)
    }
}
