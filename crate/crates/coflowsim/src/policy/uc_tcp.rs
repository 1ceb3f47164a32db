//! Uncoordinated baseline: every active flow shares the fabric under
//! two-sided max-min fairness, with no queues and no coflow awareness.
//! Rates come from classic water filling: repeatedly saturate the most
//! constrained port side and freeze its flows at the fair share.

use crate::policy::{flow_schedulable, ClusterState, Scheduler};
use crate::types::{Origin, PolicyKind, Schedule, ScheduleEntry};

#[derive(Default)]
pub struct UcTcpScheduler;

struct FlowRef {
    flow_id: u64,
    coflow_id: u64,
    sides: [usize; 2],
}

impl Scheduler for UcTcpScheduler {
    fn kind(&self) -> PolicyKind {
        PolicyKind::UcTcp
    }

    fn schedule(&mut self, state: &mut ClusterState) -> Schedule {
        let n_ports = state.port_count;
        let mut flows: Vec<FlowRef> = Vec::new();
        for &ci in &state.active {
            let coflow = &state.coflows[ci];
            for f in coflow.flows.iter().filter(|f| flow_schedulable(f, state.config)) {
                flows.push(FlowRef {
                    flow_id: f.spec.flow_id,
                    coflow_id: coflow.coflow_id,
                    // Side ids: egress ports first, then ingress ports.
                    sides: [f.spec.src_port, n_ports + f.spec.dst_port],
                });
            }
        }

        let mut remaining: Vec<f64> = state
            .egress
            .iter()
            .chain(state.ingress.iter())
            .map(|&b| b as f64)
            .collect();
        let mut count = vec![0u64; 2 * n_ports];
        for f in &flows {
            for &s in &f.sides {
                count[s] += 1;
            }
        }
        let mut rate = vec![0f64; flows.len()];
        let mut frozen = vec![false; flows.len()];

        loop {
            let mut best: Option<(f64, usize)> = None;
            for (s, &c) in count.iter().enumerate() {
                if c > 0 {
                    let level = remaining[s] / c as f64;
                    if best.map_or(true, |(b, _)| level < b) {
                        best = Some((level, s));
                    }
                }
            }
            let Some((level, side)) = best else { break };
            let level = level.max(0.0);
            for (i, f) in flows.iter().enumerate() {
                if !frozen[i] && f.sides.contains(&side) {
                    frozen[i] = true;
                    rate[i] = level;
                    for &s in &f.sides {
                        if s != side {
                            remaining[s] = (remaining[s] - level).max(0.0);
                            count[s] -= 1;
                        }
                    }
                }
            }
            remaining[side] = 0.0;
            count[side] = 0;
        }

        let mut schedule = Schedule { interval: state.interval, entries: Vec::new() };
        for (i, f) in flows.iter().enumerate() {
            let bytes = rate[i].floor() as u64;
            if bytes > 0 {
                schedule.entries.push(ScheduleEntry {
                    flow_id: f.flow_id,
                    coflow_id: f.coflow_id,
                    bytes,
                    origin: Origin::WorkConservation,
                });
            }
        }
        schedule
    }

    fn stable_intervals(&self, _state: &ClusterState, _schedule: &Schedule) -> u64 {
        // Rates depend only on the set of active flows.
        u64::MAX
    }
}
