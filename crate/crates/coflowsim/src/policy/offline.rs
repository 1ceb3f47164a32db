//! Offline comparison policies with apriori size knowledge. Coflows are
//! ordered by a single key and allocated with the same all-or-none grant plus
//! work conservation as the online scheduler, but with no queues and no
//! deadlines.

use std::collections::HashMap;

use crate::policy::{allocate_all_or_none, compute_contention, ClusterState, Scheduler};
use crate::types::{Coflow, CoflowId, ContentionScope, PolicyKind, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfflineKey {
    /// Shortest coflow first: total size.
    Scf,
    /// Shortest remaining time first: total remaining bytes.
    Srtf,
    /// Smallest effective bottleneck first: max per-port-side remaining load.
    Sebf,
    /// Least waiting time first: bottleneck load x contention.
    Lwtf,
    /// Pure least-contention-first.
    Lcof,
}

pub struct OfflineScheduler {
    key: OfflineKey,
}

impl OfflineScheduler {
    pub fn new(key: OfflineKey) -> Self {
        OfflineScheduler { key }
    }
}

/// Bottleneck load: the largest total of remaining bytes this coflow places
/// on any single port side. Dividing by the (uniform) port rate gives the
/// remaining bottleneck time, so bytes order the same way.
fn bottleneck_load(coflow: &Coflow) -> u128 {
    let mut egress: HashMap<usize, u128> = HashMap::new();
    let mut ingress: HashMap<usize, u128> = HashMap::new();
    for f in coflow.unfinished_flows() {
        *egress.entry(f.spec.src_port).or_insert(0) += f.remaining() as u128;
        *ingress.entry(f.spec.dst_port).or_insert(0) += f.remaining() as u128;
    }
    egress.values().chain(ingress.values()).copied().max().unwrap_or(0)
}

impl Scheduler for OfflineScheduler {
    fn kind(&self) -> PolicyKind {
        match self.key {
            OfflineKey::Scf => PolicyKind::Scf,
            OfflineKey::Srtf => PolicyKind::Srtf,
            OfflineKey::Sebf => PolicyKind::Sebf,
            OfflineKey::Lwtf => PolicyKind::Lwtf,
            OfflineKey::Lcof => PolicyKind::Lcof,
        }
    }

    fn schedule(&mut self, state: &mut ClusterState) -> Schedule {
        let contention = match self.key {
            OfflineKey::Lwtf | OfflineKey::Lcof => {
                compute_contention(state.coflows, &state.active, ContentionScope::Global)
            }
            _ => Vec::new(),
        };
        let mut keyed: Vec<(u128, u64, CoflowId, usize)> = state
            .active
            .iter()
            .enumerate()
            .map(|(pos, &ci)| {
                let coflow = &state.coflows[ci];
                let key = match self.key {
                    OfflineKey::Scf => coflow.total_size() as u128,
                    OfflineKey::Srtf => {
                        (coflow.total_size() - coflow.total_bytes_sent()) as u128
                    }
                    OfflineKey::Sebf => bottleneck_load(coflow),
                    OfflineKey::Lwtf => bottleneck_load(coflow) * contention[pos] as u128,
                    OfflineKey::Lcof => contention[pos] as u128,
                };
                (key, coflow.arrival, coflow.coflow_id, ci)
            })
            .collect();
        keyed.sort_unstable();
        let order: Vec<usize> = keyed.into_iter().map(|(_, _, _, ci)| ci).collect();
        allocate_all_or_none(
            &order,
            state.coflows,
            &mut state.egress,
            &mut state.ingress,
            state.config,
            state.interval,
        )
    }

    fn stable_intervals(&self, _state: &ClusterState, _schedule: &Schedule) -> u64 {
        match self.key {
            // Keys depend only on which flows are unfinished.
            OfflineKey::Scf | OfflineKey::Lcof => u64::MAX,
            // Keys shift with progress; recompute every interval.
            OfflineKey::Srtf | OfflineKey::Sebf | OfflineKey::Lwtf => 1,
        }
    }
}

/// Schedules coflows in a caller-fixed priority order; used to search over
/// all orderings on small instances.
pub struct FixedOrderScheduler {
    priority: HashMap<CoflowId, usize>,
}

impl FixedOrderScheduler {
    pub fn new(order: &[CoflowId]) -> Self {
        FixedOrderScheduler {
            priority: order.iter().enumerate().map(|(i, &id)| (id, i)).collect(),
        }
    }
}

impl Scheduler for FixedOrderScheduler {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Scf
    }

    fn schedule(&mut self, state: &mut ClusterState) -> Schedule {
        let mut order: Vec<usize> = state.active.clone();
        order.sort_by_key(|&ci| {
            let c = &state.coflows[ci];
            (
                self.priority.get(&c.coflow_id).copied().unwrap_or(usize::MAX),
                c.arrival,
                c.coflow_id,
            )
        });
        allocate_all_or_none(
            &order,
            state.coflows,
            &mut state.egress,
            &mut state.ingress,
            state.config,
            state.interval,
        )
    }

    fn stable_intervals(&self, _state: &ClusterState, _schedule: &Schedule) -> u64 {
        u64::MAX
    }
}
