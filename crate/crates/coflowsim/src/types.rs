//! Domain model shared by the trace parser, the scheduling policies and the
//! simulation engine: flows, coflows, priority-queue configuration, per-port
//! capacities and per-interval schedules.
//!
//! All timestamps are integer microseconds and all capacity accounting is done
//! in integer bytes per scheduling interval, so a run is deterministic and
//! platform independent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulation time in integer microseconds.
pub type Micros = u64;

pub type FlowId = u64;
pub type CoflowId = u64;
/// Network port index (one machine = one port with independent egress/ingress).
pub type Port = usize;

pub const MICROS_PER_SEC: u64 = 1_000_000;
pub const MICROS_PER_MS: u64 = 1_000;
/// 1 MB is 10^6 bytes throughout (trace sizes, thresholds, port calibration).
pub const BYTES_PER_MB: u64 = 1_000_000;
/// 1 Gbps expressed in bytes/second. One 8 ms interval carries exactly 1 MB.
pub const DEFAULT_PORT_RATE: u64 = 125_000_000;
pub const DEFAULT_DELTA_US: Micros = 8_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("queue config invalid: need K >= 1, S > 0, E > 1 (got K={k}, S={s}, E={e})")]
    InvalidQueues { k: usize, s: u64, e: u64 },
    #[error("arrival scale must be > 0 (got {0})")]
    InvalidArrivalScale(f64),
    #[error("deadline factor must be >= 1 (got {0})")]
    InvalidDeadlineFactor(f64),
    #[error("interval length must be > 0")]
    InvalidDelta,
    #[error("unknown policy '{0}'")]
    UnknownPolicy(String),
    #[error("port rate must be > 0")]
    InvalidPortRate,
}

/// One flow of a coflow: a mapper-to-reducer transfer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub flow_id: FlowId,
    pub coflow_id: CoflowId,
    pub src_port: Port,
    pub dst_port: Port,
    pub size_bytes: u64,
}

/// Mutable per-flow progress tracked by the simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowState {
    pub spec: FlowSpec,
    pub bytes_sent: u64,
    /// Bytes the producer has made available so far (pipelined mode).
    pub available_bytes: u64,
    pub finish_time: Option<Micros>,
    /// Straggler injection: the flow transmits at most this rate (bytes/s).
    pub rate_cap: Option<u64>,
}

impl FlowState {
    pub fn new(spec: FlowSpec) -> Self {
        FlowState {
            spec,
            bytes_sent: 0,
            available_bytes: 0,
            finish_time: None,
            rate_cap: None,
        }
    }

    pub fn finished(&self) -> bool {
        self.finish_time.is_some()
    }

    pub fn remaining(&self) -> u64 {
        self.spec.size_bytes - self.bytes_sent
    }
}

/// A set of flows scheduled as a unit, plus the scheduler-visible state the
/// policies maintain for it (queue index, starvation deadline, DAG parents).
#[derive(Debug, Clone)]
pub struct Coflow {
    pub coflow_id: CoflowId,
    pub arrival: Micros,
    pub flows: Vec<FlowState>,
    pub parents: Vec<CoflowId>,

    /// Current priority queue index in [0, K).
    pub queue: usize,
    pub queue_entry_time: Micros,
    pub deadline: Option<Micros>,
    /// Set once the deadline has passed; cleared when a fresh deadline is set.
    pub expired: bool,
    pub deadline_expiries: u64,
    /// (time, new queue index) per transition, queue 0 entry included.
    pub queue_transitions: Vec<(Micros, usize)>,

    pub registered_at: Option<Micros>,
    pub completion_time: Option<Micros>,

    /// After a restart/straggler with some flows finished, queue assignment
    /// switches to the remaining-length estimate instead of max bytes sent.
    pub length_estimate_mode: bool,
}

impl Coflow {
    pub fn new(coflow_id: CoflowId, arrival: Micros, flows: Vec<FlowState>) -> Self {
        Coflow {
            coflow_id,
            arrival,
            flows,
            parents: Vec::new(),
            queue: 0,
            queue_entry_time: 0,
            deadline: None,
            expired: false,
            deadline_expiries: 0,
            queue_transitions: Vec::new(),
            registered_at: None,
            completion_time: None,
            length_estimate_mode: false,
        }
    }

    /// Width N_c: number of flows.
    pub fn width(&self) -> u64 {
        self.flows.len() as u64
    }

    pub fn total_size(&self) -> u64 {
        self.flows.iter().map(|f| f.spec.size_bytes).sum()
    }

    /// m_c: maximum bytes sent by any flow.
    pub fn max_bytes_sent(&self) -> u64 {
        self.flows.iter().map(|f| f.bytes_sent).max().unwrap_or(0)
    }

    pub fn total_bytes_sent(&self) -> u64 {
        self.flows.iter().map(|f| f.bytes_sent).sum()
    }

    pub fn finished(&self) -> bool {
        self.flows.iter().all(|f| f.finished())
    }

    pub fn unfinished_flows(&self) -> impl Iterator<Item = &FlowState> {
        self.flows.iter().filter(|f| !f.finished())
    }

    /// Ports (src and dst of unfinished flows) this coflow still touches.
    pub fn port_set(&self) -> Vec<Port> {
        let mut ports: Vec<Port> = self
            .unfinished_flows()
            .flat_map(|f| [f.spec.src_port, f.spec.dst_port])
            .collect();
        ports.sort_unstable();
        ports.dedup();
        ports
    }
}

/// K priority queues with exponentially growing thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueConfig {
    /// Number of queues K.
    pub count: usize,
    /// Starting threshold S = Q^hi_0 in bytes.
    pub base_threshold: u64,
    /// Exponential growth factor E.
    pub growth: u64,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig {
            count: 10,
            base_threshold: 10 * BYTES_PER_MB,
            growth: 10,
        }
    }
}

/// Half-open byte range [lo, hi) of one queue; `hi == None` is the infinity
/// sentinel of the last queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueRange {
    pub lo: u128,
    pub hi: Option<u128>,
}

impl QueueConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.count >= 1 && self.base_threshold > 0 && self.growth > 1 {
            Ok(())
        } else {
            Err(ConfigError::InvalidQueues {
                k: self.count,
                s: self.base_threshold,
                e: self.growth,
            })
        }
    }

    /// Q^hi_q = S * E^q for q < K-1, infinite for the last queue;
    /// Q^lo_0 = 0 and Q^lo_{q+1} = Q^hi_q.
    pub fn derive_thresholds(&self) -> Result<Vec<QueueRange>, ConfigError> {
        self.validate()?;
        let mut ranges = Vec::with_capacity(self.count);
        let mut lo: u128 = 0;
        let mut hi: Option<u128> = Some(self.base_threshold as u128);
        for q in 0..self.count {
            let this_hi = if q == self.count - 1 { None } else { hi };
            ranges.push(QueueRange { lo, hi: this_hi });
            if let Some(h) = hi {
                lo = h;
                hi = h.checked_mul(self.growth as u128);
            }
        }
        Ok(ranges)
    }
}

/// Per-port capacity; egress and ingress are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortCapacity {
    pub egress_rate: u64,
    pub ingress_rate: u64,
}

impl Default for PortCapacity {
    fn default() -> Self {
        PortCapacity {
            egress_rate: DEFAULT_PORT_RATE,
            ingress_rate: DEFAULT_PORT_RATE,
        }
    }
}

/// Bytes one port side can carry in one interval.
pub fn bytes_per_interval(rate_bps: u64, delta_us: Micros) -> u64 {
    ((rate_bps as u128 * delta_us as u128) / MICROS_PER_SEC as u128) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Granted as part of a whole-coflow (equal rate) grant.
    AllOrNone,
    /// Granted flow-by-flow to fill otherwise idle capacity. Also used by the
    /// uncoordinated baselines, which only ever grant individual flows.
    WorkConservation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub flow_id: FlowId,
    pub coflow_id: CoflowId,
    /// Byte budget for this interval (rate = bytes / delta).
    pub bytes: u64,
    pub origin: Origin,
}

/// Rate assignment for one interval.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    pub interval: u64,
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn rate_bps(&self, entry: &ScheduleEntry, delta_us: Micros) -> f64 {
        entry.bytes as f64 * MICROS_PER_SEC as f64 / delta_us as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AvailabilityMode {
    /// All flow data exists when the coflow arrives.
    AllAtArrival,
    /// Data is produced over time; a flow is schedulable only once at least
    /// one interval worth of unread data has accumulated.
    Pipelined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContentionScope {
    /// Count port-sharing coflows across all queues.
    Global,
    /// Count only coflows currently in the same queue.
    Queue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    Saath,
    /// Ablation: all-or-none + FIFO, total-bytes queue thresholds.
    SaathAn,
    /// Ablation: all-or-none + FIFO with per-flow queue thresholds.
    SaathAnPf,
    Aalo,
    Scf,
    Srtf,
    Sebf,
    Lwtf,
    /// Pure least-contention ordering with no queues (offline analysis).
    Lcof,
    UcTcp,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 10] = [
        PolicyKind::Saath,
        PolicyKind::SaathAn,
        PolicyKind::SaathAnPf,
        PolicyKind::Aalo,
        PolicyKind::Scf,
        PolicyKind::Srtf,
        PolicyKind::Sebf,
        PolicyKind::Lwtf,
        PolicyKind::Lcof,
        PolicyKind::UcTcp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Saath => "saath",
            PolicyKind::SaathAn => "saath-an",
            PolicyKind::SaathAnPf => "saath-an-pf",
            PolicyKind::Aalo => "aalo",
            PolicyKind::Scf => "scf",
            PolicyKind::Srtf => "srtf",
            PolicyKind::Sebf => "sebf",
            PolicyKind::Lwtf => "lwtf",
            PolicyKind::Lcof => "lcof",
            PolicyKind::UcTcp => "uc-tcp",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| ConfigError::UnknownPolicy(s.to_string()))
    }
}

/// All knobs of one simulation run. Defaults match the evaluation setup:
/// K=10, E=10, S=10MB, delta=8ms, d=2, A=1, 1 Gbps per port side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub delta_us: Micros,
    pub queues: QueueConfig,
    /// Starvation deadline factor d.
    pub deadline_factor: f64,
    /// Arrival time scale A; arrivals are divided by A (A=4 means 4x faster).
    pub arrival_scale: f64,
    /// Port rate in bytes/second, both sides.
    pub port_rate: u64,
    pub rng_seed: u64,
    pub availability: AvailabilityMode,
    /// Producer rate (bytes/s) per flow in pipelined mode; None = port rate.
    pub producer_rate: Option<u64>,
    pub contention_scope: ContentionScope,
    /// Re-queue coflows via the finished-flow length estimate after dynamics.
    pub requeue_on_dynamics: bool,
    /// Guard against nonterminating runs.
    pub max_intervals: u64,
    /// Collect the per-interval schedule audit log.
    pub audit: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            delta_us: DEFAULT_DELTA_US,
            queues: QueueConfig::default(),
            deadline_factor: 2.0,
            arrival_scale: 1.0,
            port_rate: DEFAULT_PORT_RATE,
            rng_seed: 0,
            availability: AvailabilityMode::AllAtArrival,
            producer_rate: None,
            contention_scope: ContentionScope::Global,
            requeue_on_dynamics: true,
            max_intervals: 50_000_000,
            audit: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.delta_us == 0 {
            return Err(ConfigError::InvalidDelta);
        }
        if !(self.arrival_scale > 0.0) {
            return Err(ConfigError::InvalidArrivalScale(self.arrival_scale));
        }
        if !(self.deadline_factor >= 1.0) {
            return Err(ConfigError::InvalidDeadlineFactor(self.deadline_factor));
        }
        if self.port_rate == 0 {
            return Err(ConfigError::InvalidPortRate);
        }
        self.queues.validate()
    }

    pub fn interval_budget(&self) -> u64 {
        bytes_per_interval(self.port_rate, self.delta_us)
    }
}
