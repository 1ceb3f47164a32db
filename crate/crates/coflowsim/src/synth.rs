//! Workload synthesis: seeded generation of traces in the mapper/reducer
//! text format, with knobs for the shape statistics that matter to the
//! schedulers (single-flow fraction, equal-length fraction, width range,
//! heavy-tailed sizes, arrival burstiness).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::trace::{CoflowSpec, Trace};
use crate::types::Port;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("coflow count must be >= 1")]
    NoCoflows,
    #[error("need mappers <= {ports} ports and reducers <= {ports} ports (got {mappers} x {reducers})")]
    WidthExceedsPorts { ports: usize, mappers: usize, reducers: usize },
    #[error("reducer size range invalid: {min}..={max} MB")]
    BadSizeRange { min: u64, max: u64 },
    #[error("fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("mean inter-arrival must be >= 0 (got {0})")]
    BadInterArrival(f64),
    #[error("port skew must be >= 1 (got {0})")]
    BadSkew(f64),
}

/// Generator parameters. Widths are mappers x reducers with each side drawn
/// uniformly; reducer sizes are log-uniform in [min, max] MB, which is
/// heavy-tailed on a linear scale.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub coflow_count: usize,
    pub port_count: usize,
    /// Fraction of coflows with exactly one flow.
    pub single_flow_fraction: f64,
    /// Of the multi-flow coflows, the fraction whose flows are byte-identical.
    pub equal_flow_fraction: f64,
    pub max_mappers: usize,
    pub max_reducers: usize,
    /// Fraction of coflows drawn from the small size class (reducer sizes
    /// uniform in [1, small_max_mb] MB); the rest use the log-uniform
    /// [min_reducer_mb, max_reducer_mb] class.
    pub small_fraction: f64,
    pub small_max_mb: u64,
    pub min_reducer_mb: u64,
    pub max_reducer_mb: u64,
    /// Mean of the exponential inter-arrival gap, in milliseconds; 0 makes
    /// every coflow arrive at time 0.
    pub mean_interarrival_ms: f64,
    /// Port popularity skew: ports are drawn as floor(P * u^skew), so 1.0 is
    /// uniform and larger values concentrate load on low-index ports.
    pub port_skew: f64,
    pub rng_seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.coflow_count == 0 {
            return Err(SynthError::NoCoflows);
        }
        if self.max_mappers == 0
            || self.max_reducers == 0
            || self.max_mappers > self.port_count
            || self.max_reducers > self.port_count
        {
            return Err(SynthError::WidthExceedsPorts {
                ports: self.port_count,
                mappers: self.max_mappers,
                reducers: self.max_reducers,
            });
        }
        if self.min_reducer_mb == 0 || self.min_reducer_mb > self.max_reducer_mb {
            return Err(SynthError::BadSizeRange {
                min: self.min_reducer_mb,
                max: self.max_reducer_mb,
            });
        }
        if self.small_max_mb == 0 {
            return Err(SynthError::BadSizeRange { min: 1, max: self.small_max_mb });
        }
        for f in [self.single_flow_fraction, self.equal_flow_fraction, self.small_fraction] {
            if !(0.0..=1.0).contains(&f) {
                return Err(SynthError::BadFraction(f));
            }
        }
        if !(self.mean_interarrival_ms >= 0.0) {
            return Err(SynthError::BadInterArrival(self.mean_interarrival_ms));
        }
        if !(self.port_skew >= 1.0) {
            return Err(SynthError::BadSkew(self.port_skew));
        }
        Ok(())
    }
}

/// Distinct ports, biased toward low indices when `skew > 1`.
fn pick_ports(rng: &mut ChaCha8Rng, port_count: usize, n: usize, skew: f64) -> Vec<Port> {
    if skew == 1.0 {
        return sample(rng, port_count, n).into_vec();
    }
    let mut chosen = Vec::with_capacity(n);
    let mut used = vec![false; port_count];
    while chosen.len() < n {
        let u: f64 = rng.gen();
        let p = ((port_count as f64 * u.powf(skew)) as usize).min(port_count - 1);
        if !used[p] {
            used[p] = true;
            chosen.push(p);
        }
    }
    chosen
}

/// Deterministic for a given spec; the result round-trips through the trace
/// text format.
pub fn synthesize(spec: &SynthSpec) -> Result<Trace, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut arrival_ms: u64 = 0;
    let mut coflows = Vec::with_capacity(spec.coflow_count);
    for id in 1..=spec.coflow_count as u64 {
        if id > 1 && spec.mean_interarrival_ms > 0.0 {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            arrival_ms += (-spec.mean_interarrival_ms * u.ln()).round() as u64;
        }
        let single = rng.gen_bool(spec.single_flow_fraction)
            || spec.max_mappers * spec.max_reducers < 2;
        let (mapper_count, reducer_count) = if single {
            (1, 1)
        } else {
            // Reject 1x1 draws so the coflow really is multi-flow.
            loop {
                let m = rng.gen_range(1..=spec.max_mappers);
                let r = rng.gen_range(1..=spec.max_reducers);
                if m * r >= 2 {
                    break (m, r);
                }
            }
        };
        let mappers = pick_ports(&mut rng, spec.port_count, mapper_count, spec.port_skew);
        let reducer_ports = pick_ports(&mut rng, spec.port_count, reducer_count, spec.port_skew);

        let multi = mapper_count * reducer_count >= 2;
        let equal = multi && rng.gen_bool(spec.equal_flow_fraction);
        let small = rng.gen_bool(spec.small_fraction);
        let draw_mb = |rng: &mut ChaCha8Rng| -> u64 {
            if small {
                return rng.gen_range(1..=spec.small_max_mb);
            }
            let lo = (spec.min_reducer_mb as f64).ln();
            let hi = (spec.max_reducer_mb as f64).ln();
            let mb = (rng.gen_range(lo..=hi)).exp().round() as u64;
            mb.clamp(spec.min_reducer_mb, spec.max_reducer_mb)
        };
        let reducers: Vec<(Port, u64)> = if equal {
            // One size for all reducers keeps every expanded flow identical.
            let mb = draw_mb(&mut rng);
            reducer_ports.into_iter().map(|p| (p, mb)).collect()
        } else {
            let mut sizes: Vec<u64> =
                (0..reducer_count).map(|_| draw_mb(&mut rng)).collect();
            // With several reducers, force at least two distinct sizes.
            if multi && reducer_count >= 2 && sizes.iter().all(|&s| s == sizes[0]) {
                sizes[0] = if sizes[0] > 1 { sizes[0] - 1 } else { sizes[0] + 1 };
            }
            reducer_ports.into_iter().zip(sizes).collect()
        };
        coflows.push(CoflowSpec { id, arrival_ms, mappers, reducers });
    }
    Ok(Trace { port_count: spec.port_count, coflows })
}

/// Preset resembling the published 526-coflow, 150-port production trace:
/// about a quarter single-flow coflows, half of all coflows multi-flow with
/// equal-length flows, heavy-tailed sizes from 1 MB to tens of GB, bursty
/// arrivals over a few minutes.
pub fn fb_like() -> SynthSpec {
    SynthSpec {
        coflow_count: 526,
        port_count: 150,
        single_flow_fraction: 0.23,
        equal_flow_fraction: 0.65,
        max_mappers: 35,
        max_reducers: 35,
        small_fraction: 0.55,
        small_max_mb: 10,
        min_reducer_mb: 10,
        max_reducer_mb: 6_000,
        mean_interarrival_ms: 150.0,
        port_skew: 2.0,
        rng_seed: 42,
    }
}

/// Small contended preset for desk-scale trend checks: many equal-length
/// multi-flow coflows over few ports, arriving close together.
pub fn contended(coflow_count: usize, rng_seed: u64) -> SynthSpec {
    SynthSpec {
        coflow_count,
        port_count: 20,
        single_flow_fraction: 0.1,
        equal_flow_fraction: 0.8,
        max_mappers: 6,
        max_reducers: 6,
        small_fraction: 0.5,
        small_max_mb: 10,
        min_reducer_mb: 1,
        max_reducer_mb: 200,
        mean_interarrival_ms: 40.0,
        port_skew: 1.5,
        rng_seed,
    }
}
