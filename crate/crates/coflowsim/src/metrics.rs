//! Evaluation statistics over completed runs: per-coflow CCT speedups with
//! nearest-rank percentiles, width/size bins, out-of-sync flow-completion
//! deviation, trace shape statistics, and a shuffle-fraction JCT estimate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{CoflowRecord, RunResult};
use crate::types::{Coflow, CoflowId, BYTES_PER_MB};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("runs cover different coflow sets (first mismatch at id {0})")]
    IdMismatch(CoflowId),
}

/// Nearest-rank percentile on an ascending slice: the ceil(p/100 * n)-th
/// smallest value, no interpolation.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=100.0).contains(&p));
    let n = sorted.len();
    let rank = ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Conventional median on an ascending slice: middle value, or the mean of
/// the two middle values for even lengths.
pub fn median(sorted: &[f64]) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Population standard deviation divided by the mean; 0 for an all-zero or
/// single-element population.
pub fn normalized_deviation(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpeedupRecord {
    pub coflow_id: CoflowId,
    pub cct_baseline: u64,
    pub cct_test: u64,
    /// cct_baseline / cct_test: how much faster the test policy finished it.
    pub speedup: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpeedupSummary {
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

pub fn summarize(values: &[f64]) -> SpeedupSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    SpeedupSummary {
        median: median(&sorted),
        p10: percentile_nearest_rank(&sorted, 10.0),
        p90: percentile_nearest_rank(&sorted, 90.0),
    }
}

/// Per-coflow CCT ratios of `baseline` over `test`, plus median/P10/P90.
/// Both runs must cover the same coflows of the same trace.
pub fn speedups(
    baseline: &RunResult,
    test: &RunResult,
) -> Result<(Vec<SpeedupRecord>, SpeedupSummary), MetricsError> {
    if baseline.coflows.len() != test.coflows.len() {
        let id = baseline
            .coflows
            .iter()
            .zip(&test.coflows)
            .find(|(b, t)| b.coflow_id != t.coflow_id)
            .map(|(b, _)| b.coflow_id)
            .unwrap_or_else(|| {
                baseline
                    .coflows
                    .last()
                    .or(test.coflows.last())
                    .map(|c| c.coflow_id)
                    .unwrap_or(0)
            });
        return Err(MetricsError::IdMismatch(id));
    }
    let mut records = Vec::with_capacity(baseline.coflows.len());
    for (b, t) in baseline.coflows.iter().zip(&test.coflows) {
        if b.coflow_id != t.coflow_id {
            return Err(MetricsError::IdMismatch(b.coflow_id));
        }
        records.push(SpeedupRecord {
            coflow_id: b.coflow_id,
            cct_baseline: b.cct_us,
            cct_test: t.cct_us,
            speedup: b.cct_us as f64 / t.cct_us as f64,
        });
    }
    let values: Vec<f64> = records.iter().map(|r| r.speedup).collect();
    let summary = summarize(&values);
    Ok((records, summary))
}

pub const BIN_COUNT: usize = 4;
pub const BIN_LABELS: [&str; BIN_COUNT] = [
    "narrow-small",
    "wide-small",
    "narrow-large",
    "wide-large",
];

/// Width/size bin in 1..=4: (width <= 10 vs > 10) x (size <= 100 MB vs > 100 MB).
pub fn bin(width: u64, total_size_bytes: u64) -> u8 {
    let wide = width > 10;
    let large = total_size_bytes > 100 * BYTES_PER_MB;
    match (wide, large) {
        (false, false) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (true, true) => 4,
    }
}

/// Median speedup per bin; None for empty bins. Records and coflow records
/// are matched by position (both come from the same aligned runs).
pub fn bin_medians(
    records: &[SpeedupRecord],
    coflows: &[CoflowRecord],
) -> [Option<f64>; BIN_COUNT] {
    let mut buckets: [Vec<f64>; BIN_COUNT] = Default::default();
    for (r, c) in records.iter().zip(coflows) {
        debug_assert_eq!(r.coflow_id, c.coflow_id);
        buckets[bin(c.width, c.total_size) as usize - 1].push(r.speedup);
    }
    buckets.map(|mut b| {
        if b.is_empty() {
            None
        } else {
            b.sort_by(f64::total_cmp);
            Some(median(&b))
        }
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OutOfSyncStats {
    /// (coflow id, sigma(FCT)/mean(FCT)) for multi-flow coflows whose flow
    /// sizes are byte-identical.
    pub equal_length: Vec<(CoflowId, f64)>,
    /// Same, for multi-flow coflows with differing flow sizes.
    pub unequal_length: Vec<(CoflowId, f64)>,
}

impl OutOfSyncStats {
    pub fn all_deviations(&self) -> Vec<f64> {
        self.equal_length
            .iter()
            .chain(&self.unequal_length)
            .map(|&(_, d)| d)
            .collect()
    }
}

/// Normalized FCT deviation per multi-flow coflow (single-flow coflows carry
/// no synchronization information and are excluded).
pub fn out_of_sync(run: &RunResult) -> OutOfSyncStats {
    let mut stats = OutOfSyncStats::default();
    for c in &run.coflows {
        if c.flows.len() < 2 {
            continue;
        }
        let fcts: Vec<f64> = c.flows.iter().map(|&(_, _, fct)| fct as f64).collect();
        let deviation = normalized_deviation(&fcts);
        let equal = c.flows.iter().all(|&(_, size, _)| size == c.flows[0].1);
        if equal {
            stats.equal_length.push((c.coflow_id, deviation));
        } else {
            stats.unequal_length.push((c.coflow_id, deviation));
        }
    }
    stats
}

/// Empirical CDF: sorted (value, fraction of samples <= value) points.
pub fn cdf_points(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (i + 1) as f64 / n))
        .collect()
}

/// Fraction of samples <= x.
pub fn cdf_at(values: &[f64], x: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v <= x).count() as f64 / values.len() as f64
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FlowLengthStats {
    pub coflow_count: usize,
    pub single_flow: usize,
    pub equal_multi: usize,
    pub unequal_multi: usize,
    /// (width, number of coflows with that width), ascending by width.
    pub width_distribution: Vec<(u64, usize)>,
    /// (coflow id, sigma(flow sizes)/mean) for multi-flow coflows.
    pub length_deviation: Vec<(CoflowId, f64)>,
}

pub fn flow_length_stats(coflows: &[Coflow]) -> FlowLengthStats {
    let mut stats = FlowLengthStats { coflow_count: coflows.len(), ..Default::default() };
    let mut widths: std::collections::BTreeMap<u64, usize> = std::collections::BTreeMap::new();
    for c in coflows {
        *widths.entry(c.width()).or_insert(0) += 1;
        if c.flows.len() < 2 {
            stats.single_flow += 1;
            continue;
        }
        let sizes: Vec<f64> = c.flows.iter().map(|f| f.spec.size_bytes as f64).collect();
        let equal = c.flows.iter().all(|f| f.spec.size_bytes == c.flows[0].spec.size_bytes);
        if equal {
            stats.equal_multi += 1;
        } else {
            stats.unequal_multi += 1;
        }
        stats.length_deviation.push((c.coflow_id, normalized_deviation(&sizes)));
    }
    stats.width_distribution = widths.into_iter().collect();
    stats
}

/// Job-completion-time estimate when only a fraction `f` of the job is
/// shuffle accelerated by `s`: 1 / ((1 - f) + f / s).
pub fn jct_speedup(s: f64, f: f64) -> f64 {
    assert!(s > 0.0);
    assert!((0.0..=1.0).contains(&f));
    1.0 / ((1.0 - f) + f / s)
}

/// One row per coflow: id, arrival, width, size, registration, completion, CCT.
pub fn cct_table(run: &RunResult) -> String {
    let mut out = String::from(
        "coflow_id\tarrival_us\twidth\ttotal_bytes\tregistered_us\tcompletion_us\tcct_us\n",
    );
    for c in &run.coflows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            c.coflow_id, c.arrival, c.width, c.total_size, c.registered_at, c.completion_time, c.cct_us
        ));
    }
    out
}

/// One row per coflow: id, the two CCTs and their ratio.
pub fn speedup_table(records: &[SpeedupRecord]) -> String {
    let mut out = String::from("coflow_id\tcct_baseline_us\tcct_test_us\tspeedup\n");
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.6}\n",
            r.coflow_id, r.cct_baseline, r.cct_test, r.speedup
        ));
    }
    out
}

/// Machine-readable comparison summary, one per (test, baseline) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub policy: String,
    pub baseline: String,
    pub rng_seed: u64,
    pub coflow_count: usize,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub bin_medians: [Option<f64>; BIN_COUNT],
    pub out_of_sync_cdf: Vec<(f64, f64)>,
}

pub fn comparison_summary(
    baseline: &RunResult,
    test: &RunResult,
) -> Result<ComparisonSummary, MetricsError> {
    let (records, summary) = speedups(baseline, test)?;
    let deviations = out_of_sync(test).all_deviations();
    Ok(ComparisonSummary {
        policy: test.policy.clone(),
        baseline: baseline.policy.clone(),
        rng_seed: test.rng_seed,
        coflow_count: records.len(),
        median: summary.median,
        p10: summary.p10,
        p90: summary.p90,
        bin_medians: bin_medians(&records, &test.coflows),
        out_of_sync_cdf: cdf_points(&deviations),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk_run(ccts: &[(CoflowId, u64)]) -> RunResult {
        RunResult {
            policy: "test".into(),
            rng_seed: 0,
            coflows: ccts
                .iter()
                .map(|&(coflow_id, cct_us)| CoflowRecord {
                    coflow_id,
                    arrival: 0,
                    width: 1,
                    total_size: 1,
                    registered_at: 0,
                    completion_time: cct_us,
                    cct_us,
                    flows: vec![(coflow_id, 1, cct_us)],
                    queue_transition_count: 0,
                    queue_transitions: vec![],
                    deadline_expiries: 0,
                })
                .collect(),
            intervals: 0,
            utilization: vec![],
            audit: None,
        }
    }

    #[test]
    fn identical_runs_speedup_one() {
        let run = mk_run(&[(1, 10), (2, 20)]);
        let (records, summary) = speedups(&run, &run).unwrap();
        assert!(records.iter().all(|r| r.speedup == 1.0));
        assert_eq!(summary.median, 1.0);
    }

    #[test]
    fn speedup_median_mixed() {
        // baseline {2,4}, test {1,4} -> speedups {2.0, 1.0}, median 1.5.
        let baseline = mk_run(&[(1, 2), (2, 4)]);
        let test = mk_run(&[(1, 1), (2, 4)]);
        let (records, summary) = speedups(&baseline, &test).unwrap();
        assert_eq!(records[0].speedup, 2.0);
        assert_eq!(records[1].speedup, 1.0);
        assert_eq!(summary.median, 1.5);
    }

    #[test]
    fn speedups_antisymmetric() {
        let a = mk_run(&[(1, 3), (2, 7), (3, 11)]);
        let b = mk_run(&[(1, 5), (2, 2), (3, 11)]);
        let (fwd, _) = speedups(&a, &b).unwrap();
        let (rev, _) = speedups(&b, &a).unwrap();
        for (f, r) in fwd.iter().zip(&rev) {
            assert!((f.speedup * r.speedup - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn speedups_id_mismatch_rejected() {
        let a = mk_run(&[(1, 10)]);
        let b = mk_run(&[(2, 10)]);
        assert!(matches!(speedups(&a, &b), Err(MetricsError::IdMismatch(1))));
        let c = mk_run(&[(1, 10), (2, 10)]);
        assert!(speedups(&a, &c).is_err());
    }

    #[test]
    fn bin_examples() {
        assert_eq!(bin(5, 50 * BYTES_PER_MB), 1);
        assert_eq!(bin(11, 50 * BYTES_PER_MB), 2);
        assert_eq!(bin(100, 1000 * BYTES_PER_MB), 4);
        assert_eq!(bin(3, 200 * BYTES_PER_MB), 3);
        // Boundaries are inclusive on the small side.
        assert_eq!(bin(10, 100 * BYTES_PER_MB), 1);
    }

    #[test]
    fn percentile_matches_bruteforce_oracle() {
        for n in 1..=100usize {
            let sorted: Vec<f64> = (0..n).map(|i| i as f64).collect();
            for p in [0.0, 10.0, 50.0, 90.0, 99.0, 100.0] {
                let rank = ((p / 100.0 * n as f64).ceil() as usize).max(1);
                assert_eq!(percentile_nearest_rank(&sorted, p), sorted[rank - 1]);
            }
        }
    }

    #[test]
    fn deviation_examples() {
        // FCTs {1, 3}: mean 2, population sigma 1, normalized 0.5.
        assert_eq!(normalized_deviation(&[1.0, 3.0]), 0.5);
        assert_eq!(normalized_deviation(&[5.0, 5.0, 5.0]), 0.0);
        // Scale invariance.
        let base = normalized_deviation(&[1.0, 2.0, 7.0]);
        let scaled = normalized_deviation(&[10.0, 20.0, 70.0]);
        assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn out_of_sync_splits_by_equal_length() {
        let mut run = mk_run(&[(1, 10)]);
        run.coflows[0].flows = vec![(0, 5, 2), (1, 5, 6)];
        let stats = out_of_sync(&run);
        assert_eq!(stats.equal_length.len(), 1);
        assert_eq!(stats.equal_length[0].1, 0.5);
        assert!(stats.unequal_length.is_empty());

        run.coflows[0].flows = vec![(0, 5, 4), (1, 9, 4)];
        let stats = out_of_sync(&run);
        assert_eq!(stats.unequal_length, vec![(1, 0.0)]);
    }

    #[test]
    fn out_of_sync_excludes_single_flow() {
        let run = mk_run(&[(1, 10)]);
        let stats = out_of_sync(&run);
        assert!(stats.equal_length.is_empty() && stats.unequal_length.is_empty());
    }

    #[test]
    fn jct_examples() {
        assert_eq!(jct_speedup(5.0, 0.0), 1.0);
        assert_eq!(jct_speedup(5.0, 1.0), 5.0);
        assert!((jct_speedup(2.0, 0.5) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_points_monotone() {
        let points = cdf_points(&[0.3, 0.1, 0.2, 0.2]);
        assert_eq!(points.len(), 4);
        assert_eq!(points.last().unwrap().1, 1.0);
        for w in points.windows(2) {
            assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        }
        assert_eq!(cdf_at(&[0.3, 0.1, 0.2], 0.2), 2.0 / 3.0);
    }
}
