//! Acceptance gate: ten end-to-end criteria covering replay speedups,
//! ablations, the uncoordinated-baseline gap, flow synchronization,
//! constructed counterexample instances, randomized property suites, the
//! queue-assignment oracle, sensitivity trends and dynamics handling.
//!
//! Each criterion prints exactly one `criterion N PASS/FAIL` line.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coflowsim::metrics::{
    cdf_at, median, out_of_sync, percentile_nearest_rank, speedups,
};
use coflowsim::policy::{
    assign_queue, compute_contention, remaining_length_estimate, requeue_on_dynamics,
    FixedOrderScheduler, SaathScheduler, SaathVariant, Scheduler, UcTcpScheduler,
};
use coflowsim::policy::ClusterState;
use coflowsim::sim::{run, run_comparison, run_with_scheduler, RunResult, Workload};
use coflowsim::synth::{contended, fb_like, synthesize};
use coflowsim::trace::{expand, DynamicsEvent, DynamicsKind};
use coflowsim::types::{
    Coflow, CoflowId, FlowSpec, FlowState, Micros, Origin, PolicyKind, QueueConfig, Schedule,
    SimConfig, BYTES_PER_MB,
};

// ---------------------------------------------------------------------------
// Helpers and shared fixtures
// ---------------------------------------------------------------------------

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion} {verdict}: {detail}");
    assert!(pass, "criterion {criterion} FAIL: {detail}");
}

fn mk_flow(flow_id: u64, coflow_id: CoflowId, src: usize, dst: usize, mb: u64) -> FlowState {
    FlowState::new(FlowSpec {
        flow_id,
        coflow_id,
        src_port: src,
        dst_port: dst,
        size_bytes: mb * BYTES_PER_MB,
    })
}

/// The five replay runs over the large synthetic trace, shared by criteria 1-3.
static REPLAY: OnceLock<HashMap<PolicyKind, RunResult>> = OnceLock::new();

fn replay(policy: PolicyKind) -> &'static RunResult {
    let runs = REPLAY.get_or_init(|| {
        let start = Instant::now();
        let trace = synthesize(&fb_like()).unwrap();
        let workload = Workload::new(trace.port_count, expand(&trace));
        let runs = run_comparison(
            &workload,
            &[
                PolicyKind::Saath,
                PolicyKind::SaathAn,
                PolicyKind::SaathAnPf,
                PolicyKind::Aalo,
                PolicyKind::UcTcp,
            ],
            &SimConfig::default(),
        )
        .unwrap();
        println!(
            "replay fixture: 526 coflows, 150 ports, 5 policies in {:.1}s",
            start.elapsed().as_secs_f64()
        );
        runs.into_iter().collect()
    });
    &runs[&policy]
}

fn median_speedup(baseline: PolicyKind, test: PolicyKind) -> f64 {
    let (_, summary) = speedups(replay(baseline), replay(test)).unwrap();
    summary.median
}

/// The 200-coflow contended trace used by criteria 4 and 9.
static CONTENDED: OnceLock<Workload> = OnceLock::new();

fn contended_workload() -> &'static Workload {
    CONTENDED.get_or_init(|| {
        let trace = synthesize(&contended(200, 7)).unwrap();
        Workload::new(trace.port_count, expand(&trace))
    })
}

fn mean_cct_ms(run: &RunResult) -> f64 {
    run.mean_cct_us() / 1000.0
}

fn median_cct_ms(run: &RunResult) -> f64 {
    let mut ccts: Vec<f64> = run.coflows.iter().map(|c| c.cct_us as f64 / 1000.0).collect();
    ccts.sort_by(f64::total_cmp);
    median(&ccts)
}

// ---------------------------------------------------------------------------
// Criteria 1-3: large-trace replay
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_replay_speedup_band() {
    let (_, summary) = speedups(replay(PolicyKind::Aalo), replay(PolicyKind::Saath)).unwrap();
    let pass = (1.2..=2.0).contains(&summary.median) && summary.p90 >= 2.5;
    report(
        1,
        pass,
        &format!(
            "median speedup over the queue-clocked baseline {:.3} in [1.2, 2.0], P90 {:.3} >= 2.5",
            summary.median, summary.p90
        ),
    );
}

#[test]
fn criterion_02_ablation_ordering() {
    let an = median_speedup(PolicyKind::Aalo, PolicyKind::SaathAn);
    let an_pf = median_speedup(PolicyKind::Aalo, PolicyKind::SaathAnPf);
    let full = median_speedup(PolicyKind::Aalo, PolicyKind::Saath);
    let pass = an >= 1.0 && an < an_pf && an_pf < full;
    report(
        2,
        pass,
        &format!("ablation medians ordered: 1.0 <= {an:.3} (a/n) < {an_pf:.3} (a/n + per-flow) < {full:.3} (full)"),
    );
}

#[test]
fn criterion_03_uncoordinated_gap() {
    let m = median_speedup(PolicyKind::UcTcp, PolicyKind::Saath);
    report(3, m >= 10.0, &format!("median speedup over uncoordinated fair sharing {m:.1} >= 10"));
}

// ---------------------------------------------------------------------------
// Criterion 4: out-of-sync CDF dominance
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_out_of_sync_dominance() {
    let workload = contended_workload();
    let config = SimConfig::default();
    let saath = run(workload, PolicyKind::Saath, &config).unwrap();
    let aalo = run(workload, PolicyKind::Aalo, &config).unwrap();

    let dev = |r: &RunResult| -> Vec<f64> {
        out_of_sync(r).equal_length.iter().map(|&(_, d)| d).collect()
    };
    let (s, a) = (dev(&saath), dev(&aalo));
    assert!(!s.is_empty() && s.len() == a.len());

    // Pointwise dominance at the baseline's deviation deciles.
    let mut a_sorted = a.clone();
    a_sorted.sort_by(f64::total_cmp);
    let mut dominated = true;
    for decile in 1..=9 {
        let x = percentile_nearest_rank(&a_sorted, decile as f64 * 10.0);
        if cdf_at(&s, x) <= cdf_at(&a, x) {
            dominated = false;
        }
    }
    let zero = |v: &[f64]| v.iter().filter(|&&d| d == 0.0).count() as f64 / v.len() as f64;
    let (zs, za) = (zero(&s), zero(&a));
    let pass = dominated && zs > za;
    report(
        4,
        pass,
        &format!(
            "deviation CDF dominates at all 9 deciles ({dominated}), zero-deviation fraction {:.2} > {:.2} ({} equal-length coflows)",
            zs, za, s.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criteria 5-6: constructed ordering counterexamples
// ---------------------------------------------------------------------------

/// Average CCT in units of `t_intervals` intervals under a fixed priority order.
fn avg_cct_t(workload: &Workload, scheduler: &mut dyn Scheduler, t_intervals: f64) -> f64 {
    let result = run_with_scheduler(workload, scheduler, &SimConfig::default()).unwrap();
    let delta_ms = SimConfig::default().delta_us as f64;
    result.mean_cct_us() / delta_ms / t_intervals
}

fn permutations3(ids: [CoflowId; 3]) -> Vec<[CoflowId; 3]> {
    let [a, b, c] = ids;
    vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

#[test]
fn criterion_05_shortest_first_suboptimal() {
    // Three coflows on two sender ports, durations 5t, 6t, 7t with t = 100
    // intervals. The 5t coflow spans both senders (contention 2), the others
    // one each. Bottleneck-shortest-first runs the spanning coflow first and
    // serializes everything; weighting by contention runs the two narrow
    // coflows concurrently instead.
    let t = 100.0;
    let coflows = vec![
        Coflow::new(1, 0, vec![mk_flow(0, 1, 0, 10, 500), mk_flow(1, 1, 1, 11, 500)]),
        Coflow::new(2, 0, vec![mk_flow(2, 2, 0, 12, 600)]),
        Coflow::new(3, 0, vec![mk_flow(3, 3, 1, 13, 700)]),
    ];
    let workload = Workload::new(14, coflows);

    let sjf = avg_cct_t(
        &workload,
        coflowsim::policy::make_scheduler(PolicyKind::Sebf).as_mut(),
        t,
    );
    let lwtf = avg_cct_t(
        &workload,
        coflowsim::policy::make_scheduler(PolicyKind::Lwtf).as_mut(),
        t,
    );
    let exhaustive = permutations3([1, 2, 3])
        .into_iter()
        .map(|order| avg_cct_t(&workload, &mut FixedOrderScheduler::new(&order), t))
        .fold(f64::INFINITY, f64::min);

    let pass = (sjf - 9.3434).abs() < 0.05
        && (lwtf - 8.3434).abs() < 0.05
        && (exhaustive - lwtf).abs() < 0.011
        && lwtf < sjf;
    report(
        5,
        pass,
        &format!(
            "shortest-first avg CCT {sjf:.3}t vs contention-aware {lwtf:.3}t (expected ~9.34t vs ~8.34t); exhaustive optimum {exhaustive:.3}t"
        ),
    );
}

#[test]
fn criterion_06_least_contention_counterexample() {
    // Least-contention-first defers a short spanning coflow behind two long
    // narrow ones; the exhaustive optimum runs the short one first.
    // Durations 1t, 2.5t, 2.5t with t = 200 intervals.
    let t = 200.0;
    let coflows = vec![
        Coflow::new(1, 0, vec![mk_flow(0, 1, 0, 10, 200), mk_flow(1, 1, 1, 11, 200)]),
        Coflow::new(2, 0, vec![mk_flow(2, 2, 0, 12, 500)]),
        Coflow::new(3, 0, vec![mk_flow(3, 3, 1, 13, 500)]),
    ];
    let workload = Workload::new(14, coflows);

    let lcof = avg_cct_t(
        &workload,
        coflowsim::policy::make_scheduler(PolicyKind::Lcof).as_mut(),
        t,
    );
    let optimum = permutations3([1, 2, 3])
        .into_iter()
        .map(|order| avg_cct_t(&workload, &mut FixedOrderScheduler::new(&order), t))
        .fold(f64::INFINITY, f64::min);

    let pass = (lcof - 2.8383).abs() < 0.05 && (optimum - 2.6716).abs() < 0.05 && lcof > optimum;
    report(
        6,
        pass,
        &format!("least-contention avg CCT {lcof:.3}t > exhaustive optimum {optimum:.3}t (expected ~2.83t vs ~2.66t)"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: randomized property suite, seeds 0..999
// ---------------------------------------------------------------------------

struct Instance {
    workload: Workload,
    config: SimConfig,
}

fn small_config() -> SimConfig {
    let mut config = SimConfig::default();
    config.queues = QueueConfig { count: 4, base_threshold: 2 * BYTES_PER_MB, growth: 4 };
    config
}

fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ports = rng.gen_range(3..=8usize);
    let n = rng.gen_range(2..=6usize);
    let mut flow_id = 0u64;
    let mut coflows = Vec::with_capacity(n);
    for id in 1..=n as u64 {
        let arrival = rng.gen_range(0..=5u64) * 8_000;
        let flows = (0..rng.gen_range(1..=4usize))
            .map(|_| {
                let f = mk_flow(
                    flow_id,
                    id,
                    rng.gen_range(0..ports),
                    rng.gen_range(0..ports),
                    rng.gen_range(1..=30),
                );
                flow_id += 1;
                f
            })
            .collect();
        coflows.push(Coflow::new(id, arrival, flows));
    }
    Instance { workload: Workload::new(ports, coflows), config: small_config() }
}

/// A mid-run scheduler state over the instance's coflows: everything active,
/// random progress, queues consistent with that progress, random deadlines
/// (some already past).
fn mid_run_coflows(instance: &Instance, rng: &mut ChaCha8Rng, now: Micros) -> Vec<Coflow> {
    let thresholds = instance.config.queues.derive_thresholds().unwrap();
    let mut coflows = instance.workload.coflows.clone();
    for c in &mut coflows {
        for f in &mut c.flows {
            f.available_bytes = f.spec.size_bytes;
            // Leave at least one flow unfinished so the coflow stays active.
            f.bytes_sent = rng.gen_range(0..f.spec.size_bytes);
        }
        c.queue = assign_queue(c.max_bytes_sent(), c.width(), &thresholds);
        c.deadline = Some(if rng.gen_bool(0.3) {
            now.saturating_sub(rng.gen_range(0..=now / 2 + 1))
        } else {
            now + rng.gen_range(1..=1_000_000)
        });
        c.arrival = c.arrival.min(now);
    }
    coflows
}

fn schedule_once(
    coflows: &mut Vec<Coflow>,
    instance: &Instance,
    scheduler: &mut dyn Scheduler,
    now: Micros,
) -> (Schedule, Vec<u64>, Vec<u64>) {
    let thresholds = instance.config.queues.derive_thresholds().unwrap();
    let budget = instance.config.interval_budget();
    let ports = instance.workload.port_count;
    let mut active: Vec<usize> = (0..coflows.len()).collect();
    active.sort_by_key(|&ci| (coflows[ci].arrival, coflows[ci].coflow_id));
    let mut state = ClusterState {
        now,
        interval: 0,
        config: &instance.config,
        thresholds: &thresholds,
        coflows,
        active,
        port_count: ports,
        egress: vec![budget; ports],
        ingress: vec![budget; ports],
    };
    let schedule = scheduler.schedule(&mut state);
    let (egress, ingress) = (state.egress.clone(), state.ingress.clone());
    (schedule, egress, ingress)
}

/// All-or-none completeness and equal rate: every coflow with an all-or-none
/// entry has exactly its unfinished flows granted, all at the same rate.
fn check_all_or_none(schedule: &Schedule, coflows: &[Coflow]) -> Result<(), String> {
    let by_id: HashMap<CoflowId, &Coflow> = coflows.iter().map(|c| (c.coflow_id, c)).collect();
    let mut an: HashMap<CoflowId, Vec<(u64, u64)>> = HashMap::new();
    for e in &schedule.entries {
        if e.origin == Origin::AllOrNone {
            an.entry(e.coflow_id).or_default().push((e.flow_id, e.bytes));
        }
    }
    for (cid, entries) in an {
        let c = by_id[&cid];
        let granted: HashSet<u64> = entries.iter().map(|&(f, _)| f).collect();
        let unfinished: HashSet<u64> =
            c.unfinished_flows().map(|f| f.spec.flow_id).collect();
        if granted != unfinished {
            return Err(format!("coflow {cid}: all-or-none grant incomplete"));
        }
        if entries.iter().any(|&(_, b)| b != entries[0].1) {
            return Err(format!("coflow {cid}: unequal all-or-none rates"));
        }
    }
    Ok(())
}

/// Exact integer capacity accounting per port side.
fn check_capacity(
    schedule: &Schedule,
    coflows: &[Coflow],
    ports: usize,
    budget: u64,
    egress_left: &[u64],
    ingress_left: &[u64],
) -> Result<(), String> {
    let flow_port: HashMap<u64, (usize, usize)> = coflows
        .iter()
        .flat_map(|c| c.flows.iter().map(|f| (f.spec.flow_id, (f.spec.src_port, f.spec.dst_port))))
        .collect();
    let mut egress = vec![0u64; ports];
    let mut ingress = vec![0u64; ports];
    for e in &schedule.entries {
        let (src, dst) = flow_port[&e.flow_id];
        egress[src] += e.bytes;
        ingress[dst] += e.bytes;
    }
    for p in 0..ports {
        if egress[p] > budget || ingress[p] > budget {
            return Err(format!("port {p} over budget"));
        }
        if egress[p] + egress_left[p] != budget || ingress[p] + ingress_left[p] != budget {
            return Err(format!("port {p} budget accounting not exact"));
        }
    }
    Ok(())
}

/// Work conservation: any unfinished flow that received nothing sits on a
/// port pair with no leftover budget.
fn check_no_idle(
    schedule: &Schedule,
    coflows: &[Coflow],
    egress_left: &[u64],
    ingress_left: &[u64],
) -> Result<(), String> {
    let granted: HashSet<u64> = schedule.entries.iter().map(|e| e.flow_id).collect();
    for c in coflows {
        for f in c.unfinished_flows() {
            if !granted.contains(&f.spec.flow_id)
                && egress_left[f.spec.src_port].min(ingress_left[f.spec.dst_port]) > 0
            {
                return Err(format!("flow {} idle with budget left", f.spec.flow_id));
            }
        }
    }
    Ok(())
}

/// Consideration order: expired-deadline coflows first by (deadline, arrival,
/// id), then queues in priority order with least contention first.
fn check_order(order: &[CoflowId], coflows: &[Coflow], config: &SimConfig, now: Micros) -> Result<(), String> {
    let active: Vec<usize> = {
        let mut a: Vec<usize> = (0..coflows.len()).collect();
        a.sort_by_key(|&ci| (coflows[ci].arrival, coflows[ci].coflow_id));
        a
    };
    let contention = compute_contention(coflows, &active, config.contention_scope);
    let mut expired: Vec<usize> = Vec::new();
    let mut rest: Vec<usize> = Vec::new();
    for (pos, &ci) in active.iter().enumerate() {
        if coflows[ci].deadline.unwrap() <= now {
            expired.push(pos);
        } else {
            rest.push(pos);
        }
    }
    expired.sort_by_key(|&pos| {
        let c = &coflows[active[pos]];
        (c.deadline.unwrap(), c.arrival, c.coflow_id)
    });
    rest.sort_by_key(|&pos| {
        let c = &coflows[active[pos]];
        (c.queue, contention[pos], c.arrival, c.coflow_id)
    });
    let expected: Vec<CoflowId> = expired
        .into_iter()
        .chain(rest)
        .map(|pos| coflows[active[pos]].coflow_id)
        .collect();
    if order != expected {
        return Err(format!("order {order:?} != expected {expected:?}"));
    }
    Ok(())
}

/// Max-min fair rates by epsilon water filling, independent of the
/// scheduler's own freeze-the-bottleneck algorithm.
fn waterfill_oracle(
    flows: &[(usize, usize)],
    ports: usize,
    budget: u64,
    eps: f64,
) -> Vec<f64> {
    let mut egress = vec![budget as f64; ports];
    let mut ingress = vec![budget as f64; ports];
    let mut rate = vec![0f64; flows.len()];
    let mut frozen = vec![false; flows.len()];
    while frozen.iter().any(|&f| !f) {
        // Grow every unfrozen flow by eps, freezing flows on saturated sides.
        for (i, &(src, dst)) in flows.iter().enumerate() {
            if frozen[i] && rate[i] > 0.0 {
                continue;
            }
            if !frozen[i] {
                if egress[src] < eps || ingress[dst] < eps {
                    frozen[i] = true;
                } else {
                    rate[i] += eps;
                    egress[src] -= eps;
                    ingress[dst] -= eps;
                }
            }
        }
    }
    rate
}

fn check_uc_tcp_waterfill(instance: &Instance, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let total_flows: usize = instance.workload.coflows.iter().map(|c| c.flows.len()).sum();
    if total_flows > 6 {
        return Ok(());
    }
    let mut coflows = mid_run_coflows(instance, rng, 80_000);
    let mut scheduler = UcTcpScheduler::default();
    let (schedule, _, _) = schedule_once(&mut coflows, instance, &mut scheduler, 80_000);

    let flows: Vec<(u64, usize, usize)> = {
        let mut active: Vec<usize> = (0..coflows.len()).collect();
        active.sort_by_key(|&ci| (coflows[ci].arrival, coflows[ci].coflow_id));
        active
            .iter()
            .flat_map(|&ci| {
                coflows[ci]
                    .unfinished_flows()
                    .map(|f| (f.spec.flow_id, f.spec.src_port, f.spec.dst_port))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let budget = instance.config.interval_budget();
    let eps = 64.0;
    let oracle = waterfill_oracle(
        &flows.iter().map(|&(_, s, d)| (s, d)).collect::<Vec<_>>(),
        instance.workload.port_count,
        budget,
        eps,
    );
    let granted: HashMap<u64, u64> = schedule.entries.iter().map(|e| (e.flow_id, e.bytes)).collect();
    let tolerance = eps * (2 * instance.workload.port_count) as f64 + 1.0;
    for (i, &(fid, _, _)) in flows.iter().enumerate() {
        let got = granted.get(&fid).copied().unwrap_or(0) as f64;
        if (got - oracle[i]).abs() > tolerance {
            return Err(format!(
                "flow {fid}: uncoordinated rate {got} differs from water-filling oracle {:.0}",
                oracle[i]
            ));
        }
    }
    Ok(())
}

fn check_instance(seed: u64) -> Result<(), String> {
    let instance = random_instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let now: Micros = 80_000;
    let budget = instance.config.interval_budget();

    // Schedule-level properties on a mid-run snapshot.
    let mut coflows = mid_run_coflows(&instance, &mut rng, now);
    let mut scheduler = SaathScheduler::new(SaathVariant::Full);
    let snapshot = coflows.clone();
    let (schedule, egress_left, ingress_left) =
        schedule_once(&mut coflows, &instance, &mut scheduler, now);
    check_all_or_none(&schedule, &snapshot)?;
    check_capacity(
        &schedule,
        &snapshot,
        instance.workload.port_count,
        budget,
        &egress_left,
        &ingress_left,
    )?;
    check_no_idle(&schedule, &snapshot, &egress_left, &ingress_left)?;
    check_order(scheduler.last_order(), &snapshot, &instance.config, now)?;

    // Engine-level properties on the full run.
    let a = run(&instance.workload, PolicyKind::Saath, &instance.config)
        .map_err(|e| e.to_string())?;
    let b = run(&instance.workload, PolicyKind::Saath, &instance.config)
        .map_err(|e| e.to_string())?;
    if format!("{a:?}") != format!("{b:?}") {
        return Err("two identical runs differ".into());
    }
    let sent: u64 = a.utilization.iter().map(|u| u.bytes).sum();
    let total: u64 = instance.workload.coflows.iter().map(|c| c.total_size()).sum();
    if sent != total {
        return Err(format!("byte conservation violated: sent {sent} != size {total}"));
    }
    for c in &a.coflows {
        for w in c.queue_transitions.windows(2) {
            if w[1].1 < w[0].1 {
                return Err(format!(
                    "coflow {}: queue moved up without dynamics",
                    c.coflow_id
                ));
            }
        }
    }

    check_uc_tcp_waterfill(&instance, &mut rng)?;
    Ok(())
}

#[test]
fn criterion_07_property_suite() {
    let mut failures = Vec::new();
    for seed in 0..1000u64 {
        if let Err(msg) = check_instance(seed) {
            failures.push(format!("seed {seed}: {msg}"));
        }
    }
    let pass = failures.is_empty();
    report(
        7,
        pass,
        &format!(
            "grant/capacity/work-conservation/order/conservation/determinism/fairness properties on 1000 instances, {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: queue-assignment oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_queue_assignment_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0u32;
    for _ in 0..10_000 {
        let k = rng.gen_range(1..=8usize);
        let s = rng.gen_range(1..=20 * BYTES_PER_MB);
        let e = rng.gen_range(2..=10u64);
        let m = rng.gen_range(0..=50 * BYTES_PER_MB);
        let n = rng.gen_range(1..=100u64);
        let thresholds = QueueConfig { count: k, base_threshold: s, growth: e }
            .derive_thresholds()
            .unwrap();
        // Brute force: smallest q < K-1 with m*N <= S*E^q, else the last queue.
        let load = m as u128 * n as u128;
        let mut expected = k - 1;
        for q in 0..k.saturating_sub(1) {
            let hi = s as u128 * (e as u128).pow(q as u32);
            if load <= hi {
                expected = q;
                break;
            }
        }
        if assign_queue(m, n, &thresholds) != expected {
            mismatches += 1;
        }
    }
    report(
        8,
        mismatches == 0,
        &format!("queue assignment matches brute-force scan on 10000 random tuples, {mismatches} mismatches"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: sensitivity trends
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_sensitivity_trends() {
    let workload = contended_workload();

    // (a) Mean CCT non-decreasing in the interval length for both policies.
    let mut delta_ok = true;
    for policy in [PolicyKind::Saath, PolicyKind::Aalo] {
        let mut prev = 0.0;
        for delta_ms in [1u64, 2, 4, 8, 16, 32] {
            let mut config = SimConfig::default();
            config.delta_us = delta_ms * 1000;
            let mean = mean_cct_ms(&run(workload, policy, &config).unwrap());
            if mean < prev {
                delta_ok = false;
            }
            prev = mean;
        }
    }

    // (b) Median speedup non-decreasing as arrivals compress 1x -> 4x.
    let mut speedup_prev = 0.0;
    let mut arrival_ok = true;
    let mut speedups_seen = Vec::new();
    for scale in [1.0, 2.0, 4.0] {
        let mut config = SimConfig::default();
        config.arrival_scale = scale;
        let saath = run(workload, PolicyKind::Saath, &config).unwrap();
        let aalo = run(workload, PolicyKind::Aalo, &config).unwrap();
        let (_, summary) = speedups(&aalo, &saath).unwrap();
        if summary.median < speedup_prev {
            arrival_ok = false;
        }
        speedup_prev = summary.median;
        speedups_seen.push(summary.median);
    }

    // (c) Median CCT insensitive to the starvation deadline factor.
    let mut medians = Vec::new();
    for d in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let mut config = SimConfig::default();
        config.deadline_factor = d;
        medians.push(median_cct_ms(&run(workload, PolicyKind::Saath, &config).unwrap()));
    }
    let spread = medians.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        / medians.iter().cloned().fold(f64::INFINITY, f64::min)
        - 1.0;
    let deadline_ok = spread < 0.10;

    let pass = delta_ok && arrival_ok && deadline_ok;
    report(
        9,
        pass,
        &format!(
            "mean CCT non-decreasing in interval length ({delta_ok}), speedup non-decreasing in arrival scale {speedups_seen:?} ({arrival_ok}), median CCT spread across deadline factors {:.1}% < 10% ({deadline_ok})",
            spread * 100.0
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 10: dynamics requeue
// ---------------------------------------------------------------------------

fn dynamics_workload() -> (Workload, SimConfig) {
    // One wide coflow with two short flows (finish early), one long flow that
    // is restarted, and one long flow that keeps its progress; plus a
    // single-flow competitor contending for the restarted flow's ports.
    let coflows = vec![
        Coflow::new(
            1,
            0,
            vec![
                mk_flow(0, 1, 0, 10, 2),
                mk_flow(1, 1, 1, 11, 2),
                mk_flow(2, 1, 2, 12, 30),
                mk_flow(3, 1, 3, 13, 25),
            ],
        ),
        Coflow::new(2, 0, vec![mk_flow(4, 2, 2, 12, 40)]),
    ];
    let mut workload = Workload::new(14, coflows);
    workload.dynamics.push(DynamicsEvent {
        time: 200_000,
        kind: DynamicsKind::FlowRestart { flow_id: 2 },
    });
    let mut config = SimConfig::default();
    config.queues = QueueConfig { count: 4, base_threshold: 4 * BYTES_PER_MB, growth: 4 };
    (workload, config)
}

#[test]
fn criterion_10_dynamics_requeue() {
    // Unit-level: the remaining-length estimate re-assigns a demoted coflow
    // to a higher-priority queue.
    let (workload, config) = dynamics_workload();
    let thresholds = config.queues.derive_thresholds().unwrap();
    let mut probe = workload.coflows[0].clone();
    for f in &mut probe.flows {
        f.available_bytes = f.spec.size_bytes;
    }
    probe.flows[0].bytes_sent = 2 * BYTES_PER_MB;
    probe.flows[0].finish_time = Some(16_000);
    probe.flows[1].bytes_sent = 2 * BYTES_PER_MB;
    probe.flows[1].finish_time = Some(16_000);
    probe.flows[2].bytes_sent = 0; // just restarted
    probe.flows[3].bytes_sent = 20 * BYTES_PER_MB;
    probe.queue = assign_queue(probe.max_bytes_sent(), probe.width(), &thresholds);
    let requeued = requeue_on_dynamics(&probe, &thresholds);
    let estimate = remaining_length_estimate(&probe);
    let unit_ok = matches!(requeued, Some(q) if q < probe.queue) && estimate == Some(2 * BYTES_PER_MB);

    // Engine-level: with requeue the affected coflow moves to a
    // higher-priority queue after the restart and completes no later.
    let with = run(&workload, PolicyKind::Saath, &config).unwrap();
    let mut no_requeue = config.clone();
    no_requeue.requeue_on_dynamics = false;
    let without = run(&workload, PolicyKind::Saath, &no_requeue).unwrap();

    let moved_up = with.coflows[0]
        .queue_transitions
        .windows(2)
        .any(|w| w[1].0 >= 200_000 && w[1].1 < w[0].1);
    let stayed_down = without.coflows[0]
        .queue_transitions
        .windows(2)
        .all(|w| w[1].1 >= w[0].1);
    let cct_with = with.coflows[0].cct_us;
    let cct_without = without.coflows[0].cct_us;

    let pass = unit_ok && moved_up && stayed_down && cct_with <= cct_without;
    report(
        10,
        pass,
        &format!(
            "restart estimate promotes the coflow (queue {:?} -> {:?}), transitions move up only with requeue ({moved_up}/{stayed_down}), CCT with requeue {cct_with}us <= without {cct_without}us",
            probe.queue, requeued
        ),
    );
}
