//! Reader/writer for the public coflow-benchmark trace format, plus the DAG
//! and dynamics sidecar files.
//!
//! Trace format (whitespace separated text):
//!
//! ```text
//! <port_count> <coflow_count>
//! <id> <arrival_ms> <M> <m_1> ... <m_M> <R> <r_1>:<mb_1> ... <r_R>:<mb_R>
//! ```
//!
//! `m_i` are mapper port indices, `r_j:mb_j` are reducer port index and the
//! reducer's total shuffle megabytes. Each reducer's total is split evenly
//! over the mappers, so the coflow expands to M x R flows and flow
//! `(m_i -> r_j)` has `ceil(mb_j * 10^6 / M)` bytes.
//!
//! DAG sidecar: one `<child_id> <parent_id>` pair per line, `#` comments.
//! Dynamics sidecar: one event per line,
//! `<time_ms> STRAGGLER <flow_id> <rate_cap_bps>` |
//! `<time_ms> FLOW_RESTART <flow_id>` | `<time_ms> COORDINATOR_RESTART`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::types::{
    Coflow, CoflowId, ConfigError, FlowId, FlowSpec, FlowState, Micros, Port, BYTES_PER_MB,
    MICROS_PER_MS,
};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: port index {port} out of range (port count {count})")]
    PortOutOfRange { line: usize, port: usize, count: usize },
    #[error("line {line}: coflow id {id} not greater than previous id {prev}")]
    NonMonotoneId { line: usize, id: CoflowId, prev: CoflowId },
    #[error("header declares {declared} coflows but trace has {actual}")]
    CoflowCountMismatch { declared: usize, actual: usize },
    #[error("dependency cycle detected: {}", witness.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(" -> "))]
    DagCycle { witness: Vec<CoflowId> },
    #[error("line {line}: unknown coflow id {id}")]
    UnknownCoflow { line: usize, id: CoflowId },
    #[error("line {line}: unknown flow id {id}")]
    UnknownFlow { line: usize, id: FlowId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceHeader {
    pub port_count: usize,
    pub coflow_count: usize,
}

/// One trace line in its mapper/reducer form. Kept alongside the expanded
/// flows so a parsed trace can be re-emitted bit-compatibly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoflowSpec {
    pub id: CoflowId,
    pub arrival_ms: u64,
    pub mappers: Vec<Port>,
    /// (reducer port, total megabytes for that reducer)
    pub reducers: Vec<(Port, u64)>,
}

impl CoflowSpec {
    pub fn width(&self) -> u64 {
        (self.mappers.len() * self.reducers.len()) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub port_count: usize,
    pub coflows: Vec<CoflowSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsKind {
    Straggler { flow_id: FlowId, rate_cap: u64 },
    FlowRestart { flow_id: FlowId },
    CoordinatorRestart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DynamicsEvent {
    pub time: Micros,
    pub kind: DynamicsKind,
}

fn malformed(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Malformed { line, msg: msg.into() }
}

/// Parse the coflow-benchmark text format. Coflows are sorted by arrival time
/// (stable, so equal arrivals keep trace order).
pub fn parse_trace(text: &str) -> Result<(TraceHeader, Trace), ParseError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (line_no, header_line) = lines.next().ok_or_else(|| malformed(1, "empty trace"))?;
    let mut it = header_line.split_whitespace();
    let port_count: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| malformed(line_no + 1, "header must be '<port_count> <coflow_count>'"))?;
    let coflow_count: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| malformed(line_no + 1, "header must be '<port_count> <coflow_count>'"))?;
    if port_count < 1 || coflow_count < 1 {
        return Err(malformed(line_no + 1, "port and coflow counts must be >= 1"));
    }

    let mut coflows = Vec::with_capacity(coflow_count);
    let mut prev_id: Option<CoflowId> = None;
    for (idx, raw) in lines {
        let line = idx + 1;
        let mut tok = raw.split_whitespace();
        let mut next_num = |what: &str| -> Result<u64, ParseError> {
            tok.next()
                .ok_or_else(|| malformed(line, format!("missing {what}")))?
                .parse::<u64>()
                .map_err(|_| malformed(line, format!("invalid {what}")))
        };

        let id = next_num("coflow id")?;
        if let Some(prev) = prev_id {
            if id <= prev {
                return Err(ParseError::NonMonotoneId { line, id, prev });
            }
        }
        prev_id = Some(id);
        let arrival_ms = next_num("arrival time")?;
        let mapper_count = next_num("mapper count")? as usize;
        if mapper_count == 0 {
            return Err(malformed(line, "coflow has zero mappers"));
        }
        let mut mappers = Vec::with_capacity(mapper_count);
        for _ in 0..mapper_count {
            let p = next_num("mapper port")? as usize;
            if p >= port_count {
                return Err(ParseError::PortOutOfRange { line, port: p, count: port_count });
            }
            mappers.push(p);
        }
        let reducer_count = next_num("reducer count")? as usize;
        if reducer_count == 0 {
            return Err(malformed(line, "coflow has zero reducers"));
        }
        let mut reducers = Vec::with_capacity(reducer_count);
        for _ in 0..reducer_count {
            let pair = tok
                .next()
                .ok_or_else(|| malformed(line, "missing reducer entry"))?;
            let (p, mb) = pair
                .split_once(':')
                .ok_or_else(|| malformed(line, format!("reducer entry '{pair}' is not '<port>:<mb>'")))?;
            let p: usize = p
                .parse()
                .map_err(|_| malformed(line, format!("invalid reducer port in '{pair}'")))?;
            let mb: u64 = mb
                .parse()
                .map_err(|_| malformed(line, format!("invalid reducer megabytes in '{pair}'")))?;
            if p >= port_count {
                return Err(ParseError::PortOutOfRange { line, port: p, count: port_count });
            }
            if mb == 0 {
                return Err(malformed(line, "zero-byte reducer"));
            }
            reducers.push((p, mb));
        }
        if tok.next().is_some() {
            return Err(malformed(line, "trailing tokens"));
        }
        coflows.push(CoflowSpec { id, arrival_ms, mappers, reducers });
    }

    if coflows.len() != coflow_count {
        return Err(ParseError::CoflowCountMismatch {
            declared: coflow_count,
            actual: coflows.len(),
        });
    }
    coflows.sort_by_key(|c| c.arrival_ms);
    let header = TraceHeader { port_count, coflow_count };
    Ok((header, Trace { port_count, coflows }))
}

/// Serialize back to the trace text format; `parse_trace(emit(t))` round-trips.
pub fn emit_trace(trace: &Trace) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", trace.port_count, trace.coflows.len()).unwrap();
    for c in &trace.coflows {
        write!(out, "{} {} {}", c.id, c.arrival_ms, c.mappers.len()).unwrap();
        for m in &c.mappers {
            write!(out, " {m}").unwrap();
        }
        write!(out, " {}", c.reducers.len()).unwrap();
        for (r, mb) in &c.reducers {
            write!(out, " {r}:{mb}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Expand the mapper/reducer description into simulation coflows. Flow ids are
/// assigned globally, mapper-major within each coflow.
pub fn expand(trace: &Trace) -> Vec<Coflow> {
    let mut next_flow_id: FlowId = 0;
    let mut out = Vec::with_capacity(trace.coflows.len());
    for c in &trace.coflows {
        let mapper_count = c.mappers.len() as u64;
        let mut flows = Vec::with_capacity(c.mappers.len() * c.reducers.len());
        for &src in &c.mappers {
            for &(dst, mb) in &c.reducers {
                let size = (mb * BYTES_PER_MB).div_ceil(mapper_count);
                flows.push(FlowState::new(FlowSpec {
                    flow_id: next_flow_id,
                    coflow_id: c.id,
                    src_port: src,
                    dst_port: dst,
                    size_bytes: size,
                }));
                next_flow_id += 1;
            }
        }
        out.push(Coflow::new(c.id, c.arrival_ms * MICROS_PER_MS, flows));
    }
    out
}

/// Divide all arrival times by A (A=4 means coflows arrive 4x faster).
/// Relative order is preserved.
pub fn scale_arrivals(coflows: &mut [Coflow], scale: f64) -> Result<(), ConfigError> {
    if !(scale > 0.0) {
        return Err(ConfigError::InvalidArrivalScale(scale));
    }
    for c in coflows.iter_mut() {
        c.arrival = (c.arrival as f64 / scale).round() as Micros;
    }
    Ok(())
}

/// Parse the DAG sidecar and check acyclicity. Returns child -> parents edges.
pub fn parse_dag(
    text: &str,
    known_ids: &HashSet<CoflowId>,
) -> Result<HashMap<CoflowId, Vec<CoflowId>>, ParseError> {
    let mut parents: HashMap<CoflowId, Vec<CoflowId>> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let mut tok = content.split_whitespace();
        let child: CoflowId = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed(line, "expected '<child> <parent>'"))?;
        let parent: CoflowId = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed(line, "expected '<child> <parent>'"))?;
        if tok.next().is_some() {
            return Err(malformed(line, "trailing tokens"));
        }
        for id in [child, parent] {
            if !known_ids.contains(&id) {
                return Err(ParseError::UnknownCoflow { line, id });
            }
        }
        parents.entry(child).or_default().push(parent);
    }
    if let Some(cycle) = find_cycle(&parents) {
        return Err(ParseError::DagCycle { witness: cycle });
    }
    Ok(parents)
}

/// DFS cycle check over child -> parent edges; returns one witness cycle.
fn find_cycle(parents: &HashMap<CoflowId, Vec<CoflowId>>) -> Option<Vec<CoflowId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        InProgress,
        Done,
    }
    let mut marks: HashMap<CoflowId, Mark> = HashMap::new();
    let mut stack: Vec<CoflowId> = Vec::new();

    fn visit(
        node: CoflowId,
        parents: &HashMap<CoflowId, Vec<CoflowId>>,
        marks: &mut HashMap<CoflowId, Mark>,
        stack: &mut Vec<CoflowId>,
    ) -> Option<Vec<CoflowId>> {
        match marks.get(&node) {
            Some(Mark::Done) => return None,
            Some(Mark::InProgress) => {
                let start = stack.iter().position(|&n| n == node).unwrap();
                let mut witness = stack[start..].to_vec();
                witness.push(node);
                return Some(witness);
            }
            None => {}
        }
        marks.insert(node, Mark::InProgress);
        stack.push(node);
        if let Some(ps) = parents.get(&node) {
            for &p in ps {
                if let Some(w) = visit(p, parents, marks, stack) {
                    return Some(w);
                }
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done);
        None
    }

    let mut nodes: Vec<CoflowId> = parents.keys().copied().collect();
    nodes.sort_unstable();
    for node in nodes {
        if let Some(w) = visit(node, parents, &mut marks, &mut stack) {
            return Some(w);
        }
    }
    None
}

/// Parse the dynamics sidecar. Events come back sorted by time, file order
/// preserved for equal timestamps.
pub fn parse_dynamics(
    text: &str,
    known_flows: &HashSet<FlowId>,
) -> Result<Vec<DynamicsEvent>, ParseError> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let mut tok = content.split_whitespace();
        let time_ms: u64 = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed(line, "expected '<time_ms> <KIND> ...'"))?;
        let kind_tok = tok.next().ok_or_else(|| malformed(line, "missing event kind"))?;
        let kind = match kind_tok {
            "STRAGGLER" => {
                let flow_id: FlowId = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| malformed(line, "STRAGGLER needs '<flow_id> <rate_cap_bps>'"))?;
                let rate_cap: u64 = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| malformed(line, "STRAGGLER needs '<flow_id> <rate_cap_bps>'"))?;
                if !known_flows.contains(&flow_id) {
                    return Err(ParseError::UnknownFlow { line, id: flow_id });
                }
                DynamicsKind::Straggler { flow_id, rate_cap }
            }
            "FLOW_RESTART" => {
                let flow_id: FlowId = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| malformed(line, "FLOW_RESTART needs '<flow_id>'"))?;
                if !known_flows.contains(&flow_id) {
                    return Err(ParseError::UnknownFlow { line, id: flow_id });
                }
                DynamicsKind::FlowRestart { flow_id }
            }
            "COORDINATOR_RESTART" => DynamicsKind::CoordinatorRestart,
            other => return Err(malformed(line, format!("unknown event kind '{other}'"))),
        };
        if tok.next().is_some() {
            return Err(malformed(line, "trailing tokens"));
        }
        events.push(DynamicsEvent { time: time_ms * MICROS_PER_MS, kind });
    }
    events.sort_by_key(|e| e.time);
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_flow_coflow() {
        let (header, trace) = parse_trace("1 1\n1 50 1 0 1 0:10\n").unwrap();
        assert_eq!(header, TraceHeader { port_count: 1, coflow_count: 1 });
        let coflows = expand(&trace);
        assert_eq!(coflows.len(), 1);
        assert_eq!(coflows[0].arrival, 50_000);
        assert_eq!(coflows[0].flows.len(), 1);
        assert_eq!(coflows[0].flows[0].spec.size_bytes, 10 * BYTES_PER_MB);
    }

    #[test]
    fn parse_worked_example_line() {
        // "1 50 1 2 1 4:10" -> one coflow, arrival 50ms, one flow port 2 -> 4, 10 MB
        let (_, trace) = parse_trace("5 1\n1 50 1 2 1 4:10\n").unwrap();
        let coflows = expand(&trace);
        let f = &coflows[0].flows[0];
        assert_eq!((f.spec.src_port, f.spec.dst_port), (2, 4));
        assert_eq!(f.spec.size_bytes, 10 * BYTES_PER_MB);
        assert_eq!(coflows[0].arrival, 50 * 1000);
    }

    #[test]
    fn even_split_over_mappers() {
        // 2 mappers x 2 reducers of 4 MB each -> 4 flows of 2 MB, 8 MB total.
        let (_, trace) = parse_trace("7 1\n7 0 2 0 1 2 2:4 3:4\n").unwrap();
        let coflows = expand(&trace);
        assert_eq!(coflows[0].flows.len(), 4);
        for f in &coflows[0].flows {
            assert_eq!(f.spec.size_bytes, 2 * BYTES_PER_MB);
        }
        assert_eq!(coflows[0].total_size(), 8 * BYTES_PER_MB);
    }

    #[test]
    fn ceil_split_never_loses_bytes() {
        // 3 mappers, reducer of 10 MB: ceil(10^7/3) = 3_333_334 per flow.
        let (_, trace) = parse_trace("4 1\n1 0 3 0 1 2 1 3:10\n").unwrap();
        let coflows = expand(&trace);
        let total: u64 = coflows[0].flows.iter().map(|f| f.spec.size_bytes).sum();
        assert!(total >= 10 * BYTES_PER_MB);
        assert!(total - 10 * BYTES_PER_MB < 3);
    }

    #[test]
    fn port_out_of_range_reports_line() {
        let err = parse_trace("2 1\n1 0 1 5 1 0:1\n").unwrap_err();
        match err {
            ParseError::PortOutOfRange { line, port, count } => {
                assert_eq!((line, port, count), (2, 5, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_monotone_ids_rejected() {
        assert!(matches!(
            parse_trace("2 2\n2 0 1 0 1 1:1\n1 5 1 0 1 1:1\n"),
            Err(ParseError::NonMonotoneId { .. })
        ));
    }

    #[test]
    fn zero_mappers_rejected() {
        assert!(parse_trace("2 1\n1 0 0 1 1:1\n").is_err());
    }

    #[test]
    fn round_trip() {
        let text = "7 2\n1 0 2 0 1 2 2:4 3:4\n9 25 1 6 1 5:100\n";
        let (_, trace) = parse_trace(text).unwrap();
        let emitted = emit_trace(&trace);
        let (_, reparsed) = parse_trace(&emitted).unwrap();
        assert_eq!(trace, reparsed);
    }

    #[test]
    fn scale_arrivals_examples() {
        let mk = |arr_ms: u64| Coflow::new(0, arr_ms * 1000, vec![]);
        let mut cs = vec![mk(0), mk(100)];
        scale_arrivals(&mut cs, 4.0).unwrap();
        assert_eq!(cs[0].arrival, 0);
        assert_eq!(cs[1].arrival, 25_000);

        let mut cs = vec![mk(40)];
        scale_arrivals(&mut cs, 1.0).unwrap();
        assert_eq!(cs[0].arrival, 40_000);
        scale_arrivals(&mut cs, 0.5).unwrap();
        assert_eq!(cs[0].arrival, 80_000);

        assert!(scale_arrivals(&mut cs, 0.0).is_err());
    }

    #[test]
    fn dag_chain_and_cycle() {
        let ids: HashSet<CoflowId> = [1, 2, 3].into_iter().collect();
        let dag = parse_dag("# chain\n3 2\n2 1\n", &ids).unwrap();
        assert_eq!(dag[&3], vec![2]);
        assert_eq!(dag[&2], vec![1]);

        assert!(parse_dag("", &ids).unwrap().is_empty());

        let err = parse_dag("2 1\n1 2\n", &ids).unwrap_err();
        match err {
            ParseError::DagCycle { witness } => {
                assert!(witness.len() >= 3);
                assert_eq!(witness.first(), witness.last());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dag_dangling_parent_rejected() {
        let ids: HashSet<CoflowId> = [1].into_iter().collect();
        assert!(matches!(
            parse_dag("1 99\n", &ids),
            Err(ParseError::UnknownCoflow { id: 99, .. })
        ));
    }

    #[test]
    fn dynamics_parse() {
        let flows: HashSet<FlowId> = [7].into_iter().collect();
        let evs = parse_dynamics(
            "500 COORDINATOR_RESTART\n120 STRAGGLER 7 12500000\n300 FLOW_RESTART 7\n",
            &flows,
        )
        .unwrap();
        assert_eq!(evs.len(), 3);
        assert_eq!(evs[0].time, 120_000);
        assert!(matches!(evs[0].kind, DynamicsKind::Straggler { flow_id: 7, rate_cap: 12_500_000 }));
        assert!(matches!(evs[2].kind, DynamicsKind::CoordinatorRestart));

        assert!(parse_dynamics("1 FLOW_RESTART 9\n", &flows).is_err());
    }
}
