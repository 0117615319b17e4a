//! Read-before-Write dependency extraction and per-operation control-time,
//! control-burst, and control-frequency features.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::trace::{Op, ProcessControlOperation, Tag};

/// A directed dependency: device `dst` was written while `src` was the last
/// device read before it. Each occurrence keeps the governing read's and the
/// dependent write's scan-cycle timestamps.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RbwDependency {
    pub src: Tag,
    pub dst: Tag,
    pub occurrences: Vec<(u64, u64)>,
}

/// All statistical features measured on one process-control operation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSet {
    pub event: alloc::string::String,
    /// Control-time interval samples per dependent pair, in scan cycles.
    pub intervals: BTreeMap<(Tag, Tag), Vec<f64>>,
    /// Burst sizes per device, in occurrence order.
    pub bursts: BTreeMap<Tag, Vec<usize>>,
    /// WRITE count per device.
    pub freq: BTreeMap<Tag, usize>,
    /// Total command count |P(V_k)| (READs + WRITEs).
    pub op_len: usize,
}

/// Merged dependency graph over many operations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<Tag>,
    pub edges: BTreeMap<(Tag, Tag), EdgeData>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeData {
    pub occurrences: Vec<(u64, u64)>,
    pub intervals: Vec<f64>,
}

impl DependencyGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Occurrence count of edge (src, dst), 0 when absent.
    pub fn occurrence_count(&self, src: &str, dst: &str) -> usize {
        self.edges
            .get(&(Tag::from(src), Tag::from(dst)))
            .map(|e| e.occurrences.len())
            .unwrap_or(0)
    }

    /// Total occurrences of all edges into `dst`.
    pub fn in_occurrences(&self, dst: &str) -> usize {
        self.edges
            .iter()
            .filter(|((_, d), _)| d == dst)
            .map(|(_, e)| e.occurrences.len())
            .sum()
    }
}

/// Tracks the most recent READ and, when several share the newest scan
/// cycle, the most recent READ from an earlier cycle. A WRITE's governing
/// read is the latest READ with a strictly smaller timestamp, which may be
/// the earlier-cycle one when reads and the write share a cycle.
#[derive(Clone, Debug, Default)]
pub(crate) struct ReadTracker {
    latest: Option<(Tag, u64)>,
    prior: Option<(Tag, u64)>,
}

impl ReadTracker {
    pub(crate) fn record(&mut self, tag: &Tag, ts: u64) {
        match &self.latest {
            Some((_, latest_ts)) if ts > *latest_ts => {
                self.prior = self.latest.take();
                self.latest = Some((tag.clone(), ts));
            }
            Some(_) => self.latest = Some((tag.clone(), ts)),
            None => self.latest = Some((tag.clone(), ts)),
        }
    }

    pub(crate) fn governing(&self, ts_write: u64) -> Option<(&Tag, u64)> {
        match &self.latest {
            Some((tag, ts)) if *ts < ts_write => Some((tag, *ts)),
            _ => match &self.prior {
                Some((tag, ts)) if *ts < ts_write => Some((tag, *ts)),
                _ => None,
            },
        }
    }
}

/// Extract Read-before-Write dependencies from one operation: for each WRITE,
/// the device of the last READ strictly before it (by timestamp) is the
/// source. WRITEs with no qualifying prior READ contribute nothing.
/// Dependencies never cross operation boundaries.
pub fn extract_rbw(op: &ProcessControlOperation) -> Vec<RbwDependency> {
    let mut by_pair: BTreeMap<(Tag, Tag), Vec<(u64, u64)>> = BTreeMap::new();
    let mut reads = ReadTracker::default();

    for cmd in &op.commands {
        match cmd.op {
            Op::Read => reads.record(&cmd.tag, cmd.ts),
            Op::Write => {
                if let Some((src, ts_read)) = reads.governing(cmd.ts) {
                    by_pair
                        .entry((src.clone(), cmd.tag.clone()))
                        .or_default()
                        .push((ts_read, cmd.ts));
                }
            }
        }
    }

    by_pair
        .into_iter()
        .map(|((src, dst), occurrences)| RbwDependency { src, dst, occurrences })
        .collect()
}

/// Control-time samples Δ(i,j) for each dependency occurrence: the absolute
/// interval between the dependent WRITE on j and the nearest prior WRITE on i.
/// When i was never written before that point (monitor-only devices such as
/// sensors), the governing READ's timestamp is used instead.
pub fn control_time_samples(
    deps: &[RbwDependency],
    op: &ProcessControlOperation,
) -> BTreeMap<(Tag, Tag), Vec<f64>> {
    // Write timestamps per device, in order; commands are time-ordered.
    let mut writes: BTreeMap<&Tag, Vec<u64>> = BTreeMap::new();
    for cmd in &op.commands {
        if cmd.op == Op::Write {
            writes.entry(&cmd.tag).or_default().push(cmd.ts);
        }
    }

    let nearest_prior_write = |tag: &Tag, before: u64| -> Option<u64> {
        writes
            .get(tag)
            .and_then(|ts_list| ts_list.iter().rev().find(|&&ts| ts < before).copied())
    };

    let mut samples: BTreeMap<(Tag, Tag), Vec<f64>> = BTreeMap::new();
    for dep in deps {
        for &(ts_read, ts_write) in &dep.occurrences {
            let anchor = nearest_prior_write(&dep.src, ts_write).unwrap_or(ts_read);
            let delta = ts_write.abs_diff(anchor) as f64;
            samples.entry((dep.src.clone(), dep.dst.clone())).or_default().push(delta);
        }
    }
    samples
}

/// Burst sizes per device: a burst is a maximal run of consecutive WRITEs all
/// addressed to the same device. A READ of any device, or a WRITE to a
/// different device, ends the run.
pub fn burst_sizes(op: &ProcessControlOperation) -> BTreeMap<Tag, Vec<usize>> {
    let mut bursts: BTreeMap<Tag, Vec<usize>> = BTreeMap::new();
    let mut run: Option<(Tag, usize)> = None;

    for cmd in &op.commands {
        match cmd.op {
            Op::Write => match run.take() {
                Some((tag, n)) if tag == cmd.tag => run = Some((tag, n + 1)),
                Some((tag, n)) => {
                    bursts.entry(tag).or_default().push(n);
                    run = Some((cmd.tag.clone(), 1));
                }
                None => run = Some((cmd.tag.clone(), 1)),
            },
            Op::Read => {
                if let Some((tag, n)) = run.take() {
                    bursts.entry(tag).or_default().push(n);
                }
            }
        }
    }
    if let Some((tag, n)) = run {
        bursts.entry(tag).or_default().push(n);
    }
    bursts
}

/// Control frequency per device: (WRITE count on the device, total command
/// count of the operation). Devices with no WRITEs are absent.
pub fn control_frequency(op: &ProcessControlOperation) -> BTreeMap<Tag, (usize, usize)> {
    let total = op.commands.len();
    let mut counts: BTreeMap<Tag, usize> = BTreeMap::new();
    for cmd in &op.commands {
        if cmd.op == Op::Write {
            *counts.entry(cmd.tag.clone()).or_default() += 1;
        }
    }
    counts.into_iter().map(|(tag, n)| (tag, (n, total))).collect()
}

/// All features of one operation in a single pass.
pub fn feature_set(op: &ProcessControlOperation) -> FeatureSet {
    let deps = extract_rbw(op);
    FeatureSet {
        event: op.event.clone(),
        intervals: control_time_samples(&deps, op),
        bursts: burst_sizes(op),
        freq: control_frequency(op).into_iter().map(|(t, (n, _))| (t, n)).collect(),
        op_len: op.commands.len(),
    }
}

/// Union of per-operation dependencies with merged occurrence and interval
/// samples. Nodes are every device that appears as an endpoint.
pub fn build_graph(ops: &[ProcessControlOperation]) -> DependencyGraph {
    let mut graph = DependencyGraph::default();
    for op in ops {
        let deps = extract_rbw(op);
        let intervals = control_time_samples(&deps, op);
        for dep in deps {
            graph.nodes.insert(dep.src.clone());
            graph.nodes.insert(dep.dst.clone());
            let key = (dep.src, dep.dst);
            let edge = graph.edges.entry(key.clone()).or_default();
            edge.occurrences.extend_from_slice(&dep.occurrences);
            if let Some(samples) = intervals.get(&key) {
                edge.intervals.extend_from_slice(samples);
            }
        }
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Command;
    use alloc::string::{String, ToString};
    use alloc::vec;

    fn op_of(commands: Vec<Command>) -> ProcessControlOperation {
        ProcessControlOperation { event: "e".to_string(), commands }
    }

    #[test]
    fn single_read_before_write() {
        let op = op_of(vec![Command::read(10, "A", 1.0), Command::write(17, "B", 1.0)]);
        let deps = extract_rbw(&op);
        assert_eq!(deps.len(), 1);
        assert_eq!(deps[0].src, "A");
        assert_eq!(deps[0].dst, "B");
        assert_eq!(deps[0].occurrences, vec![(10, 17)]);
    }

    #[test]
    fn write_without_prior_read_emits_nothing() {
        let op = op_of(vec![Command::write(5, "B", 1.0)]);
        assert!(extract_rbw(&op).is_empty());
    }

    #[test]
    fn last_read_wins_for_subsequent_writes() {
        let op = op_of(vec![
            Command::read(1, "A", 0.0),
            Command::read(2, "C", 0.0),
            Command::write(3, "B", 1.0),
            Command::write(4, "D", 1.0),
        ]);
        let deps = extract_rbw(&op);
        let pairs: Vec<(&str, &str)> =
            deps.iter().map(|d| (d.src.as_str(), d.dst.as_str())).collect();
        assert_eq!(pairs, vec![("C", "B"), ("C", "D")]);
    }

    #[test]
    fn read_at_same_cycle_as_write_does_not_govern() {
        let op = op_of(vec![Command::read(3, "A", 0.0), Command::write(3, "B", 1.0)]);
        assert!(extract_rbw(&op).is_empty());
    }

    /// Brute-force oracle: for every WRITE, scan all (READ, WRITE) pairs and
    /// pick the READ with the greatest timestamp strictly before the write,
    /// later input position breaking ties.
    fn extract_rbw_oracle(op: &ProcessControlOperation) -> BTreeMap<(Tag, Tag), Vec<(u64, u64)>> {
        let mut out: BTreeMap<(Tag, Tag), Vec<(u64, u64)>> = BTreeMap::new();
        for (wi, w) in op.commands.iter().enumerate() {
            if w.op != Op::Write {
                continue;
            }
            let mut best: Option<(usize, &Command)> = None;
            for (ri, r) in op.commands.iter().enumerate() {
                if ri >= wi || r.op != Op::Read || r.ts >= w.ts {
                    continue;
                }
                best = match best {
                    Some((bi, b)) if (b.ts, bi) >= (r.ts, ri) => Some((bi, b)),
                    _ => Some((ri, r)),
                };
            }
            if let Some((_, r)) = best {
                out.entry((r.tag.clone(), w.tag.clone())).or_default().push((r.ts, w.ts));
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_oracle_on_random_traces() {
        let mut rng = crate::DeterministicRng::seed_from_u64(42);
        let tags = ["A", "B", "C", "D", "E"];
        for _ in 0..300 {
            let n = 1 + (rng.next_u64() % 200) as usize;
            let mut ts = 0u64;
            let mut commands = Vec::with_capacity(n);
            for _ in 0..n {
                ts += rng.next_u64() % 3; // allows ties
                let tag = tags[(rng.next_u64() % tags.len() as u64) as usize];
                let op = if rng.next_u64() % 2 == 0 { Op::Read } else { Op::Write };
                commands.push(Command::new(ts, op, tag, 0.0));
            }
            let op = op_of(commands);
            let got: BTreeMap<(Tag, Tag), Vec<(u64, u64)>> = extract_rbw(&op)
                .into_iter()
                .map(|d| ((d.src, d.dst), d.occurrences))
                .collect();
            assert_eq!(got, extract_rbw_oracle(&op));
        }
    }

    #[test]
    fn interval_uses_prior_write_on_source() {
        let op = op_of(vec![
            Command::write(100, "Valve.0", 1.0),
            Command::read(150, "Valve.0", 1.0),
            Command::write(170, "Valve.2", 1.0),
        ]);
        let deps = extract_rbw(&op);
        let samples = control_time_samples(&deps, &op);
        assert_eq!(samples[&("Valve.0".to_string(), "Valve.2".to_string())], vec![70.0]);
    }

    #[test]
    fn interval_falls_back_to_governing_read_for_unwritten_source() {
        let op = op_of(vec![Command::read(40, "S", 2.0), Command::write(47, "B", 1.0)]);
        let deps = extract_rbw(&op);
        let samples = control_time_samples(&deps, &op);
        assert_eq!(samples[&("S".to_string(), "B".to_string())], vec![7.0]);
    }

    #[test]
    fn repeated_occurrences_accumulate_samples() {
        let op = op_of(vec![
            Command::write(0, "A", 1.0),
            Command::read(30, "A", 1.0),
            Command::write(70, "B", 1.0),
            Command::write(100, "A", 0.0),
            Command::read(130, "A", 0.0),
            Command::write(170, "B", 0.0),
        ]);
        let deps = extract_rbw(&op);
        let samples = control_time_samples(&deps, &op);
        assert_eq!(samples[&("A".to_string(), "B".to_string())], vec![70.0, 70.0]);
    }

    #[test]
    fn bursts_follow_maximal_run_definition() {
        let op = op_of(vec![
            Command::write(0, "A", 1.0),
            Command::write(1, "A", 1.0),
            Command::write(2, "B", 1.0),
            Command::write(3, "A", 1.0),
        ]);
        let bursts = burst_sizes(&op);
        assert_eq!(bursts[&"A".to_string()], vec![2, 1]);
        assert_eq!(bursts[&"B".to_string()], vec![1]);
    }

    #[test]
    fn read_terminates_burst() {
        let op = op_of(vec![
            Command::write(0, "A", 1.0),
            Command::read(1, "L", 0.5),
            Command::write(2, "A", 1.0),
        ]);
        let bursts = burst_sizes(&op);
        assert_eq!(bursts[&"A".to_string()], vec![1, 1]);
    }

    #[test]
    fn no_writes_no_bursts() {
        let op = op_of(vec![Command::read(0, "L", 0.5)]);
        assert!(burst_sizes(&op).is_empty());
    }

    #[test]
    fn burst_sizes_sum_to_write_count() {
        let mut rng = crate::DeterministicRng::seed_from_u64(11);
        let tags = ["A", "B", "C"];
        for _ in 0..200 {
            let n = 1 + (rng.next_u64() % 60) as usize;
            let mut commands = Vec::new();
            for i in 0..n {
                let tag = tags[(rng.next_u64() % 3) as usize];
                let op = if rng.next_u64() % 3 == 0 { Op::Read } else { Op::Write };
                commands.push(Command::new(i as u64, op, tag, 0.0));
            }
            let op = op_of(commands);
            let bursts = burst_sizes(&op);
            for tag in tags {
                let writes =
                    op.commands.iter().filter(|c| c.op == Op::Write && c.tag == tag).count();
                let total: usize =
                    bursts.get(&tag.to_string()).map(|b| b.iter().sum()).unwrap_or(0);
                assert_eq!(total, writes);
            }
        }
    }

    #[test]
    fn frequency_counts_writes_and_total() {
        let op = op_of(vec![
            Command::write(0, "A", 1.0),
            Command::write(1, "B", 1.0),
            Command::write(2, "A", 1.0),
            Command::read(3, "L", 0.0),
        ]);
        let freq = control_frequency(&op);
        assert_eq!(freq[&"A".to_string()], (2, 4));
        assert_eq!(freq[&"B".to_string()], (1, 4));
    }

    #[test]
    fn read_only_operation_has_empty_frequency_map() {
        let op = op_of(vec![Command::read(0, "L", 0.0)]);
        let freq = control_frequency(&op);
        assert!(freq.is_empty());
        assert_eq!(op.len(), 1);
    }

    #[test]
    fn write_counts_never_exceed_operation_length() {
        let op = op_of(vec![
            Command::write(0, "A", 1.0),
            Command::write(1, "A", 1.0),
            Command::write(2, "B", 1.0),
        ]);
        let freq = control_frequency(&op);
        let sum: usize = freq.values().map(|(n, _)| n).sum();
        assert_eq!(sum, 3); // equality: no READs present
    }

    #[test]
    fn graph_merges_operations() {
        let op1 = op_of(vec![Command::read(0, "A", 0.0), Command::write(5, "B", 1.0)]);
        let op2 = op_of(vec![Command::read(10, "A", 0.0), Command::write(12, "B", 0.0)]);
        let graph = build_graph(&[op1, op2]);
        assert_eq!(graph.node_count(), 2);
        assert_eq!(graph.edge_count(), 1);
        assert_eq!(graph.occurrence_count("A", "B"), 2);
    }

    #[test]
    fn identical_inputs_yield_identical_features() {
        let commands = vec![
            Command::read(0, "A", 0.3),
            Command::write(2, "B", 1.0),
            Command::write(3, "B", 2.0),
            Command::read(5, "C", 0.1),
            Command::write(9, "A", 0.0),
        ];
        let a = feature_set(&op_of(commands.clone()));
        let b = feature_set(&op_of(commands));
        assert_eq!(a, b);
    }

    #[test]
    fn feature_set_event_is_preserved() {
        let op = ProcessControlOperation {
            event: String::from("Valve0.open"),
            commands: vec![Command::write(1, "A", 1.0)],
        };
        assert_eq!(feature_set(&op).event, "Valve0.open");
        assert_eq!(feature_set(&op).op_len, 1);
    }
}
