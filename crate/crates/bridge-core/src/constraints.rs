//! Calibration-agnostic relative-dependency (R_D) constraints.
//!
//! Feature samples pooled over training operations are reduced to three maps
//! per event: control-time R_DΔ per dependent device pair, control-burst R_Dμ
//! per device, and control-frequency R_DϜ per device. The time and burst
//! constraints are coefficient-of-variation measures adjusted by the degree
//! of dependency ε (how exclusively a pair depends) and the degree of
//! dominance λ (how common the modal burst size is); being ratios of
//! deviation to mean, they are invariant when a setpoint change rescales the
//! raw samples.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::deps::{self, DependencyGraph};
use crate::math;
use crate::trace::{ProcessControlOperation, Tag};

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintError {
    /// Fewer than two samples: a deviation is meaningless.
    InsufficientData { have: usize },
    /// Mean of the samples is zero; the ratio is undefined.
    DegenerateData,
    /// The destination device has no observed incoming dependency.
    NoDependency { dst: Tag },
    EmptyBursts,
    ZeroTotal,
    CountExceedsTotal { count: usize, total: usize },
}

impl fmt::Display for ConstraintError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintError::InsufficientData { have } => {
                write!(f, "need at least 2 samples, have {have}")
            }
            ConstraintError::DegenerateData => f.write_str("sample mean is zero"),
            ConstraintError::NoDependency { dst } => {
                write!(f, "no dependency observed into {dst:?}")
            }
            ConstraintError::EmptyBursts => f.write_str("empty burst list"),
            ConstraintError::ZeroTotal => f.write_str("operation has zero commands"),
            ConstraintError::CountExceedsTotal { count, total } => {
                write!(f, "count {count} exceeds total {total}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ConstraintError {}

/// ε(i,j): the fraction of j's dependency occurrences that come from i.
pub fn degree_of_dependency(
    graph: &DependencyGraph,
    src: &str,
    dst: &str,
) -> Result<f64, ConstraintError> {
    let total = graph.in_occurrences(dst);
    if total == 0 {
        return Err(ConstraintError::NoDependency { dst: Tag::from(dst) });
    }
    Ok(graph.occurrence_count(src, dst) as f64 / total as f64)
}

/// λ(s): the fraction of bursts that have size s.
pub fn degree_of_dominance(bursts: &[usize], size: usize) -> Result<f64, ConstraintError> {
    if bursts.is_empty() {
        return Err(ConstraintError::EmptyBursts);
    }
    let hits = bursts.iter().filter(|&&b| b == size).count();
    Ok(hits as f64 / bursts.len() as f64)
}

/// The modal burst size: highest count, smallest size on ties.
pub fn modal_burst_size(bursts: &[usize]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &b in bursts {
        *counts.entry(b).or_default() += 1;
    }
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(size, _)| size)
}

/// R_DΔ = (Deviation(samples) + ε) / Mean(samples), population deviation.
pub fn rd_delta(samples: &[f64], epsilon: f64) -> Result<f64, ConstraintError> {
    cv_with_adjustment(samples, epsilon)
}

/// R_Dμ = (Deviation(bursts) + λ) / Mean(bursts) over burst-size samples.
pub fn rd_mu(bursts: &[f64], lambda: f64) -> Result<f64, ConstraintError> {
    cv_with_adjustment(bursts, lambda)
}

fn cv_with_adjustment(samples: &[f64], adjustment: f64) -> Result<f64, ConstraintError> {
    if samples.len() < 2 {
        return Err(ConstraintError::InsufficientData { have: samples.len() });
    }
    let mean = math::mean(samples);
    if mean == 0.0 {
        return Err(ConstraintError::DegenerateData);
    }
    Ok((math::pop_std(samples) + adjustment) / mean)
}

/// R_DϜ = count / total for one operation.
pub fn rd_freq(count: usize, total: usize) -> Result<f64, ConstraintError> {
    if total == 0 {
        return Err(ConstraintError::ZeroTotal);
    }
    if count > total {
        return Err(ConstraintError::CountExceedsTotal { count, total });
    }
    Ok(count as f64 / total as f64)
}

/// How ε is sourced when building a model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EpsilonMode {
    /// From the event-scoped dependency graph (the normal case).
    #[default]
    FromGraph,
    /// Forced to zero: pure coefficient of variation, exactly scale-free.
    Zero,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModelOptions {
    pub epsilon: EpsilonMode,
}

/// Control-time constraint for one dependent pair of one event.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeConstraint {
    pub rd: f64,
    /// Historical mean interval in scan cycles; the monitor normalizes
    /// observed intervals by this.
    pub mean_interval: f64,
    pub epsilon: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BurstConstraint {
    pub rd: f64,
    pub mean_burst: f64,
    pub lambda: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FreqConstraint {
    /// Mean of per-operation write ratios, over operations in which the
    /// device was written at all (so replaying a training operation can
    /// never exceed a constraint merely because the device is sometimes
    /// idle).
    pub rd: f64,
    pub operations: usize,
}

/// Learned constraints for one event.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventConstraints {
    pub control_time: BTreeMap<(Tag, Tag), TimeConstraint>,
    pub control_burst: BTreeMap<Tag, BurstConstraint>,
    pub control_freq: BTreeMap<Tag, FreqConstraint>,
    /// Pairs and devices seen but with too few samples to model. These never
    /// fire alarms.
    pub unmodeled_pairs: Vec<(Tag, Tag)>,
    pub unmodeled_bursts: Vec<Tag>,
    /// Number of training operations behind this event's constraints.
    pub operations: usize,
}

/// The full constraint model: per-event maps plus provenance.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintModel {
    pub events: BTreeMap<String, EventConstraints>,
    pub total_operations: usize,
}

impl ConstraintModel {
    pub fn event(&self, event: &str) -> Option<&EventConstraints> {
        self.events.get(event)
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Build a constraint model from training operations. Samples are pooled per
/// event across operations before the coefficient of variation is taken;
/// pairs or devices with fewer than two samples are recorded as unmodeled.
pub fn build_constraint_model(
    ops: &[ProcessControlOperation],
    options: &ModelOptions,
) -> ConstraintModel {
    let mut by_event: BTreeMap<&str, Vec<&ProcessControlOperation>> = BTreeMap::new();
    for op in ops {
        by_event.entry(op.event.as_str()).or_default().push(op);
    }

    let mut model = ConstraintModel { events: BTreeMap::new(), total_operations: ops.len() };

    for (event, event_ops) in by_event {
        let mut intervals: BTreeMap<(Tag, Tag), Vec<f64>> = BTreeMap::new();
        let mut bursts: BTreeMap<Tag, Vec<usize>> = BTreeMap::new();
        let mut ratios: BTreeMap<Tag, Vec<f64>> = BTreeMap::new();
        let owned: Vec<ProcessControlOperation> =
            event_ops.iter().map(|&op| op.clone()).collect();
        let graph = deps::build_graph(&owned);

        for op in &owned {
            let features = deps::feature_set(op);
            for (pair, samples) in features.intervals {
                intervals.entry(pair).or_default().extend(samples);
            }
            for (tag, sizes) in features.bursts {
                bursts.entry(tag).or_default().extend(sizes);
            }
            for (tag, count) in features.freq {
                if let Ok(ratio) = rd_freq(count, features.op_len) {
                    ratios.entry(tag).or_default().push(ratio);
                }
            }
        }

        let mut constraints = EventConstraints {
            operations: owned.len(),
            ..EventConstraints::default()
        };

        for (pair, samples) in intervals {
            let epsilon = match options.epsilon {
                EpsilonMode::Zero => 0.0,
                EpsilonMode::FromGraph => {
                    degree_of_dependency(&graph, &pair.0, &pair.1).unwrap_or(0.0)
                }
            };
            match rd_delta(&samples, epsilon) {
                Ok(rd) => {
                    constraints.control_time.insert(
                        pair,
                        TimeConstraint {
                            rd,
                            mean_interval: math::mean(&samples),
                            epsilon,
                            samples: samples.len(),
                        },
                    );
                }
                Err(_) => constraints.unmodeled_pairs.push(pair),
            }
        }

        for (tag, sizes) in bursts {
            let as_f64: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
            let lambda = modal_burst_size(&sizes)
                .and_then(|modal| degree_of_dominance(&sizes, modal).ok())
                .unwrap_or(0.0);
            match rd_mu(&as_f64, lambda) {
                Ok(rd) => {
                    constraints.control_burst.insert(
                        tag,
                        BurstConstraint {
                            rd,
                            mean_burst: math::mean(&as_f64),
                            lambda,
                            samples: sizes.len(),
                        },
                    );
                }
                Err(_) => constraints.unmodeled_bursts.push(tag),
            }
        }

        for (tag, rs) in ratios {
            constraints
                .control_freq
                .insert(tag, FreqConstraint { rd: math::mean(&rs), operations: rs.len() });
        }

        model.events.insert(String::from(event), constraints);
    }

    model
}

/// One constraint identified across models.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintKey {
    pub event: String,
    pub kind: ConstraintKind,
    pub src: Tag,
    /// Empty for burst and frequency constraints.
    pub dst: Tag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConstraintKind {
    ControlTime,
    ControlBurst,
    ControlFreq,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DispersionEntry {
    pub key: ConstraintKey,
    pub mean: f64,
    pub sd: f64,
}

/// Per-constraint mean and standard deviation of R_D across models trained on
/// different calibrations of the same scenario.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DispersionReport {
    /// Constraints present in every model.
    pub entries: Vec<DispersionEntry>,
    /// Constraints missing from at least one model; reported, not aggregated.
    pub missing_from_some: Vec<ConstraintKey>,
}

fn model_values(model: &ConstraintModel) -> BTreeMap<ConstraintKey, f64> {
    let mut values = BTreeMap::new();
    for (event, ec) in &model.events {
        for ((src, dst), c) in &ec.control_time {
            values.insert(
                ConstraintKey {
                    event: event.clone(),
                    kind: ConstraintKind::ControlTime,
                    src: src.clone(),
                    dst: dst.clone(),
                },
                c.rd,
            );
        }
        for (tag, c) in &ec.control_burst {
            values.insert(
                ConstraintKey {
                    event: event.clone(),
                    kind: ConstraintKind::ControlBurst,
                    src: tag.clone(),
                    dst: Tag::new(),
                },
                c.rd,
            );
        }
        for (tag, c) in &ec.control_freq {
            values.insert(
                ConstraintKey {
                    event: event.clone(),
                    kind: ConstraintKind::ControlFreq,
                    src: tag.clone(),
                    dst: Tag::new(),
                },
                c.rd,
            );
        }
    }
    values
}

/// Aggregate R_D values across ≥2 models: mean and population SD per
/// constraint key present in all models; keys absent from some models are
/// listed separately.
pub fn dispersion_across_calibrations(models: &[ConstraintModel]) -> DispersionReport {
    let per_model: Vec<BTreeMap<ConstraintKey, f64>> = models.iter().map(model_values).collect();
    let mut all_keys: BTreeMap<ConstraintKey, usize> = BTreeMap::new();
    for values in &per_model {
        for key in values.keys() {
            *all_keys.entry(key.clone()).or_default() += 1;
        }
    }

    let mut report = DispersionReport::default();
    for (key, present) in all_keys {
        if present < models.len() {
            report.missing_from_some.push(key);
            continue;
        }
        let values: Vec<f64> = per_model.iter().map(|m| m[&key]).collect();
        report.entries.push(DispersionEntry {
            key,
            mean: math::mean(&values),
            sd: math::pop_std(&values),
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Command;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn graph_with(occurrences: &[(&str, &str, usize)]) -> DependencyGraph {
        let mut graph = DependencyGraph::default();
        for &(src, dst, n) in occurrences {
            graph.nodes.insert(src.to_string());
            graph.nodes.insert(dst.to_string());
            let edge = graph.edges.entry((src.to_string(), dst.to_string())).or_default();
            for k in 0..n {
                edge.occurrences.push((k as u64, k as u64 + 1));
            }
        }
        graph
    }

    #[test]
    fn epsilon_is_occurrence_ratio() {
        let graph = graph_with(&[("i", "j", 3), ("x", "j", 1)]);
        assert_eq!(degree_of_dependency(&graph, "i", "j").unwrap(), 0.75);
    }

    #[test]
    fn epsilon_single_parent_is_one() {
        let graph = graph_with(&[("i", "j", 4)]);
        assert_eq!(degree_of_dependency(&graph, "i", "j").unwrap(), 1.0);
    }

    #[test]
    fn epsilon_counting_oracle() {
        let graph = graph_with(&[("i", "j", 2), ("x", "j", 2), ("y", "j", 4)]);
        assert_eq!(degree_of_dependency(&graph, "i", "j").unwrap(), 0.25);
    }

    #[test]
    fn epsilon_errors_without_incoming_edges() {
        let graph = graph_with(&[("i", "j", 1)]);
        assert!(matches!(
            degree_of_dependency(&graph, "j", "i"),
            Err(ConstraintError::NoDependency { .. })
        ));
    }

    #[test]
    fn epsilon_sums_to_one_over_parents() {
        let graph = graph_with(&[("a", "j", 2), ("b", "j", 5), ("c", "j", 3)]);
        let sum: f64 = ["a", "b", "c"]
            .iter()
            .map(|src| degree_of_dependency(&graph, src, "j").unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_is_count_ratio() {
        assert_eq!(degree_of_dominance(&[1, 1, 1, 1, 2], 1).unwrap(), 0.8);
    }

    #[test]
    fn lambda_all_equal_is_one() {
        assert_eq!(degree_of_dominance(&[3, 3, 3], 3).unwrap(), 1.0);
    }

    #[test]
    fn lambda_mimicry_bursts() {
        // 2,3,2,3,2,3,3: four of seven bursts are size 3.
        let bursts = [2, 3, 2, 3, 2, 3, 3];
        let lambda = degree_of_dominance(&bursts, 3).unwrap();
        assert!((lambda - 4.0 / 7.0).abs() < 1e-12);
        assert_eq!(modal_burst_size(&bursts), Some(3));
    }

    #[test]
    fn lambda_sums_to_one_over_distinct_sizes() {
        let bursts = [1, 2, 2, 3, 3, 3, 7];
        let mut distinct = bursts.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let sum: f64 =
            distinct.iter().map(|&s| degree_of_dominance(&bursts, s).unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_empty_errors() {
        assert!(degree_of_dominance(&[], 1).is_err());
    }

    #[test]
    fn rd_delta_zero_deviation() {
        assert_eq!(rd_delta(&[70.0, 70.0], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rd_delta_two_interval_case() {
        // Population SD of {70000, 19000} is 25500, mean 44500.
        let rd = rd_delta(&[70000.0, 19000.0], 0.0).unwrap();
        assert!((rd - 25500.0 / 44500.0).abs() < 1e-12);
    }

    #[test]
    fn rd_delta_needs_two_samples() {
        assert!(matches!(
            rd_delta(&[70.0], 0.0),
            Err(ConstraintError::InsufficientData { have: 1 })
        ));
    }

    #[test]
    fn rd_delta_zero_mean_errors() {
        assert!(matches!(rd_delta(&[0.0, 0.0], 0.0), Err(ConstraintError::DegenerateData)));
    }

    #[test]
    fn rd_mu_all_ones_with_full_dominance() {
        assert_eq!(rd_mu(&[1.0, 1.0, 1.0, 1.0], 1.0).unwrap(), 1.0);
    }

    #[test]
    fn rd_mu_hand_case() {
        // SD of {2,4} is 1, mean 3, plus λ=0.5.
        assert_eq!(rd_mu(&[2.0, 4.0], 0.5).unwrap(), 0.5);
    }

    #[test]
    fn rd_freq_examples() {
        assert_eq!(rd_freq(6, 24).unwrap(), 0.25);
        assert_eq!(rd_freq(0, 10).unwrap(), 0.0);
        assert_eq!(rd_freq(10, 10).unwrap(), 1.0);
        assert!(rd_freq(1, 0).is_err());
        assert!(rd_freq(5, 4).is_err());
    }

    #[test]
    fn rd_freq_invariant_under_replication() {
        let single = rd_freq(6, 24).unwrap();
        for k in 2..5 {
            assert_eq!(rd_freq(6 * k, 24 * k).unwrap(), single);
        }
    }

    #[test]
    fn scale_invariance_exact_for_powers_of_two() {
        let samples = vec![70.0, 71.5, 69.25, 70.5];
        let base = rd_delta(&samples, 0.0).unwrap();
        for c in [2.0, 4.0, 0.5, 256.0] {
            let scaled: Vec<f64> = samples.iter().map(|s| s * c).collect();
            assert_eq!(rd_delta(&scaled, 0.0).unwrap(), base);
        }
    }

    proptest! {
        #[test]
        fn scale_invariance_holds_for_any_positive_factor(
            samples in proptest::collection::vec(1.0f64..1e6, 2..20),
            c in 1e-3f64..1e3,
        ) {
            let base = rd_delta(&samples, 0.0).unwrap();
            let scaled: Vec<f64> = samples.iter().map(|s| s * c).collect();
            let rescaled = rd_delta(&scaled, 0.0).unwrap();
            prop_assert!((base - rescaled).abs() <= 1e-12 * base.max(1.0));
        }

        #[test]
        fn epsilon_perturbation_matches_closed_form(
            samples in proptest::collection::vec(1.0f64..1e6, 2..20),
            c in 1e-2f64..1e2,
            eps in 0.0f64..1.0,
        ) {
            let m = samples.iter().sum::<f64>() / samples.len() as f64;
            let base = rd_delta(&samples, eps).unwrap();
            let scaled: Vec<f64> = samples.iter().map(|s| s * c).collect();
            let rescaled = rd_delta(&scaled, eps).unwrap();
            let predicted = eps * (1.0 / (c * m) - 1.0 / m).abs();
            prop_assert!(((base - rescaled).abs() - predicted).abs() <= 1e-9 * (1.0 + predicted));
        }
    }

    fn training_op(event: &str) -> ProcessControlOperation {
        ProcessControlOperation {
            event: event.to_string(),
            commands: vec![
                Command::write(0, "A", 1.0),
                Command::read(30, "A", 1.0),
                Command::write(70, "B", 1.0),
                Command::write(100, "A", 0.0),
                Command::read(130, "A", 0.0),
                Command::write(170, "B", 0.0),
            ],
        }
    }

    #[test]
    fn model_from_single_operation() {
        let model = build_constraint_model(&[training_op("e")], &ModelOptions::default());
        let ec = model.event("e").unwrap();
        assert_eq!(ec.operations, 1);
        assert_eq!(ec.control_time.len(), 1);
        let tc = &ec.control_time[&("A".to_string(), "B".to_string())];
        assert_eq!(tc.mean_interval, 70.0);
        assert_eq!(tc.epsilon, 1.0);
        // Burst entries exist for both written devices (A has 2 bursts, B 2).
        assert!(ec.control_burst.contains_key("A"));
        assert!(ec.control_burst.contains_key("B"));
        assert!(ec.control_freq.contains_key("A"));
        assert!(ec.control_freq.contains_key("B"));
    }

    #[test]
    fn empty_input_gives_empty_model() {
        let model = build_constraint_model(&[], &ModelOptions::default());
        assert!(model.is_empty());
        assert_eq!(model.total_operations, 0);
    }

    #[test]
    fn pairs_with_single_sample_are_unmodeled() {
        let op = ProcessControlOperation {
            event: "e".to_string(),
            commands: vec![Command::read(0, "S", 0.0), Command::write(5, "B", 1.0)],
        };
        let model = build_constraint_model(&[op], &ModelOptions::default());
        let ec = model.event("e").unwrap();
        assert!(ec.control_time.is_empty());
        assert_eq!(ec.unmodeled_pairs, vec![("S".to_string(), "B".to_string())]);
    }

    #[test]
    fn epsilon_zero_mode_drops_adjustment() {
        let ops = [training_op("e"), training_op("e")];
        let with = build_constraint_model(&ops, &ModelOptions::default());
        let without =
            build_constraint_model(&ops, &ModelOptions { epsilon: EpsilonMode::Zero });
        let key = ("A".to_string(), "B".to_string());
        let rd_with = with.event("e").unwrap().control_time[&key].rd;
        let rd_without = without.event("e").unwrap().control_time[&key].rd;
        assert!(rd_with > rd_without);
        assert_eq!(rd_without, 0.0); // all intervals are 70
    }

    #[test]
    fn dispersion_of_identical_models_is_zero() {
        let model = build_constraint_model(&[training_op("e")], &ModelOptions::default());
        let report = dispersion_across_calibrations(&[model.clone(), model]);
        assert!(!report.entries.is_empty());
        for entry in &report.entries {
            assert_eq!(entry.sd, 0.0);
        }
        assert!(report.missing_from_some.is_empty());
    }

    #[test]
    fn dispersion_two_point() {
        // Hand-built models with R_DΔ 0.4 and 0.6 for the same key.
        let mut m1 = ConstraintModel::default();
        let mut ec1 = EventConstraints::default();
        ec1.control_time.insert(
            ("A".to_string(), "B".to_string()),
            TimeConstraint { rd: 0.4, mean_interval: 10.0, epsilon: 0.0, samples: 2 },
        );
        m1.events.insert("e".to_string(), ec1);
        let mut m2 = ConstraintModel::default();
        let mut ec2 = EventConstraints::default();
        ec2.control_time.insert(
            ("A".to_string(), "B".to_string()),
            TimeConstraint { rd: 0.6, mean_interval: 12.0, epsilon: 0.0, samples: 2 },
        );
        m2.events.insert("e".to_string(), ec2);

        let report = dispersion_across_calibrations(&[m1, m2]);
        assert_eq!(report.entries.len(), 1);
        assert!((report.entries[0].mean - 0.5).abs() < 1e-12);
        assert!((report.entries[0].sd - 0.1).abs() < 1e-12);
    }

    #[test]
    fn dispersion_reports_mismatched_keys() {
        let m1 = build_constraint_model(&[training_op("e")], &ModelOptions::default());
        let m2 = build_constraint_model(&[training_op("other")], &ModelOptions::default());
        let report = dispersion_across_calibrations(&[m1, m2]);
        assert!(report.entries.is_empty());
        assert!(!report.missing_from_some.is_empty());
    }
}
