//! Violation checking of live traces against a learned [`ConstraintModel`],
//! in batch (whole operations) and streaming (record-at-a-time) form.
//!
//! Decision rule, with `tol` defaulting to 1.0:
//!
//! * control time — Δ_OBSERVED = interval / historical mean; anomalous iff
//!   `|Δ_OBSERVED − 1| > R_DΔ · tol`, i.e. the interval may deviate from its
//!   mean by at most the learned variation. The alert's `observed` field
//!   carries the relative deviation `|Δ_OBSERVED − 1|`.
//! * control burst — μ_OBSERVED is signed; anomalous iff
//!   `|μ_OBSERVED| > R_Dμ · tol`.
//! * control frequency — anomalous iff the write ratio exceeds
//!   `R_DϜ · tol` (one-sided, strict).
//!
//! Unmodeled pairs and devices are skipped, never alerted.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::constraints::ConstraintModel;
use crate::deps;
use crate::math;
use crate::trace::{Command, Op, ProcessControlOperation, Tag, TraceRecord, PREAMBLE_EVENT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum AlertKind {
    ControlTime,
    ControlBurst,
    ControlFreq,
}

impl fmt::Display for AlertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlertKind::ControlTime => f.write_str("CONTROL_TIME"),
            AlertKind::ControlBurst => f.write_str("CONTROL_BURST"),
            AlertKind::ControlFreq => f.write_str("CONTROL_FREQ"),
        }
    }
}

/// One constraint violation. `ts` is the scan-cycle index of the triggering
/// WRITE. For control-time alerts `src`/`dst` name the dependent pair; for
/// burst and frequency alerts only `src` is set.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScadaAlert {
    pub ts: u64,
    pub kind: AlertKind,
    pub event: String,
    pub src: Tag,
    pub dst: Option<Tag>,
    pub observed: f64,
    pub constraint: f64,
    /// True for streaming prefix-ratio frequency alerts; only end-of-operation
    /// values are authoritative.
    pub provisional: bool,
}

impl ScadaAlert {
    /// Sort key used to order batch output deterministically.
    fn order_key(&self) -> (u64, AlertKind, &Tag, Option<&Tag>) {
        (self.ts, self.kind, &self.src, self.dst.as_ref())
    }
}

/// Δ_OBSERVED: observed interval normalized by the stored historical mean.
/// Requires `mean_interval > 0` (guaranteed for modeled pairs).
pub fn observed_delta(ts_prev: u64, ts_cur: u64, mean_interval: f64) -> f64 {
    ts_prev.abs_diff(ts_cur) as f64 / mean_interval
}

/// |Δ_OBSERVED − 1|, the relative deviation of the observed interval from the
/// historical mean, computed as |interval − mean| / mean so it shares its
/// rounding with the constraint's deviation/mean ratio and sits exactly on
/// the boundary for samples the constraint was built from.
fn interval_deviation(ts_prev: u64, ts_cur: u64, mean_interval: f64) -> f64 {
    math::abs(ts_prev.abs_diff(ts_cur) as f64 - mean_interval) / mean_interval
}

/// μ_OBSERVED: signed burst-size change normalized by the pair mean. The
/// first burst of a device yields no metric.
pub fn observed_mu(cur_burst: usize, prev_burst: usize) -> f64 {
    let cur = cur_burst as f64;
    let prev = prev_burst as f64;
    (cur - prev) / ((cur + prev) / 2.0)
}

/// Ϝ_OBSERVED: write ratio of one device over the operation window.
pub fn observed_freq(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

/// Batch check of one complete operation against the model. Operations whose
/// event the model does not cover yield no alerts.
pub fn check_operation(
    op: &ProcessControlOperation,
    model: &ConstraintModel,
    tol: f64,
) -> Vec<ScadaAlert> {
    let Some(constraints) = model.event(&op.event) else {
        return Vec::new();
    };
    let mut alerts = Vec::new();

    // Control time: one check per dependency occurrence.
    let rbw = deps::extract_rbw(op);
    let mut writes: BTreeMap<&Tag, Vec<u64>> = BTreeMap::new();
    for cmd in &op.commands {
        if cmd.op == Op::Write {
            writes.entry(&cmd.tag).or_default().push(cmd.ts);
        }
    }
    for dep in &rbw {
        let key = (dep.src.clone(), dep.dst.clone());
        let Some(tc) = constraints.control_time.get(&key) else {
            continue;
        };
        for &(ts_read, ts_write) in &dep.occurrences {
            let anchor = writes
                .get(&dep.src)
                .and_then(|ts_list| ts_list.iter().rev().find(|&&w| w < ts_write).copied())
                .unwrap_or(ts_read);
            let deviation = interval_deviation(anchor, ts_write, tc.mean_interval);
            if deviation > tc.rd * tol {
                alerts.push(ScadaAlert {
                    ts: ts_write,
                    kind: AlertKind::ControlTime,
                    event: op.event.clone(),
                    src: dep.src.clone(),
                    dst: Some(dep.dst.clone()),
                    observed: deviation,
                    constraint: tc.rd,
                    provisional: false,
                });
            }
        }
    }

    // Control burst: adjacent burst pairs per device.
    for (tag, bursts) in bursts_with_ts(&op.commands) {
        let Some(bc) = constraints.control_burst.get(&tag) else {
            continue;
        };
        for pair in bursts.windows(2) {
            let (prev_size, _) = pair[0];
            let (cur_size, cur_ts) = pair[1];
            let mu = observed_mu(cur_size, prev_size);
            if math::abs(mu) > bc.rd * tol {
                alerts.push(ScadaAlert {
                    ts: cur_ts,
                    kind: AlertKind::ControlBurst,
                    event: op.event.clone(),
                    src: tag.clone(),
                    dst: None,
                    observed: mu,
                    constraint: bc.rd,
                    provisional: false,
                });
            }
        }
    }

    // Control frequency: end-of-operation ratio per written device.
    for (tag, (count, total)) in deps::control_frequency(op) {
        let Some(fc) = constraints.control_freq.get(&tag) else {
            continue;
        };
        let ratio = observed_freq(count, total);
        if ratio > fc.rd * tol {
            let last_write = op
                .commands
                .iter()
                .rev()
                .find(|c| c.op == Op::Write && c.tag == tag)
                .map(|c| c.ts)
                .unwrap_or(0);
            alerts.push(ScadaAlert {
                ts: last_write,
                kind: AlertKind::ControlFreq,
                event: op.event.clone(),
                src: tag,
                dst: None,
                observed: ratio,
                constraint: fc.rd,
                provisional: false,
            });
        }
    }

    alerts.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    alerts
}

/// Burst runs per device with the timestamp of each burst's last write.
fn bursts_with_ts(commands: &[Command]) -> BTreeMap<Tag, Vec<(usize, u64)>> {
    let mut bursts: BTreeMap<Tag, Vec<(usize, u64)>> = BTreeMap::new();
    let mut run: Option<(Tag, usize, u64)> = None;
    for cmd in commands {
        match cmd.op {
            Op::Write => match run.take() {
                Some((tag, n, _)) if tag == cmd.tag => run = Some((tag, n + 1, cmd.ts)),
                Some((tag, n, last)) => {
                    bursts.entry(tag).or_default().push((n, last));
                    run = Some((cmd.tag.clone(), 1, cmd.ts));
                }
                None => run = Some((cmd.tag.clone(), 1, cmd.ts)),
            },
            Op::Read => {
                if let Some((tag, n, last)) = run.take() {
                    bursts.entry(tag).or_default().push((n, last));
                }
            }
        }
    }
    if let Some((tag, n, last)) = run {
        bursts.entry(tag).or_default().push((n, last));
    }
    bursts
}

#[derive(Clone, Debug, PartialEq)]
pub enum MonitorError {
    /// The record's timestamp went backwards; the record was skipped and
    /// monitoring continues with the next one.
    OutOfOrder { prev: u64, cur: u64 },
}

impl fmt::Display for MonitorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonitorError::OutOfOrder { prev, cur } => {
                write!(f, "out-of-order record: ts {cur} after {prev}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MonitorError {}

#[derive(Clone, Debug, Default)]
struct DeviceWrites {
    latest: Option<u64>,
    /// Latest write timestamp strictly earlier than `latest`.
    prior: Option<u64>,
}

impl DeviceWrites {
    fn record(&mut self, ts: u64) {
        match self.latest {
            Some(latest) if ts > latest => {
                self.prior = Some(latest);
                self.latest = Some(ts);
            }
            None => self.latest = Some(ts),
            _ => {}
        }
    }

    /// Nearest write strictly before `ts`.
    fn anchor_before(&self, ts: u64) -> Option<u64> {
        match self.latest {
            Some(latest) if latest < ts => Some(latest),
            _ => self.prior.filter(|&p| p < ts),
        }
    }
}

#[derive(Clone, Debug, Default)]
struct OpState {
    event: String,
    reads: deps::ReadTracker,
    writes: BTreeMap<Tag, DeviceWrites>,
    run: Option<(Tag, usize, u64)>,
    closed_bursts: BTreeMap<Tag, (usize, u64)>, // last closed burst per device
    write_counts: BTreeMap<Tag, usize>,
    last_write_ts: BTreeMap<Tag, u64>,
    freq_latched: BTreeMap<Tag, ()>,
    total: usize,
}

/// Online monitor over an ordered record stream. Alerts are emitted as soon
/// as they are decidable: control-time on each dependent WRITE, control-burst
/// when a burst closes, and provisional control-frequency on the prefix ratio
/// (latched per device per operation), with the authoritative frequency
/// alerts at operation close. For any complete trace, the non-provisional
/// alerts equal [`check_operation`] run over the segmented operations.
#[derive(Clone, Debug)]
pub struct StreamMonitor {
    model: ConstraintModel,
    tol: f64,
    last_ts: Option<u64>,
    state: Option<OpState>,
}

impl StreamMonitor {
    pub fn new(model: ConstraintModel, tol: f64) -> Self {
        Self { model, tol, last_ts: None, state: None }
    }

    /// Feed one record; returns the alerts it triggered. Out-of-order records
    /// are reported as errors and skipped.
    pub fn push(&mut self, record: &TraceRecord) -> Result<Vec<ScadaAlert>, MonitorError> {
        let ts = record.ts();
        if let Some(prev) = self.last_ts {
            if ts < prev {
                return Err(MonitorError::OutOfOrder { prev, cur: ts });
            }
        }
        self.last_ts = Some(ts);

        let mut alerts = Vec::new();
        match record {
            TraceRecord::Marker(m) => {
                self.close_operation(&mut alerts);
                self.state = Some(OpState { event: m.event.clone(), ..OpState::default() });
            }
            TraceRecord::Command(cmd) => {
                if let Some(explicit) = &cmd.event {
                    let switch =
                        self.state.as_ref().map(|s| &s.event != explicit).unwrap_or(true);
                    if switch {
                        self.close_operation(&mut alerts);
                        self.state =
                            Some(OpState { event: explicit.clone(), ..OpState::default() });
                    }
                } else if self.state.is_none() {
                    self.state = Some(OpState {
                        event: String::from(PREAMBLE_EVENT),
                        ..OpState::default()
                    });
                }
                self.consume(cmd, &mut alerts);
            }
        }
        Ok(alerts)
    }

    /// Close the trailing operation and return its end-of-operation alerts.
    pub fn finish(&mut self) -> Vec<ScadaAlert> {
        let mut alerts = Vec::new();
        self.close_operation(&mut alerts);
        alerts
    }

    fn consume(&mut self, cmd: &Command, alerts: &mut Vec<ScadaAlert>) {
        let tol = self.tol;
        let Some(state) = self.state.as_mut() else {
            return;
        };
        let constraints = self.model.event(&state.event);
        state.total += 1;

        match cmd.op {
            Op::Read => {
                Self::close_run(state, constraints, tol, alerts);
                state.reads.record(&cmd.tag, cmd.ts);
            }
            Op::Write => {
                // Control time, decidable immediately.
                if let Some((src, ts_read)) = state.reads.governing(cmd.ts) {
                    let src = src.clone();
                    if let Some(tc) = constraints
                        .and_then(|c| c.control_time.get(&(src.clone(), cmd.tag.clone())))
                    {
                        let anchor = state
                            .writes
                            .get(&src)
                            .and_then(|w| w.anchor_before(cmd.ts))
                            .unwrap_or(ts_read);
                        let deviation = interval_deviation(anchor, cmd.ts, tc.mean_interval);
                        if deviation > tc.rd * tol {
                            alerts.push(ScadaAlert {
                                ts: cmd.ts,
                                kind: AlertKind::ControlTime,
                                event: state.event.clone(),
                                src,
                                dst: Some(cmd.tag.clone()),
                                observed: deviation,
                                constraint: tc.rd,
                                provisional: false,
                            });
                        }
                    }
                }

                // Burst run bookkeeping.
                match state.run.take() {
                    Some((tag, n, _)) if tag == cmd.tag => {
                        state.run = Some((tag, n + 1, cmd.ts));
                    }
                    other => {
                        if let Some((tag, n, last)) = other {
                            Self::close_burst(state, constraints, tol, tag, n, last, alerts);
                        }
                        state.run = Some((cmd.tag.clone(), 1, cmd.ts));
                    }
                }

                state.writes.entry(cmd.tag.clone()).or_default().record(cmd.ts);
                *state.write_counts.entry(cmd.tag.clone()).or_default() += 1;
                state.last_write_ts.insert(cmd.tag.clone(), cmd.ts);

                // Provisional frequency over the prefix, latched per device.
                if let Some(fc) = constraints.and_then(|c| c.control_freq.get(&cmd.tag)) {
                    let ratio =
                        observed_freq(state.write_counts[&cmd.tag], state.total);
                    if ratio > fc.rd * tol && !state.freq_latched.contains_key(&cmd.tag) {
                        state.freq_latched.insert(cmd.tag.clone(), ());
                        alerts.push(ScadaAlert {
                            ts: cmd.ts,
                            kind: AlertKind::ControlFreq,
                            event: state.event.clone(),
                            src: cmd.tag.clone(),
                            dst: None,
                            observed: ratio,
                            constraint: fc.rd,
                            provisional: true,
                        });
                    }
                }
            }
        }
    }

    fn close_run(
        state: &mut OpState,
        constraints: Option<&crate::constraints::EventConstraints>,
        tol: f64,
        alerts: &mut Vec<ScadaAlert>,
    ) {
        if let Some((tag, n, last)) = state.run.take() {
            Self::close_burst(state, constraints, tol, tag, n, last, alerts);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn close_burst(
        state: &mut OpState,
        constraints: Option<&crate::constraints::EventConstraints>,
        tol: f64,
        tag: Tag,
        size: usize,
        last_ts: u64,
        alerts: &mut Vec<ScadaAlert>,
    ) {
        if let Some(&(prev_size, _)) = state.closed_bursts.get(&tag) {
            if let Some(bc) = constraints.and_then(|c| c.control_burst.get(&tag)) {
                let mu = observed_mu(size, prev_size);
                if math::abs(mu) > bc.rd * tol {
                    alerts.push(ScadaAlert {
                        ts: last_ts,
                        kind: AlertKind::ControlBurst,
                        event: state.event.clone(),
                        src: tag.clone(),
                        dst: None,
                        observed: mu,
                        constraint: bc.rd,
                        provisional: false,
                    });
                }
            }
        }
        state.closed_bursts.insert(tag, (size, last_ts));
    }

    fn close_operation(&mut self, alerts: &mut Vec<ScadaAlert>) {
        let tol = self.tol;
        let Some(mut state) = self.state.take() else {
            return;
        };
        let constraints = self.model.event(&state.event);
        Self::close_run(&mut state, constraints, tol, alerts);

        let Some(constraints) = constraints else {
            return;
        };
        for (tag, &count) in &state.write_counts {
            let Some(fc) = constraints.control_freq.get(tag) else {
                continue;
            };
            let ratio = observed_freq(count, state.total);
            if ratio > fc.rd * tol {
                alerts.push(ScadaAlert {
                    ts: state.last_write_ts[tag],
                    kind: AlertKind::ControlFreq,
                    event: state.event.clone(),
                    src: tag.clone(),
                    dst: None,
                    observed: ratio,
                    constraint: fc.rd,
                    provisional: false,
                });
            }
        }
    }
}

/// Run the stream monitor over a complete record slice, separating alerts
/// from per-record errors.
pub fn stream_monitor(
    records: &[TraceRecord],
    model: &ConstraintModel,
    tol: f64,
) -> (Vec<ScadaAlert>, Vec<MonitorError>) {
    let mut monitor = StreamMonitor::new(model.clone(), tol);
    let mut alerts = Vec::new();
    let mut errors = Vec::new();
    for record in records {
        match monitor.push(record) {
            Ok(mut batch) => alerts.append(&mut batch),
            Err(err) => errors.push(err),
        }
    }
    alerts.extend(monitor.finish());
    (alerts, errors)
}
