//! On-disk formats.
//!
//! * Execution trace: JSON Lines. The first line is a header record carrying
//!   the scan-cycle rate; event markers are `{"ts", "event"}` objects and
//!   commands are `{"ts", "op", "tag", "value"}` objects with optional
//!   `event`/`session` fields.
//! * Process series: CSV with a `ts,<tag...>` header, one row per second.
//! * Everything else is versioned JSON (`bridge-constraints/1`,
//!   `bridge-pinn/1`, ...) or JSONL for streams (alerts, scored windows,
//!   verdicts).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use bridge_core::constraints::{
    BurstConstraint, ConstraintModel, EventConstraints, FreqConstraint, TimeConstraint,
};
use bridge_core::deps::DependencyGraph;
use bridge_core::itb::{AnomalyEpisode, AnomalyWindow, EvolutionWindow, InertiaMethod, InertiaProfile, Verdict};
use bridge_core::monitor::{AlertKind, ScadaAlert};
use bridge_core::pinn::PinnModel;
use bridge_core::sim::{AttackSpec, Labels, ScenarioConfig, SimOutput};
use bridge_core::trace::{
    Command, EventMarker, EventSet, Op, SeriesFrame, TraceRecord, DEFAULT_SCAN_CYCLES_PER_SECOND,
};

pub const TRACE_VERSION: &str = "bridge-trace/1";
pub const EVENTS_VERSION: &str = "bridge-events/1";
pub const LABELS_VERSION: &str = "bridge-labels/1";
pub const CONSTRAINTS_VERSION: &str = "bridge-constraints/1";
pub const PINN_VERSION: &str = "bridge-pinn/1";
pub const ITB_VERSION: &str = "bridge-itb/1";
pub const GRAPH_VERSION: &str = "bridge-graph/1";

// ── Execution trace (JSONL) ─────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
struct TraceHeader {
    #[serde(rename = "type")]
    kind: String,
    version: String,
    scan_cycles_per_second: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CommandLine {
    ts: u64,
    op: Op,
    tag: String,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    event: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    session: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MarkerLine {
    ts: u64,
    event: String,
}

/// A parsed trace file: the record stream plus its header metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceFile {
    pub records: Vec<TraceRecord>,
    pub scan_cycles_per_second: u64,
}

pub fn write_trace(path: &Path, records: &[TraceRecord], rate: u64) -> Result<()> {
    let file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let header = TraceHeader {
        kind: "header".into(),
        version: TRACE_VERSION.into(),
        scan_cycles_per_second: rate,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for record in records {
        match record {
            TraceRecord::Marker(m) => {
                let line = MarkerLine { ts: m.ts, event: m.event.clone() };
                serde_json::to_writer(&mut out, &line)?;
            }
            TraceRecord::Command(c) => {
                let line = CommandLine {
                    ts: c.ts,
                    op: c.op,
                    tag: c.tag.clone(),
                    value: c.value,
                    event: c.event.clone(),
                    session: c.session.clone(),
                };
                serde_json::to_writer(&mut out, &line)?;
            }
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a JSONL trace. Malformed lines are reported with their line number;
/// timestamps must be non-decreasing.
pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut records = Vec::new();
    let mut rate = DEFAULT_SCAN_CYCLES_PER_SECOND;
    let mut prev_ts: Option<u64> = None;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| anyhow!("{}:{line_no}: malformed JSON: {e}", path.display()))?;
        if value.get("type").and_then(|v| v.as_str()) == Some("header") {
            let header: TraceHeader = serde_json::from_value(value)
                .map_err(|e| anyhow!("{}:{line_no}: malformed header: {e}", path.display()))?;
            rate = header.scan_cycles_per_second;
            continue;
        }
        let record = if value.get("op").is_some() {
            let c: CommandLine = serde_json::from_value(value)
                .map_err(|e| anyhow!("{}:{line_no}: malformed command: {e}", path.display()))?;
            if c.tag.is_empty() {
                bail!("{}:{line_no}: empty device tag", path.display());
            }
            TraceRecord::Command(Command {
                ts: c.ts,
                op: c.op,
                tag: c.tag,
                value: c.value,
                event: c.event,
                session: c.session,
            })
        } else {
            let m: MarkerLine = serde_json::from_value(value)
                .map_err(|e| anyhow!("{}:{line_no}: malformed record: {e}", path.display()))?;
            TraceRecord::Marker(EventMarker { ts: m.ts, event: m.event })
        };
        if let Some(prev) = prev_ts {
            if record.ts() < prev {
                bail!(
                    "{}:{line_no}: ordering error: ts {} decreases from {}",
                    path.display(),
                    record.ts(),
                    prev
                );
            }
        }
        prev_ts = Some(record.ts());
        records.push(record);
    }
    Ok(TraceFile { records, scan_cycles_per_second: rate })
}

// ── Process series (CSV) ────────────────────────────────────────────────────

pub fn write_series(path: &Path, series: &[SeriesFrame]) -> Result<()> {
    let file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let tags: Vec<&String> = match series.first() {
        Some(frame) => frame.values.keys().collect(),
        None => Vec::new(),
    };
    let mut header = vec!["ts".to_string()];
    header.extend(tags.iter().map(|t| t.to_string()));
    writer.write_record(&header)?;
    for frame in series {
        let mut row = vec![format_f64(frame.ts)];
        for tag in &tags {
            let v = frame
                .get(tag)
                .ok_or_else(|| anyhow!("frame at ts {} is missing tag {tag:?}", frame.ts))?;
            row.push(format_f64(v));
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn format_f64(v: f64) -> String {
    let mut buffer = ryu_format(v);
    if buffer.ends_with(".0") {
        buffer.truncate(buffer.len() - 2);
    }
    buffer
}

fn ryu_format(v: f64) -> String {
    // serde_json uses shortest round-trip formatting; reuse it for CSV too.
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

/// Parse a series CSV: `ts,<tag...>` header, numeric rows of matching width,
/// strictly increasing timestamps.
pub fn read_series(path: &Path) -> Result<Vec<SeriesFrame>> {
    let file = fs::File::open(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || &headers[0] != "ts" {
        bail!("{}: first CSV column must be ts", path.display());
    }
    let tags: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();

    let mut series = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line_no = idx + 2; // header is line 1
        let row = row?;
        if row.len() != tags.len() + 1 {
            bail!(
                "{}:{line_no}: ragged row: {} fields, expected {}",
                path.display(),
                row.len(),
                tags.len() + 1
            );
        }
        let ts: f64 = row[0]
            .parse()
            .map_err(|_| anyhow!("{}:{line_no}: non-numeric ts {:?}", path.display(), &row[0]))?;
        let mut frame = SeriesFrame { ts, values: Default::default() };
        for (tag, field) in tags.iter().zip(row.iter().skip(1)) {
            let v: f64 = field.parse().map_err(|_| {
                anyhow!("{}:{line_no}: non-numeric value {field:?} for {tag}", path.display())
            })?;
            frame.values.insert(tag.clone(), v);
        }
        if let Some(prev) = series.last() {
            let prev: &SeriesFrame = prev;
            if ts <= prev.ts {
                bail!(
                    "{}:{line_no}: ordering error: ts {ts} does not increase from {}",
                    path.display(),
                    prev.ts
                );
            }
        }
        series.push(frame);
    }
    Ok(series)
}

// ── Events, labels, scenario, attack ────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct EventsFile {
    version: String,
    events: Vec<bridge_core::trace::EventSpec>,
}

pub fn write_events(path: &Path, events: &EventSet) -> Result<()> {
    let file = EventsFile { version: EVENTS_VERSION.into(), events: events.events.clone() };
    write_json_pretty(path, &file)
}

pub fn read_events(path: &Path) -> Result<EventSet> {
    let file: EventsFile = read_json(path)?;
    EventSet::new(file.events).map_err(|e| anyhow!("{}: {e}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct LabelsFile {
    version: String,
    #[serde(flatten)]
    labels: Labels,
}

pub fn write_labels(path: &Path, labels: &Labels) -> Result<()> {
    write_json_pretty(path, &LabelsFile { version: LABELS_VERSION.into(), labels: labels.clone() })
}

pub fn read_labels(path: &Path) -> Result<Labels> {
    Ok(read_json::<LabelsFile>(path)?.labels)
}

pub fn read_scenario(path: &Path) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = read_json(path)?;
    cfg.validate().map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(cfg)
}

pub fn write_scenario(path: &Path, cfg: &ScenarioConfig) -> Result<()> {
    write_json_pretty(path, cfg)
}

pub fn read_attack(path: &Path) -> Result<AttackSpec> {
    read_json(path)
}

pub fn write_attack(path: &Path, spec: &AttackSpec) -> Result<()> {
    write_json_pretty(path, spec)
}

/// Write a full simulator run into a directory.
pub fn write_sim_output(dir: &Path, out: &SimOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trace(&dir.join("trace.jsonl"), &out.records, out.scan_cycles_per_second)?;
    write_series(&dir.join("series.csv"), &out.series)?;
    write_events(&dir.join("events.json"), &out.events)?;
    write_labels(&dir.join("labels.json"), &out.labels)?;
    Ok(())
}

// ── Constraint model ────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct TimeDto {
    src: String,
    dst: String,
    rd: f64,
    mean_interval: f64,
    epsilon: f64,
    samples: usize,
}

#[derive(Serialize, Deserialize)]
struct BurstDto {
    device: String,
    rd: f64,
    mean_burst: f64,
    lambda: f64,
    samples: usize,
}

#[derive(Serialize, Deserialize)]
struct FreqDto {
    device: String,
    rd: f64,
    operations: usize,
}

#[derive(Serialize, Deserialize)]
struct EventDto {
    operations: usize,
    control_time: Vec<TimeDto>,
    control_burst: Vec<BurstDto>,
    control_freq: Vec<FreqDto>,
    unmodeled_pairs: Vec<(String, String)>,
    unmodeled_bursts: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ConstraintsFile {
    version: String,
    total_operations: usize,
    events: std::collections::BTreeMap<String, EventDto>,
}

pub fn write_constraints(path: &Path, model: &ConstraintModel) -> Result<()> {
    let mut events = std::collections::BTreeMap::new();
    for (event, ec) in &model.events {
        let dto = EventDto {
            operations: ec.operations,
            control_time: ec
                .control_time
                .iter()
                .map(|((src, dst), c)| TimeDto {
                    src: src.clone(),
                    dst: dst.clone(),
                    rd: c.rd,
                    mean_interval: c.mean_interval,
                    epsilon: c.epsilon,
                    samples: c.samples,
                })
                .collect(),
            control_burst: ec
                .control_burst
                .iter()
                .map(|(device, c)| BurstDto {
                    device: device.clone(),
                    rd: c.rd,
                    mean_burst: c.mean_burst,
                    lambda: c.lambda,
                    samples: c.samples,
                })
                .collect(),
            control_freq: ec
                .control_freq
                .iter()
                .map(|(device, c)| FreqDto {
                    device: device.clone(),
                    rd: c.rd,
                    operations: c.operations,
                })
                .collect(),
            unmodeled_pairs: ec.unmodeled_pairs.clone(),
            unmodeled_bursts: ec.unmodeled_bursts.clone(),
        };
        events.insert(event.clone(), dto);
    }
    let file = ConstraintsFile {
        version: CONSTRAINTS_VERSION.into(),
        total_operations: model.total_operations,
        events,
    };
    write_json_pretty(path, &file)
}

pub fn read_constraints(path: &Path) -> Result<ConstraintModel> {
    let file: ConstraintsFile = read_json(path)?;
    if file.version != CONSTRAINTS_VERSION {
        bail!("{}: unsupported version {:?}", path.display(), file.version);
    }
    let mut model = ConstraintModel { total_operations: file.total_operations, ..Default::default() };
    for (event, dto) in file.events {
        let mut ec = EventConstraints { operations: dto.operations, ..Default::default() };
        for t in dto.control_time {
            ec.control_time.insert(
                (t.src, t.dst),
                TimeConstraint {
                    rd: t.rd,
                    mean_interval: t.mean_interval,
                    epsilon: t.epsilon,
                    samples: t.samples,
                },
            );
        }
        for b in dto.control_burst {
            ec.control_burst.insert(
                b.device,
                BurstConstraint {
                    rd: b.rd,
                    mean_burst: b.mean_burst,
                    lambda: b.lambda,
                    samples: b.samples,
                },
            );
        }
        for f in dto.control_freq {
            ec.control_freq.insert(f.device, FreqConstraint { rd: f.rd, operations: f.operations });
        }
        ec.unmodeled_pairs = dto.unmodeled_pairs;
        ec.unmodeled_bursts = dto.unmodeled_bursts;
        model.events.insert(event, ec);
    }
    Ok(model)
}

// ── Sequence model, inertia profile ─────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    #[serde(flatten)]
    model: PinnModel,
}

pub fn write_model(path: &Path, model: &PinnModel) -> Result<()> {
    write_json_pretty(path, &ModelFile { version: PINN_VERSION.into(), model: model.clone() })
}

pub fn read_model(path: &Path) -> Result<PinnModel> {
    let file: ModelFile = read_json(path)?;
    if file.version != PINN_VERSION {
        bail!("{}: unsupported version {:?}", path.display(), file.version);
    }
    Ok(file.model)
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    version: String,
    inertia_seconds: f64,
    itb: u32,
    method: InertiaMethod,
    samples: Vec<f64>,
}

pub fn write_profile(path: &Path, profile: &InertiaProfile) -> Result<()> {
    write_json_pretty(
        path,
        &ProfileFile {
            version: ITB_VERSION.into(),
            inertia_seconds: profile.inertia_seconds,
            itb: profile.itb,
            method: profile.method,
            samples: profile.samples.clone(),
        },
    )
}

pub fn read_profile(path: &Path) -> Result<InertiaProfile> {
    let file: ProfileFile = read_json(path)?;
    Ok(InertiaProfile {
        inertia_seconds: file.inertia_seconds,
        itb: file.itb,
        method: file.method,
        samples: file.samples,
    })
}

// ── Alerts, scored windows, verdicts (JSONL) ────────────────────────────────

#[derive(Serialize, Deserialize)]
pub struct AlertDto {
    pub ts: u64,
    pub kind: AlertKind,
    pub event: String,
    pub devices: Vec<String>,
    pub observed: f64,
    pub constraint: f64,
    #[serde(default)]
    pub provisional: bool,
}

impl From<&ScadaAlert> for AlertDto {
    fn from(a: &ScadaAlert) -> Self {
        let mut devices = vec![a.src.clone()];
        if let Some(dst) = &a.dst {
            devices.push(dst.clone());
        }
        AlertDto {
            ts: a.ts,
            kind: a.kind,
            event: a.event.clone(),
            devices,
            observed: a.observed,
            constraint: a.constraint,
            provisional: a.provisional,
        }
    }
}

impl AlertDto {
    pub fn into_alert(self) -> ScadaAlert {
        let mut devices = self.devices.into_iter();
        let src = devices.next().unwrap_or_default();
        let dst = devices.next();
        ScadaAlert {
            ts: self.ts,
            kind: self.kind,
            event: self.event,
            src,
            dst,
            observed: self.observed,
            constraint: self.constraint,
            provisional: self.provisional,
        }
    }
}

pub fn write_alerts(path: &Path, alerts: &[ScadaAlert]) -> Result<()> {
    write_jsonl(path, alerts.iter().map(AlertDto::from))
}

pub fn read_alerts(path: &Path) -> Result<Vec<ScadaAlert>> {
    Ok(read_jsonl::<AlertDto>(path)?.into_iter().map(AlertDto::into_alert).collect())
}

pub fn write_windows(path: &Path, windows: &[AnomalyWindow]) -> Result<()> {
    write_jsonl(path, windows.iter())
}

pub fn read_windows(path: &Path) -> Result<Vec<AnomalyWindow>> {
    read_jsonl(path)
}

#[derive(Serialize, Deserialize)]
pub struct VerdictDto {
    pub t0: f64,
    pub verdict: Verdict,
    pub window: EvolutionWindow,
    pub scada: AlertDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process: Option<AnomalyEpisode>,
    pub devices: Vec<String>,
}

pub fn write_verdicts(path: &Path, verdicts: &[bridge_core::itb::CorrelationVerdict]) -> Result<()> {
    write_jsonl(
        path,
        verdicts.iter().map(|v| VerdictDto {
            t0: v.t0,
            verdict: v.verdict,
            window: v.window.clone(),
            scada: AlertDto::from(&v.alert),
            process: v.episode,
            devices: v.devices.clone(),
        }),
    )
}

pub fn read_verdicts(path: &Path) -> Result<Vec<VerdictDto>> {
    read_jsonl(path)
}

// ── Dependency graph ────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct EdgeDto {
    src: String,
    dst: String,
    occurrences: Vec<(u64, u64)>,
    intervals: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    version: String,
    nodes: Vec<String>,
    edges: Vec<EdgeDto>,
}

pub fn write_graph(path: &Path, graph: &DependencyGraph) -> Result<()> {
    let file = GraphFile {
        version: GRAPH_VERSION.into(),
        nodes: graph.nodes.iter().cloned().collect(),
        edges: graph
            .edges
            .iter()
            .map(|((src, dst), data)| EdgeDto {
                src: src.clone(),
                dst: dst.clone(),
                occurrences: data.occurrences.clone(),
                intervals: data.intervals.clone(),
            })
            .collect(),
    };
    write_json_pretty(path, &file)
}

/// DOT rendering of the dependency graph for visualization.
pub fn write_graph_dot(path: &Path, graph: &DependencyGraph) -> Result<()> {
    let mut out = String::from("digraph dependencies {\n  rankdir=LR;\n");
    for node in &graph.nodes {
        out.push_str(&format!("  \"{node}\";\n"));
    }
    for ((src, dst), data) in &graph.edges {
        out.push_str(&format!(
            "  \"{src}\" -> \"{dst}\" [label=\"n={}\"];\n",
            data.occurrences.len()
        ));
    }
    out.push_str("}\n");
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

// ── Shared helpers ──────────────────────────────────────────────────────────

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn write_jsonl<T: Serialize, I: Iterator<Item = T>>(path: &Path, items: I) -> Result<()> {
    let file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line)
            .map_err(|e| anyhow!("{}:{}: {e}", path.display(), idx + 1))?;
        items.push(item);
    }
    Ok(items)
}
