//! Execution-trace data model: READ/WRITE commands addressed to device tags,
//! event markers, and their grouping into event-induced process-control
//! operations.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Event tag used for commands observed before any event marker.
pub const PREAMBLE_EVENT: &str = "preamble";

/// Default conversion between SCADA scan cycles and process seconds.
pub const DEFAULT_SCAN_CYCLES_PER_SECOND: u64 = 1000;

pub type Tag = String;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum Op {
    Read,
    Write,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Read => f.write_str("READ"),
            Op::Write => f.write_str("WRITE"),
        }
    }
}

/// A single monitoring (READ) or control (WRITE) command addressed to a
/// device tag. `ts` is a scan-cycle index.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Command {
    pub ts: u64,
    pub op: Op,
    pub tag: Tag,
    pub value: f64,
    pub event: Option<String>,
    pub session: Option<String>,
}

impl Command {
    pub fn new(ts: u64, op: Op, tag: impl Into<Tag>, value: f64) -> Self {
        Self { ts, op, tag: tag.into(), value, event: None, session: None }
    }

    pub fn read(ts: u64, tag: impl Into<Tag>, value: f64) -> Self {
        Self::new(ts, Op::Read, tag, value)
    }

    pub fn write(ts: u64, tag: impl Into<Tag>, value: f64) -> Self {
        Self::new(ts, Op::Write, tag, value)
    }

    pub fn with_event(mut self, event: impl Into<String>) -> Self {
        self.event = Some(event.into());
        self
    }
}

/// An OPC-style event marker: the moment a subscribed event fired. Commands
/// that follow (until the next marker) belong to this event's handler.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventMarker {
    pub ts: u64,
    pub event: String,
}

/// One record of an execution trace.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceRecord {
    Marker(EventMarker),
    Command(Command),
}

impl TraceRecord {
    pub fn ts(&self) -> u64 {
        match self {
            TraceRecord::Marker(m) => m.ts,
            TraceRecord::Command(c) => c.ts,
        }
    }
}

/// Trigger metadata for one subscribed event tag, e.g. `Valve0.open` fires
/// when device `Valve.0` enters state `open`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventSpec {
    pub tag: String,
    pub device: Tag,
    pub state: String,
}

/// The set V of subscribed event tags.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventSet {
    pub events: Vec<EventSpec>,
}

impl EventSet {
    pub fn new(events: Vec<EventSpec>) -> Result<Self, TraceError> {
        let mut seen = BTreeMap::new();
        for spec in &events {
            if seen.insert(spec.tag.clone(), ()).is_some() {
                return Err(TraceError::DuplicateEventTag { tag: spec.tag.clone() });
            }
        }
        Ok(Self { events })
    }

    /// Build a set from bare tags with no trigger metadata (e.g. recovered
    /// from the markers of a trace).
    pub fn from_tags<I: IntoIterator<Item = String>>(tags: I) -> Self {
        let mut events = Vec::new();
        let mut seen = BTreeMap::new();
        for tag in tags {
            if seen.insert(tag.clone(), ()).is_none() {
                events.push(EventSpec { tag, device: String::new(), state: String::new() });
            }
        }
        Self { events }
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.events.iter().any(|e| e.tag == tag)
    }
}

/// P(V_k): the time-ordered command sequence a SCADA host executed in
/// response to one occurrence of event k.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProcessControlOperation {
    pub event: String,
    pub commands: Vec<Command>,
}

impl ProcessControlOperation {
    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}

/// One sampled frame of the process time series: all tags at one second.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeriesFrame {
    pub ts: f64,
    pub values: BTreeMap<Tag, f64>,
}

impl SeriesFrame {
    pub fn get(&self, tag: &str) -> Option<f64> {
        self.values.get(tag).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceError {
    DuplicateEventTag { tag: String },
    EmptyTag { index: usize },
    DecreasingTimestamp { index: usize, prev: u64, cur: u64 },
}

impl fmt::Display for TraceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceError::DuplicateEventTag { tag } => write!(f, "duplicate event tag {tag:?}"),
            TraceError::EmptyTag { index } => write!(f, "record {index}: empty device tag"),
            TraceError::DecreasingTimestamp { index, prev, cur } => {
                write!(f, "record {index}: timestamp {cur} decreases from {prev}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TraceError {}

/// Validate a record stream: non-empty tags, non-decreasing timestamps.
pub fn validate_records(records: &[TraceRecord]) -> Result<(), TraceError> {
    let mut prev = 0u64;
    for (index, rec) in records.iter().enumerate() {
        if let TraceRecord::Command(c) = rec {
            if c.tag.is_empty() {
                return Err(TraceError::EmptyTag { index });
            }
        }
        let ts = rec.ts();
        if index > 0 && ts < prev {
            return Err(TraceError::DecreasingTimestamp { index, prev, cur: ts });
        }
        prev = ts;
    }
    Ok(())
}

/// Result of segmenting a trace into operations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Segmentation {
    pub operations: Vec<ProcessControlOperation>,
    /// Set when commands appear before any event marker (they go into a
    /// synthetic preamble operation).
    pub preamble_warning: bool,
}

/// Partition trace records into process-control operations by the most recent
/// event marker. A command carrying an explicit event tag is attributed to
/// that event and acts as a marker for the commands that follow it. Commands
/// before the first marker form a synthetic [`PREAMBLE_EVENT`] operation.
/// Only operations with at least one command are returned; markers with no
/// subsequent commands contribute nothing.
pub fn segment_operations(records: &[TraceRecord], _events: &EventSet) -> Segmentation {
    let mut operations: Vec<ProcessControlOperation> = Vec::new();
    let mut current: Option<ProcessControlOperation> = None;
    let mut current_event: Option<String> = None;
    let mut preamble_warning = false;

    let mut flush = |op: Option<ProcessControlOperation>, out: &mut Vec<ProcessControlOperation>| {
        if let Some(op) = op {
            if !op.commands.is_empty() {
                out.push(op);
            }
        }
    };

    for rec in records {
        match rec {
            TraceRecord::Marker(m) => {
                flush(current.take(), &mut operations);
                current_event = Some(m.event.clone());
                current = Some(ProcessControlOperation { event: m.event.clone(), commands: Vec::new() });
            }
            TraceRecord::Command(c) => {
                let event = match (&c.event, &current_event) {
                    (Some(explicit), cur) => {
                        if cur.as_deref() != Some(explicit.as_str()) {
                            // Explicit tag switches the running event.
                            flush(current.take(), &mut operations);
                            current_event = Some(explicit.clone());
                            current = Some(ProcessControlOperation {
                                event: explicit.clone(),
                                commands: Vec::new(),
                            });
                        }
                        explicit.clone()
                    }
                    (None, Some(cur)) => cur.clone(),
                    (None, None) => {
                        preamble_warning = true;
                        current_event = Some(String::from(PREAMBLE_EVENT));
                        current = Some(ProcessControlOperation {
                            event: String::from(PREAMBLE_EVENT),
                            commands: Vec::new(),
                        });
                        String::from(PREAMBLE_EVENT)
                    }
                };
                let op = current.get_or_insert_with(|| ProcessControlOperation {
                    event: event.clone(),
                    commands: Vec::new(),
                });
                op.commands.push(c.clone());
            }
        }
    }
    flush(current.take(), &mut operations);

    Segmentation { operations, preamble_warning }
}

/// Validate a series: consistent tag sets, strictly increasing timestamps.
pub fn validate_series(frames: &[SeriesFrame]) -> Result<(), SeriesError> {
    for (index, frame) in frames.iter().enumerate() {
        if index > 0 {
            let prev = &frames[index - 1];
            if frame.ts <= prev.ts {
                return Err(SeriesError::NonIncreasingTimestamp {
                    index,
                    prev: prev.ts,
                    cur: frame.ts,
                });
            }
            if frame.values.len() != prev.values.len()
                || !frame.values.keys().eq(prev.values.keys())
            {
                return Err(SeriesError::InconsistentTags { index });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum SeriesError {
    NonIncreasingTimestamp { index: usize, prev: f64, cur: f64 },
    InconsistentTags { index: usize },
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::NonIncreasingTimestamp { index, prev, cur } => {
                write!(f, "frame {index}: timestamp {cur} does not increase from {prev}")
            }
            SeriesError::InconsistentTags { index } => {
                write!(f, "frame {index}: tag set differs from previous frames")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SeriesError {}
