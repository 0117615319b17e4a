//! File formats and pipeline plumbing around `bridge-core`.
//!
//! Everything that touches the filesystem lives here: JSONL execution traces,
//! CSV process series, and the versioned JSON artifacts (constraint models,
//! sequence models, inertia profiles, alerts, scored windows, verdicts).

pub mod formats;
pub mod report;
