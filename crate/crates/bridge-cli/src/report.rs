//! Human-readable rendering of correlation verdicts.

use std::fmt::Write as _;

use bridge_core::itb::Verdict;

use crate::formats::VerdictDto;

/// Render verdicts as a Markdown operator report: one section per verdict
/// with the affected devices called out, plus a summary table.
pub fn render(verdicts: &[VerdictDto]) -> String {
    let mut out = String::new();
    let confirmed = verdicts.iter().filter(|v| v.verdict == Verdict::Confirmed).count();
    let preceding = verdicts
        .iter()
        .filter(|v| v.verdict == Verdict::DiscardedPrecedingEffect)
        .count();
    let no_effect =
        verdicts.iter().filter(|v| v.verdict == Verdict::DiscardedNoEffect).count();

    let _ = writeln!(out, "# Correlation report");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{} alert(s) correlated: {confirmed} confirmed, {preceding} discarded \
         (effect preceded cause), {no_effect} discarded (no process effect).",
        verdicts.len()
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "| t0 (s) | verdict | kind | devices | observed | constraint |");
    let _ = writeln!(out, "|-------:|---------|------|---------|---------:|-----------:|");
    for v in verdicts {
        let _ = writeln!(
            out,
            "| {:.1} | {} | {} | {} | {:.4} | {:.4} |",
            v.t0,
            v.verdict,
            v.scada.kind,
            v.devices.join(", "),
            v.scada.observed,
            v.scada.constraint,
        );
    }
    let _ = writeln!(out);

    for v in verdicts {
        let _ = writeln!(out, "## {} at t0 = {:.1} s", v.verdict, v.t0);
        let _ = writeln!(out);
        let _ = writeln!(out, "- affected devices: {}", v.devices.join(", "));
        let _ = writeln!(
            out,
            "- SCADA violation: {} on event {:?} (observed {:.4} vs constraint {:.4}, ts {})",
            v.scada.kind, v.scada.event, v.scada.observed, v.scada.constraint, v.scada.ts
        );
        let _ = writeln!(
            out,
            "- evolution window: [{:.1}, {:.1}] s, {} block(s), steady: {}{}",
            v.window.t0,
            v.window.end,
            v.window.blocks,
            v.window.steady_reached,
            if v.window.truncated { " (truncated by end of series)" } else { "" }
        );
        match &v.process {
            Some(ep) => {
                let _ = writeln!(
                    out,
                    "- process anomaly: onset {:.1} s, end {:.1} s, peak score {:.5} ({} windows)",
                    ep.onset_s, ep.end_s, ep.peak_score, ep.windows
                );
            }
            None => {
                let _ = writeln!(out, "- process anomaly: none inside the window");
            }
        }
        let _ = writeln!(out);
    }
    out
}
