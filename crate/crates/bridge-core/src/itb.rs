//! Inertia derivation, process-evolution windows, and the cause-before-effect
//! correlation of SCADA alerts with process anomalies.
//!
//! Inertia is measured from the data: after a stop (or start) command, the
//! actuated quantity's rate of change decays; the elapsed time until the rate
//! falls below a fraction δ of its initial post-command value is the inertia
//! delay. Its ceiling is the inertia time block (ITB), the unit in which the
//! process-evolution window grows after a SCADA alert.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::monitor::ScadaAlert;
use crate::trace::{Command, Op, SeriesFrame, Tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum InertiaMethod {
    /// Time for a moving process to de-energize after a stop command.
    StopDecay,
    /// Time for a resting process to settle after a start command.
    StartSettle,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InertiaProfile {
    pub inertia_seconds: f64,
    /// ceil(inertia_seconds), at least 1.
    pub itb: u32,
    pub method: InertiaMethod,
    /// Per-event measured delays that were averaged.
    pub samples: Vec<f64>,
}

impl InertiaProfile {
    pub fn from_inertia(inertia_seconds: f64, method: InertiaMethod, samples: Vec<f64>) -> Self {
        let itb = math::ceil(inertia_seconds).max(1.0) as u32;
        Self { inertia_seconds, itb, method, samples }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaConfig {
    /// Rate-decay threshold as a fraction of the initial post-command rate.
    pub delta: f64,
    /// Converts command scan-cycle timestamps to series seconds.
    pub scan_cycles_per_second: u64,
}

impl Default for InertiaConfig {
    fn default() -> Self {
        Self { delta: 0.05, scan_cycles_per_second: crate::trace::DEFAULT_SCAN_CYCLES_PER_SECOND }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ItbError {
    /// No stop/start command had enough surrounding series data to measure.
    CannotDeriveInertia,
    EmptySeries,
}

impl fmt::Display for ItbError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItbError::CannotDeriveInertia => f.write_str("cannot derive inertia: no qualifying stop/start events"),
            ItbError::EmptySeries => f.write_str("empty series"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ItbError {}

fn tag_range(series: &[SeriesFrame], tag: &str) -> Option<(f64, f64)> {
    let mut range: Option<(f64, f64)> = None;
    for frame in series {
        if let Some(v) = frame.get(tag) {
            range = Some(match range {
                Some((lo, hi)) => (lo.min(v), hi.max(v)),
                None => (v, v),
            });
        }
    }
    range
}

/// Measure one decay: rates r_k = |x(t+k+1) − x(t+k)| starting at the first
/// frame at or after `start_s`; elapsed time until r_k < δ·r_0, linearly
/// interpolated between samples.
fn measure_decay(series: &[SeriesFrame], tag: &str, start_s: f64, delta: f64) -> Option<f64> {
    let start_idx = series.iter().position(|f| f.ts >= start_s)?;
    let window = &series[start_idx..];
    if window.len() < 3 {
        return None;
    }
    let value = |i: usize| window[i].get(tag);
    let rate = |i: usize| -> Option<f64> { Some(math::abs(value(i + 1)? - value(i)?)) };

    let r0 = rate(0)?;
    let (_, hi) = tag_range(series, tag)?;
    let lo = tag_range(series, tag)?.0;
    let span = hi - lo;
    if r0 <= 1e-9 * span.max(1e-12) {
        return None; // device was already at rest
    }
    let threshold = delta * r0;
    let mut prev = r0;
    for k in 1..window.len() - 1 {
        let rk = rate(k)?;
        if rk < threshold {
            // Interpolate within [k-1, k] where the rate crossed.
            let frac = if prev > rk { (prev - threshold) / (prev - rk) } else { 1.0 };
            return Some((k - 1) as f64 + frac.clamp(0.0, 1.0));
        }
        prev = rk;
    }
    None
}

/// Derive the inertia profile from a series and its command trace. Stop
/// commands (WRITE of 0 to a device present in the series) are preferred;
/// start commands (WRITE > 0 to a device at rest) are used when no stop
/// event can be measured. The measured delays are averaged and the ITB is
/// the ceiling of the average.
pub fn derive_inertia(
    series: &[SeriesFrame],
    commands: &[Command],
    cfg: &InertiaConfig,
) -> Result<InertiaProfile, ItbError> {
    if series.is_empty() {
        return Err(ItbError::EmptySeries);
    }
    let rate = cfg.scan_cycles_per_second.max(1) as f64;
    let mut stop_samples = Vec::new();
    let mut start_samples = Vec::new();

    for cmd in commands {
        if cmd.op != Op::Write {
            continue;
        }
        let Some((lo, hi)) = tag_range(series, &cmd.tag) else {
            continue;
        };
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        let start_s = cmd.ts as f64 / rate;
        if cmd.value == 0.0 {
            if let Some(delay) = measure_decay(series, &cmd.tag, start_s, cfg.delta) {
                stop_samples.push(delay);
            }
        } else {
            // A start only qualifies if the device was at rest just before.
            let at_rest = series
                .iter()
                .rev()
                .find(|f| f.ts <= start_s)
                .and_then(|f| f.get(&cmd.tag))
                .map(|v| (v - lo) <= 0.05 * span)
                .unwrap_or(false);
            if at_rest {
                if let Some(delay) = measure_decay(series, &cmd.tag, start_s, cfg.delta) {
                    start_samples.push(delay);
                }
            }
        }
    }

    let (samples, method) = if !stop_samples.is_empty() {
        (stop_samples, InertiaMethod::StopDecay)
    } else if !start_samples.is_empty() {
        (start_samples, InertiaMethod::StartSettle)
    } else {
        return Err(ItbError::CannotDeriveInertia);
    };

    let inertia = math::mean(&samples);
    Ok(InertiaProfile::from_inertia(inertia, method, samples))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteadyCheck {
    Steady,
    NotSteady,
    /// Not enough data to decide; treated as not steady.
    Undecided,
}

impl SteadyCheck {
    pub fn is_steady(self) -> bool {
        self == SteadyCheck::Steady
    }
}

/// True when, for every tag, the mean absolute second difference over the
/// frames in [from, from + window] is below `delta_fraction` of that tag's
/// observed range. Linear ramps are steady (their change does not change).
pub fn steady_state(
    series: &[SeriesFrame],
    from_s: f64,
    window_s: f64,
    delta_fraction: f64,
) -> SteadyCheck {
    let frames: Vec<&SeriesFrame> = series
        .iter()
        .filter(|f| f.ts >= from_s && f.ts <= from_s + window_s)
        .collect();
    if frames.len() < 3 {
        return SteadyCheck::Undecided;
    }
    let tags: Vec<&Tag> = frames[0].values.keys().collect();
    for tag in tags {
        let Some((lo, hi)) = tag_range(series, tag) else {
            return SteadyCheck::Undecided;
        };
        let span = (hi - lo).max(1e-12);
        let mut acc = 0.0;
        let mut n = 0usize;
        for w in frames.windows(3) {
            let (Some(a), Some(b), Some(c)) = (w[0].get(tag), w[1].get(tag), w[2].get(tag))
            else {
                return SteadyCheck::Undecided;
            };
            acc += math::abs(c - 2.0 * b + a);
            n += 1;
        }
        if acc / n as f64 >= delta_fraction * span {
            return SteadyCheck::NotSteady;
        }
    }
    SteadyCheck::Steady
}

/// The process-evolution window of one SCADA alert: starts at the alert time
/// and grows one ITB at a time until the process reaches steady state or the
/// block cap is hit.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvolutionWindow {
    pub t0: f64,
    pub blocks: u32,
    pub end: f64,
    pub steady_reached: bool,
    pub cap: u32,
    /// Set when the series ended before the window could finish growing.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowConfig {
    pub cap: u32,
    /// Steady-state threshold as a fraction of each tag's observed range.
    pub delta_ss: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { cap: 6, delta_ss: 0.01 }
    }
}

/// Grow the evolution window: blocks start at 1; after each block boundary
/// the block just completed is checked for steady state; while not steady and
/// below the cap another ITB is added.
pub fn evolution_window(
    t0: f64,
    profile: &InertiaProfile,
    series: &[SeriesFrame],
    cfg: &WindowConfig,
) -> EvolutionWindow {
    let itb = profile.itb as f64;
    let series_end = series.last().map(|f| f.ts).unwrap_or(t0);
    let cap = cfg.cap.max(1);
    let mut blocks = 1u32;
    let mut steady_reached = false;
    let mut truncated = false;

    loop {
        let boundary = t0 + blocks as f64 * itb;
        if boundary > series_end {
            truncated = true;
            break;
        }
        if steady_state(series, boundary - itb, itb, cfg.delta_ss).is_steady() {
            steady_reached = true;
            break;
        }
        if blocks >= cap {
            break;
        }
        blocks += 1;
    }

    EvolutionWindow { t0, blocks, end: t0 + blocks as f64 * itb, steady_reached, cap, truncated }
}

/// One scored process window (from the sequence model): the time interval it
/// covers, its reconstruction error, and whether it crossed the threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnomalyWindow {
    pub start_s: f64,
    pub end_s: f64,
    pub score: f64,
    pub anomalous: bool,
}

/// A maximal run of consecutive anomalous windows. Its onset is the start
/// time of the first window in the run.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnomalyEpisode {
    pub onset_s: f64,
    pub end_s: f64,
    pub peak_score: f64,
    pub windows: usize,
}

/// Merge scored windows (in time order) into maximal anomalous runs.
pub fn anomaly_episodes(windows: &[AnomalyWindow]) -> Vec<AnomalyEpisode> {
    let mut episodes = Vec::new();
    let mut open: Option<AnomalyEpisode> = None;
    for w in windows {
        if w.anomalous {
            open = Some(match open {
                Some(ep) => AnomalyEpisode {
                    onset_s: ep.onset_s,
                    end_s: w.end_s.max(ep.end_s),
                    peak_score: ep.peak_score.max(w.score),
                    windows: ep.windows + 1,
                },
                None => AnomalyEpisode {
                    onset_s: w.start_s,
                    end_s: w.end_s,
                    peak_score: w.score,
                    windows: 1,
                },
            });
        } else if let Some(ep) = open.take() {
            episodes.push(ep);
        }
    }
    if let Some(ep) = open {
        episodes.push(ep);
    }
    episodes
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Verdict {
    Confirmed,
    DiscardedNoEffect,
    DiscardedPrecedingEffect,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Confirmed => f.write_str("CONFIRMED"),
            Verdict::DiscardedNoEffect => f.write_str("DISCARDED_NO_EFFECT"),
            Verdict::DiscardedPrecedingEffect => f.write_str("DISCARDED_PRECEDING_EFFECT"),
        }
    }
}

/// The temporal join of one SCADA alert with the process anomalies inside its
/// evolution window.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationVerdict {
    pub alert: ScadaAlert,
    pub t0: f64,
    pub window: EvolutionWindow,
    pub verdict: Verdict,
    /// The anomaly episode behind the verdict (confirmed or preceding).
    pub episode: Option<AnomalyEpisode>,
    pub devices: Vec<Tag>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationConfig {
    pub window: WindowConfig,
    pub scan_cycles_per_second: u64,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            window: WindowConfig::default(),
            scan_cycles_per_second: crate::trace::DEFAULT_SCAN_CYCLES_PER_SECOND,
        }
    }
}

/// Correlate SCADA alerts with scored process windows. Each alert opens its
/// own evolution window [t0, end]; an anomaly episode whose onset falls inside
/// it confirms the alert. When the only overlapping episodes onset before t0,
/// the alert is discarded as a preceding effect (the effect cannot happen
/// before the cause). Process anomalies without a SCADA alert never produce
/// verdicts on their own.
pub fn correlate(
    alerts: &[ScadaAlert],
    windows: &[AnomalyWindow],
    profile: &InertiaProfile,
    series: &[SeriesFrame],
    cfg: &CorrelationConfig,
) -> Vec<CorrelationVerdict> {
    let episodes = anomaly_episodes(windows);
    let rate = cfg.scan_cycles_per_second.max(1) as f64;
    let mut verdicts = Vec::new();

    for alert in alerts {
        if alert.provisional {
            continue;
        }
        let t0 = alert.ts as f64 / rate;
        let window = evolution_window(t0, profile, series, &cfg.window);

        let overlapping: Vec<&AnomalyEpisode> = episodes
            .iter()
            .filter(|ep| ep.onset_s <= window.end && ep.end_s >= t0)
            .collect();
        let confirmed = overlapping.iter().find(|ep| ep.onset_s >= t0);
        let (verdict, episode) = match confirmed {
            Some(ep) => (Verdict::Confirmed, Some(**ep)),
            None => match overlapping.first() {
                Some(ep) => (Verdict::DiscardedPrecedingEffect, Some(**ep)),
                None => (Verdict::DiscardedNoEffect, None),
            },
        };

        let mut devices = Vec::with_capacity(2);
        devices.push(alert.src.clone());
        if let Some(dst) = &alert.dst {
            devices.push(dst.clone());
        }

        verdicts.push(CorrelationVerdict {
            alert: alert.clone(),
            t0,
            window,
            verdict,
            episode,
            devices,
        });
    }
    verdicts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::AlertKind;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;
    use alloc::vec;

    fn series_of(tag: &str, values: &[f64]) -> Vec<SeriesFrame> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut map = BTreeMap::new();
                map.insert(tag.to_string(), v);
                SeriesFrame { ts: i as f64, values: map }
            })
            .collect()
    }

    fn exp_decay(tau: f64, len: usize) -> Vec<f64> {
        (0..len).map(|t| math::exp(-(t as f64) / tau)).collect()
    }

    #[test]
    fn analytic_first_order_lag_matches_tau_ln_inverse_delta() {
        let series = series_of("A", &exp_decay(1.0, 12));
        let commands = vec![Command::write(0, "A", 0.0)];
        let cfg = InertiaConfig { delta: 0.05, scan_cycles_per_second: 1000 };
        let profile = derive_inertia(&series, &commands, &cfg).unwrap();
        let expected = 1.0 * math::ln(1.0 / 0.05); // 2.996
        assert!(
            (profile.inertia_seconds - expected).abs() <= 0.1,
            "derived {} vs analytic {}",
            profile.inertia_seconds,
            expected
        );
        assert_eq!(profile.itb, 3);
        assert_eq!(profile.method, InertiaMethod::StopDecay);
    }

    #[test]
    fn near_instant_actuator_floors_at_one_block() {
        // tau = 0.01: decayed to nothing within the first sample.
        let mut values = vec![1.0];
        values.extend(exp_decay(0.01, 8).iter().map(|v| v * 1e-44));
        let series = series_of("A", &values);
        let commands = vec![Command::write(0, "A", 0.0)];
        let profile = derive_inertia(&series, &commands, &InertiaConfig::default()).unwrap();
        assert_eq!(profile.itb, 1);
    }

    #[test]
    fn no_qualifying_events_is_an_error() {
        let series = series_of("A", &[1.0, 1.0, 1.0, 1.0]);
        // Write to an unknown tag, and a stop on a flat (at-rest) signal.
        let commands = vec![Command::write(0, "B", 0.0), Command::write(0, "A", 0.0)];
        assert_eq!(
            derive_inertia(&series, &commands, &InertiaConfig::default()),
            Err(ItbError::CannotDeriveInertia)
        );
    }

    #[test]
    fn start_settle_is_used_when_no_stop_qualifies() {
        let rise: Vec<f64> = (0..12).map(|t| 1.0 - math::exp(-(t as f64) / 1.0)).collect();
        let series = series_of("A", &rise);
        let commands = vec![Command::write(0, "A", 1.0)];
        let profile = derive_inertia(&series, &commands, &InertiaConfig::default()).unwrap();
        assert_eq!(profile.method, InertiaMethod::StartSettle);
        assert!((profile.inertia_seconds - 3.0).abs() <= 0.1);
    }

    #[test]
    fn constant_series_is_steady() {
        let series = series_of("A", &[2.0; 10]);
        assert!(steady_state(&series, 0.0, 5.0, 0.01).is_steady());
    }

    #[test]
    fn linear_ramp_is_steady() {
        let ramp: Vec<f64> = (0..10).map(|t| 0.5 * t as f64).collect();
        let series = series_of("A", &ramp);
        assert!(steady_state(&series, 2.0, 5.0, 0.01).is_steady());
    }

    #[test]
    fn exponential_settling_becomes_steady_after_three_tau() {
        let tau = 2.0;
        let curve: Vec<f64> = (0..30).map(|t| 1.0 - math::exp(-(t as f64) / tau)).collect();
        let series = series_of("A", &curve);
        assert_eq!(steady_state(&series, 0.0, 4.0, 0.01), SteadyCheck::NotSteady);
        assert!(steady_state(&series, 3.0 * tau + 4.0, 4.0, 0.01).is_steady());
    }

    #[test]
    fn insufficient_data_is_undecided() {
        let series = series_of("A", &[1.0, 2.0]);
        assert_eq!(steady_state(&series, 0.0, 5.0, 0.01), SteadyCheck::Undecided);
        assert!(!steady_state(&series, 0.0, 5.0, 0.01).is_steady());
    }

    fn flat_profile(itb: u32) -> InertiaProfile {
        InertiaProfile {
            inertia_seconds: itb as f64 - 0.3,
            itb,
            method: InertiaMethod::StopDecay,
            samples: vec![itb as f64 - 0.3],
        }
    }

    #[test]
    fn window_closes_after_one_steady_block() {
        // Steady series from the start, alert at 98 s, itb 5 -> [98, 103].
        let series = series_of("A", &[1.0; 120]);
        let window =
            evolution_window(98.0, &flat_profile(5), &series, &WindowConfig::default());
        assert_eq!(window.blocks, 1);
        assert_eq!(window.end, 103.0);
        assert!(window.steady_reached);
        assert!(!window.truncated);
    }

    #[test]
    fn never_steady_series_hits_cap() {
        // Quadratic growth: constant nonzero second difference everywhere.
        let curve: Vec<f64> = (0..200).map(|t| (t * t) as f64).collect();
        let series = series_of("A", &curve);
        let cfg = WindowConfig { cap: 4, delta_ss: 1e-6 };
        let window = evolution_window(10.0, &flat_profile(5), &series, &cfg);
        assert_eq!(window.blocks, 4);
        assert!(!window.steady_reached);
        assert_eq!(window.end, 30.0);
    }

    #[test]
    fn window_truncates_when_series_ends() {
        let series = series_of("A", &[1.0; 10]);
        let window =
            evolution_window(8.0, &flat_profile(5), &series, &WindowConfig::default());
        assert!(window.truncated);
        assert_eq!(window.blocks, 1);
        assert_eq!(window.end, 13.0);
    }

    #[test]
    fn window_end_is_monotone_in_cap() {
        let curve: Vec<f64> = (0..200).map(|t| (t * t) as f64).collect();
        let series = series_of("A", &curve);
        let mut prev_end = 0.0;
        for cap in 1..8 {
            let cfg = WindowConfig { cap, delta_ss: 1e-6 };
            let window = evolution_window(10.0, &flat_profile(3), &series, &cfg);
            assert!(window.end >= prev_end);
            prev_end = window.end;
        }
    }

    fn alert_at(ts: u64) -> ScadaAlert {
        ScadaAlert {
            ts,
            kind: AlertKind::ControlTime,
            event: "e".to_string(),
            src: "Valve.0".to_string(),
            dst: Some("Valve.2".to_string()),
            observed: 0.9,
            constraint: 0.3,
            provisional: false,
        }
    }

    fn anomaly_run(start: f64, count: usize, itb: f64) -> Vec<AnomalyWindow> {
        (0..count)
            .map(|k| AnomalyWindow {
                start_s: start + k as f64,
                end_s: start + k as f64 + itb,
                score: 0.5,
                anomalous: true,
            })
            .collect()
    }

    #[test]
    fn onset_inside_window_confirms() {
        let series = series_of("A", &[1.0; 200]);
        let alerts = [alert_at(98_000)];
        let windows = anomaly_run(101.0, 3, 5.0);
        let verdicts = correlate(
            &alerts,
            &windows,
            &flat_profile(5),
            &series,
            &CorrelationConfig::default(),
        );
        assert_eq!(verdicts.len(), 1);
        assert_eq!(verdicts[0].verdict, Verdict::Confirmed);
        assert_eq!(verdicts[0].t0, 98.0);
        assert_eq!(verdicts[0].window.end, 103.0);
        assert_eq!(verdicts[0].episode.unwrap().onset_s, 101.0);
        assert_eq!(verdicts[0].devices, vec!["Valve.0".to_string(), "Valve.2".to_string()]);
    }

    #[test]
    fn preceding_onset_is_discarded() {
        let series = series_of("A", &[1.0; 200]);
        let alerts = [alert_at(90_000)];
        let windows = anomaly_run(88.0, 6, 5.0);
        let verdicts = correlate(
            &alerts,
            &windows,
            &flat_profile(5),
            &series,
            &CorrelationConfig::default(),
        );
        assert_eq!(verdicts[0].verdict, Verdict::DiscardedPrecedingEffect);
        assert_eq!(verdicts[0].episode.unwrap().onset_s, 88.0);
    }

    #[test]
    fn no_overlapping_anomaly_is_discarded_no_effect() {
        let series = series_of("A", &[1.0; 200]);
        let alerts = [alert_at(50_000)];
        let windows = anomaly_run(120.0, 2, 5.0);
        let verdicts = correlate(
            &alerts,
            &windows,
            &flat_profile(5),
            &series,
            &CorrelationConfig::default(),
        );
        assert_eq!(verdicts[0].verdict, Verdict::DiscardedNoEffect);
        assert!(verdicts[0].episode.is_none());
    }

    #[test]
    fn anomalies_without_alerts_yield_no_verdicts() {
        let series = series_of("A", &[1.0; 200]);
        let windows = anomaly_run(10.0, 5, 5.0);
        let verdicts = correlate(
            &[],
            &windows,
            &flat_profile(5),
            &series,
            &CorrelationConfig::default(),
        );
        assert!(verdicts.is_empty());
    }

    #[test]
    fn confirmed_verdicts_always_respect_cause_before_effect() {
        let series = series_of("A", &[1.0; 400]);
        let mut rng = crate::DeterministicRng::seed_from_u64(5);
        for _ in 0..50 {
            let alert_ts = 10_000 + rng.next_u64() % 300_000;
            let onset = (rng.next_u64() % 350) as f64;
            let alerts = [alert_at(alert_ts)];
            let windows = anomaly_run(onset, 1 + (rng.next_u64() % 5) as usize, 5.0);
            for v in correlate(
                &alerts,
                &windows,
                &flat_profile(5),
                &series,
                &CorrelationConfig::default(),
            ) {
                if v.verdict == Verdict::Confirmed {
                    assert!(v.episode.unwrap().onset_s >= v.t0);
                    assert!(v.episode.unwrap().onset_s <= v.window.end);
                }
            }
        }
    }

    #[test]
    fn split_runs_produce_separate_episodes() {
        let mut windows = anomaly_run(10.0, 2, 5.0);
        windows.push(AnomalyWindow { start_s: 12.0, end_s: 17.0, score: 0.1, anomalous: false });
        windows.extend(anomaly_run(13.0, 2, 5.0));
        let episodes = anomaly_episodes(&windows);
        assert_eq!(episodes.len(), 2);
        assert_eq!(episodes[0].onset_s, 10.0);
        assert_eq!(episodes[1].onset_s, 13.0);
    }
}
