//! Deterministic inertial plant simulator, SCADA event-handler emulator, and
//! attack injector.
//!
//! Two scenarios are built in. The chemical dosing plant fills a holding
//! tank through an intake pump and valve, trims overshoot through a discharge
//! valve, then doses the batch into the supply line; a level meter and a
//! supply flow meter are the sensors. The conveyor line spins a motor up to a
//! commanded speed, cruises, and stops. Every actuator follows a first-order
//! lag toward its commanded value (stepped with the exact exponential
//! solution), which is what gives the processes their measurable inertia.
//!
//! The SCADA emulator runs one control tick per second and emits a fixed
//! command schedule per event occurrence, with sub-tick scan-cycle offsets.
//! Timing decisions are made on true process values, so command timing is
//! unaffected by sensor noise: noise only appears in logged sensor readings.
//! Runs without an attack stop on an episode boundary after an even multiple
//! of the gain cycle, so replaying a benign trace against constraints learned
//! from it is alert-free.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::trace::{
    Command, EventMarker, EventSet, EventSpec, SeriesFrame, Tag, TraceRecord,
};
use crate::DeterministicRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DeviceKind {
    Valve,
    Pump,
    Sensor,
    Param,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceSpec {
    pub tag: Tag,
    pub kind: DeviceKind,
    /// Inertia time constant in seconds (actuators only).
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ScenarioKind {
    Dosing,
    Conveyor,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioConfig {
    pub name: String,
    pub kind: ScenarioKind,
    pub devices: Vec<DeviceSpec>,
    /// Setpoint S_V: target tank level (dosing) in engineering units.
    pub setpoint: f64,
    /// Gain schedule: episodes cycle through these P values.
    pub gains: Vec<f64>,
    /// Sensor noise amplitude as a fraction of the sensor range.
    pub noise: f64,
    pub scan_cycles_per_second: u64,
    /// Requested run length; benign runs extend to the next even episode
    /// boundary, attack runs stop here exactly.
    pub duration_s: u64,
    pub seed: u64,
    /// Rate-decay fraction δ this scenario uses when deriving inertia.
    pub inertia_delta: f64,
    /// Feature columns the sequence model monitors.
    pub pinn_tags: Vec<Tag>,
    /// When false the dosing scenario holds the level at the setpoint and
    /// never opens the supply valve.
    pub dose_enabled: bool,
}

pub const TAG_TANK_LEVEL: &str = "L.Meter.0";
pub const TAG_SUPPLY_FLOW: &str = "F.Meter.0";
pub const TAG_PUMP: &str = "Pump.0";
pub const TAG_INTAKE: &str = "Valve.0";
pub const TAG_DISCHARGE: &str = "Valve.1";
pub const TAG_SUPPLY: &str = "Valve.2";
pub const TAG_GAIN: &str = "P.0";
pub const EVENT_DOSING: &str = "Valve0.open";

pub const TAG_MOTOR: &str = "Motor.0";
pub const TAG_SPEED: &str = "S.Speed.0";
pub const TAG_BELT_GAIN: &str = "P.1";
pub const EVENT_CONVEYOR: &str = "Motor0.start";

// Dosing plant rates, in engineering units per second.
const INTAKE_RATE: f64 = 0.04;
const TRIM_RATE: f64 = 0.02;
const DOSE_RATE: f64 = 0.08;
const FILL_OVERSHOOT: f64 = 1.02;
const DOSE_END_FRACTION: f64 = 0.3;
const REFILL_FRACTION: f64 = 0.32;
const CAPACITY_FACTOR: f64 = 1.5;
const POLL_FRACTIONS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
const SUBSTEPS: u32 = 10;

impl ScenarioConfig {
    pub fn dosing() -> Self {
        Self {
            name: String::from("chemical-dosing"),
            kind: ScenarioKind::Dosing,
            devices: alloc::vec![
                DeviceSpec { tag: Tag::from(TAG_PUMP), kind: DeviceKind::Pump, tau: 4.7 },
                DeviceSpec { tag: Tag::from(TAG_INTAKE), kind: DeviceKind::Valve, tau: 4.7 },
                DeviceSpec { tag: Tag::from(TAG_DISCHARGE), kind: DeviceKind::Valve, tau: 4.7 },
                DeviceSpec { tag: Tag::from(TAG_SUPPLY), kind: DeviceKind::Valve, tau: 4.7 },
                DeviceSpec { tag: Tag::from(TAG_TANK_LEVEL), kind: DeviceKind::Sensor, tau: 0.0 },
                DeviceSpec { tag: Tag::from(TAG_SUPPLY_FLOW), kind: DeviceKind::Sensor, tau: 0.0 },
                DeviceSpec { tag: Tag::from(TAG_GAIN), kind: DeviceKind::Param, tau: 0.0 },
            ],
            setpoint: 2.35,
            gains: alloc::vec![0.55, 0.75],
            noise: 0.01,
            scan_cycles_per_second: 1000,
            duration_s: 420,
            seed: 1,
            inertia_delta: 0.368,
            pinn_tags: alloc::vec![
                Tag::from(TAG_TANK_LEVEL),
                Tag::from(TAG_SUPPLY_FLOW),
                Tag::from(TAG_PUMP),
                Tag::from(TAG_INTAKE),
                Tag::from(TAG_DISCHARGE),
            ],
            dose_enabled: true,
        }
    }

    pub fn conveyor() -> Self {
        Self {
            name: String::from("conveyor-line"),
            kind: ScenarioKind::Conveyor,
            devices: alloc::vec![
                DeviceSpec { tag: Tag::from(TAG_MOTOR), kind: DeviceKind::Pump, tau: 7.0 },
                DeviceSpec { tag: Tag::from(TAG_SPEED), kind: DeviceKind::Sensor, tau: 0.0 },
                DeviceSpec { tag: Tag::from(TAG_BELT_GAIN), kind: DeviceKind::Param, tau: 0.0 },
            ],
            setpoint: 1.0,
            gains: alloc::vec![0.6, 0.8],
            noise: 0.01,
            scan_cycles_per_second: 1000,
            duration_s: 240,
            seed: 1,
            inertia_delta: 0.368,
            pinn_tags: alloc::vec![Tag::from(TAG_SPEED), Tag::from(TAG_MOTOR)],
            dose_enabled: false,
        }
    }

    pub fn tau_of(&self, tag: &str) -> Option<f64> {
        self.devices.iter().find(|d| d.tag == tag).map(|d| d.tau)
    }

    pub fn event_set(&self) -> EventSet {
        let spec = match self.kind {
            ScenarioKind::Dosing => EventSpec {
                tag: String::from(EVENT_DOSING),
                device: Tag::from(TAG_INTAKE),
                state: String::from("open"),
            },
            ScenarioKind::Conveyor => EventSpec {
                tag: String::from(EVENT_CONVEYOR),
                device: Tag::from(TAG_MOTOR),
                state: String::from("run"),
            },
        };
        EventSet { events: alloc::vec![spec] }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.setpoint <= 0.0 {
            return Err(SimError::InvalidConfig("setpoint must be positive"));
        }
        if self.gains.is_empty() || self.gains.iter().any(|&g| g <= 0.0) {
            return Err(SimError::InvalidConfig("gain schedule must be positive"));
        }
        if self.devices.iter().any(|d| {
            matches!(d.kind, DeviceKind::Valve | DeviceKind::Pump) && d.tau <= 0.0
        }) {
            return Err(SimError::InvalidConfig("actuator time constants must be positive"));
        }
        if self.noise < 0.0 {
            return Err(SimError::InvalidConfig("noise amplitude must be non-negative"));
        }
        if self.scan_cycles_per_second == 0 {
            return Err(SimError::InvalidConfig("scan rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum AttackCategory {
    /// Premature supply-valve opening during the fill (parameter-tamper
    /// incident analog: category III).
    Oldsmar,
    /// Steady fractional increments of a numeric parameter (category I).
    StealthIncrement,
    /// Slow toggling of a boolean actuator (category II).
    Toggle,
    /// Timing-faithful parameter manipulation that honors the learned
    /// control-time dependency (category IV / adaptive).
    Mimicry,
}

impl fmt::Display for AttackCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttackCategory::Oldsmar => "OLDSMAR",
            AttackCategory::StealthIncrement => "STEALTH_INCREMENT",
            AttackCategory::Toggle => "TOGGLE",
            AttackCategory::Mimicry => "MIMICRY",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttackSpec {
    pub category: AttackCategory,
    pub target: Tag,
    /// Earliest time the attacker acts; the agent latches onto the first
    /// episode starting at or after this.
    pub start_s: u64,
    /// Per-write increment fraction (stealth, mimicry).
    pub fraction: f64,
    /// Seconds between injected writes (stealth, toggle) or bursts (mimicry).
    pub period_s: u64,
    /// Premature-opening delay after fill start (Oldsmar), or the
    /// control-time the mimicry attacker reproduces.
    pub delay_s: u64,
    /// Number of injected writes (stealth, toggle).
    pub count: u32,
}

impl AttackSpec {
    pub fn oldsmar() -> Self {
        Self {
            category: AttackCategory::Oldsmar,
            target: Tag::from(TAG_SUPPLY),
            start_s: 90,
            fraction: 0.0,
            period_s: 0,
            delay_s: 19,
            count: 0,
        }
    }

    pub fn stealth_increment() -> Self {
        Self {
            category: AttackCategory::StealthIncrement,
            target: Tag::from(TAG_GAIN),
            start_s: 90,
            fraction: 0.05,
            period_s: 2,
            delay_s: 0,
            count: 20,
        }
    }

    pub fn toggle() -> Self {
        Self {
            category: AttackCategory::Toggle,
            target: Tag::from(TAG_DISCHARGE),
            start_s: 90,
            fraction: 0.0,
            period_s: 4,
            delay_s: 0,
            count: 8,
        }
    }

    pub fn mimicry() -> Self {
        Self {
            category: AttackCategory::Mimicry,
            target: Tag::from(TAG_GAIN),
            start_s: 90,
            fraction: 0.04,
            period_s: 3,
            delay_s: 66,
            count: 18,
        }
    }

    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<(), SimError> {
        if self.start_s >= cfg.duration_s {
            return Err(SimError::InvalidConfig("attack start beyond run duration"));
        }
        if cfg.tau_of(&self.target).is_none() {
            return Err(SimError::UnknownTarget { tag: self.target.clone() });
        }
        match self.category {
            AttackCategory::Toggle | AttackCategory::StealthIncrement => {
                if self.period_s == 0 {
                    return Err(SimError::InvalidConfig("injection period must be positive"));
                }
            }
            AttackCategory::Oldsmar | AttackCategory::Mimicry => {
                if cfg.kind != ScenarioKind::Dosing {
                    return Err(SimError::InvalidConfig(
                        "this attack category targets the dosing scenario",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleInterval {
    pub start_cycles: u64,
    pub end_cycles: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SecondsInterval {
    pub start_s: f64,
    pub end_s: f64,
}

/// Ground-truth labels of one run.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Labels {
    pub attack: Option<String>,
    pub scada: Vec<CycleInterval>,
    pub process: Vec<SecondsInterval>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimOutput {
    pub records: Vec<TraceRecord>,
    pub series: Vec<SeriesFrame>,
    pub events: EventSet,
    pub labels: Labels,
    pub scan_cycles_per_second: u64,
    /// Completed process-control episodes.
    pub episodes: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    InvalidConfig(&'static str),
    UnknownTarget { tag: Tag },
    Diverged { t: u64, level: f64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            SimError::UnknownTarget { tag } => write!(f, "unknown attack target {tag:?}"),
            SimError::Diverged { t, level } => {
                write!(f, "simulation diverged at t={t}s (level {level})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimError {}

/// Exact step of the first-order lag dx/dt = (target − x)/τ over `dt`.
pub fn first_order_step(x: f64, target: f64, dt: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return target;
    }
    target + (x - target) * math::exp(-dt / tau)
}

/// Trace sink that tracks the command count of the open operation.
struct Tracer {
    records: Vec<TraceRecord>,
    rate: u64,
    since_marker: usize,
}

impl Tracer {
    fn new(rate: u64) -> Self {
        Self { records: Vec::new(), rate, since_marker: 0 }
    }

    fn cycles(&self, t: u64, offset: u64) -> u64 {
        t * self.rate + offset
    }

    fn marker(&mut self, t: u64, offset: u64, event: &str) {
        self.records.push(TraceRecord::Marker(EventMarker {
            ts: self.cycles(t, offset),
            event: String::from(event),
        }));
        self.since_marker = 0;
    }

    fn read(&mut self, t: u64, offset: u64, tag: &str, value: f64) {
        self.records
            .push(TraceRecord::Command(Command::read(self.cycles(t, offset), tag, value)));
        self.since_marker += 1;
    }

    fn write(&mut self, t: u64, offset: u64, tag: &str, value: f64) {
        self.records
            .push(TraceRecord::Command(Command::write(self.cycles(t, offset), tag, value)));
        self.since_marker += 1;
    }
}

// ── Dosing plant ────────────────────────────────────────────────────────────

struct DosingPlant {
    level: f64,
    pump_x: f64,
    v0_x: f64,
    v1_x: f64,
    v2_x: f64,
    gain: f64,
    pump_enabled: bool,
    u_v0: f64,
    u_v1: f64,
    u_v2: f64,
    tau_pump: f64,
    tau_v0: f64,
    tau_v1: f64,
    tau_v2: f64,
    capacity: f64,
}

impl DosingPlant {
    fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            level: DOSE_END_FRACTION * cfg.setpoint,
            pump_x: 0.0,
            v0_x: 0.0,
            v1_x: 0.0,
            v2_x: 0.0,
            gain: cfg.gains[0],
            pump_enabled: false,
            u_v0: 0.0,
            u_v1: 0.0,
            u_v2: 0.0,
            tau_pump: cfg.tau_of(TAG_PUMP).unwrap_or(4.7),
            tau_v0: cfg.tau_of(TAG_INTAKE).unwrap_or(4.7),
            tau_v1: cfg.tau_of(TAG_DISCHARGE).unwrap_or(4.7),
            tau_v2: cfg.tau_of(TAG_SUPPLY).unwrap_or(4.7),
            capacity: CAPACITY_FACTOR * cfg.setpoint,
        }
    }

    fn supply_flow(&self) -> f64 {
        // Equal-percentage-style valve: flow rises with the cube of opening.
        if self.level > 0.0 {
            DOSE_RATE * self.v2_x * self.v2_x * self.v2_x
        } else {
            0.0
        }
    }

    fn integrate(&mut self) {
        let dt = 1.0 / SUBSTEPS as f64;
        for _ in 0..SUBSTEPS {
            let pump_target = if self.pump_enabled { self.gain } else { 0.0 };
            self.pump_x = first_order_step(self.pump_x, pump_target, dt, self.tau_pump);
            self.v0_x = first_order_step(self.v0_x, self.u_v0, dt, self.tau_v0);
            self.v1_x = first_order_step(self.v1_x, self.u_v1, dt, self.tau_v1);
            self.v2_x = first_order_step(self.v2_x, self.u_v2, dt, self.tau_v2);
            let inflow = INTAKE_RATE * self.pump_x * self.v0_x;
            let outflow = TRIM_RATE * self.v1_x + self.supply_flow();
            self.level = (self.level + dt * (inflow - outflow)).clamp(0.0, self.capacity);
        }
    }

    fn apply_write(&mut self, tag: &str, value: f64) {
        match tag {
            TAG_GAIN => self.gain = value,
            TAG_PUMP => self.pump_enabled = value > 0.0,
            TAG_INTAKE => self.u_v0 = value.clamp(0.0, 1.0),
            TAG_DISCHARGE => self.u_v1 = value.clamp(0.0, 1.0),
            TAG_SUPPLY => self.u_v2 = value.clamp(0.0, 1.0),
            _ => {}
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DosingPhase {
    Waiting { cooldown: u32 },
    Filling { polls_sent: usize },
    Trimming,
    Dosing,
    Closing,
    FinalRead,
    Holding,
}

/// The dosing event handler. Each episode emits a fixed 24-command schedule:
/// fill start (read, gain ramp ×3, pump on, intake open), four level polls,
/// trim start (read, gain ramp ×3, pump off, discharge open), dose start
/// (read, discharge close, intake check, supply open), dose end (read, supply
/// close, intake close) and a final verification read.
struct DosingHandler {
    phase: DosingPhase,
    episode: u32,
    episode_start: Option<u64>,
    suppressed: bool,
    setpoint: f64,
    gains: Vec<f64>,
    noise: f64,
    dose_enabled: bool,
    // The handler's own lag model of the actuators it commands, used to
    // compensate valve-closure tails when deciding thresholds (feedforward).
    est: LagEstimates,
}

#[derive(Clone, Copy, Default)]
struct LagEstimates {
    pump: f64,
    v0: f64,
    v1: f64,
    v2: f64,
    u_pump: f64,
    u_v0: f64,
    u_v1: f64,
    u_v2: f64,
    gain: f64,
    tau_pump: f64,
    tau_v0: f64,
    tau_v1: f64,
    tau_v2: f64,
}

impl LagEstimates {
    fn step(&mut self) {
        let pump_target = self.u_pump * self.gain;
        self.pump = first_order_step(self.pump, pump_target, 1.0, self.tau_pump);
        self.v0 = first_order_step(self.v0, self.u_v0, 1.0, self.tau_v0);
        self.v1 = first_order_step(self.v1, self.u_v1, 1.0, self.tau_v1);
        self.v2 = first_order_step(self.v2, self.u_v2, 1.0, self.tau_v2);
    }

    /// Water still arriving if the pump were cut now.
    fn inflow_tail(&self) -> f64 {
        INTAKE_RATE * self.pump * self.v0 * self.tau_pump
    }

    /// Water still leaving through the discharge valve if closed now.
    fn trim_tail(&self) -> f64 {
        TRIM_RATE * self.v1 * self.tau_v1
    }

    /// Water still leaving through the supply valve if closed now; the cubic
    /// characteristic decays three times faster than the opening.
    fn dose_tail(&self) -> f64 {
        DOSE_RATE * self.v2 * self.v2 * self.v2 * self.tau_v2 / 3.0
    }
}

impl DosingHandler {
    fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            phase: DosingPhase::Waiting { cooldown: 0 },
            episode: 0,
            episode_start: None,
            suppressed: false,
            setpoint: cfg.setpoint,
            gains: cfg.gains.clone(),
            noise: cfg.noise,
            dose_enabled: cfg.dose_enabled,
            est: LagEstimates {
                gain: cfg.gains[0],
                tau_pump: cfg.tau_of(TAG_PUMP).unwrap_or(4.7),
                tau_v0: cfg.tau_of(TAG_INTAKE).unwrap_or(4.7),
                tau_v1: cfg.tau_of(TAG_DISCHARGE).unwrap_or(4.7),
                tau_v2: cfg.tau_of(TAG_SUPPLY).unwrap_or(4.7),
                ..LagEstimates::default()
            },
        }
    }

    fn idle(&self) -> bool {
        matches!(self.phase, DosingPhase::Waiting { .. })
    }

    fn gain(&self) -> f64 {
        self.gains[(self.episode as usize) % self.gains.len()]
    }

    fn read_level(
        &self,
        tracer: &mut Tracer,
        t: u64,
        offset: u64,
        plant: &DosingPlant,
        rng: &mut DeterministicRng,
    ) {
        let noisy = plant.level + rng.uniform_in(-1.0, 1.0) * self.noise * self.setpoint;
        tracer.read(t, offset, TAG_TANK_LEVEL, noisy);
    }

    fn tick(
        &mut self,
        t: u64,
        plant: &mut DosingPlant,
        tracer: &mut Tracer,
        rng: &mut DeterministicRng,
    ) {
        if self.suppressed {
            return;
        }
        let sv = self.setpoint;
        let fill_target = FILL_OVERSHOOT * sv;
        let fill_base = DOSE_END_FRACTION * sv;
        match self.phase {
            DosingPhase::Waiting { cooldown } => {
                if cooldown > 0 {
                    self.phase = DosingPhase::Waiting { cooldown: cooldown - 1 };
                } else if plant.level <= REFILL_FRACTION * sv {
                    let gain = self.gain();
                    tracer.marker(t, 0, EVENT_DOSING);
                    self.episode_start = Some(t);
                    self.read_level(tracer, t, 1, plant, rng);
                    // Soft-start gain ramp, written as one batch.
                    tracer.write(t, 2, TAG_GAIN, gain / 3.0);
                    tracer.write(t, 2, TAG_GAIN, 2.0 * gain / 3.0);
                    tracer.write(t, 2, TAG_GAIN, gain);
                    plant.apply_write(TAG_GAIN, gain);
                    self.est.gain = gain;
                    tracer.write(t, 3, TAG_PUMP, 1.0);
                    plant.apply_write(TAG_PUMP, 1.0);
                    self.est.u_pump = 1.0;
                    tracer.write(t, 4, TAG_INTAKE, 1.0);
                    plant.apply_write(TAG_INTAKE, 1.0);
                    self.est.u_v0 = 1.0;
                    self.phase = DosingPhase::Filling { polls_sent: 0 };
                }
            }
            DosingPhase::Filling { polls_sent } => {
                let span = fill_target - fill_base;
                if plant.level >= fill_target {
                    let gain = self.gain();
                    self.read_level(tracer, t, 1, plant, rng);
                    tracer.write(t, 2, TAG_GAIN, 0.8 * gain);
                    tracer.write(t, 2, TAG_GAIN, 0.9 * gain);
                    tracer.write(t, 2, TAG_GAIN, gain);
                    plant.apply_write(TAG_GAIN, gain);
                    self.est.gain = gain;
                    tracer.write(t, 3, TAG_PUMP, 0.0);
                    plant.apply_write(TAG_PUMP, 0.0);
                    self.est.u_pump = 0.0;
                    tracer.write(t, 4, TAG_DISCHARGE, 1.0);
                    plant.apply_write(TAG_DISCHARGE, 1.0);
                    self.est.u_v1 = 1.0;
                    self.phase = DosingPhase::Trimming;
                } else if polls_sent < POLL_FRACTIONS.len()
                    && plant.level >= fill_base + POLL_FRACTIONS[polls_sent] * span
                {
                    self.read_level(tracer, t, 1, plant, rng);
                    self.phase = DosingPhase::Filling { polls_sent: polls_sent + 1 };
                }
            }
            DosingPhase::Trimming => {
                // Close where the settled level (after the discharge valve's
                // closing tail and the pump's inflow tail) meets the setpoint.
                let predicted =
                    plant.level + self.est.inflow_tail() - self.est.trim_tail();
                if predicted <= sv {
                    self.read_level(tracer, t, 1, plant, rng);
                    tracer.write(t, 2, TAG_DISCHARGE, 0.0);
                    plant.apply_write(TAG_DISCHARGE, 0.0);
                    self.est.u_v1 = 0.0;
                    if self.dose_enabled {
                        tracer.read(t, 3, TAG_INTAKE, plant.v0_x);
                        tracer.write(t, 4, TAG_SUPPLY, 1.0);
                        plant.apply_write(TAG_SUPPLY, 1.0);
                        self.est.u_v2 = 1.0;
                        self.phase = DosingPhase::Dosing;
                    } else {
                        self.phase = DosingPhase::Holding;
                    }
                }
            }
            DosingPhase::Dosing => {
                let predicted =
                    plant.level + self.est.inflow_tail() - self.est.dose_tail();
                if predicted <= DOSE_END_FRACTION * sv {
                    self.read_level(tracer, t, 1, plant, rng);
                    tracer.write(t, 2, TAG_SUPPLY, 0.0);
                    plant.apply_write(TAG_SUPPLY, 0.0);
                    self.est.u_v2 = 0.0;
                    tracer.write(t, 3, TAG_INTAKE, 0.0);
                    plant.apply_write(TAG_INTAKE, 0.0);
                    self.est.u_v0 = 0.0;
                    self.phase = DosingPhase::Closing;
                }
            }
            DosingPhase::Closing => {
                self.read_level(tracer, t, 1, plant, rng);
                self.episode += 1;
                self.episode_start = None;
                self.phase = DosingPhase::FinalRead;
            }
            DosingPhase::FinalRead => {
                self.phase = DosingPhase::Waiting { cooldown: 8 };
            }
            DosingPhase::Holding => {}
        }
    }
}

// ── Attackers ───────────────────────────────────────────────────────────────

#[derive(Clone, Copy)]
enum OldsmarPhase {
    WaitEpisode,
    WaitStrike { episode_start: u64 },
    WaitDose { episode_start: u64 },
    Padding { remaining: usize },
    Done,
}

#[derive(Clone, Copy)]
enum MimicryPhase {
    WaitEpisode,
    Bursting { hijack_t: u64, burst_idx: usize },
    WaitDose { hijack_t: u64 },
    Done,
}

#[derive(Clone, Copy)]
enum AgentState {
    Oldsmar(OldsmarPhase),
    Stealth { injected: u32, next_t: u64 },
    Toggle { injected: u32, next_t: u64, next_value: f64 },
    Mimicry(MimicryPhase),
}

struct Agent {
    spec: AttackSpec,
    state: AgentState,
    scada_label: Option<CycleInterval>,
    process_label: Option<SecondsInterval>,
}

const MIMICRY_BURSTS: [usize; 7] = [2, 3, 2, 3, 2, 3, 3];
const OLDSMAR_OP_TOTAL: usize = 24;

impl Agent {
    fn new(spec: AttackSpec) -> Self {
        let state = match spec.category {
            AttackCategory::Oldsmar => AgentState::Oldsmar(OldsmarPhase::WaitEpisode),
            AttackCategory::StealthIncrement => {
                AgentState::Stealth { injected: 0, next_t: spec.start_s }
            }
            AttackCategory::Toggle => {
                AgentState::Toggle { injected: 0, next_t: spec.start_s, next_value: 1.0 }
            }
            AttackCategory::Mimicry => AgentState::Mimicry(MimicryPhase::WaitEpisode),
        };
        Self { spec, state, scada_label: None, process_label: None }
    }

    fn mark_scada(&mut self, cycles: u64) {
        let label = self
            .scada_label
            .get_or_insert(CycleInterval { start_cycles: cycles, end_cycles: cycles });
        label.start_cycles = label.start_cycles.min(cycles);
        label.end_cycles = label.end_cycles.max(cycles);
    }

    fn mark_process_onset(&mut self, t: u64) {
        self.process_label
            .get_or_insert(SecondsInterval { start_s: t as f64, end_s: t as f64 });
    }

    fn extend_process(&mut self, t: u64) {
        if let Some(label) = &mut self.process_label {
            label.end_s = label.end_s.max(t as f64);
        }
    }

    fn tick(
        &mut self,
        t: u64,
        plant: &mut DosingPlant,
        handler: &mut DosingHandler,
        tracer: &mut Tracer,
        rng: &mut DeterministicRng,
    ) {
        // Phases can fall through within one tick (e.g. latching onto an
        // episode and striking in the same second).
        loop {
            let state = self.state;
            match state {
                AgentState::Oldsmar(OldsmarPhase::WaitEpisode) => {
                    if let Some(start) = handler.episode_start {
                        // Latch onto the first episode starting after the
                        // configured attack time.
                        if start >= self.spec.start_s {
                            self.state = AgentState::Oldsmar(OldsmarPhase::WaitStrike {
                                episode_start: start,
                            });
                            continue;
                        }
                    }
                }
                AgentState::Oldsmar(OldsmarPhase::WaitStrike { episode_start }) => {
                    if t >= episode_start + 2 {
                        // Covert re-asserts of the values the handler already
                        // set, so the plant state is untouched.
                        let gain = handler.gain();
                        let noisy = plant.level
                            + rng.uniform_in(-1.0, 1.0) * handler.noise * handler.setpoint;
                        tracer.read(t, 11, TAG_TANK_LEVEL, noisy);
                        tracer.write(t, 12, TAG_GAIN, gain / 3.0);
                        tracer.write(t, 12, TAG_GAIN, 2.0 * gain / 3.0);
                        tracer.write(t, 12, TAG_GAIN, gain);
                        tracer.write(t, 13, TAG_INTAKE, 1.0);
                        self.mark_scada(tracer.cycles(t, 13));
                        self.state =
                            AgentState::Oldsmar(OldsmarPhase::WaitDose { episode_start });
                    }
                }
                AgentState::Oldsmar(OldsmarPhase::WaitDose { episode_start }) => {
                    if t >= episode_start + self.spec.delay_s {
                        tracer.read(t, 11, TAG_INTAKE, plant.v0_x);
                        tracer.write(t, 12, TAG_SUPPLY, 1.0);
                        plant.apply_write(TAG_SUPPLY, 1.0);
                        self.mark_scada(tracer.cycles(t, 12));
                        self.mark_process_onset(t);
                        self.state = AgentState::Oldsmar(OldsmarPhase::Padding { remaining: 0 });
                    }
                }
                AgentState::Oldsmar(OldsmarPhase::Padding { .. }) => {
                    self.extend_process(t);
                    // Watch the dump through the level meter, one poll per
                    // second, until the hijacked operation reaches its
                    // nominal length (late handler polls count too).
                    if tracer.since_marker < OLDSMAR_OP_TOTAL {
                        let noisy = plant.level
                            + rng.uniform_in(-1.0, 1.0) * handler.noise * handler.setpoint;
                        tracer.read(t, 11, TAG_TANK_LEVEL, noisy);
                        if tracer.since_marker >= OLDSMAR_OP_TOTAL {
                            self.state = AgentState::Oldsmar(OldsmarPhase::Done);
                        }
                    } else {
                        self.state = AgentState::Oldsmar(OldsmarPhase::Done);
                    }
                }
                AgentState::Oldsmar(OldsmarPhase::Done) => self.extend_process(t),
                AgentState::Stealth { injected, next_t } => {
                    if injected < self.spec.count && t >= next_t && t >= self.spec.start_s {
                        let new_gain = plant.gain * (1.0 + self.spec.fraction);
                        let target = self.spec.target.clone();
                        tracer.write(t, 7, &target, new_gain);
                        plant.apply_write(&target, new_gain);
                        self.mark_scada(tracer.cycles(t, 7));
                        if self.spec.fraction > 0.0 {
                            self.mark_process_onset(t);
                        }
                        self.state = AgentState::Stealth {
                            injected: injected + 1,
                            next_t: t + self.spec.period_s.max(1),
                        };
                    }
                    if self.process_label.is_some() {
                        self.extend_process(t);
                    }
                }
                AgentState::Toggle { injected, next_t, next_value } => {
                    if injected < self.spec.count && t >= next_t && t >= self.spec.start_s {
                        let target = self.spec.target.clone();
                        tracer.write(t, 7, &target, next_value);
                        plant.apply_write(&target, next_value);
                        self.mark_scada(tracer.cycles(t, 7));
                        self.mark_process_onset(t);
                        self.state = AgentState::Toggle {
                            injected: injected + 1,
                            next_t: t + self.spec.period_s.max(1),
                            next_value: 1.0 - next_value,
                        };
                    }
                    if self.process_label.is_some() {
                        self.extend_process(t);
                    }
                }
                AgentState::Mimicry(MimicryPhase::WaitEpisode) => {
                    if let Some(start) = handler.episode_start {
                        if start >= self.spec.start_s {
                            // Hijack the handler mid-fill, 10 s in.
                            if t >= start + 10 {
                                handler.suppressed = true;
                                tracer.marker(t, 5, EVENT_DOSING);
                                self.mark_scada(tracer.cycles(t, 5));
                                self.state = AgentState::Mimicry(MimicryPhase::Bursting {
                                    hijack_t: t,
                                    burst_idx: 0,
                                });
                                continue;
                            }
                        }
                    }
                }
                AgentState::Mimicry(MimicryPhase::Bursting { hijack_t, burst_idx }) => {
                    let due = hijack_t + (burst_idx as u64) * self.spec.period_s.max(1);
                    if t >= due && burst_idx < MIMICRY_BURSTS.len() {
                        // Bursts after the first are preceded by a level read,
                        // mirroring the handler's monitor-then-act pattern.
                        if burst_idx > 0 {
                            let noisy = plant.level
                                + rng.uniform_in(-1.0, 1.0) * handler.noise * handler.setpoint;
                            tracer.read(t, 1, TAG_TANK_LEVEL, noisy);
                        }
                        for _ in 0..MIMICRY_BURSTS[burst_idx] {
                            let new_gain = plant.gain * (1.0 + self.spec.fraction);
                            let target = self.spec.target.clone();
                            tracer.write(t, 2, &target, new_gain);
                            plant.apply_write(&target, new_gain);
                        }
                        self.mark_scada(tracer.cycles(t, 2));
                        self.mark_process_onset(t);
                        self.state = if burst_idx + 1 == MIMICRY_BURSTS.len() {
                            AgentState::Mimicry(MimicryPhase::WaitDose { hijack_t })
                        } else {
                            AgentState::Mimicry(MimicryPhase::Bursting {
                                hijack_t,
                                burst_idx: burst_idx + 1,
                            })
                        };
                    }
                    self.extend_process(t);
                }
                AgentState::Mimicry(MimicryPhase::WaitDose { hijack_t }) => {
                    // Honor the learned control time: the supply opens only
                    // after the benign fill interval has elapsed since the
                    // episode's own intake opening (~10 s before the hijack).
                    if t >= hijack_t + self.spec.delay_s.saturating_sub(10) {
                        tracer.marker(t, 0, EVENT_DOSING);
                        let noisy = plant.level
                            + rng.uniform_in(-1.0, 1.0) * handler.noise * handler.setpoint;
                        tracer.read(t, 1, TAG_TANK_LEVEL, noisy);
                        tracer.write(t, 2, TAG_SUPPLY, 1.0);
                        plant.apply_write(TAG_SUPPLY, 1.0);
                        self.mark_scada(tracer.cycles(t, 2));
                        self.state = AgentState::Mimicry(MimicryPhase::Done);
                    }
                    self.extend_process(t);
                }
                AgentState::Mimicry(MimicryPhase::Done) => self.extend_process(t),
            }
            break;
        }
    }
}


// ── Conveyor scenario ───────────────────────────────────────────────────────

struct ConveyorPlant {
    speed: f64,
    gain: f64,
    enabled: bool,
    tau: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ConveyorPhase {
    Waiting { cooldown: u32 },
    Accelerating { polls_sent: usize },
    Cruising { until: u64 },
    Stopping,
}

struct ConveyorHandler {
    phase: ConveyorPhase,
    episode: u32,
    gains: Vec<f64>,
    noise: f64,
}

impl ConveyorHandler {
    fn gain(&self) -> f64 {
        self.gains[(self.episode as usize) % self.gains.len()]
    }
}

fn simulate_conveyor(cfg: &ScenarioConfig) -> Result<SimOutput, SimError> {
    let mut plant = ConveyorPlant {
        speed: 0.0,
        gain: cfg.gains[0],
        enabled: false,
        tau: cfg.tau_of(TAG_MOTOR).unwrap_or(7.0),
    };
    let mut handler = ConveyorHandler {
        phase: ConveyorPhase::Waiting { cooldown: 0 },
        episode: 0,
        gains: cfg.gains.clone(),
        noise: cfg.noise,
    };
    let mut tracer = Tracer::new(cfg.scan_cycles_per_second);
    let mut series = Vec::new();
    let mut rng = DeterministicRng::seed_from_u64(cfg.seed).fork(0x0153);
    let mut t = 0u64;

    loop {
        if t >= cfg.duration_s
            && matches!(handler.phase, ConveyorPhase::Waiting { .. })
            && handler.episode as usize % cfg.gains.len() == 0
        {
            break;
        }
        if t >= cfg.duration_s + 3600 {
            break;
        }
        let mut frame = SeriesFrame { ts: t as f64, values: Default::default() };
        frame
            .values
            .insert(Tag::from(TAG_SPEED), plant.speed + rng.uniform_in(-1.0, 1.0) * cfg.noise);
        frame.values.insert(Tag::from(TAG_MOTOR), plant.speed);
        frame.values.insert(Tag::from(TAG_BELT_GAIN), plant.gain);
        series.push(frame);

        match handler.phase {
            ConveyorPhase::Waiting { cooldown } => {
                if cooldown > 0 {
                    handler.phase = ConveyorPhase::Waiting { cooldown: cooldown - 1 };
                } else if plant.speed <= 0.02 {
                    let gain = handler.gain();
                    tracer.marker(t, 0, EVENT_CONVEYOR);
                    let noisy = plant.speed + rng.uniform_in(-1.0, 1.0) * handler.noise;
                    tracer.read(t, 1, TAG_SPEED, noisy);
                    tracer.write(t, 2, TAG_BELT_GAIN, gain / 2.0);
                    tracer.write(t, 2, TAG_BELT_GAIN, gain);
                    plant.gain = gain;
                    tracer.write(t, 3, TAG_MOTOR, 1.0);
                    plant.enabled = true;
                    handler.phase = ConveyorPhase::Accelerating { polls_sent: 0 };
                }
            }
            ConveyorPhase::Accelerating { polls_sent } => {
                let thresholds = [0.5, 0.9];
                if polls_sent < thresholds.len()
                    && plant.speed >= thresholds[polls_sent] * plant.gain
                {
                    let noisy = plant.speed + rng.uniform_in(-1.0, 1.0) * handler.noise;
                    tracer.read(t, 1, TAG_SPEED, noisy);
                    if polls_sent + 1 == thresholds.len() {
                        handler.phase = ConveyorPhase::Cruising { until: t + 15 };
                    } else {
                        handler.phase = ConveyorPhase::Accelerating { polls_sent: polls_sent + 1 };
                    }
                }
            }
            ConveyorPhase::Cruising { until } => {
                if t >= until {
                    let noisy = plant.speed + rng.uniform_in(-1.0, 1.0) * handler.noise;
                    tracer.read(t, 1, TAG_SPEED, noisy);
                    tracer.write(t, 2, TAG_MOTOR, 0.0);
                    plant.enabled = false;
                    handler.episode += 1;
                    handler.phase = ConveyorPhase::Stopping;
                }
            }
            ConveyorPhase::Stopping => {
                if plant.speed <= 0.02 {
                    handler.phase = ConveyorPhase::Waiting { cooldown: 2 };
                }
            }
        }

        let dt = 1.0 / SUBSTEPS as f64;
        for _ in 0..SUBSTEPS {
            let target = if plant.enabled { plant.gain } else { 0.0 };
            plant.speed = first_order_step(plant.speed, target, dt, plant.tau);
        }
        t += 1;
    }

    Ok(SimOutput {
        records: tracer.records,
        series,
        events: cfg.event_set(),
        labels: Labels::default(),
        scan_cycles_per_second: cfg.scan_cycles_per_second,
        episodes: handler.episode,
    })
}

// ── Entry points ────────────────────────────────────────────────────────────

/// Run a scenario, optionally with an injected attack. Deterministic for a
/// given (config, attack, seed).
pub fn simulate(cfg: &ScenarioConfig, attack: Option<&AttackSpec>) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    if let Some(spec) = attack {
        spec.validate(cfg)?;
    }
    if cfg.duration_s == 0 {
        return Ok(SimOutput {
            events: cfg.event_set(),
            scan_cycles_per_second: cfg.scan_cycles_per_second,
            ..SimOutput::default()
        });
    }
    match cfg.kind {
        ScenarioKind::Conveyor => simulate_conveyor(cfg),
        ScenarioKind::Dosing => simulate_dosing(cfg, attack),
    }
}

fn simulate_dosing(
    cfg: &ScenarioConfig,
    attack: Option<&AttackSpec>,
) -> Result<SimOutput, SimError> {
    let mut plant = DosingPlant::new(cfg);
    let mut handler = DosingHandler::new(cfg);
    let mut tracer = Tracer::new(cfg.scan_cycles_per_second);
    let mut series = Vec::new();
    let mut rng = DeterministicRng::seed_from_u64(cfg.seed).fork(0x0157);
    let mut agent = attack.map(|spec| Agent::new(spec.clone()));
    let mut t = 0u64;

    // One full gain cycle runs unrecorded so the plant settles onto its
    // periodic orbit; recorded episodes are then repeatable tick-for-tick.
    // A hold-at-setpoint run has no cycle to settle, so it records at once.
    let warmup_episodes = if cfg.dose_enabled { cfg.gains.len() as u32 } else { 0 };
    let mut rec_start: Option<u64> = None;

    loop {
        if rec_start.is_none() && handler.episode >= warmup_episodes && handler.idle() {
            rec_start = Some(t);
        }
        if t >= cfg.duration_s + 7200 {
            break; // absolute safety stop
        }
        let recording = rec_start.is_some();
        let rt = rec_start.map(|r| t - r).unwrap_or(0);

        if let Some(rec) = rec_start {
            let elapsed = t - rec;
            let recorded = handler.episode - warmup_episodes;
            let stop = if agent.is_some() || !cfg.dose_enabled {
                elapsed >= cfg.duration_s
            } else {
                elapsed >= cfg.duration_s
                    && handler.idle()
                    && recorded > 0
                    && recorded as usize % cfg.gains.len() == 0
            };
            if stop || elapsed >= cfg.duration_s + 3600 {
                break;
            }
        }

        // Log the frame before any command lands this tick.
        let level_noise = rng.uniform_in(-1.0, 1.0) * cfg.noise * cfg.setpoint;
        let flow_noise = rng.uniform_in(-1.0, 1.0) * cfg.noise * DOSE_RATE;
        if recording {
            let mut frame = SeriesFrame { ts: rt as f64, values: Default::default() };
            frame.values.insert(Tag::from(TAG_TANK_LEVEL), plant.level + level_noise);
            frame
                .values
                .insert(Tag::from(TAG_SUPPLY_FLOW), plant.supply_flow() + flow_noise);
            frame.values.insert(Tag::from(TAG_PUMP), plant.pump_x);
            frame.values.insert(Tag::from(TAG_INTAKE), plant.v0_x);
            frame.values.insert(Tag::from(TAG_DISCHARGE), plant.v1_x);
            frame.values.insert(Tag::from(TAG_SUPPLY), plant.v2_x);
            frame.values.insert(Tag::from(TAG_GAIN), plant.gain);
            series.push(frame);
        }

        if recording {
            handler.tick(rt, &mut plant, &mut tracer, &mut rng);
            if let Some(agent) = &mut agent {
                agent.tick(rt, &mut plant, &mut handler, &mut tracer, &mut rng);
            }
        } else {
            // Warm-up commands go to a scratch sink.
            let mut scratch = Tracer::new(cfg.scan_cycles_per_second);
            handler.tick(t, &mut plant, &mut scratch, &mut rng);
        }

        plant.integrate();
        handler.est.step();
        if !plant.level.is_finite() {
            return Err(SimError::Diverged { t, level: plant.level });
        }
        t += 1;
    }

    let labels = match (&agent, attack) {
        (Some(agent), Some(spec)) => Labels {
            attack: Some(alloc::format!("{}", spec.category)),
            scada: agent.scada_label.into_iter().collect(),
            process: agent.process_label.into_iter().collect(),
        },
        _ => Labels::default(),
    };

    Ok(SimOutput {
        records: tracer.records,
        series,
        events: cfg.event_set(),
        labels,
        scan_cycles_per_second: cfg.scan_cycles_per_second,
        episodes: handler.episode.saturating_sub(warmup_episodes),
    })
}

/// One benign run per setpoint, with per-run seed offsets.
pub fn sweep_setpoints(
    cfg: &ScenarioConfig,
    setpoints: &[f64],
) -> Result<Vec<SimOutput>, SimError> {
    let mut runs = Vec::with_capacity(setpoints.len());
    for (i, &sv) in setpoints.iter().enumerate() {
        if sv <= 0.0 {
            return Err(SimError::InvalidConfig("setpoints must be positive"));
        }
        let mut run_cfg = cfg.clone();
        run_cfg.setpoint = sv;
        run_cfg.seed = cfg.seed.wrapping_add(i as u64);
        runs.push(simulate(&run_cfg, None)?);
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{segment_operations, validate_records, validate_series, Op};
    use alloc::vec;

    fn ops_of(out: &SimOutput) -> Vec<crate::trace::ProcessControlOperation> {
        segment_operations(&out.records, &out.events).operations
    }

    #[test]
    fn lag_step_matches_analytic_solution() {
        // After exactly tau seconds a released actuator sits at e^-1 of its
        // initial value.
        let tau = 4.7;
        let mut x = 1.0;
        let steps = 47;
        let dt = tau / steps as f64;
        for _ in 0..steps {
            x = first_order_step(x, 0.0, dt, tau);
        }
        assert!((x - math::exp(-1.0)).abs() < 1e-6);
    }

    #[test]
    fn zero_duration_yields_empty_outputs() {
        let mut cfg = ScenarioConfig::dosing();
        cfg.duration_s = 0;
        let out = simulate(&cfg, None).unwrap();
        assert!(out.records.is_empty());
        assert!(out.series.is_empty());
    }

    #[test]
    fn identical_config_and_seed_reproduce_byte_identical_outputs() {
        let cfg = ScenarioConfig::dosing();
        let a = simulate(&cfg, None).unwrap();
        let b = simulate(&cfg, None).unwrap();
        assert_eq!(a, b);
        let atk = AttackSpec::oldsmar();
        let c = simulate(&cfg, Some(&atk)).unwrap();
        let d = simulate(&cfg, Some(&atk)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn benign_run_is_well_formed() {
        let cfg = ScenarioConfig::dosing();
        let out = simulate(&cfg, None).unwrap();
        validate_records(&out.records).unwrap();
        validate_series(&out.series).unwrap();
        assert!(out.episodes >= 2);
        assert_eq!(out.episodes as usize % cfg.gains.len(), 0);
    }

    #[test]
    fn every_benign_episode_has_24_commands_and_expected_counts() {
        let cfg = ScenarioConfig::dosing();
        let out = simulate(&cfg, None).unwrap();
        let ops = ops_of(&out);
        assert_eq!(ops.len(), out.episodes as usize);
        for op in &ops {
            assert_eq!(op.commands.len(), 24, "episode schedule is fixed");
            let writes = |tag: &str| {
                op.commands.iter().filter(|c| c.op == Op::Write && c.tag == tag).count()
            };
            assert_eq!(writes(TAG_GAIN), 6);
            assert_eq!(writes(TAG_PUMP), 2);
            assert_eq!(writes(TAG_INTAKE), 2);
            assert_eq!(writes(TAG_DISCHARGE), 2);
            assert_eq!(writes(TAG_SUPPLY), 2);
        }
    }

    #[test]
    fn level_stays_physical() {
        let cfg = ScenarioConfig::dosing();
        let out = simulate(&cfg, None).unwrap();
        for frame in &out.series {
            let level = frame.get(TAG_TANK_LEVEL).unwrap();
            // Logged level carries sensor noise; truth is clamped into
            // [0, capacity].
            assert!(level >= -2.0 * cfg.noise * cfg.setpoint);
            assert!(level <= CAPACITY_FACTOR * cfg.setpoint * (1.0 + 2.0 * cfg.noise));
        }
    }

    #[test]
    fn level_converges_to_setpoint_without_dosing() {
        let mut cfg = ScenarioConfig::dosing();
        cfg.dose_enabled = false;
        cfg.noise = 0.0;
        cfg.duration_s = 200;
        let out = simulate(&cfg, None).unwrap();
        // After the fill/trim transient the level holds within 2% of S_V.
        let tail: Vec<f64> = out
            .series
            .iter()
            .filter(|f| f.ts >= 160.0)
            .map(|f| f.get(TAG_TANK_LEVEL).unwrap())
            .collect();
        assert!(!tail.is_empty());
        for level in tail {
            assert!(
                (level - cfg.setpoint).abs() <= 0.02 * cfg.setpoint,
                "level {level} vs setpoint {}",
                cfg.setpoint
            );
        }
    }

    #[test]
    fn intake_shutoff_decays_monotonically() {
        let mut cfg = ScenarioConfig::dosing();
        cfg.noise = 0.0;
        let out = simulate(&cfg, None).unwrap();
        // Follow |dL/dt| after an intake-close command, one tau later, while
        // everything is commanded shut (the post-dose window).
        let close_ts = out
            .records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Command(c)
                    if c.op == Op::Write && c.tag == TAG_INTAKE && c.value == 0.0 =>
                {
                    Some(c.ts / cfg.scan_cycles_per_second)
                }
                _ => None,
            })
            .next()
            .expect("benign run closes the intake");
        let tau = cfg.tau_of(TAG_INTAKE).unwrap() as u64;
        let start = (close_ts + tau) as usize;
        let levels: Vec<f64> = out.series[start..(start + 6).min(out.series.len())]
            .iter()
            .map(|f| f.get(TAG_TANK_LEVEL).unwrap())
            .collect();
        let mut prev_rate = f64::INFINITY;
        for pair in levels.windows(2) {
            let rate = (pair[1] - pair[0]).abs();
            assert!(rate <= prev_rate + 1e-9, "rate must decay after one tau");
            prev_rate = rate;
        }
    }

    #[test]
    fn attack_runs_deviate_from_their_benign_twin_inside_the_label() {
        let cfg = ScenarioConfig::dosing();
        let benign = simulate(&cfg, None).unwrap();
        for spec in [
            AttackSpec::oldsmar(),
            AttackSpec::stealth_increment(),
            AttackSpec::toggle(),
            AttackSpec::mimicry(),
        ] {
            let attacked = simulate(&cfg, Some(&spec)).unwrap();
            let label = attacked
                .labels
                .process
                .first()
                .copied()
                .unwrap_or_else(|| panic!("{} run must carry a process label", spec.category));
            // Some process tag must deviate from the benign twin within the
            // labeled interval.
            let mut deviated = false;
            for (a, b) in attacked.series.iter().zip(&benign.series) {
                if a.ts < label.start_s || a.ts > label.end_s {
                    continue;
                }
                for (tag, &va) in &a.values {
                    let vb = b.get(tag).unwrap_or(va);
                    if (va - vb).abs() > 1e-6 {
                        deviated = true;
                    }
                }
            }
            assert!(deviated, "{} label overlaps no deviation", spec.category);
            assert!(!attacked.labels.scada.is_empty());
        }
    }

    #[test]
    fn mimicry_operation_reproduces_the_reference_burst_pattern() {
        let cfg = ScenarioConfig::dosing();
        let out = simulate(&cfg, Some(&AttackSpec::mimicry())).unwrap();
        let ops = ops_of(&out);
        let attack_op = ops
            .iter()
            .find(|op| {
                op.commands.iter().filter(|c| c.op == Op::Write && c.tag == TAG_GAIN).count()
                    == 18
            })
            .expect("mimicry operation present");
        assert_eq!(attack_op.commands.len(), 24);
        let bursts = crate::deps::burst_sizes(attack_op);
        assert_eq!(bursts[&Tag::from(TAG_GAIN)], vec![2, 3, 2, 3, 2, 3, 3]);
    }

    #[test]
    fn oldsmar_attack_operation_is_ratio_neutral() {
        let cfg = ScenarioConfig::dosing();
        let out = simulate(&cfg, Some(&AttackSpec::oldsmar())).unwrap();
        let ops = ops_of(&out);
        // The attacked episode is the padded 24-command operation whose
        // supply-valve opening comes from the attacker.
        let attacked = ops
            .iter()
            .find(|op| {
                op.commands.iter().filter(|c| c.op == Op::Write).count() == 10
                    && op.commands.iter().any(|c| c.op == Op::Write && c.tag == TAG_SUPPLY)
            })
            .expect("attacked operation present");
        assert_eq!(attacked.commands.len(), 24, "attacker pads the operation");
        let freq = crate::deps::control_frequency(attacked);
        assert_eq!(freq[&Tag::from(TAG_GAIN)], (6, 24));
        assert_eq!(freq[&Tag::from(TAG_INTAKE)], (2, 24));
    }

    #[test]
    fn toggle_with_zero_period_is_rejected() {
        let cfg = ScenarioConfig::dosing();
        let mut spec = AttackSpec::toggle();
        spec.period_s = 0;
        assert!(matches!(simulate(&cfg, Some(&spec)), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn stealth_with_zero_fraction_only_rewrites_the_same_value() {
        let cfg = ScenarioConfig::dosing();
        let mut spec = AttackSpec::stealth_increment();
        spec.fraction = 0.0;
        let out = simulate(&cfg, Some(&spec)).unwrap();
        let benign = simulate(&cfg, None).unwrap();
        // The gain column never deviates from the benign twin while both
        // runs cover the same seconds: the injected writes are no-ops.
        for (a, b) in out.series.iter().zip(&benign.series) {
            assert_eq!(a.get(TAG_GAIN), b.get(TAG_GAIN));
        }
        assert!(out.labels.process.is_empty());
    }

    #[test]
    fn unknown_attack_target_is_rejected() {
        let cfg = ScenarioConfig::dosing();
        let mut spec = AttackSpec::stealth_increment();
        spec.target = Tag::from("Nope.9");
        assert!(matches!(simulate(&cfg, Some(&spec)), Err(SimError::UnknownTarget { .. })));
    }

    #[test]
    fn sweep_produces_one_run_per_setpoint() {
        let mut cfg = ScenarioConfig::dosing();
        cfg.duration_s = 1; // stops at the first even episode boundary
        let runs = sweep_setpoints(&cfg, &[2.35]).unwrap();
        assert_eq!(runs.len(), 1);
        assert!(runs[0].episodes >= 2);
        let runs = sweep_setpoints(&cfg, &[]).unwrap();
        assert!(runs.is_empty());
        assert!(sweep_setpoints(&cfg, &[-1.0]).is_err());
    }

    #[test]
    fn conveyor_run_is_well_formed_and_even() {
        let cfg = ScenarioConfig::conveyor();
        let out = simulate(&cfg, None).unwrap();
        validate_records(&out.records).unwrap();
        validate_series(&out.series).unwrap();
        assert!(out.episodes >= 2);
        assert_eq!(out.episodes as usize % cfg.gains.len(), 0);
        let ops = ops_of(&out);
        for op in &ops {
            assert_eq!(op.commands.len(), 8);
        }
    }
}
