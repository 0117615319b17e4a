//! `bridge` — learn process-control constraints from SCADA traces, train a
//! physics-informed sequence model on process series, monitor for violations,
//! and correlate both alert streams inside inertia-derived time windows.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bridge_cli::formats;
use bridge_cli::report;
use bridge_core::constraints::{build_constraint_model, EpsilonMode, ModelOptions};
use bridge_core::deps::build_graph;
use bridge_core::itb::{
    correlate, derive_inertia, CorrelationConfig, InertiaConfig, WindowConfig,
};
use bridge_core::monitor::{check_operation, stream_monitor, ScadaAlert};
use bridge_core::pinn::{fit_scaling, make_sequences, score_series, train, PinnHyper};
use bridge_core::sim::{simulate, AttackSpec, ScenarioConfig};
use bridge_core::trace::{segment_operations, Command, EventSet, TraceRecord};

#[derive(Parser)]
#[command(
    name = "bridge",
    version,
    about = "SCADA process-control constraint monitoring and process-anomaly correlation",
    after_help = "Artifacts are plain files: JSONL traces and alert streams, CSV series, \
                  versioned JSON models. A typical pipeline:\n  \
                  simulate -> learn-constraints -> derive-itb -> train-pinn -> monitor -> score -> correlate -> report"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the plant simulator and write trace, series, events, and labels.
    Simulate(SimulateArgs),
    /// Extract the Read-before-Write dependency graph from a trace.
    Extract(ExtractArgs),
    /// Learn the relative-dependency constraint model from a benign trace.
    LearnConstraints(LearnArgs),
    /// Check a trace against a constraint model and emit alerts.
    Monitor(MonitorArgs),
    /// Derive the inertia delay and inertia time block from data.
    DeriveItb(DeriveArgs),
    /// Train the physics-informed sequence model on a benign series.
    TrainPinn(TrainArgs),
    /// Score a series against a trained model and emit per-window verdicts.
    Score(ScoreArgs),
    /// Join SCADA alerts with process anomalies inside evolution windows.
    Correlate(CorrelateArgs),
    /// Render a verdict stream as a Markdown operator report.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario: a config JSON path, or a built-in name (dosing, conveyor).
    #[arg(long)]
    scenario: String,
    /// Attack: a spec JSON path, or a built-in name
    /// (oldsmar, stealth-increment, toggle, mimicry).
    #[arg(long)]
    attack: Option<String>,
    /// Seed override; all run randomness flows from this.
    #[arg(long)]
    seed: Option<u64>,
    /// Duration override in seconds.
    #[arg(long)]
    duration: Option<u64>,
    /// Setpoint override.
    #[arg(long)]
    setpoint: Option<f64>,
    /// Sensor-noise amplitude override (fraction of range).
    #[arg(long)]
    noise: Option<f64>,
    /// Output directory for trace.jsonl, series.csv, events.json, labels.json.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Event set JSON; defaults to the tags found in the trace markers.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Output graph JSON.
    #[arg(long, default_value = "graph.json")]
    out: PathBuf,
    /// Also write a DOT rendering here.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    events: Option<PathBuf>,
    /// Degree-of-dependency source: graph (measured ε) or zero (pure CV).
    #[arg(long, default_value = "graph")]
    epsilon: String,
    #[arg(long, default_value = "constraints.json")]
    out: PathBuf,
}

#[derive(Args)]
struct MonitorArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    constraints: PathBuf,
    #[arg(long)]
    events: Option<PathBuf>,
    /// Violation tolerance multiplier on every constraint.
    #[arg(long, default_value_t = 1.0)]
    tol: f64,
    /// Run the online monitor (emits provisional prefix alerts too).
    #[arg(long)]
    stream: bool,
    #[arg(long, default_value = "alerts.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Rate-decay fraction δ of the initial post-command rate.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value = "profile.json")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    series: PathBuf,
    /// Inertia profile JSON; supplies the window size and ω.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Window size override (otherwise from the profile).
    #[arg(long)]
    itb: Option<usize>,
    /// Inertia scalar ω override in seconds (otherwise from the profile).
    #[arg(long)]
    omega: Option<f64>,
    /// Comma-separated feature tags; defaults to every series column.
    #[arg(long)]
    tags: Option<String>,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Reconstruction weight α.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Latent (KL) weight β.
    #[arg(long, default_value_t = 0.001)]
    beta: f64,
    /// Physics-residual weight γ.
    #[arg(long, default_value_t = 0.02)]
    gamma: f64,
    /// Latent dimension; defaults to max(2, features/2).
    #[arg(long)]
    latent: Option<usize>,
    /// Attention heads; defaults to the window size.
    #[arg(long)]
    heads: Option<usize>,
    /// Encoder/decoder stack depth; defaults to the window size.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, default_value_t = 5e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Fraction of trailing windows held out for threshold calibration.
    #[arg(long, default_value_t = 0.25)]
    holdout: f64,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "anomalies.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    alerts: PathBuf,
    #[arg(long)]
    anomalies: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    series: PathBuf,
    /// Maximum evolution-window growth in inertia time blocks.
    #[arg(long, default_value_t = 6)]
    cap: u32,
    /// Steady-state threshold as a fraction of each tag's observed range.
    #[arg(long, default_value_t = 0.01)]
    delta_ss: f64,
    /// Scan cycles per second for alert-timestamp conversion.
    #[arg(long, default_value_t = 1000)]
    rate: u64,
    #[arg(long, default_value = "verdicts.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    verdicts: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version are successful exits; anything else is usage.
            let _ = err.print();
            return match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Extract(args) => cmd_extract(args),
        Cmd::LearnConstraints(args) => cmd_learn(args),
        Cmd::Monitor(args) => cmd_monitor(args),
        Cmd::DeriveItb(args) => cmd_derive(args),
        Cmd::TrainPinn(args) => cmd_train(args),
        Cmd::Score(args) => cmd_score(args),
        Cmd::Correlate(args) => cmd_correlate(args),
        Cmd::Report(args) => cmd_report(args),
    }
}

fn resolve_scenario(name: &str) -> Result<ScenarioConfig> {
    match name {
        "dosing" => Ok(ScenarioConfig::dosing()),
        "conveyor" => Ok(ScenarioConfig::conveyor()),
        path => formats::read_scenario(Path::new(path)),
    }
}

fn resolve_attack(name: &str) -> Result<AttackSpec> {
    match name {
        "oldsmar" => Ok(AttackSpec::oldsmar()),
        "stealth-increment" => Ok(AttackSpec::stealth_increment()),
        "toggle" => Ok(AttackSpec::toggle()),
        "mimicry" => Ok(AttackSpec::mimicry()),
        path => formats::read_attack(Path::new(path)),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = resolve_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(duration) = args.duration {
        cfg.duration_s = duration;
    }
    if let Some(setpoint) = args.setpoint {
        cfg.setpoint = setpoint;
    }
    if let Some(noise) = args.noise {
        cfg.noise = noise;
    }
    let attack = args.attack.as_deref().map(resolve_attack).transpose()?;
    let out = simulate(&cfg, attack.as_ref())
        .map_err(|e| anyhow!("simulation failed: {e}"))?;
    formats::write_sim_output(&args.out_dir, &out)?;
    eprintln!(
        "simulated {:?}: {} episodes, {} trace records, {} series frames -> {}",
        cfg.name,
        out.episodes,
        out.records.len(),
        out.series.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn load_trace_and_events(
    trace: &Path,
    events: Option<&PathBuf>,
) -> Result<(formats::TraceFile, EventSet)> {
    let parsed = formats::read_trace(trace)?;
    let events = match events {
        Some(path) => formats::read_events(path)?,
        None => EventSet::from_tags(parsed.records.iter().filter_map(|r| match r {
            TraceRecord::Marker(m) => Some(m.event.clone()),
            TraceRecord::Command(c) => c.event.clone(),
        })),
    };
    Ok((parsed, events))
}

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let (trace, events) = load_trace_and_events(&args.trace, args.events.as_ref())?;
    let seg = segment_operations(&trace.records, &events);
    if seg.preamble_warning {
        eprintln!("warning: commands before the first event marker went to a preamble operation");
    }
    let graph = build_graph(&seg.operations);
    formats::write_graph(&args.out, &graph)?;
    if let Some(dot) = &args.dot {
        formats::write_graph_dot(dot, &graph)?;
    }
    eprintln!(
        "extracted {} nodes, {} edges from {} operations -> {}",
        graph.node_count(),
        graph.edge_count(),
        seg.operations.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_learn(args: LearnArgs) -> Result<()> {
    let epsilon = match args.epsilon.as_str() {
        "graph" => EpsilonMode::FromGraph,
        "zero" => EpsilonMode::Zero,
        other => bail!("unknown epsilon mode {other:?} (expected graph or zero)"),
    };
    let (trace, events) = load_trace_and_events(&args.trace, args.events.as_ref())?;
    let seg = segment_operations(&trace.records, &events);
    if seg.preamble_warning {
        eprintln!("warning: commands before the first event marker went to a preamble operation");
    }
    if seg.operations.is_empty() {
        eprintln!("warning: no operations in trace; constraint model is empty");
    }
    let model = build_constraint_model(&seg.operations, &ModelOptions { epsilon });
    formats::write_constraints(&args.out, &model)?;
    let unmodeled: usize = model
        .events
        .values()
        .map(|ec| ec.unmodeled_pairs.len() + ec.unmodeled_bursts.len())
        .sum();
    eprintln!(
        "learned constraints for {} event(s) from {} operation(s) ({} unmodeled entries) -> {}",
        model.events.len(),
        model.total_operations,
        unmodeled,
        args.out.display()
    );
    Ok(())
}

fn cmd_monitor(args: MonitorArgs) -> Result<()> {
    let (trace, events) = load_trace_and_events(&args.trace, args.events.as_ref())?;
    let model = formats::read_constraints(&args.constraints)?;
    let alerts: Vec<ScadaAlert> = if args.stream {
        let (alerts, errors) = stream_monitor(&trace.records, &model, args.tol);
        for err in errors {
            eprintln!("warning: {err}");
        }
        alerts
    } else {
        let seg = segment_operations(&trace.records, &events);
        seg.operations
            .iter()
            .flat_map(|op| check_operation(op, &model, args.tol))
            .collect()
    };
    formats::write_alerts(&args.out, &alerts)?;
    eprintln!("{} alert(s) -> {}", alerts.len(), args.out.display());
    Ok(())
}

fn cmd_derive(args: DeriveArgs) -> Result<()> {
    let series = formats::read_series(&args.series)?;
    let trace = formats::read_trace(&args.trace)?;
    let commands: Vec<Command> = trace
        .records
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Command(c) => Some(c.clone()),
            _ => None,
        })
        .collect();
    let cfg = InertiaConfig {
        delta: args.delta,
        scan_cycles_per_second: trace.scan_cycles_per_second,
    };
    let profile = derive_inertia(&series, &commands, &cfg)
        .map_err(|e| anyhow!("cannot derive inertia: {e}"))?;
    formats::write_profile(&args.out, &profile)?;
    eprintln!(
        "inertia {:.3} s over {} event(s) ({:?}) -> itb {} -> {}",
        profile.inertia_seconds,
        profile.samples.len(),
        profile.method,
        profile.itb,
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let series = formats::read_series(&args.series)?;
    let profile = args.profile.as_ref().map(|p| formats::read_profile(p)).transpose()?;
    let itb = args
        .itb
        .or(profile.as_ref().map(|p| p.itb as usize))
        .context("window size required: pass --profile or --itb")?;
    let omega = args
        .omega
        .or(profile.as_ref().map(|p| p.inertia_seconds))
        .unwrap_or(itb as f64);
    let tags: Vec<String> = match &args.tags {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => series
            .first()
            .map(|f| f.values.keys().cloned().collect())
            .unwrap_or_default(),
    };
    if tags.is_empty() {
        bail!("no feature tags (empty series?)");
    }

    let scaling = fit_scaling(&series, &tags).map_err(|e| anyhow!("scaling: {e}"))?;
    let batch =
        make_sequences(&series, itb, &scaling).map_err(|e| anyhow!("windowing: {e}"))?;
    let mut hyper = PinnHyper::for_window(itb, tags.len(), omega);
    hyper.epochs = args.epochs;
    hyper.seed = args.seed;
    hyper.alpha = args.alpha;
    hyper.beta = args.beta;
    hyper.gamma = args.gamma;
    hyper.learning_rate = args.learning_rate;
    hyper.batch = args.batch;
    hyper.holdout = args.holdout;
    if let Some(latent) = args.latent {
        hyper.latent = latent;
    }
    if let Some(heads) = args.heads {
        hyper.heads = heads;
    }
    if let Some(layers) = args.layers {
        hyper.layers = layers;
    }

    let (mut model, training) = train(&batch, &hyper).map_err(|e| anyhow!("training: {e}"))?;
    model.scaling = scaling;
    formats::write_model(&args.out, &model)?;
    let first = training.epochs.first().copied().unwrap_or_default();
    let last = training.epochs.last().copied().unwrap_or_default();
    eprintln!(
        "trained {} windows ({} held out) for {} epochs: loss {:.5} -> {:.5}, theta {:.6} -> {}",
        training.train_windows,
        training.holdout_windows,
        hyper.epochs,
        first.total,
        last.total,
        model.theta,
        args.out.display()
    );
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let series = formats::read_series(&args.series)?;
    let model = formats::read_model(&args.model)?;
    let scored = score_series(&model, &series).map_err(|e| anyhow!("scoring: {e}"))?;
    if scored.clamped_values > 0 {
        eprintln!(
            "warning: {} value(s) fell outside the fitted scaling range and were clamped",
            scored.clamped_values
        );
    }
    let flagged = scored.windows.iter().filter(|w| w.anomalous).count();
    formats::write_windows(&args.out, &scored.windows)?;
    eprintln!(
        "scored {} window(s), {} anomalous -> {}",
        scored.windows.len(),
        flagged,
        args.out.display()
    );
    Ok(())
}

fn cmd_correlate(args: CorrelateArgs) -> Result<()> {
    let alerts = formats::read_alerts(&args.alerts)?;
    let windows = formats::read_windows(&args.anomalies)?;
    let profile = formats::read_profile(&args.profile)?;
    let series = formats::read_series(&args.series)?;
    let cfg = CorrelationConfig {
        window: WindowConfig { cap: args.cap, delta_ss: args.delta_ss },
        scan_cycles_per_second: args.rate,
    };
    let verdicts = correlate(&alerts, &windows, &profile, &series, &cfg);
    formats::write_verdicts(&args.out, &verdicts)?;
    let confirmed = verdicts
        .iter()
        .filter(|v| v.verdict == bridge_core::itb::Verdict::Confirmed)
        .count();
    eprintln!(
        "{} verdict(s), {} confirmed -> {}",
        verdicts.len(),
        confirmed,
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let verdicts = formats::read_verdicts(&args.verdicts)?;
    let rendered = report::render(&verdicts);
    match &args.out {
        Some(path) => std::fs::write(path, rendered)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(())
}
