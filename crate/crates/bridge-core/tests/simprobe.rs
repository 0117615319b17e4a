use bridge_core::constraints::{build_constraint_model, EpsilonMode, ModelOptions};
use bridge_core::itb::{correlate, derive_inertia, CorrelationConfig, InertiaConfig, Verdict};
use bridge_core::monitor::{check_operation, AlertKind, ScadaAlert};
use bridge_core::pinn::{fit_scaling, make_sequences, score_series, train, PinnHyper};
use bridge_core::sim::*;
use bridge_core::trace::segment_operations;

fn alerts_for(out: &SimOutput, model: &bridge_core::constraints::ConstraintModel) -> Vec<ScadaAlert> {
    let seg = segment_operations(&out.records, &out.events);
    seg.operations.iter().flat_map(|op| check_operation(op, model, 1.0)).collect()
}

#[test]
fn probe_full_pipeline() {
    let cfg = ScenarioConfig::dosing();
    let benign = simulate(&cfg, None).unwrap();
    println!("benign: {} episodes, {} records, {} frames", benign.episodes, benign.records.len(), benign.series.len());

    // constraints from benign
    let seg = segment_operations(&benign.records, &benign.events);
    let model = build_constraint_model(&seg.operations, &ModelOptions::default());
    let ec = model.event(EVENT_DOSING).unwrap();
    println!("time constraints:");
    for ((s, d), tc) in &ec.control_time {
        println!("  ({s}->{d}) rd={:.5} mean={:.1} eps={:.2} n={}", tc.rd, tc.mean_interval, tc.epsilon, tc.samples);
    }
    println!("burst constraints:");
    for (tag, bc) in &ec.control_burst {
        println!("  {tag} rd={:.5} mean={:.2} lambda={:.2} n={}", bc.rd, bc.mean_burst, bc.lambda, bc.samples);
    }
    println!("freq constraints:");
    for (tag, fc) in &ec.control_freq {
        println!("  {tag} rd={:.5} ops={}", fc.rd, fc.operations);
    }

    // benign replay must be silent
    let benign_alerts = alerts_for(&benign, &model);
    println!("benign alerts: {}", benign_alerts.len());
    for a in &benign_alerts { println!("  !! {:?}", a); }

    // epsilon=0 also silent
    let model0 = build_constraint_model(&seg.operations, &ModelOptions { epsilon: EpsilonMode::Zero });
    let benign_alerts0 = alerts_for(&benign, &model0);
    println!("benign alerts at eps=0: {}", benign_alerts0.len());
    for a in &benign_alerts0 { println!("  !!0 {:?}", a); }

    // Oldsmar
    let oldsmar = simulate(&cfg, Some(&AttackSpec::oldsmar())).unwrap();
    let alerts = alerts_for(&oldsmar, &model);
    println!("oldsmar alerts ({}):", alerts.len());
    for a in &alerts {
        println!("  {:?} {} -> {:?} observed={:.4} constraint={:.4} ts={}", a.kind, a.src, a.dst, a.observed, a.constraint, a.ts);
    }

    // Mimicry
    let mim = simulate(&cfg, Some(&AttackSpec::mimicry())).unwrap();
    let malerts = alerts_for(&mim, &model);
    println!("mimicry alerts ({}):", malerts.len());
    for a in &malerts {
        println!("  {:?} {} observed={:.4} constraint={:.4} ts={}", a.kind, a.src, a.observed, a.constraint, a.ts);
    }

    // ITB derivation
    let icfg = InertiaConfig { delta: cfg.inertia_delta, scan_cycles_per_second: cfg.scan_cycles_per_second };
    let commands: Vec<_> = benign.records.iter().filter_map(|r| match r {
        bridge_core::trace::TraceRecord::Command(c) => Some(c.clone()),
        _ => None,
    }).collect();
    let profile = derive_inertia(&benign.series, &commands, &icfg).unwrap();
    println!("inertia: {:.3} s, itb {}, method {:?}, {} samples", profile.inertia_seconds, profile.itb, profile.method, profile.samples.len());
}

#[test]
fn probe_pinn_correlation() {
    let cfg = ScenarioConfig::dosing();
    let benign = simulate(&cfg, None).unwrap();
    let seg = segment_operations(&benign.records, &benign.events);
    let cmodel = build_constraint_model(&seg.operations, &ModelOptions::default());

    // ITB
    let icfg = InertiaConfig { delta: cfg.inertia_delta, scan_cycles_per_second: cfg.scan_cycles_per_second };
    let commands: Vec<_> = benign.records.iter().filter_map(|r| match r {
        bridge_core::trace::TraceRecord::Command(c) => Some(c.clone()),
        _ => None,
    }).collect();
    let profile = derive_inertia(&benign.series, &commands, &icfg).unwrap();
    println!("itb={} inertia={:.3}", profile.itb, profile.inertia_seconds);

    // PINN training on benign series
    let t0 = std::time::Instant::now();
    let scaling = fit_scaling(&benign.series, &cfg.pinn_tags).unwrap();
    let batch = make_sequences(&benign.series, profile.itb as usize, &scaling).unwrap();
    let mut hyper = PinnHyper::for_window(profile.itb as usize, cfg.pinn_tags.len(), profile.inertia_seconds);
    hyper.seed = cfg.seed;
    hyper.epochs = 50;
    hyper.latent = 6;
    hyper.learning_rate = 5e-3;
    let (mut pmodel, report) = train(&batch, &hyper).unwrap();
    pmodel.scaling = scaling;
    println!("train time {:?}, {} params", t0.elapsed(), pmodel.param_count());
    for (i, e) in report.epochs.iter().enumerate() {
        if i % 5 == 0 || i + 1 == report.epochs.len() {
            println!("  epoch {i}: total={:.5} mse={:.5} kl={:.4} pde={:.4}", e.total, e.mse, e.kl, e.pde);
        }
    }
    println!("theta={:.6}", pmodel.theta);

    // benign scoring: fraction flagged
    let benign_score = score_series(&pmodel, &benign.series).unwrap();
    let frac = benign_score.windows.iter().filter(|w| w.anomalous).count() as f64 / benign_score.windows.len() as f64;
    println!("benign flagged fraction: {:.3}", frac);

    // Oldsmar: monitor + score + correlate
    let oldsmar = simulate(&cfg, Some(&AttackSpec::oldsmar())).unwrap();
    let alerts = alerts_for(&oldsmar, &cmodel);
    println!("oldsmar alerts: {}", alerts.len());
    let oscore = score_series(&pmodel, &oldsmar.series).unwrap();
    // windows near the attack
    let t_attack = oldsmar.labels.process[0].start_s;
    println!("attack at {t_attack}; windows near attack:");
    for w in &oscore.windows {
        if w.start_s >= t_attack - 8.0 && w.start_s <= t_attack + 8.0 {
            println!("  start={} score={:.6} anomalous={}", w.start_s, w.score, w.anomalous);
        }
    }
    let ccfg = CorrelationConfig { scan_cycles_per_second: cfg.scan_cycles_per_second, ..CorrelationConfig::default() };
    let verdicts = correlate(&alerts, &oscore.windows, &profile, &oldsmar.series, &ccfg);
    for v in &verdicts {
        println!("verdict: {:?} t0={:.1} window=[{:.1},{:.1}] blocks={} episode_onset={:?} devices={:?}",
            v.verdict, v.t0, v.window.t0, v.window.end, v.window.blocks,
            v.episode.map(|e| e.onset_s), v.devices);
    }
    assert!(verdicts.iter().any(|v| v.verdict == Verdict::Confirmed));
}

#[test]
fn probe_all_categories() {
    let cfg = ScenarioConfig::dosing();
    let benign = simulate(&cfg, None).unwrap();
    let seg = segment_operations(&benign.records, &benign.events);
    let cmodel = build_constraint_model(&seg.operations, &ModelOptions::default());
    let icfg = InertiaConfig { delta: cfg.inertia_delta, scan_cycles_per_second: cfg.scan_cycles_per_second };
    let commands: Vec<_> = benign.records.iter().filter_map(|r| match r {
        bridge_core::trace::TraceRecord::Command(c) => Some(c.clone()),
        _ => None,
    }).collect();
    let profile = derive_inertia(&benign.series, &commands, &icfg).unwrap();
    let scaling = fit_scaling(&benign.series, &cfg.pinn_tags).unwrap();
    let batch = make_sequences(&benign.series, profile.itb as usize, &scaling).unwrap();
    let mut hyper = PinnHyper::for_window(profile.itb as usize, cfg.pinn_tags.len(), profile.inertia_seconds);
    hyper.seed = cfg.seed;
    hyper.epochs = 50;
    hyper.latent = 6;
    hyper.learning_rate = 5e-3;
    let (mut pmodel, _) = train(&batch, &hyper).unwrap();
    pmodel.scaling = scaling;
    let ccfg = CorrelationConfig { scan_cycles_per_second: cfg.scan_cycles_per_second, ..CorrelationConfig::default() };

    // benign: no alerts -> no verdicts
    let bscore = score_series(&pmodel, &benign.series).unwrap();
    let balerts = alerts_for(&benign, &cmodel);
    let bverdicts = correlate(&balerts, &bscore.windows, &profile, &benign.series, &ccfg);
    println!("benign: alerts={} verdicts={}", balerts.len(), bverdicts.len());

    for spec in [AttackSpec::oldsmar(), AttackSpec::stealth_increment(), AttackSpec::toggle(), AttackSpec::mimicry()] {
        let cat = format!("{}", spec.category);
        let run = simulate(&cfg, Some(&spec)).unwrap();
        let alerts = alerts_for(&run, &cmodel);
        let score = score_series(&pmodel, &run.series).unwrap();
        let verdicts = correlate(&alerts, &score.windows, &profile, &run.series, &ccfg);
        let confirmed = verdicts.iter().filter(|v| v.verdict == Verdict::Confirmed).count();
        let preceding = verdicts.iter().filter(|v| v.verdict == Verdict::DiscardedPrecedingEffect).count();
        let noeffect = verdicts.iter().filter(|v| v.verdict == Verdict::DiscardedNoEffect).count();
        println!("{cat}: alerts={} confirmed={confirmed} preceding={preceding} noeffect={noeffect}", alerts.len());
        if confirmed == 0 {
            for v in &verdicts {
                println!("   {:?} t0={:.0} onset={:?} kind={:?}", v.verdict, v.t0, v.episode.map(|e| e.onset_s), v.alert.kind);
            }
            let label = run.labels.process.first();
            println!("   label={label:?}");
            for w in &score.windows {
                if w.anomalous { println!("   anom window start={}", w.start_s); }
            }
        }
    }
}
