use bridge_core::constraints::{build_constraint_model, ModelOptions};
use bridge_core::itb::{derive_inertia, InertiaConfig};
use bridge_core::pinn::{fit_scaling, make_sequences, train, window_loss_terms, PinnHyper};
use bridge_core::sim::{simulate, ScenarioConfig};
use bridge_core::trace::TraceRecord;

#[test]
fn probe_gamma_tradeoff() {
    let cfg = ScenarioConfig::dosing();
    let benign = simulate(&cfg, None).unwrap();
    let commands: Vec<_> = benign.records.iter().filter_map(|r| match r {
        TraceRecord::Command(c) => Some(c.clone()),
        _ => None,
    }).collect();
    let icfg = InertiaConfig { delta: cfg.inertia_delta, scan_cycles_per_second: 1000 };
    let profile = derive_inertia(&benign.series, &commands, &icfg).unwrap();
    let scaling = fit_scaling(&benign.series, &cfg.pinn_tags).unwrap();
    let batch = make_sequences(&benign.series, profile.itb as usize, &scaling).unwrap();

    let _ = build_constraint_model(&[], &ModelOptions::default());
    for gamma in [0.0, 0.01, 0.02, 0.05, 0.1] {
        let mut hyper = PinnHyper::for_window(profile.itb as usize, cfg.pinn_tags.len(), profile.inertia_seconds);
        hyper.seed = cfg.seed;
        hyper.epochs = 30;
        hyper.latent = 6;
        hyper.learning_rate = 5e-3;
        hyper.gamma = gamma;
        let (model, _) = train(&batch, &hyper).unwrap();
        let mut mse = 0.0;
        let mut pde = 0.0;
        for w in &batch.windows {
            let t = window_loss_terms(&model, w, None);
            mse += t.mse;
            pde += t.pde;
        }
        let n = batch.windows.len() as f64;
        println!("gamma={gamma}: mse={:.5} pde={:.5} theta={:.5}", mse / n, pde / n, model.theta);
    }
}
