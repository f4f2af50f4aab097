use std::path::Path;

use hyperlim::driver::config::DiscretizationKind;
use hyperlim::driver::presets;
use hyperlim::driver::{run, RunConfig, Setup};
use hyperlim::high_order::{HighOrderMethod, MassMode};
use hyperlim::solver::Scheme;

fn preset_config(name: &str, disc: DiscretizationKind) -> RunConfig {
    let mut cfg = RunConfig { problem: name.into(), discretization: disc, strict: true, ..RunConfig::default() };
    let preset = presets::find(name).unwrap();
    cfg.mesh.cells = if preset.dim == 1 { 60 } else { 10 };
    cfg.time.max_steps = 15;
    cfg
}

#[test]
fn every_preset_runs_strict_on_both_discretizations() {
    for name in presets::names() {
        for disc in [DiscretizationKind::Fv, DiscretizationKind::CgP1] {
            let cfg = preset_config(name, disc);
            let out = run(&cfg).unwrap_or_else(|e| panic!("{name} {disc:?}: {e}"));
            let preset = presets::find(name).unwrap();
            let finished = (out.summary.time - preset.t_final).abs() <= 1e-12;
            assert!(out.summary.steps == 15 || finished, "{name} {disc:?}: {} steps", out.summary.steps);
            assert!(out.summary.worst_slack.values().all(|&s| s >= -1e-10), "{name} {disc:?}: {:?}", out.summary.worst_slack);
            assert!(out.summary.ell_min.is_some_and(|l| (0.0..=1.0).contains(&l)));
        }
    }
}

#[test]
fn every_high_order_method_stays_within_bounds() {
    for method in [HighOrderMethod::Smoothness, HighOrderMethod::Greedy, HighOrderMethod::Commutator] {
        for (disc, mass) in [
            (DiscretizationKind::Fv, MassMode::Lumped),
            (DiscretizationKind::CgP1, MassMode::Consistent),
            (DiscretizationKind::CgP1, MassMode::ApproximateInverse),
        ] {
            for problem in ["sod", "dam_break", "burgers_step"] {
                let mut cfg = preset_config(problem, disc);
                cfg.high_order.method = method;
                cfg.high_order.mass = mass;
                cfg.time.max_steps = 40;
                let out = run(&cfg).unwrap_or_else(|e| panic!("{problem} {method:?} {mass:?}: {e}"));
                assert!(out.summary.worst_slack.values().all(|&s| s >= -1e-10));
            }
        }
    }
}

#[test]
fn periodic_sourceless_runs_conserve_every_component() {
    for problem in ["sod", "dam_break", "advection_sine_2d", "radial_sod"] {
        for disc in [DiscretizationKind::Fv, DiscretizationKind::CgP1] {
            let mut cfg = preset_config(problem, disc);
            cfg.mesh.periodic = Some(true);
            cfg.time.max_steps = 50;
            let out = run(&cfg).unwrap();
            for (k, drift) in out.summary.mass_drift_relative.iter().enumerate() {
                assert!(*drift <= 1e-12, "{problem} {disc:?} component {k}: {drift:e}");
            }
        }
    }
}

#[test]
fn limited_scheme_is_more_accurate_than_low_order_on_sod() {
    let error = |scheme: Scheme| {
        let cfg = RunConfig { problem: "sod".into(), scheme, ..RunConfig::default() };
        let setup = Setup::new(&cfg).unwrap();
        let done = setup.integrate(|_, _| Ok(())).unwrap();
        let exact = setup.exact_state(done.t).unwrap();
        let masses = setup.graph.masses();
        (0..masses.len()).map(|i| masses[i] * (done.state[i][0] - exact[i][0]).abs()).sum::<f64>()
    };
    let (low, limited) = (error(Scheme::LowOrder), error(Scheme::Limited));
    assert!(limited < 0.6 * low, "limited {limited:e}, low order {low:e}");
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = RunConfig { problem: "dam_break".into(), scheme: Scheme::Limited, seed: 9, ..RunConfig::default() };
    cfg.discretization = DiscretizationKind::CgP1;
    cfg.mesh.jitter = 0.2;
    cfg.high_order.mass = MassMode::Consistent;
    cfg.limiter.relax = true;
    cfg.time.t_final = Some(0.3);
    let text = cfg.to_toml_string();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            Setup::new(&cfg).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
