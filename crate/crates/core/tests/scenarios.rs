use dcsim::analytics::dc_availability;
use dcsim::config::{ScenarioConfig, SweepConfig, SweepPoint};
use dcsim::harness::{self, canned, list_scenarios, run_availability_sweep, run_scenario, validate};
use dcsim::trace::{read_trace, MemorySink, NullSink};
use dcsim::world::simulate;

fn all_canned() -> Vec<ScenarioConfig> {
    list_scenarios().iter().flat_map(|e| canned(e.name).unwrap()).collect()
}

#[test]
fn canned_configs_survive_toml_round_trip() {
    for cfg in all_canned() {
        let text = cfg.to_toml_string();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg, "{}", cfg.name);
        validate(&back).unwrap();
    }
}

#[test]
fn validation_names_the_offending_field() {
    let base = canned("fig5b-aggregation").unwrap().remove(0);
    type Mutation = Box<dyn Fn(&mut ScenarioConfig)>;
    let cases: Vec<(Mutation, &str)> = vec![
        (Box::new(|c| c.links[1].psi_s = 0.0), "links[1].psi_s"),
        (Box::new(|c| c.links[0].gamma_s = -1.0), "links[0].gamma_s"),
        (Box::new(|c| c.duration_s = 0.0), "duration_s"),
        (Box::new(|c| c.sample_interval_s = 0.0), "sample_interval_s"),
        (Box::new(|c| c.events[0].at_s = -2.0), "events[0]"),
    ];
    for (mutate, want) in cases {
        let mut c = base.clone();
        mutate(&mut c);
        let err = validate(&c).unwrap_err();
        assert!(err.path.starts_with(want), "expected {want}, got {err}");
    }
}

#[test]
fn toml_syntax_error_reports_a_line() {
    let err = ScenarioConfig::from_toml_str("name = \"x\"\nseed = \"not a number\"\n").unwrap_err();
    assert!(err.path.starts_with("line"), "{err}");
}

#[test]
fn trace_file_agrees_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = canned("opt3x-scg-split").unwrap().remove(0);
    let r = run_scenario(&cfg, dir.path()).unwrap();
    let rows = read_trace(std::fs::File::open(&r.trace_path).unwrap()).unwrap();
    let paths = harness::rows_by_path(&rows);
    assert_eq!(paths.len(), r.paths.len());
    let samples = (cfg.duration_s / cfg.sample_interval_s).round() as usize;
    for (id, rows) in &paths {
        assert_eq!(rows.len(), samples, "{id}");
    }
    let bytes_per_mbps = cfg.sample_interval_s * 1e6 / 8.0;
    for p in &r.paths {
        let (_, rows) = paths.iter().find(|(id, _)| *id == p.path_id).unwrap();
        let traced: f64 = rows.iter().map(|x| x.throughput_mbps * bytes_per_mbps).sum();
        assert!((traced - p.useful_bytes as f64).abs() <= rows.len() as f64, "{}", p.path_id);
    }
    let json: harness::RunReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("opt3x-scg-split.json")).unwrap()).unwrap();
    assert_eq!(json, r);
}

#[test]
fn seed_controls_stochastic_runs() {
    let mut cfg = canned("duplicate-reliability").unwrap().remove(0);
    cfg.duration_s = 200.0;
    let run = |c: &ScenarioConfig| {
        let mut sink = MemorySink::default();
        simulate(c, &mut sink).unwrap();
        dcsim::trace::render_csv(&sink.samples)
    };
    let a = run(&cfg);
    assert_eq!(a, run(&cfg));
    cfg.seed += 1;
    assert_ne!(a, run(&cfg));
}

#[test]
fn sweep_tracks_closed_form() {
    let mut base = canned("duplicate-reliability").unwrap().remove(0);
    base.duration_s = 20_000.0;
    base.mptcp.demand_mbps = Some(0.024);
    base.sweep = Some(SweepConfig {
        points: vec![SweepPoint { psi_s: 8.0, gamma_s: 2.0 }, SweepPoint { psi_s: 9.5, gamma_s: 0.5 }],
    });
    let rows = run_availability_sweep(&base).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let single = r.psi_s / (r.psi_s + r.gamma_s);
        assert_eq!(r.theta_single, single);
        assert_eq!(r.theta_dc_analytic, dc_availability(single, single).unwrap());
        assert!((r.theta_dc_exact - r.theta_dc_analytic).abs() < 0.02, "{r:?}");
        assert!((r.theta_dc_empirical - r.theta_dc_analytic).abs() < 0.02, "{r:?}");
        assert!((r.theta_single_empirical - single).abs() < 0.03, "{r:?}");
    }
    // parallel execution does not change the result
    assert_eq!(rows, run_availability_sweep(&base).unwrap());
}

#[test]
fn sweep_without_grid_is_a_config_error() {
    let base = canned("fig5b-backup").unwrap().remove(0);
    let err = run_availability_sweep(&base).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn scripted_outage_shows_in_trace() {
    let cfg = canned("opt3x-scg-split").unwrap().remove(0);
    let mut sink = MemorySink::default();
    let s = simulate(&cfg, &mut sink).unwrap();
    let nr_down: Vec<f64> =
        sink.samples.iter().filter(|x| !x.path("nr").unwrap().up).map(|x| x.t.as_secs_f64()).collect();
    assert!(!nr_down.is_empty());
    assert!(nr_down.iter().all(|&t| (6.0..8.0).contains(&t)), "{nr_down:?}");
    assert!(s.totals.app_bytes > 0);
    // NullSink leaves the summary unchanged
    assert_eq!(simulate(&cfg, &mut NullSink).unwrap().totals, s.totals);
}
