use uscparity::harness::*;

#[test]
fn axis_parsing() {
    let a: Axis = "5:50:40".parse().unwrap();
    assert_eq!(a, Axis::linear(5.0, 50.0, 40));
    let v = a.values();
    assert_eq!(v.len(), 40);
    assert_eq!(v[0], 5.0);
    assert_eq!(v[39], 50.0);
    let l: Axis = "0.01:1:3:log".parse().unwrap();
    let v = l.values();
    assert!((v[1] - 0.1).abs() < 1e-14);
    assert!("1:2".parse::<Axis>().is_err());
    assert!("1:2:3:cubic".parse::<Axis>().is_err());
}

#[test]
fn key_values_round_trip() {
    let mut cfg = RunConfig::default();
    cfg.set("g-over-kappa", "20").unwrap();
    cfg.set("cut_g_over_kappa", "[10, 30]").unwrap();
    let text = cfg.to_key_values();
    let mut back = RunConfig::default();
    back.apply_str(&text).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn trace_grid_ends_at_t_end() {
    let t = trace_times(10.0, 0.01);
    assert_eq!(t.len(), 1001);
    assert_eq!(*t.last().unwrap(), 10.0);
    assert!((t[500] - 5.0).abs() < 1e-12);
}

#[test]
fn validation() {
    let mut cfg = RunConfig::default();
    assert!(cfg.validate().is_ok());
    cfg.g_over_delta = 0.25;
    assert!(cfg.validate().is_err());
    let mut cfg = RunConfig::default();
    cfg.sweep.g_over_omega_r.points = 1;
    assert!(cfg.validate().is_err());
}

use std::collections::HashMap;

use uscparity::model::{ParityLabel, Validity};
use uscparity::pointer::ModelKind;

fn csv_rows(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::str::from_utf8(bytes).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn small_sweep() -> SweepSpec {
    SweepSpec { g_over_kappa: "10:40:3".parse().unwrap(), g_over_omega_r: "0.1:0.5:3".parse().unwrap() }
}

#[test]
fn phase_portrait_csv() {
    let mut buf = Vec::new();
    let rows = run_phase_portrait(&RunConfig::default(), &mut buf).unwrap();
    let (header, body) = csv_rows(&buf);
    assert_eq!(header, ["label", "model", "I", "Q", "residual"]);
    assert_eq!(body.len(), 8);
    assert_eq!(rows.len(), 8);
    let by_key: HashMap<(ParityLabel, ModelKind), _> = rows.iter().map(|r| ((r.label, r.model), r.steady)).collect();
    for model in [ModelKind::Exact, ModelKind::Rwa] {
        assert_eq!(by_key[&(ParityLabel::Ge, model)], by_key[&(ParityLabel::Eg, model)]);
    }
    let exact_ee = by_key[&(ParityLabel::Ee, ModelKind::Exact)];
    let rwa_ee = by_key[&(ParityLabel::Ee, ModelKind::Rwa)];
    assert!(exact_ee.re.abs() < rwa_ee.re.abs());
    // the printed values parse back to 12 significant digits
    let i: f64 = body[3][2].parse().unwrap();
    assert!((i - exact_ee.re).abs() <= 1e-11 * exact_ee.re.abs());
}

#[test]
fn phase_portrait_models_coincide_near_rwa_limit() {
    let cfg = RunConfig { g_over_omega_r: 1e-3, ..RunConfig::default() };
    let rows = phase_portrait(&cfg).unwrap();
    for label in ParityLabel::ALL {
        let get = |m| rows.iter().find(|r| r.label == label && r.model == m).unwrap().steady;
        let d = (get(ModelKind::Exact) - get(ModelKind::Rwa)).norm();
        assert!(d <= 1e-3, "{label}: {d}");
    }
}

#[test]
fn undriven_time_trace_is_zero() {
    let cfg = RunConfig { eps_over_kappa: 0.0, ..RunConfig::default() };
    let mut buf = Vec::new();
    let trajs = run_time_trace(&cfg, ParityLabel::Ee, &mut buf).unwrap();
    assert_eq!(trajs.len(), 2);
    let (header, body) = csv_rows(&buf);
    assert_eq!(header, ["t", "re", "im", "model"]);
    assert_eq!(body.len(), 2 * 1001);
    assert!(body.iter().all(|r| r[1].parse::<f64>().unwrap() == 0.0 && r[2].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn time_trace_ends_at_steady_value() {
    let cfg = RunConfig::default();
    let trajs = time_trace(&cfg, ParityLabel::Ee).unwrap();
    let portrait = phase_portrait(&cfg).unwrap();
    for traj in &trajs {
        let row = portrait.iter().find(|r| r.label == ParityLabel::Ee && r.model == traj.model_kind).unwrap();
        let end = traj.final_amplitude();
        assert!((end - row.steady).norm() <= row.residual + 1e-9, "{:?}", traj.model_kind);
    }
    // late-time ripple: largest change between neighbouring samples
    let jitter = |k: usize| {
        let a = &trajs[k].amplitudes;
        a[a.len() - 200..].windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0_f64, f64::max)
    };
    assert_eq!(trajs[0].model_kind, ModelKind::Exact);
    assert!(jitter(0) > 20.0 * jitter(1), "{} vs {}", jitter(0), jitter(1));
}

#[test]
fn heatmap_is_deterministic_and_row_major() {
    let cfg = RunConfig::default();
    let sweep = small_sweep();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let points = run_fidelity_heatmap(&sweep, &cfg, &mut a).unwrap();
    run_fidelity_heatmap(&sweep, &cfg, &mut b).unwrap();
    assert_eq!(a, b);
    let (header, body) = csv_rows(&a);
    assert_eq!(header, FIDELITY_HEADER);
    assert_eq!(body.len(), 18);
    assert_eq!(points.len(), 18);
    let expected: Vec<(f64, f64)> = sweep.points();
    for (k, p) in points.iter().enumerate() {
        assert_eq!((p.g_over_kappa, p.g_over_omega_r), expected[k / 2]);
        assert_eq!(p.model, if k % 2 == 0 { ModelKind::Exact } else { ModelKind::Rwa });
        assert!(p.error.is_none());
        assert_eq!(p.validity, Validity::Pass);
    }
}

#[test]
fn rwa_rows_do_not_depend_on_omega_r() {
    let cfg = RunConfig { model: uscparity::ModelSelection::Rwa, ..RunConfig::default() };
    let points = fidelity_heatmap(&small_sweep(), &cfg).unwrap();
    for row in points.chunks(3) {
        let f0 = row[0].f_avg().unwrap();
        for p in row {
            assert!((p.f_avg().unwrap() - f0).abs() <= 1e-9, "{} vs {f0}", p.f_avg().unwrap());
        }
    }
}

#[test]
fn heatmap_records_point_failures() {
    // omega_m = omega_r - delta_r turns negative for small omega_r
    let cfg = RunConfig { delta_r_over_kappa: 50.0, g_over_omega_r: 0.1, ..RunConfig::default() };
    let sweep = SweepSpec { g_over_kappa: "15:20:2".parse().unwrap(), g_over_omega_r: "0.1:0.5:2".parse().unwrap() };
    let mut buf = Vec::new();
    let points = run_fidelity_heatmap(&sweep, &cfg, &mut buf).unwrap();
    assert!(points.iter().any(|p| p.error.is_some()));
    assert!(points.iter().any(|p| p.error.is_none()));
    let (_, body) = csv_rows(&buf);
    let failed = body.iter().find(|r| !r[10].is_empty()).unwrap();
    assert!(failed[7].is_empty());
}

#[test]
fn exact_heatmap_is_monotone() {
    let cfg = RunConfig { model: uscparity::ModelSelection::Exact, ..RunConfig::default() };
    let sweep = SweepSpec { g_over_kappa: "5:50:6".parse().unwrap(), g_over_omega_r: "0.01:0.5:6".parse().unwrap() };
    let f: Vec<f64> = fidelity_heatmap(&sweep, &cfg).unwrap().iter().map(|p| p.f_avg().unwrap()).collect();
    for i in 0..6 {
        for j in 0..6 {
            if j + 1 < 6 {
                assert!(f[i * 6 + j + 1] >= f[i * 6 + j] - 1e-3);
            }
            if i + 1 < 6 {
                assert!(f[(i + 1) * 6 + j] >= f[i * 6 + j] - 1e-3);
            }
        }
    }
}

#[test]
fn fidelity_cut_structure() {
    let cfg = RunConfig { cut_g_over_omega_r: "0.001:0.5:11".parse().unwrap(), ..RunConfig::default() };
    let mut buf = Vec::new();
    let points = run_fidelity_cut(&cfg, &[15.0, 50.0], &mut buf).unwrap();
    assert_eq!(points.len(), 2 * 11 * 2);
    let series = |gk: f64, m: ModelKind| -> Vec<(f64, f64)> {
        points
            .iter()
            .filter(|p| p.g_over_kappa == gk && p.model == m)
            .map(|p| (p.g_over_omega_r, p.f_avg().unwrap()))
            .collect()
    };
    let exact15 = series(15.0, ModelKind::Exact);
    let rwa15 = series(15.0, ModelKind::Rwa);
    assert!(exact15.windows(2).all(|w| w[1].1 > w[0].1));
    for (e, r) in exact15.iter().zip(&rwa15) {
        if e.0 >= 0.1 {
            assert!(e.1 > r.1, "g/omega_r = {}", e.0);
        }
    }
    assert!((exact15[0].1 - rwa15[0].1).abs() <= 1e-3);
    let gap = |gk| series(gk, ModelKind::Exact).last().unwrap().1 - series(gk, ModelKind::Rwa).last().unwrap().1;
    assert!(gap(50.0) < gap(15.0));
}

#[test]
fn oracle_check_passes_at_operating_point() {
    let mut buf = Vec::new();
    let check = run_oracle_check(&RunConfig::default(), &mut buf).unwrap();
    assert!(check.passed(), "{:?}", check.failures());
    assert_eq!(check.reports.len(), 4);
    let (header, body) = csv_rows(&buf);
    assert_eq!(header, ["check", "label", "metric", "value", "threshold", "status"]);
    assert!(body.iter().all(|r| r[5] != "fail"));
}

#[test]
fn oracle_check_flags_a_corrupted_shift() {
    let cfg = RunConfig { oracle_chi_scale: 2.0, ..RunConfig::default() };
    let check = oracle_check(&cfg).unwrap();
    assert!(!check.passed());
    let failed: Vec<_> = check.failures().iter().map(|r| (r.label.clone(), r.metric)).collect();
    assert!(failed.contains(&("ee".to_string(), "relative_deviation")));
    assert!(failed.contains(&("gg".to_string(), "relative_deviation")));
}

#[test]
fn oracle_check_without_drive_is_trivial() {
    let cfg = RunConfig { eps_over_kappa: 0.0, ..RunConfig::default() };
    let check = oracle_check(&cfg).unwrap();
    assert!(check.passed());
    assert!(check.reports.iter().all(|r| r.max_deviation == 0.0));
}

#[test]
fn oracle_trajectories_are_exported() {
    let dir = std::env::temp_dir().join(format!("uscparity-traj-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("traj.csv");
    let cfg = RunConfig { oracle_trajectory_out: Some(path.clone()), model: uscparity::ModelSelection::Rwa, ..RunConfig::default() };
    run_oracle_check(&cfg, std::io::sink()).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let (header, body) = csv_rows(&bytes);
    assert_eq!(header, TRAJECTORY_HEADER);
    assert!(body.iter().any(|r| r[4] == "oracle_dispersive"));
    assert!(body.iter().any(|r| r[4] == "exact"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn json_and_env_overrides() {
    let mut cfg = RunConfig::default();
    cfg.apply_str(r#"{"g_over_kappa": 20, "model": "rwa", "cut_g_over_kappa": [10, 30], "oracle_rabi": true}"#).unwrap();
    assert_eq!(cfg.g_over_kappa, 20.0);
    assert_eq!(cfg.model, uscparity::ModelSelection::Rwa);
    assert_eq!(cfg.cut_g_over_kappa, vec![10.0, 30.0]);
    assert!(cfg.oracle_rabi);
    cfg.apply_env([("USCPARITY_T_END", "12"), ("USCPARITY_CONFIG", "ignored"), ("OTHER", "x")]).unwrap();
    assert_eq!(cfg.t_end, 12.0);
    assert!(cfg.apply_env([("USCPARITY_TOL", "abc")]).is_err());
    assert!(cfg.apply_str("no_such_key = 1").is_err());
    assert!(cfg.apply_str("# only a comment\n\n").is_ok());
}

#[test]
fn invalid_configs_are_rejected() {
    for (k, v) in [("g_over_delta", "0.3"), ("t_end", "5"), ("eps_over_kappa", "-1"), ("sweep_g_over_omega_r", "0.5:0.1:4")] {
        let mut cfg = RunConfig::default();
        cfg.set(k, v).unwrap();
        assert!(cfg.validate().is_err(), "{k} = {v}");
    }
    assert!(phase_portrait(&RunConfig { g_over_kappa: -1.0, ..RunConfig::default() }).is_err());
}
