use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pneusim_cli::config::{FatigueBlock, ToolkitConfig};
use pneusim_cli::exit_code;
use pneusim_core::Error;

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn pneusim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pneusim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_replaced(from: &str, to: &str) -> String {
    let text = ToolkitConfig::default().to_toml().unwrap();
    assert!(text.contains(from), "default config lacks {from}");
    text.replacen(from, to, 1)
}

#[test]
fn default_config_round_trips_through_toml() {
    let cfg = ToolkitConfig::default();
    let back = ToolkitConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(ToolkitConfig::from_toml("").unwrap(), cfg);
    assert!(matches!(cfg.fatigue, FatigueBlock::Calibrate(_)));
}

#[test]
fn shipped_configs_load() {
    let base = ToolkitConfig::load(&repo_file("configs/pneunet.toml")).unwrap();
    assert_eq!(base.seeds.master, 42);
    let calibrated = ToolkitConfig::load(&repo_file("configs/calibrated.toml")).unwrap();
    assert!(matches!(calibrated.fatigue, FatigueBlock::Params(_)));
}

#[test]
fn dimensioned_values_need_matching_units() {
    let wrong_unit = with_replaced("chamber_width = \"4 mm\"", "chamber_width = \"4 kPa\"");
    assert!(matches!(ToolkitConfig::from_toml(&wrong_unit), Err(Error::Config(_))));
    let bare = with_replaced("chamber_width = \"4 mm\"", "chamber_width = 4.0");
    assert!(matches!(ToolkitConfig::from_toml(&bare), Err(Error::Config(_))));
    let converted = with_replaced("chamber_width = \"4 mm\"", "chamber_width = \"0.4 cm\"");
    let cfg = ToolkitConfig::from_toml(&converted).unwrap();
    assert!((cfg.geometry.chamber_width.value() - 4.0).abs() < 1e-12);
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(ToolkitConfig::from_toml("[mesh]\ntarget_h = \"2 mm\"\nseed_size = 3\n").is_err());
    assert!(ToolkitConfig::from_toml("surprise = 1\n").is_err());
}

#[test]
fn invalid_geometry_and_protocol_are_rejected() {
    let zero = with_replaced("n_chambers = 11", "n_chambers = 0");
    assert!(ToolkitConfig::from_toml(&zero).is_err());
    let beyond = "[protocol]\nn_steps = 12\n";
    assert!(matches!(ToolkitConfig::from_toml(beyond), Err(Error::Config(_))));
    assert!(ToolkitConfig::from_toml("trials = 0\n").is_err());
}

#[test]
fn error_kinds_map_to_exit_codes() {
    let cases = [
        (Error::Config("x".into()), 1),
        (Error::FitFailure("x".into()), 2),
        (Error::RampFailure { last_converged: 10.0 }, 3),
        (Error::Calibration("x".into()), 4),
        (Error::LogIntegrity("x".into()), 5),
    ];
    for (e, code) in cases {
        assert_eq!(exit_code(&e), code, "{e}");
    }
}

#[test]
fn fit_material_writes_model_and_rejects_degenerate_data() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("uniaxial.csv");
    let mut text = String::from("stretch,nominal_stress_MPa\n");
    let model = pneusim_core::material::HyperelasticModel::ecoflex50();
    for k in 1..=20 {
        let l = 1.0 + 0.4 * k as f64;
        // model coefficients are kPa, the file is MPa
        text.push_str(&format!("{l},{}\n", model.uniaxial_nominal_stress(l).unwrap() / 1000.0));
    }
    std::fs::write(&good, text).unwrap();
    let out = dir.path().join("fit");
    let res = pneusim(&["fit-material", good.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("material.json")).unwrap()).unwrap();
    assert_eq!(json["stress_unit"], "kPa");
    let c10 = json["model"]["coefficients"][0].as_f64().unwrap();
    assert!((c10 - 190.0).abs() < 1e-6, "{c10}");

    let flat = dir.path().join("flat.csv");
    std::fs::write(&flat, "stretch,nominal_stress_kPa\n1,0\n1,0\n1,0\n1,0\n").unwrap();
    let res = pneusim(&["fit-material", flat.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));

    let bad_header = dir.path().join("bad.csv");
    std::fs::write(&bad_header, "strain,stress\n1,0\n").unwrap();
    let res = pneusim(&["fit-material", bad_header.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn config_and_log_errors_exit_with_their_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    let res = pneusim(&["--config", missing.to_str().unwrap(), "simulate-static"]);
    assert_eq!(res.status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[geometry]\nn_chambers = 0\n").unwrap();
    let res = pneusim(&["--config", bad.to_str().unwrap(), "simulate-static"]);
    assert_eq!(res.status.code(), Some(1));

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let res = pneusim(&["--out", empty.to_str().unwrap(), "analyze", empty.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(5));
}

#[test]
fn campaign_then_analyze_reproduces_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = repo_file("configs/calibrated.toml");
    let res = pneusim(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "2",
        "run-campaign",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in [
        "manifest.json",
        "trial_1_angle.csv",
        "trial_2_pressure.csv",
        "static_curve.csv",
        "damage_history.csv",
        "report.json",
        "nrmse.csv",
        "step_errors.csv",
        "fig8a.svg",
        "fig11.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report = std::fs::read(out.join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&report).unwrap();
    assert_eq!(json["nrmse_pct"].as_array().unwrap().len(), 2);
    assert!(json["config"].get("output_dir").is_none());

    let again = dir.path().join("again");
    let res = pneusim(&["--out", again.to_str().unwrap(), "analyze", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(std::fs::read(again.join("report.json")).unwrap(), report);

    // a tampered log is a log-integrity failure
    std::fs::write(out.join("trial_2_angle.csv"), "t_s,theta_deg\n0,1\n0,2\n").unwrap();
    let res = pneusim(&["--out", again.to_str().unwrap(), "analyze", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(5));
}
