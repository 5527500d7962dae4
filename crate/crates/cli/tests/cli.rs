use std::path::PathBuf;
use std::process::Command as Process;

use markedgibbs_cli::config::RunConfig;
use markedgibbs_cli::report::{CommandResult, Report, VerifyResult};
use markedgibbs_cli::run::run;
use markedgibbs_cli::verify::{Budget, PropertyResult};

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs")).join(format!("{name}.toml"))
}

fn load(name: &str) -> RunConfig {
    RunConfig::parse(&std::fs::read_to_string(config_path(name)).unwrap()).unwrap()
}

#[test]
fn reports_round_trip() {
    for name in ["radius", "expand", "correlate", "sample"] {
        let report = run(&load(name)).unwrap();
        let json = report.to_json().unwrap();
        let back = Report::from_json(&json).unwrap();
        assert_eq!(back, report, "{name}");
        assert_eq!(back.to_json().unwrap(), json, "{name}");
    }
}

#[test]
fn non_finite_values_round_trip() {
    let mut report = run(&load("radius")).unwrap();
    report.result = CommandResult::Verify(VerifyResult {
        budget: Budget::Quick,
        passed: false,
        properties: vec![PropertyResult {
            id: 3,
            name: "x".into(),
            passed: false,
            observed: f64::INFINITY,
            allowed: 1.0,
            detail: String::new(),
        }],
    });
    let json = report.to_json().unwrap();
    assert!(json.contains("\"inf\""));
    assert_eq!(Report::from_json(&json).unwrap(), report);
}

#[test]
fn radius_is_positive_for_the_toy_model() {
    let report = run(&load("radius")).unwrap();
    let CommandResult::Radius(r) = report.result else { panic!() };
    assert!(r.certificate.z_star > 0.0 && r.certificate.c_beta > 0.0);
    assert_eq!(report.provenance.model, "toy-repulsive-spin");
    assert!(report.provenance.interaction_range.is_none());
}

#[test]
fn expansion_vanishes_at_zero_activity() {
    let mut config = load("expand");
    config.model.parameters.insert("z".into(), 0.0);
    let report = run(&config).unwrap();
    let CommandResult::Expand(e) = report.result else { panic!() };
    assert_eq!(e.log_z, 0.0);
    assert!(e.coefficients.iter().all(|&c| c == 0.0));
    assert_eq!(report.provenance.truncation_order, Some(e.truncation_order));
}

#[test]
fn correlate_reports_every_set() {
    let report = run(&load("correlate")).unwrap();
    let CommandResult::Correlate(c) = report.result else { panic!() };
    assert_eq!(c.values.len(), 2);
    assert!(c.values.iter().all(|v| v.value > 0.0 && v.tail_bound.0 > 0.0));
}

#[test]
fn rejection_writes_a_stream() {
    let dir = std::env::temp_dir().join(format!("markedgibbs-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut config = load("rejection");
    let file = dir.join("draws.txt");
    config.sample.as_mut().unwrap().sample_file = Some(file.clone());
    config.sample.as_mut().unwrap().draws = 200;
    let report = run(&config).unwrap();
    let CommandResult::Sample(s) = report.result else { panic!() };
    let rej = s.rejection.unwrap();
    assert_eq!(rej.count_histogram.iter().sum::<u64>(), 200);
    let text = std::fs::read_to_string(&file).unwrap();
    assert_eq!(text.lines().count(), 201);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_markedgibbs");
    let ok = Process::new(bin)
        .args(["--config", config_path("radius").to_str().unwrap(), "--format", "csv"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8(ok.stdout).unwrap().starts_with("c_beta,z_star"));

    let dir = std::env::temp_dir().join(format!("markedgibbs-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\ncommand = \"expand\"\n").unwrap();
    let out = Process::new(bin).args(["--config", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("[expand]"));
    std::fs::remove_dir_all(dir).unwrap();
}
