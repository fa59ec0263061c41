mod common;

use collapse_core::io::{self, LoadOptions};
use collapse_core::pipeline::{self, Command, RunParams};
use serde_json::Value;

fn close(a: &Value, b: &Value, path: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())) {
                Ok(())
            } else {
                Err(format!("{path}: {x} != {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .enumerate()
            .try_for_each(|(i, (u, v))| close(u, v, &format!("{path}/{i}"))),
        (Value::Object(x), Value::Object(y)) if x.keys().eq(y.keys()) => x
            .iter()
            .try_for_each(|(k, u)| close(u, &y[k], &format!("{path}/{k}"))),
        _ if a == b => Ok(()),
        _ => Err(format!("{path}: {a} != {b}")),
    }
}

#[test]
fn reports_match_frozen_output() {
    let expected_dir = common::fixture_dir().join("expected");
    let mut compared = 0;
    for path in common::fixtures() {
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let sc = io::load(&path, &LoadOptions::default()).unwrap().scenario;
        for cmd in [Command::Diagnose, Command::Terminal, Command::Certify] {
            let golden = expected_dir.join(format!("{stem}.{}.json", cmd.name()));
            let expected: Value =
                serde_json::from_str(&std::fs::read_to_string(&golden).unwrap()).unwrap();
            let out = pipeline::run(cmd, &sc, &RunParams::default());
            let got: Value =
                serde_json::from_str(&io::to_canonical_json(&out.report).unwrap()).unwrap();
            if let Err(e) = close(&got, &expected, "") {
                panic!("{stem} {}: {e}", cmd.name());
            }
            compared += 1;
        }
    }
    assert_eq!(compared, 15);
}

#[test]
fn fixtures_round_trip_exactly() {
    for path in common::fixtures() {
        let loaded = io::load(&path, &LoadOptions::default()).unwrap();
        assert!(loaded.warnings.is_empty(), "{}", path.display());
        let text = io::serialize_scenario(&loaded.scenario);
        let again = io::load_str(&text, &LoadOptions::default())
            .unwrap()
            .scenario;
        assert_eq!(loaded.scenario, again, "{}", path.display());
        assert_eq!(text, io::serialize_scenario(&again));
    }
}

#[test]
fn random_scenarios_round_trip_exactly() {
    for seed in 0..30 {
        let sc = common::random_scenario(&mut common::rng(seed), 101);
        let text = io::serialize_scenario(&sc);
        let again = io::load_str(&text, &LoadOptions::default())
            .unwrap()
            .scenario;
        assert_eq!(sc, again, "seed {seed}");
    }
}

#[test]
fn every_command_runs_on_every_fixture() {
    for path in common::fixtures() {
        let sc = io::load(&path, &LoadOptions::default()).unwrap().scenario;
        for cmd in Command::ALL {
            let out = pipeline::run(cmd, &sc, &RunParams::default());
            assert!(
                !out.report.partial(),
                "{} {}: {:?}",
                path.display(),
                cmd.name(),
                out.report.sections
            );
        }
    }
}
