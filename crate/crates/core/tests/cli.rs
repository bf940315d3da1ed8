use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn gglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gglab"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn zeta_check_passes() {
    let out = gglab(&["check", "zeta", "--zeta", "0.5", "--n-outer", "100000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["name"], "zeta");
    assert!((r["lhs"].as_f64().unwrap() - 0.5).abs() < 0.005);
    assert_eq!(r["pass"], true);
    for key in ["name", "lhs", "rhs", "se_lhs", "se_rhs", "se_diff", "z", "n_outer", "seed", "pass", "wall_time_s"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn main_config_is_byte_identical() {
    let args = ["check", "main", "--config", "ex/main_n2.cfg", "--seed", "7", "--n-outer", "3200"];
    let a = gglab(&args);
    let b = gglab(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn ultra_has_no_violations() {
    let out = gglab(&["struct", "ultra", "--depth", "2", "--zetas", "0.3,0.7", "--qs", "0,0.4,1", "--n", "100000"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["details"]["violations"], 0);
    assert_eq!(r["n_outer"], 100000);
}

#[test]
fn exit_codes() {
    assert_eq!(gglab(&["check", "zeta", "--zeta", "0.5", "--bogus"]).status.code(), Some(2));
    assert_eq!(gglab(&["check", "nothing"]).status.code(), Some(2));
    assert_eq!(gglab(&["check", "zeta", "--zeta", "1", "--n-outer", "64"]).status.code(), Some(2));
    assert_eq!(gglab(&["check", "main", "--config", "missing.cfg"]).status.code(), Some(2));
    assert_eq!(gglab(&["--help"]).status.code(), Some(0));
    let fail = gglab(&["struct", "prop2", "--config", "ex/prop2_violation.cfg"]);
    assert_eq!(fail.status.code(), Some(1));
    assert_eq!(json(&fail)["pass"], false);
    assert_eq!(gglab(&["check", "gg", "--config", "ex/gg_control.cfg", "--exact"]).status.code(), Some(1));
}

#[test]
fn flags_override_config() {
    let out = gglab(&["check", "gg", "--config", "ex/gg_n3.cfg", "--n-outer", "640", "--seed", "3"]);
    let r = json(&out);
    assert_eq!(r["n_outer"], 640);
    assert_eq!(r["seed"], 3);
}

#[test]
fn workers_do_not_change_output() {
    let run = |w: &str| gglab(&["check", "gg", "--config", "ex/gg_n3.cfg", "--n-outer", "3200", "--workers", w]).stdout;
    let one = run("1");
    assert_eq!(one, run("2"));
    assert_eq!(one, run("8"));
}

#[test]
fn csv_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let out = gglab(&[
        "suite", "--criteria", "8,9", "--n-outer", "320", "--format", "csv", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, gglab::cli::HEADER);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| &r[9] == "true"));
}

#[test]
fn info_commands() {
    let pd = json(&gglab(&["pd-sample", "--zeta", "0.3", "--truncation", "16", "--seed", "2"]));
    let w: Vec<f64> = serde_json::from_value(pd["weights"].clone()).unwrap();
    assert_eq!(w.len(), 16);
    assert!(w.windows(2).all(|p| p[0] >= p[1]));
    let info = json(&gglab(&["cascade-info", "--zetas", "0.3,0.7", "--qs", "0,0.5,1", "--branching", "8,32"]));
    let mass: f64 = info["mu"].as_array().unwrap().iter().map(|e| e["mass"].as_f64().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert_eq!(info["realization"]["leaves"], 32);
}

#[test]
fn every_example_config_runs() {
    let cases: [(&[&str], &str); 6] = [
        (&["check", "main"], "main_n2"),
        (&["check", "gg"], "gg_n3"),
        (&["check", "iterated"], "iterated"),
        (&["check", "weights"], "weights_n2"),
        (&["check", "th2a"], "th2a_n2"),
        (&["struct", "prop2"], "prop2"),
    ];
    for (cmd, cfg) in cases {
        let path = format!("ex/{cfg}.cfg");
        let mut args = cmd.to_vec();
        args.extend(["--config", &path, "--n-outer", "1600"]);
        let out = gglab(&args);
        assert!(matches!(out.status.code(), Some(0 | 1)), "{cfg}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(json(&out)["lhs"].is_number(), "{cfg}");
    }
}
