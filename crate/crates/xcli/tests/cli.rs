use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fracnelson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracnelson"))
        .args(args)
        .env("FRACNELSON_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn empty_ladder_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"experiment":"nelson-estimate","process":"fbm:0.7","t":0.5,"ladder":[],"paths":"many","colour":1}"#,
    );
    let o = fracnelson(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("3 schema error(s)"), "{err}");
    for key in ["ladder", "paths", "colour"] {
        assert!(err.contains(key), "{key} missing from: {err}");
    }
}

#[test]
fn xi_of_threshold_kernel_lands_within_one_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("xi.json");
    let o = fracnelson(&["nelson", "classify-kernel", "--kernel", "threshold:0.5", "--xi", "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&json);
    let (v, mesh) = (r["summary"]["value"].as_f64().unwrap(), r["summary"]["mesh"].as_f64().unwrap());
    assert!((v - 0.5).abs() <= mesh, "xi={v} mesh={mesh}");
}

#[test]
fn brownian_present_derivative_is_zero_and_check_gates_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let base = r#""experiment":"nelson-estimate","process":"fbm:0.5","sigma_field":"present","t":0.5,
        "direction":"forward","paths":20000,"seed":7"#;
    let good = write(
        dir.path(),
        "good.json",
        &format!(r#"{{{base},"expect":{{"metric":"slope","target":0.0,"tolerance":0.1}}}}"#),
    );
    let json = dir.path().join("r.json");
    let o = fracnelson(&["run", "--config", &good, "--check", "--json", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&json);
    assert_eq!(r["schema"], "fracnelson-report/1");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!(r["tolerances"].is_object());
    assert_eq!(r["config"]["ladder"], serde_json::json!([0.2, 0.1, 0.05]));

    let bad = write(
        dir.path(),
        "bad.json",
        &format!(r#"{{{base},"expect":{{"metric":"slope","target":5.0,"tolerance":0.1}}}}"#),
    );
    assert_eq!(fracnelson(&["run", "--config", &bad, "--check"]).status.code(), Some(2));
    assert_eq!(fracnelson(&["run", "--config", &bad]).status.code(), Some(0));
}

#[test]
fn same_config_and_seed_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = |name: &str| {
        let p = dir.path().join(name);
        let o = fracnelson(&[
            "nelson", "estimate", "--process", "fbm:0.7", "--t", "0.5", "--paths", "5000", "--seed", "3", "--csv",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(p).unwrap()
    };
    let (a, b) = (csv("a.csv"), csv("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("experiment,cell,parameters,estimate,se,verdict\r\n"));
    assert!(text.lines().count() > 10);
}

#[test]
fn ensembles_round_trip_and_corruption_names_the_magic() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("e.bin");
    let o = fracnelson(&["simulate", "--hurst", "0.7", "--n", "20", "--paths", "2000", "--out", bin.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let est = |p: &Path| fracnelson(&["nelson", "estimate", "--process", "fbm:0.7", "--t", "0.5", "--ensemble", p.to_str().unwrap()]);
    assert!(est(&bin).status.success());

    let mut bytes = std::fs::read(&bin).unwrap();
    bytes[..4].copy_from_slice(b"FNE0");
    let bad = dir.path().join("bad.bin");
    std::fs::write(&bad, &bytes).unwrap();
    let o = est(&bad);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FNE1"), "{}", stderr(&o));
}

#[test]
fn invalid_thread_cap_is_an_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_fracnelson"))
        .args(["nelson", "classify-kernel", "--kernel", "fbm:0.7", "--t", "0.5"])
        .env("FRACNELSON_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FRACNELSON_THREADS"));
}

#[test]
fn solver_and_operator_subcommands_write_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let o = fracnelson(&["solve-sde", "--hurst", "0.75", "--sigma", "sine", "--b", "constant:1", "--n", "256", "--out", x.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let y = dir.path().join("y.csv");
    let o = fracnelson(&["frac-op", "--op", "rl-integral", "--order", "0.5", "--input", x.to_str().unwrap(), "--out", y.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(y).unwrap();
    assert!(text.starts_with("t,value\r\n"));
    assert_eq!(text.lines().count(), 258);
}

#[test]
fn fast_suite_is_deterministic_and_flags_only_known_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let o = fracnelson(&["verify", "--suite", "fast", "--seed", "5", "--csv", p.to_str().unwrap()]);
        (o.status.code(), std::fs::read(p).unwrap())
    };
    let (code, a) = run("a.csv");
    let (_, b) = run("b.csv");
    assert_eq!(code, Some(2));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let failing: Vec<&str> = text.lines().filter(|l| l.ends_with(",fail")).collect();
    assert_eq!(failing.len(), 2, "{failing:?}");
    assert!(failing.iter().any(|l| l.starts_with("3,")));
    assert!(failing.iter().any(|l| l.starts_with("12,") && l.contains("semigroup")));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&p).unwrap();
            let cfg = fracnelson_cli::ExperimentConfig::parse(&text);
            assert!(cfg.is_ok(), "{}: {}", p.display(), cfg.unwrap_err());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
