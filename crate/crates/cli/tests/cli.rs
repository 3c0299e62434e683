use nlirf_cli::{ingest_csv, CliError};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn nlirf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlirf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(dir: &Path, name: &str, json: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(name);
    std::fs::write(&cfg, json).unwrap();
    let mut args = vec!["run", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    nlirf(&args)
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

/// `h,component,value,stderr` rows into a map keyed by `(h, component)`.
fn irf_csv(path: &Path) -> BTreeMap<(usize, usize), f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,component,value,stderr"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            ((f[0].parse().unwrap(), f[1].parse().unwrap()), f[2].parse().unwrap())
        })
        .collect()
}

const VAR_MODEL: &str = r#"{"family": "gaussian_var1", "n": 2,
    "params": {"phi": [[0.5, 0.0], [0.0, 0.5]], "d": [[1.0, 0.5], [0.0, 1.0]]}}"#;

#[test]
fn figure1_writes_four_panels_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig");
    let cfg = r#"{"command": "figure1", "mc": {"seed": 1}}"#;
    let o = run_config(tmp.path(), "f.json", cfg, &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = read_dir(&out);
    let svgs: Vec<_> = first.keys().filter(|k| k.ends_with(".svg")).collect();
    assert_eq!(svgs.len(), 4, "{svgs:?}");
    assert!(first.contains_key("manifest.json"));

    let o = run_config(tmp.path(), "f.json", cfg, &["--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(first, read_dir(&out));
}

#[test]
fn irf_on_a_var_matches_the_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("irf");
    let cfg = format!(
        r#"{{"command": "irf", "model": {VAR_MODEL},
            "shock": {{"kind": "innovation_delta", "vector": [1.0, 0.0], "horizon": 10}},
            "mc": {{"replicates": 200, "seed": 3}},
            "options": {{"state": [0.3, -0.7]}}}}"#
    );
    let o = run_config(tmp.path(), "irf.json", &cfg, &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mc = irf_csv(&out.join("irf.csv"));
    let exact = irf_csv(&out.join("irf_closed_form.csv"));
    assert_eq!(mc.len(), 22);
    for (k, v) in &exact {
        assert!((mc[k] - v).abs() < 1e-10, "{k:?}");
    }
    // 0.5^3 * (1, 0) at h = 3
    assert!((exact[&(3, 1)] - 0.125).abs() < 1e-15);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("max |EIRF - closed form|"));
}

#[test]
fn bss_on_generated_data_finds_both_roots() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bss");
    let cfg = r#"{"command": "bss", "mc": {"seed": 42}, "options": {"rho": [0.9, 0.2]}}"#;
    let o = run_config(tmp.path(), "bss.json", cfg, &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let roots: Vec<f64> = report["estimate"]["roots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(roots.len(), 2);
    assert!((roots[0] - 0.5).abs() < 0.05, "{roots:?}");
    assert!((roots[1] - 10.0 / 3.0).abs() < 0.5, "{roots:?}");
}

#[test]
fn reruns_are_byte_identical_and_manifest_records_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"command": "simulate", "model": {VAR_MODEL}, "mc": {{"seed": 5}}, "options": {{"length": 50}}}}"#);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_config(tmp.path(), "s.json", &cfg, &["--out", a.to_str().unwrap()]).status.success());
    assert!(run_config(tmp.path(), "s.json", &cfg, &["--out", b.to_str().unwrap()]).status.success());
    let (ra, rb) = (read_dir(&a), read_dir(&b));
    // the manifest embeds the effective config, including the output path
    for name in ["states.csv", "innovations.csv", "states.svg"] {
        assert_eq!(ra[name], rb[name], "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&ra["manifest.json"]).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);

    let c = tmp.path().join("c");
    let o = run_config(tmp.path(), "s.json", &cfg, &["--out", c.to_str().unwrap(), "--seed", "6"]);
    assert!(o.status.success());
    assert_ne!(read_dir(&c)["states.csv"], ra["states.csv"]);
}

#[test]
fn schema_errors_exit_2_with_the_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_config(tmp.path(), "bad.json", r#"{"command": "irf", "mc": {"seed": "x"}}"#, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mc.seed"));

    let o = run_config(tmp.path(), "bad2.json", r#"{"command": "bss", "mc": {"seed": 1}, "options": {"rhoo": 1}}"#, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("options"));

    let o = run_config(tmp.path(), "bad3.json", r#"{"command": "figure1", "mc": {}}"#, &[]);
    assert_eq!(o.status.code(), Some(2), "seed is mandatory");

    let o = run_config(tmp.path(), "bad4.json", r#"{"command": "irf", "mc": {"seed": 1}}"#, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model"));

    let o = run_config(tmp.path(), "bad5.json", r#"{"command": "fly", "mc": {"seed": 1}}"#, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("command"));
}

#[test]
fn numerical_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    // Lyapunov coefficient well above zero: the path explodes
    let cfg = r#"{"command": "simulate", "model": {"family": "dar1", "n": 1,
        "params": {"gamma": 3.0, "alpha": 1.0, "beta": 4.0}},
        "mc": {"seed": 1}, "options": {"length": 5000}}"#;
    let o = run_config(tmp.path(), "x.json", cfg, &["--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_documents_the_schema() {
    let o = nlirf(&["run", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("CONFIG SCHEMA") && text.contains("threshold_ar1") && text.contains("EXIT STATUS"));
}

#[test]
fn tests_run_on_ingested_data() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let model = r#"{"family": "dar1", "n": 1, "params": {"gamma": 0.5, "alpha": 1.0, "beta": 0.5}}"#;
    let cfg = format!(r#"{{"command": "simulate", "model": {model}, "mc": {{"seed": 9}}, "options": {{"length": 400}}}}"#);
    assert!(run_config(tmp.path(), "s.json", &cfg, &["--out", sim.to_str().unwrap()]).status.success());
    let data = sim.join("states.csv");

    let wn = tmp.path().join("wn");
    let cfg = format!(
        r#"{{"command": "wn-test", "model": {model}, "mc": {{"seed": 1}},
            "io": {{"input": {:?}, "output": {:?}}}, "options": {{"resamples": 49}}}}"#,
        data, wn
    );
    let o = run_config(tmp.path(), "wn.json", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("strong_white_noise"), "{stdout}");

    let mk = tmp.path().join("mk");
    let cfg = format!(
        r#"{{"command": "markov-test", "mc": {{"seed": 1}},
            "io": {{"input": {:?}, "output": {:?}}}, "options": {{"resamples": 49}}}}"#,
        data, mk
    );
    let o = run_config(tmp.path(), "mk.json", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(mk.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["n_obs"], 400);
}

#[test]
fn ingest_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = tmp.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let ok = write("ok.csv", "t,y1,y2\n1,0.5,1\n2,-1.25,2\n3,3e-2,3\n");
    let m = ingest_csv(&ok).unwrap();
    assert_eq!(m.shape(), (3, 2));
    assert_eq!(m[(1, 0)], -1.25);

    let line_of = |r: Result<_, CliError>| match r {
        Err(CliError::Data { line, .. }) => line,
        other => panic!("expected a data error, got {other:?}"),
    };
    assert_eq!(line_of(ingest_csv(&write("miss.csv", "t,y1,y2\n1,0.5,1\n2,,2\n"))), 3);
    assert_eq!(line_of(ingest_csv(&write("order.csv", "t,y1\n1,0.5\n3,1\n2,1\n"))), 3);
    assert_eq!(line_of(ingest_csv(&write("back.csv", "t,y1\n1,0.5\n2,1\n1,1\n"))), 4);
    assert_eq!(line_of(ingest_csv(&write("ragged.csv", "t,y1,y2\n1,0.5,1\n2,1\n"))), 3);
    assert_eq!(line_of(ingest_csv(&write("nan.csv", "t,y1\n1,abc\n"))), 2);
    assert_eq!(line_of(ingest_csv(&write("hdr.csv", "time,y1\n1,1\n"))), 1);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = nlirf_cli::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(cfg.seed().is_ok());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
