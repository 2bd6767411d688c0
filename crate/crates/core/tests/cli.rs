use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_commcascade");

const CONFIG: &str = r#"{
  "model": {
    "p1": {"poisson": 7}, "p2": {"poisson": 12}, "pm": {"poisson": 1},
    "n1": 1000, "n2": 1000,
    "threshold": {"linear": 0.25},
    "seeding": {"per_community": [0.05, 0]}
  },
  "engines": ["meanfield", "simulate", "ode", "contagion"],
  "sweep": [{"param": "lambda_out", "values": [0.5, 1]}],
  "replications": 3,
  "seed": 11,
  "alphas": [0.01, 0.001],
  "record_every": 200,
  "ode": {"step": 0.01}
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(BIN)
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (serde_json::Value, Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let (meta, body) = text.split_once('\n').unwrap();
    let meta = serde_json::from_str(meta.strip_prefix("# ").unwrap()).unwrap();
    let mut lines = body.lines().map(|l| l.split(',').map(String::from).collect::<Vec<_>>());
    let header = lines.next().unwrap();
    (meta, header, lines.collect())
}

#[test]
fn every_subcommand_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let expected: [(&str, &[&str]); 6] = [
        ("meanfield", &["meanfield.json"]),
        (
            "simulate",
            &["simulate.csv", "simulate_path.csv", "simulate_summary.json"],
        ),
        ("ode", &["ode.csv", "ode.json"]),
        ("evolve", &["evolve.csv", "evolve.json"]),
        ("sweep", &["sweep.csv"]),
        ("contagion", &["contagion.json"]),
    ];
    for (cmd, files) in expected {
        let out = dir.path().join(cmd);
        let o = run(cmd, &cfg, &out, &[]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert!(out.join(f).is_file(), "{cmd} did not write {f}");
        }
    }
    let mf: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("meanfield/meanfield.json")).unwrap()).unwrap();
    assert_eq!(mf["meta"]["tool"], "commcascade");
    assert_eq!(mf["meta"]["command"], "meanfield");
    assert_eq!(mf["converged"], true);
    assert!(mf["total_adoption"].as_f64().unwrap() > 0.9);

    let (meta, header, rows) = read_csv(&dir.path().join("sweep/sweep.csv"));
    assert_eq!(meta["config"]["seed"], 11);
    assert_eq!(header[..3], ["cell", "strategy", "lambda_m"]);
    assert!(header.contains(&"sim_stderr".to_string()));
    assert!(header.contains(&"contagious".to_string()));
    assert_eq!(rows.len(), 2);

    let (_, header, rows) = read_csv(&dir.path().join("simulate/simulate.csv"));
    assert_eq!(header[0], "replication");
    assert_eq!(rows.len(), 3);
}

#[test]
fn outputs_are_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        assert!(run("sweep", &cfg, out, &[]).status.success());
    }
    assert!(run("sweep", &cfg, &c, &["--seed", "12"]).status.success());
    let rows = |d: &Path| read_csv(&d.join("sweep.csv")).2;
    assert_eq!(rows(&a), rows(&b));
    assert_ne!(rows(&a), rows(&c));
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("o");
    let o = run(
        "simulate",
        &cfg,
        &out,
        &["--replications", "2", "--seed", "5", "--step", "0.002"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (meta, _, rows) = read_csv(&out.join("simulate.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(meta["config"]["seed"], 5);
    assert_eq!(meta["config"]["ode"]["step"], 0.002);
}

#[test]
fn bad_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax", "{ \"model\": "),
        ("unknown field", &CONFIG.replace("\"replications\"", "\"replicates\"")),
        (
            "theta out of range",
            &CONFIG.replace("\"linear\": 0.25", "\"linear\": 1.5"),
        ),
        (
            "zero replications",
            &CONFIG.replace("\"replications\": 3", "\"replications\": 0"),
        ),
        ("empty axis", &CONFIG.replace("[0.5, 1]", "[]")),
    ];
    for (name, text) in cases {
        let cfg = write_config(dir.path(), text);
        let o = run("meanfield", &cfg, &dir.path().join("x"), &[]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{name}");
    }
    let cfg = write_config(dir.path(), CONFIG);
    let o = run("ode", &cfg, &dir.path().join("x"), &["--step", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parse_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"model\": {\n    \"p1\": 3\n  }\n}");
    let o = run("meanfield", &cfg, &dir.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("config.json:3:"), "{err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("meanfield", &dir.path().join("absent.json"), &dir.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.json"));
}

#[test]
fn physical_ode_reports_an_eps_scan() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG.replace(
        r#""ode": {"step": 0.01}"#,
        r#""ode": {"step": 0.001, "mode": "physical_time"}"#,
    );
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("ode");
    let o = run("ode", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ode.json")).unwrap()).unwrap();
    let scan = report["eps_scan"].as_array().unwrap();
    assert!(scan.len() >= 3);
    let gaps: Vec<f64> = scan.iter().map(|e| e["fixed_point_gap"].as_f64().unwrap()).collect();
    assert!(gaps.last().unwrap() <= gaps.first().unwrap(), "{gaps:?}");
    assert!(*gaps.last().unwrap() < 1e-2, "{gaps:?}");
}

#[test]
fn unseeded_ode_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG.replace(r#""per_community": [0.05, 0]"#, r#""per_community": [0, 0]"#);
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("ode");
    let o = run("ode", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, header, rows) = read_csv(&out.join("ode.csv"));
    let cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("mu"))
        .map(|(i, _)| i)
        .collect();
    assert_eq!(cols.len(), 4, "{header:?}");
    for row in &rows {
        for &c in &cols {
            let mu: f64 = row[c].parse().unwrap();
            assert!((mu - 1.0).abs() < 1e-12, "{row:?}");
        }
    }
}
