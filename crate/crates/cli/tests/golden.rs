use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pps_cli::ScenarioFile;
use pps_core::scenarios::{builtin, BUILTIN_NAMES};
use pps_core::{solve_problem, SearchConfig};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn pps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pps"))
        .args(args)
        .env_remove("PPS_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fx(name: &str) -> String {
    fixture(name).to_str().unwrap().to_string()
}

#[test]
fn exported_files_match_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    for name in BUILTIN_NAMES {
        let path = dir.path().join(format!("{name}.json"));
        let o = pps(&["examples", "export", name, path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let exported = std::fs::read(&path).unwrap();
        let golden = std::fs::read(fixture(&format!("{name}.json"))).unwrap();
        assert_eq!(exported, golden, "{name}");
        let reparsed = ScenarioFile::parse(std::str::from_utf8(&golden).unwrap())
            .unwrap()
            .render();
        assert_eq!(reparsed.as_bytes(), golden.as_slice(), "{name}");
    }
}

#[test]
fn file_and_builtin_solve_identically() {
    let cfg = SearchConfig::default();
    for name in BUILTIN_NAMES {
        let text = std::fs::read_to_string(fixture(&format!("{name}.json"))).unwrap();
        let loaded = ScenarioFile::parse(&text).unwrap().load().unwrap();
        let scenario = builtin(name).unwrap();
        assert_eq!(loaded.problem.observables, scenario.problem.observables);
        assert_eq!(loaded.problem.target, scenario.problem.target);
        assert_eq!(loaded.reference, scenario.reference_selection);
        let a = solve_problem(&loaded.problem, &cfg).unwrap();
        let b = solve_problem(&scenario.problem, &cfg).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn exit_codes() {
    let cases: Vec<(Vec<String>, i32)> = vec![
        (vec!["check".into(), fx("cheshire.json")], 0),
        (vec!["check".into(), fx("garbage.json")], 1),
        (vec!["check".into(), fx("entangled-plus.json")], 2),
        (vec!["solve".into(), fx("entangled-plus.json")], 2),
        (vec!["solve".into(), fx("four-pauli.json")], 3),
        (
            vec![
                "weak-values".into(),
                fx("cheshire.json"),
                "--pre".into(),
                "0,1,0,0".into(),
                "--post".into(),
                "1,0,0,0".into(),
            ],
            4,
        ),
        (
            vec![
                "simulate".into(),
                fx("orthogonal.json"),
                "--operator".into(),
                "sigma-z".into(),
                "--block".into(),
                "1".into(),
                "--g".into(),
                "0.01".into(),
            ],
            4,
        ),
        (
            vec![
                "simulate".into(),
                fx("four-pauli-bare.json"),
                "--operator".into(),
                "I".into(),
                "--block".into(),
                "1".into(),
                "--g".into(),
                "0.01".into(),
            ],
            5,
        ),
        (
            vec!["examples".into(), "export".into(), "nope".into(), "/tmp/x.json".into()],
            1,
        ),
        (vec!["no-such-command".into()], 1),
        (vec!["--help".into()], 0),
    ];
    for (args, code) in cases {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = pps(&refs);
        assert_eq!(
            o.status.code(),
            Some(code),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn check_cheshire_line() {
    let o = pps(&["check", &fx("cheshire.json")]);
    assert_eq!(stdout(&o), "block 1: rank 2/2 FEASIBLE; block 2: rank 2/2 FEASIBLE\n");
    let o = pps(&["check", &fx("entangled-plus.json")]);
    assert_eq!(stdout(&o), "block 1: rank 6/7 INFEASIBLE\n");
}

#[test]
fn solve_reports() {
    let o = pps(&["solve", &fx("cheshire.json")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("block 1 (path1): SOLVED"));
    assert!(text.contains("pre |Psi>: ["));
    assert!(text.contains("photon-number  1      0\n"), "{text}");
    assert!(text.contains("sigma-z        0      1\n"), "{text}");
    assert!(text.ends_with("verdict: PASS\n"));

    let o = pps(&["solve", &fx("four-pauli.json")]);
    let text = stdout(&o);
    assert_eq!(
        text.matches("RANK1_NOT_FOUND best residual 1 (unique linear solution)")
            .count(),
        4
    );

    let o = pps(&["solve", &fx("entangled-minus.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("SOLVED"));
}

#[test]
fn solve_json_carries_the_report() {
    let o = Command::new(env!("CARGO_BIN_EXE_pps"))
        .args(["solve", &fx("cheshire.json"), "--json"])
        .env("PPS_SEED", "7")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["exit_code"], 0);
    assert_eq!(v["blocks"][1]["status"], "SOLVED");
    let w = &v["verification"]["weak_values"];
    assert!((w[0][0][0].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(w[0][1][0].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(v["selection"]["pre"].as_array().unwrap().len(), 4);

    let flag = pps(&["solve", &fx("cheshire.json"), "--json", "--seed", "7"]);
    assert_eq!(flag.stdout, o.stdout);

    let o = pps(&["solve", &fx("four-pauli.json"), "--json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["exit_code"], 3);
    assert_eq!(v["blocks"][2]["exact"], true);
    assert!(v["selection"].is_null());
}

#[test]
fn weak_value_verdicts() {
    let o = pps(&[
        "weak-values",
        &fx("cheshire.json"),
        "--post",
        "0.5,0.5,0.5,0.5",
        "--pre",
        "0.5,0.5,0.5,-0.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).ends_with("verdict: PASS\n"));

    let o = pps(&[
        "weak-values",
        &fx("four-pauli.json"),
        "--post",
        "1,1,1,1,1,1,1,1",
        "--pre",
        "1,1,1,1,i,-i,1,-1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("offending: sigma-x on block 1 = 0.5\n"), "{text}");
    assert!(text.ends_with("verdict: FAIL\n"));

    let o = pps(&[
        "weak-values",
        &fx("cheshire.json"),
        "--post",
        "1,0,0,0",
        "--pre",
        "0,1,0,0",
    ]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("<Phi|Psi> = 0 ≈ 0"));

    let o = pps(&[
        "weak-values",
        &fx("cheshire.json"),
        "--post",
        "1,0,0",
        "--pre",
        "0,1,0,0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = pps(&[
        "weak-values",
        &fx("cheshire.json"),
        "--post",
        "1,x,0,0",
        "--pre",
        "0,1,0,0",
    ]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("entry 2"));
}

fn field(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("{key} in {text}"));
    line[key.len()..].trim().parse().unwrap()
}

#[test]
fn simulate_readouts() {
    let file = fx("cheshire.json");
    let o = pps(&[
        "simulate",
        &file,
        "--operator",
        "photon-number",
        "--block",
        "1",
        "--g",
        "1e-3",
        "--sigma",
        "1",
    ]);
    let text = stdout(&o);
    assert!((field(&text, "shift/g:") - 1.0).abs() < 0.01);

    let o = pps(&["simulate", &file, "--operator", "sigma-z", "--block", "1", "--g", "0"]);
    assert_eq!(field(&stdout(&o), "shift:"), 0.0);

    let o = pps(&[
        "simulate",
        &file,
        "--operator",
        "sigma-z",
        "--block",
        "2",
        "--g",
        "0.1",
        "--ladder",
        "3",
    ]);
    let text = stdout(&o);
    assert!(text.contains("errors decreasing: yes"), "{text}");
    assert_eq!(text.lines().skip_while(|l| *l != "convergence:").count(), 7);

    let o = pps(&[
        "simulate",
        &file,
        "--operator",
        "photon-number",
        "--operator",
        "sigma-z",
        "--block",
        "1",
        "--g",
        "0.01",
        "--g",
        "0.01",
    ]);
    let text = stdout(&o);
    assert!((field(&text, "shift:") - 0.01).abs() < 5e-4, "{text}");

    let o = pps(&["simulate", &file, "--operator", "spin", "--block", "1", "--g", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = pps(&["simulate", &file, "--operator", "sigma-z", "--block", "3", "--g", "0.1"]);
    assert_eq!(o.status.code(), Some(1));

    // No reference states: the solved selection is used.
    let o = pps(&[
        "simulate",
        &fx("entangled-minus.json"),
        "--operator",
        "sigma4B",
        "--block",
        "1",
        "--g",
        "0.01",
    ]);
    let text = stdout(&o);
    assert!(text.starts_with("selection: solved\n"));
    assert!(field(&text, "shift/g:") < 0.0);
}

#[test]
fn examples_list() {
    let o = pps(&["examples", "list"]);
    assert_eq!(stdout(&o), "cheshire\nfour-pauli\nentangled-minus\nentangled-plus\n");
}
