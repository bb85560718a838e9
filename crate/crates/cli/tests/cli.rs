use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use dpxplain_cli::syntax::{parse_query, parse_question};
use dpxplain_cli::transcript::{run_transcript, LocalBackend, RemoteBackend, RunParams};
use dpxplain_core::data::{Dataset, Schema};
use dpxplain_core::session::Phase3Request;
use dpxplain_core::synth::SynthSpec;
use dpxplain_service::Registry;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dpxplain"));
    c.env_remove("DPXPLAIN_SEED");
    c
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TWO_ROW_SCHEMA: &str = r#"{"attributes": [
    {"name": "A", "kind": "categorical", "values": ["0", "1"]},
    {"name": "B", "kind": "categorical", "values": ["0", "1"]},
    {"name": "C", "kind": "categorical", "values": ["0", "1"]}
]}"#;

fn two_rows(dir: &Path) -> (String, String) {
    let data = dir.join("d.csv");
    let schema = dir.join("s.json");
    std::fs::write(&data, "A,B,C\n0,0,0\n1,0,1\n").unwrap();
    std::fs::write(&schema, TWO_ROW_SCHEMA).unwrap();
    (data.display().to_string(), schema.display().to_string())
}

fn run_two_rows(dir: &Path, extra: &[&str]) -> Output {
    let (data, schema) = two_rows(dir);
    bin()
        .args(["run", "--data", &data, "--schema", &schema])
        .args(["--query", "COUNT(*) BY A", "--question", "0 > 1", "--k", "2"])
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn two_row_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_two_rows(dir.path(), &["--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for part in ["Phase 1", "Phase 2", "Phase 3", "Budget", "verdict", "query  0.1"] {
        assert!(text.contains(part), "missing `{part}` in\n{text}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_two_rows(dir.path(), &["--seed", "42"]);
    let b = run_two_rows(dir.path(), &["--seed", "42"]);
    assert_eq!(a.stdout, b.stdout);
    let (data, schema) = two_rows(dir.path());
    let c = bin()
        .env("DPXPLAIN_SEED", "42")
        .args(["run", "--data", &data, "--schema", &schema])
        .args(["--query", "COUNT(*) BY A", "--question", "0 > 1", "--k", "2"])
        .output()
        .unwrap();
    assert_eq!(a.stdout, c.stdout);
    let d = run_two_rows(dir.path(), &["--seed", "43"]);
    assert_ne!(a.stdout, d.stdout);
}

#[test]
fn small_budget_fails_with_a_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_two_rows(dir.path(), &["--seed", "1", "--rho-total", "0.05"]);
    assert!(!out.status.success());
    let text = stdout(&out);
    assert!(text.contains("error: insufficient privacy budget"), "{text}");
    assert!(text.contains("remaining 0.0500"), "{text}");
}

#[test]
fn synth_outputs() {
    let out = bin().args(["synth", "--rows", "0"]).output().unwrap();
    assert_eq!(stdout(&out), "grp,a0,a1,a2,a3,a4,a5,y\n");
    let a = bin().args(["synth", "--rows", "300", "--seed", "5"]).output().unwrap();
    let b = bin().args(["synth", "--rows", "300", "--seed", "5"]).output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 301);
}

#[test]
fn experiment_report_carries_its_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["experiment", "coverage", "--reps", "20", "--seed", "8"])
        .args(["--rho-query", "0.1,1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert!(csv.contains("# seed: 8"));
    assert!(csv.contains("# reps: 20"));
    assert!(csv.contains("# grid rho_query: [0.1, 1.0]"));
    let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 3);
    assert!(data[0].starts_with("rho_query,gamma,question_coverage"));
    assert!(dir.path().join("coverage.txt").exists());
}

#[test]
fn local_and_served_transcripts_match() {
    let data = SynthSpec::with_rows(1_200, 21).generate().unwrap();
    let csv = data.to_csv();
    let schema: Arc<Schema> = data.schema().clone();
    let data = Arc::new(Dataset::from_csv(schema.clone(), csv.as_bytes()).unwrap());

    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(dpxplain_service::serve(listener, Arc::new(Registry::in_memory())));
    let url = format!("http://{addr}");

    let cases = [
        ("AVG(y) BY grp", "g0 > g1", 2.1),
        ("SUM(y) BY grp WHERE a5 != v4", "1*g0 + -1*g1 + 0.5*g2 > 3", 2.1),
        ("COUNT(*) BY grp", "g2 > g3", 1.0),
    ];
    for (query, question, total) in cases {
        let params = RunParams {
            query: parse_query(query).unwrap(),
            question: parse_question(question).unwrap(),
            rho_query: 0.1,
            gamma: 0.95,
            phase3: Phase3Request::default(),
        };
        let mut local = LocalBackend::new(data.clone(), total, 99).unwrap();
        let mut remote = RemoteBackend::connect(&url, &csv, &schema, total, 99).unwrap();
        let a = run_transcript(&mut local, &params);
        let b = run_transcript(&mut remote, &params);
        assert_eq!(a, b, "{query} / {question}");
        assert_eq!(a.error.is_some(), total < 2.1);
    }
}
