use std::fs;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;
use threebox::lg_stats::{LgReport, SamplingPolicy};
use threebox::records;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_threebox"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check_golden(name: &str, actual: &[u8]) {
    let path = golden_dir().join(name);
    if std::env::var_os("THREEBOX_BLESS").is_some() {
        fs::write(&path, actual).unwrap();
    }
    let expected =
        fs::read(&path).unwrap_or_else(|_| panic!("missing golden file {name}; rerun with THREEBOX_BLESS=1"));
    assert!(expected == actual, "{name} differs from golden output");
}

#[test]
fn simulate_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden_dir().join("session.json");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    check_golden("records.csv", &fs::read(dir.path().join("records.csv")).unwrap());
    check_golden("summary.json", &fs::read(dir.path().join("summary.json")).unwrap());
}

#[test]
fn verify_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden_dir().join("session.json");
    let out =
        run(&["verify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--pairs", "20"]);
    assert!(out.status.success());
    check_golden("verification.json", &fs::read(dir.path().join("verification.json")).unwrap());
}

#[test]
fn same_seed_same_bytes_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"engine":"quantum","rounds":3000,"context_schedule":"uniform_random","seed":99}"#,
    );
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "4"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let o = run(&[
            "--threads",
            threads,
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        outputs.push((fs::read(out_dir.join("records.csv")).unwrap(), fs::read(out_dir.join("summary.json")).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"engine":"quantum","rounds":50,"seed":1}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--seed", "2"]);
    run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    let recs = records::read_records_file(&a.join("records.csv")).unwrap();
    assert!(recs[0].seed_path.starts_with("2/"));
    assert_ne!(fs::read(a.join("records.csv")).unwrap(), fs::read(b.join("records.csv")).unwrap());
}

fn summary(dir: &Path, json: &str) -> (Value, Vec<threebox::RoundRecord>) {
    let cfg = write_config(dir, "c.json", json);
    let out = dir.join("out");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    (s, records::read_records_file(&out.join("records.csv")).unwrap())
}

#[test]
fn ideal_summary_bet_rate() {
    let dir = tempfile::tempdir().unwrap();
    let (s, _) = summary(
        dir.path(),
        r#"{"engine":"quantum","rounds":2400,"context_schedule":{"blocks":1200},"seed":3,
            "noise":{"f_herald":1,"f_readout":1,"p_preserve":1}}"#,
    );
    let rate = s["bet_rate"].as_f64().unwrap();
    let sigma = (1.0f64 / 9.0 * 8.0 / 9.0 / 2400.0).sqrt();
    assert!((rate - 1.0 / 9.0).abs() <= 3.0 * sigma, "{rate}");
}

#[test]
fn noisy_summary_violates_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (s, recs) =
        summary(dir.path(), r#"{"engine":"quantum","rounds":2400,"context_schedule":{"blocks":1200},"seed":3}"#);
    let k = s["lg_report"]["k_hat"].as_f64().unwrap();
    assert!(k < -1.0, "{k}");
    let oracle = LgReport::from_records(&recs, SamplingPolicy::FairSampling).unwrap();
    assert_eq!(k, oracle.k_hat);
}

#[test]
fn analyze_engines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "q.json",
        r#"{"engine":"quantum","rounds":5000,"seed":4,"noise":{"f_herald":1,"f_readout":1,"p_preserve":1}}"#,
    );
    let q = dir.path().join("q");
    run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", q.to_str().unwrap()]);
    let report_path = dir.path().join("q.json.report");
    let o = run(&["analyze", q.join("records.csv").to_str().unwrap(), "--out", report_path.to_str().unwrap()]);
    assert!(o.status.success());
    let r: Value = serde_json::from_slice(&fs::read(&report_path).unwrap()).unwrap();
    assert!((r["k_hat"].as_f64().unwrap() + 13.0 / 9.0).abs() < 1e-12);

    let mr = write_config(
        dir.path(),
        "mr.json",
        r#"{"engine":"macroreal","rounds":20000,"seed":4,"mr_strategy":{
            "placement":[0,0,1],
            "shuffle_I":[[1,0,0],[0,1,0],[0.3,0.3,0.4]],
            "shuffle_F":[[0.5,0,0.5],[0,0.5,0.5],[0,0,1]],
            "measurement_disturbance":[[1,0,0],[0,1,0],[0,0,1]]}}"#,
    );
    let m = dir.path().join("m");
    assert!(run(&["simulate", "--config", mr.to_str().unwrap(), "--out", m.to_str().unwrap()]).status.success());
    let report_path = dir.path().join("m.report");
    let o = run(&[
        "analyze",
        m.join("records.csv").to_str().unwrap(),
        "--policy",
        "adverse",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let r: Value = serde_json::from_slice(&fs::read(&report_path).unwrap()).unwrap();
    let (k, se) = (r["k_hat"].as_f64().unwrap(), r["k_std_err"].as_f64().unwrap());
    assert!(k >= -1.0 - 3.0 * se, "{k} ± {se}");
    assert_eq!(r["policy"], "adverse");
    assert!(r["k_direct"].is_number());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write_config(dir.path(), "typo.json", r#"{"engine":"quantum","rounds":10,"noise":{"f_redout":0.9}}"#);
    assert_eq!(run(&["simulate", "--config", typo.to_str().unwrap()]).status.code(), Some(2));
    let external =
        write_config(dir.path(), "ext.json", r#"{"engine":"quantum","rounds":10,"context_schedule":"external"}"#);
    assert_eq!(run(&["simulate", "--config", external.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["simulate", "--config", missing.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(run(&["analyze", missing.to_str().unwrap()]).status.code(), Some(3));

    let no_bets = dir.path().join("no_bets.csv");
    fs::write(
        &no_bets,
        "round_id,engine,context,bob_outcome,alice_m3,alice_bets,alice_wins,gt_box_t1,gt_box_t2,gt_box_t3,seed_path\n\
         1,quantum,M1,true,false,false,,,,,0/1\n2,quantum,M2,false,false,false,,,,,0/2\n",
    )
    .unwrap();
    let o = run(&["analyze", no_bets.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient data"));
}

#[test]
fn verify_tables() {
    let dir = tempfile::tempdir().unwrap();
    let ideal = write_config(
        dir.path(),
        "i.json",
        r#"{"engine":"quantum","rounds":1,"noise":{"f_herald":1,"f_readout":1,"p_preserve":1}}"#,
    );
    let o = run(&[
        "verify",
        "--config",
        ideal.to_str().unwrap(),
        "--out",
        dir.path().join("i").to_str().unwrap(),
        "--pairs",
        "3000",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("i/verification.json")).unwrap()).unwrap();
    for row in v["report"]["repeatability"].as_array().unwrap() {
        if row["first"] == row["second"] {
            assert_eq!(row["true_given_true"]["p_hat"], 1.0);
            assert_eq!(row["false_given_false"]["p_hat"], 1.0);
        }
    }
    for m in v["report"]["marginals"].as_array().unwrap() {
        assert!((m["p_true"]["p_hat"].as_f64().unwrap() - 1.0 / 3.0).abs() < 3.0 * (2.0f64 / 9.0 / 9000.0).sqrt());
    }

    let noisy = write_config(dir.path(), "n.json", r#"{"engine":"quantum","rounds":1}"#);
    run(&[
        "verify",
        "--config",
        noisy.to_str().unwrap(),
        "--out",
        dir.path().join("n").to_str().unwrap(),
        "--pairs",
        "3000",
    ]);
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("n/verification.json")).unwrap()).unwrap();
    for r in v["report"]["repopulation"].as_array().unwrap() {
        let p = &r["preserved"];
        let sigma = (0.21 / p["trials"].as_f64().unwrap()).sqrt();
        assert!((p["p_hat"].as_f64().unwrap() - 0.70).abs() <= 3.0 * sigma, "{p}");
    }
}

#[test]
fn mrscan_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ideal");
    let o = run(&["mrscan", "--budget", "20000", "--out", out.to_str().unwrap(), "--lock-disturbance"]);
    assert!(o.status.success());
    let fit: Value = serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert!(fit["fit"]["fit_error"].as_f64().unwrap() >= 0.25);
    assert_eq!(fit["fit"]["disturbance"], 0.0);
    assert_eq!(fit["deterministic_scan"]["strategies"], 59049);
    let frontier = fs::read_to_string(out.join("frontier.csv")).unwrap();
    assert!(frontier.starts_with("disturbance,fit_error\n"));

    let targets = write_config(
        dir.path(),
        "t.json",
        r#"{"p_alice_m1":0.2,"p_alice_m2":0.2,"p_alice_none":0.2,"p_bob_given_alice_m1":0.5,"p_bob_given_alice_m2":0.5}"#,
    );
    let out = dir.path().join("self");
    let o =
        run(&["mrscan", "--targets", targets.to_str().unwrap(), "--budget", "100000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let fit: Value = serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert!(fit["fit"]["fit_error"].as_f64().unwrap() <= 0.02);

    let bad = write_config(dir.path(), "bad.json", r#"{"p_alice_m1":0.2}"#);
    assert_eq!(
        run(&["mrscan", "--targets", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["mrscan", "--budget", "10", "--out", out.to_str().unwrap()]).status.code(), Some(2));
}

fn http(addr: &str, request: &str) -> Option<String> {
    let mut s = TcpStream::connect(addr).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    s.write_all(request.as_bytes()).ok()?;
    let mut buf = String::new();
    s.read_to_string(&mut buf).ok()?;
    Some(buf)
}

#[test]
fn serve_answers_http() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = bin().args(["serve", "--bind", &addr]).stdout(Stdio::null()).stderr(Stdio::null()).spawn().unwrap();
    let body = r#"{"engine":"quantum","rounds":2,"context_schedule":"external"}"#;
    let req = format!(
        "POST /sessions HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let deadline = Instant::now() + Duration::from_secs(20);
    let response = loop {
        if let Some(r) = http(&addr, &req) {
            break r;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    child.kill().ok();
    child.wait().ok();
    assert!(response.starts_with("HTTP/1.1 201"), "{response}");
    assert!(response.contains("\"session_id\""));
}
