use std::io::Write;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use qotmpc::optics::OpticalConfig;
use qotmpc::qot::{run_setup, ProtocolParams, SessionSetup};

fn qot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qot"))
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn noiseless_config(dir: &Path) -> std::path::PathBuf {
    let optical = OpticalConfig { attenuation_db: 10.0, ..OpticalConfig::noiseless() };
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::json!({ "optical": optical }).to_string()).unwrap();
    path
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

#[test]
fn analyze_reports_reference_cost() {
    let out = qot().args(["analyze", "--json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let cost: f64 = json(&out)["cost"]["cost"].as_str().unwrap().parse().unwrap();
    assert!(cost >= 2.8e12 * 0.9, "{cost}");
}

#[test]
fn run_returns_chosen_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = noiseless_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = qot()
        .args(["run", "--c", "1", "--seed", "42", "--json", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let optical = OpticalConfig { attenuation_db: 10.0, ..OpticalConfig::noiseless() };
    let setup = SessionSetup::from_seed(ProtocolParams::default(), optical, true, 42);
    assert_eq!(json(&out)["recovered"], hex(&setup.messages[1].to_bytes()));
    assert!(out_dir.join("transcript.jsonl").is_file());
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

#[test]
fn starved_session_exits_with_abort_code() {
    let out = qot().args(["run", "--seed", "1", "--total-pulses", "5000"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors() {
    assert_eq!(qot().args(["run", "--bogus"]).output().unwrap().status.code(), Some(64));
    assert_eq!(qot().args(["run"]).output().unwrap().status.code(), Some(64), "missing seed");
    assert_eq!(qot().args(["launch"]).output().unwrap().status.code(), Some(64));
}

#[test]
fn psi_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.txt"), "alpha\nbeta\n").unwrap();
    std::fs::write(d.join("b.txt"), "gamma\n\n  delta  \n").unwrap();
    std::fs::write(d.join("one.txt"), "acct-17\n").unwrap();
    let run = |x: &str, y: &str, out: &str| {
        qot()
            .args(["psi", "--seed", "3", "--x"])
            .arg(d.join(x))
            .arg("--y")
            .arg(d.join(y))
            .arg("--out")
            .arg(d.join(out))
            .output()
            .unwrap()
    };
    let o = run("a.txt", "b.txt", "disjoint");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(d.join("disjoint/intersection.txt")).unwrap(), "");
    let o = run("one.txt", "one.txt", "same");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(d.join("same/intersection.txt")).unwrap(), "acct-17\n");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("same/metrics.json")).unwrap()).unwrap();
    for k in ["bytes_sent_receiver", "bytes_sent_sender", "wall_ms", "n", "m", "s", "v"] {
        assert!(m.get(k).is_some(), "{k}");
    }
}

#[test]
fn tcp_loopback_matches_in_process_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = noiseless_config(dir.path());
    let addr = format!("127.0.0.1:{}", free_port());
    let sender = qot()
        .args(["run", "--seed", "9", "--c", "1", "--role", "sender", "--listen", &addr, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("alice"))
        .spawn()
        .unwrap();
    let receiver = qot()
        .args(["run", "--seed", "9", "--c", "1", "--role", "receiver", "--connect", &addr, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("bob"))
        .output()
        .unwrap();
    let sender = sender.wait_with_output().unwrap();
    assert_eq!(sender.status.code(), Some(0));
    assert_eq!(receiver.status.code(), Some(0), "{}", String::from_utf8_lossy(&receiver.stderr));
    let optical = OpticalConfig { attenuation_db: 10.0, ..OpticalConfig::noiseless() };
    let local = run_setup(&SessionSetup::from_seed(ProtocolParams::default(), optical, true, 9)).unwrap();
    for who in ["alice", "bob"] {
        let t = std::fs::read_to_string(dir.path().join(who).join("transcript.jsonl")).unwrap();
        assert_eq!(t, local.transcript.to_jsonl(), "{who}");
    }
}

#[test]
fn truncated_frame_aborts() {
    let addr = format!("127.0.0.1:{}", free_port());
    let sender = qot()
        .args(["run", "--seed", "4", "--role", "sender", "--listen", &addr])
        .spawn()
        .unwrap();
    let mut s = loop {
        match std::net::TcpStream::connect(&addr) {
            Ok(s) => break s,
            Err(_) => std::thread::sleep(std::time::Duration::from_millis(20)),
        }
    };
    // length says 100 bytes, stream carries 3
    s.write_all(&[0, 0, 0, 100, 1, 0xaa, 0xbb]).unwrap();
    drop(s);
    let out = sender.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_and_attack_smoke() {
    let out = qot()
        .args(["sweep", "--seed", "1", "--json", "--sessions", "2", "--max-pulses", "100000", "--attenuations", "0,30"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&out)["rows"].as_array().unwrap().clone();
    assert!(rows[0]["rate_kbps"].as_f64().unwrap() > 0.0);
    assert_eq!(rows[1]["rate_kbps"].as_f64().unwrap(), 0.0);
    let out = qot().args(["attack", "--seed", "1", "--json", "--s1", "0", "--trials", "100"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["bypassed"], 100);
}
