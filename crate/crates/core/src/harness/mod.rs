//! Configuration, transports and report generation for the `qot` binary.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::adversary::{run_delayed_measurement_attack, run_pns_attack};
use crate::analysis::AnalysisReport;
use crate::bits::Bits;
use crate::oprf::{BaseOt, IdealOt, OprfError, QotBaseOt};
use crate::psi::{format_items, read_items, run_psi, PsiError};
use crate::qot::session::classify;
use crate::qot::{run_setup, Finish, Party, Role, SessionSetup, SessionStatus, Transcript};
use crate::rng::SeedTree;

pub mod config;
pub mod sweep;
pub mod tcp;

pub use config::{AttackKind, AttackRun, BaseOtKind, Mode, PartyRole, PsiRun, RunConfig, Transport};
pub use sweep::{sweep_code_rate, SweepReport, SweepRow, SweepRun, DEFAULT_ATTENUATIONS_DB};

pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Runtime failure outside the protocol (I/O, bad input files).
    pub const ERROR: i32 = 1;
    pub const ABORT: i32 = 2;
    pub const CORRECTNESS: i32 = 3;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => exit::USAGE,
            HarnessError::Io(_) => exit::ERROR,
        }
    }
}

pub fn status_code(status: &SessionStatus) -> i32 {
    match status {
        SessionStatus::Success => exit::SUCCESS,
        SessionStatus::Aborted { .. } => exit::ABORT,
        SessionStatus::DecodeFailure | SessionStatus::WrongOutput => exit::CORRECTNESS,
    }
}

/// What a run produced, before anything touches the disk.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub code: i32,
    pub summary: String,
    pub metrics: serde_json::Value,
    pub transcript: Option<Transcript>,
    /// Extra text files by name.
    pub files: Vec<(String, String)>,
}

impl RunOutcome {
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let metrics = serde_json::to_string_pretty(&self.metrics).expect("json");
        std::fs::write(dir.join("metrics.json"), metrics + "\n").map_err(io)?;
        std::fs::write(dir.join("summary.txt"), &self.summary).map_err(io)?;
        if let Some(t) = &self.transcript {
            std::fs::write(dir.join("transcript.jsonl"), t.to_jsonl()).map_err(io)?;
        }
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text).map_err(io)?;
        }
        Ok(())
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    let outcome = match config.mode {
        Mode::Qot => run_qot(config),
        Mode::Analyze => run_analyze(config),
        Mode::Attack => run_attack(config),
        Mode::Sweep => run_sweep(config),
        Mode::Psi => run_psi_mode(config),
    }?;
    if let Some(dir) = &config.out {
        outcome.write_to(dir)?;
    }
    Ok(outcome)
}

fn qot_err(e: crate::qot::QotError) -> HarnessError {
    HarnessError::Config(e.to_string())
}

/// Status as one party can judge it. Alice only knows she sent the payload.
pub fn party_status(role: Role, finish: Option<&Finish>, expected: &Bits) -> (SessionStatus, Option<Bits>) {
    match (role, finish) {
        (Role::Alice, Some(Finish::Sent)) => (SessionStatus::Success, None),
        (Role::Alice, f) => classify(f, None, expected),
        (Role::Bob, f) => classify(None, f, expected),
    }
}

#[derive(Serialize)]
struct FrameBytes {
    alice: usize,
    bob: usize,
}

fn frame_bytes(t: &Transcript) -> FrameBytes {
    let by = |who: &str| t.entries().iter().filter(|e| e.from == who).map(|e| e.len + 5).sum();
    FrameBytes { alice: by("alice"), bob: by("bob") }
}

/// Runs one side of a session over an established stream.
pub fn run_tcp_party(setup: &SessionSetup, role: Role, stream: std::net::TcpStream) -> Result<(SessionStatus, Option<Bits>, Transcript), HarnessError> {
    let run = setup.simulate().map_err(qot_err)?;
    let mut reader = std::io::BufReader::new(stream.try_clone().map_err(|e| HarnessError::Io(e.to_string()))?);
    let mut writer = stream;
    let mut party: Box<dyn Party> = match role {
        Role::Alice => Box::new(setup.alice(&run).map_err(qot_err)?),
        Role::Bob => Box::new(setup.bob(&run).map_err(qot_err)?),
    };
    let transcript = tcp::drive_stream(party.as_mut(), &mut reader, &mut writer);
    let (status, recovered) = party_status(role, party.finish(), &setup.messages[setup.c as usize]);
    Ok((status, recovered, transcript))
}

fn run_qot(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let t0 = Instant::now();
    let seed = config.seed()?;
    let setup = SessionSetup::from_seed(config.params.clone(), config.optical.clone(), config.c, seed);
    let (role, status, recovered, transcript, extra) = match &config.transport {
        Transport::InProcess => {
            let r = run_setup(&setup).map_err(qot_err)?;
            let extra = json!({
                "click_stats": r.stats,
                "test_outcome": r.test_outcome,
                "formula_check": r.formula_check,
                "retained_rounds": r.retained_rounds.len(),
            });
            (None, r.status, r.recovered, r.transcript, extra)
        }
        Transport::Tcp { role, listen, connect, timeout_ms } => {
            let timeout = Duration::from_millis(*timeout_ms);
            let stream = match (listen, connect) {
                (Some(addr), _) => tcp::accept_one(addr, timeout)?,
                (_, Some(addr)) => tcp::connect(addr, timeout)?,
                _ => unreachable!("validated"),
            };
            let role = match role {
                PartyRole::Sender => Role::Alice,
                PartyRole::Receiver => Role::Bob,
            };
            let (status, recovered, transcript) = run_tcp_party(&setup, role, stream)?;
            (Some(role), status, recovered, transcript, json!({}))
        }
    };
    let code = status_code(&status);
    let mut summary = format!("qot session seed={seed} c={}\nstatus: {status:?}\n", config.c as u8);
    if let Some(m) = &recovered {
        summary.push_str(&format!("recovered m_{}: {}\n", config.c as u8, hex::encode(m.to_bytes())));
    }
    summary.push_str(&format!("frames: {}\n", transcript.tags().join(" ")));
    let metrics = json!({
        "mode": "qot",
        "seed": seed,
        "c": config.c as u8,
        "role": role.map(Role::name),
        "status": status,
        "exit_code": code,
        "recovered": recovered.as_ref().map(|m| hex::encode(m.to_bytes())),
        "frames": transcript.len(),
        "bytes_sent": frame_bytes(&transcript),
        "wall_ms": t0.elapsed().as_secs_f64() * 1e3,
        "session": extra,
    });
    Ok(RunOutcome { code, summary, metrics, transcript: Some(transcript), files: vec![] })
}

fn run_analyze(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let a = &config.analyze;
    let params = config.params.analysis(a.p_e);
    params.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    let report = AnalysisReport::compute(&params, a.s1_range, a.bound);
    let metrics = serde_json::from_str(&report.to_json()).expect("report json");
    Ok(RunOutcome { code: exit::SUCCESS, summary: report.to_text(), metrics, transcript: None, files: vec![] })
}

fn run_attack(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let seed = config.seed()?;
    let a = &config.attack;
    let att = |e: crate::adversary::AttackError| HarnessError::Config(e.to_string());
    let (summary, metrics) = match a.kind {
        AttackKind::DelayedMeasurement => {
            let mut rng = SeedTree::new(seed).child("attack").rng();
            let r = run_delayed_measurement_attack(&config.params, &a.strategy, a.rule, a.trials, &mut rng).map_err(att)?;
            (
                format!(
                    "delayed measurement s1={} s2={} over {} trials\nbypass rate {:.6} (closed form {:.6})\nboth messages in {} trials\n",
                    a.strategy.s1, a.strategy.s2, r.trials, r.bypass_rate, r.p_bypass, r.both_messages
                ),
                serde_json::to_value(&r).expect("json"),
            )
        }
        AttackKind::Pns => {
            let policy = a.strategy.underreport.unwrap_or_default();
            let tree = SeedTree::new(seed).child("attack");
            let r = run_pns_attack(&config.optical, &config.params, policy, a.trials, &tree).map_err(att)?;
            (
                format!(
                    "pns underreporting discard={} fake_vacuum={} over {} sessions\ndetected {} ({:.4})\n",
                    policy.discard_single_photon, policy.fake_vacuum_clicks, r.trials, r.detected, r.detection_rate
                ),
                serde_json::to_value(&r).expect("json"),
            )
        }
    };
    Ok(RunOutcome { code: exit::SUCCESS, summary, metrics, transcript: None, files: vec![] })
}

fn run_sweep(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let report = sweep_code_rate(&config.params, &config.optical, &config.sweep, config.seed()?)?;
    let metrics = serde_json::to_value(&report).expect("json");
    Ok(RunOutcome { code: exit::SUCCESS, summary: report.to_text(), metrics, transcript: None, files: vec![] })
}

fn run_psi_mode(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let seed = config.seed()?;
    let p = &config.psi;
    let io = |e: PsiError| HarnessError::Io(e.to_string());
    let x = read_items(p.x.as_deref().expect("validated")).map_err(io)?;
    let y = read_items(p.y.as_deref().expect("validated")).map_err(io)?;
    let mut ot: Box<dyn BaseOt> = match p.base_ot {
        BaseOtKind::Ideal => Box::new(IdealOt::new()),
        BaseOtKind::Qot => Box::new(QotBaseOt::new(config.params.clone(), config.optical.clone(), seed)),
    };
    match run_psi(&x, &y, &p.config, ot.as_mut(), seed) {
        Ok(out) => {
            let summary = format!(
                "psi |X|={} |Y|={} -> |O|={} in {:.1} ms ({} base OTs)\n",
                x.len(),
                y.len(),
                out.intersection.len(),
                out.metrics.wall_ms,
                out.metrics.base_ot
            );
            Ok(RunOutcome {
                code: exit::SUCCESS,
                summary,
                metrics: serde_json::to_value(&out.metrics).expect("json"),
                transcript: None,
                files: vec![("intersection.txt".into(), format_items(&out.intersection))],
            })
        }
        Err(PsiError::Oprf(e @ OprfError::BaseOt { .. })) => Ok(RunOutcome {
            code: exit::ABORT,
            summary: format!("psi aborted: {e}\n"),
            metrics: json!({"mode": "psi", "aborted": e.to_string()}),
            transcript: None,
            files: vec![],
        }),
        Err(PsiError::Io { path, source }) => Err(HarnessError::Io(format!("{path}: {source}"))),
        Err(e) => Err(HarnessError::Config(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::OpticalConfig;

    #[test]
    fn exit_codes() {
        assert_eq!(status_code(&SessionStatus::Success), 0);
        assert_eq!(status_code(&SessionStatus::DecodeFailure), 3);
        assert_eq!(status_code(&SessionStatus::WrongOutput), 3);
        let a = SessionStatus::Aborted { by: Role::Bob, reason: crate::qot::AbortReason::Transport, detail: String::new() };
        assert_eq!(status_code(&a), 2);
    }

    #[test]
    fn in_process_qot_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            seed: Some(5),
            c: true,
            optical: OpticalConfig { attenuation_db: 10.0, ..OpticalConfig::noiseless() },
            out: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let out = run(&config).unwrap();
        assert_eq!(out.code, 0);
        let setup = SessionSetup::from_seed(config.params.clone(), config.optical.clone(), true, 5);
        assert_eq!(out.metrics["recovered"], hex::encode(setup.messages[1].to_bytes()));
        for f in ["metrics.json", "summary.txt", "transcript.jsonl"] {
            assert!(dir.path().join(f).is_file());
        }
    }
}
