use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use qotmpc::adversary::{CheckRule, UnderreportPolicy};
use qotmpc::harness::{self, exit, AttackKind, BaseOtKind, Mode, PartyRole, RunConfig, Transport};

#[derive(Parser)]
#[command(name = "qot", version, about = "Quantum oblivious transfer simulator with OPRF/PSI on top")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for transcript, metrics and summary files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print metrics JSON instead of the text summary.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One oblivious transfer session.
    Run {
        #[command(flatten)]
        common: Common,
        /// Choice bit.
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        c: Option<u8>,
        #[arg(long, value_enum)]
        role: Option<RoleArg>,
        #[arg(long, conflicts_with = "connect")]
        listen: Option<String>,
        #[arg(long)]
        connect: Option<String>,
        #[arg(long)]
        attenuation_db: Option<f64>,
        #[arg(long)]
        p_e: Option<f64>,
        #[arg(long)]
        total_pulses: Option<usize>,
    },
    /// Closed-form security analysis.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p_e: Option<f64>,
    },
    /// Dishonest-receiver experiments.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<AttackArg>,
        #[arg(long)]
        s1: Option<usize>,
        #[arg(long)]
        s2: Option<usize>,
        #[arg(long)]
        trials: Option<u64>,
        /// Fraction of single-photon clicks hidden (pns).
        #[arg(long)]
        discard: Option<f64>,
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
    },
    /// Code rate over a list of attenuations.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sessions: Option<u64>,
        /// Pulse window cap per session.
        #[arg(long)]
        max_pulses: Option<usize>,
        /// Comma-separated attenuations in dB.
        #[arg(long, value_delimiter = ',')]
        attenuations: Option<Vec<f64>>,
        #[arg(long)]
        pulse_rate_hz: Option<f64>,
    },
    /// Private set intersection of two item files.
    Psi {
        #[command(flatten)]
        common: Common,
        /// Sender items.
        #[arg(long)]
        x: Option<PathBuf>,
        /// Receiver items.
        #[arg(long)]
        y: Option<PathBuf>,
        #[arg(long, value_enum)]
        base_ot: Option<BaseOtArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Sender,
    Receiver,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    Delayed,
    Pns,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Text,
    Formula,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseOtArg {
    Ideal,
    Qot,
}

fn load(common: &Common, mode: Mode) -> anyhow::Result<RunConfig> {
    let mut config = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    config.mode = mode;
    if common.seed.is_some() {
        config.seed = common.seed;
    }
    if common.out.is_some() {
        config.out = common.out.clone();
    }
    Ok(config)
}

fn build(cli: Cli) -> anyhow::Result<(RunConfig, bool)> {
    let (config, json) = match cli.command {
        Command::Run { common, c, role, listen, connect, attenuation_db, p_e, total_pulses } => {
            let mut cfg = load(&common, Mode::Qot)?;
            if let Some(c) = c {
                cfg.c = c == 1;
            }
            if let Some(a) = attenuation_db {
                cfg.optical.attenuation_db = a;
            }
            if let Some(p) = p_e {
                cfg.optical.p_e = p;
            }
            if let Some(t) = total_pulses {
                cfg.params.total_pulses = t;
            }
            if listen.is_some() || connect.is_some() || role.is_some() {
                let role = match role {
                    Some(RoleArg::Sender) => PartyRole::Sender,
                    Some(RoleArg::Receiver) => PartyRole::Receiver,
                    None => anyhow::bail!(harness::HarnessError::Config("--listen/--connect need --role".into())),
                };
                let timeout_ms = match cfg.transport {
                    Transport::Tcp { timeout_ms, .. } => timeout_ms,
                    Transport::InProcess => 30_000,
                };
                cfg.transport = Transport::Tcp { role, listen, connect, timeout_ms };
            }
            (cfg, common.json)
        }
        Command::Analyze { common, p_e } => {
            let mut cfg = load(&common, Mode::Analyze)?;
            if let Some(p) = p_e {
                cfg.analyze.p_e = p;
            }
            if cfg.seed.is_none() {
                // analysis is deterministic
                cfg.seed = Some(0);
            }
            (cfg, common.json)
        }
        Command::Attack { common, kind, s1, s2, trials, discard, rule } => {
            let mut cfg = load(&common, Mode::Attack)?;
            match kind {
                Some(AttackArg::Delayed) => cfg.attack.kind = AttackKind::DelayedMeasurement,
                Some(AttackArg::Pns) => cfg.attack.kind = AttackKind::Pns,
                None => {}
            }
            if let Some(s) = s1 {
                cfg.attack.strategy.s1 = s;
            }
            if let Some(s) = s2 {
                cfg.attack.strategy.s2 = s;
            }
            if let Some(t) = trials {
                cfg.attack.trials = t;
            }
            if let Some(d) = discard {
                let u = cfg.attack.strategy.underreport.get_or_insert_with(UnderreportPolicy::default);
                u.discard_single_photon = d;
            }
            match rule {
                Some(RuleArg::Text) => cfg.attack.rule = CheckRule::Text,
                Some(RuleArg::Formula) => cfg.attack.rule = CheckRule::Formula,
                None => {}
            }
            (cfg, common.json)
        }
        Command::Sweep { common, sessions, max_pulses, attenuations, pulse_rate_hz } => {
            let mut cfg = load(&common, Mode::Sweep)?;
            if let Some(s) = sessions {
                cfg.sweep.sessions = s;
            }
            if let Some(t) = max_pulses {
                cfg.sweep.max_pulses = t;
            }
            if let Some(a) = attenuations {
                cfg.sweep.attenuations_db = a;
            }
            if let Some(r) = pulse_rate_hz {
                cfg.optical.pulse_rate_hz = r;
            }
            (cfg, common.json)
        }
        Command::Psi { common, x, y, base_ot } => {
            let mut cfg = load(&common, Mode::Psi)?;
            if x.is_some() {
                cfg.psi.x = x;
            }
            if y.is_some() {
                cfg.psi.y = y;
            }
            match base_ot {
                Some(BaseOtArg::Ideal) => cfg.psi.base_ot = BaseOtKind::Ideal,
                Some(BaseOtArg::Qot) => cfg.psi.base_ot = BaseOtKind::Qot,
                None => {}
            }
            (cfg, common.json)
        }
    };
    Ok((config, json))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QOTMPC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            return ExitCode::from(code as u8);
        }
    };
    let (config, json) = match build(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("qot: {e:#}");
            let code = match e.downcast_ref::<harness::HarnessError>() {
                Some(h) => h.exit_code(),
                None => exit::ERROR,
            };
            return ExitCode::from(code as u8);
        }
    };
    match harness::run(&config) {
        Ok(outcome) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&outcome.metrics).expect("json"));
            } else {
                print!("{}", outcome.summary);
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("qot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
