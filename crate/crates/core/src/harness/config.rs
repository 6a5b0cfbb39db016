use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adversary::{CheatStrategy, CheckRule};
use crate::analysis::S1Range;
use crate::optics::OpticalConfig;
use crate::psi::PsiConfig;
use crate::qot::ProtocolParams;

pub use super::sweep::SweepRun;
use super::HarnessError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Qot,
    Psi,
    Analyze,
    Attack,
    Sweep,
}

/// Sender is Alice, receiver is Bob.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyRole {
    Sender,
    Receiver,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transport {
    #[default]
    InProcess,
    Tcp {
        role: PartyRole,
        /// Accept one connection on this address.
        listen: Option<String>,
        /// Connect to this address.
        connect: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
}

fn default_timeout() -> u64 {
    30_000
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseOtKind {
    #[default]
    Ideal,
    Qot,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsiRun {
    /// Sender items.
    pub x: Option<PathBuf>,
    /// Receiver items.
    pub y: Option<PathBuf>,
    pub config: PsiConfig,
    pub base_ot: BaseOtKind,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    DelayedMeasurement,
    Pns,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackRun {
    pub kind: AttackKind,
    pub strategy: CheatStrategy,
    pub rule: CheckRule,
    pub trials: u64,
}

impl Default for AttackRun {
    fn default() -> Self {
        AttackRun { kind: AttackKind::default(), strategy: CheatStrategy::default(), rule: CheckRule::default(), trials: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeRun {
    pub p_e: f64,
    pub s1_range: S1Range,
    /// Failure bound for the p_e search; `None` skips it.
    pub bound: Option<f64>,
}

impl Default for AnalyzeRun {
    fn default() -> Self {
        AnalyzeRun { p_e: 0.0, s1_range: S1Range::default(), bound: Some(crate::analysis::DEFAULT_FAILURE_BOUND) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: Option<u64>,
    pub params: ProtocolParams,
    pub optical: OpticalConfig,
    pub transport: Transport,
    /// Receiver's choice bit.
    pub c: bool,
    pub out: Option<PathBuf>,
    pub psi: PsiRun,
    pub attack: AttackRun,
    pub sweep: SweepRun,
    pub analyze: AnalyzeRun,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn seed(&self) -> Result<u64, HarnessError> {
        self.seed.ok_or_else(|| HarnessError::Config("a seed is required".into()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.seed()?;
        self.optical.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        match self.mode {
            Mode::Qot | Mode::Attack | Mode::Sweep => {
                self.params.validate_shape().map_err(|e| HarnessError::Config(e.to_string()))?
            }
            _ => {}
        }
        if let Transport::Tcp { listen, connect, .. } = &self.transport {
            if listen.is_some() == connect.is_some() {
                return Err(HarnessError::Config("tcp transport needs exactly one of listen or connect".into()));
            }
            if self.mode != Mode::Qot {
                return Err(HarnessError::Config("tcp transport is only supported for qot runs".into()));
            }
        }
        if self.mode == Mode::Psi {
            for (name, p) in [("x", &self.psi.x), ("y", &self.psi.y)] {
                match p {
                    Some(p) if p.is_file() => {}
                    Some(p) => return Err(HarnessError::Config(format!("psi.{name}: {} does not exist", p.display()))),
                    None => return Err(HarnessError::Config(format!("psi.{name} is required"))),
                }
            }
        }
        if self.mode == Mode::Sweep {
            self.sweep.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_unknown_fields() {
        let c = RunConfig { seed: Some(3), ..Default::default() };
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(RunConfig::from_json(r#"{"sede": 1}"#).is_err());
        let t = RunConfig::from_json(r#"{"seed": 1, "transport": {"kind": "tcp", "role": "sender", "listen": "127.0.0.1:0"}}"#)
            .unwrap();
        assert!(matches!(t.transport, Transport::Tcp { timeout_ms: 30_000, .. }));
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(RunConfig::default().validate().is_err());
        assert!(RunConfig { seed: Some(1), ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn psi_needs_files() {
        let c = RunConfig { seed: Some(1), mode: Mode::Psi, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
