//! Code rate against channel attenuation.
//!
//! Each point runs sessions over a pulse window sized for that link: enough
//! pulses to expect `window_margin * n` clicked signal rounds, capped at
//! `max_pulses`. Past the cap a session cannot gather n rounds and aborts.

use serde::{Deserialize, Serialize};

use crate::optics::{IntensityClass, OpticalConfig};
use crate::qot::{run_setup, ProtocolParams, SessionSetup, SessionStatus};
use crate::rng::SeedTree;

use super::HarnessError;

pub const DEFAULT_ATTENUATIONS_DB: [f64; 14] =
    [0.15, 1.97, 3.97, 5.96, 8.06, 9.69, 11.81, 13.44, 15.58, 17.88, 20.21, 22.18, 24.42, 26.69];

pub const FOOTER: &str = "pulse_rate_hz is illustrative; absolute kbps depends on the hardware clock \
and is not comparable with measured optical setups";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRun {
    pub attenuations_db: Vec<f64>,
    pub sessions: u64,
    /// Largest pulse window a session may use.
    pub max_pulses: usize,
    /// Expected clicked signal rounds per window, as a multiple of n.
    pub window_margin: f64,
}

impl Default for SweepRun {
    fn default() -> Self {
        SweepRun {
            attenuations_db: DEFAULT_ATTENUATIONS_DB.to_vec(),
            sessions: 100,
            max_pulses: 2_000_000,
            window_margin: 1.25,
        }
    }
}

impl SweepRun {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let a = &self.attenuations_db;
        if a.is_empty() || a.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::Config("attenuations must be nonempty and strictly increasing".into()));
        }
        if self.sessions == 0 {
            return Err(HarnessError::Config("sessions must be positive".into()));
        }
        if !(self.window_margin >= 1.0 && self.window_margin.is_finite()) {
            return Err(HarnessError::Config("window_margin must be at least 1".into()));
        }
        Ok(())
    }

    /// Pulse window for one link.
    pub fn window(&self, params: &ProtocolParams, optical: &OpticalConfig) -> usize {
        let per_pulse = optical.p1 * optical.physical_click_ratio(IntensityClass::Signal);
        let want = (self.window_margin * params.n as f64 / per_pulse).ceil();
        if want.is_finite() {
            (want as usize).clamp(params.n, self.max_pulses.max(params.n))
        } else {
            self.max_pulses.max(params.n)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub attenuation_db: f64,
    pub pulses_per_session: usize,
    pub sessions: u64,
    pub successes: u64,
    pub aborts: u64,
    pub failures: u64,
    pub rate_kbps: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub lambda: usize,
    pub pulse_rate_hz: f64,
    pub footer: String,
}

impl SweepReport {
    pub fn is_non_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].rate_kbps <= w[0].rate_kbps)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("attenuation_db  pulses/session  successes/sessions  rate_kbps\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:>14.2}  {:>14}  {:>9}/{:<8}  {:>9.3}\n",
                r.attenuation_db, r.pulses_per_session, r.successes, r.sessions, r.rate_kbps
            ));
        }
        s.push_str(&format!("lambda = {}, pulse_rate_hz = {}\n", self.lambda, self.pulse_rate_hz));
        s.push_str(FOOTER);
        s.push('\n');
        s
    }
}

/// Rate lambda * successes * pulse_rate / (sessions * window) per point.
/// Every point reuses the same session seeds.
pub fn sweep_code_rate(
    params: &ProtocolParams,
    optical: &OpticalConfig,
    run: &SweepRun,
    seed: u64,
) -> Result<SweepReport, HarnessError> {
    run.validate()?;
    let tree = SeedTree::new(seed).child("sweep");
    let mut rows = Vec::with_capacity(run.attenuations_db.len());
    for &att in &run.attenuations_db {
        let optical = OpticalConfig { attenuation_db: att, ..optical.clone() };
        let window = run.window(params, &optical);
        let params = ProtocolParams { total_pulses: window, ..params.clone() };
        let (mut successes, mut aborts, mut failures) = (0, 0, 0);
        for i in 0..run.sessions {
            let s: u64 = rand::Rng::random(&mut tree.indexed("session", i).rng());
            let setup = SessionSetup::from_seed(params.clone(), optical.clone(), i % 2 == 1, s);
            let r = run_setup(&setup).map_err(|e| HarnessError::Config(e.to_string()))?;
            match r.status {
                SessionStatus::Success => successes += 1,
                SessionStatus::Aborted { .. } => aborts += 1,
                _ => failures += 1,
            }
        }
        let rate = params.lambda as f64 * successes as f64 * optical.pulse_rate_hz / (run.sessions as f64 * window as f64) / 1e3;
        log::info!("{att} dB: window {window}, {successes}/{} sessions, {rate:.3} kbps", run.sessions);
        rows.push(SweepRow {
            attenuation_db: att,
            pulses_per_session: window,
            sessions: run.sessions,
            successes,
            aborts,
            failures,
            rate_kbps: rate,
        });
    }
    Ok(SweepReport { rows, lambda: params.lambda, pulse_rate_hz: optical.pulse_rate_hz, footer: FOOTER.into() })
}
