//! Dishonest-receiver strategies, run as Monte Carlo experiments.
//!
//! The delayed-measurement attack is simulated at the level of rounds, with
//! the bases and bits of every round drawn explicitly and p_e = 0. The PNS
//! attack runs the full pulse simulation and edits Bob's click report.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{p_bypass, S1Range};
use crate::optics::{OpticalConfig, OpticalLink};
use crate::qot::quantum::{click_stats, simulate_pulses};
use crate::qot::steps::{alice_check_click_stats, passes_ratio};
use crate::qot::ProtocolParams;
use crate::rng::SeedTree;

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("s1 = {s1} exceeds the allowed maximum {max}")]
    S1OutOfRange { s1: usize, max: usize },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("fraction {0} outside [0, 1]")]
    Fraction(f64),
}

/// Which test rule Alice applies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckRule {
    /// Count agreement over basis-matched test rounds only.
    Text,
    /// Count consistency over all test rounds.
    #[default]
    Formula,
}

/// Bob hides some clicks from his report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnderreportPolicy {
    /// Fraction of clicks on single-photon pulses reported as no-click.
    pub discard_single_photon: f64,
    /// Fraction of silent vacuum pulses reported as clicks.
    pub fake_vacuum_clicks: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheatStrategy {
    /// Rounds whose measurement waits until the bases are revealed.
    pub s1: usize,
    /// Bad-set bits Bob guesses.
    pub s2: usize,
    pub underreport: Option<UnderreportPolicy>,
}

impl CheatStrategy {
    pub fn validate(&self, params: &ProtocolParams, range: S1Range) -> Result<(), AttackError> {
        let max = match range {
            S1Range::AlphaN => params.test_size(),
            S1Range::Literal => params.alpha.floor() as usize,
        };
        if self.s1 > max {
            return Err(AttackError::S1OutOfRange { s1: self.s1, max });
        }
        if let Some(u) = self.underreport {
            for f in [u.discard_single_photon, u.fake_vacuum_clicks] {
                if !(0.0..=1.0).contains(&f) {
                    return Err(AttackError::Fraction(f));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DelayedReport {
    pub trials: u64,
    pub bypassed: u64,
    pub both_messages: u64,
    pub bypass_rate: f64,
    pub success_rate: f64,
    /// Closed-form bypass probability for the same (params, s1).
    pub p_bypass: f64,
    pub rule: CheckRule,
}

/// Delayed measurement of `s1` uniformly placed rounds. Each delayed round
/// carries a commitment to a uniformly guessed (x, theta); once the bases are
/// public a delayed untested round is measured correctly. Success means the
/// test passed and Bob holds at least 2(N - t) correct bits, counting right
/// guesses among the `s2` guessed bad-set bits.
pub fn run_delayed_measurement_attack<R: Rng + ?Sized>(
    params: &ProtocolParams,
    strategy: &CheatStrategy,
    rule: CheckRule,
    trials: u64,
    rng: &mut R,
) -> Result<DelayedReport, AttackError> {
    params.validate_shape().map_err(|e| AttackError::Params(e.to_string()))?;
    strategy.validate(params, S1Range::AlphaN)?;
    let n = params.n;
    let an = params.test_size();
    let target = 2 * (params.n_code - params.t_corr);
    let (mut bypassed, mut both) = (0u64, 0u64);
    let mut in_test = vec![false; n];
    let mut delayed = vec![false; n];
    for _ in 0..trials {
        in_test.iter_mut().for_each(|b| *b = false);
        delayed.iter_mut().for_each(|b| *b = false);
        for i in index::sample(rng, n, an) {
            in_test[i] = true;
        }
        for i in index::sample(rng, n, strategy.s1) {
            delayed[i] = true;
        }
        let (mut counted, mut good) = (0usize, 0usize);
        let mut correct_after_reveal = 0usize;
        let mut unmatched_untested = 0usize;
        for i in 0..n {
            let basis_match: bool = rng.random();
            match (in_test[i], delayed[i]) {
                (true, true) => {
                    // a guessed (x, theta): right basis and right bit w.p. 1/4;
                    // against a fresh measurement in the guessed basis, 1/2
                    let bit_right: bool = rng.random();
                    match rule {
                        CheckRule::Formula => {
                            counted += 1;
                            good += bit_right as usize;
                        }
                        CheckRule::Text => {
                            if basis_match {
                                counted += 1;
                                good += bit_right as usize;
                            }
                        }
                    }
                }
                (true, false) => match rule {
                    CheckRule::Formula => {
                        counted += 1;
                        good += 1;
                    }
                    CheckRule::Text => {
                        if basis_match {
                            counted += 1;
                            good += 1;
                        }
                    }
                },
                (false, true) => correct_after_reveal += 1,
                (false, false) => {
                    if basis_match {
                        correct_after_reveal += 1;
                    } else {
                        unmatched_untested += 1;
                    }
                }
            }
        }
        let passed = counted > 0 && passes_ratio(good, counted, params.beta);
        if !passed {
            continue;
        }
        bypassed += 1;
        let guesses = strategy.s2.min(unmatched_untested);
        let lucky = (0..guesses).filter(|_| rng.random::<bool>()).count();
        if correct_after_reveal + lucky >= target {
            both += 1;
        }
    }
    let expected = p_bypass(&params.analysis(0.0), strategy.s1 as u64).to_f64();
    Ok(DelayedReport {
        trials,
        bypassed,
        both_messages: both,
        bypass_rate: bypassed as f64 / trials.max(1) as f64,
        success_rate: both as f64 / trials.max(1) as f64,
        p_bypass: expected,
        rule,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PnsReport {
    pub trials: u64,
    pub detected: u64,
    pub detection_rate: f64,
    pub policy: UnderreportPolicy,
}

/// Each trial simulates `params.total_pulses` pulses, applies the
/// underreporting policy to Bob's click bitmap and runs Alice's click check.
pub fn run_pns_attack(
    optical: &OpticalConfig,
    params: &ProtocolParams,
    policy: UnderreportPolicy,
    trials: u64,
    tree: &SeedTree,
) -> Result<PnsReport, AttackError> {
    if optical.mu <= 0.0 {
        return Err(AttackError::Params("PNS needs multi-photon pulses (mu > 0)".into()));
    }
    for f in [policy.discard_single_photon, policy.fake_vacuum_clicks] {
        if !(0.0..=1.0).contains(&f) {
            return Err(AttackError::Fraction(f));
        }
    }
    let link = OpticalLink::new(optical.clone()).map_err(|e| AttackError::Params(e.to_string()))?;
    let mut detected = 0u64;
    for t in 0..trials {
        let session = tree.indexed("pns", t);
        let run = simulate_pulses(&link, params.total_pulses, &session);
        let mut eve = session.stream("eve");
        let mut clicks = run.detector.clicks.clone();
        for i in 0..clicks.len() {
            let class = run.source.classes[i];
            if clicks.get(i) && run.truth.photons_emitted[i] == 1 && eve.random::<f64>() < policy.discard_single_photon {
                clicks.set(i, false);
            } else if !clicks.get(i)
                && class == crate::optics::IntensityClass::Vacuum
                && eve.random::<f64>() < policy.fake_vacuum_clicks
            {
                clicks.set(i, true);
            }
        }
        let stats = click_stats(&run.source.classes, &clicks);
        if alice_check_click_stats(&stats, params, optical).is_err() {
            detected += 1;
        }
    }
    Ok(PnsReport { trials, detected, detection_rate: detected as f64 / trials.max(1) as f64, policy })
}
