//! Session setup and the in-process driver.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::Serialize;

use crate::bits::Bits;
use crate::optics::{ClickStats, OpticalConfig, OpticalLink};
use crate::primitives::BchSpec;
use crate::rng::{streams, SeedTree};

use super::party::{Alice, Bob, BobView, Finish, Party, Role};
use super::quantum::{simulate_pulses, PulseRun};
use super::steps::{check_formula, AbortInfo, TestOutcome};
use super::transcript::Transcript;
use super::wire::AbortReason;
use super::{ProtocolParams, QotError};

/// Everything both parties agree on before a run, plus their private inputs.
#[derive(Clone, Debug)]
pub struct SessionSetup {
    pub params: ProtocolParams,
    pub optical: OpticalConfig,
    pub messages: [Bits; 2],
    pub c: bool,
    pub seed: u64,
}

impl SessionSetup {
    /// Setup with messages drawn from the seed.
    pub fn from_seed(params: ProtocolParams, optical: OpticalConfig, c: bool, seed: u64) -> Self {
        let mut rng = SeedTree::new(seed).stream("messages");
        let messages = [Bits::random(params.lambda, &mut rng), Bits::random(params.lambda, &mut rng)];
        SessionSetup { params, optical, messages, c, seed }
    }

    pub fn tree(&self) -> SeedTree {
        SeedTree::new(self.seed)
    }

    pub fn bch(&self) -> Result<Arc<BchSpec>, QotError> {
        let std = BchSpec::standard();
        if std.n_code == self.params.n_code && std.t_corr == self.params.t_corr {
            Ok(std)
        } else {
            Ok(Arc::new(self.params.bch()?))
        }
    }

    /// The pulse-level simulation. Deterministic in the seed, so separate
    /// processes can each replay it and keep only their own records.
    pub fn simulate(&self) -> Result<PulseRun, QotError> {
        self.params.validate()?;
        let link = OpticalLink::new(self.optical.clone())?;
        Ok(simulate_pulses(&link, self.params.total_pulses, &self.tree()))
    }

    pub fn alice(&self, run: &PulseRun) -> Result<Alice, QotError> {
        Alice::new(
            self.params.clone(),
            self.optical.clone(),
            self.bch()?,
            run.source.clone(),
            self.messages.clone(),
            self.tree().child(streams::ALICE).stream("protocol"),
        )
    }

    pub fn bob(&self, run: &PulseRun) -> Result<Bob, QotError> {
        Bob::new(
            self.params.clone(),
            self.bch()?,
            run.detector.clone(),
            self.c,
            self.tree().child(streams::BOB).stream("protocol"),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SessionStatus {
    Success,
    Aborted { by: Role, reason: AbortReason, detail: String },
    /// Bob's decoder gave up.
    DecodeFailure,
    /// Bob decoded to something other than m_c.
    WrongOutput,
}

impl SessionStatus {
    pub fn is_abort(&self) -> bool {
        matches!(self, SessionStatus::Aborted { .. })
    }

    pub fn is_correctness_failure(&self) -> bool {
        matches!(self, SessionStatus::DecodeFailure | SessionStatus::WrongOutput)
    }
}

#[derive(Clone, Debug)]
pub struct SessionResult {
    pub status: SessionStatus,
    pub recovered: Option<Bits>,
    pub transcript: Transcript,
    pub stats: Option<ClickStats>,
    pub test: Vec<u32>,
    pub test_outcome: Option<TestOutcome>,
    /// Outcome the all-rounds test rule would have given; needs simulation
    /// ground truth, so only the in-process driver fills it.
    pub formula_check: Option<bool>,
    pub bob: BobView,
    pub retained_rounds: Vec<usize>,
}

/// Deliver frames between two parties until both stop talking.
pub fn exchange(alice: &mut dyn Party, bob: &mut dyn Party) -> Transcript {
    let mut transcript = Transcript::new();
    let mut queue: VecDeque<(Role, _)> = VecDeque::new();
    for m in alice.start() {
        queue.push_back((Role::Alice, m));
    }
    for m in bob.start() {
        queue.push_back((Role::Bob, m));
    }
    while let Some((from, msg)) = queue.pop_front() {
        transcript.record(from, &msg);
        let to: &mut dyn Party = match from {
            Role::Alice => &mut *bob,
            Role::Bob => &mut *alice,
        };
        for reply in to.receive(&msg) {
            queue.push_back((from.peer(), reply));
        }
    }
    transcript
}

/// Map the two parties' ends onto one status.
pub fn classify(alice: Option<&Finish>, bob: Option<&Finish>, expected: &Bits) -> (SessionStatus, Option<Bits>) {
    let aborted = |by: Role, info: &AbortInfo| SessionStatus::Aborted { by, reason: info.reason, detail: info.detail.clone() };
    match (alice, bob) {
        (_, Some(Finish::Aborted { by, info })) | (Some(Finish::Aborted { by, info }), _) => (aborted(*by, info), None),
        (_, Some(Finish::Recovered(m))) if m == expected => (SessionStatus::Success, Some(m.clone())),
        (_, Some(Finish::Recovered(m))) => (SessionStatus::WrongOutput, Some(m.clone())),
        (_, Some(Finish::DecodeFailure)) => (SessionStatus::DecodeFailure, None),
        _ => (
            SessionStatus::Aborted {
                by: Role::Bob,
                reason: AbortReason::Transport,
                detail: "session ended without a result".into(),
            },
            None,
        ),
    }
}

pub fn run_setup(setup: &SessionSetup) -> Result<SessionResult, QotError> {
    let run = setup.simulate()?;
    let mut alice = setup.alice(&run)?;
    let mut bob = setup.bob(&run)?;
    let transcript = exchange(&mut alice, &mut bob);
    let expected = &setup.messages[setup.c as usize];
    let (status, recovered) = classify(alice.finish(), bob.finish(), expected);
    let formula_check = (!alice.test.is_empty() && alice.test_outcome.is_some()).then(|| {
        let consistent: Vec<bool> = alice
            .test
            .iter()
            .map(|&j| !run.truth.flipped.get(alice.rounds[j as usize]))
            .collect();
        check_formula(&consistent, setup.params.beta)
    });
    Ok(SessionResult {
        status,
        recovered,
        transcript,
        stats: alice.stats,
        test: alice.test.clone(),
        test_outcome: alice.test_outcome,
        formula_check,
        bob: bob.view.clone(),
        retained_rounds: alice.rounds.clone(),
    })
}

/// One honest session with the given inputs, fully in process.
pub fn run_session(
    params: &ProtocolParams,
    optical: &OpticalConfig,
    m0: &Bits,
    m1: &Bits,
    c: bool,
    seed: u64,
) -> Result<SessionResult, QotError> {
    run_setup(&SessionSetup {
        params: params.clone(),
        optical: optical.clone(),
        messages: [m0.clone(), m1.clone()],
        c,
        seed,
    })
}
