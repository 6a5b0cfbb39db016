//! Alice and Bob as message-driven state machines.

use std::sync::Arc;

use serde::Serialize;

use crate::bits::Bits;
use crate::optics::{ClickStats, OpticalConfig};
use crate::primitives::{AmplifierSeed, BchSpec, Commitment, Opening};
use crate::rng::StreamRng;

use super::quantum::{click_stats, select_signal_rounds, DetectorRecord, SourceRecord};
use super::steps::{self, AbortInfo, TestOutcome};
use super::wire::{AbortReason, Masked, Payload, Tag, WireMessage};
use super::{ProtocolParams, QotError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Alice => "alice",
            Role::Bob => "bob",
        }
    }

    pub fn peer(self) -> Role {
        match self {
            Role::Alice => Role::Bob,
            Role::Bob => Role::Alice,
        }
    }
}

/// How a party's run ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Finish {
    /// Alice sent the masked payload.
    Sent,
    /// Bob decoded a message.
    Recovered(Bits),
    /// Bob's decoder rejected the word.
    DecodeFailure,
    Aborted { by: Role, info: AbortInfo },
}

/// One side of the protocol. `start` yields the opening messages (possibly
/// none); `receive` advances on each delivered frame.
pub trait Party {
    fn role(&self) -> Role;
    fn start(&mut self) -> Vec<WireMessage>;
    fn receive(&mut self, msg: &WireMessage) -> Vec<WireMessage>;
    fn finish(&self) -> Option<&Finish>;
    /// Called when the channel fails underneath the party.
    fn transport_failed(&mut self, detail: &str);
}

fn decode(msg: &WireMessage) -> Result<Payload, AbortInfo> {
    Payload::decode(msg).map_err(|e| AbortInfo::new(AbortReason::ProtocolViolation, e.to_string()))
}

fn unexpected(expected: &str, got: Tag) -> AbortInfo {
    AbortInfo::new(AbortReason::ProtocolViolation, format!("expected {expected}, got {got}"))
}

fn abort_msg(info: &AbortInfo) -> WireMessage {
    Payload::Abort { reason: info.reason, detail: info.detail.clone() }.encode()
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum AlicePhase {
    AwaitClicks,
    AwaitCommitments,
    AwaitOpenings,
    AwaitIndexSets,
    Done,
}

pub struct Alice {
    params: ProtocolParams,
    optical: OpticalConfig,
    bch: Arc<BchSpec>,
    source: SourceRecord,
    messages: [Bits; 2],
    rng: StreamRng,
    phase: AlicePhase,
    finish: Option<Finish>,
    pub stats: Option<ClickStats>,
    pub rounds: Vec<usize>,
    x: Bits,
    theta: Bits,
    commitments: Vec<Commitment>,
    pub test: Vec<u32>,
    pub test_outcome: Option<TestOutcome>,
    pub keys: Option<[Bits; 2]>,
}

impl Alice {
    pub fn new(
        params: ProtocolParams,
        optical: OpticalConfig,
        bch: Arc<BchSpec>,
        source: SourceRecord,
        messages: [Bits; 2],
        rng: StreamRng,
    ) -> Result<Self, QotError> {
        params.validate()?;
        for m in &messages {
            if m.len() != params.lambda {
                return Err(QotError::Params(format!("message of {} bits, lambda = {}", m.len(), params.lambda)));
            }
        }
        Ok(Alice {
            params,
            optical,
            bch,
            source,
            messages,
            rng,
            phase: AlicePhase::AwaitClicks,
            finish: None,
            stats: None,
            rounds: Vec::new(),
            x: Bits::zeros(0),
            theta: Bits::zeros(0),
            commitments: Vec::new(),
            test: Vec::new(),
            test_outcome: None,
            keys: None,
        })
    }

    fn step(&mut self, p: Payload) -> Result<Vec<Payload>, AbortInfo> {
        match (&self.phase, p) {
            (AlicePhase::AwaitClicks, Payload::NoClickReport { clicks }) => {
                if clicks.len() != self.source.classes.len() {
                    return Err(AbortInfo::new(
                        AbortReason::ProtocolViolation,
                        format!("click report covers {} of {} pulses", clicks.len(), self.source.classes.len()),
                    ));
                }
                let stats = click_stats(&self.source.classes, &clicks);
                self.stats = Some(stats);
                steps::alice_check_click_stats(&stats, &self.params, &self.optical)?;
                let rounds = select_signal_rounds(&self.source.classes, &clicks, self.params.n)
                    .map_err(|e| AbortInfo::new(AbortReason::InsufficientClicks, e.to_string()))?;
                self.x = self.source.x.select(&rounds);
                self.theta = self.source.theta.select(&rounds);
                let wire = rounds.iter().map(|&r| r as u32).collect();
                self.rounds = rounds;
                self.phase = AlicePhase::AwaitCommitments;
                Ok(vec![Payload::DecoyReveal { rounds: wire }])
            }
            (AlicePhase::AwaitCommitments, Payload::CommitmentBatch { digests }) => {
                if digests.len() != self.params.n {
                    return Err(AbortInfo::new(
                        AbortReason::ProtocolViolation,
                        format!("{} commitments for {} rounds", digests.len(), self.params.n),
                    ));
                }
                self.commitments = digests;
                self.test = steps::alice_select_test(&self.params, &mut self.rng);
                self.phase = AlicePhase::AwaitOpenings;
                Ok(vec![Payload::TestChallenge { indices: self.test.clone() }])
            }
            (AlicePhase::AwaitOpenings, Payload::TestOpenings { openings }) => {
                let out = steps::alice_verify_test(&self.test, &self.commitments, &openings, &self.x, &self.theta, &self.params)?;
                self.test_outcome = Some(out);
                self.phase = AlicePhase::AwaitIndexSets;
                Ok(vec![Payload::TestVerdict { passed: true }, Payload::BasisReveal { theta: self.theta.clone() }])
            }
            (AlicePhase::AwaitIndexSets, Payload::IndexSets { i0, i1 }) => {
                steps::alice_check_index_sets(&i0, &i1, &self.test, self.params.n, self.params.n_code)?;
                let k = self.bch.k_msg;
                let seeds = [
                    AmplifierSeed::random(self.params.lambda, k, &mut self.rng),
                    AmplifierSeed::random(self.params.lambda, k, &mut self.rng),
                ];
                let (masked, keys) = steps::alice_mask(
                    &self.bch,
                    &self.x,
                    [&i0, &i1],
                    [&self.messages[0], &self.messages[1]],
                    seeds,
                    &mut self.rng,
                );
                self.keys = Some(keys);
                self.phase = AlicePhase::Done;
                self.finish = Some(Finish::Sent);
                Ok(vec![Payload::MaskedPayload(masked)])
            }
            (_, p) => Err(unexpected(alice_expects(&self.phase), p.tag())),
        }
    }
}

fn alice_expects(p: &AlicePhase) -> &'static str {
    match p {
        AlicePhase::AwaitClicks => "NoClickReport",
        AlicePhase::AwaitCommitments => "CommitmentBatch",
        AlicePhase::AwaitOpenings => "TestOpenings",
        AlicePhase::AwaitIndexSets => "IndexSets",
        AlicePhase::Done => "nothing",
    }
}

/// Shared handling of a delivered frame for either role.
fn drive<F>(role: Role, finish: &mut Option<Finish>, msg: &WireMessage, step: F) -> Vec<WireMessage>
where
    F: FnOnce(Payload) -> Result<Vec<Payload>, AbortInfo>,
{
    if finish.is_some() {
        return Vec::new();
    }
    let result = decode(msg).and_then(|p| match p {
        Payload::Abort { reason, detail } => {
            *finish = Some(Finish::Aborted { by: role.peer(), info: AbortInfo { reason, detail } });
            Ok(Vec::new())
        }
        p => step(p),
    });
    match result {
        Ok(out) => out.iter().map(Payload::encode).collect(),
        Err(info) => {
            let m = abort_msg(&info);
            if !matches!(finish, Some(Finish::Aborted { .. })) {
                *finish = Some(Finish::Aborted { by: role, info });
            }
            vec![m]
        }
    }
}

impl Party for Alice {
    fn role(&self) -> Role {
        Role::Alice
    }

    fn start(&mut self) -> Vec<WireMessage> {
        Vec::new()
    }

    fn receive(&mut self, msg: &WireMessage) -> Vec<WireMessage> {
        let mut finish = self.finish.take();
        let out = drive(Role::Alice, &mut finish, msg, |p| self.step(p));
        if self.finish.is_none() {
            self.finish = finish;
        }
        out
    }

    fn finish(&self) -> Option<&Finish> {
        self.finish.as_ref()
    }

    fn transport_failed(&mut self, detail: &str) {
        if self.finish.is_none() {
            self.finish = Some(Finish::Aborted { by: Role::Alice, info: AbortInfo::new(AbortReason::Transport, detail) });
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum BobPhase {
    Start,
    AwaitDecoyReveal,
    AwaitChallenge,
    AwaitVerdict,
    AwaitBasis,
    AwaitPayload,
    Done,
}

/// What an honest-but-curious Bob holds at the end of a run.
#[derive(Clone, Debug, Default)]
pub struct BobView {
    pub x_tilde: Bits,
    pub theta_tilde: Bits,
    pub test: Vec<u32>,
    pub openings: Vec<Opening>,
    pub index_sets: Option<(Vec<u32>, Vec<u32>)>,
    pub payload: Option<Masked>,
}

pub struct Bob {
    params: ProtocolParams,
    bch: Arc<BchSpec>,
    detector: DetectorRecord,
    c: bool,
    rng: StreamRng,
    phase: BobPhase,
    finish: Option<Finish>,
    openings: Vec<Opening>,
    pub view: BobView,
}

impl Bob {
    pub fn new(params: ProtocolParams, bch: Arc<BchSpec>, detector: DetectorRecord, c: bool, rng: StreamRng) -> Result<Self, QotError> {
        params.validate()?;
        Ok(Bob {
            params,
            bch,
            detector,
            c,
            rng,
            phase: BobPhase::Start,
            finish: None,
            openings: Vec::new(),
            view: BobView::default(),
        })
    }

    pub fn choice(&self) -> bool {
        self.c
    }

    fn step(&mut self, p: Payload) -> Result<Vec<Payload>, AbortInfo> {
        let n = self.params.n;
        match (&self.phase, p) {
            (BobPhase::AwaitDecoyReveal, Payload::DecoyReveal { rounds }) => {
                let pulses = self.detector.clicks.len();
                let valid = rounds.len() == n
                    && rounds.windows(2).all(|w| w[0] < w[1])
                    && rounds.iter().all(|&r| (r as usize) < pulses && self.detector.clicks.get(r as usize));
                if !valid {
                    return Err(AbortInfo::new(AbortReason::ProtocolViolation, "retained rounds are not n increasing clicked pulses"));
                }
                let idx: Vec<usize> = rounds.iter().map(|&r| r as usize).collect();
                self.view.x_tilde = self.detector.x_tilde.select(&idx);
                self.view.theta_tilde = self.detector.theta_tilde.select(&idx);
                let (cs, os) = steps::bob_commit_all(&self.view.x_tilde, &self.view.theta_tilde, &mut self.rng);
                self.openings = os;
                self.phase = BobPhase::AwaitChallenge;
                Ok(vec![Payload::CommitmentBatch { digests: cs }])
            }
            (BobPhase::AwaitChallenge, Payload::TestChallenge { indices }) => {
                let valid = indices.len() == self.params.test_size()
                    && indices.windows(2).all(|w| w[0] < w[1])
                    && indices.last().is_none_or(|&i| (i as usize) < n);
                if !valid {
                    return Err(AbortInfo::new(AbortReason::ProtocolViolation, "test set is not an increasing alpha*n subset"));
                }
                let opened: Vec<Opening> = indices.iter().map(|&i| self.openings[i as usize].clone()).collect();
                self.view.test = indices;
                self.view.openings = opened.clone();
                self.phase = BobPhase::AwaitVerdict;
                Ok(vec![Payload::TestOpenings { openings: opened }])
            }
            (BobPhase::AwaitVerdict, Payload::TestVerdict { passed }) => {
                if !passed {
                    return Err(AbortInfo::new(AbortReason::TestRatio, "sender reported a failed test"));
                }
                self.phase = BobPhase::AwaitBasis;
                Ok(Vec::new())
            }
            (BobPhase::AwaitBasis, Payload::BasisReveal { theta }) => {
                if theta.len() != n {
                    return Err(AbortInfo::new(AbortReason::ProtocolViolation, "basis reveal has wrong length"));
                }
                let (i0, i1) = steps::bob_partition(&theta, &self.view.theta_tilde, &self.view.test, self.c, &self.params)?;
                self.view.index_sets = Some((i0.clone(), i1.clone()));
                self.phase = BobPhase::AwaitPayload;
                Ok(vec![Payload::IndexSets { i0, i1 }])
            }
            (BobPhase::AwaitPayload, Payload::MaskedPayload(m)) => {
                let (i0, i1) = self.view.index_sets.clone().expect("set before payload");
                let ic = if self.c { i1 } else { i0 };
                let idx: Vec<usize> = ic.iter().map(|&i| i as usize).collect();
                let out = steps::bob_recover(&self.bch, &m, &self.view.x_tilde.select(&idx), self.c);
                self.view.payload = Some(m);
                self.phase = BobPhase::Done;
                self.finish = Some(match out {
                    Some(msg) => Finish::Recovered(msg),
                    None => Finish::DecodeFailure,
                });
                Ok(Vec::new())
            }
            (phase, p) => Err(unexpected(bob_expects(phase), p.tag())),
        }
    }
}

fn bob_expects(p: &BobPhase) -> &'static str {
    match p {
        BobPhase::Start => "nothing before start",
        BobPhase::AwaitDecoyReveal => "DecoyReveal",
        BobPhase::AwaitChallenge => "TestChallenge",
        BobPhase::AwaitVerdict => "TestVerdict",
        BobPhase::AwaitBasis => "BasisReveal",
        BobPhase::AwaitPayload => "MaskedPayload",
        BobPhase::Done => "nothing",
    }
}

impl Party for Bob {
    fn role(&self) -> Role {
        Role::Bob
    }

    fn start(&mut self) -> Vec<WireMessage> {
        assert_eq!(self.phase, BobPhase::Start, "Bob started twice");
        self.phase = BobPhase::AwaitDecoyReveal;
        vec![Payload::NoClickReport { clicks: self.detector.clicks.clone() }.encode()]
    }

    fn receive(&mut self, msg: &WireMessage) -> Vec<WireMessage> {
        let mut finish = self.finish.take();
        let out = drive(Role::Bob, &mut finish, msg, |p| self.step(p));
        if self.finish.is_none() {
            self.finish = finish;
        }
        out
    }

    fn finish(&self) -> Option<&Finish> {
        self.finish.as_ref()
    }

    fn transport_failed(&mut self, detail: &str) {
        if self.finish.is_none() {
            self.finish = Some(Finish::Aborted { by: Role::Bob, info: AbortInfo::new(AbortReason::Transport, detail) });
        }
    }
}
