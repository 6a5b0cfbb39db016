//! 1-out-of-2 oblivious transfer over the simulated BB84 link.
//!
//! Message order on the classical channel:
//!
//! ```text
//! Bob   -> Alice  NoClickReport     click bitmap over all pulses
//! Alice -> Bob    DecoyReveal       retained signal rounds (or Abort)
//! Bob   -> Alice  CommitmentBatch   n digests
//! Alice -> Bob    TestChallenge     test set T
//! Bob   -> Alice  TestOpenings      openings on T
//! Alice -> Bob    TestVerdict       (or Abort)
//! Alice -> Bob    BasisReveal       theta
//! Bob   -> Alice  IndexSets         I0, I1
//! Alice -> Bob    MaskedPayload     seeds, y0, y1, z0, z1
//! ```

use thiserror::Error;

mod params;
pub mod party;
pub mod quantum;
pub mod session;
pub mod steps;
pub mod transcript;
pub mod wire;

pub use params::{PartitionPolicy, ProtocolParams};
pub use party::{Alice, Bob, BobView, Finish, Party, Role};
pub use quantum::{run_quantum_phase, QuantumPhase};
pub use session::{exchange, run_session, run_setup, SessionResult, SessionSetup, SessionStatus};
pub use steps::{
    alice_check_click_stats, alice_mask, alice_select_test, alice_verify_test, bob_commit_all, bob_partition,
    bob_recover, check_formula, check_text, AbortInfo, TestOutcome,
};
pub use transcript::Transcript;
pub use wire::{AbortReason, Masked, Payload, Tag, WireError, WireMessage};

#[derive(Debug, Error)]
pub enum QotError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("only {got} clicked signal rounds, need {needed}")]
    InsufficientClicks { needed: usize, got: usize },
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::Bits;
    use crate::optics::OpticalConfig;
    use crate::rng::SeedTree;

    fn noiseless() -> OpticalConfig {
        OpticalConfig { attenuation_db: 10.0, ..OpticalConfig::noiseless() }
    }

    #[test]
    fn noiseless_sessions_return_the_chosen_message() {
        let params = ProtocolParams::default();
        let mut rng = SeedTree::new(11).rng();
        let m0 = Bits::random(256, &mut rng);
        let m1 = Bits::random(256, &mut rng);
        for (c, seed) in [(false, 1u64), (true, 2), (true, 3), (false, 4)] {
            let r = run_session(&params, &noiseless(), &m0, &m1, c, seed).unwrap();
            assert_eq!(r.status, SessionStatus::Success, "{:?}", r.status);
            assert_eq!(r.recovered.as_ref(), Some(if c { &m1 } else { &m0 }));
            r.transcript.validate_grammar().unwrap();
            assert_eq!(r.transcript.len(), 9);
            let (i0, i1) = r.bob.index_sets.clone().unwrap();
            assert_eq!((i0.len(), i1.len()), (511, 511));
            let mut all: Vec<u32> = i0.iter().chain(&i1).chain(&r.test).copied().collect();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), 511 * 2 + 1022);
        }
    }

    #[test]
    fn same_seed_same_transcript() {
        let params = ProtocolParams::default();
        let s = session::SessionSetup::from_seed(params, OpticalConfig::default(), true, 77);
        let a = run_setup(&s).unwrap();
        let b = run_setup(&s).unwrap();
        assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
    }

    #[test]
    fn too_few_pulses_aborts_with_diagnostic() {
        let params = ProtocolParams { total_pulses: 20_000, ..ProtocolParams::default() };
        let s = session::SessionSetup::from_seed(params, OpticalConfig::default(), false, 5);
        let r = run_setup(&s).unwrap();
        match &r.status {
            SessionStatus::Aborted { by: Role::Alice, reason: AbortReason::InsufficientClicks, .. } => {}
            other => panic!("{other:?}"),
        }
        r.transcript.validate_grammar().unwrap();
        assert_eq!(r.transcript.tags(), vec!["NoClickReport", "Abort"]);
    }

    #[test]
    fn skewed_click_ratio_aborts() {
        let params = ProtocolParams::default();
        let optical = OpticalConfig { expected_click_ratio: Some([0.2, 0.01, 1e-5]), ..OpticalConfig::default() };
        let s = session::SessionSetup::from_seed(params, optical, false, 6);
        let r = run_setup(&s).unwrap();
        assert!(matches!(r.status, SessionStatus::Aborted { reason: AbortReason::ClickStatistics, .. }));
    }

    #[test]
    fn transcript_jsonl_roundtrip() {
        let s = session::SessionSetup::from_seed(ProtocolParams::default(), OpticalConfig::default(), false, 8);
        let r = run_setup(&s).unwrap();
        let text = r.transcript.to_jsonl();
        let back = Transcript::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, r.transcript);
        let msgs = back.messages().unwrap();
        assert!(msgs.iter().all(|(_, m)| Payload::decode(m).is_ok()));
    }

    #[test]
    fn corrupt_frame_from_peer_aborts() {
        let s = session::SessionSetup::from_seed(ProtocolParams::default(), OpticalConfig::default(), false, 9);
        let run = s.simulate().unwrap();
        let mut alice = s.alice(&run).unwrap();
        let out = alice.receive(&WireMessage { tag: Tag::NoClickReport, payload: vec![0, 0] });
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tag, Tag::Abort);
        assert!(matches!(alice.finish(), Some(Finish::Aborted { by: Role::Alice, .. })));
    }
}
