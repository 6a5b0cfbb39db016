//! Commitment, error correction and privacy amplification.

pub mod bch;
pub mod commitment;
pub mod gf2m;
pub mod toeplitz;

pub use bch::{bch_decode, bch_encode, BchError, BchSpec, DecodeOutcome};
pub use commitment::{commit, verify_open, CommitError, Commitment, Opening, DIGEST_LEN, NONCE_LEN};
pub use toeplitz::{amplify, AmplifierSeed, AmplifyError};
