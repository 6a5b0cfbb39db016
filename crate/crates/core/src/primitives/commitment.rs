//! Hash commitments to one measured round, `c = H(tag || x || theta || r)`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hashing::tags;

pub const DIGEST_LEN: usize = 32;
pub const NONCE_LEN: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CommitError {
    #[error("commitment nonce must be at least {NONCE_LEN} bytes, got {0}")]
    NonceTooShort(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Commitment {
    pub digest: [u8; DIGEST_LEN],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opening {
    pub x_tilde: bool,
    pub theta_tilde: bool,
    pub nonce: Vec<u8>,
}

pub fn commit(x_tilde: bool, theta_tilde: bool, nonce: &[u8]) -> Result<Commitment, CommitError> {
    if nonce.len() < NONCE_LEN {
        return Err(CommitError::NonceTooShort(nonce.len()));
    }
    let mut h = Sha256::new();
    h.update(tags::COMMITMENT);
    h.update([x_tilde as u8, theta_tilde as u8]);
    h.update(nonce);
    Ok(Commitment { digest: h.finalize().into() })
}

pub fn verify_open(c: &Commitment, o: &Opening) -> bool {
    commit(o.x_tilde, o.theta_tilde, &o.nonce).is_ok_and(|d| d == *c)
}
