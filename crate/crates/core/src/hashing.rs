//! SHA-256 with per-use domain separation.

use sha2::{Digest, Sha256};

pub mod tags {
    pub const COMMITMENT: &[u8] = b"qotmpc/commit/v1\0";
    pub const PRC: &[u8] = b"qotmpc/prc/v1\0";
    pub const CORRELATION_ROBUST: &[u8] = b"qotmpc/crh/v1\0";
    pub const CUCKOO: &[u8] = b"qotmpc/cuckoo/v1\0";
}

/// Expands `(tag, parts)` into `out_len` bytes with a counter-mode SHA-256.
/// Each part is length-prefixed, so distinct part lists never collide.
pub fn expand(tag: &[u8], parts: &[&[u8]], out_len: usize) -> Vec<u8> {
    let mut base = Sha256::new();
    base.update(tag);
    for p in parts {
        base.update((p.len() as u64).to_be_bytes());
        base.update(p);
    }
    let mut out = Vec::with_capacity(out_len.div_ceil(32) * 32);
    let mut ctr = 0u32;
    while out.len() < out_len {
        let mut h = base.clone();
        h.update(ctr.to_be_bytes());
        out.extend_from_slice(&h.finalize());
        ctr += 1;
    }
    out.truncate(out_len);
    out
}
