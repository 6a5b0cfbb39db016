//! Quantum oblivious transfer from decoy-state BB84 and hash commitments,
//! its closed-form security analysis, and a batched OPRF / private set
//! intersection stack built on top of it.

pub mod adversary;
pub mod analysis;
pub mod bits;
pub mod harness;
pub mod hashing;
pub mod optics;
pub mod oprf;
pub mod primitives;
pub mod psi;
pub mod qot;
pub mod rng;

pub use bits::Bits;

/// Serde adapter storing a `Bits` as `{ "len": .., "hex": .. }`.
pub(crate) mod serde_bits {
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    use crate::bits::Bits;

    #[derive(Serialize, Deserialize)]
    struct Packed {
        len: usize,
        hex: String,
    }

    pub fn serialize<S: Serializer>(b: &Bits, s: S) -> Result<S::Ok, S::Error> {
        Packed { len: b.len(), hex: hex::encode(b.to_bytes()) }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Bits, D::Error> {
        let p = Packed::deserialize(d)?;
        let bytes = hex::decode(&p.hex).map_err(D::Error::custom)?;
        Bits::from_bytes(&bytes, p.len).ok_or_else(|| D::Error::custom("bit length does not match hex payload"))
    }
}
