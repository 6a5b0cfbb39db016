//! Toeplitz-matrix universal hashing for privacy amplification.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AmplifyError {
    #[error("seed must hold {expected} bits for a {out}x{key} matrix, got {got}")]
    SeedLength { expected: usize, got: usize, out: usize, key: usize },
    #[error("key must be {expected} bits, got {got}")]
    KeyLength { expected: usize, got: usize },
}

/// Defines the `out_len x key_len` Toeplitz matrix `T[i][j] = seed[i + key_len - 1 - j]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmplifierSeed {
    out_len: usize,
    key_len: usize,
    #[serde(with = "crate::serde_bits")]
    seed_bits: Bits,
}

impl AmplifierSeed {
    pub fn new(out_len: usize, key_len: usize, seed_bits: Bits) -> Result<Self, AmplifyError> {
        let expected = out_len + key_len - 1;
        if out_len == 0 || key_len == 0 || seed_bits.len() != expected {
            return Err(AmplifyError::SeedLength { expected, got: seed_bits.len(), out: out_len, key: key_len });
        }
        Ok(AmplifierSeed { out_len, key_len, seed_bits })
    }

    pub fn random<R: Rng + ?Sized>(out_len: usize, key_len: usize, rng: &mut R) -> Self {
        let bits = Bits::random(out_len + key_len - 1, rng);
        AmplifierSeed::new(out_len, key_len, bits).expect("length matches by construction")
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn key_len(&self) -> usize {
        self.key_len
    }

    pub fn bits(&self) -> &Bits {
        &self.seed_bits
    }
}

pub fn amplify(seed: &AmplifierSeed, key: &Bits) -> Result<Bits, AmplifyError> {
    if key.len() != seed.key_len {
        return Err(AmplifyError::KeyLength { expected: seed.key_len, got: key.len() });
    }
    let k = seed.key_len;
    let reversed = Bits::from_bools((0..k).map(|j| key.get(k - 1 - j)));
    Ok(Bits::from_bools(
        (0..seed.out_len).map(|i| seed.seed_bits.slice(i, k).dot(&reversed)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    /// Straight matrix-vector product from the definition.
    fn naive(seed: &AmplifierSeed, key: &Bits) -> Bits {
        let k = seed.key_len();
        Bits::from_bools((0..seed.out_len()).map(|i| {
            (0..k).fold(false, |acc, j| acc ^ (seed.bits().get(i + k - 1 - j) & key.get(j)))
        }))
    }

    #[test]
    fn matches_matrix_definition() {
        let mut rng = SeedTree::new(1).rng();
        for &(out, k) in &[(1, 1), (5, 3), (16, 70), (256, 259)] {
            let s = AmplifierSeed::random(out, k, &mut rng);
            let key = Bits::random(k, &mut rng);
            assert_eq!(amplify(&s, &key).unwrap(), naive(&s, &key));
        }
    }

    #[test]
    fn zero_key_and_linearity() {
        let mut rng = SeedTree::new(2).rng();
        let s = AmplifierSeed::random(256, 259, &mut rng);
        assert_eq!(amplify(&s, &Bits::zeros(259)).unwrap(), Bits::zeros(256));
        for _ in 0..200 {
            let a = Bits::random(259, &mut rng);
            let b = Bits::random(259, &mut rng);
            let lhs = amplify(&s, &(&a ^ &b)).unwrap();
            let rhs = &amplify(&s, &a).unwrap() ^ &amplify(&s, &b).unwrap();
            assert_eq!(lhs, rhs);
        }
        let key = Bits::random(259, &mut rng);
        assert_eq!(amplify(&s, &key).unwrap(), amplify(&s, &key).unwrap());
    }

    #[test]
    fn collision_rate_at_sixteen_bits() {
        let mut rng = SeedTree::new(3).rng();
        let trials = 1_000_000u64;
        let mut collisions = 0u64;
        for _ in 0..trials {
            let s = AmplifierSeed::random(16, 64, &mut rng);
            let a = Bits::random(64, &mut rng);
            let mut b = Bits::random(64, &mut rng);
            if a == b {
                b.flip(0);
            }
            collisions += (amplify(&s, &a).unwrap() == amplify(&s, &b).unwrap()) as u64;
        }
        let p = 1.0 / 65536.0;
        let bound = trials as f64 * p + 3.0 * (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((collisions as f64) <= bound, "{collisions} collisions > {bound}");
    }

    #[test]
    fn length_checks() {
        assert!(AmplifierSeed::new(4, 4, Bits::zeros(6)).is_err());
        let s = AmplifierSeed::new(4, 4, Bits::zeros(7)).unwrap();
        assert_eq!(amplify(&s, &Bits::zeros(3)), Err(AmplifyError::KeyLength { expected: 4, got: 3 }));
    }
}
