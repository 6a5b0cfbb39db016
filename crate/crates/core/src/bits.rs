//! Packed bit strings.
//!
//! Bit `i` lives in word `i / 64` at position `i % 64`. Bits past `len` in the
//! last word are always zero, so equality and hashing can compare words.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use rand::Rng;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut b = Bits {
            words: (0..len.div_ceil(64)).map(|_| rng.random()).collect(),
            len,
        };
        b.clear_tail();
        b
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut b = Bits::zeros(0);
        for bit in iter {
            b.push(bit);
        }
        b
    }

    /// Little-endian bit order within each byte, matching `to_bytes`.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut b = Bits::zeros(len);
        for (i, byte) in bytes.iter().enumerate() {
            b.words[i / 8] |= (*byte as u64) << ((i % 8) * 8);
        }
        let tail_ok = len % 8 == 0 || bytes.last().is_none_or(|&x| x >> (len % 8) == 0);
        if !tail_ok {
            return None;
        }
        Some(b)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        (0..self.len.div_ceil(8))
            .map(|i| (self.words[i / 8] >> ((i % 8) * 8)) as u8)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i & 63);
        if v {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn push(&mut self, v: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, v);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn hamming_distance(&self, other: &Bits) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Parity of the bitwise AND, i.e. the GF(2) inner product.
    pub fn dot(&self, other: &Bits) -> bool {
        assert_eq!(self.len, other.len);
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= a & b;
        }
        acc.count_ones() & 1 == 1
    }

    pub fn and(&self, other: &Bits) -> Bits {
        assert_eq!(self.len, other.len);
        Bits {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
            len: self.len,
        }
    }

    /// Bits `[start, start + len)` as a new string.
    pub fn slice(&self, start: usize, len: usize) -> Bits {
        assert!(start + len <= self.len);
        let mut out = Bits::zeros(len);
        if start % 64 == 0 {
            let w0 = start / 64;
            out.words.copy_from_slice(&self.words[w0..w0 + len.div_ceil(64)]);
        } else {
            let shift = start % 64;
            for (k, w) in out.words.iter_mut().enumerate() {
                let lo = self.words[start / 64 + k] >> shift;
                let hi = self
                    .words
                    .get(start / 64 + k + 1)
                    .map_or(0, |h| h << (64 - shift));
                *w = lo | hi;
            }
        }
        out.clear_tail();
        out
    }

    /// Gathers the bits at `indices`, in the order given.
    pub fn select(&self, indices: &[usize]) -> Bits {
        Bits::from_bools(indices.iter().map(|&i| self.get(i)))
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl BitXorAssign<&Bits> for Bits {
    fn bitxor_assign(&mut self, rhs: &Bits) {
        assert_eq!(self.len, rhs.len, "xor of bit strings with different lengths");
        for (a, b) in self.words.iter_mut().zip(&rhs.words) {
            *a ^= b;
        }
    }
}

impl BitXor<&Bits> for &Bits {
    type Output = Bits;
    fn bitxor(self, rhs: &Bits) -> Bits {
        let mut out = self.clone();
        out ^= rhs;
        out
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits[{}](", self.len)?;
        for b in self.iter().take(64) {
            f.write_str(if b { "1" } else { "0" })?;
        }
        if self.len > 64 {
            f.write_str("…")?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slice_across_words() {
        let b = Bits::from_bools((0..200).map(|i| i % 3 == 0));
        let s = b.slice(61, 70);
        for i in 0..70 {
            assert_eq!(s.get(i), (61 + i) % 3 == 0);
        }
    }

    #[test]
    fn from_bytes_rejects_dirty_tail() {
        assert!(Bits::from_bytes(&[0xff], 4).is_none());
        assert!(Bits::from_bytes(&[0x0f], 4).is_some());
        assert!(Bits::from_bytes(&[0x0f, 0], 4).is_none());
    }

    proptest! {
        #[test]
        fn bytes_roundtrip(v in proptest::collection::vec(any::<bool>(), 0..300)) {
            let b = Bits::from_bools(v.iter().copied());
            let back = Bits::from_bytes(&b.to_bytes(), b.len()).unwrap();
            prop_assert_eq!(&back, &b);
            prop_assert_eq!(back.iter().collect::<Vec<_>>(), v);
        }

        #[test]
        fn ones_match_get(v in proptest::collection::vec(any::<bool>(), 0..300)) {
            let b = Bits::from_bools(v.iter().copied());
            let ones: Vec<usize> = b.iter_ones().collect();
            let expect: Vec<usize> = v.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect();
            prop_assert_eq!(ones, expect);
        }
    }
}
