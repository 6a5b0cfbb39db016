//! Narrow-sense binary BCH codes of length 2^m - 1.
//!
//! Encoding is systematic: parity occupies coefficients `0..n-k`, the message
//! the top `k` coefficients. Decoding is bounded-distance: syndromes,
//! Berlekamp-Massey, then a Chien search that must find exactly `deg(Λ)`
//! distinct roots or the word is reported undecodable.

use std::sync::{Arc, OnceLock};

use thiserror::Error;

use super::gf2m::Gf2m;
use crate::bits::Bits;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BchError {
    #[error("unsupported BCH parameters: m={m}, t={t}")]
    Unsupported { m: u32, t: usize },
    #[error("expected {expected} bits, got {got}")]
    Length { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeOutcome {
    Decoded { message: Bits, corrected: usize },
    Failure,
}

impl DecodeOutcome {
    pub fn message(self) -> Option<Bits> {
        match self {
            DecodeOutcome::Decoded { message, .. } => Some(message),
            DecodeOutcome::Failure => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BchSpec {
    pub n_code: usize,
    pub k_msg: usize,
    pub t_corr: usize,
    /// Generator coefficients, index = degree, length `n_code - k_msg + 1`.
    pub generator: Bits,
    field: Gf2m,
}

impl BchSpec {
    /// Narrow-sense code over GF(2^m) with designed distance 2t + 1.
    pub fn new(m: u32, t: usize) -> Result<Self, BchError> {
        let field = Gf2m::new(m).ok_or(BchError::Unsupported { m, t })?;
        let n = field.order();
        if t == 0 || 2 * t >= n {
            return Err(BchError::Unsupported { m, t });
        }
        // Product of the minimal polynomials of alpha^1 .. alpha^2t, one per
        // cyclotomic coset.
        let mut covered = vec![false; n];
        let mut gen: Vec<u16> = vec![1];
        for i in 1..=2 * t {
            if covered[i] {
                continue;
            }
            let mut j = i;
            while !covered[j] {
                covered[j] = true;
                // gen *= (x + alpha^j)
                let root = field.alpha_pow(j as i64);
                let mut next = vec![0u16; gen.len() + 1];
                for (d, &c) in gen.iter().enumerate() {
                    next[d + 1] ^= c;
                    next[d] ^= field.mul(c, root);
                }
                gen = next;
                j = (2 * j) % n;
            }
        }
        let generator = Bits::from_bools(gen.iter().map(|&c| {
            debug_assert!(c <= 1, "minimal-polynomial product left GF(2)");
            c == 1
        }));
        let k = n - (generator.len() - 1);
        if k == 0 {
            return Err(BchError::Unsupported { m, t });
        }
        Ok(BchSpec { n_code: n, k_msg: k, t_corr: t, generator, field })
    }

    /// The (511, 259) code correcting 30 errors, built once per process.
    pub fn standard() -> Arc<BchSpec> {
        static STANDARD: OnceLock<Arc<BchSpec>> = OnceLock::new();
        STANDARD
            .get_or_init(|| Arc::new(BchSpec::new(9, 30).expect("standard BCH code")))
            .clone()
    }

    pub fn parity_len(&self) -> usize {
        self.n_code - self.k_msg
    }

    pub fn designed_distance(&self) -> usize {
        2 * self.t_corr + 1
    }

    pub fn encode(&self, msg: &Bits) -> Result<Bits, BchError> {
        if msg.len() != self.k_msg {
            return Err(BchError::Length { expected: self.k_msg, got: msg.len() });
        }
        let r = self.parity_len();
        let words = r.div_ceil(64);
        let top_word = (r - 1) / 64;
        let top_bit = (r - 1) % 64;
        let g_low: Vec<u64> = (0..words)
            .map(|w| {
                let mut v = 0u64;
                for b in 0..64 {
                    let d = w * 64 + b;
                    if d < r && self.generator.get(d) {
                        v |= 1 << b;
                    }
                }
                v
            })
            .collect();
        // LFSR division of msg(x) * x^r by g(x).
        let mut rem = vec![0u64; words];
        for i in (0..self.k_msg).rev() {
            let fb = msg.get(i) ^ ((rem[top_word] >> top_bit) & 1 == 1);
            for w in (1..words).rev() {
                rem[w] = (rem[w] << 1) | (rem[w - 1] >> 63);
            }
            rem[0] <<= 1;
            if top_bit < 63 {
                rem[top_word] &= (1u64 << (top_bit + 1)) - 1;
            }
            if fb {
                for (a, b) in rem.iter_mut().zip(&g_low) {
                    *a ^= b;
                }
            }
        }
        let mut cw = Bits::zeros(self.n_code);
        for d in 0..r {
            if (rem[d / 64] >> (d % 64)) & 1 == 1 {
                cw.set(d, true);
            }
        }
        for i in msg.iter_ones() {
            cw.set(r + i, true);
        }
        Ok(cw)
    }

    /// The message carried by a codeword (its top `k` coefficients).
    pub fn extract_message(&self, codeword: &Bits) -> Bits {
        codeword.slice(self.parity_len(), self.k_msg)
    }

    pub fn syndromes(&self, word: &Bits) -> Vec<u16> {
        let f = &self.field;
        let t2 = 2 * self.t_corr;
        let ones: Vec<usize> = word.iter_ones().collect();
        let mut s = vec![0u16; t2 + 1];
        for j in (1..=t2).step_by(2) {
            let mut acc = 0u16;
            for &i in &ones {
                acc ^= f.alpha_pow((i * j) as i64);
            }
            s[j] = acc;
        }
        for j in (2..=t2).step_by(2) {
            s[j] = f.mul(s[j / 2], s[j / 2]);
        }
        s
    }

    pub fn decode(&self, word: &Bits) -> Result<DecodeOutcome, BchError> {
        if word.len() != self.n_code {
            return Err(BchError::Length { expected: self.n_code, got: word.len() });
        }
        let s = self.syndromes(word);
        if s[1..].iter().all(|&v| v == 0) {
            return Ok(DecodeOutcome::Decoded { message: self.extract_message(word), corrected: 0 });
        }
        let locator = self.berlekamp_massey(&s[1..]);
        let degree = locator.len() - 1;
        // A locator whose leading coefficient vanished has the wrong degree.
        if degree == 0 || degree > self.t_corr || locator[degree] == 0 {
            return Ok(DecodeOutcome::Failure);
        }
        let positions = self.chien_search(&locator);
        if positions.len() != degree {
            return Ok(DecodeOutcome::Failure);
        }
        let mut fixed = word.clone();
        for &p in &positions {
            fixed.flip(p);
        }
        Ok(DecodeOutcome::Decoded { message: self.extract_message(&fixed), corrected: degree })
    }

    /// Connection polynomial Λ with Λ(0) = 1, truncated to the LFSR length L.
    fn berlekamp_massey(&self, s: &[u16]) -> Vec<u16> {
        let f = &self.field;
        let mut c = vec![0u16; s.len() + 1];
        let mut b = vec![0u16; s.len() + 1];
        c[0] = 1;
        b[0] = 1;
        let (mut l, mut shift, mut last_d) = (0usize, 1usize, 1u16);
        for n in 0..s.len() {
            let mut d = s[n];
            for i in 1..=l {
                d ^= f.mul(c[i], s[n - i]);
            }
            if d == 0 {
                shift += 1;
                continue;
            }
            let coef = f.div(d, last_d);
            let prev = c.clone();
            for i in 0..b.len() - shift {
                c[i + shift] ^= f.mul(coef, b[i]);
            }
            if 2 * l <= n {
                l = n + 1 - l;
                b = prev;
                last_d = d;
                shift = 1;
            } else {
                shift += 1;
            }
        }
        c.truncate(l + 1);
        c
    }

    /// Positions p with Λ(alpha^-p) = 0.
    fn chien_search(&self, locator: &[u16]) -> Vec<usize> {
        let f = &self.field;
        let n = self.n_code;
        let logs: Vec<Option<usize>> = locator.iter().map(|&c| f.log(c)).collect();
        let mut roots = Vec::new();
        for p in 0..n {
            let mut acc = 0u16;
            for (j, lg) in logs.iter().enumerate() {
                if let Some(lg) = lg {
                    acc ^= f.alpha_pow(*lg as i64 - (p * j) as i64);
                }
            }
            if acc == 0 {
                roots.push(p);
            }
        }
        roots
    }
}

pub fn bch_encode(spec: &BchSpec, msg: &Bits) -> Result<Bits, BchError> {
    spec.encode(msg)
}

pub fn bch_decode(spec: &BchSpec, word: &Bits) -> Result<DecodeOutcome, BchError> {
    spec.decode(word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use rand::seq::index::sample;
    use rand::Rng;

    /// Polynomial remainder over GF(2), schoolbook.
    fn gf2_rem(mut a: Vec<bool>, g: &[bool]) -> Vec<bool> {
        let dg = g.len() - 1;
        while let Some(top) = a.iter().rposition(|&b| b) {
            if top < dg {
                break;
            }
            for (i, &gb) in g.iter().enumerate() {
                a[top - dg + i] ^= gb;
            }
        }
        a
    }

    #[test]
    fn standard_code_shape() {
        let c = BchSpec::standard();
        assert_eq!((c.n_code, c.k_msg, c.t_corr), (511, 259, 30));
        assert_eq!(c.designed_distance(), 61);
        // g(x) divides x^511 - 1.
        let mut xn = vec![false; 512];
        xn[0] = true;
        xn[511] = true;
        let g: Vec<bool> = c.generator.iter().collect();
        assert!(gf2_rem(xn, &g).iter().all(|b| !b));
    }

    #[test]
    fn small_codes_match_tables() {
        for &(m, t, k) in &[(4, 1, 11), (4, 2, 7), (4, 3, 5), (5, 2, 21), (6, 3, 45), (8, 4, 223)] {
            assert_eq!(BchSpec::new(m, t).unwrap().k_msg, k, "m={m} t={t}");
        }
    }

    #[test]
    fn codewords_are_multiples_of_generator() {
        let c = BchSpec::standard();
        let mut rng = SeedTree::new(1).rng();
        let g: Vec<bool> = c.generator.iter().collect();
        for _ in 0..20 {
            let cw = c.encode(&Bits::random(c.k_msg, &mut rng)).unwrap();
            assert!(gf2_rem(cw.iter().collect(), &g).iter().all(|b| !b));
            assert!(c.syndromes(&cw)[1..].iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn zero_and_linearity() {
        let c = BchSpec::standard();
        assert_eq!(c.encode(&Bits::zeros(259)).unwrap(), Bits::zeros(511));
        let mut rng = SeedTree::new(2).rng();
        for _ in 0..50 {
            let a = Bits::random(259, &mut rng);
            let b = Bits::random(259, &mut rng);
            let lhs = c.encode(&(&a ^ &b)).unwrap();
            let rhs = &c.encode(&a).unwrap() ^ &c.encode(&b).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn identity_decode() {
        let c = BchSpec::standard();
        let mut rng = SeedTree::new(3).rng();
        let m = Bits::random(259, &mut rng);
        let cw = c.encode(&m).unwrap();
        assert_eq!(c.decode(&cw).unwrap(), DecodeOutcome::Decoded { message: m, corrected: 0 });
    }

    #[test]
    fn corrects_up_to_t_errors() {
        let c = BchSpec::standard();
        let mut rng = SeedTree::new(4).rng();
        for trial in 0..10_000 {
            let m = Bits::random(259, &mut rng);
            let mut w = c.encode(&m).unwrap();
            let flips = if trial % 2 == 0 { 30 } else { rng.random_range(1..=30) };
            for p in sample(&mut rng, 511, flips) {
                w.flip(p);
            }
            match c.decode(&w).unwrap() {
                DecodeOutcome::Decoded { message, corrected } => {
                    assert_eq!(message, m);
                    assert_eq!(corrected, flips);
                }
                DecodeOutcome::Failure => panic!("failed on {flips} flips"),
            }
        }
    }

    #[test]
    fn beyond_t_never_silently_returns_original() {
        let c = BchSpec::standard();
        let mut rng = SeedTree::new(5).rng();
        let mut failures = 0;
        for _ in 0..2000 {
            let m = Bits::random(259, &mut rng);
            let mut w = c.encode(&m).unwrap();
            for p in sample(&mut rng, 511, 31) {
                w.flip(p);
            }
            match c.decode(&w).unwrap() {
                DecodeOutcome::Decoded { message, .. } => assert_ne!(message, m),
                DecodeOutcome::Failure => failures += 1,
            }
        }
        assert_eq!(failures, 2000);
    }

    #[test]
    fn random_words_almost_never_decode() {
        let c = BchSpec::standard();
        let mut rng = SeedTree::new(6).rng();
        let decoded = (0..10_000)
            .filter(|_| c.decode(&Bits::random(511, &mut rng)).unwrap() != DecodeOutcome::Failure)
            .count();
        assert_eq!(decoded, 0);
    }

    #[test]
    fn minimum_distance_on_random_pairs() {
        let c = BchSpec::standard();
        let mut rng = SeedTree::new(7).rng();
        for _ in 0..10_000 {
            let a = Bits::random(259, &mut rng);
            let mut b = Bits::random(259, &mut rng);
            if a == b {
                b.flip(0);
            }
            let d = c.encode(&a).unwrap().hamming_distance(&c.encode(&b).unwrap());
            assert!(d >= 61, "distance {d}");
        }
    }

    #[test]
    fn small_code_exhaustive_single_errors() {
        let c = BchSpec::new(4, 2).unwrap();
        for v in 0..(1u32 << c.k_msg) {
            let m = Bits::from_bools((0..c.k_msg).map(|i| (v >> i) & 1 == 1));
            let cw = c.encode(&m).unwrap();
            for p in 0..c.n_code {
                for q in p..c.n_code {
                    let mut w = cw.clone();
                    w.flip(p);
                    if q != p {
                        w.flip(q);
                    }
                    assert_eq!(c.decode(&w).unwrap().message(), Some(m.clone()));
                }
            }
        }
    }

    #[test]
    fn length_errors() {
        let c = BchSpec::standard();
        assert_eq!(c.encode(&Bits::zeros(10)), Err(BchError::Length { expected: 259, got: 10 }));
        assert!(c.decode(&Bits::zeros(510)).is_err());
    }
}
