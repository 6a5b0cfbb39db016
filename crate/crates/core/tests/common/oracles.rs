//! Brute-force enumerations of the honest-failure and cheating events.
//! These walk every outcome directly and share no code with the library's
//! closed forms.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

#[derive(Clone, Debug)]
pub struct Toy {
    pub n: u64,
    pub test: u64,
    pub beta: BigRational,
    pub n_code: u64,
    pub t: u64,
}

impl Toy {
    pub fn remaining(&self) -> u64 {
        self.n - self.test
    }
}

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn pow(b: &BigRational, e: u64) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= b;
    }
    acc
}

/// Honest test failure: enumerate every error pattern over the test bits.
pub fn fpass(toy: &Toy, p_e: &BigRational) -> BigRational {
    let m = toy.test;
    let thr = &toy.beta * int(m);
    let ok = BigRational::one() - p_e;
    let mut total = BigRational::zero();
    for mask in 0u64..(1 << m) {
        let errors = mask.count_ones() as u64;
        let correct = m - errors;
        if int(correct) <= thr {
            total += pow(p_e, errors) * pow(&ok, correct);
        }
    }
    total
}

/// Outcome counts for the remaining rounds, keyed by
/// (matched-correct, matched-wrong) with unmatched rounds summed out.
/// The value is the number of (basis, outcome) patterns that decode.
pub fn fcorrect_counts(toy: &Toy) -> HashMap<(u64, u64), u64> {
    let r = toy.remaining();
    let nn = toy.n_code;
    let mut counts: HashMap<(u64, u64), u64> = HashMap::new();
    for basis in 0u64..(1 << r) {
        for outcome in 0u64..(1 << r) {
            let matched: Vec<u64> = (0..r).filter(|i| basis >> i & 1 == 1).collect();
            let unmatched: Vec<u64> = (0..r).filter(|i| basis >> i & 1 == 0).collect();
            // Chosen side: lowest N matched rounds, else all matched plus the
            // lowest unmatched rounds as padding.
            let mut side: Vec<u64> = matched.iter().copied().take(nn as usize).collect();
            let short = nn as usize - side.len();
            side.extend(unmatched.iter().copied().take(short));
            assert_eq!(side.len(), nn as usize);
            let correct = side.iter().filter(|&&i| outcome >> i & 1 == 1).count() as u64;
            if correct + toy.t < nn {
                continue;
            }
            let mc = matched.iter().filter(|&&i| outcome >> i & 1 == 1).count() as u64;
            let mw = matched.len() as u64 - mc;
            *counts.entry((mc, mw)).or_default() += 1;
        }
    }
    counts
}

/// Honest decode failure from the counts: each pattern has weight
/// 2^-R * (1-p)^mc p^mw * 2^-(R - mc - mw) for the unmatched outcomes.
pub fn fcorrect_from_counts(toy: &Toy, counts: &HashMap<(u64, u64), u64>, p_e: &BigRational) -> BigRational {
    let r = toy.remaining();
    let ok = BigRational::one() - p_e;
    let mut success = BigRational::zero();
    for (&(mc, mw), &c) in counts {
        let un = r - mc - mw;
        success += int(c) * pow(&ok, mc) * pow(p_e, mw) / pow(&int(2), r + un);
    }
    BigRational::one() - success
}

pub fn fcorrect(toy: &Toy, p_e: &BigRational) -> BigRational {
    fcorrect_from_counts(toy, &fcorrect_counts(toy), p_e)
}

fn subsets(n: u64, k: u64) -> Vec<u64> {
    (0u64..(1 << n)).filter(|m| m.count_ones() as u64 == k).collect()
}

/// Delayed-measurement bypass: the first s1 rounds are delayed, every test
/// set and every guess outcome on delayed test rounds is enumerated.
pub fn bypass(toy: &Toy, s1: u64) -> BigRational {
    let delayed: u64 = if s1 == 0 { 0 } else { (1u64 << s1) - 1 };
    let thr = &toy.beta * int(toy.test);
    let sets = subsets(toy.n, toy.test);
    let mut hits = BigRational::zero();
    for &t in &sets {
        let d = (t & delayed).count_ones() as u64;
        let honest = toy.test - d;
        let mut pass = 0u64;
        for guesses in 0u64..(1 << d) {
            if int(honest + guesses.count_ones() as u64) >= thr {
                pass += 1;
            }
        }
        hits += q(pass as i64, 1i64 << d);
    }
    hits / int(sets.len() as u64)
}

/// Probability that at least 2(N - t) - s1 - s2 of the remaining bases match.
pub fn cheat(toy: &Toy, s1: u64, s2: u64) -> BigRational {
    let r = toy.remaining();
    let need = 2 * (toy.n_code - toy.t) as i64 - s1 as i64 - s2 as i64;
    let mut hits = 0u64;
    for basis in 0u64..(1 << r) {
        if basis.count_ones() as i64 >= need {
            hits += 1;
        }
    }
    q(hits as i64, 1i64 << r)
}

/// Full-grid minimisation of 2^s2 / (bypass * cheat).
pub fn cost(toy: &Toy) -> (BigRational, u64, u64) {
    let target = 2 * (toy.n_code - toy.t);
    let mut best: Option<(BigRational, u64, u64)> = None;
    for s1 in 0..=toy.test {
        let b = bypass(toy, s1);
        if b.is_zero() {
            continue;
        }
        for s2 in 0..=target.saturating_sub(s1) {
            let c = cheat(toy, s1, s2);
            if c.is_zero() {
                continue;
            }
            let v = pow(&int(2), s2) / (&b * c);
            if best.as_ref().is_none_or(|(bv, _, _)| v < *bv) {
                best = Some((v, s1, s2));
            }
        }
    }
    best.unwrap()
}

/// Every small parameter set: n <= 12, alpha in {1/2, 1/3, 1/4}, several
/// beta, every valid (N, t).
pub fn small_sets() -> Vec<(Toy, BigRational)> {
    let mut out = Vec::new();
    let betas = [q(1, 2), q(3, 4), q(9, 10), q(1, 1)];
    for (an, ad) in [(1u64, 2u64), (1, 3), (1, 4)] {
        for n in 2..=12u64 {
            if n * an % ad != 0 {
                continue;
            }
            let test = n * an / ad;
            let r = n - test;
            for beta in &betas {
                for n_code in 1..=r {
                    for t in 0..n_code {
                        out.push((
                            Toy { n, test, beta: beta.clone(), n_code, t },
                            q(an as i64, ad as i64),
                        ));
                    }
                }
            }
        }
    }
    out
}

pub fn error_rates() -> Vec<BigRational> {
    vec![q(0, 1), q(1, 10), q(1, 4), q(1, 2)]
}
