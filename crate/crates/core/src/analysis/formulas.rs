//! The closed forms, evaluated exactly.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::exact::{binomial, binomial_row, ceil_to_i64, floor_to_i64, log2_biguint, pow2, suffix_sums, ExactProb};
use super::params::{AnalysisError, AnalysisParams};

/// sqrt(ln(1/delta) / N_pulses).
pub fn epsilon_min(n_pulses: u64, delta: f64) -> Result<f64, AnalysisError> {
    if n_pulses == 0 {
        return Err(AnalysisError::NonPositive("N_pulses"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(AnalysisError::BadDelta(delta));
    }
    Ok(((1.0 / delta).ln() / n_pulses as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClickRatioEstimate {
    /// p_ge1 - eta - p_dark, unclamped.
    pub value: f64,
    pub negative: bool,
}

impl ClickRatioEstimate {
    /// The value floored at zero, for callers that need a ratio.
    pub fn clamped(&self) -> f64 {
        self.value.max(0.0)
    }
}

/// Additive click-ratio estimate. A negative result is returned as is and
/// flagged.
pub fn expected_click_ratio(p_ge1: f64, eta: f64, p_dark: f64) -> ClickRatioEstimate {
    let value = p_ge1 - eta - p_dark;
    ClickRatioEstimate { value, negative: value < 0.0 }
}

/// Integer form of p_e = a / b: returns (a, b - a, b).
fn split_p_e(p: &AnalysisParams) -> (BigUint, BigUint, BigUint) {
    let a = p.p_e.numer().magnitude().clone();
    let b = p.p_e.denom().magnitude().clone();
    let q = &b - &a;
    (a, q, b)
}

fn powers(base: &BigUint, max: u64) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(max as usize + 1);
    let mut acc = BigUint::one();
    for _ in 0..=max {
        out.push(acc.clone());
        acc *= base;
    }
    out
}

fn prob(num: BigUint, den: BigUint) -> ExactProb {
    ExactProb::from_ratio(num, den)
}

/// Probability that the test check fails on an honest run:
/// sum_{i=0}^{floor(beta alpha n)} C(an, i) p_e^(an-i) (1-p_e)^i.
pub fn p_fpass(params: &AnalysisParams) -> ExactProb {
    let p = params.checked();
    let an = p.test_size();
    let hi = floor_to_i64(&p.pass_threshold());
    if hi < 0 {
        return ExactProb::zero();
    }
    let hi = (hi as u64).min(an);
    let (a, q, b) = split_p_e(p);
    let pa = powers(&a, an);
    let pq = powers(&q, an);
    let row = binomial_row(an);
    let mut num = BigUint::zero();
    for i in 0..=hi as usize {
        num += &row[i] * &pa[an as usize - i] * &pq[i];
    }
    prob(num, b.pow(an as u32))
}

/// Probability that Bob's decoded key disagrees with Alice's on the chosen
/// side, over the random basis pattern of the R = n - alpha n rounds.
pub fn p_fcorrect(params: &AnalysisParams) -> ExactProb {
    let p = params.checked();
    let r = p.remaining();
    let nn = p.n_code;
    let t = p.t_corr;
    let (a, q, b) = split_p_e(p);
    let pa = powers(&a, nn);
    let pq = powers(&q, nn);
    let pb = powers(&b, nn);
    let row_r = binomial_row(r);
    let tail_r = suffix_sums(&row_r);

    // Common denominator b^N 2^N 2^R.
    let den = &pb[nn as usize] * pow2(nn) * pow2(r);

    // i > N matched rounds: plain Bin(N, 1 - p_e) needs >= N - t correct.
    let row_n = binomial_row(nn);
    let mut good = BigUint::zero();
    for j in (nn - t)..=nn {
        good += &row_n[j as usize] * &pa[(nn - j) as usize] * &pq[j as usize];
    }
    let mut success = &tail_r[(nn + 1).min(r + 1) as usize] * good * pow2(nn);

    // i <= N matched rounds, N - i padded rounds each right with prob 1/2.
    for i in 0..=nn.min(r) {
        let pad = nn - i;
        let row_pad = binomial_row(pad);
        let tail_pad = suffix_sums(&row_pad);
        let row_i = binomial_row(i);
        let mut inner = BigUint::zero();
        let j_lo = (nn - t).saturating_sub(pad);
        for j in j_lo..=i {
            let k_lo = (nn - t).saturating_sub(j);
            if k_lo > pad {
                continue;
            }
            inner += &row_i[j as usize] * &pa[(i - j) as usize] * &pq[j as usize] * &tail_pad[k_lo as usize];
        }
        success += &row_r[i as usize] * inner * &pb[(nn - i) as usize] * pow2(i);
    }
    assert!(success <= den, "success mass exceeds one");
    prob(&den - success, den)
}

/// Probability that a decoding-stage failure occurs on the good side
/// alone: P[Bin(N, p_e) > t]. A diagnostic, not part of the bound.
pub fn p_decode_failure(params: &AnalysisParams) -> ExactProb {
    let p = params.checked();
    let nn = p.n_code;
    let (a, q, b) = split_p_e(p);
    let pa = powers(&a, nn);
    let pq = powers(&q, nn);
    let row = binomial_row(nn);
    let mut num = BigUint::zero();
    for e in (p.t_corr + 1)..=nn {
        num += &row[e as usize] * &pa[e as usize] * &pq[(nn - e) as usize];
    }
    prob(num, b.pow(nn as u32))
}

/// Pr[check passed | i delayed rounds in the test set], scaled by 2^an.
fn bypass_pass_weights(p: &AnalysisParams) -> Vec<BigUint> {
    let an = p.test_size();
    let thr = p.pass_threshold();
    let slack = BigRational::from_integer(BigInt::from(an)) - &thr;
    let mut weights = Vec::with_capacity(an as usize + 1);
    let mut row = vec![BigUint::one()];
    for i in 0..=an {
        if i > 0 {
            let mut next = vec![BigUint::one(); i as usize + 1];
            for k in 1..i as usize {
                next[k] = &row[k - 1] + &row[k];
            }
            row = next;
        }
        let remaining_correct = BigRational::from_integer(BigInt::from(an - i));
        if remaining_correct >= thr {
            weights.push(pow2(an));
            continue;
        }
        let lo = ceil_to_i64(&(BigRational::from_integer(BigInt::from(i)) - &slack)).max(0) as usize;
        let mut s = BigUint::zero();
        for c in row.iter().skip(lo) {
            s += c;
        }
        weights.push(s << (an - i));
    }
    weights
}

/// The numerators of p_bypass over the common denominator C(n, an) 2^an.
struct BypassTable {
    den: BigUint,
    nums: Vec<BigUint>,
}

fn bypass_table(p: &AnalysisParams, s1_max: u64) -> BypassTable {
    let n = p.n;
    let an = p.test_size();
    let w = bypass_pass_weights(p);
    let s1_max = s1_max.min(n);
    let mut nums = Vec::with_capacity(s1_max as usize + 1);
    // C(s1, i) row, advanced by Pascal's rule.
    let mut row_s1: Vec<BigUint> = vec![BigUint::one()];
    // C(n - s1, an), stepped down in s1.
    let mut top = binomial(n, an);
    for s1 in 0..=s1_max {
        if s1 > 0 {
            let mut next = vec![BigUint::one(); s1 as usize + 1];
            for k in 1..s1 as usize {
                next[k] = &row_s1[k - 1] + &row_s1[k];
            }
            row_s1 = next;
            let u = n - s1 + 1;
            // C(u - 1, an) = C(u, an) (u - an) / u
            top = if u > an { top * (u - an) / u } else { BigUint::zero() };
        }
        let u = n - s1;
        let mut num = BigUint::zero();
        let mut v = top.clone();
        for i in 0..=s1.min(an) {
            let k = an - i;
            if k > u {
                continue;
            }
            if i > 0 {
                // C(u, k) = C(u, k + 1) (k + 1) / (u - k)
                v = if v.is_zero() { binomial(u, k) } else { v * (k + 1) / (u - k) };
            }
            if v.is_zero() {
                continue;
            }
            num += &row_s1[i as usize] * &v * &w[i as usize];
        }
        nums.push(num);
    }
    BypassTable {
        den: binomial(n, an) << an,
        nums,
    }
}

/// Probability that a Bob who delays measurement on s1 rounds survives the
/// test check by guessing.
pub fn p_bypass(params: &AnalysisParams, s1: u64) -> ExactProb {
    let p = params.checked();
    assert!(s1 <= p.n, "s1 exceeds n");
    let t = bypass_table(p, s1);
    prob(t.nums[s1 as usize].clone(), t.den)
}

/// p_bypass for every s1 in 0..=s1_max.
pub fn p_bypass_all(params: &AnalysisParams, s1_max: u64) -> Vec<ExactProb> {
    let p = params.checked();
    let t = bypass_table(p, s1_max);
    t.nums.into_iter().map(|num| prob(num, t.den.clone())).collect()
}

/// Probability that enough of the remaining basis choices match by chance for
/// Bob to hold both sides: (1/2^R) sum_{i >= 2(N-t) - s1 - s2} C(R, i).
pub fn p_cheat(params: &AnalysisParams, s1: u64, s2: u64) -> ExactProb {
    let p = params.checked();
    let deficit = p.cheat_target() as i64 - s1 as i64 - s2 as i64;
    if deficit <= 0 {
        return ExactProb::one();
    }
    let r = p.remaining();
    let tail = suffix_sums(&binomial_row(r));
    let idx = (deficit as u64).min(r + 1) as usize;
    prob(tail[idx].clone(), pow2(r))
}

/// Which s1 values the cost minimisation ranges over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S1Range {
    /// 0 <= s1 <= alpha n.
    #[default]
    AlphaN,
    /// 0 <= s1 <= alpha, read literally (so s1 = 0 for alpha < 1).
    Literal,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheatingCost {
    #[serde(serialize_with = "ser_cost")]
    pub cost: BigRational,
    pub log2: f64,
    pub s1: u64,
    pub s2: u64,
    pub cells: u64,
}

fn ser_cost<S: serde::Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&super::exact::scientific(v, 12))
}

impl CheatingCost {
    pub fn to_f64(&self) -> f64 {
        self.cost.to_f64().unwrap_or(f64::INFINITY)
    }
}

/// min over the grid of 2^s2 / (p_bypass(s1) p_cheat(s1, s2)).
///
/// Doubles drawn from the exact terms rank the cells; every cell within a
/// hair of the best is then compared as an exact rational.
pub fn cheating_cost(params: &AnalysisParams, range: S1Range) -> CheatingCost {
    let p = params.checked();
    let an = p.test_size();
    let s1_max = match range {
        S1Range::AlphaN => an,
        S1Range::Literal => floor_to_i64(&p.alpha).max(0) as u64,
    };
    let target = p.cheat_target();
    let r = p.remaining();
    let bypass = bypass_table(p, s1_max);
    let tail = suffix_sums(&binomial_row(r));
    let log_den_b = log2_biguint(&bypass.den);
    let log_tail: Vec<f64> = tail
        .iter()
        .map(|v| if v.is_zero() { f64::NEG_INFINITY } else { log2_biguint(v) })
        .collect();

    let cheat_num = |d: i64| -> (usize, bool) {
        if d <= 0 {
            (0, true)
        } else {
            ((d as u64).min(r + 1) as usize, false)
        }
    };

    let mut cells = Vec::new();
    let mut best = f64::INFINITY;
    let mut count = 0u64;
    for s1 in 0..=s1_max {
        let nb = &bypass.nums[s1 as usize];
        if nb.is_zero() {
            continue;
        }
        let lb = log2_biguint(nb) - log_den_b;
        let s2_max = target.saturating_sub(s1);
        for s2 in 0..=s2_max {
            count += 1;
            let d = target as i64 - s1 as i64 - s2 as i64;
            let (idx, one) = cheat_num(d);
            let lc = if one { 0.0 } else { log_tail[idx] - r as f64 };
            if lc == f64::NEG_INFINITY {
                continue;
            }
            let lcost = s2 as f64 - lb - lc;
            if lcost < best {
                best = lcost;
            }
            cells.push((lcost, s1, s2));
        }
    }
    let margin = 1e-9 * best.abs().max(1.0);
    let mut winner: Option<(BigRational, u64, u64)> = None;
    for &(lcost, s1, s2) in cells.iter().filter(|c| c.0 <= best + margin) {
        let _ = lcost;
        let d = target as i64 - s1 as i64 - s2 as i64;
        let (idx, one) = cheat_num(d);
        // cost = 2^s2 den_b 2^R / (num_b num_c); num_c = 2^R when p_cheat = 1.
        let num_c = if one { pow2(r) } else { tail[idx].clone() };
        let numer = pow2(s2) * &bypass.den * pow2(r);
        let denom = &bypass.nums[s1 as usize] * num_c;
        let cost = BigRational::new(BigInt::from(numer), BigInt::from(denom));
        let better = match &winner {
            None => true,
            Some((c, _, _)) => cost < *c,
        };
        if better {
            winner = Some((cost, s1, s2));
        }
    }
    let (cost, s1, s2) = winner.expect("grid has at least one finite cell");
    let log2 = super::exact::log2_rational(&cost);
    debug_assert!(!cost.is_negative());
    CheatingCost { cost, log2, s1, s2, cells: count }
}

#[cfg(test)]
mod tests {
    use super::super::params::ratio;
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        ratio(n, d)
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_min(10, 1.0).unwrap(), 0.0);
        let e = epsilon_min(1_000_000, 1e-9).unwrap();
        assert!((e - 4.552e-3).abs() < 1e-6, "{e}");
        let e4 = epsilon_min(4_000_000, 1e-9).unwrap();
        assert!((e / e4 - 2.0).abs() < 1e-12);
        assert!(epsilon_min(10, 0.0).is_err());
        assert!(epsilon_min(0, 0.5).is_err());
    }

    #[test]
    fn click_ratio_examples() {
        let r = expected_click_ratio(0.39, 0.0, 0.0);
        assert_eq!(r.value, 0.39);
        let r = expected_click_ratio(0.39, 0.1, 1e-5);
        assert!((r.value - 0.28999).abs() < 1e-12);
        assert!(!r.negative);
        let r = expected_click_ratio(0.05, 0.1, 0.0);
        assert!(r.negative && r.value < 0.0 && r.clamped() == 0.0);
    }

    #[test]
    fn fpass_examples() {
        let p = AnalysisParams::reference();
        assert!(p_fpass(&p).is_zero());
        let toy = AnalysisParams::toy(4, q(1, 2), q(1, 2), 1, 0).with_p_e(q(1, 2));
        assert_eq!(p_fpass(&toy).value(), &q(3, 4));
        let r = p_fpass(&AnalysisParams::reference().with_p_e_f64(0.01));
        assert!(r.log2() < -15.0 * 10f64.log2());
    }

    #[test]
    fn fcorrect_reference_floor() {
        let p = p_fcorrect(&AnalysisParams::reference());
        assert!((p.to_f64() / 2.2593e-4 - 1.0).abs() < 1e-4, "{p}");
        let p = p_fcorrect(&AnalysisParams::reference().with_p_e_f64(0.01));
        assert!((p.to_f64() / 1.7616e-3 - 1.0).abs() < 1e-3, "{p}");
    }

    #[test]
    fn bypass_examples() {
        let p = AnalysisParams::reference();
        assert_eq!(p_bypass(&p, 0), ExactProb::one());
        let toy = AnalysisParams::toy(8, q(1, 2), q(9, 10), 3, 1);
        let all = p_bypass_all(&toy, 8);
        for s1 in 0..=8u64 {
            assert_eq!(all[s1 as usize], p_bypass(&toy, s1));
        }
        for w in all.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn cheat_examples() {
        let toy = AnalysisParams::toy(8, q(1, 2), q(1, 1), 3, 1);
        // target 4, R = 4; s1 + s2 = 2 leaves index 2.
        assert_eq!(p_cheat(&toy, 1, 1).value(), &q(11, 16));
        assert_eq!(p_cheat(&toy, 4, 0), ExactProb::one());
        let r = p_cheat(&AnalysisParams::reference(), 0, 0);
        assert!(r.log2() < -600.0 && !r.is_zero());
    }

    #[test]
    fn reference_cost() {
        let c = cheating_cost(&AnalysisParams::reference(), S1Range::AlphaN);
        assert_eq!((c.s1, c.s2), (413, 0));
        assert!((c.to_f64() / 2.7783e12 - 1.0).abs() < 1e-4, "{}", c.to_f64());
        assert!(c.cost >= BigRational::one());
    }
}
