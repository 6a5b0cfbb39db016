//! The protocol steps as plain functions over explicit inputs.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::index;
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::analysis::{epsilon_min, rational_from_f64};
use crate::bits::Bits;
use crate::optics::{ClickStats, IntensityClass, OpticalConfig};
use crate::primitives::{amplify, commit, verify_open, AmplifierSeed, BchSpec, Commitment, DecodeOutcome, Opening, NONCE_LEN};

use super::wire::{AbortReason, Masked};
use super::{PartitionPolicy, ProtocolParams};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AbortInfo {
    pub reason: AbortReason,
    pub detail: String,
}

impl AbortInfo {
    pub fn new(reason: AbortReason, detail: impl Into<String>) -> Self {
        AbortInfo { reason, detail: detail.into() }
    }
}

/// Tolerance used for one class: the fixed value if configured, otherwise
/// the minimum allowed by the class pulse count.
pub fn class_epsilon(params: &ProtocolParams, rounds: u64) -> f64 {
    match params.epsilon {
        Some(e) => e,
        None => epsilon_min(rounds.max(1), params.delta).expect("delta validated"),
    }
}

/// Pass iff every populated class ratio lies within epsilon of its expected
/// value.
pub fn alice_check_click_stats(stats: &ClickStats, params: &ProtocolParams, optical: &OpticalConfig) -> Result<(), AbortInfo> {
    for class in IntensityClass::ALL {
        let c = stats.get(class);
        let Some(ratio) = c.ratio() else { continue };
        let expected = optical.expected_click_ratio(class);
        let eps = class_epsilon(params, c.rounds);
        if (ratio - expected).abs() > eps {
            return Err(AbortInfo::new(
                AbortReason::ClickStatistics,
                format!("{class:?} click ratio {ratio:.6} outside {expected:.6} +/- {eps:.6} over {} pulses", c.rounds),
            ));
        }
    }
    Ok(())
}

/// Commit to every retained round with a fresh nonce.
pub fn bob_commit_all<R: RngCore + ?Sized>(x_tilde: &Bits, theta_tilde: &Bits, rng: &mut R) -> (Vec<Commitment>, Vec<Opening>) {
    assert_eq!(x_tilde.len(), theta_tilde.len());
    let mut cs = Vec::with_capacity(x_tilde.len());
    let mut os = Vec::with_capacity(x_tilde.len());
    for i in 0..x_tilde.len() {
        let mut nonce = vec![0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        let o = Opening { x_tilde: x_tilde.get(i), theta_tilde: theta_tilde.get(i), nonce };
        cs.push(commit(o.x_tilde, o.theta_tilde, &o.nonce).expect("nonce has full length"));
        os.push(o);
    }
    (cs, os)
}

/// Uniform alpha*n subset of [n], sorted.
pub fn alice_select_test<R: Rng + ?Sized>(params: &ProtocolParams, rng: &mut R) -> Vec<u32> {
    let mut t: Vec<u32> = index::sample(rng, params.n, params.test_size()).into_iter().map(|i| i as u32).collect();
    t.sort_unstable();
    t
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TestOutcome {
    /// Test rounds whose committed basis equals Alice's.
    pub matched: usize,
    /// Matched test rounds whose committed bit equals Alice's.
    pub agree: usize,
    pub passed: bool,
}

/// count >= beta * total, compared exactly.
pub fn passes_ratio(count: usize, total: usize, beta: f64) -> bool {
    let b = rational_from_f64(beta);
    BigRational::from_integer(BigInt::from(count)) >= b * BigRational::from_integer(BigInt::from(total))
}

/// Ratio check over basis-matched test rounds only.
pub fn check_text(test: &[u32], openings: &[Opening], x: &Bits, theta: &Bits, beta: f64) -> TestOutcome {
    let mut out = TestOutcome::default();
    for (&i, o) in test.iter().zip(openings) {
        let i = i as usize;
        if o.theta_tilde == theta.get(i) {
            out.matched += 1;
            out.agree += (o.x_tilde == x.get(i)) as usize;
        }
    }
    out.passed = out.matched > 0 && passes_ratio(out.agree, out.matched, beta);
    out
}

/// Ratio check over all test rounds, where `consistent[j]` says whether the
/// j-th test round's committed bit matches an ideal measurement of the qubit
/// in the committed basis. Only a simulation can supply that reference.
pub fn check_formula(consistent: &[bool], beta: f64) -> bool {
    let ok = consistent.iter().filter(|&&c| c).count();
    passes_ratio(ok, consistent.len(), beta)
}

/// Verify every opening against its commitment, then apply `check_text`.
pub fn alice_verify_test(
    test: &[u32],
    commitments: &[Commitment],
    openings: &[Opening],
    x: &Bits,
    theta: &Bits,
    params: &ProtocolParams,
) -> Result<TestOutcome, AbortInfo> {
    if openings.len() != test.len() {
        return Err(AbortInfo::new(
            AbortReason::CommitmentMismatch,
            format!("{} openings for {} test rounds", openings.len(), test.len()),
        ));
    }
    for (&i, o) in test.iter().zip(openings) {
        if !verify_open(&commitments[i as usize], o) {
            return Err(AbortInfo::new(AbortReason::CommitmentMismatch, format!("opening for round {i} does not verify")));
        }
    }
    let out = check_text(test, openings, x, theta, params.beta);
    if !out.passed {
        return Err(AbortInfo::new(
            AbortReason::TestRatio,
            format!("{} of {} basis-matched test rounds agree", out.agree, out.matched),
        ));
    }
    Ok(out)
}

/// Split the untested rounds into matched (good) and mismatched (bad) index
/// sets of exactly `n_code` each and order them by `c`.
pub fn bob_partition(
    theta: &Bits,
    theta_tilde: &Bits,
    test: &[u32],
    c: bool,
    params: &ProtocolParams,
) -> Result<(Vec<u32>, Vec<u32>), AbortInfo> {
    let n = theta_tilde.len();
    let nn = params.n_code;
    let mut in_test = vec![false; n];
    for &i in test {
        in_test[i as usize] = true;
    }
    let (mut good, mut bad) = (Vec::new(), Vec::new());
    for i in (0..n).filter(|&i| !in_test[i]) {
        if theta.get(i) == theta_tilde.get(i) {
            good.push(i as u32);
        } else {
            bad.push(i as u32);
        }
    }
    if good.len() < nn || bad.len() < nn {
        if params.partition == PartitionPolicy::Strict || good.len() + bad.len() < 2 * nn {
            return Err(AbortInfo::new(
                AbortReason::InsufficientIndices,
                format!("{} matched and {} mismatched untested rounds, need {nn} each", good.len(), bad.len()),
            ));
        }
        let (long, short) = if good.len() >= nn { (&mut good, &mut bad) } else { (&mut bad, &mut good) };
        let need = nn - short.len();
        short.extend_from_slice(&long[nn..nn + need]);
        short.sort_unstable();
    }
    good.truncate(nn);
    bad.truncate(nn);
    Ok(if c { (bad, good) } else { (good, bad) })
}

/// Check the received index sets: sizes, ordering, range, disjointness.
pub fn alice_check_index_sets(i0: &[u32], i1: &[u32], test: &[u32], n: usize, n_code: usize) -> Result<(), AbortInfo> {
    let bad = |d: String| Err(AbortInfo::new(AbortReason::ProtocolViolation, d));
    let mut seen = vec![false; n];
    for &i in test {
        seen[i as usize] = true;
    }
    for (name, set) in [("I0", i0), ("I1", i1)] {
        if set.len() != n_code {
            return bad(format!("{name} has {} indices, expected {n_code}", set.len()));
        }
        if set.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("{name} is not strictly increasing"));
        }
        for &i in set {
            let i = i as usize;
            if i >= n || seen[i] {
                return bad(format!("{name} index {i} is out of range, tested or repeated"));
            }
            seen[i] = true;
        }
    }
    Ok(())
}

/// y_b = Encode(r_b) xor x_{I_b}, z_b = m_b xor f_b(r_b) with fresh keys r_b.
pub fn alice_mask<R: Rng + ?Sized>(
    bch: &BchSpec,
    x: &Bits,
    index_sets: [&[u32]; 2],
    messages: [&Bits; 2],
    seeds: [AmplifierSeed; 2],
    rng: &mut R,
) -> (Masked, [Bits; 2]) {
    let mut ys = Vec::with_capacity(2);
    let mut zs = Vec::with_capacity(2);
    let mut keys = Vec::with_capacity(2);
    for b in 0..2 {
        let key = Bits::random(bch.k_msg, rng);
        let idx: Vec<usize> = index_sets[b].iter().map(|&i| i as usize).collect();
        let mut y = bch.encode(&key).expect("key has k_msg bits");
        y ^= &x.select(&idx);
        let mut z = amplify(&seeds[b], &key).expect("seed sized for key");
        z ^= messages[b];
        ys.push(y);
        zs.push(z);
        keys.push(key);
    }
    let [y0, y1]: [Bits; 2] = ys.try_into().unwrap();
    let [z0, z1]: [Bits; 2] = zs.try_into().unwrap();
    let [k0, k1]: [Bits; 2] = keys.try_into().unwrap();
    (Masked { seeds, y: [y0, y1], z: [z0, z1] }, [k0, k1])
}

/// m_c = z_c xor f_c(Decode(y_c xor x~_{I_c})); `None` when decoding fails.
pub fn bob_recover(bch: &BchSpec, payload: &Masked, x_tilde_ic: &Bits, c: bool) -> Option<Bits> {
    let b = c as usize;
    if payload.y[b].len() != bch.n_code || x_tilde_ic.len() != bch.n_code {
        return None;
    }
    let seed = &payload.seeds[b];
    if seed.key_len() != bch.k_msg || seed.out_len() != payload.z[b].len() {
        return None;
    }
    let word = &payload.y[b] ^ x_tilde_ic;
    match bch.decode(&word).ok()? {
        DecodeOutcome::Decoded { message, .. } => {
            let mut m = amplify(seed, &message).ok()?;
            m ^= &payload.z[b];
            Some(m)
        }
        DecodeOutcome::Failure => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::ClassCount;
    use crate::rng::SeedTree;
    use std::collections::HashMap;

    fn stats_with(ratio: [f64; 3], rounds: u64) -> ClickStats {
        let mut s = ClickStats::default();
        for (k, r) in ratio.iter().enumerate() {
            s.classes[k] = ClassCount { rounds, clicks: (r * rounds as f64).round() as u64 };
        }
        s
    }

    #[test]
    fn click_check_window() {
        let optical = OpticalConfig { expected_click_ratio: Some([0.05, 0.01, 0.0]), ..Default::default() };
        let params = ProtocolParams { epsilon: Some(0.004), ..Default::default() };
        assert!(alice_check_click_stats(&stats_with([0.05, 0.01, 0.0], 100_000), &params, &optical).is_ok());
        let e = alice_check_click_stats(&stats_with([0.058, 0.01, 0.0], 100_000), &params, &optical).unwrap_err();
        assert_eq!(e.reason, AbortReason::ClickStatistics);
    }

    #[test]
    fn commitments_roundtrip_and_order_matters() {
        let mut rng = SeedTree::new(1).rng();
        let x = Bits::random(2044, &mut rng);
        let t = Bits::random(2044, &mut rng);
        let (cs, os) = bob_commit_all(&x, &t, &mut rng);
        assert!(cs.iter().zip(&os).all(|(c, o)| verify_open(c, o)));
        let (c1, o1) = bob_commit_all(&x.slice(0, 1), &t.slice(0, 1), &mut rng);
        assert!(verify_open(&c1[0], &o1[0]));
        let mut swapped = cs.clone();
        swapped.swap(0, 1);
        assert!(!verify_open(&swapped[0], &os[0]));
    }

    #[test]
    fn test_subsets_uniform() {
        let params = ProtocolParams { n: 4, total_pulses: 4, ..Default::default() };
        let mut rng = SeedTree::new(2).rng();
        let mut counts: HashMap<Vec<u32>, u32> = HashMap::new();
        let draws = 60_000;
        for _ in 0..draws {
            let t = alice_select_test(&params, &mut rng);
            assert_eq!(t.len(), 2);
            *counts.entry(t).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let e = draws as f64 / 6.0;
        let chi: f64 = counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 5 degrees of freedom, 0.999 quantile.
        assert!(chi < 20.52, "chi^2 = {chi}");
    }

    #[test]
    fn verify_test_rules() {
        let mut rng = SeedTree::new(3).rng();
        let params = ProtocolParams { n: 40, beta: 0.9, ..Default::default() };
        let x = Bits::random(40, &mut rng);
        let th = Bits::random(40, &mut rng);
        let (cs, mut os) = bob_commit_all(&x, &th, &mut rng);
        let test: Vec<u32> = (0..20).collect();
        let opened: Vec<Opening> = test.iter().map(|&i| os[i as usize].clone()).collect();
        let out = alice_verify_test(&test, &cs, &opened, &x, &th, &params).unwrap();
        assert_eq!(out.matched, 20);
        assert_eq!(out.agree, 20);

        os[3].x_tilde ^= true;
        let forged: Vec<Opening> = test.iter().map(|&i| os[i as usize].clone()).collect();
        let e = alice_verify_test(&test, &cs, &forged, &x, &th, &params).unwrap_err();
        assert_eq!(e.reason, AbortReason::CommitmentMismatch);

        // three honest disagreements among 20 matched: 17/20 < 0.9
        let mut xt = x.clone();
        for i in 0..3 {
            xt.flip(i);
        }
        let (cs, os) = bob_commit_all(&xt, &th, &mut rng);
        let opened: Vec<Opening> = test.iter().map(|&i| os[i as usize].clone()).collect();
        let e = alice_verify_test(&test, &cs, &opened, &x, &th, &params).unwrap_err();
        assert_eq!(e.reason, AbortReason::TestRatio);
    }

    #[test]
    fn text_and_formula_checks_differ() {
        let x = Bits::from_bools([false; 4]);
        let th = Bits::from_bools([false, false, true, true]);
        let os: Vec<Opening> = [(false, false), (false, false), (true, false), (true, false)]
            .iter()
            .map(|&(xv, tv)| Opening { x_tilde: xv, theta_tilde: tv, nonce: vec![0; 16] })
            .collect();
        let t = [0u32, 1, 2, 3];
        // only the two matched rounds count for the text rule
        let o = check_text(&t, &os, &x, &th, 0.9);
        assert_eq!((o.matched, o.agree, o.passed), (2, 2, true));
        assert!(!check_formula(&[true, true, false, false], 0.9));
        assert!(check_formula(&[true, true, true, false], 0.75));
    }

    fn partition_fixture(matched: usize, n: usize) -> (Bits, Bits) {
        let theta = Bits::zeros(n);
        let tt = Bits::from_bools((0..n).map(|i| i >= matched));
        (theta, tt)
    }

    #[test]
    fn partition_orders_by_choice() {
        let params = ProtocolParams { n: 8, n_code: 3, t_corr: 1, ..Default::default() };
        let (theta, tt) = partition_fixture(4, 8);
        let (i0, i1) = bob_partition(&theta, &tt, &[], false, &params).unwrap();
        assert_eq!((i0.as_slice(), i1.as_slice()), (&[0, 1, 2][..], &[4, 5, 6][..]));
        let (i0, i1) = bob_partition(&theta, &tt, &[], true, &params).unwrap();
        assert_eq!((i0.as_slice(), i1.as_slice()), (&[4, 5, 6][..], &[0, 1, 2][..]));
    }

    #[test]
    fn partition_pads_or_aborts() {
        let params = ProtocolParams { n: 8, n_code: 3, t_corr: 1, ..Default::default() };
        let (theta, tt) = partition_fixture(2, 8);
        let (good, bad) = bob_partition(&theta, &tt, &[], false, &params).unwrap();
        assert_eq!(good, vec![0, 1, 5]);
        assert_eq!(bad, vec![2, 3, 4]);
        let strict = ProtocolParams { partition: PartitionPolicy::Strict, ..params };
        let e = bob_partition(&theta, &tt, &[], false, &strict).unwrap_err();
        assert_eq!(e.reason, AbortReason::InsufficientIndices);
        alice_check_index_sets(&good, &bad, &[6, 7], 8, 3).unwrap();
        assert!(alice_check_index_sets(&good, &bad, &[1], 8, 3).is_err());
        assert!(alice_check_index_sets(&[0, 1], &bad, &[], 8, 3).is_err());
        assert!(alice_check_index_sets(&[1, 0, 5], &bad, &[], 8, 3).is_err());
    }

    #[test]
    fn mask_identities_and_recovery() {
        let bch = BchSpec::standard();
        let mut rng = SeedTree::new(4).rng();
        let n = 1200;
        let x = Bits::zeros(n);
        let i0: Vec<u32> = (0..511).collect();
        let i1: Vec<u32> = (600..1111).collect();
        let m0 = Bits::zeros(256);
        let m1 = Bits::random(256, &mut rng);
        let seeds = [
            AmplifierSeed::random(256, bch.k_msg, &mut rng),
            AmplifierSeed::random(256, bch.k_msg, &mut rng),
        ];
        let (masked, keys) = alice_mask(&bch, &x, [&i0, &i1], [&m0, &m1], seeds.clone(), &mut rng);
        assert_eq!(masked.y[0], bch.encode(&keys[0]).unwrap());
        assert_eq!(masked.z[0], amplify(&seeds[0], &keys[0]).unwrap());

        let mut xt = x.select(&i1.iter().map(|&i| i as usize).collect::<Vec<_>>());
        assert_eq!(bob_recover(&bch, &masked, &xt, true), Some(m1.clone()));
        for i in 0..30 {
            xt.flip(i * 17);
        }
        assert_eq!(bob_recover(&bch, &masked, &xt, true), Some(m1));
    }
}
