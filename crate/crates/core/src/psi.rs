//! Private set intersection from the batched OPRF and Cuckoo hashing.
//!
//! The receiver hashes Y into ceil(1.2 n) bins plus a stash of s slots and
//! runs one OPRF instance per slot. The sender evaluates every x in X under
//! the keys of its three candidate bins and every stash key, and sends the
//! values as shuffled sets. A receiver item is in the intersection when its
//! own PRF value appears in the set that matches its placement.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::hashing::{expand, tags};
use crate::oprf::{
    ceil_log2, default_output_bits, receiver_output_eval, run_oprf, sender_eval, BaseOt, OprfError,
    OprfSenderKey, DEFAULT_K_WIDTH,
};
use crate::rng::SeedTree;

pub const HASHES: usize = 3;

#[derive(Debug, Error)]
pub enum PsiError {
    #[error("duplicate item {0:?}")]
    Duplicate(String),
    #[error("{got} items exceed the bound n = {n}")]
    TooMany { n: usize, got: usize },
    #[error("stash overflow after {attempts} hash seeds")]
    StashOverflow { attempts: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Oprf(#[from] OprfError),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsiConfig {
    /// Receiver set size bound; `None` takes |Y|.
    pub n: Option<usize>,
    pub stash: usize,
    /// PRF output bits; `None` derives them from the batch size.
    pub v: Option<usize>,
    pub eviction_limit: usize,
    pub k_width: usize,
    /// Hash seeds tried before giving up on a stash overflow.
    pub max_rehash: usize,
}

impl Default for PsiConfig {
    fn default() -> Self {
        PsiConfig { n: None, stash: 6, v: None, eviction_limit: 500, k_width: DEFAULT_K_WIDTH, max_rehash: 16 }
    }
}

impl PsiConfig {
    pub fn bins(n: usize) -> usize {
        (12 * n).div_ceil(10).max(1)
    }

    pub fn oprf_count(&self, n: usize) -> usize {
        Self::bins(n) + self.stash
    }

    pub fn output_bits(&self, n: usize) -> usize {
        self.v.unwrap_or_else(|| default_output_bits(self.oprf_count(n)))
    }

    pub fn validate(&self, n: usize) -> Result<(), PsiError> {
        let v = self.output_bits(n);
        let min = 40 + 2 * ceil_log2(n);
        if v < min {
            return Err(PsiError::Config(format!("v = {v} below 40 + 2 log2(n) = {min}")));
        }
        if self.eviction_limit == 0 || self.max_rehash == 0 {
            return Err(PsiError::Config("eviction_limit and max_rehash must be positive".into()));
        }
        Ok(())
    }
}

/// Bin index of `y` under hash function `i` in 1..=3.
pub fn cuckoo_hash(seed: &[u8], i: usize, y: &[u8], bins: usize) -> usize {
    let h = expand(tags::CUCKOO, &[seed, &[i as u8], y], 8);
    (u64::from_be_bytes(h.try_into().expect("8 bytes")) % bins as u64) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Which hash put the item in its bin, 1..=3.
    Bin { hash: u8, bin: usize },
    Stash { slot: usize },
}

#[derive(Clone, Debug)]
pub struct CuckooTable {
    pub seed: Vec<u8>,
    pub items: Vec<Vec<u8>>,
    /// Item index and placing hash per bin.
    pub bins: Vec<Option<(usize, u8)>>,
    pub stash: Vec<usize>,
    pub stash_bound: usize,
    pub placement: Vec<Placement>,
}

impl CuckooTable {
    /// Every binned item sits where its recorded hash says.
    pub fn is_consistent(&self) -> bool {
        let nb = self.bins.len();
        self.placement.iter().enumerate().all(|(idx, p)| match *p {
            Placement::Bin { hash, bin } => {
                self.bins[bin] == Some((idx, hash)) && cuckoo_hash(&self.seed, hash as usize, &self.items[idx], nb) == bin
            }
            Placement::Stash { slot } => self.stash.get(slot) == Some(&idx),
        }) && self.stash.len() <= self.stash_bound
    }
}

/// One build attempt with the given hash seed.
pub fn cuckoo_build_with_seed<R: Rng + ?Sized>(
    items: &[Vec<u8>],
    n: usize,
    config: &PsiConfig,
    seed: Vec<u8>,
    rng: &mut R,
) -> Result<CuckooTable, PsiError> {
    if items.len() > n {
        return Err(PsiError::TooMany { n, got: items.len() });
    }
    let mut seen = HashSet::with_capacity(items.len());
    for y in items {
        if !seen.insert(y.as_slice()) {
            return Err(PsiError::Duplicate(String::from_utf8_lossy(y).into_owned()));
        }
    }
    let nb = PsiConfig::bins(n);
    let cands: Vec<[usize; HASHES]> =
        items.iter().map(|y| std::array::from_fn(|i| cuckoo_hash(&seed, i + 1, y, nb))).collect();
    let mut bins: Vec<Option<(usize, u8)>> = vec![None; nb];
    let mut stash = Vec::new();
    for start in 0..items.len() {
        let mut cur = start;
        let mut last_hash: Option<usize> = None;
        let mut placed = false;
        for _ in 0..=config.eviction_limit {
            if let Some(h) = (0..HASHES).find(|&h| bins[cands[cur][h]].is_none()) {
                bins[cands[cur][h]] = Some((cur, h as u8 + 1));
                placed = true;
                break;
            }
            // evict from a random choice other than the bin just vacated
            let h = loop {
                let h = rng.random_range(0..HASHES);
                if Some(h) != last_hash || HASHES == 1 {
                    break h;
                }
            };
            let bin = cands[cur][h];
            let (evicted, _) = bins[bin].replace((cur, h as u8 + 1)).expect("occupied");
            last_hash = cands[evicted].iter().position(|&b| b == bin);
            cur = evicted;
        }
        if !placed {
            if stash.len() == config.stash {
                return Err(PsiError::StashOverflow { attempts: 1 });
            }
            stash.push(cur);
        }
    }
    let mut placement = vec![Placement::Stash { slot: 0 }; items.len()];
    for (bin, slot) in bins.iter().enumerate() {
        if let Some((idx, hash)) = *slot {
            placement[idx] = Placement::Bin { hash, bin };
        }
    }
    for (slot, &idx) in stash.iter().enumerate() {
        placement[idx] = Placement::Stash { slot };
    }
    Ok(CuckooTable { seed, items: items.to_vec(), bins, stash, stash_bound: config.stash, placement })
}

/// Build with fresh hash seeds until the stash fits.
pub fn cuckoo_build<R: Rng + ?Sized>(
    items: &[Vec<u8>],
    n: usize,
    config: &PsiConfig,
    rng: &mut R,
) -> Result<CuckooTable, PsiError> {
    for _ in 0..config.max_rehash {
        let mut seed = vec![0u8; 32];
        rng.fill(&mut seed[..]);
        match cuckoo_build_with_seed(items, n, config, seed, rng) {
            Err(PsiError::StashOverflow { .. }) => continue,
            other => return other,
        }
    }
    Err(PsiError::StashOverflow { attempts: config.max_rehash })
}

/// Domain-separated OPRF inputs.
pub mod encode {
    pub fn dummy(slot: usize) -> Vec<u8> {
        let mut v = vec![0u8];
        v.extend_from_slice(&(slot as u64).to_be_bytes());
        v
    }

    pub fn binned(y: &[u8], hash: u8) -> Vec<u8> {
        let mut v = vec![1u8, hash];
        v.extend_from_slice(y);
        v
    }

    pub fn stashed(y: &[u8]) -> Vec<u8> {
        let mut v = vec![2u8];
        v.extend_from_slice(y);
        v
    }
}

/// One input per bin followed by one per stash slot.
pub fn receiver_oprf_inputs(table: &CuckooTable) -> Vec<Vec<u8>> {
    let nb = table.bins.len();
    let mut out: Vec<Vec<u8>> = table
        .bins
        .iter()
        .enumerate()
        .map(|(i, b)| match *b {
            Some((idx, hash)) => encode::binned(&table.items[idx], hash),
            None => encode::dummy(i),
        })
        .collect();
    for slot in 0..table.stash_bound {
        out.push(match table.stash.get(slot) {
            Some(&idx) => encode::stashed(&table.items[idx]),
            None => encode::dummy(nb + slot),
        });
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QuerySets {
    pub h: [Vec<Bits>; HASHES],
    pub s: Vec<Vec<Bits>>,
}

impl QuerySets {
    pub fn value_count(&self) -> usize {
        self.h.iter().map(Vec::len).sum::<usize>() + self.s.iter().map(Vec::len).sum::<usize>()
    }
}

pub fn sender_build_query_sets<R: Rng + ?Sized>(
    key: &OprfSenderKey,
    hash_seed: &[u8],
    bins: usize,
    stash: usize,
    x: &[Vec<u8>],
    rng: &mut R,
) -> Result<QuerySets, PsiError> {
    let mut q = QuerySets { h: Default::default(), s: vec![Vec::with_capacity(x.len()); stash] };
    for item in x {
        for i in 1..=HASHES {
            let bin = cuckoo_hash(hash_seed, i, item, bins);
            q.h[i - 1].push(sender_eval(key, bin, &encode::binned(item, i as u8))?);
        }
        let stashed = encode::stashed(item);
        for (j, set) in q.s.iter_mut().enumerate() {
            set.push(sender_eval(key, bins + j, &stashed)?);
        }
    }
    for set in q.h.iter_mut().chain(q.s.iter_mut()) {
        set.shuffle(rng);
    }
    Ok(q)
}

/// Items of the table whose own PRF value shows up in the matching set,
/// in table order.
pub fn receiver_match(
    table: &CuckooTable,
    outputs: &[crate::oprf::OprfReceiverOutput],
    q: &QuerySets,
) -> Vec<Vec<u8>> {
    let nb = table.bins.len();
    let h: Vec<HashSet<&Bits>> = q.h.iter().map(|s| s.iter().collect()).collect();
    let s: Vec<HashSet<&Bits>> = q.s.iter().map(|s| s.iter().collect()).collect();
    let mut out = Vec::new();
    for (idx, p) in table.placement.iter().enumerate() {
        let hit = match *p {
            Placement::Bin { hash, bin } => h[hash as usize - 1].contains(&receiver_output_eval(&outputs[bin])),
            Placement::Stash { slot } => s[slot].contains(&receiver_output_eval(&outputs[nb + slot])),
        };
        if hit {
            out.push(table.items[idx].clone());
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiMetrics {
    pub bytes_sent_receiver: u64,
    pub bytes_sent_sender: u64,
    pub wall_ms: f64,
    /// Receiver set bound.
    pub n: usize,
    /// OPRF instances.
    pub m: usize,
    pub s: usize,
    pub v: usize,
    pub sender_items: usize,
    pub receiver_items: usize,
    pub intersection: usize,
    pub base_ot: String,
}

/// Wire bytes by sender, kept for leak checks.
#[derive(Clone, Debug, Default)]
pub struct PsiTranscript {
    pub receiver_sent: Vec<u8>,
    pub sender_sent: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct PsiOutcome {
    pub intersection: Vec<Vec<u8>>,
    pub metrics: PsiMetrics,
    pub transcript: PsiTranscript,
}

/// Sender holds `x`, receiver holds `y`; both end with the intersection.
pub fn run_psi(
    x: &[Vec<u8>],
    y: &[Vec<u8>],
    config: &PsiConfig,
    ot: &mut dyn BaseOt,
    seed: u64,
) -> Result<PsiOutcome, PsiError> {
    let t0 = Instant::now();
    let n = config.n.unwrap_or(y.len()).max(1);
    config.validate(n)?;
    let tree = SeedTree::new(seed);
    let mut receiver_rng = tree.child("psi/receiver").rng();
    let mut sender_rng = tree.child("psi/sender").rng();
    let mut tr = PsiTranscript::default();

    let table = cuckoo_build(y, n, config, &mut receiver_rng)?;
    tr.receiver_sent.extend_from_slice(&table.seed);
    let inputs = receiver_oprf_inputs(&table);
    let v = config.output_bits(n);
    let batch = run_oprf(&inputs, config.k_width, Some(v), ot, &mut receiver_rng, &mut sender_rng)?;
    tr.sender_sent.extend_from_slice(&batch.header.code_seed);
    let (ot_sender_log, ot_chooser_log) = ot.sent();
    tr.receiver_sent.extend_from_slice(ot_sender_log);
    tr.sender_sent.extend_from_slice(ot_chooser_log);

    let q = sender_build_query_sets(&batch.key, &table.seed, table.bins.len(), config.stash, x, &mut sender_rng)?;
    for set in q.h.iter().chain(&q.s) {
        for val in set {
            tr.sender_sent.extend_from_slice(&val.to_bytes());
        }
    }
    let intersection = receiver_match(&table, &batch.outputs, &q);
    for item in &intersection {
        tr.receiver_sent.extend_from_slice(&(item.len() as u32).to_be_bytes());
        tr.receiver_sent.extend_from_slice(item);
    }
    let ot_bytes = ot.bytes();
    let metrics = PsiMetrics {
        bytes_sent_receiver: (table.seed.len() + intersection.iter().map(|i| 4 + i.len()).sum::<usize>()) as u64
            + ot_bytes.ot_sender,
        bytes_sent_sender: (batch.header.code_seed.len() + q.value_count() * v.div_ceil(8)) as u64 + ot_bytes.ot_chooser,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        n,
        m: inputs.len(),
        s: config.stash,
        v,
        sender_items: x.len(),
        receiver_items: y.len(),
        intersection: intersection.len(),
        base_ot: ot.name().into(),
    };
    Ok(PsiOutcome { intersection, metrics, transcript: tr })
}

/// Newline-delimited items: lines trimmed, empty lines skipped, repeats
/// dropped after the first.
pub fn parse_items(text: &str) -> Vec<Vec<u8>> {
    let mut seen = HashSet::new();
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && seen.insert(*l))
        .map(|l| l.as_bytes().to_vec())
        .collect()
}

pub fn read_items(path: &Path) -> Result<Vec<Vec<u8>>, PsiError> {
    let text = std::fs::read_to_string(path).map_err(|source| PsiError::Io { path: path.display().to_string(), source })?;
    Ok(parse_items(&text))
}

pub fn format_items(items: &[Vec<u8>]) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&String::from_utf8_lossy(item));
        s.push('\n');
    }
    s
}
