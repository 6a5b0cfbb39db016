//! Batched oblivious PRF from a pseudorandom code and k base OTs.
//!
//! The receiver holds inputs r_0..r_{m-1} and two m x k matrices with
//! t1_j = t0_j xor C(r_j). The sender picks s and obtains, column by column,
//! the matrix Q with q_j = t0_j xor (C(r_j) and s). Both sides then hash with
//! the same correlation-robust H: the receiver gets H(j, t0_j), the sender can
//! evaluate H(j, q_j xor (C(x) and s)) on any candidate x.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bits::Bits;
use crate::hashing::{expand, tags};
use crate::optics::OpticalConfig;
use crate::qot::{run_session, ProtocolParams, SessionStatus, Transcript};
use crate::rng::SeedTree;

pub const DEFAULT_K_WIDTH: usize = 512;
const KAPPA: usize = 128;

#[derive(Debug, Error)]
pub enum OprfError {
    #[error("code width {0} below 2 * {KAPPA}")]
    NarrowCode(usize),
    #[error("base OT {index} failed: {detail}")]
    BaseOt { index: usize, detail: String },
    #[error("base OT shape mismatch: {0}")]
    Shape(String),
    #[error("row index {j} out of range for m = {m}")]
    Index { j: usize, m: usize },
}

/// PRF output length for a batch of `m` rows.
pub fn default_output_bits(m: usize) -> usize {
    64 + 2 * ceil_log2(m)
}

pub(crate) fn ceil_log2(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrcSpec {
    #[serde(with = "hex::serde")]
    pub code_seed: Vec<u8>,
    pub k_width: usize,
}

impl PrcSpec {
    pub fn new(code_seed: Vec<u8>, k_width: usize) -> Result<Self, OprfError> {
        if k_width < 2 * KAPPA {
            return Err(OprfError::NarrowCode(k_width));
        }
        Ok(PrcSpec { code_seed, k_width })
    }

    pub fn random<R: Rng + ?Sized>(k_width: usize, rng: &mut R) -> Result<Self, OprfError> {
        let mut seed = vec![0u8; 32];
        rng.fill(&mut seed[..]);
        Self::new(seed, k_width)
    }
}

pub fn prc_encode(spec: &PrcSpec, input: &[u8]) -> Bits {
    let bytes = expand(tags::PRC, &[&spec.code_seed, input], spec.k_width.div_ceil(8));
    let mut b = Bits::from_bytes(&bytes, bytes.len() * 8).expect("whole bytes");
    if b.len() != spec.k_width {
        b = b.slice(0, spec.k_width);
    }
    b
}

/// H(j, x) truncated to `v` bits.
pub fn correlation_robust_hash(j: usize, x: &Bits, v: usize) -> Bits {
    let bytes = expand(tags::CORRELATION_ROBUST, &[&(j as u64).to_be_bytes(), &x.to_bytes()], v.div_ceil(8));
    Bits::from_bytes(&bytes, bytes.len() * 8).expect("whole bytes").slice(0, v)
}

/// Row-major m x k matrix stored as k columns of m bits and m rows of k bits.
fn transpose(cols: &[Bits], m: usize) -> Vec<Bits> {
    let k = cols.len();
    let mut rows = vec![Bits::zeros(k); m];
    for (i, col) in cols.iter().enumerate() {
        for j in col.iter_ones() {
            rows[j].set(i, true);
        }
    }
    rows
}

#[derive(Clone, Debug)]
pub struct OprfMatrices {
    /// Columns of T0 and T1, k of each, m bits long.
    pub t0_cols: Vec<Bits>,
    pub t1_cols: Vec<Bits>,
    pub t0_rows: Vec<Bits>,
}

impl OprfMatrices {
    pub fn generate<R: Rng + ?Sized>(code: &PrcSpec, inputs: &[Vec<u8>], rng: &mut R) -> Self {
        let m = inputs.len();
        let k = code.k_width;
        let t0_rows: Vec<Bits> = (0..m).map(|_| Bits::random(k, rng)).collect();
        let t1_rows: Vec<Bits> = t0_rows.iter().zip(inputs).map(|(t0, r)| t0 ^ &prc_encode(code, r)).collect();
        OprfMatrices { t0_cols: transpose(&t0_rows, k), t1_cols: transpose(&t1_rows, k), t0_rows }
    }

    pub fn m(&self) -> usize {
        self.t0_rows.len()
    }

    pub fn t1_row(&self, j: usize) -> Bits {
        Bits::from_bools(self.t1_cols.iter().map(|c| c.get(j)))
    }
}

#[derive(Clone, Debug)]
pub struct OprfSenderKey {
    pub code: PrcSpec,
    pub s: Bits,
    pub rows: Vec<Bits>,
    pub v: usize,
}

#[derive(Clone, Debug)]
pub struct OprfReceiverOutput {
    pub code: PrcSpec,
    pub j: usize,
    pub t0: Bits,
    pub v: usize,
}

pub fn sender_eval(key: &OprfSenderKey, j: usize, candidate: &[u8]) -> Result<Bits, OprfError> {
    let q = key.rows.get(j).ok_or(OprfError::Index { j, m: key.rows.len() })?;
    let masked = q ^ &prc_encode(&key.code, candidate).and(&key.s);
    Ok(correlation_robust_hash(j, &masked, key.v))
}

pub fn receiver_output_eval(out: &OprfReceiverOutput) -> Bits {
    correlation_robust_hash(out.j, &out.t0, out.v)
}

/// Bytes each side put on the wire.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ByteCount {
    pub ot_sender: u64,
    pub ot_chooser: u64,
}

/// k parallel 1-out-of-2 OTs of equal-length strings.
pub trait BaseOt {
    fn name(&self) -> &'static str;
    /// `pairs[i][choices[i]]` for every i, as the chooser sees it.
    fn transfer(&mut self, pairs: &[[Bits; 2]], choices: &Bits) -> Result<Vec<Bits>, OprfError>;
    fn bytes(&self) -> ByteCount;
    /// Raw bytes sent by each side, for leak scans.
    fn sent(&self) -> (&[u8], &[u8]);
}

fn check_shape(pairs: &[[Bits; 2]], choices: &Bits) -> Result<(), OprfError> {
    if pairs.len() != choices.len() {
        return Err(OprfError::Shape(format!("{} pairs, {} choices", pairs.len(), choices.len())));
    }
    if let Some(i) = pairs.iter().position(|[a, b]| a.len() != b.len()) {
        return Err(OprfError::Shape(format!("pair {i} has unequal lengths")));
    }
    Ok(())
}

/// Trusted third party: both strings go in, one comes out.
#[derive(Debug, Default)]
pub struct IdealOt {
    bytes: ByteCount,
    sender_log: Vec<u8>,
    chooser_log: Vec<u8>,
}

impl IdealOt {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BaseOt for IdealOt {
    fn name(&self) -> &'static str {
        "ideal"
    }

    fn transfer(&mut self, pairs: &[[Bits; 2]], choices: &Bits) -> Result<Vec<Bits>, OprfError> {
        check_shape(pairs, choices)?;
        // the functionality absorbs both inputs; nothing crosses between parties
        for [a, b] in pairs {
            self.bytes.ot_sender += (a.to_bytes().len() + b.to_bytes().len()) as u64;
        }
        self.bytes.ot_chooser += choices.to_bytes().len() as u64;
        Ok(pairs.iter().enumerate().map(|(i, p)| p[choices.get(i) as usize].clone()).collect())
    }

    fn bytes(&self) -> ByteCount {
        self.bytes
    }

    fn sent(&self) -> (&[u8], &[u8]) {
        (&self.sender_log, &self.chooser_log)
    }
}

/// Base OTs realized by simulated QOT sessions. Each string is cut into
/// lambda-bit chunks and every chunk gets its own session.
pub struct QotBaseOt {
    pub params: ProtocolParams,
    pub optical: OpticalConfig,
    pub tree: SeedTree,
    pub transcripts: Vec<Transcript>,
    sessions: u64,
    bytes: ByteCount,
    sender_log: Vec<u8>,
    chooser_log: Vec<u8>,
}

impl QotBaseOt {
    pub fn new(params: ProtocolParams, optical: OpticalConfig, seed: u64) -> Self {
        QotBaseOt {
            params,
            optical,
            tree: SeedTree::new(seed).child("base-ot"),
            transcripts: Vec::new(),
            sessions: 0,
            bytes: ByteCount::default(),
            sender_log: Vec::new(),
            chooser_log: Vec::new(),
        }
    }

    pub fn sessions(&self) -> u64 {
        self.sessions
    }

    fn session_seed(&mut self) -> u64 {
        let mut r = self.tree.indexed("session", self.sessions).rng();
        self.sessions += 1;
        r.random()
    }
}

impl BaseOt for QotBaseOt {
    fn name(&self) -> &'static str {
        "qot"
    }

    fn transfer(&mut self, pairs: &[[Bits; 2]], choices: &Bits) -> Result<Vec<Bits>, OprfError> {
        check_shape(pairs, choices)?;
        let lambda = self.params.lambda;
        let mut out = Vec::with_capacity(pairs.len());
        for (i, [a, b]) in pairs.iter().enumerate() {
            let c = choices.get(i);
            let mut got = Bits::zeros(0);
            for start in (0..a.len()).step_by(lambda) {
                let chunk = |x: &Bits| {
                    let len = lambda.min(x.len() - start);
                    let mut piece = x.slice(start, len);
                    while piece.len() < lambda {
                        piece.push(false);
                    }
                    piece
                };
                let seed = self.session_seed();
                let r = run_session(&self.params, &self.optical, &chunk(a), &chunk(b), c, seed)
                    .map_err(|e| OprfError::BaseOt { index: i, detail: e.to_string() })?;
                if r.status != SessionStatus::Success {
                    return Err(OprfError::BaseOt { index: i, detail: format!("{:?}", r.status) });
                }
                for e in r.transcript.entries() {
                    let payload = hex::decode(&e.payload).expect("hex from transcript");
                    if e.from == "alice" {
                        self.bytes.ot_sender += e.len as u64;
                        self.sender_log.extend_from_slice(&payload);
                    } else {
                        self.bytes.ot_chooser += e.len as u64;
                        self.chooser_log.extend_from_slice(&payload);
                    }
                }
                let m = r.recovered.expect("success carries the message");
                for bit in m.iter().take(lambda.min(a.len() - start)) {
                    got.push(bit);
                }
                self.transcripts.push(r.transcript);
            }
            out.push(got);
        }
        Ok(out)
    }

    fn bytes(&self) -> ByteCount {
        self.bytes
    }

    fn sent(&self) -> (&[u8], &[u8]) {
        (&self.sender_log, &self.chooser_log)
    }
}

/// Header for an OPRF batch.
#[derive(Clone, Debug, Serialize)]
pub struct BatchHeader {
    pub m: usize,
    pub k: usize,
    pub v: usize,
    #[serde(with = "hex::serde")]
    pub code_seed: Vec<u8>,
    pub base_ot: String,
}

pub struct OprfBatch {
    pub header: BatchHeader,
    pub key: OprfSenderKey,
    pub outputs: Vec<OprfReceiverOutput>,
    pub matrices: OprfMatrices,
    pub bytes: ByteCount,
}

/// One full batch: the receiver builds the matrices, the sender draws s and
/// receives the Q columns through k base OTs.
pub fn run_base_ots(
    matrices: &OprfMatrices,
    s: &Bits,
    ot: &mut dyn BaseOt,
) -> Result<Vec<Bits>, OprfError> {
    let pairs: Vec<[Bits; 2]> =
        matrices.t0_cols.iter().zip(&matrices.t1_cols).map(|(a, b)| [a.clone(), b.clone()]).collect();
    ot.transfer(&pairs, s)
}

pub fn run_oprf<R: Rng + ?Sized>(
    inputs: &[Vec<u8>],
    k_width: usize,
    v: Option<usize>,
    ot: &mut dyn BaseOt,
    receiver_rng: &mut R,
    sender_rng: &mut R,
) -> Result<OprfBatch, OprfError> {
    let m = inputs.len();
    let v = v.unwrap_or_else(|| default_output_bits(m));
    let code = PrcSpec::random(k_width, sender_rng)?;
    let matrices = OprfMatrices::generate(&code, inputs, receiver_rng);
    let s = Bits::random(k_width, sender_rng);
    let q_cols = run_base_ots(&matrices, &s, ot)?;
    let rows = transpose(&q_cols, m);
    let outputs = matrices
        .t0_rows
        .iter()
        .enumerate()
        .map(|(j, t0)| OprfReceiverOutput { code: code.clone(), j, t0: t0.clone(), v })
        .collect();
    Ok(OprfBatch {
        header: BatchHeader { m, k: k_width, v, code_seed: code.code_seed.clone(), base_ot: ot.name().into() },
        key: OprfSenderKey { code, s, rows, v },
        outputs,
        matrices,
        bytes: ot.bytes(),
    })
}
