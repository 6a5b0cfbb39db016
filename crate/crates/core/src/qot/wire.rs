//! Message framing: 4-byte big-endian payload length, 1-byte tag, payload.

use std::fmt;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::bits::Bits;
use crate::primitives::{Commitment, Opening, AmplifierSeed, DIGEST_LEN, NONCE_LEN};

/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME: usize = 64 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("unknown tag {0:#04x}")]
    UnknownTag(u8),
    #[error("frame of {0} bytes exceeds the limit")]
    Oversized(usize),
    #[error("truncated frame: {0}")]
    Truncated(String),
    #[error("malformed {tag} payload: {detail}")]
    Malformed { tag: Tag, detail: String },
    #[error("expected {expected}, got {got}")]
    Unexpected { expected: &'static str, got: Tag },
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Tag {
    NoClickReport = 1,
    DecoyReveal = 2,
    CommitmentBatch = 3,
    TestChallenge = 4,
    TestOpenings = 5,
    TestVerdict = 6,
    BasisReveal = 7,
    IndexSets = 8,
    MaskedPayload = 9,
    Abort = 0x7f,
}

impl Tag {
    pub fn from_byte(b: u8) -> Result<Self, WireError> {
        use Tag::*;
        Ok(match b {
            1 => NoClickReport,
            2 => DecoyReveal,
            3 => CommitmentBatch,
            4 => TestChallenge,
            5 => TestOpenings,
            6 => TestVerdict,
            7 => BasisReveal,
            8 => IndexSets,
            9 => MaskedPayload,
            0x7f => Abort,
            other => return Err(WireError::UnknownTag(other)),
        })
    }

    pub fn name(self) -> &'static str {
        use Tag::*;
        match self {
            NoClickReport => "NoClickReport",
            DecoyReveal => "DecoyReveal",
            CommitmentBatch => "CommitmentBatch",
            TestChallenge => "TestChallenge",
            TestOpenings => "TestOpenings",
            TestVerdict => "TestVerdict",
            BasisReveal => "BasisReveal",
            IndexSets => "IndexSets",
            MaskedPayload => "MaskedPayload",
            Abort => "Abort",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        (1..=9u8).chain([0x7f]).map(|b| Tag::from_byte(b).unwrap()).find(|t| t.name() == s)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireMessage {
    pub tag: Tag,
    pub payload: Vec<u8>,
}

impl WireMessage {
    pub fn frame(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.tag as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parse exactly one frame occupying all of `bytes`.
    pub fn parse_frame(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = bytes;
        let m = read_frame(&mut r)?;
        if !r.is_empty() {
            return Err(WireError::Truncated(format!("{} trailing bytes", r.len())));
        }
        Ok(m)
    }
}

pub fn write_frame<W: Write>(w: &mut W, msg: &WireMessage) -> Result<(), WireError> {
    w.write_all(&msg.frame())?;
    w.flush()?;
    Ok(())
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), WireError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => WireError::Truncated(format!("stream ended inside {what}")),
        _ => WireError::Io(e),
    })
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<WireMessage, WireError> {
    let mut head = [0u8; 5];
    read_exact_or_truncated(r, &mut head, "frame header")?;
    let len = u32::from_be_bytes(head[..4].try_into().unwrap()) as usize;
    if len > MAX_FRAME {
        return Err(WireError::Oversized(len));
    }
    let tag = Tag::from_byte(head[4])?;
    let mut payload = vec![0u8; len];
    read_exact_or_truncated(r, &mut payload, "frame payload")?;
    Ok(WireMessage { tag, payload })
}

/// Why a session stopped early.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    ClickStatistics = 1,
    InsufficientClicks = 2,
    CommitmentMismatch = 3,
    TestRatio = 4,
    InsufficientIndices = 5,
    ProtocolViolation = 6,
    Transport = 7,
}

impl AbortReason {
    pub fn from_byte(b: u8) -> Option<Self> {
        use AbortReason::*;
        [ClickStatistics, InsufficientClicks, CommitmentMismatch, TestRatio, InsufficientIndices, ProtocolViolation, Transport]
            .into_iter()
            .find(|r| *r as u8 == b)
    }
}

/// Typed payloads. Each maps to one `Tag`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    /// Bob -> Alice: one bit per emitted pulse, set when the detector clicked.
    NoClickReport { clicks: Bits },
    /// Alice -> Bob: pulse indices of the retained signal rounds.
    DecoyReveal { rounds: Vec<u32> },
    CommitmentBatch { digests: Vec<Commitment> },
    TestChallenge { indices: Vec<u32> },
    TestOpenings { openings: Vec<Opening> },
    TestVerdict { passed: bool },
    BasisReveal { theta: Bits },
    IndexSets { i0: Vec<u32>, i1: Vec<u32> },
    MaskedPayload(Masked),
    Abort { reason: AbortReason, detail: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Masked {
    pub seeds: [AmplifierSeed; 2],
    pub y: [Bits; 2],
    pub z: [Bits; 2],
}

struct Cursor<'a> {
    tag: Tag,
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn err(&self, d: impl Into<String>) -> WireError {
        WireError::Malformed { tag: self.tag, detail: d.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(self.err(format!("needs {n} more bytes, {} left", self.buf.len())));
        }
        let (h, t) = self.buf.split_at(n);
        self.buf = t;
        Ok(h)
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u32_list(&mut self) -> Result<Vec<u32>, WireError> {
        let n = self.u32()? as usize;
        if n > self.buf.len() / 4 {
            return Err(self.err("list length exceeds payload"));
        }
        (0..n).map(|_| self.u32()).collect()
    }

    fn bits(&mut self) -> Result<Bits, WireError> {
        let len = self.u32()? as usize;
        let raw = self.take(len.div_ceil(8))?;
        Bits::from_bytes(raw, len).ok_or_else(|| self.err("nonzero padding bits"))
    }

    fn done(&self) -> Result<(), WireError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(self.err(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_list(out: &mut Vec<u8>, xs: &[u32]) {
    put_u32(out, xs.len() as u32);
    for &x in xs {
        put_u32(out, x);
    }
}

fn put_bits(out: &mut Vec<u8>, b: &Bits) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(&b.to_bytes());
}

impl Payload {
    pub fn tag(&self) -> Tag {
        match self {
            Payload::NoClickReport { .. } => Tag::NoClickReport,
            Payload::DecoyReveal { .. } => Tag::DecoyReveal,
            Payload::CommitmentBatch { .. } => Tag::CommitmentBatch,
            Payload::TestChallenge { .. } => Tag::TestChallenge,
            Payload::TestOpenings { .. } => Tag::TestOpenings,
            Payload::TestVerdict { .. } => Tag::TestVerdict,
            Payload::BasisReveal { .. } => Tag::BasisReveal,
            Payload::IndexSets { .. } => Tag::IndexSets,
            Payload::MaskedPayload(_) => Tag::MaskedPayload,
            Payload::Abort { .. } => Tag::Abort,
        }
    }

    pub fn encode(&self) -> WireMessage {
        let mut out = Vec::new();
        match self {
            Payload::NoClickReport { clicks } => put_bits(&mut out, clicks),
            Payload::DecoyReveal { rounds } => put_list(&mut out, rounds),
            Payload::CommitmentBatch { digests } => {
                for d in digests {
                    out.extend_from_slice(&d.digest);
                }
            }
            Payload::TestChallenge { indices } => put_list(&mut out, indices),
            Payload::TestOpenings { openings } => {
                put_u32(&mut out, openings.len() as u32);
                for o in openings {
                    assert_eq!(o.nonce.len(), NONCE_LEN, "wire openings carry fixed-size nonces");
                    out.push(o.x_tilde as u8 | (o.theta_tilde as u8) << 1);
                    out.extend_from_slice(&o.nonce);
                }
            }
            Payload::TestVerdict { passed } => out.push(*passed as u8),
            Payload::BasisReveal { theta } => put_bits(&mut out, theta),
            Payload::IndexSets { i0, i1 } => {
                put_list(&mut out, i0);
                put_list(&mut out, i1);
            }
            Payload::MaskedPayload(m) => {
                for s in &m.seeds {
                    put_u32(&mut out, s.out_len() as u32);
                    put_u32(&mut out, s.key_len() as u32);
                    out.extend_from_slice(&s.bits().to_bytes());
                }
                for b in m.y.iter().chain(m.z.iter()) {
                    put_bits(&mut out, b);
                }
            }
            Payload::Abort { reason, detail } => {
                out.push(*reason as u8);
                out.extend_from_slice(detail.as_bytes());
            }
        }
        WireMessage { tag: self.tag(), payload: out }
    }

    pub fn decode(msg: &WireMessage) -> Result<Payload, WireError> {
        let mut c = Cursor { tag: msg.tag, buf: &msg.payload };
        let p = match msg.tag {
            Tag::NoClickReport => Payload::NoClickReport { clicks: c.bits()? },
            Tag::DecoyReveal => Payload::DecoyReveal { rounds: c.u32_list()? },
            Tag::CommitmentBatch => {
                if c.buf.len() % DIGEST_LEN != 0 {
                    return Err(c.err("length is not a multiple of the digest size"));
                }
                let digests = c
                    .buf
                    .chunks(DIGEST_LEN)
                    .map(|d| Commitment { digest: d.try_into().unwrap() })
                    .collect();
                c.buf = &[];
                Payload::CommitmentBatch { digests }
            }
            Tag::TestChallenge => Payload::TestChallenge { indices: c.u32_list()? },
            Tag::TestOpenings => {
                let n = c.u32()? as usize;
                if n > c.buf.len() / (1 + NONCE_LEN) {
                    return Err(c.err("opening count exceeds payload"));
                }
                let mut openings = Vec::with_capacity(n);
                for _ in 0..n {
                    let flags = c.take(1)?[0];
                    if flags > 3 {
                        return Err(c.err("opening flags out of range"));
                    }
                    openings.push(Opening {
                        x_tilde: flags & 1 == 1,
                        theta_tilde: flags & 2 == 2,
                        nonce: c.take(NONCE_LEN)?.to_vec(),
                    });
                }
                Payload::TestOpenings { openings }
            }
            Tag::TestVerdict => match c.take(1)?[0] {
                0 => Payload::TestVerdict { passed: false },
                1 => Payload::TestVerdict { passed: true },
                _ => return Err(c.err("verdict byte must be 0 or 1")),
            },
            Tag::BasisReveal => Payload::BasisReveal { theta: c.bits()? },
            Tag::IndexSets => {
                let i0 = c.u32_list()?;
                let i1 = c.u32_list()?;
                Payload::IndexSets { i0, i1 }
            }
            Tag::MaskedPayload => {
                let mut seeds = Vec::with_capacity(2);
                for _ in 0..2 {
                    let out_len = c.u32()? as usize;
                    let key_len = c.u32()? as usize;
                    if out_len == 0 || key_len == 0 || out_len + key_len > 1 << 24 {
                        return Err(c.err("amplifier dimensions out of range"));
                    }
                    let len = out_len + key_len - 1;
                    let raw = c.take(len.div_ceil(8))?;
                    let bits = Bits::from_bytes(raw, len).ok_or_else(|| c.err("nonzero padding bits"))?;
                    seeds.push(AmplifierSeed::new(out_len, key_len, bits).map_err(|e| c.err(e.to_string()))?);
                }
                let y0 = c.bits()?;
                let y1 = c.bits()?;
                let z0 = c.bits()?;
                let z1 = c.bits()?;
                let [s0, s1]: [AmplifierSeed; 2] = seeds.try_into().unwrap();
                Payload::MaskedPayload(Masked { seeds: [s0, s1], y: [y0, y1], z: [z0, z1] })
            }
            Tag::Abort => {
                let code = c.take(1)?[0];
                let reason = AbortReason::from_byte(code).ok_or_else(|| c.err(format!("unknown reason {code}")))?;
                let detail = String::from_utf8(c.buf.to_vec()).map_err(|_| c.err("detail is not UTF-8"))?;
                c.buf = &[];
                Payload::Abort { reason, detail }
            }
        };
        c.done()?;
        Ok(p)
    }
}
