//! JSON-lines record of every frame, in delivery order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::party::Role;
use super::wire::{Tag, WireError, WireMessage};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub v: u32,
    pub seq: u64,
    pub from: String,
    pub tag: String,
    pub len: usize,
    pub payload: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, from: Role, msg: &WireMessage) {
        self.entries.push(TranscriptEntry {
            v: SCHEMA_VERSION,
            seq: self.entries.len() as u64,
            from: from.name().to_string(),
            tag: msg.tag.name().to_string(),
            len: msg.payload.len(),
            payload: hex::encode(&msg.payload),
        });
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Decoded messages with their senders.
    pub fn messages(&self) -> Result<Vec<(String, WireMessage)>, WireError> {
        self.entries
            .iter()
            .map(|e| {
                let tag = Tag::from_name(&e.tag).ok_or_else(|| WireError::Truncated(format!("unknown tag name {}", e.tag)))?;
                let payload = hex::decode(&e.payload).map_err(|err| WireError::Truncated(err.to_string()))?;
                Ok((e.from.clone(), WireMessage { tag, payload }))
            })
            .collect()
    }

    pub fn tags(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.tag.as_str()).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&serde_json::to_string(e).expect("entry serializes"));
            s.push('\n');
        }
        s
    }

    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(self.to_jsonl().as_bytes())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, serde_json::Error> {
        let mut entries = Vec::new();
        for line in r.lines() {
            let line = line.map_err(serde_json::Error::io)?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line)?);
        }
        Ok(Transcript { entries })
    }

    /// Check the step grammar: the fixed order of tags, each from the right
    /// sender, optionally cut short by one Abort.
    pub fn validate_grammar(&self) -> Result<(), String> {
        use Tag::*;
        const ORDER: [(Tag, &str); 10] = [
            (NoClickReport, "bob"),
            (DecoyReveal, "alice"),
            (CommitmentBatch, "bob"),
            (TestChallenge, "alice"),
            (TestOpenings, "bob"),
            (TestVerdict, "alice"),
            (BasisReveal, "alice"),
            (IndexSets, "bob"),
            (MaskedPayload, "alice"),
            (Abort, ""),
        ];
        for (k, e) in self.entries.iter().enumerate() {
            if e.seq != k as u64 || e.v != SCHEMA_VERSION {
                return Err(format!("entry {k} has seq {} and version {}", e.seq, e.v));
            }
            if e.tag == "Abort" {
                return if k + 1 == self.entries.len() { Ok(()) } else { Err("messages after Abort".into()) };
            }
            let Some((tag, from)) = ORDER.get(k) else {
                return Err(format!("extra message {} at {k}", e.tag));
            };
            if e.tag != tag.name() || e.from != *from {
                return Err(format!("entry {k}: got {} from {}, expected {} from {from}", e.tag, e.from, tag.name()));
            }
        }
        Ok(())
    }
}
