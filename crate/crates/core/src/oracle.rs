//! Seeded random-oracle hash `{0,1}^m -> {0,1}^m` with query metering.
//!
//! Two backends behind one interface:
//!
//! * `Ideal` — output bits derived by a keyed pseudorandom expansion of
//!   `(seed, input)`, so fresh inputs behave like independent uniform draws
//!   and the whole transcript is reproducible from the seed. Width is capped
//!   at 64 bits so exhaustive suffix sweeps stay enumerable.
//! * `StandardHash` — SHA-256 of the byte-packed input (big-endian bit
//!   order, zero-padded to whole bytes, with the bit count prepended as a
//!   4-byte big-endian integer), truncated to the first `m` bits. This
//!   encoding is normative for cross-implementation reproducibility.
//!
//! A single instance is not shareable across threads; independent instances
//! built from the same seed produce identical transcripts, so harnesses
//! parallelize across instances, never within one.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const MAX_IDEAL_WIDTH: usize = 64;
pub const MAX_SHA_WIDTH: usize = 256;

const IDEAL_DOMAIN_TAG: &[u8] = b"obfcon-ideal-oracle-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Ideal { seed: u64 },
    StandardHash,
}

/// Backend tag as it appears in files and CLI flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Ideal,
    Sha,
}

impl std::str::FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(OracleKind::Ideal),
            "sha" => Ok(OracleKind::Sha),
            other => Err(Error::InvalidParams(format!(
                "unknown oracle mode {other:?}, expected \"ideal\" or \"sha\""
            ))),
        }
    }
}

pub struct RandomOracle {
    mode: OracleMode,
    width: usize,
    queries: u64,
    memo: Option<HashMap<BitString, BitString>>,
}

impl RandomOracle {
    pub fn new(mode: OracleMode, width: usize) -> Result<Self> {
        let cap = match mode {
            OracleMode::Ideal { .. } => MAX_IDEAL_WIDTH,
            OracleMode::StandardHash => MAX_SHA_WIDTH,
        };
        if width == 0 || width > cap {
            return Err(Error::InvalidParams(format!(
                "oracle width {width} outside 1..={cap} for {mode:?}"
            )));
        }
        Ok(RandomOracle {
            mode,
            width,
            queries: 0,
            memo: None,
        })
    }

    pub fn ideal(width: usize, seed: u64) -> Result<Self> {
        Self::new(OracleMode::Ideal { seed }, width)
    }

    pub fn standard_hash(width: usize) -> Result<Self> {
        Self::new(OracleMode::StandardHash, width)
    }

    /// Build from a file/CLI tag plus optional seed.
    pub fn from_kind(kind: OracleKind, width: usize, seed: Option<u64>) -> Result<Self> {
        match kind {
            OracleKind::Ideal => {
                let seed = seed.ok_or_else(|| {
                    Error::InvalidParams("ideal oracle mode requires a seed".into())
                })?;
                Self::ideal(width, seed)
            }
            OracleKind::Sha => Self::standard_hash(width),
        }
    }

    /// Enable the memo cache for repeated inputs. Outputs are unchanged; the
    /// derivation is already deterministic per input.
    pub fn with_memo(mut self) -> Self {
        self.memo = Some(HashMap::new());
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn kind(&self) -> OracleKind {
        match self.mode {
            OracleMode::Ideal { .. } => OracleKind::Ideal,
            OracleMode::StandardHash => OracleKind::Sha,
        }
    }

    pub fn query(&mut self, x: &BitString) -> Result<BitString> {
        if x.len() != self.width {
            return Err(Error::InputWidth {
                want: self.width,
                got: x.len(),
            });
        }
        // Counts every call, including repeated inputs.
        self.queries += 1;
        if let Some(memo) = &self.memo {
            if let Some(hit) = memo.get(x) {
                return Ok(hit.clone());
            }
        }
        let out = match self.mode {
            OracleMode::Ideal { seed } => {
                let mut h = Sha256::new();
                h.update(IDEAL_DOMAIN_TAG);
                h.update(seed.to_be_bytes());
                h.update(encode_input(x));
                BitString::from_byte_prefix(&h.finalize(), self.width)
            }
            OracleMode::StandardHash => {
                let digest = Sha256::digest(encode_input(x));
                BitString::from_byte_prefix(&digest, self.width)
            }
        };
        if let Some(memo) = &mut self.memo {
            memo.insert(x.clone(), out.clone());
        }
        Ok(out)
    }

    /// Queries since construction or the last reset.
    pub fn query_count(&self) -> u64 {
        self.queries
    }

    pub fn reset_query_count(&mut self) {
        self.queries = 0;
    }
}

/// Normative byte encoding of an oracle input: 4-byte big-endian bit count,
/// then the MSB-first packed bits.
fn encode_input(x: &BitString) -> Vec<u8> {
    let mut buf = Vec::with_capacity(4 + x.packed_bytes().len());
    buf.extend_from_slice(&(x.len() as u32).to_be_bytes());
    buf.extend_from_slice(x.packed_bytes());
    buf
}
