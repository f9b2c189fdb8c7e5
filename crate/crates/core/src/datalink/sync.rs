use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::Bitstream;
use crate::error::{Error, Result};
use crate::watermark::DecodedBit;

/// Preamble made of a short base pattern repeated a number of times.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SyncPattern {
    base: Bitstream,
    repeats: usize,
    bits: Bitstream,
}

impl SyncPattern {
    pub fn new(base: Bitstream, repeats: usize) -> Result<Self> {
        if base.is_empty() || repeats == 0 {
            return Err(Error::InvalidConfig(
                "sync pattern needs a non-empty base and at least one repeat".into(),
            ));
        }
        let bits = (0..repeats).flat_map(|_| base.iter().copied()).collect();
        Ok(SyncPattern {
            base,
            repeats,
            bits,
        })
    }

    pub fn base(&self) -> &Bitstream {
        &self.base
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn bits(&self) -> &Bitstream {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Default match threshold: 4 mismatches per 15 bits, rounded.
    pub fn default_threshold(&self) -> usize {
        (self.len() as f64 * 4.0 / 15.0).round() as usize
    }

    /// The fifteen preambles compared in the synchronization study.
    pub fn study_candidates() -> Vec<SyncPattern> {
        let mut out = Vec::new();
        for base in ["000", "111", "101", "010"] {
            for repeats in [3, 5] {
                out.push(format!("{base}x{repeats}").parse().expect("valid pattern"));
            }
        }
        for base in [
            "11010", "10101", "01010", "11001", "10011", "01100", "10110",
        ] {
            out.push(format!("{base}x3").parse().expect("valid pattern"));
        }
        out
    }
}

impl Default for SyncPattern {
    fn default() -> Self {
        "01010x3".parse().expect("valid default pattern")
    }
}

impl fmt::Display for SyncPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.base, self.repeats)
    }
}

impl fmt::Debug for SyncPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SyncPattern({self})")
    }
}

impl FromStr for SyncPattern {
    type Err = Error;

    /// Parses `"<bits>x<repeats>"`, or plain `"<bits>"` for a single repeat.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (base, repeats) = match s.split_once(['x', 'X', '*']) {
            Some((b, r)) => (
                b,
                r.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("sync repeats in {s:?}: {e}")))?,
            ),
            None => (s, 1),
        };
        SyncPattern::new(base.parse()?, repeats)
    }
}

impl From<SyncPattern> for String {
    fn from(p: SyncPattern) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for SyncPattern {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Sliding-window search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncSearch {
    /// Maximum mismatches accepted at the best offset.
    pub threshold: usize,
    /// Bits decoded with lower confidence count as mismatches.
    pub confidence_floor: f64,
    /// Largest frame offset examined.
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncMatch {
    pub offset: usize,
    pub distance: usize,
}

/// Mismatches between the pattern and `decoded` at `offset`, counting
/// low-confidence bits as mismatches.
pub fn sync_distance(decoded: &[DecodedBit], pattern: &[bool], offset: usize, floor: f64) -> usize {
    pattern
        .iter()
        .zip(&decoded[offset..offset + pattern.len()])
        .filter(|(&p, d)| d.bit != p || d.confidence < floor)
        .count()
}

/// Offset in `0..=window` with the fewest mismatches, earliest on ties.
/// Fails with [`Error::SyncNotFound`] if the best offset exceeds the threshold.
pub fn find_sync(
    decoded: &[DecodedBit],
    sync: &SyncPattern,
    search: &SyncSearch,
) -> Result<SyncMatch> {
    if decoded.len() < sync.len() {
        return Err(Error::LengthMismatch {
            expected: sync.len(),
            got: decoded.len(),
        });
    }
    let last = search.window.min(decoded.len() - sync.len());
    let best = (0..=last)
        .map(|offset| SyncMatch {
            offset,
            distance: sync_distance(decoded, sync.bits(), offset, search.confidence_floor),
        })
        .min_by_key(|m| (m.distance, m.offset))
        .expect("at least one offset");
    if best.distance <= search.threshold {
        Ok(best)
    } else {
        Err(Error::SyncNotFound)
    }
}
