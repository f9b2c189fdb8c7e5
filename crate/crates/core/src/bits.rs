//! Bit sequences shared by every layer of the stack.

use std::fmt;
use std::ops::{BitXor, Deref};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// An ordered sequence of bits, first-transmitted bit first.
///
/// Byte conversions are MSB-first: bit 0 of the stream is the most
/// significant bit of byte 0.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Bitstream(Vec<bool>);

impl Bitstream {
    pub fn new() -> Self {
        Bitstream(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Bitstream(vec![false; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Bitstream(bits)
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for byte in bytes {
            for shift in (0..8).rev() {
                bits.push((byte >> shift) & 1 == 1);
            }
        }
        Bitstream(bits)
    }

    /// Packs the bits MSB-first; a trailing partial byte is zero-filled.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
            })
            .collect()
    }

    /// Parses a hex string and keeps the first `len` bits.
    pub fn from_hex(hex_str: &str, len: usize) -> Result<Self, Error> {
        let bytes = hex::decode(hex_str.trim())
            .map_err(|e| Error::Parse(format!("invalid hex bitstream: {e}")))?;
        let mut bits = Bitstream::from_bytes(&bytes);
        if len > bits.len() {
            return Err(Error::Parse(format!(
                "hex string holds {} bits, {} requested",
                bits.len(),
                len
            )));
        }
        bits.0.truncate(len);
        Ok(bits)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Bitstream((0..len).map(|_| rng.gen::<bool>()).collect())
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend_from(&mut self, other: &Bitstream) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn concat(&self, other: &Bitstream) -> Bitstream {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    /// Returns a copy extended with zeros up to `len` bits.
    pub fn zero_padded(&self, len: usize) -> Bitstream {
        let mut bits = self.0.clone();
        if bits.len() < len {
            bits.resize(len, false);
        }
        Bitstream(bits)
    }

    pub fn slice(&self, start: usize, end: usize) -> Bitstream {
        Bitstream(self.0[start..end].to_vec())
    }

    pub fn truncated(&self, len: usize) -> Bitstream {
        Bitstream(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn flip(&mut self, index: usize) {
        self.0[index] = !self.0[index];
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Number of differing positions over the common prefix plus the length difference.
    pub fn hamming_distance(&self, other: &Bitstream) -> usize {
        let common = self
            .0
            .iter()
            .zip(other.0.iter())
            .filter(|(a, b)| a != b)
            .count();
        common + self.0.len().abs_diff(other.0.len())
    }
}

impl Deref for Bitstream {
    type Target = [bool];

    fn deref(&self) -> &[bool] {
        &self.0
    }
}

impl FromIterator<bool> for Bitstream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bitstream(iter.into_iter().collect())
    }
}

impl BitXor for &Bitstream {
    type Output = Bitstream;

    /// Pointwise XOR; both operands must have the same length.
    fn bitxor(self, rhs: &Bitstream) -> Bitstream {
        assert_eq!(self.len(), rhs.len(), "xor of unequal-length bitstreams");
        self.0
            .iter()
            .zip(rhs.0.iter())
            .map(|(a, b)| a ^ b)
            .collect()
    }
}

impl fmt::Display for Bitstream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitstream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitstream({self})")
    }
}

impl FromStr for Bitstream {
    type Err = Error;

    /// Parses a string of `0`/`1` characters; spaces and underscores are ignored.
    fn from_str(s: &str) -> Result<Self, Error> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<bool>, Error>>()
            .map(Bitstream)
    }
}

impl From<Bitstream> for String {
    fn from(bits: Bitstream) -> String {
        bits.to_string()
    }
}

impl TryFrom<String> for Bitstream {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_are_msb_first() {
        let bits = Bitstream::from_bytes(&[0xB2]);
        assert_eq!(bits.to_string(), "10110010");
        assert_eq!(bits.to_bytes(), vec![0xB2]);
    }

    #[test]
    fn partial_byte_is_zero_filled() {
        let bits: Bitstream = "101".parse().unwrap();
        assert_eq!(bits.to_bytes(), vec![0b1010_0000]);
    }

    #[test]
    fn hex_round_trip_with_length() {
        let bits = Bitstream::from_hex("b2", 8).unwrap();
        assert_eq!(bits.to_hex(), "b2");
        assert!(Bitstream::from_hex("b2", 9).is_err());
        assert!(Bitstream::from_hex("zz", 8).is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("10a1".parse::<Bitstream>().is_err());
        assert_eq!("1_0 1".parse::<Bitstream>().unwrap().len(), 3);
    }

    #[test]
    fn hamming_counts_length_difference() {
        let a: Bitstream = "1010".parse().unwrap();
        let b: Bitstream = "10".parse().unwrap();
        assert_eq!(a.hamming_distance(&b), 2);
    }
}
