use std::fmt;

use hmac::{Hmac, Mac};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use subtle::ConstantTimeEq;

use crate::bits::Bitstream;
use crate::error::{Error, Result};

type HmacSha256 = Hmac<Sha256>;

pub const KEY_BYTES: usize = 32;
pub const MAC_BYTES: usize = 16;
pub const CHALLENGE_BITS: usize = 128;
pub const MAC_BITS: usize = MAC_BYTES * 8;

/// 256-bit symmetric key shared out of band between two contacts.
#[derive(Clone, PartialEq, Eq)]
pub struct SharedKey([u8; KEY_BYTES]);

impl SharedKey {
    pub fn from_bytes(bytes: [u8; KEY_BYTES]) -> Self {
        SharedKey(bytes)
    }

    pub fn from_hex(text: &str) -> Result<Self> {
        let bytes = hex::decode(text.trim())
            .map_err(|e| Error::KeyStore(format!("invalid key hex: {e}")))?;
        let bytes: [u8; KEY_BYTES] = bytes.try_into().map_err(|v: Vec<u8>| {
            Error::KeyStore(format!("key is {} bytes, expected {KEY_BYTES}", v.len()))
        })?;
        Ok(SharedKey(bytes))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; KEY_BYTES];
        rng.fill(&mut bytes);
        SharedKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_BYTES] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for SharedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SharedKey(<redacted>)")
    }
}

/// Receiver's challenge: a fresh nonce and a session identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Challenge {
    pub nonce: u64,
    pub session: u64,
}

impl Challenge {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Challenge {
            nonce: rng.gen(),
            session: rng.gen(),
        }
    }

    /// `N ‖ S`, both big-endian.
    pub fn to_bytes(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.nonce.to_be_bytes());
        out[8..].copy_from_slice(&self.session.to_be_bytes());
        out
    }

    pub fn to_bits(&self) -> Bitstream {
        Bitstream::from_bytes(&self.to_bytes())
    }

    pub fn from_bits(bits: &Bitstream) -> Result<Self> {
        if bits.len() != CHALLENGE_BITS {
            return Err(Error::LengthMismatch {
                expected: CHALLENGE_BITS,
                got: bits.len(),
            });
        }
        let bytes = bits.to_bytes();
        Ok(Challenge {
            nonce: u64::from_be_bytes(bytes[..8].try_into().expect("8 bytes")),
            session: u64::from_be_bytes(bytes[8..].try_into().expect("8 bytes")),
        })
    }
}

/// First 128 bits of the keyed hash over the challenge.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacResponse(pub [u8; MAC_BYTES]);

impl MacResponse {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; MAC_BYTES];
        rng.fill(&mut bytes);
        MacResponse(bytes)
    }

    pub fn to_bits(&self) -> Bitstream {
        Bitstream::from_bytes(&self.0)
    }

    pub fn from_bits(bits: &Bitstream) -> Result<Self> {
        if bits.len() != MAC_BITS {
            return Err(Error::LengthMismatch {
                expected: MAC_BITS,
                got: bits.len(),
            });
        }
        Ok(MacResponse(bits.to_bytes().try_into().expect("16 bytes")))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for MacResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacResponse({})", self.to_hex())
    }
}

pub fn compute_mac(key: &SharedKey, challenge: &Challenge) -> MacResponse {
    let mut mac = HmacSha256::new_from_slice(key.as_bytes()).expect("HMAC accepts any key length");
    mac.update(&challenge.to_bytes());
    let full = mac.finalize().into_bytes();
    let mut out = [0u8; MAC_BYTES];
    out.copy_from_slice(&full[..MAC_BYTES]);
    MacResponse(out)
}

/// Constant-time comparison against the expected response.
pub fn verify_mac(key: &SharedKey, challenge: &Challenge, received: &MacResponse) -> bool {
    compute_mac(key, challenge).0.ct_eq(&received.0).into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn zero_key_golden_vector() {
        // HMAC-SHA256(0^32, 0^16) truncated to 16 bytes, computed independently.
        let key = SharedKey::from_bytes([0; 32]);
        let mac = compute_mac(
            &key,
            &Challenge {
                nonce: 0,
                session: 0,
            },
        );
        assert_eq!(mac.to_hex(), "853c7403937d8b6239569b184eb7993f");
    }

    #[test]
    fn big_endian_field_order_golden_vector() {
        let mut bytes = [0u8; 32];
        for (i, b) in bytes.iter_mut().enumerate() {
            *b = i as u8;
        }
        let challenge = Challenge {
            nonce: 0x0123_4567_89ab_cdef,
            session: 0xfedc_ba98_7654_3210,
        };
        let mac = compute_mac(&SharedKey::from_bytes(bytes), &challenge);
        assert_eq!(mac.to_hex(), "3ed90b7fc993636c33c17e68095f0f99");
    }

    #[test]
    fn bit_round_trips() {
        let c = Challenge {
            nonce: 0x0123_4567_89ab_cdef,
            session: 42,
        };
        let bits = c.to_bits();
        assert_eq!(bits.len(), 128);
        assert_eq!(bits.truncated(8).to_string(), "00000001");
        assert_eq!(Challenge::from_bits(&bits).unwrap(), c);
        let mac = compute_mac(&SharedKey::from_bytes([7; 32]), &c);
        assert_eq!(MacResponse::from_bits(&mac.to_bits()).unwrap(), mac);
        assert!(Challenge::from_bits(&Bitstream::zeros(127)).is_err());
    }

    #[test]
    fn session_bit_flip_changes_mac() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let key = SharedKey::random(&mut rng);
            let c = Challenge::random(&mut rng);
            let flipped = Challenge {
                session: c.session ^ 1,
                ..c
            };
            let a = compute_mac(&key, &c);
            let b = compute_mac(&key, &flipped);
            assert_ne!(a, b);
            assert_eq!(a, compute_mac(&key, &c));
            assert!(seen.insert(a));
        }
    }

    #[test]
    fn verification() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let key = SharedKey::random(&mut rng);
        let c = Challenge::random(&mut rng);
        assert!(verify_mac(&key, &c, &compute_mac(&key, &c)));
        for _ in 0..10_000 {
            let other = SharedKey::random(&mut rng);
            assert!(!verify_mac(&key, &c, &compute_mac(&other, &c)));
        }
        let old = Challenge {
            nonce: c.nonce.wrapping_add(1),
            ..c
        };
        assert!(!verify_mac(&key, &c, &compute_mac(&key, &old)));
    }

    #[test]
    fn key_parsing_and_redaction() {
        let key = SharedKey::from_hex(&"ab".repeat(32)).unwrap();
        assert_eq!(key.to_hex(), "ab".repeat(32));
        assert!(SharedKey::from_hex("abcd").is_err());
        assert!(!format!("{key:?}").contains("ab"));
    }
}
