use std::collections::BTreeSet;
use std::fmt;

use crate::bits::Bitstream;
use crate::error::{Error, Result};
use crate::gf_bch::field::GaloisField;

/// Narrow-sense primitive binary BCH code.
///
/// Codewords are systematic and message-first: bit `i` of a codeword is the
/// coefficient of `x^(n-1-i)`, so the `k` message bits come first and the
/// `n - k` parity bits follow.
#[derive(Clone)]
pub struct BchCode {
    field: GaloisField,
    n: usize,
    k: usize,
    t: usize,
    /// Generator coefficients, lowest degree first.
    generator: Vec<bool>,
}

/// Result of a successful decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub message: Bitstream,
    pub corrected: usize,
}

impl BchCode {
    /// Builds the code with the default primitive polynomial for `m`.
    pub fn new(m: u32, t: usize) -> Result<Self> {
        Self::with_field(GaloisField::new(m)?, t)
    }

    pub fn with_field(field: GaloisField, t: usize) -> Result<Self> {
        let m = field.degree();
        let n = field.order();
        if t == 0 || t >= 1usize << (m - 1) {
            return Err(Error::InvalidCode(format!(
                "t={t} outside 1..{} for m={m}",
                1usize << (m - 1)
            )));
        }

        let mut generator = vec![true];
        let mut covered = BTreeSet::new();
        for i in 1..=2 * t {
            let rep = i % n;
            if covered.contains(&rep) {
                continue;
            }
            let coset = cyclotomic_coset(rep, n);
            covered.extend(coset.iter().copied());
            generator = gf2_mul(&generator, &minimal_polynomial(&field, &coset));
        }

        let parity = generator.len() - 1;
        if parity >= n {
            return Err(Error::InvalidCode(format!(
                "t={t} leaves no message bits for n={n}"
            )));
        }
        Ok(BchCode {
            field,
            n,
            k: n - parity,
            t,
            generator,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    /// Generator polynomial coefficients, lowest degree first.
    pub fn generator(&self) -> &[bool] {
        &self.generator
    }

    /// Encodes `message`, zero-padding it up to `k` bits.
    pub fn encode(&self, message: &Bitstream) -> Result<Bitstream> {
        if message.len() > self.k {
            return Err(Error::PayloadTooLarge {
                len: message.len(),
                capacity: self.k,
            });
        }
        let message = message.zero_padded(self.k);
        let r = self.n - self.k;

        // Division LFSR; reg[j] is the coefficient of x^j of the remainder.
        let mut reg = vec![false; r];
        for &bit in message.iter() {
            let feedback = bit ^ reg[r - 1];
            for j in (1..r).rev() {
                reg[j] = reg[j - 1] ^ (feedback & self.generator[j]);
            }
            reg[0] = feedback;
        }

        let mut codeword = message;
        for j in (0..r).rev() {
            codeword.push(reg[j]);
        }
        Ok(codeword)
    }

    /// `S_1 .. S_2t` of a received word.
    pub fn syndromes(&self, received: &Bitstream) -> Vec<u16> {
        let two_t = 2 * self.t;
        let mut syndromes = vec![0u16; two_t];
        for (i, _) in received.iter().enumerate().filter(|(_, &b)| b) {
            let e = self.n - 1 - i;
            for (j, s) in syndromes.iter_mut().enumerate().step_by(2) {
                *s ^= self.field.alpha_pow((j + 1) * e);
            }
        }
        // Binary code: S_2j = S_j^2.
        for j in (1..two_t).step_by(2) {
            let half = syndromes[j.div_ceil(2) - 1];
            syndromes[j] = self.field.mul(half, half);
        }
        syndromes
    }

    /// Corrects up to `t` errors and returns the `k`-bit message.
    ///
    /// Words more than `t` errors away from the transmitted codeword are either
    /// reported as [`Error::Uncorrectable`] or silently decoded to a different
    /// codeword; the latter cannot be detected by any bounded-distance decoder.
    pub fn decode(&self, received: &Bitstream) -> Result<Decoded> {
        if received.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: received.len(),
            });
        }
        let syndromes = self.syndromes(received);
        if syndromes.iter().all(|&s| s == 0) {
            return Ok(Decoded {
                message: received.truncated(self.k),
                corrected: 0,
            });
        }

        let locator = self.berlekamp_massey(&syndromes);
        let degree = locator.len() - 1;
        if degree > self.t {
            return Err(Error::Uncorrectable(format!(
                "error locator degree {degree} exceeds t={}",
                self.t
            )));
        }
        let positions = self.chien_search(&locator);
        if positions.len() != degree {
            return Err(Error::Uncorrectable(format!(
                "error locator of degree {degree} has {} roots",
                positions.len()
            )));
        }

        let mut corrected = received.clone();
        for &e in &positions {
            corrected.flip(self.n - 1 - e);
        }
        if self.syndromes(&corrected).iter().any(|&s| s != 0) {
            return Err(Error::Uncorrectable(
                "corrected word is not a codeword".into(),
            ));
        }
        Ok(Decoded {
            message: corrected.truncated(self.k),
            corrected: positions.len(),
        })
    }

    /// Shortest LFSR generating the syndrome sequence; coefficients lowest first
    /// with the constant term equal to one.
    fn berlekamp_massey(&self, syndromes: &[u16]) -> Vec<u16> {
        let f = &self.field;
        let mut current = vec![1u16];
        let mut previous = vec![1u16];
        let mut length = 0usize;
        let mut shift = 1usize;
        let mut last_discrepancy = 1u16;

        for step in 0..syndromes.len() {
            let mut discrepancy = syndromes[step];
            for i in 1..=length.min(current.len() - 1) {
                discrepancy ^= f.mul(current[i], syndromes[step - i]);
            }
            if discrepancy == 0 {
                shift += 1;
                continue;
            }
            let scale = f.div(discrepancy, last_discrepancy);
            let mut next = current.clone();
            if next.len() < previous.len() + shift {
                next.resize(previous.len() + shift, 0);
            }
            for (i, &p) in previous.iter().enumerate() {
                next[i + shift] ^= f.mul(scale, p);
            }
            if 2 * length <= step {
                length = step + 1 - length;
                previous = current;
                last_discrepancy = discrepancy;
                shift = 1;
            } else {
                shift += 1;
            }
            current = next;
        }
        current.truncate(length + 1);
        current.resize(length + 1, 0);
        current
    }

    /// Exponents `e` such that `alpha^-e` is a root of the locator.
    fn chien_search(&self, locator: &[u16]) -> Vec<usize> {
        let f = &self.field;
        let mut terms = locator.to_vec();
        let mut positions = Vec::new();
        for e in 0..self.n {
            // terms[j] = locator[j] * alpha^(-j*e)
            let sum = terms.iter().fold(0u16, |acc, &x| acc ^ x);
            if sum == 0 {
                positions.push(e);
            }
            for (j, term) in terms.iter_mut().enumerate().skip(1) {
                *term = f.mul_alpha_pow(*term, self.n - j % self.n);
            }
        }
        positions
    }
}

impl fmt::Debug for BchCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BchCode({}, {}, {})", self.n, self.k, self.t)
    }
}

fn cyclotomic_coset(rep: usize, n: usize) -> Vec<usize> {
    let mut coset = vec![rep];
    let mut x = rep * 2 % n;
    while x != rep {
        coset.push(x);
        x = x * 2 % n;
    }
    coset
}

/// Product of `(x + alpha^j)` over the coset; the result has binary coefficients.
fn minimal_polynomial(field: &GaloisField, coset: &[usize]) -> Vec<bool> {
    let mut poly = vec![1u16];
    for &j in coset {
        let root = field.alpha_pow(j);
        let mut next = vec![0u16; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i + 1] ^= c;
            next[i] ^= field.mul(c, root);
        }
        poly = next;
    }
    poly.into_iter()
        .map(|c| {
            debug_assert!(c <= 1, "minimal polynomial left GF(2)");
            c == 1
        })
        .collect()
}

fn gf2_mul(a: &[bool], b: &[bool]) -> Vec<bool> {
    let mut out = vec![false; a.len() + b.len() - 1];
    for (i, _) in a.iter().enumerate().filter(|(_, &x)| x) {
        for (j, _) in b.iter().enumerate().filter(|(_, &y)| y) {
            out[i + j] ^= true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::index::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Remainder of `dividend` (highest-degree coefficient first) modulo the
    /// generator, by plain long division.
    fn long_division_remainder(dividend: &[bool], generator_low_first: &[bool]) -> Vec<bool> {
        let divisor: Vec<bool> = generator_low_first.iter().rev().copied().collect();
        let mut rem = dividend.to_vec();
        for i in 0..=rem.len() - divisor.len() {
            if rem[i] {
                for (j, &d) in divisor.iter().enumerate() {
                    rem[i + j] ^= d;
                }
            }
        }
        rem[rem.len() - (divisor.len() - 1)..].to_vec()
    }

    fn bits(s: &str) -> Bitstream {
        s.parse().unwrap()
    }

    #[test]
    fn code_dimensions() {
        let hamming = BchCode::new(3, 1).unwrap();
        assert_eq!((hamming.n(), hamming.k()), (7, 4));
        let beacon = BchCode::new(5, 5).unwrap();
        assert_eq!((beacon.n(), beacon.k()), (31, 11));
        let ablation = BchCode::new(6, 5).unwrap();
        assert_eq!((ablation.n(), ablation.k()), (63, 36));
        let payload = BchCode::new(9, 55).unwrap();
        assert_eq!((payload.n(), payload.k()), (511, 130));
    }

    #[test]
    fn generator_matches_published_31_11() {
        // Octal 5423325 in the standard BCH tables.
        let code = BchCode::new(5, 5).unwrap();
        let high_first: Bitstream = code.generator().iter().rev().copied().collect();
        assert_eq!(high_first, bits("101100010011011010101"));
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(BchCode::new(5, 0).is_err());
        assert!(BchCode::new(5, 16).is_err());
        assert!(BchCode::new(1, 1).is_err());
        // Largest t for m=5 degenerates to the repetition code.
        let rep = BchCode::new(5, 15).unwrap();
        assert_eq!((rep.n(), rep.k()), (31, 1));
    }

    #[test]
    fn beacon_codeword_golden() {
        let code = BchCode::new(5, 5).unwrap();
        let cw = code.encode(&bits("10110010")).unwrap();
        assert_eq!(cw, bits("1011001000001101011001001111001"));
        let dividend = bits("10110010000").zero_padded(31);
        assert_eq!(
            long_division_remainder(&dividend, code.generator()),
            cw[11..].to_vec()
        );
    }

    #[test]
    fn zero_message_encodes_to_zero() {
        for (m, t) in [(3, 1), (5, 5), (9, 55)] {
            let code = BchCode::new(m, t).unwrap();
            let cw = code.encode(&Bitstream::zeros(code.k())).unwrap();
            assert_eq!(cw, Bitstream::zeros(code.n()));
        }
    }

    #[test]
    fn oversize_message_rejected() {
        let code = BchCode::new(5, 5).unwrap();
        assert!(matches!(
            code.encode(&Bitstream::zeros(12)),
            Err(Error::PayloadTooLarge {
                len: 12,
                capacity: 11
            })
        ));
    }

    #[test]
    fn encoder_agrees_with_long_division() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (m, t) in [(5, 5), (6, 5), (9, 55)] {
            let code = BchCode::new(m, t).unwrap();
            for _ in 0..20 {
                let msg = Bitstream::random(code.k(), &mut rng);
                let cw = code.encode(&msg).unwrap();
                assert_eq!(&cw[..code.k()], &msg[..]);
                let dividend = msg.zero_padded(code.n());
                assert_eq!(
                    long_division_remainder(&dividend, code.generator()),
                    cw[code.k()..].to_vec()
                );
                assert!(code.syndromes(&cw).iter().all(|&s| s == 0));
            }
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let code = BchCode::new(5, 5).unwrap();
        assert!(matches!(
            code.decode(&Bitstream::zeros(30)),
            Err(Error::LengthMismatch {
                expected: 31,
                got: 30
            })
        ));
    }

    #[test]
    fn clean_word_decodes_with_zero_corrections() {
        let code = BchCode::new(5, 5).unwrap();
        let msg = bits("10110010000");
        let decoded = code.decode(&code.encode(&msg).unwrap()).unwrap();
        assert_eq!(
            decoded,
            Decoded {
                message: msg,
                corrected: 0
            }
        );
    }

    #[test]
    fn hamming_7_4_exhaustive() {
        let code = BchCode::new(3, 1).unwrap();
        for value in 0u8..16 {
            let msg: Bitstream = (0..4).map(|i| value >> (3 - i) & 1 == 1).collect();
            let cw = code.encode(&msg).unwrap();
            assert_eq!(code.decode(&cw).unwrap().message, msg);
            for flip in 0..7 {
                let mut rx = cw.clone();
                rx.flip(flip);
                let decoded = code.decode(&rx).unwrap();
                assert_eq!(decoded.message, msg);
                assert_eq!(decoded.corrected, 1);
            }
        }
    }

    #[test]
    fn corrects_exactly_t_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (m, t, trials) in [(5, 5, 2000), (6, 5, 500), (9, 55, 50)] {
            let code = BchCode::new(m, t).unwrap();
            for _ in 0..trials {
                let msg = Bitstream::random(code.k(), &mut rng);
                let mut rx = code.encode(&msg).unwrap();
                for i in sample(&mut rng, code.n(), t) {
                    rx.flip(i);
                }
                let decoded = code.decode(&rx).unwrap();
                assert_eq!(decoded.message, msg);
                assert_eq!(decoded.corrected, t);
            }
        }
    }

    #[test]
    fn beyond_t_never_always_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let code = BchCode::new(5, 5).unwrap();
        let trials = 10_000;
        let mut recovered = 0;
        for _ in 0..trials {
            let msg = Bitstream::random(code.k(), &mut rng);
            let mut rx = code.encode(&msg).unwrap();
            for i in sample(&mut rng, code.n(), code.t() + 1) {
                rx.flip(i);
            }
            if let Ok(d) = code.decode(&rx) {
                if d.message == msg {
                    recovered += 1;
                }
            }
        }
        assert!(recovered < trials);
    }
}
