use crate::error::{Error, Result};

/// Numerically smallest primitive polynomial of each degree 2..=16, bit-packed
/// with bit `i` holding the coefficient of `x^i`.
const PRIMITIVE_POLYS: [u32; 15] = [
    0x7,     // m=2   x^2+x+1
    0xB,     // m=3   x^3+x+1
    0x13,    // m=4   x^4+x+1
    0x25,    // m=5   x^5+x^2+1
    0x43,    // m=6   x^6+x+1
    0x83,    // m=7   x^7+x+1
    0x11D,   // m=8   x^8+x^4+x^3+x^2+1
    0x211,   // m=9   x^9+x^4+1
    0x409,   // m=10  x^10+x^3+1
    0x805,   // m=11  x^11+x^2+1
    0x1053,  // m=12  x^12+x^6+x^4+x+1
    0x201B,  // m=13  x^13+x^4+x^3+x+1
    0x402B,  // m=14  x^14+x^5+x^3+x+1
    0x8003,  // m=15  x^15+x+1
    0x1002D, // m=16  x^16+x^5+x^3+x^2+1
];

pub const MIN_DEGREE: u32 = 2;
pub const MAX_DEGREE: u32 = 16;

/// Default primitive polynomial for GF(2^m).
pub fn primitive_poly(m: u32) -> Result<u32> {
    if !(MIN_DEGREE..=MAX_DEGREE).contains(&m) {
        return Err(Error::InvalidCode(format!(
            "field degree m={m} outside {MIN_DEGREE}..={MAX_DEGREE}"
        )));
    }
    Ok(PRIMITIVE_POLYS[(m - MIN_DEGREE) as usize])
}

/// GF(2^m) with log/antilog tables. Elements are bit-packed polynomials in
/// the primitive element `alpha` (the class of `x`).
#[derive(Debug, Clone)]
pub struct GaloisField {
    m: u32,
    poly: u32,
    order: usize,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl GaloisField {
    pub fn new(m: u32) -> Result<Self> {
        Self::with_polynomial(m, primitive_poly(m)?)
    }

    /// Builds the field from an explicit polynomial, rejecting it unless it is
    /// primitive of degree `m`.
    pub fn with_polynomial(m: u32, poly: u32) -> Result<Self> {
        if !(MIN_DEGREE..=MAX_DEGREE).contains(&m) {
            return Err(Error::InvalidCode(format!(
                "field degree m={m} outside {MIN_DEGREE}..={MAX_DEGREE}"
            )));
        }
        if poly >> m != 1 {
            return Err(Error::InvalidCode(format!(
                "polynomial {poly:#x} does not have degree {m}"
            )));
        }
        let order = (1usize << m) - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; order + 1];
        let mut x: u32 = 1;
        for (i, slot) in exp.iter_mut().take(order).enumerate() {
            if i > 0 && x == 1 {
                return Err(Error::InvalidCode(format!(
                    "polynomial {poly:#x} is not primitive (alpha has order {i})"
                )));
            }
            *slot = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x >> m & 1 == 1 {
                x ^= poly;
            }
        }
        if x != 1 {
            return Err(Error::InvalidCode(format!(
                "polynomial {poly:#x} is not primitive"
            )));
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(GaloisField {
            m,
            poly,
            order,
            exp,
            log,
        })
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn polynomial(&self) -> u32 {
        self.poly
    }

    /// Size of the multiplicative group, `2^m - 1`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `alpha^i` for any non-negative exponent.
    #[inline]
    pub fn alpha_pow(&self, i: usize) -> u16 {
        self.exp[i % self.order]
    }

    /// Discrete log of a nonzero element.
    #[inline]
    pub fn log(&self, a: u16) -> usize {
        debug_assert!(a != 0, "log of zero");
        self.log[a as usize] as usize
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    #[inline]
    pub fn div(&self, a: u16, b: u16) -> u16 {
        assert!(b != 0, "division by zero in GF(2^{})", self.m);
        if a == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.order - self.log[b as usize] as usize]
        }
    }

    #[inline]
    pub fn inv(&self, a: u16) -> u16 {
        self.div(1, a)
    }

    /// Multiplies by `alpha^e` without a second table lookup.
    #[inline]
    pub fn mul_alpha_pow(&self, a: u16, e: usize) -> u16 {
        if a == 0 {
            0
        } else {
            self.exp[(self.log[a as usize] as usize + e % self.order) % self.order]
        }
    }
}
