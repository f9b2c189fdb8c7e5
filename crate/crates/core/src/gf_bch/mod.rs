//! Binary BCH codes over GF(2^m): generator construction, systematic
//! encoding, and syndrome / Berlekamp–Massey / Chien decoding.

mod bch;
mod field;

pub use bch::{BchCode, Decoded};
pub use field::{primitive_poly, GaloisField, MAX_DEGREE, MIN_DEGREE};
