//! Bitwise CRC, MSB first, zero initial value and no output XOR.

use serde::{Deserialize, Serialize};

use crate::Bit;

/// Generator polynomial including its leading term, e.g. `0x107` for
/// `x^8 + x^2 + x + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CrcPoly(pub u64);

impl CrcPoly {
    /// `x^8 + x^2 + x + 1`.
    pub const CRC8: Self = Self(0x107);

    /// Degree `r`, the number of CRC bits.
    pub fn degree(self) -> usize {
        63 - self.0.leading_zeros() as usize
    }

    pub fn is_valid(self) -> bool {
        self.0 >= 2 && self.0 & 1 == 1
    }
}

/// Remainder of `bits * x^r` divided by `poly`, as `r` bits MSB first.
pub fn crc_remainder(bits: &[Bit], poly: CrcPoly) -> Vec<Bit> {
    let r = poly.degree();
    let mask = (1u64 << r) - 1;
    let low = poly.0 & mask;
    let mut reg = 0u64;
    for &b in bits {
        let top = ((reg >> (r - 1)) & 1) as u8 ^ b;
        reg = (reg << 1) & mask;
        if top == 1 {
            reg ^= low;
        }
    }
    (0..r).rev().map(|i| ((reg >> i) & 1) as Bit).collect()
}

/// Appends the CRC of `payload`.
pub fn crc_attach(payload: &[Bit], poly: CrcPoly) -> Vec<Bit> {
    let mut out = payload.to_vec();
    out.extend(crc_remainder(payload, poly));
    out
}

/// True when the trailing `r` bits are the CRC of the leading bits.
pub fn crc_check(word: &[Bit], poly: CrcPoly) -> bool {
    let r = poly.degree();
    if word.len() < r {
        return false;
    }
    let (payload, crc) = word.split_at(word.len() - r);
    crc_remainder(payload, poly) == crc
}
