//! Channel codes and decoders.

mod crc;
mod grand;
mod polar;
mod turbo;

use serde::{Deserialize, Serialize};

pub use crc::{crc_attach, crc_check, crc_remainder, CrcPoly};
pub use grand::{
    grand_decode, orbgrand_schedule, HammingSchedule, LogisticSchedule, Membership, ParityCheckCode, ParityChecks,
    PatternOrder, ReliabilityKind, ReliabilityVector, DEFAULT_MAX_QUERIES,
};
pub use polar::{
    ga_means, polar_encode, polar_membership, polar_transform, sc_decode, sc_list_decode, PolarCode, PolarMembership,
};
pub use turbo::{turbo_decode, turbo_decode_fixed, turbo_encode, TurboCode, DEFAULT_ITERATIONS};

use crate::{Bit, Result};

/// Default scale of PSI pseudo-LLRs.
pub const DEFAULT_PSI_SCALE: f64 = 4.0;

/// Result of decoding one codeword.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    /// Recovered payload (CRC removed).
    pub info_bits: Vec<Bit>,
    /// CRC or membership verdict.
    pub success: bool,
    /// GRAND patterns tested.
    pub queries: u64,
    /// SC-List tree node updates or turbo trellis state updates.
    pub node_visits: u64,
    pub abandoned: bool,
    /// Turbo iterations run (0 for non-iterative decoders).
    pub iterations: u32,
}

impl DecodeOutcome {
    /// Decoder work in its native unit (queries for GRAND, node visits
    /// otherwise).
    pub fn cost(&self) -> u64 {
        self.queries + self.node_visits
    }
}

/// Pseudo-LLRs from hard bits and per-bit PSI:
/// `llr = scale * psi * (1 - 2 b)`.
pub fn llrs_from_psi(hard_bits: &[Bit], psi_tags: &[f64], scale: f64) -> Result<Vec<f64>> {
    if hard_bits.len() != psi_tags.len() {
        return crate::error::usage("hard bits and PSI tags differ in length");
    }
    Ok(hard_bits.iter().zip(psi_tags).map(|(&b, &p)| scale * p * (1.0 - 2.0 * b as f64)).collect())
}

/// LLRs carrying only the hard decision.
pub fn llrs_from_hard(hard_bits: &[Bit], scale: f64) -> Vec<f64> {
    hard_bits.iter().map(|&b| scale * (1.0 - 2.0 * b as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_llr_formula() {
        assert_eq!(llrs_from_psi(&[0], &[2.0], 4.0).unwrap(), vec![8.0]);
        assert_eq!(llrs_from_psi(&[1, 0], &[0.5, 3.0], 2.0).unwrap(), vec![-1.0, 6.0]);
        assert!(llrs_from_psi(&[1], &[], 4.0).is_err());
    }

    #[test]
    fn psi_llr_sign_follows_bit() {
        let bits = [0, 1, 1, 0, 1];
        let psi = [0.1, 5.0, 2.0, 9.0, 0.3];
        for (l, b) in llrs_from_psi(&bits, &psi, DEFAULT_PSI_SCALE).unwrap().iter().zip(bits) {
            assert_eq!(l.signum(), 1.0 - 2.0 * b as f64);
        }
    }
}
