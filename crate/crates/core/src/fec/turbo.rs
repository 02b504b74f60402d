//! Rate-1/3 turbo code: two 8-state RSC encoders (feedback `1+D^2+D^3`,
//! feedforward `1+D+D^3`) joined by a QPP interleaver, each trellis
//! terminated with three tail steps.
//!
//! Codeword layout (length `3K + 12`):
//! `systematic[K] | parity1[K] | parity2[K] | (x, z) x 3 for encoder 1 |
//! (x', z') x 3 for encoder 2`.
//!
//! LLR convention: positive favours bit 0.

use super::crc::{crc_attach, crc_check, CrcPoly};
use super::DecodeOutcome;
use crate::error::usage;
use crate::{Bit, Result};

const STATES: usize = 8;
const NEG: f64 = -1e300;

/// Default iteration cap.
pub const DEFAULT_ITERATIONS: u32 = 8;

/// QPP coefficients `(f1, f2)` for the supported interleaver sizes.
const QPP_TABLE: &[(usize, usize, usize)] = &[
    (40, 3, 10),
    (48, 7, 12),
    (56, 19, 42),
    (64, 7, 16),
    (128, 15, 32),
    (256, 15, 32),
    (512, 31, 64),
    (1024, 31, 64),
];

/// One RSC trellis step from `state` with input `u`: `(next_state, parity)`.
/// State bits are `(s1, s2, s3)` with `s1` the most recent.
#[inline]
fn step(state: usize, u: Bit) -> (usize, Bit) {
    let s1 = (state >> 2) & 1;
    let s2 = (state >> 1) & 1;
    let s3 = state & 1;
    let a = u as usize ^ s2 ^ s3;
    let z = a ^ s1 ^ s3;
    ((a << 2) | (s1 << 1) | s2, z as Bit)
}

/// Input that drives the feedback to zero (used for termination).
#[inline]
fn tail_input(state: usize) -> Bit {
    (((state >> 1) ^ state) & 1) as Bit
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurboCode {
    k: usize,
    perm: Vec<usize>,
    crc: Option<CrcPoly>,
}

impl TurboCode {
    /// Code with interleaver size `k`. When `crc` is set the last `r` of the
    /// `k` input bits carry a CRC of the payload.
    pub fn new(k: usize, crc: Option<CrcPoly>) -> Result<Self> {
        let Some(&(_, f1, f2)) = QPP_TABLE.iter().find(|e| e.0 == k) else {
            let sizes: Vec<usize> = QPP_TABLE.iter().map(|e| e.0).collect();
            return usage(format!("no QPP interleaver for K = {k}; supported sizes: {sizes:?}"));
        };
        if let Some(p) = crc {
            if !p.is_valid() || p.degree() >= k {
                return usage("invalid CRC for turbo block size");
            }
        }
        let perm = (0..k).map(|i| (f1 * i + f2 * i * i) % k).collect();
        Ok(Self { k, perm, crc })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn payload_len(&self) -> usize {
        self.k - self.crc.map_or(0, CrcPoly::degree)
    }

    pub fn codeword_len(&self) -> usize {
        3 * self.k + 12
    }

    pub fn interleaver(&self) -> &[usize] {
        &self.perm
    }

    /// CRC-attaches (if configured) and encodes.
    pub fn encode_payload(&self, payload: &[Bit]) -> Result<Vec<Bit>> {
        if payload.len() != self.payload_len() {
            return usage(format!("turbo payload has {} bits, expected {}", payload.len(), self.payload_len()));
        }
        match self.crc {
            Some(p) => turbo_encode(&crc_attach(payload, p), self),
            None => turbo_encode(payload, self),
        }
    }
}

fn rsc_encode(bits: &[Bit]) -> (Vec<Bit>, [Bit; 6]) {
    let mut state = 0;
    let mut parity = Vec::with_capacity(bits.len());
    for &u in bits {
        let (s, z) = step(state, u);
        parity.push(z);
        state = s;
    }
    let mut tail = [0; 6];
    for t in 0..3 {
        let u = tail_input(state);
        let (s, z) = step(state, u);
        tail[2 * t] = u;
        tail[2 * t + 1] = z;
        state = s;
    }
    debug_assert_eq!(state, 0);
    (parity, tail)
}

/// Encodes `k` input bits into `3k + 12` coded bits.
pub fn turbo_encode(input: &[Bit], code: &TurboCode) -> Result<Vec<Bit>> {
    if input.len() != code.k {
        return usage(format!("turbo encoder expects {} bits, got {}", code.k, input.len()));
    }
    let interleaved: Vec<Bit> = code.perm.iter().map(|&p| input[p]).collect();
    let (p1, t1) = rsc_encode(input);
    let (p2, t2) = rsc_encode(&interleaved);
    let mut out = Vec::with_capacity(code.codeword_len());
    out.extend_from_slice(input);
    out.extend(p1);
    out.extend(p2);
    out.extend(t1);
    out.extend(t2);
    Ok(out)
}

/// Max-log-MAP decoding of one terminated RSC trellis. `sys` and `par` have
/// `k + 3` entries (tail included); `apriori` has `k`. Returns the
/// a-posteriori LLRs of the `k` inputs.
fn bcjr(sys: &[f64], par: &[f64], apriori: &[f64], out: &mut [f64]) {
    let steps = sys.len();
    let k = apriori.len();
    let mut alpha = vec![[NEG; STATES]; steps + 1];
    alpha[0][0] = 0.0;
    let gamma = |t: usize, u: Bit, z: Bit| -> f64 {
        let la = if t < k { apriori[t] } else { 0.0 };
        let su = if u == 0 { 1.0 } else { -1.0 };
        let sz = if z == 0 { 1.0 } else { -1.0 };
        0.5 * (su * (sys[t] + la) + sz * par[t])
    };
    for t in 0..steps {
        let mut next = [NEG; STATES];
        for s in 0..STATES {
            let a = alpha[t][s];
            if a <= NEG {
                continue;
            }
            for u in 0..2u8 {
                let (ns, z) = step(s, u);
                let m = a + gamma(t, u, z);
                if m > next[ns] {
                    next[ns] = m;
                }
            }
        }
        alpha[t + 1] = next;
    }
    let mut beta = [NEG; STATES];
    beta[0] = 0.0;
    for t in (0..steps).rev() {
        let mut prev = [NEG; STATES];
        let mut best = [NEG; 2];
        for s in 0..STATES {
            for u in 0..2u8 {
                let (ns, z) = step(s, u);
                if beta[ns] <= NEG {
                    continue;
                }
                let g = gamma(t, u, z);
                let b = g + beta[ns];
                if b > prev[s] {
                    prev[s] = b;
                }
                if t < k && alpha[t][s] > NEG {
                    let m = alpha[t][s] + b;
                    if m > best[u as usize] {
                        best[u as usize] = m;
                    }
                }
            }
        }
        if t < k {
            out[t] = best[0] - best[1];
        }
        beta = prev;
    }
}

/// Iterative max-log-MAP turbo decoding.
///
/// Stops after `max_iterations` or as soon as the hard decisions of two
/// consecutive iterations agree. `node_visits` counts trellis state
/// updates over all component decoder runs.
pub fn turbo_decode(llrs: &[f64], code: &TurboCode, max_iterations: u32) -> Result<DecodeOutcome> {
    decode(llrs, code, max_iterations, true)
}

/// Runs exactly `iterations` iterations without the stability stop.
pub fn turbo_decode_fixed(llrs: &[f64], code: &TurboCode, iterations: u32) -> Result<DecodeOutcome> {
    decode(llrs, code, iterations, false)
}

fn decode(llrs: &[f64], code: &TurboCode, max_iterations: u32, early_stop: bool) -> Result<DecodeOutcome> {
    let k = code.k;
    if llrs.len() != code.codeword_len() {
        return usage(format!("turbo decoder expects {} LLRs, got {}", code.codeword_len(), llrs.len()));
    }
    if max_iterations == 0 {
        return usage("turbo iterations must be >= 1");
    }
    let sys = &llrs[..k];
    let tail = &llrs[3 * k..];
    let mut sys1: Vec<f64> = sys.to_vec();
    let mut par1: Vec<f64> = llrs[k..2 * k].to_vec();
    let mut sys2: Vec<f64> = code.perm.iter().map(|&p| sys[p]).collect();
    let mut par2: Vec<f64> = llrs[2 * k..3 * k].to_vec();
    for t in 0..3 {
        sys1.push(tail[2 * t]);
        par1.push(tail[2 * t + 1]);
        sys2.push(tail[6 + 2 * t]);
        par2.push(tail[6 + 2 * t + 1]);
    }
    let mut ext21 = vec![0.0; k]; // extrinsic from decoder 2, natural order
    let mut app1 = vec![0.0; k];
    let mut app2 = vec![0.0; k];
    let mut la2 = vec![0.0; k];
    let mut decisions: Option<Vec<Bit>> = None;
    let mut visits = 0u64;
    let mut iterations = 0;
    for it in 1..=max_iterations {
        iterations = it;
        bcjr(&sys1, &par1, &ext21, &mut app1);
        for i in 0..k {
            let p = code.perm[i];
            la2[i] = app1[p] - sys[p] - ext21[p];
        }
        bcjr(&sys2, &par2, &la2, &mut app2);
        visits += 2 * ((k + 3) * STATES) as u64;
        let mut hard = vec![0; k];
        for i in 0..k {
            let p = code.perm[i];
            ext21[p] = app2[i] - sys2[i] - la2[i];
            hard[p] = (app2[i] < 0.0) as Bit;
        }
        let stable = decisions.as_ref() == Some(&hard);
        decisions = Some(hard);
        if stable && early_stop {
            break;
        }
    }
    let bits = decisions.expect("at least one iteration");
    let success = code.crc.is_none_or(|p| crc_check(&bits, p));
    let mut info = bits;
    info.truncate(code.payload_len());
    Ok(DecodeOutcome { info_bits: info, success, queries: 0, node_visits: visits, abandoned: false, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn clean(x: &[Bit]) -> Vec<f64> {
        x.iter().map(|&b| if b == 0 { 10.0 } else { -10.0 }).collect()
    }

    #[test]
    fn qpp_tables_are_permutations() {
        for &(k, _, _) in QPP_TABLE {
            let code = TurboCode::new(k, None).unwrap();
            let mut seen = vec![false; k];
            for &p in code.interleaver() {
                assert!(!seen[p], "K={k} not a permutation");
                seen[p] = true;
            }
        }
        assert!(TurboCode::new(100, None).is_err());
    }

    #[test]
    fn all_zero_and_length() {
        let code = TurboCode::new(256, None).unwrap();
        let x = turbo_encode(&[0; 256], &code).unwrap();
        assert_eq!(x.len(), 780);
        assert!(x.iter().all(|&b| b == 0));
        assert!(turbo_encode(&[0; 255], &code).is_err());
    }

    #[test]
    fn termination_returns_to_zero() {
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let bits: Vec<Bit> = (0..40).map(|_| rng.random_range(0..2)).collect();
            // rsc_encode debug-asserts the final state
            let (_, tail) = rsc_encode(&bits);
            assert_eq!(tail.len(), 6);
        }
    }

    #[test]
    fn noiseless_round_trip_one_iteration() {
        let mut rng = rng_from_seed(10);
        for k in [40, 256] {
            let code = TurboCode::new(k, None).unwrap();
            for _ in 0..10 {
                let p: Vec<Bit> = (0..k).map(|_| rng.random_range(0..2)).collect();
                let x = code.encode_payload(&p).unwrap();
                let out = turbo_decode(&clean(&x), &code, 1).unwrap();
                assert_eq!(out.info_bits, p);
                assert!(out.success);
                let out = turbo_decode(&clean(&x), &code, 8).unwrap();
                assert_eq!(out.iterations, 2, "stable decisions stop at the second iteration");
            }
        }
    }

    #[test]
    fn crc_flag() {
        let code = TurboCode::new(64, Some(CrcPoly::CRC8)).unwrap();
        let p: Vec<Bit> = (0..56).map(|i| (i % 3 == 0) as u8).collect();
        let x = code.encode_payload(&p).unwrap();
        let out = turbo_decode(&clean(&x), &code, 4).unwrap();
        assert!(out.success);
        assert_eq!(out.info_bits, p);
    }
}
