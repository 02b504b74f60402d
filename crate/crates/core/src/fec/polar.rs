//! CRC-aided polar codes: construction, encoding, SC and SC-List decoding.
//!
//! The transform is `x = u F^{(x)n}` in natural order, built recursively as
//! `enc(u) = (enc(u_lo) xor enc(u_hi), enc(u_hi))` where `u_lo`/`u_hi` are
//! the two halves of `u`. SC decoding follows the same recursion with
//! min-sum `f` and exact `g`.

use super::crc::{crc_attach, crc_check, CrcPoly};
use super::grand::{Membership, ParityChecks};
use super::DecodeOutcome;
use crate::error::usage;
use crate::{Bit, Error, Result};

/// A polar code with `k` unfrozen positions (CRC bits included).
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCode {
    n: usize,
    k: usize,
    frozen: Vec<usize>,
    frozen_mask: Vec<bool>,
    info_positions: Vec<usize>,
    crc: Option<CrcPoly>,
}

impl PolarCode {
    /// Builds a code whose frozen set is chosen by Gaussian-approximation
    /// density evolution at `design_snr_db` (per coded bit Es/N0 of BPSK).
    pub fn new(n: usize, k: usize, crc: Option<CrcPoly>, design_snr_db: f64) -> Result<Self> {
        check_dims(n, k, crc)?;
        let means = ga_means(n, design_snr_db);
        let mut order: Vec<usize> = (0..n).collect();
        // most reliable first; equal means keep the lower index first
        order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
        let mut frozen: Vec<usize> = order[k..].to_vec();
        frozen.sort_unstable();
        Self::with_frozen(n, k, frozen, crc)
    }

    pub fn with_frozen(n: usize, k: usize, frozen: Vec<usize>, crc: Option<CrcPoly>) -> Result<Self> {
        check_dims(n, k, crc)?;
        if frozen.len() != n - k {
            return usage(format!("frozen set has {} entries, expected {}", frozen.len(), n - k));
        }
        let mut frozen_mask = vec![false; n];
        for &f in &frozen {
            if f >= n || frozen_mask[f] {
                return usage("frozen indices must be distinct and < N");
            }
            frozen_mask[f] = true;
        }
        let mut frozen = frozen;
        frozen.sort_unstable();
        let info_positions = (0..n).filter(|&i| !frozen_mask[i]).collect();
        Ok(Self { n, k, frozen, frozen_mask, info_positions, crc })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unfrozen positions, CRC included.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn crc(&self) -> Option<CrcPoly> {
        self.crc
    }

    pub fn crc_len(&self) -> usize {
        self.crc.map_or(0, CrcPoly::degree)
    }

    /// Payload bits per codeword, `K - r`.
    pub fn payload_len(&self) -> usize {
        self.k - self.crc_len()
    }

    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// CRC-attaches and encodes a payload.
    pub fn encode_payload(&self, payload: &[Bit]) -> Result<Vec<Bit>> {
        if payload.len() != self.payload_len() {
            return usage(format!("payload has {} bits, expected {}", payload.len(), self.payload_len()));
        }
        let info = match self.crc {
            Some(p) => crc_attach(payload, p),
            None => payload.to_vec(),
        };
        polar_encode(&info, self)
    }

    /// Unfrozen bits of `u` in position order.
    fn gather_info(&self, u: &[Bit]) -> Vec<Bit> {
        self.info_positions.iter().map(|&i| u[i]).collect()
    }

    fn crc_ok(&self, info: &[Bit]) -> bool {
        self.crc.is_none_or(|p| crc_check(info, p))
    }

    fn strip_crc(&self, mut info: Vec<Bit>) -> Vec<Bit> {
        info.truncate(self.payload_len());
        info
    }
}

fn check_dims(n: usize, k: usize, crc: Option<CrcPoly>) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return usage(format!("polar length {n} must be a power of two >= 2"));
    }
    if k == 0 || k >= n {
        return usage(format!("polar K = {k} must satisfy 0 < K < N = {n}"));
    }
    if let Some(p) = crc {
        if !p.is_valid() || p.degree() >= k {
            return Err(Error::Usage(format!("CRC polynomial {:#x} invalid for K = {k}", p.0)));
        }
    }
    Ok(())
}

/// In-place polar transform over GF(2). It is its own inverse.
pub fn polar_transform(bits: &mut [Bit]) {
    let n = bits.len();
    let mut half = 1;
    while half < n {
        for start in (0..n).step_by(2 * half) {
            for i in start..start + half {
                bits[i] ^= bits[i + half];
            }
        }
        half *= 2;
    }
}

/// Places `info` (CRC included) on the unfrozen positions and transforms.
pub fn polar_encode(info: &[Bit], code: &PolarCode) -> Result<Vec<Bit>> {
    if info.len() != code.k {
        return usage(format!("polar encoder expects {} bits, got {}", code.k, info.len()));
    }
    let mut u = vec![0; code.n];
    for (&pos, &b) in code.info_positions.iter().zip(info) {
        u[pos] = b;
    }
    polar_transform(&mut u);
    Ok(u)
}

// ---- Gaussian approximation -------------------------------------------------

/// `ln phi(x)` with Chung's two-piece approximation.
fn ln_phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < 10.0 {
        (-0.4527 * x.powf(0.86) + 0.0218).min(0.0)
    } else {
        0.5 * (std::f64::consts::PI / x).ln() - x / 4.0 + (1.0 - 10.0 / (7.0 * x)).ln()
    }
}

/// Inverse of `ln_phi` by bisection (`ln_phi` is decreasing).
fn ln_phi_inv(target: f64) -> f64 {
    if target >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ln_phi(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ln_phi(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean LLR of the check-node (`f`) channel: `phi^-1(1 - (1 - phi(m))^2)`.
fn ga_check(m: f64) -> f64 {
    let lp = ln_phi(m);
    let p = lp.exp();
    // 1 - (1-p)^2 = p (2 - p)
    ln_phi_inv(lp + (2.0 - p).ln())
}

/// Per-position mean LLRs of the synthetic channels.
pub fn ga_means(n: usize, design_snr_db: f64) -> Vec<f64> {
    fn rec(n: usize, m: f64, out: &mut Vec<f64>) {
        if n == 1 {
            out.push(m);
        } else {
            rec(n / 2, ga_check(m), out);
            rec(n / 2, 2.0 * m, out);
        }
    }
    let m0 = 4.0 * 10f64.powf(design_snr_db / 10.0);
    let mut out = Vec::with_capacity(n);
    rec(n, m0, &mut out);
    out
}

// ---- SC ----------------------------------------------------------------------

#[inline]
fn f_minsum(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -m
    } else {
        m
    }
}

#[inline]
fn g_op(a: f64, b: f64, s: Bit) -> f64 {
    if s == 0 {
        b + a
    } else {
        b - a
    }
}

#[inline]
fn hard(l: f64) -> Bit {
    (l < 0.0) as Bit
}

/// Recursive successive-cancellation decoding. Returns `(u, x)`.
fn sc_rec(llr: &[f64], frozen: &[bool]) -> (Vec<Bit>, Vec<Bit>) {
    let n = llr.len();
    if n == 1 {
        let u = if frozen[0] { 0 } else { hard(llr[0]) };
        return (vec![u], vec![u]);
    }
    let h = n / 2;
    let (a, b) = llr.split_at(h);
    let left: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| f_minsum(x, y)).collect();
    let (u1, x1) = sc_rec(&left, &frozen[..h]);
    let right: Vec<f64> = a.iter().zip(b).zip(&x1).map(|((&x, &y), &s)| g_op(x, y, s)).collect();
    let (u2, x2) = sc_rec(&right, &frozen[h..]);
    let mut u = u1;
    u.extend(u2);
    let mut x: Vec<Bit> = x1.iter().zip(&x2).map(|(p, q)| p ^ q).collect();
    x.extend(x2);
    (u, x)
}

/// Plain SC decoding (no list, no CRC selection).
pub fn sc_decode(channel_llrs: &[f64], code: &PolarCode) -> Result<DecodeOutcome> {
    if channel_llrs.len() != code.n {
        return usage(format!("expected {} LLRs, got {}", code.n, channel_llrs.len()));
    }
    let (u, _) = sc_rec(channel_llrs, &code.frozen_mask);
    let info = code.gather_info(&u);
    let success = code.crc_ok(&info);
    Ok(DecodeOutcome {
        info_bits: code.strip_crc(info),
        success,
        queries: 0,
        node_visits: 2 * code.n as u64 - 2,
        abandoned: false,
        iterations: 0,
    })
}

// ---- SC-List -------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Path {
    /// `llr[d]` holds the `N >> d` LLRs of the active node at depth `d`
    /// (`d >= 1`; depth 0 is the channel).
    llr: Vec<Vec<f64>>,
    /// Partial-sum codeword of the last completed left child at depth `d`.
    left_cw: Vec<Vec<Bit>>,
    u: Vec<Bit>,
    metric: f64,
}

impl Path {
    fn new(n: usize, depth: usize) -> Self {
        Self {
            llr: (0..=depth).map(|d| vec![0.0; n >> d]).collect(),
            left_cw: (0..=depth).map(|d| vec![0; n >> d]).collect(),
            u: Vec::with_capacity(n),
            metric: 0.0,
        }
    }

    /// Computes the leaf LLR for bit `phi`; returns it and the node count.
    fn leaf_llr(&mut self, channel: &[f64], phi: usize, depth: usize) -> (f64, u64) {
        let start = if phi == 0 { 1 } else { depth - phi.trailing_zeros() as usize };
        for d in start..=depth {
            let m = channel.len() >> d;
            let right = (phi >> (depth - d)) & 1 == 1;
            let (parents, rest) = self.llr.split_at_mut(d);
            let parent: &[f64] = if d == 1 { channel } else { &parents[d - 1] };
            let (a, b) = parent.split_at(m);
            let cur = &mut rest[0];
            if right {
                let s = &self.left_cw[d];
                for i in 0..m {
                    cur[i] = g_op(a[i], b[i], s[i]);
                }
            } else {
                for i in 0..m {
                    cur[i] = f_minsum(a[i], b[i]);
                }
            }
        }
        (self.llr[depth][0], (depth + 1 - start) as u64)
    }

    fn commit(&mut self, phi: usize, bit: Bit, depth: usize) {
        self.u.push(bit);
        let mut cw = vec![bit];
        let mut d = depth;
        while d > 0 {
            if (phi >> (depth - d)) & 1 == 0 {
                self.left_cw[d] = cw;
                return;
            }
            let left = &self.left_cw[d];
            let mut merged: Vec<Bit> = left.iter().zip(&cw).map(|(l, c)| l ^ c).collect();
            merged.extend_from_slice(&cw);
            cw = merged;
            d -= 1;
        }
    }
}

#[inline]
fn penalty(llr: f64, bit: Bit) -> f64 {
    if bit == hard(llr) {
        0.0
    } else {
        llr.abs()
    }
}

/// SC-List decoding with CRC-aided selection.
///
/// Path metrics accumulate `|llr|` whenever a decision disagrees with the
/// leaf LLR sign; paths are kept sorted best-first, ties resolved towards
/// the lower (older) list index and bit 0.
pub fn sc_list_decode(channel_llrs: &[f64], code: &PolarCode, list_size: usize) -> Result<DecodeOutcome> {
    scl_core(channel_llrs, code, list_size, None)
}

pub(crate) fn scl_core(
    channel_llrs: &[f64],
    code: &PolarCode,
    list_size: usize,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<DecodeOutcome> {
    let n = code.n;
    if channel_llrs.len() != n {
        return usage(format!("expected {n} LLRs, got {}", channel_llrs.len()));
    }
    if list_size == 0 {
        return usage("list size must be >= 1");
    }
    let depth = n.trailing_zeros() as usize;
    let mut paths = vec![Path::new(n, depth)];
    let mut visits = 0u64;
    for phi in 0..n {
        let mut leaf = Vec::with_capacity(paths.len());
        for p in paths.iter_mut() {
            let (l, v) = p.leaf_llr(channel_llrs, phi, depth);
            visits += v;
            leaf.push(l);
        }
        if code.frozen_mask[phi] {
            for (p, &l) in paths.iter_mut().zip(&leaf) {
                p.metric += penalty(l, 0);
                p.commit(phi, 0, depth);
            }
            // stable: equal metrics keep their previous rank
            paths.sort_by(|a, b| a.metric.total_cmp(&b.metric));
        } else {
            let mut cands: Vec<(f64, usize, Bit)> = Vec::with_capacity(2 * paths.len());
            for (i, (p, &l)) in paths.iter().zip(&leaf).enumerate() {
                cands.push((p.metric + penalty(l, 0), i, 0));
                cands.push((p.metric + penalty(l, 1), i, 1));
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0));
            cands.truncate(list_size);
            let mut uses = vec![0usize; paths.len()];
            for c in &cands {
                uses[c.1] += 1;
            }
            let mut slots: Vec<Option<Path>> = paths.into_iter().map(Some).collect();
            let mut next = Vec::with_capacity(cands.len());
            for (metric, i, bit) in cands {
                uses[i] -= 1;
                let mut p = if uses[i] == 0 {
                    slots[i].take().expect("path used once more than counted")
                } else {
                    slots[i].as_ref().expect("path present").clone()
                };
                p.metric = metric;
                p.commit(phi, bit, depth);
                next.push(p);
            }
            paths = next;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(paths.iter().map(|p| p.metric).collect());
        }
    }
    let chosen = paths.iter().position(|p| code.crc_ok(&code.gather_info(&p.u)));
    let (idx, success) = match chosen {
        Some(i) => (i, true),
        None => (0, false),
    };
    let info = code.gather_info(&paths[idx].u);
    Ok(DecodeOutcome {
        info_bits: code.strip_crc(info),
        success,
        queries: 0,
        node_visits: visits,
        abandoned: false,
        iterations: 0,
    })
}

// ---- membership ------------------------------------------------------------------

/// Joint frozen-bit + CRC codebook membership of a CA-polar code.
#[derive(Debug, Clone)]
pub struct PolarMembership {
    code: PolarCode,
    checks: Option<ParityChecks>,
}

impl PolarMembership {
    fn syndrome_bits(code: &PolarCode, word: &[Bit]) -> Vec<Bit> {
        let mut u = word.to_vec();
        polar_transform(&mut u);
        let mut s: Vec<Bit> = code.frozen.iter().map(|&i| u[i]).collect();
        if let Some(p) = code.crc {
            let info = code.gather_info(&u);
            let (payload, crc) = info.split_at(code.payload_len());
            let expect = super::crc::crc_remainder(payload, p);
            s.extend(expect.iter().zip(crc).map(|(a, b)| a ^ b));
        }
        s
    }
}

/// Membership predicate for a CA-polar code: the inverse transform of the
/// word has zeros on all frozen positions and its unfrozen bits pass the CRC.
pub fn polar_membership(code: &PolarCode) -> PolarMembership {
    let checks = ParityChecks::from_linear_map(code.n, |w| PolarMembership::syndrome_bits(code, w));
    PolarMembership { code: code.clone(), checks }
}

impl Membership for PolarMembership {
    fn len(&self) -> usize {
        self.code.n
    }

    fn contains(&self, word: &[Bit]) -> bool {
        Self::syndrome_bits(&self.code, word).iter().all(|&b| b == 0)
    }

    fn parity_checks(&self) -> Option<&ParityChecks> {
        self.checks.as_ref()
    }

    fn message(&self, codeword: &[Bit]) -> Vec<Bit> {
        let mut u = codeword.to_vec();
        polar_transform(&mut u);
        self.code.strip_crc(self.code.gather_info(&u))
    }
}
