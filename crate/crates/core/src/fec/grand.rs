//! Guessing random additive noise decoding (GRAND).
//!
//! Putative noise patterns are tested in order of decreasing likelihood and
//! the first one that turns the hard decision into a codeword wins. Two
//! orders are provided: Hamming weight (hard decisions, no reliability) and
//! the ORBGRAND logistic-weight order over reliability ranks.

use serde::{Deserialize, Serialize};

use super::DecodeOutcome;
use crate::{Bit, Result};

/// Default query budget before abandoning.
pub const DEFAULT_MAX_QUERIES: u64 = 1 << 20;

/// A codebook membership test.
pub trait Membership {
    /// Codeword length.
    fn len(&self) -> usize;

    fn contains(&self, word: &[Bit]) -> bool;

    /// Linear parity checks, when the code is linear and small enough for
    /// the incremental-syndrome fast path.
    fn parity_checks(&self) -> Option<&ParityChecks> {
        None
    }

    /// Message bits carried by a codeword (the word itself by default).
    fn message(&self, codeword: &[Bit]) -> Vec<Bit> {
        codeword.to_vec()
    }
}

/// Columns of a parity-check matrix packed into `u128` syndromes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityChecks {
    columns: Vec<u128>,
    rows: usize,
}

impl ParityChecks {
    /// Builds the checks from a linear syndrome map, evaluated on unit
    /// vectors. `None` if the syndrome is wider than 128 bits.
    pub fn from_linear_map(n: usize, syndrome: impl Fn(&[Bit]) -> Vec<Bit>) -> Option<Self> {
        let mut columns = Vec::with_capacity(n);
        let mut rows = 0;
        let mut e = vec![0; n];
        for i in 0..n {
            e[i] = 1;
            let s = syndrome(&e);
            e[i] = 0;
            rows = s.len();
            if rows > 128 {
                return None;
            }
            columns.push(s.iter().enumerate().fold(0u128, |acc, (k, &b)| acc | ((b as u128) << k)));
        }
        Some(Self { columns, rows })
    }

    /// From explicit parity-check rows.
    pub fn from_rows(rows: &[Vec<Bit>]) -> Option<Self> {
        let n = rows.first().map_or(0, Vec::len);
        Self::from_linear_map(n, |w| {
            rows.iter().map(|r| r.iter().zip(w).fold(0, |acc, (a, b)| acc ^ (a & b))).collect()
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column(&self, i: usize) -> u128 {
        self.columns[i]
    }

    pub fn syndrome(&self, word: &[Bit]) -> u128 {
        word.iter().zip(&self.columns).filter(|(b, _)| **b == 1).fold(0, |acc, (_, c)| acc ^ c)
    }
}

/// A linear code given only by its parity checks.
#[derive(Debug, Clone)]
pub struct ParityCheckCode {
    checks: ParityChecks,
    message_positions: Vec<usize>,
}

impl ParityCheckCode {
    /// `message_positions` lists the systematic positions returned by
    /// [`Membership::message`].
    pub fn new(rows: &[Vec<Bit>], message_positions: Vec<usize>) -> Option<Self> {
        Some(Self { checks: ParityChecks::from_rows(rows)?, message_positions })
    }
}

impl Membership for ParityCheckCode {
    fn len(&self) -> usize {
        self.checks.columns.len()
    }

    fn contains(&self, word: &[Bit]) -> bool {
        self.checks.syndrome(word) == 0
    }

    fn parity_checks(&self) -> Option<&ParityChecks> {
        Some(&self.checks)
    }

    fn message(&self, codeword: &[Bit]) -> Vec<Bit> {
        self.message_positions.iter().map(|&i| codeword[i]).collect()
    }
}

/// Origin of per-bit reliabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReliabilityKind {
    HardUniform,
    Psi,
    Soft,
}

/// Nonnegative per-bit reliabilities (larger is more reliable).
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityVector {
    pub values: Vec<f64>,
    pub kind: ReliabilityKind,
}

impl ReliabilityVector {
    pub fn hard_uniform(n: usize) -> Self {
        Self { values: vec![1.0; n], kind: ReliabilityKind::HardUniform }
    }

    pub fn psi(values: Vec<f64>) -> Self {
        Self { values, kind: ReliabilityKind::Psi }
    }

    pub fn soft(llrs: &[f64]) -> Self {
        Self { values: llrs.iter().map(|l| l.abs()).collect(), kind: ReliabilityKind::Soft }
    }

    /// True when all values are equal, so no bit is distinguishable.
    pub fn is_uniform(&self) -> bool {
        self.kind == ReliabilityKind::HardUniform || self.values.windows(2).all(|w| w[0] == w[1])
    }

    /// Bit positions from least to most reliable; ties keep index order.
    pub fn ascending_positions(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        idx
    }
}

/// Noise-pattern order used by [`grand_decode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternOrder {
    /// Hamming weight for uniform reliabilities, logistic weight otherwise.
    Auto,
    HammingWeight,
    LogisticWeight,
}

/// Patterns in nondecreasing Hamming weight; equal weights in lexicographic
/// order of the flipped positions.
#[derive(Debug, Clone)]
pub struct HammingSchedule {
    n: usize,
    current: Option<Vec<usize>>,
}

impl HammingSchedule {
    pub fn new(n: usize) -> Self {
        Self { n, current: None }
    }
}

impl Iterator for HammingSchedule {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let n = self.n;
        let next = match self.current.take() {
            None => Vec::new(),
            Some(mut c) => {
                let w = c.len();
                // rightmost position that can still advance
                let mut i = w;
                while i > 0 && c[i - 1] == n - w + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    if w == n {
                        return None;
                    }
                    (0..w + 1).collect()
                } else {
                    c[i - 1] += 1;
                    for j in i..w {
                        c[j] = c[j - 1] + 1;
                    }
                    c
                }
            }
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

/// ORBGRAND schedule: rank sets (1-based ranks, 1 = least reliable) in
/// nondecreasing logistic weight (sum of ranks); equal weights in
/// lexicographic order of the ascending rank sets.
#[derive(Debug, Clone)]
pub struct LogisticSchedule {
    n: usize,
    weight: usize,
    parts: Option<Vec<usize>>,
    done: bool,
}

impl LogisticSchedule {
    pub fn new(n: usize) -> Self {
        Self { n, weight: 0, parts: None, done: false }
    }

    fn max_weight(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Can `rem` be written as a sum of distinct parts in `(last, n]`?
    fn feasible(&self, last: usize, rem: usize) -> bool {
        if rem == 0 {
            return true;
        }
        let avail = self.n.saturating_sub(last);
        let mut k = 1;
        while k <= avail {
            let max_k = k * self.n - k * (k - 1) / 2;
            if max_k >= rem {
                let min_k = k * last + k * (k + 1) / 2;
                return min_k <= rem;
            }
            k += 1;
        }
        false
    }

    /// Lexicographically smallest completion of `parts` to weight `total`.
    fn complete(&self, parts: &mut Vec<usize>, mut rem: usize) -> bool {
        while rem > 0 {
            let last = parts.last().copied().unwrap_or(0);
            let mut v = last + 1;
            loop {
                if v > self.n || v > rem {
                    return false;
                }
                if self.feasible(v, rem - v) {
                    break;
                }
                v += 1;
            }
            parts.push(v);
            rem -= v;
        }
        true
    }

    fn first_of_weight(&self, w: usize) -> Option<Vec<usize>> {
        let mut parts = Vec::new();
        self.complete(&mut parts, w).then_some(parts)
    }

    fn successor(&self, parts: &[usize]) -> Option<Vec<usize>> {
        let total: usize = parts.iter().sum();
        for i in (0..parts.len()).rev() {
            let prefix = &parts[..i];
            let used: usize = prefix.iter().sum();
            let rem = total - used;
            let lo = prefix.last().copied().unwrap_or(0);
            let mut v = parts[i] + 1;
            while v <= self.n && v <= rem && v > lo {
                if self.feasible(v, rem - v) {
                    let mut next = prefix.to_vec();
                    next.push(v);
                    if self.complete(&mut next, rem - v) {
                        return Some(next);
                    }
                }
                v += 1;
            }
        }
        None
    }
}

impl Iterator for LogisticSchedule {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let next = match self.parts.as_ref().and_then(|p| self.successor(p)) {
            Some(p) => p,
            None => {
                if self.parts.is_some() {
                    self.weight += 1;
                }
                loop {
                    if self.weight > self.max_weight() {
                        self.done = true;
                        return None;
                    }
                    if let Some(p) = self.first_of_weight(self.weight) {
                        break p;
                    }
                    self.weight += 1;
                }
            }
        };
        self.parts = Some(next.clone());
        Some(next)
    }
}

/// ORBGRAND pattern stream over bit positions: each item lists the
/// positions to flip.
pub fn orbgrand_schedule(reliability: &[f64]) -> impl Iterator<Item = Vec<usize>> {
    let rel = ReliabilityVector { values: reliability.to_vec(), kind: ReliabilityKind::Soft };
    let order = rel.ascending_positions();
    LogisticSchedule::new(reliability.len()).map(move |ranks| ranks.iter().map(|&r| order[r - 1]).collect())
}

/// GRAND decoding of `hard_bits`.
///
/// Queries count tested patterns, the all-zero pattern being query 1. When
/// the budget runs out the outcome is abandoned and carries the message
/// read from the uncorrected hard bits.
pub fn grand_decode(
    hard_bits: &[Bit],
    reliability: &ReliabilityVector,
    membership: &dyn Membership,
    max_queries: u64,
    order: PatternOrder,
) -> Result<DecodeOutcome> {
    let n = hard_bits.len();
    if reliability.values.len() != n || membership.len() != n {
        return crate::error::usage("GRAND input lengths differ");
    }
    let use_hamming = match order {
        PatternOrder::HammingWeight => true,
        PatternOrder::LogisticWeight => false,
        PatternOrder::Auto => reliability.is_uniform(),
    };
    let positions = if use_hamming { (0..n).collect() } else { reliability.ascending_positions() };
    let patterns: Box<dyn Iterator<Item = Vec<usize>>> = if use_hamming {
        Box::new(HammingSchedule::new(n))
    } else {
        Box::new(LogisticSchedule::new(n).map(|ranks| ranks.into_iter().map(|r| r - 1).collect()))
    };
    let fast = membership.parity_checks();
    let s0 = fast.map(|c| c.syndrome(hard_bits));
    let mut word = hard_bits.to_vec();
    let mut queries = 0u64;
    for pattern in patterns {
        if queries >= max_queries {
            break;
        }
        queries += 1;
        let hit = match (fast, s0) {
            (Some(c), Some(s)) => pattern.iter().fold(s, |acc, &k| acc ^ c.column(positions[k])) == 0,
            _ => {
                for &k in &pattern {
                    word[positions[k]] ^= 1;
                }
                let ok = membership.contains(&word);
                for &k in &pattern {
                    word[positions[k]] ^= 1;
                }
                ok
            }
        };
        if hit {
            for &k in &pattern {
                word[positions[k]] ^= 1;
            }
            return Ok(DecodeOutcome {
                info_bits: membership.message(&word),
                success: true,
                queries,
                node_visits: 0,
                abandoned: false,
                iterations: 0,
            });
        }
    }
    Ok(DecodeOutcome {
        info_bits: membership.message(hard_bits),
        success: false,
        queries,
        node_visits: 0,
        abandoned: true,
        iterations: 0,
    })
}
