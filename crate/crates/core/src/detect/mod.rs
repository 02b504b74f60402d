//! MIMO detectors and pseudo-soft information (PSI).
//!
//! Every detector is split in two phases. [`PreparedDetector::prepare`] does
//! the per-channel work (decomposition, filters, PSI) once per coherence
//! block; [`PreparedDetector::detect`] handles one received vector. The
//! `op_count` of a [`DetectionResult`] covers the per-vector phase only and
//! counts complex multiply-accumulates (MACs); preparation cost is reported
//! separately in [`PreparedDetector::prep_ops`].

mod decomp;
mod ssd;

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use decomp::{check_full_rank, psi_from_r, qrd, wrd, Decomposition, RANK_TOLERANCE};
pub use ssd::ml_detect;

use crate::phymap::{qpsk_hard_demodulate, qpsk_slice, QPSK_POINTS};
use crate::{Bit, Complex, Error, Result};

/// Detector output for one received vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub hard_symbols: Vec<Complex>,
    /// Two bits per layer.
    pub hard_bits: Vec<Bit>,
    /// Post-detection SNR per layer (linear).
    pub psi_per_layer: Vec<f64>,
    /// Complex MACs spent on this vector.
    pub op_count: u64,
    /// MACs on the longest dependency chain when independent branches
    /// (candidates, groups, layers) run in parallel.
    pub critical_path: u64,
    /// Per-bit LLRs (positive favours 0), when soft output was requested.
    pub llrs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Zf,
    Mmse,
    Cd,
    Pcd,
    Ssd,
}

impl DetectorKind {
    pub fn supports_soft(self) -> bool {
        matches!(self, Self::Zf | Self::Mmse | Self::Ssd)
    }
}

/// Root layer for chase detection: the column of largest norm.
pub fn select_root_layer(h: &DMatrix<Complex>) -> usize {
    let mut best = 0;
    let mut best_norm = f64::NEG_INFINITY;
    for (j, col) in h.column_iter().enumerate() {
        let n = col.norm_squared();
        if n > best_norm {
            best_norm = n;
            best = j;
        }
    }
    best
}

fn bits_of(symbols: &[Complex]) -> Vec<Bit> {
    symbols.iter().flat_map(|s| qpsk_hard_demodulate(*s)).collect()
}

/// Gaussian LLRs of Gray QPSK for an unbiased estimate with SNR `psi`.
fn gaussian_llrs(estimates: &[Complex], psi: &[f64]) -> Vec<f64> {
    estimates
        .iter()
        .zip(psi)
        .flat_map(|(x, p)| [2.0 * SQRT_2 * p * x.re, 2.0 * SQRT_2 * p * x.im])
        .collect()
}

#[derive(Debug, Clone)]
struct Linear {
    /// `M_t x M_r` equalizer.
    filter: DMatrix<Complex>,
    /// Per-layer gain of the equalized symbol (1 for ZF).
    bias: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Chase {
    decomp: Decomposition,
    h: DMatrix<Complex>,
    /// Column order used by the decomposition; root last for CD.
    perm: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Engine {
    Linear(Linear),
    Chase(Chase),
    PunctChase(Decomposition),
    Ssd(ssd::Subspace),
}

/// A detector bound to one channel matrix and noise variance.
#[derive(Debug, Clone)]
pub struct PreparedDetector {
    kind: DetectorKind,
    engine: Engine,
    psi: Vec<f64>,
    prep_ops: u64,
    mr: usize,
    mt: usize,
}

impl PreparedDetector {
    /// Builds the detector for `h`. `root_layer` is used by CD/PCD (the
    /// largest-norm column when `None`); `partition` by SSD (one group per
    /// layer pair when `None`).
    pub fn prepare(
        kind: DetectorKind,
        h: &DMatrix<Complex>,
        noise_variance: f64,
        root_layer: Option<usize>,
        partition: Option<&[Vec<usize>]>,
    ) -> Result<Self> {
        if !(noise_variance > 0.0) && kind == DetectorKind::Mmse {
            return Err(Error::Domain("MMSE needs a positive noise variance".into()));
        }
        let (mr, mt) = h.shape();
        let (engine, psi, prep_ops) = match kind {
            DetectorKind::Zf | DetectorKind::Mmse => {
                if kind == DetectorKind::Zf {
                    check_full_rank(h)?;
                }
                // QR of H (stacked on sigma*I for MMSE) keeps the conditioning
                // of H instead of squaring it through the Gram matrix.
                let aug = if kind == DetectorKind::Mmse {
                    let mut a = DMatrix::<Complex>::zeros(mr + mt, mt);
                    a.rows_mut(0, mr).copy_from(h);
                    a.rows_mut(mr, mt).fill_diagonal(Complex::new(noise_variance.sqrt(), 0.0));
                    a
                } else {
                    h.clone()
                };
                let qr = aug.qr();
                let r_inv = qr
                    .r()
                    .solve_upper_triangular(&DMatrix::identity(mt, mt))
                    .ok_or_else(|| Error::SingularChannel("R factor not invertible".into()))?;
                let filter = &r_inv * qr.q().rows(0, mr).adjoint();
                // diag((H^H H + reg I)^-1) = squared row norms of R^-1
                let diag: Vec<f64> = (0..mt).map(|i| r_inv.row(i).norm_squared()).collect();
                let (psi, bias) = if kind == DetectorKind::Zf {
                    (diag.iter().map(|d| 1.0 / (noise_variance * d)).collect(), vec![1.0; mt])
                } else {
                    let gain = &filter * h;
                    (
                        diag.iter().map(|d| 1.0 / (noise_variance * d) - 1.0).collect(),
                        (0..mt).map(|i| gain[(i, i)].re).collect(),
                    )
                };
                let ops = (mr * mt * mt + mt * mt * mt + mt * mt * mr) as u64;
                (Engine::Linear(Linear { filter, bias }), psi, ops)
            }
            DetectorKind::Cd => {
                let root = root_layer.unwrap_or_else(|| select_root_layer(h));
                if root >= mt {
                    return Err(Error::Usage(format!("root layer {root} out of range")));
                }
                let mut perm: Vec<usize> = (0..mt).filter(|&j| j != root).collect();
                perm.push(root);
                let hp = h.select_columns(&perm);
                let decomp = qrd(&hp)?;
                let psi_perm = psi_from_r(&decomp, noise_variance);
                let mut psi = vec![0.0; mt];
                for (k, &layer) in perm.iter().enumerate() {
                    psi[layer] = psi_perm[k];
                }
                let ops = decomp.op_count;
                (Engine::Chase(Chase { decomp, h: h.clone(), perm }), psi, ops)
            }
            DetectorKind::Pcd => {
                let root = root_layer.unwrap_or_else(|| select_root_layer(h));
                let decomp = wrd(h, root)?;
                let psi = psi_from_r(&decomp, noise_variance);
                let ops = decomp.op_count;
                (Engine::PunctChase(decomp), psi, ops)
            }
            DetectorKind::Ssd => {
                let default_partition;
                let partition = match partition {
                    Some(p) => p,
                    None => {
                        default_partition = ssd::pairs_partition(mt);
                        &default_partition
                    }
                };
                let sub = ssd::Subspace::prepare(h, partition)?;
                let psi = sub.psi(noise_variance);
                let ops = sub.prep_ops;
                (Engine::Ssd(sub), psi, ops)
            }
        };
        debug_assert!(psi.iter().all(|p| p.is_finite() && *p >= -1e-12));
        let psi = psi.into_iter().map(|p: f64| p.max(0.0)).collect();
        Ok(Self { kind, engine, psi, prep_ops, mr, mt })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn prep_ops(&self) -> u64 {
        self.prep_ops
    }

    /// Detects one received vector. `noise_variance` is needed for soft
    /// output only.
    pub fn detect(&self, y: &[Complex], noise_variance: f64, soft: bool) -> Result<DetectionResult> {
        if y.len() != self.mr {
            return Err(Error::Usage(format!("received vector has {} entries, expected {}", y.len(), self.mr)));
        }
        if soft && !self.kind.supports_soft() {
            return Err(Error::Usage(format!("{:?} detection has no soft output", self.kind)));
        }
        let (mr, mt) = (self.mr as u64, self.mt as u64);
        let mut res = match &self.engine {
            Engine::Linear(lin) => {
                let est: Vec<Complex> = (0..self.mt)
                    .map(|i| (0..self.mr).map(|k| lin.filter[(i, k)] * y[k]).sum())
                    .collect();
                let hard: Vec<Complex> = est.iter().map(|s| qpsk_slice(*s)).collect();
                let llrs = soft.then(|| {
                    let unbiased: Vec<Complex> = est.iter().zip(&lin.bias).map(|(e, b)| e / b).collect();
                    gaussian_llrs(&unbiased, &self.psi)
                });
                DetectionResult {
                    hard_bits: bits_of(&hard),
                    hard_symbols: hard,
                    psi_per_layer: Vec::new(),
                    op_count: mr * mt,
                    critical_path: mr,
                    llrs,
                }
            }
            Engine::Chase(ch) => chase_search(ch, y),
            Engine::PunctChase(d) => punctured_search(d, y),
            Engine::Ssd(sub) => sub.detect(y, noise_variance, soft),
        };
        res.psi_per_layer = self.psi.clone();
        Ok(res)
    }
}

/// CD: exhaustive search over the root symbol, SIC over the remaining
/// layers, candidate chosen by `||y - H x||^2`.
fn chase_search(ch: &Chase, y: &[Complex]) -> DetectionResult {
    let q = &ch.decomp.q_factor;
    let r = &ch.decomp.r_factor;
    let (mr, mt) = q.shape();
    let z: Vec<Complex> = (0..mt).map(|i| (0..mr).map(|k| q[(k, i)].conj() * y[k]).sum()).collect();
    let mut ops = (mr * mt) as u64;
    let mut best = (f64::INFINITY, vec![Complex::new(0.0, 0.0); mt]);
    let mut branch_ops = 0u64;
    for &root in &QPSK_POINTS {
        let mut xp = vec![Complex::new(0.0, 0.0); mt];
        xp[mt - 1] = root;
        let mut cand_ops = 0u64;
        for i in (0..mt - 1).rev() {
            let mut u = z[i];
            for j in i + 1..mt {
                u -= r[(i, j)] * xp[j];
            }
            cand_ops += (mt - 1 - i) as u64;
            // R(i,i) is real positive, so slicing u slices u / R(i,i)
            xp[i] = qpsk_slice(u);
        }
        // undo the column permutation and evaluate the true metric
        let mut x = vec![Complex::new(0.0, 0.0); mt];
        for (k, &layer) in ch.perm.iter().enumerate() {
            x[layer] = xp[k];
        }
        let mut metric = 0.0;
        for i in 0..mr {
            let mut e = y[i];
            for j in 0..mt {
                e -= ch.h[(i, j)] * x[j];
            }
            metric += e.norm_sqr();
        }
        cand_ops += (mr * mt + mr) as u64;
        ops += cand_ops;
        branch_ops = branch_ops.max(cand_ops);
        if metric < best.0 {
            best = (metric, x);
        }
    }
    let x = best.1;
    DetectionResult {
        hard_bits: bits_of(&x),
        hard_symbols: x,
        psi_per_layer: Vec::new(),
        op_count: ops,
        critical_path: mr as u64 + branch_ops,
        llrs: None,
    }
}

/// PCD: per root candidate every other layer is sliced independently from
/// the punctured system; candidate chosen by the punctured-domain residual.
fn punctured_search(d: &Decomposition, y: &[Complex]) -> DetectionResult {
    let w = &d.q_factor;
    let r = &d.r_factor;
    let root = d.root_layer;
    let (mr, mt) = w.shape();
    let z: Vec<Complex> = (0..mt).map(|i| (0..mr).map(|k| w[(k, i)].conj() * y[k]).sum()).collect();
    let mut ops = (mr * mt) as u64;
    let mut best = (f64::INFINITY, vec![Complex::new(0.0, 0.0); mt]);
    for &cand in &QPSK_POINTS {
        let mut x = vec![Complex::new(0.0, 0.0); mt];
        x[root] = cand;
        let e_root = z[root] - r[(root, root)] * cand;
        let mut metric = e_root.norm_sqr();
        for i in (0..mt).filter(|&i| i != root) {
            let u = z[i] - r[(i, root)] * cand;
            let xi = qpsk_slice(u);
            metric += (u - r[(i, i)] * xi).norm_sqr();
            x[i] = xi;
        }
        ops += 2 + 3 * (mt as u64 - 1);
        if metric < best.0 {
            best = (metric, x);
        }
    }
    let x = best.1;
    DetectionResult {
        hard_bits: bits_of(&x),
        hard_symbols: x,
        psi_per_layer: Vec::new(),
        op_count: ops,
        // independent layers: root residual plus one layer's three MACs
        critical_path: mr as u64 + 2 + 3,
        llrs: None,
    }
}

fn one_shot(kind: DetectorKind, h: &DMatrix<Complex>, y: &[Complex], sigma2: f64, root: Option<usize>) -> Result<DetectionResult> {
    PreparedDetector::prepare(kind, h, sigma2, root, None)?.detect(y, sigma2, false)
}

pub fn zf_detect(h: &DMatrix<Complex>, y: &[Complex], noise_variance: f64) -> Result<DetectionResult> {
    one_shot(DetectorKind::Zf, h, y, noise_variance, None)
}

pub fn mmse_detect(h: &DMatrix<Complex>, y: &[Complex], noise_variance: f64) -> Result<DetectionResult> {
    one_shot(DetectorKind::Mmse, h, y, noise_variance, None)
}

pub fn chase_detect(h: &DMatrix<Complex>, y: &[Complex], noise_variance: f64, root_layer: usize) -> Result<DetectionResult> {
    one_shot(DetectorKind::Cd, h, y, noise_variance, Some(root_layer))
}

pub fn punctured_chase_detect(
    h: &DMatrix<Complex>,
    y: &[Complex],
    noise_variance: f64,
    root_layer: usize,
) -> Result<DetectionResult> {
    one_shot(DetectorKind::Pcd, h, y, noise_variance, Some(root_layer))
}

pub fn ssd_detect(
    h: &DMatrix<Complex>,
    y: &[Complex],
    noise_variance: f64,
    partition: &[Vec<usize>],
) -> Result<DetectionResult> {
    PreparedDetector::prepare(DetectorKind::Ssd, h, noise_variance, None, Some(partition))?.detect(y, noise_variance, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    fn random_h(mr: usize, mt: usize, seed: u64) -> DMatrix<Complex> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(mr, mt, |_, _| {
            Complex::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)) * std::f64::consts::FRAC_1_SQRT_2
        })
    }

    fn random_x(mt: usize, seed: u64) -> Vec<Complex> {
        let mut rng = rng_from_seed(seed);
        (0..mt).map(|_| QPSK_POINTS[rng.random_range(0..4)]).collect()
    }

    fn apply(h: &DMatrix<Complex>, x: &[Complex]) -> Vec<Complex> {
        (0..h.nrows()).map(|i| (0..h.ncols()).map(|j| h[(i, j)] * x[j]).sum()).collect()
    }

    #[test]
    fn zf_psi_closed_forms() {
        let eye = DMatrix::<Complex>::identity(3, 3);
        let r = zf_detect(&eye, &[c(1.0), c(-1.0), c(1.0)], 0.5).unwrap();
        assert_eq!(r.psi_per_layer, vec![2.0, 2.0, 2.0]);
        let h = DMatrix::from_row_slice(2, 2, &[c(2.0), c(0.0), c(0.0), c(1.0)]);
        let r = zf_detect(&h, &[c(1.0), c(1.0)], 1.0).unwrap();
        assert_relative_eq!(r.psi_per_layer[0], 4.0, max_relative = 1e-12);
        assert_relative_eq!(r.psi_per_layer[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn mmse_psi_identity_and_zf_limit() {
        let eye = DMatrix::<Complex>::identity(2, 2);
        let r = mmse_detect(&eye, &[c(1.0), c(1.0)], 1.0).unwrap();
        for p in &r.psi_per_layer {
            assert_relative_eq!(*p, 1.0, max_relative = 1e-12);
        }
        let h = random_h(4, 4, 3) + DMatrix::identity(4, 4) * c(2.0);
        let y = vec![c(0.0); 4];
        let zf = zf_detect(&h, &y, 1e-8).unwrap();
        let mm = mmse_detect(&h, &y, 1e-8).unwrap();
        for (a, b) in zf.psi_per_layer.iter().zip(&mm.psi_per_layer) {
            assert!((a - b).abs() / a < 1e-3);
        }
    }

    #[test]
    fn every_detector_is_exact_without_noise() {
        for seed in 0..30 {
            let h = random_h(4, 4, seed) + DMatrix::identity(4, 4) * c(1.5);
            let x = random_x(4, 1000 + seed);
            let y = apply(&h, &x);
            assert_eq!(zf_detect(&h, &y, 0.1).unwrap().hard_symbols, x);
            assert_eq!(mmse_detect(&h, &y, 1e-6).unwrap().hard_symbols, x);
            for root in 0..4 {
                assert_eq!(chase_detect(&h, &y, 0.1, root).unwrap().hard_symbols, x);
                assert_eq!(punctured_chase_detect(&h, &y, 0.1, root).unwrap().hard_symbols, x);
            }
            for part in [vec![vec![0, 1], vec![2, 3]], vec![vec![0], vec![1, 2, 3]], vec![vec![0, 1, 2, 3]]] {
                assert_eq!(ssd_detect(&h, &y, 0.1, &part).unwrap().hard_symbols, x);
            }
        }
    }

    #[test]
    fn chase_degenerate_sizes() {
        // 1x1: ML slicing of y / h
        let h = DMatrix::from_element(1, 1, Complex::new(0.0, 2.0));
        let y = [Complex::new(0.3, 0.1)];
        let r = chase_detect(&h, &y, 1.0, 0).unwrap();
        assert_eq!(r.hard_symbols[0], qpsk_slice(y[0] / h[(0, 0)]));
        // H = I: per-layer slicing, equal to ZF
        let eye = DMatrix::<Complex>::identity(3, 3);
        let y = [Complex::new(0.2, -0.4), Complex::new(-1.0, 0.1), Complex::new(-0.3, -0.3)];
        let zf = zf_detect(&eye, &y, 1.0).unwrap();
        assert_eq!(chase_detect(&eye, &y, 1.0, 1).unwrap().hard_symbols, zf.hard_symbols);
        assert_eq!(punctured_chase_detect(&eye, &y, 1.0, 2).unwrap().hard_symbols, zf.hard_symbols);
    }

    #[test]
    fn pcd_equals_cd_for_two_layers() {
        let mut rng = rng_from_seed(77);
        for seed in 0..200 {
            let h = random_h(2, 2, seed);
            let y: Vec<Complex> = (0..2)
                .map(|_| Complex::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
                .collect();
            for root in 0..2 {
                let cd = chase_detect(&h, &y, 0.5, root).unwrap();
                let pcd = punctured_chase_detect(&h, &y, 0.5, root).unwrap();
                assert_eq!(cd.hard_symbols, pcd.hard_symbols, "seed {seed} root {root}");
            }
        }
    }

    #[test]
    fn pcd_cheaper_than_cd_for_three_or_more_layers() {
        for m in 3..=6 {
            let h = random_h(m, m, m as u64);
            let y = apply(&h, &random_x(m, 5));
            let cd = chase_detect(&h, &y, 0.1, 0).unwrap();
            let pcd = punctured_chase_detect(&h, &y, 0.1, 0).unwrap();
            assert!(pcd.op_count < cd.op_count, "M={m}: {} vs {}", pcd.op_count, cd.op_count);
        }
        let h = random_h(4, 4, 11);
        let y = apply(&h, &random_x(4, 6));
        let ratio = punctured_chase_detect(&h, &y, 0.1, 0).unwrap().op_count as f64
            / chase_detect(&h, &y, 0.1, 0).unwrap().op_count as f64;
        assert!(ratio <= 0.7, "ratio {ratio}");
    }

    #[test]
    fn op_count_depends_only_on_dimensions() {
        let a = chase_detect(&random_h(4, 4, 1), &random_x(4, 1), 0.1, 2).unwrap().op_count;
        let b = chase_detect(&random_h(4, 4, 2), &random_x(4, 2), 0.3, 0).unwrap().op_count;
        assert_eq!(a, b);
    }

    #[test]
    fn zf_psi_scales_with_alpha_squared() {
        let h = random_h(4, 4, 8);
        let y = vec![c(0.0); 4];
        let a = zf_detect(&h, &y, 1.0).unwrap().psi_per_layer;
        let b = zf_detect(&(h * c(2.5)), &y, 1.0).unwrap().psi_per_layer;
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(6.25 * x, *y, max_relative = 1e-10);
        }
    }

    #[test]
    fn soft_output_rules() {
        let h = random_h(4, 4, 4);
        let y = apply(&h, &random_x(4, 4));
        for kind in [DetectorKind::Cd, DetectorKind::Pcd] {
            let d = PreparedDetector::prepare(kind, &h, 0.1, None, None).unwrap();
            assert!(d.detect(&y, 0.1, true).is_err());
        }
        let d = PreparedDetector::prepare(DetectorKind::Zf, &h, 0.1, None, None).unwrap();
        let r = d.detect(&y, 0.1, true).unwrap();
        let llrs = r.llrs.unwrap();
        for (l, b) in llrs.iter().zip(&r.hard_bits) {
            assert_eq!(*l < 0.0, *b == 1);
        }
    }

    #[test]
    fn root_selection_largest_column() {
        let h = DMatrix::from_row_slice(2, 3, &[c(1.0), c(0.0), c(3.0), c(0.0), c(2.0), c(0.0)]);
        assert_eq!(select_root_layer(&h), 2);
    }
}
