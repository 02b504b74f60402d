//! Subspace detection: the channel is punctured into independent layer
//! groups by projecting out all other groups, then each group is detected
//! by exhaustive ML over its own layers.

use nalgebra::DMatrix;

use super::decomp::{check_full_rank, gram_schmidt, psi_from_r, qrd};
use super::{bits_of, DetectionResult};
use crate::phymap::QPSK_POINTS;
use crate::{Complex, Error, Result};

/// Layers split into consecutive pairs (the last group may be a singleton).
pub(crate) fn pairs_partition(layers: usize) -> Vec<Vec<usize>> {
    (0..layers).collect::<Vec<_>>().chunks(2).map(<[usize]>::to_vec).collect()
}

#[derive(Debug, Clone)]
struct Group {
    layers: Vec<usize>,
    /// Rows are the conjugated basis vectors, so `proj * y` is `U^H y`.
    proj: DMatrix<Complex>,
    eff: DMatrix<Complex>,
}

#[derive(Debug, Clone)]
pub(crate) struct Subspace {
    groups: Vec<Group>,
    mt: usize,
    pub(crate) prep_ops: u64,
}

fn validate_partition(mt: usize, partition: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; mt];
    for g in partition {
        if g.is_empty() {
            return Err(Error::Usage("empty SSD group".into()));
        }
        for &l in g {
            if l >= mt || seen[l] {
                return Err(Error::Usage(format!("SSD partition must cover 0..{mt} disjointly")));
            }
            seen[l] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Usage(format!("SSD partition must cover 0..{mt} disjointly")));
    }
    Ok(())
}

impl Subspace {
    pub(crate) fn prepare(h: &DMatrix<Complex>, partition: &[Vec<usize>]) -> Result<Self> {
        let (mr, mt) = h.shape();
        check_full_rank(h)?;
        validate_partition(mt, partition)?;
        let mut prep_ops = 0u64;
        let mut groups = Vec::with_capacity(partition.len());
        for layers in partition {
            let others: Vec<usize> = (0..mt).filter(|j| !layers.contains(j)).collect();
            // Orthonormalize the interfering columns, then extend with the
            // canonical basis; the extension spans their orthogonal complement.
            let mut vecs: Vec<Vec<Complex>> =
                others.iter().map(|&j| h.column(j).iter().copied().collect()).collect();
            let (interf, _, ops) = gram_schmidt(&vecs);
            prep_ops += ops;
            vecs = interf;
            let mut basis = Vec::new();
            for e in 0..mr {
                let mut v: Vec<Complex> = (0..mr).map(|k| Complex::new((k == e) as u8 as f64, 0.0)).collect();
                for q in vecs.iter() {
                    let c: Complex = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (vk, qk) in v.iter_mut().zip(q) {
                        *vk -= c * qk;
                    }
                }
                let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                prep_ops += (2 * mr * vecs.len() + mr) as u64;
                if n > 1e-8 {
                    let u: Vec<Complex> = v.iter().map(|x| x / n).collect();
                    vecs.push(u.clone());
                    basis.push(u);
                }
                if basis.len() == mr - others.len() {
                    break;
                }
            }
            let dim = basis.len();
            if dim < layers.len() {
                return Err(Error::SingularChannel("projection leaves too few dimensions".into()));
            }
            let proj = DMatrix::from_fn(dim, mr, |i, k| basis[i][k].conj());
            let eff = &proj * h.select_columns(layers);
            prep_ops += (dim * mr * layers.len()) as u64;
            check_full_rank(&eff)?;
            groups.push(Group { layers: layers.clone(), proj, eff });
        }
        Ok(Self { groups, mt, prep_ops })
    }

    pub(crate) fn psi(&self, noise_variance: f64) -> Vec<f64> {
        let mut psi = vec![0.0; self.mt];
        for g in &self.groups {
            let d = qrd(&g.eff).expect("rank checked at prepare");
            for (k, p) in psi_from_r(&d, noise_variance).into_iter().enumerate() {
                psi[g.layers[k]] = p;
            }
        }
        psi
    }

    pub(crate) fn detect(&self, y: &[Complex], noise_variance: f64, soft: bool) -> DetectionResult {
        let mut x = vec![Complex::new(0.0, 0.0); self.mt];
        let mut llrs = soft.then(|| vec![0.0; 2 * self.mt]);
        let mut ops = 0u64;
        let mut crit = 0u64;
        for g in &self.groups {
            let yg: Vec<Complex> = (0..g.proj.nrows())
                .map(|i| (0..g.proj.ncols()).map(|k| g.proj[(i, k)] * y[k]).sum())
                .collect();
            let out = exhaustive(&g.eff, &yg, soft.then_some(noise_variance));
            let g_ops = (g.proj.nrows() * g.proj.ncols()) as u64 + out.ops;
            ops += g_ops;
            crit = crit.max(g_ops);
            for (k, &layer) in g.layers.iter().enumerate() {
                x[layer] = out.x[k];
                if let (Some(dst), Some(src)) = (llrs.as_mut(), out.llrs.as_ref()) {
                    dst[2 * layer] = src[2 * k];
                    dst[2 * layer + 1] = src[2 * k + 1];
                }
            }
        }
        DetectionResult {
            hard_bits: bits_of(&x),
            hard_symbols: x,
            psi_per_layer: Vec::new(),
            op_count: ops,
            critical_path: crit,
            llrs,
        }
    }
}

struct Exhaustive {
    x: Vec<Complex>,
    llrs: Option<Vec<f64>>,
    ops: u64,
}

/// Joint ML over all QPSK vectors; with `noise_variance` also max-log LLRs.
/// Ties keep the first candidate in counting order (layer 0 most significant).
fn exhaustive(h: &DMatrix<Complex>, y: &[Complex], noise_variance: Option<f64>) -> Exhaustive {
    let (rows, m) = h.shape();
    let total = 4usize.pow(m as u32);
    let mut best = (f64::INFINITY, 0usize);
    // min metric with bit b of the candidate equal to 0 / 1
    let mut mins = noise_variance.map(|_| vec![[f64::INFINITY; 2]; 2 * m]);
    let mut x = vec![Complex::new(0.0, 0.0); m];
    for idx in 0..total {
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = QPSK_POINTS[(idx >> (2 * (m - 1 - k))) & 3];
        }
        let mut metric = 0.0;
        for i in 0..rows {
            let mut e = y[i];
            for j in 0..m {
                e -= h[(i, j)] * x[j];
            }
            metric += e.norm_sqr();
        }
        if metric < best.0 {
            best = (metric, idx);
        }
        if let Some(mins) = mins.as_mut() {
            for k in 0..m {
                let sym = (idx >> (2 * (m - 1 - k))) & 3;
                for (b, bit) in [(sym >> 1) & 1, sym & 1].into_iter().enumerate() {
                    let slot = &mut mins[2 * k + b][bit];
                    *slot = slot.min(metric);
                }
            }
        }
    }
    let ops = (total * (rows * m + rows)) as u64;
    let xs = (0..m).map(|k| QPSK_POINTS[(best.1 >> (2 * (m - 1 - k))) & 3]).collect();
    let llrs = mins.map(|mins| {
        let s2 = noise_variance.expect("set with mins");
        mins.iter().map(|[m0, m1]| (m1 - m0) / s2).collect()
    });
    Exhaustive { x: xs, llrs, ops }
}

/// Exhaustive joint ML detection of a QPSK vector.
pub fn ml_detect(h: &DMatrix<Complex>, y: &[Complex]) -> Vec<Complex> {
    exhaustive(h, y, None).x
}
