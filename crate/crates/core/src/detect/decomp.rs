//! QR and punctured (WR) decompositions of a MIMO channel.

use nalgebra::DMatrix;

use crate::{Complex, Error, Result};

/// Relative cutoff on the smallest singular value of a channel matrix.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Triangularization of a channel, `q_factor^H * H = r_factor`.
///
/// For a QRD `q_factor` has orthonormal columns and `q_factor * r_factor = H`.
/// For a WRD (`punctured = true`) `q_factor` holds unit-norm projection
/// vectors `w_i` and `r_factor` keeps only its diagonal and the
/// `root_layer` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub q_factor: DMatrix<Complex>,
    pub r_factor: DMatrix<Complex>,
    pub punctured: bool,
    pub root_layer: usize,
    /// Complex multiply-accumulates spent building the factors.
    pub op_count: u64,
}

/// Fails unless `h` is tall and numerically full column rank.
pub fn check_full_rank(h: &DMatrix<Complex>) -> Result<()> {
    let (mr, mt) = h.shape();
    if mt == 0 || mr < mt {
        return Err(Error::SingularChannel(format!("need M_r >= M_t >= 1, got {mr}x{mt}")));
    }
    if h.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularChannel("non-finite channel entry".into()));
    }
    let sv = h.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min < RANK_TOLERANCE * max {
        return Err(Error::SingularChannel(format!(
            "condition too large: smallest/largest singular value = {min:e}/{max:e}"
        )));
    }
    Ok(())
}

fn dot(a: &[Complex], b: &[Complex]) -> Complex {
    // a^H b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Modified Gram-Schmidt over the given columns. Returns orthonormal
/// vectors and the number of MACs used.
pub(crate) fn gram_schmidt(cols: &[Vec<Complex>]) -> (Vec<Vec<Complex>>, Vec<Vec<Complex>>, u64) {
    let n = cols.len();
    let mut v: Vec<Vec<Complex>> = cols.to_vec();
    let mut q: Vec<Vec<Complex>> = Vec::with_capacity(n);
    let mut r = vec![vec![Complex::new(0.0, 0.0); n]; n];
    let mut ops = 0u64;
    for k in 0..n {
        let len = v[k].len() as u64;
        let nk = norm(&v[k]);
        ops += len;
        r[k][k] = Complex::new(nk, 0.0);
        let qk: Vec<Complex> = v[k].iter().map(|x| x / nk).collect();
        for j in k + 1..n {
            let rkj = dot(&qk, &v[j]);
            r[k][j] = rkj;
            for (vj, qi) in v[j].iter_mut().zip(&qk) {
                *vj -= rkj * qi;
            }
            ops += 2 * len;
        }
        q.push(qk);
    }
    (q, r, ops)
}

fn columns(h: &DMatrix<Complex>) -> Vec<Vec<Complex>> {
    h.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Thin QR decomposition with a real, positive diagonal.
pub fn qrd(h: &DMatrix<Complex>) -> Result<Decomposition> {
    check_full_rank(h)?;
    let (mr, mt) = h.shape();
    let (q, r, ops) = gram_schmidt(&columns(h));
    Ok(Decomposition {
        q_factor: DMatrix::from_fn(mr, mt, |i, j| q[j][i]),
        r_factor: DMatrix::from_fn(mt, mt, |i, j| r[i][j]),
        punctured: false,
        root_layer: mt - 1,
        op_count: ops,
    })
}

/// Punctured decomposition `W^H H = R~` where row `i != root` of `R~` is
/// nonzero only at `(i, i)` and `(i, root)`, and the root row only at the
/// diagonal.
///
/// Row `i` of `W^H` is the unit vector along the component of column `i`
/// orthogonal to every other column except the root (for the root row: to
/// every other column).
pub fn wrd(h: &DMatrix<Complex>, root_layer: usize) -> Result<Decomposition> {
    check_full_rank(h)?;
    let (mr, mt) = h.shape();
    if root_layer >= mt {
        return Err(Error::Usage(format!("root layer {root_layer} out of range for {mt} layers")));
    }
    let cols = columns(h);
    let mut w = DMatrix::<Complex>::zeros(mr, mt);
    let mut ops = 0u64;
    for i in 0..mt {
        // Orthonormal basis of the columns that must be nulled for row i,
        // followed by column i itself; the last GS vector is w_i.
        let mut set: Vec<Vec<Complex>> = (0..mt)
            .filter(|&j| j != i && (i == root_layer || j != root_layer))
            .map(|j| cols[j].clone())
            .collect();
        set.push(cols[i].clone());
        let (q, _, o) = gram_schmidt(&set);
        ops += o;
        let wi = q.last().expect("nonempty");
        for (k, v) in wi.iter().enumerate() {
            w[(k, i)] = *v;
        }
    }
    let mut r = w.adjoint() * h;
    ops += (mr * mt * mt) as u64;
    // Entries that are zero by construction are set exactly; the diagonal is
    // real and positive by construction up to rounding.
    for i in 0..mt {
        for j in 0..mt {
            if i == j {
                r[(i, j)] = Complex::new(r[(i, j)].re, 0.0);
            } else if i == root_layer || j != root_layer {
                debug_assert!(r[(i, j)].norm() < 1e-8 * h.norm());
            }
        }
    }
    Ok(Decomposition { q_factor: w, r_factor: r, punctured: true, root_layer, op_count: ops })
}

/// Pseudo-soft information per layer: squared row norms of `R` over the
/// noise variance.
pub fn psi_from_r(decomp: &Decomposition, noise_variance: f64) -> Vec<f64> {
    decomp
        .r_factor
        .row_iter()
        .map(|row| row.iter().map(|v| v.norm_sqr()).sum::<f64>() / noise_variance)
        .collect()
}
