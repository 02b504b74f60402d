use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thzlink::detect::{ml_detect, DetectorKind, PreparedDetector};
use thzlink::phymap::QPSK_POINTS;
use thzlink::rng::{rng_from_seed, SimRng};
use thzlink::Complex;

fn cn(rng: &mut SimRng, var: f64) -> Complex {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re, im) * (var / 2.0).sqrt()
}

/// Symbol error counts of the listed detectors plus ML (last entry) on
/// i.i.d. Rayleigh `m x m` channels, one vector per channel.
fn ser_counts(m: usize, snr_db: f64, trials: usize, kinds: &[DetectorKind], seed: u64) -> (Vec<u64>, u64) {
    let mut rng = rng_from_seed(seed);
    let sigma2 = 10f64.powf(-snr_db / 10.0);
    let mut errs = vec![0u64; kinds.len() + 1];
    for _ in 0..trials {
        let h = DMatrix::from_fn(m, m, |_, _| cn(&mut rng, 1.0));
        let x: Vec<Complex> = (0..m).map(|_| QPSK_POINTS[rng.random_range(0..4)]).collect();
        let y: Vec<Complex> = (0..m).map(|i| (0..m).map(|j| h[(i, j)] * x[j]).sum::<Complex>() + cn(&mut rng, sigma2)).collect();
        let count = |est: &[Complex]| est.iter().zip(&x).filter(|(a, b)| (**a - **b).norm() > 1e-9).count() as u64;
        for (e, &k) in errs.iter_mut().zip(kinds) {
            let det = PreparedDetector::prepare(k, &h, sigma2, None, None).unwrap();
            *e += count(&det.detect(&y, sigma2, false).unwrap().hard_symbols);
        }
        errs[kinds.len()] += count(&ml_detect(&h, &y));
    }
    (errs, (trials * m) as u64)
}

/// Wilson 95% interval.
fn interval(k: u64, n: u64) -> (f64, f64) {
    let z = 1.96;
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let d = 1.0 + z * z / n;
    let c = (p + z * z / (2.0 * n)) / d;
    let h = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / d;
    (c - h, c + h)
}

/// `a <= b` unless contradicted beyond overlapping intervals.
fn not_worse(a: u64, b: u64, n: u64) -> bool {
    a <= b || interval(a, n).0 <= interval(b, n).1
}

#[test]
fn ser_ordering_on_iid_4x4() {
    use DetectorKind::*;
    let kinds = [Cd, Pcd, Zf, Mmse];
    for snr in [8.0, 14.0] {
        let (e, n) = ser_counts(4, snr, 20_000, &kinds, 5);
        let (cd, pcd, zf, mmse, ml) = (e[0], e[1], e[2], e[3], e[4]);
        assert!(not_worse(ml, cd, n), "snr {snr}: {e:?}");
        assert!(not_worse(cd, pcd, n), "snr {snr}: {e:?}");
        assert!(not_worse(pcd, zf, n), "snr {snr}: {e:?}");
        assert!(not_worse(mmse, zf, n), "snr {snr}: {e:?}");
        // the nonlinear detectors clearly beat ZF
        assert!(interval(pcd, n).1 < interval(zf, n).0, "snr {snr}: {e:?}");
    }
}

/// SNR (dB) where the SER curve crosses `target`, by log-linear
/// interpolation over `grid`.
fn crossing(grid: &[f64], ser: &[f64], target: f64) -> f64 {
    for i in 1..grid.len() {
        if ser[i - 1] >= target && ser[i] <= target {
            let (a, b) = (ser[i - 1].log10(), ser[i].log10());
            return grid[i - 1] + (grid[i] - grid[i - 1]) * (a - target.log10()) / (a - b);
        }
    }
    panic!("grid {grid:?} does not bracket {target}: {ser:?}");
}

#[test]
fn chase_2x2_within_half_db_of_ml() {
    let grid = [6.0, 8.0, 10.0, 12.0, 14.0];
    let (mut cd, mut ml) = (Vec::new(), Vec::new());
    for (i, &snr) in grid.iter().enumerate() {
        let (e, n) = ser_counts(2, snr, 100_000, &[DetectorKind::Cd], 100 + i as u64);
        cd.push(e[0] as f64 / n as f64);
        ml.push(e[1] as f64 / n as f64);
        assert!(e[0] >= e[1] || interval(e[0], n).1 >= interval(e[1], n).0);
    }
    let gap = crossing(&grid, &cd, 1e-2) - crossing(&grid, &ml, 1e-2);
    assert!(gap <= 0.5, "gap {gap} dB, cd {cd:?}, ml {ml:?}");
}
