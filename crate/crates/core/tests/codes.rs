use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thzlink::fec::{
    crc_check, grand_decode, sc_list_decode, turbo_decode, turbo_decode_fixed, CrcPoly, ParityCheckCode, PatternOrder,
    PolarCode, ReliabilityVector, TurboCode,
};
use thzlink::rng::rng_from_seed;
use thzlink::Bit;

/// `x = u G` with `G` the n-fold Kronecker power of `[[1,0],[1,1]]`:
/// `x_i` sums every `u_j` whose index is a bitwise superset of `i`.
fn kronecker_encode(u: &[Bit]) -> Vec<Bit> {
    let n = u.len();
    (0..n).map(|i| (0..n).filter(|&j| j & i == i).fold(0, |acc, j| acc ^ u[j])).collect()
}

#[test]
fn ca_scl_n8_matches_brute_force_ml() {
    let crc = CrcPoly(0b11);
    let code = PolarCode::new(8, 4, Some(crc), 0.0).unwrap();
    let info_pos = code.info_positions().to_vec();
    let book: Vec<(Vec<Bit>, Vec<Bit>)> = (0..16u32)
        .map(|m| {
            let info: Vec<Bit> = (0..4).map(|i| (m >> (3 - i) & 1) as Bit).collect();
            let mut u = vec![0; 8];
            for (&p, &b) in info_pos.iter().zip(&info) {
                u[p] = b;
            }
            (info, kronecker_encode(&u))
        })
        .collect();
    let mut rng = rng_from_seed(41);
    let mut compared = 0;
    for _ in 0..5000 {
        let (_, sent) = &book[rng.random_range(0..16)];
        let sigma = 0.9;
        let llrs: Vec<f64> = sent
            .iter()
            .map(|&b| {
                let n: f64 = StandardNormal.sample(&mut rng);
                let y = 1.0 - 2.0 * b as f64 + sigma * n;
                2.0 * y / (sigma * sigma)
            })
            .collect();
        let score = |c: &[Bit]| c.iter().zip(&llrs).map(|(&b, l)| l * (1.0 - 2.0 * b as f64)).sum::<f64>();
        let (ml_info, _) = book.iter().max_by(|a, b| score(&a.1).total_cmp(&score(&b.1))).unwrap();
        let out = sc_list_decode(&llrs, &code, 16).unwrap();
        if crc_check(ml_info, crc) {
            compared += 1;
            assert_eq!(out.info_bits, ml_info[..3], "llrs {llrs:?}");
            assert!(out.success);
        }
    }
    assert!(compared > 2000);
}

#[test]
fn grand_is_nearest_codeword_on_extended_hamming() {
    let rows: Vec<Vec<Bit>> = vec![
        vec![1, 1, 1, 1, 1, 1, 1, 1],
        vec![0, 0, 0, 0, 1, 1, 1, 1],
        vec![0, 0, 1, 1, 0, 0, 1, 1],
        vec![0, 1, 0, 1, 0, 1, 0, 1],
    ];
    let msg_pos = vec![0, 1, 2, 4];
    let code = ParityCheckCode::new(&rows, msg_pos.clone()).unwrap();
    // The code is self-dual, so the check rows also generate it.
    let book: Vec<Vec<Bit>> = (0..16u32)
        .map(|m| (0..8).map(|i| (0..4).fold(0, |acc, r| acc ^ ((m >> r & 1) as Bit & rows[r][i]))).collect())
        .collect();
    let dist = |a: &[Bit], b: &[Bit]| a.iter().zip(b).filter(|(x, y)| x != y).count();
    for w in 0..256u32 {
        let word: Vec<Bit> = (0..8).map(|i| (w >> i & 1) as Bit).collect();
        let dmin = book.iter().map(|c| dist(c, &word)).min().unwrap();
        let nearest: Vec<&Vec<Bit>> = book.iter().filter(|c| dist(c, &word) == dmin).collect();
        let out = grand_decode(&word, &ReliabilityVector::hard_uniform(8), &code, 1 << 8, PatternOrder::Auto).unwrap();
        assert!(out.success);
        let decoded = book.iter().find(|c| msg_pos.iter().map(|&i| c[i]).eq(out.info_bits.iter().copied())).unwrap();
        assert_eq!(dist(decoded, &word), dmin, "word {w:08b}");
        if nearest.len() == 1 {
            assert_eq!(decoded, nearest[0]);
        }
        assert!(out.queries as usize <= [1, 9, 37][dmin], "word {w:08b}");
    }
}

fn bpsk_llrs(bits: &[Bit], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    bits.iter()
        .map(|&b| {
            let n: f64 = StandardNormal.sample(rng);
            2.0 * (1.0 - 2.0 * b as f64 + sigma * n) / (sigma * sigma)
        })
        .collect()
}

#[test]
fn turbo_ber_improves_over_first_four_iterations() {
    let code = TurboCode::new(40, None).unwrap();
    let rate = 40.0 / code.codeword_len() as f64;
    let ebn0 = 10f64.powf(0.3);
    let sigma = (1.0 / (2.0 * rate * ebn0)).sqrt();
    let mut rng = rng_from_seed(7);
    let mut errors = [0u64; 4];
    for _ in 0..10_000 {
        let p: Vec<Bit> = (0..40).map(|_| rng.random_range(0..2)).collect();
        let llrs = bpsk_llrs(&code.encode_payload(&p).unwrap(), sigma, &mut rng);
        for (i, e) in errors.iter_mut().enumerate() {
            let out = turbo_decode_fixed(&llrs, &code, i as u32 + 1).unwrap();
            *e += out.info_bits.iter().zip(&p).filter(|(a, b)| a != b).count() as u64;
        }
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn stability_stop_agrees_with_running_to_cap() {
    let code = TurboCode::new(256, None).unwrap();
    let rate = 256.0 / code.codeword_len() as f64;
    let mut rng = rng_from_seed(8);
    let mut stopped_early = 0;
    for trial in 0..400 {
        let ebn0 = 10f64.powf(if trial % 2 == 0 { 0.1 } else { 0.2 });
        let sigma = (1.0 / (2.0 * rate * ebn0)).sqrt();
        let p: Vec<Bit> = (0..256).map(|_| rng.random_range(0..2)).collect();
        let llrs = bpsk_llrs(&code.encode_payload(&p).unwrap(), sigma, &mut rng);
        let early = turbo_decode(&llrs, &code, 8).unwrap();
        if early.iterations < 8 {
            stopped_early += 1;
            let full = turbo_decode_fixed(&llrs, &code, 8).unwrap();
            assert_eq!(early.info_bits, full.info_bits, "trial {trial}");
        }
    }
    assert!(stopped_early > 100);
}
