use thzlink::chanmod::{generate_channel, path_gain, ChannelConfig};

fn rich() -> ChannelConfig {
    ChannelConfig {
        num_subcarriers: 2,
        distance_m: 1.0,
        absorption_coefficient: 0.0,
        num_nlos_rays: 64,
        rician_k_factor: 0.0,
        spatial_correlation_rho: 0.0,
        ..ChannelConfig::default()
    }
}

#[test]
fn entry_variance_matches_path_gain() {
    let cfg = rich();
    let draws = 10_000u64;
    let mut power = [0.0f64; 2];
    for seed in 0..draws {
        let ch = generate_channel(&cfg, seed).unwrap();
        for (k, h) in ch.matrices.iter().enumerate() {
            power[k] += h.norm_squared() / h.len() as f64;
        }
    }
    for (k, p) in power.iter().enumerate() {
        let expected = path_gain(cfg.subcarrier_frequency(k), 1.0, 0.0).unwrap();
        let ratio = p / draws as f64 / expected;
        assert!((ratio - 1.0).abs() < 0.05, "subcarrier {k}: ratio {ratio}");
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Correlation of |H| between the band edges.
fn edge_correlation(max_delay: f64) -> f64 {
    let cfg = ChannelConfig {
        num_subcarriers: 8,
        num_nlos_rays: 8,
        spatial_correlation_rho: 0.0,
        max_ray_delay_s: max_delay,
        ..ChannelConfig::default()
    };
    let (mut first, mut last) = (Vec::new(), Vec::new());
    for seed in 0..2000 {
        let ch = generate_channel(&cfg, 1_000_000 + seed).unwrap();
        let (a, b) = (&ch.matrices[0], &ch.matrices[7]);
        for (x, y) in a.iter().zip(b.iter()) {
            first.push(x.norm());
            last.push(y.norm());
        }
    }
    pearson(&first, &last)
}

#[test]
fn selectivity_grows_with_delay_spread() {
    let c: Vec<f64> = [1e-11, 5e-11, 2e-10].iter().map(|&d| edge_correlation(d)).collect();
    assert!(c[0] > c[1] && c[1] > c[2], "{c:?}");
    assert!(c[0] > 0.9, "{c:?}");
}

#[test]
fn los_only_is_flat_up_to_spreading() {
    let cfg = ChannelConfig { rician_k_factor: f64::INFINITY, num_subcarriers: 4, ..ChannelConfig::default() };
    let ch = generate_channel(&cfg, 3).unwrap();
    let unit = |k: usize| {
        let g = path_gain(cfg.subcarrier_frequency(k), cfg.distance_m, cfg.absorption_coefficient).unwrap();
        ch.matrices[k].map(|x| x / g.sqrt())
    };
    let base = unit(0);
    for k in 1..4 {
        assert!((unit(k) - &base).norm() < 1e-9);
    }
}
