//! Synthetic frequency-selective MIMO channel for a sub-THz link.
//!
//! Each realization combines a rank-one line-of-sight (LoS) component with a
//! sparse set of non-line-of-sight (NLoS) rays. Every ray carries a delay,
//! which rotates its phase linearly across the band and makes the channel
//! frequency selective. Transmit/receive correlation is imposed on the NLoS
//! part through exponential-correlation Kronecker factors, and the whole
//! matrix is scaled by the spreading + molecular absorption path gain.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{rng_from_seed, SimRng};
use crate::{Complex, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Kind of channel generated for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// Rician LoS + sparse NLoS rays with Kronecker correlation.
    #[default]
    Synthetic,
    /// Unit-gain identity matrix on every subcarrier (plain AWGN).
    Identity,
}

/// Parameters of the synthetic channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub num_subcarriers: usize,
    pub num_tx_layers: usize,
    pub num_rx_layers: usize,
    pub distance_m: f64,
    /// Molecular absorption coefficient, 1/m.
    pub absorption_coefficient: f64,
    pub num_nlos_rays: usize,
    /// Maximum excess delay of the NLoS rays, seconds. Ray delays are drawn
    /// uniformly in `[0, max_ray_delay_s]`.
    pub max_ray_delay_s: f64,
    /// Linear Rician K-factor. `f64::INFINITY` keeps only the LoS part.
    pub rician_k_factor: f64,
    pub spatial_correlation_rho: f64,
}

impl Default for ChannelConfig {
    /// Indoor 0.3 THz, 5 GHz stand-in used by the figure presets.
    fn default() -> Self {
        Self {
            kind: ChannelKind::Synthetic,
            carrier_frequency_hz: 0.3e12,
            bandwidth_hz: 5e9,
            num_subcarriers: 64,
            num_tx_layers: 4,
            num_rx_layers: 4,
            distance_m: 5.0,
            absorption_coefficient: 1e-3,
            num_nlos_rays: 16,
            max_ray_delay_s: 20e-9,
            rician_k_factor: 0.5,
            spatial_correlation_rho: 0.2,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("channel: {m}")));
        if self.num_subcarriers < 1 {
            return bad("num_subcarriers must be >= 1");
        }
        if self.num_tx_layers < 1 || self.num_rx_layers < 1 {
            return bad("num_tx_layers and num_rx_layers must be >= 1");
        }
        if !(self.carrier_frequency_hz > 0.0) || !self.carrier_frequency_hz.is_finite() {
            return bad("carrier_frequency_hz must be positive");
        }
        if !(self.bandwidth_hz >= 0.0) || self.bandwidth_hz >= 2.0 * self.carrier_frequency_hz {
            return bad("bandwidth_hz must be in [0, 2*carrier_frequency_hz)");
        }
        if !(self.distance_m > 0.0) || !self.distance_m.is_finite() {
            return bad("distance_m must be positive");
        }
        if !(self.absorption_coefficient >= 0.0) || !self.absorption_coefficient.is_finite() {
            return bad("absorption_coefficient must be >= 0");
        }
        if !(self.max_ray_delay_s >= 0.0) || !self.max_ray_delay_s.is_finite() {
            return bad("max_ray_delay_s must be >= 0");
        }
        if !(self.rician_k_factor >= 0.0) {
            return bad("rician_k_factor must be >= 0");
        }
        if !(0.0..1.0).contains(&self.spatial_correlation_rho) {
            return bad("spatial_correlation_rho must be in [0, 1)");
        }
        if self.kind == ChannelKind::Synthetic
            && self.num_nlos_rays == 0
            && self.rician_k_factor.is_finite()
        {
            return bad("num_nlos_rays must be >= 1 unless rician_k_factor is infinite");
        }
        Ok(())
    }

    /// Frequency of subcarrier `k`, uniform over `[fc - B/2, fc + B/2]`.
    pub fn subcarrier_frequency(&self, k: usize) -> f64 {
        let f = self.num_subcarriers;
        if f == 1 {
            return self.carrier_frequency_hz;
        }
        let lo = self.carrier_frequency_hz - self.bandwidth_hz / 2.0;
        lo + self.bandwidth_hz * k as f64 / (f - 1) as f64
    }

    /// Mean per-entry channel power at the carrier.
    pub fn mean_entry_gain(&self) -> f64 {
        match self.kind {
            ChannelKind::Identity => 1.0,
            ChannelKind::Synthetic => {
                path_gain(self.carrier_frequency_hz, self.distance_m, self.absorption_coefficient)
                    .expect("validated config")
            }
        }
    }
}

/// One channel use's worth of per-subcarrier MIMO matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `num_subcarriers` matrices of size `M_r x M_t`.
    pub matrices: Vec<DMatrix<Complex>>,
    pub noise_variance: f64,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn with_noise_variance(mut self, noise_variance: f64) -> Self {
        self.noise_variance = noise_variance;
        self
    }
}

/// Free-space spreading loss times molecular absorption,
/// `(c / (4 pi f d))^2 * exp(-k_abs d)`.
pub fn path_gain(frequency_hz: f64, distance_m: f64, absorption_coefficient: f64) -> Result<f64> {
    if !(frequency_hz > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {frequency_hz}")));
    }
    if !(distance_m > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {distance_m}")));
    }
    if !(absorption_coefficient >= 0.0) {
        return Err(Error::Domain(format!(
            "absorption coefficient must be >= 0, got {absorption_coefficient}"
        )));
    }
    let spreading = (SPEED_OF_LIGHT / (4.0 * PI * frequency_hz * distance_m)).powi(2);
    Ok(spreading * (-absorption_coefficient * distance_m).exp())
}

/// Noise variance giving `snr_db` relative to `signal_power`.
pub fn noise_variance_from_snr(snr_db: f64, signal_power: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

/// Exponential correlation matrix `R[i][j] = rho^|i-j|`, returned as its
/// lower Cholesky factor `L` (so `L L^T = R`).
fn exp_correlation_sqrt(n: usize, rho: f64) -> DMatrix<f64> {
    let r = DMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()));
    r.cholesky().expect("exponential correlation is positive definite for rho < 1").l()
}

/// Half-wavelength ULA response with unit-magnitude entries.
fn steering(n: usize, angle: f64) -> Vec<Complex> {
    (0..n).map(|m| Complex::from_polar(1.0, PI * m as f64 * angle.sin())).collect()
}

fn complex_gaussian(rng: &mut SimRng) -> Complex {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

struct Ray {
    gain: Complex,
    delay: f64,
    rx: Vec<Complex>,
    tx: Vec<Complex>,
}

/// Draws one channel realization. Pure in `(cfg, seed)`.
///
/// The returned noise variance is a placeholder of 1.0; the simulator sets
/// it from the operating SNR.
pub fn generate_channel(cfg: &ChannelConfig, seed: u64) -> Result<ChannelRealization> {
    cfg.validate()?;
    let (mr, mt, nsc) = (cfg.num_rx_layers, cfg.num_tx_layers, cfg.num_subcarriers);
    if cfg.kind == ChannelKind::Identity {
        let eye = DMatrix::from_fn(mr, mt, |i, j| if i == j { Complex::new(1.0, 0.0) } else { Complex::new(0.0, 0.0) });
        return Ok(ChannelRealization { matrices: vec![eye; nsc], noise_variance: 1.0, seed });
    }

    let mut rng = rng_from_seed(seed);
    let half_pi = PI / 2.0;
    let los_rx = steering(mr, rng.random_range(-half_pi..=half_pi));
    let los_tx = steering(mt, rng.random_range(-half_pi..=half_pi));
    let rays: Vec<Ray> = (0..cfg.num_nlos_rays)
        .map(|_| {
            let gain = complex_gaussian(&mut rng);
            let delay = rng.random::<f64>() * cfg.max_ray_delay_s;
            let rx = steering(mr, rng.random_range(-half_pi..=half_pi));
            let tx = steering(mt, rng.random_range(-half_pi..=half_pi));
            Ray { gain, delay, rx, tx }
        })
        .collect();

    let kappa = cfg.rician_k_factor;
    let (w_los, w_nlos) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    };
    let ray_norm = if rays.is_empty() { 0.0 } else { 1.0 / (rays.len() as f64).sqrt() };
    let corr_rx = exp_correlation_sqrt(mr, cfg.spatial_correlation_rho).map(|v| Complex::new(v, 0.0));
    let corr_tx_t = exp_correlation_sqrt(mt, cfg.spatial_correlation_rho)
        .transpose()
        .map(|v| Complex::new(v, 0.0));
    let los = DMatrix::from_fn(mr, mt, |i, j| los_rx[i] * los_tx[j].conj());

    let mut matrices = Vec::with_capacity(nsc);
    for k in 0..nsc {
        let fk = cfg.subcarrier_frequency(k);
        // Delay-induced phase is measured relative to the band centre so that
        // the carrier term is absorbed into the ray's random phase.
        let df = fk - cfg.carrier_frequency_hz;
        let mut nlos = DMatrix::<Complex>::zeros(mr, mt);
        for ray in &rays {
            let g = ray.gain * Complex::from_polar(ray_norm, -2.0 * PI * df * ray.delay);
            for i in 0..mr {
                for j in 0..mt {
                    nlos[(i, j)] += g * ray.rx[i] * ray.tx[j].conj();
                }
            }
        }
        let nlos = &corr_rx * nlos * &corr_tx_t;
        let amp = path_gain(fk, cfg.distance_m, cfg.absorption_coefficient)?.sqrt();
        let h = (los.clone() * Complex::new(w_los, 0.0) + nlos * Complex::new(w_nlos, 0.0))
            * Complex::new(amp, 0.0);
        matrices.push(h);
    }
    Ok(ChannelRealization { matrices, noise_variance: 1.0, seed })
}
