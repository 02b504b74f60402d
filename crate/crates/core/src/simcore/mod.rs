//! Monte Carlo link simulation.
//!
//! A block is one channel realization carrying `codewords_per_stream`
//! codewords on each of the `v` streams. Seeds are derived with
//! [`crate::rng::block_seed`] from `(base_seed, snr_index, block_index)`, so
//! every block is an independent, reproducible work unit and point results
//! do not depend on the number of workers.

mod complexity;
mod sweep;

use rand::Rng;
use rand_distr::StandardNormal;

pub use complexity::{complexity_report, ComparisonAxis, ComplexityReport, CostSummary};
pub use sweep::{run_bler_point, run_bler_point_at, sweep, BlerRecord, PointTotals};

use crate::chanmod::{generate_channel, noise_variance_from_snr};
use crate::config::{Codec, DecodeInput, DecoderKind, ExperimentConfig};
use crate::detect::PreparedDetector;
use crate::fec::{
    grand_decode, llrs_from_hard, llrs_from_psi, polar_membership, sc_list_decode, turbo_decode, DecodeOutcome,
    PatternOrder, PolarMembership, ReliabilityVector,
};
use crate::phymap::{demap_streams, map_streams, qpsk_symbol, DemappedCodeword, ReceivedFrame, ResourceGrid};
use crate::rng::{block_seed, rng_from_seed, stream_seed, Stream};
use crate::{Bit, Complex, Error, Result};

/// Counters of one simulated block.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockOutcome {
    /// Some codeword payload was not recovered.
    pub block_error: bool,
    pub codewords: u64,
    pub codeword_errors: u64,
    pub payload_bits: u64,
    pub bit_errors: u64,
    /// Received vectors detected (`time_slots * subcarriers`).
    pub channel_uses: u64,
    /// Per-vector detector MACs, summed over the block.
    pub detector_ops: u64,
    /// Per-vector detector critical-path MACs, summed over the block.
    pub detector_critical_path: u64,
    /// Decomposition and PSI work, once per subcarrier.
    pub detector_prep_ops: u64,
    /// PSI computations (one per prepared detector).
    pub psi_evaluations: u64,
    pub queries: u64,
    pub node_visits: u64,
    pub abandoned: u64,
    /// Decoder cost (queries or node visits) per stream.
    pub stream_costs: Vec<u64>,
}

impl BlockOutcome {
    pub fn decoder_cost(&self) -> u64 {
        self.queries + self.node_visits
    }

    /// Cost of the busiest stream decoder.
    pub fn critical_stream_cost(&self) -> u64 {
        self.stream_costs.iter().copied().max().unwrap_or(0)
    }
}

/// A validated experiment ready to simulate blocks.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: ExperimentConfig,
    codec: Codec,
    membership: Option<PolarMembership>,
    grid: ResourceGrid,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate().map_err(to_usage)?;
        let codec = cfg.codec()?;
        let membership = match (&codec, cfg.decoder) {
            (Codec::Polar(code), DecoderKind::Grand | DecoderKind::Orbgrand) => Some(polar_membership(code)),
            _ => None,
        };
        Ok(Self { cfg: cfg.clone(), codec, membership, grid: cfg.grid() })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &ResourceGrid {
        &self.grid
    }

    pub fn codec(&self) -> &Codec {
        &self.codec
    }

    /// Index used in seed derivation for `snr_db`: its position in the grid,
    /// or the grid length for an off-grid SNR.
    pub fn snr_index(&self, snr_db: f64) -> usize {
        self.cfg.snr_grid_db.iter().position(|&s| s == snr_db).unwrap_or(self.cfg.snr_grid_db.len())
    }

    /// Simulates block `block_index` at `snr_db` with seed index `snr_index`.
    pub fn run_block_indexed(&self, snr_index: usize, snr_db: f64, block_index: u64) -> Result<BlockOutcome> {
        let cfg = &self.cfg;
        let seed = block_seed(cfg.base_seed, snr_index, block_index);
        let mut payload_rng = rng_from_seed(stream_seed(seed, Stream::Payload));
        let mut noise_rng = rng_from_seed(stream_seed(seed, Stream::Noise));
        let mut pad_rng = rng_from_seed(stream_seed(seed, Stream::Padding));

        let k = self.codec.payload_len();
        let mut payloads = Vec::with_capacity(cfg.streams * cfg.codewords_per_stream);
        let mut codewords = Vec::with_capacity(payloads.capacity());
        for s in 0..cfg.streams {
            for _ in 0..cfg.codewords_per_stream {
                let p: Vec<Bit> = (0..k).map(|_| payload_rng.random_range(0..2u8)).collect();
                codewords.push((s, self.encode(&p)?));
                payloads.push(p);
            }
        }
        let (frame, blocks) = map_streams(&codewords, &self.grid, cfg.mapping_policy)?;

        let channel = generate_channel(&cfg.channel, stream_seed(seed, Stream::Channel))?;
        // Per-coded-bit SNR: QPSK carries two bits per symbol.
        let sigma2 = noise_variance_from_snr(snr_db, cfg.channel.mean_entry_gain() / 2.0);
        let soft = cfg.decode_input == DecodeInput::Soft;
        let grid = &self.grid;
        let mut rx = ReceivedFrame::new(*grid, soft);
        let mut out = BlockOutcome { stream_costs: vec![0; cfg.streams], ..Default::default() };
        let mr = cfg.channel.num_rx_layers;
        let layers = grid.layers;
        let noise_std = (sigma2 / 2.0).sqrt();
        for sc in 0..grid.subcarriers {
            let h = &channel.matrices[sc];
            let det = PreparedDetector::prepare(cfg.detector, h, sigma2, None, cfg.ssd_groups.as_deref())?;
            out.psi_evaluations += 1;
            out.detector_prep_ops += det.prep_ops();
            for t in 0..grid.time_slots {
                let x: Vec<Complex> = frame
                    .layer_vector(t, sc)
                    .into_iter()
                    .map(|s| s.unwrap_or_else(|| qpsk_symbol(pad_rng.random_range(0..2u8), pad_rng.random_range(0..2u8))))
                    .collect();
                let y: Vec<Complex> = (0..mr)
                    .map(|r| {
                        let hx: Complex = (0..layers).map(|l| h[(r, l)] * x[l]).sum();
                        let n = Complex::new(
                            noise_rng.sample::<f64, _>(StandardNormal),
                            noise_rng.sample::<f64, _>(StandardNormal),
                        ) * noise_std;
                        hx + n
                    })
                    .collect();
                let d = det.detect(&y, sigma2, soft)?;
                out.channel_uses += 1;
                out.detector_ops += d.op_count;
                out.detector_critical_path += d.critical_path;
                let base = (t * grid.subcarriers + sc) * layers;
                for l in 0..layers {
                    let idx = base + l;
                    rx.hard_bits[2 * idx] = d.hard_bits[2 * l];
                    rx.hard_bits[2 * idx + 1] = d.hard_bits[2 * l + 1];
                    rx.psi[idx] = d.psi_per_layer[l];
                    if let (Some(dst), Some(src)) = (rx.llrs.as_mut(), d.llrs.as_ref()) {
                        dst[2 * idx] = src[2 * l];
                        dst[2 * idx + 1] = src[2 * l + 1];
                    }
                }
            }
        }

        for (cw, payload) in demap_streams(&rx, &blocks)?.iter().zip(&payloads) {
            let dec = self.decode(cw)?;
            let errs = dec.info_bits.iter().zip(payload).filter(|(a, b)| a != b).count() as u64;
            out.codewords += 1;
            out.payload_bits += payload.len() as u64;
            out.bit_errors += errs;
            if errs > 0 || dec.info_bits.len() != payload.len() {
                out.codeword_errors += 1;
                out.block_error = true;
            }
            out.queries += dec.queries;
            out.node_visits += dec.node_visits;
            out.abandoned += dec.abandoned as u64;
            out.stream_costs[cw.stream_id] += dec.cost();
        }
        Ok(out)
    }

    /// Simulates one block; see [`Simulation::snr_index`] for seeding.
    pub fn run_block(&self, snr_db: f64, block_index: u64) -> Result<BlockOutcome> {
        self.run_block_indexed(self.snr_index(snr_db), snr_db, block_index)
    }

    fn encode(&self, payload: &[Bit]) -> Result<Vec<Bit>> {
        match &self.codec {
            Codec::Polar(c) => c.encode_payload(payload),
            Codec::Turbo(c) => c.encode_payload(payload),
            Codec::Uncoded(_) => Ok(payload.to_vec()),
        }
    }

    fn input_llrs(&self, cw: &DemappedCodeword) -> Result<Vec<f64>> {
        let scale = self.cfg.code.psi_scale;
        match self.cfg.decode_input {
            DecodeInput::Hard => Ok(llrs_from_hard(&cw.hard_bits, scale)),
            DecodeInput::Psi => llrs_from_psi(&cw.hard_bits, &cw.psi_tags, scale),
            DecodeInput::Soft => cw.llrs.clone().ok_or_else(|| Error::Usage("detector produced no LLRs".into())),
        }
    }

    fn decode(&self, cw: &DemappedCodeword) -> Result<DecodeOutcome> {
        let code = &self.cfg.code;
        match (&self.codec, self.cfg.decoder) {
            (Codec::Polar(c), DecoderKind::CaScl) => sc_list_decode(&self.input_llrs(cw)?, c, code.list_size),
            (Codec::Polar(_), kind) => {
                let rel = match self.cfg.decode_input {
                    DecodeInput::Hard => ReliabilityVector::hard_uniform(cw.hard_bits.len()),
                    DecodeInput::Psi => ReliabilityVector::psi(cw.psi_tags.clone()),
                    DecodeInput::Soft => ReliabilityVector::soft(&self.input_llrs(cw)?),
                };
                let order = if kind == DecoderKind::Orbgrand { PatternOrder::LogisticWeight } else { PatternOrder::Auto };
                let membership = self.membership.as_ref().expect("GRAND membership built with the simulation");
                grand_decode(&cw.hard_bits, &rel, membership, code.max_queries, order)
            }
            (Codec::Turbo(c), _) => turbo_decode(&self.input_llrs(cw)?, c, code.iterations),
            (Codec::Uncoded(_), _) => Ok(DecodeOutcome {
                info_bits: cw.hard_bits.clone(),
                success: true,
                queries: 0,
                node_visits: 0,
                abandoned: false,
                iterations: 0,
            }),
        }
    }
}

fn to_usage(e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Usage(m),
        other => other,
    }
}

/// Simulates block `block_index` of `cfg` at `snr_db`.
pub fn run_block(cfg: &ExperimentConfig, snr_db: f64, block_index: u64) -> Result<BlockOutcome> {
    Simulation::new(cfg)?.run_block(snr_db, block_index)
}

/// Lower bound on physical-layer storage, `throughput * latency` bits.
pub fn min_storage_bits(throughput_bps: f64, latency_s: f64) -> Result<f64> {
    if !(throughput_bps > 0.0 && throughput_bps.is_finite()) {
        return Err(Error::Domain(format!("throughput must be positive and finite, got {throughput_bps}")));
    }
    if !(latency_s > 0.0 && latency_s.is_finite()) {
        return Err(Error::Domain(format!("latency must be positive and finite, got {latency_s}")));
    }
    Ok(throughput_bps * latency_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, parse_config_with_preset, Preset};

    #[test]
    fn storage_bound() {
        assert_eq!(min_storage_bits(1e12, 1e-3).unwrap(), 1e9);
        assert_eq!(min_storage_bits(2e12, 1e-3).unwrap(), 2e9);
        assert!(min_storage_bits(1e12, 1e-300).unwrap() < 1e-280);
        assert!(min_storage_bits(0.0, 1.0).is_err());
        assert!(min_storage_bits(1.0, -1.0).is_err());
        assert!(min_storage_bits(f64::NAN, 1.0).is_err());
    }

    fn high_snr(decoder: &str, input: &str, detector: &str) -> ExperimentConfig {
        let extra = match decoder {
            "turbo" => "[code]\nn = 780\nk = 256\ncrc_poly = 0\n",
            "uncoded" => "[code]\nn = 128\nk = 128\ncrc_poly = 0\n",
            _ => "",
        };
        parse_config(&format!(
            "snr_grid_db = [60.0]\nstreams = 4\ndecoder = \"{decoder}\"\ndecode_input = \"{input}\"\ndetector = \"{detector}\"\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn noiseless_surrogate_has_no_errors() {
        for (dec, det) in [
            ("ca-scl", "zf"),
            ("grand", "zf"),
            ("orbgrand", "mmse"),
            ("turbo", "cd"),
            ("uncoded", "pcd"),
            ("ca-scl", "ssd"),
        ] {
            for input in ["hard", "psi"] {
                let sim = Simulation::new(&high_snr(dec, input, det)).unwrap();
                for b in 0..3 {
                    let out = sim.run_block(60.0, b).unwrap();
                    assert!(!out.block_error, "{dec}/{det}/{input} block {b}");
                    assert_eq!(out.codewords, 4);
                }
            }
        }
        let sim = Simulation::new(&high_snr("ca-scl", "soft", "zf")).unwrap();
        assert!(!sim.run_block(60.0, 0).unwrap().block_error);
    }

    #[test]
    fn block_is_deterministic() {
        let cfg = parse_config_with_preset("snr_grid_db = [6.0]", Preset::Fig4).unwrap();
        let a = run_block(&cfg, 6.0, 7).unwrap();
        let b = run_block(&cfg, 6.0, 7).unwrap();
        assert_eq!(a, b);
        let c = run_block(&cfg, 6.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn psi_computed_once_per_subcarrier() {
        let cfg = parse_config_with_preset("[channel]\nnum_subcarriers = 16\n", Preset::Fig3).unwrap();
        let sim = Simulation::new(&cfg).unwrap();
        let out = sim.run_block(10.0, 0).unwrap();
        assert_eq!(out.psi_evaluations, 16);
        assert!(out.channel_uses > out.psi_evaluations);
        assert_eq!(out.channel_uses, (sim.grid().time_slots * 16) as u64);
    }

    #[test]
    fn stream_costs_add_up() {
        let cfg = parse_config_with_preset("", Preset::Fig4).unwrap();
        let out = run_block(&cfg, 6.0, 0).unwrap();
        assert_eq!(out.stream_costs.iter().sum::<u64>(), out.decoder_cost());
        assert_eq!(out.stream_costs.len(), 4);
    }

    #[test]
    fn capacity_errors_before_running() {
        let mut cfg = parse_config("snr_grid_db = [1.0]").unwrap();
        cfg.code.n = 100;
        assert!(matches!(Simulation::new(&cfg), Err(Error::Usage(_))));
    }
}
