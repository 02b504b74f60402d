use serde::{Deserialize, Serialize};

use super::sweep::{pool, run_blocks};
use super::Simulation;
use crate::config::ExperimentConfig;
use crate::{Error, Result};

/// Which factor a baseline/variant pair differs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonAxis {
    /// Detector kind (and SSD groups).
    Detector,
    /// Decoder input kind.
    DecodeInput,
    /// Stream count and code dimensions.
    Parallelism,
}

/// Mean costs of one configuration over a fixed number of blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub blocks: u64,
    pub block_errors: u64,
    /// Detector MACs per channel use (received vector).
    pub detector_macs: f64,
    /// Critical-path detector MACs per channel use.
    pub detector_critical_path: f64,
    /// Decoder cost (queries or node visits) per block, all streams.
    pub decoder_cost: f64,
    /// Mean decoder cost of each stream per block.
    pub stream_costs: Vec<f64>,
    /// Mean over streams of `stream_costs`.
    pub mean_stream_cost: f64,
    /// Mean per-block cost of the busiest stream.
    pub critical_stream_cost: f64,
    pub payload_bits_per_block: f64,
}

impl CostSummary {
    /// Busiest-stream decoder cost per payload bit of the whole block.
    pub fn critical_cost_per_bit(&self) -> f64 {
        self.critical_stream_cost / self.payload_bits_per_block
    }
}

/// Variant-to-baseline cost ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    /// `None` when the two configurations are identical.
    pub axis: Option<ComparisonAxis>,
    pub snr_db: f64,
    pub baseline: CostSummary,
    pub variant: CostSummary,
    /// Detector MACs per channel use (PCD vs CD gives theta_1).
    pub theta1: f64,
    /// Decoder cost per block (PSI vs hard gives theta_2).
    pub theta2: f64,
    /// Mean per-stream decoder cost (the division by `v`).
    pub stream_cost_ratio: f64,
    /// Detector critical path per channel use (latency proxy eta_1).
    pub eta1: f64,
    /// Busiest-stream decoder cost (latency proxy eta_2).
    pub eta2: f64,
    /// Busiest-stream decoder cost per payload bit.
    pub critical_cost_per_bit_ratio: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

fn axis_of(baseline: &ExperimentConfig, variant: &ExperimentConfig) -> Result<Option<ComparisonAxis>> {
    let normalise = |c: &ExperimentConfig| {
        let mut c = c.clone();
        c.label.clear();
        c.snr_grid_db.clear();
        c.stop = Default::default();
        c
    };
    let (b, v) = (normalise(baseline), normalise(variant));
    let mut differing = Vec::new();
    if b.detector != v.detector || b.ssd_groups != v.ssd_groups {
        differing.push(ComparisonAxis::Detector);
    }
    if b.decode_input != v.decode_input {
        differing.push(ComparisonAxis::DecodeInput);
    }
    if b.streams != v.streams
        || b.code.n != v.code.n
        || b.code.k != v.code.k
        || b.codewords_per_stream != v.codewords_per_stream
    {
        differing.push(ComparisonAxis::Parallelism);
    }
    let mut rest = v.clone();
    rest.detector = b.detector;
    rest.ssd_groups = b.ssd_groups.clone();
    rest.decode_input = b.decode_input;
    rest.streams = b.streams;
    rest.code.n = b.code.n;
    rest.code.k = b.code.k;
    rest.codewords_per_stream = b.codewords_per_stream;
    if rest != b {
        return Err(Error::Usage(
            "configurations differ outside the comparison axes (detector, decode input, parallelism)".into(),
        ));
    }
    if differing.len() > 1 {
        return Err(Error::Usage(format!("configurations differ in more than one axis: {differing:?}")));
    }
    Ok(differing.pop())
}

fn summarise(cfg: &ExperimentConfig, snr_db: f64, blocks: u64, workers: usize) -> Result<CostSummary> {
    let sim = Simulation::new(cfg)?;
    let pool = pool(workers)?;
    let outcomes = run_blocks(&sim, &pool, sim.snr_index(snr_db), snr_db, 0, blocks)?;
    let n = blocks as f64;
    let sum = |f: &dyn Fn(&super::BlockOutcome) -> u64| outcomes.iter().map(f).sum::<u64>() as f64;
    let uses = sum(&|o| o.channel_uses);
    let stream_costs: Vec<f64> =
        (0..cfg.streams).map(|s| outcomes.iter().map(|o| o.stream_costs[s]).sum::<u64>() as f64 / n).collect();
    Ok(CostSummary {
        blocks,
        block_errors: outcomes.iter().filter(|o| o.block_error).count() as u64,
        detector_macs: sum(&|o| o.detector_ops) / uses,
        detector_critical_path: sum(&|o| o.detector_critical_path) / uses,
        decoder_cost: sum(&|o| o.decoder_cost()) / n,
        mean_stream_cost: stream_costs.iter().sum::<f64>() / cfg.streams as f64,
        stream_costs,
        critical_stream_cost: sum(&|o| o.critical_stream_cost()) / n,
        payload_bits_per_block: sum(&|o| o.payload_bits) / n,
    })
}

/// Runs `blocks` blocks of both configurations at `snr_db` and reports the
/// variant's costs relative to the baseline. The pair may differ in at most
/// one axis.
pub fn complexity_report(
    baseline: &ExperimentConfig,
    variant: &ExperimentConfig,
    snr_db: f64,
    blocks: u64,
    workers: usize,
) -> Result<ComplexityReport> {
    if blocks == 0 {
        return Err(Error::Usage("complexity report needs at least one block".into()));
    }
    let axis = axis_of(baseline, variant)?;
    let b = summarise(baseline, snr_db, blocks, workers)?;
    let v = summarise(variant, snr_db, blocks, workers)?;
    Ok(ComplexityReport {
        axis,
        snr_db,
        theta1: ratio(v.detector_macs, b.detector_macs),
        theta2: ratio(v.decoder_cost, b.decoder_cost),
        stream_cost_ratio: ratio(v.mean_stream_cost, b.mean_stream_cost),
        eta1: ratio(v.detector_critical_path, b.detector_critical_path),
        eta2: ratio(v.critical_stream_cost, b.critical_stream_cost),
        critical_cost_per_bit_ratio: ratio(v.critical_cost_per_bit(), b.critical_cost_per_bit()),
        baseline: b,
        variant: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, parse_config_with_preset, Preset};
    use crate::detect::DetectorKind;

    fn base() -> ExperimentConfig {
        parse_config("snr_grid_db = [8.0]\ndetector = \"cd\"\nstreams = 4\n[channel]\nnum_subcarriers = 16\n").unwrap()
    }

    #[test]
    fn self_comparison_is_unity() {
        let r = complexity_report(&base(), &base(), 8.0, 4, 2).unwrap();
        assert_eq!(r.axis, None);
        for f in [r.theta1, r.theta2, r.stream_cost_ratio, r.eta1, r.eta2, r.critical_cost_per_bit_ratio] {
            assert_eq!(f, 1.0);
        }
    }

    #[test]
    fn pcd_cheaper_than_cd() {
        let mut v = base();
        v.detector = DetectorKind::Pcd;
        let r = complexity_report(&base(), &v, 8.0, 4, 2).unwrap();
        assert_eq!(r.axis, Some(ComparisonAxis::Detector));
        assert!(r.theta1 <= 0.7, "theta1 = {}", r.theta1);
    }

    #[test]
    fn mismatched_axes_rejected() {
        let mut v = base();
        v.detector = DetectorKind::Pcd;
        v.decode_input = crate::config::DecodeInput::Psi;
        assert!(matches!(complexity_report(&base(), &v, 8.0, 2, 1), Err(Error::Usage(_))));
        let mut w = base();
        w.channel.distance_m = 7.0;
        assert!(matches!(complexity_report(&base(), &w, 8.0, 2, 1), Err(Error::Usage(_))));
        let fig4 = parse_config_with_preset("", Preset::Fig4).unwrap();
        let mut other = fig4.clone();
        other.decoder = crate::config::DecoderKind::Grand;
        assert!(complexity_report(&fig4, &other, 8.0, 1, 1).is_err());
    }
}
