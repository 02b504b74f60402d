use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BlockOutcome, Simulation};
use crate::config::ExperimentConfig;
use crate::rng::point_seed;
use crate::{Error, Result};

/// Blocks simulated per parallel batch. Results are scanned in block order,
/// so the batch size affects only scheduling, never the record.
const BATCH: u64 = 64;

/// Integer totals over the blocks of one SNR point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PointTotals {
    pub blocks: u64,
    pub block_errors: u64,
    pub codewords: u64,
    pub codeword_errors: u64,
    pub payload_bits: u64,
    pub bit_errors: u64,
    pub channel_uses: u64,
    pub detector_ops: u64,
    pub queries: u64,
    pub node_visits: u64,
    pub abandoned: u64,
}

impl PointTotals {
    pub fn add(&mut self, b: &BlockOutcome) {
        self.blocks += 1;
        self.block_errors += b.block_error as u64;
        self.codewords += b.codewords;
        self.codeword_errors += b.codeword_errors;
        self.payload_bits += b.payload_bits;
        self.bit_errors += b.bit_errors;
        self.channel_uses += b.channel_uses;
        self.detector_ops += b.detector_ops;
        self.queries += b.queries;
        self.node_visits += b.node_visits;
        self.abandoned += b.abandoned;
    }
}

/// One (configuration, SNR) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerRecord {
    pub snr_db: f64,
    pub blocks: u64,
    pub block_errors: u64,
    pub bler: f64,
    /// GRAND queries per codeword (0 for other decoders).
    pub mean_queries: f64,
    /// Detector MACs per block.
    pub mean_op_count: f64,
    /// Fraction of codewords whose GRAND search ran out of queries.
    pub abandonment_rate: f64,
    /// Point seed; block seeds derive from it.
    pub seed: u64,
    /// Payload bit error rate.
    pub ber: f64,
    /// Decoder cost (queries or node visits) per codeword.
    pub mean_decoder_cost: f64,
    pub totals: PointTotals,
}

impl BlerRecord {
    fn from_totals(snr_db: f64, seed: u64, t: PointTotals) -> Self {
        let per = |x: u64, n: u64| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        Self {
            snr_db,
            blocks: t.blocks,
            block_errors: t.block_errors,
            bler: per(t.block_errors, t.blocks),
            mean_queries: per(t.queries, t.codewords),
            mean_op_count: per(t.detector_ops, t.blocks),
            abandonment_rate: per(t.abandoned, t.codewords),
            seed,
            ber: per(t.bit_errors, t.payload_bits),
            mean_decoder_cost: per(t.queries + t.node_visits, t.codewords),
            totals: t,
        }
    }

    /// Wilson 95% interval on the BLER.
    pub fn bler_interval(&self) -> (f64, f64) {
        wilson(self.block_errors, self.blocks)
    }
}

/// Wilson score 95% interval for `k` successes in `n` trials.
pub(crate) fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = k as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) / n) + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    (lo, (centre + half).min(1.0))
}

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::Usage("workers must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))
}

/// Runs blocks `first..first+count` in parallel, returned in block order.
pub(crate) fn run_blocks(
    sim: &Simulation,
    pool: &rayon::ThreadPool,
    snr_index: usize,
    snr_db: f64,
    first: u64,
    count: u64,
) -> Result<Vec<BlockOutcome>> {
    pool.install(|| {
        (first..first + count)
            .into_par_iter()
            .map(|b| sim.run_block_indexed(snr_index, snr_db, b))
            .collect()
    })
}

/// Runs one SNR point until the stop rule fires: the record covers blocks
/// `0..=j` where `j` is the block yielding the `min_block_errors`-th error,
/// or `max_blocks` blocks.
pub fn run_bler_point_at(sim: &Simulation, snr_index: usize, snr_db: f64, workers: usize) -> Result<BlerRecord> {
    let pool = pool(workers)?;
    let cfg = sim.config();
    let stop = cfg.stop;
    let mut totals = PointTotals::default();
    let mut next = 0u64;
    'outer: while next < stop.max_blocks {
        let count = BATCH.max(workers as u64 * 4).min(stop.max_blocks - next);
        for b in run_blocks(sim, &pool, snr_index, snr_db, next, count)? {
            totals.add(&b);
            if totals.block_errors >= stop.min_block_errors {
                break 'outer;
            }
        }
        next += count;
    }
    Ok(BlerRecord::from_totals(snr_db, point_seed(cfg.base_seed, snr_index), totals))
}

/// Runs one SNR point of `cfg`.
pub fn run_bler_point(cfg: &ExperimentConfig, snr_db: f64, workers: usize) -> Result<BlerRecord> {
    let sim = Simulation::new(cfg)?;
    let idx = sim.snr_index(snr_db);
    run_bler_point_at(&sim, idx, snr_db, workers)
}

/// One record per grid point in ascending SNR order.
pub fn sweep(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<BlerRecord>> {
    if cfg.snr_grid_db.is_empty() {
        return Err(Error::Usage("empty SNR grid".into()));
    }
    let sim = Simulation::new(cfg)?;
    let mut order: Vec<usize> = (0..cfg.snr_grid_db.len()).collect();
    order.sort_by(|&a, &b| cfg.snr_grid_db[a].total_cmp(&cfg.snr_grid_db[b]));
    order.into_iter().map(|i| run_bler_point_at(&sim, i, cfg.snr_grid_db[i], workers)).collect()
}
