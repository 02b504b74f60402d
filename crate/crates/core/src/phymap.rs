//! QPSK and the mapping of short codewords onto resource cells.
//!
//! A frame is a `time_slots x subcarriers x layers` grid of QPSK cells, two
//! coded bits per cell. Each of the `v` streams owns a contiguous block of
//! layers; codewords of a stream are placed one after another in that
//! stream's cells according to a [`MappingPolicy`].

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::usage;
use crate::{Bit, Complex, Result};

/// Gray-mapped QPSK, unit average energy.
pub fn qpsk_symbol(b0: Bit, b1: Bit) -> Complex {
    let re = if b0 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if b1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Complex::new(re, im)
}

/// The four QPSK points indexed by `2*b0 + b1`.
pub const QPSK_POINTS: [Complex; 4] = [
    Complex::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

pub fn qpsk_modulate(bits: &[Bit]) -> Result<Vec<Complex>> {
    if !bits.len().is_multiple_of(2) {
        return usage(format!("QPSK needs an even number of bits, got {}", bits.len()));
    }
    Ok(bits.chunks_exact(2).map(|p| qpsk_symbol(p[0], p[1])).collect())
}

/// Sign slicer. A zero real or imaginary part decides bit 0.
pub fn qpsk_hard_demodulate(symbol: Complex) -> [Bit; 2] {
    [(symbol.re < 0.0) as Bit, (symbol.im < 0.0) as Bit]
}

/// Nearest QPSK point.
pub fn qpsk_slice(symbol: Complex) -> Complex {
    let [b0, b1] = qpsk_hard_demodulate(symbol);
    qpsk_symbol(b0, b1)
}

/// How a stream's codeword bits are laid over its cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MappingPolicy {
    /// Fill time slots of one (layer, subcarrier) before moving on.
    Local,
    /// Consecutive symbols rotate over subcarriers, then layers.
    #[default]
    Diverse,
}

/// Dimensions of one transmission frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceGrid {
    pub layers: usize,
    pub subcarriers: usize,
    pub time_slots: usize,
    /// Parallelizability degree `v`: number of independent streams.
    pub streams: usize,
}

impl ResourceGrid {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.subcarriers == 0 || self.time_slots == 0 {
            return usage("resource grid dimensions must be nonzero");
        }
        if self.streams == 0 || self.streams > self.layers {
            return usage(format!(
                "stream count {} must be in 1..={} (one layer per stream minimum)",
                self.streams, self.layers
            ));
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.layers * self.subcarriers * self.time_slots
    }

    /// Layers owned by `stream`: contiguous blocks of `layers / v`, the last
    /// stream taking any remainder.
    pub fn stream_layers(&self, stream: usize) -> std::ops::Range<usize> {
        let per = self.layers / self.streams;
        let start = stream * per;
        let end = if stream + 1 == self.streams { self.layers } else { start + per };
        start..end
    }

    /// Number of QPSK cells available to `stream`.
    pub fn stream_cells(&self, stream: usize) -> usize {
        self.stream_layers(stream).len() * self.subcarriers * self.time_slots
    }

    /// Flat index of a cell: time-major, then subcarrier, then layer.
    pub fn cell_index(&self, cell: &ResourceCell) -> usize {
        (cell.time_slot * self.subcarriers + cell.subcarrier) * self.layers + cell.layer
    }
}

/// One QPSK cell of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResourceCell {
    pub stream_id: usize,
    pub layer: usize,
    pub subcarrier: usize,
    pub time_slot: usize,
}

/// Where one coded bit travels: its cell and which of the two QPSK bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitPlacement {
    pub cell: ResourceCell,
    pub symbol_bit: u8,
}

/// A codeword and its placement in the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordBlock {
    pub coded_bits: Vec<Bit>,
    pub stream_id: usize,
    /// `cell_map[i]` is the placement of `coded_bits[i]`.
    pub cell_map: Vec<BitPlacement>,
}

/// Transmit frame: one QPSK symbol per occupied cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitFrame {
    pub grid: ResourceGrid,
    /// Indexed by [`ResourceGrid::cell_index`]; `None` for unused cells.
    pub symbols: Vec<Option<Complex>>,
}

impl TransmitFrame {
    /// Symbol vector sent on all layers at `(time_slot, subcarrier)`.
    pub fn layer_vector(&self, time_slot: usize, subcarrier: usize) -> Vec<Option<Complex>> {
        let base = (time_slot * self.grid.subcarriers + subcarrier) * self.grid.layers;
        self.symbols[base..base + self.grid.layers].to_vec()
    }
}

fn place_symbol(grid: &ResourceGrid, stream: usize, index: usize, policy: MappingPolicy) -> ResourceCell {
    let layers = grid.stream_layers(stream);
    let nl = layers.len();
    let f = grid.subcarriers;
    let (layer_off, subcarrier, time_slot) = match policy {
        MappingPolicy::Local => {
            let t = index % grid.time_slots;
            let rest = index / grid.time_slots;
            (rest / f, rest % f, t)
        }
        MappingPolicy::Diverse => {
            let sc = index % f;
            let rest = index / f;
            (rest % nl, sc, rest / nl)
        }
    };
    ResourceCell { stream_id: stream, layer: layers.start + layer_off, subcarrier, time_slot }
}

/// Places `codewords` (each tagged with its stream) on the grid.
pub fn map_streams(
    codewords: &[(usize, Vec<Bit>)],
    grid: &ResourceGrid,
    policy: MappingPolicy,
) -> Result<(TransmitFrame, Vec<CodewordBlock>)> {
    grid.validate()?;
    let mut used = vec![0usize; grid.streams];
    let mut symbols = vec![None; grid.num_cells()];
    let mut blocks = Vec::with_capacity(codewords.len());
    for (stream, bits) in codewords {
        let stream = *stream;
        if stream >= grid.streams {
            return usage(format!("stream id {stream} out of range (v = {})", grid.streams));
        }
        if bits.len() % 2 != 0 {
            return usage("codeword length must be even for QPSK mapping");
        }
        let need = bits.len() / 2;
        if used[stream] + need > grid.stream_cells(stream) {
            return usage(format!(
                "stream {stream} capacity exceeded: {} cells needed, {} available",
                used[stream] + need,
                grid.stream_cells(stream)
            ));
        }
        let mut cell_map = Vec::with_capacity(bits.len());
        for (m, pair) in bits.chunks_exact(2).enumerate() {
            let cell = place_symbol(grid, stream, used[stream] + m, policy);
            symbols[grid.cell_index(&cell)] = Some(qpsk_symbol(pair[0], pair[1]));
            cell_map.push(BitPlacement { cell, symbol_bit: 0 });
            cell_map.push(BitPlacement { cell, symbol_bit: 1 });
        }
        used[stream] += need;
        blocks.push(CodewordBlock { coded_bits: bits.clone(), stream_id: stream, cell_map });
    }
    Ok((TransmitFrame { grid: *grid, symbols }, blocks))
}

/// Detector output over a whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub grid: ResourceGrid,
    /// Two hard bits per cell, `2 * cell_index + symbol_bit`.
    pub hard_bits: Vec<Bit>,
    /// Per-cell PSI (post-detection SNR of the cell's layer).
    pub psi: Vec<f64>,
    /// Optional per-bit LLRs (positive favours bit 0), same indexing as
    /// `hard_bits`.
    pub llrs: Option<Vec<f64>>,
}

impl ReceivedFrame {
    pub fn new(grid: ResourceGrid, with_llrs: bool) -> Self {
        let n = grid.num_cells();
        Self {
            grid,
            hard_bits: vec![0; 2 * n],
            psi: vec![0.0; n],
            llrs: with_llrs.then(|| vec![0.0; 2 * n]),
        }
    }

    /// Builds a noiseless received frame from a transmit frame with a fixed
    /// PSI per layer.
    pub fn from_transmit(frame: &TransmitFrame, psi_per_layer: &[f64]) -> Self {
        let mut rx = Self::new(frame.grid, false);
        for (idx, s) in frame.symbols.iter().enumerate() {
            if let Some(s) = s {
                let [b0, b1] = qpsk_hard_demodulate(*s);
                rx.hard_bits[2 * idx] = b0;
                rx.hard_bits[2 * idx + 1] = b1;
            }
            rx.psi[idx] = psi_per_layer[idx % frame.grid.layers];
        }
        rx
    }
}

/// Per-codeword receiver view after demapping.
#[derive(Debug, Clone, PartialEq)]
pub struct DemappedCodeword {
    pub stream_id: usize,
    pub hard_bits: Vec<Bit>,
    pub psi_tags: Vec<f64>,
    pub llrs: Option<Vec<f64>>,
}

/// Inverse of [`map_streams`]: gathers each codeword's bits in their
/// original order, tagging every bit with the PSI of its cell.
pub fn demap_streams(frame: &ReceivedFrame, blocks: &[CodewordBlock]) -> Result<Vec<DemappedCodeword>> {
    let grid = &frame.grid;
    let mut out = Vec::with_capacity(blocks.len());
    for block in blocks {
        if block.cell_map.len() != block.coded_bits.len() {
            return usage("cell map length differs from codeword length");
        }
        let n = block.cell_map.len();
        let mut hard_bits = Vec::with_capacity(n);
        let mut psi_tags = Vec::with_capacity(n);
        let mut llrs = frame.llrs.as_ref().map(|_| Vec::with_capacity(n));
        for p in &block.cell_map {
            let c = &p.cell;
            if c.layer >= grid.layers
                || c.subcarrier >= grid.subcarriers
                || c.time_slot >= grid.time_slots
                || c.stream_id != block.stream_id
                || p.symbol_bit > 1
            {
                return usage("cell map does not match the received frame");
            }
            let idx = grid.cell_index(c);
            let bit_idx = 2 * idx + p.symbol_bit as usize;
            hard_bits.push(frame.hard_bits[bit_idx]);
            psi_tags.push(frame.psi[idx]);
            if let (Some(dst), Some(src)) = (llrs.as_mut(), frame.llrs.as_ref()) {
                dst.push(src[bit_idx]);
            }
        }
        out.push(DemappedCodeword { stream_id: block.stream_id, hard_bits, psi_tags, llrs });
    }
    Ok(out)
}
