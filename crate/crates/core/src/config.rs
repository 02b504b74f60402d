//! Experiment configuration and figure presets.
//!
//! Configurations are TOML documents. Every table rejects unknown keys, and
//! keys left out take the documented defaults. A document may name a
//! `preset` (`fig2`, `fig3`, `fig4` or `custom`); preset documents are
//! merged underneath the user's keys. Figure presets define several arms
//! (curves), and overrides apply to every arm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::chanmod::ChannelConfig;
use crate::detect::DetectorKind;
use crate::fec::{CrcPoly, PolarCode, TurboCode, DEFAULT_ITERATIONS, DEFAULT_MAX_QUERIES, DEFAULT_PSI_SCALE};
use crate::phymap::{MappingPolicy, ResourceGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    /// CRC-aided SC-List decoding of a polar code.
    CaScl,
    /// GRAND with joint CRC + polar membership; Hamming-weight order for
    /// hard input, ORBGRAND order when reliabilities are available.
    Grand,
    /// GRAND that always uses the ORBGRAND logistic-weight order.
    Orbgrand,
    /// Rate-1/3 turbo code.
    Turbo,
    /// No channel code: payload bits are sent as is.
    Uncoded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeInput {
    /// Hard bits only.
    Hard,
    /// Hard bits plus per-bit PSI.
    Psi,
    /// Detector LLRs.
    Soft,
}

/// Channel-code parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodeParams {
    /// Codeword length (polar `N`, `3K + 12` for turbo, payload length when
    /// uncoded).
    pub n: usize,
    /// Polar: unfrozen positions; turbo: interleaver size.
    pub k: usize,
    /// When false, polar `K = k + r` instead of `k`.
    pub k_includes_crc: bool,
    /// CRC generator with leading term; 0 disables the CRC.
    pub crc_poly: u64,
    pub list_size: usize,
    pub max_queries: u64,
    pub iterations: u32,
    /// Scale of PSI and hard pseudo-LLRs.
    pub psi_scale: f64,
    /// Design SNR of the polar frozen-set construction, dB.
    pub design_snr_db: f64,
}

impl Default for CodeParams {
    fn default() -> Self {
        Self {
            n: 128,
            k: 116,
            k_includes_crc: true,
            crc_poly: CrcPoly::CRC8.0,
            list_size: 16,
            max_queries: DEFAULT_MAX_QUERIES,
            iterations: DEFAULT_ITERATIONS,
            psi_scale: DEFAULT_PSI_SCALE,
            design_snr_db: 2.0,
        }
    }
}

impl CodeParams {
    pub fn crc(&self) -> Option<CrcPoly> {
        (self.crc_poly != 0).then_some(CrcPoly(self.crc_poly))
    }
}

/// Monte Carlo stopping rule for one SNR point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopRule {
    pub min_block_errors: u64,
    pub max_blocks: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { min_block_errors: 100, max_blocks: 1_000_000 }
    }
}

fn default_detector() -> DetectorKind {
    DetectorKind::Zf
}
fn default_decoder() -> DecoderKind {
    DecoderKind::CaScl
}
fn default_input() -> DecodeInput {
    DecodeInput::Hard
}
fn default_one() -> usize {
    1
}
fn default_seed() -> u64 {
    1
}
fn default_label() -> String {
    "custom".into()
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default = "default_detector")]
    pub detector: DetectorKind,
    /// SSD layer groups; consecutive pairs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssd_groups: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_decoder")]
    pub decoder: DecoderKind,
    #[serde(default = "default_input")]
    pub decode_input: DecodeInput,
    #[serde(default)]
    pub code: CodeParams,
    /// Parallelizability degree `v`.
    #[serde(default = "default_one")]
    pub streams: usize,
    #[serde(default = "default_one")]
    pub codewords_per_stream: usize,
    #[serde(default)]
    pub mapping_policy: MappingPolicy,
    pub snr_grid_db: Vec<f64>,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
}

/// Code instance resolved from [`CodeParams`].
#[derive(Debug, Clone)]
pub enum Codec {
    Polar(PolarCode),
    Turbo(TurboCode),
    Uncoded(usize),
}

impl Codec {
    pub fn payload_len(&self) -> usize {
        match self {
            Self::Polar(c) => c.payload_len(),
            Self::Turbo(c) => c.payload_len(),
            Self::Uncoded(n) => *n,
        }
    }

    pub fn codeword_len(&self) -> usize {
        match self {
            Self::Polar(c) => c.n(),
            Self::Turbo(c) => c.codeword_len(),
            Self::Uncoded(n) => *n,
        }
    }
}

impl ExperimentConfig {
    /// Checks all invariants and cross-field consistency.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        self.channel.validate()?;
        if self.snr_grid_db.is_empty() {
            return cfg_err("snr_grid_db must not be empty".into());
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return cfg_err("snr_grid_db entries must be finite".into());
        }
        if self.stop.min_block_errors < 1 {
            return cfg_err("stop.min_block_errors must be >= 1".into());
        }
        if self.stop.max_blocks < 1 {
            return cfg_err("stop.max_blocks must be >= 1".into());
        }
        if self.channel.num_rx_layers < self.channel.num_tx_layers {
            return cfg_err("channel.num_rx_layers must be >= channel.num_tx_layers".into());
        }
        if self.streams < 1 || self.streams > self.channel.num_tx_layers {
            return cfg_err(format!("streams must be in 1..={}", self.channel.num_tx_layers));
        }
        if self.codewords_per_stream < 1 {
            return cfg_err("codewords_per_stream must be >= 1".into());
        }
        if !(self.code.psi_scale > 0.0) {
            return cfg_err("code.psi_scale must be positive".into());
        }
        if self.decode_input == DecodeInput::Soft && !self.detector.supports_soft() {
            return cfg_err(format!("decode_input = \"soft\" needs a zf, mmse or ssd detector, not {:?}", self.detector));
        }
        if self.decoder == DecoderKind::CaScl && self.code.list_size < 1 {
            return cfg_err("code.list_size must be >= 1".into());
        }
        if self.decoder == DecoderKind::Turbo && self.code.iterations < 1 {
            return cfg_err("code.iterations must be >= 1".into());
        }
        if let Some(groups) = &self.ssd_groups {
            let mut seen = vec![false; self.channel.num_tx_layers];
            for &l in groups.iter().flatten() {
                if l >= seen.len() || seen[l] {
                    return cfg_err("ssd_groups must partition the transmit layers".into());
                }
                seen[l] = true;
            }
            if seen.iter().any(|s| !s) || groups.iter().any(Vec::is_empty) {
                return cfg_err("ssd_groups must partition the transmit layers".into());
            }
        }
        let codec = self.codec()?;
        let n = codec.codeword_len();
        if n % 2 != 0 {
            return cfg_err(format!("codeword length {n} must be even for QPSK"));
        }
        let grid = self.grid();
        for s in 0..self.streams {
            let need = self.codewords_per_stream * n / 2;
            if need > grid.stream_cells(s) {
                return cfg_err(format!("stream {s} needs {need} cells, only {} available", grid.stream_cells(s)));
            }
        }
        Ok(())
    }

    /// Builds the code described by `code`.
    pub fn codec(&self) -> Result<Codec> {
        let c = &self.code;
        let wrap = |e: Error| Error::Config(format!("code: {e}"));
        match self.decoder {
            DecoderKind::CaScl | DecoderKind::Grand | DecoderKind::Orbgrand => {
                let r = c.crc().map_or(0, CrcPoly::degree);
                let k = if c.k_includes_crc { c.k } else { c.k + r };
                PolarCode::new(c.n, k, c.crc(), c.design_snr_db).map(Codec::Polar).map_err(wrap)
            }
            DecoderKind::Turbo => {
                let code = TurboCode::new(c.k, c.crc()).map_err(wrap)?;
                if c.n != code.codeword_len() {
                    return Err(Error::Config(format!(
                        "code.n = {} but a turbo code with k = {} has length {}",
                        c.n,
                        c.k,
                        code.codeword_len()
                    )));
                }
                Ok(Codec::Turbo(code))
            }
            DecoderKind::Uncoded => {
                if c.n != c.k || c.n == 0 {
                    return Err(Error::Config("uncoded transmission needs code.n == code.k > 0".into()));
                }
                Ok(Codec::Uncoded(c.n))
            }
        }
    }

    /// Smallest frame holding every codeword.
    pub fn grid(&self) -> ResourceGrid {
        let layers = self.channel.num_tx_layers;
        let sc = self.channel.num_subcarriers;
        let base = ResourceGrid { layers, subcarriers: sc, time_slots: 1, streams: self.streams };
        let n = self.code_len_hint();
        let slots = (0..self.streams)
            .map(|s| {
                let per_slot = base.stream_layers(s).len() * sc;
                (self.codewords_per_stream * n / 2).div_ceil(per_slot)
            })
            .max()
            .unwrap_or(1)
            .max(1);
        ResourceGrid { time_slots: slots, ..base }
    }

    fn code_len_hint(&self) -> usize {
        self.codec().map(|c| c.codeword_len()).unwrap_or(self.code.n)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Named figure presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    #[default]
    Custom,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            "fig4" => Ok(Self::Fig4),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Config(format!("unknown preset \"{other}\" (expected fig2, fig3, fig4 or custom)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Custom => "custom",
        })
    }
}

/// One labelled curve of a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub label: String,
    pub config: ExperimentConfig,
}

fn table(text: &str) -> Table {
    text.parse::<Table>().expect("preset documents are valid TOML")
}

const FIG2_COMMON: &str = r#"
detector = "ssd"
decoder = "ca-scl"
mapping_policy = "diverse"
snr_grid_db = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]
[code]
list_size = 16
crc_poly = 0x107
"#;

const FIG3_COMMON: &str = r#"
decoder = "turbo"
streams = 4
mapping_policy = "diverse"
snr_grid_db = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0]
[code]
n = 780
k = 256
crc_poly = 0
iterations = 8
"#;

const FIG4_COMMON: &str = r#"
detector = "zf"
streams = 4
mapping_policy = "diverse"
snr_grid_db = [12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0]
[code]
n = 128
k = 116
k_includes_crc = true
crc_poly = 0x107
list_size = 16
max_queries = 1048576
"#;

fn arm(common: &str, label: &str, extra: &str) -> (String, Table) {
    let mut t = table(common);
    merge(&mut t, table(extra));
    t.insert("label".into(), Value::String(label.into()));
    (label.to_string(), t)
}

/// Preset arms as TOML tables (before user overrides).
fn preset_tables(preset: Preset) -> Vec<(String, Table)> {
    match preset {
        Preset::Custom => vec![("custom".into(), Table::new())],
        Preset::Fig2 => {
            let parallel = "streams = 4\n[code]\nn = 128\nk = 74\n";
            let baseline = "streams = 1\n[code]\nn = 512\nk = 296\n";
            vec![
                arm(FIG2_COMMON, "parallel-hard", &format!("decode_input = \"hard\"\n{parallel}")),
                arm(FIG2_COMMON, "baseline-hard", &format!("decode_input = \"hard\"\n{baseline}")),
                arm(FIG2_COMMON, "parallel-soft", &format!("decode_input = \"soft\"\n{parallel}")),
                arm(FIG2_COMMON, "baseline-soft", &format!("decode_input = \"soft\"\n{baseline}")),
            ]
        }
        Preset::Fig3 => {
            let mut arms = Vec::new();
            for det in ["zf", "pcd", "cd"] {
                for input in ["hard", "psi"] {
                    arms.push(arm(
                        FIG3_COMMON,
                        &format!("{det}-{input}"),
                        &format!("detector = \"{det}\"\ndecode_input = \"{input}\"\n"),
                    ));
                }
            }
            arms.push(arm(FIG3_COMMON, "zf-soft", "detector = \"zf\"\ndecode_input = \"soft\"\n"));
            arms.push(arm(FIG3_COMMON, "ssd-soft", "detector = \"ssd\"\ndecode_input = \"soft\"\n"));
            arms
        }
        Preset::Fig4 => vec![
            arm(FIG4_COMMON, "scl-psi", "decoder = \"ca-scl\"\ndecode_input = \"psi\"\n"),
            arm(FIG4_COMMON, "grand-psi", "decoder = \"grand\"\ndecode_input = \"psi\"\n"),
            arm(FIG4_COMMON, "scl-hard", "decoder = \"ca-scl\"\ndecode_input = \"hard\"\n"),
            arm(FIG4_COMMON, "grand-hard", "decoder = \"grand\"\ndecode_input = \"hard\"\n"),
            arm(FIG4_COMMON, "scl-soft", "decoder = \"ca-scl\"\ndecode_input = \"soft\"\n"),
            arm(FIG4_COMMON, "grand-soft", "decoder = \"grand\"\ndecode_input = \"soft\"\n"),
            arm(FIG4_COMMON, "uncoded", "decoder = \"uncoded\"\n[code]\nn = 128\nk = 128\ncrc_poly = 0\n"),
        ],
    }
}

/// Recursively overlays `over` onto `base`.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_doc(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| Error::Config(e.to_string()))
}

fn finish(label: String, t: Table) -> Result<Arm> {
    let text = toml::to_string(&t).map_err(|e| Error::Config(e.to_string()))?;
    let config: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(Arm { label, config })
}

/// Resolves every arm of `preset` with the overrides of `text` applied.
/// A `preset` key inside the document is honoured when `preset` is `None`.
pub fn resolve_arms(text: &str, preset: Option<Preset>) -> Result<Vec<Arm>> {
    resolve(text, preset, usize::MAX)
}

fn resolve(text: &str, preset: Option<Preset>, max_arms: usize) -> Result<Vec<Arm>> {
    // Strict key checking with line numbers on the user's own document.
    let mut doc = parse_doc(text)?;
    let doc_preset = match doc.remove("preset") {
        Some(Value::String(s)) => Some(s.parse::<Preset>()?),
        Some(other) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
        None => None,
    };
    let preset = preset.or(doc_preset).unwrap_or_default();
    check_keys(text)?;
    preset_tables(preset)
        .into_iter()
        .take(max_arms)
        .map(|(label, mut t)| {
            merge(&mut t, doc.clone());
            finish(label, t)
        })
        .collect()
}

/// Parses a configuration document into its primary experiment (the first
/// arm of its preset). Other arms are not resolved.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    Ok(resolve(text, None, 1)?.swap_remove(0).config)
}

/// As [`parse_config`] with an explicit preset.
pub fn parse_config_with_preset(text: &str, preset: Preset) -> Result<ExperimentConfig> {
    Ok(resolve(text, Some(preset), 1)?.swap_remove(0).config)
}

/// Mirror of [`ExperimentConfig`] with every field optional, used only to
/// report unknown keys against the user's text (so errors carry its lines).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct KeyCheck {
    preset: Option<String>,
    label: Option<String>,
    channel: Option<ChannelKeys>,
    detector: Option<DetectorKind>,
    ssd_groups: Option<Vec<Vec<usize>>>,
    decoder: Option<DecoderKind>,
    decode_input: Option<DecodeInput>,
    code: Option<CodeKeys>,
    streams: Option<usize>,
    codewords_per_stream: Option<usize>,
    mapping_policy: Option<MappingPolicy>,
    snr_grid_db: Option<Vec<f64>>,
    stop: Option<StopRule>,
    base_seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct ChannelKeys {
    kind: Option<crate::chanmod::ChannelKind>,
    carrier_frequency_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    num_subcarriers: Option<usize>,
    num_tx_layers: Option<usize>,
    num_rx_layers: Option<usize>,
    distance_m: Option<f64>,
    absorption_coefficient: Option<f64>,
    num_nlos_rays: Option<usize>,
    max_ray_delay_s: Option<f64>,
    rician_k_factor: Option<f64>,
    spatial_correlation_rho: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct CodeKeys {
    n: Option<usize>,
    k: Option<usize>,
    k_includes_crc: Option<bool>,
    crc_poly: Option<u64>,
    list_size: Option<usize>,
    max_queries: Option<u64>,
    iterations: Option<u32>,
    psi_scale: Option<f64>,
    design_snr_db: Option<f64>,
}

fn check_keys(text: &str) -> Result<()> {
    toml::from_str::<KeyCheck>(text).map(|_| ()).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig4_preset_defaults() {
        let cfg = parse_config_with_preset("", Preset::Fig4).unwrap();
        assert_eq!((cfg.code.n, cfg.code.k, cfg.code.list_size), (128, 116, 16));
        assert_eq!(cfg.detector, DetectorKind::Zf);
        assert_eq!((cfg.channel.num_tx_layers, cfg.channel.num_rx_layers), (4, 4));
        assert!(cfg.code.k_includes_crc);
        match cfg.codec().unwrap() {
            Codec::Polar(c) => assert_eq!((c.k(), c.payload_len()), (116, 108)),
            _ => panic!("fig4 is polar"),
        }
    }

    #[test]
    fn fig2_preset_has_parallel_and_baseline() {
        let arms = resolve_arms("", Some(Preset::Fig2)).unwrap();
        let par = &arms.iter().find(|a| a.label == "parallel-hard").unwrap().config;
        let base = &arms.iter().find(|a| a.label == "baseline-hard").unwrap().config;
        assert_eq!((par.code.n, par.code.k, par.streams), (128, 74, 4));
        assert_eq!((base.code.n, base.code.k, base.streams), (512, 296, 1));
        assert_eq!(par.code.list_size, 16);
    }

    #[test]
    fn presets_are_total() {
        for p in [Preset::Fig2, Preset::Fig3, Preset::Fig4] {
            for arm in resolve_arms("", Some(p)).unwrap() {
                arm.config.validate().unwrap();
            }
        }
    }

    #[test]
    fn custom_needs_snr_grid() {
        let err = parse_config("detector = \"zf\"").unwrap_err();
        assert!(err.to_string().contains("snr_grid_db"), "{err}");
        assert!(parse_config("snr_grid_db = [1.0]").is_ok());
    }

    #[test]
    fn unknown_key_named_with_line() {
        let err = parse_config("snr_grid_db = [1.0]\n\n[code]\nlist_sise = 4\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("list_sise"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn overrides_merge_onto_preset() {
        let cfg = parse_config("preset = \"fig4\"\nbase_seed = 99\n[code]\nlist_size = 8\n").unwrap();
        assert_eq!(cfg.base_seed, 99);
        assert_eq!(cfg.code.list_size, 8);
        assert_eq!(cfg.code.n, 128);
    }

    #[test]
    fn invariant_violations() {
        assert!(parse_config("snr_grid_db = []").is_err());
        assert!(parse_config("snr_grid_db = [1.0]\n[stop]\nmin_block_errors = 0\n").is_err());
        assert!(parse_config("snr_grid_db = [1.0]\ndetector = \"cd\"\ndecode_input = \"soft\"\n").is_err());
        assert!(parse_config("snr_grid_db = [1.0]\nstreams = 5\n").is_err());
        assert!(parse_config("snr_grid_db = [1.0]\ndecoder = \"turbo\"\n[code]\nk = 256\nn = 700\n").is_err());
        assert!(parse_config("snr_grid_db = [1.0]\n[code]\nn = 100\n").is_err());
        assert!(parse_config("snr_grid_db = [1.0]\npreset = \"fig9\"\n").is_err());
    }

    #[test]
    fn json_round_trip() {
        for p in [Preset::Fig2, Preset::Fig3, Preset::Fig4] {
            for arm in resolve_arms("", Some(p)).unwrap() {
                let back = ExperimentConfig::from_json(&arm.config.to_json()).unwrap();
                assert_eq!(back, arm.config);
            }
        }
    }

    #[test]
    fn grid_fits_codewords() {
        let cfg = parse_config_with_preset("", Preset::Fig3).unwrap();
        let g = cfg.grid();
        assert_eq!(g.streams, 4);
        assert!(g.stream_cells(0) * 2 >= 780);
        assert!((g.time_slots - 1) * g.subcarriers * 2 < 780);
    }
}
