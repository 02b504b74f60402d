//! CSV and JSON result files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::simcore::BlerRecord;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "snr_db,blocks,block_errors,bler,mean_queries,mean_op_count,abandonment_rate,seed";

/// Provenance note attached to every JSON result.
pub const CHANNEL_PROVENANCE: &str =
    "stand-in: synthetic Rician multipath channel with spreading and molecular absorption loss; \
     parameters are repository defaults, not measured or ray-traced data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmitFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl FromStr for EmitFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown emit format \"{other}\" (expected csv, json or both)"))),
        }
    }
}

/// Formats a float in plain decimal without exponent; `-0` prints as `0`.
fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        x.to_string()
    }
}

/// CSV text, one row per record.
pub fn records_to_csv(records: &[BlerRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(r.snr_db),
            r.blocks,
            r.block_errors,
            num(r.bler),
            num(r.mean_queries),
            num(r.mean_op_count),
            num(r.abandonment_rate),
            r.seed
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub label: String,
    pub channel_provenance: String,
    pub config: ExperimentConfig,
    pub records: Vec<BlerRecord>,
}

/// JSON mirror of the records plus the resolved configuration.
pub fn records_to_json(label: &str, config: &ExperimentConfig, records: &[BlerRecord]) -> String {
    let doc = ResultDocument {
        label: label.into(),
        channel_provenance: CHANNEL_PROVENANCE.into(),
        config: config.clone(),
        records: records.to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("result document serializes")
}

/// Writes `<label>.csv` and/or `<label>.json` into `dir`, creating it.
pub fn emit_results(
    records: &[BlerRecord],
    label: &str,
    config: &ExperimentConfig,
    dir: &Path,
    format: EmitFormat,
) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Usage("no records to emit".into()));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if matches!(format, EmitFormat::Csv | EmitFormat::Both) {
        let p = dir.join(format!("{label}.csv"));
        fs::write(&p, records_to_csv(records))?;
        written.push(p);
    }
    if matches!(format, EmitFormat::Json | EmitFormat::Both) {
        let p = dir.join(format!("{label}.json"));
        fs::write(&p, records_to_json(label, config, records))?;
        written.push(p);
    }
    Ok(written)
}
