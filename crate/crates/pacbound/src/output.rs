//! Result rows shared by every command, written as CSV or JSON.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// One row per (run, quantity). Columns that do not apply stay blank.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub instance_id: String,
    pub quantity: String,
    #[serde(serialize_with = "number")]
    pub epsilon: Option<f64>,
    #[serde(serialize_with = "number")]
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    #[serde(serialize_with = "number")]
    pub value: Option<f64>,
    pub tau: Option<u64>,
    pub success_flag: Option<bool>,
    #[serde(serialize_with = "number")]
    pub wall_ms: Option<f64>,
    pub config_hash: String,
}

pub const COLUMNS: [&str; 10] =
    ["instance_id", "quantity", "epsilon", "delta", "seed", "value", "tau", "success_flag", "wall_ms", "config_hash"];

impl ResultRow {
    pub fn new(instance_id: impl Into<String>, quantity: impl Into<String>, config_hash: &str) -> Self {
        Self {
            instance_id: instance_id.into(),
            quantity: quantity.into(),
            epsilon: None,
            delta: None,
            seed: None,
            value: None,
            tau: None,
            success_flag: None,
            wall_ms: None,
            config_hash: config_hash.to_owned(),
        }
    }
}

/// Finite numbers as numbers, infinities as `"+inf"` / `"-inf"`.
fn number<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match *x {
        None => s.serialize_none(),
        Some(v) if v.is_finite() => s.serialize_f64(v),
        Some(v) if v.is_nan() => s.serialize_str("nan"),
        Some(v) if v > 0.0 => s.serialize_str("+inf"),
        Some(_) => s.serialize_str("-inf"),
    }
}

/// First 16 hex digits of the SHA-256 of the configuration's JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("configurations serialize");
    Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(COLUMNS).expect("writing to memory");
    for row in rows {
        writer.serialize(row).expect("writing to memory");
    }
    writer.into_inner().expect("writing to memory")
}

pub fn rows_to_json(rows: &[ResultRow]) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(rows).expect("rows serialize");
    out.push(b'\n');
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(bytes).map_err(|e| CliError::io(path, e))
}

/// Writes `dir/stem.{csv,json}` and returns its path.
pub fn write_rows(dir: &Path, stem: &str, rows: &[ResultRow], format: Format) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let bytes = match format {
        Format::Csv => rows_to_csv(rows),
        Format::Json => rows_to_json(rows),
    };
    write_file(&path, &bytes)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_csv_is_just_the_header() {
        let text = String::from_utf8(rows_to_csv(&[])).unwrap();
        assert_eq!(text, COLUMNS.join(",") + "\n");
    }

    #[test]
    fn blanks_and_infinities() {
        let mut row = ResultRow::new("bandit", "c_lb", "abc");
        row.epsilon = Some(0.0);
        row.value = Some(f64::INFINITY);
        let text = String::from_utf8(rows_to_csv(&[row.clone()])).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "bandit,c_lb,0.0,,,+inf,,,,abc");
        let json: serde_json::Value = serde_json::from_slice(&rows_to_json(&[row])).unwrap();
        assert_eq!(json[0]["value"], "+inf");
        assert!(json[0]["delta"].is_null());
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&("x", 1, [0.1, 0.2]));
        assert_eq!(a, config_hash(&("x", 1, [0.1, 0.2])));
        assert_ne!(a, config_hash(&("x", 2, [0.1, 0.2])));
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_rows(&blocker.join("sub"), "rows", &[], Format::Csv).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
