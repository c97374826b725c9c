//! File formats: CSV tables, JSON sidecars and the flat run configuration.
//!
//! Every writer renders its output in memory and then replaces the target
//! through a temporary file and a rename, so an interrupted command never
//! leaves a truncated file under the final name. Floats are written with
//! Rust's shortest round-trip formatting, which makes reruns byte-identical
//! and reads lossless.

mod config;
mod fields;
mod outputs;
mod posterior;

use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{parse_model_label, parse_scenario, RunConfig};
pub use fields::{load_monitors, load_sensitivity, sensitivity_header, write_monitors, write_sensitivity, MONITOR_HEADER};
pub use outputs::{
    read_copula, write_copula, write_diagnostics, write_difference, write_residual_pairs, write_residuals,
    write_scores, write_summary, write_trace,
};
pub use posterior::{posterior_columns, read_posterior, write_posterior, PosteriorManifest};

/// Write `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        line,
        msg: msg.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// In-memory CSV writer whose contents go through [`write_atomic`].
struct CsvOut {
    w: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    fn new<I, S>(header: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| Error::Serde(e.to_string()))?;
        Ok(Self { w })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(|e| Error::Serde(e.to_string()))
    }

    fn finish(self, path: &Path) -> Result<()> {
        let bytes = self.w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
        write_atomic(path, &bytes)
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| parse_error(path, line, format!("cannot parse {name} from {raw:?}")))
}
