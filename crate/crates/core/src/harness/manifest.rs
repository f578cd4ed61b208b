use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const COL_REFERENCE: &str = "reference_path";
pub(crate) const COL_DISTORTED: &str = "distorted_path";
pub(crate) const COL_MOS: &str = "mos";
pub(crate) const COL_DATABASE: &str = "database";
pub(crate) const COL_DISTORTION: &str = "distortion";

/// One reference/distorted pair with its opinion score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub reference_path: PathBuf,
    pub distorted_path: PathBuf,
    pub mos: f64,
    pub database: String,
    pub distortion: Option<String>,
}

/// Reads a manifest file. Relative image paths are resolved against the
/// directory containing the manifest.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty());
    read_manifest(file, base)
}

pub(crate) struct Columns {
    pub reference: usize,
    pub distorted: usize,
    pub mos: usize,
    pub database: usize,
    pub distortion: Option<usize>,
}

impl Columns {
    pub fn locate(headers: &csv::StringRecord) -> Result<Self> {
        if headers.iter().all(|h| h.trim().is_empty()) {
            return Err(Error::Manifest {
                row: None,
                message: "missing header".into(),
            });
        }
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let need = |name: &str| {
            find(name).ok_or_else(|| Error::Manifest {
                row: None,
                message: format!("missing required column '{name}'"),
            })
        };
        Ok(Self {
            reference: need(COL_REFERENCE)?,
            distorted: need(COL_DISTORTED)?,
            mos: need(COL_MOS)?,
            database: need(COL_DATABASE)?,
            distortion: find(COL_DISTORTION),
        })
    }

    /// Parses the manifest fields of one record. `row` is 1-based.
    pub fn entry(
        &self,
        record: &csv::StringRecord,
        base: Option<&Path>,
    ) -> std::result::Result<ManifestEntry, String> {
        let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
        let required = |i: usize, name: &str| {
            let v = field(i);
            if v.is_empty() {
                Err(format!("empty {name}"))
            } else {
                Ok(v)
            }
        };
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        let reference = required(self.reference, COL_REFERENCE)?;
        let distorted = required(self.distorted, COL_DISTORTED)?;
        let mos_text = required(self.mos, COL_MOS)?;
        let mos: f64 = mos_text
            .parse()
            .map_err(|_| format!("unparseable mos '{mos_text}'"))?;
        if !mos.is_finite() {
            return Err(format!("non-finite mos '{mos_text}'"));
        }
        let database = required(self.database, COL_DATABASE)?;
        let distortion = self
            .distortion
            .map(field)
            .filter(|d| !d.is_empty())
            .map(str::to_string);
        Ok(ManifestEntry {
            reference_path: resolve(reference),
            distorted_path: resolve(distorted),
            mos,
            database: database.to_string(),
            distortion,
        })
    }
}

/// Parses manifest CSV from any reader. Extra columns are ignored. All
/// offending rows are reported in one error; `row` holds the first of them.
pub fn read_manifest<R: Read>(reader: R, base: Option<&Path>) -> Result<Vec<ManifestEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = Columns::locate(&headers)?;

    let mut entries = Vec::new();
    let mut problems: Vec<(usize, String)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        match cols.entry(&record, base) {
            Ok(e) => entries.push(e),
            Err(msg) => problems.push((row, msg)),
        }
    }
    if let Some(&(first, _)) = problems.first() {
        let message = problems
            .iter()
            .map(|(r, m)| format!("row {r}: {m}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Manifest {
            row: Some(first),
            message,
        });
    }
    Ok(entries)
}
