use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Columns, ManifestEntry, COL_DATABASE, COL_DISTORTED, COL_DISTORTION, COL_MOS, COL_REFERENCE};
use crate::error::{Error, Result};
use crate::filterbank::WaveletId;
use crate::image::{decode_image, DecodedImage};
use crate::metric::{haarpsi, psnr, ColorMode, MetricParams};

const COL_ERROR: &str = "error";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Grayscale HaarPSI on `rgb2gray` luma.
    HaarPsi,
    /// Colour HaarPSIC.
    HaarPsiC,
    /// PSNR on luma, peak 255.
    Psnr,
}

/// A metric plus its configuration, addressed by a label such as
/// `haarpsi`, `haarpsic`, `psnr` or `haarpsi-daub4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub params: MetricParams,
}

impl MetricSpec {
    pub fn new(kind: MetricKind) -> Self {
        let mode = match kind {
            MetricKind::HaarPsiC => ColorMode::Color,
            _ => ColorMode::Grayscale,
        };
        Self {
            kind,
            params: MetricParams::default().with_color_mode(mode),
        }
    }

    /// Overrides `C` and `alpha` (HaarPSI variants only).
    pub fn with_constants(mut self, c: f64, alpha: f64) -> Result<Self> {
        self.params.c = c;
        self.params.alpha = alpha;
        self.params.validate()?;
        Ok(self)
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Scores one decoded pair.
    pub fn evaluate(&self, reference: &DecodedImage, distorted: &DecodedImage) -> Result<f64> {
        match self.kind {
            MetricKind::Psnr => psnr(&reference.to_gray(), &distorted.to_gray(), 255.0),
            MetricKind::HaarPsi | MetricKind::HaarPsiC => {
                Ok(haarpsi(reference, distorted, &self.params, false)?.score)
            }
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.kind {
            MetricKind::HaarPsi => "haarpsi",
            MetricKind::HaarPsiC => "haarpsic",
            MetricKind::Psnr => return f.write_str("psnr"),
        };
        if self.params.wavelet == WaveletId::Haar {
            f.write_str(base)
        } else {
            write!(f, "{base}-{}", self.params.wavelet)
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (base, wavelet) = match s.split_once('-') {
            Some((b, w)) => (b, Some(w.parse::<WaveletId>()?)),
            None => (s.as_str(), None),
        };
        let kind = match base {
            "haarpsi" => MetricKind::HaarPsi,
            "haarpsic" => MetricKind::HaarPsiC,
            "psnr" if wavelet.is_none() => MetricKind::Psnr,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown metric '{s}' (expected haarpsi, haarpsic, psnr, or haarpsi[c]-<wavelet>)"
                )))
            }
        };
        let mut spec = MetricSpec::new(kind);
        if let Some(w) = wavelet {
            spec.params.wavelet = w;
        }
        Ok(spec)
    }
}

/// Scores for one manifest entry, in metric order. `error` is set (and
/// `scores` empty) when the entry could not be scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub entry: ManifestEntry,
    pub scores: Vec<f64>,
    pub error: Option<String>,
}

impl ScoreRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub metrics: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

fn score_entry(entry: &ManifestEntry, metrics: &[MetricSpec]) -> ScoreRow {
    let attempt = || -> Result<Vec<f64>> {
        let reference = decode_image(&entry.reference_path)?;
        let distorted = decode_image(&entry.distorted_path)?;
        metrics
            .iter()
            .map(|m| m.evaluate(&reference, &distorted))
            .collect()
    };
    match attempt() {
        Ok(scores) => ScoreRow {
            entry: entry.clone(),
            scores,
            error: None,
        },
        Err(e) => ScoreRow {
            entry: entry.clone(),
            scores: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Scores every entry with every metric on `jobs` worker threads. Output
/// order follows the manifest; failures become error rows.
pub fn score_manifest(entries: &[ManifestEntry], metrics: &[MetricSpec], jobs: usize) -> Result<ScoreTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {jobs} workers: {e}")))?;
    let rows = pool.install(|| {
        entries
            .par_iter()
            .map(|e| score_entry(e, metrics))
            .collect::<Vec<_>>()
    });
    Ok(ScoreTable {
        metrics: metrics.iter().map(MetricSpec::label).collect(),
        rows,
    })
}

fn format_score(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.6}")
    }
}

fn parse_score(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

impl ScoreTable {
    /// Manifest columns, one column per metric (6 decimals, `inf` for the
    /// PSNR sentinel) and a trailing `error` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![COL_REFERENCE, COL_DISTORTED, COL_MOS, COL_DATABASE, COL_DISTORTION];
        header.extend(self.metrics.iter().map(String::as_str));
        header.push(COL_ERROR);
        w.write_record(&header)?;
        for row in &self.rows {
            let e = &row.entry;
            let mut rec = vec![
                e.reference_path.display().to_string(),
                e.distorted_path.display().to_string(),
                e.mos.to_string(),
                e.database.clone(),
                e.distortion.clone().unwrap_or_default(),
            ];
            if row.is_ok() {
                rec.extend(row.scores.iter().map(|&v| format_score(v)));
            } else {
                rec.extend(std::iter::repeat_n(String::new(), self.metrics.len()));
            }
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Reads a table written by [`ScoreTable::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols = Columns::locate(&headers)?;
        let fixed = [COL_REFERENCE, COL_DISTORTED, COL_MOS, COL_DATABASE, COL_DISTORTION, COL_ERROR];
        let metric_cols: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| !fixed.contains(h))
            .map(|(i, h)| (i, h.to_string()))
            .collect();
        let error_col = headers.iter().position(|h| h == COL_ERROR);

        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            let entry = cols
                .entry(&record, None)
                .map_err(|message| Error::Manifest { row: Some(row), message })?;
            let error = error_col
                .and_then(|c| record.get(c))
                .filter(|s| !s.is_empty())
                .map(str::to_string);
            let scores = if error.is_some() {
                Vec::new()
            } else {
                metric_cols
                    .iter()
                    .map(|(c, name)| {
                        let text = record.get(*c).unwrap_or("");
                        parse_score(text).ok_or_else(|| Error::Manifest {
                            row: Some(row),
                            message: format!("bad {name} value '{text}'"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            rows.push(ScoreRow { entry, scores, error });
        }
        Ok(Self {
            metrics: metric_cols.into_iter().map(|(_, n)| n).collect(),
            rows,
        })
    }
}
