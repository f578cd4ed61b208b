use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::score::ScoreTable;
use crate::error::{Error, Result};
use crate::stats::{significance, Correlations, PairedSamples};

/// Orientation of the subjective scores of a database.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Higher is better (TID2008, TID2013).
    #[default]
    Mos,
    /// Higher is worse (LIVE, CSIQ).
    Dmos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Metric label every other metric is tested against.
    pub baseline: Option<String>,
    /// Per-database polarity; databases not listed are treated as MOS.
    pub polarity: BTreeMap<String, Polarity>,
    /// Cells with fewer samples are omitted.
    pub min_samples: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            baseline: None,
            polarity: BTreeMap::new(),
            min_samples: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub n: usize,
    pub srocc: f64,
    pub pearson: f64,
    pub kendall: f64,
}

/// Fisher-z verdict of `metric` against the baseline on one cell.
/// `distortion` is `None` for whole-database cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceEntry {
    pub database: String,
    pub distortion: Option<String>,
    pub metric: String,
    pub baseline: String,
    pub n: usize,
    pub metric_srocc: f64,
    pub baseline_srocc: f64,
    pub z_stat: f64,
    pub significant_05: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub distorted_path: String,
    pub mos: f64,
    pub distortion: Option<String>,
    /// One entry per metric; `None` where the score was unusable.
    pub scores: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterSeries {
    pub database: String,
    pub polarity: Polarity,
    pub metrics: Vec<String>,
    pub points: Vec<ScatterPoint>,
}

impl ScatterSeries {
    /// Recomputes the coefficients of metric `index`, optionally restricted
    /// to one distortion.
    pub fn correlations(&self, index: usize, distortion: Option<&str>) -> Result<CorrelationCell> {
        let (scores, mos): (Vec<f64>, Vec<f64>) = self
            .points
            .iter()
            .filter(|p| distortion.is_none() || p.distortion.as_deref() == distortion)
            .filter_map(|p| p.scores.get(index).copied().flatten().map(|s| (s, p.mos)))
            .unzip();
        cell(scores, mos)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metrics: Vec<String>,
    pub baseline: Option<String>,
    /// database -> metric -> cell
    pub per_database: BTreeMap<String, BTreeMap<String, CorrelationCell>>,
    /// database -> distortion -> metric -> cell
    pub per_distortion: BTreeMap<String, BTreeMap<String, BTreeMap<String, CorrelationCell>>>,
    pub significance: Vec<SignificanceEntry>,
    pub scatter: Vec<ScatterSeries>,
    pub warnings: Vec<String>,
}

fn cell(scores: Vec<f64>, mos: Vec<f64>) -> Result<CorrelationCell> {
    let n = scores.len();
    let c = Correlations::compute(&PairedSamples::new(scores, mos)?)?;
    Ok(CorrelationCell {
        n,
        srocc: c.srocc,
        pearson: c.pearson,
        kendall: c.kendall,
    })
}

type Cells = BTreeMap<String, CorrelationCell>;

fn fill_cells(
    series: &ScatterSeries,
    distortion: Option<&str>,
    min_samples: usize,
    warnings: &mut Vec<String>,
) -> Cells {
    let place = match distortion {
        Some(d) => format!("{}/{d}", series.database),
        None => series.database.clone(),
    };
    let mut cells = Cells::new();
    for (k, metric) in series.metrics.iter().enumerate() {
        let usable = series
            .points
            .iter()
            .filter(|p| distortion.is_none() || p.distortion.as_deref() == distortion)
            .filter(|p| p.scores[k].is_some())
            .count();
        if usable < min_samples {
            warnings.push(format!(
                "{place}: {metric} has {usable} usable samples (need {min_samples}); cell omitted"
            ));
            continue;
        }
        match series.correlations(k, distortion) {
            Ok(c) => {
                cells.insert(metric.clone(), c);
            }
            Err(e) => warnings.push(format!("{place}: {metric}: {e}; cell omitted")),
        }
    }
    cells
}

fn compare(
    cells: &Cells,
    database: &str,
    distortion: Option<&str>,
    baseline: &str,
    out: &mut Vec<SignificanceEntry>,
    warnings: &mut Vec<String>,
) {
    let Some(base) = cells.get(baseline) else {
        return;
    };
    for (metric, c) in cells.iter().filter(|(m, _)| m.as_str() != baseline) {
        let n = c.n.min(base.n);
        let verdict = if c.srocc == base.srocc {
            Ok(crate::stats::Significance {
                z_stat: 0.0,
                significant_05: false,
            })
        } else {
            significance(c.srocc, base.srocc, n)
        };
        match verdict {
            Ok(s) => out.push(SignificanceEntry {
                database: database.to_string(),
                distortion: distortion.map(str::to_string),
                metric: metric.clone(),
                baseline: baseline.to_string(),
                n,
                metric_srocc: c.srocc,
                baseline_srocc: base.srocc,
                z_stat: s.z_stat,
                significant_05: s.significant_05,
            }),
            Err(e) => warnings.push(format!(
                "{database}{}: significance of {metric} vs {baseline} skipped: {e}",
                distortion.map(|d| format!("/{d}")).unwrap_or_default()
            )),
        }
    }
}

/// Builds correlation tables, significance verdicts and scatter data from
/// score rows. Error rows and non-finite scores are left out of every cell.
pub fn build_report(table: &ScoreTable, options: &ReportOptions) -> Result<EvaluationReport> {
    if let Some(b) = &options.baseline {
        if !table.metrics.contains(b) {
            return Err(Error::InvalidParameter(format!(
                "baseline '{b}' is not among the scored metrics ({})",
                table.metrics.join(", ")
            )));
        }
    }
    let mut warnings = Vec::new();
    let mut by_db: BTreeMap<String, Vec<ScatterPoint>> = BTreeMap::new();
    for row in &table.rows {
        if let Some(e) = &row.error {
            warnings.push(format!("{}: skipped ({e})", row.entry.distorted_path.display()));
            continue;
        }
        if row.scores.len() != table.metrics.len() {
            return Err(Error::InvalidParameter(format!(
                "{}: {} scores for {} metrics",
                row.entry.distorted_path.display(),
                row.scores.len(),
                table.metrics.len()
            )));
        }
        by_db.entry(row.entry.database.clone()).or_default().push(ScatterPoint {
            distorted_path: row.entry.distorted_path.display().to_string(),
            mos: row.entry.mos,
            distortion: row.entry.distortion.clone(),
            scores: row
                .scores
                .iter()
                .map(|&s| s.is_finite().then_some(s))
                .collect(),
        });
    }

    let mut report = EvaluationReport {
        metrics: table.metrics.clone(),
        baseline: options.baseline.clone(),
        per_database: BTreeMap::new(),
        per_distortion: BTreeMap::new(),
        significance: Vec::new(),
        scatter: Vec::new(),
        warnings: Vec::new(),
    };
    for (database, points) in by_db {
        let series = ScatterSeries {
            polarity: options.polarity.get(&database).copied().unwrap_or_default(),
            database: database.clone(),
            metrics: table.metrics.clone(),
            points,
        };
        let cells = fill_cells(&series, None, options.min_samples, &mut warnings);
        if let Some(b) = &options.baseline {
            compare(&cells, &database, None, b, &mut report.significance, &mut warnings);
        }
        report.per_database.insert(database.clone(), cells);

        let mut distortions: Vec<&str> = series
            .points
            .iter()
            .filter_map(|p| p.distortion.as_deref())
            .collect();
        distortions.sort_unstable();
        distortions.dedup();
        let mut per = BTreeMap::new();
        for d in distortions {
            let cells = fill_cells(&series, Some(d), options.min_samples, &mut warnings);
            if let Some(b) = &options.baseline {
                compare(&cells, &database, Some(d), b, &mut report.significance, &mut warnings);
            }
            per.insert(d.to_string(), cells);
        }
        report.per_distortion.insert(database, per);
        report.scatter.push(series);
    }
    report.warnings = warnings;
    Ok(report)
}

/// File name used for one database's scatter CSV.
pub fn scatter_file_name(database: &str) -> String {
    let safe: String = database
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("scatter_{safe}.csv")
}

const SCATTER_FIXED: [&str; 5] = ["database", "polarity", "distorted_path", "mos", "distortion"];

/// Writes one series at full precision; unusable scores are empty fields.
pub fn write_scatter_csv<W: Write>(series: &ScatterSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = SCATTER_FIXED.to_vec();
    header.extend(series.metrics.iter().map(String::as_str));
    w.write_record(&header)?;
    let polarity = match series.polarity {
        Polarity::Mos => "mos",
        Polarity::Dmos => "dmos",
    };
    for p in &series.points {
        let mut rec = vec![
            series.database.clone(),
            polarity.to_string(),
            p.distorted_path.clone(),
            p.mos.to_string(),
            p.distortion.clone().unwrap_or_default(),
        ];
        rec.extend(p.scores.iter().map(|s| s.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_scatter_csv<R: Read>(reader: R) -> Result<ScatterSeries> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let bad = |msg: String| Error::Manifest {
        row: None,
        message: msg,
    };
    if headers.len() < SCATTER_FIXED.len()
        || headers.iter().zip(SCATTER_FIXED).any(|(h, want)| h != want)
    {
        return Err(bad(format!("scatter header must start with {}", SCATTER_FIXED.join(","))));
    }
    let metrics: Vec<String> = headers.iter().skip(SCATTER_FIXED.len()).map(str::to_string).collect();
    let mut series = ScatterSeries {
        database: String::new(),
        polarity: Polarity::Mos,
        metrics,
        points: Vec::new(),
    };
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let err = |message: String| Error::Manifest {
            row: Some(row),
            message,
        };
        let field = |k: usize| record.get(k).unwrap_or("");
        if row == 1 {
            series.database = field(0).to_string();
            series.polarity = match field(1) {
                "mos" => Polarity::Mos,
                "dmos" => Polarity::Dmos,
                other => return Err(err(format!("unknown polarity '{other}'"))),
            };
        }
        let mos = field(3)
            .parse()
            .map_err(|_| err(format!("bad mos '{}'", field(3))))?;
        let scores = (SCATTER_FIXED.len()..headers.len())
            .map(|k| match field(k) {
                "" => Ok(None),
                t => t.parse().map(Some).map_err(|_| err(format!("bad score '{t}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        series.points.push(ScatterPoint {
            distorted_path: field(2).to_string(),
            mos,
            distortion: Some(field(4)).filter(|d| !d.is_empty()).map(str::to_string),
            scores,
        });
    }
    Ok(series)
}
