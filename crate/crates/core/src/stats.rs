//! Correlation coefficients and the Fisher-z significance test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-tailed critical value of the standard normal at p = 0.05.
pub const Z_CRITICAL_05: f64 = 1.959964;

/// Variance factor of the z-transformed correlations, `1.06 / (N - 3)`.
pub const FISHER_VARIANCE_FACTOR: f64 = 1.06;

/// Metric values paired with opinion scores.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSamples {
    scores: Vec<f64>,
    mos: Vec<f64>,
}

impl PairedSamples {
    /// Requires equal lengths, at least two samples and finite values.
    pub fn new(scores: Vec<f64>, mos: Vec<f64>) -> Result<Self> {
        if scores.len() != mos.len() {
            return Err(Error::InvalidParameter(format!(
                "{} scores vs {} opinion scores",
                scores.len(),
                mos.len()
            )));
        }
        if scores.len() < 2 {
            return Err(Error::InsufficientSamples {
                got: scores.len(),
                need: 2,
            });
        }
        if scores.iter().chain(&mos).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("samples must be finite".into()));
        }
        Ok(Self { scores, mos })
    }

    pub fn from_slices(scores: &[f64], mos: &[f64]) -> Result<Self> {
        Self::new(scores.to_vec(), mos.to_vec())
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn mos(&self) -> &[f64] {
        &self.mos
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn product_moment(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson product-moment correlation, no regression applied.
pub fn pearson(p: &PairedSamples) -> Result<f64> {
    product_moment(&p.scores, &p.mos)
}

/// Spearman rank-order correlation: Pearson on average ranks.
pub fn spearman(p: &PairedSamples) -> Result<f64> {
    product_moment(&average_ranks(&p.scores), &average_ranks(&p.mos))
        .map_err(|_| Error::UndefinedCorrelation("constant vector has no rank order".into()))
}

/// Kendall's tau-b over all pairs.
pub fn kendall_tau(p: &PairedSamples) -> Result<f64> {
    let (x, y) = (&p.scores, &p.mos);
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tied_x, mut tied_y) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            let s = dx * dy;
            if s > 0.0 {
                concordant += 1;
            } else if s < 0.0 {
                discordant += 1;
            }
        }
    }
    let total = (n * (n - 1) / 2) as i64;
    let denom = ((total - tied_x) as f64 * (total - tied_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::UndefinedCorrelation("all pairs tied".into()));
    }
    Ok(((concordant - discordant) as f64 / denom).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub z_stat: f64,
    /// Two-tailed, `|z| > 1.959964`.
    pub significant_05: bool,
}

/// Fisher-z comparison of two correlations measured on `n` samples each.
pub fn significance(r1: f64, r2: f64, n: usize) -> Result<Significance> {
    if n <= 3 {
        return Err(Error::InsufficientSamples { got: n, need: 4 });
    }
    for r in [r1, r2] {
        if !(r.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "Fisher transform needs |r| < 1, got {r}"
            )));
        }
    }
    let sd = (2.0 * FISHER_VARIANCE_FACTOR / (n - 3) as f64).sqrt();
    let z_stat = (r1.atanh() - r2.atanh()) / sd;
    Ok(Significance {
        z_stat,
        significant_05: z_stat.abs() > Z_CRITICAL_05,
    })
}

/// All three coefficients of one sample set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub srocc: f64,
    pub pearson: f64,
    pub kendall: f64,
}

impl Correlations {
    pub fn compute(p: &PairedSamples) -> Result<Self> {
        Ok(Self {
            srocc: spearman(p)?,
            pearson: pearson(p)?,
            kendall: kendall_tau(p)?,
        })
    }
}
