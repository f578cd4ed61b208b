//! Selection of `C` and `alpha` by grid search followed by Nelder-Mead
//! refinement, maximising the mean SROCC over random database subsets.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ManifestEntry;
use crate::image::{decode_image, DecodedImage};
use crate::metric::{MetricParams, PreparedPair};
use crate::stats::{spearman, PairedSamples};

/// Anything that yields a quality score for given `C` and `alpha`.
pub trait PairScorer: Sync {
    fn score(&self, c: f64, alpha: f64) -> f64;
}

impl PairScorer for PreparedPair {
    fn score(&self, c: f64, alpha: f64) -> f64 {
        PreparedPair::score(self, c, alpha)
    }
}

impl<T: PairScorer + ?Sized> PairScorer for &T {
    fn score(&self, c: f64, alpha: f64) -> f64 {
        (**self).score(c, alpha)
    }
}

/// Keeps only the decoded images and recomputes the filter responses on
/// every call. Much slower than [`PreparedPair`] but needs far less memory.
pub struct ImagePair {
    reference: DecodedImage,
    distorted: DecodedImage,
    params: MetricParams,
}

impl ImagePair {
    /// Fails early if the pair cannot be scored at all.
    pub fn new(reference: DecodedImage, distorted: DecodedImage, params: MetricParams) -> Result<Self> {
        PreparedPair::new(&reference, &distorted, &params)?;
        Ok(Self {
            reference,
            distorted,
            params,
        })
    }
}

impl PairScorer for ImagePair {
    fn score(&self, c: f64, alpha: f64) -> f64 {
        PreparedPair::new(&self.reference, &self.distorted, &self.params)
            .map(|p| p.score(c, alpha))
            .unwrap_or(f64::NAN)
    }
}

pub struct TuneSample<S> {
    pub scorer: S,
    pub mos: f64,
}

pub struct TuneDatabase<S> {
    pub label: String,
    pub samples: Vec<TuneSample<S>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub c_range: (f64, f64),
    pub alpha_range: (f64, f64),
    pub c_step: f64,
    pub alpha_step: f64,
    pub subset_fraction: f64,
    pub seed: u64,
    pub max_iters: usize,
    /// Nelder-Mead stops once the simplex objective spread drops below this.
    pub tol: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            c_range: (5.0, 100.0),
            alpha_range: (2.0, 8.0),
            c_step: 5.0,
            alpha_step: 0.5,
            subset_fraction: 0.25,
            seed: 0,
            max_iters: 200,
            tol: 1e-9,
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        for (name, (lo, hi)) in [("C", self.c_range), ("alpha", self.alpha_range)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} range [{lo}, {hi}] must be positive and nonempty"));
            }
        }
        for (name, step) in [("C step", self.c_step), ("alpha step", self.alpha_step)] {
            if !(step > 0.0 && step.is_finite()) {
                return bad(format!("{name} must be positive, got {step}"));
            }
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return bad(format!("subset fraction must lie in (0, 1], got {}", self.subset_fraction));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tolerance must be non-negative, got {}", self.tol));
        }
        Ok(())
    }

    fn c_values(&self) -> Vec<f64> {
        axis(self.c_range, self.c_step)
    }

    fn alpha_values(&self) -> Vec<f64> {
        axis(self.alpha_range, self.alpha_step)
    }
}

fn axis((lo, hi): (f64, f64), step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| lo + i as f64 * step).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Grid,
    Refine,
}

/// One objective evaluation. `iteration` is the node index on the grid and
/// the Nelder-Mead iteration during refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub stage: Stage,
    pub iteration: usize,
    pub c: f64,
    pub alpha: f64,
    pub mean_srocc: Option<f64>,
}

/// Objective values on the grid, indexed `[c][alpha]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub c_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub c_best: f64,
    pub alpha_best: f64,
    pub best_value: f64,
    pub surface: Surface,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub c: f64,
    pub alpha: f64,
    pub value: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub c_step: f64,
    pub alpha_step: f64,
    pub c_range: (f64, f64),
    pub alpha_range: (f64, f64),
    pub max_iters: usize,
    pub tol: f64,
}

impl From<&TuneConfig> for NelderMeadOptions {
    fn from(cfg: &TuneConfig) -> Self {
        Self {
            c_step: cfg.c_step,
            alpha_step: cfg.alpha_step,
            c_range: cfg.c_range,
            alpha_range: cfg.alpha_range,
            max_iters: cfg.max_iters,
            tol: cfg.tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub config: TuneConfig,
    pub c_grid_best: f64,
    pub alpha_grid_best: f64,
    pub grid_objective: f64,
    pub c_refined: f64,
    pub alpha_refined: f64,
    pub refined_objective: f64,
    pub iterations: usize,
    pub c_final: i64,
    pub alpha_final: f64,
    /// Subset objective at the rounded parameters.
    pub final_objective: f64,
    pub subset_sizes: BTreeMap<String, usize>,
    /// SROCC of every full database at the rounded parameters.
    pub full_set_srocc: BTreeMap<String, Option<f64>>,
    pub objective_trace: Vec<TracePoint>,
    pub surface: Surface,
}

fn srocc_of<S: PairScorer>(c: f64, alpha: f64, samples: &[TuneSample<S>]) -> Result<f64> {
    let scores: Vec<f64> = samples.par_iter().map(|s| s.scorer.score(c, alpha)).collect();
    let mos = samples.iter().map(|s| s.mos).collect();
    spearman(&PairedSamples::new(scores, mos)?)
}

/// Mean SROCC over `subsets` with the metric evaluated at `(c, alpha)`.
pub fn objective<S: PairScorer>(c: f64, alpha: f64, subsets: &[TuneDatabase<S>]) -> Result<f64> {
    if !(c > 0.0 && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("C and alpha must be positive, got ({c}, {alpha})")));
    }
    if subsets.is_empty() {
        return Err(Error::InvalidParameter("no subsets".into()));
    }
    let mut sum = 0.0;
    for s in subsets {
        if s.samples.len() < 4 {
            return Err(Error::InsufficientSamples {
                got: s.samples.len(),
                need: 4,
            });
        }
        sum += srocc_of(c, alpha, &s.samples)?;
    }
    Ok(sum / subsets.len() as f64)
}

fn defined(value: Result<f64>) -> Result<Option<f64>> {
    match value {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) | Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Evaluates `f` on every grid node (in parallel) and returns the argmax,
/// first in C-major order on ties. Undefined nodes stay `None` in the
/// surface. Every evaluation is appended to `trace` in node order.
pub fn grid_search<F>(cfg: &TuneConfig, f: F, trace: &mut Vec<TracePoint>) -> Result<GridOutcome>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let c_values = cfg.c_values();
    let alpha_values = cfg.alpha_values();
    let nodes: Vec<(f64, f64)> = c_values
        .iter()
        .flat_map(|&c| alpha_values.iter().map(move |&a| (c, a)))
        .collect();
    let results: Vec<Result<Option<f64>>> = nodes.par_iter().map(|&(c, a)| defined(f(c, a))).collect();

    let mut best: Option<(usize, f64)> = None;
    let mut flat = Vec::with_capacity(nodes.len());
    for (k, (r, &(c, alpha))) in results.into_iter().zip(&nodes).enumerate() {
        let value = match r {
            Ok(v) => v,
            Err(e) => {
                return Err(Error::Tuning {
                    message: format!("objective failed at C={c}, alpha={alpha}: {e}"),
                    trace: trace.clone(),
                })
            }
        };
        trace.push(TracePoint {
            stage: Stage::Grid,
            iteration: k,
            c,
            alpha,
            mean_srocc: value,
        });
        if let Some(v) = value {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        flat.push(value);
    }
    let Some((k, best_value)) = best else {
        return Err(Error::Tuning {
            message: "objective undefined at every grid node".into(),
            trace: trace.clone(),
        });
    };
    let values = flat.chunks(alpha_values.len()).map(<[_]>::to_vec).collect();
    Ok(GridOutcome {
        c_best: nodes[k].0,
        alpha_best: nodes[k].1,
        best_value,
        surface: Surface {
            c_values,
            alpha_values,
            values,
        },
    })
}

type Vertex = ([f64; 2], f64);

/// Maximises `f` with a 2D Nelder-Mead simplex (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5). The initial simplex is `start` plus one
/// step along each axis; a step that would leave the range is taken in the
/// opposite direction. Points are clamped to the ranges before evaluation.
pub fn nelder_mead<F>(
    start: (f64, f64),
    mut f: F,
    opts: &NelderMeadOptions,
    trace: &mut Vec<TracePoint>,
) -> Result<Refinement>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let clamp = |p: [f64; 2]| {
        [
            p[0].clamp(opts.c_range.0, opts.c_range.1),
            p[1].clamp(opts.alpha_range.0, opts.alpha_range.1),
        ]
    };
    let mut iteration = 0;
    let mut eval = |p: [f64; 2], iteration: usize, trace: &mut Vec<TracePoint>| -> Result<Vertex> {
        let p = clamp(p);
        let value = f(p[0], p[1]);
        let finite = value.as_ref().ok().copied().filter(|v| v.is_finite());
        trace.push(TracePoint {
            stage: Stage::Refine,
            iteration,
            c: p[0],
            alpha: p[1],
            mean_srocc: finite,
        });
        match (value, finite) {
            (_, Some(v)) => Ok((p, v)),
            (Ok(v), None) => Err(Error::Tuning {
                message: format!("objective is {v} at C={}, alpha={}", p[0], p[1]),
                trace: trace.clone(),
            }),
            (Err(e), _) => Err(Error::Tuning {
                message: format!("objective failed at C={}, alpha={}: {e}", p[0], p[1]),
                trace: trace.clone(),
            }),
        }
    };
    let step = |x: f64, s: f64, (lo, hi): (f64, f64)| if x + s <= hi || x - s < lo { x + s } else { x - s };
    let s0 = clamp([start.0, start.1]);
    let mut simplex: Vec<Vertex> = vec![
        eval(s0, 0, trace)?,
        eval([step(s0[0], opts.c_step, opts.c_range), s0[1]], 0, trace)?,
        eval([s0[0], step(s0[1], opts.alpha_step, opts.alpha_range)], 0, trace)?,
    ];

    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    while iteration < opts.max_iters {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        if simplex[0].1 - simplex[2].1 < opts.tol {
            break;
        }
        iteration += 1;
        let (best, second, worst) = (simplex[0], simplex[1], simplex[2]);
        let centroid = lerp(best.0, second.0, 0.5);
        let reflected = eval(lerp(centroid, worst.0, -1.0), iteration, trace)?;
        if reflected.1 > best.1 {
            let expanded = eval(lerp(centroid, worst.0, -2.0), iteration, trace)?;
            simplex[2] = if expanded.1 > reflected.1 { expanded } else { reflected };
            continue;
        }
        if reflected.1 > second.1 {
            simplex[2] = reflected;
            continue;
        }
        if reflected.1 > worst.1 {
            let outside = eval(lerp(centroid, reflected.0, 0.5), iteration, trace)?;
            if outside.1 >= reflected.1 {
                simplex[2] = outside;
                continue;
            }
        } else {
            let inside = eval(lerp(centroid, worst.0, 0.5), iteration, trace)?;
            if inside.1 > worst.1 {
                simplex[2] = inside;
                continue;
            }
        }
        for k in 1..3 {
            simplex[k] = eval(lerp(best.0, simplex[k].0, 0.5), iteration, trace)?;
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let ([c, alpha], value) = simplex[0];
    Ok(Refinement {
        c,
        alpha,
        value,
        iterations: iteration,
    })
}

/// Draws `floor(fraction * n)` distinct indices per database, sorted, from
/// one seeded stream consumed in database order.
pub fn sample_subsets(sizes: &[usize], fraction: f64, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sizes
        .iter()
        .map(|&n| {
            let k = ((fraction * n as f64) + 1e-9).floor() as usize;
            let mut idx = rand::seq::index::sample(&mut rng, n, k.min(n)).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect()
}

fn round_c(c: f64) -> i64 {
    c.round() as i64
}

fn round_alpha(alpha: f64) -> f64 {
    (alpha * 10.0).round() / 10.0
}

fn optimise<S: PairScorer>(
    cfg: &TuneConfig,
    subsets: &[TuneDatabase<S>],
) -> Result<(TuneResult, Vec<TracePoint>)> {
    let mut trace = Vec::new();
    let grid = grid_search(cfg, |c, a| objective(c, a, subsets), &mut trace)?;
    let refined = nelder_mead(
        (grid.c_best, grid.alpha_best),
        |c, a| objective(c, a, subsets),
        &cfg.into(),
        &mut trace,
    )?;
    let c_final = round_c(refined.c);
    let alpha_final = round_alpha(refined.alpha);
    let final_objective = objective(c_final as f64, alpha_final, subsets).map_err(|e| Error::Tuning {
        message: format!("objective failed at the rounded parameters: {e}"),
        trace: trace.clone(),
    })?;
    let result = TuneResult {
        config: cfg.clone(),
        c_grid_best: grid.c_best,
        alpha_grid_best: grid.alpha_best,
        grid_objective: grid.best_value,
        c_refined: refined.c,
        alpha_refined: refined.alpha,
        refined_objective: refined.value,
        iterations: refined.iterations,
        c_final,
        alpha_final,
        final_objective,
        subset_sizes: subsets.iter().map(|s| (s.label.clone(), s.samples.len())).collect(),
        full_set_srocc: BTreeMap::new(),
        objective_trace: Vec::new(),
        surface: grid.surface,
    };
    Ok((result, trace))
}

fn check_databases(sizes: &[(String, usize)]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("at least one database is required".into()));
    }
    Ok(())
}

/// Runs the full procedure on in-memory databases: seeded subset sampling,
/// grid search, refinement from the grid best, rounding, and full-set SROCC
/// at the rounded parameters.
pub fn tune<S: PairScorer>(cfg: &TuneConfig, databases: &[TuneDatabase<S>]) -> Result<TuneResult> {
    cfg.validate()?;
    check_databases(&databases.iter().map(|d| (d.label.clone(), d.samples.len())).collect::<Vec<_>>())?;
    let sizes: Vec<usize> = databases.iter().map(|d| d.samples.len()).collect();
    let picks = sample_subsets(&sizes, cfg.subset_fraction, cfg.seed);
    let subsets: Vec<TuneDatabase<&S>> = databases
        .iter()
        .zip(&picks)
        .map(|(db, idx)| TuneDatabase {
            label: db.label.clone(),
            samples: idx
                .iter()
                .map(|&i| TuneSample {
                    scorer: &db.samples[i].scorer,
                    mos: db.samples[i].mos,
                })
                .collect(),
        })
        .collect();
    let (mut result, trace) = optimise(cfg, &subsets)?;
    let (c, a) = (result.c_final as f64, result.alpha_final);
    result.full_set_srocc = databases
        .iter()
        .map(|db| (db.label.clone(), defined(srocc_of(c, a, &db.samples)).ok().flatten()))
        .collect();
    result.objective_trace = trace;
    Ok(result)
}

/// What [`tune_manifest`] keeps in memory for each sampled pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneCache {
    /// Filter responses; fast, roughly 10 planes of f64 per pair.
    #[default]
    Responses,
    /// Decoded images only; responses are recomputed for every evaluation.
    Images,
}

fn group_by_database(entries: &[ManifestEntry]) -> Vec<(String, Vec<&ManifestEntry>)> {
    let mut groups: Vec<(String, Vec<&ManifestEntry>)> = Vec::new();
    for e in entries {
        match groups.iter_mut().find(|(label, _)| *label == e.database) {
            Some((_, v)) => v.push(e),
            None => groups.push((e.database.clone(), vec![e])),
        }
    }
    groups
}

fn load_pair(e: &ManifestEntry) -> Result<(DecodedImage, DecodedImage)> {
    Ok((decode_image(&e.reference_path)?, decode_image(&e.distorted_path)?))
}

fn tune_loaded<S: PairScorer + Send>(
    cfg: &TuneConfig,
    groups: &[(String, Vec<&ManifestEntry>)],
    picks: &[Vec<usize>],
    make: impl Fn(DecodedImage, DecodedImage) -> Result<S> + Sync,
) -> Result<(TuneResult, Vec<TracePoint>)> {
    let subsets = groups
        .iter()
        .zip(picks)
        .map(|((label, rows), idx)| {
            let samples = idx
                .par_iter()
                .map(|&i| {
                    let e = rows[i];
                    let (a, b) = load_pair(e)?;
                    Ok(TuneSample {
                        scorer: make(a, b)?,
                        mos: e.mos,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TuneDatabase {
                label: label.clone(),
                samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    optimise(cfg, &subsets)
}

/// [`tune`] over manifest entries grouped by database (in order of first
/// appearance). Only the sampled pairs are held in memory during the search;
/// the full-set SROCC is computed by streaming over every row afterwards.
pub fn tune_manifest(
    cfg: &TuneConfig,
    entries: &[ManifestEntry],
    params: &MetricParams,
    cache: TuneCache,
    jobs: usize,
) -> Result<TuneResult> {
    cfg.validate()?;
    params.validate()?;
    let groups = group_by_database(entries);
    check_databases(&groups.iter().map(|(l, v)| (l.clone(), v.len())).collect::<Vec<_>>())?;
    let sizes: Vec<usize> = groups.iter().map(|(_, v)| v.len()).collect();
    let picks = sample_subsets(&sizes, cfg.subset_fraction, cfg.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {jobs} workers: {e}")))?;

    pool.install(|| {
        let (mut result, trace) = match cache {
            TuneCache::Responses => tune_loaded(cfg, &groups, &picks, |a, b| PreparedPair::new(&a, &b, params))?,
            TuneCache::Images => tune_loaded(cfg, &groups, &picks, |a, b| ImagePair::new(a, b, *params))?,
        };
        let (c, alpha) = (result.c_final as f64, result.alpha_final);
        for (label, rows) in &groups {
            let scores = rows
                .par_iter()
                .map(|e| {
                    let (a, b) = load_pair(e)?;
                    Ok(PreparedPair::new(&a, &b, params)?.score(c, alpha))
                })
                .collect::<Result<Vec<f64>>>()?;
            let mos = rows.iter().map(|e| e.mos).collect();
            let srocc = PairedSamples::new(scores, mos).and_then(|p| spearman(&p));
            result.full_set_srocc.insert(label.clone(), defined(srocc)?);
        }
        result.objective_trace = trace;
        Ok(result)
    })
}
