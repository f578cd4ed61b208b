//! HaarPSI and its colour extension HaarPSIC, plus the PSNR baseline.
//!
//! Both images are preprocessed (2x2 block mean, dyadic subsampling) before
//! any filtering. Local similarities use the scale-1 and scale-2 high-pass
//! filters; the pooling weights use the scale-3 filters. The pooled mean is
//! mapped back with the inverse logistic and squared.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{convolve_separable, Boundary, FilterBank2D, Orientation, SeparableFilter, WaveletId};
use crate::image::{preprocess, rgb_to_yiq, ColorImage, DecodedImage, ImagePlane};

pub const DEFAULT_C: f64 = 30.0;
pub const DEFAULT_ALPHA: f64 = 4.2;

/// Mean pooling weight (intensity units) at or below which the weights are
/// treated as all zero. Cascaded filter taps do not cancel exactly, so a
/// constant plane leaves responses around 1e-14 instead of 0.
pub const ZERO_WEIGHT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    #[default]
    Grayscale,
    Color,
}

/// Full configuration of one metric instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: f64,
    pub wavelet: WaveletId,
    pub color_mode: ColorMode,
    /// Border handling for every convolution inside the metric.
    #[serde(default)]
    pub boundary: Boundary,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            alpha: DEFAULT_ALPHA,
            wavelet: WaveletId::Haar,
            color_mode: ColorMode::Grayscale,
            boundary: Boundary::Zero,
        }
    }
}

impl MetricParams {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            c,
            alpha,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_wavelet(mut self, wavelet: WaveletId) -> Self {
        self.wavelet = wavelet;
        self
    }

    pub fn with_color_mode(mut self, mode: ColorMode) -> Self {
        self.color_mode = mode;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Per-pixel local similarity and combined weight maps, one entry per
/// component (horizontal, vertical, and chroma for HaarPSIC).
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMaps {
    pub similarity: Vec<ImagePlane>,
    pub weights: Vec<ImagePlane>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreResult {
    pub score: f64,
    /// Total weight was zero; the unweighted mean of the similarity maps was pooled instead.
    pub degenerate_weights: bool,
    pub maps: Option<SimilarityMaps>,
}

/// `(2ab + C) / (a^2 + b^2 + C)`.
#[inline]
pub fn scalar_similarity(a: f64, b: f64, c: f64) -> f64 {
    (2.0 * (a * b) + c) / (a * a + b * b + c)
}

#[inline]
pub fn logistic(x: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + (-alpha * x).exp())
}

pub fn logistic_inverse(y: f64, alpha: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!("logistic inverse needs 0 < y < 1, got {y}")));
    }
    Ok((y / (1.0 - y)).ln() / alpha)
}

fn abs_response(img: &ImagePlane, filter: &SeparableFilter, boundary: Boundary) -> Vec<f64> {
    convolve_separable(img, filter, boundary)
        .into_samples()
        .into_iter()
        .map(f64::abs)
        .collect()
}

fn require_scales(bank: &FilterBank2D, n: usize) -> Result<()> {
    if bank.scales() < n {
        return Err(Error::InvalidParameter(format!(
            "filter bank has {} scales, need {n}",
            bank.scales()
        )));
    }
    Ok(())
}

/// One pooled component: HS = l(mean_t S(a_t, b_t)), weighted by `weight`.
#[derive(Clone, Debug)]
struct Component {
    terms: Vec<(Vec<f64>, Vec<f64>)>,
    weight: Vec<f64>,
}

impl Component {
    fn similarity_at(&self, x: usize, c: f64, alpha: f64) -> f64 {
        let sum: f64 = self
            .terms
            .iter()
            .map(|(a, b)| scalar_similarity(a[x], b[x], c))
            .sum();
        logistic(sum / self.terms.len() as f64, alpha)
    }
}

fn orientation_terms(
    f1: &ImagePlane,
    f2: &ImagePlane,
    orientation: Orientation,
    bank: &FilterBank2D,
    boundary: Boundary,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    (1..=2)
        .map(|j| {
            let filt = bank.filter(orientation, j);
            (abs_response(f1, filt, boundary), abs_response(f2, filt, boundary))
        })
        .collect()
}

/// Filter responses of a preprocessed image pair. They do not depend on
/// `C` or `alpha`, so one preparation serves any number of parameter settings.
#[derive(Clone, Debug)]
pub struct PreparedPair {
    width: usize,
    height: usize,
    components: Vec<Component>,
}

fn min_size(bank: &FilterBank2D) -> (usize, usize) {
    // similarity filters must fit; the scale-3 weight filter may overhang
    let (r1, c1) = bank.filter(Orientation::Horizontal, 2).support();
    let (r2, c2) = bank.filter(Orientation::Vertical, 2).support();
    (c1.max(c2), r1.max(r2))
}

fn check_size(p: &ImagePlane, bank: &FilterBank2D) -> Result<()> {
    let (mw, mh) = min_size(bank);
    if p.width() < mw || p.height() < mh {
        return Err(Error::TooSmall {
            width: p.width() * 2,
            height: p.height() * 2,
            min_width: mw * 2,
            min_height: mh * 2,
        });
    }
    Ok(())
}

fn preprocess_checked(raw: &ImagePlane) -> Result<ImagePlane> {
    preprocess(raw).map_err(|_| Error::TooSmall {
        width: raw.width(),
        height: raw.height(),
        min_width: 2,
        min_height: 2,
    })
}

fn luma_components(
    y1: &ImagePlane,
    y2: &ImagePlane,
    bank: &FilterBank2D,
    boundary: Boundary,
) -> Vec<Component> {
    Orientation::BOTH
        .iter()
        .map(|&o| {
            let terms = orientation_terms(y1, y2, o, bank, boundary);
            let g3 = bank.filter(o, 3);
            let weight = abs_response(y1, g3, boundary)
                .into_iter()
                .zip(abs_response(y2, g3, boundary))
                .map(|(a, b)| a.max(b))
                .collect();
            Component { terms, weight }
        })
        .collect()
}

impl PreparedPair {
    /// Grayscale preparation from raw (not yet preprocessed) planes. Uses the
    /// wavelet and boundary of `params`; `C` and `alpha` are not needed yet.
    pub fn gray(f1: &ImagePlane, f2: &ImagePlane, params: &MetricParams) -> Result<Self> {
        f1.ensure_same_dims(f2)?;
        let bank = FilterBank2D::shared(params.wavelet);
        let p1 = preprocess_checked(f1)?;
        let p2 = preprocess_checked(f2)?;
        check_size(&p1, bank)?;
        Ok(Self {
            width: p1.width(),
            height: p1.height(),
            components: luma_components(&p1, &p2, bank, params.boundary),
        })
    }

    /// HaarPSIC preparation: YIQ conversion, then preprocessing of every channel.
    pub fn color(f1: &ColorImage, f2: &ColorImage, params: &MetricParams) -> Result<Self> {
        if f1.dims() != f2.dims() {
            return Err(Error::mismatch(f1.dims(), f2.dims()));
        }
        let bank = FilterBank2D::shared(params.wavelet);
        let boundary = params.boundary;
        let (y1, i1, q1) = rgb_to_yiq(f1);
        let (y2, i2, q2) = rgb_to_yiq(f2);
        let [y1, i1, q1, y2, i2, q2] =
            [&y1, &i1, &q1, &y2, &i2, &q2].map(|p| preprocess_checked(p));
        let (y1, i1, q1, y2, i2, q2) = (y1?, i1?, q1?, y2?, i2?, q2?);
        check_size(&y1, bank)?;

        let mut components = luma_components(&y1, &y2, bank, boundary);
        let mean = SeparableFilter::new(vec![0.5, 0.5], vec![0.5, 0.5]);
        let chroma_weight = components[0]
            .weight
            .iter()
            .zip(&components[1].weight)
            .map(|(a, b)| (a + b) / 2.0)
            .collect();
        components.push(Component {
            terms: vec![
                (abs_response(&i1, &mean, boundary), abs_response(&i2, &mean, boundary)),
                (abs_response(&q1, &mean, boundary), abs_response(&q2, &mean, boundary)),
            ],
            weight: chroma_weight,
        });
        Ok(Self {
            width: y1.width(),
            height: y1.height(),
            components,
        })
    }

    /// Prepares decoded images according to `params.color_mode`.
    pub fn new(f1: &DecodedImage, f2: &DecodedImage, params: &MetricParams) -> Result<Self> {
        match params.color_mode {
            ColorMode::Grayscale => Self::gray(&f1.to_gray(), &f2.to_gray(), params),
            ColorMode::Color => Self::color(&f1.to_color(), &f2.to_color(), params),
        }
    }

    /// Dimensions of the preprocessed planes (and of any returned maps).
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Pools the prepared responses for the given `C` and `alpha`.
    pub fn pool(&self, c: f64, alpha: f64, want_maps: bool) -> ScoreResult {
        let n = self.width * self.height;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut unweighted = 0.0;
        let mut hs_maps = Vec::new();
        for comp in &self.components {
            let mut hs_map = if want_maps { Vec::with_capacity(n) } else { Vec::new() };
            for x in 0..n {
                let hs = comp.similarity_at(x, c, alpha);
                let w = comp.weight[x];
                num += hs * w;
                den += w;
                unweighted += hs;
                if want_maps {
                    hs_map.push(hs);
                }
            }
            if want_maps {
                hs_maps.push(ImagePlane::from_raw(self.width, self.height, hs_map));
            }
        }
        let degenerate = den <= ZERO_WEIGHT_EPS * (n * self.components.len()) as f64;
        let mean = if degenerate {
            unweighted / (n * self.components.len()) as f64
        } else {
            num / den
        };
        // mean lies in (1/2, l(1)], so the inverse is defined
        let inv = logistic_inverse(mean, alpha).unwrap_or(if mean >= 1.0 { f64::INFINITY } else { 0.0 });
        let score = (inv * inv).clamp(0.0, 1.0);

        let maps = want_maps.then(|| SimilarityMaps {
            similarity: hs_maps,
            weights: self
                .components
                .iter()
                .map(|c| ImagePlane::from_raw(self.width, self.height, c.weight.clone()))
                .collect(),
        });
        ScoreResult {
            score,
            degenerate_weights: degenerate,
            maps,
        }
    }

    /// Score only, no maps.
    pub fn score(&self, c: f64, alpha: f64) -> f64 {
        self.pool(c, alpha, false).score
    }
}

/// `HS^(k)` for already preprocessed planes `f1`, `f2`.
pub fn local_similarity_map(
    f1: &ImagePlane,
    f2: &ImagePlane,
    orientation: Orientation,
    bank: &FilterBank2D,
    params: &MetricParams,
) -> Result<ImagePlane> {
    f1.ensure_same_dims(f2)?;
    require_scales(bank, 2)?;
    params.validate()?;
    let comp = Component {
        terms: orientation_terms(f1, f2, orientation, bank, params.boundary),
        weight: Vec::new(),
    };
    let n = f1.width() * f1.height();
    let samples = (0..n)
        .map(|x| comp.similarity_at(x, params.c, params.alpha))
        .collect();
    Ok(ImagePlane::from_raw(f1.width(), f1.height(), samples))
}

/// `W^(k)_f = |g^(k)_3 * f|` for an already preprocessed plane.
pub fn weight_map(f: &ImagePlane, orientation: Orientation, bank: &FilterBank2D) -> Result<ImagePlane> {
    require_scales(bank, 3)?;
    Ok(ImagePlane::from_raw(
        f.width(),
        f.height(),
        abs_response(f, bank.filter(orientation, 3), Boundary::Zero),
    ))
}

/// Grayscale HaarPSI of two raw planes.
pub fn haarpsi_gray(
    f1: &ImagePlane,
    f2: &ImagePlane,
    params: &MetricParams,
    want_maps: bool,
) -> Result<ScoreResult> {
    params.validate()?;
    let prepared = PreparedPair::gray(f1, f2, params)?;
    Ok(prepared.pool(params.c, params.alpha, want_maps))
}

/// HaarPSIC of two raw RGB images.
pub fn haarpsi_color(
    f1: &ColorImage,
    f2: &ColorImage,
    params: &MetricParams,
    want_maps: bool,
) -> Result<ScoreResult> {
    params.validate()?;
    let prepared = PreparedPair::color(f1, f2, params)?;
    Ok(prepared.pool(params.c, params.alpha, want_maps))
}

/// Dispatches on `params.color_mode`; colour inputs are converted to luma in
/// grayscale mode and grey inputs replicated to RGB in colour mode.
pub fn haarpsi(
    f1: &DecodedImage,
    f2: &DecodedImage,
    params: &MetricParams,
    want_maps: bool,
) -> Result<ScoreResult> {
    params.validate()?;
    let prepared = PreparedPair::new(f1, f2, params)?;
    Ok(prepared.pool(params.c, params.alpha, want_maps))
}

/// Peak signal-to-noise ratio in dB. Identical inputs give `f64::INFINITY`.
pub fn psnr(f1: &ImagePlane, f2: &ImagePlane, peak: f64) -> Result<f64> {
    f1.ensure_same_dims(f2)?;
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::InvalidParameter(format!("peak must be positive, got {peak}")));
    }
    let n = f1.samples().len() as f64;
    let mse = f1
        .samples()
        .iter()
        .zip(f2.samples())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}
