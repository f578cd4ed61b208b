#![allow(dead_code)]

pub mod oracle;

use haarpsi::tuner::{PairScorer, TuneDatabase, TuneSample};
use haarpsi::{ColorImage, ImagePlane};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const PEAK: (f64, f64) = (30.0, 4.2);

/// Score `base + noise * d(C, alpha)`, where `d` is a cone centred on
/// [`PEAK`]. At the peak the scores equal the opinion scores, so the SROCC is
/// exactly 1 there and falls as the noise term scrambles the ranks.
pub struct PeakScorer {
    pub base: f64,
    pub noise: f64,
}

pub fn peak_distance(c: f64, alpha: f64) -> f64 {
    ((c - PEAK.0) / 10.0).abs() + ((alpha - PEAK.1) / 0.5).abs()
}

impl PairScorer for PeakScorer {
    fn score(&self, c: f64, alpha: f64) -> f64 {
        self.base + self.noise * peak_distance(c, alpha)
    }
}

pub fn peak_fixture(databases: usize, per_database: usize, seed: u64) -> Vec<TuneDatabase<PeakScorer>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..databases)
        .map(|d| TuneDatabase {
            label: format!("synthetic{d}"),
            samples: (0..per_database)
                .map(|_| {
                    let base: f64 = rng.random();
                    let noise: f64 = rng.sample(StandardNormal);
                    TuneSample {
                        scorer: PeakScorer { base, noise },
                        mos: base,
                    }
                })
                .collect(),
        })
        .collect()
}

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// The 128x128 natural test image as a luma plane.
pub fn astronaut_gray() -> ImagePlane {
    haarpsi::decode_image(data_path("astronaut_128.png")).unwrap().to_gray()
}

pub fn random_plane(rng: &mut impl Rng, width: usize, height: usize) -> ImagePlane {
    ImagePlane::from_fn(width, height, |_, _| rng.random_range(0.0..=255.0))
}

pub fn random_color(rng: &mut impl Rng, width: usize, height: usize) -> ColorImage {
    let r = random_plane(rng, width, height);
    let g = random_plane(rng, width, height);
    let b = random_plane(rng, width, height);
    ColorImage::new(r, g, b).unwrap()
}

/// Additive white Gaussian noise, clamped to the 8-bit range.
pub fn add_noise(plane: &ImagePlane, sigma: f64, seed: u64) -> ImagePlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = plane.dims();
    ImagePlane::from_fn(w, h, |x, y| {
        let n: f64 = rng.sample(StandardNormal);
        (plane.get(x, y) + sigma * n).clamp(0.0, 255.0)
    })
}

/// Separable Gaussian blur with standard deviation `sigma`, truncated at
/// 3 sigma, replicating edge pixels.
pub fn gaussian_blur(plane: &ImagePlane, sigma: f64) -> ImagePlane {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / total).collect();
    let (w, h) = plane.dims();
    let at = |x: isize, y: isize| plane.get(x.clamp(0, w as isize - 1) as usize, y.clamp(0, h as isize - 1) as usize);
    let rows = ImagePlane::from_fn(w, h, |x, y| {
        taps.iter()
            .enumerate()
            .map(|(k, t)| t * at(x as isize + k as isize - radius, y as isize))
            .sum()
    });
    let at = |x: usize, y: isize| rows.get(x, y.clamp(0, h as isize - 1) as usize);
    ImagePlane::from_fn(w, h, |x, y| {
        taps.iter()
            .enumerate()
            .map(|(k, t)| t * at(x, y as isize + k as isize - radius))
            .sum()
    })
}
