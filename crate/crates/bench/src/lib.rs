//! Seeded image fixtures shared by the benchmarks.

use haarpsi::{ColorImage, ImagePlane};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform random plane on `[0, 255]`.
pub fn random_plane(width: usize, height: usize, seed: u64) -> ImagePlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImagePlane::from_fn(width, height, |_, _| rng.random_range(0.0..=255.0))
}

pub fn random_color(width: usize, height: usize, seed: u64) -> ColorImage {
    ColorImage::new(
        random_plane(width, height, seed),
        random_plane(width, height, seed + 1),
        random_plane(width, height, seed + 2),
    )
    .expect("planes share dimensions")
}
