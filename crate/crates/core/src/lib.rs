//! Haar wavelet-based perceptual similarity index.
//!
//! [`haarpsi_gray`] and [`haarpsi_color`] score a distorted image against a
//! reference on `[0, 1]`. The [`stats`], [`harness`] and [`tuner`] modules
//! provide the correlation analysis, batch scoring over CSV manifests and the
//! grid search / Nelder-Mead parameter selection used to evaluate the metric
//! against opinion-score databases.

pub mod error;
pub mod filterbank;
pub mod harness;
pub mod image;
pub mod maps;
pub mod metric;
pub mod stats;
pub mod tuner;

pub use error::{Error, Result};
pub use filterbank::{
    cascade_1d, convolve2d_same, convolve2d_same_with, convolve_separable, Boundary, FilterBank2D,
    Kernel2D, Orientation, SeparableFilter, Wavelet1D, WaveletId,
};
pub use image::{decode_image, preprocess, rgb_to_gray, rgb_to_yiq, ColorImage, DecodedImage, ImagePlane};
pub use metric::{
    haarpsi, haarpsi_color, haarpsi_gray, local_similarity_map, logistic, logistic_inverse, psnr,
    scalar_similarity, weight_map, ColorMode, MetricParams, PreparedPair, ScoreResult,
    SimilarityMaps, DEFAULT_ALPHA, DEFAULT_C,
};
pub use tuner::{tune, tune_manifest, PairScorer, TuneCache, TuneConfig, TuneResult};
pub use stats::{kendall_tau, pearson, significance, spearman, PairedSamples, Significance};
