//! Raster planes, decoding, colour transforms and the 2x2 block-mean preprocessing.
//!
//! All samples are `f64` on the nominal `[0, 255]` scale. 8-bit inputs map onto
//! that range without rescaling; 16-bit inputs are divided by 257.

use std::path::Path;

use image::{DynamicImage, ImageError, ImageReader};

use crate::error::{Error, Result};

/// Row-major plane of finite real samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidPlane(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::InvalidPlane(format!(
                "{} samples for a {width}x{height} plane",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPlane(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    /// Constant plane. Panics on zero dimensions or a non-finite value.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("valid constant plane")
    }

    /// Builds a plane from `f(x, y)`. Panics on zero dimensions or non-finite output.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self::new(width, height, samples).expect("valid generated plane")
    }

    /// Internal constructor for buffers produced by our own arithmetic.
    pub(crate) fn from_raw(width: usize, height: usize, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), width * height);
        Self {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Sample at column `x`, row `y`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImagePlane {
        Self::from_raw(
            self.width,
            self.height,
            self.samples.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub(crate) fn ensure_same_dims(&self, other: &ImagePlane) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::mismatch(self.dims(), other.dims()));
        }
        Ok(())
    }
}

/// Three planes of identical size holding R, G and B.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage {
    r: ImagePlane,
    g: ImagePlane,
    b: ImagePlane,
}

impl ColorImage {
    pub fn new(r: ImagePlane, g: ImagePlane, b: ImagePlane) -> Result<Self> {
        r.ensure_same_dims(&g)?;
        r.ensure_same_dims(&b)?;
        Ok(Self { r, g, b })
    }

    /// Grey image promoted to colour with R = G = B.
    pub fn from_gray(plane: &ImagePlane) -> Self {
        Self {
            r: plane.clone(),
            g: plane.clone(),
            b: plane.clone(),
        }
    }

    pub fn r(&self) -> &ImagePlane {
        &self.r
    }

    pub fn g(&self) -> &ImagePlane {
        &self.g
    }

    pub fn b(&self) -> &ImagePlane {
        &self.b
    }

    pub fn width(&self) -> usize {
        self.r.width
    }

    pub fn height(&self) -> usize {
        self.r.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }
}

/// Result of decoding a raster file: one or three channels.
#[derive(Clone, Debug, PartialEq)]
pub enum DecodedImage {
    Gray(ImagePlane),
    Color(ColorImage),
}

impl DecodedImage {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            DecodedImage::Gray(p) => p.dims(),
            DecodedImage::Color(c) => c.dims(),
        }
    }

    /// Luma plane; colour inputs go through [`rgb_to_gray`].
    pub fn to_gray(&self) -> ImagePlane {
        match self {
            DecodedImage::Gray(p) => p.clone(),
            DecodedImage::Color(c) => rgb_to_gray(c),
        }
    }

    /// Colour view; grey inputs are replicated into all three channels.
    pub fn to_color(&self) -> ColorImage {
        match self {
            DecodedImage::Gray(p) => ColorImage::from_gray(p),
            DecodedImage::Color(c) => c.clone(),
        }
    }

    /// Writes the image as 8-bit samples (rounded, clamped to `[0, 255]`).
    /// The container is chosen from the extension: `.png`, `.pgm`, `.ppm`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dynamic = match self {
            DecodedImage::Gray(p) => {
                let buf = image::GrayImage::from_raw(
                    p.width as u32,
                    p.height as u32,
                    p.samples.iter().map(|&v| to_u8(v)).collect(),
                )
                .expect("buffer length matches dimensions");
                DynamicImage::ImageLuma8(buf)
            }
            DecodedImage::Color(c) => {
                let mut bytes = Vec::with_capacity(c.r.samples.len() * 3);
                for ((&r, &g), &b) in c.r.samples.iter().zip(&c.g.samples).zip(&c.b.samples) {
                    bytes.extend_from_slice(&[to_u8(r), to_u8(g), to_u8(b)]);
                }
                let buf = image::RgbImage::from_raw(c.width() as u32, c.height() as u32, bytes)
                    .expect("buffer length matches dimensions");
                DynamicImage::ImageRgb8(buf)
            }
        };
        dynamic.save(path).map_err(|e| Error::Encode {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }
}

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Decodes PNG or binary PGM/PPM (other formats the `image` crate was built
/// with also work). Alpha is discarded.
pub fn decode_image(path: impl AsRef<Path>) -> Result<DecodedImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    if reader.format().is_none() {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: "unrecognised file signature".into(),
        });
    }
    let decoded = reader.decode().map_err(|e| map_decode_error(path, e))?;
    Ok(from_dynamic(decoded))
}

fn map_decode_error(path: &Path, err: ImageError) -> Error {
    let path = path.to_path_buf();
    match err {
        ImageError::Unsupported(e) => Error::UnsupportedFormat {
            path,
            detail: e.to_string(),
        },
        ImageError::IoError(e) if e.kind() != std::io::ErrorKind::UnexpectedEof => {
            Error::Io { path, source: e }
        }
        other => Error::CorruptImage {
            path,
            detail: other.to_string(),
        },
    }
}

fn from_dynamic(img: DynamicImage) -> DecodedImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = |samples: Vec<f64>| DecodedImage::Gray(ImagePlane::from_raw(w, h, samples));
    let color = |px: &mut dyn Iterator<Item = [f64; 3]>| {
        let mut r = Vec::with_capacity(w * h);
        let mut g = Vec::with_capacity(w * h);
        let mut b = Vec::with_capacity(w * h);
        for [pr, pg, pb] in px {
            r.push(pr);
            g.push(pg);
            b.push(pb);
        }
        DecodedImage::Color(ColorImage {
            r: ImagePlane::from_raw(w, h, r),
            g: ImagePlane::from_raw(w, h, g),
            b: ImagePlane::from_raw(w, h, b),
        })
    };
    const SCALE16: f64 = 257.0;
    match img {
        DynamicImage::ImageLuma8(buf) => gray(buf.pixels().map(|p| p.0[0] as f64).collect()),
        DynamicImage::ImageLumaA8(buf) => gray(buf.pixels().map(|p| p.0[0] as f64).collect()),
        DynamicImage::ImageLuma16(buf) => {
            gray(buf.pixels().map(|p| p.0[0] as f64 / SCALE16).collect())
        }
        DynamicImage::ImageLumaA16(buf) => {
            gray(buf.pixels().map(|p| p.0[0] as f64 / SCALE16).collect())
        }
        DynamicImage::ImageRgb8(buf) => color(
            &mut buf
                .pixels()
                .map(|p| [p.0[0] as f64, p.0[1] as f64, p.0[2] as f64]),
        ),
        DynamicImage::ImageRgba8(buf) => color(
            &mut buf
                .pixels()
                .map(|p| [p.0[0] as f64, p.0[1] as f64, p.0[2] as f64]),
        ),
        DynamicImage::ImageRgb16(buf) => color(&mut buf.pixels().map(|p| {
            [
                p.0[0] as f64 / SCALE16,
                p.0[1] as f64 / SCALE16,
                p.0[2] as f64 / SCALE16,
            ]
        })),
        DynamicImage::ImageRgba16(buf) => color(&mut buf.pixels().map(|p| {
            [
                p.0[0] as f64 / SCALE16,
                p.0[1] as f64 / SCALE16,
                p.0[2] as f64 / SCALE16,
            ]
        })),
        other => {
            let buf = other.to_rgb32f();
            color(&mut buf.pixels().map(|p| {
                [
                    p.0[0] as f64 * 255.0,
                    p.0[1] as f64 * 255.0,
                    p.0[2] as f64 * 255.0,
                ]
            }))
        }
    }
}

/// RGB to YIQ matrix; the first row doubles as the luma weights.
pub const YIQ_MATRIX: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [0.596, -0.274, -0.322],
    [0.211, -0.523, 0.312],
];

fn apply_row(img: &ColorImage, row: [f64; 3]) -> ImagePlane {
    let samples = img
        .r
        .samples
        .iter()
        .zip(&img.g.samples)
        .zip(&img.b.samples)
        .map(|((&r, &g), &b)| row[0] * r + row[1] * g + row[2] * b)
        .collect();
    ImagePlane::from_raw(img.width(), img.height(), samples)
}

/// Luma conversion with the `rgb2gray` weights 0.299 / 0.587 / 0.114.
pub fn rgb_to_gray(img: &ColorImage) -> ImagePlane {
    apply_row(img, YIQ_MATRIX[0])
}

/// Per-pixel YIQ transform, returned as `(y, i, q)`.
pub fn rgb_to_yiq(img: &ColorImage) -> (ImagePlane, ImagePlane, ImagePlane) {
    (
        apply_row(img, YIQ_MATRIX[0]),
        apply_row(img, YIQ_MATRIX[1]),
        apply_row(img, YIQ_MATRIX[2]),
    )
}

/// 2x2 mean filter followed by dyadic subsampling.
///
/// Output pixel `(i, j)` is the mean of input rows `2i, 2i+1` and columns
/// `2j, 2j+1`. A trailing odd row or column is dropped.
pub fn preprocess(img: &ImagePlane) -> Result<ImagePlane> {
    if img.width < 2 || img.height < 2 {
        return Err(Error::TooSmall {
            width: img.width,
            height: img.height,
            min_width: 2,
            min_height: 2,
        });
    }
    let (ow, oh) = (img.width / 2, img.height / 2);
    let mut out = Vec::with_capacity(ow * oh);
    for i in 0..oh {
        let top = &img.samples[2 * i * img.width..];
        let bottom = &img.samples[(2 * i + 1) * img.width..];
        for j in 0..ow {
            let s = top[2 * j] + top[2 * j + 1] + bottom[2 * j] + bottom[2 * j + 1];
            out.push(s * 0.25);
        }
    }
    Ok(ImagePlane::from_raw(ow, oh, out))
}
