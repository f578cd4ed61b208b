//! 1D wavelet filter cascades, the 2D orientation-selective filters built from
//! them, and same-size 2D convolution.
//!
//! Convolution is a true convolution (taps flipped). For a kernel of length
//! `n` along an axis the anchor sits at index `n / 2`, so
//! `out[y][x] = sum_{m,n} k[m][n] * img[y + cy - m][x + cx - n]`
//! with `cy = rows / 2` and `cx = cols / 2`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePlane;

/// Wavelet families the metric can be built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletId {
    Haar,
    Daub2,
    Daub4,
    Sym4,
    Coif1,
    /// CDF 9/7 analysis pair.
    Cdf,
}

impl WaveletId {
    pub const ALL: [WaveletId; 6] = [
        WaveletId::Haar,
        WaveletId::Daub2,
        WaveletId::Daub4,
        WaveletId::Sym4,
        WaveletId::Coif1,
        WaveletId::Cdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WaveletId::Haar => "haar",
            WaveletId::Daub2 => "daub2",
            WaveletId::Daub4 => "daub4",
            WaveletId::Sym4 => "sym4",
            WaveletId::Coif1 => "coif1",
            WaveletId::Cdf => "cdf",
        }
    }

    pub fn is_orthogonal(self) -> bool {
        self != WaveletId::Cdf
    }
}

impl fmt::Display for WaveletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveletId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WaveletId::ALL
            .into_iter()
            .find(|w| w.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown wavelet '{s}' (expected one of haar, daub2, daub4, sym4, coif1, cdf)"
                ))
            })
    }
}

// Decomposition low-pass taps. Orthogonal high-pass taps are derived by the
// alternating flip g[n] = (-1)^(n+1) h[L-1-n].
const DAUB4_LO: [f64; 8] = [
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.18703481171888114,
    -0.02798376941698385,
    0.6308807679295904,
    0.7148465705525415,
    0.23037781330885523,
];
const SYM4_LO: [f64; 8] = [
    -0.07576571478927333,
    -0.02963552764599851,
    0.49761866763201545,
    0.8037387518059161,
    0.29785779560527736,
    -0.09921954357684722,
    -0.012603967262037833,
    0.0322231006040427,
];
const COIF1_LO: [f64; 6] = [
    -0.01565572813546454,
    -0.0727326195128539,
    0.38486484686420286,
    0.8525720202122554,
    0.3378976624578092,
    -0.0727326195128539,
];
const CDF97_LO: [f64; 9] = [
    0.03782845550726404,
    -0.023849465019556843,
    -0.11062440441843718,
    0.37740285561283066,
    0.8526986790088938,
    0.37740285561283066,
    -0.11062440441843718,
    -0.023849465019556843,
    0.03782845550726404,
];
const CDF97_HI: [f64; 7] = [
    -0.06453888262869706,
    0.04068941760916406,
    0.41809227322161724,
    -0.7884856164055829,
    0.41809227322161724,
    0.04068941760916406,
    -0.06453888262869706,
];

/// A low-pass (scaling) / high-pass (wavelet) filter pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Wavelet1D {
    pub id: WaveletId,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl Wavelet1D {
    pub fn new(id: WaveletId) -> Self {
        let lowpass: Vec<f64> = match id {
            WaveletId::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            WaveletId::Daub2 => {
                let s3 = 3f64.sqrt();
                let d = 4.0 * std::f64::consts::SQRT_2;
                vec![(1.0 - s3) / d, (3.0 - s3) / d, (3.0 + s3) / d, (1.0 + s3) / d]
            }
            WaveletId::Daub4 => DAUB4_LO.to_vec(),
            WaveletId::Sym4 => SYM4_LO.to_vec(),
            WaveletId::Coif1 => COIF1_LO.to_vec(),
            WaveletId::Cdf => CDF97_LO.to_vec(),
        };
        let highpass = match id {
            WaveletId::Cdf => CDF97_HI.to_vec(),
            _ => alternating_flip(&lowpass),
        };
        Self {
            id,
            lowpass,
            highpass,
        }
    }

    pub fn haar() -> Self {
        Self::new(WaveletId::Haar)
    }
}

fn alternating_flip(h: &[f64]) -> Vec<f64> {
    let n = h.len();
    (0..n)
        .map(|k| {
            let v = h[n - 1 - k];
            if k % 2 == 0 {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Full linear convolution of two sequences.
pub fn convolve_1d(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Inserts a zero after every coefficient, then drops trailing zero taps.
fn upsample2(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * v.len());
    for &x in v {
        out.push(x);
        out.push(0.0);
    }
    while out.len() > 1 && out.last() == Some(&0.0) {
        out.pop();
    }
    out
}

/// Scale-`j` low-pass and high-pass filters, `(h_j, g_j)`.
///
/// `h_1, g_1` are the wavelet's own taps; for `j > 1`
/// `g_j = h_1 * up2(g_{j-1})` and `h_j = h_1 * up2(h_{j-1})`.
pub fn cascade_1d(w: &Wavelet1D, scale: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if scale == 0 {
        return Err(Error::InvalidParameter("scale must be at least 1".into()));
    }
    let mut h = w.lowpass.clone();
    let mut g = w.highpass.clone();
    for _ in 1..scale {
        g = convolve_1d(&w.lowpass, &upsample2(&g));
        h = convolve_1d(&w.lowpass, &upsample2(&h));
    }
    Ok((h, g))
}

/// Dense 2D tap grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    rows: usize,
    cols: usize,
    taps: Vec<f64>,
}

impl Kernel2D {
    pub fn new(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || taps.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "kernel {rows}x{cols} with {} taps",
                taps.len()
            )));
        }
        Ok(Self { rows, cols, taps })
    }

    /// `outer(column, row)[r][c] = column[r] * row[c]`.
    pub fn outer(column: &[f64], row: &[f64]) -> Self {
        let taps = column
            .iter()
            .flat_map(|&a| row.iter().map(move |&b| a * b))
            .collect();
        Self {
            rows: column.len(),
            cols: row.len(),
            taps,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.taps[row * self.cols + col]
    }

    pub fn transpose(&self) -> Self {
        let mut taps = Vec::with_capacity(self.taps.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                taps.push(self.get(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            taps,
        }
    }
}

/// Rank-one filter stored as its column (vertical) and row (horizontal) factors.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableFilter {
    pub column: Vec<f64>,
    pub row: Vec<f64>,
}

impl SeparableFilter {
    pub fn new(column: Vec<f64>, row: Vec<f64>) -> Self {
        Self { column, row }
    }

    pub fn to_kernel(&self) -> Kernel2D {
        Kernel2D::outer(&self.column, &self.row)
    }

    /// `(rows, cols)` of the dense equivalent.
    pub fn support(&self) -> (usize, usize) {
        (self.column.len(), self.row.len())
    }
}

/// Filter orientation. `Horizontal` (k = 1) responds to horizontal structures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl Orientation {
    pub const BOTH: [Orientation; 2] = [Orientation::Horizontal, Orientation::Vertical];
}

/// Horizontal and vertical 2D filters for scales `1..=J`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank2D {
    wavelet: WaveletId,
    horizontal: Vec<SeparableFilter>,
    vertical: Vec<SeparableFilter>,
}

impl FilterBank2D {
    /// `horizontal[j] = outer(g_j, h_j)`, `vertical[j] = outer(h_j, g_j)`.
    pub fn new(w: &Wavelet1D, scales: usize) -> Result<Self> {
        if scales == 0 {
            return Err(Error::InvalidParameter(
                "filter bank needs at least one scale".into(),
            ));
        }
        let mut horizontal = Vec::with_capacity(scales);
        let mut vertical = Vec::with_capacity(scales);
        for j in 1..=scales {
            let (h, g) = cascade_1d(w, j)?;
            horizontal.push(SeparableFilter::new(g.clone(), h.clone()));
            vertical.push(SeparableFilter::new(h, g));
        }
        Ok(Self {
            wavelet: w.id,
            horizontal,
            vertical,
        })
    }

    /// Process-wide three-scale bank for `id`, built once.
    pub fn shared(id: WaveletId) -> &'static FilterBank2D {
        static BANKS: [OnceLock<FilterBank2D>; 6] = [
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
        ];
        let slot = WaveletId::ALL.iter().position(|&w| w == id).unwrap();
        BANKS[slot].get_or_init(|| {
            FilterBank2D::new(&Wavelet1D::new(id), 3).expect("three scales is valid")
        })
    }

    pub fn wavelet(&self) -> WaveletId {
        self.wavelet
    }

    pub fn scales(&self) -> usize {
        self.horizontal.len()
    }

    /// Separable filter at 1-based `scale`. Panics when out of range.
    pub fn filter(&self, orientation: Orientation, scale: usize) -> &SeparableFilter {
        assert!(
            scale >= 1 && scale <= self.scales(),
            "scale {scale} out of range 1..={}",
            self.scales()
        );
        match orientation {
            Orientation::Horizontal => &self.horizontal[scale - 1],
            Orientation::Vertical => &self.vertical[scale - 1],
        }
    }

    pub fn horizontal(&self, scale: usize) -> Kernel2D {
        self.filter(Orientation::Horizontal, scale).to_kernel()
    }

    pub fn vertical(&self, scale: usize) -> Kernel2D {
        self.filter(Orientation::Vertical, scale).to_kernel()
    }
}

/// How samples outside the image are filled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero padding.
    #[default]
    Zero,
    /// Half-sample symmetric extension (`-1 -> 0`, `n -> n-1`).
    Symmetric,
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Same-size convolution with zero padding.
pub fn convolve2d_same(img: &ImagePlane, kernel: &Kernel2D) -> Result<ImagePlane> {
    convolve2d_same_with(img, kernel, Boundary::Zero)
}

/// Same-size convolution with a selectable boundary. The kernel may not be
/// larger than the image along either axis.
pub fn convolve2d_same_with(
    img: &ImagePlane,
    kernel: &Kernel2D,
    boundary: Boundary,
) -> Result<ImagePlane> {
    let (w, h) = img.dims();
    if kernel.rows > h || kernel.cols > w {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min_width: kernel.cols,
            min_height: kernel.rows,
        });
    }
    let (cy, cx) = ((kernel.rows / 2) as isize, (kernel.cols / 2) as isize);
    let src = img.samples();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for m in 0..kernel.rows {
                let sy = y as isize + cy - m as isize;
                let sy = match boundary {
                    Boundary::Zero if sy < 0 || sy >= h as isize => continue,
                    Boundary::Zero => sy as usize,
                    Boundary::Symmetric => reflect(sy, h),
                };
                let row = &src[sy * w..(sy + 1) * w];
                for n in 0..kernel.cols {
                    let sx = x as isize + cx - n as isize;
                    let sx = match boundary {
                        Boundary::Zero if sx < 0 || sx >= w as isize => continue,
                        Boundary::Zero => sx as usize,
                        Boundary::Symmetric => reflect(sx, w),
                    };
                    acc += kernel.get(m, n) * row[sx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    Ok(ImagePlane::from_raw(w, h, out))
}

/// Same-size convolution with a separable filter: column taps along y, then
/// row taps along x. Equal to [`convolve2d_same_with`] on the dense kernel, but
/// filters larger than the image are allowed.
pub fn convolve_separable(
    img: &ImagePlane,
    filter: &SeparableFilter,
    boundary: Boundary,
) -> ImagePlane {
    let (w, h) = img.dims();
    let tmp = convolve_axis(img.samples(), w, h, &filter.column, Axis::Y, boundary);
    let out = convolve_axis(&tmp, w, h, &filter.row, Axis::X, boundary);
    ImagePlane::from_raw(w, h, out)
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn convolve_axis(
    src: &[f64],
    w: usize,
    h: usize,
    taps: &[f64],
    axis: Axis,
    boundary: Boundary,
) -> Vec<f64> {
    let len = match axis {
        Axis::X => w,
        Axis::Y => h,
    };
    let center = (taps.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    // For each output position along the axis, the contributing (tap, source) pairs.
    let plan: Vec<Vec<(f64, usize)>> = (0..len)
        .map(|p| {
            taps.iter()
                .enumerate()
                .filter_map(|(m, &t)| {
                    let s = p as isize + center - m as isize;
                    match boundary {
                        Boundary::Zero if s < 0 || s >= len as isize => None,
                        Boundary::Zero => Some((t, s as usize)),
                        Boundary::Symmetric => Some((t, reflect(s, len))),
                    }
                })
                .collect()
        })
        .collect();
    match axis {
        Axis::X => {
            for y in 0..h {
                let row = &src[y * w..(y + 1) * w];
                let dst = &mut out[y * w..(y + 1) * w];
                for (x, terms) in plan.iter().enumerate() {
                    dst[x] = terms.iter().map(|&(t, s)| t * row[s]).sum();
                }
            }
        }
        Axis::Y => {
            for (y, terms) in plan.iter().enumerate() {
                let dst = &mut out[y * w..(y + 1) * w];
                for &(t, s) in terms {
                    let row = &src[s * w..(s + 1) * w];
                    for (d, &v) in dst.iter_mut().zip(row) {
                        *d += t * v;
                    }
                }
            }
        }
    }
    out
}
