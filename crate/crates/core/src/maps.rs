//! Export of similarity and weight maps as 8-bit images.
//!
//! Each map is min-max normalised on its own. A sidecar `maps.txt` records
//! the bounds so the raw values can be recovered.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{DecodedImage, ImagePlane};
use crate::metric::SimilarityMaps;

pub const SIDECAR_NAME: &str = "maps.txt";

/// Bounds used to normalise one exported map.
#[derive(Clone, Debug, PartialEq)]
pub struct MapBounds {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

/// Scales a plane onto `[0, 255]`. A constant plane maps to 0.
pub fn normalize(plane: &ImagePlane) -> (ImagePlane, f64, f64) {
    let (lo, hi) = plane.min_max();
    let span = hi - lo;
    let out = if span > 0.0 {
        plane.map(|v| (v - lo) / span * 255.0)
    } else {
        plane.map(|_| 0.0)
    };
    (out, lo, hi)
}

/// Writes `hs1.png`, `hs2.png`, ..., `w1.png`, ... and `maps.txt` into `dir`,
/// creating it if needed. Returns the written image paths.
pub fn write_maps(maps: &SimilarityMaps, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut sidecar = String::from("# map min max\n");
    let mut written = Vec::new();
    let named = maps
        .similarity
        .iter()
        .enumerate()
        .map(|(k, p)| (format!("hs{}", k + 1), p))
        .chain(
            maps.weights
                .iter()
                .enumerate()
                .map(|(k, p)| (format!("w{}", k + 1), p)),
        );
    for (name, plane) in named {
        let (norm, lo, hi) = normalize(plane);
        let path = dir.join(format!("{name}.png"));
        DecodedImage::Gray(norm).save(&path)?;
        let _ = writeln!(sidecar, "{name} {lo:.12e} {hi:.12e}");
        written.push(path);
    }
    let side = dir.join(SIDECAR_NAME);
    std::fs::write(&side, sidecar).map_err(|source| Error::Io { path: side, source })?;
    Ok(written)
}

/// Parses a `maps.txt` sidecar.
pub fn read_bounds(path: impl AsRef<Path>) -> Result<Vec<MapBounds>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: &str| Error::InvalidParameter(format!("malformed bounds line '{line}'"));
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let mut it = line.split_whitespace();
            let (Some(name), Some(lo), Some(hi)) = (it.next(), it.next(), it.next()) else {
                return Err(bad(line));
            };
            Ok(MapBounds {
                name: name.to_string(),
                min: lo.parse().map_err(|_| bad(line))?,
                max: hi.parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}
