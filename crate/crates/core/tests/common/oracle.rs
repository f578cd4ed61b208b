//! Brute-force HaarPSI written directly from the definitions: nested loops,
//! explicit Haar taps, dense same-size convolution with zero padding.

type Grid = Vec<Vec<f64>>;

fn grid_of(width: usize, height: usize, samples: &[f64]) -> Grid {
    (0..height)
        .map(|y| samples[y * width..(y + 1) * width].to_vec())
        .collect()
}

fn downsample(img: &Grid) -> Grid {
    let h = img.len() / 2;
    let w = img[0].len() / 2;
    let mut out = vec![vec![0.0; w]; h];
    for i in 0..h {
        for j in 0..w {
            out[i][j] = (img[2 * i][2 * j] + img[2 * i][2 * j + 1] + img[2 * i + 1][2 * j] + img[2 * i + 1][2 * j + 1]) / 4.0;
        }
    }
    out
}

/// out[y][x] = sum k[m][n] * img[y + cy - m][x + cx - n], zero outside.
fn convolve(img: &Grid, k: &Grid) -> Grid {
    let (h, w) = (img.len() as isize, img[0].len() as isize);
    let (kr, kc) = (k.len() as isize, k[0].len() as isize);
    let (cy, cx) = (kr / 2, kc / 2);
    let mut out = vec![vec![0.0; w as usize]; h as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for m in 0..kr {
                for n in 0..kc {
                    let yy = y + cy - m;
                    let xx = x + cx - n;
                    if yy >= 0 && yy < h && xx >= 0 && xx < w {
                        acc += k[m as usize][n as usize] * img[yy as usize][xx as usize];
                    }
                }
            }
            out[y as usize][x as usize] = acc;
        }
    }
    out
}

/// Haar low- and high-pass at scale j: 2^j taps of 2^(-j/2), the high-pass
/// negative on its first half.
fn haar(j: u32) -> (Vec<f64>, Vec<f64>) {
    let n = 1usize << j;
    let a = 2f64.powf(-(j as f64) / 2.0);
    let low = vec![a; n];
    let high = (0..n).map(|i| if i < n / 2 { -a } else { a }).collect();
    (low, high)
}

/// orientation 0: rows follow the high-pass (horizontal edges);
/// orientation 1: the transpose.
fn haar_2d(j: u32, orientation: usize) -> Grid {
    let (low, high) = haar(j);
    let (col, row) = if orientation == 0 { (high, low) } else { (low, high) };
    col.iter().map(|c| row.iter().map(|r| c * r).collect()).collect()
}

fn s(a: f64, b: f64, c: f64) -> f64 {
    (2.0 * a * b + c) / (a * a + b * b + c)
}

fn l(x: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + (-alpha * x).exp())
}

fn finish(mean: f64, alpha: f64) -> f64 {
    let v = (mean / (1.0 - mean)).ln() / alpha;
    (v * v).clamp(0.0, 1.0)
}

fn abs_conv(img: &Grid, k: &Grid) -> Grid {
    convolve(img, k)
        .into_iter()
        .map(|r| r.into_iter().map(f64::abs).collect())
        .collect()
}

/// Returns (sum of HS*W, sum of W, sum of HS, pixel count) over the two
/// luma orientations.
fn luma_sums(y1: &Grid, y2: &Grid, c: f64, alpha: f64) -> (f64, f64, f64, usize, Vec<Grid>) {
    let (h, w) = (y1.len(), y1[0].len());
    let mut num = 0.0;
    let mut den = 0.0;
    let mut plain = 0.0;
    let mut weights = Vec::new();
    for o in 0..2 {
        let r1: Vec<Grid> = (1..=3).map(|j| abs_conv(y1, &haar_2d(j, o))).collect();
        let r2: Vec<Grid> = (1..=3).map(|j| abs_conv(y2, &haar_2d(j, o))).collect();
        let mut wmap = vec![vec![0.0; w]; h];
        for y in 0..h {
            for x in 0..w {
                let hs = l((s(r1[0][y][x], r2[0][y][x], c) + s(r1[1][y][x], r2[1][y][x], c)) / 2.0, alpha);
                let wt = r1[2][y][x].max(r2[2][y][x]);
                wmap[y][x] = wt;
                num += hs * wt;
                den += wt;
                plain += hs;
            }
        }
        weights.push(wmap);
    }
    (num, den, plain, 2 * h * w, weights)
}

fn pooled(num: f64, den: f64, plain: f64, count: usize) -> f64 {
    // zero total weight: unweighted mean
    if den <= 1e-9 * count as f64 {
        plain / count as f64
    } else {
        num / den
    }
}

pub fn gray(f1: &[f64], f2: &[f64], width: usize, height: usize, c: f64, alpha: f64) -> f64 {
    let y1 = downsample(&grid_of(width, height, f1));
    let y2 = downsample(&grid_of(width, height, f2));
    let (num, den, plain, count, _) = luma_sums(&y1, &y2, c, alpha);
    finish(pooled(num, den, plain, count), alpha)
}

fn yiq(rgb: [&[f64]; 3], width: usize, height: usize) -> [Grid; 3] {
    const M: [[f64; 3]; 3] = [[0.299, 0.587, 0.114], [0.596, -0.274, -0.322], [0.211, -0.523, 0.312]];
    let mut out = [vec![vec![0.0; width]; height], vec![vec![0.0; width]; height], vec![vec![0.0; width]; height]];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            for (ch, row) in M.iter().enumerate() {
                out[ch][y][x] = row[0] * rgb[0][i] + row[1] * rgb[1][i] + row[2] * rgb[2][i];
            }
        }
    }
    out
}

pub fn color(a: [&[f64]; 3], b: [&[f64]; 3], width: usize, height: usize, c: f64, alpha: f64) -> f64 {
    let [y1, i1, q1] = yiq(a, width, height).map(|g| downsample(&g));
    let [y2, i2, q2] = yiq(b, width, height).map(|g| downsample(&g));
    let (mut num, mut den, mut plain, count, weights) = luma_sums(&y1, &y2, c, alpha);
    let mean = vec![vec![0.25; 2]; 2];
    let (mi1, mi2, mq1, mq2) = (abs_conv(&i1, &mean), abs_conv(&i2, &mean), abs_conv(&q1, &mean), abs_conv(&q2, &mean));
    let (h, w) = (y1.len(), y1[0].len());
    for y in 0..h {
        for x in 0..w {
            let hs = l((s(mi1[y][x], mi2[y][x], c) + s(mq1[y][x], mq2[y][x], c)) / 2.0, alpha);
            let wt = (weights[0][y][x] + weights[1][y][x]) / 2.0;
            num += hs * wt;
            den += wt;
            plain += hs;
        }
    }
    finish(pooled(num, den, plain, count + h * w), alpha)
}
