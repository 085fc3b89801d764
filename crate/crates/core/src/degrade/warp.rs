//! Inverse warping, homography blur and box downsampling.

use crate::degrade::gyro::Homography;
use crate::error::{NebiError, Result};
use crate::image::{ColorSpace, PlanarImage};

/// Mirror a continuous coordinate into `[0, n-1]` (reflection without edge
/// repeat, period `2(n-1)`).
#[inline]
fn reflect_coord(u: f64, n: usize) -> f64 {
    let last = (n - 1) as f64;
    if (0.0..=last).contains(&u) {
        return u;
    }
    let period = 2.0 * last;
    let mut r = u.rem_euclid(period);
    if r > last {
        r = period - r;
    }
    r
}

/// Bilinear sample locations for one output pixel: top-left index, the two
/// neighbor indices and fractional weights.
#[derive(Clone, Copy)]
struct Tap {
    y0: usize,
    y1: usize,
    x0: usize,
    x1: usize,
    fy: f32,
    fx: f32,
}

fn tap(sx: f64, sy: f64, h: usize, w: usize) -> Tap {
    let (sx, sy) = (reflect_coord(sx, w), reflect_coord(sy, h));
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    Tap {
        y0,
        x0,
        y1: (y0 + 1).min(h - 1),
        x1: (x0 + 1).min(w - 1),
        fy: (sy - y0 as f64) as f32,
        fx: (sx - x0 as f64) as f32,
    }
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + (b - a) * t
}

fn for_each_tap(img: &PlanarImage, h: &Homography, mut f: impl FnMut(usize, Tap)) -> Result<()> {
    let inv = h.inverse()?;
    let m = inv.matrix();
    let (hh, ww) = (img.height(), img.width());
    for y in 0..hh {
        for x in 0..ww {
            let (xf, yf) = (x as f64, y as f64);
            let d = m[(2, 0)] * xf + m[(2, 1)] * yf + m[(2, 2)];
            let sx = (m[(0, 0)] * xf + m[(0, 1)] * yf + m[(0, 2)]) / d;
            let sy = (m[(1, 0)] * xf + m[(1, 1)] * yf + m[(1, 2)]) / d;
            f(y * ww + x, tap(sx, sy, hh, ww));
        }
    }
    Ok(())
}

#[inline]
fn sample(plane: &[f32], w: usize, t: Tap) -> f32 {
    let top = lerp(plane[t.y0 * w + t.x0], plane[t.y0 * w + t.x1], t.fx);
    let bot = lerp(plane[t.y1 * w + t.x0], plane[t.y1 * w + t.x1], t.fx);
    lerp(top, bot, t.fy)
}

/// `out(p) = img(H^-1 p)` with bilinear sampling and reflected borders.
pub fn warp(img: &PlanarImage, h: &Homography) -> Result<PlanarImage> {
    let (hh, ww) = (img.height(), img.width());
    let n = hh * ww;
    let mut out = vec![0.0f32; img.data().len()];
    for_each_tap(img, h, |i, t| {
        for c in 0..img.channels() {
            out[c * n + i] = sample(img.plane(c), ww, t);
        }
    })?;
    PlanarImage::new(img.channels(), hh, ww, img.space(), out)
}

/// Mean of `warp(sharp, H_j)` over all homographies. Input must be linear.
pub fn synthesize_blur(sharp: &PlanarImage, homographies: &[Homography]) -> Result<PlanarImage> {
    if sharp.space() != ColorSpace::LinearRaw {
        return Err(NebiError::SpaceMismatch {
            expected: ColorSpace::LinearRaw,
            got: sharp.space(),
        });
    }
    if homographies.is_empty() {
        return Err(NebiError::Config("blur needs at least one homography".into()));
    }
    let (hh, ww) = (sharp.height(), sharp.width());
    let n = hh * ww;
    let mut acc = vec![0.0f64; sharp.data().len()];
    for h in homographies {
        for_each_tap(sharp, h, |i, t| {
            for c in 0..sharp.channels() {
                acc[c * n + i] += sample(sharp.plane(c), ww, t) as f64;
            }
        })?;
    }
    let scale = 1.0 / homographies.len() as f64;
    let out = acc.into_iter().map(|v| (v * scale) as f32).collect();
    PlanarImage::new(sharp.channels(), hh, ww, sharp.space(), out)
}

/// Non-overlapping `factor x factor` block average per channel.
pub fn downsample(img: &PlanarImage, factor: usize) -> Result<PlanarImage> {
    let (h, w) = (img.height(), img.width());
    if factor == 0 || h % factor != 0 || w % factor != 0 || h / factor < 2 || w / factor < 2 {
        return Err(NebiError::Indivisible {
            height: h,
            width: w,
            factor,
        });
    }
    let (oh, ow) = (h / factor, w / factor);
    let norm = 1.0 / (factor * factor) as f64;
    let mut out = Vec::with_capacity(img.channels() * oh * ow);
    for c in 0..img.channels() {
        let plane = img.plane(c);
        for by in 0..oh {
            for bx in 0..ow {
                let mut s = 0.0f64;
                for y in by * factor..(by + 1) * factor {
                    s += plane[y * w + bx * factor..y * w + (bx + 1) * factor]
                        .iter()
                        .map(|&v| v as f64)
                        .sum::<f64>();
                }
                out.push((s * norm) as f32);
            }
        }
    }
    PlanarImage::new(img.channels(), oh, ow, img.space(), out)
}
