//! Per-frame degradation measurements used to check the exposure trend.

use crate::error::Result;
use crate::image::PlanarImage;
use crate::isp::mosaic;

use super::sequence::BurstSequence;

/// Standard deviation of `frame - mosaic(ref_lr)` over flat regions: packed
/// 2x2-site cells whose clean-reference range is at most the median range.
pub fn measure_noise_std(seq: &BurstSequence, i: usize) -> Result<f64> {
    let clean = mosaic(&seq.ref_lr[i].map(|v| v.max(0.0)))?;
    let frame = &seq.frames[i];
    let (h, w) = (frame.height(), frame.width());
    // Flatness of each packed site = max - min of its four clean samples.
    let ranges: Vec<f32> = (0..h * w)
        .map(|p| {
            let vals = [0, 1, 2, 3].map(|c| clean.data()[c * h * w + p]);
            vals.iter().cloned().fold(f32::MIN, f32::max) - vals.iter().cloned().fold(f32::MAX, f32::min)
        })
        .collect();
    let mut sorted = ranges.clone();
    sorted.sort_by(f32::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mut residuals = Vec::new();
    for (p, &r) in ranges.iter().enumerate() {
        if r <= median {
            for c in 0..4 {
                let k = c * h * w + p;
                residuals.push(frame.data()[k] as f64 - clean.data()[k] as f64);
            }
        }
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    Ok((residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Normalized autocorrelation of `plane` at integer shift `(dx, dy)` over
/// the overlapping region.
fn autocorrelation(plane: &[f64], h: usize, w: usize, dx: usize, dy: usize) -> f64 {
    let mean = plane.iter().sum::<f64>() / plane.len() as f64;
    let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / plane.len() as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    let mut n = 0usize;
    for y in 0..h - dy {
        for x in 0..w - dx {
            s += (plane[y * w + x] - mean) * (plane[(y + dy) * w + x + dx] - mean);
            n += 1;
        }
    }
    s / n as f64 / var
}

/// First shift at which the autocorrelation falls to one half, linearly
/// interpolated between integer shifts.
fn half_max_shift(plane: &[f64], h: usize, w: usize, horizontal: bool) -> f64 {
    let max_shift = if horizontal { w } else { h } / 2;
    let mut prev = 1.0;
    for s in 1..=max_shift {
        let a = if horizontal {
            autocorrelation(plane, h, w, s, 0)
        } else {
            autocorrelation(plane, h, w, 0, s)
        };
        if a <= 0.5 {
            return (s - 1) as f64 + (prev - 0.5) / (prev - a);
        }
        prev = a;
    }
    max_shift as f64
}

/// Blur extent of an image, in pixels: half-max width of the
/// autocorrelation of the channel-mean derivative along each axis,
/// averaged over x and y. A sharp edge gives a narrow derivative
/// autocorrelation; a blur of length `L` along an axis widens it to about
/// `L / 2`.
pub fn autocorrelation_width(img: &PlanarImage) -> f64 {
    let (h, w) = (img.height(), img.width());
    let c = img.channels() as f64;
    let plane: Vec<f64> = (0..h * w)
        .map(|p| (0..img.channels()).map(|ch| img.plane(ch)[p] as f64).sum::<f64>() / c)
        .collect();
    let dx: Vec<f64> = (0..h)
        .flat_map(|y| (0..w - 1).map(move |x| (y, x)))
        .map(|(y, x)| plane[y * w + x + 1] - plane[y * w + x])
        .collect();
    let dy: Vec<f64> = (0..(h - 1) * w).map(|p| plane[p + w] - plane[p]).collect();
    0.5 * (half_max_shift(&dx, h, w - 1, true) + half_max_shift(&dy, h - 1, w, false))
}

pub fn measure_blur_width(seq: &BurstSequence, i: usize) -> f64 {
    autocorrelation_width(&seq.ref_lr[i])
}
