//! Invertible camera pipeline: sRGB gamma, white-balance gain, color
//! correction and RGGB mosaicing.
//!
//! `unprocess` maps display sRGB to linear camera RAW:
//! `inv_ccm * (srgb_to_linear(img) / wb_gains)`. `forward_isp` is its exact
//! inverse up to the final `[0, 1]` clamp.

use nalgebra::Matrix3;

use crate::error::{NebiError, Result};
use crate::image::{ColorSpace, PackedRaw, PlanarImage};

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Principal point at the center of a `width x height` image, with pixel
    /// centers on integer coordinates.
    pub fn centered(focal: f64, height: usize, width: usize) -> Self {
        Intrinsics {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gamma {
    Srgb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    ccm: Matrix3<f64>,
    inv_ccm: Matrix3<f64>,
    wb_gains: [f32; 3],
    intrinsics: Intrinsics,
    gamma: Gamma,
}

impl CameraModel {
    /// Validates: CCM rows sum to one (within 1e-6) and `|det| > 1e-6`,
    /// gains in `[0.25, 8]`, positive focal lengths.
    pub fn new(ccm: [[f64; 3]; 3], wb_gains: [f32; 3], intrinsics: Intrinsics) -> Result<Self> {
        let m = Matrix3::from_fn(|r, c| ccm[r][c]);
        for (r, row) in ccm.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(NebiError::Config(format!("ccm row {r} sums to {s}, not 1")));
            }
        }
        if m.determinant().abs() <= 1e-6 {
            return Err(NebiError::Config("ccm is not invertible".into()));
        }
        if let Some(g) = wb_gains.iter().find(|g| !(0.25..=8.0).contains(*g)) {
            return Err(NebiError::Config(format!("white-balance gain {g} outside [0.25, 8]")));
        }
        if !(intrinsics.fx > 0.0 && intrinsics.fy > 0.0) {
            return Err(NebiError::Config("focal lengths must be positive".into()));
        }
        let inv_ccm = m.try_inverse().ok_or_else(|| NebiError::Config("ccm is not invertible".into()))?;
        Ok(CameraModel {
            ccm: m,
            inv_ccm,
            wb_gains,
            intrinsics,
            gamma: Gamma::Srgb,
        })
    }

    /// Identity CCM and unit gains.
    pub fn identity(intrinsics: Intrinsics) -> Self {
        Self::new(IDENTITY_CCM, [1.0; 3], intrinsics).expect("identity camera is valid")
    }

    /// Non-trivial color correction and white balance, used by default for
    /// dataset synthesis so the inverse-CCM path is exercised.
    pub fn example(intrinsics: Intrinsics) -> Self {
        Self::new(EXAMPLE_CCM, EXAMPLE_WB_GAINS, intrinsics).expect("example camera is valid")
    }

    pub fn ccm(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.ccm[(r, c)];
            }
        }
        out
    }
    pub fn wb_gains(&self) -> [f32; 3] {
        self.wb_gains
    }
    pub fn intrinsics(&self) -> Intrinsics {
        self.intrinsics
    }
    pub fn gamma(&self) -> Gamma {
        self.gamma
    }
}

pub const IDENTITY_CCM: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
pub const EXAMPLE_CCM: [[f64; 3]; 3] = [
    [1.30, -0.20, -0.10],
    [-0.15, 1.25, -0.10],
    [-0.05, -0.25, 1.30],
];
pub const EXAMPLE_WB_GAINS: [f32; 3] = [1.9, 1.0, 1.5];

/// sRGB EOTF (display value to linear).
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB OETF (linear to display value).
pub fn linear_to_srgb(l: f64) -> f64 {
    if l <= 0.003_130_8 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

fn check_rgb(img: &PlanarImage) -> Result<()> {
    if img.channels() != 3 {
        return Err(NebiError::ChannelCount {
            expected: 3,
            got: img.channels(),
        });
    }
    Ok(())
}

fn apply_per_pixel(img: &PlanarImage, space: ColorSpace, f: impl Fn([f64; 3]) -> [f64; 3]) -> PlanarImage {
    let n = img.height() * img.width();
    let src = img.data();
    let mut out = vec![0.0f32; 3 * n];
    for i in 0..n {
        let px = f([src[i] as f64, src[n + i] as f64, src[2 * n + i] as f64]);
        out[i] = px[0] as f32;
        out[n + i] = px[1] as f32;
        out[2 * n + i] = px[2] as f32;
    }
    PlanarImage::new(3, img.height(), img.width(), space, out).expect("same dims as input")
}

/// sRGB image to linear camera RAW. Output is not clamped.
pub fn unprocess(img: &PlanarImage, cam: &CameraModel) -> Result<PlanarImage> {
    check_rgb(img)?;
    let inv = cam.inv_ccm;
    let g = cam.wb_gains.map(|g| g as f64);
    Ok(apply_per_pixel(img, ColorSpace::LinearRaw, |px| {
        let lin = nalgebra::Vector3::new(
            srgb_to_linear(px[0]) / g[0],
            srgb_to_linear(px[1]) / g[1],
            srgb_to_linear(px[2]) / g[2],
        );
        let raw = inv * lin;
        [raw[0], raw[1], raw[2]]
    }))
}

/// Linear camera RAW to display sRGB, clamping to `[0, 1]` before gamma.
pub fn forward_isp(img: &PlanarImage, cam: &CameraModel) -> Result<PlanarImage> {
    check_rgb(img)?;
    let m = cam.ccm;
    let g = cam.wb_gains.map(|g| g as f64);
    Ok(apply_per_pixel(img, ColorSpace::Srgb, |px| {
        let v = m * nalgebra::Vector3::new(px[0], px[1], px[2]);
        [0, 1, 2].map(|c| linear_to_srgb((v[c] * g[c]).clamp(0.0, 1.0)))
    }))
}

/// RGGB subsampling into packed planes.
pub fn mosaic(img: &PlanarImage) -> Result<PackedRaw> {
    check_rgb(img)?;
    let (h, w) = (img.height(), img.width());
    if h % 2 != 0 || w % 2 != 0 {
        return Err(NebiError::OddDimensions { height: h, width: w });
    }
    let (ph, pw) = (h / 2, w / 2);
    let mut data = vec![0.0f32; 4 * ph * pw];
    // (channel in source, row offset, col offset) per packed plane.
    const SITES: [(usize, usize, usize); 4] = [(0, 0, 0), (1, 0, 1), (1, 1, 0), (2, 1, 1)];
    for (p, &(c, dy, dx)) in SITES.iter().enumerate() {
        for y in 0..ph {
            for x in 0..pw {
                data[(p * ph + y) * pw + x] = img.get(c, 2 * y + dy, 2 * x + dx);
            }
        }
    }
    PackedRaw::new(ph, pw, data)
}

/// Like [`mosaic`] but clamps negative samples to zero first. RAW sensor
/// output is nonnegative; this is the only place synthesis clips.
pub fn mosaic_clamped(img: &PlanarImage) -> Result<PackedRaw> {
    mosaic(&img.map(|v| v.max(0.0)))
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r.clamp(0, n - 1) as usize
}

/// Bilinear demosaic of packed RGGB with reflection padding. Reflection
/// keeps the Bayer phase, so every neighbor average reads the right color.
pub fn demosaic_bilinear(raw: &PackedRaw) -> PlanarImage {
    let (ph, pw) = (raw.height(), raw.width());
    let (h, w) = (2 * ph, 2 * pw);
    let cfa = |y: isize, x: isize| -> f32 {
        let (y, x) = (reflect(y, h), reflect(x, w));
        let plane = match (y % 2, x % 2) {
            (0, 0) => 0,
            (0, 1) => 1,
            (1, 0) => 2,
            _ => 3,
        };
        raw.get(plane, y / 2, x / 2)
    };
    let mut out = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            let (yi, xi) = (y as isize, x as isize);
            let center = cfa(yi, xi);
            let cross = (cfa(yi - 1, xi) + cfa(yi + 1, xi) + cfa(yi, xi - 1) + cfa(yi, xi + 1)) * 0.25;
            let diag = (cfa(yi - 1, xi - 1) + cfa(yi - 1, xi + 1) + cfa(yi + 1, xi - 1) + cfa(yi + 1, xi + 1))
                * 0.25;
            let horiz = (cfa(yi, xi - 1) + cfa(yi, xi + 1)) * 0.5;
            let vert = (cfa(yi - 1, xi) + cfa(yi + 1, xi)) * 0.5;
            let (r, g, b) = match (y % 2, x % 2) {
                (0, 0) => (center, cross, diag),
                (0, 1) => (horiz, center, vert),
                (1, 0) => (vert, center, horiz),
                _ => (diag, cross, center),
            };
            out[y * w + x] = r;
            out[h * w + y * w + x] = g;
            out[2 * h * w + y * w + x] = b;
        }
    }
    PlanarImage::new(3, h, w, ColorSpace::LinearRaw, out).expect("demosaic dims")
}
