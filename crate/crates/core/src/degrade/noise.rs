//! Heteroscedastic Gaussian approximation of Poisson-Gaussian sensor noise.

use crate::error::{NebiError, Result};
use crate::image::{ColorSpace, PlanarImage};
use crate::rng::Rng;

/// Variance of a pixel with clean value `x` is `lambda_shot * x + lambda_read`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub lambda_shot: f32,
    pub lambda_read: f32,
}

impl NoiseParams {
    pub fn new(lambda_shot: f32, lambda_read: f32) -> Result<Self> {
        let ok = |v: f32| v.is_finite() && v >= 0.0;
        if !ok(lambda_shot) || !ok(lambda_read) {
            return Err(NebiError::Config(format!(
                "noise parameters must be finite and nonnegative: ({lambda_shot}, {lambda_read})"
            )));
        }
        Ok(NoiseParams {
            lambda_shot,
            lambda_read,
        })
    }

    pub fn variance(&self, x: f32) -> f32 {
        self.lambda_shot * x + self.lambda_read
    }
}

/// Log-uniform ranges for the unit-gain noise levels of a sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub shot_range: (f64, f64),
    pub read_range: (f64, f64),
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            shot_range: (1e-4, 1e-2),
            read_range: (1e-6, 1e-4),
        }
    }
}

/// Unit-gain noise levels, drawn once per sequence and shared by its frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBases {
    pub shot: f64,
    pub read: f64,
}

impl NoiseBases {
    pub fn sample(rng: &mut Rng, cfg: &NoiseConfig) -> Self {
        NoiseBases {
            shot: rng.log_uniform(cfg.shot_range.0, cfg.shot_range.1),
            read: rng.log_uniform(cfg.read_range.0, cfg.read_range.1),
        }
    }

    /// Shot noise scales with analog gain, read noise with its square.
    pub fn at_gain(&self, gain: f64) -> Result<NoiseParams> {
        if !(gain >= 1.0) {
            return Err(NebiError::Config(format!("gain {gain} below 1")));
        }
        NoiseParams::new((self.shot * gain) as f32, (self.read * gain * gain) as f32)
    }
}

/// Draws fresh bases from `cfg` and scales them to `gain`.
pub fn sample_noise_params(gain: f64, rng: &mut Rng, cfg: &NoiseConfig) -> Result<NoiseParams> {
    NoiseBases::sample(rng, cfg).at_gain(gain)
}

/// `y = x + sqrt(lambda_shot * x + lambda_read) * eps`, one standard normal
/// per value in storage order. No clipping.
pub fn add_noise(img: &PlanarImage, params: &NoiseParams, rng: &mut Rng) -> Result<PlanarImage> {
    if img.space() != ColorSpace::LinearRaw {
        return Err(NebiError::SpaceMismatch {
            expected: ColorSpace::LinearRaw,
            got: img.space(),
        });
    }
    if let Some(&v) = img.data().iter().find(|&&v| v < 0.0) {
        return Err(NebiError::NegativePixel(v));
    }
    if params.lambda_shot == 0.0 && params.lambda_read == 0.0 {
        return Ok(img.clone());
    }
    let (ls, lr) = (params.lambda_shot as f64, params.lambda_read as f64);
    let data = img
        .data()
        .iter()
        .map(|&x| {
            let std = (ls * x as f64 + lr).sqrt();
            (x as f64 + std * rng.gaussian()) as f32
        })
        .collect();
    PlanarImage::new(img.channels(), img.height(), img.width(), img.space(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_identity() {
        let img = PlanarImage::filled(1, 4, 4, ColorSpace::LinearRaw, 0.4);
        let out = add_noise(&img, &NoiseParams::new(0.0, 0.0).unwrap(), &mut Rng::seed_from_u64(1)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn negative_pixel_rejected() {
        let mut img = PlanarImage::filled(1, 4, 4, ColorSpace::LinearRaw, 0.4);
        img.set(0, 1, 1, -0.1);
        let p = NoiseParams::new(0.01, 0.001).unwrap();
        assert!(matches!(
            add_noise(&img, &p, &mut Rng::seed_from_u64(1)),
            Err(NebiError::NegativePixel(_))
        ));
    }

    #[test]
    fn gain_scaling_rule() {
        let b = NoiseBases { shot: 1e-3, read: 1e-5 };
        let p1 = b.at_gain(1.0).unwrap();
        let p4 = b.at_gain(4.0).unwrap();
        assert_eq!(p1, NoiseParams::new(1e-3, 1e-5).unwrap());
        assert!((p4.lambda_shot / p1.lambda_shot - 4.0).abs() < 1e-6);
        assert!((p4.lambda_read / p1.lambda_read - 16.0).abs() < 1e-5);
        assert!(b.at_gain(0.5).is_err());
    }

    #[test]
    fn bases_log_uniform_ks() {
        let cfg = NoiseConfig::default();
        let mut rng = Rng::seed_from_u64(11);
        let n = 10_000;
        let mut us_shot = Vec::with_capacity(n);
        let mut us_read = Vec::with_capacity(n);
        let unit = |v: f64, (lo, hi): (f64, f64)| (v.ln() - lo.ln()) / (hi.ln() - lo.ln());
        for _ in 0..n {
            let b = NoiseBases::sample(&mut rng, &cfg);
            assert!((cfg.shot_range.0..=cfg.shot_range.1).contains(&b.shot));
            assert!((cfg.read_range.0..=cfg.read_range.1).contains(&b.read));
            us_shot.push(unit(b.shot, cfg.shot_range));
            us_read.push(unit(b.read, cfg.read_range));
        }
        // KS statistic against U(0,1); p > 0.01 <=> D < 1.628 / sqrt(n).
        let critical = 1.628 / (n as f64).sqrt();
        for mut us in [us_shot, us_read] {
            us.sort_by(f64::total_cmp);
            let d = us
                .iter()
                .enumerate()
                .map(|(i, &u)| ((i + 1) as f64 / n as f64 - u).max(u - i as f64 / n as f64))
                .fold(0.0, f64::max);
            assert!(d < critical, "KS D = {d}");
        }
    }

    #[test]
    fn empirical_variance_and_mean() {
        let n = 1_000_000;
        let img = PlanarImage::filled(1, 1000, n / 1000, ColorSpace::LinearRaw, 0.25);
        let p = NoiseParams::new(0.01, 0.001).unwrap();
        let y = add_noise(&img, &p, &mut Rng::seed_from_u64(3)).unwrap();
        let mean = y.mean();
        let var = y.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        // Variance law: 0.01 * 0.25 + 0.001 = 0.0035.
        assert!((var - 0.0035).abs() < 0.02 * 0.0035, "var {var}");
        let sigma = 0.0035f64.sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    }
}
