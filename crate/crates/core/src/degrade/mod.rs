//! Exposure-dependent degradations: gyro-driven homography blur,
//! downsampling and sensor noise.

mod exposure;
mod gyro;
mod noise;
mod warp;

pub use exposure::ExposureSchedule;
pub use gyro::{integrate_rotations, simulate_gyro, trace_to_homographies, GyroTrace, Homography, OuParams};
pub use noise::{add_noise, sample_noise_params, NoiseBases, NoiseConfig, NoiseParams};
pub use warp::{downsample, synthesize_blur, warp};

/// Everything the degradation stages need besides the images themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradeConfig {
    pub ou: OuParams,
    pub gyro_rate_hz: f64,
    pub noise: NoiseConfig,
    /// Focal length in HR pixels; the principal point is the image center.
    pub focal_px: f64,
    pub downsample_factor: usize,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        DegradeConfig {
            ou: OuParams::default(),
            gyro_rate_hz: 1000.0,
            noise: NoiseConfig::default(),
            focal_px: 500.0,
            downsample_factor: 4,
        }
    }
}

impl DegradeConfig {
    /// Homographies averaged for a frame of `exposure_s` seconds.
    pub fn homography_count(&self, exposure_s: f64) -> usize {
        ((exposure_s * self.gyro_rate_hz) - 1e-9).ceil().max(1.0) as usize
    }
}
