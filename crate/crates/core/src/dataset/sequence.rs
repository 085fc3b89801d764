//! Burst synthesis and ground-truth base-frame labeling.

use crate::degrade::{
    add_noise, downsample, simulate_gyro, synthesize_blur, trace_to_homographies, DegradeConfig,
    ExposureSchedule, NoiseBases, NoiseParams,
};
use crate::error::{NebiError, Result};
use crate::eval::{psnr, ssim};
use crate::image::{ColorSpace, PackedRaw, PlanarImage};
use crate::isp::{demosaic_bilinear, mosaic_clamped, unprocess, CameraModel, Intrinsics};
use crate::rng::Rng;

/// Quality metric used to pick the ground-truth base frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelMetric {
    Psnr,
    Ssim,
}

impl LabelMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelMetric::Psnr => "psnr",
            LabelMetric::Ssim => "ssim",
        }
    }

    pub fn score(self, a: &PlanarImage, b: &PlanarImage) -> Result<f64> {
        match self {
            LabelMetric::Psnr => psnr(a, b),
            LabelMetric::Ssim => ssim(a, b),
        }
    }
}

impl std::str::FromStr for LabelMetric {
    type Err = NebiError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psnr" => Ok(LabelMetric::Psnr),
            "ssim" => Ok(LabelMetric::Ssim),
            other => Err(NebiError::Config(format!("unknown metric {other:?}"))),
        }
    }
}

/// One synthetic burst with everything needed to label and evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstSequence {
    /// Noisy, blurred, low-resolution packed RAW frames.
    pub frames: Vec<PackedRaw>,
    /// Sharp high-resolution sRGB ground truth (the first source frame).
    pub gt: PlanarImage,
    /// Per-frame clean linear LR RGB: blurred and downsampled, before noise.
    pub ref_lr: Vec<PlanarImage>,
    pub schedule: ExposureSchedule,
    pub noise: Vec<NoiseParams>,
    pub gt_index: usize,
    pub label_metric: LabelMetric,
    pub cam: CameraModel,
    pub downsample_factor: usize,
    pub seed: u64,
}

impl BurstSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Zero-blur, noise-free LR render of the ground truth in linear RGB:
    /// the reference every frame is scored against.
    pub fn clean_reference(&self) -> Result<PlanarImage> {
        let lin = unprocess(&self.gt, &self.cam)?.map(|v| v.max(0.0));
        downsample(&lin, self.downsample_factor)
    }

    /// Frame `i` demosaiced to linear LR RGB.
    pub fn demosaiced(&self, i: usize) -> PlanarImage {
        demosaic_bilinear(&self.frames[i])
    }

    /// Packed burst as one `N x 4 x h x w` buffer.
    pub fn burst_tensor(&self) -> Vec<f32> {
        self.frames.iter().flat_map(|f| f.data().iter().copied()).collect()
    }

    /// Checks structural invariants that readers and writers rely on.
    pub fn validate(&self) -> Result<()> {
        let n = self.frames.len();
        if n < 2 {
            return Err(NebiError::Validation(format!("sequence has {n} frames; need at least 2")));
        }
        if self.gt_index >= n {
            return Err(NebiError::Validation(format!("gt_index {} out of range for {n} frames", self.gt_index)));
        }
        for (what, len) in [
            ("ref_lr", self.ref_lr.len()),
            ("schedule", self.schedule.len()),
            ("noise", self.noise.len()),
        ] {
            if len != n {
                return Err(NebiError::Validation(format!("{what} has {len} entries for {n} frames")));
            }
        }
        let f = self.downsample_factor;
        let (ph, pw) = (self.frames[0].height(), self.frames[0].width());
        if self.frames.iter().any(|fr| (fr.height(), fr.width()) != (ph, pw)) {
            return Err(NebiError::Validation("frames differ in size".into()));
        }
        if self.gt.channels() != 3 || self.gt.height() != ph * 2 * f || self.gt.width() != pw * 2 * f {
            return Err(NebiError::Validation(format!(
                "gt {:?} inconsistent with packed {ph}x{pw} and factor {f}",
                self.gt.shape()
            )));
        }
        if self.ref_lr.iter().any(|r| r.shape() != [3, 2 * ph, 2 * pw]) {
            return Err(NebiError::Validation("ref_lr shape inconsistent with frames".into()));
        }
        Ok(())
    }
}

/// Index of the frame whose demosaiced RAW scores best against the clean
/// reference. Ties go to the smallest index.
pub fn label_gt_base(seq: &BurstSequence, metric: LabelMetric) -> Result<usize> {
    let reference = seq.clean_reference()?;
    let mut best = (f64::NEG_INFINITY, 0);
    for i in 0..seq.len() {
        let s = metric.score(&seq.demosaiced(i), &reference)?;
        if s > best.0 {
            best = (s, i);
        }
    }
    Ok(best.1)
}

/// Same burst with a fresh noise realization: every frame is redrawn from
/// its clean reference and stored noise parameters (frame `i` uses
/// `rng.split(i)`), then relabelled.
pub fn redraw_noise(seq: &BurstSequence, rng: &Rng) -> Result<BurstSequence> {
    let mut frames = Vec::with_capacity(seq.len());
    for (i, (lr, params)) in seq.ref_lr.iter().zip(&seq.noise).enumerate() {
        let noisy = add_noise(lr, params, &mut rng.split(i as u64))?;
        frames.push(mosaic_clamped(&noisy)?);
    }
    let mut out = BurstSequence { frames, ..seq.clone() };
    out.gt_index = label_gt_base(&out, out.label_metric)?;
    Ok(out)
}

/// Runs the full degradation pipeline on `sharp` (sRGB, HR):
/// unprocess, gyro blur, downsample, gain-scaled noise, mosaic.
///
/// Frames are exposed back to back along one simulated gyro trace; frame
/// `i` integrates rotation over its own exposure window starting from the
/// identity. Negative linear values are clamped to zero after unprocessing
/// and before mosaicing.
pub fn synthesize_sequence(
    sharp: &[PlanarImage],
    schedule: &ExposureSchedule,
    cam: &CameraModel,
    cfg: &DegradeConfig,
    label_metric: LabelMetric,
    rng: &Rng,
) -> Result<BurstSequence> {
    let n = sharp.len();
    if n != schedule.len() {
        return Err(NebiError::ShapeMismatch(format!(
            "{n} sharp frames for a schedule of {}",
            schedule.len()
        )));
    }
    if n < 2 {
        return Err(NebiError::Config("a burst needs at least two frames".into()));
    }
    let (h, w) = (sharp[0].height(), sharp[0].width());
    if sharp.iter().any(|s| s.shape() != [3, h, w] || s.space() != ColorSpace::Srgb) {
        return Err(NebiError::Validation("sharp frames must be 3-channel sRGB of one size".into()));
    }
    let f = cfg.downsample_factor;
    if h % (2 * f) != 0 || w % (2 * f) != 0 {
        return Err(NebiError::Indivisible {
            height: h,
            width: w,
            factor: 2 * f,
        });
    }
    let intrinsics = Intrinsics::centered(cfg.focal_px, h, w);

    let mut gyro_rng = rng.split(0);
    let mut noise_rng = rng.split(1);
    let total: f64 = schedule.exposures().iter().sum();
    let trace = simulate_gyro(total + 2.0 / cfg.gyro_rate_hz, cfg.gyro_rate_hz, &mut gyro_rng, &cfg.ou)?;
    let bases = NoiseBases::sample(&mut noise_rng, &cfg.noise);

    let mut frames = Vec::with_capacity(n);
    let mut ref_lr = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    let mut start = 0.0;
    for (i, img) in sharp.iter().enumerate() {
        let exposure = schedule.exposures()[i];
        let linear = unprocess(img, cam)?.map(|v| v.max(0.0));
        let hs = trace_to_homographies(&trace, start, start + exposure, cfg.homography_count(exposure), &intrinsics)?;
        let blurred = synthesize_blur(&linear, &hs)?;
        let lr = downsample(&blurred, f)?;
        let params = bases.at_gain(schedule.gains()[i])?;
        let mut frame_rng = rng.split(2 + i as u64);
        let noisy = add_noise(&lr, &params, &mut frame_rng)?;
        frames.push(mosaic_clamped(&noisy)?);
        ref_lr.push(lr);
        noise.push(params);
        start += exposure;
    }
    let mut seq = BurstSequence {
        frames,
        gt: sharp[0].clone(),
        ref_lr,
        schedule: schedule.clone(),
        noise,
        gt_index: 0,
        label_metric,
        cam: cam.clone(),
        downsample_factor: f,
        seed: rng.seed(),
    };
    seq.gt_index = label_gt_base(&seq, label_metric)?;
    Ok(seq)
}
