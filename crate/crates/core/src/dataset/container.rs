//! On-disk sequence directory:
//!
//! ```text
//! <dir>/manifest.txt   key=value metadata (see `write_sequence`)
//! <dir>/frames.nebi    N x 4 x h x w   packed RAW
//! <dir>/ref_lr.nebi    N x 3 x 2h x 2w clean linear LR RGB
//! <dir>/gt.nebi        3 x H x W       sRGB ground truth
//! ```

use std::path::Path;

use crate::degrade::{ExposureSchedule, NoiseParams};
use crate::error::{NebiError, Result};
use crate::image::{ColorSpace, PackedRaw, PlanarImage};
use crate::isp::{CameraModel, Intrinsics};
use crate::kv::KvFile;
use crate::tensor_file::{read_tensor, write_tensor, NdArray};

use super::sequence::{BurstSequence, LabelMetric};

pub const SEQUENCE_FORMAT: &str = "nebi-sequence";
/// Bumped whenever synthesis changes in a way that alters output bits.
pub const PIPELINE_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.txt";
const FRAMES_FILE: &str = "frames.nebi";
const REF_LR_FILE: &str = "ref_lr.nebi";
const GT_FILE: &str = "gt.nebi";

fn shape_str(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

pub fn sequence_manifest(seq: &BurstSequence) -> KvFile {
    let n = seq.len();
    let (ph, pw) = (seq.frames[0].height(), seq.frames[0].width());
    let mut kv = KvFile::new();
    kv.set("format", SEQUENCE_FORMAT);
    kv.set("pipeline_version", PIPELINE_VERSION);
    kv.set("seed", seq.seed);
    kv.set("n_frames", n);
    kv.set("frames_shape", shape_str(&[n, 4, ph, pw]));
    kv.set("ref_lr_shape", shape_str(&[n, 3, 2 * ph, 2 * pw]));
    kv.set("gt_shape", shape_str(&seq.gt.shape()));
    kv.set("bayer_pattern", "rggb");
    kv.set("downsample_factor", seq.downsample_factor);
    kv.set_list("exposures_s", seq.schedule.exposures());
    kv.set_list("gains", seq.schedule.gains());
    let shot: Vec<f32> = seq.noise.iter().map(|p| p.lambda_shot).collect();
    let read: Vec<f32> = seq.noise.iter().map(|p| p.lambda_read).collect();
    kv.set_list("noise_lambda_shot", &shot);
    kv.set_list("noise_lambda_read", &read);
    kv.set("noise_model", "heteroscedastic_gaussian;shot=base*gain;read=base*gain^2");
    kv.set("gt_index", seq.gt_index);
    kv.set("label_metric", seq.label_metric.as_str());
    kv.set("label_reference", "clean_lr_linear_rgb;frames_bilinear_demosaic");
    let ccm: Vec<f64> = seq.cam.ccm().iter().flatten().copied().collect();
    kv.set_list("cam_ccm", &ccm);
    kv.set_list("cam_wb_gains", &seq.cam.wb_gains());
    let k = seq.cam.intrinsics();
    kv.set_list("cam_intrinsics", &[k.fx, k.fy, k.cx, k.cy]);
    kv.set("cam_gamma", "srgb");
    kv.set("cam_gain_inversion", "wb_gains_include_digital_gain");
    kv
}

pub fn write_sequence(seq: &BurstSequence, dir: impl AsRef<Path>) -> Result<()> {
    seq.validate()?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| NebiError::io(dir, e))?;
    let n = seq.len();
    let (ph, pw) = (seq.frames[0].height(), seq.frames[0].width());
    let frames = NdArray::new(vec![n, 4, ph, pw], seq.burst_tensor())?;
    let ref_lr = NdArray::new(
        vec![n, 3, 2 * ph, 2 * pw],
        seq.ref_lr.iter().flat_map(|r| r.data().iter().copied()).collect(),
    )?;
    write_tensor(dir.join(FRAMES_FILE), &frames)?;
    write_tensor(dir.join(REF_LR_FILE), &ref_lr)?;
    write_tensor(dir.join(GT_FILE), &seq.gt.to_array())?;
    sequence_manifest(seq).write(dir.join(MANIFEST_FILE))
}

fn expect_dims(kv: &KvFile, key: &str, arr: &NdArray) -> Result<()> {
    let declared: Vec<usize> = kv.get_list(key)?;
    if declared != arr.dims() {
        return Err(kv.err(format!("{key} {declared:?} disagrees with tensor dims {:?}", arr.dims())));
    }
    Ok(())
}

pub fn read_sequence(dir: impl AsRef<Path>) -> Result<BurstSequence> {
    let dir = dir.as_ref();
    let kv = KvFile::read(dir.join(MANIFEST_FILE))?;
    if kv.get_str("format")? != SEQUENCE_FORMAT {
        return Err(kv.err("not a nebi-sequence manifest"));
    }
    let version: u32 = kv.get("pipeline_version")?;
    if version != PIPELINE_VERSION {
        return Err(kv.err(format!("unsupported pipeline_version {version}")));
    }
    let n: usize = kv.get("n_frames")?;
    let gt_index: usize = kv.get("gt_index")?;
    if gt_index >= n {
        return Err(NebiError::Validation(format!("gt_index {gt_index} out of range for {n} frames")));
    }

    let frames_arr = read_tensor(dir.join(FRAMES_FILE))?;
    let ref_arr = read_tensor(dir.join(REF_LR_FILE))?;
    let gt_arr = read_tensor(dir.join(GT_FILE))?;
    expect_dims(&kv, "frames_shape", &frames_arr)?;
    expect_dims(&kv, "ref_lr_shape", &ref_arr)?;
    expect_dims(&kv, "gt_shape", &gt_arr)?;
    if frames_arr.dims()[0] != n || ref_arr.dims()[0] != n || frames_arr.dims()[1] != 4 {
        return Err(kv.err("tensor leading dims disagree with n_frames"));
    }

    let (ph, pw) = (frames_arr.dims()[2], frames_arr.dims()[3]);
    let per = 4 * ph * pw;
    let frames = frames_arr
        .data()
        .chunks_exact(per)
        .map(|c| PackedRaw::new(ph, pw, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let rd = ref_arr.dims();
    let per = rd[1] * rd[2] * rd[3];
    let ref_lr = ref_arr
        .data()
        .chunks_exact(per)
        .map(|c| PlanarImage::new(rd[1], rd[2], rd[3], ColorSpace::LinearRaw, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let gt = PlanarImage::from_array(&gt_arr, ColorSpace::Srgb)?;

    let schedule = ExposureSchedule::new(kv.get_list("exposures_s")?)?;
    let gains: Vec<f64> = kv.get_list("gains")?;
    if gains.len() != schedule.len()
        || gains.iter().zip(schedule.gains()).any(|(a, b)| (a - b).abs() > 1e-9 * b.abs())
    {
        return Err(kv.err("gains inconsistent with exposures"));
    }
    let shot: Vec<f32> = kv.get_list("noise_lambda_shot")?;
    let read: Vec<f32> = kv.get_list("noise_lambda_read")?;
    if shot.len() != n || read.len() != n {
        return Err(kv.err("noise parameter lists must have n_frames entries"));
    }
    let noise = shot
        .into_iter()
        .zip(read)
        .map(|(s, r)| NoiseParams::new(s, r))
        .collect::<Result<Vec<_>>>()?;

    let ccm_flat: Vec<f64> = kv.get_list("cam_ccm")?;
    let wb: Vec<f32> = kv.get_list("cam_wb_gains")?;
    let intr: Vec<f64> = kv.get_list("cam_intrinsics")?;
    if ccm_flat.len() != 9 || wb.len() != 3 || intr.len() != 4 {
        return Err(kv.err("camera fields have wrong lengths"));
    }
    let ccm = [
        [ccm_flat[0], ccm_flat[1], ccm_flat[2]],
        [ccm_flat[3], ccm_flat[4], ccm_flat[5]],
        [ccm_flat[6], ccm_flat[7], ccm_flat[8]],
    ];
    let cam = CameraModel::new(
        ccm,
        [wb[0], wb[1], wb[2]],
        Intrinsics {
            fx: intr[0],
            fy: intr[1],
            cx: intr[2],
            cy: intr[3],
        },
    )?;

    let seq = BurstSequence {
        frames,
        gt,
        ref_lr,
        schedule,
        noise,
        gt_index,
        label_metric: kv.get_str("label_metric")?.parse::<LabelMetric>()?,
        cam,
        downsample_factor: kv.get("downsample_factor")?,
        seed: kv.get("seed")?,
    };
    seq.validate()?;
    Ok(seq)
}
