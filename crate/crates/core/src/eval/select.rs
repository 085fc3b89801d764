//! Base-frame selectors that need no training.

use crate::dataset::{label_gt_base, BurstSequence};
use crate::error::Result;
use crate::image::PackedRaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    First,
    AeEntropy,
    Oracle,
    Fsn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::First => "first",
            Method::AeEntropy => "ae_entropy",
            Method::Oracle => "oracle",
            Method::Fsn => "fsn",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::error::NebiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Method::First),
            "ae_entropy" | "ae" => Ok(Method::AeEntropy),
            "oracle" => Ok(Method::Oracle),
            "fsn" => Ok(Method::Fsn),
            other => Err(crate::error::NebiError::Config(format!("unknown method {other}"))),
        }
    }
}

pub fn select_first(_burst: &[PackedRaw]) -> usize {
    0
}

/// Shannon entropy, in bits, of a 256-bin histogram of all packed values
/// clamped to `[0, 1]`.
pub fn frame_entropy_bits(frame: &PackedRaw) -> f64 {
    let mut hist = [0u64; 256];
    for &v in frame.data() {
        let bin = ((v.clamp(0.0, 1.0) as f64 * 256.0) as usize).min(255);
        hist[bin] += 1;
    }
    let n = frame.data().len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Frame with maximum histogram entropy; ties go to the smallest index.
pub fn select_ae_entropy(burst: &[PackedRaw]) -> usize {
    let mut best = 0;
    let mut best_h = f64::NEG_INFINITY;
    for (i, f) in burst.iter().enumerate() {
        let h = frame_entropy_bits(f);
        if h > best_h {
            best = i;
            best_h = h;
        }
    }
    best
}

/// Recomputes the label under the sequence's stored metric.
pub fn select_oracle(seq: &BurstSequence) -> Result<usize> {
    label_gt_base(seq, seq.label_metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packed(data: Vec<f32>) -> PackedRaw {
        PackedRaw::new(8, 8, data).unwrap()
    }

    #[test]
    fn constant_frame_has_zero_entropy() {
        assert_eq!(frame_entropy_bits(&packed(vec![0.3; 256])), 0.0);
    }

    #[test]
    fn uniform_histogram_has_eight_bits_and_wins() {
        let uniform = packed((0..256).map(|i| (i as f32 + 0.5) / 256.0).collect());
        assert!((frame_entropy_bits(&uniform) - 8.0).abs() < 1e-12);
        let c = packed(vec![0.5; 256]);
        assert_eq!(select_ae_entropy(&[c.clone(), uniform, c]), 1);
    }

    #[test]
    fn entropy_ignores_pixel_order() {
        let data: Vec<f32> = (0..256).map(|i| ((i * 37) % 101) as f32 / 100.0).collect();
        let mut rev = data.clone();
        rev.reverse();
        assert_eq!(frame_entropy_bits(&packed(data)), frame_entropy_bits(&packed(rev)));
    }

    #[test]
    fn ties_and_first() {
        let c = packed(vec![0.5; 256]);
        assert_eq!(select_ae_entropy(&[c.clone(), c.clone()]), 0);
        assert_eq!(select_first(&[c.clone(), c]), 0);
    }

    #[test]
    fn values_outside_unit_range_are_clamped() {
        let a = packed(vec![1.7; 256]);
        let b = packed((0..256).map(|i| if i % 2 == 0 { 1.0 } else { 3.0 }).collect());
        assert_eq!(frame_entropy_bits(&a), 0.0);
        assert_eq!(frame_entropy_bits(&b), 0.0);
    }
}
