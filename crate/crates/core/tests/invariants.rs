use proptest::prelude::*;

use nebi_core::dataset::{decode_ppm, encode_ppm};
use nebi_core::degrade::{downsample, Homography};
use nebi_core::eval::{psnr, ssim, PSNR_CAP_DB};
use nebi_core::fsn::dihedral;
use nebi_core::isp::{forward_isp, linear_to_srgb, srgb_to_linear, unprocess, CameraModel, Intrinsics};
use nebi_core::{ColorSpace, PlanarImage};

fn image(channels: usize, h: usize, w: usize, space: ColorSpace, lo: f32, hi: f32) -> impl Strategy<Value = PlanarImage> {
    prop::collection::vec(lo..hi, channels * h * w).prop_map(move |d| PlanarImage::new(channels, h, w, space, d).unwrap())
}

/// Valid camera: rows of the CCM sum to one, gains inside the allowed range.
fn camera() -> impl Strategy<Value = CameraModel> {
    (prop::array::uniform6(-0.2f64..0.2), prop::array::uniform3(0.5f32..2.0)).prop_map(|(off, g)| {
        let mut ccm = [[0.0; 3]; 3];
        let mut k = 0;
        for (r, row) in ccm.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                if r != c {
                    *v = off[k];
                    k += 1;
                }
            }
            row[r] = 1.0 - row.iter().sum::<f64>();
        }
        CameraModel::new(ccm, g, Intrinsics::centered(400.0, 8, 8)).unwrap()
    })
}

proptest! {
    #[test]
    fn isp_round_trip(cam in camera(), img in image(3, 6, 5, ColorSpace::Srgb, 0.02, 0.98)) {
        let back = forward_isp(&unprocess(&img, &cam).unwrap(), &cam).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            prop_assert!((a - b).abs() <= 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn srgb_curve_is_monotone_and_invertible(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assert!((linear_to_srgb(srgb_to_linear(a)) - a).abs() < 1e-12);
        if a < b {
            prop_assert!(srgb_to_linear(a) < srgb_to_linear(b));
        }
    }

    #[test]
    fn ppm_round_trip_within_quantization(img in image(3, 5, 7, ColorSpace::Srgb, 0.0, 1.0)) {
        let bytes = encode_ppm(&img).unwrap();
        let back = decode_ppm(&bytes, std::path::Path::new("mem.ppm")).unwrap();
        prop_assert_eq!(back.shape(), img.shape());
        for (a, b) in back.data().iter().zip(img.data()) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
        prop_assert_eq!(encode_ppm(&back).unwrap(), bytes);
    }

    #[test]
    fn downsample_preserves_mean(img in image(2, 8, 12, ColorSpace::LinearRaw, 0.0, 1.0), f in prop::sample::select(vec![2usize, 4])) {
        let small = downsample(&img, f).unwrap();
        prop_assert_eq!(small.shape(), [2, 8 / f, 12 / f]);
        prop_assert!((small.mean() - img.mean()).abs() < 1e-6);
    }

    #[test]
    fn metrics_are_symmetric(a in image(3, 12, 12, ColorSpace::Srgb, 0.0, 1.0), b in image(3, 12, 12, ColorSpace::Srgb, 0.0, 1.0)) {
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let s = ssim(&a, &b).unwrap();
        prop_assert!((s - ssim(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(s <= 1.0 + 1e-12);
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn homography_inverse_round_trips(dx in -5.0f64..5.0, dy in -5.0f64..5.0, x in -20.0f64..20.0, y in -20.0f64..20.0) {
        let h = Homography::translation(dx, dy);
        let (u, v) = h.apply(x, y);
        prop_assert!((u - x - dx).abs() < 1e-12 && (v - y - dy).abs() < 1e-12);
        let (bx, by) = h.inverse().unwrap().apply(u, v);
        prop_assert!((bx - x).abs() < 1e-9 && (by - y).abs() < 1e-9);
    }

    #[test]
    fn dihedral_permutes_each_frame(
        n in 1usize..4,
        side in 2usize..6,
        k in 0u8..8,
        seed in any::<u64>(),
    ) {
        let mut rng = nebi_core::Rng::seed_from_u64(seed);
        let plane = 4 * side * side;
        let burst: Vec<f32> = (0..n * plane).map(|_| rng.uniform() as f32).collect();
        let out = dihedral(&burst, n, side, side, k);
        for f in 0..n {
            let mut a = burst[f * plane..(f + 1) * plane].to_vec();
            let mut b = out[f * plane..(f + 1) * plane].to_vec();
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            prop_assert_eq!(a, b);
        }
        // Flips and the plain transpose undo themselves.
        if k <= 4 {
            prop_assert_eq!(dihedral(&out, n, side, side, k), burst);
        }
    }
}
