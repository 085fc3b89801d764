use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nebi_bench::{small_config, toy_sequence};
use nebi_core::dataset::generate_sequence;
use nebi_core::degrade::{add_noise, NoiseParams};
use nebi_core::eval::{psnr, select_ae_entropy, ssim};
use nebi_core::isp::demosaic_bilinear;
use nebi_core::Rng;

fn synthesis(c: &mut Criterion) {
    let cfg = small_config();
    let mut g = c.benchmark_group("synthesis");
    g.sample_size(10);
    g.bench_function("sequence_64px_6_frames", |b| b.iter(|| black_box(generate_sequence(&cfg, None, 11).unwrap())));
    g.finish();
}

fn stages(c: &mut Criterion) {
    let seq = toy_sequence(3);
    let clean = seq.ref_lr[0].clone();
    let params = NoiseParams::new(0.01, 0.001).unwrap();
    c.bench_function("add_noise_3x32x32", |b| {
        let mut rng = Rng::seed_from_u64(1);
        b.iter(|| black_box(add_noise(&clean, &params, &mut rng).unwrap()))
    });
    c.bench_function("demosaic_bilinear_16x16_packed", |b| b.iter(|| black_box(demosaic_bilinear(&seq.frames[2]))));
    let reference = seq.clean_reference().unwrap();
    let frame = seq.demosaiced(2);
    c.bench_function("psnr_ssim_3x32x32", |b| {
        b.iter(|| black_box((psnr(&frame, &reference).unwrap(), ssim(&frame, &reference).unwrap())))
    });
    c.bench_function("ae_entropy_select_6_frames", |b| b.iter(|| black_box(select_ae_entropy(&seq.frames))));
}

criterion_group!(benches, synthesis, stages);
criterion_main!(benches);
