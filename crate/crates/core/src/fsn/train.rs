//! Mini-batch Adam training on frame-selection labels.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::autodiff::{load_params, save_params, AdamConfig};
use crate::dataset::{redraw_noise, BurstSequence};
use crate::error::{NebiError, Result};
use crate::kv::KvFile;
use crate::rng::Rng;

use super::config::FsnConfig;
use super::model::{argmax_first, FsnModel};

/// Rng stream offset for augmentation draws, disjoint from the shuffle
/// streams `1..=epochs`.
const AUGMENT_STREAM: u64 = 1 << 32;
const NOISE_STREAM: u64 = 2 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's training batches.
    pub train_loss: f64,
    /// Agreement of pre-update predictions with labels during the epoch.
    pub train_agreement: f64,
    /// Held-out agreement after the epoch, if a held-out set was given.
    pub test_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// One tab-separated `key=value` record per epoch.
    pub fn to_log(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            write!(
                s,
                "epoch={}\ttrain_loss={:.9}\ttrain_agreement={:.6}",
                r.epoch, r.train_loss, r.train_agreement
            )
            .unwrap();
            if let Some(a) = r.test_agreement {
                write!(s, "\ttest_agreement={a:.6}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Burst buffer and shape of a sequence, as the model consumes it.
pub struct Sample {
    pub burst: Vec<f32>,
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub gt_index: usize,
}

impl Sample {
    pub fn from_sequence(seq: &BurstSequence) -> Self {
        Sample {
            burst: seq.burst_tensor(),
            n: seq.len(),
            h: seq.frames[0].height(),
            w: seq.frames[0].width(),
            gt_index: seq.gt_index,
        }
    }
}

/// One of the eight flips/transposes of every packed plane of a burst,
/// selected by the low three bits of `k`: bit 0 flips rows, bit 1 flips
/// columns, bit 2 transposes (square frames only) and swaps the two green
/// planes, which keeps the RGGB layout exact under transposition. Flips
/// keep each plane's color and move its sampling phase by one mosaic
/// pixel.
pub fn dihedral(burst: &[f32], n: usize, h: usize, w: usize, k: u8) -> Vec<f32> {
    let transpose = k & 4 != 0 && h == w;
    let mut out = vec![0.0; burst.len()];
    let plane = h * w;
    for f in 0..n {
        for c in 0..4 {
            let src_c = if transpose && (c == 1 || c == 2) { 3 - c } else { c };
            let src = &burst[(f * 4 + src_c) * plane..][..plane];
            let dst = &mut out[(f * 4 + c) * plane..][..plane];
            for y in 0..h {
                for x in 0..w {
                    let (mut sy, mut sx) = if transpose { (x, y) } else { (y, x) };
                    if k & 1 != 0 {
                        sy = h - 1 - sy;
                    }
                    if k & 2 != 0 {
                        sx = w - 1 - sx;
                    }
                    dst[y * w + x] = src[sy * w + sx];
                }
            }
        }
    }
    out
}

fn shuffle(order: &mut [usize], rng: &mut Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        order.swap(i, j);
    }
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn agreement(model: &FsnModel, samples: &[Sample]) -> Result<f64> {
    let hits = samples
        .par_iter()
        .map(|s| Ok((select_base_raw(model, s)? == s.gt_index) as usize))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(hits as f64 / samples.len() as f64)
}

fn select_base_raw(model: &FsnModel, s: &Sample) -> Result<usize> {
    Ok(argmax_first(&model.predict(&s.burst, s.n, s.h, s.w)?))
}

/// Index of the most probable base frame; ties go to the smallest index.
pub fn select_base(model: &FsnModel, seq: &BurstSequence) -> Result<usize> {
    select_base_raw(model, &Sample::from_sequence(seq))
}

/// [`select_base`] for every sequence, in order.
pub fn select_all(model: &FsnModel, seqs: &[BurstSequence]) -> Result<Vec<usize>> {
    seqs.par_iter().map(|s| select_base(model, s)).collect()
}

/// Trains from a seeded initialization. Each batch's per-sample gradients
/// are computed in parallel and summed in sample order, so results do not
/// depend on the thread count. `on_epoch` sees every record as it is
/// produced.
pub fn train_with(
    train: &[BurstSequence],
    test: &[BurstSequence],
    cfg: &FsnConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(FsnModel, TrainHistory)> {
    if train.is_empty() {
        return Err(NebiError::Empty("training set has no sequences".into()));
    }
    let root = Rng::seed_from_u64(seed);
    let mut model = FsnModel::init(cfg, &mut root.split(0))?;
    let mut samples: Vec<Sample> = train.iter().map(Sample::from_sequence).collect();
    let held_out: Vec<Sample> = test.iter().map(Sample::from_sequence).collect();
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 1..=cfg.epochs {
        let adam = AdamConfig {
            lr: cfg.epoch_lr(epoch),
            ..cfg.adam()
        };
        if cfg.resample_noise {
            let noise_root = root.split(NOISE_STREAM + epoch as u64);
            samples = train
                .par_iter()
                .enumerate()
                .map(|(i, seq)| Ok(Sample::from_sequence(&redraw_noise(seq, &noise_root.split(i as u64))?)))
                .collect::<Result<_>>()?;
        }
        shuffle(&mut order, &mut root.split(epoch as u64));
        let mut aug_rng = root.split(AUGMENT_STREAM + epoch as u64);
        let transforms: Vec<u8> = order
            .iter()
            .map(|_| if cfg.augment { aug_rng.below(8) as u8 } else { 0 })
            .collect();
        let mut loss_sum = 0.0f64;
        let mut hits = 0usize;
        for (batch, ks) in order.chunks(cfg.batch).zip(transforms.chunks(cfg.batch)) {
            let results = batch
                .par_iter()
                .zip(ks)
                .map(|(&i, &k)| {
                    let s = &samples[i];
                    let x = if k == 0 { s.burst.clone() } else { dihedral(&s.burst, s.n, s.h, s.w, k) };
                    model.loss_and_grads(&x, s.n, s.h, s.w, s.gt_index)
                })
                .collect::<Result<Vec<_>>>()?;
            for ((loss, probs, grads), &i) in results.iter().zip(batch) {
                loss_sum += *loss as f64;
                hits += (argmax_first(probs) == samples[i].gt_index) as usize;
                model.params.accumulate(grads);
            }
            model.params.scale_grads(1.0 / batch.len() as f32);
            if cfg.grad_clip > 0.0 {
                let norm = model.params.grad_norm();
                if norm > cfg.grad_clip {
                    model.params.scale_grads((cfg.grad_clip / norm) as f32);
                }
            }
            model.params.adam_step(&adam);
        }
        if model.params.params.iter().any(|p| p.value.iter().any(|v| !v.is_finite())) {
            return Err(NebiError::Validation(format!("non-finite weights after epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / samples.len() as f64,
            train_agreement: hits as f64 / samples.len() as f64,
            test_agreement: if held_out.is_empty() {
                None
            } else {
                Some(agreement(&model, &held_out)?)
            },
        };
        on_epoch(&record);
        history.records.push(record);
    }
    Ok((model, history))
}

pub fn train(train: &[BurstSequence], test: &[BurstSequence], cfg: &FsnConfig, seed: u64) -> Result<(FsnModel, TrainHistory)> {
    train_with(train, test, cfg, seed, |_| {})
}

/// Checkpoint directory with the configuration in its manifest.
pub fn save_model(model: &FsnModel, dir: impl AsRef<Path>, extra: &KvFile) -> Result<()> {
    let mut kv = extra.clone();
    model.cfg.to_kv(&mut kv);
    save_params(&model.params, dir, &kv)
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<FsnModel> {
    let (params, kv) = load_params(dir)?;
    let mut cfg = FsnConfig::default();
    cfg.apply_kv(&kv)?;
    FsnModel::from_params(&cfg, params)
}
