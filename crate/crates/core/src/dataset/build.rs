//! Whole-dataset generation: per-sequence seeds, parallel synthesis, the
//! top-level manifest and loading back.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::degrade::{DegradeConfig, ExposureSchedule};
use crate::error::{NebiError, Result};
use crate::image::PlanarImage;
use crate::isp::{CameraModel, Intrinsics};
use crate::kv::KvFile;
use crate::rng::{derive_seed, Rng};

use super::container::{read_sequence, write_sequence, PIPELINE_VERSION};
use super::ingest::ingest_frames;
use super::scene::{generate_scene_sequence, SceneConfig, MAX_MOTION_PX};
use super::sequence::{synthesize_sequence, BurstSequence, LabelMetric};

pub const DATASET_FORMAT: &str = "nebi-dataset";
pub const DATASET_MANIFEST: &str = "dataset.txt";
/// Below this many sequences the label-share check is skipped; the share
/// of a handful of labels says nothing about the generator.
pub const LABEL_SHARE_MIN_SEQUENCES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    /// Procedural scenes; each sequence draws a drift direction uniformly
    /// and a magnitude uniformly in `[0, max_drift_px]`.
    Procedural { scene: SceneConfig, max_drift_px: f64 },
    /// Consecutive windows of N frames from an image directory, starting at
    /// a per-sequence random offset.
    Ingested { dir: PathBuf, crop: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub source: FrameSource,
    pub n_frames: usize,
    pub shortest_exposure_s: f64,
    pub longest_exposure_s: f64,
    pub degrade: DegradeConfig,
    /// Color pipeline; its intrinsics are replaced per sequence by a
    /// centered model with `degrade.focal_px`.
    pub cam: CameraModel,
    pub label_metric: LabelMetric,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Build fails if one gt_index owns more than this share of labels.
    pub max_label_share: f64,
}

impl DatasetConfig {
    /// Desk-scale defaults: 300/60 sequences of six 32x32 LR frames.
    pub fn toy() -> Self {
        DatasetConfig {
            source: FrameSource::Procedural {
                scene: SceneConfig {
                    jitter: 0.5,
                    ..SceneConfig::default()
                },
                max_drift_px: 1.0,
            },
            n_frames: 6,
            shortest_exposure_s: 0.01,
            longest_exposure_s: 0.14,
            degrade: DegradeConfig::default(),
            cam: CameraModel::example(Intrinsics::centered(500.0, 128, 128)),
            label_metric: LabelMetric::Psnr,
            n_train: 300,
            n_test: 60,
            seed: 7,
            max_label_share: 0.6,
        }
    }

    pub fn schedule(&self) -> Result<ExposureSchedule> {
        ExposureSchedule::linear(self.n_frames, self.shortest_exposure_s, self.longest_exposure_s)
    }

    pub fn n_total(&self) -> usize {
        self.n_train + self.n_test
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train < 1 || self.n_test < 1 {
            return Err(NebiError::Config("n_train and n_test must be at least 1".into()));
        }
        if self.n_frames < 2 {
            return Err(NebiError::Config("n_frames must be at least 2".into()));
        }
        if !(self.max_label_share > 0.0 && self.max_label_share <= 1.0) {
            return Err(NebiError::Config("max_label_share must be in (0, 1]".into()));
        }
        if let FrameSource::Procedural { scene, max_drift_px } = &self.source {
            scene.validate()?;
            if !(*max_drift_px >= 0.0) || max_drift_px + scene.jitter > MAX_MOTION_PX + 1e-12 {
                return Err(NebiError::Config(format!(
                    "max_drift_px + jitter exceeds {MAX_MOTION_PX} px/frame"
                )));
            }
        }
        self.schedule()?;
        Ok(())
    }

    /// Writes every field into `kv` under `dataset.` keys.
    pub fn to_kv(&self, kv: &mut KvFile) {
        match &self.source {
            FrameSource::Procedural { scene, max_drift_px } => {
                kv.set("dataset.source", "procedural");
                kv.set("dataset.scene_height", scene.height);
                kv.set("dataset.scene_width", scene.width);
                kv.set("dataset.scene_objects", scene.objects);
                kv.set("dataset.scene_octaves", scene.octaves);
                kv.set("dataset.scene_jitter_px", scene.jitter);
                kv.set("dataset.max_drift_px", max_drift_px);
            }
            FrameSource::Ingested { dir, crop } => {
                kv.set("dataset.source", "ingested");
                kv.set("dataset.ingest_dir", dir.display());
                kv.set("dataset.ingest_crop", crop.map_or("none".to_string(), |c| c.to_string()));
            }
        }
        kv.set("dataset.n_frames", self.n_frames);
        kv.set("dataset.shortest_exposure_s", self.shortest_exposure_s);
        kv.set("dataset.longest_exposure_s", self.longest_exposure_s);
        let d = &self.degrade;
        kv.set("dataset.ou_theta", d.ou.theta);
        kv.set("dataset.ou_sigma", d.ou.sigma);
        kv.set("dataset.ou_stationary_start", d.ou.stationary_start);
        kv.set("dataset.gyro_rate_hz", d.gyro_rate_hz);
        kv.set_list("dataset.noise_shot_range", &[d.noise.shot_range.0, d.noise.shot_range.1]);
        kv.set_list("dataset.noise_read_range", &[d.noise.read_range.0, d.noise.read_range.1]);
        kv.set("dataset.focal_px", d.focal_px);
        kv.set("dataset.downsample_factor", d.downsample_factor);
        kv.set("dataset.label_metric", self.label_metric.as_str());
        kv.set("dataset.n_train", self.n_train);
        kv.set("dataset.n_test", self.n_test);
        kv.set("dataset.seed", self.seed);
        kv.set("dataset.max_label_share", self.max_label_share);
    }

    /// Overrides fields present in `kv` (same keys as `to_kv`); absent keys
    /// keep their current values. Unknown `dataset.` keys are an error.
    pub fn apply_kv(&mut self, kv: &KvFile) -> Result<()> {
        const KNOWN: &[&str] = &[
            "source", "scene_height", "scene_width", "scene_objects", "scene_octaves",
            "scene_jitter_px", "max_drift_px", "ingest_dir", "ingest_crop", "n_frames",
            "shortest_exposure_s", "longest_exposure_s", "ou_theta", "ou_sigma",
            "ou_stationary_start", "gyro_rate_hz", "noise_shot_range", "noise_read_range",
            "focal_px", "downsample_factor", "label_metric", "n_train", "n_test", "seed",
            "max_label_share",
        ];
        for key in kv.keys() {
            if let Some(rest) = key.strip_prefix("dataset.") {
                if !KNOWN.contains(&rest) {
                    return Err(kv.err(format!("unknown key {key}")));
                }
            }
        }
        let k = |name: &str| format!("dataset.{name}");
        if let Some(src) = kv.get_opt::<String>(&k("source"))? {
            self.source = match src.as_str() {
                "procedural" => match &self.source {
                    p @ FrameSource::Procedural { .. } => p.clone(),
                    _ => DatasetConfig::toy().source,
                },
                "ingested" => FrameSource::Ingested {
                    dir: kv.get::<String>(&k("ingest_dir"))?.into(),
                    crop: None,
                },
                other => return Err(kv.err(format!("unknown source {other}"))),
            };
        }
        match &mut self.source {
            FrameSource::Procedural { scene, max_drift_px } => {
                overlay(kv, &k("scene_height"), &mut scene.height)?;
                overlay(kv, &k("scene_width"), &mut scene.width)?;
                overlay(kv, &k("scene_objects"), &mut scene.objects)?;
                overlay(kv, &k("scene_octaves"), &mut scene.octaves)?;
                overlay(kv, &k("scene_jitter_px"), &mut scene.jitter)?;
                overlay(kv, &k("max_drift_px"), max_drift_px)?;
            }
            FrameSource::Ingested { dir, crop } => {
                if let Some(d) = kv.get_opt::<String>(&k("ingest_dir"))? {
                    *dir = d.into();
                }
                if let Some(c) = kv.get_opt::<String>(&k("ingest_crop"))? {
                    *crop = match c.as_str() {
                        "none" => None,
                        s => Some(s.parse().map_err(|_| kv.err(format!("bad ingest_crop {s}")))?),
                    };
                }
            }
        }
        overlay(kv, &k("n_frames"), &mut self.n_frames)?;
        overlay(kv, &k("shortest_exposure_s"), &mut self.shortest_exposure_s)?;
        overlay(kv, &k("longest_exposure_s"), &mut self.longest_exposure_s)?;
        let d = &mut self.degrade;
        overlay(kv, &k("ou_theta"), &mut d.ou.theta)?;
        overlay(kv, &k("ou_sigma"), &mut d.ou.sigma)?;
        overlay(kv, &k("ou_stationary_start"), &mut d.ou.stationary_start)?;
        overlay(kv, &k("gyro_rate_hz"), &mut d.gyro_rate_hz)?;
        overlay_pair(kv, &k("noise_shot_range"), &mut d.noise.shot_range)?;
        overlay_pair(kv, &k("noise_read_range"), &mut d.noise.read_range)?;
        overlay(kv, &k("focal_px"), &mut d.focal_px)?;
        overlay(kv, &k("downsample_factor"), &mut d.downsample_factor)?;
        overlay(kv, &k("label_metric"), &mut self.label_metric)?;
        overlay(kv, &k("n_train"), &mut self.n_train)?;
        overlay(kv, &k("n_test"), &mut self.n_test)?;
        overlay(kv, &k("seed"), &mut self.seed)?;
        overlay(kv, &k("max_label_share"), &mut self.max_label_share)?;
        Ok(())
    }
}

fn overlay<T: std::str::FromStr>(kv: &KvFile, key: &str, slot: &mut T) -> Result<()> {
    if let Some(v) = kv.get_opt(key)? {
        *slot = v;
    }
    Ok(())
}

fn overlay_pair(kv: &KvFile, key: &str, slot: &mut (f64, f64)) -> Result<()> {
    if kv.contains(key) {
        let v: Vec<f64> = kv.get_list(key)?;
        if v.len() != 2 {
            return Err(kv.err(format!("{key} needs two values")));
        }
        *slot = (v[0], v[1]);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    /// Relative to the dataset root.
    pub path: String,
    pub split: Split,
    pub seed: u64,
    pub gt_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub seed: u64,
    pub n_frames: usize,
    pub entries: Vec<DatasetEntry>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Count of each gt_index over all entries.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.n_frames];
        for e in &self.entries {
            h[e.gt_index] += 1;
        }
        h
    }
}

/// Seed of sequence `index` (train first, then test). Distinct for distinct
/// indices because the derivation is a bijection of the index.
pub fn sequence_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

/// Loads the ingestion source once so every sequence can window into it.
pub fn load_source_frames(cfg: &DatasetConfig) -> Result<Option<Vec<PlanarImage>>> {
    match &cfg.source {
        FrameSource::Procedural { .. } => Ok(None),
        FrameSource::Ingested { dir, crop } => {
            let frames = ingest_frames(dir, *crop)?;
            if frames.len() < cfg.n_frames {
                return Err(NebiError::Ingest {
                    path: dir.clone(),
                    msg: format!("{} frames, need at least {}", frames.len(), cfg.n_frames),
                });
            }
            Ok(Some(frames))
        }
    }
}

/// Synthesizes the sequence with seed `seq_seed`, in memory.
pub fn generate_sequence(cfg: &DatasetConfig, ingested: Option<&[PlanarImage]>, seq_seed: u64) -> Result<BurstSequence> {
    let root = Rng::seed_from_u64(seq_seed);
    let mut source_rng = root.split(0);
    let sharp = match (&cfg.source, ingested) {
        (FrameSource::Procedural { scene, max_drift_px }, _) => {
            let mag = source_rng.uniform_range(0.0, *max_drift_px);
            let angle = source_rng.uniform_range(0.0, std::f64::consts::TAU);
            let scene = SceneConfig {
                drift: (mag * angle.cos(), mag * angle.sin()),
                ..scene.clone()
            };
            generate_scene_sequence(&scene, cfg.n_frames, &mut source_rng)?
        }
        (FrameSource::Ingested { .. }, Some(frames)) => {
            let start = source_rng.below((frames.len() - cfg.n_frames + 1) as u64) as usize;
            frames[start..start + cfg.n_frames].to_vec()
        }
        (FrameSource::Ingested { dir, .. }, None) => {
            return Err(NebiError::Ingest {
                path: dir.clone(),
                msg: "source frames not loaded".into(),
            })
        }
    };
    // The stored camera carries the intrinsics the blur actually used.
    let (h, w) = (sharp[0].height(), sharp[0].width());
    let cam = CameraModel::new(
        cfg.cam.ccm(),
        cfg.cam.wb_gains(),
        Intrinsics::centered(cfg.degrade.focal_px, h, w),
    )?;
    let mut seq = synthesize_sequence(&sharp, &cfg.schedule()?, &cam, &cfg.degrade, cfg.label_metric, &root.split(1))?;
    seq.seed = seq_seed;
    Ok(seq)
}

fn entry_path(split: Split, k: usize) -> String {
    format!("{}/{:05}", split.as_str(), k)
}

fn entry_layout(cfg: &DatasetConfig) -> Vec<(Split, String, u64)> {
    let train = (0..cfg.n_train).map(|k| (Split::Train, k));
    let test = (0..cfg.n_test).map(|k| (Split::Test, k));
    train
        .chain(test)
        .enumerate()
        .map(|(i, (split, k))| (split, entry_path(split, k), sequence_seed(cfg.seed, i)))
        .collect()
}

/// Generates, writes and read-back-validates every sequence under
/// `out_dir`, then writes `dataset.txt`.
pub fn build_dataset(cfg: &DatasetConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| NebiError::io(out_dir, e))?;
    let ingested = load_source_frames(cfg)?;
    let layout = entry_layout(cfg);
    let entries = layout
        .par_iter()
        .map(|(split, rel, seed)| {
            let seq = generate_sequence(cfg, ingested.as_deref(), *seed)?;
            let dir = out_dir.join(rel);
            write_sequence(&seq, &dir)?;
            if read_sequence(&dir)? != seq {
                return Err(NebiError::Validation(format!("{} failed read-back", dir.display())));
            }
            Ok(DatasetEntry {
                path: rel.clone(),
                split: *split,
                seed: *seed,
                gt_index: seq.gt_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        seed: cfg.seed,
        n_frames: cfg.n_frames,
        entries,
    };
    check_label_share(&manifest, cfg.max_label_share)?;

    let mut kv = KvFile::new();
    kv.set("format", DATASET_FORMAT);
    kv.set("pipeline_version", PIPELINE_VERSION);
    cfg.to_kv(&mut kv);
    kv.set_list("label_histogram", &manifest.label_histogram());
    for e in &manifest.entries {
        kv.set(&format!("entry.{}", e.path), format!("{},{},{}", e.split.as_str(), e.seed, e.gt_index));
    }
    kv.write(out_dir.join(DATASET_MANIFEST))?;
    Ok(manifest)
}

pub fn check_label_share(manifest: &DatasetManifest, max_share: f64) -> Result<()> {
    let total = manifest.entries.len();
    if total < LABEL_SHARE_MIN_SEQUENCES {
        return Ok(());
    }
    let hist = manifest.label_histogram();
    let (idx, &top) = hist.iter().enumerate().max_by_key(|(i, c)| (**c, usize::MAX - i)).unwrap();
    let share = top as f64 / total as f64;
    if share > max_share {
        return Err(NebiError::Validation(format!(
            "gt_index {idx} owns {:.1}% of labels (limit {:.1}%); histogram {hist:?}",
            100.0 * share,
            100.0 * max_share
        )));
    }
    Ok(())
}

pub fn read_dataset_manifest(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let kv = KvFile::read(root.join(DATASET_MANIFEST))?;
    if kv.get_str("format")? != DATASET_FORMAT {
        return Err(kv.err("not a nebi-dataset manifest"));
    }
    let n_frames: usize = kv.get("dataset.n_frames")?;
    let mut entries = Vec::new();
    for key in kv.keys() {
        let Some(path) = key.strip_prefix("entry.") else { continue };
        let fields: Vec<&str> = kv.get_str(key)?.split(',').collect();
        let bad = || kv.err(format!("malformed entry {key}"));
        if fields.len() != 3 {
            return Err(bad());
        }
        let split = match fields[0] {
            "train" => Split::Train,
            "test" => Split::Test,
            _ => return Err(bad()),
        };
        let gt_index: usize = fields[2].parse().map_err(|_| bad())?;
        if gt_index >= n_frames {
            return Err(bad());
        }
        entries.push(DatasetEntry {
            path: path.to_string(),
            split,
            seed: fields[1].parse().map_err(|_| bad())?,
            gt_index,
        });
    }
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        seed: kv.get("dataset.seed")?,
        n_frames,
        entries,
    })
}

/// Reads the resolved generation config back from `dataset.txt`.
pub fn read_dataset_config(root: impl AsRef<Path>) -> Result<DatasetConfig> {
    let kv = KvFile::read(root.as_ref().join(DATASET_MANIFEST))?;
    let mut cfg = DatasetConfig::toy();
    cfg.apply_kv(&kv)?;
    Ok(cfg)
}

/// All sequences of one split, in manifest order.
pub fn load_split(manifest: &DatasetManifest, split: Split) -> Result<Vec<BurstSequence>> {
    let entries: Vec<&DatasetEntry> = manifest.split(split).collect();
    entries
        .par_iter()
        .map(|e| {
            let seq = read_sequence(manifest.root.join(&e.path))?;
            if seq.gt_index != e.gt_index {
                return Err(NebiError::Manifest {
                    path: manifest.root.join(DATASET_MANIFEST),
                    msg: format!("{} gt_index disagrees with its container", e.path),
                });
            }
            Ok(seq)
        })
        .collect()
}
