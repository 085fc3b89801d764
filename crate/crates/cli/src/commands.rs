use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use nebi_core::autodiff::{primitive_suite, GradCheckReport};
use nebi_core::dataset::{
    build_dataset, encode_ppm, load_split, read_dataset_manifest, read_sequence, DatasetConfig,
    DatasetManifest, FrameSource, Split, DATASET_MANIFEST,
};
use nebi_core::eval::{evaluate, select_ae_entropy, select_first, select_oracle, Method, Selection};
use nebi_core::fsn::{argmax_first, load_model, model_grad_check, save_model, train_with, FsnConfig, TrainHistory};
use nebi_core::isp::forward_isp;
use nebi_core::kv::KvFile;
use sha2::{Digest, Sha256};

use crate::run_config::{parse_sets, usage, RunConfig};
use crate::Common;

fn resolve(common: &Common, defaults: KvFile, mut flags: Vec<(String, String)>, open: &[&str]) -> Result<RunConfig> {
    flags.extend(parse_sets(&common.sets)?);
    let mut rc = RunConfig::resolve(defaults, common.config.as_deref(), &flags, open)?;
    if common.deterministic {
        rc.kv.set("run.deterministic", true);
    }
    Ok(rc)
}

fn base_kv() -> KvFile {
    let mut kv = KvFile::new();
    kv.set("run.deterministic", false);
    kv
}

fn bad_config(e: nebi_core::NebiError) -> anyhow::Error {
    usage(e.to_string())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// SHA-256 over the dataset manifest and every sequence file, in manifest
/// and then file-name order.
fn dataset_checksum(m: &DatasetManifest) -> Result<String> {
    let mut h = Sha256::new();
    let mut add = |path: &Path| -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
        Ok(())
    };
    add(&m.root.join(DATASET_MANIFEST))?;
    for e in &m.entries {
        let dir = m.root.join(&e.path);
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .map(|r| r.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.sort();
        for f in files {
            add(&f)?;
        }
    }
    Ok(hex(&h.finalize()))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Use the pinned toy preset (the default without --frames).
    #[arg(long, conflicts_with = "frames")]
    pub toy: bool,
    /// Directory of source frames (PPM or tensor files) to degrade instead of
    /// procedural scenes.
    #[arg(long, value_name = "DIR")]
    pub frames: Option<PathBuf>,
    /// Center-crop ingested frames to this square size.
    #[arg(long, requires = "frames")]
    pub crop: Option<usize>,
    /// Frames per burst.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
}

pub fn synth(a: SynthArgs) -> Result<ExitCode> {
    let mut base = DatasetConfig::toy();
    if let Some(dir) = &a.frames {
        base.source = FrameSource::Ingested {
            dir: dir.clone(),
            crop: a.crop,
        };
    }
    let mut defaults = base_kv();
    base.to_kv(&mut defaults);
    let mut flags = Vec::new();
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            flags.push((k.to_string(), v));
        }
    };
    flag("dataset.seed", a.common.seed.map(|v| v.to_string()));
    flag("dataset.n_frames", a.n.map(|v| v.to_string()));
    flag("dataset.n_train", a.n_train.map(|v| v.to_string()));
    flag("dataset.n_test", a.n_test.map(|v| v.to_string()));
    let mut rc = resolve(&a.common, defaults, flags, &["dataset."])?;
    let mut cfg = base;
    cfg.apply_kv(&rc.kv).map_err(bad_config)?;
    cfg.validate().map_err(bad_config)?;
    cfg.to_kv(&mut rc.kv);

    let manifest = build_dataset(&cfg, &a.out)?;
    rc.persist(&a.out)?;
    let count = |s| manifest.split(s).count();
    println!("out={}", a.out.display());
    println!("train={}", count(Split::Train));
    println!("test={}", count(Split::Test));
    println!("n_frames={}", manifest.n_frames);
    println!(
        "label_histogram={}",
        manifest.label_histogram().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    );
    println!("checksum={}", dataset_checksum(&manifest)?);
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint and log directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Number of correlation/motion-aware blocks.
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Feature channels.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Start from the model defaults instead of the toy preset.
    #[arg(long)]
    pub full: bool,
}

pub fn train(a: TrainArgs) -> Result<ExitCode> {
    let base = if a.full { FsnConfig::default() } else { FsnConfig::toy() };
    let mut defaults = base_kv();
    defaults.set("train.seed", 7);
    base.to_kv(&mut defaults);
    let mut flags = Vec::new();
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            flags.push((k.to_string(), v));
        }
    };
    flag("train.seed", a.common.seed.map(|v| v.to_string()));
    flag("fsn.epochs", a.epochs.map(|v| v.to_string()));
    flag("fsn.lr", a.lr.map(|v| v.to_string()));
    flag("fsn.l", a.blocks.map(|v| v.to_string()));
    flag("fsn.d", a.channels.map(|v| v.to_string()));
    let mut rc = resolve(&a.common, defaults, flags, &["fsn."])?;
    let mut cfg = base;
    cfg.apply_kv(&rc.kv).map_err(bad_config)?;
    cfg.to_kv(&mut rc.kv);
    let seed: u64 = rc.get("train.seed")?;
    rc.kv.set("train.data", a.data.display());

    let manifest = read_dataset_manifest(&a.data)?;
    let train_set = load_split(&manifest, Split::Train)?;
    let test_set = load_split(&manifest, Split::Test)?;
    if train_set.is_empty() {
        bail!("{} has no training sequences", a.data.display());
    }
    rc.persist(&a.out)?;
    let (model, history) = train_with(&train_set, &test_set, &cfg, seed, |r| {
        let test = r.test_agreement.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "epoch={} train_loss={:.6} train_agreement={:.4} test_agreement={test}",
            r.epoch, r.train_loss, r.train_agreement
        );
    })?;
    let mut extra = KvFile::new();
    extra.set("train.seed", seed);
    extra.set("train.dataset_seed", manifest.seed);
    save_model(&model, &a.out, &extra)?;
    write_log(&a.out, &history)?;
    println!("params={}", model.param_count());
    println!("checkpoint={}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn write_log(dir: &Path, history: &TrainHistory) -> Result<()> {
    let path = dir.join("train_log.txt");
    std::fs::write(&path, history.to_log()).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Sequence directory.
    #[arg(long)]
    pub burst: PathBuf,
}

pub fn select(a: SelectArgs) -> Result<ExitCode> {
    let model = load_model(&a.ckpt)?;
    let seq = read_sequence(&a.burst)?;
    let (ph, pw) = (seq.frames[0].height(), seq.frames[0].width());
    let p = model.predict(&seq.burst_tensor(), seq.len(), ph, pw)?;
    println!("index={}", argmax_first(&p));
    println!("p={}", p.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(","));
    println!("sum={:.6}", p.iter().map(|&v| v as f64).sum::<f64>());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub data: PathBuf,
    /// Trained checkpoint; without it only the baselines are scored.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// `train` or `test`.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Directory for the per-sequence table and summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> Result<ExitCode> {
    let split = match a.split.as_str() {
        "train" => Split::Train,
        "test" => Split::Test,
        other => return Err(usage(format!("--split must be train or test, got {other:?}"))),
    };
    let mut defaults = base_kv();
    defaults.set("eval.data", a.data.display());
    defaults.set("eval.split", &a.split);
    defaults.set("eval.ckpt", a.ckpt.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()));
    let rc = resolve(&a.common, defaults, Vec::new(), &[])?;

    let manifest = read_dataset_manifest(&a.data)?;
    let seqs = load_split(&manifest, split)?;
    let by = |m: Method, f: &dyn Fn(&nebi_core::dataset::BurstSequence) -> usize| Selection {
        method: m.as_str().to_string(),
        indices: seqs.iter().map(f).collect(),
    };
    let mut selections = vec![
        by(Method::First, &|s| select_first(&s.frames)),
        by(Method::AeEntropy, &|s| select_ae_entropy(&s.frames)),
    ];
    let mut oracle = Vec::with_capacity(seqs.len());
    for s in &seqs {
        oracle.push(select_oracle(s)?);
    }
    selections.push(Selection {
        method: Method::Oracle.as_str().to_string(),
        indices: oracle,
    });
    let mut seeds = vec![("dataset".to_string(), manifest.seed)];
    if let Some(ckpt) = &a.ckpt {
        let model = load_model(ckpt)?;
        selections.push(Selection {
            method: Method::Fsn.as_str().to_string(),
            indices: nebi_core::fsn::select_all(&model, &seqs)?,
        });
        let ck = KvFile::read(ckpt.join(nebi_core::autodiff::CHECKPOINT_MANIFEST))?;
        if let Some(s) = ck.get_opt::<u64>("train.seed")? {
            seeds.push(("train".to_string(), s));
        }
    }
    let id = format!("{}:{}", a.data.display(), a.split);
    let report = evaluate(&id, &seeds, &seqs, &selections)?;
    print!("{}", report.render());
    if let Some(out) = &a.out {
        rc.persist(out)?;
        let write = |name: &str, text: String| {
            let p = out.join(name);
            std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
        };
        write("report.tsv", report.to_tsv())?;
        write("summary.txt", report.summary())?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Maximum relative error.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Seeds per primitive and for the network.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Directory for the resolved config and per-check results.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn report_line(name: &str, seed: u64, r: &GradCheckReport) -> String {
    format!(
        "{} {name} seed={seed} max_rel_error={:.3e} checked={} skipped={}",
        if r.passed() { "ok  " } else { "FAIL" },
        r.max_rel_error,
        r.checked,
        r.skipped
    )
}

pub fn gradcheck(a: GradcheckArgs) -> Result<ExitCode> {
    if !(a.tol > 0.0) || !(a.eps > 0.0) {
        return Err(usage("--tol and --eps must be positive"));
    }
    let mut defaults = base_kv();
    defaults.set("gradcheck.tol", a.tol);
    defaults.set("gradcheck.eps", a.eps);
    defaults.set("gradcheck.seeds", a.seeds);
    defaults.set("gradcheck.seed_offset", a.common.seed.unwrap_or(0));
    let tiny = FsnConfig::tiny();
    tiny.to_kv(&mut defaults);
    let rc = resolve(&a.common, defaults, Vec::new(), &[])?;
    let offset: u64 = rc.get("gradcheck.seed_offset")?;

    let mut lines = Vec::new();
    let mut failures = 0;
    for e in primitive_suite(a.seeds, a.eps, a.tol)? {
        failures += !e.report.passed() as usize;
        lines.push(report_line(&e.name, e.seed, &e.report));
    }
    for seed in offset..offset + a.seeds {
        let r = model_grad_check(&tiny, 3, 8, 8, seed, a.eps, a.tol)?;
        failures += !r.passed() as usize;
        lines.push(report_line("fsn_tiny", seed, &r));
    }
    for l in &lines {
        println!("{l}");
    }
    println!("checks={} failures={failures}", lines.len());
    if let Some(out) = &a.out {
        rc.persist(out)?;
        let p = out.join("gradcheck.txt");
        std::fs::write(&p, lines.join("\n") + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Sequence directory.
    pub burst: PathBuf,
    /// Frame index to render; repeatable. Defaults to every frame.
    #[arg(long = "frame")]
    pub frames: Vec<usize>,
    /// Also write the sharp ground truth.
    #[arg(long)]
    pub gt: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn render(a: RenderArgs) -> Result<ExitCode> {
    let seq = read_sequence(&a.burst)?;
    let frames = if a.frames.is_empty() { (0..seq.len()).collect() } else { a.frames.clone() };
    if let Some(&bad) = frames.iter().find(|&&i| i >= seq.len()) {
        return Err(usage(format!("--frame {bad} out of range for a {}-frame burst", seq.len())));
    }
    let mut rc = RunConfig { kv: base_kv() };
    rc.kv.set("render.burst", a.burst.display());
    rc.kv.set_list("render.frames", &frames);
    rc.kv.set("render.gt", a.gt);
    rc.persist(&a.out)?;
    let write = |name: String, bytes: Vec<u8>| -> Result<()> {
        let p = a.out.join(name);
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        println!("{}", p.display());
        Ok(())
    };
    for &i in &frames {
        let srgb = forward_isp(&seq.demosaiced(i), &seq.cam)?;
        write(format!("frame_{i:02}.ppm"), encode_ppm(&srgb)?)?;
    }
    if a.gt {
        write("gt.ppm".into(), encode_ppm(&seq.gt)?)?;
    }
    Ok(ExitCode::SUCCESS)
}
