use crate::autodiff::AdamConfig;
use crate::error::{NebiError, Result};
use crate::kv::KvFile;

/// Architecture and training hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FsnConfig {
    /// Feature channels.
    pub d: usize,
    /// Number of correlation/motion-aware blocks.
    pub l: usize,
    /// Correlation window half-extents (time, row, column); the window is
    /// `2r + 1` wide per axis.
    pub window_radius: [usize; 3],
    /// One 2D conv + ReLU per entry, with that stride.
    pub extractor_strides: Vec<usize>,
    /// Kernel size of every 2D convolution.
    pub kernel: usize,
    /// 3D conv + ReLU layers applied to the correlation volume.
    pub fcm_depth: usize,
    pub fcm_kernel: [usize; 3],
    pub mlp_hidden: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    /// Random flips/transposes of training bursts, redrawn every epoch.
    pub augment: bool,
    /// Cosine learning-rate decay from `lr` towards zero over the epochs.
    pub cosine_decay: bool,
    /// Redraw the noise of every training burst each epoch from its clean
    /// references and stored noise levels, relabelling the result.
    pub resample_noise: bool,
}

impl Default for FsnConfig {
    fn default() -> Self {
        FsnConfig {
            d: 32,
            l: 2,
            window_radius: [1, 1, 1],
            extractor_strides: vec![2, 2],
            kernel: 3,
            fcm_depth: 2,
            fcm_kernel: [3, 3, 3],
            mlp_hidden: 128,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch: 4,
            epochs: 20,
            grad_clip: 0.0,
            augment: false,
            cosine_decay: false,
            resample_noise: false,
        }
    }
}

impl FsnConfig {
    /// Smallest configuration used for full-model gradient checks.
    pub fn tiny() -> Self {
        FsnConfig {
            d: 4,
            l: 1,
            mlp_hidden: 8,
            ..Self::default()
        }
    }

    /// Training preset for the toy dataset: narrow features, a larger step
    /// size with cosine decay, and dihedral augmentation against the small
    /// training set.
    pub fn toy() -> Self {
        FsnConfig {
            d: 8,
            extractor_strides: vec![1, 2],
            mlp_hidden: 16,
            lr: 1e-3,
            epochs: 30,
            augment: true,
            cosine_decay: true,
            ..Self::default()
        }
    }

    pub fn window_len(&self) -> usize {
        self.window_radius.iter().map(|r| 2 * r + 1).product()
    }

    /// Learning rate used throughout 1-based `epoch`.
    pub fn epoch_lr(&self, epoch: usize) -> f64 {
        if !self.cosine_decay || self.epochs == 0 {
            return self.lr;
        }
        let t = (epoch.saturating_sub(1)) as f64 / self.epochs as f64;
        0.5 * self.lr * (1.0 + (std::f64::consts::PI * t).cos())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    /// Total extractor downsampling factor.
    pub fn reduction(&self) -> usize {
        self.extractor_strides.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NebiError::Config(m.into()));
        if self.d < 1 {
            return bad("d must be at least 1");
        }
        if self.kernel.is_multiple_of(2) || self.fcm_kernel.iter().any(|k| k.is_multiple_of(2)) {
            return bad("kernels must be odd");
        }
        if self.extractor_strides.is_empty() || self.extractor_strides.contains(&0) {
            return bad("extractor needs at least one layer with positive stride");
        }
        if self.l > 0 && self.fcm_depth < 1 {
            return bad("fcm_depth must be at least 1 when l > 0");
        }
        if self.mlp_hidden < 1 || self.batch < 1 {
            return bad("mlp_hidden and batch must be at least 1");
        }
        if !(self.lr > 0.0) || !(self.grad_clip >= 0.0) {
            return bad("lr must be positive and grad_clip nonnegative");
        }
        Ok(())
    }

    pub fn to_kv(&self, kv: &mut KvFile) {
        kv.set("fsn.d", self.d);
        kv.set("fsn.l", self.l);
        kv.set_list("fsn.window_radius", &self.window_radius);
        kv.set_list("fsn.extractor_strides", &self.extractor_strides);
        kv.set("fsn.kernel", self.kernel);
        kv.set("fsn.fcm_depth", self.fcm_depth);
        kv.set_list("fsn.fcm_kernel", &self.fcm_kernel);
        kv.set("fsn.mlp_hidden", self.mlp_hidden);
        kv.set("fsn.lr", self.lr);
        kv.set("fsn.beta1", self.beta1);
        kv.set("fsn.beta2", self.beta2);
        kv.set("fsn.adam_eps", self.adam_eps);
        kv.set("fsn.batch", self.batch);
        kv.set("fsn.epochs", self.epochs);
        kv.set("fsn.grad_clip", self.grad_clip);
        kv.set("fsn.augment", self.augment);
        kv.set("fsn.cosine_decay", self.cosine_decay);
        kv.set("fsn.resample_noise", self.resample_noise);
    }

    /// Overrides fields present in `kv`; unknown `fsn.` keys are an error.
    pub fn apply_kv(&mut self, kv: &KvFile) -> Result<()> {
        const KNOWN: &[&str] = &[
            "d", "l", "window_radius", "extractor_strides", "kernel", "fcm_depth", "fcm_kernel", "mlp_hidden",
            "lr", "beta1", "beta2", "adam_eps", "batch", "epochs", "grad_clip", "augment", "cosine_decay",
            "resample_noise",
        ];
        for key in kv.keys() {
            if let Some(rest) = key.strip_prefix("fsn.") {
                if !KNOWN.contains(&rest) {
                    return Err(kv.err(format!("unknown key {key}")));
                }
            }
        }
        fn scalar<T: std::str::FromStr>(kv: &KvFile, key: &str, slot: &mut T) -> Result<()> {
            if let Some(v) = kv.get_opt(key)? {
                *slot = v;
            }
            Ok(())
        }
        fn triple(kv: &KvFile, key: &str, slot: &mut [usize; 3]) -> Result<()> {
            if kv.contains(key) {
                let v: Vec<usize> = kv.get_list(key)?;
                *slot = v.try_into().map_err(|_| kv.err(format!("{key} needs three values")))?;
            }
            Ok(())
        }
        scalar(kv, "fsn.d", &mut self.d)?;
        scalar(kv, "fsn.l", &mut self.l)?;
        triple(kv, "fsn.window_radius", &mut self.window_radius)?;
        if kv.contains("fsn.extractor_strides") {
            self.extractor_strides = kv.get_list("fsn.extractor_strides")?;
        }
        scalar(kv, "fsn.kernel", &mut self.kernel)?;
        scalar(kv, "fsn.fcm_depth", &mut self.fcm_depth)?;
        triple(kv, "fsn.fcm_kernel", &mut self.fcm_kernel)?;
        scalar(kv, "fsn.mlp_hidden", &mut self.mlp_hidden)?;
        scalar(kv, "fsn.lr", &mut self.lr)?;
        scalar(kv, "fsn.beta1", &mut self.beta1)?;
        scalar(kv, "fsn.beta2", &mut self.beta2)?;
        scalar(kv, "fsn.adam_eps", &mut self.adam_eps)?;
        scalar(kv, "fsn.batch", &mut self.batch)?;
        scalar(kv, "fsn.epochs", &mut self.epochs)?;
        scalar(kv, "fsn.grad_clip", &mut self.grad_clip)?;
        scalar(kv, "fsn.augment", &mut self.augment)?;
        scalar(kv, "fsn.cosine_decay", &mut self.cosine_decay)?;
        scalar(kv, "fsn.resample_noise", &mut self.resample_noise)?;
        self.validate()
    }
}

/// Exact learnable scalar count and forward-pass floating-point operations
/// (multiply and add counted separately) for an `n x 4 x h x w` burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelCost {
    pub params: u64,
    pub flops: u64,
}

fn conv_out(n: usize, k: usize, stride: usize) -> usize {
    (n + 2 * (k / 2) - k) / stride + 1
}

pub fn count_params(cfg: &FsnConfig) -> u64 {
    model_cost(cfg, 1, 1, 1).params
}

pub fn model_cost(cfg: &FsnConfig, n: usize, h: usize, w: usize) -> ModelCost {
    let (d, k2) = (cfg.d as u64, (cfg.kernel * cfg.kernel) as u64);
    let kt: u64 = cfg.fcm_kernel.iter().map(|&k| k as u64).product();
    let win = cfg.window_len() as u64;
    let n64 = n as u64;
    let mut params = 0u64;
    let mut flops = 0u64;
    let (mut hh, mut ww, mut cin) = (h, w, 4u64);
    for &s in &cfg.extractor_strides {
        params += cin * d * k2 + d;
        hh = conv_out(hh, cfg.kernel, s);
        ww = conv_out(ww, cfg.kernel, s);
        let area = (hh * ww) as u64;
        flops += n64 * area * d * (2 * cin * k2 + 1);
        cin = d;
    }
    let area = (hh * ww) as u64;
    let g_flops = n64 * area * d * (2 * d * k2 + 1);
    for _ in 0..cfg.l {
        params += 3 * (d * d * k2 + d);
        flops += 3 * g_flops;
        // correlation: norms, then a D-length dot per window entry
        flops += n64 * area * 2 * d + win * n64 * area * (2 * d + 2);
        let mut c = win;
        for _ in 0..cfg.fcm_depth {
            params += c * d * kt + d;
            flops += n64 * area * d * (2 * c * kt + 1);
            c = d;
        }
        // residual additions: F + inner, M + g(C), inner + C
        flops += 3 * n64 * area * d;
    }
    let hid = cfg.mlp_hidden as u64;
    params += d * hid + hid + hid + 1;
    flops += n64 * d * area + n64 * (2 * d * hid + hid) + n64 * (2 * hid + 1) + 4 * n64;
    ModelCost { params, flops }
}
