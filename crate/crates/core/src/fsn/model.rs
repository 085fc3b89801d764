//! Network definition: shared per-frame extractor, correlation/motion
//! blocks, and a per-frame scoring head with softmax across frames.

use crate::autodiff::{grad_check, GradCheckReport, Param, ParamStore, Scalar, ScalarFn, Tape, Var};
use crate::error::{NebiError, Result};
use crate::rng::Rng;

use super::config::FsnConfig;

/// Indices into the parameter store, grouped by role.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    extractor: Vec<(usize, usize)>,
    blocks: Vec<BlockLayout>,
    fc1: (usize, usize),
    fc2: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
struct BlockLayout {
    app_inner: (usize, usize),
    app_outer: (usize, usize),
    motion: (usize, usize),
    fcm: Vec<(usize, usize)>,
}

/// Parameter names and shapes in store order.
fn param_specs(cfg: &FsnConfig) -> Vec<(String, Vec<usize>)> {
    let (d, k) = (cfg.d, cfg.kernel);
    let mut out = Vec::new();
    let mut pair = |name: String, w: Vec<usize>| {
        let c_out = w[0];
        out.push((format!("{name}.weight"), w));
        out.push((format!("{name}.bias"), vec![c_out]));
    };
    let mut cin = 4;
    for i in 0..cfg.extractor_strides.len() {
        pair(format!("extractor.{i}"), vec![d, cin, k, k]);
        cin = d;
    }
    let [kt, kh, kw] = cfg.fcm_kernel;
    for b in 0..cfg.l {
        pair(format!("block{b}.app_inner"), vec![d, d, k, k]);
        pair(format!("block{b}.app_outer"), vec![d, d, k, k]);
        pair(format!("block{b}.motion"), vec![d, d, k, k]);
        let mut c = cfg.window_len();
        for j in 0..cfg.fcm_depth {
            pair(format!("block{b}.fcm{j}"), vec![d, c, kt, kh, kw]);
            c = d;
        }
    }
    pair("head.fc1".into(), vec![cfg.mlp_hidden, d]);
    pair("head.fc2".into(), vec![1, cfg.mlp_hidden]);
    out
}

fn layout(cfg: &FsnConfig) -> Layout {
    let mut next = 0;
    let mut take = || {
        let p = (next, next + 1);
        next += 2;
        p
    };
    let extractor = cfg.extractor_strides.iter().map(|_| take()).collect();
    let blocks = (0..cfg.l)
        .map(|_| BlockLayout {
            app_inner: take(),
            app_outer: take(),
            motion: take(),
            fcm: (0..cfg.fcm_depth).map(|_| take()).collect(),
        })
        .collect();
    Layout {
        extractor,
        blocks,
        fc1: take(),
        fc2: take(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsnModel {
    pub cfg: FsnConfig,
    pub params: ParamStore,
}

/// Intermediate results of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    /// Extractor output `[N, D, H', W']`.
    pub features: Var,
    /// Pre-softmax frame scores `[N]`.
    pub scores: Var,
    pub probs: Var,
}

impl FsnModel {
    /// He-normal weights, zero biases.
    pub fn init(cfg: &FsnConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let params = param_specs(cfg)
            .into_iter()
            .map(|(name, shape)| {
                if name.ends_with(".bias") {
                    Param::zeros(name, &shape)
                } else {
                    Param::he_normal(name, &shape, rng)
                }
            })
            .collect();
        Ok(FsnModel {
            cfg: cfg.clone(),
            params: ParamStore::new(params),
        })
    }

    /// Wraps loaded parameters after checking names and shapes against the
    /// configuration.
    pub fn from_params(cfg: &FsnConfig, params: ParamStore) -> Result<Self> {
        cfg.validate()?;
        let specs = param_specs(cfg);
        if specs.len() != params.params.len()
            || specs.iter().zip(&params.params).any(|((n, s), p)| *n != p.name || *s != p.shape)
        {
            return Err(NebiError::Config("checkpoint parameters do not match the configuration".into()));
        }
        Ok(FsnModel { cfg: cfg.clone(), params })
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Sets every convolution weight and bias inside the blocks to zero,
    /// which turns each block into the identity.
    pub fn zero_block_weights(&mut self) {
        for p in &mut self.params.params {
            if p.name.starts_with("block") {
                p.value.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Builds the forward graph for one burst `[N, 4, H, W]` on `tape`,
    /// using `vars` (from [`ParamStore::to_tape`]) as weights.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], burst: Var) -> Result<Forward> {
        let s = tape.shape(burst).to_vec();
        if s.len() != 4 || s[1] != 4 {
            return Err(NebiError::ShapeMismatch(format!("burst must be [N, 4, H, W], got {s:?}")));
        }
        let n = s[0];
        let lay = layout(&self.cfg);
        let pad = self.cfg.kernel / 2;
        let mut f = burst;
        for (&(w, b), &stride) in lay.extractor.iter().zip(&self.cfg.extractor_strides) {
            let c = tape.conv2d(f, vars[w], vars[b], stride, pad)?;
            f = tape.relu(c);
        }
        let features = f;
        let mut m = f;
        let g = |tape: &mut Tape<T>, x: Var, (w, b): (usize, usize)| -> Result<Var> {
            let c = tape.conv2d(x, vars[w], vars[b], 1, pad)?;
            Ok(tape.relu(c))
        };
        for blk in &lay.blocks {
            let c = self.fcm(tape, vars, m, blk)?;
            let inner = g(tape, f, blk.app_inner)?;
            let sum = tape.add(inner, c)?;
            let outer = g(tape, sum, blk.app_outer)?;
            let motion = g(tape, c, blk.motion)?;
            f = tape.add(f, outer)?;
            m = tape.add(m, motion)?;
        }
        let fm = tape.add(f, m)?;
        let pooled = tape.gap(fm)?;
        let h1 = tape.dense(pooled, vars[lay.fc1.0], vars[lay.fc1.1])?;
        let h1 = tape.relu(h1);
        let h2 = tape.dense(h1, vars[lay.fc2.0], vars[lay.fc2.1])?;
        let scores = tape.reshape(h2, &[n])?;
        let probs = tape.softmax(scores);
        Ok(Forward {
            features,
            scores,
            probs,
        })
    }

    /// Correlation volume of `m` through the 3D conv stack, returned as
    /// `[N, D, H', W']`.
    fn fcm<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], m: Var, blk: &BlockLayout) -> Result<Var> {
        let mut x = tape.local_correlation(m, self.cfg.window_radius)?;
        for &(w, b) in &blk.fcm {
            let c = tape.conv3d(x, vars[w], vars[b])?;
            x = tape.relu(c);
        }
        tape.swap01(x)
    }

    /// Frame probabilities for a burst buffer of shape `[n, 4, h, w]`.
    pub fn predict(&self, burst: &[f32], n: usize, h: usize, w: usize) -> Result<Vec<f32>> {
        let mut tape = Tape::<f32>::new();
        let vars = self.params.to_tape(&mut tape);
        let x = tape.leaf(&[n, 4, h, w], burst.to_vec())?;
        let out = self.forward(&mut tape, &vars, x)?;
        Ok(tape.value(out.probs).to_vec())
    }

    /// Pre-softmax frame scores.
    pub fn scores(&self, burst: &[f32], n: usize, h: usize, w: usize) -> Result<Vec<f32>> {
        let mut tape = Tape::<f32>::new();
        let vars = self.params.to_tape(&mut tape);
        let x = tape.leaf(&[n, 4, h, w], burst.to_vec())?;
        let out = self.forward(&mut tape, &vars, x)?;
        Ok(tape.value(out.scores).to_vec())
    }

    /// Cross-entropy of one labeled burst, the frame probabilities, and the
    /// parameter gradients (one vector per parameter, store order).
    pub fn loss_and_grads(
        &self,
        burst: &[f32],
        n: usize,
        h: usize,
        w: usize,
        gt_index: usize,
    ) -> Result<(f32, Vec<f32>, Vec<Vec<f32>>)> {
        if gt_index >= n {
            return Err(NebiError::IndexOutOfRange { index: gt_index, len: n });
        }
        let mut tape = Tape::<f32>::new();
        let vars = self.params.to_tape(&mut tape);
        let x = tape.leaf(&[n, 4, h, w], burst.to_vec())?;
        let out = self.forward(&mut tape, &vars, x)?;
        let loss = tape.cross_entropy(out.probs, &one_hot(n, gt_index))?;
        tape.backward(loss)?;
        let probs = tape.value(out.probs).to_vec();
        Ok((tape.value(loss)[0], probs, vars.iter().map(|&v| tape.grad(v)).collect()))
    }
}

pub fn one_hot(n: usize, k: usize) -> Vec<f64> {
    (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
}

/// `-log p[gt_index]`.
pub fn frame_loss(p: &[f32], gt_index: usize) -> Result<f64> {
    if gt_index >= p.len() {
        return Err(NebiError::IndexOutOfRange {
            index: gt_index,
            len: p.len(),
        });
    }
    Ok(-(p[gt_index] as f64).ln())
}

/// Argmax of `p`; ties go to the smallest index.
pub fn argmax_first(p: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Loss of a model on a fixed burst, as a function of every parameter;
/// the whole model goes through finite-difference checks with this.
pub struct ModelLoss<'a> {
    pub model: &'a FsnModel,
    pub burst: Vec<f32>,
    pub shape: [usize; 4],
    pub gt_index: usize,
}

impl ModelLoss<'_> {
    /// The model's parameters in `grad_check` input form.
    pub fn inputs(&self) -> Vec<(Vec<usize>, Vec<f32>)> {
        self.model
            .params
            .params
            .iter()
            .map(|p| (p.shape.clone(), p.value.clone()))
            .collect()
    }
}

impl ScalarFn for ModelLoss<'_> {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var]) -> Result<Var> {
        let x = tape.leaf(&self.shape, self.burst.iter().map(|&v| T::c(v as f64)).collect())?;
        let out = self.model.forward(tape, inputs, x)?;
        tape.cross_entropy(out.probs, &one_hot(self.shape[0], self.gt_index))
    }
}

/// Gradient check of the full loss with respect to every parameter of a
/// freshly initialized `cfg` model on a random `n x 4 x h x w` burst in
/// `[0, 1)`. Model init, burst and label all derive from `seed`.
pub fn model_grad_check(cfg: &FsnConfig, n: usize, h: usize, w: usize, seed: u64, eps: f64, tol: f64) -> Result<GradCheckReport> {
    let root = Rng::seed_from_u64(seed);
    let model = FsnModel::init(cfg, &mut root.split(0))?;
    let mut rng = root.split(1);
    let burst = (0..n * 4 * h * w).map(|_| rng.uniform() as f32).collect();
    let f = ModelLoss {
        model: &model,
        burst,
        shape: [n, 4, h, w],
        gt_index: rng.below(n as u64) as usize,
    };
    grad_check(&f, &f.inputs(), eps, tol)
}
