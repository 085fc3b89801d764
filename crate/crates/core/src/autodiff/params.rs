//! Learnable parameters and the Adam optimizer.

use crate::error::{NebiError, Result};
use crate::rng::Rng;

use super::tape::{Scalar, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
    /// Adam first and second moments.
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

impl Param {
    pub fn new(name: impl Into<String>, shape: &[usize], value: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != value.len() || n == 0 {
            return Err(NebiError::ShapeMismatch(format!("param shape {shape:?} for {} values", value.len())));
        }
        Ok(Param {
            name: name.into(),
            shape: shape.to_vec(),
            value,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
        })
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::new(name, shape, vec![0.0; n]).expect("nonempty shape")
    }

    /// He-normal: `N(0, 2 / fan_in)` with `fan_in` = product of all but the
    /// leading (output) dimension.
    pub fn he_normal(name: impl Into<String>, shape: &[usize], rng: &mut Rng) -> Self {
        let fan_in: usize = shape[1..].iter().product();
        let std = (2.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let value = (0..n).map(|_| (rng.gaussian() * std) as f32).collect();
        Self::new(name, shape, value).expect("nonempty shape")
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Ordered parameter collection with a shared Adam step counter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub params: Vec<Param>,
    pub step: u64,
}

impl ParamStore {
    pub fn new(params: Vec<Param>) -> Self {
        ParamStore { params, step: 0 }
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn count(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    /// Puts every parameter on `tape` as a leaf, converting to `T`.
    pub fn to_tape<T: Scalar>(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                tape.leaf(&p.shape, p.value.iter().map(|&v| T::c(v as f64)).collect())
                    .expect("param shapes are valid")
            })
            .collect()
    }

    /// Adds `grads` (one vector per parameter, same order) to the stored
    /// gradients.
    pub fn accumulate(&mut self, grads: &[Vec<f32>]) {
        for (p, g) in self.params.iter_mut().zip(grads) {
            p.grad.iter_mut().zip(g).for_each(|(a, &b)| *a += b);
        }
    }

    pub fn scale_grads(&mut self, s: f32) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g *= s);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|&g| (g as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// One bias-corrected Adam update of every parameter, then zeroes the
    /// gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        for p in &mut self.params {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                p.m[i] = b1 * p.m[i] + (1.0 - b1) * g;
                p.v[i] = b2 * p.v[i] + (1.0 - b2) * g * g;
                let mh = p.m[i] as f64 / bc1;
                let vh = p.v[i] as f64 / bc2;
                p.value[i] -= (cfg.lr * mh / (vh.sqrt() + cfg.eps)) as f32;
                p.grad[i] = 0.0;
            }
        }
    }
}
