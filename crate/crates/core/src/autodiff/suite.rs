//! Finite-difference checks of every tape primitive on random shapes.

use super::grad_check::{grad_check, GradCheckReport, ScalarFn};
use super::tape::{Scalar, Tape, Var};
use crate::error::{NebiError, Result};
use crate::rng::Rng;

pub const PRIMITIVES: &[&str] = &[
    "add", "mul", "scalar_mul", "relu", "swap01", "gap", "dense", "softmax", "cross_entropy", "conv2d", "conv2d_s2",
    "conv3d", "cosine", "corr",
];

/// Applies one primitive and reduces with a fixed random projection so
/// every output coordinate gets a distinct upstream gradient.
#[derive(Debug, Clone, Copy)]
pub struct Primitive {
    pub kind: &'static str,
    pub proj_seed: u64,
}

impl Primitive {
    fn project<T: Scalar>(&self, t: &mut Tape<T>, y: Var) -> Result<Var> {
        let n = t.value(y).len();
        let mut rng = Rng::seed_from_u64(self.proj_seed);
        let w: Vec<T> = (0..n).map(|_| T::c(rng.gaussian())).collect();
        let shape = t.shape(y).to_vec();
        let wv = t.leaf(&shape, w)?;
        let m = t.mul(y, wv)?;
        Ok(t.sum(m))
    }
}

impl ScalarFn for Primitive {
    fn eval<T: Scalar>(&self, t: &mut Tape<T>, x: &[Var]) -> Result<Var> {
        let y = match self.kind {
            "add" => t.add(x[0], x[1])?,
            "mul" => t.mul(x[0], x[1])?,
            "scalar_mul" => t.scalar_mul(x[0], -1.7),
            "relu" => t.relu(x[0]),
            "swap01" => t.swap01(x[0])?,
            "gap" => t.gap(x[0])?,
            "dense" => t.dense(x[0], x[1], x[2])?,
            "softmax" => t.softmax(x[0]),
            "conv2d" => t.conv2d(x[0], x[1], x[2], 1, 1)?,
            "conv2d_s2" => t.conv2d(x[0], x[1], x[2], 2, 1)?,
            "conv3d" => t.conv3d(x[0], x[1], x[2])?,
            "cosine" => t.cosine_similarity(x[0], x[1])?,
            "corr" => t.local_correlation(x[0], [1, 1, 1])?,
            "cross_entropy" => {
                let p = t.softmax(x[0]);
                let n = t.value(p).len();
                let row = *t.shape(p).last().unwrap();
                let target: Vec<f64> = (0..n).map(|i| if i % row == 1 { 1.0 } else { 0.0 }).collect();
                return t.cross_entropy(p, &target);
            }
            other => return Err(NebiError::Config(format!("unknown primitive {other}"))),
        };
        self.project(t, y)
    }
}

fn randn(rng: &mut Rng, n: usize, scale: f64) -> Vec<f32> {
    (0..n).map(|_| (rng.gaussian() * scale) as f32).collect()
}

/// Values kept at least `gap` away from zero so ReLU probes never straddle
/// the kink.
fn away_from_zero(rng: &mut Rng, n: usize, gap: f64) -> Vec<f32> {
    (0..n)
        .map(|_| {
            let v = rng.uniform_range(gap, 1.0);
            (if rng.uniform() < 0.5 { -v } else { v }) as f32
        })
        .collect()
}

/// Random input shapes and values for one primitive.
pub fn primitive_inputs(kind: &str, rng: &mut Rng) -> Result<Vec<(Vec<usize>, Vec<f32>)>> {
    let dims = |rng: &mut Rng, lo: u64, hi: u64| (lo + rng.below(hi - lo + 1)) as usize;
    Ok(match kind {
        "add" | "mul" => {
            let n = dims(rng, 2, 9);
            vec![(vec![n], randn(rng, n, 1.0)), (vec![n], randn(rng, n, 1.0))]
        }
        "scalar_mul" | "softmax" | "cross_entropy" => {
            let (r, c) = (dims(rng, 1, 3), dims(rng, 2, 7));
            vec![(vec![r, c], randn(rng, r * c, 1.5))]
        }
        "relu" => {
            let n = dims(rng, 3, 12);
            vec![(vec![n], away_from_zero(rng, n, 0.01))]
        }
        "swap01" | "gap" => {
            let s = vec![dims(rng, 1, 3), dims(rng, 1, 3), dims(rng, 1, 4), dims(rng, 1, 4)];
            let n = s.iter().product();
            vec![(s, randn(rng, n, 1.0))]
        }
        "dense" => {
            let (r, i, o) = (dims(rng, 1, 4), dims(rng, 1, 5), dims(rng, 1, 5));
            vec![
                (vec![r, i], randn(rng, r * i, 1.0)),
                (vec![o, i], randn(rng, o * i, 1.0)),
                (vec![o], randn(rng, o, 1.0)),
            ]
        }
        "conv2d" | "conv2d_s2" => {
            let (b, ci, co) = (dims(rng, 1, 2), dims(rng, 1, 3), dims(rng, 1, 3));
            let (h, w) = (dims(rng, 3, 6), dims(rng, 3, 6));
            vec![
                (vec![b, ci, h, w], randn(rng, b * ci * h * w, 1.0)),
                (vec![co, ci, 3, 3], randn(rng, co * ci * 9, 1.0)),
                (vec![co], randn(rng, co, 1.0)),
            ]
        }
        "conv3d" => {
            let (ci, co, t) = (dims(rng, 1, 3), dims(rng, 1, 3), dims(rng, 2, 4));
            let (h, w) = (dims(rng, 2, 4), dims(rng, 2, 4));
            vec![
                (vec![ci, t, h, w], randn(rng, ci * t * h * w, 1.0)),
                (vec![co, ci, 3, 3, 3], randn(rng, co * ci * 27, 1.0)),
                (vec![co], randn(rng, co, 1.0)),
            ]
        }
        "cosine" => {
            let (r, d) = (dims(rng, 1, 4), dims(rng, 2, 6));
            vec![(vec![r, d], randn(rng, r * d, 1.0)), (vec![r, d], randn(rng, r * d, 1.0))]
        }
        "corr" => {
            let s = vec![dims(rng, 2, 3), dims(rng, 2, 4), dims(rng, 2, 4), dims(rng, 2, 4)];
            let n = s.iter().product();
            vec![(s, randn(rng, n, 1.0))]
        }
        other => return Err(NebiError::Config(format!("unknown primitive {other}"))),
    })
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: String,
    pub seed: u64,
    pub report: GradCheckReport,
}

/// Checks every primitive for seeds `0..seeds`; input draws depend only on
/// the primitive's position and the seed.
pub fn primitive_suite(seeds: u64, eps: f64, tol: f64) -> Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    for (k, &kind) in PRIMITIVES.iter().enumerate() {
        for seed in 0..seeds {
            let mut rng = Rng::seed_from_u64(1000 * k as u64 + seed);
            let inputs = primitive_inputs(kind, &mut rng)?;
            let report = grad_check(&Primitive { kind, proj_seed: seed }, &inputs, eps, tol)?;
            out.push(SuiteEntry {
                name: kind.to_string(),
                seed,
                report,
            });
        }
    }
    Ok(out)
}
