//! Reverse-mode tape. Nodes are appended in evaluation order, so the node
//! list is already a topological order and backward walks it in reverse.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

use crate::error::{NebiError, Result};
use crate::rng::mix64;

use super::kernels::{
    conv2d_backward, conv2d_forward, conv3d_backward, conv3d_forward, cosine_denominator, window_offsets,
    Conv2dGeom, Conv3dGeom, CorrGeom,
};

/// Element type of a tape: `f32` for training, `f64` for finite differences.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Default + Send + Sync + 'static {
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite constant")
    }
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}
impl Scalar for f32 {}
impl Scalar for f64 {}

/// Guard in cosine-similarity denominators.
pub const COSINE_EPS: f64 = 1e-8;
/// Probabilities are floored here before the logarithm in cross-entropy.
pub const PROB_FLOOR: f64 = 1e-30;

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Sum(Var),
    Reshape(Var),
    Swap01 { x: Var, dims: [usize; 4] },
    /// `cols` caches the forward patch matrices.
    Conv2d { x: Var, w: Var, b: Var, geom: Conv2dGeom, cols: Vec<T> },
    Conv3d { x: Var, w: Var, b: Var, geom: Conv3dGeom, cols: Vec<T> },
    Dense { x: Var, w: Var, b: Var, rows: usize, fan_in: usize, fan_out: usize },
    Gap { x: Var, rows: usize, area: usize },
    Softmax { x: Var, row: usize },
    CrossEntropy { p: Var, target: Vec<T>, row: usize },
    Cosine { a: Var, b: Var, rows: usize, dim: usize },
    LocalCorr { m: Var, geom: CorrGeom },
}

#[derive(Debug, Clone)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    grad: Vec<T>,
    op: Op<T>,
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    track_kinks: bool,
    kink_sig: u64,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn shape_err(msg: impl Into<String>) -> NebiError {
    NebiError::ShapeMismatch(msg.into())
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            track_kinks: false,
            kink_sig: 0,
        }
    }

    /// Tape that hashes every branch decision (ReLU masks, cosine guard
    /// regime) so finite-difference probes can detect crossing a kink.
    pub fn with_kink_tracking() -> Self {
        Tape {
            track_kinks: true,
            ..Self::new()
        }
    }

    pub fn kink_signature(&self) -> u64 {
        self.kink_sig
    }

    fn note_kinks(&mut self, bits: impl Iterator<Item = bool>) {
        if !self.track_kinks {
            return;
        }
        let mut word = 0u64;
        let mut count = 0u32;
        for b in bits {
            word = (word << 1) | b as u64;
            count += 1;
            if count == 64 {
                self.kink_sig = mix64(self.kink_sig ^ word);
                word = 0;
                count = 0;
            }
        }
        self.kink_sig = mix64(self.kink_sig ^ word ^ ((count as u64) << 56));
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value,
            grad: Vec::new(),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, shape: &[usize], value: Vec<T>) -> Result<Var> {
        if shape.is_empty() || numel(shape) != value.len() {
            return Err(shape_err(format!("leaf shape {shape:?} for {} values", value.len())));
        }
        Ok(self.push(shape.to_vec(), value, Op::Leaf))
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Accumulated gradient (all zeros if backward never reached `v`).
    pub fn grad(&self, v: Var) -> Vec<T> {
        let n = &self.nodes[v.0];
        if n.grad.is_empty() {
            vec![T::zero(); n.value.len()]
        } else {
            n.grad.clone()
        }
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad.clear();
        }
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let v = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        Ok(self.push(self.shape(a).to_vec(), v, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let v = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x * y).collect();
        Ok(self.push(self.shape(a).to_vec(), v, Op::Mul(a, b)))
    }

    pub fn scalar_mul(&mut self, a: Var, s: f64) -> Var {
        let s = T::c(s);
        let v = self.value(a).iter().map(|&x| x * s).collect();
        self.push(self.shape(a).to_vec(), v, Op::Scale(a, s))
    }

    /// `max(x, 0)`; the derivative at exactly 0 is taken as 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let v: Vec<T> = self.value(a).iter().map(|&x| if x > T::zero() { x } else { T::zero() }).collect();
        let mask: Vec<bool> = self.value(a).iter().map(|&x| x > T::zero()).collect();
        self.note_kinks(mask.into_iter());
        self.push(self.shape(a).to_vec(), v, Op::Relu(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        self.push(vec![1], vec![s], Op::Sum(a))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != self.value(a).len() {
            return Err(shape_err(format!("reshape {:?} to {shape:?}", self.shape(a))));
        }
        let v = self.value(a).to_vec();
        Ok(self.push(shape.to_vec(), v, Op::Reshape(a)))
    }

    /// `[A, B, H, W] -> [B, A, H, W]`.
    pub fn swap01(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 4 {
            return Err(shape_err(format!("swap01 needs 4 dims, got {s:?}")));
        }
        let dims = [s[0], s[1], s[2], s[3]];
        let v = swap01_values(self.value(a), dims);
        Ok(self.push(vec![dims[1], dims[0], dims[2], dims[3]], v, Op::Swap01 { x: a, dims }))
    }

    /// Batched 2D cross-correlation. `x: [B, Cin, H, W]`,
    /// `w: [Cout, Cin, k, k]` (k odd), `b: [Cout]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 4 || ws.len() != 4 || bs.len() != 1 {
            return Err(shape_err(format!("conv2d shapes x{xs:?} w{ws:?} b{bs:?}")));
        }
        if ws[1] != xs[1] || ws[2] != ws[3] || ws[2] % 2 == 0 || bs[0] != ws[0] || stride == 0 {
            return Err(shape_err(format!("conv2d shapes x{xs:?} w{ws:?} b{bs:?} stride {stride}")));
        }
        if xs[2] + 2 * pad < ws[2] || xs[3] + 2 * pad < ws[2] {
            return Err(shape_err(format!("conv2d kernel {} larger than padded input {xs:?}", ws[2])));
        }
        let geom = Conv2dGeom {
            batch: xs[0],
            c_in: xs[1],
            h: xs[2],
            w: xs[3],
            c_out: ws[0],
            k: ws[2],
            stride,
            pad,
        };
        let (v, cols) = conv2d_forward(&geom, self.value(x), self.value(w), self.value(b));
        let shape = vec![geom.batch, geom.c_out, geom.out_h(), geom.out_w()];
        Ok(self.push(shape, v, Op::Conv2d { x, w, b, geom, cols }))
    }

    /// Same-size 3D cross-correlation over `x: [Cin, T, H, W]` with
    /// `w: [Cout, Cin, kt, kh, kw]` (all odd), zero-padded in H and W and
    /// circular in T.
    pub fn conv3d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 4 || ws.len() != 5 || bs.len() != 1 || ws[1] != xs[0] || bs[0] != ws[0] {
            return Err(shape_err(format!("conv3d shapes x{xs:?} w{ws:?} b{bs:?}")));
        }
        if ws[2] % 2 == 0 || ws[3] % 2 == 0 || ws[4] % 2 == 0 {
            return Err(shape_err(format!("conv3d kernel must be odd, got {ws:?}")));
        }
        let geom = Conv3dGeom {
            c_in: xs[0],
            t: xs[1],
            h: xs[2],
            w: xs[3],
            c_out: ws[0],
            kt: ws[2],
            kh: ws[3],
            kw: ws[4],
        };
        let (v, cols) = conv3d_forward(&geom, self.value(x), self.value(w), self.value(b));
        let shape = vec![geom.c_out, geom.t, geom.h, geom.w];
        Ok(self.push(shape, v, Op::Conv3d { x, w, b, geom, cols }))
    }

    /// `x: [R, In]`, `w: [Out, In]`, `b: [Out]` -> `[R, Out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || ws[1] != xs[1] || bs[0] != ws[0] {
            return Err(shape_err(format!("dense shapes x{xs:?} w{ws:?} b{bs:?}")));
        }
        let (rows, fan_in, fan_out) = (xs[0], xs[1], ws[0]);
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let mut v = Vec::with_capacity(rows * fan_out);
        for r in 0..rows {
            let xr = &xv[r * fan_in..(r + 1) * fan_in];
            for o in 0..fan_out {
                let wr = &wv[o * fan_in..(o + 1) * fan_in];
                v.push(bv[o] + xr.iter().zip(wr).map(|(&a, &b)| a * b).sum::<T>());
            }
        }
        Ok(self.push(
            vec![rows, fan_out],
            v,
            Op::Dense {
                x,
                w,
                b,
                rows,
                fan_in,
                fan_out,
            },
        ))
    }

    /// Global average pool: `[B, C, H, W] -> [B, C]`.
    pub fn gap(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(shape_err(format!("gap needs 4 dims, got {s:?}")));
        }
        let area = s[2] * s[3];
        let inv = T::c(1.0 / area as f64);
        let v = self.value(x).chunks_exact(area).map(|c| c.iter().copied().sum::<T>() * inv).collect();
        Ok(self.push(vec![s[0], s[1]], v, Op::Gap { x, rows: s[0] * s[1], area }))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let row = *self.shape(x).last().unwrap();
        let mut v = Vec::with_capacity(self.value(x).len());
        for r in self.value(x).chunks_exact(row) {
            let m = r.iter().copied().fold(T::neg_infinity(), T::max);
            let e: Vec<T> = r.iter().map(|&z| (z - m).exp()).collect();
            let s: T = e.iter().copied().sum();
            v.extend(e.into_iter().map(|z| z / s));
        }
        self.push(self.shape(x).to_vec(), v, Op::Softmax { x, row })
    }

    /// Mean over rows of `-sum_i t_i log p_i`; `target` must be one-hot per
    /// row of the last axis.
    pub fn cross_entropy(&mut self, p: Var, target: &[f64]) -> Result<Var> {
        let row = *self.shape(p).last().unwrap();
        if target.len() != self.value(p).len() {
            return Err(shape_err(format!("target of {} for p{:?}", target.len(), self.shape(p))));
        }
        for r in target.chunks_exact(row) {
            let ones = r.iter().filter(|&&t| t == 1.0).count();
            let zeros = r.iter().filter(|&&t| t == 0.0).count();
            if ones != 1 || ones + zeros != row {
                return Err(NebiError::NotOneHot);
            }
        }
        let rows = target.len() / row;
        let floor = T::c(PROB_FLOOR);
        let loss = self
            .value(p)
            .iter()
            .zip(target)
            .filter(|(_, &t)| t == 1.0)
            .map(|(&pv, _)| -pv.max(floor).ln())
            .sum::<T>()
            / T::c(rows as f64);
        let target = target.iter().map(|&t| T::c(t)).collect();
        Ok(self.push(vec![1], vec![loss], Op::CrossEntropy { p, target, row }))
    }

    /// Row-wise cosine similarity of `a, b: [R, D]` -> `[R]`.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let s = self.shape(a);
        if s.len() != 2 {
            return Err(shape_err(format!("cosine_similarity needs [R, D], got {s:?}")));
        }
        let (rows, dim) = (s[0], s[1]);
        let eps = T::c(COSINE_EPS);
        let (av, bv) = (self.value(a), self.value(b));
        let mut v = Vec::with_capacity(rows);
        let mut regime = Vec::with_capacity(rows);
        for r in 0..rows {
            let (x, y) = (&av[r * dim..(r + 1) * dim], &bv[r * dim..(r + 1) * dim]);
            let dot: T = x.iter().zip(y).map(|(&p, &q)| p * q).sum();
            let na = x.iter().map(|&p| p * p).sum::<T>().sqrt();
            let nb = y.iter().map(|&q| q * q).sum::<T>().sqrt();
            regime.push(na * nb > eps);
            v.push(dot / cosine_denominator(na, nb, eps));
        }
        self.note_kinks(regime.into_iter());
        Ok(self.push(vec![rows], v, Op::Cosine { a, b, rows, dim }))
    }

    /// Local correlation volume of features `m: [N, D, H, W]`:
    /// `S[k, t, y, x] = cos(m[t, :, y, x], m[t+u, :, y+v, x+w])` for the
    /// `k`-th offset `(u, v, w)` of the window. Time wraps around; spatial
    /// partners outside the grid give 0. Output `[K, N, H, W]`.
    pub fn local_correlation(&mut self, m: Var, radius: [usize; 3]) -> Result<Var> {
        let s = self.shape(m);
        if s.len() != 4 {
            return Err(shape_err(format!("local_correlation needs [N, D, H, W], got {s:?}")));
        }
        let geom = CorrGeom {
            n: s[0],
            d: s[1],
            h: s[2],
            w: s[3],
            radius,
        };
        let (v, regime) = corr_forward(&geom, self.value(m));
        self.note_kinks(regime.into_iter());
        let k = window_offsets(radius).len();
        Ok(self.push(vec![k, geom.n, geom.h, geom.w], v, Op::LocalCorr { m, geom }))
    }

    /// Accumulates d(root)/d(node) into every node reachable from `root`.
    /// Calling again without [`Tape::zero_grads`] adds to existing grads.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(NebiError::NonScalarRoot(self.shape(root).to_vec()));
        }
        let mut adj: Vec<Option<Vec<T>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(vec![T::one()]);
        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            let node = &mut self.nodes[i];
            if node.grad.is_empty() {
                node.grad = g;
            } else {
                node.grad.iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b);
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], adj: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for (d, &gv) in slot(adj, &self.nodes, *a).iter_mut().zip(g) {
                    *d = *d + gv;
                }
                for (d, &gv) in slot(adj, &self.nodes, *b).iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                for ((d, &gv), &y) in slot(adj, &self.nodes, *a).iter_mut().zip(g).zip(bv) {
                    *d = *d + gv * y;
                }
                for ((d, &gv), &x) in slot(adj, &self.nodes, *b).iter_mut().zip(g).zip(av) {
                    *d = *d + gv * x;
                }
            }
            Op::Scale(a, s) => {
                for (d, &gv) in slot(adj, &self.nodes, *a).iter_mut().zip(g) {
                    *d = *d + gv * *s;
                }
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                for ((d, &gv), &x) in slot(adj, &self.nodes, *a).iter_mut().zip(g).zip(av) {
                    if x > T::zero() {
                        *d = *d + gv;
                    }
                }
            }
            Op::Sum(a) => {
                for d in slot(adj, &self.nodes, *a).iter_mut() {
                    *d = *d + g[0];
                }
            }
            Op::Reshape(a) => {
                for (d, &gv) in slot(adj, &self.nodes, *a).iter_mut().zip(g) {
                    *d = *d + gv;
                }
            }
            Op::Swap01 { x, dims } => {
                let back = swap01_values(g, [dims[1], dims[0], dims[2], dims[3]]);
                for (d, gv) in slot(adj, &self.nodes, *x).iter_mut().zip(back) {
                    *d = *d + gv;
                }
            }
            Op::Conv2d { x, w, b, geom, cols } => {
                let mut gx = adj[x.0].take().unwrap_or_else(|| vec![T::zero(); self.value(*x).len()]);
                let mut gw = adj[w.0].take().unwrap_or_else(|| vec![T::zero(); self.value(*w).len()]);
                let mut gb = adj[b.0].take().unwrap_or_else(|| vec![T::zero(); self.value(*b).len()]);
                conv2d_backward(geom, cols, self.value(*w), g, &mut gx, &mut gw, &mut gb);
                adj[x.0] = Some(gx);
                adj[w.0] = Some(gw);
                adj[b.0] = Some(gb);
            }
            Op::Conv3d { x, w, b, geom, cols } => {
                let mut gx = adj[x.0].take().unwrap_or_else(|| vec![T::zero(); self.value(*x).len()]);
                let mut gw = adj[w.0].take().unwrap_or_else(|| vec![T::zero(); self.value(*w).len()]);
                let mut gb = adj[b.0].take().unwrap_or_else(|| vec![T::zero(); self.value(*b).len()]);
                conv3d_backward(geom, cols, self.value(*w), g, &mut gx, &mut gw, &mut gb);
                adj[x.0] = Some(gx);
                adj[w.0] = Some(gw);
                adj[b.0] = Some(gb);
            }
            Op::Dense {
                x,
                w,
                b,
                rows,
                fan_in,
                fan_out,
            } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                {
                    let gx = slot(adj, &self.nodes, *x);
                    for r in 0..*rows {
                        for o in 0..*fan_out {
                            let gv = g[r * fan_out + o];
                            for k in 0..*fan_in {
                                gx[r * fan_in + k] = gx[r * fan_in + k] + gv * wv[o * fan_in + k];
                            }
                        }
                    }
                }
                {
                    let gw = slot(adj, &self.nodes, *w);
                    for r in 0..*rows {
                        for o in 0..*fan_out {
                            let gv = g[r * fan_out + o];
                            for k in 0..*fan_in {
                                gw[o * fan_in + k] = gw[o * fan_in + k] + gv * xv[r * fan_in + k];
                            }
                        }
                    }
                }
                let gb = slot(adj, &self.nodes, *b);
                for r in 0..*rows {
                    for o in 0..*fan_out {
                        gb[o] = gb[o] + g[r * fan_out + o];
                    }
                }
            }
            Op::Gap { x, rows, area } => {
                let inv = T::c(1.0 / *area as f64);
                let gx = slot(adj, &self.nodes, *x);
                for r in 0..*rows {
                    let gv = g[r] * inv;
                    for d in &mut gx[r * area..(r + 1) * area] {
                        *d = *d + gv;
                    }
                }
            }
            Op::Softmax { x, row } => {
                let y = &node.value;
                let gx = slot(adj, &self.nodes, *x);
                for ((yr, gr), dr) in y.chunks_exact(*row).zip(g.chunks_exact(*row)).zip(gx.chunks_exact_mut(*row)) {
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for ((d, &yv), &gv) in dr.iter_mut().zip(yr).zip(gr) {
                        *d = *d + yv * (gv - dot);
                    }
                }
            }
            Op::CrossEntropy { p, target, row } => {
                let rows = T::c((target.len() / row) as f64);
                let floor = T::c(PROB_FLOOR);
                let pv = self.value(*p);
                let gp = slot(adj, &self.nodes, *p);
                for ((d, &t), &pi) in gp.iter_mut().zip(target).zip(pv) {
                    if t != T::zero() && pi > floor {
                        *d = *d - g[0] * t / (pi * rows);
                    }
                }
            }
            Op::Cosine { a, b, rows, dim } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut ga = vec![T::zero(); av.len()];
                let mut gb = vec![T::zero(); bv.len()];
                for (r, &gr) in g.iter().enumerate().take(*rows) {
                    let sl = r * dim..(r + 1) * dim;
                    cosine_backward(&av[sl.clone()], &bv[sl.clone()], gr, &mut ga[sl.clone()], &mut gb[sl]);
                }
                for (d, v) in slot(adj, &self.nodes, *a).iter_mut().zip(ga) {
                    *d = *d + v;
                }
                for (d, v) in slot(adj, &self.nodes, *b).iter_mut().zip(gb) {
                    *d = *d + v;
                }
            }
            Op::LocalCorr { m, geom } => {
                let mut gm = adj[m.0].take().unwrap_or_else(|| vec![T::zero(); self.value(*m).len()]);
                corr_backward(geom, self.value(*m), g, &mut gm);
                adj[m.0] = Some(gm);
            }
        }
    }
}

/// Adjoint buffer of `v`, created zeroed on first use.
fn slot<'a, T: Scalar>(adj: &'a mut [Option<Vec<T>>], nodes: &[Node<T>], v: Var) -> &'a mut Vec<T> {
    let len = nodes[v.0].value.len();
    adj[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

fn swap01_values<T: Scalar>(v: &[T], dims: [usize; 4]) -> Vec<T> {
    let [a, b, h, w] = dims;
    let plane = h * w;
    let mut out = vec![T::zero(); v.len()];
    for i in 0..a {
        for j in 0..b {
            out[(j * a + i) * plane..][..plane].copy_from_slice(&v[(i * b + j) * plane..][..plane]);
        }
    }
    out
}

/// Gradient of `cos(a, b)` scaled by `g`, accumulated into `ga`, `gb`.
fn cosine_backward<T: Scalar>(a: &[T], b: &[T], g: T, ga: &mut [T], gb: &mut [T]) {
    let idx = 0..a.len();
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na2: T = a.iter().map(|&x| x * x).sum();
    let nb2: T = b.iter().map(|&y| y * y).sum();
    let (na, nb) = (na2.sqrt(), nb2.sqrt());
    let eps = T::c(COSINE_EPS);
    let den = cosine_denominator(na, nb, eps);
    if na * nb > eps {
        let s = dot / den;
        for i in idx.clone() {
            ga[i] = ga[i] + g * (b[i] / den - s * a[i] / na2);
            gb[i] = gb[i] + g * (a[i] / den - s * b[i] / nb2);
        }
    } else {
        for i in idx {
            ga[i] = ga[i] + g * b[i] / den;
            gb[i] = gb[i] + g * a[i] / den;
        }
    }
}

fn corr_forward<T: Scalar>(geom: &CorrGeom, m: &[T]) -> (Vec<T>, Vec<bool>) {
    let CorrGeom { n, d, h, w, radius } = *geom;
    let plane = h * w;
    let offsets = window_offsets(radius);
    let eps = T::c(COSINE_EPS);
    let at = |t: usize, c: usize, y: usize, x: usize| m[((t * d + c) * h + y) * w + x];
    let norms: Vec<T> = (0..n * plane)
        .map(|i| {
            let (t, p) = (i / plane, i % plane);
            (0..d).map(|c| at(t, c, p / w, p % w).powi(2)).sum::<T>().sqrt()
        })
        .collect();
    let mut out = vec![T::zero(); offsets.len() * n * plane];
    let mut regime = Vec::with_capacity(out.len());
    for (k, &o) in offsets.iter().enumerate() {
        for t in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let Some((t2, y2, x2)) = geom.partner(t, y, x, o) else {
                        regime.push(false);
                        continue;
                    };
                    let dot: T = (0..d).map(|c| at(t, c, y, x) * at(t2, c, y2, x2)).sum();
                    let (na, nb) = (norms[t * plane + y * w + x], norms[t2 * plane + y2 * w + x2]);
                    regime.push(na * nb > eps);
                    out[((k * n + t) * h + y) * w + x] = dot / cosine_denominator(na, nb, eps);
                }
            }
        }
    }
    (out, regime)
}

fn corr_backward<T: Scalar>(geom: &CorrGeom, m: &[T], g: &[T], gm: &mut [T]) {
    let CorrGeom { n, d, h, w, radius } = *geom;
    let plane = h * w;
    let offsets = window_offsets(radius);
    let mut a = vec![T::zero(); d];
    let mut b = vec![T::zero(); d];
    let mut ga = vec![T::zero(); d];
    let mut gb = vec![T::zero(); d];
    for (k, &o) in offsets.iter().enumerate() {
        for t in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let gv = g[((k * n + t) * h + y) * w + x];
                    if gv == T::zero() {
                        continue;
                    }
                    let Some((t2, y2, x2)) = geom.partner(t, y, x, o) else { continue };
                    for c in 0..d {
                        a[c] = m[(t * d + c) * plane + y * w + x];
                        b[c] = m[(t2 * d + c) * plane + y2 * w + x2];
                        ga[c] = T::zero();
                        gb[c] = T::zero();
                    }
                    cosine_backward(&a, &b, gv, &mut ga, &mut gb);
                    for c in 0..d {
                        let ia = (t * d + c) * plane + y * w + x;
                        let ib = (t2 * d + c) * plane + y2 * w + x2;
                        gm[ia] = gm[ia] + ga[c];
                        gm[ib] = gm[ib] + gb[c];
                    }
                }
            }
        }
    }
}
