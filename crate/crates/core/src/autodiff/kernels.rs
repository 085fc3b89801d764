//! Loop kernels shared by forward and backward passes.

use super::tape::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dGeom {
    pub batch: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2dGeom {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.k) / self.stride + 1
    }
    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.k) / self.stride + 1
    }
}

/// Output columns `ox` whose input column `ox * stride + kx - pad` lies in
/// `[0, w)`.
#[inline]
fn valid_range(k_off: usize, pad: usize, stride: usize, n_in: usize, n_out: usize) -> (usize, usize) {
    // ix = ox*s + k_off - pad >= 0  <=>  ox >= ceil((pad - k_off) / s)
    let lo = if pad > k_off { (pad - k_off).div_ceil(stride) } else { 0 };
    // ix <= n_in - 1  <=>  ox <= (n_in - 1 + pad - k_off) / s
    let top = n_in - 1 + pad;
    if top < k_off {
        return (0, 0);
    }
    let hi = ((top - k_off) / stride + 1).min(n_out);
    (lo.min(hi), hi)
}

/// For kernel tap `kidx` and output position `j`, the input offset within
/// one channel plane; padding taps point one past the plane.
fn conv2d_taps(g: &Conv2dGeom) -> Vec<usize> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let mut tab = vec![g.h * g.w; g.k * g.k * oh * ow];
    for ky in 0..g.k {
        let (y0, y1) = valid_range(ky, g.pad, g.stride, g.h, oh);
        for kx in 0..g.k {
            let (x0, x1) = valid_range(kx, g.pad, g.stride, g.w, ow);
            let t = &mut tab[(ky * g.k + kx) * oh * ow..][..oh * ow];
            for oy in y0..y1 {
                let iy = oy * g.stride + ky - g.pad;
                for ox in x0..x1 {
                    t[oy * ow + ox] = iy * g.w + ox * g.stride + kx - g.pad;
                }
            }
        }
    }
    tab
}

/// Patch matrix `[c_in * taps, positions]` of one sample. Padding taps
/// read a zero appended after each plane.
fn im2col<T: Scalar>(x: &[T], c_in: usize, plane: usize, taps: &[usize]) -> Vec<T> {
    let mut ext = vec![T::zero(); plane + 1];
    let mut col = Vec::with_capacity(c_in * taps.len());
    for ci in 0..c_in {
        ext[..plane].copy_from_slice(&x[ci * plane..(ci + 1) * plane]);
        col.extend(taps.iter().map(|&src| ext[src]));
    }
    col
}

/// Scatter-adds a patch-matrix gradient back onto the input planes.
fn col2im<T: Scalar>(gcol: &[T], gx: &mut [T], c_in: usize, plane: usize, taps: &[usize]) {
    let per_c = taps.len();
    let mut ext = vec![T::zero(); plane + 1];
    for ci in 0..c_in {
        let gp = &mut gx[ci * plane..(ci + 1) * plane];
        ext[..plane].copy_from_slice(gp);
        for (&g, &dst) in gcol[ci * per_c..(ci + 1) * per_c].iter().zip(taps) {
            ext[dst] = ext[dst] + g;
        }
        gp.copy_from_slice(&ext[..plane]);
    }
}

#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv = *yv + a * xv;
    }
}

/// Dot product with eight interleaved partial sums, combined in a fixed
/// order.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            lanes[l] = lanes[l] + x[l] * y[l];
        }
    }
    let mut s = lanes.iter().fold(T::zero(), |acc, &v| acc + v);
    for (&x, &y) in ra.iter().zip(rb) {
        s = s + x * y;
    }
    s
}

/// `out[co] = b[co] + sum_p w[co, p] * col[p]` over rows of length
/// `positions`. Each patch row is read once while the outputs stay cached.
fn patch_forward<T: Scalar>(col: &[T], w: &[T], b: &[T], out: &mut [T], positions: usize) {
    let patch = col.len() / positions;
    for (co, o) in out.chunks_exact_mut(positions).enumerate() {
        o.iter_mut().for_each(|v| *v = b[co]);
    }
    for (p, cp) in col.chunks_exact(positions).enumerate() {
        for (co, o) in out.chunks_exact_mut(positions).enumerate() {
            axpy(o, w[co * patch + p], cp);
        }
    }
}

/// Weight and bias gradients, and the patch-matrix gradient.
fn patch_backward<T: Scalar>(col: &[T], w: &[T], gout: &[T], gw: &mut [T], gb: &mut [T], positions: usize) -> Vec<T> {
    let patch = col.len() / positions;
    for (co, go) in gout.chunks_exact(positions).enumerate() {
        gb[co] = gb[co] + go.iter().fold(T::zero(), |a, &v| a + v);
    }
    let mut gcol = vec![T::zero(); col.len()];
    for (p, (cp, gp)) in col.chunks_exact(positions).zip(gcol.chunks_exact_mut(positions)).enumerate() {
        for (co, go) in gout.chunks_exact(positions).enumerate() {
            let wi = co * patch + p;
            gw[wi] = gw[wi] + dot(go, cp);
            axpy(gp, w[wi], go);
        }
    }
    gcol
}

/// Output and the per-sample patch matrices, which the backward pass
/// reuses.
pub fn conv2d_forward<T: Scalar>(g: &Conv2dGeom, x: &[T], w: &[T], b: &[T]) -> (Vec<T>, Vec<T>) {
    let positions = g.out_h() * g.out_w();
    let plane = g.h * g.w;
    let taps = conv2d_taps(g);
    let mut out = vec![T::zero(); g.batch * g.c_out * positions];
    let mut cols = Vec::with_capacity(g.batch * g.c_in * taps.len());
    for n in 0..g.batch {
        let col = im2col(&x[n * g.c_in * plane..][..g.c_in * plane], g.c_in, plane, &taps);
        patch_forward(&col, w, b, &mut out[n * g.c_out * positions..][..g.c_out * positions], positions);
        cols.extend(col);
    }
    (out, cols)
}

/// Accumulates input, weight and bias gradients for upstream `gout`, given
/// the forward pass's patch matrices.
pub fn conv2d_backward<T: Scalar>(
    g: &Conv2dGeom,
    cols: &[T],
    w: &[T],
    gout: &[T],
    gx: &mut [T],
    gw: &mut [T],
    gb: &mut [T],
) {
    let positions = g.out_h() * g.out_w();
    let plane = g.h * g.w;
    let taps = conv2d_taps(g);
    let per_n = g.c_in * taps.len();
    for n in 0..g.batch {
        let go = &gout[n * g.c_out * positions..][..g.c_out * positions];
        let gcol = patch_backward(&cols[n * per_n..(n + 1) * per_n], w, go, gw, gb, positions);
        col2im(&gcol, &mut gx[n * g.c_in * plane..(n + 1) * g.c_in * plane], g.c_in, plane, &taps);
    }
}

/// Stride-1 3D convolution over `[C, T, H, W]` with "same" output size:
/// zero padding on H and W, circular indexing on T.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3dGeom {
    pub c_in: usize,
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kt: usize,
    pub kh: usize,
    pub kw: usize,
}

impl Conv3dGeom {
    fn k_len(&self) -> usize {
        self.kt * self.kh * self.kw
    }
    #[inline]
    fn src_t(&self, ot: usize, kt: usize) -> usize {
        (ot as isize + kt as isize - (self.kt / 2) as isize).rem_euclid(self.t as isize) as usize
    }
}

fn conv3d_taps(g: &Conv3dGeom) -> Vec<usize> {
    let plane = g.h * g.w;
    let vol = g.t * plane;
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    let mut tab = vec![vol; g.k_len() * vol];
    for kt in 0..g.kt {
        for ky in 0..g.kh {
            let (y0, y1) = valid_range(ky, ph, 1, g.h, g.h);
            for kx in 0..g.kw {
                let (x0, x1) = valid_range(kx, pw, 1, g.w, g.w);
                let t = &mut tab[((kt * g.kh + ky) * g.kw + kx) * vol..][..vol];
                for ot in 0..g.t {
                    let it = g.src_t(ot, kt);
                    for oy in y0..y1 {
                        for ox in x0..x1 {
                            t[ot * plane + oy * g.w + ox] = it * plane + (oy + ky - ph) * g.w + ox + kx - pw;
                        }
                    }
                }
            }
        }
    }
    tab
}

pub fn conv3d_forward<T: Scalar>(g: &Conv3dGeom, x: &[T], w: &[T], b: &[T]) -> (Vec<T>, Vec<T>) {
    let vol = g.t * g.h * g.w;
    let taps = conv3d_taps(g);
    let col = im2col(x, g.c_in, vol, &taps);
    let mut out = vec![T::zero(); g.c_out * vol];
    patch_forward(&col, w, b, &mut out, vol);
    (out, col)
}

pub fn conv3d_backward<T: Scalar>(
    g: &Conv3dGeom,
    col: &[T],
    w: &[T],
    gout: &[T],
    gx: &mut [T],
    gw: &mut [T],
    gb: &mut [T],
) {
    let vol = g.t * g.h * g.w;
    let taps = conv3d_taps(g);
    let gcol = patch_backward(col, w, gout, gw, gb, vol);
    col2im(&gcol, gx, g.c_in, vol, &taps);
}

/// Offsets of a local correlation window `[-r, r]` per axis, in channel
/// order (temporal slowest, then row, then column).
pub fn window_offsets(radius: [usize; 3]) -> Vec<[isize; 3]> {
    let r = radius.map(|v| v as isize);
    let mut out = Vec::new();
    for u in -r[0]..=r[0] {
        for v in -r[1]..=r[1] {
            for w in -r[2]..=r[2] {
                out.push([u, v, w]);
            }
        }
    }
    out
}

/// Geometry of a correlation volume over features `[N, D, H, W]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrGeom {
    pub n: usize,
    pub d: usize,
    pub h: usize,
    pub w: usize,
    pub radius: [usize; 3],
}

impl CorrGeom {
    /// Partner location of `(t, y, x)` at offset `o`, or `None` when it
    /// falls outside the spatial grid. Time wraps around.
    #[inline]
    pub fn partner(&self, t: usize, y: usize, x: usize, o: [isize; 3]) -> Option<(usize, usize, usize)> {
        let ty = (t as isize + o[0]).rem_euclid(self.n as isize) as usize;
        let yy = y as isize + o[1];
        let xx = x as isize + o[2];
        if yy < 0 || xx < 0 || yy >= self.h as isize || xx >= self.w as isize {
            return None;
        }
        Some((ty, yy as usize, xx as usize))
    }
}

/// Cosine similarity with denominator `max(|a| |b|, eps)`: all-zero vectors
/// give 0.
#[inline]
pub fn cosine_denominator<T: Scalar>(na: T, nb: T, eps: T) -> T {
    let p = na * nb;
    if p > eps {
        p
    } else {
        eps
    }
}
