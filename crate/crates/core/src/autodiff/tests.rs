use super::*;
use crate::error::{NebiError, Result};
use crate::rng::Rng;

const EPS: f64 = 1e-4;
const TOL: f64 = 1e-3;

fn randn(rng: &mut Rng, n: usize, scale: f64) -> Vec<f32> {
    (0..n).map(|_| (rng.gaussian() * scale) as f32).collect()
}

fn naive_conv2d(x: &[f64], xs: [usize; 4], w: &[f64], ws: [usize; 4], b: &[f64], stride: usize, pad: usize) -> Vec<f64> {
    let [bn, ci, h, wd] = xs;
    let [co, _, k, _] = ws;
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; bn * co * oh * ow];
    for n in 0..bn {
        for o in 0..co {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut s = b[o];
                    for c in 0..ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (y * stride + ky) as i64 - pad as i64;
                                let ix = (xx * stride + kx) as i64 - pad as i64;
                                if iy < 0 || ix < 0 || iy >= h as i64 || ix >= wd as i64 {
                                    continue;
                                }
                                s += w[((o * ci + c) * k + ky) * k + kx] * x[((n * ci + c) * h + iy as usize) * wd + ix as usize];
                            }
                        }
                    }
                    out[((n * co + o) * oh + y) * ow + xx] = s;
                }
            }
        }
    }
    out
}

fn naive_conv3d(x: &[f64], xs: [usize; 4], w: &[f64], ws: [usize; 5], b: &[f64]) -> Vec<f64> {
    let [ci, t, h, wd] = xs;
    let [co, _, kt, kh, kw] = ws;
    let mut out = vec![0.0; co * t * h * wd];
    for o in 0..co {
        for tt in 0..t {
            for y in 0..h {
                for xx in 0..wd {
                    let mut s = b[o];
                    for c in 0..ci {
                        for a in 0..kt {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let it = (tt as i64 + a as i64 - (kt / 2) as i64).rem_euclid(t as i64) as usize;
                                    let iy = y as i64 + ky as i64 - (kh / 2) as i64;
                                    let ix = xx as i64 + kx as i64 - (kw / 2) as i64;
                                    if iy < 0 || ix < 0 || iy >= h as i64 || ix >= wd as i64 {
                                        continue;
                                    }
                                    let wi = (((o * ci + c) * kt + a) * kh + ky) * kw + kx;
                                    s += w[wi] * x[((c * t + it) * h + iy as usize) * wd + ix as usize];
                                }
                            }
                        }
                    }
                    out[((o * t + tt) * h + y) * wd + xx] = s;
                }
            }
        }
    }
    out
}

fn f64s(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&a| a as f64).collect()
}

fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y).abs()).fold(0.0, f64::max)
}

#[test]
fn conv2d_unit_kernel_is_identity() {
    let mut rng = Rng::seed_from_u64(1);
    let mut t = Tape::<f32>::new();
    let xv = randn(&mut rng, 2 * 3 * 5 * 4, 1.0);
    let x = t.leaf(&[2, 3, 5, 4], xv.clone()).unwrap();
    let mut wv = vec![0.0; 9];
    for c in 0..3 {
        wv[c * 3 + c] = 1.0;
    }
    let w = t.leaf(&[3, 3, 1, 1], wv).unwrap();
    let b = t.leaf(&[3], vec![0.0; 3]).unwrap();
    let y = t.conv2d(x, w, b, 1, 0).unwrap();
    assert_eq!(t.value(y), &xv[..]);
}

#[test]
fn conv2d_box_keeps_constant_interior() {
    let mut t = Tape::<f32>::new();
    let x = t.leaf(&[1, 1, 6, 6], vec![0.7; 36]).unwrap();
    let w = t.leaf(&[1, 1, 3, 3], vec![1.0 / 9.0; 9]).unwrap();
    let b = t.leaf(&[1], vec![0.0]).unwrap();
    let y = t.conv2d(x, w, b, 1, 1).unwrap();
    for yy in 1..5 {
        for xx in 1..5 {
            assert!((t.value(y)[yy * 6 + xx] - 0.7).abs() < 1e-6);
        }
    }
}

#[test]
fn conv2d_matches_naive_reference() {
    for (seed, stride, pad) in [(0, 1, 1), (1, 2, 1), (2, 1, 0), (3, 2, 0)] {
        let mut rng = Rng::seed_from_u64(seed);
        let (xs, ws) = ([2, 2, 5, 5], [3, 2, 3, 3]);
        let xv = randn(&mut rng, 100, 1.0);
        let wv = randn(&mut rng, 54, 1.0);
        let bv = randn(&mut rng, 3, 1.0);
        let mut t = Tape::<f32>::new();
        let x = t.leaf(&xs, xv.clone()).unwrap();
        let w = t.leaf(&ws, wv.clone()).unwrap();
        let b = t.leaf(&[3], bv.clone()).unwrap();
        let y = t.conv2d(x, w, b, stride, pad).unwrap();
        let r = naive_conv2d(&f64s(&xv), xs, &f64s(&wv), ws, &f64s(&bv), stride, pad);
        assert_eq!(t.value(y).len(), r.len());
        assert!(max_abs_diff(t.value(y), &r) < 1e-5, "stride {stride} pad {pad}");
    }
}

#[test]
fn conv3d_identity_constant_and_reference() {
    let mut rng = Rng::seed_from_u64(5);
    let xs = [2, 3, 4, 5];
    let xv = randn(&mut rng, 120, 1.0);
    let mut t = Tape::<f32>::new();
    let x = t.leaf(&xs, xv.clone()).unwrap();
    let w = t.leaf(&[2, 2, 1, 1, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let b = t.leaf(&[2], vec![0.0; 2]).unwrap();
    let y = t.conv3d(x, w, b).unwrap();
    assert_eq!(t.value(y), &xv[..]);

    let c = t.leaf(&[1, 3, 5, 5], vec![0.4; 75]).unwrap();
    let wb = t.leaf(&[1, 1, 3, 3, 3], vec![1.0 / 27.0; 27]).unwrap();
    let bb = t.leaf(&[1], vec![0.0]).unwrap();
    let yc = t.conv3d(c, wb, bb).unwrap();
    for tt in 0..3 {
        for yy in 1..4 {
            for xx in 1..4 {
                // Time wraps, so every frame is interior in t.
                assert!((t.value(yc)[(tt * 5 + yy) * 5 + xx] - 0.4).abs() < 1e-6);
            }
        }
    }

    let ws = [3, 2, 3, 3, 3];
    let wv = randn(&mut rng, 162, 1.0);
    let bv = randn(&mut rng, 3, 1.0);
    let w = t.leaf(&ws, wv.clone()).unwrap();
    let b = t.leaf(&[3], bv.clone()).unwrap();
    let y = t.conv3d(x, w, b).unwrap();
    let r = naive_conv3d(&f64s(&xv), xs, &f64s(&wv), ws, &f64s(&bv));
    assert!(max_abs_diff(t.value(y), &r) < 1e-5);
}

#[test]
fn elementwise_primitives() {
    let mut t = Tape::<f32>::new();
    let x = t.leaf(&[4], vec![-2.0, -0.5, 0.5, 3.0]).unwrap();
    let r = t.relu(x);
    assert_eq!(t.value(r), &[0.0, 0.0, 0.5, 3.0]);
    let z = t.leaf(&[14], vec![0.3; 14]).unwrap();
    let p = t.softmax(z);
    assert!(t.value(p).iter().all(|&v| (v - 1.0 / 14.0).abs() < 1e-7));
    let mut onehot = vec![0.0; 14];
    onehot[5] = 1.0;
    let ce = t.cross_entropy(p, &onehot).unwrap();
    assert!((t.value(ce)[0] as f64 - 14f64.ln()).abs() < 1e-5);
    assert!((14f64.ln() - 2.6391).abs() < 1e-4);
}

#[test]
fn cosine_similarity_cases() {
    let mut t = Tape::<f64>::new();
    let a = t.leaf(&[4, 3], vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let b = t.leaf(&[4, 3], vec![1.0, 2.0, 3.0, -1.0, -2.0, -3.0, 0.0, 5.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
    let s = t.cosine_similarity(a, b).unwrap();
    let v = t.value(s);
    assert!((v[0] - 1.0).abs() < 1e-12);
    assert!((v[1] + 1.0).abs() < 1e-12);
    assert_eq!(v[2], 0.0);
    // all-zero vector
    assert_eq!(v[3], 0.0);
}

#[test]
fn backward_basics() {
    let mut t = Tape::<f32>::new();
    let xv = vec![0.5, -1.5, 2.0];
    let x = t.leaf(&[3], xv.clone()).unwrap();
    let s = t.sum(x);
    t.backward(s).unwrap();
    assert_eq!(t.grad(x), vec![1.0; 3]);
    // a second call accumulates
    t.backward(s).unwrap();
    assert_eq!(t.grad(x), vec![2.0; 3]);
    t.zero_grads();

    let sq = t.mul(x, x).unwrap();
    let ss = t.sum(sq);
    let half = t.scalar_mul(ss, 0.5);
    t.backward(half).unwrap();
    assert_eq!(t.grad(x), xv);

    assert!(matches!(t.backward(x), Err(NebiError::NonScalarRoot(_))));
    let p = t.softmax(x);
    assert!(matches!(t.cross_entropy(p, &[0.5, 0.5, 0.0]), Err(NebiError::NotOneHot)));
    assert!(matches!(t.cross_entropy(p, &[1.0, 1.0, 0.0]), Err(NebiError::NotOneHot)));
}

#[test]
fn softmax_rows_sum_to_one_and_stay_open() {
    // Logit spreads stay below ~15 so the smallest probability is far
    // above f32 resolution next to 1.
    let mut rng = Rng::seed_from_u64(9);
    for _ in 0..200 {
        let mut t = Tape::<f32>::new();
        let z = t.leaf(&[3, 6], randn(&mut rng, 18, 1.5)).unwrap();
        let p = t.softmax(z);
        for r in t.value(p).chunks(6) {
            assert!((r.iter().sum::<f32>() - 1.0).abs() < 1e-6);
            assert!(r.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}

struct Linear;
impl ScalarFn for Linear {
    fn eval<T: Scalar>(&self, t: &mut Tape<T>, x: &[Var]) -> Result<Var> {
        let s = t.scalar_mul(x[0], 3.0);
        Ok(t.sum(s))
    }
}

struct ReluSum;
impl ScalarFn for ReluSum {
    fn eval<T: Scalar>(&self, t: &mut Tape<T>, x: &[Var]) -> Result<Var> {
        let r = t.relu(x[0]);
        Ok(t.sum(r))
    }
}

#[test]
fn grad_check_linear_and_relu_kink() {
    let r = grad_check(&Linear, &[(vec![5], vec![0.1, -0.2, 0.3, 4.0, -5.0])], EPS, TOL).unwrap();
    assert!(r.max_rel_error < 1e-9, "{r:?}");
    assert_eq!(r.checked, 5);

    let r = grad_check(&ReluSum, &[(vec![4], vec![0.5, -0.5, 0.0, 2.0])], EPS, TOL).unwrap();
    assert!(r.passed());
    assert_eq!((r.checked, r.skipped), (3, 1));
}

#[test]
fn every_primitive_passes_grad_check_on_five_shapes() {
    let entries = primitive_suite(5, EPS, TOL).unwrap();
    assert_eq!(entries.len(), 5 * PRIMITIVES.len());
    for e in &entries {
        assert!(e.report.passed(), "{} seed {}: {:?}", e.name, e.seed, e.report);
        assert!(e.report.checked > 0, "{} seed {}: nothing checked", e.name, e.seed);
    }
}

#[test]
fn conv2d_grads_tight_against_central_differences() {
    // Linear in every input, so f32 gradients agree with f64 differences
    // to f32 precision.
    let mut rng = Rng::seed_from_u64(77);
    let inputs = vec![
        (vec![1, 2, 5, 5], randn(&mut rng, 50, 1.0)),
        (vec![2, 2, 3, 3], randn(&mut rng, 36, 1.0)),
        (vec![2], randn(&mut rng, 2, 1.0)),
    ];
    let r = grad_check(&Primitive { kind: "conv2d", proj_seed: 4 }, &inputs, EPS, 1e-5).unwrap();
    assert!(r.passed(), "{r:?}");
}

struct ConvStack;
impl ScalarFn for ConvStack {
    fn eval<T: Scalar>(&self, t: &mut Tape<T>, x: &[Var]) -> Result<Var> {
        let a = t.conv2d(x[0], x[1], x[2], 1, 1)?;
        let a = t.relu(a);
        let a = t.conv2d(a, x[3], x[4], 2, 1)?;
        let a = t.relu(a);
        let g = t.gap(a)?;
        let p = t.softmax(g);
        let n = t.value(p).len();
        let row = *t.shape(p).last().unwrap();
        let target: Vec<f64> = (0..n).map(|i| if i % row == 0 { 1.0 } else { 0.0 }).collect();
        t.cross_entropy(p, &target)
    }
}

#[test]
fn randomized_conv_stacks() {
    for seed in 0..20u64 {
        let mut rng = Rng::seed_from_u64(500 + seed);
        let inputs = vec![
            (vec![2, 2, 6, 6], randn(&mut rng, 144, 1.0)),
            (vec![3, 2, 3, 3], randn(&mut rng, 54, 0.5)),
            (vec![3], randn(&mut rng, 3, 0.1)),
            (vec![3, 3, 3, 3], randn(&mut rng, 81, 0.5)),
            (vec![3], randn(&mut rng, 3, 0.1)),
        ];
        let r = grad_check(&ConvStack, &inputs, EPS, TOL).unwrap();
        assert!(r.passed(), "seed {seed}: {r:?}");
    }
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = Rng::seed_from_u64(2);
    let mut store = ParamStore::new(vec![
        Param::he_normal("conv.weight", &[4, 2, 3, 3], &mut rng),
        Param::zeros("conv.bias", &[4]),
    ]);
    store.step = 17;
    let dir = tempfile::tempdir().unwrap();
    let mut extra = crate::kv::KvFile::new();
    extra.set("note", "x");
    save_params(&store, dir.path(), &extra).unwrap();
    let (back, kv) = load_params(dir.path()).unwrap();
    assert_eq!(kv.get_str("note").unwrap(), "x");
    assert_eq!(back.step, 17);
    for (a, b) in store.params.iter().zip(&back.params) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.shape, b.shape);
        assert!(a.value.iter().zip(&b.value).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
