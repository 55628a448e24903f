//! Brute-force f64 references and finite-difference helpers shared by the
//! integration tests.
#![allow(dead_code)]

pub mod grad;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twinbranch::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(r: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// `||a - b|| / max(||b||, 1e-12)`.
pub fn rel_err(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-12)
}

pub fn to_f64(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

/// Direct nested-loop convolution, `H x W x C` input, `kh x kw x ic x oc`
/// weights, zero padding.
pub fn conv_ref(
    x: &Tensor,
    w: &Tensor,
    b: &[f32],
    stride: usize,
    pad: usize,
) -> (Vec<usize>, Vec<f64>) {
    let (h, wd, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (kh, kw, ic, oc) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    assert_eq!(ic, c);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0f64; oh * ow * oc];
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..oc {
                let mut s = b[o] as f64;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                            continue;
                        }
                        for ci in 0..c {
                            let xv = x.data()[(iy as usize * wd + ix as usize) * c + ci] as f64;
                            let wv = w.data()[((ky * kw + kx) * ic + ci) * oc + o] as f64;
                            s += xv * wv;
                        }
                    }
                }
                out[(oy * ow + ox) * oc + o] = s;
            }
        }
    }
    (vec![oh, ow, oc], out)
}

pub fn pool_ref(x: &Tensor, k: usize, stride: usize) -> (Vec<usize>, Vec<f64>) {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let mut out = vec![f64::NEG_INFINITY; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                for ky in 0..k {
                    for kx in 0..k {
                        let v =
                            x.data()[((oy * stride + ky) * w + ox * stride + kx) * c + ch] as f64;
                        let o = &mut out[(oy * ow + ox) * c + ch];
                        *o = o.max(v);
                    }
                }
            }
        }
    }
    (vec![oh, ow, c], out)
}

/// `out[i, j] = sum_{y, x, c} t[y, x, c] * s[i + y, j + x, c]`.
pub fn corr_ref(t: &Tensor, s: &Tensor) -> (Vec<usize>, Vec<f64>) {
    let (th, tw, c) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let (sh, sw) = (s.shape()[0], s.shape()[1]);
    let (oh, ow) = (sh - th + 1, sw - tw + 1);
    let mut out = vec![0.0f64; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            let mut acc = 0.0;
            for y in 0..th {
                for x in 0..tw {
                    for ch in 0..c {
                        acc += t.data()[(y * tw + x) * c + ch] as f64
                            * s.data()[((i + y) * sw + j + x) * c + ch] as f64;
                    }
                }
            }
            out[i * ow + j] = acc;
        }
    }
    (vec![oh, ow, 1], out)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_grad(x: &[f32], eps: f32, mut f: impl FnMut(&[f32]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = f(&p);
            p[i] = orig - eps;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * eps as f64)
        })
        .collect()
}

/// `sum_i r_i * y_i` in f64: a generic scalar probe of a tensor-valued op.
pub fn probe(y: &Tensor, r: &[f32]) -> f64 {
    y.data()
        .iter()
        .zip(r)
        .map(|(&a, &b)| a as f64 * b as f64)
        .sum()
}
