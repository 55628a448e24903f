//! Image resampling. Both resizers use corner-aligned sampling: output
//! pixel `i` of `n_out` maps to source coordinate `i * (n_in - 1) / (n_out - 1)`,
//! so the first and last pixels of input and output coincide.

use super::Tensor;
use crate::error::{Error, Result};

fn source_coord(i: usize, n_in: usize, n_out: usize) -> f64 {
    if n_out == 1 {
        (n_in as f64 - 1.0) / 2.0
    } else {
        i as f64 * (n_in as f64 - 1.0) / (n_out as f64 - 1.0)
    }
}

pub fn bilinear_resize(image: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w, c) = image.dims3()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::contract(
            "bilinear_resize: output extent must be >= 1",
        ));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(image.clone());
    }
    let src = image.data();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        let sy = source_coord(oy, h, out_h);
        let y0 = (sy.floor() as usize).min(h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fy = (sy - y0 as f64) as f32;
        for ox in 0..out_w {
            let sx = source_coord(ox, w, out_w);
            let x0 = (sx.floor() as usize).min(w - 1);
            let x1 = (x0 + 1).min(w - 1);
            let fx = (sx - x0 as f64) as f32;
            for ch in 0..c {
                let p00 = src[(y0 * w + x0) * c + ch];
                let p01 = src[(y0 * w + x1) * c + ch];
                let p10 = src[(y1 * w + x0) * c + ch];
                let p11 = src[(y1 * w + x1) * c + ch];
                let top = p00 + (p01 - p00) * fx;
                let bot = p10 + (p11 - p10) * fx;
                out.push(top + (bot - top) * fy);
            }
        }
    }
    Tensor::new(vec![out_h, out_w, c], out)
}

/// Keys cubic convolution kernel, `a = -0.5`.
fn cubic_weight(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

fn cubic_taps(coord: f64, n: usize) -> [(usize, f64); 4] {
    let base = coord.floor();
    let frac = coord - base;
    let mut taps = [(0usize, 0.0f64); 4];
    for (k, tap) in taps.iter_mut().enumerate() {
        let offset = k as isize - 1;
        let idx = (base as isize + offset).clamp(0, n as isize - 1) as usize;
        *tap = (idx, cubic_weight(frac - offset as f64));
    }
    taps
}

/// Bicubic upsampling of every channel by an integer `factor`, producing
/// `(H-1)*factor+1` rows so that every source sample lands on an output pixel.
pub fn bicubic_upsample(map: &Tensor, factor: usize) -> Result<Tensor> {
    let (h, w, c) = map.dims3()?;
    if factor == 0 {
        return Err(Error::contract("bicubic_upsample: factor must be >= 1"));
    }
    let (oh, ow) = ((h - 1) * factor + 1, (w - 1) * factor + 1);
    let src = map.data();
    // Separable: rows first into a (h x ow) buffer, then columns.
    let col_taps: Vec<_> = (0..ow)
        .map(|ox| cubic_taps(ox as f64 / factor as f64, w))
        .collect();
    let mut tmp = vec![0.0f64; h * ow * c];
    for y in 0..h {
        for (ox, taps) in col_taps.iter().enumerate() {
            for ch in 0..c {
                tmp[(y * ow + ox) * c + ch] = taps
                    .iter()
                    .map(|&(x, wt)| wt * src[(y * w + x) * c + ch] as f64)
                    .sum();
            }
        }
    }
    let mut out = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        let taps = cubic_taps(oy as f64 / factor as f64, h);
        for ox in 0..ow {
            for ch in 0..c {
                let v: f64 = taps
                    .iter()
                    .map(|&(y, wt)| wt * tmp[(y * ow + ox) * c + ch])
                    .sum();
                out.push(v as f32);
            }
        }
    }
    Tensor::new(vec![oh, ow, c], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_constant() {
        let img = Tensor::from_fn3(4, 5, 3, |y, x, c| (y * 7 + x * 3 + c) as f32 * 0.1);
        assert_eq!(bilinear_resize(&img, 4, 5).unwrap(), img);
        let k = Tensor::full(&[3, 4, 2], 0.25);
        let big = bilinear_resize(&k, 9, 11).unwrap();
        assert!(big.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
    }

    #[test]
    fn ramp_2x2_to_3x3_hand_values() {
        // [[0, 1], [2, 3]] -> midpoints are plain averages
        let img = Tensor::new(vec![2, 2, 1], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let out = bilinear_resize(&img, 3, 3).unwrap();
        let expected = [0.0, 0.5, 1.0, 1.0, 1.5, 2.0, 2.0, 2.5, 3.0];
        for (a, b) in out.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn bicubic_hits_source_samples() {
        let m = Tensor::from_fn3(5, 5, 1, |y, x, _| ((y * 5 + x) as f32).sin());
        let up = bicubic_upsample(&m, 4).unwrap();
        assert_eq!(up.shape(), &[17, 17, 1]);
        for y in 0..5 {
            for x in 0..5 {
                assert!((up.at3(y * 4, x * 4, 0) - m.at3(y, x, 0)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bicubic_preserves_linear_ramp() {
        let m = Tensor::from_fn3(4, 4, 1, |y, x, _| 2.0 * y as f32 + x as f32);
        let up = bicubic_upsample(&m, 8).unwrap();
        // interior samples of a linear ramp are reproduced exactly by Keys' kernel
        for oy in 8..=16 {
            for ox in 8..=16 {
                let exp = 2.0 * oy as f32 / 8.0 + ox as f32 / 8.0;
                assert!((up.at3(oy, ox, 0) - exp).abs() < 1e-5);
            }
        }
    }
}
