//! im2col lowering and GEMM plumbing shared by convolution and correlation.

/// Output extent of a strided, zero-padded window sweep.
pub(crate) fn out_extent(n: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = n + 2 * pad;
    if padded < k || stride == 0 {
        return None;
    }
    Some((padded - k) / stride + 1)
}

pub(crate) struct Geometry {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl Geometry {
    /// Columns per lowered row: `kH * kW * C`.
    pub fn k(&self) -> usize {
        self.kh * self.kw * self.c
    }

    pub fn positions(&self) -> usize {
        self.oh * self.ow
    }
}

/// Lowers an `H x W x C` input into a `(oh*ow) x (kh*kw*C)` row-major matrix.
pub(crate) fn im2col(input: &[f32], g: &Geometry) -> Vec<f32> {
    let k = g.k();
    let mut cols = vec![0.0f32; g.positions() * k];
    let row_len = g.kw * g.c;
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let dst_row = (oy * g.ow + ox) * k;
            for ky in 0..g.kh {
                let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                if iy < 0 || iy >= g.h as isize {
                    continue;
                }
                let dst = dst_row + ky * row_len;
                let ix0 = (ox * g.stride) as isize - g.pad as isize;
                if ix0 >= 0 && ix0 as usize + g.kw <= g.w {
                    let src = (iy as usize * g.w + ix0 as usize) * g.c;
                    cols[dst..dst + row_len].copy_from_slice(&input[src..src + row_len]);
                } else {
                    for kx in 0..g.kw {
                        let ix = ix0 + kx as isize;
                        if ix < 0 || ix >= g.w as isize {
                            continue;
                        }
                        let src = (iy as usize * g.w + ix as usize) * g.c;
                        let d = dst + kx * g.c;
                        cols[d..d + g.c].copy_from_slice(&input[src..src + g.c]);
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds a lowered gradient matrix back onto an `H x W x C` gradient.
pub(crate) fn col2im(cols: &[f32], g: &Geometry) -> Vec<f32> {
    let k = g.k();
    let mut out = vec![0.0f32; g.h * g.w * g.c];
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let src_row = (oy * g.ow + ox) * k;
            for ky in 0..g.kh {
                let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                if iy < 0 || iy >= g.h as isize {
                    continue;
                }
                for kx in 0..g.kw {
                    let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                    if ix < 0 || ix >= g.w as isize {
                        continue;
                    }
                    let dst = (iy as usize * g.w + ix as usize) * g.c;
                    let src = src_row + (ky * g.kw + kx) * g.c;
                    for c in 0..g.c {
                        out[dst + c] += cols[src + c];
                    }
                }
            }
        }
    }
    out
}

/// `c = a(m x k) * b(k x n) + beta * c`, all row-major.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], beta: f32, c: &mut [f32]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: slice lengths checked above; strides describe row-major layouts.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a^T * b + beta * c` where `a` is stored `(k x m)` row-major.
pub(crate) fn gemm_at_b(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    b: &[f32],
    beta: f32,
    c: &mut [f32],
) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: `a` viewed transposed via swapped strides.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a * b^T + beta * c` where `b` is stored `(n x k)` row-major.
pub(crate) fn gemm_a_bt(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    b: &[f32],
    beta: f32,
    c: &mut [f32],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: `b` viewed transposed via swapped strides.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
