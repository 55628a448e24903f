//! A linear recording tape for reverse-mode gradients.
//!
//! Every forward call appends one node holding its output and whatever it
//! needs for the backward pass. [`GradTape::backward`] then walks the nodes
//! once, newest first. Leaves created with `requires_grad = false` (input
//! images, frozen feature maps) never receive or propagate gradients, so
//! frozen sub-networks that run outside the tape cost nothing here.

use super::gemm::{self, Geometry};
use super::ops::{self, conv_geometry, corr_geometry};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`GradTape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// A half-open `[start, start + len)` span on one spatial axis.
pub type Span = (usize, usize);

enum Op {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        geom: Geometry,
        cols: Vec<f32>,
    },
    Relu(Var),
    Sigmoid(Var),
    MaxPool {
        input: Var,
        argmax: Vec<u32>,
    },
    CrossCorr {
        template: Var,
        search: Var,
        geom: Geometry,
        cols: Vec<f32>,
    },
    ChannelScale {
        features: Var,
        weights: Var,
    },
    Crop {
        input: Var,
        top: usize,
        left: usize,
    },
    GridMax {
        input: Var,
        argmax: Vec<u32>,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Affine {
        input: Var,
        scale: f32,
    },
    Add(Var, Var),
    Reshape(Var),
    Clamp {
        input: Var,
        lo: f32,
        hi: f32,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Gradients indexed by [`Var`]. `None` for values that did not need one.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    visited: usize,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }

    /// Number of recorded nodes the backward pass processed.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Count of leaves that will receive gradients.
    pub fn trainable_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.op, Op::Leaf) && n.requires_grad)
            .count()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let w = self.value(weight);
        let ws = w.shape();
        if ws.len() != 4 {
            return Err(Error::contract(format!(
                "conv weights must be rank 4, got {ws:?}"
            )));
        }
        let dims = (ws[0], ws[1], ws[2], ws[3]);
        if self.value(bias).numel() != dims.3 {
            return Err(Error::contract("conv bias length does not match outC"));
        }
        let geom = conv_geometry(self.value(input).dims3()?, dims, stride, pad)?;
        let (out, cols) = ops::conv_lowered(self.value(input), w, self.value(bias).data(), &geom);
        let rg = self.needs(input) || self.needs(weight) || self.needs(bias);
        let cols = if self.needs(weight) { cols } else { Vec::new() };
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
                cols,
            },
            rg,
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = ops::relu(self.value(x));
        let rg = self.needs(x);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = ops::sigmoid(self.value(x));
        let rg = self.needs(x);
        self.push(out, Op::Sigmoid(x), rg)
    }

    pub fn max_pool(
        &mut self,
        x: Var,
        window: (usize, usize),
        stride: (usize, usize),
    ) -> Result<Var> {
        let (out, argmax) = ops::max_pool_indexed(self.value(x), window, stride)?;
        let rg = self.needs(x);
        Ok(self.push(out, Op::MaxPool { input: x, argmax }, rg))
    }

    pub fn cross_correlate(&mut self, template: Var, search: Var) -> Result<Var> {
        let geom = corr_geometry(self.value(template), self.value(search))?;
        let cols = gemm::im2col(self.value(search).data(), &geom);
        let mut out = vec![0.0f32; geom.positions()];
        gemm::gemm(
            geom.positions(),
            geom.k(),
            1,
            &cols,
            self.value(template).data(),
            0.0,
            &mut out,
        );
        let out = Tensor::new(vec![geom.oh, geom.ow, 1], out)?;
        let rg = self.needs(template) || self.needs(search);
        Ok(self.push(
            out,
            Op::CrossCorr {
                template,
                search,
                geom,
                cols,
            },
            rg,
        ))
    }

    pub fn channel_scale(&mut self, features: Var, weights: Var) -> Result<Var> {
        let out = ops::channel_scale(self.value(features), self.value(weights).data())?;
        let rg = self.needs(features) || self.needs(weights);
        Ok(self.push(out, Op::ChannelScale { features, weights }, rg))
    }

    pub fn crop(
        &mut self,
        x: Var,
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    ) -> Result<Var> {
        let out = ops::crop(self.value(x), top, left, height, width)?;
        let rg = self.needs(x);
        Ok(self.push(
            out,
            Op::Crop {
                input: x,
                top,
                left,
            },
            rg,
        ))
    }

    /// Per-channel max over a grid of rectangular cells. Output is
    /// `C x (rows * cols)`, cells in row-major order.
    pub fn grid_max(&mut self, x: Var, rows: &[Span], cols: &[Span]) -> Result<Var> {
        let (out, argmax) = grid_max_indexed(self.value(x), rows, cols)?;
        let rg = self.needs(x);
        Ok(self.push(out, Op::GridMax { input: x, argmax }, rg))
    }

    /// `input (N x in) * weight (in x out) + bias`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let out = dense_forward(self.value(input), self.value(weight), self.value(bias))?;
        let rg = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(
            out,
            Op::Dense {
                input,
                weight,
                bias,
            },
            rg,
        ))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f32, shift: f32) -> Var {
        let out = self.value(x).map(|v| scale * v + shift);
        let rg = self.needs(x);
        self.push(out, Op::Affine { input: x, scale }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Clips into `[lo, hi]`; clipped elements pass no gradient.
    pub fn clamp(&mut self, x: Var, lo: f32, hi: f32) -> Var {
        let out = self.value(x).map(|v| v.clamp(lo, hi));
        let rg = self.needs(x);
        self.push(out, Op::Clamp { input: x, lo, hi }, rg)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        let rg = self.needs(x);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    /// Propagates `seed` (the gradient of some scalar objective with respect
    /// to `output`) back to every recorded value that requires a gradient.
    pub fn backward(&self, output: Var, seed: Tensor) -> Result<Gradients> {
        if output.0 >= self.nodes.len() {
            return Err(Error::contract(
                "backward called on a value that was never recorded",
            ));
        }
        seed.check_same_shape(self.value(output), "backward seed")?;
        let mut grads: Vec<Option<Tensor>> = (0..=output.0).map(|_| None).collect();
        let mut visited = 0;
        if self.needs(output) {
            grads[output.0] = Some(seed);
        }
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            visited += 1;
            self.propagate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, visited })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) -> Result<()> {
        if !self.needs(v) {
            return Ok(());
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => {
                *slot = Some(g);
                Ok(())
            }
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
                cols,
            } => {
                let w = self.value(*weight);
                let outc = w.shape()[3];
                let p = geom.positions();
                let k = geom.k();
                if self.needs(*weight) {
                    let mut gw = vec![0.0f32; k * outc];
                    gemm::gemm_at_b(k, p, outc, cols, g.data(), 0.0, &mut gw);
                    self.accumulate(grads, *weight, Tensor::new(w.shape().to_vec(), gw)?)?;
                }
                if self.needs(*bias) {
                    let mut gb = vec![0.0f32; outc];
                    for row in g.data().chunks_exact(outc) {
                        for (a, b) in gb.iter_mut().zip(row) {
                            *a += *b;
                        }
                    }
                    self.accumulate(grads, *bias, Tensor::vector(gb))?;
                }
                if self.needs(*input) {
                    let mut gcols = vec![0.0f32; p * k];
                    gemm::gemm_a_bt(p, outc, k, g.data(), w.data(), 0.0, &mut gcols);
                    let gi = gemm::col2im(&gcols, geom);
                    self.accumulate(
                        grads,
                        *input,
                        Tensor::new(vec![geom.h, geom.w, geom.c], gi)?,
                    )?;
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let mut gi = g.clone();
                for (d, &v) in gi.data_mut().iter_mut().zip(xv.data()) {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                }
                self.accumulate(grads, *x, gi)?;
            }
            Op::Sigmoid(x) => {
                let mut gi = g.clone();
                for (d, &y) in gi.data_mut().iter_mut().zip(node.value.data()) {
                    *d *= y * (1.0 - y);
                }
                self.accumulate(grads, *x, gi)?;
            }
            Op::MaxPool { input, argmax } | Op::GridMax { input, argmax } => {
                let mut gi = Tensor::zeros(self.value(*input).shape());
                let d = gi.data_mut();
                for (&src, &gv) in argmax.iter().zip(g.data()) {
                    d[src as usize] += gv;
                }
                self.accumulate(grads, *input, gi)?;
            }
            Op::CrossCorr {
                template,
                search,
                geom,
                cols,
            } => {
                let t = self.value(*template);
                let p = geom.positions();
                let k = geom.k();
                if self.needs(*template) {
                    let mut gt = vec![0.0f32; k];
                    gemm::gemm_at_b(k, p, 1, cols, g.data(), 0.0, &mut gt);
                    self.accumulate(grads, *template, Tensor::new(t.shape().to_vec(), gt)?)?;
                }
                if self.needs(*search) {
                    let mut gcols = vec![0.0f32; p * k];
                    gemm::gemm(p, 1, k, g.data(), t.data(), 0.0, &mut gcols);
                    let gs = gemm::col2im(&gcols, geom);
                    self.accumulate(
                        grads,
                        *search,
                        Tensor::new(vec![geom.h, geom.w, geom.c], gs)?,
                    )?;
                }
            }
            Op::ChannelScale { features, weights } => {
                let f = self.value(*features);
                let w = self.value(*weights).data();
                let c = w.len();
                if self.needs(*features) {
                    self.accumulate(grads, *features, ops::channel_scale(g, w)?)?;
                }
                if self.needs(*weights) {
                    let mut gw = vec![0.0f32; c];
                    for (gp, fp) in g.data().chunks_exact(c).zip(f.data().chunks_exact(c)) {
                        for ch in 0..c {
                            gw[ch] += gp[ch] * fp[ch];
                        }
                    }
                    self.accumulate(grads, *weights, Tensor::vector(gw))?;
                }
            }
            Op::Crop { input, top, left } => {
                let (h, w, c) = self.value(*input).dims3()?;
                let (ch, cw, _) = g.dims3()?;
                let mut gi = Tensor::zeros(&[h, w, c]);
                let d = gi.data_mut();
                for y in 0..ch {
                    let dst = ((top + y) * w + left) * c;
                    let src = y * cw * c;
                    d[dst..dst + cw * c].copy_from_slice(&g.data()[src..src + cw * c]);
                }
                self.accumulate(grads, *input, gi)?;
            }
            Op::Dense {
                input,
                weight,
                bias,
            } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (n, fan_in) = (x.shape()[0], x.shape()[1]);
                let fan_out = w.shape()[1];
                if self.needs(*weight) {
                    let mut gw = vec![0.0f32; fan_in * fan_out];
                    gemm::gemm_at_b(fan_in, n, fan_out, x.data(), g.data(), 0.0, &mut gw);
                    self.accumulate(grads, *weight, Tensor::new(w.shape().to_vec(), gw)?)?;
                }
                if self.needs(*bias) {
                    let mut gb = vec![0.0f32; fan_out];
                    for row in g.data().chunks_exact(fan_out) {
                        for (a, b) in gb.iter_mut().zip(row) {
                            *a += *b;
                        }
                    }
                    self.accumulate(grads, *bias, Tensor::vector(gb))?;
                }
                if self.needs(*input) {
                    let mut gx = vec![0.0f32; n * fan_in];
                    gemm::gemm_a_bt(n, fan_out, fan_in, g.data(), w.data(), 0.0, &mut gx);
                    self.accumulate(grads, *input, Tensor::new(x.shape().to_vec(), gx)?)?;
                }
            }
            Op::Affine { input, scale } => {
                self.accumulate(grads, *input, g.scale(*scale))?;
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone())?;
                self.accumulate(grads, *b, g.clone())?;
            }
            Op::Reshape(x) => {
                let gi = g.clone().reshape(self.value(*x).shape().to_vec())?;
                self.accumulate(grads, *x, gi)?;
            }
            Op::Clamp { input, lo, hi } => {
                let mut gi = g.clone();
                for (d, &v) in gi.data_mut().iter_mut().zip(self.value(*input).data()) {
                    if v < *lo || v > *hi {
                        *d = 0.0;
                    }
                }
                self.accumulate(grads, *input, gi)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || b.numel() != ws[1] {
        return Err(Error::contract(format!(
            "dense: incompatible shapes input {xs:?}, weight {ws:?}, bias {:?}",
            b.shape()
        )));
    }
    let (n, fan_in, fan_out) = (xs[0], xs[1], ws[1]);
    let mut out = Vec::with_capacity(n * fan_out);
    for _ in 0..n {
        out.extend_from_slice(b.data());
    }
    gemm::gemm(n, fan_in, fan_out, x.data(), w.data(), 1.0, &mut out);
    Tensor::new(vec![n, fan_out], out)
}

pub(crate) fn grid_max_indexed(
    x: &Tensor,
    rows: &[Span],
    cols: &[Span],
) -> Result<(Tensor, Vec<u32>)> {
    let (h, w, c) = x.dims3()?;
    for &(s, l) in rows {
        if l == 0 || s + l > h {
            return Err(Error::contract(format!(
                "grid row span ({s},{l}) outside height {h}"
            )));
        }
    }
    for &(s, l) in cols {
        if l == 0 || s + l > w {
            return Err(Error::contract(format!(
                "grid column span ({s},{l}) outside width {w}"
            )));
        }
    }
    let cells = rows.len() * cols.len();
    let mut out = vec![f32::NEG_INFINITY; c * cells];
    let mut idx = vec![0u32; c * cells];
    let d = x.data();
    for (ri, &(ry, rh)) in rows.iter().enumerate() {
        for (ci, &(cx, cw)) in cols.iter().enumerate() {
            let cell = ri * cols.len() + ci;
            for y in ry..ry + rh {
                for xx in cx..cx + cw {
                    let base = (y * w + xx) * c;
                    for ch in 0..c {
                        let v = d[base + ch];
                        let o = ch * cells + cell;
                        if v > out[o] {
                            out[o] = v;
                            idx[o] = (base + ch) as u32;
                        }
                    }
                }
            }
        }
    }
    Ok((Tensor::new(vec![c, cells], out)?, idx))
}

/// Max over each grid cell, per channel. Output is `C x cells`.
pub fn grid_max(x: &Tensor, rows: &[Span], cols: &[Span]) -> Result<Tensor> {
    Ok(grid_max_indexed(x, rows, cols)?.0)
}

pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    dense_forward(x, w, b)
}

#[cfg(test)]
mod tests {
    use super::super::ops::sigmoid_scalar;
    use super::*;

    #[test]
    fn backward_needs_a_recorded_output() {
        let tape = GradTape::new();
        assert!(tape.backward(Var(0), Tensor::scalar(1.0)).is_err());
    }

    #[test]
    fn zero_seed_gives_zero_parameter_grads() {
        let mut tape = GradTape::new();
        let x = tape.leaf(
            Tensor::from_fn3(5, 5, 2, |y, x, c| (y + x + c) as f32 * 0.1),
            false,
        );
        let w = tape.leaf(Tensor::full(&[3, 3, 2, 3], 0.2), true);
        let b = tape.leaf(Tensor::vector(vec![0.1, 0.2, 0.3]), true);
        let y = tape.conv2d(x, w, b, 1, 0).unwrap();
        let r = tape.relu(y);
        let grads = tape.backward(r, Tensor::zeros(&[3, 3, 3])).unwrap();
        assert!(grads.get(w).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(grads.get(b).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(grads.get(x).is_none());
    }

    #[test]
    fn each_node_visited_once() {
        let mut tape = GradTape::new();
        let a = tape.leaf(Tensor::vector(vec![1.0, 2.0]), true);
        let b = tape.affine(a, 2.0, 0.0);
        let c = tape.add(a, b).unwrap();
        let d = tape.sigmoid(c);
        let grads = tape.backward(d, Tensor::vector(vec![1.0, 1.0])).unwrap();
        assert_eq!(grads.visited(), 4);
        // d/da sigmoid(3a) = 3 s (1 - s)
        let s = sigmoid_scalar(3.0);
        assert!((grads.get(a).unwrap().data()[0] - 3.0 * s * (1.0 - s)).abs() < 1e-6);
    }

    #[test]
    fn grid_max_picks_cell_maxima() {
        let x = Tensor::from_fn3(4, 4, 1, |y, x, _| (y * 4 + x) as f32);
        let out = grid_max(&x, &[(0, 2), (2, 2)], &[(0, 2), (2, 2)]).unwrap();
        assert_eq!(out.data(), &[5.0, 7.0, 13.0, 15.0]);
    }
}
