//! Channel attention for the semantic branch.
//!
//! Each channel of the target-plus-context feature map is max-pooled over a
//! 3x3 grid whose centre cell covers the target footprint. The nine maxima go
//! through a tiny MLP (9 -> 9 ReLU -> 1) shared by all channels of the layer,
//! then a sigmoid shifted by 0.5, so every weight lies in (0.5, 1.5).

use super::convnet::fan_in_normal;
use super::params::{ParamVisitor, ParamVisitorMut, Parameterized};
use crate::error::{Error, Result};
use crate::tensor::{self, GradTape, Span, Tensor, Var};
use rand::Rng;

pub const GRID_CELLS: usize = 9;
pub const HIDDEN_UNITS: usize = 9;
pub(crate) const XI_MIN: f32 = 0.500_001;
pub(crate) const XI_MAX: f32 = 1.499_999;

/// Splits `extent` into three spans with a centred middle span of length
/// `center`; the remainder is shared between the sides, the later side
/// taking the extra element when it is odd. 22 with 6 gives 8+6+8.
pub fn grid_spans(extent: usize, center: usize) -> Result<[Span; 3]> {
    if extent < 3 {
        return Err(Error::contract(format!(
            "attention grid needs an extent of at least 3, got {extent}"
        )));
    }
    if center == 0 || center + 2 > extent {
        return Err(Error::contract(format!(
            "attention grid: centre cell {center} leaves no side cells in extent {extent}"
        )));
    }
    let side = extent - center;
    let first = side / 2;
    let last = side - first;
    Ok([(0, first), (first, center), (first + center, last)])
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMlp {
    pub hidden_w: Tensor,
    pub hidden_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl AttentionMlp {
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        AttentionMlp {
            hidden_w: fan_in_normal(&[GRID_CELLS, HIDDEN_UNITS], GRID_CELLS, rng),
            hidden_b: Tensor::zeros(&[HIDDEN_UNITS]),
            // the output starts near zero so initial weights sit near 1.0
            out_w: fan_in_normal(&[HIDDEN_UNITS, 1], HIDDEN_UNITS, rng).scale(0.1),
            out_b: Tensor::zeros(&[1]),
        }
    }

    pub fn zeros() -> Self {
        AttentionMlp {
            hidden_w: Tensor::zeros(&[GRID_CELLS, HIDDEN_UNITS]),
            hidden_b: Tensor::zeros(&[HIDDEN_UNITS]),
            out_w: Tensor::zeros(&[HIDDEN_UNITS, 1]),
            out_b: Tensor::zeros(&[1]),
        }
    }

    pub fn record_params(&self, tape: &mut GradTape, trainable: bool) -> [Var; 4] {
        [
            tape.leaf(self.hidden_w.clone(), trainable),
            tape.leaf(self.hidden_b.clone(), trainable),
            tape.leaf(self.out_w.clone(), trainable),
            tape.leaf(self.out_b.clone(), trainable),
        ]
    }
}

/// Per-layer MLPs, one for each semantic layer in use.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub layers: Vec<AttentionMlp>,
}

impl Parameterized for AttentionParams {
    fn visit_params(&self, f: &mut ParamVisitor<'_>) {
        for (i, m) in self.layers.iter().enumerate() {
            f(
                &format!("attention{i}.hidden_w"),
                m.hidden_w.shape(),
                m.hidden_w.data(),
            );
            f(
                &format!("attention{i}.hidden_b"),
                m.hidden_b.shape(),
                m.hidden_b.data(),
            );
            f(
                &format!("attention{i}.out_w"),
                m.out_w.shape(),
                m.out_w.data(),
            );
            f(
                &format!("attention{i}.out_b"),
                m.out_b.shape(),
                m.out_b.data(),
            );
        }
    }

    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        for (i, m) in self.layers.iter_mut().enumerate() {
            f(&format!("attention{i}.hidden_w"), m.hidden_w.data_mut());
            f(&format!("attention{i}.hidden_b"), m.hidden_b.data_mut());
            f(&format!("attention{i}.out_w"), m.out_w.data_mut());
            f(&format!("attention{i}.out_b"), m.out_b.data_mut());
        }
    }
}

fn grid_for(feat: &Tensor, footprint: usize) -> Result<([Span; 3], [Span; 3])> {
    let (h, w, _) = feat.dims3()?;
    Ok((grid_spans(h, footprint)?, grid_spans(w, footprint)?))
}

/// Channel weights `xi` for one layer of target-plus-context features.
pub fn attention_weights(
    feat_zs: &Tensor,
    mlp: &AttentionMlp,
    footprint: usize,
) -> Result<Vec<f32>> {
    let (rows, cols) = grid_for(feat_zs, footprint)?;
    let pooled = tensor::grid_max(feat_zs, &rows, &cols)?;
    let hidden = tensor::relu(&tensor::dense(&pooled, &mlp.hidden_w, &mlp.hidden_b)?);
    let logits = tensor::dense(&hidden, &mlp.out_w, &mlp.out_b)?;
    Ok(tensor::sigmoid(&logits)
        .data()
        .iter()
        .map(|&s| (s + 0.5).clamp(XI_MIN, XI_MAX))
        .collect())
}

/// Tape version of [`attention_weights`]; returns a length-`C` vector.
pub fn record_attention(
    tape: &mut GradTape,
    feat_zs: Var,
    mlp: &[Var; 4],
    footprint: usize,
) -> Result<Var> {
    let (rows, cols) = grid_for(tape.value(feat_zs), footprint)?;
    let c = tape.value(feat_zs).shape()[2];
    let pooled = tape.grid_max(feat_zs, &rows, &cols)?;
    let h = tape.dense(pooled, mlp[0], mlp[1])?;
    let h = tape.relu(h);
    let logits = tape.dense(h, mlp[2], mlp[3])?;
    let s = tape.sigmoid(logits);
    let xi = tape.affine(s, 1.0, 0.5);
    let xi = tape.clamp(xi, XI_MIN, XI_MAX);
    tape.reshape(xi, vec![c])
}
