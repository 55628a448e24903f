use crate::error::Result;
use crate::tensor::{self, GradTape, Tensor, Var};

/// A square similarity grid. Cell `(i, j)` corresponds to shifting the
/// template by `(i - c, j - c) * stride` search-patch pixels from the patch
/// centre, where `c = (n - 1) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMap {
    pub scores: Tensor,
    pub stride: usize,
}

impl ResponseMap {
    pub fn new(scores: Tensor, stride: usize) -> Self {
        ResponseMap { scores, stride }
    }

    pub fn size(&self) -> usize {
        self.scores.shape()[0]
    }

    /// Displacement in search-patch pixels of cell `(row, col)` from centre.
    pub fn cell_offset(&self, row: f32, col: f32) -> (f32, f32) {
        let c = (self.size() as f32 - 1.0) / 2.0;
        (
            (row - c) * self.stride as f32,
            (col - c) * self.stride as f32,
        )
    }
}

/// Appearance response: correlation of target and search features,
/// averaged over the template's elements so scores stay O(1) regardless of
/// template size.
pub fn appearance_response(z_feat: &Tensor, x_feat: &Tensor, stride: usize) -> Result<ResponseMap> {
    let r = tensor::cross_correlate(z_feat, x_feat)?;
    Ok(ResponseMap::new(
        r.scale(1.0 / z_feat.numel() as f32),
        stride,
    ))
}

pub fn record_appearance_response(tape: &mut GradTape, z_feat: Var, x_feat: Var) -> Result<Var> {
    let n = tape.value(z_feat).numel();
    let r = tape.cross_correlate(z_feat, x_feat)?;
    Ok(tape.affine(r, 1.0 / n as f32, 0.0))
}
