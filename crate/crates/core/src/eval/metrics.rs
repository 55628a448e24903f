use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// IoU thresholds `0, 0.05, ..., 1`; a frame succeeds when IoU is strictly
/// greater than the threshold.
pub const IOU_THRESHOLD_COUNT: usize = 21;
/// Centre-error thresholds `0, 1, ..., 50` pixels; a frame is precise when
/// its error is at most the threshold.
pub const MAX_ERROR_THRESHOLD: usize = 50;
pub const HEADLINE_ERROR_THRESHOLD: f32 = 20.0;

pub fn iou_thresholds() -> Vec<f32> {
    (0..IOU_THRESHOLD_COUNT)
        .map(|i| i as f32 / (IOU_THRESHOLD_COUNT - 1) as f32)
        .collect()
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f32 {
    let (ax, ay, aw, ah) = a.top_left();
    let (bx, by, bw, bh) = b.top_left();
    let ix = ((ax + aw).min(bx + bw) - ax.max(bx)).max(0.0);
    let iy = ((ay + ah).min(by + bh) - ay.max(by)).max(0.0);
    let inter = ix * iy;
    let union = aw * ah + bw * bh - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn center_error(a: &BoundingBox, b: &BoundingBox) -> f32 {
    (a.cx - b.cx).hypot(a.cy - b.cy)
}

fn non_empty(v: &[f32], what: &str) -> Result<()> {
    if v.is_empty() {
        Err(Error::contract(format!("{what} needs at least one frame")))
    } else {
        Ok(())
    }
}

pub fn success_curve(ious: &[f32]) -> Result<Vec<f32>> {
    non_empty(ious, "success curve")?;
    Ok(iou_thresholds()
        .iter()
        .map(|&t| ious.iter().filter(|&&v| v > t).count() as f32 / ious.len() as f32)
        .collect())
}

/// Mean of the success curve.
pub fn success_auc(ious: &[f32]) -> Result<f32> {
    let c = success_curve(ious)?;
    Ok(c.iter().sum::<f32>() / c.len() as f32)
}

pub fn precision_at(errors: &[f32], threshold: f32) -> Result<f32> {
    non_empty(errors, "precision")?;
    Ok(errors.iter().filter(|&&e| e <= threshold).count() as f32 / errors.len() as f32)
}

pub fn precision_curve(errors: &[f32]) -> Result<Vec<f32>> {
    (0..=MAX_ERROR_THRESHOLD)
        .map(|t| precision_at(errors, t as f32))
        .collect()
}
