use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Ground truth for one `n x n` response map.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    /// `+1` within `radius` grid elements of the centre, `-1` elsewhere.
    pub labels: Tensor,
    /// Per-position weights; positives and negatives each sum to 0.5.
    pub weights: Tensor,
}

pub fn make_label_map(size: usize, radius: f32) -> Result<LabelMap> {
    if size == 0 || !(radius > 0.0) {
        return Err(Error::contract(
            "label map needs a positive size and radius",
        ));
    }
    let c = (size as f32 - 1.0) / 2.0;
    let labels: Vec<f32> = (0..size * size)
        .map(|i| {
            let (y, x) = ((i / size) as f32 - c, (i % size) as f32 - c);
            if (y * y + x * x).sqrt() <= radius {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let pos = labels.iter().filter(|&&l| l > 0.0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::contract(format!(
            "radius {radius} on a {size}x{size} map leaves {pos} positives and {neg} negatives"
        )));
    }
    let weights = labels
        .iter()
        .map(|&l| {
            if l > 0.0 {
                0.5 / pos as f32
            } else {
                0.5 / neg as f32
            }
        })
        .collect();
    Ok(LabelMap {
        labels: Tensor::new(vec![size, size, 1], labels)?,
        weights: Tensor::new(vec![size, size, 1], weights)?,
    })
}

/// `log(1 + exp(-m))`, exact for large `|m|`.
fn softplus_neg(m: f64) -> f64 {
    (-m).max(0.0) + (-m.abs()).exp().ln_1p()
}

/// Weighted logistic loss `sum_p w_p log(1 + exp(-y_p h_p))` and its
/// gradient with respect to `h`.
pub fn logistic_loss(response: &Tensor, target: &LabelMap) -> Result<(f32, Tensor)> {
    response.check_same_shape(&target.labels, "logistic loss")?;
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(response.numel());
    for ((&h, &y), &w) in response
        .data()
        .iter()
        .zip(target.labels.data())
        .zip(target.weights.data())
    {
        let m = y as f64 * h as f64;
        loss += w as f64 * softplus_neg(m);
        // d/dh softplus(-y h) = -y * sigmoid(-y h)
        let s = if m >= 0.0 {
            let e = (-m).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + m.exp())
        };
        grad.push((-(y as f64) * s * w as f64) as f32);
    }
    Ok((loss as f32, Tensor::new(response.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_response_costs_log2() {
        let m = make_label_map(9, 2.0).unwrap();
        let (l, _) = logistic_loss(&Tensor::zeros(&[9, 9, 1]), &m).unwrap();
        assert!((l - std::f32::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn half_radius_is_single_positive() {
        let m = make_label_map(17, 0.5).unwrap();
        assert_eq!(m.labels.data().iter().filter(|&&v| v > 0.0).count(), 1);
        assert_eq!(m.labels.at3(8, 8, 0), 1.0);
    }

    #[test]
    fn huge_radius_rejected() {
        assert!(make_label_map(5, 10.0).is_err());
    }
}
