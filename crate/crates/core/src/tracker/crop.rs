use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::networks::NetworkProfile;
use crate::tensor::Tensor;

/// Side of the square target-size exemplar region: `sqrt((w + p)(h + p))`
/// with context margin `p = (w + h) / 2`.
pub fn exemplar_side(b: &BoundingBox) -> f32 {
    let p = (b.w + b.h) / 2.0;
    ((b.w + p) * (b.h + p)).sqrt()
}

/// Side of the search (and target-plus-context) region; the target occupies
/// the same fraction of it as it does of the exemplar at target size.
pub fn search_side(b: &BoundingBox, profile: &NetworkProfile) -> f32 {
    exemplar_side(b) * profile.search_size as f32 / profile.target_size as f32
}

pub fn channel_mean(frame: &Tensor) -> Result<Vec<f32>> {
    let (h, w, c) = frame.dims3()?;
    let mut acc = vec![0.0f64; c];
    for px in frame.data().chunks_exact(c) {
        for (a, &v) in acc.iter_mut().zip(px) {
            *a += v as f64;
        }
    }
    Ok(acc
        .into_iter()
        .map(|a| (a / (h * w) as f64) as f32)
        .collect())
}

/// Square patch of `side` frame pixels centred on `(cx, cy)`, resampled to
/// `out x out`. Output pixel `j` samples frame coordinate
/// `c + (j - (out - 1) / 2) * side / out` bilinearly; taps outside the frame
/// read `fill`.
pub fn sample_patch(
    frame: &Tensor,
    cx: f32,
    cy: f32,
    side: f32,
    out: usize,
    fill: &[f32],
) -> Result<Tensor> {
    let (h, w, c) = frame.dims3()?;
    if fill.len() != c {
        return Err(Error::contract("fill colour has the wrong channel count"));
    }
    if !(side > 0.0) || !side.is_finite() || !cx.is_finite() || !cy.is_finite() || out == 0 {
        return Err(Error::contract(format!(
            "degenerate crop: side {side} at ({cx}, {cy})"
        )));
    }
    let step = side / out as f32;
    let half = (out as f32 - 1.0) / 2.0;
    let src = frame.data();
    let pixel = |y: i64, x: i64, ch: usize| -> f32 {
        if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
            fill[ch]
        } else {
            src[(y as usize * w + x as usize) * c + ch]
        }
    };
    let coords = |centre: f32| -> Vec<(i64, f32)> {
        (0..out)
            .map(|j| {
                let s = centre + (j as f32 - half) * step;
                let f = s.floor();
                (f as i64, s - f)
            })
            .collect()
    };
    let (ys, xs) = (coords(cy), coords(cx));
    let mut data = Vec::with_capacity(out * out * c);
    for &(y0, fy) in &ys {
        for &(x0, fx) in &xs {
            for ch in 0..c {
                let top = pixel(y0, x0, ch) * (1.0 - fx) + pixel(y0, x0 + 1, ch) * fx;
                let bottom = pixel(y0 + 1, x0, ch) * (1.0 - fx) + pixel(y0 + 1, x0 + 1, ch) * fx;
                data.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Tensor::new(vec![out, out, c], data)
}

/// Context crop around `b`: the search-size region resampled to `out`
/// pixels, padded with the frame's channel mean.
pub fn crop_with_context(
    frame: &Tensor,
    b: &BoundingBox,
    out: usize,
    profile: &NetworkProfile,
) -> Result<Tensor> {
    let (h, w, _) = frame.dims3()?;
    if !b.is_valid() {
        return Err(Error::contract(format!("invalid box {b:?}")));
    }
    if b.area_inside(w as f32, h as f32) <= 0.0 {
        return Err(Error::contract(format!(
            "box {b:?} lies entirely outside the {w}x{h} frame"
        )));
    }
    let side = search_side(b, profile) * out as f32 / profile.search_size as f32;
    let fill = channel_mean(frame)?;
    sample_patch(frame, b.cx, b.cy, side, out, &fill)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exemplar_side_of_square() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert!((exemplar_side(&b) - 20.0).abs() < 1e-6);
    }

    #[test]
    fn constant_image_gives_constant_crop() {
        let f = Tensor::full(&[16, 16, 3], 0.25);
        let p = crop_with_context(
            &f,
            &BoundingBox::new(1.0, 1.0, 8.0, 8.0),
            31,
            &NetworkProfile::desk(),
        )
        .unwrap();
        assert!(p.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn unit_step_copies_pixels() {
        let f = Tensor::from_fn3(9, 9, 1, |y, x, _| (y * 9 + x) as f32);
        let p = sample_patch(&f, 4.0, 4.0, 5.0, 5, &[0.0]).unwrap();
        let expect: Vec<f32> = (2..7)
            .flat_map(|y| (2..7).map(move |x| (y * 9 + x) as f32))
            .collect();
        assert_eq!(p.data(), &expect[..]);
    }
}
