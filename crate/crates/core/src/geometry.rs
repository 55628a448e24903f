use serde::{Deserialize, Serialize};

/// Axis-aligned box in frame pixels, stored centre + size. Pixel `(x, y)`
/// sits at continuous coordinate `(x, y)`; on disk boxes use the top-left
/// corner convention (`x, y, w, h`) with centre `x + w/2, y + h/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f32,
    pub cy: f32,
    pub w: f32,
    pub h: f32,
}

impl BoundingBox {
    pub fn new(cx: f32, cy: f32, w: f32, h: f32) -> Self {
        BoundingBox { cx, cy, w, h }
    }

    pub fn from_top_left(x: f32, y: f32, w: f32, h: f32) -> Self {
        BoundingBox {
            cx: x + w / 2.0,
            cy: y + h / 2.0,
            w,
            h,
        }
    }

    /// `(x, y, w, h)` with `(x, y)` the top-left corner.
    pub fn top_left(&self) -> (f32, f32, f32, f32) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.w,
            self.h,
        )
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0
            && self.h > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
    }

    pub fn area(&self) -> f32 {
        self.w * self.h
    }

    /// Area of the part of the box inside a `width x height` frame.
    pub fn area_inside(&self, width: f32, height: f32) -> f32 {
        let (x, y, w, h) = self.top_left();
        let ix = ((x + w).min(width) - x.max(0.0)).max(0.0);
        let iy = ((y + h).min(height) - y.max(0.0)).max(0.0);
        ix * iy
    }
}
