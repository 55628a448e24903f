//! Procedural moving-shape sequences and shape-classification images.
//!
//! Shapes are drawn with hard edges (no anti-aliasing) so pixel counts are
//! exact. Every random choice comes from a ChaCha stream seeded by `SyntheticSpec::seed`,
//! so a spec always renders to the same bytes.

use super::sequence::Sequence;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Disk,
    Square,
    Triangle,
    Ring,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 4] = [
        ShapeClass::Disk,
        ShapeClass::Square,
        ShapeClass::Triangle,
        ShapeClass::Ring,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether offset `(dx, dy)` from the centre is covered by a shape whose
    /// bounding box is `2 * half` on a side.
    pub fn covers(self, dx: f32, dy: f32, half: f32) -> bool {
        match self {
            ShapeClass::Disk => dx * dx + dy * dy <= half * half,
            ShapeClass::Square => dx.abs() <= half && dy.abs() <= half,
            ShapeClass::Triangle => dy >= -half && dy <= half && dx.abs() <= (dy + half) / 2.0,
            ShapeClass::Ring => {
                let r2 = dx * dx + dy * dy;
                let inner = 0.5 * half;
                r2 <= half * half && r2 >= inner * inner
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    /// Pixels per frame.
    pub velocity: [f32; 2],
    /// Vertical sinusoidal perturbation amplitude in pixels.
    #[serde(default)]
    pub wobble_amplitude: f32,
    #[serde(default = "default_period")]
    pub wobble_period: f32,
}

fn default_period() -> f32 {
    20.0
}

fn default_drift() -> f32 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clutter {
    pub count: usize,
    #[serde(default)]
    pub palette: Vec<[f32; 3]>,
    #[serde(default = "default_size_range")]
    pub size_range: [f32; 2],
    /// Maximum distractor speed, pixels per frame.
    #[serde(default)]
    pub speed: f32,
    /// Restrict distractors to these classes (all classes when empty).
    #[serde(default)]
    pub classes: Vec<ShapeClass>,
}

fn default_size_range() -> [f32; 2] {
    [10.0, 30.0]
}

impl Default for Clutter {
    fn default() -> Self {
        Clutter {
            count: 0,
            palette: Vec::new(),
            size_range: default_size_range(),
            speed: 0.0,
            classes: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    /// `[width, height]`
    pub canvas: [usize; 2],
    pub frames: usize,
    pub shape: ShapeClass,
    pub color: [f32; 3],
    /// When set, the target colour fades linearly to this by the last frame.
    #[serde(default)]
    pub color_end: Option<[f32; 3]>,
    pub background: [f32; 3],
    /// Bounding-box side of the target in the first frame.
    pub size: f32,
    /// Target centre in the first frame.
    pub start: [f32; 2],
    pub motion: Motion,
    /// Multiplicative size change per frame.
    #[serde(default = "default_drift")]
    pub scale_drift: f32,
    #[serde(default)]
    pub clutter: Clutter,
    /// Uniform per-channel noise amplitude.
    #[serde(default)]
    pub noise: f32,
    pub seed: u64,
}

#[derive(Clone, Debug)]
struct Distractor {
    shape: ShapeClass,
    color: [f32; 3],
    half: f32,
    start: [f32; 2],
    velocity: [f32; 2],
}

fn valid_color(c: &[f32; 3]) -> bool {
    c.iter().all(|v| (0.0..=1.0).contains(v))
}

impl SyntheticSpec {
    pub fn target_box(&self, t: usize) -> BoundingBox {
        let tf = t as f32;
        let wobble = if self.motion.wobble_amplitude != 0.0 {
            self.motion.wobble_amplitude
                * (2.0 * std::f32::consts::PI * tf / self.motion.wobble_period).sin()
        } else {
            0.0
        };
        let cx = self.start[0] + self.motion.velocity[0] * tf;
        let cy = self.start[1] + self.motion.velocity[1] * tf + wobble;
        let side = self.size * self.scale_drift.powi(t as i32);
        BoundingBox::new(cx, cy, side, side)
    }

    pub fn target_color(&self, t: usize) -> [f32; 3] {
        match self.color_end {
            Some(end) if self.frames > 1 => {
                let a = t as f32 / (self.frames - 1) as f32;
                [0, 1, 2].map(|i| self.color[i] + (end[i] - self.color[i]) * a)
            }
            _ => self.color,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [w, h] = self.canvas;
        if w < 8 || h < 8 {
            return Err(Error::config("canvas must be at least 8x8"));
        }
        if self.frames == 0 {
            return Err(Error::config("a sequence needs at least one frame"));
        }
        if !(self.size > 0.0) || !(self.scale_drift > 0.0) {
            return Err(Error::config(
                "target size and scale drift must be positive",
            ));
        }
        if !valid_color(&self.color)
            || !valid_color(&self.background)
            || !self.color_end.as_ref().is_none_or(valid_color)
        {
            return Err(Error::config("colours must lie in [0, 1]"));
        }
        if self.clutter.palette.iter().any(|c| !valid_color(c)) {
            return Err(Error::config("clutter palette colours must lie in [0, 1]"));
        }
        if self.clutter.count > 0 && self.clutter.palette.is_empty() {
            return Err(Error::config("clutter needs a non-empty palette"));
        }
        if self.clutter.size_range[0] <= 0.0
            || self.clutter.size_range[1] < self.clutter.size_range[0]
        {
            return Err(Error::config(
                "clutter size range must be positive and ordered",
            ));
        }
        if !(self.noise >= 0.0) || self.motion.wobble_period == 0.0 {
            return Err(Error::config(
                "noise must be >= 0 and wobble period non-zero",
            ));
        }
        for t in 0..self.frames {
            let b = self.target_box(t);
            if b.area_inside(w as f32, h as f32) < 0.5 * b.area() {
                return Err(Error::config(format!(
                    "target is less than 50% inside the canvas at frame {t}"
                )));
            }
        }
        Ok(())
    }

    fn distractors(&self) -> Vec<Distractor> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_c1a5);
        let [w, h] = self.canvas;
        let classes: &[ShapeClass] = if self.clutter.classes.is_empty() {
            &ShapeClass::ALL
        } else {
            &self.clutter.classes
        };
        (0..self.clutter.count)
            .map(|_| {
                let shape = *classes.choose(&mut rng).expect("non-empty");
                let color = *self
                    .clutter
                    .palette
                    .choose(&mut rng)
                    .expect("validated palette");
                let [lo, hi] = self.clutter.size_range;
                let half = rng.gen_range(lo..=hi) / 2.0;
                let start = [rng.gen_range(0.0..w as f32), rng.gen_range(0.0..h as f32)];
                let s = self.clutter.speed;
                let velocity = if s > 0.0 {
                    [rng.gen_range(-s..=s), rng.gen_range(-s..=s)]
                } else {
                    [0.0, 0.0]
                };
                Distractor {
                    shape,
                    color,
                    half,
                    start,
                    velocity,
                }
            })
            .collect()
    }

    pub fn render_frame(&self, t: usize) -> Tensor {
        let [w, h] = self.canvas;
        let mut img = Tensor::from_fn3(h, w, 3, |_, _, c| self.background[c]);
        for d in self.distractors() {
            let tf = t as f32;
            let (cx, cy) = (
                d.start[0] + d.velocity[0] * tf,
                d.start[1] + d.velocity[1] * tf,
            );
            paint(&mut img, d.shape, cx, cy, d.half, d.color);
        }
        let b = self.target_box(t);
        paint(
            &mut img,
            self.shape,
            b.cx,
            b.cy,
            b.w / 2.0,
            self.target_color(t),
        );
        if self.noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(
                self.seed.wrapping_mul(0x9e37_79b9).wrapping_add(t as u64),
            );
            for v in img.data_mut() {
                *v = (*v + rng.gen_range(-self.noise..=self.noise)).clamp(0.0, 1.0);
            }
        }
        img
    }
}

/// Draws a hard-edged shape; pixels are tested at their integer coordinates.
pub fn paint(img: &mut Tensor, shape: ShapeClass, cx: f32, cy: f32, half: f32, color: [f32; 3]) {
    let (h, w, _) = img.dims3().expect("rank-3 canvas");
    let y0 = ((cy - half).floor().max(0.0)) as usize;
    let y1 = ((cy + half).ceil().min(h as f32 - 1.0)).max(-1.0);
    let x0 = ((cx - half).floor().max(0.0)) as usize;
    let x1 = ((cx + half).ceil().min(w as f32 - 1.0)).max(-1.0);
    if y1 < 0.0 || x1 < 0.0 {
        return;
    }
    let (y1, x1) = (y1 as usize, x1 as usize);
    let data = img.data_mut();
    for y in y0..=y1 {
        for x in x0..=x1 {
            if shape.covers(x as f32 - cx, y as f32 - cy, half) {
                let i = (y * w + x) * 3;
                data[i..i + 3].copy_from_slice(&color);
            }
        }
    }
}

/// Renders the whole sequence in memory.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Sequence> {
    spec.validate()?;
    let frames = (0..spec.frames).map(|t| spec.render_frame(t)).collect();
    let boxes = (0..spec.frames).map(|t| spec.target_box(t)).collect();
    Sequence::in_memory(spec.name.clone(), frames, boxes)
}

fn random_color(rng: &mut impl Rng) -> [f32; 3] {
    [
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..1.0),
    ]
}

fn color_distance(a: &[f32; 3], b: &[f32; 3]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// A colour at L1 distance of at least `min_gap` from every colour in `avoid`.
fn distinct_color(rng: &mut impl Rng, avoid: &[[f32; 3]], min_gap: f32) -> [f32; 3] {
    loop {
        let c = random_color(rng);
        if avoid.iter().all(|a| color_distance(a, &c) >= min_gap) {
            return c;
        }
    }
}

/// One labelled image for the shape-classification pretraining task.
pub fn classification_image(rng: &mut impl Rng, side: usize) -> (Tensor, ShapeClass) {
    let class = *ShapeClass::ALL.choose(rng).expect("non-empty");
    let bg = random_color(rng);
    let fg = distinct_color(rng, &[bg], 0.6);
    let mut img = Tensor::from_fn3(side, side, 3, |_, _, c| bg[c]);
    let half = rng.gen_range(0.16..0.28) * side as f32;
    let c = (side as f32 - 1.0) / 2.0;
    let jitter = side as f32 * 0.08;
    let (cx, cy) = (
        c + rng.gen_range(-jitter..=jitter),
        c + rng.gen_range(-jitter..=jitter),
    );
    paint(&mut img, class, cx, cy, half, fg);
    for v in img.data_mut() {
        *v = (*v + rng.gen_range(-0.03..=0.03f32)).clamp(0.0, 1.0);
    }
    (img, class)
}

pub fn classification_set(n: usize, side: usize, seed: u64) -> Vec<(Tensor, ShapeClass)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| classification_image(&mut rng, side))
        .collect()
}

/// Knobs for [`random_specs`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub count: usize,
    pub frames: usize,
    pub canvas: [usize; 2],
    pub size_range: [f32; 2],
    pub max_speed: f32,
    pub clutter_range: [usize; 2],
    pub noise: f32,
    /// Probability that a sequence's target colour drifts.
    pub color_change_prob: f32,
    /// Probability that a sequence's target slowly grows or shrinks.
    pub scale_change_prob: f32,
    pub seed: u64,
}

impl SuiteConfig {
    /// The fixed-seed 20 x 60 desk benchmark.
    pub fn benchmark() -> Self {
        SuiteConfig {
            count: 20,
            frames: 60,
            canvas: [192, 144],
            size_range: [18.0, 30.0],
            max_speed: 2.5,
            clutter_range: [4, 8],
            noise: 0.04,
            color_change_prob: 0.5,
            scale_change_prob: 0.3,
            seed: 2024,
        }
    }
}

/// Draws `count` random but valid sequence specs. Each sequence gets
/// distractors of the target's own shape in other colours and distractors
/// of other shapes in colours close to the target's, so neither colour nor
/// shape alone identifies the target.
pub fn random_specs(cfg: &SuiteConfig) -> Vec<SyntheticSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    while out.len() < cfg.count {
        let i = out.len();
        let shape = *ShapeClass::ALL.choose(&mut rng).expect("non-empty");
        let background = random_color(&mut rng);
        let color = distinct_color(&mut rng, &[background], 0.7);
        let color_end = (rng.gen::<f32>() < cfg.color_change_prob)
            .then(|| distinct_color(&mut rng, &[background, color], 0.5));
        let size = rng.gen_range(cfg.size_range[0]..=cfg.size_range[1]);
        let [w, h] = cfg.canvas;
        let margin = size;
        let start = [
            rng.gen_range(margin..w as f32 - margin),
            rng.gen_range(margin..h as f32 - margin),
        ];
        let speed = rng.gen_range(0.3..=cfg.max_speed);
        let angle = rng.gen_range(0.0..std::f32::consts::TAU);
        let scale_drift = if rng.gen::<f32>() < cfg.scale_change_prob {
            if rng.gen() {
                1.006
            } else {
                0.994
            }
        } else {
            1.0
        };
        let mut palette = vec![distinct_color(&mut rng, &[background, color], 0.5)];
        // near-target colour
        palette.push([0, 1, 2].map(|c| (color[c] + rng.gen_range(-0.12..=0.12)).clamp(0.0, 1.0)));
        palette.push(distinct_color(&mut rng, &[background], 0.5));
        let count = rng.gen_range(cfg.clutter_range[0]..=cfg.clutter_range[1]);
        let spec = SyntheticSpec {
            name: format!("synth_{:03}", i),
            canvas: cfg.canvas,
            frames: cfg.frames,
            shape,
            color,
            color_end,
            background,
            size,
            start,
            motion: Motion {
                velocity: [speed * angle.cos(), speed * angle.sin()],
                wobble_amplitude: rng.gen_range(0.0..4.0),
                wobble_period: rng.gen_range(15.0..40.0),
            },
            scale_drift,
            clutter: Clutter {
                count,
                palette,
                size_range: [cfg.size_range[0] * 0.8, cfg.size_range[1]],
                speed: 0.5,
                classes: Vec::new(),
            },
            noise: cfg.noise,
            seed: rng.gen(),
        };
        // keep the whole box inside so motion never depends on clipping
        let inside = (0..spec.frames).all(|t| {
            let b = spec.target_box(t);
            b.area_inside(w as f32, h as f32) >= b.area()
        });
        if inside && spec.validate().is_ok() {
            out.push(spec);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(shape: ShapeClass) -> SyntheticSpec {
        SyntheticSpec {
            name: "t".into(),
            canvas: [64, 48],
            frames: 5,
            shape,
            color: [1.0, 0.0, 0.0],
            color_end: None,
            background: [0.0, 0.0, 0.0],
            size: 12.0,
            start: [20.0, 20.0],
            motion: Motion {
                velocity: [2.0, 1.0],
                wobble_amplitude: 0.0,
                wobble_period: 20.0,
            },
            scale_drift: 1.0,
            clutter: Clutter::default(),
            noise: 0.0,
            seed: 3,
        }
    }

    #[test]
    fn linear_motion_is_arithmetic() {
        let s = plain(ShapeClass::Disk);
        let c: Vec<(f32, f32)> = (0..5)
            .map(|t| (s.target_box(t).cx, s.target_box(t).cy))
            .collect();
        for w in c.windows(2) {
            assert_eq!(w[1].0 - w[0].0, 2.0);
            assert_eq!(w[1].1 - w[0].1, 1.0);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut s = plain(ShapeClass::Ring);
        s.noise = 0.1;
        s.clutter = Clutter {
            count: 3,
            palette: vec![[0.2, 0.9, 0.1]],
            ..Clutter::default()
        };
        assert_eq!(s.render_frame(2), s.render_frame(2));
    }

    #[test]
    fn out_of_canvas_rejected() {
        let mut s = plain(ShapeClass::Square);
        s.motion.velocity = [40.0, 0.0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn random_specs_are_valid_and_reproducible() {
        let mut cfg = SuiteConfig::benchmark();
        cfg.count = 5;
        let a = random_specs(&cfg);
        assert_eq!(a, random_specs(&cfg));
        assert!(a.iter().all(|s| s.validate().is_ok()));
    }
}
