use super::crop::{channel_mean, crop_with_context, sample_patch, search_side};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::networks::{
    appearance_response, semantic_correlate, semantic_search, semantic_target, ANet,
    NetworkProfile, ResponseMap, SNet, SemanticHead, SemanticTarget,
};
use crate::tensor::{self, bicubic_upsample, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    /// Weight of the appearance response in the combined map.
    pub lambda: f32,
    /// Scales searched are `1 / scale_step`, 1 and `scale_step`.
    pub scale_step: f32,
    /// Multiplies the peak of the two non-unit scales.
    pub scale_penalty: f32,
    /// Fraction of the winning scale change applied to the box size.
    pub scale_damping: f32,
    pub window_influence: f32,
    pub upsample: usize,
    /// Box size is kept within these multiples of the initial size.
    pub min_scale: f32,
    pub max_scale: f32,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            lambda: 0.3,
            scale_step: 1.025,
            scale_penalty: 0.9745,
            scale_damping: 0.59,
            window_influence: 0.176,
            upsample: 16,
            min_scale: 0.2,
            max_scale: 5.0,
        }
    }
}

impl TrackConfig {
    pub fn with_lambda(lambda: f32) -> Self {
        TrackConfig {
            lambda,
            ..TrackConfig::default()
        }
    }

    pub fn scales(&self) -> [f32; 3] {
        [1.0 / self.scale_step, 1.0, self.scale_step]
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        if !(self.scale_step >= 1.0) || !(self.scale_penalty > 0.0 && self.scale_penalty <= 1.0) {
            return Err(Error::config(
                "scale step must be >= 1 and penalty in (0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.scale_damping)
            || !(0.0..=1.0).contains(&self.window_influence)
        {
            return Err(Error::config(
                "scale damping and window influence must lie in [0, 1]",
            ));
        }
        if self.upsample == 0
            || !(self.min_scale > 0.0 && self.min_scale <= 1.0 && self.max_scale >= 1.0)
        {
            return Err(Error::config(
                "upsample must be >= 1 and min_scale <= 1 <= max_scale",
            ));
        }
        Ok(())
    }
}

/// The networks a tracker runs. Either branch may be absent.
#[derive(Clone, Debug)]
pub struct TrackerModels {
    pub profile: NetworkProfile,
    pub anet: Option<ANet>,
    pub semantic: Option<(SNet, SemanticHead)>,
}

impl TrackerModels {
    pub fn new(
        profile: NetworkProfile,
        anet: Option<ANet>,
        semantic: Option<(SNet, SemanticHead)>,
    ) -> Result<Self> {
        if anet.is_none() && semantic.is_none() {
            return Err(Error::config("a tracker needs at least one branch"));
        }
        Ok(TrackerModels {
            profile,
            anet,
            semantic,
        })
    }

    /// The mixing weight actually used: a missing branch gets weight 0.
    pub fn effective_lambda(&self, lambda: f32) -> f32 {
        match (&self.anet, &self.semantic) {
            (Some(_), None) => 1.0,
            (None, Some(_)) => 0.0,
            _ => lambda,
        }
    }
}

/// `lambda * h_a + (1 - lambda) * h_s`, returning the single-branch map
/// unchanged at `lambda` 1 or 0.
pub fn combine_responses(ha: &ResponseMap, hs: &ResponseMap, lambda: f32) -> Result<ResponseMap> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::contract(format!("lambda {lambda} outside [0, 1]")));
    }
    ha.scores
        .check_same_shape(&hs.scores, "combine_responses")?;
    if ha.stride != hs.stride {
        return Err(Error::contract("responses use different strides"));
    }
    if lambda == 1.0 {
        return Ok(ha.clone());
    }
    if lambda == 0.0 {
        return Ok(hs.clone());
    }
    let data = ha
        .scores
        .data()
        .iter()
        .zip(hs.scores.data())
        .map(|(&a, &s)| lambda * a + (1.0 - lambda) * s)
        .collect();
    Ok(ResponseMap::new(
        Tensor::new(ha.scores.shape().to_vec(), data)?,
        ha.stride,
    ))
}

/// Rescales every map to `[0, 1]` with one min and max shared by all of
/// them. Constant input maps to zeros.
pub fn normalize_jointly(maps: &mut [ResponseMap]) {
    let lo = maps
        .iter()
        .map(|m| m.scores.min())
        .fold(f32::INFINITY, f32::min);
    let hi = maps
        .iter()
        .map(|m| m.scores.max())
        .fold(f32::NEG_INFINITY, f32::max);
    let span = hi - lo;
    for m in maps {
        m.scores = if span > 0.0 {
            m.scores.map(|v| (v - lo) / span)
        } else {
            Tensor::zeros(m.scores.shape())
        };
    }
}

pub fn hann_window(n: usize) -> Tensor {
    let w: Vec<f32> = (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else {
                0.5 - 0.5 * (2.0 * std::f32::consts::PI * i as f32 / (n - 1) as f32).cos()
            }
        })
        .collect();
    let sum: f32 = w.iter().sum::<f32>().powi(2);
    Tensor::from_fn3(n, n, 1, |y, x, _| w[y] * w[x] / sum)
}

/// Branch responses for the three scales of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleResponses {
    pub appearance: Option<Vec<ResponseMap>>,
    pub semantic: Option<Vec<ResponseMap>>,
    /// Normalised, combined, and penalised maps.
    pub combined: Vec<ResponseMap>,
    pub best_scale: usize,
}

/// Per-sequence tracker: target-side features are computed once in
/// [`TrackerState::init`] and reused for every frame.
pub struct TrackerState<'m> {
    models: &'m TrackerModels,
    config: TrackConfig,
    lambda: f32,
    exemplar: Option<Tensor>,
    semantic: Option<SemanticTarget>,
    bbox: BoundingBox,
    base: (f32, f32),
    attention_evaluations: usize,
    last: Option<ScaleResponses>,
}

impl<'m> TrackerState<'m> {
    pub fn init(
        frame: &Tensor,
        bbox: BoundingBox,
        models: &'m TrackerModels,
        config: TrackConfig,
    ) -> Result<Self> {
        config.validate()?;
        let p = &models.profile;
        let context = crop_with_context(frame, &bbox, p.search_size, p)?;
        let exemplar = match &models.anet {
            Some(a) => {
                let off = (p.search_size - p.target_size) / 2;
                let z = tensor::crop(&context, off, off, p.target_size, p.target_size)?;
                Some(a.forward(&z, p)?)
            }
            None => None,
        };
        let mut attention_evaluations = 0;
        let semantic = match &models.semantic {
            Some((snet, head)) => {
                let taps = snet.forward(&context)?;
                attention_evaluations += 1;
                Some(semantic_target(&taps, head, p)?)
            }
            None => None,
        };
        Ok(TrackerState {
            models,
            lambda: models.effective_lambda(config.lambda),
            config,
            exemplar,
            semantic,
            bbox,
            base: (bbox.w, bbox.h),
            attention_evaluations,
            last: None,
        })
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn config(&self) -> &TrackConfig {
        &self.config
    }

    /// How many times channel attention has been evaluated on this sequence.
    pub fn attention_evaluations(&self) -> usize {
        self.attention_evaluations
    }

    pub fn semantic_target(&self) -> Option<&SemanticTarget> {
        self.semantic.as_ref()
    }

    pub fn last_responses(&self) -> Option<&ScaleResponses> {
        self.last.as_ref()
    }

    /// Raw branch responses at each scale around the current box.
    pub fn score_scales(&self, frame: &Tensor) -> Result<ScaleResponses> {
        let p = &self.models.profile;
        let fill = channel_mean(frame)?;
        let side = search_side(&self.bbox, p);
        let use_a = self.lambda > 0.0;
        let use_s = self.lambda < 1.0;
        let mut app = Vec::new();
        let mut sem = Vec::new();
        for s in self.config.scales() {
            let patch = sample_patch(
                frame,
                self.bbox.cx,
                self.bbox.cy,
                side * s,
                p.search_size,
                &fill,
            )?;
            if let (true, Some(anet), Some(z)) = (use_a, &self.models.anet, &self.exemplar) {
                app.push(appearance_response(
                    z,
                    &anet.forward(&patch, p)?,
                    p.total_stride,
                )?);
            }
            if let (true, Some((snet, head)), Some(t)) =
                (use_s, &self.models.semantic, &self.semantic)
            {
                let search = semantic_search(&snet.forward(&patch)?, head, p)?;
                sem.push(semantic_correlate(t, &search, p.total_stride)?);
            }
        }
        for m in app.iter().chain(&sem) {
            if !m.scores.all_finite() {
                return Err(Error::NonFinite(format!(
                    "response map around box ({:.1}, {:.1}, {:.1}, {:.1})",
                    self.bbox.cx, self.bbox.cy, self.bbox.w, self.bbox.h
                )));
            }
        }
        let appearance = (!app.is_empty()).then_some(app);
        let semantic = (!sem.is_empty()).then_some(sem);
        let mut na = appearance.clone();
        let mut ns = semantic.clone();
        na.iter_mut().for_each(|m| normalize_jointly(m));
        ns.iter_mut().for_each(|m| normalize_jointly(m));
        let mut combined = match (na, ns) {
            (Some(a), Some(s)) => a
                .iter()
                .zip(&s)
                .map(|(a, s)| combine_responses(a, s, self.lambda))
                .collect::<Result<Vec<_>>>()?,
            (Some(a), None) => a,
            (None, Some(s)) => s,
            (None, None) => return Err(Error::contract("no branch produced a response")),
        };
        let middle = combined.len() / 2;
        for (i, m) in combined.iter_mut().enumerate() {
            if i != middle {
                m.scores = m.scores.scale(self.config.scale_penalty);
            }
        }
        let peaks = Tensor::vector(combined.iter().map(|m| m.scores.max()).collect());
        Ok(ScaleResponses {
            appearance,
            semantic,
            combined,
            best_scale: peaks.argmax(),
        })
    }

    /// Locates the target in `frame` and updates the box.
    pub fn track_frame(&mut self, frame: &Tensor) -> Result<BoundingBox> {
        let (fh, fw, _) = frame.dims3()?;
        let r = self.score_scales(frame)?;
        let scale = self.config.scales()[r.best_scale];
        let map = &r.combined[r.best_scale];
        let n = map.size();
        let lo = map.scores.min();
        let shifted = map.scores.map(|v| v - lo);
        let total = shifted.sum();
        let mut scored = if total > 0.0 {
            shifted.scale(1.0 / total)
        } else {
            shifted
        };
        let w = self.config.window_influence;
        let window = hann_window(n);
        for (v, h) in scored.data_mut().iter_mut().zip(window.data()) {
            *v = (1.0 - w) * *v + w * h;
        }
        let f = self.config.upsample;
        let up = bicubic_upsample(&scored, f)?;
        let m = up.shape()[0];
        let idx = up.argmax();
        let (row, col) = ((idx / m) as f32 / f as f32, (idx % m) as f32 / f as f32);
        let (dy, dx) = map.cell_offset(row, col);
        let px = search_side(&self.bbox, &self.models.profile) * scale
            / self.models.profile.search_size as f32;
        let d = self.config.scale_damping;
        let grow = 1.0 - d + d * scale;
        let (bw, bh) = self.base;
        let (lo_s, hi_s) = (self.config.min_scale, self.config.max_scale);
        self.bbox = BoundingBox::new(
            (self.bbox.cx + dx * px).clamp(0.0, fw as f32 - 1.0),
            (self.bbox.cy + dy * px).clamp(0.0, fh as f32 - 1.0),
            (self.bbox.w * grow).clamp(bw * lo_s, bw * hi_s),
            (self.bbox.h * grow).clamp(bh * lo_s, bh * hi_s),
        );
        self.last = Some(r);
        Ok(self.bbox)
    }
}

/// One row of the channel-weight table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRow {
    pub layer: usize,
    pub rank: usize,
    pub channel: usize,
    pub weight: f32,
}

/// Channel weights of every layer, sorted by descending weight (ties keep
/// channel order). Empty when the tracker has no semantic branch.
pub fn dump_attention(state: &TrackerState<'_>) -> Vec<AttentionRow> {
    let Some(t) = state.semantic_target() else {
        return Vec::new();
    };
    let mut rows = Vec::new();
    for (layer, xi) in t.xi.iter().enumerate() {
        let mut order: Vec<usize> = (0..xi.len()).collect();
        order.sort_by(|&a, &b| xi[b].total_cmp(&xi[a]));
        rows.extend(
            order
                .into_iter()
                .enumerate()
                .map(|(rank, channel)| AttentionRow {
                    layer,
                    rank,
                    channel,
                    weight: xi[channel],
                }),
        );
    }
    rows
}

pub fn attention_csv(rows: &[AttentionRow]) -> String {
    let mut s = String::from("layer,rank,channel_index,weight\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.layer, r.rank, r.channel, r.weight
        ));
    }
    s
}
