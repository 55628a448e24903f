//! Fusion module, semantic head, and the per-layer semantic pipeline:
//! crop the target footprint, weight channels by attention, fuse with a
//! 1x1 convolution, correlate against the fused search features and sum
//! the per-layer maps.

use super::attention::{attention_weights, record_attention, AttentionMlp, AttentionParams};
use super::convnet::fan_in_normal;
use super::params::{ParamVisitor, ParamVisitorMut, Parameterized};
use super::profile::NetworkProfile;
use super::response::ResponseMap;
use crate::error::{Error, Result};
use crate::tensor::{self, ConvKernel, GradTape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One 1x1 kernel per semantic layer in use.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionParams {
    pub layers: Vec<ConvKernel>,
}

impl FusionParams {
    pub fn init<R: Rng>(in_channels: &[usize], out_channels: usize, rng: &mut R) -> Self {
        FusionParams {
            layers: in_channels
                .iter()
                .map(|&c| ConvKernel {
                    weights: fan_in_normal(&[1, 1, c, out_channels], c, rng),
                    bias: vec![0.0; out_channels],
                    stride: 1,
                    padding: 0,
                })
                .collect(),
        }
    }
}

impl Parameterized for FusionParams {
    fn visit_params(&self, f: &mut ParamVisitor<'_>) {
        for (i, k) in self.layers.iter().enumerate() {
            f(
                &format!("fusion{i}.weight"),
                k.weights.shape(),
                k.weights.data(),
            );
            f(&format!("fusion{i}.bias"), &[k.bias.len()], &k.bias);
        }
    }

    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        for (i, k) in self.layers.iter_mut().enumerate() {
            f(&format!("fusion{i}.weight"), k.weights.data_mut());
            f(&format!("fusion{i}.bias"), &mut k.bias);
        }
    }
}

/// Applies the fusion kernel of semantic layer `layer_id`.
pub fn fuse(feat: &Tensor, layer_id: usize, params: &FusionParams) -> Result<Tensor> {
    let k = params
        .layers
        .get(layer_id)
        .ok_or_else(|| Error::contract(format!("no fusion kernel for layer {layer_id}")))?;
    let (kh, kw, _, _) = k.dims();
    if (kh, kw) != (1, 1) {
        return Err(Error::contract("fusion kernels must be 1x1"));
    }
    tensor::conv2d(feat, k)
}

/// Centre crop to `extent x extent`. With a 22x22 input and extent 6 this
/// keeps rows and columns 8..=13.
pub fn crop_center_features(feat: &Tensor, extent: usize) -> Result<Tensor> {
    let (h, w, _) = feat.dims3()?;
    if extent > h || extent > w {
        return Err(Error::contract(format!(
            "footprint {extent} larger than feature map {h}x{w}"
        )));
    }
    tensor::crop(feat, (h - extent) / 2, (w - extent) / 2, extent, extent)
}

/// Which semantic-branch components are enabled (the ablation axes).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticVariant {
    /// Use both tapped layers instead of only the deepest one.
    pub multilevel: bool,
    pub attention: bool,
}

impl SemanticVariant {
    pub const BASIC: SemanticVariant = SemanticVariant {
        multilevel: false,
        attention: false,
    };
    pub const FULL: SemanticVariant = SemanticVariant {
        multilevel: true,
        attention: true,
    };

    /// Indices into the S-Net tap pair that this variant consumes.
    pub fn taps(&self) -> &'static [usize] {
        if self.multilevel {
            &[0, 1]
        } else {
            &[1]
        }
    }

    pub fn label(&self) -> &'static str {
        match (self.multilevel, self.attention) {
            (false, false) => "basic",
            (true, false) => "ml",
            (false, true) => "att",
            (true, true) => "ml_att",
        }
    }
}

/// Trainable part of the semantic branch (fusion + attention).
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticHead {
    pub variant: SemanticVariant,
    pub fusion: FusionParams,
    pub attention: Option<AttentionParams>,
}

impl SemanticHead {
    pub fn init<R: Rng>(profile: &NetworkProfile, variant: SemanticVariant, rng: &mut R) -> Self {
        let chans = profile.tap_channels();
        let in_c: Vec<usize> = variant.taps().iter().map(|&t| chans[t]).collect();
        let fusion = FusionParams::init(&in_c, profile.fusion_out_channels, rng);
        let attention = variant.attention.then(|| AttentionParams {
            layers: in_c.iter().map(|_| AttentionMlp::init(rng)).collect(),
        });
        SemanticHead {
            variant,
            fusion,
            attention,
        }
    }
}

impl Parameterized for SemanticHead {
    fn visit_params(&self, f: &mut ParamVisitor<'_>) {
        self.fusion.visit_params(f);
        if let Some(a) = &self.attention {
            a.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        self.fusion.visit_params_mut(f);
        if let Some(a) = &mut self.attention {
            a.visit_params_mut(f);
        }
    }
}

/// Target-side semantic representation, computed once per sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticTarget {
    /// Fused, attention-weighted templates, one per layer in use.
    pub templates: Vec<Tensor>,
    /// Channel weights per layer in use (all ones without attention).
    pub xi: Vec<Vec<f32>>,
}

struct Geometry {
    common: usize,
    footprint: usize,
}

fn geometry(profile: &NetworkProfile) -> Result<Geometry> {
    Ok(Geometry {
        common: profile.semantic_search_extent(),
        footprint: profile.semantic_footprint()?,
    })
}

pub fn semantic_target(
    zs_taps: &[Tensor; 2],
    head: &SemanticHead,
    profile: &NetworkProfile,
) -> Result<SemanticTarget> {
    let g = geometry(profile)?;
    let mut templates = Vec::new();
    let mut xis = Vec::new();
    for (k, &tap) in head.variant.taps().iter().enumerate() {
        let feat = &zs_taps[tap];
        let (_, _, c) = feat.dims3()?;
        let xi = match &head.attention {
            Some(a) => attention_weights(feat, &a.layers[k], g.footprint)?,
            None => vec![1.0; c],
        };
        let target = crop_center_features(&crop_center_features(feat, g.common)?, g.footprint)?;
        let weighted = match &head.attention {
            Some(_) => tensor::channel_scale(&target, &xi)?,
            None => target,
        };
        templates.push(fuse(&weighted, k, &head.fusion)?);
        xis.push(xi);
    }
    Ok(SemanticTarget { templates, xi: xis })
}

/// Fused search-side features. No attention on this side.
pub fn semantic_search(
    x_taps: &[Tensor; 2],
    head: &SemanticHead,
    profile: &NetworkProfile,
) -> Result<Vec<Tensor>> {
    let g = geometry(profile)?;
    head.variant
        .taps()
        .iter()
        .enumerate()
        .map(|(k, &tap)| {
            fuse(
                &crop_center_features(&x_taps[tap], g.common)?,
                k,
                &head.fusion,
            )
        })
        .collect()
}

pub fn semantic_correlate(
    target: &SemanticTarget,
    search: &[Tensor],
    stride: usize,
) -> Result<ResponseMap> {
    if target.templates.len() != search.len() || search.is_empty() {
        return Err(Error::contract(
            "semantic target and search use different layer counts",
        ));
    }
    let mut total: Option<Tensor> = None;
    let mut numel = 0;
    for (t, s) in target.templates.iter().zip(search) {
        let r = tensor::cross_correlate(t, s)?;
        numel += t.numel();
        match &mut total {
            Some(acc) => acc.add_assign(&r)?,
            None => total = Some(r),
        }
    }
    let scores = total.expect("non-empty").scale(1.0 / numel as f32);
    Ok(ResponseMap::new(scores, stride))
}

/// The semantic response for one (context, search) pair.
pub fn semantic_response(
    zs_taps: &[Tensor; 2],
    x_taps: &[Tensor; 2],
    head: &SemanticHead,
    profile: &NetworkProfile,
) -> Result<ResponseMap> {
    let target = semantic_target(zs_taps, head, profile)?;
    let search = semantic_search(x_taps, head, profile)?;
    semantic_correlate(&target, &search, profile.total_stride)
}

/// Parameter leaves of a semantic head on a tape.
pub struct SemanticVars {
    pub fusion: Vec<(Var, Var)>,
    pub attention: Vec<[Var; 4]>,
}

impl SemanticVars {
    /// Variables in the head's parameter visiting order.
    pub fn ordered(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.fusion.iter().flat_map(|&(w, b)| [w, b]).collect();
        for a in &self.attention {
            v.extend_from_slice(a);
        }
        v
    }
}

pub fn record_semantic_params(
    head: &SemanticHead,
    tape: &mut GradTape,
    trainable: bool,
) -> SemanticVars {
    let fusion = head
        .fusion
        .layers
        .iter()
        .map(|k| {
            (
                tape.leaf(k.weights.clone(), trainable),
                tape.leaf(Tensor::vector(k.bias.clone()), trainable),
            )
        })
        .collect();
    let attention = head
        .attention
        .iter()
        .flat_map(|a| a.layers.iter())
        .map(|m| m.record_params(tape, trainable))
        .collect();
    SemanticVars { fusion, attention }
}

/// Records the semantic response on a tape. S-Net features enter as
/// constants, so no gradient ever reaches the frozen extractor.
pub fn record_semantic_response(
    tape: &mut GradTape,
    head: &SemanticHead,
    vars: &SemanticVars,
    zs_taps: &[Tensor; 2],
    x_taps: &[Tensor; 2],
    profile: &NetworkProfile,
) -> Result<Var> {
    let g = geometry(profile)?;
    let mut total: Option<Var> = None;
    let mut numel = 0;
    for (k, &tap) in head.variant.taps().iter().enumerate() {
        let zs = tape.leaf(zs_taps[tap].clone(), false);
        let x = tape.leaf(x_taps[tap].clone(), false);
        let (h, w, _) = zs_taps[tap].dims3()?;
        let top = (h - g.common) / 2 + (g.common - g.footprint) / 2;
        let left = (w - g.common) / 2 + (g.common - g.footprint) / 2;
        let mut target = tape.crop(zs, top, left, g.footprint, g.footprint)?;
        if head.attention.is_some() {
            let xi = record_attention(tape, zs, &vars.attention[k], g.footprint)?;
            target = tape.channel_scale(target, xi)?;
        }
        let (fw, fb) = vars.fusion[k];
        let t = tape.conv2d(target, fw, fb, 1, 0)?;
        let (xh, xw, _) = x_taps[tap].dims3()?;
        let xc = tape.crop(
            x,
            (xh - g.common) / 2,
            (xw - g.common) / 2,
            g.common,
            g.common,
        )?;
        let s = tape.conv2d(xc, fw, fb, 1, 0)?;
        numel += tape.value(t).numel();
        let r = tape.cross_correlate(t, s)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, r)?,
            None => r,
        });
    }
    let total = total.ok_or_else(|| Error::contract("semantic head uses no layers"))?;
    Ok(tape.affine(total, 1.0 / numel as f32, 0.0))
}
