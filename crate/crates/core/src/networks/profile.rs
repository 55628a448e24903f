//! Architectural dimensions for the two network scales.
//!
//! The `paper` profile mirrors the full-size AlexNet-style networks (127/255
//! inputs, 17x17 responses). The `desk` profile keeps every geometric
//! relationship (total stride 8, odd receptive fields aligned with the patch
//! centre, a 3x3 attention grid around the target footprint) at a size that
//! trains on one CPU core in minutes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        name: String,
        kernel: usize,
        stride: usize,
        out_channels: usize,
        relu: bool,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
    },
}

impl LayerSpec {
    fn conv(name: &str, kernel: usize, stride: usize, out_channels: usize, relu: bool) -> Self {
        LayerSpec::Conv {
            name: name.to_string(),
            kernel,
            stride,
            out_channels,
            relu,
        }
    }

    fn pool(kernel: usize, stride: usize) -> Self {
        LayerSpec::MaxPool { kernel, stride }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            LayerSpec::Conv { name, .. } => Some(name),
            LayerSpec::MaxPool { .. } => None,
        }
    }

    fn kernel_stride(&self) -> (usize, usize) {
        match self {
            LayerSpec::Conv { kernel, stride, .. } | LayerSpec::MaxPool { kernel, stride } => {
                (*kernel, *stride)
            }
        }
    }
}

/// Output `(extent, channels)` after each layer, for a square input.
pub fn shape_chain(
    layers: &[LayerSpec],
    input: usize,
    channels: usize,
) -> Result<Vec<(usize, usize)>> {
    let mut n = input;
    let mut c = channels;
    let mut out = Vec::with_capacity(layers.len());
    for (i, l) in layers.iter().enumerate() {
        let (k, s) = l.kernel_stride();
        if n < k || s == 0 {
            return Err(Error::contract(format!(
                "layer {i} ({l:?}) does not fit a {n}x{n} input"
            )));
        }
        n = (n - k) / s + 1;
        if let LayerSpec::Conv { out_channels, .. } = l {
            c = *out_channels;
        }
        out.push((n, c));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub name: String,
    /// Side of the exact target patch `z` (square).
    pub target_size: usize,
    /// Side of the context patch `z^s` and the search patch `X`.
    pub search_size: usize,
    pub input_channels: usize,
    pub anet: Vec<LayerSpec>,
    pub snet: Vec<LayerSpec>,
    /// Names of the two S-Net conv layers whose outputs feed the semantic
    /// branch, shallower first.
    pub snet_taps: [String; 2],
    pub fusion_out_channels: usize,
    pub total_stride: usize,
    pub response_size: usize,
    pub scale_count: usize,
    /// Image side used by the S-Net classification pretraining task.
    pub classify_size: usize,
    /// Declared shapes, checked against the layer recurrence by `validate`.
    pub anet_target_shape: [usize; 3],
    pub anet_search_shape: [usize; 3],
    pub snet_tap_shapes: [[usize; 3]; 2],
}

impl NetworkProfile {
    pub fn paper() -> Self {
        let alex = |last_relu: bool| {
            vec![
                LayerSpec::conv("conv1", 11, 2, 96, true),
                LayerSpec::pool(3, 2),
                LayerSpec::conv("conv2", 5, 1, 256, true),
                LayerSpec::pool(3, 2),
                LayerSpec::conv("conv3", 3, 1, 384, true),
                LayerSpec::conv("conv4", 3, 1, 384, true),
                LayerSpec::conv("conv5", 3, 1, 256, last_relu),
            ]
        };
        NetworkProfile {
            name: "paper".into(),
            target_size: 127,
            search_size: 255,
            input_channels: 3,
            anet: alex(false),
            snet: alex(true),
            snet_taps: ["conv4".into(), "conv5".into()],
            fusion_out_channels: 128,
            total_stride: 8,
            response_size: 17,
            scale_count: 3,
            classify_size: 127,
            anet_target_shape: [6, 6, 256],
            anet_search_shape: [22, 22, 256],
            snet_tap_shapes: [[24, 24, 384], [22, 22, 256]],
        }
    }

    pub fn desk() -> Self {
        let stem = || {
            vec![
                LayerSpec::conv("conv1", 3, 2, 16, true),
                LayerSpec::pool(3, 2),
                LayerSpec::conv("conv2", 3, 1, 32, true),
                LayerSpec::pool(3, 2),
                LayerSpec::conv("conv3", 1, 1, 48, true),
            ]
        };
        let mut anet = stem();
        anet.push(LayerSpec::conv("conv4", 1, 1, 64, false));
        let mut snet = stem();
        snet.push(LayerSpec::conv("conv4", 3, 1, 64, true));
        NetworkProfile {
            name: "desk".into(),
            target_size: 63,
            search_size: 127,
            input_channels: 3,
            anet,
            snet,
            snet_taps: ["conv3".into(), "conv4".into()],
            fusion_out_channels: 32,
            total_stride: 8,
            response_size: 9,
            scale_count: 3,
            classify_size: 63,
            anet_target_shape: [6, 6, 64],
            anet_search_shape: [14, 14, 64],
            snet_tap_shapes: [[14, 14, 48], [12, 12, 64]],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::config(format!(
                "unknown profile '{other}' (expected paper|desk)"
            ))),
        }
    }

    pub fn tap_indices(&self) -> Result<[usize; 2]> {
        let find = |name: &str| {
            self.snet
                .iter()
                .position(|l| l.name() == Some(name))
                .ok_or_else(|| Error::config(format!("S-Net has no layer named '{name}'")))
        };
        let t = [find(&self.snet_taps[0])?, find(&self.snet_taps[1])?];
        if t[0] >= t[1] {
            return Err(Error::config("S-Net taps must be listed shallow to deep"));
        }
        Ok(t)
    }

    fn stride_of(layers: &[LayerSpec]) -> usize {
        layers.iter().map(|l| l.kernel_stride().1).product()
    }

    /// Spatial extent of the semantic target footprint: the deepest tap's
    /// extent on a target-sized input (6 for the paper profile).
    pub fn semantic_footprint(&self) -> Result<usize> {
        let taps = self.tap_indices()?;
        let chain = shape_chain(
            &self.snet[..=taps[1]],
            self.target_size,
            self.input_channels,
        )?;
        Ok(chain[taps[1]].0)
    }

    /// Common spatial extent both semantic layers are cropped to before
    /// correlation (the deepest tap's extent on a search-sized input).
    pub fn semantic_search_extent(&self) -> usize {
        self.snet_tap_shapes[1][0]
    }

    /// Walks the layer recurrence and checks every declared dimension and
    /// the correlation geometry.
    pub fn validate(&self) -> Result<()> {
        if self.target_size >= self.search_size {
            return Err(Error::config(
                "target patch must be smaller than the search patch",
            ));
        }
        let anet_last = |n| {
            shape_chain(&self.anet, n, self.input_channels).map(|c| {
                let (e, ch) = *c.last().expect("non-empty A-Net");
                [e, e, ch]
            })
        };
        let z = anet_last(self.target_size)?;
        let x = anet_last(self.search_size)?;
        if z != self.anet_target_shape {
            return Err(Error::config(format!(
                "A-Net target features {z:?} != declared {:?}",
                self.anet_target_shape
            )));
        }
        if x != self.anet_search_shape {
            return Err(Error::config(format!(
                "A-Net search features {x:?} != declared {:?}",
                self.anet_search_shape
            )));
        }
        if z[0] + self.response_size - 1 != x[0] {
            return Err(Error::config(format!(
                "correlation geometry: {} + {} - 1 != {}",
                z[0], self.response_size, x[0]
            )));
        }
        if Self::stride_of(&self.anet) != self.total_stride {
            return Err(Error::config(
                "A-Net total stride differs from the declared stride",
            ));
        }
        let taps = self.tap_indices()?;
        let chain = shape_chain(&self.snet, self.search_size, self.input_channels)?;
        for (k, &t) in taps.iter().enumerate() {
            let (e, c) = chain[t];
            if [e, e, c] != self.snet_tap_shapes[k] {
                return Err(Error::config(format!(
                    "S-Net tap {} is {:?}, declared {:?}",
                    self.snet_taps[k],
                    [e, e, c],
                    self.snet_tap_shapes[k]
                )));
            }
            if Self::stride_of(&self.snet[..=t]) != self.total_stride {
                return Err(Error::config(format!(
                    "S-Net tap {} has a stride other than {}",
                    self.snet_taps[k], self.total_stride
                )));
            }
        }
        if self.snet_tap_shapes[0][0] < self.snet_tap_shapes[1][0] {
            return Err(Error::config(
                "shallower S-Net tap must be at least as large as the deeper one",
            ));
        }
        let foot = self.semantic_footprint()?;
        if self.semantic_search_extent() - foot + 1 != self.response_size {
            return Err(Error::config(format!(
                "semantic response {} != appearance response {}",
                self.semantic_search_extent() - foot + 1,
                self.response_size
            )));
        }
        if self.semantic_search_extent() < 3 {
            return Err(Error::config(
                "semantic features too small for a 3x3 attention grid",
            ));
        }
        shape_chain(&self.snet, self.classify_size, self.input_channels)?;
        Ok(())
    }

    /// Number of channels of each S-Net tap.
    pub fn tap_channels(&self) -> [usize; 2] {
        [self.snet_tap_shapes[0][2], self.snet_tap_shapes[1][2]]
    }
}
