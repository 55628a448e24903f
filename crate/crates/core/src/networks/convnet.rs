use super::params::{ParamVisitor, ParamVisitorMut, Parameterized};
use super::profile::{LayerSpec, NetworkProfile};
use crate::error::{Error, Result};
use crate::tensor::{self, ConvKernel, GradTape, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv {
        name: String,
        kernel: ConvKernel,
        relu: bool,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
    },
}

/// Zero-mean Gaussian with standard deviation `sqrt(2 / fan_in)`.
pub(crate) fn fan_in_normal<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    let n = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(rng) as f32).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// A plain feed-forward stack of valid (unpadded) convolutions and pools.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNet {
    pub layers: Vec<Layer>,
}

impl ConvNet {
    pub fn init<R: Rng>(specs: &[LayerSpec], in_channels: usize, rng: &mut R) -> Self {
        let mut c = in_channels;
        let layers = specs
            .iter()
            .map(|s| match s {
                LayerSpec::Conv {
                    name,
                    kernel,
                    stride,
                    out_channels,
                    relu,
                } => {
                    let fan_in = kernel * kernel * c;
                    let w = fan_in_normal(&[*kernel, *kernel, c, *out_channels], fan_in, rng);
                    c = *out_channels;
                    Layer::Conv {
                        name: name.clone(),
                        kernel: ConvKernel {
                            weights: w,
                            bias: vec![0.0; *out_channels],
                            stride: *stride,
                            padding: 0,
                        },
                        relu: *relu,
                    }
                }
                LayerSpec::MaxPool { kernel, stride } => Layer::MaxPool {
                    kernel: *kernel,
                    stride: *stride,
                },
            })
            .collect();
        ConvNet { layers }
    }

    fn apply(layer: &Layer, x: &Tensor) -> Result<Tensor> {
        match layer {
            Layer::Conv { kernel, relu, .. } => {
                let y = tensor::conv2d(x, kernel)?;
                Ok(if *relu { tensor::relu(&y) } else { y })
            }
            Layer::MaxPool { kernel, stride } => {
                tensor::max_pool(x, (*kernel, *kernel), (*stride, *stride))
            }
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for l in &self.layers {
            cur = Self::apply(l, &cur)?;
        }
        Ok(cur)
    }

    /// Runs up to the deepest requested layer and returns the (post
    /// activation) outputs of each layer index in `taps`.
    pub fn forward_taps(&self, x: &Tensor, taps: &[usize]) -> Result<Vec<Tensor>> {
        let last = *taps
            .iter()
            .max()
            .ok_or_else(|| Error::contract("no taps requested"))?;
        let mut cur = x.clone();
        let mut out = vec![None; taps.len()];
        for (i, l) in self.layers.iter().enumerate().take(last + 1) {
            cur = Self::apply(l, &cur)?;
            for (k, &t) in taps.iter().enumerate() {
                if t == i {
                    out[k] = Some(cur.clone());
                }
            }
        }
        Ok(out.into_iter().map(|t| t.expect("tap reached")).collect())
    }

    /// Puts every parameter on the tape as a leaf, weight then bias per conv.
    pub fn record_params(&self, tape: &mut GradTape, trainable: bool) -> Vec<(Var, Var)> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv { kernel, .. } => Some((
                    tape.leaf(kernel.weights.clone(), trainable),
                    tape.leaf(Tensor::vector(kernel.bias.clone()), trainable),
                )),
                Layer::MaxPool { .. } => None,
            })
            .collect()
    }

    /// Records a forward pass reusing parameter leaves from `record_params`,
    /// so several inputs can share one set of weights on the same tape.
    pub fn record_forward(
        &self,
        tape: &mut GradTape,
        params: &[(Var, Var)],
        x: Var,
    ) -> Result<Var> {
        let mut cur = x;
        let mut p = params.iter();
        for l in &self.layers {
            cur = match l {
                Layer::Conv { kernel, relu, .. } => {
                    let &(w, b) = p
                        .next()
                        .ok_or_else(|| Error::contract("missing conv parameters"))?;
                    let y = tape.conv2d(cur, w, b, kernel.stride, kernel.padding)?;
                    if *relu {
                        tape.relu(y)
                    } else {
                        y
                    }
                }
                Layer::MaxPool { kernel, stride } => {
                    tape.max_pool(cur, (*kernel, *kernel), (*stride, *stride))?
                }
            };
        }
        Ok(cur)
    }

    pub fn conv_layers(&self) -> impl Iterator<Item = (&str, &ConvKernel)> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Conv { name, kernel, .. } => Some((name.as_str(), kernel)),
            Layer::MaxPool { .. } => None,
        })
    }
}

impl Parameterized for ConvNet {
    fn visit_params(&self, f: &mut ParamVisitor<'_>) {
        for (name, k) in self.conv_layers() {
            f(
                &format!("{name}.weight"),
                k.weights.shape(),
                k.weights.data(),
            );
            f(&format!("{name}.bias"), &[k.bias.len()], &k.bias);
        }
    }

    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        for l in &mut self.layers {
            if let Layer::Conv { name, kernel, .. } = l {
                f(&format!("{name}.weight"), kernel.weights.data_mut());
                f(&format!("{name}.bias"), &mut kernel.bias);
            }
        }
    }
}

/// The appearance feature extractor `f_a`, trained from scratch.
#[derive(Clone, Debug, PartialEq)]
pub struct ANet {
    pub net: ConvNet,
}

impl ANet {
    pub fn init<R: Rng>(profile: &NetworkProfile, rng: &mut R) -> Self {
        ANet {
            net: ConvNet::init(&profile.anet, profile.input_channels, rng),
        }
    }

    /// Appearance features for a target- or search-sized patch.
    pub fn forward(&self, image: &Tensor, profile: &NetworkProfile) -> Result<Tensor> {
        let (h, w, _) = image.dims3()?;
        if h != w || (h != profile.target_size && h != profile.search_size) {
            return Err(Error::contract(format!(
                "A-Net expects {0}x{0} or {1}x{1} input, got {h}x{w}",
                profile.target_size, profile.search_size
            )));
        }
        self.net.forward(image)
    }
}

impl Parameterized for ANet {
    fn visit_params(&self, f: &mut ParamVisitor<'_>) {
        self.net.visit_params(f)
    }

    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        self.net.visit_params_mut(f)
    }
}

/// The semantic feature extractor `f_s`. Pretrained on classification and
/// never updated by tracker training.
#[derive(Clone, Debug, PartialEq)]
pub struct SNet {
    pub net: ConvNet,
    pub taps: [usize; 2],
}

impl SNet {
    pub fn init<R: Rng>(profile: &NetworkProfile, rng: &mut R) -> Result<Self> {
        Ok(SNet {
            net: ConvNet::init(&profile.snet, profile.input_channels, rng),
            taps: profile.tap_indices()?,
        })
    }

    /// Outputs of the two tapped layers, shallower first.
    pub fn forward(&self, image: &Tensor) -> Result<[Tensor; 2]> {
        let mut v = self.net.forward_taps(image, &self.taps)?;
        let deep = v.pop().expect("two taps");
        let shallow = v.pop().expect("two taps");
        Ok([shallow, deep])
    }
}

impl Parameterized for SNet {
    fn visit_params(&self, f: &mut ParamVisitor<'_>) {
        self.net.visit_params(f)
    }

    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        self.net.visit_params_mut(f)
    }
}
