use super::branches::{optimize, LossLog};
use super::sgd::SgdConfig;
use crate::error::{Error, Result};
use crate::networks::convnet::fan_in_normal;
use crate::networks::params::{ParamVisitor, ParamVisitorMut};
use crate::networks::{NetworkProfile, Parameterized, SNet};
use crate::tensor::{GradTape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// S-Net body plus a temporary global-average-pool and linear classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub snet: SNet,
    /// `C x K`
    pub head_w: Tensor,
    pub head_b: Tensor,
}

impl Parameterized for Classifier {
    fn visit_params(&self, f: &mut ParamVisitor<'_>) {
        self.snet.visit_params(f);
        f("head.weight", self.head_w.shape(), self.head_w.data());
        f("head.bias", self.head_b.shape(), self.head_b.data());
    }

    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        self.snet.visit_params_mut(f);
        f("head.weight", self.head_w.data_mut());
        f("head.bias", self.head_b.data_mut());
    }
}

impl Classifier {
    pub fn init<R: Rng>(profile: &NetworkProfile, classes: usize, rng: &mut R) -> Result<Self> {
        let snet = SNet::init(profile, rng)?;
        let c = profile.tap_channels()[1];
        Ok(Classifier {
            snet,
            head_w: fan_in_normal(&[c, classes], c, rng),
            head_b: Tensor::zeros(&[classes]),
        })
    }

    fn record_logits(&self, tape: &mut GradTape, image: &Tensor) -> Result<(Var, Vec<Var>)> {
        let params = self.snet.net.record_params(tape, true);
        let x = tape.leaf(image.clone(), false);
        let feat = self.snet.net.record_forward(tape, &params, x)?;
        let (h, w, c) = tape.value(feat).dims3()?;
        let flat = tape.reshape(feat, vec![h * w, c])?;
        // mean over positions as a 1 x HW by HW x C product
        let avg = tape.leaf(Tensor::full(&[1, h * w], 1.0 / (h * w) as f32), false);
        let zero = tape.leaf(Tensor::zeros(&[c]), false);
        let pooled = tape.dense(avg, flat, zero)?;
        let hw = tape.leaf(self.head_w.clone(), true);
        let hb = tape.leaf(self.head_b.clone(), true);
        let logits = tape.dense(pooled, hw, hb)?;
        let mut vars: Vec<Var> = params.iter().flat_map(|&(w, b)| [w, b]).collect();
        vars.extend([hw, hb]);
        Ok((logits, vars))
    }

    pub fn logits(&self, image: &Tensor) -> Result<Vec<f32>> {
        let mut tape = GradTape::new();
        let (l, _) = self.record_logits(&mut tape, image)?;
        Ok(tape.value(l).data().to_vec())
    }

    pub fn predict(&self, image: &Tensor) -> Result<usize> {
        Ok(Tensor::vector(self.logits(image)?).argmax())
    }

    /// Softmax cross-entropy on one example and its parameter gradients.
    pub fn objective(&self, image: &Tensor, class: usize) -> Result<(f32, Vec<Tensor>)> {
        let mut tape = GradTape::new();
        let (logits, vars) = self.record_logits(&mut tape, image)?;
        let z = tape.value(logits).data();
        if class >= z.len() {
            return Err(Error::contract(format!(
                "class {class} out of range for {} outputs",
                z.len()
            )));
        }
        let m = z.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
        let sum: f64 = z.iter().map(|&v| (v as f64 - m).exp()).sum();
        let loss = (m + sum.ln() - z[class] as f64) as f32;
        let grad: Vec<f32> = z
            .iter()
            .enumerate()
            .map(|(k, &v)| ((v as f64 - m).exp() / sum - (k == class) as u8 as f64) as f32)
            .collect();
        let grads = tape.backward(
            logits,
            Tensor::new(tape.value(logits).shape().to_vec(), grad)?,
        )?;
        let out = vars
            .iter()
            .map(|&v| {
                grads
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
            })
            .collect();
        Ok((loss, out))
    }

    pub fn accuracy(&self, set: &[(Tensor, usize)]) -> Result<f32> {
        let mut hits = 0;
        for (img, c) in set {
            hits += (self.predict(img)? == *c) as usize;
        }
        Ok(hits as f32 / set.len().max(1) as f32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainReport {
    pub train_accuracy: f32,
    pub heldout_accuracy: f32,
    pub log: LossLog,
}

/// Trains S-Net with a temporary classification head; the head is
/// discarded. The last `holdout` fraction of `images` is never trained on
/// and measures accuracy.
pub fn pretrain_snet_classifier(
    images: &[(Tensor, usize)],
    profile: &NetworkProfile,
    cfg: &SgdConfig,
    holdout: f32,
) -> Result<(SNet, PretrainReport)> {
    let classes = images.iter().map(|(_, c)| c + 1).max().unwrap_or(0);
    let distinct = {
        let mut seen = vec![false; classes];
        images.iter().for_each(|(_, c)| seen[*c] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::config(
            "classification pretraining needs at least two classes",
        ));
    }
    if !(0.0..1.0).contains(&holdout) {
        return Err(Error::config("holdout fraction must lie in [0, 1)"));
    }
    let split = images.len() - (images.len() as f32 * holdout).round() as usize;
    let (train, held) = images.split_at(split);
    if train.is_empty() {
        return Err(Error::config(
            "no training images left after the holdout split",
        ));
    }
    let mut init = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Classifier::init(profile, classes, &mut init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let log = optimize(
        &mut model,
        cfg,
        || Ok(rng.gen_range(0..train.len())),
        |m, &i: &usize| m.objective(&train[i].0, train[i].1),
    )?;
    let report = PretrainReport {
        train_accuracy: model.accuracy(train)?,
        heldout_accuracy: if held.is_empty() {
            f32::NAN
        } else {
            model.accuracy(held)?
        },
        log,
    };
    Ok((model.snet, report))
}
