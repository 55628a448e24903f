use super::labels::logistic_loss;
use super::sampler::{PairSampler, TrainingPair};
use super::sgd::{Momentum, SgdConfig};
use crate::data::Sequence;
use crate::error::{Error, Result};
use crate::networks::params::{ParamVisitor, ParamVisitorMut};
use crate::networks::semantic::{record_semantic_params, record_semantic_response};
use crate::networks::{
    response::record_appearance_response, ANet, NetworkProfile, Parameterized, SNet,
};
use crate::networks::{SemanticHead, SemanticVariant};
use crate::tensor::{GradTape, Gradients, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f32,
}

/// One record per optimizer step, in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossLog(pub Vec<LossRecord>);

impl LossLog {
    pub fn epoch_means(&self) -> Vec<f32> {
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for r in &self.0 {
            if sums.len() < r.epoch {
                sums.resize(r.epoch, (0.0, 0));
            }
            let s = &mut sums[r.epoch - 1];
            s.0 += r.loss as f64;
            s.1 += 1;
        }
        sums.into_iter()
            .map(|(s, n)| (s / n.max(1) as f64) as f32)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,step,loss\n");
        for r in &self.0 {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.step, r.loss));
        }
        s
    }
}

/// Independent random streams derived from one seed, so that every
/// training mode initialises and samples identically for a given seed.
pub(crate) enum Stream {
    AppearanceInit = 1,
    SemanticInit = 2,
    Sampler = 3,
}

pub(crate) fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

fn collect(grads: &Gradients, tape: &GradTape, vars: &[Var]) -> Vec<Tensor> {
    vars.iter()
        .map(|&v| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
        })
        .collect()
}

fn zeros_like(p: &impl Parameterized) -> Vec<Tensor> {
    let mut v = Vec::new();
    p.visit_params(&mut |_, s, _| v.push(Tensor::zeros(s)));
    v
}

/// A learned constant added to the response during training only. A
/// constant offset cannot move the argmax or survive min-max normalisation,
/// so it is dropped once training ends.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResponseBias(pub f32);

impl Parameterized for ResponseBias {
    fn visit_params(&self, f: &mut ParamVisitor<'_>) {
        f("response.bias", &[1], std::slice::from_ref(&self.0));
    }

    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        f("response.bias", std::slice::from_mut(&mut self.0));
    }
}

/// Loss of `h + bias`; gradients for `vars`, then for the bias.
fn finish(
    tape: &GradTape,
    h: Var,
    bias: ResponseBias,
    pair: &TrainingPair,
    vars: &[Var],
) -> Result<(f32, Vec<Tensor>)> {
    let shifted = tape.value(h).map(|v| v + bias.0);
    let (loss, seed) = logistic_loss(&shifted, &pair.label)?;
    let db = seed.sum();
    let grads = tape.backward(h, seed)?;
    let mut out = collect(&grads, tape, vars);
    out.push(Tensor::vector(vec![db]));
    Ok((loss, out))
}

fn appearance_vars(
    anet: &ANet,
    tape: &mut GradTape,
    pair: &TrainingPair,
    profile: &NetworkProfile,
) -> Result<(Var, Vec<Var>)> {
    let params = anet.net.record_params(tape, true);
    let z = tape.leaf(pair.exemplar(profile)?, false);
    let x = tape.leaf(pair.search.clone(), false);
    let fz = anet.net.record_forward(tape, &params, z)?;
    let fx = anet.net.record_forward(tape, &params, x)?;
    let h = record_appearance_response(tape, fz, fx)?;
    Ok((h, params.iter().flat_map(|&(w, b)| [w, b]).collect()))
}

fn semantic_vars(
    snet: &SNet,
    head: &SemanticHead,
    tape: &mut GradTape,
    pair: &TrainingPair,
    profile: &NetworkProfile,
) -> Result<(Var, Vec<Var>)> {
    // S-Net runs off the tape: its outputs enter as constants.
    let zs = snet.forward(&pair.context)?;
    let xs = snet.forward(&pair.search)?;
    let vars = record_semantic_params(head, tape, true);
    let h = record_semantic_response(tape, head, &vars, &zs, &xs, profile)?;
    Ok((h, vars.ordered()))
}

/// Loss of the appearance response on one pair and its gradient for every
/// A-Net parameter block in visiting order, followed by the bias gradient.
pub fn appearance_objective(
    model: &(ANet, ResponseBias),
    pair: &TrainingPair,
    profile: &NetworkProfile,
) -> Result<(f32, Vec<Tensor>)> {
    let mut tape = GradTape::new();
    let (h, vars) = appearance_vars(&model.0, &mut tape, pair, profile)?;
    finish(&tape, h, model.1, pair, &vars)
}

/// As [`appearance_objective`] for the semantic head (fusion, then attention).
pub fn semantic_objective(
    snet: &SNet,
    model: &(SemanticHead, ResponseBias),
    pair: &TrainingPair,
    profile: &NetworkProfile,
) -> Result<(f32, Vec<Tensor>)> {
    let mut tape = GradTape::new();
    let (h, vars) = semantic_vars(snet, &model.0, &mut tape, pair, profile)?;
    finish(&tape, h, model.1, pair, &vars)
}

/// Loss of `lambda h_a + (1 - lambda) h_s + bias`. Gradients follow the
/// parameter order of `((anet, head), bias)`. At `lambda` 1 or 0 the unused
/// branch is not evaluated and its gradients are zero.
pub fn joint_objective(
    snet: &SNet,
    model: &((ANet, SemanticHead), ResponseBias),
    pair: &TrainingPair,
    profile: &NetworkProfile,
    lambda: f32,
) -> Result<(f32, Vec<Tensor>)> {
    let ((anet, head), bias) = model;
    if lambda == 1.0 {
        let mut tape = GradTape::new();
        let (h, vars) = appearance_vars(anet, &mut tape, pair, profile)?;
        let (l, mut g) = finish(&tape, h, *bias, pair, &vars)?;
        let db = g.pop().expect("bias gradient");
        g.extend(zeros_like(head));
        g.push(db);
        return Ok((l, g));
    }
    if lambda == 0.0 {
        let mut tape = GradTape::new();
        let (h, vars) = semantic_vars(snet, head, &mut tape, pair, profile)?;
        let (l, g) = finish(&tape, h, *bias, pair, &vars)?;
        let mut all = zeros_like(anet);
        all.extend(g);
        return Ok((l, all));
    }
    let mut tape = GradTape::new();
    let (ha, mut vars) = appearance_vars(anet, &mut tape, pair, profile)?;
    let (hs, svars) = semantic_vars(snet, head, &mut tape, pair, profile)?;
    vars.extend(svars);
    let a = tape.affine(ha, lambda, 0.0);
    let s = tape.affine(hs, 1.0 - lambda, 0.0);
    let h = tape.add(a, s)?;
    finish(&tape, h, *bias, pair, &vars)
}

/// Mini-batch momentum SGD driven by a sample source and a per-sample objective.
/// Losses and gradients are averaged over each batch.
pub fn optimize<P: Parameterized, S>(
    params: &mut P,
    cfg: &SgdConfig,
    mut next_sample: impl FnMut() -> Result<S>,
    objective: impl Fn(&P, &S) -> Result<(f32, Vec<Tensor>)>,
) -> Result<LossLog> {
    cfg.validate()?;
    let mut opt = Momentum::new(params, cfg.momentum);
    let mut log = LossLog::default();
    let inv = 1.0 / cfg.batch_size as f32;
    for epoch in 1..=cfg.epochs() {
        let lr = cfg.lr_at(epoch);
        for step in 1..=cfg.steps_per_epoch {
            let mut loss = 0.0f32;
            let mut acc: Option<Vec<Tensor>> = None;
            for _ in 0..cfg.batch_size {
                let sample = next_sample()?;
                let (l, g) = objective(params, &sample)?;
                loss += l;
                match &mut acc {
                    Some(a) => {
                        for (x, y) in a.iter_mut().zip(&g) {
                            x.add_assign(y)?;
                        }
                    }
                    None => acc = Some(g),
                }
            }
            let loss = loss * inv;
            let grads: Vec<Tensor> = acc
                .unwrap_or_default()
                .into_iter()
                .map(|g| g.scale(inv))
                .collect();
            if !loss.is_finite() || !grads.iter().all(Tensor::all_finite) {
                return Err(Error::NonFinite(format!(
                    "loss {loss} at epoch {epoch}, batch {step}"
                )));
            }
            opt.step(params, &grads, lr)?;
            log.0.push(LossRecord { epoch, step, loss });
            if step == cfg.steps_per_epoch {
                log::info!("epoch {epoch}: lr {lr}, last batch loss {loss:.5}");
            }
        }
    }
    Ok(log)
}

fn sampler_source<'a, 'b>(
    sampler: &'b PairSampler<'a>,
    rng: &'b mut ChaCha8Rng,
) -> impl FnMut() -> Result<TrainingPair> + 'b {
    move || sampler.sample(rng)
}

/// Trains A-Net from scratch on pairs drawn from `sequences`.
pub fn train_appearance(
    sequences: &[Sequence],
    profile: &NetworkProfile,
    cfg: &SgdConfig,
) -> Result<(ANet, LossLog)> {
    let anet = ANet::init(profile, &mut stream(cfg.seed, Stream::AppearanceInit));
    fit_appearance(anet, sequences, profile, cfg)
}

/// Continues training `anet`; the response bias starts at zero.
pub fn fit_appearance(
    anet: ANet,
    sequences: &[Sequence],
    profile: &NetworkProfile,
    cfg: &SgdConfig,
) -> Result<(ANet, LossLog)> {
    let sampler = PairSampler::new(sequences, profile, cfg.label_radius)?;
    let mut rng = stream(cfg.seed, Stream::Sampler);
    let mut model = (anet, ResponseBias(0.0));
    let log = optimize(
        &mut model,
        cfg,
        sampler_source(&sampler, &mut rng),
        |m, p| appearance_objective(m, p, profile),
    )?;
    Ok((model.0, log))
}

/// Trains a fresh fusion/attention head on top of the frozen `snet`.
pub fn train_semantic(
    sequences: &[Sequence],
    snet: &SNet,
    variant: SemanticVariant,
    profile: &NetworkProfile,
    cfg: &SgdConfig,
) -> Result<(SemanticHead, LossLog)> {
    let head = SemanticHead::init(
        profile,
        variant,
        &mut stream(cfg.seed, Stream::SemanticInit),
    );
    fit_semantic(head, snet, sequences, profile, cfg)
}

pub fn fit_semantic(
    head: SemanticHead,
    snet: &SNet,
    sequences: &[Sequence],
    profile: &NetworkProfile,
    cfg: &SgdConfig,
) -> Result<(SemanticHead, LossLog)> {
    let sampler = PairSampler::new(sequences, profile, cfg.label_radius)?;
    let mut rng = stream(cfg.seed, Stream::Sampler);
    let mut model = (head, ResponseBias(0.0));
    let log = optimize(
        &mut model,
        cfg,
        sampler_source(&sampler, &mut rng),
        |m, p| semantic_objective(snet, m, p, profile),
    )?;
    Ok((model.0, log))
}

/// Trains both branches on the loss of the combined response.
pub fn train_joint(
    sequences: &[Sequence],
    snet: &SNet,
    variant: SemanticVariant,
    profile: &NetworkProfile,
    cfg: &SgdConfig,
    lambda: f32,
) -> Result<(ANet, SemanticHead, LossLog)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!("lambda {lambda} outside [0, 1]")));
    }
    let anet = ANet::init(profile, &mut stream(cfg.seed, Stream::AppearanceInit));
    let head = SemanticHead::init(
        profile,
        variant,
        &mut stream(cfg.seed, Stream::SemanticInit),
    );
    let mut model = ((anet, head), ResponseBias(0.0));
    let sampler = PairSampler::new(sequences, profile, cfg.label_radius)?;
    let mut rng = stream(cfg.seed, Stream::Sampler);
    let log = optimize(
        &mut model,
        cfg,
        sampler_source(&sampler, &mut rng),
        |m, p| joint_objective(snet, m, p, profile, lambda),
    )?;
    let ((anet, head), _) = model;
    Ok((anet, head, log))
}
