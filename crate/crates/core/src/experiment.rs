//! The end-to-end desk experiment: generate data, pretrain S-Net, train
//! each branch separately, pick lambda on a validation suite, then run the
//! ablation (and optionally the joint-training comparison) on the benchmark.

use crate::data::{classification_set, generate_synthetic, random_specs, Sequence, SuiteConfig};
use crate::error::Result;
use crate::eval::{
    ablation_table, grid_search_lambda, run_ope, AblationModels, AblationTable, AblationVariant,
    Averaging, Dataset, LambdaSearch, SiameseTracker,
};
use crate::networks::{ANet, NetworkProfile, SNet, SemanticHead, SemanticVariant};
use crate::tracker::{TrackConfig, TrackerModels};
use crate::train::{
    pretrain_snet_classifier, train_appearance, train_joint, train_semantic, LossLog, SgdConfig,
};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationConfig {
    pub images: usize,
    pub holdout: f32,
    pub seed: u64,
    pub sgd: SgdConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub profile: String,
    pub train_suite: SuiteConfig,
    pub validation_suite: SuiteConfig,
    pub benchmark_suite: SuiteConfig,
    pub classification: ClassificationConfig,
    pub appearance: SgdConfig,
    pub semantic: SgdConfig,
    pub track: TrackConfig,
    /// Also train the basic two-branch model jointly and evaluate it.
    pub joint: bool,
    pub jobs: usize,
}

impl ExperimentConfig {
    /// The fixed-seed desk benchmark: 20 sequences of 60 frames.
    pub fn desk() -> Self {
        let schedule = |lr: f32, seed: u64| {
            let mut c = SgdConfig::paper();
            c.phases[0].lr = lr;
            c.phases[1].lr = lr / 10.0;
            c.seed = seed;
            c
        };
        let mut classify = SgdConfig::constant(20, 50, 0.01);
        classify.batch_size = 16;
        classify.seed = 7;
        ExperimentConfig {
            profile: "desk".into(),
            train_suite: SuiteConfig {
                count: 40,
                frames: 40,
                seed: 11,
                ..SuiteConfig::benchmark()
            },
            validation_suite: SuiteConfig {
                count: 8,
                seed: 23,
                ..SuiteConfig::benchmark()
            },
            benchmark_suite: SuiteConfig::benchmark(),
            classification: ClassificationConfig {
                images: 2000,
                holdout: 0.25,
                seed: 7,
                sgd: classify,
            },
            appearance: schedule(0.03, 1),
            semantic: schedule(0.03, 2),
            track: TrackConfig::default(),
            joint: true,
            jobs: 1,
        }
    }
}

pub fn generate_suite(cfg: &SuiteConfig) -> Result<Vec<Sequence>> {
    random_specs(cfg).iter().map(generate_synthetic).collect()
}

/// Everything the experiment trains.
#[derive(Clone, Debug)]
pub struct TrainedModels {
    pub profile: NetworkProfile,
    pub snet: SNet,
    pub pretrain_accuracy: f32,
    pub anet: ANet,
    pub appearance_log: LossLog,
    pub heads: Vec<(SemanticHead, LossLog)>,
}

impl TrainedModels {
    pub fn ablation_models(&self) -> AblationModels {
        AblationModels {
            profile: self.profile.clone(),
            anet: Some(self.anet.clone()),
            snet: Some(self.snet.clone()),
            heads: self.heads.iter().map(|(h, _)| h.clone()).collect(),
        }
    }
}

pub const HEAD_VARIANTS: [SemanticVariant; 4] = [
    SemanticVariant::BASIC,
    SemanticVariant {
        multilevel: true,
        attention: false,
    },
    SemanticVariant {
        multilevel: false,
        attention: true,
    },
    SemanticVariant::FULL,
];

pub fn pretrain(cfg: &ExperimentConfig, profile: &NetworkProfile) -> Result<(SNet, f32)> {
    let c = &cfg.classification;
    let images: Vec<_> = classification_set(c.images, profile.classify_size, c.seed)
        .into_iter()
        .map(|(t, k)| (t, k.index()))
        .collect();
    let (snet, report) = pretrain_snet_classifier(&images, profile, &c.sgd, c.holdout)?;
    log::info!(
        "S-Net pretraining: held-out accuracy {:.3}",
        report.heldout_accuracy
    );
    Ok((snet, report.heldout_accuracy))
}

/// Pretrains S-Net, then trains A-Net and all four semantic heads separately.
pub fn train_all(cfg: &ExperimentConfig, train: &[Sequence]) -> Result<TrainedModels> {
    let profile = NetworkProfile::by_name(&cfg.profile)?;
    let (snet, pretrain_accuracy) = pretrain(cfg, &profile)?;
    let (anet, appearance_log) = train_appearance(train, &profile, &cfg.appearance)?;
    let heads = HEAD_VARIANTS
        .iter()
        .map(|&v| train_semantic(train, &snet, v, &profile, &cfg.semantic))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedModels {
        profile,
        snet,
        pretrain_accuracy,
        anet,
        appearance_log,
        heads,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointComparison {
    pub lambda: f32,
    pub separate_auc: f32,
    pub joint_auc: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub pretrain_accuracy: f32,
    pub lambda_search: LambdaSearch,
    pub ablation: AblationTable,
    pub joint: Option<JointComparison>,
    pub seconds: f64,
}

impl ExperimentReport {
    fn auc(&self, v: AblationVariant) -> f32 {
        self.ablation.row(v).auc.unwrap_or(f32::NAN)
    }

    /// Combined two-branch AUC is at least each single branch's.
    pub fn combined_beats_singles(&self) -> bool {
        let c = self.auc(AblationVariant::Combined);
        c >= self.auc(AblationVariant::AppearanceOnly)
            && c >= self.auc(AblationVariant::SemanticOnly)
    }

    pub fn full_beats_appearance(&self) -> bool {
        self.auc(AblationVariant::CombinedFull) >= self.auc(AblationVariant::AppearanceOnly)
    }
}

/// Runs everything after training: lambda search on the validation suite
/// with the full model, the ablation on the benchmark, and the optional
/// joint comparison.
pub fn evaluate(
    cfg: &ExperimentConfig,
    models: &TrainedModels,
    train: &[Sequence],
    validation: &[Sequence],
    benchmark: &[Sequence],
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let ablation_models = models.ablation_models();
    let full = ablation_models
        .assemble(AblationVariant::CombinedFull)
        .expect("all components trained");
    let lambda_search = grid_search_lambda(&full, &cfg.track, validation, cfg.jobs)?;
    let lambda = lambda_search.best;
    let ablation = ablation_table(&ablation_models, &cfg.track, lambda, benchmark, cfg.jobs)?;
    let joint = if cfg.joint {
        let (anet, head, _) = train_joint(
            train,
            &models.snet,
            SemanticVariant::BASIC,
            &models.profile,
            &cfg.appearance,
            lambda,
        )?;
        let m = TrackerModels::new(
            models.profile.clone(),
            Some(anet),
            Some((models.snet.clone(), head)),
        )?;
        let track = TrackConfig {
            lambda,
            ..cfg.track.clone()
        };
        let r = run_ope(
            &SiameseTracker::new("joint", m, track),
            Dataset::Loaded(benchmark),
            Averaging::PerFrame,
            cfg.jobs,
        )?;
        Some(JointComparison {
            lambda,
            separate_auc: ablation
                .row(AblationVariant::Combined)
                .auc
                .unwrap_or(f32::NAN),
            joint_auc: r.auc,
        })
    } else {
        None
    };
    Ok(ExperimentReport {
        pretrain_accuracy: models.pretrain_accuracy,
        lambda_search,
        ablation,
        joint,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(TrainedModels, ExperimentReport)> {
    let start = Instant::now();
    let train = generate_suite(&cfg.train_suite)?;
    let validation = generate_suite(&cfg.validation_suite)?;
    let benchmark = generate_suite(&cfg.benchmark_suite)?;
    let models = train_all(cfg, &train)?;
    let mut report = evaluate(cfg, &models, &train, &validation, &benchmark)?;
    report.seconds = start.elapsed().as_secs_f64();
    Ok((models, report))
}
