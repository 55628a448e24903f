//! The `twinbranch` command line. Every subcommand reads an optional JSON
//! [`RunConfig`] and lets flags override it.
//!
//! A model directory holds `anet.twb`, `snet.twb` and one
//! `head-<variant>.twb` per trained semantic head, next to the loss CSVs.

use crate::data::weights::{load_anet, load_head, load_snet, save_anet, save_head, save_snet};
use crate::data::{
    classification_set, format_track, generate_synthetic, list_sequence_dirs,
    load_classification_set, load_sequence, random_specs, write_classification_set, write_sequence,
    Sequence, SuiteConfig, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_table, grid_search_lambda, run_ope, AblationModels, Averaging, Dataset,
    GroundTruthReplay, SequenceTracker, SiameseTracker, StaticTracker,
};
use crate::experiment::{ExperimentConfig, HEAD_VARIANTS};
use crate::networks::{NetworkProfile, SemanticVariant};
use crate::tracker::{
    attention_csv, dump_attention, ResponseDumpWriter, TrackConfig, TrackerModels, TrackerState,
};
use crate::train::{
    fit_appearance, fit_semantic, pretrain_snet_classifier, train_appearance, train_joint,
    train_semantic, LrPhase, SgdConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const ANET_FILE: &str = "anet.twb";
pub const SNET_FILE: &str = "snet.twb";

pub fn head_file(variant: SemanticVariant) -> String {
    format!("head-{}.twb", variant.label())
}

/// Which tracker components to use: the four ablation axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantFlags {
    pub appearance: bool,
    pub semantic: bool,
    pub multilevel: bool,
    pub attention: bool,
}

impl Default for VariantFlags {
    fn default() -> Self {
        VariantFlags {
            appearance: true,
            semantic: true,
            multilevel: true,
            attention: true,
        }
    }
}

impl VariantFlags {
    /// Parses a `+`-separated set of `app`, `sem`, `ml`, `att`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut f = VariantFlags {
            appearance: false,
            semantic: false,
            multilevel: false,
            attention: false,
        };
        for tok in s.split('+').map(|t| t.trim().to_ascii_lowercase()) {
            match tok.as_str() {
                "app" => f.appearance = true,
                "sem" => f.semantic = true,
                "ml" => f.multilevel = true,
                "att" => f.attention = true,
                _ => {
                    return Err(Error::config(format!(
                        "unknown variant component '{tok}' (use app, sem, ml, att)"
                    )))
                }
            }
        }
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.appearance && !self.semantic {
            return Err(Error::config(
                "variant needs the appearance or the semantic branch",
            ));
        }
        if (self.multilevel || self.attention) && !self.semantic {
            return Err(Error::config(
                "multilevel and attention require the semantic branch",
            ));
        }
        Ok(())
    }

    pub fn semantic_variant(&self) -> SemanticVariant {
        SemanticVariant {
            multilevel: self.multilevel,
            attention: self.attention,
        }
    }
}

/// Head components for training: `basic` or any `+`-set of `ml` and `att`
/// (`sem` and `app` are accepted and ignored).
pub fn parse_head_variant(s: &str) -> Result<SemanticVariant> {
    let mut v = SemanticVariant::BASIC;
    for tok in s.split('+').map(|t| t.trim().to_ascii_lowercase()) {
        match tok.as_str() {
            "basic" | "sem" | "app" => {}
            "ml" => v.multilevel = true,
            "att" => v.attention = true,
            _ => {
                return Err(Error::config(format!(
                    "unknown head component '{tok}' (use ml, att or basic)"
                )))
            }
        }
    }
    Ok(v)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdOverrides {
    /// Replaces the whole schedule.
    pub phases: Option<Vec<LrPhase>>,
    pub steps_per_epoch: Option<usize>,
    pub batch_size: Option<usize>,
    pub momentum: Option<f32>,
    pub label_radius: Option<f32>,
}

impl SgdOverrides {
    fn apply(&self, cfg: &mut SgdConfig) {
        if let Some(p) = &self.phases {
            cfg.phases = p.clone();
        }
        if let Some(v) = self.steps_per_epoch {
            cfg.steps_per_epoch = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.momentum {
            cfg.momentum = v;
        }
        if let Some(v) = self.label_radius {
            cfg.label_radius = v;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunPaths {
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub sequence: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Settings shared by all subcommands, loadable from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `desk` or `paper`.
    pub profile: String,
    pub variant: VariantFlags,
    pub paths: RunPaths,
    pub seed: u64,
    pub lambda: f32,
    pub sgd: SgdOverrides,
    pub track: TrackConfig,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: "desk".into(),
            variant: VariantFlags::default(),
            paths: RunPaths::default(),
            seed: 1,
            lambda: TrackConfig::default().lambda,
            sgd: SgdOverrides::default(),
            track: TrackConfig::default(),
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn profile(&self) -> Result<NetworkProfile> {
        NetworkProfile::by_name(&self.profile)
    }

    pub fn track_config(&self) -> Result<TrackConfig> {
        let t = TrackConfig {
            lambda: self.lambda,
            ..self.track.clone()
        };
        t.validate()?;
        Ok(t)
    }

    /// The tracker-training schedule with overrides and the seed applied.
    pub fn tracker_sgd(&self) -> Result<SgdConfig> {
        let mut cfg = ExperimentConfig::desk().appearance;
        self.sgd.apply(&mut cfg);
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "twinbranch",
    version,
    about = "Two-branch Siamese single-object tracker"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render synthetic sequences (and optionally classification images).
    GenSynthetic(GenArgs),
    /// Pretrain S-Net on labelled shape images and save `snet.twb`.
    PretrainSnet(PretrainArgs),
    /// Train one branch, or both jointly, on a sequence directory.
    Train(TrainArgs),
    /// Track one sequence and write its boxes.
    Track(TrackArgs),
    /// One-pass evaluation over a dataset, written as a JSON report.
    Eval(EvalArgs),
    /// Pick lambda from the fixed grid by AUC.
    LambdaSearch(LambdaArgs),
    /// AUC of the six ablation variants.
    Ablation(AblationArgs),
    /// Attention weights for the first frame, sorted by weight.
    DumpAttention(DumpArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON run configuration; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.profile {
            cfg.profile = p.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.variant.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// A single sequence spec, a list of specs, or a suite description.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write this many labelled classification images.
    #[arg(long)]
    pub classification: Option<usize>,
    /// Where classification images go (default `<out>/classification`).
    #[arg(long)]
    pub classification_out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    /// Directory with `labels.csv`; synthetic images are drawn when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long)]
    pub holdout: Option<f32>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Appearance,
    Semantic,
    Joint,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SgdFlags {
    /// Replaces the schedule with this many epochs at a constant rate.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Rate of the first phase; later phases keep their ratio to it.
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long)]
    pub steps_per_epoch: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl SgdFlags {
    fn apply(&self, cfg: &mut SgdConfig) {
        if let Some(lr) = self.lr {
            let first = cfg.phases.first().map_or(lr, |p| p.lr);
            for p in &mut cfg.phases {
                p.lr = if first > 0.0 { p.lr / first * lr } else { lr };
            }
        }
        if let Some(e) = self.epochs {
            let lr = cfg.phases.first().map_or(0.0, |p| p.lr);
            cfg.phases = vec![LrPhase { epochs: e, lr }];
        }
        if let Some(v) = self.steps_per_epoch {
            cfg.steps_per_epoch = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub branch: Branch,
    /// Training sequences (a dataset root or one sequence).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model directory to write to; S-Net is read from here.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// S-Net checkpoint, if not `<model>/snet.twb`.
    #[arg(long)]
    pub snet: Option<PathBuf>,
    /// Semantic head components, e.g. `sem+ml+att`.
    #[arg(long)]
    pub variant: Option<String>,
    /// Combination weight for joint training.
    #[arg(long)]
    pub lambda: Option<f32>,
    /// Continue from the checkpoint already in the model directory.
    #[arg(long)]
    pub resume: bool,
    #[command(flatten)]
    pub sgd: SgdFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ModelFlags {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Components to use, e.g. `app+sem+ml+att` or `app`.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub lambda: Option<f32>,
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// Box file to write (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Binary dump of the per-frame response maps.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackerKind {
    Siamese,
    GroundTruth,
    Static,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "siamese")]
    pub tracker: TrackerKind,
    /// Average curves per sequence instead of per frame.
    #[arg(long)]
    pub per_video: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON report (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Success and precision curves as CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct LambdaArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct AblationArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f32>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub common: Common,
}

/// 0 on success, 3 for numeric failures, 2 for everything else.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::PretrainSnet(a) => pretrain_snet(a),
        Command::Train(a) => train(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::LambdaSearch(a) => lambda_search(a),
        Command::Ablation(a) => ablation(a),
        Command::DumpAttention(a) => dump(a),
    }
}

fn required(flag: &Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.clone().or_else(|| file.clone()).ok_or_else(|| {
        Error::config(format!(
            "--{name} is required (or set paths.{name} in the config)"
        ))
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))?;
            }
            fs::write(p, text).map_err(|e| Error::io_at(p, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))
}

/// Accepted shapes of a `--spec` file.
#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    One(Box<SyntheticSpec>),
    Many(Vec<SyntheticSpec>),
    Suite { suite: SuiteConfig },
}

fn parse_spec_file(path: &Path) -> Result<Vec<SyntheticSpec>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let parsed: SpecFile = serde_json::from_value(value.clone()).map_err(|_| {
        // untagged errors say nothing useful; retry as the most common shape
        let detail = match serde_json::from_value::<SyntheticSpec>(value) {
            Err(e) => e.to_string(),
            Ok(_) => "unrecognised layout".into(),
        };
        Error::config(format!(
            "{}: expected a sequence spec, a list of specs or {{\"suite\": ...}}: {detail}",
            path.display()
        ))
    })?;
    let specs = match parsed {
        SpecFile::One(s) => vec![*s],
        SpecFile::Many(v) => v,
        SpecFile::Suite { suite } => random_specs(&suite),
    };
    if specs.is_empty() {
        return Err(Error::config(format!(
            "{} describes no sequences",
            path.display()
        )));
    }
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

fn gen_synthetic(a: GenArgs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let specs = parse_spec_file(&a.spec)?;
    create_dir(&a.out)?;
    let single = specs.len() == 1;
    for spec in &specs {
        let seq = generate_synthetic(spec)?;
        let dir = if single {
            a.out.clone()
        } else {
            a.out.join(&spec.name)
        };
        write_sequence(&seq, &dir)?;
        log::info!("wrote {} frames to {}", seq.len(), dir.display());
    }
    if let Some(n) = a.classification {
        let profile = cfg.profile()?;
        let dir = a
            .classification_out
            .unwrap_or_else(|| a.out.join("classification"));
        write_classification_set(
            &dir,
            &classification_set(n, profile.classify_size, cfg.seed),
        )?;
        log::info!("wrote {n} classification images to {}", dir.display());
    }
    Ok(())
}

fn pretrain_snet(a: PretrainArgs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let profile = cfg.profile()?;
    let model = required(&a.model, &cfg.paths.model, "model")?;
    let base = ExperimentConfig::desk().classification;
    let mut sgd = base.sgd.clone();
    cfg.sgd.apply(&mut sgd);
    SgdFlags {
        epochs: a.epochs,
        lr: a.lr,
        ..SgdFlags::default()
    }
    .apply(&mut sgd);
    sgd.seed = cfg.seed;
    let images = match a.data.or(cfg.paths.data.clone()) {
        Some(dir) => load_classification_set(dir)?,
        None => classification_set(
            a.images.unwrap_or(base.images),
            profile.classify_size,
            cfg.seed,
        )
        .into_iter()
        .map(|(t, k)| (t, k.index()))
        .collect(),
    };
    let (snet, report) =
        pretrain_snet_classifier(&images, &profile, &sgd, a.holdout.unwrap_or(base.holdout))?;
    create_dir(&model)?;
    save_snet(&snet, &profile, model.join(SNET_FILE))?;
    write_text(Some(&model.join("pretrain-loss.csv")), &report.log.to_csv())?;
    println!(
        "train accuracy {:.4}, held-out accuracy {:.4}",
        report.train_accuracy, report.heldout_accuracy
    );
    Ok(())
}

fn load_dataset(root: &Path) -> Result<Vec<Sequence>> {
    list_sequence_dirs(root)?
        .iter()
        .map(|d| load_sequence(d)?.into_memory())
        .collect()
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let profile = cfg.profile()?;
    let data = required(&a.data, &cfg.paths.data, "data")?;
    let model = required(&a.model, &cfg.paths.model, "model")?;
    let mut sgd = cfg.tracker_sgd()?;
    a.sgd.apply(&mut sgd);
    sgd.validate()?;
    let variant = match &a.variant {
        Some(v) => parse_head_variant(v)?,
        None => cfg.variant.semantic_variant(),
    };
    let seqs = load_dataset(&data)?;
    create_dir(&model)?;
    let snet_path = a.snet.clone().unwrap_or_else(|| model.join(SNET_FILE));
    let start = Instant::now();
    let (log, name) = match a.branch {
        Branch::Appearance => {
            let path = model.join(ANET_FILE);
            let (anet, log) = if a.resume {
                fit_appearance(load_anet(&profile, &path)?, &seqs, &profile, &sgd)?
            } else {
                train_appearance(&seqs, &profile, &sgd)?
            };
            save_anet(&anet, &profile, &path)?;
            (log, "loss-appearance.csv".to_string())
        }
        Branch::Semantic => {
            let snet = load_snet(&profile, &snet_path)?;
            let path = model.join(head_file(variant));
            let (head, log) = if a.resume {
                let head = load_head(&profile, &path)?;
                if head.variant != variant {
                    return Err(Error::config(format!(
                        "{} holds a different head variant",
                        path.display()
                    )));
                }
                fit_semantic(head, &snet, &seqs, &profile, &sgd)?
            } else {
                train_semantic(&seqs, &snet, variant, &profile, &sgd)?
            };
            save_head(&head, &profile, &path)?;
            (log, format!("loss-semantic-{}.csv", variant.label()))
        }
        Branch::Joint => {
            if a.resume {
                return Err(Error::config(
                    "joint training always starts from fresh weights",
                ));
            }
            let snet = load_snet(&profile, &snet_path)?;
            let lambda = a.lambda.unwrap_or(cfg.lambda);
            let (anet, head, log) = train_joint(&seqs, &snet, variant, &profile, &sgd, lambda)?;
            save_anet(&anet, &profile, model.join(ANET_FILE))?;
            save_head(&head, &profile, model.join(head_file(variant)))?;
            (log, "loss-joint.csv".to_string())
        }
    };
    write_text(Some(&model.join(&name)), &log.to_csv())?;
    let means = log.epoch_means();
    println!(
        "{} steps in {:.1}s, final epoch loss {:.4}",
        log.0.len(),
        start.elapsed().as_secs_f64(),
        means.last().copied().unwrap_or(f32::NAN)
    );
    Ok(())
}

/// Run settings for a command that uses trained models.
struct Resolved {
    cfg: RunConfig,
    profile: NetworkProfile,
    model: PathBuf,
    flags: VariantFlags,
}

fn resolve_model(common: &Common, m: &ModelFlags) -> Result<Resolved> {
    let mut cfg = common.resolve()?;
    if let Some(l) = m.lambda {
        cfg.lambda = l;
    }
    let flags = match &m.variant {
        Some(v) => VariantFlags::parse(v)?,
        None => cfg.variant,
    };
    Ok(Resolved {
        profile: cfg.profile()?,
        model: required(&m.model, &cfg.paths.model, "model")?,
        flags,
        cfg,
    })
}

pub fn load_models(
    dir: &Path,
    profile: &NetworkProfile,
    flags: VariantFlags,
) -> Result<TrackerModels> {
    flags.validate()?;
    let anet = if flags.appearance {
        Some(load_anet(profile, dir.join(ANET_FILE))?)
    } else {
        None
    };
    let semantic = if flags.semantic {
        let variant = flags.semantic_variant();
        let path = dir.join(head_file(variant));
        let head = load_head(profile, &path)?;
        if head.variant != variant {
            return Err(Error::format(format!(
                "{} holds a different head variant",
                path.display()
            )));
        }
        Some((load_snet(profile, dir.join(SNET_FILE))?, head))
    } else {
        None
    };
    TrackerModels::new(profile.clone(), anet, semantic)
}

fn track(a: TrackArgs) -> Result<()> {
    let r = resolve_model(&a.common, &a.model)?;
    let seq_dir = required(&a.sequence, &r.cfg.paths.sequence, "sequence")?;
    let models = load_models(&r.model, &r.profile, r.flags)?;
    let seq = load_sequence(&seq_dir)?;
    let mut dump = match &a.responses {
        Some(p) => Some(ResponseDumpWriter::new(BufWriter::new(
            fs::File::create(p).map_err(|e| Error::io_at(p, e))?,
        ))),
        None => None,
    };
    let start = Instant::now();
    let mut state = TrackerState::init(
        &*seq.frame(0)?,
        seq.first_box(),
        &models,
        r.cfg.track_config()?,
    )?;
    let mut boxes = vec![seq.first_box()];
    for i in 1..seq.len() {
        boxes.push(state.track_frame(&*seq.frame(i)?)?);
        if let (Some(w), Some(resp)) = (dump.as_mut(), state.last_responses()) {
            w.write_frame(i, resp)?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if let Some(w) = dump {
        use std::io::Write;
        w.into_inner().flush()?;
    }
    write_text(
        a.out.as_deref().or(r.cfg.paths.out.as_deref()),
        &format_track(&boxes),
    )?;
    eprintln!(
        "{} frames in {secs:.2}s ({:.1} fps)",
        seq.len(),
        seq.len() as f64 / secs.max(1e-9)
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let data = required(&a.data, &cfg.paths.data, "data")?;
    let dirs = list_sequence_dirs(&data)?;
    let tracker: Box<dyn SequenceTracker> = match a.tracker {
        TrackerKind::GroundTruth => Box::new(GroundTruthReplay),
        TrackerKind::Static => Box::new(StaticTracker),
        TrackerKind::Siamese => {
            let r = resolve_model(&a.common, &a.model)?;
            let models = load_models(&r.model, &r.profile, r.flags)?;
            Box::new(SiameseTracker::new(
                "twinbranch",
                models,
                r.cfg.track_config()?,
            ))
        }
    };
    let averaging = if a.per_video {
        Averaging::PerVideo
    } else {
        Averaging::PerFrame
    };
    let report = run_ope(
        tracker.as_ref(),
        Dataset::Dirs(&dirs),
        averaging,
        a.jobs.unwrap_or(cfg.jobs),
    )?;
    if let Some(p) = &a.curves {
        write_text(Some(p), &report.curves_csv())?;
    }
    let out = a.out.as_deref().or(cfg.paths.out.as_deref());
    write_text(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    eprintln!(
        "AUC {:.4}, precision@20 {:.4}, {:.1} fps",
        report.auc, report.precision_20, report.fps
    );
    Ok(())
}

fn lambda_search(a: LambdaArgs) -> Result<()> {
    let r = resolve_model(&a.common, &a.model)?;
    let data = required(&a.data, &r.cfg.paths.data, "data")?;
    let models = load_models(&r.model, &r.profile, r.flags)?;
    let seqs = load_dataset(&data)?;
    let search = grid_search_lambda(
        &models,
        &r.cfg.track_config()?,
        &seqs,
        a.jobs.unwrap_or(r.cfg.jobs),
    )?;
    write_text(
        a.out.as_deref().or(r.cfg.paths.out.as_deref()),
        &search.to_csv(),
    )?;
    eprintln!("best lambda {}", search.best);
    Ok(())
}

fn ablation(a: AblationArgs) -> Result<()> {
    let mut cfg = a.common.resolve()?;
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    let profile = cfg.profile()?;
    let data = required(&a.data, &cfg.paths.data, "data")?;
    let model = required(&a.model, &cfg.paths.model, "model")?;
    let anet = optional(load_anet(&profile, model.join(ANET_FILE)))?;
    let snet = optional(load_snet(&profile, model.join(SNET_FILE)))?;
    let mut heads = Vec::new();
    for v in HEAD_VARIANTS {
        if let Some(h) = optional(load_head(&profile, model.join(head_file(v))))? {
            heads.push(h);
        }
    }
    let models = AblationModels {
        profile,
        anet,
        snet,
        heads,
    };
    let seqs = load_dataset(&data)?;
    let table = ablation_table(
        &models,
        &cfg.track_config()?,
        cfg.lambda,
        &seqs,
        a.jobs.unwrap_or(cfg.jobs),
    )?;
    write_text(
        a.out.as_deref().or(cfg.paths.out.as_deref()),
        &table.to_csv(),
    )
}

/// Missing checkpoint files become `None`; corrupt ones stay errors.
fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Io { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn dump(a: DumpArgs) -> Result<()> {
    let r = resolve_model(&a.common, &a.model)?;
    if !r.flags.attention {
        return Err(Error::config(
            "dump-attention needs a variant with attention",
        ));
    }
    let seq_dir = required(&a.sequence, &r.cfg.paths.sequence, "sequence")?;
    let models = load_models(&r.model, &r.profile, r.flags)?;
    let seq = load_sequence(&seq_dir)?;
    let state = TrackerState::init(
        &*seq.frame(0)?,
        seq.first_box(),
        &models,
        r.cfg.track_config()?,
    )?;
    write_text(
        a.out.as_deref().or(r.cfg.paths.out.as_deref()),
        &attention_csv(&dump_attention(&state)),
    )
}
