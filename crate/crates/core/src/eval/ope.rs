use super::metrics::{center_error, iou, precision_curve, success_curve, HEADLINE_ERROR_THRESHOLD};
use crate::data::{load_sequence, Sequence};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::tracker::{TrackConfig, TrackerModels, TrackerState};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

/// Anything that produces one box per frame, the first being the
/// initialisation box.
pub trait SequenceTracker: Sync {
    fn name(&self) -> String;
    fn track(&self, seq: &Sequence) -> Result<Vec<BoundingBox>>;
}

/// Replays the ground truth: the metric upper bound.
pub struct GroundTruthReplay;

impl SequenceTracker for GroundTruthReplay {
    fn name(&self) -> String {
        "ground-truth".into()
    }

    fn track(&self, seq: &Sequence) -> Result<Vec<BoundingBox>> {
        Ok(seq.groundtruth.clone())
    }
}

/// Never moves from the first box.
pub struct StaticTracker;

impl SequenceTracker for StaticTracker {
    fn name(&self) -> String {
        "static".into()
    }

    fn track(&self, seq: &Sequence) -> Result<Vec<BoundingBox>> {
        Ok(vec![seq.first_box(); seq.len()])
    }
}

pub struct SiameseTracker {
    pub name: String,
    pub models: TrackerModels,
    pub config: TrackConfig,
}

impl SiameseTracker {
    pub fn new(name: impl Into<String>, models: TrackerModels, config: TrackConfig) -> Self {
        SiameseTracker {
            name: name.into(),
            models,
            config,
        }
    }
}

impl SequenceTracker for SiameseTracker {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn track(&self, seq: &Sequence) -> Result<Vec<BoundingBox>> {
        track_sequence(&self.models, self.config.clone(), seq)
    }
}

pub fn track_sequence(
    models: &TrackerModels,
    config: TrackConfig,
    seq: &Sequence,
) -> Result<Vec<BoundingBox>> {
    let mut state = TrackerState::init(&*seq.frame(0)?, seq.first_box(), models, config)?;
    let mut out = Vec::with_capacity(seq.len());
    out.push(seq.first_box());
    for i in 1..seq.len() {
        out.push(state.track_frame(&*seq.frame(i)?)?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Every frame of every sequence counts once.
    #[default]
    PerFrame,
    /// Curves are computed per sequence, then averaged over sequences.
    PerVideo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub name: String,
    pub ious: Vec<f32>,
    pub center_errors: Vec<f32>,
    pub seconds: f64,
    /// Set when the sequence could not be loaded or tracked.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tracker: String,
    pub averaging: Averaging,
    pub sequences: Vec<SequenceResult>,
    pub success_curve: Vec<f32>,
    pub precision_curve: Vec<f32>,
    pub auc: f32,
    pub precision_20: f32,
    /// Frames per second over all tracked frames; reported, never compared.
    #[serde(skip)]
    pub fps: f64,
}

impl EvalReport {
    /// Curves as CSV: `kind,threshold,value`.
    pub fn curves_csv(&self) -> String {
        let mut s = String::from("kind,threshold,value\n");
        for (t, v) in super::metrics::iou_thresholds()
            .iter()
            .zip(&self.success_curve)
        {
            s.push_str(&format!("success,{t},{v}\n"));
        }
        for (t, v) in self.precision_curve.iter().enumerate() {
            s.push_str(&format!("precision,{t},{v}\n"));
        }
        s
    }

    /// The report with timings removed, for reproducibility comparisons.
    pub fn without_timing(&self) -> EvalReport {
        let mut r = self.clone();
        r.fps = 0.0;
        r.sequences.iter_mut().for_each(|s| s.seconds = 0.0);
        r
    }
}

fn score(name: &str, predicted: &[BoundingBox], truth: &[BoundingBox]) -> Result<SequenceResult> {
    if predicted.len() != truth.len() {
        return Err(Error::contract(format!(
            "{name}: tracker returned {} boxes for {} frames",
            predicted.len(),
            truth.len()
        )));
    }
    let pairs: Vec<_> = predicted
        .iter()
        .zip(truth)
        .filter(|(_, t)| t.is_valid())
        .collect();
    Ok(SequenceResult {
        name: name.to_string(),
        ious: pairs.iter().map(|(p, t)| iou(p, t)).collect(),
        center_errors: pairs.iter().map(|(p, t)| center_error(p, t)).collect(),
        seconds: 0.0,
        error: None,
    })
}

/// Source of sequences: already loaded, or directories loaded on demand.
pub enum Dataset<'a> {
    Loaded(&'a [Sequence]),
    Dirs(&'a [PathBuf]),
}

impl Dataset<'_> {
    fn len(&self) -> usize {
        match self {
            Dataset::Loaded(s) => s.len(),
            Dataset::Dirs(d) => d.len(),
        }
    }

    fn run(&self, i: usize, tracker: &dyn SequenceTracker) -> SequenceResult {
        let (name, outcome) = match self {
            Dataset::Loaded(s) => (s[i].name.clone(), run_one(&s[i], tracker)),
            Dataset::Dirs(d) => (
                d[i].display().to_string(),
                load_sequence(&d[i]).and_then(|s| run_one(&s, tracker)),
            ),
        };
        outcome.unwrap_or_else(|e| {
            log::warn!("{name}: {e}");
            SequenceResult {
                name,
                ious: Vec::new(),
                center_errors: Vec::new(),
                seconds: 0.0,
                error: Some(e.to_string()),
            }
        })
    }
}

fn run_one(seq: &Sequence, tracker: &dyn SequenceTracker) -> Result<SequenceResult> {
    let start = Instant::now();
    let boxes = tracker.track(seq)?;
    let mut r = score(&seq.name, &boxes, &seq.groundtruth)?;
    r.seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

/// One-pass evaluation: initialise on the first frame, track to the end,
/// score every annotated frame. Sequences are sharded over `jobs` threads;
/// results keep dataset order. Numeric failures abort; load failures and
/// input errors are recorded on the sequence and skipped.
pub fn run_ope(
    tracker: &dyn SequenceTracker,
    data: Dataset<'_>,
    averaging: Averaging,
    jobs: usize,
) -> Result<EvalReport> {
    let n = data.len();
    let slots: Vec<Mutex<Option<SequenceResult>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= n {
            break;
        }
        let r = data.run(i, tracker);
        *slots[i].lock().expect("result slot") = Some(r);
    };
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(work);
            }
        });
    }
    let sequences: Vec<SequenceResult> = slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("result slot")
                .expect("every sequence visited")
        })
        .collect();
    if let Some(bad) = sequences.iter().find(|s| {
        s.error
            .as_deref()
            .is_some_and(|e| e.starts_with("non-finite"))
    }) {
        return Err(Error::NonFinite(format!(
            "{}: {}",
            bad.name,
            bad.error.as_deref().unwrap_or("")
        )));
    }
    aggregate(tracker.name(), sequences, averaging)
}

pub fn aggregate(
    tracker: String,
    sequences: Vec<SequenceResult>,
    averaging: Averaging,
) -> Result<EvalReport> {
    let scored: Vec<&SequenceResult> = sequences
        .iter()
        .filter(|s| s.error.is_none() && !s.ious.is_empty())
        .collect();
    if scored.is_empty() {
        return Err(Error::config("no sequence could be evaluated"));
    }
    let (success, precision) = match averaging {
        Averaging::PerFrame => {
            let ious: Vec<f32> = scored.iter().flat_map(|s| s.ious.iter().copied()).collect();
            let errs: Vec<f32> = scored
                .iter()
                .flat_map(|s| s.center_errors.iter().copied())
                .collect();
            (success_curve(&ious)?, precision_curve(&errs)?)
        }
        Averaging::PerVideo => {
            let mut sc = Vec::new();
            let mut pc = Vec::new();
            for s in &scored {
                sc.push(success_curve(&s.ious)?);
                pc.push(precision_curve(&s.center_errors)?);
            }
            (mean_curve(&sc), mean_curve(&pc))
        }
    };
    let p20 = precision[HEADLINE_ERROR_THRESHOLD as usize];
    let frames: usize = scored.iter().map(|s| s.ious.len()).sum();
    let secs: f64 = scored.iter().map(|s| s.seconds).sum();
    Ok(EvalReport {
        tracker,
        averaging,
        auc: success.iter().sum::<f32>() / success.len() as f32,
        precision_20: p20,
        success_curve: success,
        precision_curve: precision,
        fps: if secs > 0.0 {
            frames as f64 / secs
        } else {
            0.0
        },
        sequences,
    })
}

fn mean_curve(curves: &[Vec<f32>]) -> Vec<f32> {
    let n = curves.len() as f32;
    (0..curves[0].len())
        .map(|i| curves.iter().map(|c| c[i]).sum::<f32>() / n)
        .collect()
}
