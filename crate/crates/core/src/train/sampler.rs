use super::labels::{make_label_map, LabelMap};
use crate::data::Sequence;
use crate::error::{Error, Result};
use crate::networks::NetworkProfile;
use crate::tensor::{self, Tensor};
use crate::tracker::crop_with_context;
use rand::Rng;
use std::sync::Arc;

/// One training example: target-plus-context patch `z^s` from one frame and
/// a search patch `X` from another, both centred on the ground truth.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub context: Tensor,
    pub search: Tensor,
    pub label: Arc<LabelMap>,
}

impl TrainingPair {
    /// The appearance exemplar `z`: the centre `target_size` square of `z^s`.
    pub fn exemplar(&self, profile: &NetworkProfile) -> Result<Tensor> {
        let s = profile.search_size;
        let t = profile.target_size;
        let off = (s - t) / 2;
        tensor::crop(&self.context, off, off, t, t)
    }
}

pub struct PairSampler<'a> {
    sequences: &'a [Sequence],
    profile: &'a NetworkProfile,
    label: Arc<LabelMap>,
    usable: Vec<usize>,
}

/// Frames that have both an image and an annotation.
fn annotated(seq: &Sequence) -> usize {
    seq.len().min(seq.groundtruth.len())
}

const MAX_REDRAWS: usize = 1000;

impl<'a> PairSampler<'a> {
    pub fn new(
        sequences: &'a [Sequence],
        profile: &'a NetworkProfile,
        label_radius: f32,
    ) -> Result<Self> {
        let usable: Vec<usize> = (0..sequences.len())
            .filter(|&i| annotated(&sequences[i]) >= 2)
            .collect();
        if usable.is_empty() {
            return Err(Error::config(
                "training needs at least one sequence with two or more annotated frames",
            ));
        }
        Ok(PairSampler {
            sequences,
            profile,
            label: Arc::new(make_label_map(profile.response_size, label_radius)?),
            usable,
        })
    }

    pub fn label(&self) -> &LabelMap {
        &self.label
    }

    /// Draws a pair; frames with zero-area annotations are skipped with a
    /// warning and redrawn.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<TrainingPair> {
        for _ in 0..MAX_REDRAWS {
            let seq = &self.sequences[self.usable[rng.gen_range(0..self.usable.len())]];
            let n = annotated(seq);
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            let (bi, bj) = (seq.groundtruth[i], seq.groundtruth[j]);
            if !bi.is_valid() || !bj.is_valid() {
                log::warn!(
                    "{}: skipping degenerate ground truth at frame {} or {}",
                    seq.name,
                    i,
                    j
                );
                continue;
            }
            let size = self.profile.search_size;
            return Ok(TrainingPair {
                context: crop_with_context(&*seq.frame(i)?, &bi, size, self.profile)?,
                search: crop_with_context(&*seq.frame(j)?, &bj, size, self.profile)?,
                label: Arc::clone(&self.label),
            });
        }
        Err(Error::config(
            "could not draw a pair with valid annotations",
        ))
    }
}
