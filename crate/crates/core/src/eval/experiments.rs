use super::ope::{run_ope, Averaging, Dataset, SiameseTracker};
use crate::data::Sequence;
use crate::error::Result;
use crate::networks::{ANet, NetworkProfile, SNet, SemanticHead, SemanticVariant};
use crate::tracker::{TrackConfig, TrackerModels};
use serde::{Deserialize, Serialize};

/// Mixing weights tried by the search.
pub const LAMBDA_GRID: [f32; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f32,
    pub auc: f32,
    pub precision_20: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    /// Highest AUC; the smallest lambda wins ties.
    pub best: f32,
    pub table: Vec<LambdaRow>,
}

impl LambdaSearch {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,auc,precision_20\n");
        for r in &self.table {
            s.push_str(&format!("{},{},{}\n", r.lambda, r.auc, r.precision_20));
        }
        s
    }
}

/// Evaluates every grid value on `validation` and keeps the best by AUC.
pub fn grid_search_lambda(
    models: &TrackerModels,
    base: &TrackConfig,
    validation: &[Sequence],
    jobs: usize,
) -> Result<LambdaSearch> {
    let mut table = Vec::with_capacity(LAMBDA_GRID.len());
    for &lambda in &LAMBDA_GRID {
        let tracker = SiameseTracker::new(
            format!("lambda={lambda}"),
            models.clone(),
            TrackConfig {
                lambda,
                ..base.clone()
            },
        );
        let r = run_ope(
            &tracker,
            Dataset::Loaded(validation),
            Averaging::PerFrame,
            jobs,
        )?;
        log::info!(
            "lambda {lambda}: auc {:.4} precision@20 {:.4}",
            r.auc,
            r.precision_20
        );
        table.push(LambdaRow {
            lambda,
            auc: r.auc,
            precision_20: r.precision_20,
        });
    }
    let best = table
        .iter()
        .fold(None::<LambdaRow>, |b, r| match b {
            Some(b) if b.auc >= r.auc => Some(b),
            _ => Some(*r),
        })
        .expect("non-empty grid")
        .lambda;
    Ok(LambdaSearch { best, table })
}

/// The six ablation rows: appearance only, semantic only, and the
/// combined tracker with each semantic refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AblationVariant {
    AppearanceOnly,
    SemanticOnly,
    Combined,
    CombinedMultilevel,
    CombinedAttention,
    CombinedFull,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 6] = [
        AblationVariant::AppearanceOnly,
        AblationVariant::SemanticOnly,
        AblationVariant::Combined,
        AblationVariant::CombinedMultilevel,
        AblationVariant::CombinedAttention,
        AblationVariant::CombinedFull,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationVariant::AppearanceOnly => "App",
            AblationVariant::SemanticOnly => "Sem",
            AblationVariant::Combined => "App+Sem",
            AblationVariant::CombinedMultilevel => "App+Sem+ML",
            AblationVariant::CombinedAttention => "App+Sem+Att",
            AblationVariant::CombinedFull => "App+Sem+ML+Att",
        }
    }

    pub fn uses_appearance(self) -> bool {
        self != AblationVariant::SemanticOnly
    }

    /// The semantic head this row needs, if any.
    pub fn semantic_variant(self) -> Option<SemanticVariant> {
        let (multilevel, attention) = match self {
            AblationVariant::AppearanceOnly => return None,
            AblationVariant::SemanticOnly | AblationVariant::Combined => (false, false),
            AblationVariant::CombinedMultilevel => (true, false),
            AblationVariant::CombinedAttention => (false, true),
            AblationVariant::CombinedFull => (true, true),
        };
        Some(SemanticVariant {
            multilevel,
            attention,
        })
    }
}

/// Trained components from which every ablation row is assembled.
#[derive(Clone, Debug)]
pub struct AblationModels {
    pub profile: NetworkProfile,
    pub anet: Option<ANet>,
    pub snet: Option<SNet>,
    pub heads: Vec<SemanticHead>,
}

impl AblationModels {
    pub fn head(&self, v: SemanticVariant) -> Option<&SemanticHead> {
        self.heads.iter().find(|h| h.variant == v)
    }

    /// Models for one row, or `None` when a component is missing.
    pub fn assemble(&self, row: AblationVariant) -> Option<TrackerModels> {
        let anet = if row.uses_appearance() {
            Some(self.anet.clone()?)
        } else {
            None
        };
        let semantic = match row.semantic_variant() {
            Some(v) => Some((self.snet.clone()?, self.head(v)?.clone())),
            None => None,
        };
        TrackerModels::new(self.profile.clone(), anet, semantic).ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub label: String,
    /// `None` when the row's models were not available.
    pub auc: Option<f32>,
    pub precision_20: Option<f32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub lambda: f32,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, v: AblationVariant) -> &AblationRow {
        self.rows
            .iter()
            .find(|r| r.variant == v)
            .expect("all six rows present")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,app,sem,ml,att,auc,precision_20\n");
        let fmt = |v: Option<f32>| v.map_or_else(|| "absent".to_string(), |x| x.to_string());
        for r in &self.rows {
            let sv = r.variant.semantic_variant();
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.label,
                r.variant.uses_appearance() as u8,
                sv.is_some() as u8,
                sv.is_some_and(|v| v.multilevel) as u8,
                sv.is_some_and(|v| v.attention) as u8,
                fmt(r.auc),
                fmt(r.precision_20)
            ));
        }
        s
    }
}

/// Evaluates all six rows on `data` with mixing weight `lambda`.
pub fn ablation_table(
    models: &AblationModels,
    base: &TrackConfig,
    lambda: f32,
    data: &[Sequence],
    jobs: usize,
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for v in AblationVariant::ALL {
        let (auc, precision_20) = match models.assemble(v) {
            Some(m) => {
                let cfg = TrackConfig {
                    lambda,
                    ..base.clone()
                };
                let r = run_ope(
                    &SiameseTracker::new(v.label(), m, cfg),
                    Dataset::Loaded(data),
                    Averaging::PerFrame,
                    jobs,
                )?;
                log::info!(
                    "{}: auc {:.4} precision@20 {:.4}",
                    v.label(),
                    r.auc,
                    r.precision_20
                );
                (Some(r.auc), Some(r.precision_20))
            }
            None => (None, None),
        };
        rows.push(AblationRow {
            variant: v,
            label: v.label().to_string(),
            auc,
            precision_20,
        });
    }
    Ok(AblationTable { lambda, rows })
}
