//! Score -> weights -> diversify composition shared by the service and the
//! simulator.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, CategoryId};
use crate::click_model::{ClickModel, ScoringPlan};
use crate::diversifier::{candidate_pool, celf_select, DiversifyError, ScoredItem, SelectionState};
use crate::diversifier::CategoryWeights;
use crate::weights::{DecayPolicy, DirichletPrior, SmoothingPriors, WeightsError, DEFAULT_MIN_CLICKS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    /// Multiplier applied to Thompson scores before diversification.
    pub score_scale: f64,
    pub page_size: usize,
    /// Pages diversified per materialized window.
    pub window_pages: usize,
    pub min_clicks: u64,
    /// Categories per user counted in the co-interest matrix.
    pub top_k: usize,
    pub smoothing: SmoothingPriors,
    /// Symmetric Dirichlet prior entry.
    pub dirichlet_concentration: f64,
    pub decay: DecayPolicy,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            score_scale: 1.0,
            page_size: 60,
            window_pages: 10,
            min_clicks: DEFAULT_MIN_CLICKS,
            top_k: 5,
            smoothing: SmoothingPriors::default(),
            dirichlet_concentration: 1.0,
            decay: DecayPolicy::default(),
        }
    }
}

impl RankingConfig {
    pub fn window(&self) -> usize {
        self.page_size * self.window_pages
    }

    pub fn dirichlet(&self, d: usize) -> Result<DirichletPrior, WeightsError> {
        DirichletPrior::uniform(d, self.dirichlet_concentration)
    }
}

/// Catalog items resolved against one model generation, ready for repeated
/// Thompson draws.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    ids: Vec<Arc<str>>,
    categories: Vec<CategoryId>,
    plan: ScoringPlan,
    d: usize,
}

impl CandidateSet {
    pub fn new(catalog: &Catalog, model: &ClickModel) -> Self {
        Self {
            ids: catalog.items().iter().map(|i| Arc::from(i.item_id.as_str())).collect(),
            categories: catalog.items().iter().map(|i| i.category).collect(),
            plan: model.plan(catalog.items()),
            d: catalog.d(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn categories(&self) -> &[CategoryId] {
        &self.categories
    }

    fn scored(&self, scores: Vec<f64>, scale: f64) -> Vec<ScoredItem> {
        self.ids
            .iter()
            .zip(&self.categories)
            .zip(scores)
            .map(|((id, &c), s)| ScoredItem {
                item_id: Arc::clone(id),
                category: c,
                score: s * scale,
            })
            .collect()
    }

    /// One Thompson draw over the whole catalog, scores scaled by `scale`.
    pub fn thompson<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Vec<ScoredItem> {
        self.scored(self.plan.thompson(rng), scale)
    }

    /// Posterior-mean scores.
    pub fn expected(&self, scale: f64) -> Vec<ScoredItem> {
        self.scored(self.plan.expected(), scale)
    }
}

/// The first `depth` items of the diversified ranking of `scored`.
pub fn rank_window(
    scored: &[ScoredItem],
    weights: &CategoryWeights,
    depth: usize,
) -> Result<SelectionState, DiversifyError> {
    let depth = depth.min(scored.len());
    let pool = candidate_pool(scored, weights.d(), depth);
    celf_select(&pool, weights, depth)
}
