//! Category weights for the diversifier.
//!
//! Global weights are smoothed per-category CTRs. Personalized weights are
//! the posterior mean of a Dirichlet prior updated with the user's category
//! click counts, diffused through a co-interest matrix whose column `j`
//! holds the fraction of category-`j` clickers who also clicked each other
//! category.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::CategoryId;
use crate::diversifier::CategoryWeights;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightsError {
    #[error("smoothing priors must be finite and positive")]
    InvalidPriors,
    #[error("Dirichlet prior entries must be finite and positive")]
    InvalidDirichlet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("category {category} out of range for d={d}")]
    CategoryOutOfRange { category: CategoryId, d: usize },
    #[error("diffused weights have zero mass")]
    ZeroMass,
}

/// Per-category click and view counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub clicks: Vec<u64>,
    pub views: Vec<u64>,
}

impl CategoryStats {
    pub fn new(d: usize) -> Self {
        Self {
            clicks: vec![0; d],
            views: vec![0; d],
        }
    }

    pub fn d(&self) -> usize {
        self.clicks.len()
    }

    pub fn merge(&mut self, other: &CategoryStats) {
        for (a, b) in self.clicks.iter_mut().zip(&other.clicks) {
            *a += b;
        }
        for (a, b) in self.views.iter_mut().zip(&other.views) {
            *a += b;
        }
    }

    /// CTR per category with clicks clamped to views.
    pub fn ctr(&self) -> Vec<f64> {
        self.clicks
            .iter()
            .zip(&self.views)
            .map(|(&c, &v)| if v == 0 { 0.0 } else { c.min(v) as f64 / v as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingPriors {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SmoothingPriors {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 9.0,
        }
    }
}

impl SmoothingPriors {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, WeightsError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(alpha) && ok(beta) {
            Ok(Self { alpha, beta })
        } else {
            Err(WeightsError::InvalidPriors)
        }
    }
}

/// `w_j = (c_j + alpha) / (v_j + alpha + beta)`.
pub fn global_weights(stats: &CategoryStats, priors: SmoothingPriors) -> CategoryWeights {
    let w = stats
        .clicks
        .iter()
        .zip(&stats.views)
        .map(|(&c, &v)| (c as f64 + priors.alpha) / (v as f64 + priors.alpha + priors.beta))
        .collect();
    CategoryWeights::new(w).expect("smoothed CTR is finite and positive")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrior(Vec<f64>);

impl DirichletPrior {
    pub fn new(alpha0: Vec<f64>) -> Result<Self, WeightsError> {
        if !alpha0.is_empty() && alpha0.iter().all(|a| a.is_finite() && *a > 0.0) {
            Ok(Self(alpha0))
        } else {
            Err(WeightsError::InvalidDirichlet)
        }
    }

    pub fn uniform(d: usize, concentration: f64) -> Result<Self, WeightsError> {
        Self::new(vec![concentration; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }
}

/// How old click signals are deducted from a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPolicy {
    /// Keep only the most recent `max_events` clicks.
    pub max_events: Option<usize>,
    /// Drop clicks with `ts < now - max_age`.
    pub max_age: Option<i64>,
}

impl Default for DecayPolicy {
    fn default() -> Self {
        Self {
            max_events: Some(200),
            max_age: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub click_counts: Vec<f64>,
    pub total_clicks: u64,
    /// Recent clicks, oldest first.
    pub events: VecDeque<(CategoryId, i64)>,
}

impl UserProfile {
    pub fn new(user_id: impl Into<String>, d: usize) -> Self {
        Self {
            user_id: user_id.into(),
            click_counts: vec![0.0; d],
            total_clicks: 0,
            events: VecDeque::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.click_counts.len()
    }

    pub fn record_click(&mut self, category: CategoryId, ts: i64) -> Result<(), WeightsError> {
        if category >= self.d() {
            return Err(WeightsError::CategoryOutOfRange {
                category,
                d: self.d(),
            });
        }
        self.click_counts[category] += 1.0;
        self.total_clicks += 1;
        self.events.push_back((category, ts));
        Ok(())
    }

    fn forget_oldest(&mut self) {
        if let Some((c, _)) = self.events.pop_front() {
            self.click_counts[c] = (self.click_counts[c] - 1.0).max(0.0);
            self.total_clicks = self.total_clicks.saturating_sub(1);
        }
    }

    /// Deducts clicks that fall outside the policy window at time `now`.
    /// Returns how many were removed.
    pub fn decay(&mut self, policy: &DecayPolicy, now: i64) -> usize {
        let before = self.events.len();
        if let Some(age) = policy.max_age {
            let cutoff = now.saturating_sub(age);
            let (kept, dropped): (VecDeque<_>, VecDeque<_>) =
                self.events.drain(..).partition(|&(_, ts)| ts >= cutoff);
            self.events = kept;
            for (c, _) in dropped {
                self.click_counts[c] = (self.click_counts[c] - 1.0).max(0.0);
                self.total_clicks = self.total_clicks.saturating_sub(1);
            }
        }
        if let Some(cap) = policy.max_events {
            while self.events.len() > cap {
                self.forget_oldest();
            }
        }
        before - self.events.len()
    }
}

/// Posterior mean `(c_u + alpha0) / ||c_u + alpha0||_1`.
pub fn user_posterior_mean(
    profile: &UserProfile,
    prior: &DirichletPrior,
) -> Result<CategoryWeights, WeightsError> {
    if profile.d() != prior.d() {
        return Err(WeightsError::Dimension {
            expected: prior.d(),
            got: profile.d(),
        });
    }
    let post: Vec<f64> = profile
        .click_counts
        .iter()
        .zip(prior.as_slice())
        .map(|(c, a)| c + a)
        .collect();
    let total: f64 = post.iter().sum();
    Ok(CategoryWeights::new(post.into_iter().map(|x| x / total).collect())
        .expect("posterior mean is finite and positive"))
}

/// Column-conditional co-click matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoInterestMatrix {
    d: usize,
    data: Vec<f64>,
}

impl CoInterestMatrix {
    pub fn identity(d: usize) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        Self { d, data }
    }

    /// Builds from explicit row-major entries, which must lie in `[0, 1]`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, WeightsError> {
        let d = rows.len();
        let mut data = Vec::with_capacity(d * d);
        for row in rows {
            if row.len() != d {
                return Err(WeightsError::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
            if row.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(WeightsError::ZeroMass);
            }
            data.extend(row);
        }
        Ok(Self { d, data })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.d.max(1))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// The `top_k` most-clicked categories of one user's click sequence, ties
/// broken by lower category index.
pub fn top_categories(clicks: &[CategoryId], d: usize, top_k: usize) -> Vec<CategoryId> {
    let mut counts = vec![0usize; d];
    for &c in clicks {
        counts[c] += 1;
    }
    let mut cats: Vec<CategoryId> = (0..d).filter(|&c| counts[c] > 0).collect();
    cats.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    cats.truncate(top_k);
    cats
}

/// `M_ij = |users clicking i and j| / |users clicking j|` over each user's top
/// categories. Columns nobody clicked become the unit vector `e_j`.
pub fn build_co_interest<'a>(
    d: usize,
    users: impl IntoIterator<Item = &'a [CategoryId]>,
    top_k: usize,
) -> Result<CoInterestMatrix, WeightsError> {
    let mut both = vec![0u64; d * d];
    for clicks in users {
        if let Some(&bad) = clicks.iter().find(|&&c| c >= d) {
            return Err(WeightsError::CategoryOutOfRange { category: bad, d });
        }
        let top = top_categories(clicks, d, top_k);
        for &i in &top {
            for &j in &top {
                both[i * d + j] += 1;
            }
        }
    }
    let mut m = CoInterestMatrix::identity(d);
    for j in 0..d {
        let clickers = both[j * d + j];
        if clickers == 0 {
            continue;
        }
        for i in 0..d {
            m.data[i * d + j] = both[i * d + j] as f64 / clickers as f64;
        }
    }
    Ok(m)
}

/// `M w / ||M w||_1`.
pub fn diffuse(m: &CoInterestMatrix, w: &CategoryWeights) -> Result<CategoryWeights, WeightsError> {
    if m.d() != w.d() {
        return Err(WeightsError::Dimension {
            expected: m.d(),
            got: w.d(),
        });
    }
    let mw = m.mul_vec(w.as_slice());
    let total: f64 = mw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(WeightsError::ZeroMass);
    }
    Ok(CategoryWeights::new(mw.into_iter().map(|x| x / total).collect())
        .expect("normalized non-negative vector"))
}

/// Power iteration of [`diffuse`] from the uniform vector until successive
/// iterates differ by less than `tol` in L1. Returns the vector and the
/// iteration count.
pub fn leading_eigenvector(
    m: &CoInterestMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<(CategoryWeights, usize), WeightsError> {
    let d = m.d();
    let mut w = CategoryWeights::uniform(d, 1.0 / d as f64);
    for it in 1..=max_iter {
        let next = diffuse(m, &w)?;
        let delta: f64 = next
            .as_slice()
            .iter()
            .zip(w.as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum();
        w = next;
        if delta < tol {
            return Ok((w, it));
        }
    }
    Ok((w, max_iter))
}

/// Users with fewer clicks than this keep the global weights.
pub const DEFAULT_MIN_CLICKS: u64 = 10;

pub fn is_personalized(profile: Option<&UserProfile>, min_clicks: u64) -> bool {
    profile.is_some_and(|p| p.total_clicks >= min_clicks)
}

/// Diffused personal weights for users with at least `min_clicks` clicks,
/// global weights otherwise.
pub fn effective_weights(
    profile: Option<&UserProfile>,
    global: &CategoryWeights,
    m: &CoInterestMatrix,
    prior: &DirichletPrior,
    min_clicks: u64,
) -> Result<CategoryWeights, WeightsError> {
    match profile {
        Some(p) if is_personalized(Some(p), min_clicks) => diffuse(m, &user_posterior_mean(p, prior)?),
        _ => Ok(global.clone()),
    }
}
