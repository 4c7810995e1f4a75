//! Synthetic catalogs, user populations, browsing sessions and two-arm
//! experiments.
//!
//! The browsing model is synthetic: a user scans the ranked stream in order,
//! continues after each view with probability `p_scroll`, and clicks an item
//! of category `c` with probability
//! `min(1, base_click_rate * d * interest[c]) * (1 - boredom)^(run - 1)`,
//! where `run` is the length of the current streak of same-category views.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    synthetic_department, Catalog, CatalogError, CategoryId, CategoryScheme, RawItem, DEFAULT_PRICE_EDGES,
};
use crate::click_model::{active_keys, ClickModel, Outcome};
use crate::diversifier::{CategoryWeights, DiversifyError, LazyGreedy, ScoredItem};
use crate::pipeline::{rank_window, CandidateSet, RankingConfig};
use crate::stats::{mean_var, welch_t_test, StatsError, WelchResult};
use crate::weights::{
    build_co_interest, effective_weights, global_weights, CategoryStats, CoInterestMatrix, DirichletPrior,
    UserProfile, WeightsError,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Diversify(#[from] DiversifyError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SimError> {
    Err(SimError::InvalidSpec(msg.into()))
}

/// Derives an independent stream seed from a parent seed and a tag.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer over the combined input
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogSpec {
    pub n_items: usize,
    pub d: usize,
    pub brands: usize,
    pub colors: usize,
    pub sizes: usize,
}

impl Default for CatalogSpec {
    fn default() -> Self {
        Self {
            n_items: 1000,
            d: 20,
            brands: 40,
            colors: 12,
            sizes: 6,
        }
    }
}

/// Synthetic catalog under [`CategoryScheme::synthetic`]: categories are
/// drawn uniformly, then department and price are set to land in them.
pub fn gen_catalog(spec: &CatalogSpec, seed: u64) -> Result<(Vec<RawItem>, Catalog), SimError> {
    if spec.d == 0 || spec.brands == 0 || spec.colors == 0 || spec.sizes == 0 {
        return invalid("catalog spec counts must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bands = DEFAULT_PRICE_EDGES.len() + 1;
    let raws: Vec<RawItem> = (0..spec.n_items)
        .map(|i| {
            let c = rng.random_range(0..spec.d);
            let band = c % bands;
            let lo = if band == 0 { 1.0 } else { DEFAULT_PRICE_EDGES[band - 1] };
            let hi = DEFAULT_PRICE_EDGES.get(band).copied().unwrap_or(2.0 * lo);
            let price = (rng.random_range(lo..hi) * 100.0).floor() / 100.0;
            RawItem {
                item_id: format!("item{i:06}"),
                attributes: BTreeMap::from([
                    ("brand".to_string(), format!("brand{:03}", rng.random_range(0..spec.brands))),
                    ("color".to_string(), format!("color{:02}", rng.random_range(0..spec.colors))),
                    ("department".to_string(), synthetic_department(c / bands)),
                    ("size".to_string(), format!("size{}", rng.random_range(0..spec.sizes))),
                ]),
                price: Some(price.max(lo)),
            }
        })
        .collect();
    let catalog = Catalog::from_raw(raws.clone(), CategoryScheme::synthetic(spec.d))?;
    Ok((raws, catalog))
}

/// Population-level category popularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Popularity {
    Uniform,
    /// `pi_j proportional to (j + 1)^-exponent`.
    Zipf { exponent: f64 },
}

impl Popularity {
    pub fn vector(&self, d: usize) -> Vec<f64> {
        let raw: Vec<f64> = match self {
            Popularity::Uniform => vec![1.0; d],
            Popularity::Zipf { exponent } => (0..d).map(|j| (j as f64 + 1.0).powf(-exponent)).collect(),
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub d: usize,
    pub users: usize,
    /// Scale of the Dirichlet interest draw `Dirichlet(concentration * d * pi)`;
    /// small values give concentrated, heterogeneous users.
    pub interest_concentration: f64,
    pub popularity: Popularity,
    pub base_click_rate: (f64, f64),
    pub p_scroll: (f64, f64),
    pub boredom: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            d: 20,
            users: 10_000,
            interest_concentration: 1.0,
            popularity: Popularity::Zipf { exponent: 1.0 },
            base_click_rate: (0.05, 0.15),
            p_scroll: (0.85, 0.95),
            boredom: 0.3,
        }
    }
}

impl PopulationSpec {
    fn validate(&self) -> Result<(), SimError> {
        let open_unit = |(lo, hi): (f64, f64)| 0.0 < lo && lo <= hi && hi < 1.0;
        if self.d == 0 {
            return invalid("population d must be positive");
        }
        if !(self.interest_concentration.is_finite() && self.interest_concentration > 0.0) {
            return invalid("interest_concentration must be positive");
        }
        if !open_unit(self.base_click_rate) || !open_unit(self.p_scroll) {
            return invalid("base_click_rate and p_scroll ranges must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.boredom) {
            return invalid("boredom must lie in [0, 1]");
        }
        if let Popularity::Zipf { exponent } = self.popularity {
            if !(exponent.is_finite() && exponent >= 0.0) {
                return invalid("zipf exponent must be non-negative");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimUser {
    pub true_interest: Vec<f64>,
    pub base_click_rate: f64,
    pub p_scroll: f64,
    pub boredom: f64,
}

impl SimUser {
    pub fn d(&self) -> usize {
        self.true_interest.len()
    }

    /// Click probability of the `run`-th consecutive view of `category`.
    pub fn click_probability(&self, category: CategoryId, run: usize) -> f64 {
        let affinity = (self.base_click_rate * self.d() as f64 * self.true_interest[category]).clamp(0.0, 1.0);
        affinity * (1.0 - self.boredom).powi(run.saturating_sub(1) as i32)
    }
}

fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
}

pub fn gen_population(spec: &PopulationSpec, seed: u64) -> Result<Vec<SimUser>, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = spec.popularity.vector(spec.d);
    let alpha: Vec<f64> = pi
        .iter()
        .map(|p| p * spec.interest_concentration * spec.d as f64)
        .collect();
    Ok((0..spec.users)
        .map(|_| SimUser {
            true_interest: sample_dirichlet(&alpha, &mut rng),
            base_click_rate: rng.random_range(spec.base_click_rate.0..=spec.base_click_rate.1),
            p_scroll: rng.random_range(spec.p_scroll.0..=spec.p_scroll.1),
            boredom: spec.boredom,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwellSpec {
    /// Parameters of the log-normal per-view dwell time.
    pub log_mean: f64,
    pub log_sd: f64,
}

impl Default for DwellSpec {
    fn default() -> Self {
        Self {
            log_mean: 1.5,
            log_sd: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub item_id: Arc<str>,
    pub category: CategoryId,
    pub clicked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub views: Vec<SessionView>,
    pub duration: f64,
}

impl Session {
    pub fn clicks(&self) -> usize {
        self.views.iter().filter(|v| v.clicked).count()
    }

    pub fn ctr(&self) -> f64 {
        if self.views.is_empty() {
            0.0
        } else {
            self.clicks() as f64 / self.views.len() as f64
        }
    }
}

/// Plays one browsing session over `page`, which yields items in rank order.
pub fn run_session<R: Rng + ?Sized>(
    user: &SimUser,
    page: impl IntoIterator<Item = ScoredItem>,
    dwell: &DwellSpec,
    rng: &mut R,
) -> Session {
    let dwell_dist = LogNormal::new(dwell.log_mean, dwell.log_sd).expect("valid dwell parameters");
    let mut views = Vec::new();
    let mut duration = 0.0;
    let mut run = 0usize;
    let mut last: Option<CategoryId> = None;
    for item in page {
        run = if last == Some(item.category) { run + 1 } else { 1 };
        last = Some(item.category);
        let clicked = rng.random::<f64>() < user.click_probability(item.category, run);
        duration += dwell_dist.sample(rng);
        views.push(SessionView {
            item_id: item.item_id,
            category: item.category,
            clicked,
        });
        if rng.random::<f64>() >= user.p_scroll {
            break;
        }
    }
    Session { views, duration }
}

/// Category-multinomial baseline: per slot, draw a category in proportion to
/// its propensity and emit that category's best remaining item. Categories
/// drop out when exhausted; zero-propensity categories are never drawn.
pub struct MultinomialPage<'a> {
    groups: Vec<Vec<&'a ScoredItem>>,
    propensities: Vec<f64>,
    rng: ChaCha8Rng,
}

pub fn multinomial_baseline_ranker<'a>(
    items: &'a [ScoredItem],
    propensities: &[f64],
    seed: u64,
) -> Result<MultinomialPage<'a>, SimError> {
    if propensities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return invalid("propensities must be finite and non-negative");
    }
    let d = propensities.len();
    let mut groups: Vec<Vec<&ScoredItem>> = vec![Vec::new(); d];
    for it in items {
        if it.category >= d {
            return invalid(format!("item category {} >= {d}", it.category));
        }
        groups[it.category].push(it);
    }
    for g in &mut groups {
        // worst first, so `pop` yields the best remaining item
        g.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| b.item_id.cmp(&a.item_id)));
    }
    Ok(MultinomialPage {
        groups,
        propensities: propensities.to_vec(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl Iterator for MultinomialPage<'_> {
    type Item = ScoredItem;

    fn next(&mut self) -> Option<ScoredItem> {
        let live = |j: usize, g: &Vec<Vec<&ScoredItem>>| !g[j].is_empty();
        let total: f64 = (0..self.groups.len())
            .filter(|&j| live(j, &self.groups))
            .map(|j| self.propensities[j])
            .sum();
        if total <= 0.0 {
            return None;
        }
        let mut u = self.rng.random::<f64>() * total;
        let mut pick = None;
        for j in (0..self.groups.len()).filter(|&j| live(j, &self.groups) && self.propensities[j] > 0.0) {
            pick = Some(j);
            u -= self.propensities[j];
            if u < 0.0 {
                break;
            }
        }
        pick.and_then(|j| self.groups[j].pop()).cloned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversifierKind {
    Submodular,
    Multinomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSource {
    /// Smoothed CTR learned from the arm's own event log.
    Adaptive,
    /// Fixed, hand-set weights.
    Static { weights: Vec<f64> },
    /// Per-user diffused Dirichlet weights, global weights below the click threshold.
    Personalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub name: String,
    pub diversifier: DiversifierKind,
    pub weights: WeightSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub catalog: CatalogSpec,
    /// Each arm draws `population.users` fresh users from this spec.
    pub population: PopulationSpec,
    pub sessions_per_user: usize,
    /// Leading rounds of sessions played but excluded from the report.
    pub burn_in_rounds: usize,
    /// Sessions between click-model and weight refreshes.
    pub refresh_interval: usize,
    /// Sessions played under the control policy (by separate users) to
    /// train the shared starting state of both arms.
    pub warmup_sessions: usize,
    pub max_views: usize,
    pub ranking: RankingConfig,
    pub dwell: DwellSpec,
    pub control: ArmSpec,
    pub treatment: ArmSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let arm = |name: &str| ArmSpec {
            name: name.into(),
            diversifier: DiversifierKind::Submodular,
            weights: WeightSource::Adaptive,
        };
        Self {
            catalog: CatalogSpec::default(),
            population: PopulationSpec::default(),
            sessions_per_user: 1,
            burn_in_rounds: 0,
            refresh_interval: 500,
            warmup_sessions: 5_000,
            max_views: 600,
            ranking: RankingConfig {
                score_scale: 0.1,
                ..RankingConfig::default()
            },
            dwell: DwellSpec::default(),
            control: arm("control"),
            treatment: arm("treatment"),
        }
    }
}

/// The experiment designs this engine's components are compared under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Identical arms.
    #[serde(rename = "aa")]
    AA,
    SubmodularVsMultinomial,
    AdaptiveVsStatic,
    PersonalizedVsGlobal,
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| format!("unknown scenario {s:?}"))
    }
}

/// Static weights that rank categories opposite to their true popularity,
/// scaled to mean 0.1.
pub fn mismatched_static_weights(popularity: &Popularity, d: usize) -> Vec<f64> {
    let mut pi = popularity.vector(d);
    pi.reverse();
    pi.into_iter().map(|p| p * d as f64 * 0.1).collect()
}

impl ExperimentConfig {
    pub fn preset(scenario: Scenario, users_per_arm: usize) -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.population.users = users_per_arm;
        let arm = |name: &str, diversifier, weights| ArmSpec {
            name: name.into(),
            diversifier,
            weights,
        };
        use DiversifierKind::*;
        match scenario {
            Scenario::AA => {}
            Scenario::SubmodularVsMultinomial => {
                cfg.control = arm("multinomial", Multinomial, WeightSource::Adaptive);
                cfg.treatment = arm("submodular", Submodular, WeightSource::Adaptive);
            }
            Scenario::AdaptiveVsStatic => {
                let weights = mismatched_static_weights(&cfg.population.popularity, cfg.catalog.d);
                cfg.control = arm("static", Submodular, WeightSource::Static { weights });
                cfg.treatment = arm("adaptive", Submodular, WeightSource::Adaptive);
            }
            Scenario::PersonalizedVsGlobal => {
                cfg.population.interest_concentration = 0.1;
                cfg.sessions_per_user = 6;
                cfg.burn_in_rounds = 2;
                cfg.control = arm("global", Submodular, WeightSource::Adaptive);
                cfg.treatment = arm("personalized", Submodular, WeightSource::Personalized);
            }
        }
        cfg
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.catalog.d != self.population.d {
            return invalid(format!(
                "catalog d={} does not match population d={}",
                self.catalog.d, self.population.d
            ));
        }
        if self.catalog.n_items == 0 {
            return invalid("catalog must not be empty");
        }
        if self.refresh_interval == 0 || self.sessions_per_user == 0 || self.max_views == 0 {
            return invalid("refresh_interval, sessions_per_user and max_views must be positive");
        }
        if self.burn_in_rounds >= self.sessions_per_user {
            return invalid("burn_in_rounds must be smaller than sessions_per_user");
        }
        for arm in [&self.control, &self.treatment] {
            if let WeightSource::Static { weights } = &arm.weights {
                if weights.len() != self.catalog.d {
                    return invalid(format!("arm {:?}: static weights need d entries", arm.name));
                }
                CategoryWeights::new(weights.clone())?;
            }
        }
        self.population.validate()
    }
}

/// Learned state of one arm: click model, aggregate stats and weights.
#[derive(Clone)]
struct Learner {
    model: ClickModel,
    candidates: CandidateSet,
    stats: CategoryStats,
    global: CategoryWeights,
    co_interest: CoInterestMatrix,
    user_clicks: BTreeMap<u64, Vec<CategoryId>>,
    pending: Vec<(usize, Outcome)>,
    since_refresh: usize,
}

struct World<'a> {
    catalog: &'a Catalog,
    keys: Vec<Vec<String>>,
    index: HashMap<Arc<str>, usize>,
    ranking: &'a RankingConfig,
    dirichlet: DirichletPrior,
    dwell: DwellSpec,
    max_views: usize,
    refresh_interval: usize,
}

impl Learner {
    fn new(world: &World) -> Self {
        let d = world.catalog.d();
        let model = ClickModel::default();
        let stats = CategoryStats::new(d);
        Self {
            candidates: CandidateSet::new(world.catalog, &model),
            global: global_weights(&stats, world.ranking.smoothing),
            model,
            stats,
            co_interest: CoInterestMatrix::identity(d),
            user_clicks: BTreeMap::new(),
            pending: Vec::new(),
            since_refresh: 0,
        }
    }

    fn refresh(&mut self, world: &World) -> Result<(), SimError> {
        for (idx, outcome) in self.pending.drain(..) {
            self.model.update_keys(&world.keys[idx], outcome);
        }
        self.candidates = CandidateSet::new(world.catalog, &self.model);
        self.global = global_weights(&self.stats, world.ranking.smoothing);
        self.co_interest = build_co_interest(
            world.catalog.d(),
            self.user_clicks.values().map(Vec::as_slice),
            world.ranking.top_k,
        )?;
        self.since_refresh = 0;
        Ok(())
    }

    /// Serves and plays one session, recording its feedback.
    #[allow(clippy::too_many_arguments)]
    fn session(
        &mut self,
        world: &World,
        arm: &ArmSpec,
        user: &SimUser,
        user_key: u64,
        profile: Option<&mut UserProfile>,
        clock: i64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Session, SimError> {
        let scored = self.candidates.thompson(rng, world.ranking.score_scale);
        let weights = match &arm.weights {
            WeightSource::Adaptive => self.global.clone(),
            WeightSource::Static { weights } => CategoryWeights::new(weights.clone())?,
            WeightSource::Personalized => effective_weights(
                profile.as_deref(),
                &self.global,
                &self.co_interest,
                &world.dirichlet,
                world.ranking.min_clicks,
            )?,
        };
        let session = match arm.diversifier {
            DiversifierKind::Submodular => {
                let page = LazyGreedy::new(&scored, &weights)?.take(world.max_views);
                run_session(user, page, &world.dwell, rng)
            }
            DiversifierKind::Multinomial => {
                let page = multinomial_baseline_ranker(&scored, weights.as_slice(), rng.random())?
                    .take(world.max_views);
                run_session(user, page, &world.dwell, rng)
            }
        };
        let mut profile = profile;
        for v in &session.views {
            self.stats.views[v.category] += 1;
            let outcome = if v.clicked {
                self.stats.clicks[v.category] += 1;
                self.user_clicks.entry(user_key).or_default().push(v.category);
                if let Some(p) = profile.as_deref_mut() {
                    p.record_click(v.category, clock)?;
                }
                Outcome::Clicked
            } else {
                Outcome::NotClicked
            };
            self.pending.push((world.index[&v.item_id], outcome));
        }
        if let Some(p) = profile {
            p.decay(&world.ranking.decay, clock);
        }
        self.since_refresh += 1;
        if self.since_refresh >= world.refresh_interval {
            self.refresh(world)?;
        }
        Ok(session)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub users: usize,
    pub sessions: usize,
    pub views: u64,
    pub clicks: u64,
    /// Aggregate clicks / views.
    pub ctr: f64,
    pub mean_views: f64,
    pub mean_duration: f64,
    pub mean_session_ctr: f64,
    /// Share of views that repeat the previous view's category.
    pub repeat_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub control: f64,
    pub treatment: f64,
    /// `100 * (treatment - control) / control`.
    pub delta_pct: f64,
    pub welch: WelchResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub control: ArmReport,
    pub treatment: ArmReport,
    pub duration: MetricComparison,
    pub views: MetricComparison,
    /// Aggregate CTR delta; Welch test over per-session CTR.
    pub ctr: MetricComparison,
}

#[derive(Default)]
struct ArmSamples {
    duration: Vec<f64>,
    views: Vec<f64>,
    ctr: Vec<f64>,
    clicks: u64,
    total_views: u64,
    repeats: u64,
}

impl ArmSamples {
    fn push(&mut self, s: &Session) {
        self.duration.push(s.duration);
        self.views.push(s.views.len() as f64);
        self.ctr.push(s.ctr());
        self.clicks += s.clicks() as u64;
        self.total_views += s.views.len() as u64;
        self.repeats += s.views.windows(2).filter(|w| w[0].category == w[1].category).count() as u64;
    }

    fn report(&self, name: &str, users: usize) -> ArmReport {
        let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { mean_var(xs).0 };
        ArmReport {
            name: name.to_string(),
            users,
            sessions: self.views.len(),
            views: self.total_views,
            clicks: self.clicks,
            ctr: if self.total_views == 0 { 0.0 } else { self.clicks as f64 / self.total_views as f64 },
            mean_views: mean(&self.views),
            mean_duration: mean(&self.duration),
            mean_session_ctr: mean(&self.ctr),
            repeat_rate: if self.total_views == 0 { 0.0 } else { self.repeats as f64 / self.total_views as f64 },
        }
    }
}

fn compare(control: f64, treatment: f64, a: &[f64], b: &[f64]) -> Result<MetricComparison, SimError> {
    Ok(MetricComparison {
        control,
        treatment,
        delta_pct: if control == 0.0 { 0.0 } else { 100.0 * (treatment - control) / control },
        welch: welch_t_test(a, b)?,
    })
}

const WARMUP_USER_BASE: u64 = 1 << 40;

/// Plays every round of both arms against one shared learner, sessions of
/// the two arms interleaved in a random order.
fn run_arms(
    world: &World,
    cfg: &ExperimentConfig,
    learner: &mut Learner,
    users: [&[SimUser]; 2],
    seed: u64,
) -> Result<[ArmSamples; 2], SimError> {
    let arms = [&cfg.control, &cfg.treatment];
    let d = world.catalog.d();
    let mut profiles: [Vec<UserProfile>; 2] =
        users.map(|us| (0..us.len()).map(|u| UserProfile::new(u.to_string(), d)).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 4));
    let mut samples = [ArmSamples::default(), ArmSamples::default()];
    let mut order: Vec<(usize, usize)> = (0..2)
        .flat_map(|a| (0..users[a].len()).map(move |u| (a, u)))
        .collect();
    let mut clock = cfg.warmup_sessions as i64;
    for round in 0..cfg.sessions_per_user {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for &(a, u) in &order {
            clock += 1;
            let key = (a as u64 + 1) << 32 | u as u64;
            let profile = Some(&mut profiles[a][u]);
            let session = learner.session(world, arms[a], &users[a][u], key, profile, clock, &mut rng)?;
            if round >= cfg.burn_in_rounds {
                samples[a].push(&session);
            }
        }
    }
    Ok(samples)
}

/// Runs both arms over a shared, warmed-up click model and weight log and
/// compares per-session engagement. Deterministic given `seed`.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentReport, SimError> {
    cfg.validate()?;
    let (_, catalog) = gen_catalog(&cfg.catalog, sub_seed(seed, 1))?;
    let world = World {
        keys: catalog.items().iter().map(active_keys).collect(),
        index: catalog
            .items()
            .iter()
            .enumerate()
            .map(|(i, it)| (Arc::from(it.item_id.as_str()), i))
            .collect(),
        catalog: &catalog,
        ranking: &cfg.ranking,
        dirichlet: cfg.ranking.dirichlet(cfg.catalog.d)?,
        dwell: cfg.dwell,
        max_views: cfg.max_views,
        refresh_interval: cfg.refresh_interval,
    };

    let mut warm = Learner::new(&world);
    if cfg.warmup_sessions > 0 {
        let warm_spec = PopulationSpec {
            users: cfg.warmup_sessions.min(cfg.population.users.max(1)),
            ..cfg.population.clone()
        };
        let warm_users = gen_population(&warm_spec, sub_seed(seed, 2))?;
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 3));
        for s in 0..cfg.warmup_sessions {
            let u = s % warm_users.len();
            warm.session(
                &world,
                &cfg.control,
                &warm_users[u],
                WARMUP_USER_BASE + u as u64,
                None,
                s as i64,
                &mut rng,
            )?;
        }
        warm.refresh(&world)?;
    }

    let control_users = gen_population(&cfg.population, sub_seed(seed, 10))?;
    let treatment_users = gen_population(&cfg.population, sub_seed(seed, 20))?;
    let [control, treatment] = run_arms(&world, cfg, &mut warm, [&control_users, &treatment_users], seed)?;

    let c = control.report(&cfg.control.name, control_users.len());
    let t = treatment.report(&cfg.treatment.name, treatment_users.len());
    Ok(ExperimentReport {
        seed,
        duration: compare(c.mean_duration, t.mean_duration, &control.duration, &treatment.duration)?,
        views: compare(c.mean_views, t.mean_views, &control.views, &treatment.views)?,
        ctr: compare(c.ctr, t.ctr, &control.ctr, &treatment.ctr)?,
        control: c,
        treatment: t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditReport {
    pub sessions: usize,
    /// Impressions per item over the final quarter of sessions.
    pub final_quarter: [u64; 2],
    /// Share of final-quarter impressions won by the higher-CTR item.
    pub best_share: f64,
}

/// Two-item world: every session shows the top-ranked item of a fresh
/// Thompson draw and clicks it with that item's true CTR. Feedback is
/// applied every `refresh_interval` sessions.
pub fn bandit_convergence(
    true_ctr: [f64; 2],
    sessions: usize,
    refresh_interval: usize,
    seed: u64,
) -> Result<BanditReport, SimError> {
    if refresh_interval == 0 || true_ctr.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return invalid("bandit needs CTRs in [0, 1] and a positive refresh interval");
    }
    let raws = (0..2).map(|i| RawItem {
        item_id: format!("arm{i}"),
        attributes: BTreeMap::from([
            ("brand".to_string(), format!("brand{i}")),
            ("department".to_string(), synthetic_department(0)),
        ]),
        price: Some(10.0),
    });
    let catalog = Catalog::from_raw(raws, CategoryScheme::synthetic(1))?;
    let keys: Vec<Vec<String>> = catalog.items().iter().map(active_keys).collect();
    let weights = CategoryWeights::uniform(1, 0.1);
    let mut model = ClickModel::default();
    let mut candidates = CandidateSet::new(&catalog, &model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pending = Vec::new();
    let mut final_quarter = [0u64; 2];
    let quarter_start = sessions - sessions / 4;
    for s in 0..sessions {
        let scored = candidates.thompson(&mut rng, 1.0);
        let top = rank_window(&scored, &weights, 1)?;
        let shown = if &*top.chosen[0].item_id == "arm0" { 0 } else { 1 };
        if s >= quarter_start {
            final_quarter[shown] += 1;
        }
        let clicked = rng.random::<f64>() < true_ctr[shown];
        pending.push((shown, if clicked { Outcome::Clicked } else { Outcome::NotClicked }));
        if (s + 1) % refresh_interval == 0 {
            for (i, o) in pending.drain(..) {
                model.update_keys(&keys[i], o);
            }
            candidates = CandidateSet::new(&catalog, &model);
        }
    }
    let best = if true_ctr[0] >= true_ctr[1] { 0 } else { 1 };
    let total = final_quarter[0] + final_quarter[1];
    Ok(BanditReport {
        sessions,
        final_quarter,
        best_share: if total == 0 { 0.0 } else { final_quarter[best] as f64 / total as f64 },
    })
}
