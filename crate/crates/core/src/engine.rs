//! Stateful ranking engine: durable event ingestion, batch refreshes that
//! publish immutable model/weight generations, page materialization, and
//! recovery from a data directory.
//!
//! Data directory layout:
//!
//! - `catalog.jsonl`, `scheme.json`: the catalog and its category scheme
//! - `events.jsonl`: the append-only event log
//! - `model-<generation>.bin`: click-model snapshot of the latest refresh
//! - `state.json`: aggregates and log offset matching that snapshot
//! - `weights.json`: published global weights and co-interest matrix

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{load_catalog, Catalog, CatalogError, CategoryId, CategoryScheme};
use crate::click_model::{ClickModel, ModelError};
use crate::diversifier::{CategoryWeights, DiversifyError, ScoredItem};
use crate::events::{observations, read_event_log_recovering, EventEnvelope, EventLogError, EventRecord};
use crate::pipeline::{rank_window, CandidateSet, RankingConfig};
use crate::weights::{
    build_co_interest, effective_weights, global_weights, is_personalized, CategoryStats, CoInterestMatrix,
    DirichletPrior, UserProfile, WeightsError,
};

pub const CATALOG_FILE: &str = "catalog.jsonl";
pub const SCHEME_FILE: &str = "scheme.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const STATE_FILE: &str = "state.json";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const STATE_FORMAT: u32 = 1;
pub const MAX_PAGE_SIZE: usize = 500;
pub const DEFAULT_SESSION: &str = "default";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Events(#[from] EventLogError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Diversify(#[from] DiversifyError),
    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("event {index}: {reason}")]
    InvalidEvent { index: usize, reason: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("a refresh is already in progress")]
    RefreshInProgress,
    #[error("corrupt state: {0}")]
    State(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |e| EngineError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Stable 64-bit FNV-1a over the parts, separated by zero bytes.
pub fn session_seed(user_id: Option<&str>, session: &str, generation: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes.iter().chain(std::iter::once(&0u8)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(user_id.unwrap_or("").as_bytes());
    feed(session.as_bytes());
    feed(&generation.to_le_bytes());
    h
}

/// Serving inputs for one request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamRequest {
    pub user_id: Option<String>,
    pub session: Option<String>,
    pub page: usize,
    pub size: usize,
}

impl StreamRequest {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.size == 0 || self.size > MAX_PAGE_SIZE {
            return Err(EngineError::InvalidRequest(format!(
                "size must be in 1..={MAX_PAGE_SIZE}, got {}",
                self.size
            )));
        }
        if self.user_id.as_deref() == Some("") {
            return Err(EngineError::InvalidRequest("user_id must not be empty".into()));
        }
        self.page
            .checked_add(1)
            .and_then(|p| p.checked_mul(self.size))
            .ok_or_else(|| EngineError::InvalidRequest("page out of range".into()))?;
        Ok(())
    }

    pub fn session(&self) -> &str {
        self.session.as_deref().unwrap_or(DEFAULT_SESSION)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Card {
    pub rank: usize,
    pub item_id: String,
    pub category: CategoryId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamPage {
    pub user_id: Option<String>,
    pub session: String,
    pub page: usize,
    pub size: usize,
    pub personalized: bool,
    pub model_generation: u64,
    pub weights_generation: u64,
    pub catalog_generation: u64,
    pub items: Vec<Card>,
}

/// A diversified ranking prefix from one Thompson draw.
#[derive(Debug, Clone)]
pub struct Window {
    pub items: Vec<ScoredItem>,
    pub personalized: bool,
    pub generation: u64,
    pub catalog_generation: u64,
}

impl Window {
    pub fn page(&self, req: &StreamRequest) -> StreamPage {
        let start = (req.page * req.size).min(self.items.len());
        let end = (start + req.size).min(self.items.len());
        StreamPage {
            user_id: req.user_id.clone(),
            session: req.session().to_string(),
            page: req.page,
            size: req.size,
            personalized: self.personalized,
            model_generation: self.generation,
            weights_generation: self.generation,
            catalog_generation: self.catalog_generation,
            items: self.items[start..end]
                .iter()
                .enumerate()
                .map(|(i, it)| Card {
                    rank: i + 1,
                    item_id: it.item_id.to_string(),
                    category: it.category,
                    score: it.score,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsSnapshot {
    pub generation: u64,
    pub weights: Vec<f64>,
    pub co_interest: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserWeights {
    pub user_id: String,
    pub generation: u64,
    pub clicks: u64,
    pub threshold: u64,
    pub personalized: bool,
    pub weights: Vec<f64>,
}

/// One immutable model and weights generation.
#[derive(Debug)]
pub struct Published {
    catalog: Arc<Catalog>,
    model: ClickModel,
    candidates: CandidateSet,
    global: CategoryWeights,
    co_interest: CoInterestMatrix,
    generation: u64,
    ranking: RankingConfig,
    dirichlet: DirichletPrior,
}

impl Published {
    fn build(
        catalog: Arc<Catalog>,
        model: ClickModel,
        stats: &CategoryStats,
        user_clicks: &BTreeMap<String, Vec<CategoryId>>,
        generation: u64,
        ranking: &RankingConfig,
    ) -> Result<Self, EngineError> {
        let d = catalog.d();
        Ok(Self {
            candidates: CandidateSet::new(&catalog, &model),
            global: global_weights(stats, ranking.smoothing),
            co_interest: build_co_interest(d, user_clicks.values().map(Vec::as_slice), ranking.top_k)?,
            dirichlet: ranking.dirichlet(d)?,
            ranking: ranking.clone(),
            catalog,
            model,
            generation,
        })
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn model(&self) -> &ClickModel {
        &self.model
    }

    pub fn global_weights(&self) -> &CategoryWeights {
        &self.global
    }

    pub fn co_interest(&self) -> &CoInterestMatrix {
        &self.co_interest
    }

    pub fn ranking(&self) -> &RankingConfig {
        &self.ranking
    }

    pub fn weights_snapshot(&self) -> WeightsSnapshot {
        WeightsSnapshot {
            generation: self.generation,
            weights: self.global.as_slice().to_vec(),
            co_interest: self.co_interest.rows().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn user_weights(&self, user_id: &str, profile: Option<&UserProfile>) -> Result<UserWeights, EngineError> {
        let w = effective_weights(
            profile,
            &self.global,
            &self.co_interest,
            &self.dirichlet,
            self.ranking.min_clicks,
        )?;
        Ok(UserWeights {
            user_id: user_id.to_string(),
            generation: self.generation,
            clicks: profile.map_or(0, |p| p.total_clicks),
            threshold: self.ranking.min_clicks,
            personalized: is_personalized(profile, self.ranking.min_clicks),
            weights: w.into_inner(),
        })
    }

    /// Materializes the ranking prefix serving `req`: one Thompson draw
    /// seeded by (user, session, generation), diversified under the user's
    /// effective weights.
    pub fn window(&self, req: &StreamRequest, profile: Option<&UserProfile>) -> Result<Window, EngineError> {
        req.validate()?;
        let weights = effective_weights(
            profile,
            &self.global,
            &self.co_interest,
            &self.dirichlet,
            self.ranking.min_clicks,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(session_seed(req.user_id.as_deref(), req.session(), self.generation));
        let scored = self.candidates.thompson(&mut rng, self.ranking.score_scale);
        let depth = self.ranking.window().max((req.page + 1) * req.size);
        let selection = rank_window(&scored, &weights, depth)?;
        Ok(Window {
            items: selection.chosen,
            personalized: is_personalized(profile, self.ranking.min_clicks),
            generation: self.generation,
            catalog_generation: self.catalog.generation(),
        })
    }

    pub fn page(&self, req: &StreamRequest, profile: Option<&UserProfile>) -> Result<StreamPage, EngineError> {
        Ok(self.window(req, profile)?.page(req))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestAck {
    pub accepted: usize,
    pub duplicates: usize,
    pub unknown_items: usize,
}

impl IngestAck {
    pub fn warning(&self) -> bool {
        self.unknown_items > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshReport {
    pub generation: u64,
    pub applied_events: usize,
    pub observations: usize,
    pub pending_events: usize,
}

/// Contents of `state.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedState {
    pub format: u32,
    pub generation: u64,
    pub model_file: String,
    /// Number of log events folded into the snapshot.
    pub log_events: u64,
    /// `log_events` at each refresh, oldest first.
    pub refresh_offsets: Vec<u64>,
    pub stats: CategoryStats,
    pub user_clicks: BTreeMap<String, Vec<CategoryId>>,
    pub profiles: BTreeMap<String, UserProfile>,
}

/// Work captured by [`Engine::begin_refresh`]; [`RefreshJob::run`] needs no
/// access to the engine.
pub struct RefreshJob {
    base: Arc<Published>,
    events: Vec<EventRecord>,
    state: PersistedState,
    dir: Option<PathBuf>,
}

pub struct RefreshDone {
    published: Arc<Published>,
    report: RefreshReport,
    offset: u64,
}

impl RefreshJob {
    pub fn run(self) -> Result<RefreshDone, EngineError> {
        let catalog = Arc::clone(&self.base.catalog);
        let mut model = self.base.model.clone();
        let obs = observations(&self.events);
        let mut applied = 0;
        for (item_id, outcome) in &obs {
            if let Some(item) = catalog.get(item_id) {
                model.observe(item, *outcome);
                applied += 1;
            }
        }
        let state = self.state;
        let published = Published::build(
            catalog,
            model,
            &state.stats,
            &state.user_clicks,
            state.generation,
            &self.base.ranking,
        )?;
        if let Some(dir) = &self.dir {
            write_snapshot(dir, &published, &state)?;
        }
        Ok(RefreshDone {
            report: RefreshReport {
                generation: state.generation,
                applied_events: self.events.len(),
                observations: applied,
                pending_events: 0,
            },
            published: Arc::new(published),
            offset: state.log_events,
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EngineError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_snapshot(dir: &Path, published: &Published, state: &PersistedState) -> Result<(), EngineError> {
    write_atomic(&dir.join(&state.model_file), &published.model.snapshot())?;
    let json = serde_json::to_vec(state).map_err(|e| EngineError::State(e.to_string()))?;
    write_atomic(&dir.join(STATE_FILE), &json)?;
    let weights = serde_json::to_vec(&published.weights_snapshot()).map_err(|e| EngineError::State(e.to_string()))?;
    write_atomic(&dir.join(WEIGHTS_FILE), &weights)?;
    let entries = std::fs::read_dir(dir).map_err(io_err(dir))?;
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("model-") && name.ends_with(".bin") && name != state.model_file {
            let _ = std::fs::remove_file(entry.path());
        }
    }
    Ok(())
}

pub fn model_file_name(generation: u64) -> String {
    format!("model-{generation:08}.bin")
}

/// Writer-side engine state. Readers work on [`Published`] generations.
#[derive(Debug)]
pub struct Engine {
    dir: Option<PathBuf>,
    log: Option<File>,
    published: Arc<Published>,
    stats: CategoryStats,
    user_clicks: BTreeMap<String, Vec<CategoryId>>,
    profiles: BTreeMap<String, UserProfile>,
    pending: Vec<EventRecord>,
    log_events: u64,
    seen: HashSet<String>,
    refresh_offsets: Vec<u64>,
    refreshing: bool,
}

impl Engine {
    /// Engine without persistence.
    pub fn in_memory(catalog: Catalog, ranking: RankingConfig) -> Result<Self, EngineError> {
        Self::fresh(Arc::new(catalog), ranking, None, None)
    }

    fn fresh(
        catalog: Arc<Catalog>,
        ranking: RankingConfig,
        dir: Option<PathBuf>,
        log: Option<File>,
    ) -> Result<Self, EngineError> {
        let d = catalog.d();
        let stats = CategoryStats::new(d);
        let user_clicks = BTreeMap::new();
        let published = Published::build(catalog, ClickModel::default(), &stats, &user_clicks, 0, &ranking)?;
        Ok(Self {
            dir,
            log,
            published: Arc::new(published),
            stats,
            user_clicks,
            profiles: BTreeMap::new(),
            pending: Vec::new(),
            log_events: 0,
            seen: HashSet::new(),
            refresh_offsets: Vec::new(),
            refreshing: false,
        })
    }

    /// Writes the catalog and scheme into `dir`, replacing earlier ones.
    pub fn install_catalog(dir: &Path, catalog_src: &Path, scheme: &CategoryScheme) -> Result<Catalog, EngineError> {
        let catalog = load_catalog(catalog_src, scheme.clone())?;
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let bytes = std::fs::read(catalog_src).map_err(io_err(catalog_src))?;
        write_atomic(&dir.join(CATALOG_FILE), &bytes)?;
        let json = serde_json::to_vec_pretty(scheme).map_err(|e| EngineError::State(e.to_string()))?;
        write_atomic(&dir.join(SCHEME_FILE), &json)?;
        Ok(catalog)
    }

    /// Opens a data directory: loads the catalog, the latest snapshot if
    /// any, and replays logged events past the snapshot offset.
    pub fn open(dir: impl AsRef<Path>, ranking: RankingConfig) -> Result<Self, EngineError> {
        let dir = dir.as_ref().to_path_buf();
        let scheme = CategoryScheme::load(dir.join(SCHEME_FILE))?;
        let catalog = Arc::new(load_catalog(dir.join(CATALOG_FILE), scheme)?);
        let log_path = dir.join(EVENTS_FILE);
        let events = if log_path.exists() {
            let (events, valid) = read_event_log_recovering(&log_path)?;
            let f = OpenOptions::new().write(true).open(&log_path).map_err(io_err(&log_path))?;
            f.set_len(valid).map_err(io_err(&log_path))?;
            events
        } else {
            Vec::new()
        };
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;

        let state_path = dir.join(STATE_FILE);
        let mut engine = if state_path.exists() {
            let text = std::fs::read(&state_path).map_err(io_err(&state_path))?;
            let state: PersistedState =
                serde_json::from_slice(&text).map_err(|e| EngineError::State(e.to_string()))?;
            if state.format != STATE_FORMAT {
                return Err(EngineError::State(format!("unsupported state format {}", state.format)));
            }
            if state.log_events > events.len() as u64 {
                return Err(EngineError::State(format!(
                    "snapshot covers {} events but the log holds {}",
                    state.log_events,
                    events.len()
                )));
            }
            let model_path = dir.join(&state.model_file);
            let bytes = std::fs::read(&model_path).map_err(io_err(&model_path))?;
            let model = ClickModel::restore(&bytes)?;
            let published = Published::build(
                catalog,
                model,
                &state.stats,
                &state.user_clicks,
                state.generation,
                &ranking,
            )?;
            Self {
                dir: Some(dir),
                log: Some(log),
                published: Arc::new(published),
                stats: state.stats,
                user_clicks: state.user_clicks,
                profiles: state.profiles,
                pending: Vec::new(),
                log_events: state.log_events,
                seen: HashSet::new(),
                refresh_offsets: state.refresh_offsets,
                refreshing: false,
            }
        } else {
            Self::fresh(catalog, ranking, Some(dir), Some(log))?
        };
        let skip = engine.log_events as usize;
        for (i, e) in events.iter().enumerate() {
            match i < skip {
                true => {
                    if let Some(id) = &e.event_id {
                        engine.seen.insert(id.clone());
                    }
                }
                false => engine.apply(e.clone())?,
            }
        }
        Ok(engine)
    }

    /// Rebuilds the state of `dir` from its catalog and full event log,
    /// refreshing at the offsets recorded in its state file. Nothing is
    /// written.
    pub fn replay(dir: impl AsRef<Path>, ranking: RankingConfig) -> Result<Self, EngineError> {
        let dir = dir.as_ref();
        let scheme = CategoryScheme::load(dir.join(SCHEME_FILE))?;
        let catalog = load_catalog(dir.join(CATALOG_FILE), scheme)?;
        let offsets = match std::fs::read(dir.join(STATE_FILE)) {
            Ok(bytes) => {
                serde_json::from_slice::<PersistedState>(&bytes)
                    .map_err(|e| EngineError::State(e.to_string()))?
                    .refresh_offsets
            }
            Err(_) => Vec::new(),
        };
        let log_path = dir.join(EVENTS_FILE);
        let events = if log_path.exists() {
            read_event_log_recovering(&log_path)?.0
        } else {
            Vec::new()
        };
        let mut engine = Self::in_memory(catalog, ranking)?;
        let mut next = offsets.iter().copied().peekable();
        for e in events {
            while next.peek() == Some(&engine.log_events) {
                engine.refresh()?;
                next.next();
            }
            engine.apply(e)?;
        }
        while next.peek() == Some(&engine.log_events) {
            engine.refresh()?;
            next.next();
        }
        Ok(engine)
    }

    pub fn published(&self) -> Arc<Published> {
        Arc::clone(&self.published)
    }

    pub fn profile(&self, user_id: &str) -> Option<&UserProfile> {
        self.profiles.get(user_id)
    }

    pub fn pending_events(&self) -> usize {
        self.pending.len()
    }

    pub fn log_events(&self) -> u64 {
        self.log_events
    }

    pub fn stats(&self) -> &CategoryStats {
        &self.stats
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn apply(&mut self, e: EventRecord) -> Result<(), EngineError> {
        let d = self.published.catalog.d();
        self.stats.record(&e, d);
        if e.is_click() {
            if let Some(c) = e.category.filter(|&c| c < d) {
                self.user_clicks.entry(e.user_id.clone()).or_default().push(c);
                let policy = self.published.ranking.decay;
                let profile = self
                    .profiles
                    .entry(e.user_id.clone())
                    .or_insert_with(|| UserProfile::new(e.user_id.clone(), d));
                profile.record_click(c, e.ts)?;
                profile.decay(&policy, e.ts);
            }
        }
        if let Some(id) = &e.event_id {
            self.seen.insert(id.clone());
        }
        self.pending.push(e);
        self.log_events += 1;
        Ok(())
    }

    /// Validates, deduplicates, logs and applies a batch. Invalid envelopes
    /// reject the whole batch.
    pub fn ingest(&mut self, envelopes: Vec<EventEnvelope>) -> Result<IngestAck, EngineError> {
        for (index, env) in envelopes.iter().enumerate() {
            let reason = if env.user_id.is_empty() {
                "user_id must not be empty"
            } else if env.item_id.is_empty() {
                "item_id must not be empty"
            } else if env.event_id.as_deref() == Some("") {
                "event_id must not be empty"
            } else {
                continue;
            };
            return Err(EngineError::InvalidEvent {
                index,
                reason: reason.into(),
            });
        }
        let mut ack = IngestAck::default();
        let mut batch_ids = HashSet::new();
        let mut records = Vec::with_capacity(envelopes.len());
        for env in envelopes {
            if let Some(id) = &env.event_id {
                if self.seen.contains(id) || !batch_ids.insert(id.clone()) {
                    ack.duplicates += 1;
                    continue;
                }
            }
            let category = self.published.catalog.get(&env.item_id).map(|it| it.category);
            if category.is_none() {
                ack.unknown_items += 1;
                log::warn!("event for unknown item {:?}", env.item_id);
            }
            records.push(env.into_record(category));
        }
        if let Some(log) = &mut self.log {
            let mut buf = Vec::new();
            for r in &records {
                serde_json::to_writer(&mut buf, r).map_err(|e| EngineError::State(e.to_string()))?;
                buf.push(b'\n');
            }
            let path = self.dir.as_deref().map(|d| d.join(EVENTS_FILE)).unwrap_or_default();
            log.write_all(&buf).map_err(io_err(&path))?;
            log.flush().map_err(io_err(&path))?;
        }
        ack.accepted = records.len();
        for r in records {
            self.apply(r)?;
        }
        Ok(ack)
    }

    /// Captures the current backlog for an off-lock refresh.
    pub fn begin_refresh(&mut self) -> Result<RefreshJob, EngineError> {
        if self.refreshing {
            return Err(EngineError::RefreshInProgress);
        }
        self.refreshing = true;
        let generation = self.published.generation + 1;
        let mut refresh_offsets = self.refresh_offsets.clone();
        refresh_offsets.push(self.log_events);
        Ok(RefreshJob {
            base: Arc::clone(&self.published),
            events: self.pending.clone(),
            state: PersistedState {
                format: STATE_FORMAT,
                generation,
                model_file: model_file_name(generation),
                log_events: self.log_events,
                refresh_offsets,
                stats: self.stats.clone(),
                user_clicks: self.user_clicks.clone(),
                profiles: self.profiles.clone(),
            },
            dir: self.dir.clone(),
        })
    }

    /// Publishes a finished refresh, or clears the in-progress flag after a
    /// failed one.
    pub fn finish_refresh(&mut self, done: Result<RefreshDone, EngineError>) -> Result<RefreshReport, EngineError> {
        self.refreshing = false;
        let done = done?;
        let consumed = done.report.applied_events;
        self.pending.drain(..consumed);
        self.published = done.published;
        self.refresh_offsets.push(done.offset);
        Ok(RefreshReport {
            pending_events: self.pending.len(),
            ..done.report
        })
    }

    pub fn refresh(&mut self) -> Result<RefreshReport, EngineError> {
        let job = self.begin_refresh()?;
        let done = job.run();
        self.finish_refresh(done)
    }

    pub fn user_weights(&self, user_id: &str) -> Result<UserWeights, EngineError> {
        self.published.user_weights(user_id, self.profile(user_id))
    }

    pub fn page(&self, req: &StreamRequest) -> Result<StreamPage, EngineError> {
        let profile = req.user_id.as_deref().and_then(|u| self.profile(u));
        self.published.page(req, profile)
    }
}
