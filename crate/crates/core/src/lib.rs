//! Ranking engine for visual discovery streams.
//!
//! Items are scored by a Bayesian probit click model under Thompson
//! sampling, then re-ranked by greedy submodular category diversification
//! driven by either global smoothed-CTR category weights or per-user
//! Dirichlet posterior weights diffused through a co-interest matrix.

pub mod bench;
pub mod catalog;
pub mod click_model;
pub mod diversifier;
pub mod engine;
pub mod events;
mod numeric;
pub mod pipeline;
pub mod simulator;
pub mod stats;
pub mod weights;

pub use catalog::{Catalog, CategoryId, CategoryScheme, Item, RawItem};
pub use click_model::{ClickModel, GaussianWeight, Observation, Outcome};
pub use diversifier::{CategoryWeights, ScoredItem, SelectionState};
pub use engine::{Engine, EngineError, Published, StreamPage, StreamRequest};
pub use numeric::{norm_cdf, norm_pdf};
