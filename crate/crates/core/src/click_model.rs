//! Bayesian linear probit click model.
//!
//! Each attribute value (`brand=acme`, `item_id=B00X`, ...) owns an
//! independent Gaussian weight. An item's click probability is
//! `Phi(sum(mean) / sqrt(beta^2 + sum(variance)))` over its active weights.
//! Observations are folded in by Gaussian moment matching against the probit
//! likelihood; Thompson scores evaluate the same link on one posterior draw
//! per weight.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Item, ITEM_ID_ATTR};
use crate::numeric::{norm_cdf, truncated_gaussian_vw};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    Parameters(String),
    #[error("snapshot checksum mismatch (truncated or corrupt)")]
    Checksum,
    #[error("snapshot is not a click model snapshot")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u16),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianWeight {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianWeight {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Clicked,
    NotClicked,
}

impl Outcome {
    fn sign(self) -> f64 {
        match self {
            Outcome::Clicked => 1.0,
            Outcome::NotClicked => -1.0,
        }
    }
}

/// An outcome against the active weight keys of one viewed item.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub keys: Vec<String>,
    pub outcome: Outcome,
}

impl Observation {
    pub fn for_item(item: &Item, outcome: Outcome) -> Self {
        Self {
            keys: active_keys(item),
            outcome,
        }
    }
}

pub fn weight_key(attribute: &str, value: &str) -> String {
    format!("{attribute}={value}")
}

/// One key per scheme attribute (in attribute-name order) followed by the
/// item id key.
pub fn active_keys(item: &Item) -> Vec<String> {
    let mut keys: Vec<String> = item
        .attributes
        .iter()
        .map(|(name, value)| weight_key(name, value))
        .collect();
    keys.push(weight_key(ITEM_ID_ATTR, &item.item_id));
    keys
}

/// Largest probability strictly below one.
const P_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

fn clamp_open(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, P_MAX)
}

/// `Phi(mean_sum / sqrt(beta^2 + var_sum))`, kept strictly inside (0, 1).
pub fn probit(mean_sum: f64, var_sum: f64, beta: f64) -> f64 {
    clamp_open(norm_cdf(mean_sum / (beta * beta + var_sum).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClickModel {
    weights: BTreeMap<String, GaussianWeight>,
    prior: GaussianWeight,
    beta: f64,
    observations: u64,
}

impl Default for ClickModel {
    fn default() -> Self {
        Self {
            weights: BTreeMap::new(),
            prior: GaussianWeight::new(0.0, 1.0),
            beta: 1.0,
            observations: 0,
        }
    }
}

impl ClickModel {
    pub fn new(prior_mean: f64, prior_variance: f64, beta: f64) -> Result<Self, ModelError> {
        if !prior_mean.is_finite() {
            return Err(ModelError::Parameters("prior mean must be finite".into()));
        }
        if !(prior_variance.is_finite() && prior_variance > 0.0) {
            return Err(ModelError::Parameters("prior variance must be positive".into()));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ModelError::Parameters("beta must be positive".into()));
        }
        Ok(Self {
            weights: BTreeMap::new(),
            prior: GaussianWeight::new(prior_mean, prior_variance),
            beta,
            observations: 0,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn prior(&self) -> GaussianWeight {
        self.prior
    }

    /// Number of observations folded in so far.
    pub fn observations(&self) -> u64 {
        self.observations
    }

    /// Materialized weights; keys never observed are absent.
    pub fn weights(&self) -> &BTreeMap<String, GaussianWeight> {
        &self.weights
    }

    pub fn weight(&self, key: &str) -> GaussianWeight {
        self.weights.get(key).copied().unwrap_or(self.prior)
    }

    fn moments<'a>(&self, keys: impl IntoIterator<Item = &'a str>) -> (f64, f64) {
        keys.into_iter().fold((0.0, 0.0), |(m, v), k| {
            let w = self.weight(k);
            (m + w.mean, v + w.variance)
        })
    }

    pub fn predict_keys(&self, keys: &[String]) -> f64 {
        let (m, v) = self.moments(keys.iter().map(String::as_str));
        probit(m, v, self.beta)
    }

    pub fn predict_ctr(&self, item: &Item) -> f64 {
        self.predict_keys(&active_keys(item))
    }

    /// Moment-matched posterior update of the observation's active weights.
    pub fn update(&mut self, obs: &Observation) {
        self.update_keys(&obs.keys, obs.outcome);
    }

    pub fn update_keys(&mut self, keys: &[String], outcome: Outcome) {
        if keys.is_empty() {
            return;
        }
        let (mean_sum, var_sum) = self.moments(keys.iter().map(String::as_str));
        let total_var = self.beta * self.beta + var_sum;
        let s = total_var.sqrt();
        let y = outcome.sign();
        let (v, w) = truncated_gaussian_vw(y * mean_sum / s);
        for key in keys {
            let prior = self.prior;
            let weight = match self.weights.get_mut(key) {
                Some(w) => w,
                None => self.weights.entry(key.clone()).or_insert(prior),
            };
            let var = weight.variance;
            weight.mean += y * var / s * v;
            weight.variance = var * (1.0 - var / total_var * w);
        }
        self.observations += 1;
    }

    pub fn observe(&mut self, item: &Item, outcome: Outcome) {
        self.update(&Observation::for_item(item, outcome));
    }

    /// Resolves the items' weights into flat slot arrays for repeated scoring.
    pub fn plan(&self, items: &[Item]) -> ScoringPlan {
        let mut slot_of: HashMap<String, u32> = HashMap::new();
        let mut means = Vec::new();
        let mut sds = Vec::new();
        let mut offsets = Vec::with_capacity(items.len() + 1);
        let mut slots = Vec::with_capacity(items.len() * 6);
        offsets.push(0u32);
        for item in items {
            for key in active_keys(item) {
                let slot = *slot_of.entry(key).or_insert_with_key(|k| {
                    let w = self.weight(k);
                    means.push(w.mean);
                    sds.push(w.variance.sqrt());
                    (means.len() - 1) as u32
                });
                slots.push(slot);
            }
            offsets.push(slots.len() as u32);
        }
        ScoringPlan {
            means,
            sds,
            offsets,
            slots,
            beta: self.beta,
        }
    }

    /// Thompson scores: one posterior draw per distinct weight key, shared
    /// by every item carrying that key.
    pub fn thompson_scores(&self, items: &[Item], seed: u64) -> Vec<f64> {
        self.plan(items)
            .thompson(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Versioned binary snapshot, see `docs/snapshot-format.md`.
    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + self.weights.len() * 40);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.beta.to_le_bytes());
        out.extend_from_slice(&self.prior.mean.to_le_bytes());
        out.extend_from_slice(&self.prior.variance.to_le_bytes());
        out.extend_from_slice(&self.observations.to_le_bytes());
        out.extend_from_slice(&(self.weights.len() as u64).to_le_bytes());
        for (key, w) in &self.weights {
            out.extend_from_slice(&(key.len() as u32).to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            out.extend_from_slice(&w.mean.to_le_bytes());
            out.extend_from_slice(&w.variance.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn restore(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < 4 {
            return Err(ModelError::Checksum);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(ModelError::Checksum);
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != SNAPSHOT_MAGIC {
            return Err(ModelError::BadMagic);
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
        if version != SNAPSHOT_VERSION {
            return Err(ModelError::Version(version));
        }
        let beta = r.f64()?;
        let prior = GaussianWeight::new(r.f64()?, r.f64()?);
        let mut model = ClickModel::new(prior.mean, prior.variance, beta)?;
        model.observations = r.u64()?;
        let count = r.u64()?;
        for _ in 0..count {
            let len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
            let key = std::str::from_utf8(r.take(len)?)
                .map_err(|e| ModelError::Corrupt(e.to_string()))?
                .to_string();
            let w = GaussianWeight::new(r.f64()?, r.f64()?);
            if !(w.mean.is_finite() && w.variance > 0.0) {
                return Err(ModelError::Corrupt(format!("invalid weight for {key:?}")));
            }
            model.weights.insert(key, w);
        }
        if r.pos != body.len() {
            return Err(ModelError::Corrupt("trailing bytes".into()));
        }
        Ok(model)
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"DSCM";
const SNAPSHOT_VERSION: u16 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| ModelError::Corrupt("unexpected end of snapshot".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Item-to-weight-slot layout of a set of items under a fixed model state.
#[derive(Debug, Clone)]
pub struct ScoringPlan {
    means: Vec<f64>,
    sds: Vec<f64>,
    offsets: Vec<u32>,
    slots: Vec<u32>,
    beta: f64,
}

impl ScoringPlan {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of distinct weights the items touch.
    pub fn weight_count(&self) -> usize {
        self.means.len()
    }

    fn item_slots(&self, i: usize) -> &[u32] {
        &self.slots[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    /// Posterior-mean click probabilities.
    pub fn expected(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (m, v) = self.item_slots(i).iter().fold((0.0, 0.0), |(m, v), &s| {
                    let sd = self.sds[s as usize];
                    (m + self.means[s as usize], v + sd * sd)
                });
                probit(m, v, self.beta)
            })
            .collect()
    }

    /// Draws every weight once (in slot order) and scores each item at zero
    /// residual uncertainty.
    pub fn thompson<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sampled: Vec<f64> = self
            .means
            .iter()
            .zip(&self.sds)
            .map(|(&m, &sd)| {
                let z: f64 = rng.sample(StandardNormal);
                m + sd * z
            })
            .collect();
        (0..self.len())
            .map(|i| {
                let sum: f64 = self.item_slots(i).iter().map(|&s| sampled[s as usize]).sum();
                probit(sum, 0.0, self.beta)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{CategoryScheme, RawItem};
    use proptest::prelude::*;

    /// erf by its everywhere-positive power series, summed to convergence.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term.abs() > 1e-17 * sum.abs() {
            n += 1.0;
            term *= 2.0 * x * x / (2.0 * n + 1.0);
            sum += term;
        }
        2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * sum
    }

    fn phi_oracle(x: f64) -> f64 {
        0.5 * (1.0 + erf_series(x / std::f64::consts::SQRT_2))
    }

    /// Moments of N(x; m, v) * Phi(y * x / beta) by composite Simpson.
    fn posterior_oracle(m: f64, v: f64, beta: f64, y: f64) -> (f64, f64) {
        let sd = v.sqrt();
        let (lo, hi, n) = (m - 12.0 * sd, m + 12.0 * sd, 20_000);
        let h = (hi - lo) / n as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let c = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let f = c * (-(x - m) * (x - m) / (2.0 * v)).exp() * phi_oracle(y * x / beta);
            z += f;
            m1 += f * x;
            m2 += f * x * x;
        }
        let mean = m1 / z;
        (mean, m2 / z - mean * mean)
    }

    fn item(id: &str, brand: &str) -> Item {
        let scheme = CategoryScheme::synthetic(6);
        scheme
            .build_item(
                RawItem {
                    item_id: id.into(),
                    attributes: BTreeMap::from([
                        ("brand".into(), brand.into()),
                        ("department".into(), "dept00".into()),
                    ]),
                    price: Some(10.0),
                },
                1,
            )
            .unwrap()
    }

    fn single(outcome: Outcome) -> GaussianWeight {
        let mut model = ClickModel::default();
        model.update(&Observation {
            keys: vec!["k".into()],
            outcome,
        });
        model.weight("k")
    }

    #[test]
    fn active_keys_one_per_attribute() {
        let a = item("a", "acme");
        let b = item("b", "acme");
        let ka = active_keys(&a);
        assert_eq!(ka.len(), 6);
        assert!(ka.contains(&"brand=acme".to_string()));
        assert_eq!(ka.last().unwrap(), "item_id=a");
        let kb = active_keys(&b);
        assert_eq!(ka[..5], kb[..5]);
        assert_ne!(ka[5], kb[5]);
        assert_eq!(ka, active_keys(&a));
    }

    #[test]
    fn predict_zero_means_is_half() {
        let model = ClickModel::default();
        assert_eq!(model.predict_ctr(&item("a", "x")), 0.5);
        assert_eq!(probit(0.0, 17.0, 1.0), 0.5);
    }

    #[test]
    fn predict_matches_cdf_oracle() {
        // oracle values: Phi(1) = 0.841345, Phi(0.5) = 0.691462
        assert!((phi_oracle(1.0) - 0.841345).abs() < 1e-6);
        assert!((phi_oracle(0.5) - 0.691462).abs() < 1e-6);
        assert!((probit(1.0, 0.0, 1.0) - phi_oracle(1.0)).abs() < 1e-12);
        assert!((probit(1.0, 3.0, 1.0) - phi_oracle(0.5)).abs() < 1e-12);
    }

    #[test]
    fn single_weight_update_matches_quadrature() {
        let (om, ov) = posterior_oracle(0.0, 1.0, 1.0, 1.0);
        assert!((om - 0.564189).abs() < 1e-5 && (ov - 0.681690).abs() < 1e-5);
        let w = single(Outcome::Clicked);
        assert!((w.mean - om).abs() < 1e-4, "{w:?}");
        assert!((w.variance - ov).abs() < 1e-4, "{w:?}");
        let (nm, nv) = posterior_oracle(0.0, 1.0, 1.0, -1.0);
        let w = single(Outcome::NotClicked);
        assert!((w.mean - nm).abs() < 1e-4 && (nm + 0.564189).abs() < 1e-5);
        assert!((w.variance - nv).abs() < 1e-4);
    }

    #[test]
    fn off_center_update_matches_quadrature() {
        let mut model = ClickModel::new(0.0, 1.0, 1.0).unwrap();
        model.weights.insert("k".into(), GaussianWeight::new(-1.3, 0.4));
        model.update(&Observation {
            keys: vec!["k".into()],
            outcome: Outcome::Clicked,
        });
        let (om, ov) = posterior_oracle(-1.3, 0.4, 1.0, 1.0);
        let w = model.weight("k");
        assert!((w.mean - om).abs() < 1e-4 && (w.variance - ov).abs() < 1e-4);
    }

    #[test]
    fn vanishing_variance_barely_moves() {
        let mut model = ClickModel::default();
        model.weights.insert("k".into(), GaussianWeight::new(0.0, 1e-12));
        model.update(&Observation {
            keys: vec!["k".into()],
            outcome: Outcome::Clicked,
        });
        assert!(model.weight("k").mean.abs() < 1e-6);
    }

    #[test]
    fn update_touches_only_active_keys() {
        let mut model = ClickModel::default();
        let a = item("a", "acme");
        let b = item("b", "zeta");
        model.observe(&b, Outcome::Clicked);
        let before = model.weight("item_id=b");
        model.observe(&a, Outcome::NotClicked);
        assert_eq!(model.weight("item_id=b"), before);
        assert_ne!(model.weight("brand=zeta").mean, model.weight("brand=acme").mean);
    }

    #[test]
    fn repeated_observation_contracts_variance() {
        let mut model = ClickModel::default();
        let obs = Observation {
            keys: vec!["k".into()],
            outcome: Outcome::NotClicked,
        };
        let mut last = f64::INFINITY;
        for _ in 0..2000 {
            model.update(&obs);
            let v = model.weight("k").variance;
            assert!(v < last);
            last = v;
        }
        assert!(last < 0.02, "{last}");
    }

    #[test]
    fn thompson_degenerate_variance_is_exact() {
        let mut model = ClickModel::default();
        let it = item("a", "acme");
        for key in active_keys(&it) {
            model.weights.insert(key, GaussianWeight::new(0.1, 0.0));
        }
        let scores = model.thompson_scores(std::slice::from_ref(&it), 3);
        let sum: f64 = [0.1; 6].iter().sum();
        assert_eq!(scores[0], probit(sum, 0.0, 1.0));
    }

    #[test]
    fn thompson_seeded_and_shared() {
        let model = ClickModel::default();
        let a = item("a", "acme");
        let twin = Item {
            price: Some(11.0),
            ..a.clone()
        };
        let items = vec![a.clone(), item("b", "acme"), twin];
        let s1 = model.thompson_scores(&items, 42);
        let s2 = model.thompson_scores(&items, 42);
        assert_eq!(s1, s2);
        assert_eq!(s1[0], s1[2]);
        assert_ne!(s1[0], s1[1]);
        assert_ne!(s1, model.thompson_scores(&items, 43));
    }

    #[test]
    fn plan_expected_matches_predict() {
        let mut model = ClickModel::default();
        let items = vec![item("a", "acme"), item("b", "zeta")];
        model.observe(&items[0], Outcome::Clicked);
        let expected = model.plan(&items).expected();
        for (it, &p) in items.iter().zip(&expected) {
            assert_eq!(p, model.predict_ctr(it));
        }
    }

    #[test]
    fn snapshot_round_trips() {
        let empty = ClickModel::default();
        let probe = item("p", "acme");
        let back = ClickModel::restore(&empty.snapshot()).unwrap();
        assert_eq!(back.predict_ctr(&probe), empty.predict_ctr(&probe));

        let mut model = ClickModel::default();
        let items: Vec<Item> = (0..20).map(|i| item(&format!("i{i}"), &format!("b{}", i % 3))).collect();
        for n in 0..1000 {
            let outcome = if n % 7 == 0 { Outcome::Clicked } else { Outcome::NotClicked };
            model.observe(&items[n % items.len()], outcome);
        }
        let back = ClickModel::restore(&model.snapshot()).unwrap();
        assert_eq!(back, model);
        for it in &items {
            assert_eq!(back.predict_ctr(it).to_bits(), model.predict_ctr(it).to_bits());
        }
    }

    #[test]
    fn truncated_snapshot_fails_checksum() {
        let mut model = ClickModel::default();
        model.observe(&item("a", "x"), Outcome::Clicked);
        let bytes = model.snapshot();
        assert_eq!(ClickModel::restore(&bytes[..bytes.len() - 9]), Err(ModelError::Checksum));
        assert_eq!(ClickModel::restore(&[]), Err(ModelError::Checksum));
        let mut flipped = bytes.clone();
        flipped[20] ^= 1;
        assert_eq!(ClickModel::restore(&flipped), Err(ModelError::Checksum));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ClickModel::new(0.0, 0.0, 1.0).is_err());
        assert!(ClickModel::new(0.0, 1.0, -1.0).is_err());
        assert!(ClickModel::new(f64::NAN, 1.0, 1.0).is_err());
    }

    fn arb_weights() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-3.0f64..3.0, 0.01f64..4.0), 1..6)
    }

    proptest! {
        #[test]
        fn update_moves_means_and_contracts(ws in arb_weights(), click in any::<bool>(), beta in 0.2f64..3.0) {
            let mut model = ClickModel::new(0.0, 1.0, beta).unwrap();
            let keys: Vec<String> = (0..ws.len()).map(|i| format!("k{i}")).collect();
            for (k, &(m, v)) in keys.iter().zip(&ws) {
                model.weights.insert(k.clone(), GaussianWeight::new(m, v));
            }
            model.weights.insert("other".into(), GaussianWeight::new(0.3, 0.7));
            let outcome = if click { Outcome::Clicked } else { Outcome::NotClicked };
            let before = model.clone();
            model.update(&Observation { keys: keys.clone(), outcome });
            for k in &keys {
                let (b, a) = (before.weight(k), model.weight(k));
                if click { prop_assert!(a.mean > b.mean); } else { prop_assert!(a.mean < b.mean); }
                prop_assert!(a.variance < b.variance && a.variance > 0.0);
            }
            prop_assert_eq!(model.weight("other"), before.weight("other"));
        }

        #[test]
        fn predict_monotone_in_mean(ws in arb_weights(), bump in 0.0f64..2.0, idx in 0usize..6) {
            let mut model = ClickModel::default();
            let keys: Vec<String> = (0..ws.len()).map(|i| format!("k{i}")).collect();
            for (k, &(m, v)) in keys.iter().zip(&ws) {
                model.weights.insert(k.clone(), GaussianWeight::new(m, v));
            }
            let p0 = model.predict_keys(&keys);
            let k = &keys[idx % keys.len()];
            model.weights.get_mut(k).unwrap().mean += bump;
            let p1 = model.predict_keys(&keys);
            prop_assert!(p1 >= p0);
            prop_assert!(p0 > 0.0 && p0 < 1.0);
        }

        #[test]
        fn thompson_converges_as_variance_vanishes(ws in arb_weights(), seed in any::<u64>()) {
            let mut model = ClickModel::default();
            let it = item("a", "acme");
            let keys = active_keys(&it);
            for (k, &(m, _)) in keys.iter().zip(ws.iter().cycle()) {
                model.weights.insert(k.clone(), GaussianWeight::new(m / 3.0, 1e-14));
            }
            let (m, _) = model.moments(keys.iter().map(String::as_str));
            let s = model.thompson_scores(std::slice::from_ref(&it), seed)[0];
            prop_assert!((s - probit(m, 0.0, 1.0)).abs() < 1e-5);
        }
    }
}
