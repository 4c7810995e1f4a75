//! Submodular category diversification.
//!
//! With one category per item the objective is
//!
//! ```text
//! rho(A, w) = sum_j w_j * ln(1 + n_j(A)) + sum_{a in A} s(a)
//! ```
//!
//! where `n_j(A)` counts the chosen items of category `j`. (With full one-hot
//! attribute vectors the log applies per attribute dimension; the categorical
//! form is the special case of one active dimension per item.) Greedy
//! selection gets within `1 - 1/e` of the optimum; [`celf_select`] produces
//! exactly the greedy sequence while skipping re-evaluations that cannot
//! change the argmax.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::CategoryId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiversifyError {
    #[error("cannot select {k} items from {n}")]
    TooMany { k: usize, n: usize },
    #[error("item {item_id:?} has category {category} >= d={d}")]
    CategoryOutOfRange {
        item_id: String,
        category: CategoryId,
        d: usize,
    },
    #[error("item {0:?} has a negative or non-finite score")]
    InvalidScore(String),
    #[error("category weights must be finite and non-negative")]
    InvalidWeights,
    #[error("instance too large for exhaustive search ({0} subsets)")]
    TooLarge(u128),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item_id: Arc<str>,
    pub category: CategoryId,
    pub score: f64,
}

impl ScoredItem {
    pub fn new(item_id: impl Into<Arc<str>>, category: CategoryId, score: f64) -> Self {
        Self {
            item_id: item_id.into(),
            category,
            score,
        }
    }
}

/// Non-negative per-category weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CategoryWeights(Vec<f64>);

impl CategoryWeights {
    pub fn new(w: Vec<f64>) -> Result<Self, DiversifyError> {
        if w.iter().all(|x| x.is_finite() && *x >= 0.0) {
            Ok(Self(w))
        } else {
            Err(DiversifyError::InvalidWeights)
        }
    }

    pub fn uniform(d: usize, value: f64) -> Self {
        Self::new(vec![value; d]).expect("uniform weight must be finite and non-negative")
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for CategoryWeights {
    type Error = DiversifyError;

    fn try_from(w: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<CategoryWeights> for Vec<f64> {
    fn from(w: CategoryWeights) -> Self {
        w.0
    }
}

impl std::ops::Index<usize> for CategoryWeights {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    /// Items in selection order.
    pub chosen: Vec<ScoredItem>,
    /// Chosen items per category.
    pub counts: Vec<usize>,
    pub objective_value: f64,
    /// Marginal-gain evaluations performed to reach this state.
    pub evaluations: u64,
}

impl SelectionState {
    pub fn empty(d: usize) -> Self {
        Self {
            chosen: Vec::new(),
            counts: vec![0; d],
            objective_value: 0.0,
            evaluations: 0,
        }
    }

    fn push(&mut self, item: ScoredItem, gain: f64) {
        self.counts[item.category] += 1;
        self.objective_value += gain;
        self.chosen.push(item);
    }

    pub fn ids(&self) -> Vec<&str> {
        self.chosen.iter().map(|c| &*c.item_id).collect()
    }
}

/// `ln(2 + n) - ln(1 + n)`, the diversity increment of the `(n+1)`-th item
/// of a category.
#[inline]
pub fn category_increment(n: usize) -> f64 {
    (1.0 / (1.0 + n as f64)).ln_1p()
}

#[inline]
fn gain_with_count(score: f64, weight: f64, n: usize) -> f64 {
    score + weight * category_increment(n)
}

pub fn objective(selection: &[ScoredItem], w: &CategoryWeights) -> f64 {
    let mut counts = vec![0usize; w.d()];
    let mut total = 0.0;
    for item in selection {
        counts[item.category] += 1;
        total += item.score;
    }
    total
        + counts
            .iter()
            .zip(w.as_slice())
            .map(|(&n, &wj)| wj * (n as f64).ln_1p())
            .sum::<f64>()
}

pub fn marginal_gain(state: &SelectionState, item: &ScoredItem, w: &CategoryWeights) -> f64 {
    gain_with_count(item.score, w[item.category], state.counts[item.category])
}

/// Greedy preference: larger gain, then larger score, then smaller item id.
#[inline]
fn prefer(gain_a: f64, a: &ScoredItem, gain_b: f64, b: &ScoredItem) -> Ordering {
    gain_a
        .total_cmp(&gain_b)
        .then_with(|| a.score.total_cmp(&b.score))
        .then_with(|| b.item_id.cmp(&a.item_id))
}

fn validate(items: &[ScoredItem], w: &CategoryWeights, k: usize) -> Result<(), DiversifyError> {
    if k > items.len() {
        return Err(DiversifyError::TooMany { k, n: items.len() });
    }
    for it in items {
        if it.category >= w.d() {
            return Err(DiversifyError::CategoryOutOfRange {
                item_id: it.item_id.to_string(),
                category: it.category,
                d: w.d(),
            });
        }
        if !(it.score.is_finite() && it.score >= 0.0) {
            return Err(DiversifyError::InvalidScore(it.item_id.to_string()));
        }
    }
    Ok(())
}

/// Plain greedy: every step evaluates every remaining item.
pub fn greedy_select(
    items: &[ScoredItem],
    w: &CategoryWeights,
    k: usize,
) -> Result<SelectionState, DiversifyError> {
    validate(items, w, k)?;
    let mut state = SelectionState::empty(w.d());
    let mut remaining: Vec<usize> = (0..items.len()).collect();
    for _ in 0..k {
        let mut best_pos = 0;
        let mut best_gain = f64::NEG_INFINITY;
        for (pos, &i) in remaining.iter().enumerate() {
            let gain = marginal_gain(&state, &items[i], w);
            if pos == 0 || prefer(gain, &items[i], best_gain, &items[remaining[best_pos]]).is_gt() {
                best_pos = pos;
                best_gain = gain;
            }
        }
        state.evaluations += remaining.len() as u64;
        let i = remaining.swap_remove(best_pos);
        state.push(items[i].clone(), best_gain);
    }
    Ok(state)
}

struct Entry<'a> {
    gain: f64,
    item: &'a ScoredItem,
    /// Category count the gain was computed against.
    count_at: usize,
}

impl PartialEq for Entry<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Entry<'_> {}

impl PartialOrd for Entry<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        prefer(self.gain, self.item, other.gain, other.item)
    }
}

/// Lazy greedy (CELF) as an on-demand stream of the greedy sequence.
///
/// Cached gains are upper bounds because gains only shrink; an entry whose
/// category count is unchanged since its evaluation is exact and, at the top
/// of the heap, is the greedy argmax.
pub struct LazyGreedy<'a> {
    heap: BinaryHeap<Entry<'a>>,
    weights: &'a CategoryWeights,
    state: SelectionState,
}

impl<'a> LazyGreedy<'a> {
    pub fn new(items: &'a [ScoredItem], w: &'a CategoryWeights) -> Result<Self, DiversifyError> {
        validate(items, w, 0)?;
        let mut state = SelectionState::empty(w.d());
        state.evaluations = items.len() as u64;
        let heap = items
            .iter()
            .map(|item| Entry {
                gain: gain_with_count(item.score, w[item.category], 0),
                item,
                count_at: 0,
            })
            .collect();
        Ok(Self {
            heap,
            weights: w,
            state,
        })
    }

    /// Selects the next item, or `None` once every item is chosen.
    pub fn next_item(&mut self) -> Option<&ScoredItem> {
        loop {
            let mut top = self.heap.pop()?;
            let current = self.state.counts[top.item.category];
            if top.count_at == current {
                self.state.push(top.item.clone(), top.gain);
                return self.state.chosen.last();
            }
            top.gain = gain_with_count(top.item.score, self.weights[top.item.category], current);
            top.count_at = current;
            self.state.evaluations += 1;
            self.heap.push(top);
        }
    }

    pub fn state(&self) -> &SelectionState {
        &self.state
    }

    pub fn into_state(self) -> SelectionState {
        self.state
    }
}

impl Iterator for LazyGreedy<'_> {
    type Item = ScoredItem;

    fn next(&mut self) -> Option<ScoredItem> {
        self.next_item().cloned()
    }
}

/// The first `k` items of the greedy sequence, computed lazily.
pub fn celf_select(
    items: &[ScoredItem],
    w: &CategoryWeights,
    k: usize,
) -> Result<SelectionState, DiversifyError> {
    validate(items, w, k)?;
    let mut lazy = LazyGreedy::new(items, w)?;
    for _ in 0..k {
        lazy.next_item();
    }
    Ok(lazy.into_state())
}

/// Drops every item that cannot appear among the first `k` greedy picks:
/// within a category the greedy order is score order, so at most the top `k`
/// of each category survive. Output order follows the input.
pub fn candidate_pool(items: &[ScoredItem], d: usize, k: usize) -> Vec<ScoredItem> {
    let mut by_cat: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (i, it) in items.iter().enumerate() {
        by_cat[it.category].push(i);
    }
    let mut keep = vec![false; items.len()];
    for idx in &mut by_cat {
        if idx.len() > k {
            idx.select_nth_unstable_by(k, |&a, &b| prefer(0.0, &items[b], 0.0, &items[a]));
            idx.truncate(k);
        }
        for &i in idx.iter() {
            keep[i] = true;
        }
    }
    items
        .iter()
        .zip(keep)
        .filter(|&(_, k)| k)
        .map(|(it, _)| it.clone())
        .collect()
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Largest instance brute force accepts.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Exhaustive optimum over all size-`k` subsets. Returns the best subset in
/// input order and its objective value; the first subset found wins ties.
pub fn brute_force_select(
    items: &[ScoredItem],
    w: &CategoryWeights,
    k: usize,
) -> Result<(Vec<ScoredItem>, f64), DiversifyError> {
    validate(items, w, k)?;
    let subsets = binomial(items.len(), k);
    if subsets > BRUTE_FORCE_LIMIT {
        return Err(DiversifyError::TooLarge(subsets));
    }
    let n = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut buf = Vec::with_capacity(k);
    loop {
        buf.clear();
        buf.extend(idx.iter().map(|&i| items[i].clone()));
        let value = objective(&buf, w);
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((idx.clone(), value));
        }
        // next combination in lexicographic order
        let Some(pos) = (0..k).rev().find(|&p| idx[p] != p + n - k) else {
            break;
        };
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
    let (idx, value) = best.expect("at least one subset");
    Ok((idx.into_iter().map(|i| items[i].clone()).collect(), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abc() -> Vec<ScoredItem> {
        vec![
            ScoredItem::new("a", 0, 0.5),
            ScoredItem::new("b", 0, 0.45),
            ScoredItem::new("c", 1, 0.2),
        ]
    }

    fn w2(x: f64) -> CategoryWeights {
        CategoryWeights::uniform(2, x)
    }

    #[test]
    fn objective_examples() {
        assert_eq!(objective(&[], &w2(1.0)), 0.0);
        let one = [ScoredItem::new("x", 0, 0.5)];
        assert!((objective(&one, &w2(1.0)) - 1.193147).abs() < 1e-6);
        let pair = [ScoredItem::new("x", 0, 0.5), ScoredItem::new("y", 0, 0.5)];
        assert!((objective(&pair, &w2(1.0)) - 2.098612).abs() < 1e-6);
    }

    #[test]
    fn marginal_gain_examples() {
        let w = w2(1.0);
        let mut state = SelectionState::empty(2);
        let it = ScoredItem::new("b", 0, 0.45);
        assert_eq!(marginal_gain(&state, &it, &w), 0.45 + 2f64.ln());
        state.push(ScoredItem::new("a", 0, 0.5), 0.0);
        assert!((marginal_gain(&state, &it, &w) - 0.855465).abs() < 1e-6);
        let zero = CategoryWeights::uniform(2, 0.0);
        assert_eq!(marginal_gain(&state, &it, &zero), 0.45);
    }

    #[test]
    fn greedy_examples() {
        let sel = greedy_select(&abc(), &w2(1.0), 2).unwrap();
        assert_eq!(sel.ids(), ["a", "c"]);
        let sel = greedy_select(&abc(), &w2(0.0), 2).unwrap();
        assert_eq!(sel.ids(), ["a", "b"]);
        let all = greedy_select(&abc(), &w2(1.0), 3).unwrap();
        assert_eq!(all.ids(), ["a", "c", "b"]);
        assert_eq!(all.counts, vec![2, 1]);
        assert!((all.objective_value - objective(&all.chosen, &w2(1.0))).abs() < 1e-9);
    }

    #[test]
    fn k_larger_than_n_is_error() {
        assert_eq!(
            greedy_select(&abc(), &w2(1.0), 4).unwrap_err(),
            DiversifyError::TooMany { k: 4, n: 3 }
        );
        assert!(celf_select(&abc(), &w2(1.0), 4).is_err());
    }

    #[test]
    fn invalid_inputs_rejected() {
        let bad = [ScoredItem::new("x", 2, 0.1)];
        assert!(matches!(
            greedy_select(&bad, &w2(1.0), 1),
            Err(DiversifyError::CategoryOutOfRange { .. })
        ));
        let neg = [ScoredItem::new("x", 0, -0.1)];
        assert!(matches!(celf_select(&neg, &w2(1.0), 1), Err(DiversifyError::InvalidScore(_))));
        assert!(CategoryWeights::new(vec![1.0, f64::NAN]).is_err());
        assert!(CategoryWeights::new(vec![-1.0]).is_err());
    }

    #[test]
    fn ties_break_by_score_then_id() {
        let w = CategoryWeights::new(vec![0.1, 0.0]).unwrap();
        let s = 0.1 * 2f64.ln();
        // equal gains; z has the higher score, x and y tie entirely.
        let items = vec![
            ScoredItem::new("y", 0, 0.3),
            ScoredItem::new("x", 0, 0.3),
            ScoredItem::new("z", 1, 0.3 + s),
        ];
        let g = greedy_select(&items, &w, 3).unwrap();
        assert_eq!(g.ids()[0], "z");
        assert_eq!(g.ids(), celf_select(&items, &w, 3).unwrap().ids());
        let tied = vec![ScoredItem::new("q", 0, 0.2), ScoredItem::new("p", 0, 0.2)];
        assert_eq!(greedy_select(&tied, &w, 1).unwrap().ids(), ["p"]);
    }

    #[test]
    fn celf_single_item() {
        let one = [ScoredItem::new("x", 0, 0.3)];
        let sel = celf_select(&one, &w2(1.0), 1).unwrap();
        assert_eq!(sel.ids(), ["x"]);
        assert_eq!(sel.evaluations, 1);
    }

    #[test]
    fn celf_single_category_reevaluates() {
        let items: Vec<ScoredItem> = (0..30)
            .map(|i| ScoredItem::new(format!("i{i:02}"), 0, 0.01 * i as f64))
            .collect();
        let w = CategoryWeights::uniform(1, 1.0);
        let g = greedy_select(&items, &w, 10).unwrap();
        let c = celf_select(&items, &w, 10).unwrap();
        assert_eq!(g.ids(), c.ids());
        // every later selection needs at least one re-evaluation
        assert!(c.evaluations >= 30 + 9, "{}", c.evaluations);
        assert!(c.evaluations < g.evaluations);
        assert_eq!(g.evaluations, (21..=30).sum::<u64>());
    }

    #[test]
    fn brute_force_examples() {
        let (best, value) = brute_force_select(&abc(), &w2(1.0), 2).unwrap();
        let ids: Vec<_> = best.iter().map(|i| &*i.item_id).collect();
        assert_eq!(ids, ["a", "c"]);
        assert!((value - 2.086294).abs() < 1e-6);
        assert!((value - (0.7 + 2.0 * 2f64.ln())).abs() < 1e-12);
        let (best, _) = brute_force_select(&abc(), &w2(0.0), 2).unwrap();
        assert_eq!(best.iter().map(|i| &*i.item_id).collect::<Vec<_>>(), ["a", "b"]);
        let (all, _) = brute_force_select(&abc(), &w2(1.0), 3).unwrap();
        assert_eq!(all.len(), 3);
        let big: Vec<ScoredItem> = (0..60).map(|i| ScoredItem::new(format!("{i}"), 0, 0.1)).collect();
        assert!(matches!(
            brute_force_select(&big, &CategoryWeights::uniform(1, 1.0), 10),
            Err(DiversifyError::TooLarge(_))
        ));
    }

    #[test]
    fn saturation_one_category_constant_score() {
        let items: Vec<ScoredItem> = (0..20).map(|i| ScoredItem::new(format!("{i}"), 0, 0.25)).collect();
        let w = CategoryWeights::uniform(1, 0.7);
        for k in 0..=20 {
            let sel = celf_select(&items, &w, k).unwrap();
            let expect = k as f64 * 0.25 + 0.7 * (1.0 + k as f64).ln();
            assert!((objective(&sel.chosen, &w) - expect).abs() < 1e-12);
        }
    }

    fn instance() -> impl Strategy<Value = (Vec<ScoredItem>, CategoryWeights)> {
        (1usize..8).prop_flat_map(|d| {
            (
                prop::collection::vec((0..d, 0.0f64..1.0), 1..30),
                prop::collection::vec(0.0f64..2.0, d),
            )
                .prop_map(|(raw, w)| {
                    let items = raw
                        .into_iter()
                        .enumerate()
                        .map(|(i, (c, s))| ScoredItem::new(format!("i{i}"), c, s))
                        .collect();
                    (items, CategoryWeights::new(w).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn marginal_gain_is_objective_difference((items, w) in instance()) {
            let mut state = SelectionState::empty(w.d());
            for it in &items {
                let g = marginal_gain(&state, it, &w);
                let before = objective(&state.chosen, &w);
                state.push(it.clone(), g);
                let after = objective(&state.chosen, &w);
                prop_assert!((after - before - g).abs() < 1e-12);
                prop_assert!(after >= before);
            }
        }

        #[test]
        fn gains_diminish_as_state_grows((items, w) in instance()) {
            let probe = &items[0];
            let mut state = SelectionState::empty(w.d());
            let mut last = marginal_gain(&state, probe, &w);
            for it in &items[1..] {
                state.push(it.clone(), 0.0);
                let g = marginal_gain(&state, probe, &w);
                prop_assert!(g <= last);
                last = g;
            }
        }

        #[test]
        fn celf_matches_greedy((items, w) in instance(), frac in 0.0f64..=1.0) {
            let k = (frac * items.len() as f64).round() as usize;
            let g = greedy_select(&items, &w, k).unwrap();
            let c = celf_select(&items, &w, k).unwrap();
            prop_assert_eq!(g.ids(), c.ids());
            prop_assert_eq!(g.objective_value.to_bits(), c.objective_value.to_bits());
            prop_assert!((c.objective_value - objective(&c.chosen, &w)).abs() < 1e-9);
            prop_assert_eq!(c.counts.iter().sum::<usize>(), k);
        }

        #[test]
        fn pool_preserves_greedy_prefix((items, w) in instance(), frac in 0.0f64..=1.0) {
            let k = (frac * items.len() as f64).round() as usize;
            let pool = candidate_pool(&items, w.d(), k);
            prop_assert!(pool.len() <= items.len());
            let full = celf_select(&items, &w, k).unwrap();
            let pooled = celf_select(&pool, &w, k).unwrap();
            prop_assert_eq!(full.ids(), pooled.ids());
        }

        #[test]
        fn lazy_stream_is_greedy_order((items, w) in instance()) {
            let streamed: Vec<ScoredItem> = LazyGreedy::new(&items, &w).unwrap().collect();
            let g = greedy_select(&items, &w, items.len()).unwrap();
            prop_assert_eq!(streamed, g.chosen);
        }
    }
}
