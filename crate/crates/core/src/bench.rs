//! Naive greedy versus CELF timing on synthetic instances.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diversifier::{celf_select, greedy_select, CategoryWeights, DiversifyError, ScoredItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchDistribution {
    /// Uniform categories and scores.
    Uniform,
    /// Zipf(1) category sizes and scores skewed toward zero.
    Zipf,
}

impl std::str::FromStr for BenchDistribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "zipf" => Ok(Self::Zipf),
            other => Err(format!("unknown distribution {other:?} (expected uniform or zipf)")),
        }
    }
}

/// A random instance: items with categories below `d`, and weights in [0, 1).
pub fn bench_instance(
    n: usize,
    d: usize,
    distribution: BenchDistribution,
    seed: u64,
) -> (Vec<ScoredItem>, CategoryWeights) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = CategoryWeights::new((0..d).map(|_| rng.random::<f64>()).collect()).expect("weights in [0, 1)");
    let cdf: Vec<f64> = {
        let mut acc = 0.0;
        let raw: Vec<f64> = (0..d)
            .map(|j| match distribution {
                BenchDistribution::Uniform => 1.0,
                BenchDistribution::Zipf => 1.0 / (j as f64 + 1.0),
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter()
            .map(|x| {
                acc += x / total;
                acc
            })
            .collect()
    };
    let items = (0..n)
        .map(|i| {
            let u: f64 = rng.random();
            let category = cdf.partition_point(|&c| c < u).min(d - 1);
            let score = match distribution {
                BenchDistribution::Uniform => rng.random::<f64>(),
                BenchDistribution::Zipf => rng.random::<f64>().powi(3),
            };
            ScoredItem::new(format!("item{i:07}"), category, score)
        })
        .collect();
    (items, weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub evaluations_naive: u64,
    pub evaluations_celf: u64,
    pub wall_time_naive: f64,
    pub wall_time_celf: f64,
    pub identical: bool,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str =
        "n,k,d,evaluations_naive,evaluations_celf,wall_time_naive,wall_time_celf,identical";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{}",
            self.n,
            self.k,
            self.d,
            self.evaluations_naive,
            self.evaluations_celf,
            self.wall_time_naive,
            self.wall_time_celf,
            self.identical
        )
    }
}

/// Times both selectors on one instance; wall times are in seconds.
pub fn bench_diversify(
    n: usize,
    k: usize,
    d: usize,
    distribution: BenchDistribution,
    seed: u64,
) -> Result<BenchRow, DiversifyError> {
    let (items, weights) = bench_instance(n, d.max(1), distribution, seed);
    let t = Instant::now();
    let celf = celf_select(&items, &weights, k)?;
    let wall_time_celf = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let naive = greedy_select(&items, &weights, k)?;
    let wall_time_naive = t.elapsed().as_secs_f64();
    Ok(BenchRow {
        n,
        k,
        d,
        evaluations_naive: naive.evaluations,
        evaluations_celf: celf.evaluations,
        wall_time_naive,
        wall_time_celf,
        identical: naive.ids() == celf.ids(),
    })
}
