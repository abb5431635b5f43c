//! Finite-horizon region sequences sampled from a chain.
//!
//! A plan is the best of several independent rollouts, scored by the total
//! variation distance between the sequence's visit frequencies and the
//! chain's target distribution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::ChainSolution;
use crate::graph::TargetDistribution;
use crate::linalg::Matrix;
use crate::rng::{self, Stream};

/// Default number of rollouts per plan.
pub const DEFAULT_ROLLOUTS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub start: usize,
    #[serde(rename = "K")]
    pub horizon: usize,
    pub regions: Vec<usize>,
    pub tv_cost: f64,
}

impl Sequence {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// `½ Σ |freq_i − w_i|`.
pub fn tv_distance(freq: &[f64], w: &[f64]) -> f64 {
    assert_eq!(freq.len(), w.len(), "tv_distance: length mismatch");
    0.5 * freq.iter().zip(w).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Relative visit frequencies of `regions` over `n` nodes.
pub fn visit_frequencies(regions: &[usize], n: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    for &r in regions {
        counts[r] += 1.0;
    }
    let total = regions.len().max(1) as f64;
    counts.iter_mut().for_each(|c| *c /= total);
    counts
}

pub fn sequence_cost(regions: &[usize], w: &TargetDistribution) -> f64 {
    tv_distance(&visit_frequencies(regions, w.len()), w.as_slice())
}

/// Column-wise cumulative distributions for sampling `P[·, i]`.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    cdf: Vec<Vec<(usize, f64)>>,
}

impl ChainSampler {
    pub fn new(p: &Matrix) -> Self {
        let n = p.cols();
        let cdf = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                let mut col: Vec<(usize, f64)> = (0..p.rows())
                    .filter(|&j| p[(j, i)] > 0.0)
                    .map(|j| {
                        acc += p[(j, i)];
                        (j, acc)
                    })
                    .collect();
                // Absorb round-off so the last bucket always catches u < 1.
                if let Some(last) = col.last_mut() {
                    last.1 = f64::INFINITY;
                }
                col
            })
            .collect();
        Self { cdf }
    }

    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let col = &self.cdf[from];
        let u: f64 = rng.gen();
        let idx = col.partition_point(|&(_, c)| c <= u);
        col[idx.min(col.len() - 1)].0
    }

    /// Visits of a `steps`-long walk from `start`, counting the start.
    pub fn visit_counts<R: Rng + ?Sized>(&self, start: usize, steps: usize, rng: &mut R) -> Vec<u64> {
        let mut counts = vec![0u64; self.cdf.len()];
        let mut cur = start;
        counts[cur] += 1;
        for _ in 1..steps {
            cur = self.step(cur, rng);
            counts[cur] += 1;
        }
        counts
    }
}

/// Samples a `K`-long walk starting (and counting) at `start`.
pub fn rollout<R: Rng + ?Sized>(chain: &ChainSolution, start: usize, k: usize, rng: &mut R) -> Sequence {
    rollout_with(&ChainSampler::new(&chain.transition), &chain.target, start, k, rng)
}

fn rollout_with<R: Rng + ?Sized>(
    sampler: &ChainSampler,
    w: &TargetDistribution,
    start: usize,
    k: usize,
    rng: &mut R,
) -> Sequence {
    assert!(k >= 1, "horizon must be at least 1");
    assert!(start < w.len(), "start node out of range");
    let mut regions = Vec::with_capacity(k);
    regions.push(start);
    let mut cur = start;
    for _ in 1..k {
        cur = sampler.step(cur, rng);
        regions.push(cur);
    }
    let tv_cost = sequence_cost(&regions, w);
    Sequence {
        start,
        horizon: k,
        regions,
        tv_cost,
    }
}

/// Best of `n_rollouts` independent rollouts; ties go to the earliest.
///
/// Rollout `r` draws from its own stream derived from one `u64` taken from
/// `rng`, so the result does not depend on evaluation order.
pub fn plan_sequence<R: Rng + ?Sized>(
    chain: &ChainSolution,
    start: usize,
    k: usize,
    n_rollouts: usize,
    rng: &mut R,
) -> Sequence {
    assert!(n_rollouts >= 1, "need at least one rollout");
    let sampler = ChainSampler::new(&chain.transition);
    let master: u64 = rng.gen();
    let mut best: Option<Sequence> = None;
    for r in 0..n_rollouts {
        let mut stream: Stream = rng::stream(master, "rollout", r as u64);
        let seq = rollout_with(&sampler, &chain.target, start, k, &mut stream);
        if best.as_ref().map_or(true, |b| seq.tv_cost < b.tv_cost) {
            best = Some(seq);
        }
    }
    best.expect("at least one rollout")
}

/// The `r`-th rollout that [`plan_sequence`] would draw with the same `rng` state.
pub fn planned_rollouts<R: Rng + ?Sized>(
    chain: &ChainSolution,
    start: usize,
    k: usize,
    n_rollouts: usize,
    rng: &mut R,
) -> Vec<Sequence> {
    let sampler = ChainSampler::new(&chain.transition);
    let master: u64 = rng.gen();
    (0..n_rollouts)
        .map(|r| rollout_with(&sampler, &chain.target, start, k, &mut rng::stream(master, "rollout", r as u64)))
        .collect()
}
