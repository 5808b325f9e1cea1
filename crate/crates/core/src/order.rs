//! Training-data orderings driven by leverage scores.
//!
//! Scores become a sampling distribution `P_i = l_i / sum_j l_j`; each epoch
//! gets an ordering under one of four policies:
//!
//! * `dec`: strictly decreasing `P`, ties by ascending index, the same every epoch;
//! * `dec-swr`: `n` independent draws from `P` (duplicates allowed, zero-probability items never drawn);
//! * `dec-swor`: weighted sampling without replacement via exponential keys `-ln(u)/P_i`;
//! * `shuffle`: a uniform permutation.
//!
//! Stochastic policies draw from a stream keyed by `(seed, epoch)`.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Shuffle,
    Dec,
    DecSwr,
    DecSwor,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Shuffle,
        PolicyKind::Dec,
        PolicyKind::DecSwr,
        PolicyKind::DecSwor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Shuffle => "shuffle",
            PolicyKind::Dec => "dec",
            PolicyKind::DecSwr => "dec-swr",
            PolicyKind::DecSwor => "dec-swor",
        }
    }

    /// Whether every plan is a permutation of `0..n`.
    pub fn is_permutation(self) -> bool {
        !matches!(self, PolicyKind::DecSwr)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "shuffle" => Ok(PolicyKind::Shuffle),
            "dec" => Ok(PolicyKind::Dec),
            "dec-swr" => Ok(PolicyKind::DecSwr),
            "dec-swor" => Ok(PolicyKind::DecSwor),
            other => Err(Error::InvalidSpec(format!("unknown ordering policy {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingPolicy {
    pub kind: PolicyKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingPlan {
    pub epoch: u64,
    pub indices: Vec<usize>,
    pub policy: OrderingPolicy,
}

pub fn scores_to_distribution(scores: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = scores.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::InvalidSpec(format!(
            "score {i} is {}; scores must be finite and nonnegative",
            scores[i]
        )));
    }
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all scores are zero".into()));
    }
    Ok(scores.iter().map(|s| s / total).collect())
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidSpec("probabilities must be finite and nonnegative".into()));
    }
    if !p.iter().any(|&v| v > 0.0) {
        return Err(Error::Degenerate("distribution has no positive mass".into()));
    }
    Ok(())
}

fn decreasing(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_unstable_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx
}

/// Exponential-key order: ascending `-ln(u_i) / p_i`, which has the law of
/// successive draws from the renormalized remainder. Zero-probability items
/// get an infinite key and come last, by ascending index.
fn exponential_keys<R: Rng>(p: &[f64], rng: &mut R) -> Vec<usize> {
    let keys: Vec<f64> = p
        .iter()
        .map(|&pi| {
            // 1 - u lies in (0, 1], so the log is finite.
            let u = 1.0 - rng.random::<f64>();
            if pi > 0.0 {
                -u.ln() / pi
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_unstable_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    idx
}

pub fn make_plan(p: &[f64], policy: &OrderingPolicy, epoch: u64) -> Result<OrderingPlan> {
    check_distribution(p)?;
    let n = p.len();
    let mut rng = keyed_rng(policy.seed, epoch);
    let indices = match policy.kind {
        PolicyKind::Dec => decreasing(p),
        PolicyKind::Shuffle => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx
        }
        PolicyKind::DecSwr => {
            let dist = WeightedIndex::new(p).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
        PolicyKind::DecSwor => exponential_keys(p, &mut rng),
    };
    Ok(OrderingPlan {
        epoch,
        indices,
        policy: *policy,
    })
}

/// Contiguous mini-batches of the plan; the last may be short.
pub fn emit_batches(plan: &OrderingPlan, batch_size: usize) -> Result<Vec<&[usize]>> {
    if batch_size == 0 {
        return Err(Error::InvalidSpec("batch size must be >= 1".into()));
    }
    Ok(plan.indices.chunks(batch_size).collect())
}
