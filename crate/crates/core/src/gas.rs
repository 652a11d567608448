//! Gradient splitting (GAS).
//!
//! The coordinates are randomly partitioned into `p` groups. The base rule
//! aggregates each group of sub-vectors separately, and that group aggregate
//! serves as the reference a client is measured against: client `i` scores
//! `‖gᵢ⁽q⁾ − ĝ⁽q⁾‖` in group `q`. Scores are summed over groups, the clients with
//! the lowest totals are kept, and the output is the plain mean of their full
//! gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregators::{aggregate_detailed, lowest_k, AggregatorSpec};
use crate::error::{Error, Result};
use crate::partition::{make_partition, IndexPartition};
use crate::seed::SeedSpec;
use crate::vector::{common_dim, ensure_finite, mean_of, GradientVector};

/// How many clients are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selection {
    /// The server knows the Byzantine count and keeps `n − f`.
    KnownF { f: usize },
    /// Unknown `f`: drop `⌈δ·n⌉` of the `n` participating clients.
    Ratio { delta: f64 },
}

impl Selection {
    /// Byzantine count implied for `n` participants.
    pub fn byzantine_count(&self, n: usize) -> usize {
        match *self {
            Selection::KnownF { f } => f,
            // 0.3 * 50 lands a hair above 15 in binary; absorb that.
            Selection::Ratio { delta } => (delta * n as f64 - 1e-9).ceil().max(0.0) as usize,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Selection::KnownF { f } if 2 * f >= n => Err(Error::precondition(
                "GAS",
                format!("f < n/2 (n={n}, f={f})"),
            )),
            Selection::Ratio { delta } if !(0.0..0.5).contains(&delta) => Err(Error::precondition(
                "GAS",
                format!("δ in [0, 0.5) (δ={delta})"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionPolicy {
    /// Fresh partition every round, seeded by `(seed, round)`.
    #[default]
    PerRound,
    /// One partition for the whole run.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasConfig {
    pub p: usize,
    pub base: AggregatorSpec,
    pub selection: Selection,
    #[serde(default)]
    pub partition_policy: PartitionPolicy,
    pub seed: SeedSpec,
}

/// Per-group identification scores (`n × p`) and their row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub group_scores: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
}

impl ScoreTable {
    /// Builds the table from per-group score columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let n = columns.first().map_or(0, Vec::len);
        let group_scores: Vec<Vec<f64>> = (0..n)
            .map(|i| columns.iter().map(|col| col[i]).collect())
            .collect();
        let mut table = ScoreTable {
            group_scores,
            totals: Vec::new(),
        };
        table.totals = total_scores(&table);
        table
    }

    pub fn num_clients(&self) -> usize {
        self.group_scores.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    /// Ascending client indices.
    pub selected: Vec<usize>,
    pub keep_count: usize,
}

/// Everything one GAS call produces.
#[derive(Debug, Clone, PartialEq)]
pub struct GasOutput {
    pub aggregate: GradientVector,
    pub scores: ScoreTable,
    pub selection: SelectionResult,
    pub partition: IndexPartition,
}

/// Aggregates one group and scores every client against the result.
pub fn group_scores(
    sub_vectors: &[GradientVector],
    base: &AggregatorSpec,
    f: usize,
    seed: &SeedSpec,
) -> Result<(GradientVector, Vec<f64>)> {
    let reference = aggregate_detailed(base, sub_vectors, f, seed)?.value;
    let scores = sub_vectors.iter().map(|g| g.distance(&reference)).collect();
    Ok((reference, scores))
}

/// Row sums, accumulated in ascending group order.
pub fn total_scores(table: &ScoreTable) -> Vec<f64> {
    table
        .group_scores
        .iter()
        .map(|row| row.iter().fold(0.0, |acc, s| acc + s))
        .collect()
}

/// The `keep_count` lowest totals, ties to the lower client index.
pub fn select_clients(totals: &[f64], keep_count: usize) -> Result<SelectionResult> {
    if keep_count == 0 || keep_count > totals.len() {
        return Err(Error::InvalidParameter(format!(
            "keep count {keep_count} outside 1..={}",
            totals.len()
        )));
    }
    Ok(SelectionResult {
        selected: lowest_k(totals, keep_count),
        keep_count,
    })
}

impl GasConfig {
    pub fn partition_for_round(&self, dim: usize, round: usize) -> Result<IndexPartition> {
        let seed = match self.partition_policy {
            PartitionPolicy::PerRound => self.seed.derive("partition", round as u64),
            PartitionPolicy::Fixed => self.seed.derive("partition", 0),
        };
        make_partition(dim, self.p, &seed)
    }
}

/// Runs the full split / score / select / average pipeline.
pub fn gas_aggregate(config: &GasConfig, gradients: &[GradientVector], round: usize) -> Result<GasOutput> {
    let dim = common_dim(gradients)?;
    ensure_finite(gradients)?;
    let n = gradients.len();
    if n < 2 {
        return Err(Error::precondition("GAS", format!("n ≥ 2 (n={n})")));
    }
    config.selection.validate(n)?;
    let f = config.selection.byzantine_count(n);
    if f >= n {
        return Err(Error::precondition("GAS", format!("n − f ≥ 1 (n={n}, f={f})")));
    }
    config.base.validate(n, f)?;

    let partition = config.partition_for_round(dim, round)?;
    let round_seed = config.seed.derive("base", round as u64);

    // one sequential pass per client; subsets are sorted, so pushing in
    // coordinate order reproduces each subset's order
    let mut group_of = vec![0u32; dim];
    for (q, subset) in partition.subsets().iter().enumerate() {
        for &j in subset {
            group_of[j] = q as u32;
        }
    }
    let split: Vec<Vec<Vec<f64>>> = gradients
        .par_iter()
        .map(|g| {
            let mut parts: Vec<Vec<f64>> = partition.subsets().iter().map(|s| Vec::with_capacity(s.len())).collect();
            for (&q, &x) in group_of.iter().zip(g.iter()) {
                parts[q as usize].push(x);
            }
            parts
        })
        .collect();
    let mut by_group: Vec<Vec<GradientVector>> = (0..partition.num_groups()).map(|_| Vec::with_capacity(n)).collect();
    for parts in split {
        for (group, part) in by_group.iter_mut().zip(parts) {
            group.push(GradientVector::new(part));
        }
    }

    // each group writes its own slot, so the table is the same under any
    // thread count
    let columns: Vec<Vec<f64>> = by_group
        .par_iter()
        .enumerate()
        .map(|(q, subs)| {
            group_scores(subs, &config.base, f, &round_seed.derive("group", q as u64)).map(|(_, s)| s)
        })
        .collect::<Result<_>>()?;

    let scores = ScoreTable::from_columns(&columns);
    let selection = select_clients(&scores.totals, n - f)?;
    let aggregate = mean_of(gradients, &selection.selected)?;
    Ok(GasOutput {
        aggregate,
        scores,
        selection,
        partition,
    })
}
