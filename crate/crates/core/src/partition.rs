use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::vector::{extract_subvector, GradientVector};

/// A disjoint cover of `{0, …, d−1}` by `p` index sets, each sorted
/// ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPartition {
    dim: usize,
    subsets: Vec<Vec<usize>>,
}

impl IndexPartition {
    /// Builds a partition from explicit subsets, checking disjointness and
    /// cover. Subsets are sorted; size balance is not required here.
    pub fn from_subsets(dim: usize, mut subsets: Vec<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        let mut seen = vec![false; dim];
        for s in &mut subsets {
            s.sort_unstable();
            for &j in s.iter() {
                if j >= dim {
                    return Err(Error::IndexOutOfRange { index: j, dim });
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidParameter(format!(
                        "index {j} appears in more than one subset"
                    )));
                }
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!("index {j} is not covered")));
        }
        Ok(Self { dim, subsets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_groups(&self) -> usize {
        self.subsets.len()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn subset(&self, q: usize) -> &[usize] {
        &self.subsets[q]
    }

    /// Splits `g` into one sub-vector per group.
    pub fn split(&self, g: &GradientVector) -> Result<Vec<GradientVector>> {
        if g.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: g.dim(),
            });
        }
        self.subsets
            .iter()
            .map(|s| extract_subvector(g, s))
            .collect()
    }

    /// Inverse of [`split`](Self::split).
    pub fn reassemble(&self, parts: &[GradientVector]) -> Result<GradientVector> {
        if parts.len() != self.subsets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.subsets.len(),
                found: parts.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        for (s, part) in self.subsets.iter().zip(parts) {
            if part.dim() != s.len() {
                return Err(Error::DimensionMismatch {
                    expected: s.len(),
                    found: part.dim(),
                });
            }
            for (&j, &v) in s.iter().zip(part.iter()) {
                out[j] = v;
            }
        }
        Ok(GradientVector::new(out))
    }
}

/// Uniformly random partition of `{0, …, d−1}` into `p` groups.
///
/// The identity permutation is shuffled with the seeded stream and cut into
/// contiguous chunks: the first `d mod p` chunks get `⌈d/p⌉` indices, the rest
/// `⌊d/p⌋`. `p > d` is clamped to `d`; `p = 0` is treated as 1.
pub fn make_partition(d: usize, p: usize, seed: &SeedSpec) -> Result<IndexPartition> {
    if d == 0 {
        return Err(Error::EmptyDimension);
    }
    let p = p.clamp(1, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut seed.rng());

    let base = d / p;
    let extra = d % p;
    let mut subsets = Vec::with_capacity(p);
    let mut start = 0;
    for q in 0..p {
        let len = base + usize::from(q < extra);
        let mut s = order[start..start + len].to_vec();
        s.sort_unstable();
        subsets.push(s);
        start += len;
    }
    Ok(IndexPartition { dim: d, subsets })
}
