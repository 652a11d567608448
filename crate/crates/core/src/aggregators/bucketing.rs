use rand::seq::SliceRandom;

use super::{aggregate_detailed, AggregatorSpec};
use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::vector::{common_dim, mean_of, GradientVector};

/// Random permutation of `0..n` cut into consecutive buckets of at most `s`
/// clients.
pub fn bucket_assignment(n: usize, s: usize, seed: &SeedSpec) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    order.chunks(s.max(1)).map(<[usize]>::to_vec).collect()
}

/// Averages clients within random buckets of size `s`, then applies `spec`
/// to the bucket means.
///
/// In the worst case every Byzantine client lands in a different bucket, so
/// the inner rule still sees up to `f` corrupted inputs and needs more than
/// `2f` buckets.
pub fn bucketing_wrap(
    spec: &AggregatorSpec,
    gradients: &[GradientVector],
    f: usize,
    s: usize,
    seed: &SeedSpec,
) -> Result<GradientVector> {
    common_dim(gradients)?;
    if s == 0 {
        return Err(Error::precondition("Bucketing", "bucket size s ≥ 1"));
    }
    let buckets = bucket_assignment(gradients.len(), s, &seed.derive("buckets", 0));
    if buckets.len() <= 2 * f {
        return Err(Error::precondition(
            "Bucketing",
            format!("more than 2f buckets (buckets={}, f={f})", buckets.len()),
        ));
    }
    let means = buckets
        .iter()
        .map(|b| mean_of(gradients, b))
        .collect::<Result<Vec<_>>>()?;
    aggregate_detailed(spec, &means, f, &seed.derive("inner", 0)).map(|a| a.value)
}
