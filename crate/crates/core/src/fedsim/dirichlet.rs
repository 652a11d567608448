use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Non-IID assignment of sample indices to clients.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPartition {
    pub client_indices: Vec<Vec<usize>>,
    pub beta: f64,
    /// `proportions[y][i]`: share of class `y` drawn for client `i`.
    pub proportions: Vec<Vec<f64>>,
}

/// For each class, draws client shares from `Dir(β)` and hands out that
/// class's (shuffled) samples by largest-remainder rounding of the shares.
pub fn dirichlet_partition(labels: &[usize], classes: usize, n: usize, beta: f64, seed: &SeedSpec) -> Result<DirichletPartition> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("β must be positive, got {beta}")));
    }
    let gamma = Gamma::new(beta, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut client_indices = vec![Vec::new(); n];
    let mut proportions = Vec::with_capacity(classes);
    for y in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == y).collect();
        members.shuffle(&mut seed.derive("class-order", y as u64).rng());

        let mut rng = seed.derive("shares", y as u64).rng();
        let mut shares: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = shares.iter().sum();
        if total > 0.0 && total.is_finite() {
            shares.iter_mut().for_each(|s| *s /= total);
        } else {
            // every gamma draw underflowed; fall back to equal shares
            shares.iter_mut().for_each(|s| *s = 1.0 / n as f64);
        }

        let counts = largest_remainder(&shares, members.len());
        let mut start = 0;
        for (client, &c) in counts.iter().enumerate() {
            client_indices[client].extend_from_slice(&members[start..start + c]);
            start += c;
        }
        proportions.push(shares);
    }
    for idx in &mut client_indices {
        idx.sort_unstable();
    }
    Ok(DirichletPartition {
        client_indices,
        beta,
        proportions,
    })
}

/// Integer counts summing to `total`, proportional to `shares`: floors
/// first, then one extra to the largest fractional parts (ties to the lower
/// index).
fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_client_gets_everything() {
        let labels = vec![0, 1, 2, 1, 0, 2, 2];
        let part = dirichlet_partition(&labels, 3, 1, 0.5, &SeedSpec::new(1)).unwrap();
        assert_eq!(part.client_indices, vec![(0..7).collect::<Vec<_>>()]);
    }

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 10), vec![2, 3, 5]);
        assert_eq!(largest_remainder(&[0.15, 0.15, 0.7], 3), vec![1, 0, 2]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(dirichlet_partition(&[0], 1, 0, 0.5, &SeedSpec::new(0)).is_err());
        assert!(dirichlet_partition(&[0], 1, 2, 0.0, &SeedSpec::new(0)).is_err());
    }

    #[test]
    fn small_beta_is_skewed() {
        let labels: Vec<usize> = (0..2000).map(|i| i % 10).collect();
        let skewed = dirichlet_partition(&labels, 10, 50, 0.1, &SeedSpec::new(2)).unwrap();
        let even = dirichlet_partition(&labels, 10, 50, 100.0, &SeedSpec::new(2)).unwrap();
        let max_share = |p: &DirichletPartition| {
            p.proportions
                .iter()
                .map(|row| row.iter().copied().fold(0.0, f64::max))
                .sum::<f64>()
        };
        assert!(max_share(&skewed) > 2.0 * max_share(&even));
    }

    proptest! {
        #[test]
        fn conserves_samples(
            labels in prop::collection::vec(0usize..6, 0..400),
            n in 1usize..40,
            beta in 0.05f64..5.0,
            seed in any::<u64>(),
        ) {
            let part = dirichlet_partition(&labels, 6, n, beta, &SeedSpec::new(seed)).unwrap();
            let mut all: Vec<usize> = part.client_indices.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for row in &part.proportions {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
