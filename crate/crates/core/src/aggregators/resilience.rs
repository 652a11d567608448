//! Empirical `(f, λ)`-resilience certificate.
//!
//! For each trial, `n − f` honest points are drawn from a standard Gaussian
//! and `f` adversarial points are placed by an [`Adversary`]. The trial's
//! ratio is `‖𝒜(x) − x̄_S‖ / max_{i,i' ∈ S} ‖xᵢ − xᵢ'‖` with `S` the honest set,
//! and `lambda_hat` is the largest ratio observed.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{aggregate_detailed, AggregatorSpec};
use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::vector::{distance, mean, GradientVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary {
    /// A unit-variance cluster centred `scale` away from the origin in a
    /// random direction.
    Distant { scale: f64 },
    /// Every adversarial point sits exactly on the honest mean.
    HonestMean,
}

impl Default for Adversary {
    fn default() -> Self {
        Adversary::Distant { scale: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceReport {
    pub n: usize,
    pub f: usize,
    pub dim: usize,
    pub trials: usize,
    pub skipped: usize,
    pub lambda_hat: f64,
    pub ratios: Vec<f64>,
}

pub fn estimate_resilience(
    spec: &AggregatorSpec,
    n: usize,
    f: usize,
    dim: usize,
    trials: usize,
    adversary: Adversary,
    seed: &SeedSpec,
) -> Result<ResilienceReport> {
    spec.validate(n, f)?;
    if trials == 0 || dim == 0 {
        return Err(Error::InvalidParameter("trials and dim must be positive".into()));
    }
    let honest = n - f;
    let mut ratios = Vec::with_capacity(trials);
    let mut skipped = 0;
    for t in 0..trials {
        let mut rng = seed.derive("trial", t as u64).rng();
        let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut points: Vec<GradientVector> = (0..honest)
            .map(|_| GradientVector::new((0..dim).map(|_| gauss()).collect()))
            .collect();
        let honest_mean = mean(&points)?;

        let mut spread: f64 = 0.0;
        for i in 0..honest {
            for j in i + 1..honest {
                spread = spread.max(distance(&points[i], &points[j]));
            }
        }

        match adversary {
            Adversary::HonestMean => points.extend((0..f).map(|_| honest_mean.clone())),
            Adversary::Distant { scale } => {
                let mut dir: Vec<f64> = (0..dim).map(|_| gauss()).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                dir.iter_mut().for_each(|v| *v *= scale / norm);
                points.extend((0..f).map(|_| GradientVector::new(dir.iter().map(|c| c + gauss()).collect())));
            }
        }

        if !(spread > 0.0) {
            skipped += 1;
            continue;
        }
        let agg_seed = seed.derive("aggregate", t as u64);
        let out = aggregate_detailed(spec, &points, f, &agg_seed)?.value;
        ratios.push(distance(&out, &honest_mean) / spread);
    }
    if ratios.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "all {trials} trials skipped: fewer than two distinct honest points"
        )));
    }
    let lambda_hat = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ResilienceReport {
        n,
        f,
        dim,
        trials,
        skipped,
        lambda_hat,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_without_byzantine_is_exact() {
        let r = estimate_resilience(&AggregatorSpec::Mean, 8, 0, 3, 50, Adversary::default(), &SeedSpec::new(1)).unwrap();
        assert_eq!(r.ratios.len(), 50);
        assert!(r.lambda_hat < 1e-15, "lambda_hat = {}", r.lambda_hat);
    }

    #[test]
    fn adversary_on_honest_mean_is_harmless_for_mean() {
        let r = estimate_resilience(&AggregatorSpec::Mean, 10, 3, 4, 20, Adversary::HonestMean, &SeedSpec::new(2)).unwrap();
        assert!(r.lambda_hat < 1e-15);
    }

    #[test]
    fn median_is_finite() {
        let r = estimate_resilience(&AggregatorSpec::Median, 10, 2, 1, 1000, Adversary::default(), &SeedSpec::new(3)).unwrap();
        assert!(r.lambda_hat.is_finite() && r.lambda_hat < 2.0);
        assert_eq!(r.ratios.len() + r.skipped, 1000);
    }

    #[test]
    fn mean_negative_control_blows_up() {
        let r = estimate_resilience(
            &AggregatorSpec::Mean,
            10,
            2,
            1,
            100,
            Adversary::Distant { scale: 1e6 },
            &SeedSpec::new(4),
        )
        .unwrap();
        assert!(r.ratios.iter().all(|&x| x > 1e3));
    }

    #[test]
    fn rejects_invalid_spec() {
        assert!(estimate_resilience(&AggregatorSpec::Bulyan, 6, 1, 2, 10, Adversary::default(), &SeedSpec::new(0)).is_err());
        assert!(estimate_resilience(&AggregatorSpec::Mean, 6, 1, 2, 0, Adversary::default(), &SeedSpec::new(0)).is_err());
    }
}
