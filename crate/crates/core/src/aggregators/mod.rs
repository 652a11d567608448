//! Robust aggregation rules.
//!
//! Every rule is a pure function from `n` client gradients and a Byzantine
//! count `f` to one aggregate. Rules that select a subset of clients
//! (Multi-Krum, Bulyan, DnC) also report which clients they kept.

mod bucketing;
mod coordinate;
mod dnc;
mod geomed;
mod krum;
mod resilience;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::vector::{common_dim, ensure_finite, mean, GradientVector};

pub use bucketing::{bucket_assignment, bucketing_wrap};
pub use coordinate::{coordinate_median, coordinate_trimmed_mean};
pub use dnc::{dnc, dnc_detailed, top_right_singular_vector, POWER_ITERATIONS};
pub use geomed::{geometric_median, DEFAULT_SMOOTHING};
pub use krum::{bulyan, bulyan_detailed, krum_scores, multi_krum, multi_krum_detailed};
pub use resilience::{estimate_resilience, Adversary, ResilienceReport};

pub const DEFAULT_RFA_ITERS: usize = 3;
pub const DEFAULT_DNC_C: f64 = 4.0;
pub const DEFAULT_DNC_NITERS: usize = 1;
pub const DEFAULT_DNC_B: usize = 10_000;

fn default_rfa_iters() -> usize {
    DEFAULT_RFA_ITERS
}
fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}
fn default_dnc_c() -> f64 {
    DEFAULT_DNC_C
}
fn default_dnc_niters() -> usize {
    DEFAULT_DNC_NITERS
}
fn default_dnc_b() -> usize {
    DEFAULT_DNC_B
}

/// Selects an aggregation rule and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AggregatorSpec {
    Mean,
    Median,
    TrimmedMean,
    MultiKrum,
    Bulyan,
    /// Smoothed Weiszfeld (RFA).
    GeometricMedian {
        #[serde(default = "default_rfa_iters")]
        iters: usize,
        #[serde(default = "default_smoothing")]
        eps: f64,
    },
    /// Divide-and-conquer spectral filtering.
    Dnc {
        #[serde(default = "default_dnc_c")]
        c: f64,
        #[serde(default = "default_dnc_niters")]
        niters: usize,
        #[serde(default = "default_dnc_b")]
        b: usize,
    },
}

impl AggregatorSpec {
    pub fn geometric_median() -> Self {
        AggregatorSpec::GeometricMedian {
            iters: DEFAULT_RFA_ITERS,
            eps: DEFAULT_SMOOTHING,
        }
    }

    pub fn dnc() -> Self {
        AggregatorSpec::Dnc {
            c: DEFAULT_DNC_C,
            niters: DEFAULT_DNC_NITERS,
            b: DEFAULT_DNC_B,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AggregatorSpec::Mean => "Mean",
            AggregatorSpec::Median => "Median",
            AggregatorSpec::TrimmedMean => "TrimmedMean",
            AggregatorSpec::MultiKrum => "MultiKrum",
            AggregatorSpec::Bulyan => "Bulyan",
            AggregatorSpec::GeometricMedian { .. } => "GeometricMedian",
            AggregatorSpec::Dnc { .. } => "DnC",
        }
    }

    /// Whether the rule reports an explicit subset of participating clients.
    pub fn selects_clients(&self) -> bool {
        matches!(
            self,
            AggregatorSpec::MultiKrum | AggregatorSpec::Bulyan | AggregatorSpec::Dnc { .. }
        )
    }

    /// Checks the rule's preconditions for `n` inputs with `f` Byzantine.
    pub fn validate(&self, n: usize, f: usize) -> Result<()> {
        let rule = self.name();
        if n == 0 {
            return Err(Error::precondition(rule, "at least one gradient"));
        }
        if 2 * f >= n {
            return Err(Error::precondition(rule, format!("f < n/2 (n={n}, f={f})")));
        }
        match *self {
            AggregatorSpec::Mean | AggregatorSpec::Median | AggregatorSpec::TrimmedMean => {}
            AggregatorSpec::MultiKrum => {
                if n < f + 3 {
                    return Err(Error::precondition(rule, format!("n ≥ f+3 (n={n}, f={f})")));
                }
            }
            AggregatorSpec::Bulyan => {
                if n < 4 * f + 3 {
                    return Err(Error::precondition(rule, format!("n ≥ 4f+3 (n={n}, f={f})")));
                }
            }
            AggregatorSpec::GeometricMedian { iters, eps } => {
                if iters == 0 {
                    return Err(Error::precondition(rule, "iters ≥ 1"));
                }
                if !(eps > 0.0) {
                    return Err(Error::precondition(rule, "smoothing eps > 0"));
                }
            }
            AggregatorSpec::Dnc { c, niters, b } => {
                if !(c > 0.0) || !c.is_finite() {
                    return Err(Error::precondition(rule, "c > 0"));
                }
                if niters == 0 || b == 0 {
                    return Err(Error::precondition(rule, "niters ≥ 1 and b ≥ 1"));
                }
                let removed = dnc::removal_count(c, f);
                if n <= removed {
                    return Err(Error::precondition(
                        rule,
                        format!("n > ⌊c·f⌋ (n={n}, ⌊c·f⌋={removed})"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// An aggregate together with the clients the rule kept, if it selects.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub value: GradientVector,
    /// Ascending client indices; `None` for rules that use every input.
    pub selected: Option<Vec<usize>>,
}

impl Aggregate {
    fn all(value: GradientVector) -> Self {
        Self {
            value,
            selected: None,
        }
    }
}

/// Applies `spec` with the default seed. Only DnC consumes randomness.
pub fn aggregate(spec: &AggregatorSpec, gradients: &[GradientVector], f: usize) -> Result<GradientVector> {
    aggregate_seeded(spec, gradients, f, &SeedSpec::default())
}

pub fn aggregate_seeded(
    spec: &AggregatorSpec,
    gradients: &[GradientVector],
    f: usize,
    seed: &SeedSpec,
) -> Result<GradientVector> {
    aggregate_detailed(spec, gradients, f, seed).map(|a| a.value)
}

pub fn aggregate_detailed(
    spec: &AggregatorSpec,
    gradients: &[GradientVector],
    f: usize,
    seed: &SeedSpec,
) -> Result<Aggregate> {
    spec.validate(gradients.len(), f)?;
    common_dim(gradients)?;
    ensure_finite(gradients)?;
    match *spec {
        AggregatorSpec::Mean => mean(gradients).map(Aggregate::all),
        AggregatorSpec::Median => coordinate_median(gradients).map(Aggregate::all),
        AggregatorSpec::TrimmedMean => coordinate_trimmed_mean(gradients, f).map(Aggregate::all),
        AggregatorSpec::MultiKrum => multi_krum_detailed(gradients, f),
        AggregatorSpec::Bulyan => bulyan_detailed(gradients, f),
        AggregatorSpec::GeometricMedian { iters, eps } => {
            geometric_median(gradients, iters, eps).map(Aggregate::all)
        }
        AggregatorSpec::Dnc { c, niters, b } => dnc_detailed(gradients, f, c, niters, b, seed),
    }
}

/// Sorts the values in place by `total_cmp`; panics never, NaN sorts last.
pub(crate) fn sort_floats(values: &mut [f64]) {
    values.sort_unstable_by(f64::total_cmp);
}

/// Indices of the `k` smallest `scores`, ties to the lower index, returned
/// ascending.
pub(crate) fn lowest_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gvs(rows: &[&[f64]]) -> Vec<GradientVector> {
        rows.iter().map(|r| GradientVector::new(r.to_vec())).collect()
    }

    #[test]
    fn dispatch_examples() {
        let out = aggregate(&AggregatorSpec::Mean, &gvs(&[&[1.0], &[3.0]]), 0).unwrap();
        assert_eq!(out.as_slice(), &[2.0]);
        let out = aggregate(&AggregatorSpec::Median, &gvs(&[&[1.0], &[2.0], &[9.0]]), 1).unwrap();
        assert_eq!(out.as_slice(), &[2.0]);
    }

    #[test]
    fn bulyan_constraint_message() {
        let g: Vec<_> = (0..6).map(|i| GradientVector::new(vec![i as f64])).collect();
        let err = aggregate(&AggregatorSpec::Bulyan, &g, 1).unwrap_err();
        assert!(err.to_string().starts_with("Bulyan requires n ≥ 4f+3"), "{err}");
    }

    #[test]
    fn shared_preconditions() {
        let g = gvs(&[&[1.0], &[2.0]]);
        assert!(matches!(
            aggregate(&AggregatorSpec::Median, &g, 1),
            Err(Error::Precondition { rule: "Median", .. })
        ));
        assert!(aggregate(&AggregatorSpec::Mean, &[], 0).is_err());
        assert!(matches!(
            aggregate(&AggregatorSpec::Mean, &gvs(&[&[1.0], &[2.0, 3.0]]), 0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            aggregate(&AggregatorSpec::Median, &gvs(&[&[1.0], &[f64::NAN], &[0.0]]), 0),
            Err(Error::NonFinite { input: 1, coordinate: 0 })
        ));
        let g = gvs(&[&[1.0], &[2.0], &[3.0]]);
        assert!(aggregate(&AggregatorSpec::MultiKrum, &g, 1).is_err());
        assert!(aggregate(&AggregatorSpec::MultiKrum, &g, 0).is_ok());
    }

    #[test]
    fn hyperparameter_defaults_and_parsing() {
        assert_eq!(
            AggregatorSpec::geometric_median(),
            AggregatorSpec::GeometricMedian { iters: 3, eps: 1e-8 }
        );
        assert_eq!(
            AggregatorSpec::dnc(),
            AggregatorSpec::Dnc { c: 4.0, niters: 1, b: 10_000 }
        );
        #[derive(Deserialize)]
        struct Wrap {
            agr: AggregatorSpec,
        }
        let w: Wrap = toml::from_str("agr = { kind = \"dnc\" }").unwrap();
        assert_eq!(w.agr, AggregatorSpec::dnc());
        let w: Wrap = toml::from_str("agr = { kind = \"geometric_median\", iters = 7 }").unwrap();
        assert_eq!(w.agr, AggregatorSpec::GeometricMedian { iters: 7, eps: 1e-8 });
        assert!(toml::from_str::<Wrap>("agr = { kind = \"krum\" }").is_err());
    }

    #[test]
    fn lowest_k_breaks_ties_by_index() {
        assert_eq!(lowest_k(&[3.0, 1.0, 2.0], 2), vec![1, 2]);
        assert_eq!(lowest_k(&[1.0, 1.0, 5.0], 1), vec![0]);
        assert_eq!(lowest_k(&[4.0, 1.0, 5.0], 3), vec![0, 1, 2]);
    }
}
