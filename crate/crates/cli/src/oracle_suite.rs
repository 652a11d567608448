//! Brute-force cross-checks runnable outside the test harness.

use gas_core::aggregators::{
    bulyan_detailed, coordinate_median, coordinate_trimmed_mean, dnc_detailed, geometric_median,
    multi_krum_detailed,
};
use gas_core::gas::{gas_aggregate, GasConfig, PartitionPolicy, Selection};
use gas_core::{mean, AggregatorSpec, GradientVector, SeedSpec};
use gas_oracle as oracle;
use rand::Rng;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Suite {
    Median,
    TrimmedMean,
    Krum,
    Bulyan,
    Weiszfeld,
    Dnc,
    Gas,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Median => "median",
            Suite::TrimmedMean => "trimmed_mean",
            Suite::Krum => "krum",
            Suite::Bulyan => "bulyan",
            Suite::Weiszfeld => "weiszfeld",
            Suite::Dnc => "dnc",
            Suite::Gas => "gas",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Suite::Weiszfeld => 1e-9,
            _ => 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub instances: usize,
    pub skipped: usize,
    pub max_discrepancy: f64,
    /// `(instance index, discrepancy)` of the first instance over tolerance.
    pub failure: Option<(u64, f64)>,
}

struct Instance {
    points: Vec<Vec<f64>>,
    f: usize,
}

fn instance(seed: &SeedSpec, min_n: impl Fn(usize) -> usize, ties: bool) -> Instance {
    let mut rng = seed.rng();
    let d = rng.random_range(1..=5);
    let (n, f) = loop {
        let n = rng.random_range(1..=11);
        let f = rng.random_range(0..=n / 2);
        if min_n(f) <= n {
            break (n, f);
        }
    };
    let coarse = ties && rng.random_bool(0.3);
    let points = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if coarse {
                        rng.random_range(-2..=2) as f64
                    } else {
                        rng.random_range(-10.0..10.0)
                    }
                })
                .collect()
        })
        .collect();
    Instance { points, f }
}

fn grads(points: &[Vec<f64>]) -> Vec<GradientVector> {
    points.iter().cloned().map(GradientVector::new).collect()
}

fn runtime(e: gas_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Power iteration (50 steps) only pins down the top direction when it
/// dominates; near-ties at the removal boundary are likewise undecidable.
fn dnc_well_posed(points: &[Vec<f64>], removed: usize) -> bool {
    let d = points[0].len();
    let mu = oracle::mean(points);
    let mut cov = vec![vec![0.0; d]; d];
    for p in points {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (p[i] - mu[i]) * (p[j] - mu[j]);
            }
        }
    }
    let (values, _) = oracle::symmetric_eigen(&cov);
    if values[1] > 0.7 * values[0] {
        return false;
    }
    let mut scores = oracle::spectral_scores(points, &(0..d).collect::<Vec<_>>());
    scores.sort_by(|a, b| b.total_cmp(a));
    removed == 0 || (scores[removed - 1] - scores[removed]).abs() > 1e-6 * scores[0]
}

/// Discrepancy for one instance, or `None` when the instance is skipped.
/// A set mismatch counts as infinite discrepancy.
fn check(suite: Suite, seed: &SeedSpec, fault: f64) -> CliResult<Option<f64>> {
    let perturb = |mut v: Vec<f64>| {
        v[0] += fault;
        v
    };
    let diff = |got: Vec<f64>, want: &[f64]| oracle::max_abs_diff(&perturb(got), want);
    let set_gap = |same: bool| if same { 0.0 } else { f64::INFINITY };
    Ok(Some(match suite {
        Suite::Median => {
            let inst = instance(seed, |_| 1, true);
            let got = coordinate_median(&grads(&inst.points)).map_err(runtime)?;
            diff(got.into_inner(), &oracle::coordinate_median(&inst.points))
        }
        Suite::TrimmedMean => {
            let inst = instance(seed, |f| 2 * f + 1, true);
            let got = coordinate_trimmed_mean(&grads(&inst.points), inst.f).map_err(runtime)?;
            diff(got.into_inner(), &oracle::trimmed_mean(&inst.points, inst.f))
        }
        Suite::Krum => {
            let inst = instance(seed, |f| f + 3, true);
            let got = multi_krum_detailed(&grads(&inst.points), inst.f).map_err(runtime)?;
            let (chosen, want) = oracle::multi_krum(&inst.points, inst.f);
            diff(got.value.into_inner(), &want).max(set_gap(got.selected.as_deref() == Some(&chosen[..])))
        }
        Suite::Bulyan => {
            let inst = instance(seed, |f| 4 * f + 3, true);
            let got = bulyan_detailed(&grads(&inst.points), inst.f).map_err(runtime)?;
            let (picked, want) = oracle::bulyan(&inst.points, inst.f);
            let mut sorted = picked;
            sorted.sort_unstable();
            diff(got.value.into_inner(), &want).max(set_gap(got.selected.as_deref() == Some(&sorted[..])))
        }
        Suite::Weiszfeld => {
            let inst = instance(seed, |_| 1, true);
            let got = geometric_median(&grads(&inst.points), 3, 1e-8).map_err(runtime)?;
            diff(got.into_inner(), &oracle::weiszfeld(&inst.points, 3, 1e-8))
        }
        Suite::Dnc => {
            let mut rng = seed.rng();
            let n = rng.random_range(4..=11);
            let d = rng.random_range(2..=5);
            let f = rng.random_range(0..=(n - 1) / 4);
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect())
                .collect();
            if !dnc_well_posed(&points, 2 * f) {
                return Ok(None);
            }
            let got = dnc_detailed(&grads(&points), f, 2.0, 1, 10_000, &seed.derive("dnc", 0)).map_err(runtime)?;
            let (kept, want) = oracle::dnc_full(&points, f, 2.0);
            diff(got.value.into_inner(), &want).max(set_gap(got.selected.as_deref() == Some(&kept[..])))
        }
        Suite::Gas => {
            let inst = instance(seed, |f| (2 * f + 1).max(2), true);
            let g = grads(&inst.points);
            let n = g.len();
            // p = 1 scores whole vectors against the plain median
            let one = GasConfig {
                p: 1,
                base: AggregatorSpec::Median,
                selection: Selection::KnownF { f: inst.f },
                partition_policy: PartitionPolicy::PerRound,
                seed: seed.derive("gas", 0),
            };
            let out = gas_aggregate(&one, &g, 0).map_err(runtime)?;
            let med = oracle::coordinate_median(&inst.points);
            let whole: Vec<f64> = inst
                .points
                .iter()
                .map(|p| p.iter().zip(&med).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .collect();
            let mut worst = diff(out.scores.totals.clone(), &whole);
            // f = 0 keeps everyone
            let zero = GasConfig {
                selection: Selection::KnownF { f: 0 },
                p: 1 + n % inst.points[0].len(),
                ..one.clone()
            };
            let all = gas_aggregate(&zero, &g, 1).map_err(runtime)?;
            worst = worst.max(diff(all.aggregate.into_inner(), &mean(&g).map_err(runtime)?));
            // arbitrary p against the explicit-partition reference
            let many = GasConfig {
                p: 1 + (n * 7) % inst.points[0].len(),
                ..one
            };
            let out = gas_aggregate(&many, &g, 2).map_err(runtime)?;
            let (totals, chosen, want) = oracle::gas_with_median(&inst.points, out.partition.subsets(), n - inst.f);
            worst
                .max(diff(out.aggregate.into_inner(), &want))
                .max(oracle::max_abs_diff(&out.scores.totals, &totals))
                .max(set_gap(out.selection.selected == chosen))
        }
    }))
}

/// Runs `instances` random cross-checks of `suite`. With `inject_fault`, the
/// production output is perturbed by `1e-6` before comparison, which must
/// make the suite fail.
pub fn run_suite(suite: Suite, seed: u64, instances: usize, inject_fault: bool) -> CliResult<SuiteReport> {
    let master = SeedSpec::new(seed).derive(suite.name(), 0);
    let fault = if inject_fault { 1e-6 } else { 0.0 };
    let mut report = SuiteReport {
        suite,
        instances,
        skipped: 0,
        max_discrepancy: 0.0,
        failure: None,
    };
    for t in 0..instances as u64 {
        match check(suite, &master.derive("instance", t), fault)? {
            None => report.skipped += 1,
            Some(gap) => {
                report.max_discrepancy = report.max_discrepancy.max(gap);
                if !(gap <= suite.tolerance()) && report.failure.is_none() {
                    report.failure = Some((t, gap));
                }
            }
        }
    }
    Ok(report)
}
