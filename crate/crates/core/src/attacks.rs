//! Omniscient model-poisoning attacks.
//!
//! The attacker sees every honest gradient of the round. Statistics-based
//! attacks (LIE, Min-Max, Min-Sum, IPM) make all Byzantine clients send the
//! same vector; BitFlip negates each client's own gradient. LabelFlip is data
//! poisoning applied during local training, so its gradients pass through
//! unchanged here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::vector::{distance, mean, squared_distance, GradientVector};

pub const DEFAULT_LIE_Z: f64 = 1.5;
pub const DEFAULT_GAMMA_INIT: f64 = 10.0;
pub const DEFAULT_TAU: f64 = 1e-5;
pub const DEFAULT_IPM_EPS: f64 = 0.5;

fn default_z() -> f64 {
    DEFAULT_LIE_Z
}
fn default_gamma_init() -> f64 {
    DEFAULT_GAMMA_INIT
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_ipm_eps() -> f64 {
    DEFAULT_IPM_EPS
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    #[default]
    NoAttack,
    BitFlip,
    LabelFlip,
    Lie {
        #[serde(default = "default_z")]
        z: f64,
    },
    MinMax {
        #[serde(default = "default_gamma_init")]
        gamma_init: f64,
        #[serde(default = "default_tau")]
        tau: f64,
    },
    MinSum {
        #[serde(default = "default_gamma_init")]
        gamma_init: f64,
        #[serde(default = "default_tau")]
        tau: f64,
    },
    Ipm {
        #[serde(default = "default_ipm_eps")]
        eps: f64,
    },
}

impl AttackSpec {
    pub fn lie() -> Self {
        AttackSpec::Lie { z: DEFAULT_LIE_Z }
    }

    pub fn min_max() -> Self {
        AttackSpec::MinMax {
            gamma_init: DEFAULT_GAMMA_INIT,
            tau: DEFAULT_TAU,
        }
    }

    pub fn min_sum() -> Self {
        AttackSpec::MinSum {
            gamma_init: DEFAULT_GAMMA_INIT,
            tau: DEFAULT_TAU,
        }
    }

    pub fn ipm() -> Self {
        AttackSpec::Ipm { eps: DEFAULT_IPM_EPS }
    }

    /// Whether Byzantine clients need their own honestly trained gradient.
    pub fn needs_true_gradients(&self) -> bool {
        matches!(self, AttackSpec::NoAttack | AttackSpec::BitFlip | AttackSpec::LabelFlip)
    }

    pub fn flips_labels(&self) -> bool {
        matches!(self, AttackSpec::LabelFlip)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = match *self {
            AttackSpec::Lie { z } => !z.is_finite(),
            AttackSpec::MinMax { gamma_init, tau } | AttackSpec::MinSum { gamma_init, tau } => {
                !(gamma_init > 0.0 && gamma_init.is_finite() && tau > 0.0)
            }
            AttackSpec::Ipm { eps } => !eps.is_finite(),
            _ => false,
        };
        if bad {
            Err(Error::InvalidParameter(format!("attack hyperparameters out of range: {self:?}")))
        } else {
            Ok(())
        }
    }
}

/// The attacker's view of one round.
#[derive(Debug, Clone, Copy)]
pub struct AttackContext<'a> {
    pub honest_gradients: &'a [GradientVector],
    pub byz_count: usize,
    /// What each Byzantine client would have sent honestly (only read by
    /// NoAttack, BitFlip and LabelFlip).
    pub byz_true_gradients: &'a [GradientVector],
}

/// Produces the `f` Byzantine vectors for this round.
///
/// Every implemented attack is deterministic; `seed` is accepted so that
/// randomized attacks fit the same contract.
pub fn craft(spec: &AttackSpec, ctx: &AttackContext<'_>, _seed: &SeedSpec) -> Result<Vec<GradientVector>> {
    let f = ctx.byz_count;
    if f == 0 {
        return Ok(Vec::new());
    }
    let own = || -> Result<&[GradientVector]> {
        if ctx.byz_true_gradients.len() != f {
            return Err(Error::InvalidParameter(format!(
                "{f} Byzantine clients but {} true gradients",
                ctx.byz_true_gradients.len()
            )));
        }
        Ok(ctx.byz_true_gradients)
    };
    let colluding = |v: GradientVector| vec![v; f];
    Ok(match *spec {
        AttackSpec::NoAttack | AttackSpec::LabelFlip => own()?.to_vec(),
        AttackSpec::BitFlip => own()?.iter().map(|g| g.scaled(-1.0)).collect(),
        AttackSpec::Lie { z } => colluding(lie(ctx.honest_gradients, z)?),
        AttackSpec::MinMax { gamma_init, tau } => colluding(min_max(ctx.honest_gradients, gamma_init, tau)?),
        AttackSpec::MinSum { gamma_init, tau } => colluding(min_sum(ctx.honest_gradients, gamma_init, tau)?),
        AttackSpec::Ipm { eps } => colluding(ipm(ctx.honest_gradients, eps)?),
    })
}

/// Coordinate mean and population standard deviation (divisor `n`).
fn mean_and_std(honest: &[GradientVector]) -> Result<(GradientVector, Vec<f64>)> {
    if honest.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "attack needs at least 2 honest gradients, got {}",
            honest.len()
        )));
    }
    let mu = mean(honest)?;
    let n = honest.len() as f64;
    let mut var = vec![0.0; mu.dim()];
    for g in honest {
        for ((v, x), m) in var.iter_mut().zip(g.iter()).zip(mu.iter()) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
    Ok((mu, std))
}

/// A little is enough: `μ + z·σ`.
pub fn lie(honest: &[GradientVector], z: f64) -> Result<GradientVector> {
    let (mu, std) = mean_and_std(honest)?;
    Ok(GradientVector::new(mu.iter().zip(&std).map(|(m, s)| m + z * s).collect()))
}

/// Inner product manipulation: `−ε·μ`.
pub fn ipm(honest: &[GradientVector], eps: f64) -> Result<GradientVector> {
    if honest.is_empty() {
        return Err(Error::EmptyInput("IPM needs honest gradients"));
    }
    Ok(mean(honest)?.scaled(-eps))
}

/// Largest `γ` (to within `τ`) for which `μ − γ·σ` passes `accept`, by the
/// halving search: step up by half the last step on success, down on failure.
fn search_gamma(
    mu: &GradientVector,
    std: &[f64],
    gamma_init: f64,
    tau: f64,
    accept: impl Fn(&GradientVector) -> bool,
) -> GradientVector {
    let candidate = |gamma: f64| GradientVector::new(mu.iter().zip(std).map(|(m, s)| m - gamma * s).collect());
    let mut gamma = gamma_init;
    let mut step = gamma_init;
    let mut best = 0.0;
    while (best - gamma).abs() > tau {
        if accept(&candidate(gamma)) {
            best = gamma;
            gamma += step / 2.0;
        } else {
            gamma -= step / 2.0;
        }
        step /= 2.0;
    }
    candidate(best)
}

/// Min-Max: push `μ` against the standard deviation as far as possible while
/// the crafted vector stays no farther from any honest gradient than the
/// largest honest pairwise distance.
pub fn min_max(honest: &[GradientVector], gamma_init: f64, tau: f64) -> Result<GradientVector> {
    let (mu, std) = mean_and_std(honest)?;
    if std.iter().all(|&s| s == 0.0) {
        return Ok(mu);
    }
    let mut bound: f64 = 0.0;
    for (i, a) in honest.iter().enumerate() {
        for b in &honest[i + 1..] {
            bound = bound.max(distance(a, b));
        }
    }
    Ok(search_gamma(&mu, &std, gamma_init, tau, |c| {
        honest.iter().all(|g| distance(c, g) <= bound)
    }))
}

/// Min-Sum: as Min-Max, but bounds the sum of squared distances to the honest
/// gradients by the largest such sum of any honest gradient.
pub fn min_sum(honest: &[GradientVector], gamma_init: f64, tau: f64) -> Result<GradientVector> {
    let (mu, std) = mean_and_std(honest)?;
    if std.iter().all(|&s| s == 0.0) {
        return Ok(mu);
    }
    let sum_sq = |c: &GradientVector| honest.iter().map(|g| squared_distance(c, g)).sum::<f64>();
    let bound = honest.iter().map(sum_sq).fold(0.0, f64::max);
    Ok(search_gamma(&mu, &std, gamma_init, tau, |c| sum_sq(c) <= bound))
}
