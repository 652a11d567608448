use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::vector::GradientVector;

/// Direct generator of heterogeneous honest gradients, for exercising
/// aggregators without training.
///
/// Client `i` has a persistent mean `g* + κ·ξᵢ` (`ξᵢ` standard normal per
/// coordinate); each round it reports that mean plus `σ·N(0, I)` noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGradientModel {
    pub kappa: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticGradientSource {
    model: SyntheticGradientModel,
    global: Vec<f64>,
    client_means: Vec<Vec<f64>>,
    seed: SeedSpec,
}

fn normal_vec(dim: usize, seed: &SeedSpec) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

impl SyntheticGradientSource {
    pub fn new(model: SyntheticGradientModel, dim: usize, clients: usize, seed: &SeedSpec) -> Result<Self> {
        if !(model.kappa >= 0.0 && model.sigma >= 0.0) {
            return Err(Error::InvalidParameter("κ and σ must be nonnegative".into()));
        }
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        let global = normal_vec(dim, &seed.derive("global", 0));
        let client_means = (0..clients)
            .map(|i| {
                normal_vec(dim, &seed.derive("shift", i as u64))
                    .iter()
                    .zip(&global)
                    .map(|(xi, g)| g + model.kappa * xi)
                    .collect()
            })
            .collect();
        Ok(Self {
            model,
            global,
            client_means,
            seed: seed.clone(),
        })
    }

    pub fn global(&self) -> &[f64] {
        &self.global
    }

    pub fn client_mean(&self, client: usize) -> &[f64] {
        &self.client_means[client]
    }

    /// Gradients of `clients` at `round`.
    pub fn sample(&self, round: usize, clients: &[usize]) -> Vec<GradientVector> {
        clients
            .iter()
            .map(|&i| {
                let noise = normal_vec(
                    self.global.len(),
                    &self.seed.derive("round", round as u64).derive("client", i as u64),
                );
                GradientVector::new(
                    self.client_means[i]
                        .iter()
                        .zip(&noise)
                        .map(|(m, z)| m + self.model.sigma * z)
                        .collect(),
                )
            })
            .collect()
    }
}
