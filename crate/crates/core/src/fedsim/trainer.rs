use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::SyntheticDataset;
use super::model::Network;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::vector::{l2_norm, GradientVector};

/// Client-side SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Per-minibatch gradient clipping; `None` disables it.
    pub clip_norm: Option<f64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            local_epochs: 1,
            batch_size: 64,
            learning_rate: 0.1,
            momentum: 0.5,
            weight_decay: 1e-4,
            clip_norm: Some(2.0),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: &str| Err(Error::InvalidParameter(format!("trainer.{name}: {msg}")));
        if self.local_epochs == 0 {
            return field("local_epochs", "must be at least 1");
        }
        if self.batch_size == 0 {
            return field("batch_size", "must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return field("learning_rate", "must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return field("momentum", "must be in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return field("weight_decay", "must be finite and nonnegative");
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return field("clip_norm", "must be positive when enabled");
            }
        }
        Ok(())
    }
}

/// Runs local minibatch SGD from `w_start` on the client's shard and returns
/// the local gradient `w_start − w_end`.
///
/// Each minibatch gradient is clipped to `clip_norm` before weight decay and
/// momentum (heavy-ball, `v ← μv + g`, `w ← w − ηv`) are applied.
pub fn local_train(
    net: &Network,
    w_start: &[f64],
    data: &SyntheticDataset,
    shard: &[usize],
    cfg: &TrainerConfig,
    flip_labels: bool,
    seed: &SeedSpec,
) -> Result<GradientVector> {
    if shard.is_empty() {
        return Err(Error::EmptyInput("client shard"));
    }
    let d = net.dim();
    let mut w = w_start.to_vec();
    let mut velocity = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut order = shard.to_vec();

    for epoch in 0..cfg.local_epochs {
        order.shuffle(&mut seed.derive("epoch", epoch as u64).rng());
        for batch in order.chunks(cfg.batch_size) {
            net.loss_and_grad(&w, data, batch, flip_labels, &mut grad);
            if let Some(clip) = cfg.clip_norm {
                let norm = l2_norm(&grad);
                if norm > clip {
                    let s = clip / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            if cfg.weight_decay > 0.0 {
                for (g, wk) in grad.iter_mut().zip(&w) {
                    *g += cfg.weight_decay * wk;
                }
            }
            for ((wk, v), g) in w.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *wk -= cfg.learning_rate * *v;
            }
        }
    }
    Ok(GradientVector::new(w_start.iter().zip(&w).map(|(a, b)| a - b).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedsim::data::{generate_synthetic, DatasetParams};
    use crate::fedsim::model::Architecture;

    fn setup() -> (Network, SyntheticDataset) {
        let params = DatasetParams {
            classes: 3,
            features: 4,
            per_class: 10,
            test_per_class: 1,
            r_sep: 3.0,
            sigma_x: 1.0,
        };
        let (train, _) = generate_synthetic(&params, &SeedSpec::new(5)).unwrap();
        (Network::new(Architecture::Softmax, 3, 4), train)
    }

    #[test]
    fn zero_learning_rate_gives_zero_gradient() {
        let (net, data) = setup();
        let cfg = TrainerConfig {
            learning_rate: 0.0,
            ..TrainerConfig::default()
        };
        let w = vec![0.3; net.dim()];
        let g = local_train(&net, &w, &data, &[0, 3, 7, 9], &cfg, false, &SeedSpec::new(1)).unwrap();
        assert_eq!(g, GradientVector::zeros(net.dim()));
    }

    #[test]
    fn full_batch_step_is_scaled_gradient() {
        let (net, data) = setup();
        let cfg = TrainerConfig {
            local_epochs: 1,
            batch_size: 1000,
            learning_rate: 0.05,
            momentum: 0.0,
            weight_decay: 0.0,
            clip_norm: None,
        };
        let shard: Vec<usize> = (0..data.len()).collect();
        let w: Vec<f64> = (0..net.dim()).map(|k| (k as f64 * 0.37).sin() * 0.2).collect();
        let g = local_train(&net, &w, &data, &shard, &cfg, false, &SeedSpec::new(2)).unwrap();
        let mut grad = vec![0.0; net.dim()];
        net.loss_and_grad(&w, &data, &shard, false, &mut grad);
        for (a, b) in g.iter().zip(&grad) {
            assert!((a - 0.05 * b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn clipping_bounds_a_single_step() {
        let (net, data) = setup();
        let cfg = TrainerConfig {
            local_epochs: 1,
            batch_size: 1000,
            learning_rate: 1.0,
            momentum: 0.0,
            weight_decay: 0.0,
            clip_norm: Some(0.01),
        };
        let shard: Vec<usize> = (0..data.len()).collect();
        let g = local_train(&net, &vec![0.0; net.dim()], &data, &shard, &cfg, false, &SeedSpec::new(2)).unwrap();
        assert!((g.norm() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn label_flip_changes_the_update() {
        let (net, data) = setup();
        let cfg = TrainerConfig::default();
        let shard: Vec<usize> = (0..data.len()).collect();
        let w = vec![0.0; net.dim()];
        let honest = local_train(&net, &w, &data, &shard, &cfg, false, &SeedSpec::new(3)).unwrap();
        let flipped = local_train(&net, &w, &data, &shard, &cfg, true, &SeedSpec::new(3)).unwrap();
        assert_ne!(honest, flipped);
    }

    #[test]
    fn validation() {
        assert!(TrainerConfig::default().validate().is_ok());
        let bad = TrainerConfig {
            clip_norm: Some(0.0),
            ..TrainerConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("clip_norm"));
        assert!(local_train(
            &setup().0,
            &[0.0; 15],
            &setup().1,
            &[],
            &TrainerConfig::default(),
            false,
            &SeedSpec::new(0)
        )
        .is_err());
    }
}
