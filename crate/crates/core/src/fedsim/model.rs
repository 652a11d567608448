//! Small differentiable classifiers over a flat parameter vector.
//!
//! Softmax layout: `W (C×m)` row-major, then `b (C)`, so `d = C·m + C`.
//! One-hidden-layer layout: `W₁ (h×m)`, `b₁ (h)`, `W₂ (C×h)`, `b₂ (C)` with a
//! tanh hidden activation.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::SyntheticDataset;
use crate::seed::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    #[default]
    Softmax,
    Mlp { hidden: usize },
}

/// Shape of a classifier; parameters live outside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Network {
    pub arch: Architecture,
    pub classes: usize,
    pub features: usize,
}

/// A network together with its current parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: Network,
    pub params: Vec<f64>,
}

impl Model {
    /// Softmax starts at zero; the hidden layer of an MLP gets a seeded
    /// `N(0, 1/fan_in)` draw so its units are not symmetric.
    pub fn init(net: Network, seed: &SeedSpec) -> Self {
        let mut params = vec![0.0; net.dim()];
        if let Architecture::Mlp { hidden } = net.arch {
            let mut rng = seed.rng();
            let (m, c) = (net.features, net.classes);
            let w1_scale = 1.0 / (m as f64).sqrt();
            for w in &mut params[..hidden * m] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = z * w1_scale;
            }
            let w2_start = hidden * m + hidden;
            let w2_scale = 1.0 / (hidden as f64).sqrt();
            for w in &mut params[w2_start..w2_start + c * hidden] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = z * w2_scale;
            }
        }
        Self { net, params }
    }

    pub fn accuracy(&self, data: &SyntheticDataset) -> f64 {
        self.net.accuracy(&self.params, data)
    }
}

/// The label a Byzantine client trains on under label flipping.
pub fn flip_label(y: usize, classes: usize) -> usize {
    classes - 1 - y
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    logits.iter_mut().for_each(|v| *v /= sum);
}

impl Network {
    pub fn new(arch: Architecture, classes: usize, features: usize) -> Self {
        Self {
            arch,
            classes,
            features,
        }
    }

    pub fn dim(&self) -> usize {
        let (c, m) = (self.classes, self.features);
        match self.arch {
            Architecture::Softmax => c * m + c,
            Architecture::Mlp { hidden } => hidden * m + hidden + c * hidden + c,
        }
    }

    /// Class logits for one input; `hidden` is scratch of length `h` (unused
    /// for softmax) and receives the hidden activations.
    fn logits(&self, w: &[f64], x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let (c, m) = (self.classes, self.features);
        match self.arch {
            Architecture::Softmax => {
                let (weights, bias) = w.split_at(c * m);
                for k in 0..c {
                    let row = &weights[k * m..(k + 1) * m];
                    out[k] = bias[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            Architecture::Mlp { hidden: h } => {
                let (w1, rest) = w.split_at(h * m);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(c * h);
                for j in 0..h {
                    let row = &w1[j * m..(j + 1) * m];
                    hidden[j] = (b1[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).tanh();
                }
                for k in 0..c {
                    let row = &w2[k * h..(k + 1) * h];
                    out[k] = b2[k] + row.iter().zip(hidden.iter()).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }

    fn hidden_width(&self) -> usize {
        match self.arch {
            Architecture::Softmax => 0,
            Architecture::Mlp { hidden } => hidden,
        }
    }

    /// Mean cross-entropy over `indices`. With `flip_labels`, every label `y`
    /// is replaced by `C−1−y`.
    pub fn loss(&self, w: &[f64], data: &SyntheticDataset, indices: &[usize], flip_labels: bool) -> f64 {
        let mut hidden = vec![0.0; self.hidden_width()];
        let mut probs = vec![0.0; self.classes];
        let mut total = 0.0;
        for &i in indices {
            self.logits(w, data.sample(i), &mut hidden, &mut probs);
            softmax_in_place(&mut probs);
            let y = self.target(data.label(i), flip_labels);
            total -= probs[y].max(f64::MIN_POSITIVE).ln();
        }
        total / indices.len() as f64
    }

    fn target(&self, y: usize, flip: bool) -> usize {
        if flip {
            flip_label(y, self.classes)
        } else {
            y
        }
    }

    /// Mean cross-entropy over `indices` and its gradient, written into
    /// `grad` (overwritten).
    pub fn loss_and_grad(
        &self,
        w: &[f64],
        data: &SyntheticDataset,
        indices: &[usize],
        flip_labels: bool,
        grad: &mut [f64],
    ) -> f64 {
        debug_assert_eq!(grad.len(), self.dim());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (c, m) = (self.classes, self.features);
        let h = self.hidden_width();
        let mut hidden = vec![0.0; h];
        let mut probs = vec![0.0; c];
        let mut dhidden = vec![0.0; h];
        let mut total = 0.0;

        for &i in indices {
            let x = data.sample(i);
            self.logits(w, x, &mut hidden, &mut probs);
            softmax_in_place(&mut probs);
            let y = self.target(data.label(i), flip_labels);
            total -= probs[y].max(f64::MIN_POSITIVE).ln();
            // probs becomes dL/dlogits
            probs[y] -= 1.0;

            match self.arch {
                Architecture::Softmax => {
                    let (gw, gb) = grad.split_at_mut(c * m);
                    for k in 0..c {
                        let dk = probs[k];
                        for (g, xv) in gw[k * m..(k + 1) * m].iter_mut().zip(x) {
                            *g += dk * xv;
                        }
                        gb[k] += dk;
                    }
                }
                Architecture::Mlp { .. } => {
                    let w2 = &w[h * m + h..h * m + h + c * h];
                    let (gw1, rest) = grad.split_at_mut(h * m);
                    let (gb1, rest) = rest.split_at_mut(h);
                    let (gw2, gb2) = rest.split_at_mut(c * h);
                    dhidden.iter_mut().for_each(|v| *v = 0.0);
                    for k in 0..c {
                        let dk = probs[k];
                        for j in 0..h {
                            gw2[k * h + j] += dk * hidden[j];
                            dhidden[j] += dk * w2[k * h + j];
                        }
                        gb2[k] += dk;
                    }
                    for j in 0..h {
                        let dz = dhidden[j] * (1.0 - hidden[j] * hidden[j]);
                        for (g, xv) in gw1[j * m..(j + 1) * m].iter_mut().zip(x) {
                            *g += dz * xv;
                        }
                        gb1[j] += dz;
                    }
                }
            }
        }
        let scale = 1.0 / indices.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        total * scale
    }

    pub fn predict(&self, w: &[f64], x: &[f64]) -> usize {
        let mut hidden = vec![0.0; self.hidden_width()];
        let mut logits = vec![0.0; self.classes];
        self.logits(w, x, &mut hidden, &mut logits);
        // first maximum wins
        logits
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
            .0
    }

    /// Fraction of correctly classified samples.
    pub fn accuracy(&self, w: &[f64], data: &SyntheticDataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let mut hidden = vec![0.0; self.hidden_width()];
        let mut logits = vec![0.0; self.classes];
        let correct = (0..data.len())
            .filter(|&i| {
                self.logits(w, data.sample(i), &mut hidden, &mut logits);
                let pred = logits
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                    .0;
                pred == data.label(i)
            })
            .count();
        correct as f64 / data.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SyntheticDataset {
        SyntheticDataset::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, -1.0, -1.0, 0.5, 0.5], vec![0, 1, 2, 1]).unwrap()
    }

    #[test]
    fn dimensions() {
        assert_eq!(Network::new(Architecture::Softmax, 10, 64).dim(), 650);
        assert_eq!(Network::new(Architecture::Mlp { hidden: 8 }, 10, 64).dim(), 8 * 64 + 8 + 80 + 10);
    }

    #[test]
    fn zero_weights_give_uniform_loss() {
        let net = Network::new(Architecture::Softmax, 3, 2);
        let data = toy();
        let w = vec![0.0; net.dim()];
        assert!((net.loss(&w, &data, &[0, 1, 2, 3], false) - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn flip_is_an_involution() {
        for y in 0..10 {
            assert_eq!(flip_label(flip_label(y, 10), 10), y);
        }
        assert_eq!(flip_label(0, 10), 9);
    }

    #[test]
    fn predict_follows_bias() {
        let net = Network::new(Architecture::Softmax, 3, 2);
        let mut w = vec![0.0; net.dim()];
        w[6 + 2] = 1.0;
        assert_eq!(net.predict(&w, &[0.3, -0.1]), 2);
        assert_eq!(net.accuracy(&w, &toy()), 0.25);
    }

    #[test]
    fn mlp_init_is_seeded() {
        let net = Network::new(Architecture::Mlp { hidden: 4 }, 3, 2);
        let a = Model::init(net, &SeedSpec::new(1));
        let b = Model::init(net, &SeedSpec::new(1));
        assert_eq!(a, b);
        assert!(a.params.iter().any(|&v| v != 0.0));
    }
}
