//! Dense gradient vectors and the handful of reductions every other module
//! builds on.

use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense vector of model-parameter deltas.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn distance(&self, other: &GradientVector) -> f64 {
        distance(&self.0, &other.0)
    }

    pub fn scaled(&self, a: f64) -> GradientVector {
        Self(self.0.iter().map(|v| a * v).collect())
    }
}

impl From<Vec<f64>> for GradientVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Deref for GradientVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for GradientVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Euclidean norm.
pub fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Checks that `gradients` is nonempty and every vector has the same
/// dimension; returns that dimension.
pub fn common_dim(gradients: &[GradientVector]) -> Result<usize> {
    let first = gradients
        .first()
        .ok_or(Error::EmptyInput("no gradients"))?;
    let dim = first.dim();
    for g in &gradients[1..] {
        if g.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: g.dim(),
            });
        }
    }
    Ok(dim)
}

/// Rejects any NaN or infinite entry. Applied at server ingress.
pub fn ensure_finite(gradients: &[GradientVector]) -> Result<()> {
    for (input, g) in gradients.iter().enumerate() {
        if let Some(coordinate) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { input, coordinate });
        }
    }
    Ok(())
}

/// Coordinate-wise arithmetic mean. Sums in input order, then divides.
pub fn mean(gradients: &[GradientVector]) -> Result<GradientVector> {
    let dim = common_dim(gradients)?;
    let mut acc = vec![0.0; dim];
    for g in gradients {
        for (a, v) in acc.iter_mut().zip(g.iter()) {
            *a += v;
        }
    }
    let n = gradients.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(GradientVector(acc))
}

/// Mean of the gradients at `indices`, summed in the order given.
pub fn mean_of(gradients: &[GradientVector], indices: &[usize]) -> Result<GradientVector> {
    let dim = common_dim(gradients)?;
    if indices.is_empty() {
        return Err(Error::EmptyInput("empty selection"));
    }
    let mut acc = vec![0.0; dim];
    for &i in indices {
        let g = gradients.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            dim: gradients.len(),
        })?;
        for (a, v) in acc.iter_mut().zip(g.iter()) {
            *a += v;
        }
    }
    let n = indices.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(GradientVector(acc))
}

/// Returns `(g[j₁], …, g[jₖ])` for the ascending indices `indices`.
pub fn extract_subvector(g: &GradientVector, indices: &[usize]) -> Result<GradientVector> {
    indices
        .iter()
        .map(|&j| {
            g.0.get(j).copied().ok_or(Error::IndexOutOfRange {
                index: j,
                dim: g.dim(),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(GradientVector)
}
