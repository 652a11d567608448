use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Generative parameters for class-conditional Gaussian blobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetParams {
    pub classes: usize,
    pub features: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    /// Radius of the sphere the class centres are drawn on.
    pub r_sep: f64,
    /// Isotropic per-sample noise.
    pub sigma_x: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            classes: 10,
            features: 64,
            per_class: 200,
            test_per_class: 200,
            r_sep: 6.0,
            sigma_x: 1.0,
        }
    }
}

/// Row-major features with integer labels in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub classes: usize,
    pub features: usize,
    values: Vec<f64>,
    labels: Vec<usize>,
}

impl SyntheticDataset {
    pub fn new(classes: usize, features: usize, values: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if values.len() != labels.len() * features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * features,
                found: values.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidParameter(format!("label {bad} ≥ {classes} classes")));
        }
        Ok(Self {
            classes,
            features,
            values,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.values[i * self.features..(i + 1) * self.features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Draws `classes` centres uniformly on the sphere of radius `r_sep`, then
/// independent train and test samples around them.
pub fn generate_synthetic(params: &DatasetParams, seed: &SeedSpec) -> Result<(SyntheticDataset, SyntheticDataset)> {
    let DatasetParams {
        classes,
        features,
        per_class,
        test_per_class,
        r_sep,
        sigma_x,
    } = *params;
    if classes < 2 || features == 0 {
        return Err(Error::InvalidParameter("dataset needs classes ≥ 2 and features ≥ 1".into()));
    }
    if !(r_sep >= 0.0 && sigma_x >= 0.0) {
        return Err(Error::InvalidParameter("r_sep and sigma_x must be nonnegative".into()));
    }

    let mut rng = seed.derive("centres", 0).rng();
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let mut c: Vec<f64> = (0..features).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            c.iter_mut().for_each(|v| *v *= r_sep / norm);
            c
        })
        .collect();

    let draw = |label: &str, count: usize| {
        let mut rng = seed.derive(label, 0).rng();
        let mut values = Vec::with_capacity(classes * count * features);
        let mut labels = Vec::with_capacity(classes * count);
        for (y, centre) in centres.iter().enumerate() {
            for _ in 0..count {
                values.extend(centre.iter().map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + sigma_x * z
                }));
                labels.push(y);
            }
        }
        SyntheticDataset::new(classes, features, values, labels)
    };
    Ok((draw("train", per_class)?, draw("test", test_per_class)?))
}
