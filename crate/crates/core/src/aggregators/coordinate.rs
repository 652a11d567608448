use super::sort_floats;
use crate::error::{Error, Result};
use crate::vector::{common_dim, GradientVector};

/// Applies `reduce` to the sorted values of every coordinate.
fn per_coordinate(gradients: &[GradientVector], reduce: impl Fn(&[f64]) -> f64) -> Result<GradientVector> {
    let dim = common_dim(gradients)?;
    let mut column = vec![0.0; gradients.len()];
    let out = (0..dim)
        .map(|k| {
            for (c, g) in column.iter_mut().zip(gradients) {
                *c = g[k];
            }
            sort_floats(&mut column);
            reduce(&column)
        })
        .collect();
    Ok(GradientVector::new(out))
}

pub(crate) fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Coordinate-wise median; an even count averages the two middle values.
pub fn coordinate_median(gradients: &[GradientVector]) -> Result<GradientVector> {
    per_coordinate(gradients, median_of_sorted)
}

/// Per coordinate, drops the `f` largest and `f` smallest values and averages
/// the remaining `n − 2f`.
pub fn coordinate_trimmed_mean(gradients: &[GradientVector], f: usize) -> Result<GradientVector> {
    let n = gradients.len();
    if n <= 2 * f {
        return Err(Error::precondition("TrimmedMean", format!("n > 2f (n={n}, f={f})")));
    }
    let kept = (n - 2 * f) as f64;
    per_coordinate(gradients, |sorted| sorted[f..n - f].iter().sum::<f64>() / kept)
}
