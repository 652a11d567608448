//! Multi-Krum and Bulyan.

use super::coordinate::median_of_sorted;
use super::{lowest_k, sort_floats, Aggregate};
use crate::error::{Error, Result};
use crate::vector::{common_dim, mean_of, squared_distance, GradientVector};

fn pairwise_squared(gradients: &[GradientVector]) -> Vec<Vec<f64>> {
    let n = gradients.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(&gradients[i], &gradients[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    dist
}

/// Krum score of every member of `pool`: the sum of squared distances to its
/// `|pool| − f − 2` nearest neighbours inside the pool.
fn pool_scores(dist: &[Vec<f64>], pool: &[usize], f: usize) -> Vec<f64> {
    let k = pool.len().saturating_sub(f + 2);
    let mut row = Vec::with_capacity(pool.len());
    pool.iter()
        .map(|&i| {
            row.clear();
            row.extend(pool.iter().filter(|&&j| j != i).map(|&j| dist[i][j]));
            sort_floats(&mut row);
            row[..k].iter().sum()
        })
        .collect()
}

/// Krum scores over all inputs.
pub fn krum_scores(gradients: &[GradientVector], f: usize) -> Result<Vec<f64>> {
    common_dim(gradients)?;
    let n = gradients.len();
    if n < f + 3 {
        return Err(Error::precondition("MultiKrum", format!("n ≥ f+3 (n={n}, f={f})")));
    }
    let pool: Vec<usize> = (0..n).collect();
    Ok(pool_scores(&pairwise_squared(gradients), &pool, f))
}

/// Mean of the `n − f` clients with the lowest Krum scores.
pub fn multi_krum(gradients: &[GradientVector], f: usize) -> Result<GradientVector> {
    multi_krum_detailed(gradients, f).map(|a| a.value)
}

pub fn multi_krum_detailed(gradients: &[GradientVector], f: usize) -> Result<Aggregate> {
    let scores = krum_scores(gradients, f)?;
    let selected = lowest_k(&scores, gradients.len() - f);
    Ok(Aggregate {
        value: mean_of(gradients, &selected)?,
        selected: Some(selected),
    })
}

/// Bulyan: `n − 2f` rounds of Krum selection without replacement, then a
/// per-coordinate average of the `n − 4f` selected values closest to the
/// coordinate median.
pub fn bulyan(gradients: &[GradientVector], f: usize) -> Result<GradientVector> {
    bulyan_detailed(gradients, f).map(|a| a.value)
}

pub fn bulyan_detailed(gradients: &[GradientVector], f: usize) -> Result<Aggregate> {
    let dim = common_dim(gradients)?;
    let n = gradients.len();
    if n < 4 * f + 3 {
        return Err(Error::precondition("Bulyan", format!("n ≥ 4f+3 (n={n}, f={f})")));
    }
    let picked = bulyan_selection(gradients, f);
    let beta = picked.len() - 2 * f;

    let mut column = vec![0.0; picked.len()];
    let mut sorted = vec![0.0; picked.len()];
    let value = (0..dim)
        .map(|k| {
            for (c, &i) in column.iter_mut().zip(&picked) {
                *c = gradients[i][k];
            }
            sorted.copy_from_slice(&column);
            sort_floats(&mut sorted);
            let med = median_of_sorted(&sorted);
            column.sort_by(|a, b| {
                (a - med)
                    .abs()
                    .total_cmp(&(b - med).abs())
                    .then(a.total_cmp(b))
            });
            column[..beta].iter().sum::<f64>() / beta as f64
        })
        .collect();

    let mut selected = picked;
    selected.sort_unstable();
    Ok(Aggregate {
        value: GradientVector::new(value),
        selected: Some(selected),
    })
}

/// Selection stage of Bulyan, in pick order.
pub(crate) fn bulyan_selection(gradients: &[GradientVector], f: usize) -> Vec<usize> {
    let dist = pairwise_squared(gradients);
    let theta = gradients.len() - 2 * f;
    let mut pool: Vec<usize> = (0..gradients.len()).collect();
    let mut picked = Vec::with_capacity(theta);
    for _ in 0..theta {
        let scores = pool_scores(&dist, &pool, f);
        // pool stays ascending, so the first minimum is the lowest index
        let (pos, _) = scores
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (p, &s)| if s < best.1 { (p, s) } else { best });
        picked.push(pool.remove(pos));
    }
    picked
}
