//! Divide-and-conquer spectral filtering.
//!
//! Each iteration subsamples coordinates, centres the restricted gradients,
//! finds the top right singular direction via power iteration on the `n × n`
//! Gram matrix, and flags the `⌊c·f⌋` clients with the largest squared
//! projections. The output averages the clients that were never flagged.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use super::Aggregate;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::vector::{common_dim, mean_of, GradientVector};

pub const POWER_ITERATIONS: usize = 50;

pub(crate) fn removal_count(c: f64, f: usize) -> usize {
    (c * f as f64).floor() as usize
}

pub fn dnc(
    gradients: &[GradientVector],
    f: usize,
    c: f64,
    niters: usize,
    b: usize,
    seed: &SeedSpec,
) -> Result<GradientVector> {
    dnc_detailed(gradients, f, c, niters, b, seed).map(|a| a.value)
}

pub fn dnc_detailed(
    gradients: &[GradientVector],
    f: usize,
    c: f64,
    niters: usize,
    b: usize,
    seed: &SeedSpec,
) -> Result<Aggregate> {
    let dim = common_dim(gradients)?;
    let n = gradients.len();
    let removed = removal_count(c, f);
    if b == 0 || niters == 0 || n <= removed {
        return Err(Error::precondition(
            "DnC",
            format!("n > ⌊c·f⌋, b ≥ 1, niters ≥ 1 (n={n}, ⌊c·f⌋={removed}, b={b}, niters={niters})"),
        ));
    }

    let mut flagged = vec![false; n];
    for it in 0..niters {
        // keyed by (seed, iteration) only, never by client order
        let coords: Vec<usize> = if b >= dim {
            (0..dim).collect()
        } else {
            let mut picked = index::sample(&mut seed.derive("dnc-coords", it as u64).rng(), dim, b).into_vec();
            picked.sort_unstable();
            picked
        };
        let centred = centred_rows(gradients, &coords);
        let scores = spectral_scores(&centred, &seed.derive("dnc-start", it as u64));

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        for &i in &order[..removed] {
            flagged[i] = true;
        }
    }

    let kept: Vec<usize> = (0..n).filter(|&i| !flagged[i]).collect();
    if kept.is_empty() {
        return Err(Error::DncRemovedEveryone);
    }
    Ok(Aggregate {
        value: mean_of(gradients, &kept)?,
        selected: Some(kept),
    })
}

fn centred_rows(gradients: &[GradientVector], coords: &[usize]) -> Vec<Vec<f64>> {
    let n = gradients.len() as f64;
    let mut mu = vec![0.0; coords.len()];
    for g in gradients {
        for (m, &k) in mu.iter_mut().zip(coords) {
            *m += g[k];
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    gradients
        .iter()
        .map(|g| coords.iter().zip(&mu).map(|(&k, m)| g[k] - m).collect())
        .collect()
}

fn gram(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    g
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        v.iter_mut().for_each(|x| *x /= norm);
        true
    } else {
        false
    }
}

/// Top eigenvector of the Gram matrix by power iteration; `None` if the
/// matrix annihilates the iterate (all rows zero).
fn top_gram_eigenvector(gram: &[Vec<f64>], seed: &SeedSpec) -> Option<Vec<f64>> {
    let mut rng = seed.rng();
    let mut u: Vec<f64> = (0..gram.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    if !normalize(&mut u) {
        return None;
    }
    for _ in 0..POWER_ITERATIONS {
        u = mat_vec(gram, &u);
        if !normalize(&mut u) {
            return None;
        }
    }
    Some(u)
}

/// Squared projections `⟨xᵢ, v⟩²` onto `v = Xᵀu / ‖Xᵀu‖`. With `w = Gu`
/// these are `wᵢ² / uᵀGu`, so the `d`-dimensional direction is never formed.
fn spectral_scores(centred: &[Vec<f64>], seed: &SeedSpec) -> Vec<f64> {
    let g = gram(centred);
    let Some(u) = top_gram_eigenvector(&g, seed) else {
        return vec![0.0; centred.len()];
    };
    let w = mat_vec(&g, &u);
    let energy: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
    if !(energy > 0.0) {
        return vec![0.0; centred.len()];
    }
    w.iter().map(|x| x * x / energy).collect()
}

/// The unit top right singular vector of the row matrix `rows`, as DnC
/// computes it (sign is arbitrary).
pub fn top_right_singular_vector(rows: &[Vec<f64>], seed: &SeedSpec) -> Option<Vec<f64>> {
    let u = top_gram_eigenvector(&gram(rows), seed)?;
    let dim = rows.first()?.len();
    let mut v = vec![0.0; dim];
    for (row, &ui) in rows.iter().zip(&u) {
        for (vk, x) in v.iter_mut().zip(row) {
            *vk += ui * x;
        }
    }
    normalize(&mut v).then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::mean;

    #[test]
    fn no_byzantine_means_plain_mean() {
        let g: Vec<_> = (0..6)
            .map(|i| GradientVector::new(vec![i as f64, (i * i) as f64 * 0.5, -1.0]))
            .collect();
        let out = dnc_detailed(&g, 0, 4.0, 1, 10_000, &SeedSpec::new(1)).unwrap();
        assert_eq!(out.value, mean(&g).unwrap());
        assert_eq!(out.selected.unwrap().len(), 6);
    }

    #[test]
    fn exact_copies_outliers_removed() {
        let d = 12;
        let mut g: Vec<_> = (0..8).map(|_| GradientVector::zeros(d)).collect();
        g.extend((0..2).map(|_| GradientVector::new(vec![10.0; d])));
        let out = dnc_detailed(&g, 2, 4.0, 1, 10_000, &SeedSpec::new(5)).unwrap();
        assert_eq!(out.value, GradientVector::zeros(d));
        let kept = out.selected.unwrap();
        assert_eq!(kept.len(), 2);
        assert!(kept.iter().all(|&i| i < 8));
    }

    #[test]
    fn everyone_removed_is_an_error() {
        // coordinate 0 flags clients {1, 0}, coordinate 1 flags {2, 0}; with
        // one sampled coordinate per iteration both get drawn eventually
        let g = vec![
            GradientVector::new(vec![0.0, 0.0]),
            GradientVector::new(vec![10.0, 0.0]),
            GradientVector::new(vec![0.0, 10.0]),
        ];
        assert_eq!(dnc(&g, 1, 2.0, 20, 1, &SeedSpec::new(0)), Err(Error::DncRemovedEveryone));
        assert!(matches!(
            dnc(&g, 1, 4.0, 1, 1, &SeedSpec::new(0)),
            Err(Error::Precondition { rule: "DnC", .. })
        ));
    }

    #[test]
    fn identical_inputs_give_zero_scores() {
        let g: Vec<_> = (0..5).map(|_| GradientVector::new(vec![2.0, 3.0])).collect();
        let out = dnc(&g, 1, 4.0, 1, 10_000, &SeedSpec::new(0)).unwrap();
        assert_eq!(out, g[0]);
    }

    #[test]
    fn subsampling_is_seeded() {
        let g: Vec<_> = (0..12)
            .map(|i| GradientVector::new((0..40).map(|k| ((i * 31 + k * 7) % 13) as f64).collect()))
            .collect();
        let a = dnc_detailed(&g, 2, 2.0, 2, 5, &SeedSpec::new(9)).unwrap();
        let b = dnc_detailed(&g, 2, 2.0, 2, 5, &SeedSpec::new(9)).unwrap();
        assert_eq!(a, b);
    }
}
