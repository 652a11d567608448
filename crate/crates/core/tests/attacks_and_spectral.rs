use gas_core::aggregators::top_right_singular_vector;
use gas_core::attacks::{lie, min_max, min_sum};
use gas_core::vector::{distance, mean, squared_distance};
use gas_core::{GradientVector, SeedSpec};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const GAMMA_INIT: f64 = 10.0;
const TAU: f64 = 1e-5;

fn honest_cloud(label: &str, t: u64) -> Vec<GradientVector> {
    let mut rng = SeedSpec::new(31).derive(label, t).rng();
    let n = rng.random_range(2..=12);
    let d = rng.random_range(1..=8);
    let spread: f64 = rng.random_range(0.1..5.0);
    (0..n)
        .map(|_| {
            GradientVector::new(
                (0..d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        spread * z
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Recovers `γ` from `μ − γσ` on the coordinate with the largest σ.
fn gamma_of(crafted: &GradientVector, honest: &[GradientVector]) -> (f64, Vec<f64>) {
    let mu = mean(honest).unwrap();
    let n = honest.len() as f64;
    let std: Vec<f64> = (0..mu.dim())
        .map(|k| (honest.iter().map(|g| (g[k] - mu[k]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let k = (0..std.len()).max_by(|&a, &b| std[a].total_cmp(&std[b])).unwrap();
    ((mu[k] - crafted[k]) / std[k], std)
}

fn shifted(honest: &[GradientVector], std: &[f64], gamma: f64) -> GradientVector {
    let mu = mean(honest).unwrap();
    GradientVector::new(mu.iter().zip(std).map(|(m, s)| m - gamma * s).collect())
}

#[test]
fn min_max_respects_its_bound_and_is_nearly_maximal() {
    for t in 0..1000 {
        let honest = honest_cloud("min-max", t);
        let crafted = min_max(&honest, GAMMA_INIT, TAU).unwrap();
        let bound = honest
            .iter()
            .flat_map(|a| honest.iter().map(move |b| distance(a, b)))
            .fold(0.0, f64::max);
        let worst = honest.iter().map(|g| distance(&crafted, g)).fold(0.0, f64::max);
        assert!(worst <= bound, "instance {t}: {worst} > {bound}");

        let (gamma, std) = gamma_of(&crafted, &honest);
        assert!(gamma >= 0.0);
        if gamma < 2.0 * GAMMA_INIT - 4.0 * TAU {
            let beyond = shifted(&honest, &std, gamma + 4.0 * TAU);
            let over = honest.iter().map(|g| distance(&beyond, g)).fold(0.0, f64::max);
            assert!(over > bound, "instance {t}: γ={gamma} is not maximal");
        }
    }
}

#[test]
fn min_sum_respects_its_bound_and_is_nearly_maximal() {
    for t in 0..1000 {
        let honest = honest_cloud("min-sum", t);
        let crafted = min_sum(&honest, GAMMA_INIT, TAU).unwrap();
        let sum_sq = |c: &GradientVector| honest.iter().map(|g| squared_distance(c, g)).sum::<f64>();
        let bound = honest.iter().map(sum_sq).fold(0.0, f64::max);
        assert!(sum_sq(&crafted) <= bound, "instance {t}");

        let (gamma, std) = gamma_of(&crafted, &honest);
        assert!(gamma >= 0.0);
        if gamma < 2.0 * GAMMA_INIT - 4.0 * TAU {
            let beyond = shifted(&honest, &std, gamma + 4.0 * TAU);
            assert!(sum_sq(&beyond) > bound, "instance {t}: γ={gamma} is not maximal");
        }
    }
}

#[test]
fn lie_is_z_standard_deviations_from_the_mean() {
    for t in 0..200 {
        let honest = honest_cloud("lie", t);
        let crafted = lie(&honest, 1.5).unwrap();
        let (gamma, _) = gamma_of(&crafted, &honest);
        assert!((gamma + 1.5).abs() < 1e-9, "instance {t}: {gamma}");
    }
}

#[test]
fn power_iteration_matches_dense_svd() {
    let mut checked = 0;
    for t in 0..200 {
        let mut rng = SeedSpec::new(32).derive("svd", t).rng();
        let n = rng.random_range(3..=20);
        let d = rng.random_range(2..=40);
        // a planted direction keeps the spectral gap away from zero
        let planted: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let a = 3.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
                planted
                    .iter()
                    .map(|p| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        a * p + 0.3 * z
                    })
                    .collect()
            })
            .collect();
        let m = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        let svd = m.clone().svd(false, true);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let (s1, s2) = (svd.singular_values[order[0]], svd.singular_values.get(order[1]).copied().unwrap_or(0.0));
        if s2 > 0.6 * s1 {
            continue;
        }
        let v_t = svd.v_t.unwrap();
        let want: Vec<f64> = (0..d).map(|j| v_t[(order[0], j)]).collect();
        let got = top_right_singular_vector(&rows, &SeedSpec::new(t)).unwrap();
        let dot: f64 = got.iter().zip(&want).map(|(a, b)| a * b).sum();
        let sign = dot.signum();
        let err = got.iter().zip(&want).map(|(a, b)| (a - sign * b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "instance {t}: {err:e}");
        checked += 1;
    }
    assert!(checked >= 150, "only {checked} instances had a usable gap");
}
