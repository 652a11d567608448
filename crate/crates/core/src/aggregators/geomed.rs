use crate::error::{Error, Result};
use crate::vector::{common_dim, distance, mean, GradientVector};

pub const DEFAULT_SMOOTHING: f64 = 1e-8;

/// Approximate geometric median by `iters` smoothed Weiszfeld steps from the
/// mean. Point `i` is weighted by `1 / max(eps, ‖z − gᵢ‖)`.
pub fn geometric_median(gradients: &[GradientVector], iters: usize, eps: f64) -> Result<GradientVector> {
    let dim = common_dim(gradients)?;
    if iters == 0 || !(eps > 0.0) {
        return Err(Error::precondition("GeometricMedian", "iters ≥ 1 and eps > 0"));
    }
    let mut z = mean(gradients)?;
    let mut num = vec![0.0; dim];
    for _ in 0..iters {
        num.iter_mut().for_each(|v| *v = 0.0);
        let mut den = 0.0;
        for g in gradients {
            let w = 1.0 / distance(&z, g).max(eps);
            for (acc, v) in num.iter_mut().zip(g.iter()) {
                *acc += w * v;
            }
            den += w;
        }
        for (zk, nk) in z.as_mut_slice().iter_mut().zip(&num) {
            *zk = nk / den;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(points: &[GradientVector], z: &GradientVector) -> f64 {
        points.iter().map(|p| p.distance(z)).sum()
    }

    #[test]
    fn identical_points() {
        let g: Vec<_> = (0..4).map(|_| GradientVector::new(vec![1.5, -3.0])).collect();
        assert_eq!(geometric_median(&g, 3, DEFAULT_SMOOTHING).unwrap(), g[0]);
    }

    #[test]
    fn square_centre() {
        let g: Vec<_> = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]
            .iter()
            .map(|r| GradientVector::new(r.to_vec()))
            .collect();
        let z = geometric_median(&g, 3, DEFAULT_SMOOTHING).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-9 && (z[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_converges_to_median() {
        let g: Vec<_> = [0.0, 1.0, 10.0].iter().map(|&v| GradientVector::new(vec![v])).collect();
        let start = mean(&g).unwrap();
        let z = geometric_median(&g, 200, DEFAULT_SMOOTHING).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-4, "z = {}", z[0]);
        assert!(objective(&g, &z) <= objective(&g, &start));
    }

    #[test]
    fn objective_non_increasing() {
        let g: Vec<_> = (0..9)
            .map(|i| {
                let t = i as f64;
                GradientVector::new(vec![t.sin() * 3.0, (t * 1.7).cos(), t * t * 0.1])
            })
            .collect();
        let mut prev = f64::INFINITY;
        for iters in 1..20 {
            let z = geometric_median(&g, iters, DEFAULT_SMOOTHING).unwrap();
            let obj = objective(&g, &z);
            assert!(obj <= prev + 1e-12, "iteration {iters}: {obj} > {prev}");
            prev = obj;
        }
    }
}
