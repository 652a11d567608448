//! Straight-line reference implementations of the robust aggregation rules.
//!
//! Everything here is written for obviousness, not speed: distances are
//! recomputed from scratch, every coordinate is sorted independently, and no
//! code is shared with the production aggregators. Points are plain
//! `Vec<f64>` rows.

pub type Point = Vec<f64>;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        let t = a[k] - b[k];
        s += t * t;
    }
    s
}

fn column(points: &[Point], k: usize) -> Vec<f64> {
    points.iter().map(|p| p[k]).collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn median_of(values: Vec<f64>) -> f64 {
    let v = sorted(values);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn mean(points: &[Point]) -> Point {
    let d = points[0].len();
    let mut out = vec![0.0; d];
    for p in points {
        for k in 0..d {
            out[k] += p[k];
        }
    }
    for v in out.iter_mut() {
        *v /= points.len() as f64;
    }
    out
}

pub fn coordinate_median(points: &[Point]) -> Point {
    (0..points[0].len())
        .map(|k| median_of(column(points, k)))
        .collect()
}

pub fn trimmed_mean(points: &[Point], f: usize) -> Point {
    let n = points.len();
    (0..points[0].len())
        .map(|k| {
            let v = sorted(column(points, k));
            let kept = &v[f..n - f];
            let mut s = 0.0;
            for x in kept {
                s += x;
            }
            s / kept.len() as f64
        })
        .collect()
}

/// Krum score of every point: sum of squared distances to its `n−f−2`
/// nearest other points.
pub fn krum_scores(points: &[Point], f: usize) -> Vec<f64> {
    let n = points.len();
    let k = n.saturating_sub(f + 2);
    let mut all = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            all[i][j] = sq_dist(&points[i], &points[j]);
        }
    }
    (0..n)
        .map(|i| {
            let others = sorted((0..n).filter(|&j| j != i).map(|j| all[i][j]).collect());
            others[..k].iter().sum()
        })
        .collect()
}

/// Multi-Krum: keeps the `n−f` lowest Krum scores (ties to the lower index)
/// and averages them. Returns `(selected ascending, aggregate)`.
pub fn multi_krum(points: &[Point], f: usize) -> (Vec<usize>, Point) {
    let scores = krum_scores(points, f);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
    let mut chosen = order[..points.len() - f].to_vec();
    chosen.sort();
    let picked: Vec<Point> = chosen.iter().map(|&i| points[i].clone()).collect();
    (chosen, mean(&picked))
}

/// First Bulyan stage: repeatedly run Krum on the remaining pool and move the
/// winner out, `n−2f` times. Returns the winners in selection order.
pub fn bulyan_selection(points: &[Point], f: usize) -> Vec<usize> {
    let n = points.len();
    let theta = n - 2 * f;
    let mut pool: Vec<usize> = (0..n).collect();
    let mut picked = Vec::new();
    for _ in 0..theta {
        let k = pool.len().saturating_sub(f + 2);
        let mut best: Option<(usize, f64)> = None;
        for &i in &pool {
            let mut ds = Vec::new();
            for &j in &pool {
                if j != i {
                    ds.push(sq_dist(&points[i], &points[j]));
                }
            }
            let ds = sorted(ds);
            let score: f64 = ds[..k].iter().sum();
            match best {
                Some((_, s)) if s <= score => {}
                _ => best = Some((i, score)),
            }
        }
        let (winner, _) = best.unwrap();
        picked.push(winner);
        pool.retain(|&i| i != winner);
    }
    picked
}

/// Second Bulyan stage: per coordinate, average the `θ−2f` values closest to
/// the coordinate median of the selected set (ties to the lower value).
pub fn bulyan_trim(selected: &[Point], f: usize) -> Point {
    let theta = selected.len();
    let beta = theta - 2 * f;
    (0..selected[0].len())
        .map(|k| {
            let vals = column(selected, k);
            let med = median_of(vals.clone());
            let mut by_closeness = vals;
            by_closeness.sort_by(|a, b| {
                (a - med)
                    .abs()
                    .partial_cmp(&(b - med).abs())
                    .unwrap()
                    .then(a.partial_cmp(b).unwrap())
            });
            let mut s = 0.0;
            for x in &by_closeness[..beta] {
                s += x;
            }
            s / beta as f64
        })
        .collect()
}

pub fn bulyan(points: &[Point], f: usize) -> (Vec<usize>, Point) {
    let picked = bulyan_selection(points, f);
    let rows: Vec<Point> = picked.iter().map(|&i| points[i].clone()).collect();
    (picked, bulyan_trim(&rows, f))
}

/// Sum of Euclidean distances from `z` to every point.
pub fn geometric_median_objective(points: &[Point], z: &[f64]) -> f64 {
    points.iter().map(|p| sq_dist(p, z).sqrt()).sum()
}

/// Smoothed Weiszfeld started at the mean.
pub fn weiszfeld(points: &[Point], iters: usize, eps: f64) -> Point {
    let d = points[0].len();
    let mut z = mean(points);
    for _ in 0..iters {
        let mut num = vec![0.0; d];
        let mut den = 0.0;
        for p in points {
            let dist = sq_dist(p, &z).sqrt();
            let w = 1.0 / if dist > eps { dist } else { eps };
            for k in 0..d {
                num[k] += w * p[k];
            }
            den += w;
        }
        for k in 0..d {
            z[k] = num[k] / den;
        }
    }
    z
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, unit eigenvectors)` sorted by descending
/// eigenvalue.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i][j] * a[i][j];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].partial_cmp(&a[x][x]).unwrap());
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// Spectral outlier scores on the given coordinates: centre the restricted
/// points, take the top eigenvector of the covariance (`dim × dim`) and
/// return the squared projections.
pub fn spectral_scores(points: &[Point], coords: &[usize]) -> Vec<f64> {
    let rows: Vec<Point> = points
        .iter()
        .map(|p| coords.iter().map(|&k| p[k]).collect())
        .collect();
    let mu = mean(&rows);
    let centred: Vec<Point> = rows
        .iter()
        .map(|r| r.iter().zip(&mu).map(|(a, b)| a - b).collect())
        .collect();
    let m = coords.len();
    let mut cov = vec![vec![0.0; m]; m];
    for r in &centred {
        for i in 0..m {
            for j in 0..m {
                cov[i][j] += r[i] * r[j];
            }
        }
    }
    let (_, vecs) = symmetric_eigen(&cov);
    let top = &vecs[0];
    centred
        .iter()
        .map(|r| {
            let proj: f64 = r.iter().zip(top).map(|(a, b)| a * b).sum();
            proj * proj
        })
        .collect()
}

/// One-iteration DnC on all coordinates: drop the `⌊c·f⌋` highest spectral
/// scores (ties to the lower index) and average the rest.
pub fn dnc_full(points: &[Point], f: usize, c: f64) -> (Vec<usize>, Point) {
    let d = points[0].len();
    let coords: Vec<usize> = (0..d).collect();
    let scores = spectral_scores(points, &coords);
    let remove = (c * f as f64).floor() as usize;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[remove..].to_vec();
    kept.sort();
    let rows: Vec<Point> = kept.iter().map(|&i| points[i].clone()).collect();
    (kept, mean(&rows))
}

/// Gradient splitting on an explicit partition with a coordinate-median
/// reference per group. Returns `(totals, selected ascending, aggregate)`.
pub fn gas_with_median(
    points: &[Point],
    groups: &[Vec<usize>],
    keep: usize,
) -> (Vec<f64>, Vec<usize>, Point) {
    let n = points.len();
    let mut totals = vec![0.0; n];
    for g in groups {
        let sub: Vec<Point> = points
            .iter()
            .map(|p| g.iter().map(|&k| p[k]).collect())
            .collect();
        let reference = coordinate_median(&sub);
        for i in 0..n {
            totals[i] += sq_dist(&sub[i], &reference).sqrt();
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| totals[a].partial_cmp(&totals[b]).unwrap().then(a.cmp(&b)));
    let mut chosen = order[..keep].to_vec();
    chosen.sort();
    let rows: Vec<Point> = chosen.iter().map(|&i| points[i].clone()).collect();
    (totals, chosen, mean(&rows))
}

/// Largest absolute coordinate difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let pts = vec![vec![1.0, 0.0], vec![2.0, 1.0], vec![3.0, 5.0], vec![4.0, 6.0]];
        assert_eq!(coordinate_median(&pts), vec![2.5, 3.0]);
        let pts: Vec<Point> = [0.0, 1.0, 2.0, 3.0, 100.0].iter().map(|&x| vec![x]).collect();
        assert_eq!(trimmed_mean(&pts, 1), vec![2.0]);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(&m);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[0][0].abs() - s).abs() < 1e-12 && (vecs[0][1].abs() - s).abs() < 1e-12);
    }

    #[test]
    fn bulyan_single_outlier() {
        let mut pts: Vec<Point> = (0..6).map(|_| vec![0.0]).collect();
        pts.push(vec![100.0]);
        let (sel, out) = bulyan(&pts, 1);
        assert!(!sel.contains(&6));
        assert_eq!(out, vec![0.0]);
    }
}
