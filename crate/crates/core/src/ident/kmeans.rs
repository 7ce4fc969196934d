use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::randkit::RngStream;

/// Result of a k-means fit: centers (K×r), assignments and inertia.
#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub centers: DMatrix<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
}

/// Lloyd's algorithm with k-means++ seeding; the best of `restarts` runs by
/// inertia is returned. Runs ending with an empty cluster are discarded.
pub fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, max_iter: usize, rng: &mut RngStream) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(Error::KMeans(format!("cannot form {k} clusters from {n} points")));
    }
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        if let Some(fit) = lloyd(points, k, max_iter, rng) {
            if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
                best = Some(fit);
            }
        }
    }
    best.ok_or_else(|| Error::KMeans(format!("all {restarts} restarts ended with an empty cluster")))
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols()).map(|j| (points[(i, j)] - centers[(c, j)]).powi(2)).sum()
}

fn seed_plus_plus(points: &DMatrix<f64>, k: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let (n, r) = points.shape();
    let mut centers = DMatrix::zeros(k, r);
    centers.set_row(0, &points.row(rng.index(n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.uniform() * total;
            let mut idx = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.index(n)
        };
        centers.set_row(c, &points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &centers, c));
        }
    }
    centers
}

fn lloyd(points: &DMatrix<f64>, k: usize, max_iter: usize, rng: &mut RngStream) -> Option<KMeansFit> {
    let (n, r) = points.shape();
    let mut centers = seed_plus_plus(points, k, rng);
    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let d = sq_dist(points, i, &centers, c);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if assign[i] != best.1 {
                assign[i] = best.1;
                changed = true;
            }
        }
        let mut sums = DMatrix::<f64>::zeros(k, r);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for j in 0..r {
                sums[(assign[i], j)] += points[(i, j)];
            }
        }
        if counts.contains(&0) {
            return None;
        }
        for c in 0..k {
            for j in 0..r {
                centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = (0..n).map(|i| sq_dist(points, i, &centers, assign[i])).sum();
    Some(KMeansFit { centers, assignments: assign, inertia })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut rng = RngStream::new(5, 0);
        let pts = DMatrix::from_fn(40, 2, |i, _| if i < 20 { rng.normal() * 0.1 } else { 10.0 + rng.normal() * 0.1 });
        let fit = kmeans(&pts, 2, 5, 100, &mut RngStream::new(1, 0)).unwrap();
        let a = fit.assignments[0];
        assert!(fit.assignments[..20].iter().all(|&c| c == a));
        assert!(fit.assignments[20..].iter().all(|&c| c != a));
    }

    #[test]
    fn too_few_points() {
        let pts = DMatrix::zeros(1, 2);
        assert!(kmeans(&pts, 2, 1, 10, &mut RngStream::new(1, 0)).is_err());
    }
}
