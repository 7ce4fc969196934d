#![allow(dead_code)]

/// Normalized CDF of an unnormalized log density on a log-spaced grid over
/// [lo, hi] (both > 0). Returns (grid points, CDF values).
pub fn log_grid_cdf(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / (n - 1) as f64;
    let us: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
    let logs: Vec<f64> = us.iter().map(|&u| log_density(u.exp()) + u).collect();
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * h * (w[i] + w[i - 1]);
    }
    let total = cdf[n - 1];
    for c in &mut cdf {
        *c /= total;
    }
    (us.iter().map(|u| u.exp()).collect(), cdf)
}

/// Normalized CDF of an unnormalized log density on a linear grid.
pub fn lin_grid_cdf(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let logs: Vec<f64> = xs.iter().map(|&x| log_density(x)).collect();
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * h * (w[i] + w[i - 1]);
    }
    let total = cdf[n - 1];
    for c in &mut cdf {
        *c /= total;
    }
    (xs, cdf)
}

fn interp(grid: &[f64], cdf: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return 0.0;
    }
    if x >= grid[grid.len() - 1] {
        return 1.0;
    }
    let i = grid.partition_point(|g| *g <= x);
    let (x0, x1) = (grid[i - 1], grid[i]);
    cdf[i - 1] + (cdf[i] - cdf[i - 1]) * (x - x0) / (x1 - x0)
}

/// Kolmogorov-Smirnov distance between samples and a tabulated CDF.
pub fn ks_distance(samples: &mut [f64], grid: &[f64], cdf: &[f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = interp(grid, cdf, x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Standard error of the mean by non-overlapping batch means.
pub fn batch_se(v: &[f64], batches: usize) -> f64 {
    let size = v.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| v[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let (_, var) = mean_var(&means);
    (var / batches as f64).sqrt()
}
