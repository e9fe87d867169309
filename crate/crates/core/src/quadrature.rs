//! One-dimensional grids, composite trapezoid weights and linear interpolation.

use crate::error::{Error, Result};

/// `n` uniformly spaced points covering `[a, b]` (both endpoints included).
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let h = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + h * i as f64 })
                .collect()
        }
    }
}

/// Composite trapezoid weights on an arbitrary increasing node set.
pub fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    for k in 0..n - 1 {
        let h = nodes[k + 1] - nodes[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

/// Weights for cell-centered abscissae: each point carries its cell width.
pub fn midpoint_weights(widths: &[f64]) -> Vec<f64> {
    widths.to_vec()
}

pub fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

pub fn check_increasing(xs: &[f64]) -> Result<()> {
    if xs.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::invalid("abscissae must be strictly increasing"));
    }
    Ok(())
}

/// Piecewise-linear interpolation of `(xs, ys)` at `x`, clamped to the end values.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x).max(1) - 1;
    let (x0, x1) = (xs[k], xs[k + 1]);
    let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    ys[k] + t * (ys[k + 1] - ys[k])
}

pub fn interp_many(xs: &[f64], ys: &[f64], at: &[f64]) -> Vec<f64> {
    at.iter().map(|&x| interp_linear(xs, ys, x)).collect()
}

/// Gauss–Hermite nodes and weights for the standard Gaussian measure
/// (probabilists' convention, weights sum to one), via Golub–Welsch.
pub fn gauss_hermite_prob(n: usize) -> (Vec<f64>, Vec<f64>) {
    use nalgebra::{DMatrix, SymmetricEigen};
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let x = uniform_grid(0.0, 2.0, 11);
        let w = trapezoid_weights(&x);
        let f: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        assert!((weighted_sum(&w, &f) - 8.0).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interpolation_hits_nodes_and_clamps() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [1.0, 2.0, 0.0];
        assert_eq!(interp_linear(&xs, &ys, 1.0), 2.0);
        assert_eq!(interp_linear(&xs, &ys, 2.0), 1.0);
        assert_eq!(interp_linear(&xs, &ys, -5.0), 1.0);
        assert_eq!(interp_linear(&xs, &ys, 9.0), 0.0);
    }

    #[test]
    fn gauss_hermite_moments() {
        let (x, w) = gauss_hermite_prob(6);
        let m = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(10) - 945.0).abs() < 1e-8);
    }
}
