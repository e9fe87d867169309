//! Scalar observables of trajectories and Gaussian kernel density estimates.

use std::str::FromStr;

use crate::error::{Error, Result};

pub const PDF_GRID_POINTS: usize = 512;
pub const MIN_PDF_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl Density {
    pub fn to_text(&self) -> String {
        let mut out = format!("# bandwidth {:.6e}\n# x pdf\n", self.bandwidth);
        for (x, p) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{x:.8e} {p:.8e}\n"));
        }
        out
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Gaussian KDE with Silverman's bandwidth `0.9 min(σ, IQR/1.34) n^{-1/5}`
/// on a uniform grid over `[min, max]` padded by 10% of the range on each side.
pub fn estimate_pdf(samples: &[f64]) -> Result<Density> {
    if samples.len() < MIN_PDF_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_PDF_SAMPLES} samples")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    let n = samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if !(hi > lo) {
        return Err(Error::DegenerateSamples("all samples are equal".into()));
    }
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    let pad = 0.1 * (hi - lo);
    let grid = crate::quadrature::uniform_grid(lo - pad, hi + pad, PDF_GRID_POINTS);
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    // kernels beyond 8 bandwidths contribute below double precision
    let cutoff = 8.0 * h;
    let values = grid
        .iter()
        .map(|&x| {
            let start = sorted.partition_point(|&v| v < x - cutoff);
            let end = sorted.partition_point(|&v| v <= x + cutoff);
            norm * sorted[start..end]
                .iter()
                .map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Ok(Density {
        grid,
        values,
        bandwidth: h,
    })
}

/// Scalar summaries extracted per trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// Maximum over the trajectory.
    Max,
    /// First time the trajectory exceeds the given fraction of its maximum.
    FirstTimeAbove(f64),
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Observable::Max),
            "rise-time" => Ok(Observable::FirstTimeAbove(0.2)),
            other => other
                .strip_prefix("first-above:")
                .and_then(|f| f.parse().ok())
                .map(Observable::FirstTimeAbove)
                .ok_or_else(|| Error::invalid(format!("unknown observable '{other}'"))),
        }
    }
}

impl Observable {
    pub fn extract(&self, times: &[f64], values: &[f64]) -> Option<f64> {
        match *self {
            Observable::Max => Some(observable_max(values)),
            Observable::FirstTimeAbove(f) => first_time_above(times, values, f),
        }
    }
}

pub fn observable_max(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// First time, linearly interpolated, at which `values` rises above `fraction · max`.
/// `None` when the maximum is not positive.
pub fn first_time_above(times: &[f64], values: &[f64], fraction: f64) -> Option<f64> {
    let max = observable_max(values);
    if !(max > 0.0) {
        return None;
    }
    let level = fraction * max;
    if values[0] > level {
        return Some(times[0]);
    }
    for k in 1..values.len() {
        if values[k] > level {
            let (v0, v1) = (values[k - 1], values[k]);
            let t = (level - v0) / (v1 - v0);
            return Some(times[k - 1] + t * (times[k] - times[k - 1]));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn standard_normal_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let d = estimate_pdf(&x).unwrap();
        assert_eq!(d.grid.len(), 512);
        let sup = d
            .grid
            .iter()
            .zip(&d.values)
            .map(|(g, v)| (v - (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(sup < 0.05, "{sup}");
        let mass: f64 = d.values.iter().sum::<f64>() * (d.grid[1] - d.grid[0]);
        assert!((mass - 1.0).abs() < 1e-2);
    }

    #[test]
    fn degenerate_samples() {
        assert!(matches!(estimate_pdf(&[2.0; 200]), Err(Error::DegenerateSamples(_))));
        assert!(estimate_pdf(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn observables() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        let s = [0.0, 0.0, 0.5, 1.0, 0.2];
        assert_eq!(observable_max(&s), 1.0);
        assert!((first_time_above(&t, &s, 0.2).unwrap() - 1.4).abs() < 1e-12);
        assert_eq!(first_time_above(&t, &[0.0; 5], 0.2), None);
        assert_eq!("rise-time".parse::<Observable>().unwrap(), Observable::FirstTimeAbove(0.2));
        assert_eq!("first-above:0.5".parse::<Observable>().unwrap(), Observable::FirstTimeAbove(0.5));
        assert!("bogus".parse::<Observable>().is_err());
    }
}
