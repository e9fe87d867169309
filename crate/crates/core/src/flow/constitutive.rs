//! van Genuchten–Mualem capillary pressure and relative permeabilities.

use crate::error::{Error, Result};

/// Lower clamp applied to the effective saturation before evaluating p_c.
pub const PC_MIN_EFFECTIVE_SATURATION: f64 = 1e-6;

/// `p_c(s_le) = p_r (s_le^{-1/υ} − 1)^{1/n}`.
pub fn capillary_pressure(s_le: f64, p_r: f64, n: f64) -> Result<f64> {
    if !(s_le > 0.0) {
        return Err(Error::CapillarySingularity(s_le));
    }
    let upsilon = 1.0 - 1.0 / n;
    let s = s_le.min(1.0);
    Ok(p_r * (s.powf(-1.0 / upsilon) - 1.0).max(0.0).powf(1.0 / n))
}

/// Capillary pressure with the effective saturation clamped to `[1e-6, 1]`.
pub fn capillary_pressure_regularized(s_le: f64, p_r: f64, n: f64) -> f64 {
    let s = s_le.clamp(PC_MIN_EFFECTIVE_SATURATION, 1.0);
    // cannot fail once clamped
    capillary_pressure(s, p_r, n).unwrap_or(0.0)
}

/// Inverse capillary law: `s_le(p_c) = (1 + (p_c/p_r)^n)^{-υ}`, with `s_le = 1` for `p_c ≤ 0`.
pub fn effective_saturation_from_pc(pc: f64, p_r: f64, n: f64) -> f64 {
    if pc <= 0.0 {
        return 1.0;
    }
    let upsilon = 1.0 - 1.0 / n;
    (1.0 + (pc / p_r).powf(n)).powf(-upsilon)
}

/// d s_le / d p_c of [`effective_saturation_from_pc`].
pub fn effective_saturation_derivative(pc: f64, p_r: f64, n: f64) -> f64 {
    if pc <= 0.0 {
        return 0.0;
    }
    let upsilon = 1.0 - 1.0 / n;
    let r = pc / p_r;
    let base = 1.0 + r.powf(n);
    -upsilon * base.powf(-upsilon - 1.0) * n * r.powf(n - 1.0) / p_r
}

/// Relative permeabilities `(k_rl, k_rg)` of the Mualem model.
pub fn rel_perm(s_le: f64, n: f64) -> (f64, f64) {
    let s = s_le.clamp(0.0, 1.0);
    let upsilon = 1.0 - 1.0 / n;
    let inner = 1.0 - s.powf(1.0 / upsilon);
    let krl = s.sqrt() * (1.0 - inner.powf(upsilon)).powi(2);
    let krg = (1.0 - s).sqrt() * inner.powf(2.0 * upsilon);
    (krl.clamp(0.0, 1.0), krg.clamp(0.0, 1.0))
}

/// `s_le = (s_l − s_lr)/(1 − s_lr − s_gr)`, clamped to `[0, 1]`.
pub fn effective_saturation(s_l: f64, s_lr: f64, s_gr: f64) -> f64 {
    ((s_l - s_lr) / (1.0 - s_lr - s_gr)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: f64 = 1.54;
    const PR: f64 = 2e6;

    #[test]
    fn capillary_pressure_vanishes_at_full_saturation() {
        assert_eq!(capillary_pressure(1.0, PR, N).unwrap(), 0.0);
    }

    #[test]
    fn capillary_pressure_reference_value() {
        // p_r (0.5^{-1/υ} − 1)^{1/n}, evaluated independently
        let pc = capillary_pressure(0.5, PR, N).unwrap();
        assert!((pc - 6_553_072.096_704_222).abs() / pc < 1e-12);
    }

    #[test]
    fn capillary_pressure_is_decreasing() {
        let a = capillary_pressure(0.3, PR, N).unwrap();
        let b = capillary_pressure(0.7, PR, N).unwrap();
        assert!(a > b);
    }

    #[test]
    fn capillary_singularity_is_an_error() {
        assert!(matches!(
            capillary_pressure(0.0, PR, N),
            Err(Error::CapillarySingularity(_))
        ));
        assert!(capillary_pressure_regularized(0.0, PR, N).is_finite());
    }

    #[test]
    fn inverse_law_round_trips() {
        for s in [0.05, 0.2, 0.5, 0.9, 0.999] {
            let pc = capillary_pressure(s, PR, N).unwrap();
            let back = effective_saturation_from_pc(pc, PR, N);
            assert!((back - s).abs() < 1e-12, "{s} {back}");
        }
    }

    #[test]
    fn saturation_derivative_matches_finite_difference() {
        for pc in [1e4, 3e5, 2e6, 7e6] {
            let h = pc * 1e-6;
            let fd = (effective_saturation_from_pc(pc + h, PR, N)
                - effective_saturation_from_pc(pc - h, PR, N))
                / (2.0 * h);
            let an = effective_saturation_derivative(pc, PR, N);
            assert!(((fd - an) / an).abs() < 1e-6);
        }
    }

    #[test]
    fn rel_perm_endpoints() {
        assert_eq!(rel_perm(1.0, N), (1.0, 0.0));
        assert_eq!(rel_perm(0.0, N), (0.0, 1.0));
    }

    #[test]
    fn rel_perm_reference_values() {
        // second implementation through exp/ln
        let s: f64 = 0.6;
        let u = 1.0 - 1.0 / N;
        let inner = 1.0 - (s.ln() / u).exp();
        let krl = (0.5 * s.ln()).exp() * (1.0 - (u * inner.ln()).exp()).powi(2);
        let krg = (0.5 * (1.0 - s).ln()).exp() * (2.0 * u * inner.ln()).exp();
        let (a, b) = rel_perm(s, N);
        assert!((a - krl).abs() < 1e-14 && (b - krg).abs() < 1e-14);
        assert!((a - 0.006_109_865_781_523_218).abs() < 1e-15);
        assert!((b - 0.525_103_286_834_244_7).abs() < 1e-14);
    }

    #[test]
    fn effective_saturation_cases() {
        assert_eq!(effective_saturation(1.0, 0.4, 0.0), 1.0);
        assert_eq!(effective_saturation(0.4, 0.4, 0.0), 0.0);
        assert!((effective_saturation(0.7, 0.4, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(effective_saturation(0.1, 0.4, 0.0), 0.0);
    }
}
