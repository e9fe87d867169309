//! L1-constrained least squares `min ‖Λc − d‖² s.t. ‖c‖₁ ≤ τ`.
//!
//! Spectral projected gradient with a nonmonotone line search, projecting onto
//! the L1 ball by the sort-and-threshold rule, stopped on the Frank–Wolfe
//! duality gap. The iterate is then polished by solving the KKT system on its
//! support, which removes the slow linear tail of first-order methods.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseRegressionConfig {
    pub tau: f64,
    pub max_iterations: usize,
    /// Stop when the duality gap of `½‖Λc − d‖²` falls below `tolerance · ½‖d‖²`.
    pub tolerance: f64,
}

impl SparseRegressionConfig {
    pub fn new(tau: f64) -> Self {
        SparseRegressionConfig {
            tau,
            max_iterations: 20_000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseFit {
    pub coefficients: Vec<f64>,
    /// `‖Λc − d‖²`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto `{c : ‖c‖₁ ≤ τ}`.
pub fn project_l1_ball(v: &[f64], tau: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= tau {
        return v.to_vec();
    }
    if tau <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - tau) / (i + 1) as f64;
        if ui > t {
            theta = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

fn l1(c: &[f64]) -> f64 {
    c.iter().map(|x| x.abs()).sum()
}

fn objective(design: &DMatrix<f64>, data: &DVector<f64>, c: &[f64]) -> f64 {
    (design * DVector::from_column_slice(c) - data).norm_squared()
}

/// Fails with `RegressionNonConvergence` if the gap criterion is not met.
pub fn sparse_regress(
    design: &DMatrix<f64>,
    data: &[f64],
    cfg: &SparseRegressionConfig,
) -> Result<Vec<f64>> {
    let fit = sparse_regress_from(design, data, cfg, None)?;
    if !fit.converged {
        return Err(Error::RegressionNonConvergence {
            iterations: fit.iterations,
        });
    }
    Ok(fit.coefficients)
}

/// Like [`sparse_regress`] but warm-started and always returning the best iterate.
pub fn sparse_regress_from(
    design: &DMatrix<f64>,
    data: &[f64],
    cfg: &SparseRegressionConfig,
    start: Option<&[f64]>,
) -> Result<SparseFit> {
    let (n, p) = design.shape();
    if data.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: data.len(),
        });
    }
    if !(cfg.tau > 0.0 && cfg.tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be positive, got {}", cfg.tau)));
    }
    if design.iter().chain(data.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite design or data"));
    }
    let d = DVector::from_column_slice(data);
    let d_norm = 0.5 * d.norm_squared();
    if p == 0 || d_norm == 0.0 {
        return Ok(SparseFit {
            coefficients: vec![0.0; p],
            objective: 2.0 * d_norm,
            iterations: 0,
            converged: true,
        });
    }
    let tau = cfg.tau;
    let target = cfg.tolerance * d_norm;

    let mut c = match start {
        Some(s) if s.len() == p => project_l1_ball(s, tau),
        _ => vec![0.0; p],
    };
    let mut r = design * DVector::from_column_slice(&c) - &d;
    let mut f = 0.5 * r.norm_squared();
    let mut g = design.tr_mul(&r);
    let frob = design.norm_squared();
    let (alpha_min, alpha_max) = (1e-10 / frob.max(1e-300), 1e10);
    let mut alpha = 1.0 / frob.max(1e-300);
    const MEMORY: usize = 10;
    const GAMMA: f64 = 1e-4;
    const POLISH_EVERY: usize = 25;
    let mut history = vec![f; 1];
    let mut iterations = 0;
    let mut converged = false;

    let gap = |c: &[f64], g: &DVector<f64>| -> f64 {
        let gc: f64 = c.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        gc + tau * g.amax()
    };

    let certified = |c: &[f64]| -> Option<(Vec<f64>, f64)> {
        let (cp, op) = polish(design, &d, c, tau)?;
        let rp = design * DVector::from_column_slice(&cp) - &d;
        let gp = design.tr_mul(&rp);
        (gap(&cp, &gp) <= target).then_some((cp, op))
    };

    while iterations < cfg.max_iterations {
        if gap(&c, &g) <= target {
            converged = true;
            break;
        }
        if iterations > 0 && iterations % POLISH_EVERY == 0 {
            if let Some((cp, op)) = certified(&c) {
                return Ok(finish(cp, op, iterations, true, tau, design, &d));
            }
        }
        iterations += 1;
        let trial: Vec<f64> = c.iter().zip(g.iter()).map(|(x, gi)| x - alpha * gi).collect();
        let proj = project_l1_ball(&trial, tau);
        let dir: Vec<f64> = proj.iter().zip(&c).map(|(a, b)| a - b).collect();
        let gtd: f64 = dir.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        if !(gtd < 0.0) {
            // stationary to machine precision
            converged = gap(&c, &g) <= target.max(1e-14 * d_norm);
            break;
        }
        let ad = design * DVector::from_column_slice(&dir);
        let f_ref = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rd = r.dot(&ad);
        let dd = ad.norm_squared();
        let mut lambda = 1.0;
        loop {
            let f_new = f + lambda * rd + 0.5 * lambda * lambda * dd;
            if f_new <= f_ref + GAMMA * lambda * gtd || lambda < 1e-12 {
                break;
            }
            // minimizer of the exact quadratic along the direction
            let lq = if dd > 0.0 { -rd / dd } else { 0.5 * lambda };
            lambda = if lq > 0.1 * lambda && lq < 0.9 * lambda { lq } else { 0.5 * lambda };
        }
        let step: Vec<f64> = dir.iter().map(|v| lambda * v).collect();
        for (ci, s) in c.iter_mut().zip(&step) {
            *ci += s;
        }
        r.axpy(lambda, &ad, 1.0);
        f = 0.5 * r.norm_squared();
        let g_new = design.tr_mul(&r);
        let sy: f64 = step.iter().zip(g_new.iter().zip(g.iter())).map(|(s, (a, b))| s * (a - b)).sum();
        let ss: f64 = step.iter().map(|s| s * s).sum();
        alpha = if sy > 0.0 { (ss / sy).clamp(alpha_min, alpha_max) } else { (10.0 * alpha).min(alpha_max) };
        g = g_new;
        history.push(f);
        if history.len() > MEMORY {
            history.remove(0);
        }
    }

    let spg_obj = 2.0 * f;
    match polish(design, &d, &c, tau) {
        Some((cp, op)) if op <= spg_obj * (1.0 + 1e-12) => {
            let rp = design * DVector::from_column_slice(&cp) - &d;
            let gp = design.tr_mul(&rp);
            let ok = converged || gap(&cp, &gp) <= target;
            Ok(finish(cp, op, iterations, ok, tau, design, &d))
        }
        _ => Ok(finish(c, spg_obj, iterations, converged, tau, design, &d)),
    }
}

/// Solutions for every budget in `taus` (ascending). The piecewise-linear
/// homotopy path of the problem in `τ` is traced once and each grid point is
/// then certified by [`sparse_regress_from`] warm-started from the path.
pub fn sparse_regress_path(
    design: &DMatrix<f64>,
    data: &[f64],
    taus: &[f64],
    cfg: &SparseRegressionConfig,
) -> Result<Vec<SparseFit>> {
    if taus.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("tau grid must be ascending"));
    }
    if data.len() != design.nrows() {
        return Err(Error::DimensionMismatch {
            expected: design.nrows(),
            actual: data.len(),
        });
    }
    let starts = if data.iter().chain(design.iter()).all(|v| v.is_finite()) {
        homotopy(design, &DVector::from_column_slice(data), taus)
    } else {
        vec![None; taus.len()]
    };
    let mut out: Vec<SparseFit> = Vec::with_capacity(taus.len());
    for (&tau, start) in taus.iter().zip(&starts) {
        let warm = start.as_deref().or(out.last().map(|f| f.coefficients.as_slice()));
        out.push(sparse_regress_from(design, data, &SparseRegressionConfig { tau, ..*cfg }, warm)?);
    }
    Ok(out)
}

enum Event {
    Join(usize),
    Drop(usize),
    End,
}

/// Lasso homotopy (LARS with sign-change drops), parametrized by the L1 norm.
/// Grid points past a numerical breakdown are left `None`.
fn homotopy(design: &DMatrix<f64>, d: &DVector<f64>, taus: &[f64]) -> Vec<Option<Vec<f64>>> {
    let (n, p) = design.shape();
    let mut out = vec![None; taus.len()];
    let mut g = design.tr_mul(d);
    let lam0 = g.amax();
    if p == 0 || lam0 == 0.0 {
        out.iter_mut().for_each(|o| *o = Some(vec![0.0; p]));
        return out;
    }
    let eps = 1e-13 * lam0;
    let mut c = vec![0.0; p];
    let mut l1_now = 0.0;
    let mut in_active = vec![false; p];
    let j0 = g.iamax();
    let mut active = vec![j0];
    in_active[j0] = true;
    let mut lambda = lam0;
    let mut next = 0;
    let mut blocked: Option<usize> = None;

    for _ in 0..(8 * n.min(p) + 16) {
        let signs = DVector::from_iterator(active.len(), active.iter().map(|&j| g[j].signum()));
        let a_s = design.select_columns(&active);
        let Some(chol) = a_s.tr_mul(&a_s).cholesky() else {
            break;
        };
        let w = chol.solve(&signs);
        let slope = signs.dot(&w);
        if !(slope > 0.0) {
            break;
        }
        let a = design.tr_mul(&(&a_s * &w));
        let mut gamma = lambda;
        let mut event = Event::End;
        if active.len() < n.min(p) {
            for j in (0..p).filter(|&j| !in_active[j] && Some(j) != blocked) {
                for cand in [(lambda - g[j]) / (1.0 - a[j]), (lambda + g[j]) / (1.0 + a[j])] {
                    if cand > eps && cand < gamma {
                        gamma = cand;
                        event = Event::Join(j);
                    }
                }
            }
        }
        for (q, &j) in active.iter().enumerate() {
            if w[q] != 0.0 {
                let cand = -c[j] / w[q];
                if cand > eps && cand < gamma {
                    gamma = cand;
                    event = Event::Drop(q);
                }
            }
        }
        let l1_end = l1_now + gamma * slope;
        while next < taus.len() && taus[next] <= l1_end {
            let t = ((taus[next] - l1_now) / slope).clamp(0.0, gamma);
            let mut ct = c.clone();
            for (q, &j) in active.iter().enumerate() {
                ct[j] += t * w[q];
            }
            out[next] = Some(ct);
            next += 1;
        }
        for (q, &j) in active.iter().enumerate() {
            c[j] += gamma * w[q];
        }
        lambda -= gamma;
        blocked = None;
        match event {
            Event::End => {
                // unconstrained optimum reached; larger budgets keep it
                for o in &mut out[next..] {
                    *o = Some(c.clone());
                }
                return out;
            }
            Event::Join(j) => {
                active.push(j);
                in_active[j] = true;
            }
            Event::Drop(q) => {
                let j = active.remove(q);
                c[j] = 0.0;
                in_active[j] = false;
                blocked = Some(j);
            }
        }
        l1_now = l1(&c);
        let r = d - design * DVector::from_column_slice(&c);
        g = design.tr_mul(&r);
        if lambda <= eps {
            for o in &mut out[next..] {
                *o = Some(c.clone());
            }
            return out;
        }
    }
    out
}

/// Rescales away round-off infeasibility.
fn finish(
    mut c: Vec<f64>,
    obj: f64,
    iterations: usize,
    converged: bool,
    tau: f64,
    design: &DMatrix<f64>,
    d: &DVector<f64>,
) -> SparseFit {
    let norm1 = l1(&c);
    let objective = if norm1 > tau {
        let s = tau / norm1;
        c.iter_mut().for_each(|v| *v *= s);
        objective(design, d, &c)
    } else {
        obj
    };
    SparseFit {
        coefficients: c,
        objective,
        iterations,
        converged,
    }
}

/// Least squares restricted to the support of `c`, with the L1 constraint kept
/// active when `c` sits on the boundary. Returns `None` if the result is
/// infeasible or changes the sign pattern.
fn polish(design: &DMatrix<f64>, d: &DVector<f64>, c: &[f64], tau: f64) -> Option<(Vec<f64>, f64)> {
    let cmax = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if cmax == 0.0 {
        return None;
    }
    let support: Vec<usize> = (0..c.len()).filter(|&k| c[k].abs() > 1e-9 * cmax).collect();
    let k = support.len();
    if k == 0 || k > design.nrows() {
        return None;
    }
    let sub = design.select_columns(&support);
    let gram = sub.tr_mul(&sub);
    let rhs = sub.tr_mul(d);
    let signs: Vec<f64> = support.iter().map(|&j| c[j].signum()).collect();

    let assemble = |coef: &[f64]| -> Vec<f64> {
        let mut full = vec![0.0; c.len()];
        for (i, &j) in support.iter().enumerate() {
            full[j] = coef[i];
        }
        full
    };
    let valid = |coef: &[f64]| -> bool {
        coef.iter().zip(&signs).all(|(v, s)| v * s >= 0.0) && l1(coef) <= tau * (1.0 + 1e-12)
    };

    let on_boundary = l1(c) >= tau * (1.0 - 1e-6);
    if !on_boundary {
        if let Some(sol) = gram.clone().cholesky().map(|ch| ch.solve(&rhs)) {
            let v: Vec<f64> = sol.iter().copied().collect();
            if valid(&v) {
                let full = assemble(&v);
                let o = objective(design, d, &full);
                return Some((full, o));
            }
        }
    }
    // [G s; sᵀ 0] [x; μ] = [Λᵀd; τ]
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    kkt.view_mut((0, 0), (k, k)).copy_from(&gram);
    for i in 0..k {
        kkt[(i, k)] = signs[i];
        kkt[(k, i)] = signs[i];
    }
    let mut b = DVector::zeros(k + 1);
    b.rows_mut(0, k).copy_from(&rhs);
    b[k] = tau;
    let sol = kkt.lu().solve(&b)?;
    let v: Vec<f64> = sol.rows(0, k).iter().copied().collect();
    // the constraint multiplier must be nonnegative
    if sol[k] < 0.0 || !valid(&v) {
        return None;
    }
    let full = assemble(&v);
    let o = objective(design, d, &full);
    Some((full, o))
}
