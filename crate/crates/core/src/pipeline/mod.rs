//! Stage orchestration: sampling, forward solves, screening, surrogate
//! construction and validation, with persistent artifacts.

mod codec;
pub mod config;
pub mod manifest;
pub mod snapshot;
pub mod store;

use std::time::Instant;

use log::{info, warn};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub use config::{AnalysisConfig, EnsembleConfig, InputConfig, PipelineConfig, Profile, SurrogateConfig};
pub use manifest::{PipelineManifest, StageRecord, StageStatus, SurrogateChoice};
pub use snapshot::SurrogateSnapshot;
pub use store::{EnsembleStore, OutputGrid, QoiData, SampleDiagnostics, SampleRecord, SampleStatus, Split};

use crate::analysis::relative_error;
use crate::error::{Error, Result};
use crate::flow::{simulate, FlowConfig, Mesh1D, QoiLabel};
use crate::pce::{fit_surrogate, kfold_select, BispectralSurrogate, CvReport, FitOptions, SparseRegressionConfig};
use crate::quadrature::{trapezoid_weights, uniform_grid};
use crate::random_input::FieldGenerator;
use crate::screening::{screen, ReducedSet, ScreeningReport};

/// Independent seed for a named stage derived from the master seed.
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    let mut h = master ^ 0x9e37_79b9_7f4a_7c15;
    for b in stage.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// `N_s × N_p` i.i.d. standard normals, filled sample by sample.
pub fn generate_samples(seed: u64, n_samples: usize, n_params: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xi = DMatrix::zeros(n_samples, n_params);
    for j in 0..n_samples {
        for i in 0..n_params {
            xi[(j, i)] = rng.sample(StandardNormal);
        }
    }
    xi
}

/// The output grids every forward solve reports on.
pub fn output_grids(flow: &FlowConfig) -> Result<Vec<OutputGrid>> {
    let times = uniform_grid(0.0, flow.boundary.t_final, flow.n_output);
    let mesh = Mesh1D::uniform(flow.boundary.length, flow.n_cells)?;
    let mut grids = vec![
        OutputGrid {
            label: QoiLabel::InflowGasSaturation,
            abscissae: times.clone(),
        },
        OutputGrid {
            label: QoiLabel::OutflowGasFlux,
            abscissae: times,
        },
    ];
    for &t in &flow.snapshot_times {
        grids.push(OutputGrid {
            label: QoiLabel::SpatialGasSaturation(t),
            abscissae: mesh.cell_centers.clone(),
        });
    }
    Ok(grids)
}

/// New store holding `N_s` samples drawn from the config's seed.
pub fn new_store(cfg: &PipelineConfig) -> Result<EnsembleStore> {
    let seed = derive_seed(cfg.seed, "samples");
    let xi = generate_samples(seed, cfg.ensemble.n_samples, cfg.input.n_params);
    Ok(EnsembleStore::new(seed, &xi, output_grids(&cfg.flow)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub attempted: usize,
    pub completed: usize,
    pub failed: usize,
}

fn solve_one(
    xi: &[f64],
    generator: &FieldGenerator,
    flow: &FlowConfig,
    grids: &[OutputGrid],
) -> (SampleStatus, SampleDiagnostics, Vec<Vec<f64>>) {
    let start = Instant::now();
    let result = generator.fields(xi).and_then(|f| simulate(f, flow.clone())).and_then(|out| {
        let trajectories = grids
            .iter()
            .map(|g| {
                let t = out
                    .trajectory(g.label)
                    .ok_or_else(|| Error::invalid(format!("solver produced no '{}'", g.label.name())))?;
                if t.values.len() != g.abscissae.len() || t.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("'{}' does not match the store grid", g.label.name())));
                }
                Ok(t.values.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((out.diagnostics, trajectories))
    });
    let wall_seconds = start.elapsed().as_secs_f64();
    match result {
        Ok((d, trajectories)) => (
            SampleStatus::Completed,
            SampleDiagnostics {
                accepted_steps: d.accepted_steps as u64,
                rejected_steps: d.rejected_steps as u64,
                fixed_point_iterations: d.fixed_point_iterations as u64,
                min_dt_years: d.min_dt_years,
                mass_balance_error: d.mass_audit.relative_error,
                wall_seconds,
                message: String::new(),
            },
            trajectories,
        ),
        Err(e) => (
            SampleStatus::Failed,
            SampleDiagnostics {
                wall_seconds,
                message: e.to_string(),
                ..SampleDiagnostics::default()
            },
            Vec::new(),
        ),
    }
}

/// Solves every pending sample in parallel; results are written back in index
/// order. Completed and failed samples are left untouched.
pub fn run_ensemble(store: &mut EnsembleStore, cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.flow.validate()?;
    if store.n_params != cfg.input.n_params {
        return Err(Error::DimensionMismatch {
            expected: cfg.input.n_params,
            actual: store.n_params,
        });
    }
    let expected = output_grids(&cfg.flow)?;
    if store.grids != expected {
        return Err(Error::Config("store output grids do not match the flow config".into()));
    }
    let pending = store.indices_with(SampleStatus::Pending);
    if pending.is_empty() {
        return Ok(RunSummary::default());
    }
    let generator = cfg.field_generator()?;
    info!("solving {} pending samples", pending.len());
    let results: Vec<_> = pending
        .par_iter()
        .map(|&j| solve_one(&store.records[j].xi, &generator, &cfg.flow, &store.grids))
        .collect();
    let mut summary = RunSummary {
        attempted: pending.len(),
        ..RunSummary::default()
    };
    for (&j, (status, diagnostics, trajectories)) in pending.iter().zip(results) {
        if status == SampleStatus::Failed {
            warn!("sample {j} failed: {}", diagnostics.message);
            summary.failed += 1;
        } else {
            summary.completed += 1;
        }
        let rec = &mut store.records[j];
        rec.status = status;
        rec.diagnostics = diagnostics;
        rec.trajectories = trajectories;
    }
    Ok(summary)
}

/// `SolverFailureBudget` when failures exceed the allowed fraction of solved samples.
pub fn check_failure_budget(store: &EnsembleStore, max_fraction: f64) -> Result<()> {
    let failed = store.count(SampleStatus::Failed);
    let total = failed + store.count(SampleStatus::Completed);
    if total > 0 && failed as f64 > max_fraction * total as f64 {
        return Err(Error::SolverFailureBudget {
            failed,
            total,
            allowed: max_fraction,
        });
    }
    Ok(())
}

/// Seeded shuffle of `candidates`, first `n_train` for training and the next
/// `n_validate` for validation; each set sorted ascending.
pub fn split_train_validate(candidates: &[usize], n_train: usize, n_validate: usize, seed: u64) -> Result<Split> {
    if n_train + n_validate > candidates.len() {
        return Err(Error::invalid(format!(
            "cannot take {n_train} + {n_validate} samples from {}",
            candidates.len()
        )));
    }
    let mut idx = candidates.to_vec();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = idx[..n_train].to_vec();
    let mut validate = idx[n_train..n_train + n_validate].to_vec();
    train.sort_unstable();
    validate.sort_unstable();
    Ok(Split { seed, train, validate })
}

/// Split of the completed samples, shrunk proportionally when failures leave
/// fewer than requested.
pub fn assign_split(store: &mut EnsembleStore, cfg: &PipelineConfig) -> Result<Split> {
    let ok = store.indices_with(SampleStatus::Completed);
    let (mut n_train, mut n_validate) = (cfg.ensemble.n_train, cfg.ensemble.n_validate);
    if n_train + n_validate > ok.len() {
        let scale = ok.len() as f64 / (n_train + n_validate) as f64;
        n_train = (n_train as f64 * scale).floor() as usize;
        n_validate = ok.len().min(n_validate).min(ok.len() - n_train);
        warn!("only {} completed samples; using {n_train}/{n_validate}", ok.len());
    }
    let split = split_train_validate(&ok, n_train, n_validate, derive_seed(cfg.seed, "split"))?;
    store.split = Some(split.clone());
    Ok(split)
}

fn training_indices(store: &EnsembleStore) -> Result<&[usize]> {
    store
        .split
        .as_ref()
        .map(|s| s.train.as_slice())
        .ok_or_else(|| Error::invalid("store has no train/validation split; run simulate first"))
}

/// Screening of one QoI on the training samples.
pub fn screen_qoi(store: &EnsembleStore, label: QoiLabel, tol: f64) -> Result<ScreeningReport> {
    let data = store.qoi_data(label, training_indices(store)?)?;
    screen(&data.xi, &data.values, &trapezoid_weights(&data.abscissae), tol)
}

/// Cross-validated surrogate on the training samples, refitted on all of them
/// at the selected `(N_ord, τ)`.
pub fn build_surrogate(
    store: &EnsembleStore,
    label: QoiLabel,
    reduced: &ReducedSet,
    cfg: &PipelineConfig,
) -> Result<(BispectralSurrogate, CvReport)> {
    if reduced.n_full != store.n_params {
        return Err(Error::DimensionMismatch {
            expected: store.n_params,
            actual: reduced.n_full,
        });
    }
    let data = store.qoi_data(label, training_indices(store)?)?;
    let xi_r = reduced.project_rows(&data.xi)?;
    let opts = cfg.surrogate.cv_options(derive_seed(cfg.seed, "folds"));
    let cv = kfold_select(&data.abscissae, &xi_r, &data.values, &opts)?;
    info!("{}: selected n_ord = {}, tau = {}", label.name(), cv.n_ord, cv.tau);
    let fit = FitOptions {
        truncation: cfg.surrogate.truncation(),
        max_degree: cv.n_ord,
        regression: SparseRegressionConfig {
            tau: cv.tau,
            ..opts.regression
        },
    };
    let sur = fit_surrogate(&data.abscissae, &xi_r, &data.values, reduced.clone(), &fit)?;
    Ok((sur, cv))
}

/// `e_rel` of the surrogate against the stored trajectories of `indices`.
pub fn surrogate_error(store: &EnsembleStore, label: QoiLabel, sur: &BispectralSurrogate, indices: &[usize]) -> Result<f64> {
    let data = store.qoi_data(label, indices)?;
    if data.abscissae != sur.abscissae {
        return Err(Error::invalid("surrogate and store use different output grids"));
    }
    let xi_r = sur.reduced_set.project_rows(&data.xi)?;
    relative_error(&sur.evaluate_many(&xi_r)?, &data.values, &sur.weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_reproducible_standard_normals() {
        let a = generate_samples(5, 10_000, 3);
        assert_eq!(a, generate_samples(5, 10_000, 3));
        assert_ne!(a, generate_samples(6, 10_000, 3));
        for c in 0..3 {
            let col: Vec<f64> = a.column(c).iter().copied().collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() < 3.0 / n.sqrt());
            // sd of the sample variance of a normal is sqrt(2/(n-1))
            assert!((var - 1.0).abs() < 3.0 * (2.0 / (n - 1.0)).sqrt());
        }
    }

    #[test]
    fn split_is_disjoint_covering_and_seeded() {
        let all: Vec<usize> = (0..550).collect();
        let s = split_train_validate(&all, 350, 200, 1).unwrap();
        assert_eq!((s.train.len(), s.validate.len()), (350, 200));
        let mut union: Vec<usize> = s.train.iter().chain(&s.validate).copied().collect();
        union.sort_unstable();
        assert_eq!(union, all);
        assert!(s.train.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, split_train_validate(&all, 350, 200, 1).unwrap());
        assert_ne!(s, split_train_validate(&all, 350, 200, 2).unwrap());
        assert!(split_train_validate(&all, 500, 100, 1).is_err());
    }

    #[test]
    fn failure_budget() {
        let xi = DMatrix::zeros(10, 1);
        let mut store = EnsembleStore::new(0, &xi, vec![]);
        for r in store.records.iter_mut().take(8) {
            r.status = SampleStatus::Completed;
        }
        store.records[8].status = SampleStatus::Failed;
        check_failure_budget(&store, 0.2).unwrap();
        store.records[9].status = SampleStatus::Failed;
        check_failure_budget(&store, 0.2).unwrap();
        assert!(matches!(check_failure_budget(&store, 0.1), Err(Error::SolverFailureBudget { failed: 2, .. })));
    }

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(derive_seed(1, "samples"), derive_seed(1, "split"));
        assert_ne!(derive_seed(1, "samples"), derive_seed(2, "samples"));
        assert_eq!(derive_seed(3, "folds"), derive_seed(3, "folds"));
    }
}
