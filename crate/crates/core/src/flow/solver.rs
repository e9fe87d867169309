//! Implicit Euler time marching with a lagged-coefficient fixed-point iteration.

use log::debug;

use super::params::{FlowConfig, YEAR};
use super::residual::FlowModel;
use super::state::FlowState;
use crate::error::{Error, Result};
use crate::quadrature;
use crate::random_input::MaterialFields;

/// Which function-valued output a trajectory holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QoiLabel {
    /// Gas saturation at the injection boundary over time.
    InflowGasSaturation,
    /// Total hydrogen mass flux (dissolved and gaseous) through x = L over time [kg·m⁻²·yr⁻¹].
    OutflowGasFlux,
    /// Gas saturation over the cell centers at a fixed time [yr].
    SpatialGasSaturation(f64),
}

impl QoiLabel {
    pub fn name(&self) -> String {
        match self {
            QoiLabel::InflowGasSaturation => "inflow_gas_saturation".into(),
            QoiLabel::OutflowGasFlux => "outflow_gas_flux".into(),
            QoiLabel::SpatialGasSaturation(t) => format!("spatial_gas_saturation@{t}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "inflow_gas_saturation" | "S" => Ok(QoiLabel::InflowGasSaturation),
            "outflow_gas_flux" | "Q" => Ok(QoiLabel::OutflowGasFlux),
            _ => {
                let t = s
                    .strip_prefix("spatial_gas_saturation@")
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown QoI label '{s}'")))?;
                Ok(QoiLabel::SpatialGasSaturation(t))
            }
        }
    }

    /// Flux-type outputs use the coarser default screening tolerance.
    pub fn default_screening_tol(&self) -> f64 {
        match self {
            QoiLabel::OutflowGasFlux => 0.02,
            _ => 0.002,
        }
    }
}

/// A function-valued output sampled on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QoITrajectory {
    pub label: QoiLabel,
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
}

impl QoITrajectory {
    pub fn validate(&self) -> Result<()> {
        quadrature::check_increasing(&self.abscissae)?;
        if self.abscissae.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.abscissae.len(),
                actual: self.values.len(),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("trajectory has non-finite values"));
        }
        Ok(())
    }
}

/// Per-step record at accepted time levels (time 0 included).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeHistory {
    pub time: Vec<f64>,
    pub inflow_gas_saturation: Vec<f64>,
    pub outflow_gas_flux: Vec<f64>,
    pub inflow_liquid_pressure: Vec<f64>,
    pub inflow_gas_pressure: Vec<f64>,
    /// ρ_l^h / (M H p_l) in the first cell; gas exists once it exceeds one.
    pub inflow_henry_ratio: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MassAudit {
    /// q_h T_inj [kg·m⁻²].
    pub injected: f64,
    pub in_domain_final: f64,
    pub outflow: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverDiagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub fixed_point_iterations: usize,
    pub min_dt_years: f64,
    pub mass_audit: MassAudit,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub state: FlowState,
    pub gas_saturation: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub inflow_saturation: QoITrajectory,
    pub outflow_gas_flux: QoITrajectory,
    pub spatial_saturation: Vec<QoITrajectory>,
    pub history: TimeHistory,
    pub snapshots: Vec<Snapshot>,
    pub state_at_injection_stop: FlowState,
    pub final_state: FlowState,
    pub diagnostics: SolverDiagnostics,
}

impl SimulationOutput {
    pub fn trajectory(&self, label: QoiLabel) -> Option<&QoITrajectory> {
        match label {
            QoiLabel::InflowGasSaturation => Some(&self.inflow_saturation),
            QoiLabel::OutflowGasFlux => Some(&self.outflow_gas_flux),
            QoiLabel::SpatialGasSaturation(t) => self
                .spatial_saturation
                .iter()
                .find(|q| matches!(q.label, QoiLabel::SpatialGasSaturation(s) if (s - t).abs() <= 1e-9 * t.abs().max(1.0))),
        }
    }

    /// Time [yr] at which gas first appears in the inflow cell, interpolated on
    /// the Henry ratio crossing one.
    pub fn gas_appearance_time(&self) -> Option<f64> {
        let h = &self.history;
        (1..h.time.len()).find_map(|k| {
            let (r0, r1) = (h.inflow_henry_ratio[k - 1], h.inflow_henry_ratio[k]);
            (r0 <= 1.0 && r1 > 1.0).then(|| {
                h.time[k - 1] + (1.0 - r0) / (r1 - r0) * (h.time[k] - h.time[k - 1])
            })
        })
    }
}

/// Outcome of one accepted implicit step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: FlowState,
    pub iterations: usize,
    pub residual_norm: f64,
}

impl FlowModel {
    /// One implicit Euler step of length `dt_years` ending at `t_new_years`.
    ///
    /// Each fixed-point sweep freezes mobilities, upwind directions and the
    /// diffusion coefficient at the current iterate, solves the resulting
    /// block-tridiagonal correction problem and applies the (relaxed) update.
    pub fn step_implicit_euler(
        &self,
        prev: &FlowState,
        dt_years: f64,
        t_new_years: f64,
    ) -> Result<StepResult> {
        if !(dt_years > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        let sp = &self.config.solver;
        let dt = dt_years * YEAR;
        let mut state = prev.clone();
        let mut norm0 = f64::NAN;
        let mut last_norm = f64::INFINITY;
        for it in 0..=sp.max_iterations {
            let (res, mat) = self.assemble(&state, prev, dt, t_new_years, true)?;
            let norm = self.scaled_residual_norm(&res, dt);
            if it == 0 {
                norm0 = norm;
            }
            if norm <= sp.abs_tol || (it > 0 && norm <= sp.rel_tol * norm0 && norm <= 1e3 * sp.abs_tol) {
                return Ok(StepResult {
                    state,
                    iterations: it,
                    residual_norm: norm,
                });
            }
            if it == sp.max_iterations || !norm.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual_norm: norm,
                });
            }
            let mat = mat.expect("matrix requested");
            let rhs: Vec<[f64; 2]> = res.iter().map(|r| [-r[0], -r[1]]).collect();
            let delta = mat.solve(&rhs).ok_or(Error::NonConvergence {
                iterations: it,
                residual_norm: norm,
            })?;
            // Full steps while the residual keeps dropping; relaxed once it stalls.
            let omega = if norm < last_norm { 1.0 } else { sp.relaxation };
            last_norm = norm;
            for (i, d) in delta.iter().enumerate() {
                state.liquid_pressure[i] += omega * d[0];
                state.dissolved_hydrogen[i] = (state.dissolved_hydrogen[i] + omega * d[1]).max(0.0);
            }
        }
        unreachable!()
    }

    pub fn simulate(&self) -> Result<SimulationOutput> {
        let cfg = &self.config;
        let sp = &cfg.solver;
        let bnd = &cfg.boundary;
        let n = self.n_cells();

        let mut targets: Vec<f64> = cfg
            .snapshot_times
            .iter()
            .copied()
            .chain([bnd.t_inj, bnd.t_final])
            .filter(|&t| t > 0.0)
            .collect();
        targets.sort_by(f64::total_cmp);
        targets.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));

        let mut state = self.initial_state();
        let mut t = 0.0_f64;
        let mut dt = sp.dt_initial.clamp(sp.dt_min, sp.dt_max);
        let mut history = TimeHistory::default();
        let mut diagnostics = SolverDiagnostics {
            min_dt_years: f64::INFINITY,
            ..SolverDiagnostics::default()
        };
        let mut outflow_mass = 0.0;
        let mut snapshots = Vec::new();
        let mut at_injection_stop = None;
        self.record(&state, 0.0, &mut history);
        if cfg.snapshot_times.iter().any(|&s| s == 0.0) {
            snapshots.push(self.snapshot(0.0, &state));
        }

        for &target in &targets {
            while t < target * (1.0 - 1e-12) {
                let remaining = target - t;
                let mut step = dt.min(remaining);
                if remaining - step < 0.05 * step {
                    step = remaining;
                } else if remaining < 2.0 * step {
                    step = 0.5 * remaining;
                }
                let t_new = if step == remaining { target } else { t + step };
                match self.step_implicit_euler(&state, step, t_new) {
                    Ok(res) => {
                        diagnostics.accepted_steps += 1;
                        diagnostics.fixed_point_iterations += res.iterations;
                        diagnostics.min_dt_years = diagnostics.min_dt_years.min(step);
                        state = res.state;
                        t = t_new;
                        let fluxes = self.face_fluxes(&state, t);
                        outflow_mass += fluxes[n].hydrogen * step * YEAR;
                        self.record(&state, t, &mut history);
                        if res.iterations <= sp.growth_iterations && step >= 0.99 * dt {
                            dt = (dt * sp.dt_growth).min(sp.dt_max);
                        }
                    }
                    Err(err @ (Error::NonConvergence { .. } | Error::NonFiniteResidual { .. })) => {
                        diagnostics.rejected_steps += 1;
                        if step <= sp.dt_min * (1.0 + 1e-9) {
                            return Err(Error::TimeStepUnderflow {
                                time_years: t,
                                source: Box::new(err),
                            });
                        }
                        debug!("step of {step:.3e} yr at t = {t:.6e} rejected: {err}");
                        dt = (0.5 * step).max(sp.dt_min);
                    }
                    Err(other) => return Err(other),
                }
            }
            if (target - bnd.t_inj).abs() <= 1e-9 * target.max(1.0) {
                at_injection_stop = Some(state.clone());
            }
            if cfg
                .snapshot_times
                .iter()
                .any(|&s| (s - target).abs() <= 1e-9 * target.max(1.0))
            {
                snapshots.push(self.snapshot(target, &state));
            }
        }

        let injected = bnd.q_h * bnd.t_inj.min(bnd.t_final);
        let in_domain: f64 = self.hydrogen_mass(&state).iter().sum();
        let outflow = outflow_mass;
        let relative_error = if injected > 0.0 {
            (injected - in_domain - outflow).abs() / injected
        } else {
            (in_domain + outflow).abs()
        };
        diagnostics.mass_audit = MassAudit {
            injected,
            in_domain_final: in_domain,
            outflow,
            relative_error,
        };

        let out_grid = quadrature::uniform_grid(0.0, bnd.t_final, cfg.n_output);
        let inflow_saturation = QoITrajectory {
            label: QoiLabel::InflowGasSaturation,
            values: quadrature::interp_many(&history.time, &history.inflow_gas_saturation, &out_grid),
            abscissae: out_grid.clone(),
        };
        let outflow_gas_flux = QoITrajectory {
            label: QoiLabel::OutflowGasFlux,
            values: quadrature::interp_many(&history.time, &history.outflow_gas_flux, &out_grid),
            abscissae: out_grid,
        };
        let spatial_saturation = snapshots
            .iter()
            .map(|s| QoITrajectory {
                label: QoiLabel::SpatialGasSaturation(s.time),
                abscissae: self.mesh.cell_centers.clone(),
                values: s.gas_saturation.clone(),
            })
            .collect();
        Ok(SimulationOutput {
            inflow_saturation,
            outflow_gas_flux,
            spatial_saturation,
            history,
            snapshots,
            state_at_injection_stop: at_injection_stop.unwrap_or_else(|| state.clone()),
            final_state: state,
            diagnostics,
        })
    }

    fn snapshot(&self, time: f64, state: &FlowState) -> Snapshot {
        Snapshot {
            time,
            state: state.clone(),
            gas_saturation: state.gas_saturation(&self.config.fluid),
        }
    }

    fn record(&self, state: &FlowState, t: f64, h: &mut TimeHistory) {
        let fluid = &self.config.fluid;
        let first = state.cells(fluid).next().expect("nonempty mesh");
        let fluxes = self.face_fluxes(state, t);
        let n = self.n_cells();
        h.time.push(t);
        h.inflow_gas_saturation.push(first.s_g);
        h.outflow_gas_flux.push(fluxes[n].hydrogen * YEAR);
        h.inflow_liquid_pressure.push(first.p_l);
        h.inflow_gas_pressure.push(first.p_g);
        h.inflow_henry_ratio
            .push(first.rho_h / (fluid.henry_density_coefficient() * first.p_l));
    }
}

/// Runs the forward model on the given material fields.
pub fn simulate(fields: MaterialFields, config: FlowConfig) -> Result<SimulationOutput> {
    FlowModel::new(fields, config)?.simulate()
}
