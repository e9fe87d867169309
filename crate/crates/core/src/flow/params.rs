use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds per year (365 days).
pub const YEAR: f64 = 3.1536e7;

/// Universal gas constant [J·mol⁻¹·K⁻¹].
pub const GAS_CONSTANT: f64 = 8.314_462_618;

/// Fluid and constitutive parameters of the liquid/gas, water/hydrogen system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidParams {
    /// Liquid viscosity μ_l [Pa·s].
    pub mu_l: f64,
    /// Gas viscosity μ_g [Pa·s].
    pub mu_g: f64,
    /// Henry constant of hydrogen H^h [mol·Pa⁻¹·m⁻³].
    pub henry: f64,
    /// Molar mass of hydrogen M^h [kg·mol⁻¹].
    pub molar_mass: f64,
    /// Water density ρ_l^w [kg·m⁻³].
    pub rho_w: f64,
    /// Molecular diffusion of dissolved hydrogen D_l^h [m²·s⁻¹].
    pub diffusion: f64,
    /// van Genuchten exponent n.
    pub vg_n: f64,
    /// van Genuchten pressure scale p_r [Pa].
    pub vg_pr: f64,
    /// Residual liquid saturation.
    pub s_lr: f64,
    /// Residual gas saturation.
    pub s_gr: f64,
    /// Temperature [K]; only used to check `gas_ratio`.
    pub temperature: f64,
    /// ρ_g^h / ρ_l^h = 1/(H R T).
    pub gas_ratio: f64,
}

impl Default for FluidParams {
    fn default() -> Self {
        FluidParams {
            mu_l: 1e-3,
            mu_g: 9e-6,
            henry: 7.65e-6,
            molar_mass: 2e-3,
            rho_w: 1e3,
            diffusion: 3e-9,
            vg_n: 1.54,
            vg_pr: 2e6,
            s_lr: 0.4,
            s_gr: 0.0,
            temperature: 299.4,
            gas_ratio: 52.51,
        }
    }
}

impl FluidParams {
    /// υ = 1 − 1/n.
    pub fn upsilon(&self) -> f64 {
        1.0 - 1.0 / self.vg_n
    }

    /// Dissolved density per unit gas pressure, M^h H^h [kg·m⁻³·Pa⁻¹].
    pub fn henry_density_coefficient(&self) -> f64 {
        self.molar_mass * self.henry
    }

    pub fn gas_ratio_from_temperature(&self) -> f64 {
        1.0 / (self.henry * GAS_CONSTANT * self.temperature)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu_l", self.mu_l),
            ("mu_g", self.mu_g),
            ("henry", self.henry),
            ("molar_mass", self.molar_mass),
            ("rho_w", self.rho_w),
            ("diffusion", self.diffusion),
            ("vg_pr", self.vg_pr),
            ("temperature", self.temperature),
            ("gas_ratio", self.gas_ratio),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.vg_n > 1.0) {
            return Err(Error::Config(format!("vg_n must exceed 1, got {}", self.vg_n)));
        }
        if !(self.s_lr >= 0.0 && self.s_gr >= 0.0 && self.s_lr + self.s_gr < 1.0) {
            return Err(Error::Config("residual saturations must satisfy s_lr + s_gr < 1".into()));
        }
        let derived = self.gas_ratio_from_temperature();
        if ((derived - self.gas_ratio) / self.gas_ratio).abs() > 5e-3 {
            return Err(Error::Config(format!(
                "gas_ratio {} inconsistent with 1/(H R T) = {derived:.4}",
                self.gas_ratio
            )));
        }
        Ok(())
    }
}

/// Boundary and benchmark setup. Times are in years at the interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySpec {
    /// Domain length L [m].
    pub length: f64,
    /// Hydrogen mass flux injected at x = 0 [kg·m⁻²·yr⁻¹].
    pub q_h: f64,
    /// Initial and right-boundary liquid pressure [Pa].
    pub p_init: f64,
    /// Injection stop time [yr].
    pub t_inj: f64,
    /// Final time [yr].
    pub t_final: f64,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            length: 200.0,
            q_h: 5.57e-6,
            p_init: 1e6,
            t_inj: 5e5,
            t_final: 1e6,
        }
    }
}

impl BoundarySpec {
    /// Injected hydrogen flux [kg·m⁻²·s⁻¹] at time `t_years`.
    pub fn injection_flux(&self, t_years: f64) -> f64 {
        if t_years <= self.t_inj * (1.0 + 1e-12) {
            self.q_h / YEAR
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.p_init > 0.0 && self.t_final > 0.0) {
            return Err(Error::Config("length, p_init and t_final must be positive".into()));
        }
        if !(self.q_h >= 0.0) {
            return Err(Error::Config("q_h must be nonnegative".into()));
        }
        if !(self.t_inj >= 0.0 && self.t_inj <= self.t_final) {
            return Err(Error::Config("need 0 <= t_inj <= t_final".into()));
        }
        Ok(())
    }
}

/// Fixed-point and time-stepping controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iterations: usize,
    pub relaxation: f64,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_growth: f64,
    pub growth_iterations: usize,
    /// Gravity component along x [m·s⁻²].
    pub gravity: f64,
    /// Volumetric water source [kg·m⁻³·s⁻¹].
    pub source_water: f64,
    /// Volumetric hydrogen source [kg·m⁻³·s⁻¹].
    pub source_hydrogen: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_iterations: 50,
            relaxation: 0.7,
            dt_initial: 1.0,
            dt_min: 1e-2,
            dt_max: 5e3,
            dt_growth: 1.25,
            growth_iterations: 10,
            gravity: 0.0,
            source_water: 0.0,
            source_hydrogen: 0.0,
        }
    }
}

/// Everything a forward simulation needs besides the material fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub fluid: FluidParams,
    pub boundary: BoundarySpec,
    pub solver: SolverParams,
    pub n_cells: usize,
    /// Number of uniformly spaced output times on [0, T_f].
    pub n_output: usize,
    /// Times [yr] at which spatial saturation snapshots are taken.
    pub snapshot_times: Vec<f64>,
    /// Nominal porosity φ̄.
    pub phi_bar: f64,
    /// Nominal permeability K̄ [m²].
    pub k_bar: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            fluid: FluidParams::default(),
            boundary: BoundarySpec::default(),
            solver: SolverParams::default(),
            n_cells: 50,
            n_output: 128,
            snapshot_times: vec![300_091.0],
            phi_bar: 0.15,
            k_bar: 5e-20,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        self.fluid.validate()?;
        self.boundary.validate()?;
        let s = &self.solver;
        if !(s.dt_min > 0.0 && s.dt_min <= s.dt_max && s.dt_initial > 0.0) {
            return Err(Error::Config("need 0 < dt_min <= dt_max and dt_initial > 0".into()));
        }
        if !(s.relaxation > 0.0 && s.relaxation <= 1.0) {
            return Err(Error::Config("relaxation must lie in (0, 1]".into()));
        }
        if s.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if self.n_cells < 2 || self.n_output < 2 {
            return Err(Error::Config("need at least 2 cells and 2 output points".into()));
        }
        if !(self.phi_bar > 0.0 && self.phi_bar < 1.0 && self.k_bar > 0.0) {
            return Err(Error::Config("nominal porosity/permeability out of range".into()));
        }
        if self
            .snapshot_times
            .iter()
            .any(|&t| !(t >= 0.0 && t <= self.boundary.t_final))
        {
            return Err(Error::Config("snapshot times must lie in [0, t_final]".into()));
        }
        Ok(())
    }
}

/// Uniform cell-centered mesh on [0, L].
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    pub cell_centers: Vec<f64>,
    pub cell_widths: Vec<f64>,
    pub face_positions: Vec<f64>,
}

impl Mesh1D {
    pub fn uniform(length: f64, n_cells: usize) -> Result<Self> {
        if n_cells == 0 || !(length > 0.0) {
            return Err(Error::invalid("mesh needs positive length and at least one cell"));
        }
        let h = length / n_cells as f64;
        let face_positions: Vec<f64> = (0..=n_cells)
            .map(|i| if i == n_cells { length } else { h * i as f64 })
            .collect();
        let cell_centers = face_positions.windows(2).map(|f| 0.5 * (f[0] + f[1])).collect();
        let cell_widths = face_positions.windows(2).map(|f| f[1] - f[0]).collect();
        Ok(Mesh1D {
            cell_centers,
            cell_widths,
            face_positions,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cell_centers.len()
    }

    pub fn length(&self) -> f64 {
        self.face_positions[self.face_positions.len() - 1] - self.face_positions[0]
    }
}
