//! Cell-centered finite-volume residual of the water and hydrogen balances and the
//! lagged-coefficient iteration matrix used by the fixed-point solver.

use super::blocktri::{Block, BlockTridiagonal};
use super::params::{FlowConfig, Mesh1D};
use super::state::{CellState, FlowState};
use crate::error::{Error, Result};
use crate::random_input::MaterialFields;

/// Component mass fluxes across one face, positive in +x [kg·m⁻²·s⁻¹].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaceFlux {
    pub water: f64,
    pub hydrogen: f64,
    /// Hydrogen carried by the gas phase alone.
    pub hydrogen_gas: f64,
    /// Darcy velocities of the two phases [m·s⁻¹].
    pub v_liquid: f64,
    pub v_gas: f64,
}

/// Flux together with its lagged-coefficient derivatives with respect to the
/// (p_l, ρ_l^h) of the left and right cells. Rows: (water, hydrogen).
#[derive(Debug, Clone, Copy)]
struct FluxWithDerivatives {
    flux: FaceFlux,
    d_left: Block,
    d_right: Block,
}

/// Everything fixed during a simulation: mesh, material fields, face geometry.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub mesh: Mesh1D,
    pub fields: MaterialFields,
    pub config: FlowConfig,
    /// Distance between neighbouring centers (last entry: center to right boundary).
    face_distance: Vec<f64>,
    /// Harmonic-mean permeability on interior faces; cell value on the right boundary.
    face_permeability: Vec<f64>,
    /// Arithmetic-mean porosity on interior faces; cell value on the right boundary.
    face_porosity: Vec<f64>,
}

impl FlowModel {
    pub fn new(fields: MaterialFields, config: FlowConfig) -> Result<Self> {
        config.validate()?;
        fields.validate()?;
        if fields.n_cells() != config.n_cells {
            return Err(Error::DimensionMismatch {
                expected: config.n_cells,
                actual: fields.n_cells(),
            });
        }
        let mesh = Mesh1D::uniform(config.boundary.length, config.n_cells)?;
        let n = mesh.n_cells();
        let mut face_distance = Vec::with_capacity(n);
        let mut face_permeability = Vec::with_capacity(n);
        let mut face_porosity = Vec::with_capacity(n);
        for i in 0..n {
            if i + 1 < n {
                face_distance.push(mesh.cell_centers[i + 1] - mesh.cell_centers[i]);
                let (ka, kb) = (fields.permeability[i], fields.permeability[i + 1]);
                face_permeability.push(2.0 * ka * kb / (ka + kb));
                face_porosity.push(0.5 * (fields.porosity[i] + fields.porosity[i + 1]));
            } else {
                face_distance.push(mesh.length() - mesh.cell_centers[i]);
                face_permeability.push(fields.permeability[i]);
                face_porosity.push(fields.porosity[i]);
            }
        }
        Ok(FlowModel {
            mesh,
            fields,
            config,
            face_distance,
            face_permeability,
            face_porosity,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    pub fn initial_state(&self) -> FlowState {
        FlowState::uniform(self.n_cells(), self.config.boundary.p_init, 0.0)
    }

    /// Right-boundary Dirichlet state.
    pub fn boundary_cell(&self) -> CellState {
        CellState::new(self.config.boundary.p_init, 0.0, &self.config.fluid)
    }

    /// Hydrogen mass per unit cross-section in each cell [kg·m⁻²].
    pub fn hydrogen_mass(&self, state: &FlowState) -> Vec<f64> {
        let c = self.config.fluid.gas_ratio;
        state
            .cells(&self.config.fluid)
            .enumerate()
            .map(|(i, cs)| {
                self.fields.porosity[i]
                    * self.mesh.cell_widths[i]
                    * cs.storage_factor(c)
                    * cs.rho_h
            })
            .collect()
    }

    /// Water mass per unit cross-section in each cell [kg·m⁻²].
    pub fn water_mass(&self, state: &FlowState) -> Vec<f64> {
        let rho_w = self.config.fluid.rho_w;
        state
            .cells(&self.config.fluid)
            .enumerate()
            .map(|(i, cs)| self.fields.porosity[i] * self.mesh.cell_widths[i] * rho_w * cs.s_l)
            .collect()
    }

    fn face_flux(&self, face: usize, l: &CellState, r: &CellState) -> FluxWithDerivatives {
        let f = &self.config.fluid;
        let g = self.config.solver.gravity;
        let d = self.face_distance[face];
        let k = self.face_permeability[face];
        let c = f.gas_ratio;

        let rho_h_face = 0.5 * (l.rho_h + r.rho_h).max(0.0);
        let rho_l_face = f.rho_w + rho_h_face;
        let rho_g_face = c * rho_h_face;

        // liquid Darcy velocity, upwinded mobility
        let drive_l = (r.p_l - l.p_l) / d - rho_l_face * g;
        let left_up_l = drive_l <= 0.0;
        let (krl, u_up_l) = if left_up_l {
            (l.k_rl, l.rho_h)
        } else {
            (r.k_rl, r.rho_h)
        };
        let mob_l = k * krl / f.mu_l;
        let v_l = -mob_l * drive_l;

        // gas Darcy velocity
        let drive_g = (r.p_g - l.p_g) / d - rho_g_face * g;
        let left_up_g = drive_g <= 0.0;
        let (krg, u_up_g) = if left_up_g {
            (l.k_rg, l.rho_h)
        } else {
            (r.k_rg, r.rho_h)
        };
        let mob_g = k * krg / f.mu_g;
        let v_g = -mob_g * drive_g;

        // Fickian flux of dissolved hydrogen, carried with opposite sign by water
        let s_face = 0.5 * (l.s_l + r.s_l);
        let xw_face = 0.5 * (l.x_w + r.x_w);
        let diff = self.face_porosity[face] * s_face * xw_face * f.diffusion / d;
        let j_d = diff * (r.rho_h - l.rho_h);

        let water = f.rho_w * v_l + j_d;
        let hydrogen_gas = c * u_up_g * v_g;
        let hydrogen = u_up_l * v_l + hydrogen_gas - j_d;

        // derivatives with mobilities, upwind directions and diffusivity frozen
        let dvl_dpl = mob_l / d; // d v_l / d p_l(left)
        let dvl_dpr = -mob_l / d;
        let dvg_dpgl = mob_g / d;
        let dvg_dpgr = -mob_g / d;

        let mut d_left = [[0.0; 2]; 2];
        let mut d_right = [[0.0; 2]; 2];
        // water row
        d_left[0][0] = f.rho_w * dvl_dpl;
        d_right[0][0] = f.rho_w * dvl_dpr;
        d_left[0][1] = -diff;
        d_right[0][1] = diff;
        // hydrogen row: liquid advection
        d_left[1][0] += u_up_l * dvl_dpl;
        d_right[1][0] += u_up_l * dvl_dpr;
        if left_up_l {
            d_left[1][1] += v_l;
        } else {
            d_right[1][1] += v_l;
        }
        // gas advection through p_g(p_l, ρ_l^h)
        let gl = c * u_up_g * dvg_dpgl;
        let gr = c * u_up_g * dvg_dpgr;
        d_left[1][0] += gl * l.dpg_dp;
        d_left[1][1] += gl * l.dpg_du;
        d_right[1][0] += gr * r.dpg_dp;
        d_right[1][1] += gr * r.dpg_du;
        if left_up_g {
            d_left[1][1] += c * v_g;
        } else {
            d_right[1][1] += c * v_g;
        }
        // diffusion
        d_left[1][1] += diff;
        d_right[1][1] -= diff;

        FluxWithDerivatives {
            flux: FaceFlux {
                water,
                hydrogen,
                hydrogen_gas,
                v_liquid: v_l,
                v_gas: v_g,
            },
            d_left,
            d_right,
        }
    }

    /// Fluxes on all faces `0..=n`; face 0 is the injection boundary.
    pub fn face_fluxes(&self, state: &FlowState, t_years: f64) -> Vec<FaceFlux> {
        let cells: Vec<CellState> = state.cells(&self.config.fluid).collect();
        let n = cells.len();
        let mut out = Vec::with_capacity(n + 1);
        out.push(FaceFlux {
            hydrogen: self.config.boundary.injection_flux(t_years),
            ..FaceFlux::default()
        });
        let bc = self.boundary_cell();
        for i in 0..n {
            let right = if i + 1 < n { &cells[i + 1] } else { &bc };
            out.push(self.face_flux(i, &cells[i], right).flux);
        }
        out
    }

    /// Per-cell residuals `[water, hydrogen]` of one implicit Euler step ending at
    /// `t_new_years`, in kg·m⁻²·s⁻¹.
    pub fn assemble_residual(
        &self,
        state: &FlowState,
        prev: &FlowState,
        dt_seconds: f64,
        t_new_years: f64,
    ) -> Result<Vec<[f64; 2]>> {
        Ok(self.assemble(state, prev, dt_seconds, t_new_years, false)?.0)
    }

    pub(crate) fn assemble(
        &self,
        state: &FlowState,
        prev: &FlowState,
        dt: f64,
        t_new_years: f64,
        with_matrix: bool,
    ) -> Result<(Vec<[f64; 2]>, Option<BlockTridiagonal>)> {
        let n = self.n_cells();
        if state.n_cells() != n || prev.n_cells() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: state.n_cells(),
            });
        }
        let fluid = &self.config.fluid;
        let c = fluid.gas_ratio;
        let cells: Vec<CellState> = state.cells(fluid).collect();
        let old: Vec<CellState> = prev.cells(fluid).collect();
        let mut res = vec![[0.0; 2]; n];
        let mut mat = with_matrix.then(|| BlockTridiagonal::zeros(n));

        for i in 0..n {
            let vol = self.fields.porosity[i] * self.mesh.cell_widths[i];
            let (a, o) = (&cells[i], &old[i]);
            res[i][0] = vol * fluid.rho_w * (a.s_l - o.s_l) / dt
                - self.config.solver.source_water * self.mesh.cell_widths[i];
            res[i][1] = vol * (a.storage_factor(c) * a.rho_h - o.storage_factor(c) * o.rho_h) / dt
                - self.config.solver.source_hydrogen * self.mesh.cell_widths[i];
            if let Some(m) = mat.as_mut() {
                // m(s_l) = c − (c − 1) s_l
                let dm_ds = 1.0 - c;
                m.diag[i][0][0] += vol * fluid.rho_w * a.ds_dp / dt;
                m.diag[i][0][1] += vol * fluid.rho_w * a.ds_du / dt;
                m.diag[i][1][0] += vol * a.rho_h * dm_ds * a.ds_dp / dt;
                m.diag[i][1][1] += vol * (a.storage_factor(c) + a.rho_h * dm_ds * a.ds_du) / dt;
            }
        }

        // injection face: prescribed total fluxes, no water
        res[0][1] -= self.config.boundary.injection_flux(t_new_years);

        let bc = self.boundary_cell();
        for i in 0..n {
            let right = if i + 1 < n { &cells[i + 1] } else { &bc };
            let fw = self.face_flux(i, &cells[i], right);
            res[i][0] += fw.flux.water;
            res[i][1] += fw.flux.hydrogen;
            if i + 1 < n {
                res[i + 1][0] -= fw.flux.water;
                res[i + 1][1] -= fw.flux.hydrogen;
            }
            if let Some(m) = mat.as_mut() {
                for r in 0..2 {
                    for col in 0..2 {
                        m.diag[i][r][col] += fw.d_left[r][col];
                        if i + 1 < n {
                            m.upper[i][r][col] += fw.d_right[r][col];
                            m.lower[i + 1][r][col] -= fw.d_left[r][col];
                            m.diag[i + 1][r][col] -= fw.d_right[r][col];
                        }
                    }
                }
            }
        }

        if let Some(cell) = res.iter().position(|r| !(r[0].is_finite() && r[1].is_finite())) {
            return Err(Error::NonFiniteResidual { cell });
        }
        Ok((res, mat))
    }

    /// Residual scaled per cell to dimensionless increments: water by the pore
    /// water mass, hydrogen by the pore hydrogen mass at the Henry limit of `p_init`.
    pub fn scaled_residual_norm(&self, res: &[[f64; 2]], dt: f64) -> f64 {
        let f = &self.config.fluid;
        let u_ref = f.henry_density_coefficient() * self.config.boundary.p_init;
        res.iter()
            .enumerate()
            .map(|(i, r)| {
                let vol = self.fields.porosity[i] * self.mesh.cell_widths[i];
                let w = (r[0] * dt / (vol * f.rho_w)).abs();
                let h = (r[1] * dt / (vol * u_ref)).abs();
                w.max(h)
            })
            .fold(0.0, f64::max)
    }
}
