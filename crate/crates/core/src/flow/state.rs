use super::constitutive::{effective_saturation_derivative, effective_saturation_from_pc, rel_perm};
use super::params::FluidParams;

/// Primary unknowns per cell: liquid pressure and dissolved hydrogen density.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    /// p_l [Pa].
    pub liquid_pressure: Vec<f64>,
    /// ρ_l^h [kg·m⁻³].
    pub dissolved_hydrogen: Vec<f64>,
}

impl FlowState {
    pub fn uniform(n_cells: usize, p: f64, rho_h: f64) -> Self {
        FlowState {
            liquid_pressure: vec![p; n_cells],
            dissolved_hydrogen: vec![rho_h; n_cells],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.liquid_pressure.len()
    }

    pub fn gas_saturation(&self, fluid: &FluidParams) -> Vec<f64> {
        self.cells(fluid).map(|c| c.s_g).collect()
    }

    pub fn gas_pressure(&self, fluid: &FluidParams) -> Vec<f64> {
        self.cells(fluid).map(|c| c.p_g).collect()
    }

    pub fn cells<'a>(&'a self, fluid: &'a FluidParams) -> impl Iterator<Item = CellState> + 'a {
        self.liquid_pressure
            .iter()
            .zip(&self.dissolved_hydrogen)
            .map(move |(&p, &u)| CellState::new(p, u, fluid))
    }
}

/// Secondary variables of one cell.
///
/// Gas is present exactly where the dissolved density exceeds the Henry limit at
/// the local liquid pressure; there `p_g = ρ_l^h / (M H)` and `s_l` follows from
/// inverting the capillary law at `p_c = p_g − p_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub p_l: f64,
    pub rho_h: f64,
    pub p_c: f64,
    pub p_g: f64,
    pub s_l: f64,
    pub s_g: f64,
    pub s_le: f64,
    pub k_rl: f64,
    pub k_rg: f64,
    /// d s_l / d p_l
    pub ds_dp: f64,
    /// d s_l / d ρ_l^h
    pub ds_du: f64,
    /// d p_g / d p_l
    pub dpg_dp: f64,
    /// d p_g / d ρ_l^h
    pub dpg_du: f64,
    /// Water mass fraction of the liquid.
    pub x_w: f64,
}

impl CellState {
    pub fn new(p_l: f64, rho_h: f64, fluid: &FluidParams) -> Self {
        let mh = fluid.henry_density_coefficient();
        let excess = rho_h / mh - p_l;
        let two_phase = excess > 0.0;
        let p_c = excess.max(0.0);
        let s_le = effective_saturation_from_pc(p_c, fluid.vg_pr, fluid.vg_n);
        let span = 1.0 - fluid.s_lr - fluid.s_gr;
        let s_l = fluid.s_lr + span * s_le;
        let dsl_dpc = span * effective_saturation_derivative(p_c, fluid.vg_pr, fluid.vg_n);
        let (k_rl, k_rg) = rel_perm(s_le, fluid.vg_n);
        let (ds_dp, ds_du, dpg_dp, dpg_du) = if two_phase {
            (-dsl_dpc, dsl_dpc / mh, 0.0, 1.0 / mh)
        } else {
            (0.0, 0.0, 1.0, 0.0)
        };
        CellState {
            p_l,
            rho_h,
            p_c,
            p_g: p_l + p_c,
            s_l,
            s_g: 1.0 - s_l,
            s_le,
            k_rl,
            k_rg,
            ds_dp,
            ds_du,
            dpg_dp,
            dpg_du,
            x_w: fluid.rho_w / (fluid.rho_w + rho_h.max(0.0)),
        }
    }

    /// m(s_l) = s_l + c s_g.
    pub fn storage_factor(&self, gas_ratio: f64) -> f64 {
        self.s_l + gas_ratio * self.s_g
    }
}
