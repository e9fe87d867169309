//! One-dimensional two-phase (liquid/gas), two-component (water/hydrogen) flow.

mod blocktri;
pub mod constitutive;
pub mod params;
pub mod residual;
pub mod solver;
pub mod state;

pub use constitutive::{capillary_pressure, effective_saturation, rel_perm};
pub use params::{BoundarySpec, FlowConfig, FluidParams, Mesh1D, SolverParams, YEAR};
pub use residual::{FaceFlux, FlowModel};
pub use solver::{
    simulate, MassAudit, QoITrajectory, QoiLabel, SimulationOutput, SolverDiagnostics, StepResult,
    TimeHistory,
};
pub use state::{CellState, FlowState};
