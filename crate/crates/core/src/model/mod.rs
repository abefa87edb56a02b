//! Constitutive closures and the scalar helpers used by the diagnostics.

mod assumptions;
mod conductivity;
mod scalar;
mod stress;
mod tensor;

pub use assumptions::{
    verify_assumptions, Assumption, AssumptionCheck, AssumptionReport, Witness, MARGIN_TOLERANCE,
};
pub use conductivity::{ConductivityKind, ConductivityModel};
pub(crate) use scalar::h_alpha_unchecked;
pub use scalar::{
    compute_mu, entropy_of, h_alpha, h_alpha_quadrature, integrate_adaptive, truncate,
    TruncationParams,
};
pub use stress::{StressKind, StressModel, StressTable, ThetaCoupling};
pub use tensor::Sym2;

/// Stress and conductivity closures of one simulation.
#[derive(Debug, Clone)]
pub struct Models {
    pub stress: StressModel,
    pub kappa: ConductivityModel,
}

impl Models {
    pub fn new(stress: StressModel, kappa: ConductivityModel) -> Self {
        Self { stress, kappa }
    }
}
