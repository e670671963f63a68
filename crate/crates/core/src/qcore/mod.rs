//! Dense complex linear algebra and density-matrix primitives.
//!
//! Subsystems are ordered control-major: `C ⊗ A ⊗ A' ⊗ B` for the
//! path-superposition protocols and `C ⊗ S` for the switch.

mod density;
mod matrix;

pub use density::{
    apply_kraus, fidelity_to_ket, fidelity_to_pure, partial_trace, project_and_normalize,
    DensityMatrix, Projection,
};
pub(crate) use density::{completeness_deviation, kraus_sum, lift_operator, partial_trace_matrix};
pub use matrix::{ops, tensor, CMatrix, C64};

/// Absolute tolerance for state invariants (Hermiticity, trace, PSD floor).
pub const STATE_TOL: f64 = 1e-10;

/// Absolute tolerance for conservation identities such as Kraus completeness.
pub const CONSERVATION_TOL: f64 = 1e-12;
