//! Parameters, phase-space types and the polynomial vector fields of the
//! soliton ODE in its three coordinate systems.
//!
//! * `(X, Y, Z, W)(t)`: the projectivized variables; the germ of every
//!   smoothly closing soliton leaves the stationary point `(0, 0, 1, 0)`.
//! * `(X, Ỹ, Z̃, W)(t̃)` with `Ỹ = Y²`, `Z̃ = 1 - Z`, `t̃ = -t`: the same flow
//!   viewed backwards, with the germ's end point moved to the origin.
//! * `(X, Ỹ)(t)` with `Ỹ = Y²/X`: the planar reduction valid for Kähler
//!   solitons on the canonical bundle.

mod linear;
mod params;
mod state;
mod systems;

pub use linear::{b_bound_constants, fundamental_matrix, linear_part, nonlinearity_b, Mat4, Vec4};
pub use linear::{mat_mul, mat_vec};
pub use params::{make_params, FirstIntegralContext, SolitonParams};
pub use state::{KahlerState, PhaseState, TildeState};
pub use systems::{
    first_integral_residual, reduced_first_integral_residual, rhs_core, rhs_kahler, rhs_nonlin1,
    rhs_nonlin2, PhaseTangent,
};
