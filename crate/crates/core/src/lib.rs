//! Finite traveling waves of the doubly degenerate filtration equation with
//! strong absorption.
//!
//! The wave profile is recovered from a phase-plane trajectory `Υ(Θ)`
//! that leaves the degenerate origin, followed by a travel-time quadrature
//! `z(Θ)` and its inversion.

pub mod error;
pub mod integrate;
mod interp;
pub mod model;
pub mod phase_plane;
pub mod profile;
pub mod quad;
pub mod verify;

pub use error::{Constraint, Error, Result};
pub use model::{
    classify_regime, critical_curve, lemma3_asymptote, phase_rhs, theorem1_asymptote,
    validate_params, AsymptoteSpec, Balance, End, Law, ModelParams, Regime, SpeedSign, Target,
};
pub use phase_plane::{
    bracket_trajectory, eval_trajectory, solve_regularized_lower, solve_regularized_upper,
    solve_trajectory, BracketOptions, BracketPair, BracketReport, Trajectory, TrajectoryKind,
};
pub use profile::{profile_flux, reconstruct_profile, travel_time, Profile, TravelMap};
pub use verify::{
    energy_phi, fit_asymptote, ode_residual, oracle_fixed_step, run_verification, AsymptoteFit,
    Status, VerificationReport, VerifyOptions,
};
