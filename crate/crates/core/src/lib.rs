//! Approximation of the real Frobenius-norm stability radius and the complex
//! stability radius of linear systems `ẋ = Ax + Bw, z = Cx + Dw` (or their
//! discrete-time counterparts) by hybrid expansion-contraction.
//!
//! The radius is the norm of the smallest perturbation `Δ` making
//! `M(Δ) = A + BΔ(I − DΔ)⁻¹C` unstable. The solver keeps `Δ = εUVᴴ` in
//! factored form. It alternates between pushing the extremal eigenvalue of
//! `M(Δ)` outward at fixed ε and shrinking ε back to the stability boundary.
//!
//! ```
//! use stabrad::{solve, Domain, HecConfig, StateSpaceSystem, Status};
//!
//! let sys = StateSpaceSystem::scalar(-1.0, 1.0, 1.0, 0.0, Domain::Continuous);
//! let res = solve::<f64>(&sys, &HecConfig::default()).unwrap();
//! assert_eq!(res.status, Status::ConvergedToTolerance);
//! assert!((res.eps_final - 1.0).abs() < 2e-12);
//! ```

pub mod accel;
pub mod config;
pub mod contraction;
mod error;
pub mod eval;
pub mod hec;
pub mod linalg;
pub mod oracle;
pub mod perturbation;
pub mod sample;
pub mod svsa;
pub mod system;
pub mod upperbound;

pub use config::{HecConfig, Mode};
pub use contraction::{contract, g_uv_prime, Bracket, ContractionCode};
pub use error::{Error, Result};
pub use eval::{g_uv, Evaluator, SolveStats};
pub use hec::{convergence_check, hec_solve, solve, HecResult, Phase, PhaseRecord, Status};
pub use linalg::{
    extremal_eigentriple, leading_eigentriples, rp_normalize, Domain, EigConfig, EigMethod,
    Eigentriple, Extremal, LinearOperator, TiePolicy, C64,
};
pub use perturbation::{fro_norm_factored, Field, Perturbation};
pub use svsa::{complex_expand, svsa_expand, uv_update, ExpansionCode};
pub use system::{perturbed_operator, smw_factors, transfer_eval, StateMatrix, StateSpaceSystem};
pub use upperbound::{find_destabilizing, initial_perturbation, starting_points, upper_bound_from};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/systems.md")]
    mod systems {}
    #[doc = include_str!("../../../book/src/perturbations.md")]
    mod perturbations {}
    #[doc = include_str!("../../../book/src/expansion.md")]
    mod expansion {}
    #[doc = include_str!("../../../book/src/contraction.md")]
    mod contraction {}
    #[doc = include_str!("../../../book/src/hec.md")]
    mod hec {}
    #[doc = include_str!("../../../book/src/discrete.md")]
    mod discrete {}
    #[doc = include_str!("../../../book/src/acceleration.md")]
    mod acceleration {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
}
