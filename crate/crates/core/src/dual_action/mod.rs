//! Clarke dual action for `u̇ = J∇H(t, u)`, `u(0) = u(T)`.
//!
//! A mean-zero `v` minimising
//! `χ_ε(v) = ∫ ½<J v̇, v> + H_ε*(t, v̇) dt`, with `H_ε = H + G(εu)`, yields
//! the periodic orbit `u = ∇H_ε*(t, v̇)`. The discrete functional lives on
//! a uniform grid and is minimised by preconditioned L-BFGS; the orbit is
//! then certified by the residual `max_k |J u̇ + ∇H(t_k, u_k)|`.

mod hamiltonian;
mod hypotheses;
mod problem;
pub mod registry;

pub use hamiltonian::{
    constant_profile, perturbed_hamiltonian, zero_vector_profile, ClosureField, Forced, GField, GrowthCertificate,
    Hamiltonian, HamiltonianField, Perturbed, ScalarProfile, VectorProfile, PERTURBATION_R,
};
pub use hypotheses::{check_existence_hypotheses, HypothesisCheck, HypothesisOptions, HypothesisReport, Witness};
pub use problem::{
    dual_modular, residual, DualActionProblem, DualFunctional, EpsilonSchedule, HypothesisPolicy, OrbitResult,
    OrbitSummary, SolveReport,
};
pub use registry::{HamiltonianSpec, ProblemSpec};
