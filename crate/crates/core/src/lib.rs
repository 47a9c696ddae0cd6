//! Clarke dual action for periodic solutions of Hamiltonian systems whose
//! growth is controlled by an anisotropic G-function.
//!
//! The crate is organised around the objects the method needs:
//!
//! - [`gfunc`]: G-functions, Legendre–Fenchel conjugates and the structural
//!   tests (Δ₂, symplectic, semi-symplectic, growth indices).
//! - [`orlicz`]: uniformly sampled periodic trajectories, modulars,
//!   Luxemburg norms and the inequality verifiers built on them.
//! - [`dual_action`]: Hamiltonians, the discretised dual action, its
//!   gradient, the quasi-Newton minimiser and the hypothesis checker.
//! - [`cg_constant`]: estimation and certification of the optimal constant
//!   `C_G` of the canonical quadratic form.
//! - [`second_order`]: reduction of Φ-Laplacian periodic problems to the
//!   Hamiltonian setting.

pub mod cg_constant;
pub mod dual_action;
mod error;
pub mod gfunc;
pub mod linalg;
pub mod optim;
pub mod orlicz;
pub mod sampling;
pub mod second_order;

pub use error::{Error, Result};
pub use gfunc::GFunction;
pub use orlicz::Trajectory;
