//! Finite-volume simulator for a chemotaxis-Stokes system with degenerate
//! porous-medium diffusion and tensor-valued (rotational) sensitivity:
//!
//! ```text
//! n_t + u.grad n = div(D_eps(n) grad n) - div(n S_eps(x, n, c) grad c)
//! c_t + u.grad c = Laplace c - n c
//! u_t + grad P   = Laplace u + n grad phi,   div u = 0
//! ```
//!
//! on an axis-aligned box with no-flux walls for `n` and `c` and no-slip
//! walls for `u`. Alongside the solver, [`diagnostics`] evaluates the
//! entropy-energy functional, `L^p` norms and space-time dissipation
//! integrals that control the solution.

pub mod cell_dynamics;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod regularization;
pub mod stokes;
pub mod timestepper;

pub use error::{Error, Result};
pub use grid::{DomainConfig, Grid, ScalarField, SimState, VectorField};
pub use harness::config::SimConfig;
