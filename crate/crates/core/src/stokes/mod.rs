//! Time-dependent Stokes flow `u_t + grad P = Laplace u + n grad phi`,
//! `div u = 0`, `u = 0` on the walls, advanced by an explicit viscous
//! predictor followed by a Chorin pressure projection.

mod poisson;

use std::sync::Arc;

pub use poisson::{pressure_poisson, PoissonMethod, PoissonReport, PoissonSolver, PoissonSolverConfig};

use crate::cell_dynamics::velocity_divergence;
use crate::error::{Error, Result};
use crate::grid::{integrate, Grid, ScalarField, SimState, VectorField};
use crate::regularization::PotentialSpec;

/// Largest stable explicit viscous step, `1 / (2 sum_a h_a^-2)`.
pub fn viscous_dt_limit(grid: &Grid) -> f64 {
    1.0 / (2.0 * grid.inv_h2_sum())
}

/// Buoyancy `n grad phi` on interior faces, `n` averaged from the adjacent cells.
pub fn forcing(n: &ScalarField, phi: &PotentialSpec) -> VectorField {
    let grid = n.grid().clone();
    let mut f = VectorField::zeros(grid.clone());
    if phi.is_constant() {
        return f;
    }
    let nv = n.values();
    for a in 0..grid.dim() {
        let stride = grid.stride(a);
        let comp = f.component_mut(a);
        for (fi, face) in grid.faces(a) {
            if grid.is_boundary_face(a, face) {
                continue;
            }
            let r = grid.index(face);
            let n_face = 0.5 * (nv[r - stride] + nv[r]);
            comp[fi] = n_face * phi.face_gradient(&grid, a, face);
        }
    }
    f
}

/// `u + dt (Laplace u + f)` on interior faces, no-slip ghosts mirrored with a sign flip.
pub fn viscous_step(u: &VectorField, f: &VectorField, dt: f64) -> Result<VectorField> {
    let grid = u.grid().clone();
    f.ensure_same_grid(&grid)?;
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be >= 0, got {dt}")));
    }
    let limit = viscous_dt_limit(&grid);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let mut out = u.clone();
    if dt == 0.0 {
        return Ok(out);
    }
    let dim = grid.dim();
    for a in 0..dim {
        let fd = grid.face_dims(a);
        let fs = grid.face_strides(a);
        let src = u.component(a);
        let force = f.component(a);
        let dst = out.component_mut(a);
        for (fi, face) in grid.faces(a) {
            if face[a] == 0 || face[a] == fd[a] - 1 {
                dst[fi] = 0.0;
                continue;
            }
            let here = src[fi];
            let mut lap = 0.0;
            for b in 0..dim {
                let inv_h2 = 1.0 / (grid.h(b) * grid.h(b));
                let up = if face[b] + 1 < fd[b] { src[fi + fs[b]] } else { -here };
                let dn = if face[b] > 0 { src[fi - fs[b]] } else { -here };
                lap += (up - 2.0 * here + dn) * inv_h2;
            }
            dst[fi] = here + dt * (lap + force[fi]);
        }
    }
    Ok(out)
}

/// Projection and viscous update bound to one grid, reusing the Poisson hierarchy.
#[derive(Clone, Debug)]
pub struct StokesSolver {
    poisson: PoissonSolver,
}

impl StokesSolver {
    pub fn new(grid: Arc<Grid>, cfg: PoissonSolverConfig) -> Result<Self> {
        Ok(Self {
            poisson: PoissonSolver::new(grid, cfg)?,
        })
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    /// `u = u* - dt grad P` with `Laplace P = div u* / dt`.
    pub fn project(
        &self,
        u_star: &VectorField,
        dt: f64,
        guess: Option<&ScalarField>,
    ) -> Result<(VectorField, ScalarField, PoissonReport)> {
        let grid = self.poisson.grid().clone();
        u_star.ensure_same_grid(&grid)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("projection needs dt > 0, got {dt}")));
        }
        for a in 0..grid.dim() {
            let comp = u_star.component(a);
            for (fi, face) in grid.faces(a) {
                if grid.is_boundary_face(a, face) && comp[fi] != 0.0 {
                    return Err(Error::InvalidArgument(
                        "projection input must have zero normal velocity on the walls".into(),
                    ));
                }
            }
        }
        // With zero wall fluxes the divergence telescopes to zero, so any mean is
        // roundoff. Removing it keeps near-solenoidal inputs from tripping the
        // compatibility check, whose scale is the (tiny) rhs itself.
        let div = velocity_divergence(u_star);
        let mean = integrate(&div) / grid.volume();
        let rhs = div.map(|v| (v - mean) / dt);
        let (p, report) = self.poisson.solve(&rhs, guess)?;
        let mut u = u_star.clone();
        let pv = p.values();
        for a in 0..grid.dim() {
            let stride = grid.stride(a);
            let inv_h = 1.0 / grid.h(a);
            let comp = u.component_mut(a);
            for (fi, face) in grid.faces(a) {
                if grid.is_boundary_face(a, face) {
                    comp[fi] = 0.0;
                    continue;
                }
                let r = grid.index(face);
                comp[fi] -= dt * (pv[r] - pv[r - stride]) * inv_h;
            }
        }
        Ok((u, p, report))
    }

    /// Viscous predictor with explicit forcing, then projection.
    pub fn step_with_forcing(
        &self,
        u: &VectorField,
        f: &VectorField,
        dt: f64,
        guess: Option<&ScalarField>,
    ) -> Result<(VectorField, ScalarField)> {
        let u_star = viscous_step(u, f, dt)?;
        let (u_new, p, _) = self.project(&u_star, dt, guess)?;
        Ok((u_new, p))
    }

    pub fn stokes_step(&self, state: &SimState, phi: &PotentialSpec, dt: f64) -> Result<(VectorField, ScalarField)> {
        let f = forcing(&state.n, phi);
        self.step_with_forcing(&state.u, &f, dt, Some(&state.p))
    }
}

pub fn project(u_star: &VectorField, dt: f64, cfg: &PoissonSolverConfig) -> Result<(VectorField, ScalarField)> {
    let solver = StokesSolver::new(u_star.grid().clone(), *cfg)?;
    let (u, p, _) = solver.project(u_star, dt, None)?;
    Ok((u, p))
}

pub fn stokes_step(
    state: &SimState,
    phi: &PotentialSpec,
    dt: f64,
    cfg: &PoissonSolverConfig,
) -> Result<(VectorField, ScalarField)> {
    StokesSolver::new(state.grid().clone(), *cfg)?.stokes_step(state, phi, dt)
}
