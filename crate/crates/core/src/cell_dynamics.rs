//! Finite-volume right-hand sides of the density and oxygen equations.
//!
//! Every operator is assembled from face fluxes that vanish on the walls,
//! so each divergence telescopes and integrates to zero up to roundoff.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{central_difference, Grid, ScalarField, VectorField};
use crate::regularization::{DiffusionLaw, SensitivitySpec};

/// Largest cellwise divergence accepted by [`advect`].
pub const DIVERGENCE_TOL: f64 = 1e-8;

/// One real per face per axis; wall faces hold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField {
    grid: Arc<Grid>,
    faces: Vec<Vec<f64>>,
}

impl FluxField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let faces = (0..grid.dim()).map(|a| vec![0.0; grid.face_len(a)]).collect();
        Self { grid, faces }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.faces[axis]
    }

    pub fn max_abs(&self) -> f64 {
        self.faces.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn boundary_is_zero(&self) -> bool {
        (0..self.grid.dim()).all(|a| {
            self.grid
                .faces(a)
                .all(|(fi, face)| !self.grid.is_boundary_face(a, face) || self.faces[a][fi] == 0.0)
        })
    }

    /// Cellwise `sum_a (F[i+1/2] - F[i-1/2]) / h_a`.
    pub fn divergence(&self) -> ScalarField {
        let grid = &self.grid;
        let mut out = vec![0.0; grid.num_cells()];
        for a in 0..grid.dim() {
            let inv_h = 1.0 / grid.h(a);
            let fs = grid.face_strides(a)[a];
            let comp = &self.faces[a];
            for (idx, cell) in grid.cells() {
                let lo = grid.face_index(a, cell);
                out[idx] += (comp[lo + fs] - comp[lo]) * inv_h;
            }
        }
        ScalarField::from_vec_unchecked(grid.clone(), out)
    }

    /// Fills interior faces of every axis from `f(axis, face, left cell, right cell)`.
    fn build(grid: &Arc<Grid>, mut f: impl FnMut(usize, [usize; 3], usize, usize) -> f64) -> Self {
        let mut flux = Self::zeros(grid.clone());
        for a in 0..grid.dim() {
            let stride = grid.stride(a);
            let n_a = grid.resolution()[a];
            let comp = &mut flux.faces[a];
            for (fi, face) in grid.faces(a) {
                if face[a] == 0 || face[a] == n_a {
                    continue;
                }
                let right = grid.index(face);
                comp[fi] = f(a, face, right - stride, right);
            }
        }
        flux
    }
}

fn ensure_finite(field: &ScalarField, name: &'static str) -> Result<()> {
    field.check_finite(name)
}

/// Face flux `D_eps(mean n) * dn/dx_a`.
pub fn porous_medium_flux(n: &ScalarField, law: &DiffusionLaw) -> Result<FluxField> {
    ensure_finite(n, "n")?;
    n.ensure_nonnegative("n")?;
    let grid = n.grid();
    let v = n.values();
    Ok(FluxField::build(grid, |a, _, l, r| {
        let d = law.eval_clamped(0.5 * (v[l] + v[r]));
        d * (v[r] - v[l]) / grid.h(a)
    }))
}

/// `div(D_eps(n) grad n)`.
pub fn porous_medium_divergence(n: &ScalarField, law: &DiffusionLaw) -> Result<ScalarField> {
    Ok(porous_medium_flux(n, law)?.divergence())
}

/// Gradient of `c` at the midpoint of an interior face: normal part from the
/// two adjacent cells, tangential parts averaged from their central differences.
#[inline]
fn face_gradient(grid: &Grid, c: &[f64], axis: usize, face: [usize; 3], l: usize, r: usize) -> [f64; 3] {
    let mut g = [0.0; 3];
    let mut left = face;
    left[axis] -= 1;
    for (b, gb) in g.iter_mut().enumerate().take(grid.dim()) {
        *gb = if b == axis {
            (c[r] - c[l]) / grid.h(axis)
        } else {
            0.5 * (central_difference(grid, c, l, left, b) + central_difference(grid, c, r, face, b))
        };
    }
    g
}

/// Normal component of the chemotactic drift `S_eps grad c` on every face.
pub fn chemotactic_velocity(n: &ScalarField, c: &ScalarField, spec: &SensitivitySpec) -> Result<FluxField> {
    n.ensure_same_grid(c.grid())?;
    ensure_finite(n, "n")?;
    ensure_finite(c, "c")?;
    n.ensure_nonnegative("n")?;
    c.ensure_nonnegative("c")?;
    let grid = n.grid();
    if spec.dim() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "sensitivity is {}-dimensional, grid is {}-dimensional",
            spec.dim(),
            grid.dim()
        )));
    }
    if spec.is_zero() {
        return Ok(FluxField::zeros(grid.clone()));
    }
    let nv = n.values();
    let cv = c.values();
    let dim = grid.dim();
    let lengths = grid.lengths();
    Ok(FluxField::build(grid, |a, face, l, r| {
        let g = face_gradient(grid, cv, a, face, l, r);
        let x = grid.face_center(a, face);
        let n_face = (0.5 * (nv[l] + nv[r])).max(0.0);
        let c_face = (0.5 * (cv[l] + cv[r])).max(0.0);
        let s = spec.eval_s_eps(&x[..dim], n_face, c_face, lengths);
        s.row_dot(a, &g)
    }))
}

/// Face flux `n_upwind * (S_eps grad c) . nu`.
pub fn chemotactic_flux(n: &ScalarField, c: &ScalarField, spec: &SensitivitySpec) -> Result<FluxField> {
    let mut w = chemotactic_velocity(n, c, spec)?;
    upwind_in_place(&mut w, n.values());
    Ok(w)
}

/// `-div(n S_eps grad c)`.
pub fn chemotaxis_divergence(n: &ScalarField, c: &ScalarField, spec: &SensitivitySpec) -> Result<ScalarField> {
    let flux = chemotactic_flux(n, c, spec)?;
    Ok(flux.divergence().map(|v| -v))
}

/// Replaces face velocities by velocity times the upwind cell value.
fn upwind_in_place(w: &mut FluxField, q: &[f64]) {
    let grid = w.grid.clone();
    for a in 0..grid.dim() {
        let stride = grid.stride(a);
        let n_a = grid.resolution()[a];
        let comp = &mut w.faces[a];
        for (fi, face) in grid.faces(a) {
            if face[a] == 0 || face[a] == n_a {
                continue;
            }
            let r = grid.index(face);
            let vel = comp[fi];
            comp[fi] = if vel > 0.0 { vel * q[r - stride] } else { vel * q[r] };
        }
    }
}

/// Cellwise discrete divergence of a face-staggered velocity.
pub fn velocity_divergence(u: &VectorField) -> ScalarField {
    let grid = u.grid();
    let mut out = vec![0.0; grid.num_cells()];
    for a in 0..grid.dim() {
        let inv_h = 1.0 / grid.h(a);
        let fs = grid.face_strides(a)[a];
        let comp = u.component(a);
        for (idx, cell) in grid.cells() {
            let lo = grid.face_index(a, cell);
            out[idx] += (comp[lo + fs] - comp[lo]) * inv_h;
        }
    }
    ScalarField::from_vec_unchecked(grid.clone(), out)
}

/// Conservative first-order upwind transport `-div(u q)`.
pub fn advect(q: &ScalarField, u: &VectorField) -> Result<ScalarField> {
    u.ensure_same_grid(q.grid())?;
    ensure_finite(q, "advected field")?;
    let max_div = velocity_divergence(u).values().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if max_div > DIVERGENCE_TOL {
        return Err(Error::NotDivergenceFree { max_div });
    }
    let grid = q.grid();
    let mut flux = FluxField::zeros(grid.clone());
    for a in 0..grid.dim() {
        flux.faces[a].copy_from_slice(u.component(a));
    }
    // wall faces carry no transport even if a caller left debris there
    for a in 0..grid.dim() {
        for (fi, face) in grid.faces(a) {
            if grid.is_boundary_face(a, face) {
                flux.faces[a][fi] = 0.0;
            }
        }
    }
    upwind_in_place(&mut flux, q.values());
    Ok(flux.divergence().map(|v| -v))
}

/// Oxygen uptake `-n c` with tiny undershoots clamped to zero.
pub fn consumption(n: &ScalarField, c: &ScalarField) -> Result<ScalarField> {
    n.ensure_same_grid(c.grid())?;
    n.ensure_nonnegative("n")?;
    c.ensure_nonnegative("c")?;
    let values = n
        .values()
        .iter()
        .zip(c.values())
        .map(|(&nv, &cv)| -(nv.max(0.0) * cv.max(0.0)))
        .collect();
    Ok(ScalarField::from_vec_unchecked(n.grid().clone(), values))
}

/// Face flux `dc/dx_a`, zero on the walls.
pub fn diffusive_flux(c: &ScalarField) -> FluxField {
    let grid = c.grid();
    let v = c.values();
    FluxField::build(grid, |a, _, l, r| (v[r] - v[l]) / grid.h(a))
}

/// `Laplace(c)` with homogeneous Neumann data.
pub fn laplacian_neumann(c: &ScalarField) -> ScalarField {
    diffusive_flux(c).divergence()
}
