//! Box geometry, cell-centered scalar fields, MAC-staggered vector fields
//! and the quadrature/norm helpers shared by every operator.
//!
//! Cells are stored row-major with the last axis fastest. Two-dimensional
//! grids are carried as three-dimensional ones with a single dummy layer
//! along axis 2, so every stencil is written once.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on negative undershoot of `n` and `c`.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Smallest admissible number of cells along any axis.
pub const MIN_RESOLUTION: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl DomainConfig {
    pub fn new(dim: usize, lengths: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let domain = Self {
            dim,
            lengths,
            resolution,
        };
        let problems = domain.problems();
        if problems.is_empty() {
            Ok(domain)
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// All invariant violations, each prefixed with its key.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim != 2 && self.dim != 3 {
            out.push(format!("domain.dim: must be 2 or 3, got {}", self.dim));
            return out;
        }
        if self.lengths.len() != self.dim {
            out.push(format!(
                "domain.lengths: expected {} entries, got {}",
                self.dim,
                self.lengths.len()
            ));
        } else {
            for (a, &l) in self.lengths.iter().enumerate() {
                if !(l.is_finite() && l > 0.0) {
                    out.push(format!("domain.lengths[{a}]: must be positive, got {l}"));
                }
            }
        }
        if self.resolution.len() != self.dim {
            out.push(format!(
                "domain.resolution: expected {} entries, got {}",
                self.dim,
                self.resolution.len()
            ));
        } else {
            for (a, &r) in self.resolution.iter().enumerate() {
                if r < MIN_RESOLUTION {
                    out.push(format!(
                        "domain.resolution[{a}]: must be at least {MIN_RESOLUTION}, got {r}"
                    ));
                }
            }
        }
        out
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }
}

/// Uniform cell-centered grid on `[0, L_0] x ... x [0, L_{d-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 3],
    lengths: [f64; 3],
    h: [f64; 3],
    strides: [usize; 3],
}

pub fn make_grid(domain: &DomainConfig) -> Result<Arc<Grid>> {
    Grid::new(domain).map(Arc::new)
}

impl Grid {
    pub fn new(domain: &DomainConfig) -> Result<Self> {
        let problems = domain.problems();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let mut n = [1usize; 3];
        let mut lengths = [1.0; 3];
        let mut h = [1.0; 3];
        for a in 0..domain.dim {
            n[a] = domain.resolution[a];
            lengths[a] = domain.lengths[a];
            h[a] = lengths[a] / n[a] as f64;
        }
        let strides = [n[1] * n[2], n[2], 1];
        Ok(Self {
            dim: domain.dim,
            n,
            lengths,
            h,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> DomainConfig {
        DomainConfig {
            dim: self.dim,
            lengths: self.lengths[..self.dim].to_vec(),
            resolution: self.n[..self.dim].to_vec(),
        }
    }

    pub fn resolution(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sum over active axes of `1 / h_a^2`.
    pub fn inv_h2_sum(&self) -> f64 {
        self.spacing().iter().map(|h| 1.0 / (h * h)).sum()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    pub fn num_cells(&self) -> usize {
        self.n.iter().product()
    }

    pub(crate) fn dims3(&self) -> [usize; 3] {
        self.n
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn index(&self, cell: [usize; 3]) -> usize {
        cell[0] * self.strides[0] + cell[1] * self.strides[1] + cell[2]
    }

    pub fn cell_center(&self, cell: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = (cell[a] as f64 + 0.5) * self.h[a];
        }
        x
    }

    pub fn cell_centers(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis])
            .map(|i| (i as f64 + 0.5) * self.h[axis])
            .collect()
    }

    pub fn face_coords(&self, axis: usize) -> Vec<f64> {
        (0..=self.n[axis]).map(|i| i as f64 * self.h[axis]).collect()
    }

    /// Row-major iteration over `(linear index, multi-index)` of all cells.
    pub fn cells(&self) -> impl Iterator<Item = (usize, [usize; 3])> + '_ {
        let [n0, n1, n2] = self.n;
        (0..n0)
            .flat_map(move |i| (0..n1).flat_map(move |j| (0..n2).map(move |k| [i, j, k])))
            .enumerate()
    }

    /// Shape of the staggered array holding normal components on faces of `axis`.
    pub fn face_dims(&self, axis: usize) -> [usize; 3] {
        let mut d = self.n;
        d[axis] += 1;
        d
    }

    pub fn face_len(&self, axis: usize) -> usize {
        self.face_dims(axis).iter().product()
    }

    pub(crate) fn face_strides(&self, axis: usize) -> [usize; 3] {
        let d = self.face_dims(axis);
        [d[1] * d[2], d[2], 1]
    }

    pub fn face_index(&self, axis: usize, face: [usize; 3]) -> usize {
        let s = self.face_strides(axis);
        face[0] * s[0] + face[1] * s[1] + face[2] * s[2]
    }

    /// Row-major iteration over faces normal to `axis`.
    pub fn faces(&self, axis: usize) -> impl Iterator<Item = (usize, [usize; 3])> {
        let [n0, n1, n2] = self.face_dims(axis);
        (0..n0)
            .flat_map(move |i| (0..n1).flat_map(move |j| (0..n2).map(move |k| [i, j, k])))
            .enumerate()
    }

    pub fn is_boundary_face(&self, axis: usize, face: [usize; 3]) -> bool {
        face[axis] == 0 || face[axis] == self.n[axis]
    }

    /// Midpoint of a face normal to `axis`.
    pub fn face_center(&self, axis: usize, face: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = if a == axis {
                face[a] as f64 * self.h[a]
            } else {
                (face[a] as f64 + 0.5) * self.h[a]
            };
        }
        x
    }

    /// Mirrored neighbor index: stepping off the box returns the cell itself.
    #[inline]
    pub(crate) fn neighbor_mirrored(&self, idx: usize, cell: [usize; 3], axis: usize, up: bool) -> usize {
        if up {
            if cell[axis] + 1 < self.n[axis] {
                idx + self.strides[axis]
            } else {
                idx
            }
        } else if cell[axis] > 0 {
            idx - self.strides[axis]
        } else {
            idx
        }
    }
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_finite(values: &[f64], field: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { field, index }),
        None => Ok(()),
    }
}

/// One real per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::InvalidArgument(format!(
                "scalar field needs {} values, got {}",
                grid.num_cells(),
                values.len()
            )));
        }
        check_finite(&values, "scalar field")?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_cells());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let values = vec![value; grid.num_cells()];
        Self { grid, values }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = grid
            .cells()
            .map(|(_, cell)| f(&grid.cell_center(cell)[..dim]))
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + scale * other`, cellwise.
    pub fn axpy(&self, scale: f64, other: &ScalarField) -> Result<Self> {
        self.ensure_same_grid(other.grid())?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn check_finite(&self, field: &'static str) -> Result<()> {
        check_finite(&self.values, field)
    }

    pub(crate) fn ensure_same_grid(&self, other: &Arc<Grid>) -> Result<()> {
        if same_grid(&self.grid, other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub(crate) fn ensure_nonnegative(&self, field: &'static str) -> Result<()> {
        let min = self.min();
        if min < -POSITIVITY_TOL {
            Err(Error::Negative {
                field,
                min,
                tol: POSITIVITY_TOL,
            })
        } else {
            Ok(())
        }
    }
}

/// Normal velocity components on cell faces (MAC staggering).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Arc<Grid>, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "vector field needs {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for (a, comp) in components.iter().enumerate() {
            if comp.len() != grid.face_len(a) {
                return Err(Error::InvalidArgument(format!(
                    "component {a} needs {} face values, got {}",
                    grid.face_len(a),
                    comp.len()
                )));
            }
            check_finite(comp, "vector field")?;
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let components = (0..grid.dim()).map(|a| vec![0.0; grid.face_len(a)]).collect();
        Self { grid, components }
    }

    /// Samples `f(axis, x)` at the midpoint of every face normal to `axis`.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(usize, &[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let components = (0..dim)
            .map(|a| {
                grid.faces(a)
                    .map(|(_, face)| f(a, &grid.face_center(a, face)[..dim]))
                    .collect()
            })
            .collect();
        Self { grid, components }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.components[axis]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Discrete `sum_a ||u_a||^2 * cell volume`: the MAC kinetic-energy inner product.
    pub fn norm_sq(&self) -> f64 {
        let vol = self.grid.cell_volume();
        self.components
            .iter()
            .map(|c| neumaier_sum(c.iter().map(|v| v * v)))
            .sum::<f64>()
            * vol
    }

    /// Zeros every face lying on the domain boundary.
    pub fn zero_boundary_normals(&mut self) {
        for a in 0..self.grid.dim() {
            let grid = self.grid.clone();
            let comp = &mut self.components[a];
            for (fi, face) in grid.faces(a) {
                if grid.is_boundary_face(a, face) {
                    comp[fi] = 0.0;
                }
            }
        }
    }

    /// Cell-centered velocity vector obtained by averaging opposite faces.
    pub fn cell_average(&self, cell: [usize; 3]) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (a, slot) in v.iter_mut().enumerate().take(self.grid.dim()) {
            let lo = self.grid.face_index(a, cell);
            let mut up = cell;
            up[a] += 1;
            let hi = self.grid.face_index(a, up);
            *slot = 0.5 * (self.components[a][lo] + self.components[a][hi]);
        }
        v
    }

    pub(crate) fn ensure_same_grid(&self, other: &Arc<Grid>) -> Result<()> {
        if same_grid(&self.grid, other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Discrete fields `(n, c, u, P)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub n: ScalarField,
    pub c: ScalarField,
    pub u: VectorField,
    pub p: ScalarField,
}

impl SimState {
    pub fn new(t: f64, n: ScalarField, c: ScalarField, u: VectorField, p: ScalarField) -> Result<Self> {
        let grid = n.grid().clone();
        c.ensure_same_grid(&grid)?;
        u.ensure_same_grid(&grid)?;
        p.ensure_same_grid(&grid)?;
        let state = Self { t, n, c, u, p };
        state.validate()?;
        Ok(state)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self {
            t: 0.0,
            n: ScalarField::zeros(grid.clone()),
            c: ScalarField::zeros(grid.clone()),
            u: VectorField::zeros(grid.clone()),
            p: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.n.grid()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::InvalidArgument(format!("time {} is not finite", self.t)));
        }
        self.n.check_finite("n")?;
        self.c.check_finite("c")?;
        self.p.check_finite("P")?;
        for comp in self.u.components() {
            check_finite(comp, "u")?;
        }
        self.n.ensure_nonnegative("n")?;
        self.c.ensure_nonnegative("c")?;
        Ok(())
    }
}

/// Compensated (Neumaier) summation.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Midpoint-rule integral over the box.
pub fn integrate(field: &ScalarField) -> f64 {
    neumaier_sum(field.values.iter().copied()) * field.grid.cell_volume()
}

pub fn lp_norm(field: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("L^p norm needs finite p >= 1, got {p}")));
    }
    let scale = linf_norm(field);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sum = neumaier_sum(field.values.iter().map(|v| (v.abs() / scale).powf(p)));
    Ok(scale * (sum * field.grid.cell_volume()).powf(1.0 / p))
}

pub fn linf_norm(field: &ScalarField) -> f64 {
    field.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Cellwise `|grad f|^2` from central differences, mirrored ghosts at the walls.
pub fn gradient_sq(field: &ScalarField) -> ScalarField {
    let grid = field.grid();
    let v = field.values();
    let values = grid
        .cells()
        .map(|(idx, cell)| {
            (0..grid.dim())
                .map(|a| {
                    let g = central_difference(grid, v, idx, cell, a);
                    g * g
                })
                .sum()
        })
        .collect();
    ScalarField::from_vec_unchecked(grid.clone(), values)
}

/// `(f[i+1] - f[i-1]) / 2h` along `axis` with mirrored ghost cells.
#[inline]
pub(crate) fn central_difference(grid: &Grid, v: &[f64], idx: usize, cell: [usize; 3], axis: usize) -> f64 {
    let up = grid.neighbor_mirrored(idx, cell, axis, true);
    let dn = grid.neighbor_mirrored(idx, cell, axis, false);
    (v[up] - v[dn]) / (2.0 * grid.h(axis))
}
