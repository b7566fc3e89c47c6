//! Cell-centered Neumann Poisson solver.
//!
//! Solves `Laplace(P) = rhs` with zero normal gradient on every wall and the
//! zero-mean gauge. The discrete Laplacian is exactly `div(grad)` of the MAC
//! projection, so the projected velocity is divergence-free to solver
//! tolerance. Two methods: plain conjugate gradients, and conjugate gradients
//! preconditioned by one symmetric geometric-multigrid V-cycle.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate, Grid, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonMethod {
    ConjugateGradient,
    Multigrid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonSolverConfig {
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    pub method: PoissonMethod,
}

impl Default for PoissonSolverConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-10,
            max_iterations: 2000,
            method: PoissonMethod::Multigrid,
        }
    }
}

impl PoissonSolverConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            out.push(format!(
                "poisson.rel_tolerance: must lie in (0, 1), got {}",
                self.rel_tolerance
            ));
        }
        if self.max_iterations == 0 {
            out.push("poisson.max_iterations: must be positive".into());
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoissonReport {
    pub iterations: usize,
    /// `||rhs - Laplace(P)||_2 / ||rhs||_2` after each iteration.
    pub residual_history: Vec<f64>,
}

/// Neumann Laplacian `-Laplace` on one grid level (positive semidefinite).
#[derive(Clone, Debug)]
struct Level {
    dims: [usize; 3],
    dim: usize,
    inv_h2: [f64; 3],
    strides: [usize; 3],
    diag: Vec<f64>,
}

impl Level {
    fn new(dim: usize, dims: [usize; 3], h: [f64; 3]) -> Self {
        let mut inv_h2 = [0.0; 3];
        for a in 0..dim {
            inv_h2[a] = 1.0 / (h[a] * h[a]);
        }
        let strides = [dims[1] * dims[2], dims[2], 1];
        let len = dims.iter().product();
        let mut level = Self {
            dims,
            dim,
            inv_h2,
            strides,
            diag: vec![0.0; len],
        };
        let mut diag = vec![0.0; len];
        level.for_each(|idx, cell| {
            let mut d = 0.0;
            for a in 0..dim {
                let links = usize::from(cell[a] > 0) + usize::from(cell[a] + 1 < dims[a]);
                d += links as f64 * inv_h2[a];
            }
            diag[idx] = d;
        });
        level.diag = diag;
        level
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    fn for_each(&self, mut f: impl FnMut(usize, [usize; 3])) {
        let mut idx = 0;
        for i in 0..self.dims[0] {
            for j in 0..self.dims[1] {
                for k in 0..self.dims[2] {
                    f(idx, [i, j, k]);
                    idx += 1;
                }
            }
        }
    }

    /// Off-diagonal contribution `sum_nb x_nb / h^2`.
    #[inline]
    fn neighbor_sum(&self, x: &[f64], idx: usize, cell: [usize; 3]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.dim {
            let st = self.strides[a];
            if cell[a] > 0 {
                s += x[idx - st] * self.inv_h2[a];
            }
            if cell[a] + 1 < self.dims[a] {
                s += x[idx + st] * self.inv_h2[a];
            }
        }
        s
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.for_each(|idx, cell| {
            out[idx] = self.diag[idx] * x[idx] - self.neighbor_sum(x, idx, cell);
        });
    }

    /// One Gauss-Seidel pass over cells of the given checkerboard color.
    fn gs_color(&self, x: &mut [f64], b: &[f64], color: usize) {
        let mut idx = 0;
        for i in 0..self.dims[0] {
            for j in 0..self.dims[1] {
                for k in 0..self.dims[2] {
                    if (i + j + k) % 2 == color {
                        let cell = [i, j, k];
                        x[idx] = (b[idx] + self.neighbor_sum(x, idx, cell)) / self.diag[idx];
                    }
                    idx += 1;
                }
            }
        }
    }

    fn coarsened(&self) -> Option<Level> {
        let mut dims = self.dims;
        let mut h = [1.0; 3];
        for a in 0..self.dim {
            if self.dims[a] % 2 != 0 || self.dims[a] / 2 < 2 {
                return None;
            }
            dims[a] = self.dims[a] / 2;
            h[a] = 2.0 / self.inv_h2[a].sqrt();
        }
        Some(Level::new(self.dim, dims, h))
    }

    #[inline]
    fn coarse_index(&self, cell: [usize; 3], coarse_level: &Level) -> usize {
        let k = if self.dim > 2 { cell[2] / 2 } else { cell[2] };
        (cell[0] / 2) * coarse_level.strides[0] + (cell[1] / 2) * coarse_level.strides[1] + k
    }

    fn restrict(&self, fine: &[f64], coarse_level: &Level, coarse: &mut [f64]) {
        coarse.iter_mut().for_each(|v| *v = 0.0);
        let weight = 1.0 / f64::from(1u32 << self.dim);
        self.for_each(|idx, cell| {
            coarse[self.coarse_index(cell, coarse_level)] += weight * fine[idx];
        });
    }

    fn prolong_add(&self, coarse: &[f64], coarse_level: &Level, fine: &mut [f64]) {
        self.for_each(|idx, cell| {
            fine[idx] += coarse[self.coarse_index(cell, coarse_level)];
        });
    }
}

/// Dense Cholesky factor of `K + s 1 1^T / N`, which is SPD and agrees with
/// the pseudo-inverse of `K` on mean-zero right-hand sides.
#[derive(Clone, Debug)]
struct DenseCoarse {
    n: usize,
    factor: Vec<f64>,
}

const DENSE_LIMIT: usize = 512;

impl DenseCoarse {
    fn new(level: &Level) -> Self {
        let n = level.len();
        let shift = level.diag.iter().sum::<f64>() / (n as f64 * n as f64);
        let mut a = vec![shift; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            level.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                a[i * n + j] += col[i];
            }
        }
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / d;
            }
        }
        Self { n, factor: a }
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let l = &self.factor;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        remove_mean(x);
    }
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reusable solver for one grid: caches the multigrid hierarchy.
#[derive(Clone, Debug)]
pub struct PoissonSolver {
    grid: Arc<Grid>,
    cfg: PoissonSolverConfig,
    levels: Vec<Level>,
    coarse: Option<DenseCoarse>,
}

const SMOOTHING_SWEEPS: usize = 2;
const COARSE_SWEEPS: usize = 40;

impl PoissonSolver {
    pub fn new(grid: Arc<Grid>, cfg: PoissonSolverConfig) -> Result<Self> {
        let problems = cfg.problems();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let mut h = [1.0; 3];
        h[..grid.dim()].copy_from_slice(grid.spacing());
        let mut levels = vec![Level::new(grid.dim(), grid.dims3(), h)];
        let mut coarse = None;
        if cfg.method == PoissonMethod::Multigrid {
            while let Some(next) = levels.last().and_then(Level::coarsened) {
                levels.push(next);
            }
            let last = levels.last().expect("at least one level");
            if last.len() <= DENSE_LIMIT {
                coarse = Some(DenseCoarse::new(last));
            }
        }
        Ok(Self {
            grid,
            cfg,
            levels,
            coarse,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn config(&self) -> &PoissonSolverConfig {
        &self.cfg
    }

    /// Solves `Laplace(P) = rhs`, optionally warm-started from `guess`.
    pub fn solve(&self, rhs: &ScalarField, guess: Option<&ScalarField>) -> Result<(ScalarField, PoissonReport)> {
        rhs.ensure_same_grid(&self.grid)?;
        rhs.check_finite("Poisson rhs")?;
        let scale = integrate(&rhs.map(f64::abs));
        let total = integrate(rhs);
        if total.abs() > 1e-8 * scale {
            return Err(Error::Incompatible {
                mean: total / self.grid.volume(),
            });
        }
        // solve K x = b with K = -Laplace, b = -rhs (projected to mean zero)
        let mut b: Vec<f64> = rhs.values().iter().map(|v| -v).collect();
        remove_mean(&mut b);
        let b_norm = dot(&b, &b).sqrt();
        let mut report = PoissonReport::default();
        if b_norm == 0.0 {
            return Ok((ScalarField::zeros(self.grid.clone()), report));
        }
        let target = self.cfg.rel_tolerance * b_norm;
        let fine = &self.levels[0];
        let len = fine.len();

        let mut x = match guess {
            Some(g) => {
                g.ensure_same_grid(&self.grid)?;
                let mut x = g.values().to_vec();
                remove_mean(&mut x);
                x
            }
            None => vec![0.0; len],
        };
        let mut kx = vec![0.0; len];
        fine.apply(&x, &mut kx);
        let mut r: Vec<f64> = b.iter().zip(&kx).map(|(b, k)| b - k).collect();
        let mut z = vec![0.0; len];
        let mut p = vec![0.0; len];
        let mut kp = vec![0.0; len];
        let mut rz = 0.0;
        let mut res = dot(&r, &r).sqrt();
        let mut restart = true;
        while res > target {
            if report.iterations >= self.cfg.max_iterations {
                return Err(Error::NotConverged {
                    iterations: report.iterations,
                    residual: res / b_norm,
                    target: self.cfg.rel_tolerance,
                });
            }
            self.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            if restart {
                p.copy_from_slice(&z);
                restart = false;
            } else {
                let beta = rz_new / rz;
                p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
            }
            rz = rz_new;
            fine.apply(&p, &mut kp);
            let pkp = dot(&p, &kp);
            if !(pkp > 0.0) {
                break;
            }
            let alpha = rz / pkp;
            x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.iter_mut().zip(&kp).for_each(|(r, kp)| *r -= alpha * kp);
            report.iterations += 1;
            res = dot(&r, &r).sqrt();
            if res <= target {
                // confirm against the true residual before accepting
                fine.apply(&x, &mut kx);
                r.iter_mut()
                    .zip(b.iter().zip(&kx))
                    .for_each(|(r, (b, k))| *r = b - k);
                res = dot(&r, &r).sqrt();
                restart = res > target;
            }
            report.residual_history.push(res / b_norm);
        }
        if res > target {
            return Err(Error::NotConverged {
                iterations: report.iterations,
                residual: res / b_norm,
                target: self.cfg.rel_tolerance,
            });
        }
        remove_mean(&mut x);
        Ok((ScalarField::new(self.grid.clone(), x)?, report))
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        match self.cfg.method {
            PoissonMethod::ConjugateGradient => z.copy_from_slice(r),
            PoissonMethod::Multigrid => {
                z.iter_mut().for_each(|v| *v = 0.0);
                self.v_cycle(0, r, z);
                remove_mean(z);
            }
        }
    }

    /// Symmetric V-cycle: red-black GS down, black-red GS up.
    fn v_cycle(&self, depth: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[depth];
        if depth + 1 == self.levels.len() {
            match &self.coarse {
                Some(dense) => dense.solve(b, x),
                None => {
                    for _ in 0..COARSE_SWEEPS {
                        level.gs_color(x, b, 0);
                        level.gs_color(x, b, 1);
                    }
                    for _ in 0..COARSE_SWEEPS {
                        level.gs_color(x, b, 1);
                        level.gs_color(x, b, 0);
                    }
                }
            }
            return;
        }
        for _ in 0..SMOOTHING_SWEEPS {
            level.gs_color(x, b, 0);
            level.gs_color(x, b, 1);
        }
        let mut kx = vec![0.0; level.len()];
        level.apply(x, &mut kx);
        let residual: Vec<f64> = b.iter().zip(&kx).map(|(b, k)| b - k).collect();
        let coarse_level = &self.levels[depth + 1];
        let mut coarse_b = vec![0.0; coarse_level.len()];
        level.restrict(&residual, coarse_level, &mut coarse_b);
        let mut coarse_x = vec![0.0; coarse_level.len()];
        self.v_cycle(depth + 1, &coarse_b, &mut coarse_x);
        level.prolong_add(&coarse_x, coarse_level, x);
        for _ in 0..SMOOTHING_SWEEPS {
            level.gs_color(x, b, 1);
            level.gs_color(x, b, 0);
        }
    }
}

/// One-shot solve of `Laplace(P) = rhs` with Neumann walls and zero mean.
pub fn pressure_poisson(rhs: &ScalarField, cfg: &PoissonSolverConfig) -> Result<ScalarField> {
    let solver = PoissonSolver::new(rhs.grid().clone(), *cfg)?;
    Ok(solver.solve(rhs, None)?.0)
}
