//! Naive reference implementations of the spatial operators, written
//! cell by cell with explicit ghost handling, plus shared helpers.

#![allow(dead_code)]

use std::sync::Arc;

use chemostokes::grid::{make_grid, DomainConfig, Grid, ScalarField, VectorField};
use chemostokes::stokes::{project, PoissonSolverConfig};
use rand::rngs::StdRng;
use rand::Rng;

pub fn grid(lengths: &[f64], res: &[usize]) -> Arc<Grid> {
    make_grid(&DomainConfig::new(lengths.len(), lengths.to_vec(), res.to_vec()).unwrap()).unwrap()
}

pub fn random_field(g: &Arc<Grid>, rng: &mut StdRng, lo: f64, hi: f64) -> ScalarField {
    let v = (0..g.num_cells()).map(|_| rng.random_range(lo..hi)).collect();
    ScalarField::new(g.clone(), v).unwrap()
}

/// Random face field projected to be discretely divergence-free.
pub fn random_solenoidal(g: &Arc<Grid>, rng: &mut StdRng) -> VectorField {
    let comps = (0..g.dim())
        .map(|a| (0..g.face_len(a)).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut u = VectorField::new(g.clone(), comps).unwrap();
    u.zero_boundary_normals();
    let cfg = PoissonSolverConfig {
        rel_tolerance: 1e-13,
        ..Default::default()
    };
    project(&u, 1.0, &cfg).unwrap().0
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn cell_of(g: &Grid, idx: usize) -> [usize; 3] {
    let n = g.resolution();
    let n2 = if g.dim() == 3 { n[2] } else { 1 };
    [idx / (n[1] * n2), (idx / n2) % n[1], idx % n2]
}

fn shifted(g: &Grid, cell: [usize; 3], axis: usize, delta: isize) -> Option<[usize; 3]> {
    let v = cell[axis] as isize + delta;
    if v < 0 || v >= g.resolution()[axis] as isize {
        return None;
    }
    let mut c = cell;
    c[axis] = v as usize;
    Some(c)
}

/// Dense matrix of the Neumann Laplacian, assembled row by row.
pub fn laplacian_matrix(g: &Grid) -> Vec<Vec<f64>> {
    let n = g.num_cells();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        let cell = cell_of(g, i);
        for axis in 0..g.dim() {
            let k = 1.0 / (g.h(axis) * g.h(axis));
            for d in [-1, 1] {
                if let Some(nb) = shifted(g, cell, axis, d) {
                    let j = g.index(nb);
                    a[i][j] += k;
                    a[i][i] -= k;
                }
            }
        }
    }
    a
}

pub fn naive_laplacian(c: &ScalarField) -> Vec<f64> {
    let a = laplacian_matrix(c.grid());
    a.iter().map(|row| row.iter().zip(c.values()).map(|(x, y)| x * y).sum()).collect()
}

pub fn naive_porous(n: &ScalarField, m: f64, c_d: f64, eps: f64) -> Vec<f64> {
    let g = n.grid();
    let v = n.values();
    let d = |x: f64| c_d * x.max(0.0).powf(m - 1.0) + eps;
    (0..g.num_cells())
        .map(|i| {
            let cell = cell_of(g, i);
            let mut acc = 0.0;
            for axis in 0..g.dim() {
                let h2 = g.h(axis) * g.h(axis);
                if let Some(r) = shifted(g, cell, axis, 1) {
                    let j = g.index(r);
                    acc += d(0.5 * (v[i] + v[j])) * (v[j] - v[i]) / h2;
                }
                if let Some(l) = shifted(g, cell, axis, -1) {
                    let j = g.index(l);
                    acc -= d(0.5 * (v[i] + v[j])) * (v[i] - v[j]) / h2;
                }
            }
            acc
        })
        .collect()
}

fn central(g: &Grid, c: &[f64], cell: [usize; 3], axis: usize) -> f64 {
    let up = shifted(g, cell, axis, 1).unwrap_or(cell);
    let dn = shifted(g, cell, axis, -1).unwrap_or(cell);
    (c[g.index(up)] - c[g.index(dn)]) / (2.0 * g.h(axis))
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    10.0 * t.powi(3) - 15.0 * t.powi(4) + 6.0 * t.powi(5)
}

fn cutoff(x: &[f64], lengths: &[f64], width: f64) -> f64 {
    if width <= 0.0 {
        return 1.0;
    }
    x.iter()
        .zip(lengths)
        .map(|(&xa, &la)| smoothstep((xa.min(la - xa) - 0.5 * width) / (0.5 * width)))
        .product()
}

/// `-div(n rho S grad c)` for `S = mag (cos(theta) I + sin(theta) R)`, `R e_0 = e_1`,
/// `R e_1 = -e_0`, with the upwinded density.
pub fn naive_chemotaxis(n: &ScalarField, c: &ScalarField, mag: f64, theta: f64, width: f64) -> Vec<f64> {
    let g = n.grid();
    let dim = g.dim();
    let (nv, cv) = (n.values(), c.values());
    let s = |i: usize, j: usize| -> f64 {
        let rot = match (i, j) {
            (0, 1) => -1.0,
            (1, 0) => 1.0,
            _ => 0.0,
        };
        let id = if i == j { 1.0 } else { 0.0 };
        mag * (theta.cos() * id + theta.sin() * rot)
    };
    // flux through the face on the high side of `cell` along `axis`
    let face_flux = |cell: [usize; 3], axis: usize| -> f64 {
        let Some(right) = shifted(g, cell, axis, 1) else {
            return 0.0;
        };
        let (l, r) = (g.index(cell), g.index(right));
        let mut grad = [0.0; 3];
        for b in 0..dim {
            grad[b] = if b == axis {
                (cv[r] - cv[l]) / g.h(axis)
            } else {
                0.5 * (central(g, cv, cell, b) + central(g, cv, right, b))
            };
        }
        let mut x = [0.0; 3];
        for b in 0..dim {
            x[b] = (cell[b] as f64 + 0.5) * g.h(b);
        }
        x[axis] = (cell[axis] as f64 + 1.0) * g.h(axis);
        let rho = cutoff(&x[..dim], g.lengths(), width);
        let w: f64 = (0..dim).map(|b| s(axis, b) * grad[b]).sum::<f64>() * rho;
        w * if w > 0.0 { nv[l] } else { nv[r] }
    };
    (0..g.num_cells())
        .map(|i| {
            let cell = cell_of(g, i);
            let mut div = 0.0;
            for axis in 0..dim {
                let hi = face_flux(cell, axis);
                let lo = shifted(g, cell, axis, -1).map_or(0.0, |lc| face_flux(lc, axis));
                div += (hi - lo) / g.h(axis);
            }
            -div
        })
        .collect()
}

pub fn naive_advect(q: &ScalarField, u: &VectorField) -> Vec<f64> {
    let g = q.grid();
    let v = q.values();
    (0..g.num_cells())
        .map(|i| {
            let cell = cell_of(g, i);
            let mut div = 0.0;
            for axis in 0..g.dim() {
                let comp = u.component(axis);
                let mut hi_face = cell;
                hi_face[axis] += 1;
                let hi = match shifted(g, cell, axis, 1) {
                    None => 0.0,
                    Some(r) => {
                        let w = comp[g.face_index(axis, hi_face)];
                        w * if w > 0.0 { v[i] } else { v[g.index(r)] }
                    }
                };
                let lo = match shifted(g, cell, axis, -1) {
                    None => 0.0,
                    Some(l) => {
                        let w = comp[g.face_index(axis, cell)];
                        w * if w > 0.0 { v[g.index(l)] } else { v[i] }
                    }
                };
                div += (hi - lo) / g.h(axis);
            }
            -div
        })
        .collect()
}

pub fn naive_consumption(n: &ScalarField, c: &ScalarField) -> Vec<f64> {
    n.values().iter().zip(c.values()).map(|(a, b)| -a * b).collect()
}
