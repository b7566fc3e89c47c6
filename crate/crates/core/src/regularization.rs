//! The regularized model ingredients: nondegenerate diffusion `D_eps`,
//! the boundary cutoff `rho_eps`, the sensitivity tensor `S` with its
//! bound `S0`, and the gravitational potential.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `D_eps(n) = C_D n^(m-1) + eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionLaw {
    pub m: f64,
    pub c_d: f64,
    pub eps: f64,
}

impl DiffusionLaw {
    pub fn new(m: f64, c_d: f64, eps: f64) -> Result<Self> {
        let law = Self { m, c_d, eps };
        let problems = law.problems();
        if problems.is_empty() {
            Ok(law)
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.m.is_finite() && self.m > 1.0) {
            out.push(format!("physics.m: m must exceed 1, got {}", self.m));
        }
        if !(self.c_d.is_finite() && self.c_d > 0.0) {
            out.push(format!("physics.c_d: must be positive, got {}", self.c_d));
        }
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            out.push(format!("physics.eps: must lie in [0, 1), got {}", self.eps));
        }
        out
    }

    /// Unregularized `C_D n^(m-1)`.
    pub fn degenerate(&self, n: f64) -> f64 {
        self.c_d * n.max(0.0).powf(self.m - 1.0)
    }

    pub fn d_eps(&self, n: f64) -> Result<f64> {
        if n < 0.0 || n.is_nan() {
            return Err(Error::InvalidArgument(format!("D_eps needs n >= 0, got {n}")));
        }
        Ok(self.eval_clamped(n))
    }

    /// `D_eps(max(n, 0))`; tiny undershoots are treated as zero density.
    #[inline]
    pub(crate) fn eval_clamped(&self, n: f64) -> f64 {
        self.degenerate(n) + self.eps
    }
}

pub fn d_eps(law: &DiffusionLaw, n: f64) -> Result<f64> {
    law.d_eps(n)
}

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3` on `[0, 1]`, clamped outside.
fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Boundary cutoff evaluated without the inside-the-box check.
pub(crate) fn rho_unchecked(x: &[f64], lengths: &[f64], cutoff_eps: f64) -> f64 {
    if cutoff_eps <= 0.0 {
        return 1.0;
    }
    let half = 0.5 * cutoff_eps;
    x.iter()
        .zip(lengths)
        .map(|(&xa, &la)| {
            let d = xa.min(la - xa);
            smoothstep5((d - half) / half)
        })
        .product()
}

/// Tensor-product cutoff: 0 within `cutoff_eps / 2` of a wall, 1 beyond `cutoff_eps`.
pub fn rho_eps(x: &[f64], lengths: &[f64], cutoff_eps: f64) -> Result<f64> {
    if x.len() != lengths.len() {
        return Err(Error::InvalidArgument(format!(
            "position has {} coordinates, domain has {}",
            x.len(),
            lengths.len()
        )));
    }
    if !(cutoff_eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff_eps must be >= 0, got {cutoff_eps}")));
    }
    for (&xa, &la) in x.iter().zip(lengths) {
        if !(0.0..=la).contains(&xa) {
            return Err(Error::InvalidArgument(format!("position {x:?} lies outside the box")));
        }
    }
    Ok(rho_unchecked(x, lengths, cutoff_eps))
}

/// A `dim x dim` matrix stored in a fixed 3x3 block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor {
    dim: usize,
    entries: [[f64; 3]; 3],
}

impl Tensor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: [[0.0; 3]; 3],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.entries[i][i] = 1.0;
        }
        t
    }

    /// Infinitesimal rotation in the plane of axes 0 and 1.
    pub fn rotation_generator(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        t.entries[0][1] = -1.0;
        t.entries[1][0] = 1.0;
        t
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if !(2..=3).contains(&dim) || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("tensor must be a square 2x2 or 3x3 array".into()));
        }
        let mut t = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            t.entries[i][..dim].copy_from_slice(row);
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.entries[i][..self.dim].to_vec()).collect()
    }

    pub fn scale(mut self, s: f64) -> Self {
        for row in &mut self.entries {
            for v in row {
                *v *= s;
            }
        }
        self
    }

    pub fn add(mut self, other: &Tensor) -> Self {
        for i in 0..3 {
            for j in 0..3 {
                self.entries[i][j] += other.entries[i][j];
            }
        }
        self
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Row `i` of the matrix-vector product.
    #[inline]
    pub fn row_dot(&self, i: usize, v: &[f64; 3]) -> f64 {
        let r = &self.entries[i];
        r[0] * v[0] + r[1] * v[1] + r[2] * v[2]
    }
}

/// Scalar magnitude of the rotational sensitivity as a function of `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MagnitudeLaw {
    Constant(f64),
    /// `value * c / (half_saturation + c)`.
    Saturating { value: f64, half_saturation: f64 },
}

impl MagnitudeLaw {
    pub fn eval(&self, c: f64) -> f64 {
        match *self {
            MagnitudeLaw::Constant(v) => v,
            MagnitudeLaw::Saturating {
                value,
                half_saturation,
            } => {
                let c = c.max(0.0);
                value * c / (half_saturation + c)
            }
        }
    }
}

/// One node of a tabulated sensitivity: `S(c_k)` and the bound `S0(c_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedNode {
    pub c: f64,
    pub matrix: Tensor,
    pub s0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SensitivityKind {
    /// `S = C_S * I`.
    ScalarConstant { c_s: f64 },
    /// `S = magnitude(c) * (cos(angle) I + sin(angle) R)`, `R` rotating the (x0, x1) plane.
    Rotational { angle: f64, magnitude: MagnitudeLaw },
    /// Piecewise-linear in `c` between nodes, constant beyond the end nodes.
    Tabulated { nodes: Vec<TabulatedNode> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivitySpec {
    dim: usize,
    kind: SensitivityKind,
    cutoff_eps: f64,
}

impl SensitivitySpec {
    pub fn new(dim: usize, kind: SensitivityKind, cutoff_eps: f64) -> Result<Self> {
        let spec = Self {
            dim,
            kind,
            cutoff_eps,
        };
        let problems = spec.problems();
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn scalar(dim: usize, c_s: f64) -> Self {
        Self {
            dim,
            kind: SensitivityKind::ScalarConstant { c_s },
            cutoff_eps: 0.0,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.cutoff_eps >= 0.0 && self.cutoff_eps.is_finite()) {
            out.push(format!(
                "sensitivity.cutoff_eps: must be a finite value >= 0, got {}",
                self.cutoff_eps
            ));
        }
        match &self.kind {
            SensitivityKind::ScalarConstant { c_s } => {
                if !c_s.is_finite() {
                    out.push("sensitivity.c_s: must be finite".into());
                }
            }
            SensitivityKind::Rotational { angle, magnitude } => {
                if !angle.is_finite() {
                    out.push("sensitivity.angle: must be finite".into());
                }
                match *magnitude {
                    MagnitudeLaw::Constant(v) if !v.is_finite() => {
                        out.push("sensitivity.magnitude: must be finite".into())
                    }
                    MagnitudeLaw::Saturating {
                        value,
                        half_saturation,
                    } => {
                        if !value.is_finite() {
                            out.push("sensitivity.magnitude: must be finite".into());
                        }
                        if !(half_saturation > 0.0 && half_saturation.is_finite()) {
                            out.push(format!(
                                "sensitivity.half_saturation: must be positive, got {half_saturation}"
                            ));
                        }
                    }
                    _ => {}
                }
            }
            SensitivityKind::Tabulated { nodes } => {
                if nodes.is_empty() {
                    out.push("sensitivity.nodes: at least one node required".into());
                }
                for (k, node) in nodes.iter().enumerate() {
                    if node.matrix.dim() != self.dim {
                        out.push(format!(
                            "sensitivity.nodes[{k}].matrix: expected {0}x{0}, got {1}x{1}",
                            self.dim,
                            node.matrix.dim()
                        ));
                    }
                    if !(node.c >= 0.0 && node.c.is_finite()) {
                        out.push(format!("sensitivity.nodes[{k}].c: must be >= 0, got {}", node.c));
                    }
                    let norm = node.matrix.frobenius();
                    if !(norm <= node.s0) {
                        out.push(format!(
                            "sensitivity.nodes[{k}]: |S| = {norm} exceeds S0 = {}",
                            node.s0
                        ));
                    }
                    if k > 0 {
                        let prev = &nodes[k - 1];
                        if !(node.c > prev.c) {
                            out.push(format!(
                                "sensitivity.nodes[{k}].c: nodes must be strictly increasing in c"
                            ));
                        }
                        if node.s0 < prev.s0 {
                            out.push(format!(
                                "sensitivity.nodes[{k}].s0: S0 must be nondecreasing in c"
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SensitivityKind {
        &self.kind
    }

    pub fn cutoff_eps(&self) -> f64 {
        self.cutoff_eps
    }

    pub fn with_cutoff(mut self, cutoff_eps: f64) -> Self {
        self.cutoff_eps = cutoff_eps;
        self
    }

    /// True when `S` vanishes identically, so chemotaxis can be skipped.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            SensitivityKind::ScalarConstant { c_s } => *c_s == 0.0,
            SensitivityKind::Rotational { magnitude, .. } => {
                matches!(magnitude, MagnitudeLaw::Constant(v) | MagnitudeLaw::Saturating { value: v, .. } if *v == 0.0)
            }
            SensitivityKind::Tabulated { nodes } => nodes.iter().all(|n| n.matrix.frobenius() == 0.0),
        }
    }

    fn rotation_norm(&self, angle: f64) -> f64 {
        let (s, c) = angle.sin_cos();
        (self.dim as f64 * c * c + 2.0 * s * s).sqrt()
    }

    /// The nondecreasing bound `S0(c) >= |S(x, n, c)|`.
    pub fn s0(&self, c: f64) -> f64 {
        match &self.kind {
            SensitivityKind::ScalarConstant { c_s } => c_s.abs() * (self.dim as f64).sqrt(),
            SensitivityKind::Rotational { angle, magnitude } => {
                magnitude.eval(c).abs() * self.rotation_norm(*angle)
            }
            SensitivityKind::Tabulated { nodes } => {
                let (k, w) = locate(nodes, c);
                match w {
                    None => nodes[k].s0,
                    Some(w) => (1.0 - w) * nodes[k].s0 + w * nodes[k + 1].s0,
                }
            }
        }
    }

    /// `S(x, n, c)`. Built-in kinds are spatially uniform and ignore `n`.
    pub fn eval_s(&self, _x: &[f64], _n: f64, c: f64) -> Tensor {
        match &self.kind {
            SensitivityKind::ScalarConstant { c_s } => Tensor::identity(self.dim).scale(*c_s),
            SensitivityKind::Rotational { angle, magnitude } => {
                let (s, co) = angle.sin_cos();
                let rot = Tensor::identity(self.dim)
                    .scale(co)
                    .add(&Tensor::rotation_generator(self.dim).scale(s));
                rot.scale(magnitude.eval(c))
            }
            SensitivityKind::Tabulated { nodes } => {
                let (k, w) = locate(nodes, c);
                match w {
                    None => nodes[k].matrix,
                    Some(w) => nodes[k].matrix.scale(1.0 - w).add(&nodes[k + 1].matrix.scale(w)),
                }
            }
        }
    }

    /// `rho_eps(x) S(x, n, c)`.
    pub fn eval_s_eps(&self, x: &[f64], n: f64, c: f64, lengths: &[f64]) -> Tensor {
        let rho = rho_unchecked(x, lengths, self.cutoff_eps);
        if rho == 0.0 {
            return Tensor::zeros(self.dim);
        }
        self.eval_s(x, n, c).scale(rho)
    }
}

/// Segment index and interpolation weight; `None` weight means clamp to node `k`.
fn locate(nodes: &[TabulatedNode], c: f64) -> (usize, Option<f64>) {
    if c <= nodes[0].c {
        return (0, None);
    }
    let last = nodes.len() - 1;
    if c >= nodes[last].c {
        return (last, None);
    }
    let k = nodes.partition_point(|node| node.c <= c) - 1;
    let w = (c - nodes[k].c) / (nodes[k + 1].c - nodes[k].c);
    (k, Some(w))
}

pub fn eval_s(spec: &SensitivitySpec, x: &[f64], n: f64, c: f64) -> Result<Tensor> {
    if n < 0.0 || c < 0.0 {
        return Err(Error::InvalidArgument(format!("S needs n, c >= 0, got n = {n}, c = {c}")));
    }
    Ok(spec.eval_s(x, n, c))
}

pub fn eval_s_eps(spec: &SensitivitySpec, x: &[f64], n: f64, c: f64, lengths: &[f64]) -> Result<Tensor> {
    let rho = rho_eps(x, lengths, spec.cutoff_eps)?;
    Ok(eval_s(spec, x, n, c)?.scale(rho))
}

/// Gravitational potential `phi`.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialSpec {
    Constant,
    /// `phi = g . x`.
    Linear { gradient: Vec<f64> },
    /// `phi = strength / 2 * |x - center|^2`.
    Radial { center: Vec<f64>, strength: f64 },
    /// Cell-centered values on the simulation grid; face gradients by differencing.
    Tabulated { values: Vec<f64> },
}

impl PotentialSpec {
    pub fn problems(&self, dim: usize, num_cells: usize) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            PotentialSpec::Constant => {}
            PotentialSpec::Linear { gradient } => {
                if gradient.len() != dim || gradient.iter().any(|g| !g.is_finite()) {
                    out.push(format!("potential.gradient: expected {dim} finite entries"));
                }
            }
            PotentialSpec::Radial { center, strength } => {
                if center.len() != dim || center.iter().any(|g| !g.is_finite()) {
                    out.push(format!("potential.center: expected {dim} finite entries"));
                }
                if !strength.is_finite() {
                    out.push("potential.strength: must be finite".into());
                }
            }
            PotentialSpec::Tabulated { values } => {
                if values.len() != num_cells {
                    out.push(format!(
                        "potential.values: expected {num_cells} cell values, got {}",
                        values.len()
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    out.push("potential.values: must be finite".into());
                }
            }
        }
        out
    }

    pub fn is_constant(&self) -> bool {
        match self {
            PotentialSpec::Constant => true,
            PotentialSpec::Linear { gradient } => gradient.iter().all(|&g| g == 0.0),
            PotentialSpec::Radial { strength, .. } => *strength == 0.0,
            PotentialSpec::Tabulated { values } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// `d phi / d x_axis` at the midpoint of an interior face.
    pub fn face_gradient(&self, grid: &Grid, axis: usize, face: [usize; 3]) -> f64 {
        match self {
            PotentialSpec::Constant => 0.0,
            PotentialSpec::Linear { gradient } => gradient[axis],
            PotentialSpec::Radial { center, strength } => {
                let x = grid.face_center(axis, face);
                strength * (x[axis] - center[axis])
            }
            PotentialSpec::Tabulated { values } => {
                if grid.is_boundary_face(axis, face) {
                    return 0.0;
                }
                let mut left = face;
                left[axis] -= 1;
                let l = grid.index(left);
                let r = grid.index(face);
                (values[r] - values[l]) / grid.h(axis)
            }
        }
    }

    /// `||grad phi||_inf` over the box.
    pub fn gradient_bound(&self, grid: &Grid) -> f64 {
        match self {
            PotentialSpec::Constant => 0.0,
            PotentialSpec::Linear { gradient } => gradient.iter().map(|g| g * g).sum::<f64>().sqrt(),
            PotentialSpec::Radial { center, strength } => {
                let far: f64 = grid
                    .lengths()
                    .iter()
                    .zip(center)
                    .map(|(&l, &c)| {
                        let d = c.abs().max((l - c).abs());
                        d * d
                    })
                    .sum();
                strength.abs() * far.sqrt()
            }
            PotentialSpec::Tabulated { .. } => {
                let mut sq = 0.0;
                for a in 0..grid.dim() {
                    let m = grid
                        .faces(a)
                        .map(|(_, f)| self.face_gradient(grid, a, f).abs())
                        .fold(0.0, f64::max);
                    sq += m * m;
                }
                sq.sqrt()
            }
        }
    }
}
