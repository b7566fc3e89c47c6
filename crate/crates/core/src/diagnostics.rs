//! Functionals evaluated along a run: mass, oxygen bounds, the
//! entropy-energy functional `int n ln n + int |grad sqrt c|^2 + int |u|^2`,
//! Lebesgue norms, sup norms, and the accumulated dissipation integrals
//! `int_0^t int n^(m-2) |grad n|^2` and `int_0^t int |grad c|^4`.

use std::fmt::Write as _;
use std::path::Path;

use crate::cell_dynamics::velocity_divergence;
use crate::error::{Error, Result};
use crate::grid::{gradient_sq, integrate, linf_norm, lp_norm, Grid, ScalarField, SimState};
use crate::regularization::DiffusionLaw;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsConfig {
    pub p_list: Vec<f64>,
    pub q_list: Vec<f64>,
    /// Lower bound on `c` in the `|grad c|^2 / 4c` integrand.
    pub c_floor: f64,
    /// Also accumulate `int_0^t int c |D^2 ln c|^2`.
    pub hessian_dissipation: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            p_list: vec![2.0, 4.0],
            q_list: vec![1.0, 2.0],
            c_floor: 1e-12,
            hessian_dissipation: false,
        }
    }
}

impl DiagnosticsConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, p) in self.p_list.iter().enumerate() {
            if !(p.is_finite() && *p >= 1.0) {
                out.push(format!("diagnostics.p_list[{k}]: must be >= 1, got {p}"));
            }
        }
        for (k, q) in self.q_list.iter().enumerate() {
            if !(q.is_finite() && *q >= 0.5) {
                out.push(format!("diagnostics.q_list[{k}]: must be >= 1/2, got {q}"));
            }
        }
        if !(self.c_floor > 0.0 && self.c_floor.is_finite()) {
            out.push(format!("diagnostics.c_floor: must be positive, got {}", self.c_floor));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub c_max: f64,
    pub c_min: f64,
    pub n_min: f64,
    pub entropy: f64,
    pub fisher: f64,
    pub kinetic: f64,
    /// `entropy + fisher + kinetic`.
    pub energy: f64,
    /// `(p, ||n||_{L^p})`.
    pub n_lp: Vec<(f64, f64)>,
    /// `(q, ||grad c||_{L^{2q}})`.
    pub grad_c_l2q: Vec<(f64, f64)>,
    pub n_linf: f64,
    pub grad_c_linf: f64,
    pub u_linf: f64,
    pub div_linf: f64,
    pub cumulative_diss_n: f64,
    pub cumulative_diss_c: f64,
    pub cumulative_diss_hessian: Option<f64>,
}

/// `int n ln n` with `x ln x := 0` for `x <= 0`.
pub fn entropy_term(n: &ScalarField) -> f64 {
    integrate(&n.map(|x| if x > 0.0 { x * x.ln() } else { 0.0 }))
}

/// `int |grad c|^2 / (4 max(c, c_floor))`.
pub fn fisher_term(c: &ScalarField, c_floor: f64) -> f64 {
    let g2 = gradient_sq(c);
    let values = g2
        .values()
        .iter()
        .zip(c.values())
        .map(|(g, &cv)| g / (4.0 * cv.max(c_floor)))
        .collect();
    integrate(&ScalarField::from_vec_unchecked(c.grid().clone(), values))
}

/// `int n^(m-2) |grad n|^2`, evaluated as `(4/m^2) int |grad n^(m/2)|^2` so it
/// stays finite where `n` vanishes.
pub fn density_dissipation(n: &ScalarField, m: f64) -> f64 {
    let root = n.map(|x| x.max(0.0).powf(0.5 * m));
    4.0 / (m * m) * integrate(&gradient_sq(&root))
}

/// `int |grad c|^4`.
pub fn oxygen_dissipation(c: &ScalarField) -> f64 {
    integrate(&gradient_sq(c).map(|g| g * g))
}

/// `int c |D^2 ln c|^2` with `c` floored before the logarithm.
pub fn hessian_dissipation(c: &ScalarField, c_floor: f64) -> f64 {
    let grid = c.grid();
    let w: Vec<f64> = c.values().iter().map(|v| v.max(c_floor).ln()).collect();
    let dim = grid.dim();
    let values = grid
        .cells()
        .map(|(idx, cell)| {
            let mut frob = 0.0;
            for a in 0..dim {
                let up = grid.neighbor_mirrored(idx, cell, a, true);
                let dn = grid.neighbor_mirrored(idx, cell, a, false);
                let haa = (w[up] - 2.0 * w[idx] + w[dn]) / (grid.h(a) * grid.h(a));
                frob += haa * haa;
                for b in (a + 1)..dim {
                    let mixed = mixed_difference(grid, &w, cell, a, b);
                    frob += 2.0 * mixed * mixed;
                }
            }
            c.values()[idx].max(0.0) * frob
        })
        .collect();
    integrate(&ScalarField::from_vec_unchecked(grid.clone(), values))
}

fn mixed_difference(grid: &Grid, w: &[f64], cell: [usize; 3], a: usize, b: usize) -> f64 {
    let n = grid.resolution();
    let shift = |i: usize, up: bool, len: usize| -> usize {
        if up {
            (i + 1).min(len - 1)
        } else {
            i.saturating_sub(1)
        }
    };
    let at = |ua: bool, ub: bool| {
        let mut c = cell;
        c[a] = shift(cell[a], ua, n[a]);
        c[b] = shift(cell[b], ub, n[b]);
        w[grid.index(c)]
    };
    (at(true, true) - at(true, false) - at(false, true) + at(false, false)) / (4.0 * grid.h(a) * grid.h(b))
}

/// Largest Euclidean norm of the cell-averaged velocity.
pub fn velocity_linf(state: &SimState) -> f64 {
    let grid = state.grid();
    let dim = grid.dim();
    grid.cells()
        .map(|(_, cell)| {
            let v = state.u.cell_average(cell);
            v[..dim].iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

/// Evaluates every functional on `state`; dissipation integrals advance by
/// `dt_since` times their current spatial value.
pub fn compute_record(
    state: &SimState,
    previous: Option<&DiagnosticsRecord>,
    dt_since: f64,
    law: &DiffusionLaw,
    cfg: &DiagnosticsConfig,
) -> Result<DiagnosticsRecord> {
    let n = &state.n;
    let c = &state.c;
    let g2 = gradient_sq(c);
    let grad_norm = g2.map(f64::sqrt);

    let entropy = entropy_term(n);
    let fisher = fisher_term(c, cfg.c_floor);
    let kinetic = state.u.norm_sq();

    let mut n_lp = Vec::with_capacity(cfg.p_list.len());
    for &p in &cfg.p_list {
        n_lp.push((p, lp_norm(n, p)?));
    }
    let mut grad_c_l2q = Vec::with_capacity(cfg.q_list.len());
    for &q in &cfg.q_list {
        grad_c_l2q.push((q, lp_norm(&grad_norm, 2.0 * q)?));
    }

    let (prev_n, prev_c, prev_h) = match previous {
        Some(r) => (r.cumulative_diss_n, r.cumulative_diss_c, r.cumulative_diss_hessian.unwrap_or(0.0)),
        None => (0.0, 0.0, 0.0),
    };
    let step = if previous.is_some() { dt_since } else { 0.0 };
    let cumulative_diss_hessian = cfg
        .hessian_dissipation
        .then(|| prev_h + step * hessian_dissipation(c, cfg.c_floor));

    Ok(DiagnosticsRecord {
        t: state.t,
        mass: integrate(n),
        c_max: linf_norm(c),
        c_min: c.min(),
        n_min: n.min(),
        entropy,
        fisher,
        kinetic,
        energy: entropy + fisher + kinetic,
        n_lp,
        grad_c_l2q,
        n_linf: linf_norm(n),
        grad_c_linf: linf_norm(&grad_norm),
        u_linf: velocity_linf(state),
        div_linf: linf_norm(&velocity_divergence(&state.u)),
        cumulative_diss_n: prev_n + step * density_dissipation(n, law.m),
        cumulative_diss_c: prev_c + step * integrate(&g2.map(|g| g * g)),
        cumulative_diss_hessian,
    })
}

impl DiagnosticsRecord {
    /// Combined sup norm `||u||_inf + ||c||_inf + ||grad c||_inf + ||n||_inf`.
    pub fn boundedness_norm(&self) -> f64 {
        self.u_linf + self.c_max + self.grad_c_linf + self.n_linf
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut cols: Vec<String> = [
            "t", "mass", "c_max", "c_min", "n_min", "entropy", "fisher", "kinetic", "energy",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        cols.extend(self.n_lp.iter().map(|(p, _)| format!("n_l{p}")));
        cols.extend(self.grad_c_l2q.iter().map(|(q, _)| format!("grad_c_l{}", 2.0 * q)));
        cols.extend(
            ["n_linf", "grad_c_linf", "u_linf", "div_linf", "cumulative_diss_n", "cumulative_diss_c"]
                .iter()
                .map(|s| s.to_string()),
        );
        if self.cumulative_diss_hessian.is_some() {
            cols.push("cumulative_diss_hessian".into());
        }
        cols
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.t,
            self.mass,
            self.c_max,
            self.c_min,
            self.n_min,
            self.entropy,
            self.fisher,
            self.kinetic,
            self.energy,
        ];
        v.extend(self.n_lp.iter().map(|(_, x)| *x));
        v.extend(self.grad_c_l2q.iter().map(|(_, x)| *x));
        v.extend([
            self.n_linf,
            self.grad_c_linf,
            self.u_linf,
            self.div_linf,
            self.cumulative_diss_n,
            self.cumulative_diss_c,
        ]);
        if let Some(h) = self.cumulative_diss_hessian {
            v.push(h);
        }
        v
    }
}

/// CSV text: the config echo as `# ` comment lines, one header row, one row
/// per record. Floats use the shortest representation that round-trips.
pub fn to_csv(records: &[DiagnosticsRecord], config_echo: &str) -> String {
    let mut out = String::new();
    for line in config_echo.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    if let Some(first) = records.first() {
        out.push_str(&first.column_names().join(","));
        out.push('\n');
    }
    for r in records {
        let row: Vec<String> = r.values().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write_csv(records: &[DiagnosticsRecord], config_echo: &str, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, to_csv(records, config_echo)).map_err(|e| Error::io(path, e))
}

/// Maximum of one functional along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalSummary {
    pub name: &'static str,
    pub max: f64,
    pub t_at_max: f64,
    /// Strictly increasing with non-shrinking increments over the final quarter.
    pub trend_flag: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundednessReport {
    pub records: usize,
    pub functionals: Vec<FunctionalSummary>,
}

impl BoundednessReport {
    pub fn get(&self, name: &str) -> Option<&FunctionalSummary> {
        self.functionals.iter().find(|f| f.name == name)
    }

    pub fn any_trend(&self) -> bool {
        self.functionals.iter().any(|f| f.trend_flag)
    }
}

fn accelerating_growth(series: &[f64]) -> bool {
    if series.len() < 3 {
        return false;
    }
    let window = (series.len() + 3) / 4;
    let tail = &series[series.len() - window.max(3)..];
    let increments: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    increments.iter().all(|&d| d > 0.0) && increments.windows(2).all(|w| w[1] >= w[0])
}

/// Per-functional maxima over the trajectory plus a heuristic blow-up trend flag.
pub fn boundedness_report(trajectory: &[DiagnosticsRecord]) -> Result<BoundednessReport> {
    if trajectory.is_empty() {
        return Err(Error::InvalidArgument("boundedness report needs at least one record".into()));
    }
    type Getter = fn(&DiagnosticsRecord) -> f64;
    let tracked: [(&'static str, Getter, bool); 12] = [
        ("mass", |r| r.mass, true),
        ("c_max", |r| r.c_max, true),
        ("entropy", |r| r.entropy, true),
        ("fisher", |r| r.fisher, true),
        ("kinetic", |r| r.kinetic, true),
        ("energy", |r| r.energy, true),
        ("n_linf", |r| r.n_linf, true),
        ("grad_c_linf", |r| r.grad_c_linf, true),
        ("u_linf", |r| r.u_linf, true),
        ("boundedness_norm", DiagnosticsRecord::boundedness_norm, true),
        ("cumulative_diss_n", |r| r.cumulative_diss_n, false),
        ("cumulative_diss_c", |r| r.cumulative_diss_c, false),
    ];
    let functionals = tracked
        .iter()
        .map(|&(name, get, flaggable)| {
            let series: Vec<f64> = trajectory.iter().map(get).collect();
            let (k, max) = series
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bk, bm), (k, v)| if v > bm { (k, v) } else { (bk, bm) });
            FunctionalSummary {
                name,
                max,
                t_at_max: trajectory[k].t,
                trend_flag: flaggable && accelerating_growth(&series),
            }
        })
        .collect();
    Ok(BoundednessReport {
        records: trajectory.len(),
        functionals,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{make_grid, DomainConfig, VectorField};

    fn grid(n: usize, l: f64) -> Arc<Grid> {
        make_grid(&DomainConfig::new(2, vec![l, l], vec![n, n]).unwrap()).unwrap()
    }

    fn law() -> DiffusionLaw {
        DiffusionLaw::new(1.5, 1.5, 1e-3).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let g = grid(8, 1.0);
        assert_eq!(entropy_term(&ScalarField::constant(g.clone(), 1.0)), 0.0);
        let e = std::f64::consts::E;
        assert!((entropy_term(&ScalarField::constant(g.clone(), e)) - e).abs() < 1e-14);
        let mut n = ScalarField::constant(g.clone(), 0.5);
        n.values_mut()[0] = 0.0;
        assert!(entropy_term(&n).is_finite());
    }

    #[test]
    fn entropy_lower_bound() {
        let g = grid(16, 1.5);
        let n = ScalarField::from_fn(g.clone(), |x| (x[0] * 7.0).sin().abs() * 0.7);
        assert!(entropy_term(&n) >= -g.volume() / std::f64::consts::E);
    }

    #[test]
    fn fisher_examples() {
        let g = grid(8, 1.0);
        assert_eq!(fisher_term(&ScalarField::constant(g.clone(), 2.0), 1e-12), 0.0);

        // c = (1 + x)^2: central differences are exact for quadratics, so the
        // interior integrand is exactly 1; wall cells see the mirrored ghost.
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = make_grid(&DomainConfig::new(2, vec![1.0, 1.0], vec![n, 4]).unwrap()).unwrap();
            let c = ScalarField::from_fn(g.clone(), |x| (1.0 + x[0]).powi(2));
            let g2 = gradient_sq(&c);
            for (idx, cell) in g.cells() {
                if cell[0] > 0 && cell[0] + 1 < n {
                    let v = g2.values()[idx] / (4.0 * c.values()[idx]);
                    assert!((v - 1.0).abs() < 1e-12);
                }
            }
            errs.push((fisher_term(&c, 1e-12) - 1.0).abs());
        }
        assert!(errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8, "{errs:?}");

        let c = ScalarField::from_fn(g.clone(), |x| 1.0 + x[0] * x[1]);
        let base = fisher_term(&c, 1e-12);
        let scaled = fisher_term(&c.map(|v| 3.0 * v), 1e-12);
        assert!((scaled - 3.0 * base).abs() < 1e-12 * base);
    }

    #[test]
    fn zero_state_gives_zero_record() {
        let g = grid(8, 1.0);
        let s = SimState::zeros(g);
        let r = compute_record(&s, None, 0.0, &law(), &DiagnosticsConfig::default()).unwrap();
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.entropy, 0.0);
        assert!(r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_decay_energy_is_constant() {
        let g = grid(8, 2.0);
        let nbar: f64 = 0.7;
        let mut s = SimState::zeros(g.clone());
        s.n = ScalarField::constant(g.clone(), nbar);
        let mut prev = None;
        for k in 0..5 {
            s.t = 0.1 * k as f64;
            s.c = ScalarField::constant(g.clone(), (-nbar * s.t).exp());
            let r = compute_record(&s, prev.as_ref(), 0.1, &law(), &DiagnosticsConfig::default()).unwrap();
            assert_eq!(r.fisher, 0.0);
            assert_eq!(r.kinetic, 0.0);
            assert!((r.energy - nbar * 4.0 * nbar.ln()).abs() < 1e-14);
            prev = Some(r);
        }
    }

    #[test]
    fn cumulative_rectangle_rule() {
        let g = grid(8, 1.0);
        let mut s = SimState::zeros(g.clone());
        s.c = ScalarField::from_fn(g.clone(), |x| 1.0 + 0.5 * x[0]);
        let cfg = DiagnosticsConfig::default();
        let r0 = compute_record(&s, None, 0.0, &law(), &cfg).unwrap();
        assert_eq!(r0.cumulative_diss_c, 0.0);
        s.t = 0.25;
        let r1 = compute_record(&s, Some(&r0), 0.25, &law(), &cfg).unwrap();
        let expected = 0.25 * oxygen_dissipation(&s.c);
        assert!((r1.cumulative_diss_c - expected).abs() < 1e-15);
        let r2 = compute_record(&s, Some(&r1), 0.25, &law(), &cfg).unwrap();
        assert!(r2.cumulative_diss_c >= r1.cumulative_diss_c);
        assert!((r2.cumulative_diss_c - 2.0 * expected).abs() < 1e-15);
    }

    #[test]
    fn density_dissipation_matches_direct_form_where_positive() {
        let g = grid(32, 1.0);
        let n = ScalarField::from_fn(g.clone(), |x| 1.0 + 0.3 * (3.0 * x[0]).cos());
        let m = 1.5;
        let direct = integrate(
            &ScalarField::new(
                g.clone(),
                gradient_sq(&n)
                    .values()
                    .iter()
                    .zip(n.values())
                    .map(|(g2, nv)| nv.powf(m - 2.0) * g2)
                    .collect(),
            )
            .unwrap(),
        );
        let via_root = density_dissipation(&n, m);
        assert!((direct - via_root).abs() / direct < 0.02);
    }

    #[test]
    fn hessian_of_log_exponential_vanishes() {
        // ln c linear => D^2 ln c = 0 away from the mirrored walls
        let g = grid(16, 1.0);
        let c = ScalarField::from_fn(g.clone(), |x| (0.3 * x[0] - 0.2 * x[1]).exp());
        let inner = {
            let w: Vec<f64> = c.values().iter().map(|v| v.ln()).collect();
            let cell = [5, 7, 0];
            mixed_difference(&g, &w, cell, 0, 1)
        };
        assert!(inner.abs() < 1e-12);
        assert!(hessian_dissipation(&c, 1e-12) >= 0.0);
        assert_eq!(hessian_dissipation(&ScalarField::constant(g.clone(), 2.0), 1e-12), 0.0);
    }

    fn record_with(t: f64, n_linf: f64, c_max: f64) -> DiagnosticsRecord {
        let g = grid(4, 1.0);
        let mut r = compute_record(&SimState::zeros(g), None, 0.0, &law(), &DiagnosticsConfig::default()).unwrap();
        r.t = t;
        r.n_linf = n_linf;
        r.c_max = c_max;
        r
    }

    #[test]
    fn boundedness_report_examples() {
        assert!(boundedness_report(&[]).is_err());

        let single = [record_with(0.0, 2.0, 1.0)];
        let rep = boundedness_report(&single).unwrap();
        assert_eq!(rep.get("n_linf").unwrap().max, 2.0);
        assert_eq!(rep.get("c_max").unwrap().max, 1.0);
        assert!(!rep.any_trend());

        let decaying: Vec<_> = (0..8).map(|k| record_with(k as f64, 1.0, (-(k as f64)).exp())).collect();
        let rep = boundedness_report(&decaying).unwrap();
        assert_eq!(rep.get("c_max").unwrap().t_at_max, 0.0);
        assert!(!rep.get("c_max").unwrap().trend_flag);

        let doubling: Vec<_> = (0..12).map(|k| record_with(k as f64, 2f64.powi(k), 1.0)).collect();
        let rep = boundedness_report(&doubling).unwrap();
        assert!(rep.get("n_linf").unwrap().trend_flag);
        assert!(rep.get("boundedness_norm").unwrap().trend_flag);

        // saturating growth is not flagged
        let saturating: Vec<_> = (0..12).map(|k| record_with(k as f64, 2.0 - (-(k as f64)).exp(), 1.0)).collect();
        assert!(!boundedness_report(&saturating).unwrap().get("n_linf").unwrap().trend_flag);
    }

    #[test]
    fn csv_layout() {
        let g = grid(4, 1.0);
        let mut s = SimState::zeros(g.clone());
        s.u = VectorField::zeros(g);
        let r = compute_record(&s, None, 0.0, &law(), &DiagnosticsConfig::default()).unwrap();
        let csv = to_csv(&[r.clone(), r], "[physics]\nm = 1.5");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# [physics]");
        assert_eq!(lines[1], "# m = 1.5");
        assert!(lines[2].starts_with("t,mass,c_max"));
        assert!(lines[2].contains("n_l2,n_l4,grad_c_l2,grad_c_l4"));
        assert_eq!(lines.len(), 5);
    }
}
