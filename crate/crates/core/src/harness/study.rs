//! Convergence studies in the regularization parameter and in the mesh.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{integrate, make_grid, ScalarField};
use crate::harness::config::{InitialData, SimConfig};
use crate::harness::initial::{barenblatt_field, FieldPreset};
use crate::timestepper::run;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub parameter: f64,
    /// L1 distance to the reference of this row; `None` if unavailable.
    pub distance: Option<f64>,
    /// Previous row's distance over this row's.
    pub ratio: Option<f64>,
    /// `log(ratio) / log(refinement factor)` for mesh studies.
    pub order: Option<f64>,
    /// Error message of a member run that did not finish.
    pub aborted: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub parameter_name: String,
    /// What each distance is measured against.
    pub reference: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn distances(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.distance).collect()
    }

    /// Rows whose distance failed to shrink relative to the previous row.
    pub fn non_decreasing(&self) -> Vec<usize> {
        (1..self.rows.len())
            .filter(|&k| match (self.rows[k - 1].distance, self.rows[k].distance) {
                (Some(a), Some(b)) => b >= a,
                _ => false,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# reference: {}\n", self.reference);
        let _ = writeln!(out, "{},distance,ratio,order,aborted", self.parameter_name);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.parameter,
                opt(r.distance),
                opt(r.ratio),
                opt(r.order),
                r.aborted.as_deref().unwrap_or("").replace(['\n', ','], " ")
            );
        }
        out
    }
}

fn l1_distance(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    Ok(integrate(&a.axpy(-1.0, b)?.map(f64::abs)))
}

fn final_density(cfg: &SimConfig) -> std::result::Result<ScalarField, String> {
    run(cfg).map(|out| out.final_state.n).map_err(|e| e.to_string())
}

fn fill_ratios(rows: &mut [ConvergenceRow], factors: Option<&[f64]>) {
    for k in 1..rows.len() {
        if let (Some(a), Some(b)) = (rows[k - 1].distance, rows[k].distance) {
            if b > 0.0 {
                let ratio = a / b;
                rows[k].ratio = Some(ratio);
                if let Some(f) = factors {
                    rows[k].order = Some(ratio.ln() / f[k].ln());
                }
            }
        }
    }
}

/// Runs `base` once per entry of `eps_list` and tabulates
/// `||n_eps_i(t_end) - n_eps_(i+1)(t_end)||_L1`.
pub fn epsilon_study(base: &SimConfig, eps_list: &[f64]) -> Result<ConvergenceTable> {
    if eps_list.len() < 2 {
        return Err(Error::InvalidArgument("eps_list needs at least two entries".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] <= w[0])) {
        return Err(Error::InvalidArgument("eps_list must be non-increasing".into()));
    }
    let configs: Vec<SimConfig> = eps_list.iter().map(|&e| base.with_eps(e)).collect::<Result<_>>()?;
    let finals: Vec<_> = configs.par_iter().map(final_density).collect();
    let mut rows: Vec<ConvergenceRow> = eps_list
        .iter()
        .zip(&finals)
        .map(|(&eps, f)| ConvergenceRow {
            parameter: eps,
            distance: None,
            ratio: None,
            order: None,
            aborted: f.as_ref().err().cloned(),
        })
        .collect();
    for k in 0..eps_list.len() - 1 {
        if let (Ok(a), Ok(b)) = (&finals[k], &finals[k + 1]) {
            rows[k].distance = Some(l1_distance(a, b)?);
        }
    }
    fill_ratios(&mut rows, None);
    Ok(ConvergenceTable {
        parameter_name: "eps".into(),
        reference: "next eps".into(),
        rows,
    })
}

/// Cell average of `fine` onto the grid of `coarse_cfg`; each resolution must divide the fine one.
pub fn restrict(fine: &ScalarField, coarse: &std::sync::Arc<crate::grid::Grid>) -> Result<ScalarField> {
    let fg = fine.grid();
    let dim = fg.dim();
    let mut ratio = [1usize; 3];
    for a in 0..dim {
        let (nf, nc) = (fg.resolution()[a], coarse.resolution()[a]);
        if nc == 0 || nf % nc != 0 {
            return Err(Error::InvalidArgument(format!(
                "resolution {nc} does not divide {nf} along axis {a}"
            )));
        }
        ratio[a] = nf / nc;
    }
    let weight = 1.0 / (ratio[0] * ratio[1] * ratio[2]) as f64;
    let mut out = vec![0.0; coarse.num_cells()];
    for (idx, cell) in fg.cells() {
        let cc = [cell[0] / ratio[0], cell[1] / ratio[1], cell[2] / ratio[2]];
        out[coarse.index(cc)] += weight * fine.values()[idx];
    }
    ScalarField::new(coarse.clone(), out)
}

/// Runs `base` at each resolution and reports the L1 error of the final
/// density, against the Barenblatt profile when that preset is selected and
/// against the restricted finest run otherwise.
pub fn refinement_study(base: &SimConfig, resolutions: &[Vec<usize>]) -> Result<ConvergenceTable> {
    if resolutions.len() < 3 {
        return Err(Error::InvalidArgument("refinement needs at least three resolutions".into()));
    }
    let mut factors = vec![1.0];
    for w in resolutions.windows(2) {
        if w[0].len() != w[1].len() {
            return Err(Error::InvalidArgument("resolutions differ in dimension".into()));
        }
        if w[0] == w[1] {
            return Err(Error::InvalidArgument(format!("resolution {:?} repeats", w[0])));
        }
        for (a, (&c, &f)) in w[0].iter().zip(&w[1]).enumerate() {
            if c == 0 || f < c || f % c != 0 {
                return Err(Error::InvalidArgument(format!(
                    "resolution {c} does not divide {f} along axis {a}"
                )));
            }
        }
        factors.push(w[1][0] as f64 / w[0][0] as f64);
    }
    let configs: Vec<SimConfig> = resolutions
        .iter()
        .map(|r| base.with_resolution(r.clone()))
        .collect::<Result<_>>()?;
    let finals: Vec<_> = configs.par_iter().map(final_density).collect();

    let barenblatt = match &base.initial {
        InitialData::Presets {
            n: FieldPreset::Barenblatt { t0, scale, axis },
            ..
        } => Some((*t0, *scale, *axis)),
        _ => None,
    };
    let mut rows = Vec::with_capacity(resolutions.len());
    for (k, (cfg, f)) in configs.iter().zip(&finals).enumerate() {
        let mut row = ConvergenceRow {
            parameter: resolutions[k][0] as f64,
            distance: None,
            ratio: None,
            order: None,
            aborted: f.as_ref().err().cloned(),
        };
        if let Ok(n) = f {
            let grid = make_grid(&cfg.domain)?;
            row.distance = match barenblatt {
                Some((t0, scale, axis)) => {
                    let exact = barenblatt_field(&grid, &cfg.law, t0 + cfg.policy.t_end, scale, axis);
                    Some(l1_distance(n, &exact)?)
                }
                None if k + 1 < finals.len() => match finals.last().expect("nonempty") {
                    Ok(finest) => Some(l1_distance(n, &restrict(finest, &grid)?)?),
                    Err(_) => None,
                },
                None => None,
            };
        }
        rows.push(row);
    }
    fill_ratios(&mut rows, Some(&factors));
    Ok(ConvergenceTable {
        parameter_name: "resolution".into(),
        reference: if barenblatt.is_some() {
            "analytic Barenblatt profile".into()
        } else {
            "finest run".into()
        },
        rows,
    })
}
