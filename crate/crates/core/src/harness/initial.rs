//! Initial-data presets.

use std::sync::Arc;

use crate::error::Result;
use crate::grid::{Grid, ScalarField};
use crate::harness::config::FieldSection;
use crate::regularization::DiffusionLaw;

#[derive(Clone, Debug, PartialEq)]
pub enum FieldPreset {
    /// `background + amplitude * exp(-|x - center|^2 / (2 width^2))`.
    Gaussian {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
        background: f64,
    },
    Constant { value: f64 },
    /// One-dimensional Barenblatt profile along `axis` at time `t0`, centred in the box.
    Barenblatt { t0: f64, scale: f64, axis: usize },
}

impl FieldPreset {
    pub fn problems(&self, key: &str, dim: usize) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            FieldPreset::Gaussian {
                amplitude,
                width,
                center,
                background,
            } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    out.push(format!("{key}.amplitude: must be >= 0, got {amplitude}"));
                }
                if !(width.is_finite() && *width > 0.0) {
                    out.push(format!("{key}.width: must be positive, got {width}"));
                }
                if center.len() != dim || center.iter().any(|c| !c.is_finite()) {
                    out.push(format!("{key}.center: expected {dim} finite entries"));
                }
                if !(background.is_finite() && *background >= 0.0) {
                    out.push(format!("{key}.background: must be >= 0, got {background}"));
                }
            }
            FieldPreset::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    out.push(format!("{key}.value: must be >= 0, got {value}"));
                }
            }
            FieldPreset::Barenblatt { t0, scale, axis } => {
                if !(t0.is_finite() && *t0 > 0.0) {
                    out.push(format!("{key}.t0: must be positive, got {t0}"));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    out.push(format!("{key}.scale: must be positive, got {scale}"));
                }
                if *axis >= dim {
                    out.push(format!("{key}.axis: must be below {dim}, got {axis}"));
                }
            }
        }
        out
    }

    pub(crate) fn to_section(&self) -> FieldSection {
        match self {
            FieldPreset::Gaussian {
                amplitude,
                width,
                center,
                background,
            } => FieldSection {
                preset: Some("gaussian".into()),
                amplitude: Some(*amplitude),
                width: Some(*width),
                center: Some(center.clone()),
                background: Some(*background),
                ..Default::default()
            },
            FieldPreset::Constant { value } => FieldSection {
                preset: Some("constant".into()),
                value: Some(*value),
                ..Default::default()
            },
            FieldPreset::Barenblatt { t0, scale, axis } => FieldSection {
                preset: Some("barenblatt".into()),
                t0: Some(*t0),
                scale: Some(*scale),
                axis: Some(*axis),
                ..Default::default()
            },
        }
    }
}

/// Source-type solution of `n_t = C_D / m * (n^m)_xx` on the line:
/// `tau^-a (scale - k (xi tau^-a)^2)_+^(1/(m-1))` with `tau = C_D t / m`,
/// `a = 1/(m+1)`, `k = (m-1) / (2 m (m+1))`.
pub fn barenblatt_profile(xi: f64, t: f64, m: f64, c_d: f64, scale: f64) -> f64 {
    let tau = c_d / m * t;
    let alpha = 1.0 / (m + 1.0);
    let k = (m - 1.0) / (2.0 * m * (m + 1.0));
    let s = tau.powf(-alpha);
    let z = xi * s;
    let base = scale - k * z * z;
    if base <= 0.0 {
        0.0
    } else {
        s * base.powf(1.0 / (m - 1.0))
    }
}

/// Barenblatt density sampled at cell centres.
pub fn barenblatt_field(grid: &Arc<Grid>, law: &DiffusionLaw, t: f64, scale: f64, axis: usize) -> ScalarField {
    let mid = 0.5 * grid.lengths()[axis];
    ScalarField::from_fn(grid.clone(), |x| barenblatt_profile(x[axis] - mid, t, law.m, law.c_d, scale))
}

pub fn build_field(preset: &FieldPreset, grid: &Arc<Grid>, law: &DiffusionLaw) -> Result<ScalarField> {
    let field = match preset {
        FieldPreset::Gaussian {
            amplitude,
            width,
            center,
            background,
        } => {
            let inv = 1.0 / (2.0 * width * width);
            ScalarField::from_fn(grid.clone(), |x| {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                background + amplitude * (-r2 * inv).exp()
            })
        }
        FieldPreset::Constant { value } => ScalarField::constant(grid.clone(), *value),
        FieldPreset::Barenblatt { t0, scale, axis } => barenblatt_field(grid, law, *t0, *scale, *axis),
    };
    field.check_finite("initial data")?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barenblatt_conserves_mass_and_spreads() {
        let (m, c_d, scale) = (2.0, 2.0, 0.1);
        let mass = |t: f64| {
            let n = 20000;
            let dx = 8.0 / n as f64;
            (0..n)
                .map(|i| barenblatt_profile(-4.0 + (i as f64 + 0.5) * dx, t, m, c_d, scale) * dx)
                .sum::<f64>()
        };
        let (a, b) = (mass(0.1), mass(0.4));
        assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
        assert_eq!(barenblatt_profile(3.0, 0.1, m, c_d, scale), 0.0);
        assert!(barenblatt_profile(0.0, 0.4, m, c_d, scale) < barenblatt_profile(0.0, 0.1, m, c_d, scale));
    }

    #[test]
    fn barenblatt_solves_the_equation() {
        // n_t = (C_D/m) (n^m)_xx checked by finite differences inside the support
        let (m, c_d, scale) = (1.5, 3.0, 0.2);
        let (x, t, h) = (0.05, 0.3, 1e-4);
        let f = |x: f64, t: f64| barenblatt_profile(x, t, m, c_d, scale);
        let nt = (f(x, t + h) - f(x, t - h)) / (2.0 * h);
        let g = |x: f64| f(x, t).powf(m);
        let lap = (g(x + h) - 2.0 * g(x) + g(x - h)) / (h * h);
        assert!((nt - c_d / m * lap).abs() < 1e-4 * nt.abs().max(1.0), "{nt} {}", c_d / m * lap);
    }
}
