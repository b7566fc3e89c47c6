//! Run configuration: a sectioned TOML file, resolved into [`SimConfig`]
//! with defaults filled and every invariant checked.
//!
//! ```toml
//! [domain]
//! lengths = [1.0, 1.0]
//! resolution = [32, 32]
//!
//! [physics]
//! m = 1.5
//! ```
//!
//! Sections and keys are listed on [`ConfigFile`]; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsConfig;
use crate::error::{Error, Result};
use crate::grid::{make_grid, DomainConfig, ScalarField, SimState, VectorField};
use crate::harness::initial::{build_field, FieldPreset};
use crate::harness::snapshot::read_snapshot;
use crate::regularization::{
    DiffusionLaw, MagnitudeLaw, PotentialSpec, SensitivityKind, SensitivitySpec, TabulatedNode, Tensor,
};
use crate::stokes::{PoissonMethod, PoissonSolverConfig};
use crate::timestepper::{Model, SplitOrder, StepPolicy};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub domain: Option<DomainSection>,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub poisson: PoissonSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Defaults to the number of `lengths`.
    pub dim: Option<usize>,
    pub lengths: Option<Vec<f64>>,
    pub resolution: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub m: Option<f64>,
    /// Defaults to `m`.
    pub c_d: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSection {
    pub c: f64,
    pub matrix: Vec<Vec<f64>>,
    pub s0: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySection {
    /// `scalar` (default), `rotational` or `tabulated`.
    pub kind: Option<String>,
    pub c_s: Option<f64>,
    pub angle: Option<f64>,
    pub magnitude: Option<f64>,
    /// Switches the rotational magnitude to `magnitude * c / (half_saturation + c)`.
    pub half_saturation: Option<f64>,
    pub nodes: Option<Vec<NodeSection>>,
    /// Boundary cutoff width; omitted means `sqrt(eps) * min(4 h, 0.1 min L)`.
    pub cutoff: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// `constant` (default), `linear`, `radial` or `tabulated`.
    pub kind: Option<String>,
    pub gradient: Option<Vec<f64>>,
    pub center: Option<Vec<f64>>,
    pub strength: Option<f64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    /// `gaussian`, `constant` or `barenblatt` (density only).
    pub preset: Option<String>,
    pub amplitude: Option<f64>,
    pub width: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub background: Option<f64>,
    pub value: Option<f64>,
    pub t0: Option<f64>,
    pub scale: Option<f64>,
    pub axis: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Start from a snapshot instead of the presets.
    pub snapshot: Option<PathBuf>,
    #[serde(default)]
    pub n: FieldSection,
    #[serde(default)]
    pub c: FieldSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: Option<f64>,
    pub dt_max: Option<f64>,
    pub cfl_safety: Option<f64>,
    pub diagnostics_stride: Option<usize>,
    /// `n_first` (default) or `c_first`.
    pub split_order: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonSection {
    pub method: Option<PoissonMethod>,
    pub rel_tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub p_list: Option<Vec<f64>>,
    pub q_list: Option<Vec<f64>>,
    pub c_floor: Option<f64>,
    pub hessian: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    pub snapshot_times: Option<Vec<f64>>,
}

/// How the boundary cutoff width is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CutoffRule {
    /// `sqrt(eps) * min(4 h, 0.1 min L)`, recomputed whenever `eps` or the grid changes.
    Coupled,
    Fixed(f64),
}

impl CutoffRule {
    pub fn width(&self, eps: f64, domain: &DomainConfig) -> f64 {
        match *self {
            CutoffRule::Fixed(w) => w,
            CutoffRule::Coupled => {
                let h = domain
                    .lengths
                    .iter()
                    .zip(&domain.resolution)
                    .map(|(l, &n)| l / n as f64)
                    .fold(f64::INFINITY, f64::min);
                let l_min = domain.lengths.iter().copied().fold(f64::INFINITY, f64::min);
                eps.sqrt() * (4.0 * h).min(0.1 * l_min)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Presets { n: FieldPreset, c: FieldPreset },
    Snapshot(PathBuf),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    pub snapshot_times: Vec<f64>,
}

/// A fully resolved and validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub domain: DomainConfig,
    pub law: DiffusionLaw,
    /// Sensitivity with the cutoff width already resolved from `cutoff_rule`.
    pub sensitivity: SensitivitySpec,
    pub cutoff_rule: CutoffRule,
    pub potential: PotentialSpec,
    pub initial: InitialData,
    pub policy: StepPolicy,
    pub poisson: PoissonSolverConfig,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    }
}

/// Splits `a.b.c=value`; the value is read as a TOML literal, falling back to a bare string.
fn parse_override(raw: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("override `{raw}` is not of the form key.path=value")))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidArgument(format!("override `{raw}` has an empty key segment")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((path, parsed))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for seg in parents {
        let entry = cur
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("override path `{}` crosses a non-table key", path.join("."))))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| parse_error(text, e))
    }

    /// Parses `text` and applies `key.path=value` overrides before typing the result.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let file = Self::from_toml(text)?;
        if overrides.is_empty() {
            return Ok(file);
        }
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        for raw in overrides {
            let (path, value) = parse_override(raw)?;
            apply_override(&mut table, &path, value)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Parse {
            line: 0,
            message: format!("after overrides: {}", e.message()),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config sections serialize")
    }

    /// Fills defaults and checks every invariant, reporting all failures at once.
    pub fn resolve(&self, base_dir: &Path) -> Result<SimConfig> {
        let mut problems = Vec::new();

        let domain = match &self.domain {
            None => {
                problems.push("domain: section is required".into());
                None
            }
            Some(d) => match (&d.lengths, &d.resolution) {
                (Some(lengths), Some(resolution)) => {
                    let domain = DomainConfig {
                        dim: d.dim.unwrap_or(lengths.len()),
                        lengths: lengths.clone(),
                        resolution: resolution.clone(),
                    };
                    let p = domain.problems();
                    if p.is_empty() {
                        Some(domain)
                    } else {
                        problems.extend(p);
                        None
                    }
                }
                (l, r) => {
                    if l.is_none() {
                        problems.push("domain.lengths: required".into());
                    }
                    if r.is_none() {
                        problems.push("domain.resolution: required".into());
                    }
                    None
                }
            },
        };

        let law = match self.physics.m {
            None => {
                problems.push("physics.m: required".into());
                None
            }
            Some(m) => {
                let law = DiffusionLaw {
                    m,
                    c_d: self.physics.c_d.unwrap_or(m),
                    eps: self.physics.eps.unwrap_or(1e-3),
                };
                let p = law.problems();
                if p.is_empty() {
                    Some(law)
                } else {
                    problems.extend(p);
                    None
                }
            }
        };

        let cutoff_rule = match self.sensitivity.cutoff {
            None => CutoffRule::Coupled,
            Some(w) => {
                if !(w >= 0.0 && w.is_finite()) {
                    problems.push(format!("sensitivity.cutoff: must be >= 0, got {w}"));
                }
                CutoffRule::Fixed(w)
            }
        };

        let policy = self.resolve_policy(&mut problems);
        let poisson = PoissonSolverConfig {
            method: self.poisson.method.unwrap_or(PoissonMethod::Multigrid),
            rel_tolerance: self.poisson.rel_tolerance.unwrap_or(1e-10),
            max_iterations: self.poisson.max_iterations.unwrap_or(2000),
        };
        problems.extend(poisson.problems());

        let defaults = DiagnosticsConfig::default();
        let diagnostics = DiagnosticsConfig {
            p_list: self.diagnostics.p_list.clone().unwrap_or(defaults.p_list),
            q_list: self.diagnostics.q_list.clone().unwrap_or(defaults.q_list),
            c_floor: self.diagnostics.c_floor.unwrap_or(defaults.c_floor),
            hessian_dissipation: self.diagnostics.hessian.unwrap_or(false),
        };
        problems.extend(diagnostics.problems());

        let output = OutputConfig {
            csv: self.output.csv.as_ref().map(|p| base_dir.join(p)),
            snapshot_dir: self.output.snapshot_dir.as_ref().map(|p| base_dir.join(p)),
            snapshot_times: self.output.snapshot_times.clone().unwrap_or_default(),
        };
        for (k, t) in output.snapshot_times.iter().enumerate() {
            if !(t.is_finite() && *t >= 0.0) {
                problems.push(format!("output.snapshot_times[{k}]: must be >= 0, got {t}"));
            }
        }

        // the remaining sections need the domain
        let Some(domain) = domain else {
            return Err(Error::Validation(problems));
        };
        let dim = domain.dim;
        let num_cells: usize = domain.resolution.iter().product();

        let kind = self.resolve_sensitivity(dim, &mut problems);
        let potential = self.resolve_potential(dim, &mut problems);
        if let Some(p) = &potential {
            problems.extend(p.problems(dim, num_cells));
        }
        let initial = self.resolve_initial(&domain, base_dir, &mut problems);

        let (Some(law), Some(kind), Some(potential), Some(initial)) = (law, kind, potential, initial) else {
            return Err(Error::Validation(problems));
        };
        let sensitivity = SensitivitySpec::new(dim, kind, 0.0);
        let sensitivity = match sensitivity {
            Ok(s) => s.with_cutoff(cutoff_rule.width(law.eps, &domain)),
            Err(Error::Validation(p)) => {
                problems.extend(p);
                return Err(Error::Validation(problems));
            }
            Err(e) => return Err(e),
        };
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(SimConfig {
            domain,
            law,
            sensitivity,
            cutoff_rule,
            potential,
            initial,
            policy,
            poisson,
            diagnostics,
            output,
        })
    }

    fn resolve_policy(&self, problems: &mut Vec<String>) -> StepPolicy {
        let defaults = StepPolicy::default();
        let split_order = match self.time.split_order.as_deref() {
            None => defaults.split_order,
            Some(s) => SplitOrder::parse(s).unwrap_or_else(|| {
                problems.push(format!("time.split_order: expected n_first or c_first, got {s}"));
                defaults.split_order
            }),
        };
        let policy = StepPolicy {
            cfl_safety: self.time.cfl_safety.unwrap_or(defaults.cfl_safety),
            dt_max: self.time.dt_max.unwrap_or(defaults.dt_max),
            t_end: self.time.t_end.unwrap_or(defaults.t_end),
            diagnostics_stride: self.time.diagnostics_stride.unwrap_or(defaults.diagnostics_stride),
            split_order,
        };
        problems.extend(policy.problems());
        policy
    }

    fn resolve_sensitivity(&self, dim: usize, problems: &mut Vec<String>) -> Option<SensitivityKind> {
        let s = &self.sensitivity;
        match s.kind.as_deref().unwrap_or("scalar") {
            "scalar" => Some(SensitivityKind::ScalarConstant {
                c_s: s.c_s.unwrap_or(1.0),
            }),
            "rotational" => {
                let value = s.magnitude.unwrap_or(1.0);
                let magnitude = match s.half_saturation {
                    None => MagnitudeLaw::Constant(value),
                    Some(half_saturation) => MagnitudeLaw::Saturating {
                        value,
                        half_saturation,
                    },
                };
                Some(SensitivityKind::Rotational {
                    angle: s.angle.unwrap_or(std::f64::consts::FRAC_PI_4),
                    magnitude,
                })
            }
            "tabulated" => {
                let Some(nodes) = &s.nodes else {
                    problems.push("sensitivity.nodes: required for tabulated sensitivity".into());
                    return None;
                };
                let mut out = Vec::with_capacity(nodes.len());
                for (k, node) in nodes.iter().enumerate() {
                    if node.matrix.len() != dim || node.matrix.iter().any(|r| r.len() != dim) {
                        problems.push(format!("sensitivity.nodes[{k}].matrix: expected {dim}x{dim}"));
                        continue;
                    }
                    match Tensor::from_rows(&node.matrix) {
                        Ok(matrix) => out.push(TabulatedNode {
                            c: node.c,
                            matrix,
                            s0: node.s0,
                        }),
                        Err(e) => problems.push(format!("sensitivity.nodes[{k}].matrix: {e}")),
                    }
                }
                (out.len() == nodes.len()).then_some(SensitivityKind::Tabulated { nodes: out })
            }
            other => {
                problems.push(format!(
                    "sensitivity.kind: expected scalar, rotational or tabulated, got {other}"
                ));
                None
            }
        }
    }

    fn resolve_potential(&self, dim: usize, problems: &mut Vec<String>) -> Option<PotentialSpec> {
        let p = &self.potential;
        match p.kind.as_deref().unwrap_or("constant") {
            "constant" => Some(PotentialSpec::Constant),
            "linear" => Some(PotentialSpec::Linear {
                gradient: p.gradient.clone().unwrap_or_else(|| {
                    let mut g = vec![0.0; dim];
                    g[dim - 1] = 1.0;
                    g
                }),
            }),
            "radial" => Some(PotentialSpec::Radial {
                center: p.center.clone().unwrap_or_else(|| vec![0.0; dim]),
                strength: p.strength.unwrap_or(1.0),
            }),
            "tabulated" => match &p.values {
                Some(values) => Some(PotentialSpec::Tabulated { values: values.clone() }),
                None => {
                    problems.push("potential.values: required for a tabulated potential".into());
                    None
                }
            },
            other => {
                problems.push(format!(
                    "potential.kind: expected constant, linear, radial or tabulated, got {other}"
                ));
                None
            }
        }
    }

    fn resolve_initial(&self, domain: &DomainConfig, base_dir: &Path, problems: &mut Vec<String>) -> Option<InitialData> {
        if let Some(path) = &self.initial.snapshot {
            return Some(InitialData::Snapshot(base_dir.join(path)));
        }
        let n = resolve_field("initial.n", &self.initial.n, "gaussian", domain, problems);
        let c = resolve_field("initial.c", &self.initial.c, "constant", domain, problems);
        if matches!(c, Some(FieldPreset::Barenblatt { .. })) {
            problems.push("initial.c.preset: barenblatt applies to the density only".into());
            return None;
        }
        Some(InitialData::Presets { n: n?, c: c? })
    }
}

fn resolve_field(
    key: &str,
    s: &FieldSection,
    default_preset: &str,
    domain: &DomainConfig,
    problems: &mut Vec<String>,
) -> Option<FieldPreset> {
    let dim = domain.dim;
    let center_default: Vec<f64> = domain.lengths.iter().map(|l| 0.5 * l).collect();
    let l_min = domain.lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let preset = match s.preset.as_deref().unwrap_or(default_preset) {
        "gaussian" => FieldPreset::Gaussian {
            amplitude: s.amplitude.unwrap_or(1.0),
            width: s.width.unwrap_or(0.1 * l_min),
            center: s.center.clone().unwrap_or(center_default),
            background: s.background.unwrap_or(0.0),
        },
        "constant" => FieldPreset::Constant {
            value: s.value.unwrap_or(1.0),
        },
        "barenblatt" => FieldPreset::Barenblatt {
            t0: s.t0.unwrap_or(0.1),
            scale: s.scale.unwrap_or(0.1),
            axis: s.axis.unwrap_or(0),
        },
        other => {
            problems.push(format!(
                "{key}.preset: expected gaussian, constant or barenblatt, got {other}"
            ));
            return None;
        }
    };
    let before = problems.len();
    problems.extend(preset.problems(key, dim));
    (problems.len() == before).then_some(preset)
}

impl SimConfig {
    /// Reads, overrides, and resolves a config file; relative paths inside
    /// it are taken relative to the file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        ConfigFile::from_toml_with_overrides(&text, overrides)?.resolve(base)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        ConfigFile::from_toml(text)?.resolve(Path::new(""))
    }

    pub fn model(&self) -> Model {
        Model {
            law: self.law,
            sensitivity: self.sensitivity.clone(),
            potential: self.potential.clone(),
        }
    }

    /// Same configuration with a different `eps`; a coupled cutoff follows.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let mut out = self.clone();
        out.law.eps = eps;
        let p = out.law.problems();
        if !p.is_empty() {
            return Err(Error::Validation(p));
        }
        out.sensitivity = out.sensitivity.with_cutoff(out.cutoff_rule.width(eps, &out.domain));
        Ok(out)
    }

    /// Same configuration on a different mesh; a coupled cutoff follows.
    pub fn with_resolution(&self, resolution: Vec<usize>) -> Result<Self> {
        let mut out = self.clone();
        out.domain.resolution = resolution;
        let mut p = out.domain.problems();
        p.extend(out.potential.problems(out.domain.dim, out.domain.resolution.iter().product()));
        if !p.is_empty() {
            return Err(Error::Validation(p));
        }
        out.sensitivity = out
            .sensitivity
            .with_cutoff(out.cutoff_rule.width(out.law.eps, &out.domain));
        Ok(out)
    }

    /// The initial state on this configuration's grid.
    pub fn initial_state(&self) -> Result<SimState> {
        let grid = make_grid(&self.domain)?;
        match &self.initial {
            InitialData::Snapshot(path) => read_snapshot(path, &grid),
            InitialData::Presets { n, c } => {
                let n = build_field(n, &grid, &self.law)?;
                let c = build_field(c, &grid, &self.law)?;
                SimState::new(0.0, n, c, VectorField::zeros(grid.clone()), ScalarField::zeros(grid))
            }
        }
    }

    /// Every setting spelled out, so the text reproduces this configuration exactly.
    pub fn to_file(&self) -> ConfigFile {
        let sensitivity = match self.sensitivity.kind() {
            SensitivityKind::ScalarConstant { c_s } => SensitivitySection {
                kind: Some("scalar".into()),
                c_s: Some(*c_s),
                ..Default::default()
            },
            SensitivityKind::Rotational { angle, magnitude } => {
                let (value, half) = match *magnitude {
                    MagnitudeLaw::Constant(v) => (v, None),
                    MagnitudeLaw::Saturating {
                        value,
                        half_saturation,
                    } => (value, Some(half_saturation)),
                };
                SensitivitySection {
                    kind: Some("rotational".into()),
                    angle: Some(*angle),
                    magnitude: Some(value),
                    half_saturation: half,
                    ..Default::default()
                }
            }
            SensitivityKind::Tabulated { nodes } => SensitivitySection {
                kind: Some("tabulated".into()),
                nodes: Some(
                    nodes
                        .iter()
                        .map(|n| NodeSection {
                            c: n.c,
                            matrix: n.matrix.rows(),
                            s0: n.s0,
                        })
                        .collect(),
                ),
                ..Default::default()
            },
        };
        let sensitivity = SensitivitySection {
            cutoff: match self.cutoff_rule {
                CutoffRule::Coupled => None,
                CutoffRule::Fixed(w) => Some(w),
            },
            ..sensitivity
        };
        let potential = match &self.potential {
            PotentialSpec::Constant => PotentialSection {
                kind: Some("constant".into()),
                ..Default::default()
            },
            PotentialSpec::Linear { gradient } => PotentialSection {
                kind: Some("linear".into()),
                gradient: Some(gradient.clone()),
                ..Default::default()
            },
            PotentialSpec::Radial { center, strength } => PotentialSection {
                kind: Some("radial".into()),
                center: Some(center.clone()),
                strength: Some(*strength),
                ..Default::default()
            },
            PotentialSpec::Tabulated { values } => PotentialSection {
                kind: Some("tabulated".into()),
                values: Some(values.clone()),
                ..Default::default()
            },
        };
        let initial = match &self.initial {
            InitialData::Snapshot(path) => InitialSection {
                snapshot: Some(path.clone()),
                ..Default::default()
            },
            InitialData::Presets { n, c } => InitialSection {
                snapshot: None,
                n: n.to_section(),
                c: c.to_section(),
            },
        };
        ConfigFile {
            domain: Some(DomainSection {
                dim: Some(self.domain.dim),
                lengths: Some(self.domain.lengths.clone()),
                resolution: Some(self.domain.resolution.clone()),
            }),
            physics: PhysicsSection {
                m: Some(self.law.m),
                c_d: Some(self.law.c_d),
                eps: Some(self.law.eps),
            },
            sensitivity,
            potential,
            initial,
            time: TimeSection {
                t_end: Some(self.policy.t_end),
                dt_max: Some(self.policy.dt_max),
                cfl_safety: Some(self.policy.cfl_safety),
                diagnostics_stride: Some(self.policy.diagnostics_stride),
                split_order: Some(self.policy.split_order.name().into()),
            },
            poisson: PoissonSection {
                method: Some(self.poisson.method),
                rel_tolerance: Some(self.poisson.rel_tolerance),
                max_iterations: Some(self.poisson.max_iterations),
            },
            diagnostics: DiagnosticsSection {
                p_list: Some(self.diagnostics.p_list.clone()),
                q_list: Some(self.diagnostics.q_list.clone()),
                c_floor: Some(self.diagnostics.c_floor),
                hessian: Some(self.diagnostics.hessian_dissipation),
            },
            output: OutputSection {
                csv: self.output.csv.clone(),
                snapshot_dir: self.output.snapshot_dir.clone(),
                snapshot_times: Some(self.output.snapshot_times.clone()),
            },
        }
    }

    /// The resolved configuration as TOML text, plus the effective cutoff width.
    pub fn echo(&self) -> String {
        let mut text = self.to_file().to_toml();
        text.push_str(&format!(
            "\n# effective sensitivity cutoff width: {}\n",
            self.sensitivity.cutoff_eps()
        ));
        text
    }
}
