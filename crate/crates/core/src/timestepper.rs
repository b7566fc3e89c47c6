//! Explicit Lie-split advancement of `(n, c, u, P)` and the run loop.

use std::sync::Arc;

use crate::cell_dynamics::{
    advect, chemotactic_velocity, chemotaxis_divergence, consumption, laplacian_neumann, porous_medium_divergence,
    velocity_divergence, DIVERGENCE_TOL,
};
use crate::diagnostics::{
    compute_record, density_dissipation, hessian_dissipation, oxygen_dissipation, DiagnosticsConfig,
    DiagnosticsRecord,
};
use crate::error::{Error, Result};
use crate::grid::{integrate, linf_norm, make_grid, Grid, ScalarField, SimState, VectorField, POSITIVITY_TOL};
use crate::harness::config::SimConfig;
use crate::regularization::{DiffusionLaw, PotentialSpec, SensitivitySpec};
use crate::stokes::{PoissonSolverConfig, StokesSolver};

/// Steps shorter than this are treated as a collapse of the solution.
pub const DT_FLOOR: f64 = 1e-14;
/// Densities above this abort the run.
pub const N_CEILING: f64 = 1e12;

/// Which scalar is updated first within a step; velocity always comes last.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitOrder {
    #[default]
    DensityFirst,
    OxygenFirst,
}

impl SplitOrder {
    pub fn name(self) -> &'static str {
        match self {
            SplitOrder::DensityFirst => "n_first",
            SplitOrder::OxygenFirst => "c_first",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "n_first" => Some(SplitOrder::DensityFirst),
            "c_first" => Some(SplitOrder::OxygenFirst),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepPolicy {
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub diagnostics_stride: usize,
    pub split_order: SplitOrder,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            cfl_safety: 0.4,
            dt_max: 1e-2,
            t_end: 0.5,
            diagnostics_stride: 10,
            split_order: SplitOrder::DensityFirst,
        }
    }
}

impl StepPolicy {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            out.push(format!("time.cfl_safety: must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            out.push(format!("time.dt_max: must be positive, got {}", self.dt_max));
        }
        // t_end = 0 is allowed and yields the initial record only
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            out.push(format!("time.t_end: must be >= 0, got {}", self.t_end));
        }
        if self.diagnostics_stride == 0 {
            out.push("time.diagnostics_stride: must be positive".into());
        }
        out
    }
}

/// Coefficients of the system that stay fixed during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub law: DiffusionLaw,
    pub sensitivity: SensitivitySpec,
    pub potential: PotentialSpec,
}

/// The individual step-size limits on one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtBounds {
    /// `1 / (2 max D_eps sum h^-2)`.
    pub n_diffusion: f64,
    /// `1 / (2 sum h^-2)`, shared by `c` and `u`.
    pub unit_diffusion: f64,
    /// `h / max |u|`.
    pub transport: f64,
    /// `h / max |S_eps grad c|`.
    pub drift: f64,
    /// `1 / max n`.
    pub consumption: f64,
    /// Largest step keeping every coefficient of the explicit `n` update nonnegative.
    pub n_positivity: f64,
    /// Same for the `c` update, with headroom for `n` growing during the step.
    pub c_positivity: f64,
}

impl DtBounds {
    /// `cfl_safety` times the smallest CFL bound, never above either positivity bound.
    pub fn stable(&self, cfl_safety: f64) -> f64 {
        let cfl = self
            .n_diffusion
            .min(self.unit_diffusion)
            .min(self.transport)
            .min(self.drift)
            .min(self.consumption);
        (cfl_safety * cfl).min(self.n_positivity).min(self.c_positivity)
    }
}

fn recip(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x
    } else {
        f64::INFINITY
    }
}

/// Stateful stepper that keeps the Poisson hierarchy between steps.
#[derive(Clone, Debug)]
pub struct Stepper {
    model: Model,
    policy: StepPolicy,
    stokes: StokesSolver,
}

impl Stepper {
    pub fn new(
        grid: Arc<Grid>,
        model: Model,
        policy: StepPolicy,
        poisson: PoissonSolverConfig,
    ) -> Result<Self> {
        let mut problems = model.law.problems();
        problems.extend(model.sensitivity.problems());
        problems.extend(model.potential.problems(grid.dim(), grid.num_cells()));
        problems.extend(policy.problems());
        if model.sensitivity.dim() != grid.dim() {
            problems.push("sensitivity: dimension differs from the domain".into());
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self {
            model,
            policy,
            stokes: StokesSolver::new(grid, poisson)?,
        })
    }

    pub fn from_config(config: &SimConfig) -> Result<Self> {
        let grid = make_grid(&config.domain)?;
        Self::new(grid, config.model(), config.policy.clone(), config.poisson)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn policy(&self) -> &StepPolicy {
        &self.policy
    }

    pub fn dt_bounds(&self, state: &SimState) -> Result<DtBounds> {
        let grid = state.grid().clone();
        let dim = grid.dim();
        let inv_h2 = grid.inv_h2_sum();
        let h = grid.min_spacing();
        let n = state.n.values();
        let n_max = state.n.max().max(0.0);
        let d_max = self.model.law.eval_clamped(n_max);

        let drift = chemotactic_velocity(&state.n, &state.c, &self.model.sensitivity)?;
        let u = &state.u;

        // outflow coefficients of the explicit n and c updates, per cell
        let mut n_out = vec![0.0; grid.num_cells()];
        let mut c_out = vec![0.0; grid.num_cells()];
        for a in 0..dim {
            let stride = grid.stride(a);
            let h_a = grid.h(a);
            let w = drift.component(a);
            let ua = u.component(a);
            for (fi, face) in grid.faces(a) {
                if grid.is_boundary_face(a, face) {
                    continue;
                }
                let r = grid.index(face);
                let l = r - stride;
                let d = self.model.law.eval_clamped(0.5 * (n[l] + n[r])) / (h_a * h_a);
                let (w_pos, w_neg) = (w[fi].max(0.0) / h_a, (-w[fi]).max(0.0) / h_a);
                let (u_pos, u_neg) = (ua[fi].max(0.0) / h_a, (-ua[fi]).max(0.0) / h_a);
                n_out[l] += d + w_pos + u_pos;
                n_out[r] += d + w_neg + u_neg;
                let k = 1.0 / (h_a * h_a);
                c_out[l] += k + u_pos;
                c_out[r] += k + u_neg;
            }
        }
        let n_out_max = n_out.iter().fold(0.0, |m: f64, &v| m.max(v));
        let c_out_max = c_out.iter().fold(0.0, |m: f64, &v| m.max(v));

        Ok(DtBounds {
            n_diffusion: recip(2.0 * d_max * inv_h2),
            unit_diffusion: recip(2.0 * inv_h2),
            transport: h * recip(u.max_abs()),
            drift: h * recip(drift.max_abs()),
            consumption: recip(n_max),
            n_positivity: recip(n_out_max),
            c_positivity: recip(c_out_max + 2.0 * n_max),
        })
    }

    /// Step limited by stability only, before the `dt_max` and end-time caps.
    pub fn uncapped_dt(&self, state: &SimState) -> Result<f64> {
        Ok(self.dt_bounds(state)?.stable(self.policy.cfl_safety))
    }

    /// Stable step capped by `dt_max` and the time left to `t_end`. Aborts
    /// with a blow-up report when the stable step collapses.
    pub fn stable_dt(&self, state: &SimState) -> Result<f64> {
        let dt = self.uncapped_dt(state)?;
        if dt < DT_FLOOR {
            return Err(blow_up(state, dt));
        }
        let remaining = (self.policy.t_end - state.t).max(0.0);
        Ok(dt.min(self.policy.dt_max).min(remaining))
    }

    fn update_density(&self, n: &ScalarField, c: &ScalarField, u: &VectorField, dt: f64) -> Result<ScalarField> {
        let mut rate = porous_medium_divergence(n, &self.model.law)?;
        if !self.model.sensitivity.is_zero() {
            rate = rate.axpy(1.0, &chemotaxis_divergence(n, c, &self.model.sensitivity)?)?;
        }
        rate = rate.axpy(1.0, &advect(n, u)?)?;
        n.axpy(dt, &rate)
    }

    fn update_oxygen(&self, n: &ScalarField, c: &ScalarField, u: &VectorField, dt: f64) -> Result<ScalarField> {
        let rate = laplacian_neumann(c)
            .axpy(1.0, &consumption(n, c)?)?
            .axpy(1.0, &advect(c, u)?)?;
        c.axpy(dt, &rate)
    }

    /// One Lie-split step: the two scalars in `split_order`, then the Stokes update
    /// driven by the new density. Postcondition failures carry the input state.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("step needs a positive dt, got {dt}")));
        }
        state.validate()?;
        let (n_new, c_new) = match self.policy.split_order {
            SplitOrder::DensityFirst => {
                let n_new = self.update_density(&state.n, &state.c, &state.u, dt)?;
                let c_new = self.update_oxygen(&n_new, &state.c, &state.u, dt)?;
                (n_new, c_new)
            }
            SplitOrder::OxygenFirst => {
                let c_new = self.update_oxygen(&state.n, &state.c, &state.u, dt)?;
                let n_new = self.update_density(&state.n, &c_new, &state.u, dt)?;
                (n_new, c_new)
            }
        };
        let fail = |what: String| Error::Postcondition {
            t: state.t,
            what,
            state: Box::new(state.clone()),
        };

        let mass_old = integrate(&state.n);
        let mass_new = integrate(&n_new);
        let scale = integrate(&state.n.map(f64::abs));
        if (mass_new - mass_old).abs() > 1e-12 * scale {
            return Err(fail(format!("mass changed from {mass_old:e} to {mass_new:e}")));
        }
        if n_new.min() < -POSITIVITY_TOL {
            return Err(fail(format!("n became negative: min {:e}", n_new.min())));
        }
        if c_new.min() < -POSITIVITY_TOL {
            return Err(fail(format!("c became negative: min {:e}", c_new.min())));
        }
        let c_bound = linf_norm(&state.c) * (1.0 + 1e-12);
        if linf_norm(&c_new) > c_bound {
            return Err(fail(format!(
                "max c grew from {:e} to {:e}",
                linf_norm(&state.c),
                linf_norm(&c_new)
            )));
        }

        let driven = SimState {
            t: state.t,
            n: n_new,
            c: c_new,
            u: state.u.clone(),
            p: state.p.clone(),
        };
        let (u_new, p_new) = self.stokes.stokes_step(&driven, &self.model.potential, dt)?;
        let div = linf_norm(&velocity_divergence(&u_new));
        if div > DIVERGENCE_TOL {
            return Err(fail(format!("velocity divergence {div:e} after projection")));
        }
        Ok(SimState {
            t: state.t + dt,
            n: driven.n,
            c: driven.c,
            u: u_new,
            p: p_new,
        })
    }
}

fn blow_up(state: &SimState, dt: f64) -> Error {
    Error::BlowUp {
        t: state.t,
        dt,
        n_max: state.n.max(),
        state: Box::new(state.clone()),
    }
}

/// `cfl_safety * min(CFL bounds)` capped by `dt_max` and the remaining time.
pub fn stable_dt(state: &SimState, config: &SimConfig) -> Result<f64> {
    Stepper::from_config(config)?.stable_dt(state)
}

pub fn step(state: &SimState, config: &SimConfig, dt: f64) -> Result<SimState> {
    Stepper::from_config(config)?.step(state, dt)
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    /// States at the configured snapshot times, in order.
    pub snapshots: Vec<SimState>,
    pub final_state: SimState,
    pub steps: usize,
}

/// Emitted at each recorded step.
#[derive(Clone, Copy, Debug)]
pub struct Progress<'a> {
    pub record: &'a DiagnosticsRecord,
    /// Size of the step that produced the record; zero for the initial record.
    pub dt: f64,
    pub step: usize,
}

/// `t=<f> dt=<f> mass=<f> cmax=<f> E=<f>`.
pub fn progress_line(p: &Progress<'_>) -> String {
    format!(
        "t={} dt={} mass={} cmax={} E={}",
        p.record.t, p.dt, p.record.mass, p.record.c_max, p.record.energy
    )
}

/// Space-time integrals accumulated once per step.
#[derive(Clone, Copy, Debug, Default)]
struct Dissipation {
    n: f64,
    c: f64,
    hessian: f64,
}

impl Dissipation {
    fn advance(&mut self, state: &SimState, dt: f64, law: &DiffusionLaw, cfg: &DiagnosticsConfig) {
        self.n += dt * density_dissipation(&state.n, law.m);
        self.c += dt * oxygen_dissipation(&state.c);
        if cfg.hessian_dissipation {
            self.hessian += dt * hessian_dissipation(&state.c, cfg.c_floor);
        }
    }

    fn record(&self, state: &SimState, law: &DiffusionLaw, cfg: &DiagnosticsConfig) -> Result<DiagnosticsRecord> {
        let mut r = compute_record(state, None, 0.0, law, cfg)?;
        r.cumulative_diss_n = self.n;
        r.cumulative_diss_c = self.c;
        if cfg.hessian_dissipation {
            r.cumulative_diss_hessian = Some(self.hessian);
        }
        Ok(r)
    }
}

/// Runs from the configured initial data to `t_end`.
pub fn run(config: &SimConfig) -> Result<RunOutput> {
    run_with(config, |_| {})
}

/// Like [`run`], calling `observer` for every diagnostics record as it is produced.
pub fn run_with(config: &SimConfig, observer: impl FnMut(&Progress<'_>)) -> Result<RunOutput> {
    let state = config.initial_state()?;
    run_from(config, state, observer)
}

/// Advances `state` to `t_end` under `config`.
pub fn run_from(config: &SimConfig, mut state: SimState, mut observer: impl FnMut(&Progress<'_>)) -> Result<RunOutput> {
    let stepper = Stepper::from_config(config)?;
    state.validate()?;
    let law = &config.law;
    let diag = &config.diagnostics;
    let policy = &config.policy;
    let t_end = policy.t_end;

    let mut snapshot_times: Vec<f64> = config
        .output
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t >= state.t && t <= t_end)
        .collect();
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();
    let mut next_snapshot = 0;
    let mut snapshots = Vec::new();
    let take_snapshots = |state: &SimState, next: &mut usize, snaps: &mut Vec<SimState>| {
        while *next < snapshot_times.len() && snapshot_times[*next] <= state.t + time_slack(t_end) {
            snaps.push(state.clone());
            *next += 1;
        }
    };

    let mut dissipation = Dissipation::default();
    let mut records = vec![dissipation.record(&state, law, diag)?];
    observer(&Progress {
        record: &records[0],
        dt: 0.0,
        step: 0,
    });
    take_snapshots(&state, &mut next_snapshot, &mut snapshots);

    let mut steps = 0;
    while t_end - state.t > time_slack(t_end) {
        let uncapped = stepper.uncapped_dt(&state)?;
        if uncapped < DT_FLOOR || state.n.max() > N_CEILING {
            return Err(blow_up(&state, uncapped));
        }
        let mut dt = uncapped.min(policy.dt_max);
        let remaining = t_end - state.t;
        // absorb a sliver rather than take a roundoff-sized final step
        if dt >= remaining - time_slack(t_end) {
            dt = remaining;
        }
        if let Some(&ts) = snapshot_times.get(next_snapshot) {
            if ts - state.t > time_slack(t_end) && dt > ts - state.t {
                dt = ts - state.t;
            }
        }
        let mut next = stepper.step(&state, dt)?;
        steps += 1;
        let finished = t_end - next.t <= time_slack(t_end);
        if finished {
            next.t = t_end;
        }
        dissipation.advance(&next, dt, law, diag);
        if next.n.max() > N_CEILING {
            return Err(blow_up(&next, dt));
        }
        state = next;
        take_snapshots(&state, &mut next_snapshot, &mut snapshots);
        if steps % policy.diagnostics_stride == 0 || finished {
            records.push(dissipation.record(&state, law, diag)?);
            observer(&Progress {
                record: records.last().expect("just pushed"),
                dt,
                step: steps,
            });
        }
    }

    Ok(RunOutput {
        records,
        snapshots,
        final_state: state,
        steps,
    })
}

fn time_slack(t_end: f64) -> f64 {
    1e-12 * t_end.max(1.0)
}
