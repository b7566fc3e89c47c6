mod common;

use std::sync::Arc;

use chemostokes::cell_dynamics::{
    advect, chemotaxis_divergence, consumption, laplacian_neumann, porous_medium_divergence, velocity_divergence,
};
use chemostokes::diagnostics::{compute_record, entropy_term, DiagnosticsConfig};
use chemostokes::grid::{gradient_sq, integrate, linf_norm, lp_norm, Grid, ScalarField, SimState, VectorField};
use chemostokes::harness::snapshot::{decode_snapshot, encode_snapshot};
use chemostokes::regularization::{DiffusionLaw, MagnitudeLaw, PotentialSpec, SensitivityKind, SensitivitySpec};
use chemostokes::stokes::{PoissonSolverConfig, StokesSolver};
use chemostokes::timestepper::{run, Model, StepPolicy, Stepper};
use chemostokes::SimConfig;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn grid_strategy() -> impl Strategy<Value = Arc<Grid>> {
    prop_oneof![
        (4usize..=16, 4usize..=16, 0.5f64..2.0, 0.5f64..2.0).prop_map(|(a, b, la, lb)| common::grid(&[la, lb], &[a, b])),
        (4usize..=8, 4usize..=8, 4usize..=8).prop_map(|(a, b, c)| common::grid(&[1.0, 0.7, 1.2], &[a, b, c])),
    ]
}

fn rotational(dim: usize, angle: f64, mag: f64, cutoff: f64) -> SensitivitySpec {
    SensitivitySpec::new(
        dim,
        SensitivityKind::Rotational {
            angle,
            magnitude: MagnitudeLaw::Constant(mag),
        },
        cutoff,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn integrate_is_linear(g in grid_strategy(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let f = common::random_field(&g, &mut rng, -1.0, 1.0);
        let h = common::random_field(&g, &mut rng, -1.0, 1.0);
        let combo = f.map(|v| a * v).axpy(b, &h).unwrap();
        let lhs = integrate(&combo);
        let rhs = a * integrate(&f) + b * integrate(&h);
        let scale = integrate(&f.map(f64::abs)) * a.abs() + integrate(&h.map(f64::abs)) * b.abs();
        prop_assert!((lhs - rhs).abs() <= 1e-14 * scale.max(1e-300));
    }

    #[test]
    fn lp_norms_approach_sup_norm(n0 in 4usize..=16, n1 in 4usize..=16, seed in any::<u64>()) {
        // unit volume, so ||f||_p is nondecreasing in p
        let g = common::grid(&[2.0, 0.5], &[n0, n1]);
        let mut rng = StdRng::seed_from_u64(seed);
        let f = common::random_field(&g, &mut rng, -2.0, 2.0);
        let sup = linf_norm(&f);
        let mut prev_gap = f64::INFINITY;
        for p in [1.0, 2.0, 4.0, 8.0, 64.0] {
            let norm = lp_norm(&f, p).unwrap();
            prop_assert!(norm <= sup * (1.0 + 1e-14));
            let gap = sup - norm;
            prop_assert!(gap <= prev_gap * (1.0 + 1e-12) + 1e-15);
            prev_gap = gap;
        }
    }

    #[test]
    fn gradient_of_constant_vanishes(g in grid_strategy(), v in -1e3f64..1e3) {
        let s = gradient_sq(&ScalarField::constant(g, v));
        prop_assert!(s.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn midpoint_rule_is_exact_for_multilinear(g in grid_strategy(), c in prop::array::uniform4(-2.0f64..2.0)) {
        let f = ScalarField::from_fn(g.clone(), |x| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[1]);
        let (a, b) = (g.lengths()[0], g.lengths()[1]);
        let depth = if g.dim() == 3 { g.lengths()[2] } else { 1.0 };
        let exact = depth * (c[0] * a * b + c[1] * a * a * b / 2.0 + c[2] * a * b * b / 2.0 + c[3] * a * a * b * b / 4.0);
        prop_assert!((integrate(&f) - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn density_operators_are_mass_neutral(g in grid_strategy(), seed in any::<u64>(), m in 1.05f64..3.0, angle in -3.0f64..3.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = common::random_field(&g, &mut rng, 0.0, 3.0);
        let c = common::random_field(&g, &mut rng, 0.0, 2.0);
        let u = common::random_solenoidal(&g, &mut rng);
        let law = DiffusionLaw::new(m, m, 1e-3).unwrap();
        let spec = rotational(g.dim(), angle, 1.5, 0.1);
        for op in [
            porous_medium_divergence(&n, &law).unwrap(),
            chemotaxis_divergence(&n, &c, &spec).unwrap(),
            advect(&n, &u).unwrap(),
        ] {
            let scale = integrate(&op.map(f64::abs));
            prop_assert!(integrate(&op).abs() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn operators_match_dense_oracles(g in grid_strategy(), seed in any::<u64>(), angle in -3.0f64..3.0, width in 0.0f64..0.3) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = common::random_field(&g, &mut rng, 0.0, 3.0);
        let c = common::random_field(&g, &mut rng, 0.0, 2.0);
        let u = common::random_solenoidal(&g, &mut rng);
        let law = DiffusionLaw::new(2.5, 0.7, 1e-2).unwrap();
        let spec = rotational(g.dim(), angle, 0.9, width);
        let checks = [
            common::rel_err(porous_medium_divergence(&n, &law).unwrap().values(), &common::naive_porous(&n, 2.5, 0.7, 1e-2)),
            common::rel_err(chemotaxis_divergence(&n, &c, &spec).unwrap().values(), &common::naive_chemotaxis(&n, &c, 0.9, angle, width)),
            common::rel_err(advect(&c, &u).unwrap().values(), &common::naive_advect(&c, &u)),
            common::rel_err(laplacian_neumann(&c).values(), &common::naive_laplacian(&c)),
            common::rel_err(consumption(&n, &c).unwrap().values(), &common::naive_consumption(&n, &c)),
        ];
        for e in checks {
            prop_assert!(e <= 1e-13, "{checks:?}");
        }
    }

    #[test]
    fn stable_dt_keeps_density_nonnegative(g in grid_strategy(), seed in any::<u64>(), angle in -3.0f64..3.0, mag in 0.0f64..5.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut state = SimState::zeros(g.clone());
        state.n = common::random_field(&g, &mut rng, 0.0, 3.0);
        state.c = common::random_field(&g, &mut rng, 0.0, 2.0);
        state.u = common::random_solenoidal(&g, &mut rng);
        let model = Model {
            law: DiffusionLaw::new(1.5, 1.5, 1e-3).unwrap(),
            sensitivity: rotational(g.dim(), angle, mag, 0.0),
            potential: PotentialSpec::Constant,
        };
        let stepper = Stepper::new(g.clone(), model.clone(), StepPolicy { dt_max: 1.0, t_end: 10.0, ..Default::default() }, PoissonSolverConfig::default()).unwrap();
        let dt = stepper.stable_dt(&state).unwrap();
        let rate = porous_medium_divergence(&state.n, &model.law).unwrap()
            .axpy(1.0, &chemotaxis_divergence(&state.n, &state.c, &model.sensitivity).unwrap()).unwrap()
            .axpy(1.0, &advect(&state.n, &state.u).unwrap()).unwrap();
        let next = state.n.axpy(dt, &rate).unwrap();
        prop_assert!(next.min() >= -1e-10, "min {}", next.min());
    }

    #[test]
    fn stokes_step_is_solenoidal_and_no_slip(seed in any::<u64>(), n0 in 6usize..=16, n1 in 6usize..=16, gy in -5.0f64..5.0) {
        let g = common::grid(&[1.0, 1.0], &[n0, n1]);
        let mut rng = StdRng::seed_from_u64(seed);
        let mut state = SimState::zeros(g.clone());
        state.n = common::random_field(&g, &mut rng, 0.0, 2.0);
        state.u = common::random_solenoidal(&g, &mut rng);
        let solver = StokesSolver::new(g.clone(), PoissonSolverConfig::default()).unwrap();
        let dt = 0.9 / (2.0 * g.inv_h2_sum());
        let (u, _) = solver.stokes_step(&state, &PotentialSpec::Linear { gradient: vec![0.0, gy] }, dt).unwrap();
        prop_assert!(linf_norm(&velocity_divergence(&u)) <= 1e-8);
        for a in 0..2 {
            for (fi, face) in g.faces(a) {
                if g.is_boundary_face(a, face) {
                    prop_assert_eq!(u.component(a)[fi], 0.0);
                }
            }
        }
        // unforced: kinetic energy does not grow
        let (u_free, _) = solver.stokes_step(&state, &PotentialSpec::Constant, dt).unwrap();
        prop_assert!(u_free.norm_sq() <= state.u.norm_sq() * (1.0 + 1e-12));
    }

    #[test]
    fn projection_is_idempotent_and_contracting(seed in any::<u64>(), n0 in 4usize..=16, n1 in 4usize..=16) {
        let g = common::grid(&[1.0, 1.3], &[n0, n1]);
        let mut rng = StdRng::seed_from_u64(seed);
        let comps = (0..2).map(|a| (0..g.face_len(a)).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).collect();
        let mut raw = VectorField::new(g.clone(), comps).unwrap();
        raw.zero_boundary_normals();
        let solver = StokesSolver::new(g.clone(), PoissonSolverConfig::default()).unwrap();
        let (once, _, _) = solver.project(&raw, 1.0, None).unwrap();
        let (twice, _, _) = solver.project(&once, 1.0, None).unwrap();
        prop_assert!(once.norm_sq() <= raw.norm_sq() * (1.0 + 1e-10));
        let diff = once.components().iter().flatten().zip(twice.components().iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(diff <= 1e-8 * once.max_abs().max(1e-300));
    }

    #[test]
    fn entropy_has_lower_bound(g in grid_strategy(), seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = common::random_field(&g, &mut rng, 0.0, 1.0);
        prop_assert!(entropy_term(&n) >= -g.volume() / std::f64::consts::E);
    }

    #[test]
    fn records_are_deterministic(g in grid_strategy(), seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut state = SimState::zeros(g.clone());
        state.n = common::random_field(&g, &mut rng, 0.0, 2.0);
        state.c = common::random_field(&g, &mut rng, 0.0, 1.0);
        state.u = common::random_solenoidal(&g, &mut rng);
        let law = DiffusionLaw::new(1.5, 1.5, 1e-3).unwrap();
        let cfg = DiagnosticsConfig { hessian_dissipation: true, ..Default::default() };
        let a = compute_record(&state, None, 0.0, &law, &cfg).unwrap();
        let b = compute_record(&state, None, 0.0, &law, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let later = compute_record(&state, Some(&a), 0.1, &law, &cfg).unwrap();
        prop_assert!(later.cumulative_diss_n >= a.cumulative_diss_n);
        prop_assert!(later.cumulative_diss_c >= a.cumulative_diss_c);
        prop_assert!(later.cumulative_diss_hessian.unwrap() >= 0.0);
    }

    #[test]
    fn snapshot_round_trip_is_lossless(g in grid_strategy(), seed in any::<u64>(), t in 0.0f64..10.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut state = SimState::zeros(g.clone());
        state.t = t;
        state.n = common::random_field(&g, &mut rng, 0.0, 2.0);
        state.c = common::random_field(&g, &mut rng, 0.0, 1.0);
        state.p = common::random_field(&g, &mut rng, -1.0, 1.0);
        let comps = (0..g.dim()).map(|a| (0..g.face_len(a)).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).collect();
        state.u = VectorField::new(g.clone(), comps).unwrap();
        let bytes = encode_snapshot(&state);
        let back = decode_snapshot(&bytes).unwrap().into_state(&g).unwrap();
        prop_assert_eq!(encode_snapshot(&back), bytes);
        prop_assert_eq!(back, state);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    /// Mass, the oxygen maximum principle and nonnegativity hold along short runs.
    #[test]
    fn runs_preserve_invariants(
        m in 1.1f64..3.0,
        kind in prop_oneof![Just("scalar"), Just("rotational")],
        strength in 0.0f64..3.0,
        gy in -10.0f64..10.0,
        amp in 0.1f64..4.0,
        cx in 0.2f64..0.8,
    ) {
        let text = format!(
            "[domain]\nlengths = [1.0, 1.0]\nresolution = [12, 12]\n[physics]\nm = {m}\n\
             [sensitivity]\nkind = \"{kind}\"\nc_s = {strength}\nmagnitude = {strength}\n\
             [potential]\nkind = \"linear\"\ngradient = [0.0, {gy}]\n\
             [initial.n]\namplitude = {amp}\nwidth = 0.15\ncenter = [{cx}, 0.5]\n\
             [initial.c]\npreset = \"gaussian\"\nwidth = 0.3\ncenter = [0.5, 0.3]\nbackground = 0.1\n\
             [time]\nt_end = 0.02\ndiagnostics_stride = 1\n"
        );
        let cfg = SimConfig::from_toml(&text).unwrap();
        let out = run(&cfg).unwrap();
        let r0 = &out.records[0];
        for r in &out.records {
            prop_assert!((r.mass - r0.mass).abs() <= 1e-10 * r0.mass);
            prop_assert!(r.c_max <= r0.c_max * (1.0 + 1e-10));
            prop_assert!(r.c_min >= -1e-10);
            prop_assert!(r.n_min >= -1e-10);
            prop_assert!(r.div_linf <= 1e-8);
        }
    }
}

/// Swapping the order of the scalar updates perturbs the result by O(dt).
#[test]
fn splitting_order_difference_is_first_order() {
    let diff = |dt: f64| {
        let text = |order: &str| {
            format!(
                "[domain]\nlengths = [1.0, 1.0]\nresolution = [16, 16]\n[physics]\nm = 1.5\n\
                 [sensitivity]\nkind = \"rotational\"\nmagnitude = 2.0\n\
                 [initial.n]\namplitude = 2.0\nwidth = 0.15\n\
                 [initial.c]\npreset = \"gaussian\"\nwidth = 0.25\ncenter = [0.3, 0.6]\nbackground = 0.2\n\
                 [time]\nt_end = 0.05\ndt_max = {dt}\nsplit_order = \"{order}\"\n"
            )
        };
        let a = run(&SimConfig::from_toml(&text("n_first")).unwrap()).unwrap();
        let b = run(&SimConfig::from_toml(&text("c_first")).unwrap()).unwrap();
        let (ra, rb) = (a.records.last().unwrap(), b.records.last().unwrap());
        assert_eq!(a.steps, b.steps);
        (ra.energy - rb.energy).abs() + (ra.c_max - rb.c_max).abs() + (ra.n_linf - rb.n_linf).abs()
    };
    let d1 = diff(2e-4);
    let d2 = diff(1e-4);
    let d3 = diff(5e-5);
    let (r1, r2) = (d1 / d2, d2 / d3);
    assert!((1.6..2.5).contains(&r1) && (1.6..2.5).contains(&r2), "{d1} {d2} {d3}");
}
