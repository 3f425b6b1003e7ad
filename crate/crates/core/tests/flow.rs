//! Flow behaviour on small flat meshes.

use curvflow::flow::{
    energy_identity_check, estimate_c_infinity, flow_step, renormalize_constraint, residual_kw, run_flow, FlowConfig,
    FlowProblem, RunStatus, TheoremScope,
};
use curvflow::functionals::{
    compatibility_check, functional_l, seed_on_constraint, ConstraintSpec, Prescription, PrescriptionSource,
    SeedProfile, TangentialGradient,
};
use curvflow::generators::{flat_torus, pillowcase};
use curvflow::geometry::{metric_quantities, BackgroundMetric, ConicalMesh};
use curvflow::operators::{assemble, h_norm, OperatorPair};
use curvflow::ScalarField;

struct Setup {
    mesh: ConicalMesh,
    metric: BackgroundMetric,
    ops: OperatorPair,
}

fn setup(mesh: ConicalMesh) -> Setup {
    let metric = metric_quantities(&mesh).unwrap();
    let ops = assemble(&mesh, &metric).unwrap();
    Setup { mesh, metric, ops }
}

/// A bumpy field `u` together with the curvature it solves for exactly.
fn manufactured(s: &Setup) -> (ScalarField, Prescription) {
    let c = s.mesh.coordinates().unwrap();
    let u = ScalarField::from_fn(s.mesh.vertex_count(), |i| {
        let (x, y) = (c[i][0], c[i][1]);
        0.3 * (2.0 * std::f64::consts::PI * x).sin() + 0.2 * (2.0 * std::f64::consts::PI * (x + y)).cos()
    });
    let su = s.ops.apply_stiffness(&u);
    let k = ScalarField::from_fn(u.len(), |v| {
        (su[v] / s.ops.mass()[v] + s.metric.kappa) * (-2.0 * u[v]).exp()
    });
    (u, Prescription::new(k, &s.metric).unwrap())
}

#[test]
fn manufactured_solution_is_stationary() {
    let s = setup(flat_torus(12).unwrap());
    let (u, k) = manufactured(&s);
    let spec = ConstraintSpec::for_metric(&s.metric);
    assert!((functional_l(&u, &k, &s.metric).unwrap() - spec.target).abs() < 1e-13);

    let residual = residual_kw(&u, &k, &s.ops, 1e-12).unwrap();
    assert!(residual.h_dual < 1e-12 && residual.l2 < 1e-12, "{residual:?}");
    assert!((estimate_c_infinity(&u, &k, &s.ops).unwrap() - 1.0).abs() < 1e-12);
    let g = TangentialGradient::compute(&u, &k, &s.ops, 1e-12).unwrap();
    assert!(g.grad_s_norm < 1e-11, "{}", g.grad_s_norm);

    let problem = FlowProblem::new(&k, &s.ops, &s.metric, spec, FlowConfig::default()).unwrap();
    let state = problem.initial_state(u.clone()).unwrap();
    let next = flow_step(&state, &problem).unwrap();
    assert!(next.t > 0.0);
    assert!((&*next.u - &*u).amax() < 1e-11);

    let run = run_flow(u.clone(), &problem).unwrap();
    assert_eq!(run.report.status, RunStatus::Converged);
    assert_eq!(run.report.steps, 0);
}

#[test]
fn renormalization_recovers_from_a_normal_kick() {
    let s = setup(pillowcase(6).unwrap());
    let k = Prescription::new(
        PrescriptionSource::parse("harmonic1:0.5")
            .unwrap()
            .evaluate(&s.mesh)
            .unwrap(),
        &s.metric,
    )
    .unwrap();
    let spec = ConstraintSpec::for_metric(&s.metric);
    let u0 = seed_on_constraint(&k, &s.mesh, &s.metric, &spec, SeedProfile::Auto).unwrap();
    let problem = FlowProblem::new(&k, &s.ops, &s.metric, spec, FlowConfig::default()).unwrap();
    let normal = TangentialGradient::compute(&u0, &k, &s.ops, 1e-12).unwrap().normal();
    assert!((h_norm(&normal, &s.ops) - 1.0).abs() < 1e-12);
    let kicked = ScalarField::from(&*u0 + 1e-9 * &*normal);
    assert!((functional_l(&kicked, &k, &s.metric).unwrap() - spec.target).abs() > 1e-12);
    let back = renormalize_constraint(&kicked, &problem).unwrap();
    assert!((functional_l(&back, &k, &s.metric).unwrap() - spec.target).abs() <= 1e-13);
    assert!((&*back - &*u0).amax() < 1e-10);
}

#[test]
fn compatibility_and_seeding() {
    let s = setup(flat_torus(8).unwrap());
    let positive = Prescription::new(ScalarField::constant(64, 1.0), &s.metric).unwrap();
    assert!(!compatibility_check(&positive, &s.metric).passed());
    let negative = Prescription::new(ScalarField::constant(64, -1.0), &s.metric).unwrap();
    assert!(!compatibility_check(&negative, &s.metric).passed());

    let k = Prescription::new(
        PrescriptionSource::parse("harmonic1:0.5")
            .unwrap()
            .evaluate(&s.mesh)
            .unwrap(),
        &s.metric,
    )
    .unwrap();
    assert!(compatibility_check(&k, &s.metric).passed());
    let spec = ConstraintSpec::for_metric(&s.metric);
    for profile in [SeedProfile::Auto, SeedProfile::Bump { radius: 0.3 }] {
        let u0 = seed_on_constraint(&k, &s.mesh, &s.metric, &spec, profile).unwrap();
        assert!((functional_l(&u0, &k, &s.metric).unwrap() - spec.target).abs() <= 1e-12);
    }
}

#[test]
fn torus_flow_dissipates_energy() {
    let s = setup(flat_torus(16).unwrap());
    let k = Prescription::new(
        PrescriptionSource::parse("harmonic1:0.5")
            .unwrap()
            .evaluate(&s.mesh)
            .unwrap(),
        &s.metric,
    )
    .unwrap();
    let spec = ConstraintSpec::for_metric(&s.metric);
    let u0 = seed_on_constraint(&k, &s.mesh, &s.metric, &spec, SeedProfile::Auto).unwrap();
    let problem = FlowProblem::new(&k, &s.ops, &s.metric, spec, FlowConfig::default()).unwrap();
    let run = run_flow(u0, &problem).unwrap();

    assert_eq!(run.report.status, RunStatus::Converged);
    assert_eq!(run.report.scope, TheoremScope::Guaranteed);
    assert!(run.report.grad_s_norm <= 1e-8);
    assert!(energy_identity_check(&run.trace) < 1e-4);

    let j0 = run.trace[0].j;
    for pair in run.trace.windows(2) {
        assert!(pair[1].dissipation >= pair[0].dissipation);
        assert!(pair[1].j <= pair[0].j + pair[1].j_budget);
    }
    // κ = 0, so J is half the Dirichlet energy and cannot grow
    for r in &run.trace {
        assert!(r.dirichlet <= 2.0 * j0 * (1.0 + 1e-9) + 1e-12);
    }
    assert!(estimate_c_infinity(&run.state.u, &k, &s.ops).unwrap() > 0.0);

    // the gradient decays over the final decade of the run
    let t_end = run.report.t;
    let late: Vec<f64> = run
        .trace
        .iter()
        .filter(|r| r.t >= 0.1 * t_end)
        .map(|r| r.grad_s_norm)
        .collect();
    assert!(
        late.last().unwrap() < &(0.1 * late[0]),
        "{} -> {}",
        late[0],
        late.last().unwrap()
    );
}
