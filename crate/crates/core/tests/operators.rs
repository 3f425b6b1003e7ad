//! Convergence of the discrete operators on the flat torus.

use std::f64::consts::PI;

use curvflow::generators::{cone_sphere, flat_torus, pillowcase};
use curvflow::geometry::{metric_quantities, ConicalMesh};
use curvflow::operators::{assemble, h_inner, helmholtz_solve, integrate, poincare_lambda, OperatorPair, SolverKind};
use curvflow::ScalarField;

fn x_field(mesh: &ConicalMesh, f: impl Fn(f64) -> f64) -> ScalarField {
    let c = mesh.coordinates().unwrap();
    ScalarField::from_fn(mesh.vertex_count(), |i| f(c[i][0]))
}

fn rayleigh_error(n: usize) -> f64 {
    let mesh = flat_torus(n).unwrap();
    let metric = metric_quantities(&mesh).unwrap();
    let ops = assemble(&mesh, &metric).unwrap();
    let u = x_field(&mesh, |x| (2.0 * PI * x).sin());
    let l2 = integrate(&ScalarField::from(u.component_mul(&u)), &metric);
    (ops.dirichlet(&u) / l2 - 4.0 * PI * PI).abs()
}

#[test]
fn rayleigh_quotient_of_a_sine_converges() {
    let errors: Vec<f64> = [8, 16, 32].into_iter().map(rayleigh_error).collect();
    assert!(errors[2] < 0.01 * 4.0 * PI * PI, "{errors:?}");
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "{errors:?}");
    }
}

fn helmholtz_error(n: usize) -> f64 {
    let mesh = flat_torus(n).unwrap();
    let metric = metric_quantities(&mesh).unwrap();
    let ops = assemble(&mesh, &metric).unwrap();
    let f = x_field(&mesh, |x| (2.0 * PI * x).cos());
    let x = helmholtz_solve(&f, &ops, 1e-12).unwrap();
    let exact = x_field(&mesh, |x| (2.0 * PI * x).cos() / (1.0 + 4.0 * PI * PI));
    (&*x - &*exact).amax()
}

#[test]
fn helmholtz_solution_of_a_cosine_converges() {
    let errors: Vec<f64> = [8, 16, 32].into_iter().map(helmholtz_error).collect();
    assert!(errors[2] < 1e-3, "{errors:?}");
    assert!(errors[0] / errors[1] > 3.0 && errors[1] / errors[2] > 3.0, "{errors:?}");
}

#[test]
fn poincare_constant_is_relabeling_invariant() {
    let mesh = pillowcase(4).unwrap();
    let n = mesh.vertex_count();
    let perm: Vec<usize> = (0..n).map(|i| (7 * i + 3) % n).collect();
    let lambda = |m: &ConicalMesh| {
        let metric = metric_quantities(m).unwrap();
        poincare_lambda(&assemble(m, &metric).unwrap(), &metric, 1e-12).unwrap()
    };
    let (a, b) = (lambda(&mesh), lambda(&mesh.relabeled(&perm).unwrap()));
    assert!((a - b).abs() <= 1e-9 * a, "{a} vs {b}");
}

#[test]
fn solvers_agree() {
    let mesh = cone_sphere(2, &[-0.5, -0.5, 0.3]).unwrap();
    let metric = metric_quantities(&mesh).unwrap();
    let n = mesh.vertex_count();
    let f = ScalarField::from_fn(n, |i| (i as f64 * 0.61).sin());
    let solutions: Vec<ScalarField> = [SolverKind::Cholesky, SolverKind::ConjugateGradient, SolverKind::Dense]
        .into_iter()
        .map(|kind| {
            let ops = OperatorPair::new(&mesh, &metric, kind).unwrap();
            helmholtz_solve(&f, &ops, 1e-12).unwrap()
        })
        .collect();
    for s in &solutions[1..] {
        assert!((&**s - &*solutions[0]).amax() <= 1e-9 * solutions[0].amax());
    }
}

#[test]
fn h_norm_of_constants_is_the_volume() {
    let mesh = flat_torus(6).unwrap();
    let metric = metric_quantities(&mesh).unwrap();
    let ops = assemble(&mesh, &metric).unwrap();
    let c = ScalarField::constant(36, 3.0);
    let h = h_inner(&c, &c, &ops);
    assert!((h - 9.0).abs() < 1e-12, "{h}");
}
