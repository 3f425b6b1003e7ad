//! Uniformization of generated conical meshes.

use curvflow::generators::{cone_sphere, pillowcase};
use curvflow::geometry::{gauss_bonnet_check, metric_quantities, ConicalMesh};
use curvflow::uniformize::uniformize_background;

fn uniformize(mesh: &ConicalMesh) -> curvflow::uniformize::Uniformized {
    let raw = metric_quantities(mesh).unwrap();
    let u = uniformize_background(mesh, &raw, 1e-10).unwrap();
    let bound = 1e-8 * (1.0 + u.kappa_bar.abs());
    assert!(u.curvature_deviation <= bound, "{}", u.curvature_deviation);
    assert!(gauss_bonnet_check(&u.metric).passes(bound * u.metric.total_volume));
    // κ̄ is kept, so the area is too
    assert!((u.metric.total_volume - raw.total_volume).abs() <= 1e-9 * raw.total_volume);
    if let Some(k) = u.damping_started {
        assert!(
            u.residual_history[k..].windows(2).all(|w| w[1] < w[0]),
            "{:?}",
            u.residual_history
        );
    }
    u
}

#[test]
fn flat_pillowcase_is_already_uniform() {
    let u = uniformize(&pillowcase(6).unwrap());
    assert!(u.guaranteed);
    assert!(u.v.amax() < 1e-12);
    assert_eq!(u.kappa_bar, 0.0);
}

#[test]
fn negative_cone_sphere() {
    let u = uniformize(&cone_sphere(2, &[-0.9, -0.9, -0.9]).unwrap());
    assert!(u.guaranteed);
    assert!(u.kappa_bar < 0.0);
}

#[test]
fn null_cone_sphere() {
    let u = uniformize(&cone_sphere(2, &[-0.5; 4]).unwrap());
    assert!(u.guaranteed);
    assert!(u.kappa_bar.abs() < 1e-14);
}

#[test]
fn positive_case_is_best_effort() {
    let u = uniformize(&cone_sphere(2, &[-0.3, -0.3, -0.3]).unwrap());
    assert!(!u.guaranteed);
    assert!(u.kappa_bar > 0.0);
}

#[test]
fn football_with_unequal_cones_has_no_uniform_metric() {
    // a sphere with exactly two cones of different angles admits no constant curvature metric
    let mesh = cone_sphere(2, &[-0.2, 0.3]).unwrap();
    let raw = metric_quantities(&mesh).unwrap();
    assert!(uniformize_background(&mesh, &raw, 1e-10).is_err());
}
