//! Conformal preprocessing of a raw conical metric into one of constant
//! curvature, and the curvature of conformally changed metrics.
//!
//! The background is changed by vertex scaling, `l'_ij = e^{(v_i+v_j)/2} l_ij`,
//! and `v` is found by Newton's method on the per-vertex equation
//! `defect_i(v) + 2πβ_i = κ̄ A_i(v)` evaluated on the rescaled lengths
//! themselves, so the rebuilt mesh has constant curvature in the same
//! discrete sense that [`metric_quantities`] measures.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::functionals::EulerSign;
use crate::geometry::{metric_quantities, BackgroundMetric, ConicalMesh};
use crate::operators::OperatorPair;

/// Discrete `e^{-2u}(κ + Δu)`: `(κ A_v + (S u)_v) / (e^{2u_v} A_v)`.
pub fn curvature_of_conformal(u: &ScalarField, ops: &OperatorPair, metric: &BackgroundMetric) -> ScalarField {
    let su = ops.apply_stiffness(u);
    ScalarField::from_fn(u.len(), |v| {
        let a = metric.vertex_areas[v];
        (metric.kappa * a + su[v]) / ((2.0 * u[v]).exp() * a)
    })
}

/// Result of [`uniformize_background`].
#[derive(Debug, Clone)]
pub struct Uniformized {
    /// Conformal factor relative to the raw metric.
    pub v: ScalarField,
    pub mesh: ConicalMesh,
    pub metric: BackgroundMetric,
    pub kappa_bar: f64,
    /// Largest `|(defect + 2πβ)/A - κ̄|` on the rebuilt mesh.
    pub curvature_deviation: f64,
    /// Max-norm of the scaled Newton residual after each iteration.
    pub residual_history: Vec<f64>,
    /// Iteration at which the line search first shortened a step.
    pub damping_started: Option<usize>,
    /// False when `χ(Σ, β) > 0`, where success is best effort.
    pub guaranteed: bool,
}

const MAX_NEWTON: usize = 200;

/// Per-vertex residual `defect + 2πβ - κ̄ A`, with the metric it came from.
fn residual(mesh: &ConicalMesh, kappa_bar: f64) -> Result<(DVector<f64>, BackgroundMetric)> {
    let metric = metric_quantities(mesh)?;
    let r = DVector::from_iterator(
        mesh.vertex_count(),
        metric
            .smooth_defects()
            .iter()
            .zip(&metric.vertex_areas)
            .map(|(d, a)| d - kappa_bar * a),
    );
    Ok((r, metric))
}

/// `max_i |r_i| / A_i`.
fn scaled_norm(r: &DVector<f64>, metric: &BackgroundMetric) -> f64 {
    r.iter()
        .zip(&metric.vertex_areas)
        .map(|(x, a)| (x / a).abs())
        .fold(0.0, f64::max)
}

/// Jacobian of `defect_i + 2πβ_i - κ̄ A_i` with respect to the vertex
/// scale factors: the cotangent stiffness of the current lengths minus
/// `κ̄ ∂A_i/∂v_j`.
pub fn conformal_jacobian(mesh: &ConicalMesh, metric: &BackgroundMetric, kappa_bar: f64) -> DMatrix<f64> {
    let n = mesh.vertex_count();
    let mut jac = DMatrix::zeros(n, n);
    for (f, face) in mesh.faces().iter().enumerate() {
        let lengths = mesh.face_lengths(f);
        let area4 = 4.0 * metric.face_areas[f];
        let cot: [f64; 3] = std::array::from_fn(|k| {
            let a = lengths[k];
            let b = lengths[(k + 1) % 3];
            let c = lengths[(k + 2) % 3];
            (b * b + c * c - a * a) / area4
        });
        for k in 0..3 {
            let i = face[(k + 1) % 3];
            let j = face[(k + 2) % 3];
            let w = 0.5 * cot[k];
            jac[(i, j)] -= w;
            jac[(j, i)] -= w;
            jac[(i, i)] += w;
            jac[(j, j)] += w;
        }
        // dT/dv_j = Σ over the two edges at j of ¼ l² cot(opposite angle)
        let d_area: [f64; 3] = std::array::from_fn(|k| {
            let e1 = (k + 1) % 3;
            let e2 = (k + 2) % 3;
            0.25 * (lengths[e1].powi(2) * cot[e1] + lengths[e2].powi(2) * cot[e2])
        });
        for &i in face {
            for (k, &j) in face.iter().enumerate() {
                jac[(i, j)] -= kappa_bar * d_area[k] / 3.0;
            }
        }
    }
    jac
}

/// Finds a conformal factor `v` making the raw metric constant-curvature.
///
/// `tol` bounds the final per-vertex curvature deviation relative to
/// `1 + |κ̄|`. The total area is preserved.
pub fn uniformize_background(mesh: &ConicalMesh, raw: &BackgroundMetric, tol: f64) -> Result<Uniformized> {
    let n = mesh.vertex_count();
    let kappa_bar = raw.kappa;
    let sign = EulerSign::of(raw.singular_euler);
    let null = sign == EulerSign::Null;
    let threshold = tol * (1.0 + kappa_bar.abs());

    let mut v = DVector::zeros(n);
    let mut current = mesh.clone();
    let (mut r, mut metric) = residual(&current, kappa_bar)?;
    let mut norm = scaled_norm(&r, &metric);
    let mut history = vec![norm];
    let mut damping_started = None;

    let mut iter = 0;
    while norm > threshold {
        if iter == MAX_NEWTON {
            return Err(Error::Uniformization {
                iterations: iter,
                history,
            });
        }
        iter += 1;
        let jac = conformal_jacobian(&current, &metric, kappa_bar);
        let step = if null {
            // constants are in the kernel; fix the area-weighted mean of the step
            let mut bordered = DMatrix::zeros(n + 1, n + 1);
            bordered.view_mut((0, 0), (n, n)).copy_from(&jac);
            for i in 0..n {
                bordered[(i, n)] = metric.vertex_areas[i];
                bordered[(n, i)] = metric.vertex_areas[i];
            }
            let mut rhs = DVector::zeros(n + 1);
            rhs.rows_mut(0, n).copy_from(&(-&r));
            bordered.lu().solve(&rhs).map(|x| x.rows(0, n).into_owned())
        } else {
            jac.lu().solve(&(-&r))
        };
        let step = step.ok_or_else(|| Error::Uniformization {
            iterations: iter,
            history: history.clone(),
        })?;

        let mut alpha = 1.0;
        let accepted = loop {
            let trial_v = &v + alpha * &step;
            if let Ok(trial) = mesh.with_scaled_lengths(trial_v.as_slice()) {
                if let Ok((tr, tm)) = residual(&trial, kappa_bar) {
                    let tn = scaled_norm(&tr, &tm);
                    if tn < norm || tn <= threshold {
                        break Some((trial_v, trial, tr, tm, tn));
                    }
                }
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                break None;
            }
        };
        let Some((nv, nmesh, nr, nmetric, nnorm)) = accepted else {
            return Err(Error::Uniformization {
                iterations: iter,
                history,
            });
        };
        if alpha < 1.0 && damping_started.is_none() {
            damping_started = Some(iter);
        }
        v = nv;
        current = nmesh;
        r = nr;
        metric = nmetric;
        norm = nnorm;
        history.push(norm);
    }

    if null {
        // mean zero, then a global scale restoring the raw total area
        let mean = v.dot(&DVector::from_column_slice(&raw.vertex_areas)) / raw.total_volume;
        v.add_scalar_mut(-mean);
        current = mesh.with_scaled_lengths(v.as_slice())?;
        let vol = metric_quantities(&current)?.total_volume;
        v.add_scalar_mut(0.5 * (raw.total_volume / vol).ln());
        current = mesh.with_scaled_lengths(v.as_slice())?;
        metric = metric_quantities(&current)?;
    }

    let curvature_deviation = metric
        .pointwise_curvature()
        .iter()
        .map(|k| (k - kappa_bar).abs())
        .fold(0.0, f64::max);
    Ok(Uniformized {
        v: ScalarField::from(v),
        kappa_bar: metric.kappa,
        mesh: current,
        metric,
        curvature_deviation,
        residual_history: history,
        damping_started,
        guaranteed: sign != EulerSign::Positive,
    })
}
