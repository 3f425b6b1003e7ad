//! Time integration of `∂_t u = -∇^S J(u)` on the constraint hypersurface.
//!
//! Each step is an embedded Bogacki–Shampine 3(2) pair followed by a scalar
//! Newton correction along the normal `∇L / ‖∇L‖_H` that puts `u` back on the
//! level set of `L`. Dissipation `∫‖∂_t u‖_H² dt` is accumulated with the
//! trapezoid rule at step endpoints.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::functionals::{
    functional_j, functional_l, weighted_curvature, ConstraintSpec, EulerSign, Prescription, TangentialGradient,
};
use crate::geometry::BackgroundMetric;
use crate::operators::{h_norm, helmholtz_solve, integrate, OperatorPair, DEFAULT_SOLVER_TOL};

/// Step control and stopping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Stationarity threshold on `‖∇^S J‖_H`.
    pub grad_tol: f64,
    pub t_max: f64,
    /// Largest drift of `L` allowed before the constraint correction.
    pub constraint_tol: f64,
    pub energy_tol: f64,
    pub solver_tol: f64,
    pub max_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt_initial: 1e-3,
            dt_min: 1e-12,
            dt_max: 10.0,
            grad_tol: 1e-8,
            t_max: 1e4,
            constraint_tol: 1e-8,
            energy_tol: 1e-4,
            solver_tol: DEFAULT_SOLVER_TOL,
            max_steps: 2_000_000,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_initial", self.dt_initial),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("grad_tol", self.grad_tol),
            ("t_max", self.t_max),
            ("constraint_tol", self.constraint_tol),
            ("energy_tol", self.energy_tol),
            ("solver_tol", self.solver_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("flow.{name} must be positive, got {value}")));
            }
        }
        if !(self.dt_min <= self.dt_initial && self.dt_initial <= self.dt_max) {
            return Err(Error::Config(format!(
                "need dt_min <= dt_initial <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_initial, self.dt_max
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("flow.max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Local error budget per step.
    pub fn local_tol(&self) -> f64 {
        0.1 * self.grad_tol
    }
}

/// The data a flow runs on.
#[derive(Debug, Clone, Copy)]
pub struct FlowProblem<'a> {
    pub k: &'a Prescription,
    pub ops: &'a OperatorPair,
    pub metric: &'a BackgroundMetric,
    pub spec: ConstraintSpec,
    pub config: FlowConfig,
}

/// Point on a flow trajectory.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub u: ScalarField,
    pub j_value: f64,
    /// `∫_0^t ‖∂_s u‖_H² ds`.
    pub dissipation: f64,
    /// `J(u0)` of the run this state belongs to.
    pub j_initial: f64,
    pub constraint_residual: f64,
    pub grad_s_norm: f64,
    pub mean_u: f64,
    /// Step size to try next.
    pub dt: f64,
    pub gradient: TangentialGradient,
}

/// One accepted step (or the initial point) as recorded in a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub j: f64,
    pub dissipation: f64,
    pub energy_gap: f64,
    /// `L(u) - target` after the constraint correction.
    pub constraint_residual: f64,
    /// `L - target` before the correction.
    pub pre_correction_drift: f64,
    pub grad_s_norm: f64,
    pub mean_u: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub dirichlet: f64,
    pub dt: f64,
    pub local_error: f64,
    /// Normal shift applied by the correction.
    pub correction: f64,
    /// Allowed increase of `J` over this step.
    pub j_budget: f64,
}

impl StepRecord {
    fn new(state: &FlowState, ops: &OperatorPair) -> Self {
        Self {
            t: state.t,
            j: state.j_value,
            dissipation: state.dissipation,
            energy_gap: state.dissipation + state.j_value - state.j_initial,
            constraint_residual: state.constraint_residual,
            pre_correction_drift: 0.0,
            grad_s_norm: state.grad_s_norm,
            mean_u: state.mean_u,
            min_u: state.u.min(),
            max_u: state.u.max(),
            dirichlet: ops.dirichlet(&state.u),
            dt: 0.0,
            local_error: 0.0,
            correction: 0.0,
            j_budget: 0.0,
        }
    }
}

impl<'a> FlowProblem<'a> {
    pub fn new(
        k: &'a Prescription,
        ops: &'a OperatorPair,
        metric: &'a BackgroundMetric,
        spec: ConstraintSpec,
        config: FlowConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            k,
            ops,
            metric,
            spec,
            config,
        })
    }

    fn tangent(&self, u: &ScalarField) -> Result<TangentialGradient> {
        TangentialGradient::compute(u, self.k, self.ops, self.config.solver_tol)
    }

    fn constraint_scale(&self) -> f64 {
        1.0 + self.spec.target.abs()
    }

    pub fn initial_state(&self, u0: ScalarField) -> Result<FlowState> {
        u0.check_len(self.ops.vertex_count())?;
        let residual = functional_l(&u0, self.k, self.metric)? - self.spec.target;
        if residual.abs() > self.config.constraint_tol {
            return Err(Error::Projection(format!(
                "initial field is off the constraint by {residual:e}"
            )));
        }
        let gradient = self.tangent(&u0)?;
        let j_value = functional_j(&u0, self.ops, self.metric);
        Ok(FlowState {
            t: 0.0,
            j_value,
            j_initial: j_value,
            dissipation: 0.0,
            constraint_residual: residual,
            grad_s_norm: gradient.grad_s_norm,
            mean_u: integrate(&u0, self.metric) / self.metric.total_volume,
            dt: self.config.dt_initial,
            u: u0,
            gradient,
        })
    }

    /// Moves `u` along the unit normal so that `L` hits the target.
    ///
    /// `normal` must be a unit H-normal at (or near) `u`. Returns the new
    /// field and the signed shift.
    pub fn renormalize(&self, u: &ScalarField, normal: &ScalarField) -> Result<(ScalarField, f64)> {
        let tol = 1e-13 * self.constraint_scale();
        let limit = 10.0 * self.config.constraint_tol;
        let at = |s: f64| ScalarField::from(&**u + s * &**normal);
        let mut s = 0.0;
        let mut best: Option<(f64, f64)> = None;
        let mut stalls = 0;
        for _ in 0..50 {
            let cand = at(s);
            let w = weighted_curvature(&cand, self.k)?;
            let g = 0.5 * integrate(&w, self.metric) - self.spec.target;
            if best.is_none_or(|(b, _)| g.abs() < b) {
                best = Some((g.abs(), s));
            } else {
                stalls += 1;
            }
            // keep polishing into roundoff once inside the tolerance
            if g == 0.0 || (g.abs() <= tol && stalls >= 2) {
                break;
            }
            let dg = integrate(&ScalarField::from(w.component_mul(normal)), self.metric);
            if dg == 0.0 || !dg.is_finite() {
                break;
            }
            let next = s - g / dg;
            if next.abs() > limit {
                return Err(Error::Projection(format!(
                    "correction {next:e} exceeds 10 * constraint_tol"
                )));
            }
            if next == s {
                break;
            }
            s = next;
        }
        let (g, s) = best.unwrap();
        if g > tol {
            return Err(Error::Projection(format!("Newton left residual {g:e} > {tol:e}")));
        }
        Ok((at(s), s))
    }

    /// Advances one accepted step.
    pub fn step(&self, state: &FlowState) -> Result<(FlowState, StepRecord)> {
        let cfg = &self.config;
        let local_tol = cfg.local_tol();
        let mut dt = state.dt.min(cfg.dt_max);
        let u = &*state.u;
        let k1 = -&*state.gradient.grad_s;
        let mut last = (f64::NAN, f64::NAN);
        loop {
            if dt < cfg.dt_min {
                return Err(Error::Stiffness {
                    t: state.t,
                    dt,
                    error: last.0,
                    drift: last.1,
                });
            }
            let attempt = || -> Result<_> {
                let u2 = ScalarField::from(u + (0.5 * dt) * &k1);
                let k2 = -&*self.tangent(&u2)?.grad_s;
                let u3 = ScalarField::from(u + (0.75 * dt) * &k2);
                let k3 = -&*self.tangent(&u3)?.grad_s;
                let y = ScalarField::from(u + dt * ((2.0 / 9.0) * &k1 + (1.0 / 3.0) * &k2 + (4.0 / 9.0) * &k3));
                let g4 = self.tangent(&y)?;
                let k4 = -&*g4.grad_s;
                let err = ScalarField::from(
                    dt * ((-5.0 / 72.0) * &k1 + (1.0 / 12.0) * &k2 + (1.0 / 9.0) * &k3 - (1.0 / 8.0) * &k4),
                );
                let err_norm = h_norm(&err, self.ops);
                let drift = functional_l(&y, self.k, self.metric)? - self.spec.target;
                Ok((y, g4, err_norm, drift))
            };
            let (y, g4, err_norm, drift) = match attempt() {
                Ok(v) => v,
                // overflow or a failed solve at a trial point: shrink
                Err(Error::Range { .. }) | Err(Error::SolverDivergence { .. }) => {
                    dt *= 0.25;
                    continue;
                }
                Err(e) => return Err(e),
            };
            last = (err_norm, drift);
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * (local_tol / err_norm).powf(1.0 / 3.0)).clamp(0.2, 5.0)
            };
            if err_norm > local_tol || drift.abs() > cfg.constraint_tol {
                dt *= if err_norm > local_tol { factor.min(0.9) } else { 0.5 };
                continue;
            }
            let (u_new, shift) = match self.renormalize(&y, &g4.normal()) {
                Ok(v) => v,
                Err(Error::Projection(_)) => {
                    dt *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let gradient = self.tangent(&u_new)?;
            let j_value = functional_j(&u_new, self.ops, self.metric);
            let residual = functional_l(&u_new, self.k, self.metric)? - self.spec.target;
            let dissipation = state.dissipation + 0.5 * dt * (state.grad_s_norm.powi(2) + gradient.grad_s_norm.powi(2));
            let grad_j_norm = h_norm(&state.gradient.grad_j, self.ops);
            let j_budget =
                err_norm * grad_j_norm + shift.abs() * g4.normal_component.abs() + 1e-13 * (1.0 + state.j_value.abs());
            let next = FlowState {
                t: state.t + dt,
                j_value,
                dissipation,
                j_initial: state.j_initial,
                constraint_residual: residual,
                grad_s_norm: gradient.grad_s_norm,
                mean_u: integrate(&u_new, self.metric) / self.metric.total_volume,
                dt: (dt * factor).min(cfg.dt_max),
                u: u_new,
                gradient,
            };
            let record = StepRecord {
                pre_correction_drift: drift,
                dt,
                local_error: err_norm,
                correction: shift,
                j_budget,
                ..StepRecord::new(&next, self.ops)
            };
            return Ok((next, record));
        }
    }

    /// Integrates until `‖∇^S J‖_H <= grad_tol`, `t >= t_max` or the step cap.
    pub fn run(&self, u0: ScalarField) -> Result<FlowRun> {
        let mut state = self.initial_state(u0)?;
        let mut trace = vec![StepRecord::new(&state, self.ops)];
        let status = loop {
            if state.grad_s_norm <= self.config.grad_tol {
                break RunStatus::Converged;
            }
            if state.t >= self.config.t_max {
                break RunStatus::TimeLimit;
            }
            if trace.len() > self.config.max_steps {
                break RunStatus::StepLimit;
            }
            let (next, record) = self.step(&state)?;
            trace.push(record);
            state = next;
        };
        let scope = match EulerSign::of(self.metric.singular_euler) {
            EulerSign::Positive => TheoremScope::NotGuaranteed,
            _ => TheoremScope::Guaranteed,
        };
        Ok(FlowRun {
            report: ConvergenceReport {
                status,
                scope,
                steps: trace.len() - 1,
                t: state.t,
                grad_s_norm: state.grad_s_norm,
                energy_gap: energy_identity_check(&trace),
            },
            state,
            trace,
        })
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    /// Reached `t_max` without meeting the stationarity threshold.
    TimeLimit,
    StepLimit,
}

/// Whether convergence of this run is covered by the known theory
/// (`χ(Σ, β) <= 0`) or only long-time existence is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremScope {
    Guaranteed,
    NotGuaranteed,
}

impl TheoremScope {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Guaranteed => "convergence covered for chi(Sigma,beta) <= 0",
            Self::NotGuaranteed => {
                "chi(Sigma,beta) > 0: convergence not guaranteed (outside the convergence theorem's scope)"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub status: RunStatus,
    pub scope: TheoremScope,
    pub steps: usize,
    pub t: f64,
    pub grad_s_norm: f64,
    /// Normalized energy-identity gap, see [`energy_identity_check`].
    pub energy_gap: f64,
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub state: FlowState,
    pub report: ConvergenceReport,
    pub trace: Vec<StepRecord>,
}

/// One step of the flow; see [`FlowProblem::step`].
pub fn flow_step(state: &FlowState, problem: &FlowProblem<'_>) -> Result<FlowState> {
    problem.step(state).map(|(s, _)| s)
}

/// Projects `u` back onto the constraint along `∇L(u) / ‖∇L(u)‖_H`.
pub fn renormalize_constraint(u: &ScalarField, problem: &FlowProblem<'_>) -> Result<ScalarField> {
    let gradient = TangentialGradient::compute(u, problem.k, problem.ops, problem.config.solver_tol)?;
    problem.renormalize(u, &gradient.normal()).map(|(v, _)| v)
}

/// Runs the flow from `u0`.
pub fn run_flow(u0: ScalarField, problem: &FlowProblem<'_>) -> Result<FlowRun> {
    problem.run(u0)
}

/// `max_t |dissipation(t) + J(u(t)) - J(u0)| / (1 + |J(u0)|)`.
pub fn energy_identity_check(trace: &[StepRecord]) -> f64 {
    let Some(first) = trace.first() else {
        return 0.0;
    };
    let j0 = first.j;
    trace
        .iter()
        .map(|r| (r.dissipation + r.j - j0).abs())
        .fold(0.0, f64::max)
        / (1.0 + j0.abs())
}

/// Pointwise `Δu + κ - K e^{2u}` with the lumped Laplacian `M^{-1} S u`.
pub fn pointwise_kw_residual(u: &ScalarField, k: &Prescription, ops: &OperatorPair) -> Result<ScalarField> {
    let su = ops.apply_stiffness(u);
    let w = weighted_curvature(u, k)?;
    Ok(ScalarField::from_fn(u.len(), |v| {
        su[v] / ops.mass()[v] + ops.kappa() - w[v]
    }))
}

/// Residual of the prescribed-curvature equation in two norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KwResidual {
    /// `‖(Δ + I)^{-1} r‖_H`, the H-dual norm of the residual.
    pub h_dual: f64,
    /// `(Σ_v r_v² A_v)^{1/2}`.
    pub l2: f64,
}

pub fn residual_kw(u: &ScalarField, k: &Prescription, ops: &OperatorPair, tol: f64) -> Result<KwResidual> {
    let r = pointwise_kw_residual(u, k, ops)?;
    let l2 = r.component_mul(&r).dot(ops.mass()).sqrt();
    let x = helmholtz_solve(&r, ops, tol)?;
    Ok(KwResidual {
        h_dual: h_norm(&x, ops),
        l2,
    })
}

/// Least-squares `c` in `Δu + κ ≈ c K e^{2u}` (mass-weighted).
pub fn estimate_c_infinity(u: &ScalarField, k: &Prescription, ops: &OperatorPair) -> Result<f64> {
    let su = ops.apply_stiffness(u);
    let w = weighted_curvature(u, k)?;
    let mass = ops.mass();
    let mut num = 0.0;
    let mut den = 0.0;
    for v in 0..u.len() {
        let lhs = su[v] / mass[v] + ops.kappa();
        num += lhs * w[v] * mass[v];
        den += w[v] * w[v] * mass[v];
    }
    if !(den > 1e-300) {
        return Err(Error::Degeneracy(format!("‖K e^(2u)‖² = {den:e}")));
    }
    Ok(num / den)
}

/// `u + ½ log c∞`, absorbing the multiplier of the null case.
pub fn null_case_shift(u: &ScalarField, c_inf: f64) -> Result<ScalarField> {
    if !(c_inf > 0.0) {
        return Err(Error::Sign(format!(
            "c∞ = {c_inf} is not positive; the data violate the sign conditions"
        )));
    }
    Ok(ScalarField::from(u.add_scalar(0.5 * c_inf.ln())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{seed_on_constraint, PrescriptionSource, SeedProfile};
    use crate::generators::flat_torus;
    use crate::geometry::metric_quantities;
    use crate::operators::assemble;

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        let bad = FlowConfig {
            dt_min: 1.0,
            dt_initial: 0.1,
            ..FlowConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FlowConfig {
            grad_tol: 0.0,
            ..FlowConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shift_arithmetic() {
        let u = ScalarField::from_vec(vec![0.0, 1.0]);
        assert_eq!(null_case_shift(&u, 1.0).unwrap(), u);
        let s = null_case_shift(&u, std::f64::consts::E.powi(2)).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15 && (s[1] - 2.0).abs() < 1e-15);
        assert!(matches!(null_case_shift(&u, -0.5), Err(Error::Sign(_))));
    }

    #[test]
    fn energy_check_of_trivial_trace() {
        assert_eq!(energy_identity_check(&[]), 0.0);
    }

    #[test]
    fn renormalization_roundtrip() {
        let mesh = flat_torus(12).unwrap();
        let metric = metric_quantities(&mesh).unwrap();
        let ops = assemble(&mesh, &metric).unwrap();
        let k = Prescription::new(
            PrescriptionSource::Harmonic1 { offset: 0.5 }.evaluate(&mesh).unwrap(),
            &metric,
        )
        .unwrap();
        let spec = ConstraintSpec::for_metric(&metric);
        let problem = FlowProblem::new(&k, &ops, &metric, spec, FlowConfig::default()).unwrap();
        let u0 = seed_on_constraint(&k, &mesh, &metric, &spec, SeedProfile::Auto).unwrap();

        let g = TangentialGradient::compute(&u0, &k, &ops, 1e-12).unwrap();
        let (same, s0) = problem.renormalize(&u0, &g.normal()).unwrap();
        // the seed is only within 1e-12; the correction polishes it further
        assert!(s0.abs() < 1e-11, "{s0}");
        assert!((functional_l(&same, &k, &metric).unwrap() - spec.target).abs() <= 1e-15);

        let eps = 1e-9;
        let pushed = ScalarField::from(&*u0 + eps * &*g.normal());
        let (back, s) = problem.renormalize(&pushed, &g.normal()).unwrap();
        assert!((s + eps).abs() < 1e-12, "{s}");
        let r = functional_l(&back, &k, &metric).unwrap() - spec.target;
        assert!(r.abs() <= 1e-13);
    }
}
