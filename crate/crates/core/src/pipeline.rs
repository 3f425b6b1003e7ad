//! End-to-end runs: mesh → background → operators → seed → flow → analysis → reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::{MeshSource, RunConfig, SeedChoice, UniformizeMode};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::flow::{
    estimate_c_infinity, null_case_shift, pointwise_kw_residual, residual_kw, FlowProblem, FlowRun, KwResidual,
    RunStatus, StepRecord, TheoremScope,
};
use crate::functionals::{
    compatibility_check, seed_on_constraint, smallness_report, trudinger_moser_quantities, Compatibility,
    ConstraintSpec, EulerSign, Prescription, SeedProfile, SmallnessReport, TrudingerMoserQuantities,
};
use crate::geometry::{
    euler_characteristic, gauss_bonnet_check, metric_quantities, BackgroundMetric, ConicalMesh, GaussBonnetReport,
};
use crate::meshio::{read_mesh, write_mesh};
use crate::operators::{integrate, OperatorPair};
use crate::uniformize::{curvature_of_conformal, uniformize_background, Uniformized};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Converged,
    /// Bad config, unreadable or malformed input.
    InputError,
    /// `t_max` or the step cap was reached first.
    Inconclusive,
    Incompatible,
    NumericalError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            Self::Converged => 0,
            Self::InputError => 1,
            Self::Inconclusive => 2,
            Self::Incompatible => 3,
            Self::NumericalError => 4,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::InputError => "input_error",
            Self::Inconclusive => "inconclusive",
            Self::Incompatible => "compatibility_failure",
            Self::NumericalError => "numerical_error",
        }
    }
}

/// Why a pipeline stopped before producing a flow result.
#[derive(Debug)]
pub enum Failure {
    Input(Error),
    Incompatible(String),
    Numerical(Error),
}

impl Failure {
    pub fn status(&self) -> ExitStatus {
        match self {
            Self::Input(_) => ExitStatus::InputError,
            Self::Incompatible(_) => ExitStatus::Incompatible,
            Self::Numerical(_) => ExitStatus::NumericalError,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Input(e) => write!(f, "input error: {e}"),
            Self::Incompatible(msg) => write!(f, "compatibility check failed: {msg}"),
            Self::Numerical(e) => write!(f, "numerical error: {e}"),
        }
    }
}

fn input(e: Error) -> Failure {
    Failure::Input(e)
}

fn numerical(e: Error) -> Failure {
    Failure::Numerical(e)
}

/// Post-processing of the final flow state.
#[derive(Debug, Clone)]
pub struct FinalAnalysis {
    pub c_infinity: f64,
    /// `½ log c∞`, applied only when `χ(Σ, β) = 0`.
    pub shift: Option<f64>,
    /// Final field, shifted in the null case.
    pub solution: ScalarField,
    /// Residual of the unshifted final field.
    pub residual_unshifted: KwResidual,
    pub residual: KwResidual,
    pub pointwise_residual: ScalarField,
    /// Curvature of `e^{2u} g` for the solution field.
    pub curvature: ScalarField,
    pub trudinger_moser: TrudingerMoserQuantities,
    /// `max |L(u) - target|` over the trace.
    pub max_constraint_residual: f64,
    /// Steps where `J` rose by more than the local-error budget.
    pub energy_budget_violations: usize,
    /// `max |∫u dv - ∫u0 dv|` over the trace.
    pub max_integral_drift: f64,
}

/// Everything a successful pipeline produced, kept in memory.
#[derive(Debug)]
pub struct Artifacts {
    pub mesh: ConicalMesh,
    pub raw_metric: BackgroundMetric,
    pub uniformized: Option<Uniformized>,
    pub metric: BackgroundMetric,
    pub gauss_bonnet: GaussBonnetReport,
    pub ops: OperatorPair,
    pub k: Prescription,
    pub spec: ConstraintSpec,
    pub u0: ScalarField,
    pub smallness: SmallnessReport,
    pub run: FlowRun,
    pub analysis: FinalAnalysis,
}

impl Artifacts {
    pub fn status(&self) -> ExitStatus {
        match self.run.report.status {
            RunStatus::Converged => ExitStatus::Converged,
            RunStatus::TimeLimit | RunStatus::StepLimit => ExitStatus::Inconclusive,
        }
    }
}

fn load_mesh(source: &MeshSource) -> Result<ConicalMesh> {
    match source {
        MeshSource::Generator(g) => g.generate(),
        MeshSource::File(p) => read_mesh(p),
    }
}

/// Runs the computation without touching the file system (except to read inputs).
pub fn execute(config: &RunConfig) -> Result<Artifacts, Failure> {
    let mesh = load_mesh(&config.mesh).map_err(input)?;
    let raw_metric = metric_quantities(&mesh).map_err(input)?;

    let wants = match config.uniformize {
        UniformizeMode::Always => true,
        UniformizeMode::Never => false,
        UniformizeMode::Auto => !raw_metric.is_constant_curvature(raw_metric.default_curvature_tolerance()),
    };
    let (mesh, metric, uniformized) = if wants {
        let u = uniformize_background(&mesh, &raw_metric, config.uniformize_tol).map_err(numerical)?;
        (u.mesh.clone(), u.metric.clone(), Some(u))
    } else {
        (mesh, raw_metric.clone(), None)
    };
    let gauss_bonnet = gauss_bonnet_check(&metric);

    let ops = OperatorPair::new(&mesh, &metric, config.solver).map_err(numerical)?;
    let values = config.prescription.evaluate(&mesh).map_err(input)?;
    if values.iter().all(|&v| v == 0.0) {
        return Err(Failure::Incompatible("K vanishes identically".into()));
    }
    let k = Prescription::new(values, &metric).map_err(input)?;
    if let Compatibility::Fail(msg) = compatibility_check(&k, &metric) {
        return Err(Failure::Incompatible(msg));
    }

    let spec = ConstraintSpec::for_metric(&metric);
    let profile = match config.seed {
        SeedChoice::Auto => SeedProfile::Auto,
        SeedChoice::Constant => SeedProfile::Constant,
        SeedChoice::Bump { radius } => SeedProfile::Bump {
            radius: radius.unwrap_or(0.25 * metric.total_volume.sqrt()),
        },
    };
    let u0 = seed_on_constraint(&k, &mesh, &metric, &spec, profile).map_err(numerical)?;
    let smallness = smallness_report(&u0, &k, &ops, config.smallness_gamma);

    let problem = FlowProblem::new(&k, &ops, &metric, spec, config.flow).map_err(input)?;
    let run = problem.run(u0.clone()).map_err(numerical)?;
    let analysis = analyze(&run, &u0, &k, &ops, &metric, config.flow.solver_tol).map_err(numerical)?;

    Ok(Artifacts {
        mesh,
        raw_metric,
        uniformized,
        metric,
        gauss_bonnet,
        ops,
        k,
        spec,
        u0,
        smallness,
        run,
        analysis,
    })
}

fn analyze(
    run: &FlowRun,
    u0: &ScalarField,
    k: &Prescription,
    ops: &OperatorPair,
    metric: &BackgroundMetric,
    tol: f64,
) -> Result<FinalAnalysis> {
    let u = &run.state.u;
    let c_infinity = estimate_c_infinity(u, k, ops)?;
    let null = EulerSign::of(metric.singular_euler) == EulerSign::Null;
    let (solution, shift) = if null {
        (null_case_shift(u, c_infinity)?, Some(0.5 * c_infinity.ln()))
    } else {
        (u.clone(), None)
    };
    let residual_unshifted = residual_kw(u, k, ops, tol)?;
    let residual = residual_kw(&solution, k, ops, tol)?;
    let pointwise_residual = pointwise_kw_residual(&solution, k, ops)?;
    let curvature = curvature_of_conformal(&solution, ops, metric);
    let trudinger_moser = trudinger_moser_quantities(u, ops, metric)?;

    let vol = metric.total_volume;
    let int0 = integrate(u0, metric);
    let trace = &run.trace;
    let max_constraint_residual = trace.iter().map(|r| r.constraint_residual.abs()).fold(0.0, f64::max);
    let energy_budget_violations = trace.windows(2).filter(|w| w[1].j > w[0].j + w[1].j_budget).count();
    let max_integral_drift = trace.iter().map(|r| (r.mean_u * vol - int0).abs()).fold(0.0, f64::max);
    Ok(FinalAnalysis {
        c_infinity,
        shift,
        solution,
        residual_unshifted,
        residual,
        pointwise_residual,
        curvature,
        trudinger_moser,
        max_constraint_residual,
        energy_budget_violations,
        max_integral_drift,
    })
}

/// Trace rows spaced at least `interval` apart in flow time, plus the first and last.
pub fn sample_trace(trace: &[StepRecord], interval: f64) -> Vec<&StepRecord> {
    let mut out = Vec::new();
    let Some((last, rest)) = trace.split_last() else {
        return out;
    };
    let mut next = f64::NEG_INFINITY;
    for r in rest {
        if r.t >= next {
            out.push(r);
            next = ((r.t / interval).floor() + 1.0) * interval;
        }
    }
    out.push(last);
    out
}

fn header(config: &RunConfig) -> String {
    let f = &config.flow;
    format!(
        "# config_hash={}\n# grad_tol={:.16e} constraint_tol={:.16e} energy_tol={:.16e} solver_tol={:.16e} \
         dt_initial={:.16e} dt_min={:.16e} dt_max={:.16e} t_max={:.16e} local_tol={:.16e} solver={} \
         uniformize_tol={:.16e}\n",
        config.hash,
        f.grad_tol,
        f.constraint_tol,
        f.energy_tol,
        f.solver_tol,
        f.dt_initial,
        f.dt_min,
        f.dt_max,
        f.t_max,
        f.local_tol(),
        config.solver,
        config.uniformize_tol,
    )
}

pub fn time_series_csv(config: &RunConfig, trace: &[StepRecord]) -> String {
    let mut out = header(config);
    out.push_str("t,J,dissipation,energy_gap,constraint_residual,grad_S_norm,mean_u,min_u,max_u\n");
    for r in sample_trace(trace, config.report_interval) {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.j, r.dissipation, r.energy_gap, r.constraint_residual, r.grad_s_norm, r.mean_u, r.min_u, r.max_u
        );
    }
    out
}

pub fn final_state_csv(config: &RunConfig, analysis: &FinalAnalysis) -> String {
    let mut out = header(config);
    out.push_str("vertex,u,curvature_of_e2u_g,pointwise_KW_residual\n");
    for v in 0..analysis.solution.len() {
        let _ = writeln!(
            out,
            "{v},{:.16e},{:.16e},{:.16e}",
            analysis.solution[v], analysis.curvature[v], analysis.pointwise_residual[v]
        );
    }
    out
}

/// Human-readable `key = value` report.
pub fn report_text(config: &RunConfig, outcome: &Result<Artifacts, Failure>) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    let status = match outcome {
        Ok(a) => a.status(),
        Err(f) => f.status(),
    };
    kv("status", status.label().into());
    kv("exit_code", status.code().to_string());
    kv("config_hash", config.hash.clone());
    for line in config.canonical().lines() {
        let (k, v) = line.split_once(" = ").unwrap_or((line, ""));
        kv(&format!("config.{k}"), v.into());
    }
    kv("output_dir", config.output_dir.display().to_string());
    kv("flow.local_tol", format!("{:.16e}", config.flow.local_tol()));
    let a = match outcome {
        Err(f) => {
            kv("error", f.to_string());
            return out;
        }
        Ok(a) => a,
    };
    let m = &a.metric;
    kv("mesh.vertices", a.mesh.vertex_count().to_string());
    kv("mesh.faces", a.mesh.face_count().to_string());
    kv("mesh.cones", a.mesh.divisor().len().to_string());
    kv("mesh.euler_characteristic", euler_characteristic(&a.mesh).to_string());
    kv("mesh.singular_euler", format!("{:.16e}", m.singular_euler));
    kv("background.kappa", format!("{:.16e}", m.kappa));
    kv("background.volume", format!("{:.16e}", m.total_volume));
    kv(
        "background.raw_curvature_deviation",
        format!("{:.16e}", a.raw_metric.max_curvature_deviation()),
    );
    kv("background.uniformized", a.uniformized.is_some().to_string());
    if let Some(u) = &a.uniformized {
        kv("uniformize.kappa_bar", format!("{:.16e}", u.kappa_bar));
        kv(
            "uniformize.curvature_deviation",
            format!("{:.16e}", u.curvature_deviation),
        );
        kv(
            "uniformize.newton_iterations",
            (u.residual_history.len() - 1).to_string(),
        );
        kv("uniformize.guaranteed", u.guaranteed.to_string());
    }
    kv(
        "gauss_bonnet.topological",
        format!("{:.16e}", a.gauss_bonnet.topological),
    );
    kv("gauss_bonnet.singular", format!("{:.16e}", a.gauss_bonnet.singular));
    kv("operators.conditioning_warnings", a.ops.warnings().len().to_string());
    kv("prescription.integral", format!("{:.16e}", a.k.integral_k()));
    kv("prescription.sup", format!("{:.16e}", a.k.sup_k()));
    kv("constraint.target", format!("{:.16e}", a.spec.target));
    kv("smallness.sup_k_plus", format!("{:.16e}", a.smallness.sup_k_plus));
    kv("smallness.h_norm_sq_u0", format!("{:.16e}", a.smallness.h_norm_sq));
    kv("smallness.product", format!("{:.16e}", a.smallness.product));
    kv("smallness.automatic", a.smallness.auto_satisfied.to_string());
    let r = &a.run.report;
    kv(
        "flow.outcome",
        match r.status {
            RunStatus::Converged => "converged",
            RunStatus::TimeLimit => "t_max reached",
            RunStatus::StepLimit => "step cap reached",
        }
        .into(),
    );
    kv("flow.scope", r.scope.label().into());
    kv("flow.guaranteed", (r.scope == TheoremScope::Guaranteed).to_string());
    kv("flow.steps", r.steps.to_string());
    kv("flow.t", format!("{:.16e}", r.t));
    kv("flow.grad_s_norm", format!("{:.16e}", r.grad_s_norm));
    kv("flow.j_final", format!("{:.16e}", a.run.state.j_value));
    kv("flow.energy_identity_gap", format!("{:.16e}", r.energy_gap));
    let f = &a.analysis;
    kv(
        "flow.max_constraint_residual",
        format!("{:.16e}", f.max_constraint_residual),
    );
    kv("flow.energy_budget_violations", f.energy_budget_violations.to_string());
    if f.shift.is_some() {
        kv("flow.max_integral_drift", format!("{:.16e}", f.max_integral_drift));
    }
    kv("solution.c_infinity", format!("{:.16e}", f.c_infinity));
    kv("solution.shift", f.shift.map_or("none".into(), |s| format!("{s:.16e}")));
    kv(
        "solution.residual_h_dual_unshifted",
        format!("{:.16e}", f.residual_unshifted.h_dual),
    );
    kv("solution.residual_h_dual", format!("{:.16e}", f.residual.h_dual));
    kv("solution.residual_l2", format!("{:.16e}", f.residual.l2));
    kv(
        "trudinger_moser.log_exp_integral",
        format!("{:.16e}", f.trudinger_moser.log_exp_integral),
    );
    kv(
        "trudinger_moser.dirichlet",
        format!("{:.16e}", f.trudinger_moser.dirichlet),
    );
    kv(
        "trudinger_moser.mean_term",
        format!("{:.16e}", f.trudinger_moser.mean_term),
    );
    kv(
        "trudinger_moser.beta_with_unit_constant",
        format!("{:.16e}", f.trudinger_moser.beta_with_unit_constant),
    );
    out
}

/// Writes `report.txt` and, on success, the CSVs and any uniformized mesh.
pub fn write_reports(config: &RunConfig, outcome: &Result<Artifacts, Failure>) -> Result<()> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), report_text(config, outcome))?;
    if let Ok(a) = outcome {
        fs::write(dir.join("timeseries.csv"), time_series_csv(config, &a.run.trace))?;
        fs::write(dir.join("final_state.csv"), final_state_csv(config, &a.analysis))?;
        if let Some(u) = &a.uniformized {
            write_uniformized(u, &dir.join("uniformized.mesh"))?;
        }
    }
    Ok(())
}

pub fn write_uniformized(u: &Uniformized, path: &Path) -> Result<()> {
    let comments = [
        format!("kappa_bar = {:.16e}", u.kappa_bar),
        format!(
            "newton_residual = {:.16e}",
            u.residual_history.last().copied().unwrap_or(f64::NAN)
        ),
        format!("curvature_deviation = {:.16e}", u.curvature_deviation),
    ];
    write_mesh(&u.mesh, path, &comments)
}

/// Full run: compute, write reports, report the exit status.
pub fn run(config: &RunConfig) -> (ExitStatus, Result<Artifacts, Failure>) {
    let outcome = execute(config);
    let status = match &outcome {
        Ok(a) => a.status(),
        Err(f) => f.status(),
    };
    match write_reports(config, &outcome) {
        Ok(()) => (status, outcome),
        Err(e) => (ExitStatus::InputError, Err(Failure::Input(e))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64) -> StepRecord {
        StepRecord {
            t,
            j: 0.0,
            dissipation: 0.0,
            energy_gap: 0.0,
            constraint_residual: 0.0,
            pre_correction_drift: 0.0,
            grad_s_norm: 0.0,
            mean_u: 0.0,
            min_u: 0.0,
            max_u: 0.0,
            dirichlet: 0.0,
            dt: 0.0,
            local_error: 0.0,
            correction: 0.0,
            j_budget: 0.0,
        }
    }

    #[test]
    fn sampling_keeps_ends_and_spacing() {
        let trace: Vec<_> = [0.0, 0.05, 0.12, 0.15, 0.31, 0.33, 0.4]
            .iter()
            .map(|&t| record(t))
            .collect();
        let ts: Vec<f64> = sample_trace(&trace, 0.1).iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0.0, 0.12, 0.31, 0.4]);
        assert_eq!(sample_trace(&trace[..1], 0.1).len(), 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(ExitStatus::Converged.code(), 0);
        assert_eq!(ExitStatus::Inconclusive.code(), 2);
        assert_eq!(ExitStatus::Incompatible.code(), 3);
        assert_eq!(ExitStatus::NumericalError.code(), 4);
    }
}
