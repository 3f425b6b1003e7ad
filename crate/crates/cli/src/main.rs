use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use curvflow::config::{RunConfig, UniformizeMode};
use curvflow::flow::{estimate_c_infinity, residual_kw};
use curvflow::functionals::{
    compatibility_check, functional_l, ConstraintSpec, EulerSign, Prescription, PrescriptionSource, TangentialGradient,
};
use curvflow::generators::MeshGenerator;
use curvflow::geometry::{gauss_bonnet_check, metric_quantities};
use curvflow::meshio::{read_mesh, write_mesh};
use curvflow::operators::{OperatorPair, SolverKind, DEFAULT_SOLVER_TOL};
use curvflow::pipeline::{self, ExitStatus};
use curvflow::uniformize::{curvature_of_conformal, uniformize_background};
use curvflow::{Error, ScalarField};

#[derive(Parser)]
#[command(
    name = "curvflow",
    version,
    about = "Prescribed curvature by constrained gradient flow on conical surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for one config (or several with --sweep).
    Solve {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Run the configs concurrently; each needs its own output_dir.
        #[arg(long)]
        sweep: bool,
    },
    /// Conformally rescale a mesh to constant curvature.
    Uniformize {
        mesh: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Check a conformal factor against a prescription.
    Verify {
        mesh: PathBuf,
        field: PathBuf,
        #[arg(long)]
        prescription: String,
        /// Pass threshold for the H-dual equation residual.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value = "never", value_parser = ["auto", "always", "never"])]
        uniformize: String,
        #[arg(long, default_value = "cholesky")]
        solver: SolverKind,
    },
    /// Write a built-in mesh, e.g. `gen cone_sphere 3:-0.9,-0.9,-0.9 out.mesh`.
    Gen { name: String, params: String, out: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { configs, sweep } => solve(&configs, sweep),
        Command::Uniformize { mesh, out, tol } => report(uniformize(&mesh, &out, tol)),
        Command::Verify {
            mesh,
            field,
            prescription,
            tol,
            uniformize,
            solver,
        } => {
            let mode = match uniformize.as_str() {
                "auto" => UniformizeMode::Auto,
                "always" => UniformizeMode::Always,
                _ => UniformizeMode::Never,
            };
            match verify(&mesh, &field, &prescription, tol, mode, solver) {
                Ok(true) => 0,
                Ok(false) => 2,
                Err(e) => {
                    eprintln!("error: {e}");
                    error_code(&e)
                }
            }
        }
        Command::Gen { name, params, out } => report(gen(&name, &params, &out)),
    };
    ExitCode::from(code as u8)
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::Structural(_) | Error::FieldLength { .. } => {
            ExitStatus::InputError.code()
        }
        Error::Geometry { .. } | Error::Divisor(_) => ExitStatus::InputError.code(),
        _ => ExitStatus::NumericalError.code(),
    }
}

fn report(r: curvflow::Result<()>) -> i32 {
    match r {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

fn solve_one(path: &Path) -> i32 {
    let config = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return ExitStatus::InputError.code();
        }
    };
    let (status, outcome) = pipeline::run(&config);
    match &outcome {
        Ok(a) => {
            let r = &a.run.report;
            println!(
                "{}: {:?} after {} steps, t = {:.6e}, grad_S_norm = {:.3e}, residual = {:.3e}, c_inf = {:.12}",
                path.display(),
                r.status,
                r.steps,
                r.t,
                r.grad_s_norm,
                a.analysis.residual.h_dual,
                a.analysis.c_infinity
            );
            println!("{}: {}", path.display(), r.scope.label());
            println!("{}: reports in {}", path.display(), config.output_dir.display());
        }
        Err(f) => eprintln!("{}: {f}", path.display()),
    }
    status.code()
}

fn solve(configs: &[PathBuf], sweep: bool) -> i32 {
    if !sweep {
        if configs.len() > 1 {
            eprintln!("several configs given; pass --sweep to run them all");
            return ExitStatus::InputError.code();
        }
        return solve_one(&configs[0]);
    }
    let mut dirs = std::collections::HashSet::new();
    for path in configs {
        match RunConfig::load(path) {
            Ok(c) => {
                if !dirs.insert(c.output_dir.clone()) {
                    eprintln!(
                        "{}: output_dir {} is shared with another config",
                        path.display(),
                        c.output_dir.display()
                    );
                    return ExitStatus::InputError.code();
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return ExitStatus::InputError.code();
            }
        }
    }
    let codes: Vec<i32> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|p| s.spawn(move || solve_one(p))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(ExitStatus::NumericalError.code()))
            .collect()
    });
    codes.into_iter().max().unwrap_or(0)
}

fn uniformize(mesh_path: &Path, out: &Path, tol: f64) -> curvflow::Result<()> {
    let mesh = read_mesh(mesh_path)?;
    let raw = metric_quantities(&mesh)?;
    let u = uniformize_background(&mesh, &raw, tol)?;
    pipeline::write_uniformized(&u, out)?;
    println!("kappa_bar = {:.16e}", u.kappa_bar);
    println!("curvature_deviation = {:.16e}", u.curvature_deviation);
    println!("newton_iterations = {}", u.residual_history.len() - 1);
    if !u.guaranteed {
        println!("note: chi(Sigma,beta) > 0, uniformization is best effort");
    }
    Ok(())
}

fn gen(name: &str, params: &str, out: &Path) -> curvflow::Result<()> {
    let mesh = MeshGenerator::parse(name, params)?.generate()?;
    write_mesh(&mesh, out, &[format!("generated by: gen {name} {params}")])?;
    println!(
        "wrote {} ({} vertices, {} faces, {} cones)",
        out.display(),
        mesh.vertex_count(),
        mesh.face_count(),
        mesh.divisor().len()
    );
    Ok(())
}

fn verify(
    mesh_path: &Path,
    field_path: &Path,
    prescription: &str,
    tol: f64,
    mode: UniformizeMode,
    solver: SolverKind,
) -> curvflow::Result<bool> {
    let mesh = read_mesh(mesh_path)?;
    let raw = metric_quantities(&mesh)?;
    let wants = match mode {
        UniformizeMode::Always => true,
        UniformizeMode::Never => false,
        UniformizeMode::Auto => !raw.is_constant_curvature(raw.default_curvature_tolerance()),
    };
    let (mesh, metric) = if wants {
        let u = uniformize_background(&mesh, &raw, 1e-10)?;
        (u.mesh, u.metric)
    } else {
        (mesh, raw)
    };
    let u = ScalarField::read_csv(field_path)?;
    u.check_len(mesh.vertex_count())?;
    let ops = OperatorPair::new(&mesh, &metric, solver)?;
    let k = Prescription::new(PrescriptionSource::parse(prescription)?.evaluate(&mesh)?, &metric)?;
    let spec = ConstraintSpec::for_metric(&metric);

    let gb = gauss_bonnet_check(&metric);
    let gb_tol = 1e-8 * (1.0 + metric.kappa.abs());
    let compat = compatibility_check(&k, &metric);
    let residual = residual_kw(&u, &k, &ops, DEFAULT_SOLVER_TOL)?;
    let c_inf = estimate_c_infinity(&u, &k, &ops)?;
    let constraint = functional_l(&u, &k, &metric)? - spec.target;
    let grad = TangentialGradient::compute(&u, &k, &ops, DEFAULT_SOLVER_TOL)?;
    let curvature = curvature_of_conformal(&u, &ops, &metric);
    let curvature_error = curvature
        .iter()
        .zip(k.values().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let background_ok = metric.is_constant_curvature(metric.default_curvature_tolerance());
    let residual_ok = residual.h_dual <= tol;
    println!("singular_euler = {:.16e}", metric.singular_euler);
    println!("kappa = {:.16e}", metric.kappa);
    println!("background_constant_curvature = {background_ok}");
    println!("gauss_bonnet.topological = {:.16e}", gb.topological);
    println!("gauss_bonnet.singular = {:.16e}", gb.singular);
    println!("gauss_bonnet.pass = {}", gb.passes(gb_tol));
    println!(
        "compatibility = {}",
        if compat.passed() {
            "pass".into()
        } else {
            format!("{compat:?}")
        }
    );
    println!("constraint_residual = {constraint:.16e}");
    println!("grad_S_norm = {:.16e}", grad.grad_s_norm);
    println!("c_infinity = {c_inf:.16e}");
    println!("residual_kw.h_dual = {:.16e}", residual.h_dual);
    println!("residual_kw.l2 = {:.16e}", residual.l2);
    println!("max_curvature_error = {curvature_error:.16e}");
    if EulerSign::of(metric.singular_euler) == EulerSign::Positive {
        println!("note: chi(Sigma,beta) > 0, outside the convergence theorem's scope");
    }
    let pass = residual_ok && gb.passes(gb_tol) && background_ok && compat.passed();
    println!("verdict = {}", if pass { "pass" } else { "fail" });
    Ok(pass)
}
