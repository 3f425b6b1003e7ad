//! Discrete Laplace–Beltrami stiffness, lumped mass, the `H = W^{1,2}` inner
//! product and the `(Δ + I)^{-1}` solve.

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{BackgroundMetric, ConicalMesh};
use crate::linalg::{self, SparseCholesky};

/// Default relative residual for Helmholtz solves.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

/// Cotangents above this magnitude trigger a conditioning warning.
const COT_WARNING: f64 = 1e8;

/// How `(S + M) x = b` is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Sparse Cholesky under a reverse Cuthill–McKee ordering.
    #[default]
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
    /// Dense Cholesky; reference solver for small meshes.
    Dense,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(Self::Cholesky),
            "cg" => Ok(Self::ConjugateGradient),
            "dense" => Ok(Self::Dense),
            _ => Err(Error::Config(format!(
                "unknown solver '{s}' (expected cholesky, cg or dense)"
            ))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cholesky => "cholesky",
            Self::ConjugateGradient => "cg",
            Self::Dense => "dense",
        })
    }
}

#[allow(clippy::large_enum_variant)]
enum Solver {
    Cholesky(SparseCholesky),
    ConjugateGradient,
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
}

/// A face corner whose cotangent weight is numerically unreliable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningWarning {
    pub face: usize,
    pub corner: usize,
    pub cotangent: f64,
}

/// Assembled stiffness and lumped mass of a background metric.
pub struct OperatorPair {
    stiffness: CsrMatrix<f64>,
    mass: DVector<f64>,
    helmholtz: CsrMatrix<f64>,
    solver: Solver,
    kind: SolverKind,
    kappa: f64,
    total_volume: f64,
    warnings: Vec<ConditioningWarning>,
}

impl std::fmt::Debug for OperatorPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorPair")
            .field("vertices", &self.mass.len())
            .field("nnz", &self.stiffness.nnz())
            .field("solver", &self.kind)
            .field("kappa", &self.kappa)
            .finish()
    }
}

/// Assembles with the default sparse direct solver.
pub fn assemble(mesh: &ConicalMesh, metric: &BackgroundMetric) -> Result<OperatorPair> {
    OperatorPair::new(mesh, metric, SolverKind::default())
}

impl OperatorPair {
    pub fn new(mesh: &ConicalMesh, metric: &BackgroundMetric, kind: SolverKind) -> Result<Self> {
        let n = mesh.vertex_count();
        let mut coo = CooMatrix::new(n, n);
        let mut warnings = Vec::new();
        for f in 0..mesh.face_count() {
            let lengths = mesh.face_lengths(f);
            let area4 = 4.0 * metric.face_areas[f];
            let face = mesh.faces()[f];
            for k in 0..3 {
                let a = lengths[k];
                let b = lengths[(k + 1) % 3];
                let c = lengths[(k + 2) % 3];
                let cot = (b * b + c * c - a * a) / area4;
                if !cot.is_finite() || cot.abs() > COT_WARNING {
                    warnings.push(ConditioningWarning {
                        face: f,
                        corner: k,
                        cotangent: cot,
                    });
                }
                let w = 0.5 * cot;
                let i = face[(k + 1) % 3];
                let j = face[(k + 2) % 3];
                coo.push(i, j, -w);
                coo.push(j, i, -w);
                coo.push(i, i, w);
                coo.push(j, j, w);
            }
        }
        let stiffness = CsrMatrix::from(&coo);
        let mass = DVector::from_column_slice(&metric.vertex_areas);
        for i in 0..n {
            coo.push(i, i, mass[i]);
        }
        let helmholtz = CsrMatrix::from(&coo);
        let solver = match kind {
            SolverKind::Cholesky => Solver::Cholesky(SparseCholesky::new(&helmholtz)?),
            SolverKind::ConjugateGradient => Solver::ConjugateGradient,
            SolverKind::Dense => Solver::Dense(linalg::dense_cholesky(&helmholtz)?),
        };
        Ok(Self {
            stiffness,
            mass,
            helmholtz,
            solver,
            kind,
            kappa: metric.kappa,
            total_volume: metric.total_volume,
            warnings,
        })
    }

    /// Same operators with a different linear solver.
    pub fn with_solver(&self, kind: SolverKind) -> Result<Self> {
        let solver = match kind {
            SolverKind::Cholesky => Solver::Cholesky(SparseCholesky::new(&self.helmholtz)?),
            SolverKind::ConjugateGradient => Solver::ConjugateGradient,
            SolverKind::Dense => Solver::Dense(linalg::dense_cholesky(&self.helmholtz)?),
        };
        Ok(Self {
            stiffness: self.stiffness.clone(),
            mass: self.mass.clone(),
            helmholtz: self.helmholtz.clone(),
            solver,
            kind,
            kappa: self.kappa,
            total_volume: self.total_volume,
            warnings: self.warnings.clone(),
        })
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    /// Diagonal of the lumped mass matrix.
    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn vertex_count(&self) -> usize {
        self.mass.len()
    }

    pub fn solver_kind(&self) -> SolverKind {
        self.kind
    }

    pub fn warnings(&self) -> &[ConditioningWarning] {
        &self.warnings
    }

    /// `S u`.
    pub fn apply_stiffness(&self, u: &DVector<f64>) -> DVector<f64> {
        linalg::spmv(&self.stiffness, u)
    }

    /// `(S + M) u`.
    pub fn apply_helmholtz(&self, u: &DVector<f64>) -> DVector<f64> {
        linalg::spmv(&self.helmholtz, u)
    }

    /// `∫ |∇u|^2 dv = u^T S u`.
    pub fn dirichlet(&self, u: &DVector<f64>) -> f64 {
        u.dot(&self.apply_stiffness(u))
    }

    /// Solves `(S + M) x = b` to relative residual `tol`.
    pub fn solve(&self, b: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
        let b_norm = b.norm();
        if b_norm == 0.0 {
            return Ok(DVector::zeros(b.len()));
        }
        let direct = |b: &DVector<f64>| match &self.solver {
            Solver::Cholesky(c) => c.solve(b),
            Solver::Dense(c) => c.solve(b),
            Solver::ConjugateGradient => unreachable!(),
        };
        match &self.solver {
            Solver::ConjugateGradient => {
                let max_it = 10 * b.len() + 1000;
                Ok(linalg::conjugate_gradient(&self.helmholtz, b, tol, max_it)?.0)
            }
            _ => {
                let mut x = direct(b);
                // iterative refinement guards the residual contract
                for _ in 0..3 {
                    let r = b - self.apply_helmholtz(&x);
                    let rel = r.norm() / b_norm;
                    if rel <= tol {
                        return Ok(x);
                    }
                    x += direct(&r);
                }
                let rel = (b - self.apply_helmholtz(&x)).norm() / b_norm;
                if rel <= tol {
                    Ok(x)
                } else {
                    Err(Error::SolverDivergence {
                        iterations: 3,
                        residual: rel,
                    })
                }
            }
        }
    }
}

/// `Σ_v f_v A_v`.
pub fn integrate(f: &ScalarField, metric: &BackgroundMetric) -> f64 {
    compensated_sum(f.iter().zip(&metric.vertex_areas).map(|(x, a)| x * a))
}

/// Neumaier summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// `∫ (∇u·∇w + u w) dv = u^T (S + M) w`.
pub fn h_inner(u: &ScalarField, w: &ScalarField, ops: &OperatorPair) -> f64 {
    u.dot(&ops.apply_helmholtz(w))
}

/// `‖u‖_H`, the square root of [`h_inner`].
pub fn h_norm(u: &ScalarField, ops: &OperatorPair) -> f64 {
    h_inner(u, u, ops).max(0.0).sqrt()
}

/// Discrete `(Δ + I)^{-1} f`: solves `(S + M) x = M f`.
pub fn helmholtz_solve(f: &ScalarField, ops: &OperatorPair, tol: f64) -> Result<ScalarField> {
    if tol <= 0.0 {
        return Err(Error::Config(format!("solver tolerance must be positive, got {tol}")));
    }
    f.check_len(ops.vertex_count())?;
    let rhs = f.component_mul(ops.mass());
    ops.solve(&rhs, tol).map(ScalarField::from)
}

/// Deterministic pseudo-random start vector in `[-1, 1]`.
fn hash_vector(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| {
        let mut x = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
        x ^= x >> 29;
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^= x >> 32;
        (x >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    })
}

/// Smallest nonzero eigenvalue of `S x = λ M x`, by inverse iteration on the
/// mass-orthogonal complement of constants. Stops when the Rayleigh quotient
/// changes by at most `tol` relatively.
pub fn poincare_lambda(ops: &OperatorPair, metric: &BackgroundMetric, tol: f64) -> Result<f64> {
    let mass = ops.mass();
    let vol = metric.total_volume;
    let project = |x: &mut DVector<f64>| {
        let mean = x.dot(mass) / vol;
        x.add_scalar_mut(-mean);
    };
    let m_norm = |x: &DVector<f64>| x.component_mul(mass).dot(x).sqrt();

    let mut x = hash_vector(mass.len());
    project(&mut x);
    x /= m_norm(&x);
    let mut q_prev = f64::INFINITY;
    let max_iterations = 50_000;
    let solve_tol = (tol * 1e-2).clamp(1e-14, DEFAULT_SOLVER_TOL);
    for _ in 0..max_iterations {
        let mut y = ops.solve(&x.component_mul(mass), solve_tol)?;
        project(&mut y);
        let norm = m_norm(&y);
        if norm == 0.0 {
            return Err(Error::Degeneracy("inverse iteration collapsed".into()));
        }
        x = y / norm;
        let q = ops.dirichlet(&x);
        if (q - q_prev).abs() <= tol * q {
            if q <= 0.0 {
                return Err(Error::Degeneracy(format!("non-positive eigenvalue {q}")));
            }
            return Ok(q);
        }
        q_prev = q;
    }
    Err(Error::EigenDivergence {
        iterations: max_iterations,
        change: f64::NAN,
    })
}
