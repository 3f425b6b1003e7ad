//! The energy `J`, the constraint functional `L`, their Sobolev gradients,
//! the tangential gradient on the constraint hypersurface and initial data.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{BackgroundMetric, ConicalMesh};
use crate::operators::{h_inner, h_norm, helmholtz_solve, integrate, OperatorPair};

/// `|χ(Σ, β)|` below this counts as the null case.
pub const CHI_ZERO_TOL: f64 = 1e-12;

/// Largest `u` for which `e^{2u}` is finite.
const MAX_EXPONENT: f64 = 354.0;

/// Sign class of the singular Euler characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerSign {
    Negative,
    Null,
    Positive,
}

impl EulerSign {
    pub fn of(chi: f64) -> Self {
        if chi.abs() < CHI_ZERO_TOL {
            Self::Null
        } else if chi < 0.0 {
            Self::Negative
        } else {
            Self::Positive
        }
    }
}

/// How a prescribed curvature is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum PrescriptionSource {
    /// `constant:v`
    Constant(f64),
    /// `harmonic1[:c]`: `cos(2π x) - c` on the first embedding coordinate.
    Harmonic1 { offset: f64 },
    /// `affine_x:a,b`: `a + b x`.
    AffineX { a: f64, b: f64 },
    /// `file:path`: per-vertex CSV.
    File(PathBuf),
}

impl PrescriptionSource {
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = || Error::Config(format!("bad prescription '{spec}'"));
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        match (name, arg) {
            ("constant", Some(v)) => Ok(Self::Constant(v.trim().parse().map_err(|_| bad())?)),
            ("harmonic1", None) => Ok(Self::Harmonic1 { offset: 0.5 }),
            ("harmonic1", Some(c)) => Ok(Self::Harmonic1 {
                offset: c.trim().parse().map_err(|_| bad())?,
            }),
            ("affine_x", Some(ab)) => {
                let (a, b) = ab.split_once(',').ok_or_else(bad)?;
                Ok(Self::AffineX {
                    a: a.trim().parse().map_err(|_| bad())?,
                    b: b.trim().parse().map_err(|_| bad())?,
                })
            }
            ("file", Some(p)) => Ok(Self::File(PathBuf::from(p))),
            _ => Err(bad()),
        }
    }

    /// Samples the prescription at mesh vertices.
    pub fn evaluate(&self, mesh: &ConicalMesh) -> Result<ScalarField> {
        let n = mesh.vertex_count();
        let coords = || {
            mesh.coordinates()
                .ok_or_else(|| Error::Config("this prescription needs vertex coordinates; the mesh has none".into()))
        };
        match self {
            Self::Constant(v) => Ok(ScalarField::constant(n, *v)),
            Self::Harmonic1 { offset } => {
                let c = coords()?;
                Ok(ScalarField::from_fn(n, |i| (2.0 * PI * c[i][0]).cos() - offset))
            }
            Self::AffineX { a, b } => {
                let c = coords()?;
                Ok(ScalarField::from_fn(n, |i| a + b * c[i][0]))
            }
            Self::File(path) => {
                let k = ScalarField::read_csv(path)?;
                k.check_len(n)?;
                Ok(k)
            }
        }
    }
}

/// Prescribed curvature sampled at vertices, with cached summaries.
#[derive(Debug, Clone)]
pub struct Prescription {
    k: ScalarField,
    sup_k: f64,
    integral_k: f64,
}

impl Prescription {
    pub fn new(k: ScalarField, metric: &BackgroundMetric) -> Result<Self> {
        k.check_len(metric.vertex_count())?;
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degeneracy("prescribed curvature has non-finite values".into()));
        }
        if k.iter().all(|&v| v == 0.0) {
            return Err(Error::Degeneracy("prescribed curvature vanishes identically".into()));
        }
        Ok(Self {
            sup_k: k.max(),
            integral_k: integrate(&k, metric),
            k,
        })
    }

    pub fn values(&self) -> &ScalarField {
        &self.k
    }

    pub fn sup_k(&self) -> f64 {
        self.sup_k
    }

    pub fn integral_k(&self) -> f64 {
        self.integral_k
    }
}

/// The level `L(u) = target` defining the constraint hypersurface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec {
    pub target: f64,
}

impl ConstraintSpec {
    /// `target = π χ(Σ, β)`, i.e. `∫ K e^{2u} dv = 2π χ(Σ, β)`.
    pub fn for_metric(metric: &BackgroundMetric) -> Self {
        Self {
            target: PI * metric.singular_euler,
        }
    }
}

/// `½ ∫ |∇u|^2 dv + κ ∫ u dv`.
pub fn functional_j(u: &ScalarField, ops: &OperatorPair, metric: &BackgroundMetric) -> f64 {
    0.5 * ops.dirichlet(u) + metric.kappa * integrate(u, metric)
}

fn exp2u(u: &ScalarField) -> Result<ScalarField> {
    let max_u = u.max();
    if max_u > MAX_EXPONENT || max_u.is_nan() {
        return Err(Error::Range { max_u });
    }
    Ok(ScalarField::from(u.map(|x| (2.0 * x).exp())))
}

/// `K e^{2u}` pointwise.
pub fn weighted_curvature(u: &ScalarField, k: &Prescription) -> Result<ScalarField> {
    Ok(ScalarField::from(exp2u(u)?.component_mul(k.values())))
}

/// `½ ∫ K e^{2u} dv`.
pub fn functional_l(u: &ScalarField, k: &Prescription, metric: &BackgroundMetric) -> Result<f64> {
    Ok(0.5 * integrate(&weighted_curvature(u, k)?, metric))
}

/// `∇J(u) = u - (Δ + I)^{-1}(u - κ)`.
pub fn grad_j(u: &ScalarField, ops: &OperatorPair, tol: f64) -> Result<ScalarField> {
    let shifted = ScalarField::from(u.add_scalar(-ops.kappa()));
    let solved = helmholtz_solve(&shifted, ops, tol)?;
    Ok(ScalarField::from(&**u - &*solved))
}

/// `∇L(u) = (Δ + I)^{-1}(K e^{2u})`.
pub fn grad_l(u: &ScalarField, k: &Prescription, ops: &OperatorPair, tol: f64) -> Result<ScalarField> {
    helmholtz_solve(&weighted_curvature(u, k)?, ops, tol)
}

/// Both gradients and their tangential combination at one point.
#[derive(Debug, Clone)]
pub struct TangentialGradient {
    pub grad_j: ScalarField,
    pub grad_l: ScalarField,
    /// `‖∇L‖_H`.
    pub grad_l_norm: f64,
    /// `⟨∇J, N⟩_H` with `N = ∇L / ‖∇L‖_H`.
    pub normal_component: f64,
    /// `∇J - ⟨∇J, N⟩_H N`.
    pub grad_s: ScalarField,
    /// `‖∇^S J‖_H`.
    pub grad_s_norm: f64,
}

impl TangentialGradient {
    pub fn compute(u: &ScalarField, k: &Prescription, ops: &OperatorPair, tol: f64) -> Result<Self> {
        let gj = grad_j(u, ops, tol)?;
        let gl = grad_l(u, k, ops, tol)?;
        let gl_norm = h_norm(&gl, ops);
        let w = weighted_curvature(u, k)?;
        let scale = w.component_mul(&w).dot(ops.mass()).sqrt();
        if !(gl_norm > 1e-14 * scale) || gl_norm == 0.0 {
            return Err(Error::Degeneracy(format!(
                "‖∇L‖_H = {gl_norm:e} vanishes; the prescribed curvature is numerically zero"
            )));
        }
        let normal_component = h_inner(&gj, &gl, ops) / gl_norm;
        let grad_s = ScalarField::from(&*gj - (normal_component / gl_norm) * &*gl);
        let grad_s_norm = h_norm(&grad_s, ops);
        Ok(Self {
            grad_j: gj,
            grad_l: gl,
            grad_l_norm: gl_norm,
            normal_component,
            grad_s,
            grad_s_norm,
        })
    }

    /// Unit normal `N = ∇L / ‖∇L‖_H`.
    pub fn normal(&self) -> ScalarField {
        ScalarField::from(&*self.grad_l / self.grad_l_norm)
    }
}

/// `∇^S J(u)`, the H-gradient of `J` projected onto the tangent space of the
/// constraint hypersurface.
pub fn grad_s_j(u: &ScalarField, k: &Prescription, ops: &OperatorPair, tol: f64) -> Result<ScalarField> {
    Ok(TangentialGradient::compute(u, k, ops, tol)?.grad_s)
}

/// `L(u) - target`.
pub fn constraint_residual(
    u: &ScalarField,
    k: &Prescription,
    metric: &BackgroundMetric,
    spec: &ConstraintSpec,
) -> Result<f64> {
    Ok(functional_l(u, k, metric)? - spec.target)
}

/// Outcome of the sign conditions on `K`.
#[derive(Debug, Clone, PartialEq)]
pub enum Compatibility {
    Pass,
    Fail(String),
}

impl Compatibility {
    pub fn passed(&self) -> bool {
        matches!(self, Self::Pass)
    }
}

/// Sign conditions: χ<0 needs ∫K<0; χ=0 needs ∫K<0 and sup K>0; χ>0 needs sup K>0.
pub fn compatibility_check(k: &Prescription, metric: &BackgroundMetric) -> Compatibility {
    let chi = metric.singular_euler;
    let (int_k, sup_k) = (k.integral_k(), k.sup_k());
    let fail = |what: &str| {
        Compatibility::Fail(format!(
            "χ(Σ,β) = {chi}: requires {what} (∫K dv = {int_k}, sup K = {sup_k})"
        ))
    };
    match EulerSign::of(chi) {
        EulerSign::Negative if int_k >= 0.0 => fail("∫K dv < 0"),
        EulerSign::Null if int_k >= 0.0 || sup_k <= 0.0 => fail("∫K dv < 0 and sup K > 0"),
        EulerSign::Positive if sup_k <= 0.0 => fail("sup K > 0"),
        _ => Compatibility::Pass,
    }
}

/// One-parameter family used to reach the constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeedProfile {
    /// Constant when `∫K` and `χ(Σ, β)` share a strict sign, bump otherwise.
    Auto,
    Constant,
    /// Hat function of the given intrinsic radius around the maximizer of `K`.
    Bump {
        radius: f64,
    },
}

/// Intrinsic (edge-path) distances from `source`.
pub fn edge_path_distances(mesh: &ConicalMesh, source: usize) -> Vec<f64> {
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> Ordering {
            other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
        }
    }
    let n = mesh.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let l = mesh.edge_lengths()[e];
        adj[a].push((b, l));
        adj[b].push((a, l));
    }
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, source)]);
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, l) in &adj[v] {
            if d + l < dist[w] {
                dist[w] = d + l;
                heap.push(Item(d + l, w));
            }
        }
    }
    dist
}

/// Mass-normalized hat function `max(0, 1 - d/r)` around the maximizer of `K`.
pub fn bump_profile(mesh: &ConicalMesh, k: &Prescription, metric: &BackgroundMetric, radius: f64) -> ScalarField {
    let dist = edge_path_distances(mesh, k.values().argmax());
    let hat = ScalarField::from_vec(dist.iter().map(|d| (1.0 - d / radius).max(0.0)).collect());
    let mass = integrate(&hat, metric);
    ScalarField::from(&*hat / mass)
}

/// Finds `u0 = s φ` with `|L(u0) - target| <= 1e-12 (1 + |target|)`.
pub fn seed_on_constraint(
    k: &Prescription,
    mesh: &ConicalMesh,
    metric: &BackgroundMetric,
    spec: &ConstraintSpec,
    profile: SeedProfile,
) -> Result<ScalarField> {
    let n = metric.vertex_count();
    let chi = metric.singular_euler;
    let tol = 1e-12 * (1.0 + spec.target.abs());
    let same_sign = EulerSign::of(chi) != EulerSign::Null && k.integral_k() * chi > 0.0;
    let profile = match profile {
        SeedProfile::Auto if same_sign => SeedProfile::Constant,
        SeedProfile::Auto => SeedProfile::Bump {
            radius: 0.25 * metric.total_volume.sqrt(),
        },
        p => p,
    };
    let phi = match profile {
        SeedProfile::Constant => {
            if !same_sign {
                return Err(Error::Seed(format!(
                    "a constant seed needs ∫K dv (= {}) and χ(Σ,β) (= {chi}) of the same strict sign; try a bump profile",
                    k.integral_k()
                )));
            }
            ScalarField::constant(n, 1.0)
        }
        SeedProfile::Bump { radius } => {
            if !(radius > 0.0) {
                return Err(Error::Seed(format!("bump radius must be positive, got {radius}")));
            }
            if k.sup_k() <= 0.0 {
                return Err(Error::Seed("a bump seed needs sup K > 0".into()));
            }
            bump_profile(mesh, k, metric, radius)
        }
        SeedProfile::Auto => unreachable!(),
    };

    let f = |s: f64| -> Result<f64> { constraint_residual(&ScalarField::from(&*phi * s), k, metric, spec) };
    let df = |s: f64| -> Result<f64> {
        let u = ScalarField::from(&*phi * s);
        let w = weighted_curvature(&u, k)?;
        Ok(integrate(&ScalarField::from(w.component_mul(&phi)), metric))
    };

    if matches!(profile, SeedProfile::Constant) {
        // closed form for constants, then polished below
        let s0 = 0.5 * (2.0 * spec.target / k.integral_k()).ln();
        return polish(s0, &f, &df, tol).map(|s| ScalarField::constant(n, s));
    }

    let f0 = f(0.0)?;
    if f0.abs() <= tol {
        return Ok(ScalarField::zeros(n));
    }
    let (mut lo, mut hi) = if f0 < 0.0 {
        let mut s = 1.0;
        loop {
            match f(s) {
                Ok(v) if v > 0.0 => break (0.0, s),
                Ok(_) if s < 1e6 => s *= 2.0,
                _ => {
                    return Err(Error::Seed(
                        "L(sφ) never exceeds the target along the bump family; try a different profile".into(),
                    ))
                }
            }
        }
    } else {
        return Err(Error::Seed(format!(
            "L(0) already exceeds the target by {f0}; the bump family cannot bracket a root, try a different profile"
        )));
    };
    // f(lo) < 0 < f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-6 * hi.abs().max(1e-300) {
            break;
        }
    }
    let s = polish(0.5 * (lo + hi), &f, &df, tol)?;
    Ok(ScalarField::from(&*phi * s))
}

/// Newton on a scalar root with a residual acceptance test.
fn polish(mut s: f64, f: &dyn Fn(f64) -> Result<f64>, df: &dyn Fn(f64) -> Result<f64>, tol: f64) -> Result<f64> {
    let mut best = (f(s)?.abs(), s);
    for _ in 0..60 {
        let r = f(s)?;
        if r.abs() < best.0 {
            best = (r.abs(), s);
        }
        if r.abs() <= tol {
            return Ok(s);
        }
        let d = df(s)?;
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = s - r / d;
        if next == s {
            break;
        }
        s = next;
    }
    if best.0 <= tol {
        Ok(best.1)
    } else {
        Err(Error::Seed(format!("Newton polish stalled with residual {:e}", best.0)))
    }
}

/// Diagnostics for the smallness hypothesis `e^{γ‖u0‖²} sup K <= ε0`.
///
/// `ε0` is not computable, so nothing here is pass/fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallnessReport {
    pub sup_k_plus: f64,
    pub h_norm_sq: f64,
    pub gamma: f64,
    pub product: f64,
    /// `K <= 0` everywhere, where the hypothesis holds for every `u0`.
    pub auto_satisfied: bool,
}

pub const DEFAULT_SMALLNESS_GAMMA: f64 = 2.0;

pub fn smallness_report(u0: &ScalarField, k: &Prescription, ops: &OperatorPair, gamma: f64) -> SmallnessReport {
    let h_norm_sq = h_inner(u0, u0, ops);
    SmallnessReport {
        sup_k_plus: k.sup_k().max(0.0),
        h_norm_sq,
        gamma,
        product: (gamma * h_norm_sq).exp() * k.sup_k(),
        auto_satisfied: k.sup_k() <= 0.0,
    }
}

/// Quantities entering the weak Trudinger–Moser inequality
/// `∫e^{2u} <= C exp(β ∫|∇u|² + 2/Vol ∫u)`; reported only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrudingerMoserQuantities {
    pub log_exp_integral: f64,
    pub dirichlet: f64,
    pub mean_term: f64,
    /// `(log ∫e^{2u} - 2/Vol ∫u) / ∫|∇u|²`: the smallest `β` that works with `C = 1`.
    pub beta_with_unit_constant: f64,
}

pub fn trudinger_moser_quantities(
    u: &ScalarField,
    ops: &OperatorPair,
    metric: &BackgroundMetric,
) -> Result<TrudingerMoserQuantities> {
    let e = exp2u(u)?;
    let log_exp_integral = integrate(&e, metric).ln();
    let dirichlet = ops.dirichlet(u);
    let mean_term = 2.0 / metric.total_volume * integrate(u, metric);
    Ok(TrudingerMoserQuantities {
        log_exp_integral,
        dirichlet,
        mean_term,
        beta_with_unit_constant: if dirichlet > 0.0 {
            (log_exp_integral - mean_term) / dirichlet
        } else {
            f64::NAN
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{cone_sphere, flat_torus};
    use crate::geometry::metric_quantities;
    use crate::operators::assemble;

    fn torus(n: usize) -> (ConicalMesh, BackgroundMetric, OperatorPair) {
        let mesh = flat_torus(n).unwrap();
        let metric = metric_quantities(&mesh).unwrap();
        let ops = assemble(&mesh, &metric).unwrap();
        (mesh, metric, ops)
    }

    #[test]
    fn preset_parsing() {
        assert_eq!(
            PrescriptionSource::parse("constant:-1").unwrap(),
            PrescriptionSource::Constant(-1.0)
        );
        assert_eq!(
            PrescriptionSource::parse("harmonic1").unwrap(),
            PrescriptionSource::Harmonic1 { offset: 0.5 }
        );
        assert_eq!(
            PrescriptionSource::parse("affine_x:-1,-0.5").unwrap(),
            PrescriptionSource::AffineX { a: -1.0, b: -0.5 }
        );
        assert!(PrescriptionSource::parse("constant").is_err());
        assert!(PrescriptionSource::parse("gaussian:1").is_err());
    }

    #[test]
    fn zero_curvature_is_rejected() {
        let (_, metric, _) = torus(4);
        assert!(Prescription::new(ScalarField::zeros(16), &metric).is_err());
    }

    #[test]
    fn j_and_l_on_constants() {
        let (_, metric, ops) = torus(6);
        let n = 36;
        assert_eq!(functional_j(&ScalarField::zeros(n), &ops, &metric), 0.0);
        let k = Prescription::new(ScalarField::constant(n, 3.0), &metric).unwrap();
        let l0 = functional_l(&ScalarField::zeros(n), &k, &metric).unwrap();
        assert!((l0 - 1.5).abs() < 1e-14);
        let lc = functional_l(&ScalarField::constant(n, 0.3), &k, &metric).unwrap();
        assert!((lc - 0.6f64.exp() * 1.5).abs() < 1e-13);
    }

    #[test]
    fn l_overflow_reports_max_u() {
        let (_, metric, _) = torus(4);
        let k = Prescription::new(ScalarField::constant(16, 1.0), &metric).unwrap();
        let mut u = ScalarField::zeros(16);
        u[3] = 400.0;
        match functional_l(&u, &k, &metric) {
            Err(Error::Range { max_u }) => assert_eq!(max_u, 400.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grad_j_of_constant_is_kappa() {
        let mesh = cone_sphere(1, &[-0.9, -0.9, -0.9]).unwrap();
        let metric = metric_quantities(&mesh).unwrap();
        let ops = assemble(&mesh, &metric).unwrap();
        let g = grad_j(&ScalarField::constant(mesh.vertex_count(), 0.7), &ops, 1e-12).unwrap();
        for v in g.iter() {
            assert!((v - metric.kappa).abs() < 1e-11, "{v} vs {}", metric.kappa);
        }
    }

    #[test]
    fn compatibility_cases() {
        let (_, metric, _) = torus(4);
        let one = Prescription::new(ScalarField::constant(16, 1.0), &metric).unwrap();
        assert!(!compatibility_check(&one, &metric).passed());
        let mut sign_changing = ScalarField::constant(16, -1.0);
        sign_changing[0] = 2.0;
        let k = Prescription::new(sign_changing, &metric).unwrap();
        assert!(compatibility_check(&k, &metric).passed());
        let neg = Prescription::new(ScalarField::constant(16, -1.0), &metric).unwrap();
        // null case needs sup K > 0
        assert!(!compatibility_check(&neg, &metric).passed());

        let mesh = cone_sphere(1, &[-0.9, -0.9, -0.9]).unwrap();
        let m = metric_quantities(&mesh).unwrap();
        let n = mesh.vertex_count();
        let neg = Prescription::new(ScalarField::constant(n, -1.0), &m).unwrap();
        assert_eq!(compatibility_check(&neg, &m), Compatibility::Pass);
    }

    #[test]
    fn smallness_arithmetic() {
        let (_, metric, ops) = torus(4);
        let mut k = ScalarField::constant(16, -1.0);
        k[5] = 0.1;
        let k = Prescription::new(k, &metric).unwrap();
        let r = smallness_report(&ScalarField::zeros(16), &k, &ops, 2.0);
        assert_eq!(r.product, 0.1);
        assert!(!r.auto_satisfied);
        let neg = Prescription::new(ScalarField::constant(16, -1.0), &metric).unwrap();
        let r = smallness_report(&ScalarField::constant(16, 0.4), &neg, &ops, 2.0);
        assert!(r.auto_satisfied && r.product <= 0.0);
    }

    #[test]
    fn constant_seed_closed_form() {
        let mesh = cone_sphere(2, &[-0.9, -0.9, -0.9]).unwrap();
        let metric = metric_quantities(&mesh).unwrap();
        let n = mesh.vertex_count();
        let k = Prescription::new(ScalarField::constant(n, -1.0), &metric).unwrap();
        let spec = ConstraintSpec::for_metric(&metric);
        let u0 = seed_on_constraint(&k, &mesh, &metric, &spec, SeedProfile::Auto).unwrap();
        let expect = 0.5 * (2.0 * spec.target / k.integral_k()).ln();
        assert!((u0[0] - expect).abs() < 1e-14);
        let r = constraint_residual(&u0, &k, &metric, &spec).unwrap();
        assert!(r.abs() <= 1e-12 * (1.0 + spec.target.abs()));
    }

    #[test]
    fn bump_seed_on_torus() {
        let (mesh, metric, _) = torus(16);
        let k = PrescriptionSource::Harmonic1 { offset: 0.5 }.evaluate(&mesh).unwrap();
        let k = Prescription::new(k, &metric).unwrap();
        let spec = ConstraintSpec::for_metric(&metric);
        assert_eq!(spec.target, 0.0);
        assert!(functional_l(&ScalarField::zeros(256), &k, &metric).unwrap() < 0.0);
        let u0 = seed_on_constraint(&k, &mesh, &metric, &spec, SeedProfile::Auto).unwrap();
        let r = constraint_residual(&u0, &k, &metric, &spec).unwrap();
        assert!(r.abs() <= 1e-12, "{r}");
        assert!(seed_on_constraint(&k, &mesh, &metric, &spec, SeedProfile::Constant).is_err());
    }

    #[test]
    fn dijkstra_on_torus() {
        let (mesh, _, _) = torus(8);
        let d = edge_path_distances(&mesh, 0);
        assert_eq!(d[0], 0.0);
        assert!((d[1] - 0.125).abs() < 1e-15);
        // one diagonal step
        assert!((d[9] - 0.125 * 2f64.sqrt()).abs() < 1e-15);
    }
}
