//! Run configuration: flat `key=value` text with dotted section prefixes.
//!
//! ```text
//! # comment
//! mesh = flat_torus:32            # or a path to a mesh file
//! prescription = harmonic1:0.5
//! uniformize = auto               # auto | always | never
//! seed.profile = auto             # auto | constant | bump
//! seed.radius = 0.25
//! flow.grad_tol = 1e-8
//! solver = cholesky               # cholesky | cg | dense
//! output_dir = out
//! report_interval = 0.5
//! smallness.gamma = 2
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::functionals::{PrescriptionSource, DEFAULT_SMALLNESS_GAMMA};
use crate::generators::MeshGenerator;
use crate::operators::SolverKind;

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Generator(MeshGenerator),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniformizeMode {
    /// Only when the raw metric is not of constant curvature.
    Auto,
    Always,
    Never,
}

/// Seed family as written in the config; the bump radius may be left to
/// the default `0.25 √Vol`, which needs the metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeedChoice {
    Auto,
    Constant,
    Bump { radius: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub prescription: PrescriptionSource,
    pub uniformize: UniformizeMode,
    pub uniformize_tol: f64,
    pub seed: SeedChoice,
    pub flow: FlowConfig,
    pub solver: SolverKind,
    pub output_dir: PathBuf,
    /// Flow-time spacing of time-series rows.
    pub report_interval: f64,
    pub smallness_gamma: f64,
    /// Hex SHA-256 of [`RunConfig::canonical`].
    pub hash: String,
}

const KEYS: &[&str] = &[
    "mesh",
    "prescription",
    "uniformize",
    "uniformize.tol",
    "seed.profile",
    "seed.radius",
    "flow.dt_initial",
    "flow.dt_min",
    "flow.dt_max",
    "flow.grad_tol",
    "flow.t_max",
    "flow.constraint_tol",
    "flow.energy_tol",
    "flow.solver_tol",
    "flow.max_steps",
    "solver",
    "output_dir",
    "report_interval",
    "smallness.gamma",
];

fn parse_pairs(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, found '{line}'")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key '{key}'")));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(err(format!("key '{key}' given twice")));
        }
    }
    Ok(map)
}

fn real(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("{key}: '{v}' is not a real number"))),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Parses and validates config text; relative paths resolve against `base`.
    pub fn parse(text: &str, path: &Path, base: &Path) -> Result<Self> {
        let map = parse_pairs(text, path)?;
        let required = |key: &str| {
            map.get(key)
                .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
        };

        let mesh_value = required("mesh")?;
        let mesh = match mesh_value.split_once(':') {
            Some((name, _)) if ["flat_torus", "pillowcase", "cone_sphere"].contains(&name.trim()) => {
                let g = MeshGenerator::parse_spec(mesh_value)?;
                g.validate()?;
                MeshSource::Generator(g)
            }
            _ => MeshSource::File(resolve(base, Path::new(mesh_value))),
        };

        let prescription = match PrescriptionSource::parse(required("prescription")?)? {
            PrescriptionSource::File(p) => PrescriptionSource::File(resolve(base, &p)),
            p => p,
        };

        let uniformize = match map.get("uniformize").map(String::as_str) {
            None | Some("auto") => UniformizeMode::Auto,
            Some("always") => UniformizeMode::Always,
            Some("never") => UniformizeMode::Never,
            Some(other) => {
                return Err(Error::Config(format!(
                    "uniformize: '{other}' is not auto, always or never"
                )))
            }
        };
        let uniformize_tol = real(&map, "uniformize.tol", 1e-10)?;

        let radius = map
            .get("seed.radius")
            .map(|_| real(&map, "seed.radius", 0.0))
            .transpose()?;
        let seed = match map.get("seed.profile").map(String::as_str) {
            None | Some("auto") => SeedChoice::Auto,
            Some("constant") => SeedChoice::Constant,
            Some("bump") => SeedChoice::Bump { radius },
            Some(other) => {
                return Err(Error::Config(format!(
                    "seed.profile: '{other}' is not auto, constant or bump"
                )))
            }
        };
        if radius.is_some() && !matches!(seed, SeedChoice::Bump { .. }) {
            return Err(Error::Config("seed.radius needs seed.profile = bump".into()));
        }
        if let Some(r) = radius {
            if !(r > 0.0) {
                return Err(Error::Config(format!("seed.radius must be positive, got {r}")));
            }
        }

        let d = FlowConfig::default();
        let max_steps = match map.get("flow.max_steps") {
            None => d.max_steps,
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("flow.max_steps: '{v}' is not a count")))?,
        };
        let flow = FlowConfig {
            dt_initial: real(&map, "flow.dt_initial", d.dt_initial)?,
            dt_min: real(&map, "flow.dt_min", d.dt_min)?,
            dt_max: real(&map, "flow.dt_max", d.dt_max)?,
            grad_tol: real(&map, "flow.grad_tol", d.grad_tol)?,
            t_max: real(&map, "flow.t_max", d.t_max)?,
            constraint_tol: real(&map, "flow.constraint_tol", d.constraint_tol)?,
            energy_tol: real(&map, "flow.energy_tol", d.energy_tol)?,
            solver_tol: real(&map, "flow.solver_tol", d.solver_tol)?,
            max_steps,
        };
        flow.validate()?;

        let solver = match map.get("solver") {
            None => SolverKind::default(),
            Some(v) => v.parse()?,
        };
        let output_dir = resolve(base, Path::new(map.get("output_dir").map_or("out", String::as_str)));
        let report_interval = real(&map, "report_interval", 0.1)?;
        let smallness_gamma = real(&map, "smallness.gamma", DEFAULT_SMALLNESS_GAMMA)?;
        for (key, v) in [
            ("uniformize.tol", uniformize_tol),
            ("report_interval", report_interval),
            ("smallness.gamma", smallness_gamma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }

        let mut cfg = Self {
            mesh,
            prescription,
            uniformize,
            uniformize_tol,
            seed,
            flow,
            solver,
            output_dir,
            report_interval,
            smallness_gamma,
            hash: String::new(),
        };
        cfg.hash = hex(&Sha256::digest(cfg.canonical().as_bytes()));
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, path, base)
    }

    /// Every setting that affects the computation, defaults included, one
    /// `key = value` per line in key order. `output_dir` is left out.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mesh = match &self.mesh {
            MeshSource::Generator(g) => format!("{g:?}"),
            MeshSource::File(p) => p.display().to_string(),
        };
        let seed = match self.seed {
            SeedChoice::Auto => "auto".to_string(),
            SeedChoice::Constant => "constant".to_string(),
            SeedChoice::Bump { radius: None } => "bump".to_string(),
            SeedChoice::Bump { radius: Some(r) } => format!("bump radius={r:.16e}"),
        };
        let f = &self.flow;
        let rows: [(&str, String); 16] = [
            ("flow.constraint_tol", format!("{:.16e}", f.constraint_tol)),
            ("flow.dt_initial", format!("{:.16e}", f.dt_initial)),
            ("flow.dt_max", format!("{:.16e}", f.dt_max)),
            ("flow.dt_min", format!("{:.16e}", f.dt_min)),
            ("flow.energy_tol", format!("{:.16e}", f.energy_tol)),
            ("flow.grad_tol", format!("{:.16e}", f.grad_tol)),
            ("flow.max_steps", f.max_steps.to_string()),
            ("flow.solver_tol", format!("{:.16e}", f.solver_tol)),
            ("flow.t_max", format!("{:.16e}", f.t_max)),
            ("mesh", mesh),
            ("prescription", format!("{:?}", self.prescription)),
            ("report_interval", format!("{:.16e}", self.report_interval)),
            ("seed", seed),
            ("smallness.gamma", format!("{:.16e}", self.smallness_gamma)),
            ("solver", self.solver.to_string()),
            (
                "uniformize",
                format!("{:?} tol={:.16e}", self.uniformize, self.uniformize_tol),
            ),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("test.cfg"), Path::new("/base"))
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = parse("mesh = flat_torus:16\nprescription = harmonic1\nflow.grad_tol=1e-9 # tight\n").unwrap();
        assert_eq!(cfg.mesh, MeshSource::Generator(MeshGenerator::FlatTorus { n: 16 }));
        assert_eq!(cfg.flow.grad_tol, 1e-9);
        assert_eq!(cfg.flow.dt_initial, FlowConfig::default().dt_initial);
        assert_eq!(cfg.output_dir, Path::new("/base/out"));
        assert_eq!(cfg.uniformize, UniformizeMode::Auto);
        assert_eq!(cfg.hash.len(), 64);
    }

    #[test]
    fn paths_resolve_against_the_config_directory() {
        let cfg = parse("mesh = meshes/a.mesh\nprescription = file:k.csv\noutput_dir=/abs\n").unwrap();
        assert_eq!(cfg.mesh, MeshSource::File(PathBuf::from("/base/meshes/a.mesh")));
        assert_eq!(cfg.prescription, PrescriptionSource::File(PathBuf::from("/base/k.csv")));
        assert_eq!(cfg.output_dir, Path::new("/abs"));
    }

    #[test]
    fn hash_tracks_settings_not_layout() {
        let a = parse("mesh=flat_torus:8\nprescription=harmonic1\n").unwrap();
        let b = parse("# same\nprescription = harmonic1\n\nmesh = flat_torus:8\n").unwrap();
        let c = parse("mesh=flat_torus:8\nprescription=harmonic1\nflow.t_max=5\n").unwrap();
        let d = parse("mesh=flat_torus:8\nprescription=harmonic1\noutput_dir=elsewhere\n").unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.hash, d.hash);
        assert_ne!(a.hash, c.hash);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = "mesh=flat_torus:8\nprescription=harmonic1\n";
        for extra in [
            "flow.dt_min=1\nflow.dt_initial=0.1\n",
            "flow.grad_tol=-1\n",
            "solver=gauss\n",
            "frobnicate=1\n",
            "uniformize=sometimes\n",
            "seed.radius=0.1\n",
            "seed.profile=bump\nseed.radius=0\n",
            "report_interval=0\n",
            "mesh=flat_torus:8\n",
        ] {
            assert!(parse(&format!("{base}{extra}")).is_err(), "{extra}");
        }
        assert!(parse("prescription=harmonic1\n").is_err());
        assert!(parse("mesh=flat_torus:2\nprescription=harmonic1\n").is_err());
        assert!(parse("mesh=pillowcase:7\nprescription=harmonic1\n").is_err());
        assert!(parse("mesh=cone_sphere:3:-1.5\nprescription=harmonic1\n").is_err());
    }

    #[test]
    fn step_bounds_are_a_config_error() {
        match parse("mesh=flat_torus:8\nprescription=harmonic1\nflow.dt_min=1e-2\nflow.dt_initial=1e-3\n") {
            Err(Error::Config(msg)) => assert!(msg.contains("dt_min"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
