//! Built-in desk-scale meshes, one per sign of the singular Euler characteristic.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{ConePoint, ConicalMesh};

/// A named mesh generator with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshGenerator {
    /// `n x n` grid on the unit flat torus.
    FlatTorus { n: usize },
    /// Two unit squares glued along their boundary; four cones of order -1/2.
    Pillowcase { n: usize },
    /// Octahedron refined `levels` times and projected to the unit sphere,
    /// with cones at the first `betas.len()` octahedron vertices.
    ConeSphere { levels: usize, betas: Vec<f64> },
}

impl MeshGenerator {
    /// Parses `name` and a parameter string such as `16` or `3:-0.9,-0.9,-0.9`.
    pub fn parse(name: &str, params: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("{name}({params}): {msg}"));
        let mut parts = params.splitn(2, ':');
        let n: usize = parts
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| bad("expected an integer size"))?;
        match name {
            "flat_torus" => Ok(Self::FlatTorus { n }),
            "pillowcase" => Ok(Self::Pillowcase { n }),
            "cone_sphere" => {
                let betas = match parts.next() {
                    None => Vec::new(),
                    Some(list) if list.trim().is_empty() => Vec::new(),
                    Some(list) => list
                        .split(',')
                        .map(|b| b.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("cone orders must be reals"))?,
                };
                Ok(Self::ConeSphere { levels: n, betas })
            }
            _ => Err(Error::Config(format!("unknown mesh generator '{name}'"))),
        }
    }

    /// Parses `name:params`, e.g. `cone_sphere:3:-0.9,-0.9,-0.9`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let (name, params) = spec
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("mesh generator '{spec}' lacks parameters")))?;
        Self::parse(name.trim(), params)
    }

    /// Checks parameter ranges without building the mesh.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::FlatTorus { n } => check_torus(*n),
            Self::Pillowcase { n } => check_pillowcase(*n),
            Self::ConeSphere { levels, betas } => check_cone_sphere(*levels, betas),
        }
    }

    pub fn generate(&self) -> Result<ConicalMesh> {
        match self {
            Self::FlatTorus { n } => flat_torus(*n),
            Self::Pillowcase { n } => pillowcase(*n),
            Self::ConeSphere { levels, betas } => cone_sphere(*levels, betas),
        }
    }
}

fn check_torus(n: usize) -> Result<()> {
    if !(3..=1024).contains(&n) {
        return Err(Error::Config(format!("flat_torus size {n} outside 3..=1024")));
    }
    Ok(())
}

fn check_pillowcase(n: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) || n > 512 {
        return Err(Error::Config(format!(
            "pillowcase size {n} must be even and in 2..=512"
        )));
    }
    Ok(())
}

fn check_cone_sphere(levels: usize, betas: &[f64]) -> Result<()> {
    if levels > 7 {
        return Err(Error::Config(format!("cone_sphere level {levels} exceeds 7")));
    }
    if betas.len() > 6 {
        return Err(Error::Config(format!(
            "cone_sphere supports at most 6 cones, got {}",
            betas.len()
        )));
    }
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > -1.0)) {
        return Err(Error::Config(format!("cone order {b} must exceed -1")));
    }
    Ok(())
}

/// Unit flat torus, `n x n` vertices, every square split along the same diagonal.
pub fn flat_torus(n: usize) -> Result<ConicalMesh> {
    check_torus(n)?;
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| (j % n) * n + (i % n);
    let mut faces = Vec::with_capacity(2 * n * n);
    let mut lengths = HashMap::new();
    let mut put = |a: usize, b: usize, l: f64| {
        lengths.insert((a.min(b), a.max(b)), l);
    };
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
            put(v00, v10, h);
            put(v00, v01, h);
            put(v00, v11, h * 2f64.sqrt());
        }
    }
    let lengths: Vec<_> = lengths.into_iter().map(|((a, b), l)| (a, b, l)).collect();
    let coords = (0..n * n)
        .map(|v| [(v % n) as f64 * h, (v / n) as f64 * h, 0.0])
        .collect();
    ConicalMesh::from_edge_lengths(n * n, faces, &lengths, vec![])?.with_auxiliary_coordinates(coords)
}

/// Doubled unit square with checkerboard diagonals; `n` must be even.
///
/// Corner cells are split through the corner so that no edge joins two
/// boundary vertices except along the boundary itself.
pub fn pillowcase(n: usize) -> Result<ConicalMesh> {
    check_pillowcase(n)?;
    let h = 1.0 / n as f64;
    let front = |i: usize, j: usize| j * (n + 1) + i;
    let front_count = (n + 1) * (n + 1);
    let on_boundary = |i: usize, j: usize| i == 0 || j == 0 || i == n || j == n;
    // back copy: boundary vertices are shared with the front
    let mut back = vec![usize::MAX; front_count];
    let mut coords: Vec<[f64; 3]> = (0..front_count)
        .map(|v| [(v % (n + 1)) as f64 * h, (v / (n + 1)) as f64 * h, 0.0])
        .collect();
    for j in 0..=n {
        for i in 0..=n {
            back[front(i, j)] = if on_boundary(i, j) {
                front(i, j)
            } else {
                coords.push([i as f64 * h, j as f64 * h, 0.0]);
                coords.len() - 1
            };
        }
    }
    let mut faces = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (front(i, j), front(i + 1, j), front(i, j + 1), front(i + 1, j + 1));
            let tris = if (i + j) % 2 == 0 {
                [[v00, v10, v11], [v00, v11, v01]]
            } else {
                [[v00, v10, v01], [v10, v11, v01]]
            };
            for t in tris {
                faces.push(t);
                faces.push([back[t[0]], back[t[2]], back[t[1]]]);
            }
        }
    }
    let corners = [front(0, 0), front(n, 0), front(0, n), front(n, n)];
    let divisor = corners.iter().map(|&vertex| ConePoint { vertex, beta: -0.5 }).collect();
    ConicalMesh::from_coordinates(coords, faces, divisor)
}

/// Octahedron refined by midpoint subdivision and projected to the unit
/// sphere. The raw chord metric is not of constant curvature once cones are
/// attached; it must be uniformized before running a flow.
pub fn cone_sphere(levels: usize, betas: &[f64]) -> Result<ConicalMesh> {
    check_cone_sphere(levels, betas)?;
    let mut verts: Vec<[f64; 3]> = vec![
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
    ];
    let mut faces = Vec::new();
    for &x in &[0usize, 3] {
        for &y in &[1usize, 4] {
            for &z in &[2usize, 5] {
                let f = [x, y, z];
                let (a, b, c) = (verts[x], verts[y], verts[z]);
                let n = cross(sub(b, a), sub(c, a));
                let centroid = [a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]];
                faces.push(if dot(n, centroid) > 0.0 { f } else { [x, z, y] });
            }
        }
    }
    for _ in 0..levels {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalize([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let divisor = betas
        .iter()
        .enumerate()
        .map(|(vertex, &beta)| ConePoint { vertex, beta })
        .collect();
    ConicalMesh::from_coordinates(verts, faces, divisor)
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let r = dot(a, a).sqrt();
    [a[0] / r, a[1] / r, a[2] / r]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euler_characteristic, gauss_bonnet_check, metric_quantities, singular_euler};
    use std::f64::consts::PI;

    #[test]
    fn flat_torus_counts() {
        let mesh = flat_torus(16).unwrap();
        assert_eq!(mesh.vertex_count(), 256);
        assert_eq!(euler_characteristic(&mesh), 0);
        assert_eq!(singular_euler(&mesh), 0.0);
        let metric = metric_quantities(&mesh).unwrap();
        assert!((metric.total_volume - 1.0).abs() < 1e-12);
        let gb = gauss_bonnet_check(&metric);
        assert!(gb.topological < 1e-10 && gb.singular < 1e-10, "{gb:?}");
    }

    #[test]
    fn torus_refinement_keeps_euler() {
        for n in [3, 4, 7, 8, 16] {
            assert_eq!(euler_characteristic(&flat_torus(n).unwrap()), 0);
        }
    }

    #[test]
    fn pillowcase_cones_have_defect_pi() {
        let mesh = pillowcase(8).unwrap();
        assert_eq!(mesh.vertex_count(), 2 * 64 + 2);
        assert_eq!(euler_characteristic(&mesh), 2);
        assert_eq!(singular_euler(&mesh), 0.0);
        let metric = metric_quantities(&mesh).unwrap();
        assert!(metric.kappa.abs() < 1e-15);
        assert!((metric.total_volume - 2.0).abs() < 1e-12);
        for c in mesh.divisor() {
            assert!((metric.angle_defects[c.vertex] - PI).abs() < 1e-12);
        }
        for (v, d) in metric.angle_defects.iter().enumerate() {
            if !mesh.divisor().iter().any(|c| c.vertex == v) {
                assert!(d.abs() < 1e-12, "vertex {v} defect {d}");
            }
        }
        let gb = gauss_bonnet_check(&metric);
        assert!(gb.topological < 1e-10 && gb.singular < 1e-10, "{gb:?}");
    }

    #[test]
    fn pillowcase_rejects_odd_sizes() {
        assert!(pillowcase(3).is_err());
        assert!(pillowcase(0).is_err());
    }

    #[test]
    fn cone_sphere_counts() {
        let mesh = cone_sphere(3, &[-0.9, -0.9, -0.9]).unwrap();
        assert_eq!(mesh.vertex_count(), 258);
        assert_eq!(euler_characteristic(&mesh), 2);
        assert!((singular_euler(&mesh) + 0.7).abs() < 1e-14);
    }

    #[test]
    fn parse_generators() {
        assert_eq!(
            MeshGenerator::parse_spec("cone_sphere:3:-0.9,-0.9,-0.9").unwrap(),
            MeshGenerator::ConeSphere {
                levels: 3,
                betas: vec![-0.9, -0.9, -0.9]
            }
        );
        assert_eq!(
            MeshGenerator::parse("flat_torus", "16").unwrap(),
            MeshGenerator::FlatTorus { n: 16 }
        );
        assert!(MeshGenerator::parse("klein_bottle", "4").is_err());
        assert!(MeshGenerator::parse("flat_torus", "x").is_err());
    }
}
