//! Intrinsic triangulated surfaces with conical singularities.
//!
//! A [`ConicalMesh`] stores combinatorics, one length per edge and a divisor
//! of cone points. Metric quantities (corner angles, lumped vertex areas,
//! angle defects, the constant background curvature) are derived from the
//! lengths alone, so the embedding coordinates that some generators attach
//! are only used to evaluate prescribed curvature presets.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A cone point of order `beta` (total angle `2π(1 + beta)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePoint {
    pub vertex: usize,
    pub beta: f64,
}

/// Closed oriented triangulated surface with intrinsic edge lengths.
#[derive(Debug, Clone)]
pub struct ConicalMesh {
    vertex_count: usize,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_index: HashMap<(usize, usize), usize>,
    /// `face_edges[f][k]` is the edge opposite corner `k` of face `f`.
    face_edges: Vec<[usize; 3]>,
    edge_lengths: Vec<f64>,
    divisor: Vec<ConePoint>,
    coords: Option<Vec<[f64; 3]>>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

struct Combinatorics {
    edges: Vec<[usize; 2]>,
    edge_index: HashMap<(usize, usize), usize>,
    face_edges: Vec<[usize; 3]>,
}

fn build_combinatorics(vertex_count: usize, faces: &[[usize; 3]]) -> Result<Combinatorics> {
    if faces.is_empty() {
        return Err(Error::Structural("no faces".into()));
    }
    let mut edges = Vec::new();
    let mut edge_index = HashMap::new();
    // directed half-edge -> face
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    let mut face_edges = Vec::with_capacity(faces.len());
    let mut used = vec![false; vertex_count];

    for (f, face) in faces.iter().enumerate() {
        for &v in face {
            if v >= vertex_count {
                return Err(Error::Structural(format!(
                    "face {f} references vertex {v} (only {vertex_count} vertices)"
                )));
            }
            used[v] = true;
        }
        if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
            return Err(Error::Structural(format!("face {f} has a repeated vertex")));
        }
        let mut fe = [0usize; 3];
        for k in 0..3 {
            let a = face[(k + 1) % 3];
            let b = face[(k + 2) % 3];
            if let Some(other) = directed.insert((a, b), f) {
                return Err(Error::Structural(format!(
                    "directed edge ({a},{b}) used by faces {other} and {f}: inconsistent orientation or non-manifold edge"
                )));
            }
            let key = edge_key(a, b);
            let e = *edge_index.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edges.len() - 1
            });
            fe[k] = e;
        }
        face_edges.push(fe);
    }
    for &(a, b) in directed.keys() {
        if !directed.contains_key(&(b, a)) {
            return Err(Error::Structural(format!(
                "edge ({a},{b}) borders only one face: surface is not closed"
            )));
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(Error::Structural(format!("vertex {v} belongs to no face")));
    }

    // connectivity
    let mut adj = vec![Vec::new(); vertex_count];
    for e in &edges {
        adj[e[0]].push(e[1]);
        adj[e[1]].push(e[0]);
    }
    let mut seen = vec![false; vertex_count];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    if reached != vertex_count {
        return Err(Error::Structural(format!(
            "surface is disconnected ({reached} of {vertex_count} vertices reachable)"
        )));
    }

    Ok(Combinatorics {
        edges,
        edge_index,
        face_edges,
    })
}

impl ConicalMesh {
    /// Builds a mesh from faces and an explicit length for every edge.
    ///
    /// `lengths` may list edges in either orientation; every edge of the
    /// face complex must appear exactly once.
    pub fn from_edge_lengths(
        vertex_count: usize,
        faces: Vec<[usize; 3]>,
        lengths: &[(usize, usize, f64)],
        divisor: Vec<ConePoint>,
    ) -> Result<Self> {
        let comb = build_combinatorics(vertex_count, &faces)?;
        let mut edge_lengths = vec![f64::NAN; comb.edges.len()];
        for &(a, b, len) in lengths {
            let e = *comb
                .edge_index
                .get(&edge_key(a, b))
                .ok_or_else(|| Error::Structural(format!("length given for ({a},{b}), which is not an edge")))?;
            if !edge_lengths[e].is_nan() {
                return Err(Error::Structural(format!("edge ({a},{b}) has two lengths")));
            }
            edge_lengths[e] = len;
        }
        if let Some(e) = edge_lengths.iter().position(|l| l.is_nan()) {
            let [a, b] = comb.edges[e];
            return Err(Error::Structural(format!("edge ({a},{b}) has no length")));
        }
        Self::assemble(vertex_count, faces, comb, edge_lengths, divisor, None)
    }

    /// Builds a mesh whose lengths are the chord lengths of embedded vertices.
    pub fn from_coordinates(coords: Vec<[f64; 3]>, faces: Vec<[usize; 3]>, divisor: Vec<ConePoint>) -> Result<Self> {
        let comb = build_combinatorics(coords.len(), &faces)?;
        let edge_lengths = comb
            .edges
            .iter()
            .map(|&[a, b]| distance(&coords[a], &coords[b]))
            .collect();
        Self::assemble(coords.len(), faces, comb, edge_lengths, divisor, Some(coords))
    }

    fn assemble(
        vertex_count: usize,
        faces: Vec<[usize; 3]>,
        comb: Combinatorics,
        edge_lengths: Vec<f64>,
        divisor: Vec<ConePoint>,
        coords: Option<Vec<[f64; 3]>>,
    ) -> Result<Self> {
        let mesh = Self {
            vertex_count,
            faces,
            edges: comb.edges,
            edge_index: comb.edge_index,
            face_edges: comb.face_edges,
            edge_lengths,
            divisor: Vec::new(),
            coords,
        };
        mesh.check_lengths()?;
        mesh.with_divisor(divisor)
    }

    fn check_lengths(&self) -> Result<()> {
        for (e, &len) in self.edge_lengths.iter().enumerate() {
            if !(len.is_finite() && len > 0.0) {
                let [a, b] = self.edges[e];
                return Err(Error::Structural(format!(
                    "edge ({a},{b}) has non-positive length {len}"
                )));
            }
        }
        for f in 0..self.faces.len() {
            let [a, b, c] = self.face_lengths(f);
            if a >= b + c || b >= a + c || c >= a + b {
                return Err(Error::Geometry {
                    face: f,
                    reason: format!("triangle inequality violated by lengths ({a}, {b}, {c})"),
                });
            }
        }
        Ok(())
    }

    /// Replaces the divisor, validating orders and vertex indices.
    pub fn with_divisor(mut self, divisor: Vec<ConePoint>) -> Result<Self> {
        let mut seen = vec![false; self.vertex_count];
        for cone in &divisor {
            if cone.vertex >= self.vertex_count {
                return Err(Error::Divisor(format!("cone vertex {} out of range", cone.vertex)));
            }
            if seen[cone.vertex] {
                return Err(Error::Divisor(format!("vertex {} listed twice", cone.vertex)));
            }
            seen[cone.vertex] = true;
            if !(cone.beta.is_finite() && cone.beta > -1.0) {
                return Err(Error::Divisor(format!(
                    "cone order {} at vertex {} must exceed -1",
                    cone.beta, cone.vertex
                )));
            }
        }
        self.divisor = divisor;
        Ok(self)
    }

    /// Drops the embedding coordinates (lengths are kept).
    pub fn without_coordinates(mut self) -> Self {
        self.coords = None;
        self
    }

    /// Attaches auxiliary coordinates used only for evaluating presets.
    pub fn with_auxiliary_coordinates(mut self, coords: Vec<[f64; 3]>) -> Result<Self> {
        if coords.len() != self.vertex_count {
            return Err(Error::Structural(format!(
                "{} coordinates for {} vertices",
                coords.len(),
                self.vertex_count
            )));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    /// Conformal vertex scaling: `l'_ij = exp((v_i + v_j) / 2) * l_ij`.
    pub fn with_scaled_lengths(&self, v: &[f64]) -> Result<Self> {
        assert_eq!(v.len(), self.vertex_count);
        let mut out = self.clone();
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            out.edge_lengths[e] = self.edge_lengths[e] * (0.5 * (v[a] + v[b])).exp();
        }
        out.check_lengths()?;
        Ok(out)
    }

    /// Same surface with vertex `i` renamed to `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        assert_eq!(perm.len(), self.vertex_count);
        let faces = self
            .faces
            .iter()
            .map(|f| [perm[f[0]], perm[f[1]], perm[f[2]]])
            .collect();
        let lengths: Vec<_> = self
            .edges
            .iter()
            .zip(&self.edge_lengths)
            .map(|(&[a, b], &l)| (perm[a], perm[b], l))
            .collect();
        let divisor = self
            .divisor
            .iter()
            .map(|c| ConePoint {
                vertex: perm[c.vertex],
                beta: c.beta,
            })
            .collect();
        let mut out = Self::from_edge_lengths(self.vertex_count, faces, &lengths, divisor)?;
        if let Some(coords) = &self.coords {
            let mut moved = vec![[0.0; 3]; coords.len()];
            for (i, c) in coords.iter().enumerate() {
                moved[perm[i]] = *c;
            }
            out.coords = Some(moved);
        }
        Ok(out)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn divisor(&self) -> &[ConePoint] {
        &self.divisor
    }

    pub fn coordinates(&self) -> Option<&[[f64; 3]]> {
        self.coords.as_deref()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&edge_key(a, b)).copied()
    }

    /// Edge indices opposite each corner of face `f`.
    pub fn face_edges(&self, f: usize) -> [usize; 3] {
        self.face_edges[f]
    }

    /// Lengths opposite corners 0, 1, 2 of face `f`.
    pub fn face_lengths(&self, f: usize) -> [f64; 3] {
        let fe = self.face_edges[f];
        [
            self.edge_lengths[fe[0]],
            self.edge_lengths[fe[1]],
            self.edge_lengths[fe[2]],
        ]
    }

    /// Cone order at each vertex (0 away from the divisor).
    pub fn beta_per_vertex(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.vertex_count];
        for c in &self.divisor {
            beta[c.vertex] = c.beta;
        }
        beta
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Topological Euler characteristic `V - E + F`.
pub fn euler_characteristic(mesh: &ConicalMesh) -> i64 {
    mesh.vertex_count() as i64 - mesh.edge_count() as i64 + mesh.face_count() as i64
}

/// Euler characteristic plus the sum of cone orders.
pub fn singular_euler(mesh: &ConicalMesh) -> f64 {
    euler_characteristic(mesh) as f64 + mesh.divisor().iter().map(|c| c.beta).sum::<f64>()
}

/// Area of a triangle from its side lengths (Kahan's stable Heron formula).
pub fn triangle_area(lengths: [f64; 3]) -> f64 {
    let mut s = lengths;
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * p.max(0.0).sqrt()
}

/// Corner angles opposite the three given lengths.
pub fn corner_angles(lengths: [f64; 3]) -> [f64; 3] {
    let area4 = 4.0 * triangle_area(lengths);
    let [a, b, c] = lengths;
    [
        area4.atan2(b * b + c * c - a * a),
        area4.atan2(a * a + c * c - b * b),
        area4.atan2(a * a + b * b - c * c),
    ]
}

/// Discrete realization of the background metric.
#[derive(Debug, Clone)]
pub struct BackgroundMetric {
    /// Barycentric lumped areas.
    pub vertex_areas: Vec<f64>,
    pub face_areas: Vec<f64>,
    /// `corner_angles[f][k]` is the angle at corner `k` of face `f`.
    pub corner_angles: Vec<[f64; 3]>,
    /// `2π - Σ incident angles` per vertex.
    pub angle_defects: Vec<f64>,
    pub kappa: f64,
    pub total_volume: f64,
    pub singular_euler: f64,
    pub euler: i64,
    /// Cone order per vertex.
    pub beta: Vec<f64>,
}

impl BackgroundMetric {
    pub fn vertex_count(&self) -> usize {
        self.vertex_areas.len()
    }

    /// Smooth part of the defect at each vertex: `defect + 2πβ`.
    pub fn smooth_defects(&self) -> Vec<f64> {
        self.angle_defects
            .iter()
            .zip(&self.beta)
            .map(|(d, b)| d + 2.0 * PI * b)
            .collect()
    }

    /// Per-vertex curvature `(defect + 2πβ) / area` of the smooth part.
    pub fn pointwise_curvature(&self) -> Vec<f64> {
        self.smooth_defects()
            .iter()
            .zip(&self.vertex_areas)
            .map(|(d, a)| d / a)
            .collect()
    }

    /// Largest `|defect_v + 2πβ_v - κ A_v|`.
    pub fn max_defect_mismatch(&self) -> f64 {
        self.smooth_defects()
            .iter()
            .zip(&self.vertex_areas)
            .map(|(d, a)| (d - self.kappa * a).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|(defect_v + 2πβ_v) / A_v - κ|`.
    pub fn max_curvature_deviation(&self) -> f64 {
        self.pointwise_curvature()
            .iter()
            .map(|k| (k - self.kappa).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_vertex_area(&self) -> f64 {
        self.vertex_areas.iter().copied().fold(0.0, f64::max)
    }

    /// Default constant-curvature acceptance tolerance on defect mismatch.
    pub fn default_curvature_tolerance(&self) -> f64 {
        1e-6 * self.max_vertex_area()
    }

    /// True when every vertex defect agrees with `κ A_v` (plus the cone part)
    /// within `tol`.
    pub fn is_constant_curvature(&self, tol: f64) -> bool {
        self.max_defect_mismatch() <= tol
    }
}

/// Corner angles, lumped areas, defects and the inferred constant curvature.
pub fn metric_quantities(mesh: &ConicalMesh) -> Result<BackgroundMetric> {
    let n = mesh.vertex_count();
    let mut vertex_areas = vec![0.0; n];
    let mut angle_sums = vec![0.0; n];
    let mut face_areas = Vec::with_capacity(mesh.face_count());
    let mut angles_out = Vec::with_capacity(mesh.face_count());
    for (f, face) in mesh.faces().iter().enumerate() {
        let lengths = mesh.face_lengths(f);
        let [a, b, c] = lengths;
        if a >= b + c || b >= a + c || c >= a + b {
            return Err(Error::Geometry {
                face: f,
                reason: format!("triangle inequality violated by lengths ({a}, {b}, {c})"),
            });
        }
        let area = triangle_area(lengths);
        let angles = corner_angles(lengths);
        for k in 0..3 {
            vertex_areas[face[k]] += area / 3.0;
            angle_sums[face[k]] += angles[k];
        }
        face_areas.push(area);
        angles_out.push(angles);
    }
    let total_volume: f64 = vertex_areas.iter().sum();
    let chi_beta = singular_euler(mesh);
    Ok(BackgroundMetric {
        angle_defects: angle_sums.iter().map(|s| 2.0 * PI - s).collect(),
        vertex_areas,
        face_areas,
        corner_angles: angles_out,
        kappa: 2.0 * PI * chi_beta / total_volume,
        total_volume,
        singular_euler: chi_beta,
        euler: euler_characteristic(mesh),
        beta: mesh.beta_per_vertex(),
    })
}

/// Gauss–Bonnet discrepancies of a background metric.
#[derive(Debug, Clone, Copy)]
pub struct GaussBonnetReport {
    /// `|Σ_v defect_v - 2π χ(Σ)|`; a telescoping identity, exact up to roundoff.
    pub topological: f64,
    /// `Σ_v |defect_v + 2πβ_v - κ A_v|`; vanishes iff the metric has constant
    /// curvature `κ` away from the cones and `κ Vol = 2π χ(Σ, β)`.
    pub singular: f64,
    /// Largest per-vertex term of `singular`.
    pub max_vertex_mismatch: f64,
}

impl GaussBonnetReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.topological <= tol && self.singular <= tol
    }
}

pub fn gauss_bonnet_check(metric: &BackgroundMetric) -> GaussBonnetReport {
    let total_defect: f64 = metric.angle_defects.iter().sum();
    let topological = (total_defect - 2.0 * PI * metric.euler as f64).abs();
    let mut singular = 0.0;
    let mut max_vertex_mismatch: f64 = 0.0;
    for (d, a) in metric.smooth_defects().iter().zip(&metric.vertex_areas) {
        let m = (d - metric.kappa * a).abs();
        singular += m;
        max_vertex_mismatch = max_vertex_mismatch.max(m);
    }
    GaussBonnetReport {
        topological,
        singular,
        max_vertex_mismatch,
    }
}
