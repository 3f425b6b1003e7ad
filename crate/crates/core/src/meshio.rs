//! Plain-text mesh files.
//!
//! ```text
//! conical-mesh 1
//! V F C
//! <V vertex records: "x y z" or "abstract" (optionally "abstract x y z")>
//! <F faces: "i j k">
//! <E edges "i j length", only when the vertices are abstract>
//! <C cones: "vertex beta">
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Coordinates after
//! `abstract` are auxiliary: they are kept for evaluating curvature presets
//! but the lengths come from the edge records.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{ConePoint, ConicalMesh};

const MAGIC: &str = "conical-mesh 1";

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        Self {
            inner: text.lines().enumerate(),
            path,
            last: 0,
        }
    }

    fn error(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.last,
            reason: reason.into(),
        }
    }

    fn next_record(&mut self, what: &str) -> Result<Vec<&'a str>> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            self.last = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok(line.split_whitespace().collect());
        }
        Err(self.error(format!("unexpected end of file, expected {what}")))
    }

    fn number<T: std::str::FromStr>(&self, token: &str, what: &str) -> Result<T> {
        token.parse().map_err(|_| self.error(format!("bad {what} '{token}'")))
    }

    fn expect_len(&self, tokens: &[&str], n: usize, what: &str) -> Result<()> {
        if tokens.len() != n {
            return Err(self.error(format!("{what} needs {n} fields, found {}", tokens.len())));
        }
        Ok(())
    }
}

/// Parses mesh text; `path` is only used in error messages.
pub fn parse_mesh(text: &str, path: &Path) -> Result<ConicalMesh> {
    let mut lines = Lines::new(text, path);
    let header = lines.next_record("magic line")?;
    if header.join(" ") != MAGIC {
        return Err(lines.error(format!("expected '{MAGIC}'")));
    }
    let counts = lines.next_record("counts")?;
    lines.expect_len(&counts, 3, "count line")?;
    let v: usize = lines.number(counts[0], "vertex count")?;
    let f: usize = lines.number(counts[1], "face count")?;
    let c: usize = lines.number(counts[2], "cone count")?;

    let mut coords = Vec::with_capacity(v);
    let mut abstract_count = 0;
    for _ in 0..v {
        let rec = lines.next_record("vertex record")?;
        let xyz = if rec.first() == Some(&"abstract") {
            abstract_count += 1;
            match rec.len() {
                1 => None,
                4 => Some(&rec[1..]),
                _ => return Err(lines.error("abstract vertex takes 0 or 3 coordinates")),
            }
        } else {
            lines.expect_len(&rec, 3, "vertex record")?;
            Some(&rec[..])
        };
        match xyz {
            Some(t) => {
                let p = [
                    lines.number(t[0], "coordinate")?,
                    lines.number(t[1], "coordinate")?,
                    lines.number(t[2], "coordinate")?,
                ];
                coords.push(Some(p));
            }
            None => coords.push(None),
        }
    }
    if abstract_count != 0 && abstract_count != v {
        return Err(lines.error("vertex records mix coordinates and 'abstract'"));
    }

    let mut faces = Vec::with_capacity(f);
    for _ in 0..f {
        let rec = lines.next_record("face")?;
        lines.expect_len(&rec, 3, "face")?;
        let mut face = [0usize; 3];
        for (slot, tok) in face.iter_mut().zip(&rec) {
            *slot = lines.number(tok, "vertex index")?;
            if *slot >= v {
                return Err(lines.error(format!("vertex index {slot} out of range")));
            }
        }
        faces.push(face);
    }

    let mut lengths = Vec::new();
    if abstract_count > 0 {
        // every edge appears in two faces
        if !f.is_multiple_of(2) {
            return Err(lines.error("odd face count cannot form a closed surface"));
        }
        for _ in 0..3 * f / 2 {
            let rec = lines.next_record("edge length")?;
            lines.expect_len(&rec, 3, "edge record")?;
            let a: usize = lines.number(rec[0], "vertex index")?;
            let b: usize = lines.number(rec[1], "vertex index")?;
            let len: f64 = lines.number(rec[2], "length")?;
            lengths.push((a, b, len));
        }
    }

    let mut divisor = Vec::with_capacity(c);
    for _ in 0..c {
        let rec = lines.next_record("cone")?;
        lines.expect_len(&rec, 2, "cone record")?;
        divisor.push(ConePoint {
            vertex: lines.number(rec[0], "vertex index")?,
            beta: lines.number(rec[1], "cone order")?,
        });
    }
    if let Ok(extra) = lines.next_record("") {
        return Err(lines.error(format!("trailing content '{}'", extra.join(" "))));
    }

    if abstract_count == 0 {
        let coords = coords.into_iter().map(Option::unwrap).collect();
        ConicalMesh::from_coordinates(coords, faces, divisor)
    } else {
        let mesh = ConicalMesh::from_edge_lengths(v, faces, &lengths, divisor)?;
        match coords.into_iter().collect::<Option<Vec<_>>>() {
            Some(aux) => mesh.with_auxiliary_coordinates(aux),
            None => Ok(mesh),
        }
    }
}

pub fn read_mesh(path: &Path) -> Result<ConicalMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, path)
}

/// True when the stored lengths are exactly the chord lengths of the coordinates.
fn lengths_are_chords(mesh: &ConicalMesh, coords: &[[f64; 3]]) -> bool {
    mesh.edges().iter().zip(mesh.edge_lengths()).all(|(&[a, b], &len)| {
        let p = coords[a];
        let q = coords[b];
        let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
        d == len
    })
}

/// Serializes a mesh. Each entry of `comments` becomes a `#` line after the magic line.
pub fn format_mesh(mesh: &ConicalMesh, comments: &[String]) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.vertex_count(),
        mesh.face_count(),
        mesh.divisor().len()
    );
    let coords = mesh.coordinates();
    let embedded = coords.is_some_and(|c| lengths_are_chords(mesh, c));
    for i in 0..mesh.vertex_count() {
        match coords {
            Some(c) => {
                let [x, y, z] = c[i];
                let prefix = if embedded { "" } else { "abstract " };
                let _ = writeln!(out, "{prefix}{x:.16e} {y:.16e} {z:.16e}");
            }
            None => out.push_str("abstract\n"),
        }
    }
    for [a, b, c] in mesh.faces() {
        let _ = writeln!(out, "{a} {b} {c}");
    }
    if !embedded {
        for (&[a, b], len) in mesh.edges().iter().zip(mesh.edge_lengths()) {
            let _ = writeln!(out, "{a} {b} {len:.16e}");
        }
    }
    for cone in mesh.divisor() {
        let _ = writeln!(out, "{} {:.16e}", cone.vertex, cone.beta);
    }
    out
}

pub fn write_mesh(mesh: &ConicalMesh, path: &Path, comments: &[String]) -> Result<()> {
    std::fs::write(path, format_mesh(mesh, comments))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{cone_sphere, flat_torus, pillowcase};

    fn same(a: &ConicalMesh, b: &ConicalMesh) {
        assert_eq!(a.faces(), b.faces());
        assert_eq!(a.vertex_count(), b.vertex_count());
        for (&[i, j], &len) in a.edges().iter().zip(a.edge_lengths()) {
            let e = b.edge_between(i, j).unwrap();
            assert_eq!(b.edge_lengths()[e], len);
        }
        assert_eq!(a.divisor(), b.divisor());
        assert_eq!(a.coordinates(), b.coordinates());
    }

    #[test]
    fn round_trips_are_exact() {
        for mesh in [
            flat_torus(5).unwrap(),
            pillowcase(4).unwrap(),
            cone_sphere(1, &[-0.3, 0.25]).unwrap(),
            flat_torus(4).unwrap().without_coordinates(),
        ] {
            let text = format_mesh(&mesh, &["kappa_bar = 0".into()]);
            let back = parse_mesh(&text, Path::new("mem")).unwrap();
            same(&mesh, &back);
        }
    }

    #[test]
    fn embedded_meshes_skip_edge_records() {
        let mesh = pillowcase(2).unwrap();
        let text = format_mesh(&mesh, &[]);
        assert!(!text.contains("abstract"));
        let torus = format_mesh(&flat_torus(3).unwrap(), &[]);
        assert!(torus.lines().nth(2).unwrap().starts_with("abstract "));
    }

    #[test]
    fn minimal_tetrahedron() {
        let text = "conical-mesh 1\n# a comment\n4 4 1\n\
                    0 0 0\n1 0 0\n0 1 0\n0 0 1\n\
                    0 2 1\n0 1 3\n0 3 2\n1 2 3\n\
                    3 -0.5\n";
        let mesh = parse_mesh(text, Path::new("t")).unwrap();
        assert_eq!(mesh.edge_count(), 6);
        assert_eq!(mesh.divisor()[0], ConePoint { vertex: 3, beta: -0.5 });
    }

    #[test]
    fn errors_name_the_line() {
        let text = "conical-mesh 1\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 2 1\n0 1 x\n";
        match parse_mesh(text, Path::new("bad.mesh")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_mesh("conical-mesh 2\n", Path::new("v")),
            Err(Error::Parse { line: 1, .. })
        ));
        let mixed = "conical-mesh 1\n3 1 0\nabstract\n0 0 0\n1 0 0\n0 1 2\n";
        assert!(matches!(parse_mesh(mixed, Path::new("m")), Err(Error::Parse { .. })));
    }
}
