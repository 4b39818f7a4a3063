//! Triangle meshes: OBJ/OFF loading, watertightness validation and the
//! signed-tetrahedron volume centroid.

use crate::error::{Error, Result};
use nalgebra::Vector3;
use std::collections::HashMap;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    /// Volume centroid (signed-tetrahedron method).
    pub centroid: Vector3<f64>,
}

impl TriMesh {
    /// Build a mesh from raw parts, validating watertightness and computing
    /// the volume centroid. Triangle winding must be consistent.
    pub fn from_parts(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<TriMesh> {
        if triangles.is_empty() {
            return Err(Error::Mesh("mesh has no faces".into()));
        }
        for (i, t) in triangles.iter().enumerate() {
            for &v in t {
                if v >= vertices.len() {
                    return Err(Error::Mesh(format!(
                        "triangle {i} references vertex {v} out of {}",
                        vertices.len()
                    )));
                }
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Mesh(format!("triangle {i} is degenerate: {t:?}")));
            }
        }
        check_watertight(&vertices, &triangles)?;
        let (volume, centroid) = volume_centroid(&vertices, &triangles);
        if volume.abs() < 1e-12 {
            return Err(Error::Mesh("mesh encloses no volume".into()));
        }
        Ok(TriMesh {
            vertices,
            triangles,
            centroid,
        })
    }

    pub fn volume(&self) -> f64 {
        volume_centroid(&self.vertices, &self.triangles).0.abs()
    }

    pub fn aabb(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        s
    }
}

/// Every directed edge must appear exactly once and be matched by its
/// reverse: two triangles per undirected edge, consistently wound.
fn check_watertight(vertices: &[Vector3<f64>], triangles: &[[usize; 3]]) -> Result<()> {
    let _ = vertices;
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let e = (t[k], t[(k + 1) % 3]);
            *directed.entry(e).or_insert(0) += 1;
        }
    }
    for (&(a, b), &count) in &directed {
        if count != 1 {
            return Err(Error::NotWatertight(format!(
                "directed edge ({a},{b}) used by {count} triangles (inconsistent winding or duplicate face)"
            )));
        }
        if !directed.contains_key(&(b, a)) {
            return Err(Error::NotWatertight(format!(
                "edge ({a},{b}) has no opposing triangle (open surface)"
            )));
        }
    }
    Ok(())
}

fn volume_centroid(vertices: &[Vector3<f64>], triangles: &[[usize; 3]]) -> (f64, Vector3<f64>) {
    let mut volume = 0.0;
    let mut weighted = Vector3::zeros();
    for t in triangles {
        let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        let sv = a.dot(&b.cross(&c)) / 6.0;
        volume += sv;
        weighted += (a + b + c) / 4.0 * sv;
    }
    (volume, weighted / volume)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let name = path.display().to_string();
    if text.trim_start().starts_with("OFF") {
        parse_off(&text, &name)
    } else {
        parse_obj(&text, &name)
    }
}

pub fn parse_obj(text: &str, name: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with("v ") {
            let coords: Vec<f64> = line[2..]
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(name, format!("bad vertex on line {}", ln + 1)))?;
            if coords.len() < 3 {
                return Err(Error::parse(name, format!("short vertex on line {}", ln + 1)));
            }
            vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
        } else if line.starts_with("f ") {
            let idx: Vec<usize> = line[2..]
                .split_whitespace()
                .map(|tok| {
                    let lead = tok.split('/').next().unwrap_or("");
                    lead.parse::<isize>().ok().and_then(|i| {
                        if i > 0 {
                            Some(i as usize - 1)
                        } else {
                            None
                        }
                    })
                })
                .collect::<Option<_>>()
                .ok_or_else(|| Error::parse(name, format!("bad face on line {}", ln + 1)))?;
            if idx.len() < 3 {
                return Err(Error::parse(name, format!("short face on line {}", ln + 1)));
            }
            // Fan-triangulate any polygonal face.
            for k in 1..idx.len() - 1 {
                triangles.push([idx[0], idx[k], idx[k + 1]]);
            }
        }
    }
    TriMesh::from_parts(vertices, triangles)
}

pub fn parse_off(text: &str, name: &str) -> Result<TriMesh> {
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace())
        .peekable();
    match tokens.next() {
        Some("OFF") => {}
        _ => return Err(Error::parse(name, "missing OFF header")),
    }
    let mut next_usize = |what: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(name, format!("bad {what}")))
    };
    let nv = next_usize("vertex count")?;
    let nf = next_usize("face count")?;
    let _ne = next_usize("edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut c = [0.0; 3];
        for x in &mut c {
            *x = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(name, "bad vertex coordinate"))?;
        }
        vertices.push(Vector3::new(c[0], c[1], c[2]));
    }
    let mut triangles = Vec::new();
    for _ in 0..nf {
        let n = tokens
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| Error::parse(name, "bad face arity"))?;
        let mut idx = Vec::with_capacity(n);
        for _ in 0..n {
            idx.push(
                tokens
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| Error::parse(name, "bad face index"))?,
            );
        }
        for k in 1..idx.len().saturating_sub(1) {
            triangles.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    TriMesh::from_parts(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT_CUBE_OBJ: &str = "\
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";

    #[test]
    fn unit_cube_loads() {
        let m = parse_obj(UNIT_CUBE_OBJ, "cube").unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.triangles.len(), 12);
        assert!((m.centroid - Vector3::new(0.5, 0.5, 0.5)).norm() < 1e-12);
        assert!((m.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quad_faces_are_fan_triangulated() {
        let obj = "\
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
        let m = parse_obj(obj, "cube-quads").unwrap();
        assert_eq!(m.triangles.len(), 12);
        assert!((m.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn open_sheet_rejected() {
        let obj = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n";
        match parse_obj(obj, "sheet") {
            Err(Error::NotWatertight(msg)) => assert!(msg.contains("edge")),
            other => panic!("expected watertight error, got {other:?}"),
        }
    }

    #[test]
    fn tetrahedron_centroid() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\nf 1 4 3\n";
        let m = parse_obj(obj, "tet").unwrap();
        assert!((m.centroid - Vector3::new(0.25, 0.25, 0.25)).norm() < 1e-12);
        assert!((m.volume() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn off_format_loads() {
        let off = "OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 1 2 3\n3 0 3 2\n";
        let m = parse_off(off, "tet.off").unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert!((m.centroid - Vector3::new(0.25, 0.25, 0.25)).norm() < 1e-12);
    }
}
