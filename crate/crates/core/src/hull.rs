//! Convex hulls: incremental construction, coplanar facet grouping, solid
//! angles and support queries.

use crate::error::{Error, Result};
use nalgebra::Vector3;
use std::collections::HashMap;

/// A maximal coplanar group of hull triangles (one physical face).
#[derive(Clone, Debug)]
pub struct HullFacet {
    /// Outward unit normal.
    pub normal: Vector3<f64>,
    /// Plane offset: `normal · x = offset` for points on the facet.
    pub offset: f64,
    pub triangle_ids: Vec<usize>,
    /// Facet boundary vertices in convex loop order.
    pub loop_vertices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ConvexHull {
    pub points: Vec<Vector3<f64>>,
    /// Outward-wound hull triangles.
    pub triangles: Vec<[usize; 3]>,
    pub facets: Vec<HullFacet>,
}

/// Coplanar-merge tolerance between triangle normals, radians.
pub const FACET_NORMAL_TOL: f64 = 1e-4;

struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    alive: bool,
}

impl ConvexHull {
    pub fn from_points(input: &[Vector3<f64>]) -> Result<ConvexHull> {
        if input.len() < 4 {
            return Err(Error::Mesh("hull needs at least 4 points".into()));
        }
        let scale = input
            .iter()
            .map(|p| p.norm())
            .fold(0.0_f64, f64::max)
            .max(1e-6);
        let eps = 1e-9 * scale.max(1.0);

        let (i0, i1, i2, i3) = initial_simplex(input, eps)?;
        let mut faces: Vec<Face> = Vec::new();
        {
            // Orient the tetrahedron so all normals point away from its centroid.
            let centroid = (input[i0] + input[i1] + input[i2] + input[i3]) / 4.0;
            for tri in [[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i0, i2, i3]] {
                faces.push(make_face(input, tri, &centroid));
            }
        }

        let mut order: Vec<usize> = (0..input.len()).collect();
        order.retain(|&i| i != i0 && i != i1 && i != i2 && i != i3);

        for &pi in &order {
            let p = input[pi];
            let visible: Vec<usize> = faces
                .iter()
                .enumerate()
                .filter(|(_, f)| f.alive && f.normal.dot(&p) - f.offset > eps)
                .map(|(id, _)| id)
                .collect();
            if visible.is_empty() {
                continue;
            }
            let mut vis_edges: HashMap<(usize, usize), ()> = HashMap::new();
            for &fid in &visible {
                let t = faces[fid].v;
                for k in 0..3 {
                    vis_edges.insert((t[k], t[(k + 1) % 3]), ());
                }
            }
            // Horizon = directed edges of visible faces whose reverse belongs
            // to a kept face.
            let mut horizon: Vec<(usize, usize)> = Vec::new();
            for &fid in &visible {
                let t = faces[fid].v;
                for k in 0..3 {
                    let e = (t[k], t[(k + 1) % 3]);
                    if !vis_edges.contains_key(&(e.1, e.0)) {
                        horizon.push(e);
                    }
                }
            }
            for &fid in &visible {
                faces[fid].alive = false;
            }
            for (a, b) in horizon {
                let n = (input[b] - input[a]).cross(&(p - input[a]));
                if n.norm() < eps * eps {
                    // Collinear sliver; the neighboring horizon faces cover it.
                    continue;
                }
                let normal = n.normalize();
                faces.push(Face {
                    v: [a, b, pi],
                    normal,
                    offset: normal.dot(&input[a]),
                    alive: true,
                });
            }
        }

        // Compact to used vertices, keeping input order.
        let mut used = vec![false; input.len()];
        for f in faces.iter().filter(|f| f.alive) {
            for &v in &f.v {
                used[v] = true;
            }
        }
        let mut remap = vec![usize::MAX; input.len()];
        let mut points = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                remap[i] = points.len();
                points.push(input[i]);
            }
        }
        let triangles: Vec<[usize; 3]> = faces
            .iter()
            .filter(|f| f.alive)
            .map(|f| [remap[f.v[0]], remap[f.v[1]], remap[f.v[2]]])
            .collect();
        if triangles.len() < 4 {
            return Err(Error::Mesh("degenerate (flat) point set".into()));
        }
        let facets = group_facets(&points, &triangles);
        Ok(ConvexHull {
            points,
            triangles,
            facets,
        })
    }

    /// Furthest hull point along `dir`.
    pub fn support(&self, dir: &Vector3<f64>) -> Vector3<f64> {
        let mut best = self.points[0];
        let mut best_d = best.dot(dir);
        for p in &self.points[1..] {
            let d = p.dot(dir);
            if d > best_d {
                best_d = d;
                best = *p;
            }
        }
        best
    }

    /// Solid angle subtended by one facet at `observer` (van Oosterom–Strackee,
    /// summed over the facet's triangles). Positive for an interior observer.
    pub fn facet_solid_angle(&self, facet: usize, observer: &Vector3<f64>) -> f64 {
        self.facets[facet]
            .triangle_ids
            .iter()
            .map(|&t| {
                let tri = self.triangles[t];
                triangle_solid_angle(
                    &(self.points[tri[0]] - observer),
                    &(self.points[tri[1]] - observer),
                    &(self.points[tri[2]] - observer),
                )
            })
            .sum()
    }

    /// Does `point`, projected along the facet normal, land inside the facet
    /// polygon with at least `margin` clearance from every edge?
    pub fn facet_contains_projection(
        &self,
        facet: usize,
        point: &Vector3<f64>,
        margin: f64,
    ) -> bool {
        let f = &self.facets[facet];
        let lv = &f.loop_vertices;
        if lv.len() < 3 {
            return false;
        }
        // Work in the facet plane; the loop is convex and counterclockwise
        // when viewed against the normal.
        for k in 0..lv.len() {
            let a = self.points[lv[k]];
            let b = self.points[lv[(k + 1) % lv.len()]];
            let edge = b - a;
            let inward = f.normal.cross(&edge);
            let n = inward.norm();
            if n < 1e-12 {
                continue;
            }
            if (point - a).dot(&inward) / n < margin {
                return false;
            }
        }
        true
    }
}

fn make_face(pts: &[Vector3<f64>], v: [usize; 3], interior: &Vector3<f64>) -> Face {
    let mut v = v;
    let mut n = (pts[v[1]] - pts[v[0]]).cross(&(pts[v[2]] - pts[v[0]]));
    if n.dot(&(pts[v[0]] - interior)) < 0.0 {
        v.swap(1, 2);
        n = -n;
    }
    let normal = n.normalize();
    Face {
        v,
        normal,
        offset: normal.dot(&pts[v[0]]),
        alive: true,
    }
}

fn initial_simplex(pts: &[Vector3<f64>], eps: f64) -> Result<(usize, usize, usize, usize)> {
    // Two extremes along the axis of largest spread.
    let mut i0 = 0;
    let mut i1 = 0;
    let mut best = -1.0;
    for axis in 0..3 {
        let (lo, _) = pts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1[axis].total_cmp(&b.1[axis]))
            .unwrap();
        let (hi, _) = pts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1[axis].total_cmp(&b.1[axis]))
            .unwrap();
        let spread = pts[hi][axis] - pts[lo][axis];
        if spread > best {
            best = spread;
            i0 = lo;
            i1 = hi;
        }
    }
    if best < eps {
        return Err(Error::Mesh("all points coincide".into()));
    }
    let dir = (pts[i1] - pts[i0]).normalize();
    let i2 = (0..pts.len())
        .max_by(|&a, &b| {
            let da = (pts[a] - pts[i0]).cross(&dir).norm();
            let db = (pts[b] - pts[i0]).cross(&dir).norm();
            da.total_cmp(&db)
        })
        .unwrap();
    if (pts[i2] - pts[i0]).cross(&dir).norm() < eps {
        return Err(Error::Mesh("points are collinear".into()));
    }
    let n = (pts[i1] - pts[i0]).cross(&(pts[i2] - pts[i0]));
    let i3 = (0..pts.len())
        .max_by(|&a, &b| {
            let da = (pts[a] - pts[i0]).dot(&n).abs();
            let db = (pts[b] - pts[i0]).dot(&n).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    if (pts[i3] - pts[i0]).dot(&n).abs() < eps * n.norm() {
        return Err(Error::Mesh("points are coplanar".into()));
    }
    Ok((i0, i1, i2, i3))
}

fn group_facets(points: &[Vector3<f64>], triangles: &[[usize; 3]]) -> Vec<HullFacet> {
    let mut facets: Vec<HullFacet> = Vec::new();
    for (tid, tri) in triangles.iter().enumerate() {
        let n = (points[tri[1]] - points[tri[0]])
            .cross(&(points[tri[2]] - points[tri[0]]))
            .normalize();
        let off = n.dot(&points[tri[0]]);
        let mut placed = false;
        for f in facets.iter_mut() {
            if f.normal.dot(&n).clamp(-1.0, 1.0).acos() < FACET_NORMAL_TOL
                && (f.offset - off).abs() < 1e-7
            {
                f.triangle_ids.push(tid);
                placed = true;
                break;
            }
        }
        if !placed {
            facets.push(HullFacet {
                normal: n,
                offset: off,
                triangle_ids: vec![tid],
                loop_vertices: Vec::new(),
            });
        }
    }
    for f in facets.iter_mut() {
        let mut vs: Vec<usize> = f
            .triangle_ids
            .iter()
            .flat_map(|&t| triangles[t].iter().copied())
            .collect();
        vs.sort_unstable();
        vs.dedup();
        f.loop_vertices = convex_loop(points, &vs, &f.normal);
    }
    facets
}

/// Order coplanar vertices counterclockwise about the facet normal and drop
/// interior points (2D convex hull by angle sort + cross-product pruning).
fn convex_loop(points: &[Vector3<f64>], ids: &[usize], normal: &Vector3<f64>) -> Vec<usize> {
    if ids.len() <= 3 {
        // Keep winding consistent with the normal.
        if ids.len() == 3 {
            let n = (points[ids[1]] - points[ids[0]]).cross(&(points[ids[2]] - points[ids[0]]));
            if n.dot(normal) < 0.0 {
                return vec![ids[0], ids[2], ids[1]];
            }
        }
        return ids.to_vec();
    }
    let u = pick_orthonormal(normal);
    let v = normal.cross(&u);
    let center: Vector3<f64> =
        ids.iter().map(|&i| points[i]).sum::<Vector3<f64>>() / ids.len() as f64;
    let mut ang: Vec<(f64, usize)> = ids
        .iter()
        .map(|&i| {
            let d = points[i] - center;
            (d.dot(&v).atan2(d.dot(&u)), i)
        })
        .collect();
    ang.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ordered: Vec<usize> = ang.into_iter().map(|(_, i)| i).collect();
    // Prune collinear/interior vertices.
    let mut hull: Vec<usize> = Vec::new();
    let m = ordered.len();
    for k in 0..m {
        hull.push(ordered[k]);
        while hull.len() >= 3 {
            let c = points[hull[hull.len() - 1]];
            let b = points[hull[hull.len() - 2]];
            let a = points[hull[hull.len() - 3]];
            if (b - a).cross(&(c - a)).dot(normal) <= 1e-14 {
                hull.remove(hull.len() - 2);
            } else {
                break;
            }
        }
    }
    hull
}

pub fn pick_orthonormal(n: &Vector3<f64>) -> Vector3<f64> {
    let cand = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    n.cross(&cand).normalize()
}

/// Signed solid angle of a triangle at the origin (van Oosterom–Strackee).
pub fn triangle_solid_angle(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let numer = a.dot(&b.cross(c));
    let denom = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    2.0 * numer.atan2(denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_points() -> Vec<Vector3<f64>> {
        let mut v = Vec::new();
        for &x in &[0.0, 1.0] {
            for &y in &[0.0, 1.0] {
                for &z in &[0.0, 1.0] {
                    v.push(Vector3::new(x, y, z));
                }
            }
        }
        v
    }

    #[test]
    fn cube_hull_has_six_facets() {
        let h = ConvexHull::from_points(&cube_points()).unwrap();
        assert_eq!(h.points.len(), 8);
        assert_eq!(h.triangles.len(), 12);
        assert_eq!(h.facets.len(), 6);
        for f in &h.facets {
            assert_eq!(f.loop_vertices.len(), 4);
        }
    }

    #[test]
    fn interior_points_are_dropped() {
        let mut pts = cube_points();
        pts.push(Vector3::new(0.5, 0.5, 0.5));
        pts.push(Vector3::new(0.25, 0.25, 0.999));
        let h = ConvexHull::from_points(&pts).unwrap();
        assert_eq!(h.points.len(), 8);
    }

    #[test]
    fn solid_angles_sum_to_four_pi() {
        let h = ConvexHull::from_points(&cube_points()).unwrap();
        let obs = Vector3::new(0.5, 0.5, 0.5);
        let total: f64 = (0..h.facets.len())
            .map(|f| h.facet_solid_angle(f, &obs))
            .sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-9);
        // Symmetry: each cube face subtends the same angle.
        for f in 0..6 {
            let w = h.facet_solid_angle(f, &obs) / (4.0 * std::f64::consts::PI);
            assert!((w - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_containment() {
        let h = ConvexHull::from_points(&cube_points()).unwrap();
        let bottom = (0..6)
            .find(|&f| h.facets[f].normal.z < -0.9)
            .expect("bottom facet");
        assert!(h.facet_contains_projection(bottom, &Vector3::new(0.5, 0.5, 0.5), 1e-9));
        assert!(!h.facet_contains_projection(bottom, &Vector3::new(1.5, 0.5, 0.5), 1e-9));
        // Margin: a point 1 mm from the edge fails a 2 mm margin.
        assert!(!h.facet_contains_projection(bottom, &Vector3::new(0.001, 0.5, 0.5), 0.002));
    }

    #[test]
    fn support_points() {
        let h = ConvexHull::from_points(&cube_points()).unwrap();
        let s = h.support(&Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(s, Vector3::new(1.0, 1.0, 1.0));
        let s = h.support(&Vector3::new(-1.0, 0.2, -0.3));
        assert_eq!(s, Vector3::new(0.0, 1.0, 0.0));
    }
}
