//! Convex collision primitives and distance queries.
//!
//! The robot is capsules, objects are convex hulls, the environment is a
//! half-space table plus axis-aligned boxes. Pairwise distances come from
//! support-function (GJK) queries; capsules subtract their radius from the
//! core-segment distance. Intersecting pairs report distance 0.

use crate::se3::Pose;
use nalgebra::Vector3;

#[derive(Clone, Copy, Debug)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        Capsule { a, b, radius }
    }

    pub fn transformed(&self, pose: &Pose) -> Capsule {
        Capsule {
            a: pose.transform_point(&self.a),
            b: pose.transform_point(&self.b),
            radius: self.radius,
        }
    }

    pub fn aabb(&self) -> Aabb {
        let r = Vector3::repeat(self.radius);
        Aabb {
            lo: self.a.inf(&self.b) - r,
            hi: self.a.sup(&self.b) + r,
        }
    }
}

/// Axis-aligned box given by center and half extents.
#[derive(Clone, Copy, Debug)]
pub struct BoxShape {
    pub center: Vector3<f64>,
    pub half: Vector3<f64>,
}

impl BoxShape {
    pub fn support(&self, dir: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.center.x + self.half.x.copysign(dir.x),
            self.center.y + self.half.y.copysign(dir.y),
            self.center.z + self.half.z.copysign(dir.z),
        )
    }

    pub fn aabb(&self) -> Aabb {
        Aabb {
            lo: self.center - self.half,
            hi: self.center + self.half,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Aabb {
    pub lo: Vector3<f64>,
    pub hi: Vector3<f64>,
}

impl Aabb {
    pub fn overlaps(&self, other: &Aabb, margin: f64) -> bool {
        for k in 0..3 {
            if self.lo[k] > other.hi[k] + margin || other.lo[k] > self.hi[k] + margin {
                return false;
            }
        }
        true
    }
}

/// A convex point cloud placed in the world by a pose.
#[derive(Clone, Copy, Debug)]
pub struct PosedHull<'a> {
    pub points: &'a [Vector3<f64>],
    pub pose: &'a Pose,
}

impl<'a> PosedHull<'a> {
    pub fn support(&self, dir: &Vector3<f64>) -> Vector3<f64> {
        let local_dir = self.pose.rotation.inverse() * dir;
        let mut best = self.points[0];
        let mut best_d = best.dot(&local_dir);
        for p in &self.points[1..] {
            let d = p.dot(&local_dir);
            if d > best_d {
                best_d = d;
                best = *p;
            }
        }
        self.pose.transform_point(&best)
    }

    pub fn aabb(&self) -> Aabb {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in self.points {
            let w = self.pose.transform_point(p);
            lo = lo.inf(&w);
            hi = hi.sup(&w);
        }
        Aabb { lo, hi }
    }

    pub fn min_z(&self) -> f64 {
        // Support in -z gives the lowest point.
        self.support(&Vector3::new(0.0, 0.0, -1.0)).z
    }
}

#[derive(Clone, Copy, Debug)]
pub enum SupportShape<'a> {
    Segment(Vector3<f64>, Vector3<f64>),
    Box(&'a BoxShape),
    Hull(PosedHull<'a>),
}

impl<'a> SupportShape<'a> {
    fn support(&self, dir: &Vector3<f64>) -> Vector3<f64> {
        match self {
            SupportShape::Segment(a, b) => {
                if a.dot(dir) >= b.dot(dir) {
                    *a
                } else {
                    *b
                }
            }
            SupportShape::Box(b) => b.support(dir),
            SupportShape::Hull(h) => h.support(dir),
        }
    }

    fn any_point(&self) -> Vector3<f64> {
        match self {
            SupportShape::Segment(a, _) => *a,
            SupportShape::Box(b) => b.center,
            SupportShape::Hull(h) => h.pose.transform_point(&h.points[0]),
        }
    }
}

const GJK_REL_TOL: f64 = 1e-10;
const GJK_ABS_TOL: f64 = 1e-12;
const GJK_MAX_ITERS: usize = 128;

/// Distance between two convex support shapes; 0.0 when they intersect.
pub fn gjk_distance(a: &SupportShape, b: &SupportShape) -> f64 {
    let cso = |dir: &Vector3<f64>| a.support(dir) - b.support(&-dir);
    let mut dir = a.any_point() - b.any_point();
    if dir.norm_squared() < GJK_ABS_TOL {
        dir = Vector3::x();
    }
    let mut simplex: Vec<Vector3<f64>> = vec![cso(&dir)];
    for _ in 0..GJK_MAX_ITERS {
        let v = match closest_on_simplex(&mut simplex) {
            Some(v) => v,
            None => return 0.0, // origin enclosed
        };
        let dist2 = v.norm_squared();
        if dist2 < GJK_ABS_TOL {
            return 0.0;
        }
        let w = cso(&(-v));
        if dist2 - v.dot(&w) <= GJK_REL_TOL * dist2 {
            return dist2.sqrt();
        }
        if simplex.iter().any(|s| (s - w).norm_squared() < GJK_ABS_TOL) {
            return dist2.sqrt();
        }
        simplex.push(w);
    }
    // Conservative on iteration exhaustion.
    simplex
        .iter()
        .map(|s| s.norm())
        .fold(f64::INFINITY, f64::min)
}

/// Closest point to the origin on the current simplex; reduces the simplex to
/// the supporting feature. Returns `None` when a tetrahedron encloses the
/// origin.
fn closest_on_simplex(simplex: &mut Vec<Vector3<f64>>) -> Option<Vector3<f64>> {
    match simplex.len() {
        1 => Some(simplex[0]),
        2 => {
            let (b, a) = (simplex[0], simplex[1]);
            let (p, keep) = closest_on_segment(&a, &b);
            *simplex = match keep {
                SegFeature::A => vec![a],
                SegFeature::B => vec![b],
                SegFeature::AB => vec![b, a],
            };
            Some(p)
        }
        3 => {
            let (c, b, a) = (simplex[0], simplex[1], simplex[2]);
            let (p, keep) = closest_on_triangle(&a, &b, &c);
            *simplex = keep;
            Some(p)
        }
        4 => {
            let (d, c, b, a) = (simplex[0], simplex[1], simplex[2], simplex[3]);
            closest_on_tetra(&a, &b, &c, &d, simplex)
        }
        _ => unreachable!("simplex size bounded by 4"),
    }
}

enum SegFeature {
    A,
    B,
    AB,
}

fn closest_on_segment(a: &Vector3<f64>, b: &Vector3<f64>) -> (Vector3<f64>, SegFeature) {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom < GJK_ABS_TOL {
        return (*a, SegFeature::A);
    }
    let t = -a.dot(&ab) / denom;
    if t <= 0.0 {
        (*a, SegFeature::A)
    } else if t >= 1.0 {
        (*b, SegFeature::B)
    } else {
        (a + ab * t, SegFeature::AB)
    }
}

fn closest_on_triangle(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> (Vector3<f64>, Vec<Vector3<f64>>) {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, vec![*a]);
    }
    let bp = -b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, vec![*b]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, vec![*b, *a]);
    }
    let cp = -c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, vec![*c]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, vec![*c, *a]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, vec![*c, *b]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, vec![*c, *b, *a])
}

fn closest_on_tetra(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
    d: &Vector3<f64>,
    simplex: &mut Vec<Vector3<f64>>,
) -> Option<Vector3<f64>> {
    let faces: [(&Vector3<f64>, &Vector3<f64>, &Vector3<f64>, &Vector3<f64>); 4] = [
        (a, b, c, d),
        (a, c, d, b),
        (a, b, d, c),
        (b, c, d, a),
    ];
    let mut best: Option<(f64, Vector3<f64>, Vec<Vector3<f64>>)> = None;
    let mut outside_any = false;
    for (p, q, r, other) in faces {
        let mut n = (q - p).cross(&(r - p));
        if n.dot(&(other - p)) > 0.0 {
            n = -n;
        }
        if n.dot(&-p) > 0.0 {
            outside_any = true;
            let (cp, keep) = closest_on_triangle(p, q, r);
            let d2 = cp.norm_squared();
            if best.as_ref().map_or(true, |(bd, _, _)| d2 < *bd) {
                best = Some((d2, cp, keep));
            }
        }
    }
    if !outside_any {
        return None;
    }
    let (_, cp, keep) = best.unwrap();
    *simplex = keep;
    Some(cp)
}

/// Exact segment-segment distance (for capsule-capsule pairs).
pub fn segment_segment_distance(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (mut s, mut t);
    if a < GJK_ABS_TOL && e < GJK_ABS_TOL {
        return r.norm();
    }
    if a < GJK_ABS_TOL {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e < GJK_ABS_TOL {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            s = if denom > GJK_ABS_TOL {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}
