//! Stable resting poses on the table plane and the intermediate-pose
//! candidate set built from them.
//!
//! Resting probability of a hull facet is the solid angle it subtends at the
//! volume centroid divided by 4π: the measure of drop orientations whose
//! downward ray through the centroid exits through that facet. Facets whose
//! centroid projection falls outside the facet polygon topple and are
//! excluded, their mass renormalized away (quasi-static model).

use crate::error::{Error, Result};
use crate::hull::ConvexHull;
use crate::mesh::TriMesh;
use crate::se3::Pose;
use nalgebra::{UnitQuaternion, Vector3};
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct StablePose {
    /// Object frame → world, resting on the z = 0 table plane.
    pub pose: Pose,
    /// Probability mass of this resting orientation, in (0, 1].
    pub probability: f64,
    /// Supporting facet's outward normal in the object frame.
    pub support_normal: Vector3<f64>,
}

#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub candidates: Vec<Pose>,
    pub goal_index: usize,
    /// Source stable-pose probability per candidate (1.0 for the goal entry);
    /// used for deterministic tie-breaking.
    pub weights: Vec<f64>,
}

/// Rotation taking unit vector `from` onto unit vector `to`, with the
/// antiparallel case resolved to a half-turn about an orthogonal axis.
pub fn rotation_onto(from: &Vector3<f64>, to: &Vector3<f64>) -> UnitQuaternion<f64> {
    match UnitQuaternion::rotation_between(from, to) {
        Some(q) => q,
        None => {
            let axis = crate::hull::pick_orthonormal(from);
            UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), PI)
        }
    }
}

pub fn stable_poses(mesh: &TriMesh) -> Result<Vec<StablePose>> {
    let hull = ConvexHull::from_points(&mesh.vertices)?;
    stable_poses_from_hull(mesh, &hull)
}

pub fn stable_poses_from_hull(mesh: &TriMesh, hull: &ConvexHull) -> Result<Vec<StablePose>> {
    let c = mesh.centroid;
    let down = -Vector3::z();
    let mut out = Vec::new();
    let mut kept_mass = 0.0;
    for (fi, facet) in hull.facets.iter().enumerate() {
        let weight = hull.facet_solid_angle(fi, &c) / (4.0 * PI);
        if weight <= 0.0 {
            continue;
        }
        if !hull.facet_contains_projection(fi, &c, 1e-9) {
            continue; // topples off this facet
        }
        let rotation = rotation_onto(&facet.normal, &down);
        let min_z = hull
            .points
            .iter()
            .map(|p| (rotation * p).z)
            .fold(f64::INFINITY, f64::min);
        out.push(StablePose {
            pose: Pose::new(Vector3::new(0.0, 0.0, -min_z), rotation),
            probability: weight,
            support_normal: facet.normal,
        });
        kept_mass += weight;
    }
    if out.is_empty() {
        return Err(Error::NoStablePose(
            "no hull facet supports the centroid".into(),
        ));
    }
    for sp in &mut out {
        sp.probability /= kept_mass;
    }
    // Highest-probability first; ties resolved by the original facet order,
    // which sort_by preserves (stable sort).
    out.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    Ok(out)
}

/// Top-`m` stable poses, each augmented by `n` rotations about the vertical
/// with step 2π/n, pinned to `p_0`'s (x, y); the goal pose appended last.
/// `m` is clamped to the number of stable poses.
pub fn candidate_set(
    mesh: &TriMesh,
    p_0: &Pose,
    p_goal: &Pose,
    m: usize,
    n: usize,
) -> Result<CandidateSet> {
    let stable = stable_poses(mesh)?;
    let m_eff = m.min(stable.len());
    let mut candidates = Vec::with_capacity(m_eff * n + 1);
    let mut weights = Vec::with_capacity(m_eff * n + 1);
    for sp in stable.iter().take(m_eff) {
        for k in 0..n {
            let theta = 2.0 * PI * k as f64 / n as f64;
            let rotation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta)
                * sp.pose.rotation;
            candidates.push(Pose::new(
                Vector3::new(p_0.translation.x, p_0.translation.y, sp.pose.translation.z),
                rotation,
            ));
            weights.push(sp.probability);
        }
    }
    let goal_index = candidates.len();
    candidates.push(*p_goal);
    weights.push(1.0);
    Ok(CandidateSet {
        candidates,
        goal_index,
        weights,
    })
}

/// Object-intrinsic shape summary: hull bounding-box extents, hull volume,
/// and the centroid's offset from the bounding-box center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeDescriptor {
    pub extents: Vector3<f64>,
    pub volume: f64,
    pub centroid_offset: Vector3<f64>,
}

pub fn shape_descriptor(mesh: &TriMesh) -> Result<ShapeDescriptor> {
    let hull = ConvexHull::from_points(&mesh.vertices)?;
    Ok(shape_descriptor_from_hull(mesh, &hull))
}

pub fn shape_descriptor_from_hull(mesh: &TriMesh, hull: &ConvexHull) -> ShapeDescriptor {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in &hull.points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let volume: f64 = hull
        .triangles
        .iter()
        .map(|t| {
            hull.points[t[0]]
                .dot(&hull.points[t[1]].cross(&hull.points[t[2]]))
                / 6.0
        })
        .sum();
    ShapeDescriptor {
        extents: hi - lo,
        volume: volume.abs(),
        centroid_offset: mesh.centroid - (lo + hi) / 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::parse_obj;

    fn unit_cube() -> TriMesh {
        parse_obj(
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
             f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\n\
             f 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n",
            "cube",
        )
        .unwrap()
    }

    fn regular_tetrahedron() -> TriMesh {
        // Vertices of a regular tetrahedron inscribed in a cube.
        let v = vec![
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, -1.0, -1.0),
            Vector3::new(-1.0, 1.0, -1.0),
            Vector3::new(-1.0, -1.0, 1.0),
        ];
        TriMesh::from_parts(v, vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]).unwrap()
    }

    #[test]
    fn cube_has_six_equal_stable_poses() {
        let poses = stable_poses(&unit_cube()).unwrap();
        assert_eq!(poses.len(), 6);
        let mut total = 0.0;
        for sp in &poses {
            assert!((sp.probability - 1.0 / 6.0).abs() < 1e-6);
            total += sp.probability;
        }
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tetrahedron_has_four_equal_stable_poses() {
        let poses = stable_poses(&regular_tetrahedron()).unwrap();
        assert_eq!(poses.len(), 4);
        for sp in &poses {
            assert!((sp.probability - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn resting_height_and_containment() {
        for sp in stable_poses(&unit_cube()).unwrap() {
            let mesh = unit_cube();
            let min_z = mesh
                .vertices
                .iter()
                .map(|v| sp.pose.transform_point(v).z)
                .fold(f64::INFINITY, f64::min);
            assert!(min_z.abs() < 1e-6);
            // Support normal maps to straight down.
            let world_n = sp.pose.rotation * sp.support_normal;
            assert!((world_n - -Vector3::z()).norm() < 1e-9);
        }
    }

    #[test]
    fn candidate_counts() {
        let mesh = unit_cube();
        let p0 = Pose::from_translation(0.1, -0.2, 0.5);
        let goal = Pose::from_translation(0.4, 0.3, 0.5);
        let cs = candidate_set(&mesh, &p0, &goal, 5, 6).unwrap();
        assert_eq!(cs.candidates.len(), 31);
        assert_eq!(cs.goal_index, 30);

        let cs = candidate_set(&mesh, &p0, &goal, 1, 1).unwrap();
        assert_eq!(cs.candidates.len(), 2);

        // m beyond the number of stable poses is clamped: 6 poses, m=6, n=4.
        let cs = candidate_set(&mesh, &p0, &goal, 6, 4).unwrap();
        assert_eq!(cs.candidates.len(), 25);
        for (i, c) in cs.candidates.iter().enumerate() {
            if i != cs.goal_index {
                assert!((c.translation.x - 0.1).abs() < 1e-12);
                assert!((c.translation.y - -0.2).abs() < 1e-12);
                // Unit cube rests with its center 0.5 above the table.
                let center = c.transform_point(&Vector3::new(0.5, 0.5, 0.5));
                assert!((center.z - 0.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rotation_augmentation_preserves_resting_height() {
        let mesh = unit_cube();
        let cs = candidate_set(&mesh, &Pose::identity(), &Pose::identity(), 5, 6).unwrap();
        for (i, c) in cs.candidates.iter().enumerate() {
            if i == cs.goal_index {
                continue;
            }
            let min_z = mesh
                .vertices
                .iter()
                .map(|v| c.transform_point(v).z)
                .fold(f64::INFINITY, f64::min);
            assert!(min_z.abs() < 1e-9);
        }
    }

    #[test]
    fn cube_descriptor() {
        let d = shape_descriptor(&unit_cube()).unwrap();
        assert!((d.extents - Vector3::new(1.0, 1.0, 1.0)).norm() < 1e-12);
        assert!((d.volume - 1.0).abs() < 1e-12);
        assert!(d.centroid_offset.norm() < 1e-12);
    }
}
