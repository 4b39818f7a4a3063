//! Analytic antipodal grasp sampling on convex hull face pairs, with a
//! quality score and environment validity filtering. Produces the small
//! prioritized grasp sets the rest of the pipeline enumerates.

use crate::arm::ArmModel;
use crate::effort::Effort;
use crate::hull::{pick_orthonormal, ConvexHull};
use crate::scene::SceneSpec;
use crate::se3::{retarget_grasp, Pose};
use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

/// Maximum angle between a face normal and the antipodal closing line.
pub const FRICTION_HALF_ANGLE: f64 = 15.0 * std::f64::consts::PI / 180.0;
/// Fingertip set-back from the contact midpoint along the approach.
pub const GRASP_STANDOFF: f64 = 0.005;
/// Fingertip depth past the near surface for the edge-grasp variant.
pub const GRASP_DEPTH: f64 = 0.03;
/// Approach directions sampled around the closing axis.
pub const APPROACH_COUNT: usize = 8;
/// Extra finger clearance so an open gripper straddles without contact.
pub const FINGER_CLEARANCE: f64 = 0.002;

pub const DEFAULT_GRASPS_PER_POSE: usize = 16;
pub const DEFAULT_QUALITY_ALPHA: f64 = 0.4;

#[derive(Clone, Copy, Debug)]
pub struct GraspCandidate {
    /// Gripper (TCP) pose in the world, for the object at the queried pose.
    pub pose: Pose,
    pub quality: f64,
    pub width: f64,
}

/// Enumerate antipodal hull face pairs at object pose `p`, score them, filter
/// by gripper clearance against the scene, and return the top-k candidates
/// with quality above `alpha`, sorted by descending quality. An empty result
/// signals grasp infeasibility at this pose.
pub fn sample_grasps(
    hull: &ConvexHull,
    p: &Pose,
    arm: &ArmModel,
    scene: &SceneSpec,
    k: usize,
    alpha: f64,
    effort: &Effort,
) -> Vec<GraspCandidate> {
    assert!(k >= 1, "k must be at least 1");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    let scene_at_p = scene.with_target_pose(p);
    let max_width =
        arm.gripper.max_opening - 2.0 * (arm.gripper.finger_radius + FINGER_CLEARANCE);
    let mut out: Vec<GraspCandidate> = Vec::new();
    for i in 0..hull.facets.len() {
        for j in 0..hull.facets.len() {
            if i == j {
                continue;
            }
            let (ni, nj) = (hull.facets[i].normal, hull.facets[j].normal);
            let axis = ni - nj;
            let axis_norm = axis.norm();
            if axis_norm < 1e-9 {
                continue;
            }
            let a = axis / axis_norm;
            let cos1 = ni.dot(&a);
            let cos2 = (-nj).dot(&a);
            if cos1 < FRICTION_HALF_ANGLE.cos() || cos2 < FRICTION_HALF_ANGLE.cos() {
                continue;
            }
            let ci = facet_center(hull, i);
            let cj = facet_center(hull, j);
            let width = (ci - cj).dot(&a);
            if width <= 1e-6 || width > max_width {
                continue;
            }
            let quality =
                (cos1 * cos2 * (1.0 - width / arm.gripper.max_opening * 0.5)).clamp(0.0, 1.0);
            if quality <= alpha {
                continue;
            }
            let mid = (ci + cj) / 2.0;
            // Extent of the object along each approach direction decides the
            // edge-grasp depth.
            let u = pick_orthonormal(&a);
            let v = a.cross(&u);
            for step in 0..APPROACH_COUNT {
                let phi = 2.0 * std::f64::consts::PI * step as f64 / APPROACH_COUNT as f64;
                let approach = u * phi.cos() + v * phi.sin();
                let t_near = hull
                    .points
                    .iter()
                    .map(|q| (q - mid).dot(&approach))
                    .fold(f64::INFINITY, f64::min);
                let t_far = hull
                    .points
                    .iter()
                    .map(|q| (q - mid).dot(&approach))
                    .fold(f64::NEG_INFINITY, f64::max);
                let extent = t_far - t_near;
                let depths = [
                    -GRASP_STANDOFF,
                    t_near + (GRASP_DEPTH).min(0.8 * extent) - GRASP_STANDOFF,
                ];
                for (di, depth) in depths.iter().enumerate() {
                    if di == 1 && (depths[1] - depths[0]).abs() < 0.005 {
                        continue;
                    }
                    let tcp_local = mid + approach * *depth;
                    let rot_local = grasp_rotation(&a, &approach);
                    let grasp_local = Pose::new(tcp_local, rot_local);
                    let grasp_world = p.compose(&grasp_local);
                    if !scene_at_p.gripper_collision_free(arm, &grasp_world, effort) {
                        continue;
                    }
                    out.push(GraspCandidate {
                        pose: grasp_world,
                        quality,
                        width,
                    });
                }
            }
        }
    }
    out.sort_by(|x, y| y.quality.total_cmp(&x.quality));
    out.truncate(k);
    out
}

fn facet_center(hull: &ConvexHull, facet: usize) -> Vector3<f64> {
    let lv = &hull.facets[facet].loop_vertices;
    lv.iter().map(|&v| hull.points[v]).sum::<Vector3<f64>>() / lv.len() as f64
}

/// Gripper orientation with closing axis `a` (gripper x) and approach
/// direction `approach` (gripper z, pointing at the object).
fn grasp_rotation(a: &Vector3<f64>, approach: &Vector3<f64>) -> UnitQuaternion<f64> {
    let x = *a;
    let z = *approach;
    let y = z.cross(&x);
    let m = Matrix3::from_columns(&[x, y, z]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// A start-grasp / regrasp combination with its validity under the four
/// clearance checks (source poses and retargeted poses).
#[derive(Clone, Copy, Debug)]
pub struct GraspPair {
    pub g_0: GraspCandidate,
    pub g_i: GraspCandidate,
    pub valid: bool,
    pub quality_product: f64,
}

/// Cross the two grasp sets and flag each pair's validity: `g_0` must remain
/// clearance-free retargeted to `p_i`, and `g_i` retargeted to `p_goal`.
/// Valid pairs come first, ordered by descending quality product.
pub fn grasp_pairs(
    g0s: &[GraspCandidate],
    gis: &[GraspCandidate],
    p_0: &Pose,
    p_i: &Pose,
    p_goal: &Pose,
    arm: &ArmModel,
    scene: &SceneSpec,
    effort: &Effort,
) -> Vec<GraspPair> {
    let scene_p0 = scene.with_target_pose(p_0);
    let scene_pi = scene.with_target_pose(p_i);
    let scene_pt = scene.with_target_pose(p_goal);
    // Per-grasp checks factored out of the pair loop; pair validity is their
    // conjunction.
    let ok_0: Vec<bool> = g0s
        .iter()
        .map(|g| {
            scene_p0.gripper_collision_free(arm, &g.pose, effort)
                && scene_pi.gripper_collision_free(
                    arm,
                    &retarget_grasp(&g.pose, p_0, p_i),
                    effort,
                )
        })
        .collect();
    let ok_i: Vec<bool> = gis
        .iter()
        .map(|g| {
            scene_pi.gripper_collision_free(arm, &g.pose, effort)
                && scene_pt.gripper_collision_free(
                    arm,
                    &retarget_grasp(&g.pose, p_i, p_goal),
                    effort,
                )
        })
        .collect();
    let mut pairs = Vec::with_capacity(g0s.len() * gis.len());
    for (i0, g_0) in g0s.iter().enumerate() {
        for (ii, g_i) in gis.iter().enumerate() {
            pairs.push(GraspPair {
                g_0: *g_0,
                g_i: *g_i,
                valid: ok_0[i0] && ok_i[ii],
                quality_product: g_0.quality * g_i.quality,
            });
        }
    }
    pairs.sort_by(|a, b| {
        b.valid
            .cmp(&a.valid)
            .then(b.quality_product.total_cmp(&a.quality_product))
    });
    pairs
}

/// Direct-manipulation grasps: `g_0` candidates flagged by whether their
/// retarget to the goal pose stays clearance-free.
pub fn direct_grasps(
    g0s: &[GraspCandidate],
    p_0: &Pose,
    p_goal: &Pose,
    arm: &ArmModel,
    scene: &SceneSpec,
    effort: &Effort,
) -> Vec<(GraspCandidate, bool)> {
    let scene_pt = scene.with_target_pose(p_goal);
    g0s.iter()
        .map(|g| {
            let ok = scene_pt.gripper_collision_free(
                arm,
                &retarget_grasp(&g.pose, p_0, p_goal),
                effort,
            );
            (*g, ok)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::parse_obj;
    use crate::scene::bare_scene;
    use crate::TriMesh;

    fn unit_cube() -> TriMesh {
        parse_obj(
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
             f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\n\
             f 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n",
            "cube",
        )
        .unwrap()
    }

    fn wide_gripper_arm() -> ArmModel {
        let mut arm = ArmModel::default_model();
        arm.gripper.max_opening = 1.2;
        arm.gripper.finger_length = 0.3;
        arm
    }

    #[test]
    fn cube_quality_matches_formula() {
        let mesh = unit_cube();
        let hull = ConvexHull::from_points(&mesh.vertices).unwrap();
        // Float the cube well above the table so every axis pair is
        // approachable; the formula is the point here.
        let p = Pose::from_translation(-0.5, -0.5, 1.0);
        let arm = wide_gripper_arm();
        let scene = bare_scene(mesh, p, p).unwrap();
        let effort = Effort::new();
        let grasps = sample_grasps(&hull, &p, &arm, &scene, 64, 0.4, &effort);
        assert!(!grasps.is_empty());
        let expect = 1.0 - 1.0 / 1.2 * 0.5;
        for g in &grasps {
            assert!((g.quality - expect).abs() < 1e-9);
            assert!((g.width - 1.0).abs() < 1e-9);
            assert!(g.quality > 0.4);
        }
    }

    #[test]
    fn threshold_above_max_quality_yields_empty() {
        let mesh = unit_cube();
        let hull = ConvexHull::from_points(&mesh.vertices).unwrap();
        let p = Pose::from_translation(-0.5, -0.5, 1.0);
        let arm = wide_gripper_arm();
        let scene = bare_scene(mesh, p, p).unwrap();
        let effort = Effort::new();
        let grasps = sample_grasps(&hull, &p, &arm, &scene, 16, 0.99, &effort);
        assert!(grasps.is_empty());
    }

    #[test]
    fn table_blocks_bottom_approaches() {
        // A 6 cm cube resting on the table: grasps whose closing axis is
        // vertical need a finger under the object and must be dropped.
        let mesh = parse_obj(
            "v -0.03 -0.03 0\nv 0.03 -0.03 0\nv 0.03 0.03 0\nv -0.03 0.03 0\n\
             v -0.03 -0.03 0.06\nv 0.03 -0.03 0.06\nv 0.03 0.03 0.06\nv -0.03 0.03 0.06\n\
             f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\n\
             f 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n",
            "box6",
        )
        .unwrap();
        let hull = ConvexHull::from_points(&mesh.vertices).unwrap();
        let p = Pose::from_translation(0.0, 0.1, 0.0);
        let arm = ArmModel::default_model();
        let scene = bare_scene(mesh, p, p).unwrap();
        let effort = Effort::new();
        let grasps = sample_grasps(&hull, &p, &arm, &scene, 64, 0.4, &effort);
        assert!(!grasps.is_empty());
        for g in &grasps {
            // No finger may dip below the table.
            for c in arm.gripper_capsules_at(&g.pose) {
                assert!(c.a.z.min(c.b.z) - c.radius >= 0.0);
            }
            // Vertical closing axes are impossible on the table.
            let closing = g.pose.rotation * Vector3::x();
            assert!(closing.z.abs() < 0.5, "closing axis {closing:?}");
        }
        // Prioritization invariant.
        for w in grasps.windows(2) {
            assert!(w[0].quality >= w[1].quality);
        }
    }

    #[test]
    fn retarget_keeps_relative_transform_in_pairs() {
        let mesh = unit_cube();
        let hull = ConvexHull::from_points(&mesh.vertices).unwrap();
        let p0 = Pose::from_translation(-0.5, -0.5, 1.0);
        let arm = wide_gripper_arm();
        let scene = bare_scene(mesh, p0, p0).unwrap();
        let effort = Effort::new();
        let g0s = sample_grasps(&hull, &p0, &arm, &scene, 4, 0.4, &effort);
        let pi = Pose::from_translation(-0.3, -0.5, 1.0);
        let gis = sample_grasps(&hull, &pi, &arm, &scene, 4, 0.4, &effort);
        let pairs = grasp_pairs(&g0s, &gis, &p0, &pi, &p0, &arm, &scene, &effort);
        assert_eq!(pairs.len(), g0s.len() * gis.len());
        let valid_count = pairs.iter().filter(|p| p.valid).count();
        assert!(valid_count > 0);
        // Valid pairs precede invalid and are quality-sorted.
        let mut seen_invalid = false;
        let mut last_q = f64::INFINITY;
        for p in &pairs {
            if p.valid {
                assert!(!seen_invalid);
                assert!(p.quality_product <= last_q + 1e-12);
                last_q = p.quality_product;
            } else {
                seen_invalid = true;
            }
        }
    }

    #[test]
    fn empty_sets_give_empty_pairs() {
        let arm = ArmModel::default_model();
        let mesh = unit_cube();
        let p = Pose::identity();
        let scene = bare_scene(mesh, p, p).unwrap();
        let effort = Effort::new();
        let pairs = grasp_pairs(&[], &[], &p, &p, &p, &arm, &scene, &effort);
        assert!(pairs.is_empty());
    }
}
