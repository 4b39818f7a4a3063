//! Joint-space RRT with shortcut smoothing and fixed-interval resampling.
//!
//! Path cost is 0.1 per resampled waypoint on success and exactly 20 on
//! failure, so cost is proportional to path length at the 0.05 rad sampling
//! interval. Budgets map to deterministic iteration caps (see [`crate::effort`]).

use crate::arm::{ik, ArmModel, JointConfig};
use crate::effort::{derive_seed, Effort, RRT_ITERATIONS_PER_SECOND};
use crate::scene::SceneSpec;
use crate::se3::Pose;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const FAILURE_COST: f64 = 20.0;
pub const WAYPOINT_COST: f64 = 0.1;
pub const RESAMPLE_INTERVAL: f64 = 0.05;
pub const RRT_STEP: f64 = 0.2;
pub const RRT_GOAL_BIAS: f64 = 0.1;
pub const EDGE_RESOLUTION: f64 = 0.05;
pub const SHORTCUT_ITERATIONS: usize = 100;
pub const DEFAULT_SEGMENT_BUDGET: f64 = 2.0;
pub const DEFAULT_IK_RESTARTS: usize = 8;

#[derive(Clone, Debug)]
pub struct PathResult {
    pub success: bool,
    pub waypoints: Vec<JointConfig>,
    pub cost: f64,
    /// Deterministic effort seconds spent on this query.
    pub wall_time: f64,
}

impl PathResult {
    fn failure(effort_secs: f64) -> PathResult {
        PathResult {
            success: false,
            waypoints: Vec::new(),
            cost: FAILURE_COST,
            wall_time: effort_secs,
        }
    }
}

/// Plan between end-effector poses. IK failures and exhausted budgets are
/// failure results (cost 20), not errors.
pub fn plan(
    arm: &ArmModel,
    scene: &SceneSpec,
    g_i: &Pose,
    g_j: &Pose,
    budget: f64,
    seed: u64,
    effort: &Effort,
) -> PathResult {
    let local = Effort::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = (|| {
        let q_start = match ik_collision_free(arm, scene, g_i, &scene.home, &mut rng, &local) {
            Some(q) => q,
            None => return PathResult::failure(local.seconds()),
        };
        let q_goal = match ik_collision_free(arm, scene, g_j, &q_start, &mut rng, &local) {
            Some(q) => q,
            None => return PathResult::failure(local.seconds()),
        };
        plan_configs_inner(arm, scene, &q_start, &q_goal, budget, &mut rng, &local)
    })();
    effort.absorb(&local);
    res
}

/// Config-level entry point (used directly by tests and chain execution).
pub fn plan_configs(
    arm: &ArmModel,
    scene: &SceneSpec,
    q_start: &JointConfig,
    q_goal: &JointConfig,
    budget: f64,
    seed: u64,
    effort: &Effort,
) -> PathResult {
    let local = Effort::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = plan_configs_inner(arm, scene, q_start, q_goal, budget, &mut rng, &local);
    effort.absorb(&local);
    res
}

fn plan_configs_inner(
    arm: &ArmModel,
    scene: &SceneSpec,
    q_start: &JointConfig,
    q_goal: &JointConfig,
    budget: f64,
    rng: &mut ChaCha8Rng,
    effort: &Effort,
) -> PathResult {
    if config_collides(arm, scene, q_start, effort)
        || config_collides(arm, scene, q_goal, effort)
    {
        return PathResult::failure(effort.seconds());
    }
    let raw = if edge_free(arm, scene, q_start, q_goal, effort) {
        vec![*q_start, *q_goal]
    } else {
        let max_iters = (budget * RRT_ITERATIONS_PER_SECOND).max(1.0) as usize;
        match grow_rrt(arm, scene, q_start, q_goal, max_iters, rng, effort) {
            Some(path) => path,
            None => return PathResult::failure(effort.seconds()),
        }
    };
    let smoothed = shortcut(arm, scene, raw, rng, effort);
    let waypoints = resample(&smoothed);
    for q in &waypoints {
        if config_collides(arm, scene, q, effort) {
            // A resolution-gap collision surfaced at a resampled point.
            return PathResult::failure(effort.seconds());
        }
    }
    PathResult {
        success: true,
        cost: WAYPOINT_COST * waypoints.len() as f64,
        waypoints,
        wall_time: effort.seconds(),
    }
}

fn config_collides(arm: &ArmModel, scene: &SceneSpec, q: &JointConfig, effort: &Effort) -> bool {
    effort.add_fk_evals(1);
    scene.arm_collides(arm, q, effort)
}

fn edge_free(
    arm: &ArmModel,
    scene: &SceneSpec,
    a: &JointConfig,
    b: &JointConfig,
    effort: &Effort,
) -> bool {
    let d = a.distance(b);
    let steps = (d / EDGE_RESOLUTION).ceil() as usize;
    for i in 1..=steps {
        let q = a.lerp(b, i as f64 / steps as f64);
        if config_collides(arm, scene, &q, effort) {
            return false;
        }
    }
    true
}

fn grow_rrt(
    arm: &ArmModel,
    scene: &SceneSpec,
    q_start: &JointConfig,
    q_goal: &JointConfig,
    max_iters: usize,
    rng: &mut ChaCha8Rng,
    effort: &Effort,
) -> Option<Vec<JointConfig>> {
    let mut nodes: Vec<(JointConfig, usize)> = vec![(*q_start, usize::MAX)];
    for _ in 0..max_iters {
        let sample = if rng.gen::<f64>() < RRT_GOAL_BIAS {
            *q_goal
        } else {
            arm.sample_config(rng)
        };
        let (nearest, _) = nodes
            .iter()
            .enumerate()
            .map(|(i, (q, _))| (i, q.distance(&sample)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let from = nodes[nearest].0;
        let d = from.distance(&sample);
        if d < 1e-9 {
            continue;
        }
        let stepped = if d <= RRT_STEP {
            sample
        } else {
            from.lerp(&sample, RRT_STEP / d)
        };
        if !edge_free(arm, scene, &from, &stepped, effort) {
            continue;
        }
        nodes.push((stepped, nearest));
        let new_idx = nodes.len() - 1;
        if stepped.distance(q_goal) <= RRT_STEP
            && edge_free(arm, scene, &stepped, q_goal, effort)
        {
            nodes.push((*q_goal, new_idx));
            let mut path = Vec::new();
            let mut cur = nodes.len() - 1;
            while cur != usize::MAX {
                path.push(nodes[cur].0);
                cur = nodes[cur].1;
            }
            path.reverse();
            return Some(path);
        }
    }
    None
}

fn shortcut(
    arm: &ArmModel,
    scene: &SceneSpec,
    mut path: Vec<JointConfig>,
    rng: &mut ChaCha8Rng,
    effort: &Effort,
) -> Vec<JointConfig> {
    for _ in 0..SHORTCUT_ITERATIONS {
        if path.len() < 3 {
            break;
        }
        let i = rng.gen_range(0..path.len() - 2);
        let j = rng.gen_range(i + 2..path.len());
        if edge_free(arm, scene, &path[i], &path[j], effort) {
            path.drain(i + 1..j);
        }
    }
    path
}

/// Resample at fixed joint-space arc-length interval. A path of length L
/// yields ceil(L / interval) + 1 waypoints; degenerate paths yield 2.
fn resample(path: &[JointConfig]) -> Vec<JointConfig> {
    let total: f64 = path.windows(2).map(|w| w[0].distance(&w[1])).sum();
    if total < 1e-12 {
        return vec![path[0], *path.last().unwrap()];
    }
    let n_seg = (total / RESAMPLE_INTERVAL).ceil() as usize;
    let mut out = Vec::with_capacity(n_seg + 1);
    let mut cursor = 0usize;
    let mut seg_start_arc = 0.0;
    let mut seg_len = path[0].distance(&path[1]);
    for k in 0..=n_seg {
        let target = total * k as f64 / n_seg as f64;
        while target > seg_start_arc + seg_len + 1e-12 && cursor + 2 < path.len() {
            seg_start_arc += seg_len;
            cursor += 1;
            seg_len = path[cursor].distance(&path[cursor + 1]);
        }
        let t = if seg_len < 1e-12 {
            0.0
        } else {
            ((target - seg_start_arc) / seg_len).clamp(0.0, 1.0)
        };
        out.push(path[cursor].lerp(&path[cursor + 1], t));
    }
    out
}

fn ik_collision_free(
    arm: &ArmModel,
    scene: &SceneSpec,
    target: &Pose,
    initial: &JointConfig,
    rng: &mut ChaCha8Rng,
    effort: &Effort,
) -> Option<JointConfig> {
    // Try a few IK solutions until one is collision-free.
    let mut seed = *initial;
    for _ in 0..3 {
        let q = ik(arm, target, &seed, DEFAULT_IK_RESTARTS, rng, effort)?;
        if !config_collides(arm, scene, &q, effort) {
            return Some(q);
        }
        seed = arm.sample_config(rng);
    }
    None
}

// ---------------------------------------------------------------------------
// Segment chains

/// One leg of a manipulation chain between end-effector poses; `carry` marks
/// the object rigidly attached for this leg.
#[derive(Clone, Copy, Debug)]
pub struct ChainSegment {
    pub start: Pose,
    pub goal: Pose,
    pub carry: bool,
}

#[derive(Clone, Debug)]
pub struct ChainResult {
    pub success: bool,
    pub total_cost: f64,
    pub segments: Vec<PathResult>,
}

/// Plan each segment in order, toggling the attachment per carry flag and
/// tracking the object pose across carries. Stops at the first failure;
/// unplanned segments are charged the failure cost.
pub fn plan_segment_chain(
    arm: &ArmModel,
    scene: &SceneSpec,
    segments: &[ChainSegment],
    budget_per_segment: f64,
    seed: u64,
    effort: &Effort,
) -> ChainResult {
    assert!(!segments.is_empty(), "segment chain must be nonempty");
    let mut object_pose = scene.target_pose();
    let mut results: Vec<PathResult> = Vec::with_capacity(segments.len());
    let mut success = true;
    for (i, seg) in segments.iter().enumerate() {
        if !success {
            results.push(PathResult::failure(0.0));
            continue;
        }
        let staged = {
            let moved = scene.with_target_pose(&object_pose);
            if seg.carry {
                let grasp_to_object = seg.start.inverse().compose(&object_pose);
                moved.with_attachment(grasp_to_object)
            } else {
                moved.detached()
            }
        };
        let seg_seed = derive_seed(seed, &[i as u64]);
        let r = plan(
            arm,
            &staged,
            &seg.start,
            &seg.goal,
            budget_per_segment,
            seg_seed,
            effort,
        );
        if r.success {
            if seg.carry {
                object_pose = seg
                    .goal
                    .compose(&seg.start.inverse())
                    .compose(&object_pose);
            }
        } else {
            success = false;
        }
        results.push(r);
    }
    ChainResult {
        success,
        total_cost: results.iter().map(|r| r.cost).sum(),
        segments: results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::home_config;
    use crate::mesh::parse_obj;
    use crate::scene::bare_scene;
    use crate::TriMesh;

    fn far_box() -> TriMesh {
        parse_obj(
            "v 0.25 0.33 0\nv 0.31 0.33 0\nv 0.31 0.39 0\nv 0.25 0.39 0\n\
             v 0.25 0.33 0.06\nv 0.31 0.33 0.06\nv 0.31 0.39 0.06\nv 0.25 0.39 0.06\n\
             f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\n\
             f 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n",
            "farbox",
        )
        .unwrap()
    }

    fn empty_scene() -> SceneSpec {
        bare_scene(far_box(), Pose::identity(), Pose::identity()).unwrap()
    }

    #[test]
    fn degenerate_query_costs_two_waypoints() {
        let arm = ArmModel::default_model();
        let scene = empty_scene();
        let effort = Effort::new();
        let g = arm.fk(&home_config());
        let r = plan(&arm, &scene, &g, &g, 1.0, 7, &effort);
        assert!(r.success);
        assert_eq!(r.waypoints.len(), 2);
        assert!((r.cost - 0.2).abs() < 1e-12);
    }

    #[test]
    fn straight_line_cost_matches_arc_length() {
        let arm = ArmModel::default_model();
        let scene = empty_scene();
        let effort = Effort::new();
        // 1.8 rad straight joint-space motion in free space.
        let q0 = home_config();
        let mut q1 = q0;
        q1.0[0] += 1.8;
        let r = plan_configs(&arm, &scene, &q0, &q1, 1.0, 11, &effort);
        assert!(r.success);
        // ceil(1.8 / 0.05) + 1 = 37 waypoints -> cost 3.7, one interval slack.
        assert!((r.cost - 3.7).abs() < 0.1 + 1e-9, "cost {}", r.cost);
        for w in r.waypoints.windows(2) {
            assert!(w[0].distance(&w[1]) <= RESAMPLE_INTERVAL + 1e-9);
        }
    }

    #[test]
    fn unreachable_goal_fails_with_cost_20() {
        let arm = ArmModel::default_model();
        let scene = empty_scene();
        let effort = Effort::new();
        let g0 = arm.fk(&home_config());
        let g1 = Pose::from_translation(0.0, 0.0, 10.0);
        let r = plan(&arm, &scene, &g0, &g1, 0.2, 3, &effort);
        assert!(!r.success);
        assert_eq!(r.cost, FAILURE_COST);
    }

    #[test]
    fn plan_is_deterministic() {
        let arm = ArmModel::default_model();
        let scene = empty_scene();
        let g0 = arm.fk(&home_config());
        let g1 = Pose::new(
            nalgebra::Vector3::new(0.15, 0.2, 0.08),
            g0.rotation,
        );
        let a = plan(&arm, &scene, &g0, &g1, 1.0, 99, &Effort::new());
        let b = plan(&arm, &scene, &g0, &g1, 1.0, 99, &Effort::new());
        assert_eq!(a.success, b.success);
        assert_eq!(a.cost, b.cost);
        assert_eq!(a.waypoints.len(), b.waypoints.len());
        for (x, y) in a.waypoints.iter().zip(b.waypoints.iter()) {
            assert_eq!(x.0, y.0);
        }
    }

    #[test]
    fn chain_early_abort_charges_remaining() {
        let arm = ArmModel::default_model();
        let scene = empty_scene();
        let effort = Effort::new();
        let g0 = arm.fk(&home_config());
        let unreachable = Pose::from_translation(0.0, 0.0, 10.0);
        let segs = [
            ChainSegment { start: g0, goal: unreachable, carry: false },
            ChainSegment { start: unreachable, goal: g0, carry: true },
        ];
        let r = plan_segment_chain(&arm, &scene, &segs, 0.2, 1, &effort);
        assert!(!r.success);
        assert_eq!(r.segments.len(), 2);
        assert!(r.total_cost >= 2.0 * FAILURE_COST - 1e-9);
    }
}
