//! Serial 6-DoF arm with parallel-jaw gripper: model file, forward
//! kinematics and damped-least-squares inverse kinematics.

use crate::effort::Effort;
use crate::error::{Error, Result};
use crate::se3::Pose;
use crate::shapes::Capsule;
use nalgebra::{Matrix6, UnitQuaternion, Unit, Vector3, Vector6};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const NUM_JOINTS: usize = 6;

/// IK acceptance tolerances.
pub const IK_TRANS_TOL: f64 = 1e-3;
pub const IK_ROT_TOL: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointConfig(pub [f64; NUM_JOINTS]);

impl JointConfig {
    pub fn zeros() -> Self {
        JointConfig([0.0; NUM_JOINTS])
    }

    pub fn distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn lerp(&self, other: &JointConfig, t: f64) -> JointConfig {
        let mut q = [0.0; NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            q[i] = self.0[i] + (other.0[i] - self.0[i]) * t;
        }
        JointConfig(q)
    }
}

#[derive(Clone, Debug)]
pub struct Joint {
    pub axis: Unit<Vector3<f64>>,
    /// Fixed transform applied before this joint's rotation.
    pub offset: Pose,
    pub limits: (f64, f64),
    /// Collision capsule in the frame that follows this joint.
    pub capsule: Capsule,
}

#[derive(Clone, Debug)]
pub struct Gripper {
    pub max_opening: f64,
    pub finger_length: f64,
    pub finger_radius: f64,
    pub palm_radius: f64,
    pub palm_halfwidth: f64,
}

impl Gripper {
    /// Gripper collision capsules in the tool frame. The fingers are modeled
    /// fully open; closing is abstract. TCP is the origin, +z the approach.
    pub fn capsules(&self) -> Vec<Capsule> {
        let half_open = self.max_opening / 2.0;
        let palm_z = -self.finger_length - self.palm_radius;
        vec![
            Capsule::new(
                Vector3::new(-self.palm_halfwidth, 0.0, palm_z),
                Vector3::new(self.palm_halfwidth, 0.0, palm_z),
                self.palm_radius,
            ),
            Capsule::new(
                Vector3::new(-half_open, 0.0, -self.finger_length),
                Vector3::new(-half_open, 0.0, 0.0),
                self.finger_radius,
            ),
            Capsule::new(
                Vector3::new(half_open, 0.0, -self.finger_length),
                Vector3::new(half_open, 0.0, 0.0),
                self.finger_radius,
            ),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct ArmModel {
    pub base: Pose,
    pub joints: Vec<Joint>,
    pub tool: Pose,
    pub gripper: Gripper,
}

impl ArmModel {
    pub fn default_model() -> ArmModel {
        parse_arm_toml(include_str!("../assets/arm6.toml"), "<builtin arm6>")
            .expect("builtin arm model parses")
    }

    pub fn check_limits(&self, q: &JointConfig) -> Result<()> {
        for (i, joint) in self.joints.iter().enumerate() {
            if q.0[i] < joint.limits.0 || q.0[i] > joint.limits.1 {
                return Err(Error::JointLimit {
                    joint: i,
                    value: q.0[i],
                    lo: joint.limits.0,
                    hi: joint.limits.1,
                });
            }
        }
        Ok(())
    }

    pub fn clamp_to_limits(&self, q: &mut JointConfig) {
        for (i, joint) in self.joints.iter().enumerate() {
            q.0[i] = q.0[i].clamp(joint.limits.0, joint.limits.1);
        }
    }

    pub fn sample_config(&self, rng: &mut impl Rng) -> JointConfig {
        let mut q = [0.0; NUM_JOINTS];
        for (i, joint) in self.joints.iter().enumerate() {
            q[i] = rng.gen_range(joint.limits.0..=joint.limits.1);
        }
        JointConfig(q)
    }

    /// Frame poses after each joint, plus the tool frame last.
    pub fn frames(&self, q: &JointConfig) -> Vec<Pose> {
        let mut frames = Vec::with_capacity(NUM_JOINTS + 1);
        let mut cur = self.base;
        for (i, joint) in self.joints.iter().enumerate() {
            let rot = Pose::from_rotation(UnitQuaternion::from_axis_angle(&joint.axis, q.0[i]));
            cur = cur.compose(&joint.offset).compose(&rot);
            frames.push(cur);
        }
        frames.push(cur.compose(&self.tool));
        frames
    }

    /// End-effector (TCP) pose.
    pub fn fk(&self, q: &JointConfig) -> Pose {
        let mut cur = self.base;
        for (i, joint) in self.joints.iter().enumerate() {
            let rot = Pose::from_rotation(UnitQuaternion::from_axis_angle(&joint.axis, q.0[i]));
            cur = cur.compose(&joint.offset).compose(&rot);
        }
        cur.compose(&self.tool)
    }

    pub fn fk_checked(&self, q: &JointConfig) -> Result<Pose> {
        self.check_limits(q)?;
        Ok(self.fk(q))
    }

    /// World-space collision capsules at configuration `q`, tagged with a
    /// segment id used for the adjacent-link self-collision exclusion.
    pub fn collision_capsules(&self, q: &JointConfig) -> Vec<(usize, Capsule)> {
        let frames = self.frames(q);
        let mut out = Vec::with_capacity(NUM_JOINTS + 3);
        for (i, joint) in self.joints.iter().enumerate() {
            out.push((i, joint.capsule.transformed(&frames[i])));
        }
        let tool_frame = &frames[NUM_JOINTS];
        for c in self.gripper.capsules() {
            out.push((NUM_JOINTS, c.transformed(tool_frame)));
        }
        out
    }

    /// Gripper-only capsules posed at an end-effector pose.
    pub fn gripper_capsules_at(&self, grasp: &Pose) -> Vec<Capsule> {
        self.gripper
            .capsules()
            .into_iter()
            .map(|c| c.transformed(grasp))
            .collect()
    }
}

/// Translation and rotation-vector error taking `cur` to `target`.
pub fn pose_error(cur: &Pose, target: &Pose) -> Vector6<f64> {
    let dt = target.translation - cur.translation;
    let dq = target.rotation * cur.rotation.inverse();
    let rv = dq.scaled_axis();
    Vector6::new(dt.x, dt.y, dt.z, rv.x, rv.y, rv.z)
}

const IK_ITERATIONS: usize = 200;
const IK_DAMPING: f64 = 1e-2;
const IK_STEP_CLAMP: f64 = 0.5;
const IK_FD_STEP: f64 = 1e-6;
const IK_ERROR_CAP: f64 = 0.3;

/// Damped least squares on a numerical Jacobian, seeded from `initial` and
/// then up to `seed_count - 1` random restarts. Returns a configuration whose
/// FK is within `IK_TRANS_TOL` / `IK_ROT_TOL` of the target, or `None`.
pub fn ik(
    arm: &ArmModel,
    target: &Pose,
    initial: &JointConfig,
    seed_count: usize,
    rng: &mut impl Rng,
    effort: &Effort,
) -> Option<JointConfig> {
    // Cheap reachability screen: beyond the kinematic sphere no seed helps.
    let mut total_len = self_reach(arm);
    total_len += IK_TRANS_TOL;
    if (target.translation - arm.base.translation).norm() > total_len {
        return None;
    }
    for attempt in 0..seed_count.max(1) {
        // Deterministic seed ladder before random restarts: the caller's
        // seed, then the ready posture (a good basin for downward reaches).
        let seed = match attempt {
            0 => *initial,
            1 => home_config(),
            _ => arm.sample_config(rng),
        };
        if let Some(q) = dls_solve(arm, target, seed, effort) {
            return Some(q);
        }
    }
    None
}

fn self_reach(arm: &ArmModel) -> f64 {
    arm.joints
        .iter()
        .map(|j| j.offset.translation.norm())
        .sum::<f64>()
        + arm.tool.translation.norm()
}

fn dls_solve(
    arm: &ArmModel,
    target: &Pose,
    mut q: JointConfig,
    effort: &Effort,
) -> Option<JointConfig> {
    arm.clamp_to_limits(&mut q);
    for _ in 0..IK_ITERATIONS {
        effort.add_ik_iterations(1);
        let cur = arm.fk(&q);
        let mut e = pose_error(&cur, target);
        let t_err = e.fixed_rows::<3>(0).norm();
        let r_err = e.fixed_rows::<3>(3).norm();
        if t_err < IK_TRANS_TOL * 0.5 && r_err < IK_ROT_TOL * 0.5 {
            return Some(q);
        }
        // Track a capped error so the iterate follows a smooth pull toward
        // the target instead of committing to a large mixed step.
        let en = e.norm();
        if en > IK_ERROR_CAP {
            e *= IK_ERROR_CAP / en;
        }
        // Numerical Jacobian, forward differences.
        let mut jac = Matrix6::<f64>::zeros();
        for j in 0..NUM_JOINTS {
            let mut qj = q;
            qj.0[j] += IK_FD_STEP;
            let fj = arm.fk(&qj);
            let dt = (fj.translation - cur.translation) / IK_FD_STEP;
            let dr = (fj.rotation * cur.rotation.inverse()).scaled_axis() / IK_FD_STEP;
            for r in 0..3 {
                jac[(r, j)] = dt[r];
                jac[(r + 3, j)] = dr[r];
            }
        }
        let jjt = jac * jac.transpose() + Matrix6::identity() * (IK_DAMPING * IK_DAMPING);
        let y = jjt.lu().solve(&e)?;
        let mut dq = jac.transpose() * y;
        let n = dq.norm();
        if n > IK_STEP_CLAMP {
            dq *= IK_STEP_CLAMP / n;
        }
        for j in 0..NUM_JOINTS {
            q.0[j] += dq[j];
        }
        arm.clamp_to_limits(&mut q);
        if n < 1e-12 {
            break;
        }
    }
    let e = pose_error(&arm.fk(&q), target);
    if e.fixed_rows::<3>(0).norm() < IK_TRANS_TOL && e.fixed_rows::<3>(3).norm() < IK_ROT_TOL {
        Some(q)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Model file (TOML)

#[derive(Serialize, Deserialize)]
struct CapsuleSpec {
    a: [f64; 3],
    b: [f64; 3],
    radius: f64,
}

#[derive(Serialize, Deserialize)]
struct JointSpec {
    axis: [f64; 3],
    offset: [f64; 7],
    limits: [f64; 2],
    capsule: CapsuleSpec,
}

#[derive(Serialize, Deserialize)]
struct GripperSpec {
    max_opening: f64,
    finger_length: f64,
    finger_radius: f64,
    palm_radius: f64,
    palm_halfwidth: f64,
}

#[derive(Serialize, Deserialize)]
struct ArmSpec {
    base: [f64; 7],
    tool: [f64; 7],
    joints: Vec<JointSpec>,
    gripper: GripperSpec,
}

fn pose_from_7(v: &[f64; 7]) -> Result<Pose> {
    let line = v.map(|x| x.to_string()).join(" ");
    Pose::from_line(&line).ok_or_else(|| Error::Mesh("bad pose array".into()))
}

pub fn parse_arm_toml(text: &str, name: &str) -> Result<ArmModel> {
    let spec: ArmSpec =
        toml::from_str(text).map_err(|e| Error::parse(name, e.to_string()))?;
    if spec.joints.len() != NUM_JOINTS {
        return Err(Error::parse(
            name,
            format!("expected {NUM_JOINTS} joints, found {}", spec.joints.len()),
        ));
    }
    let mut joints = Vec::with_capacity(NUM_JOINTS);
    for (i, j) in spec.joints.iter().enumerate() {
        if j.limits[0] >= j.limits[1] {
            return Err(Error::parse(name, format!("joint {i} limits are not a proper interval")));
        }
        if j.capsule.radius <= 0.0 {
            return Err(Error::parse(name, format!("joint {i} capsule radius must be > 0")));
        }
        joints.push(Joint {
            axis: Unit::new_normalize(Vector3::from(j.axis)),
            offset: pose_from_7(&j.offset)?,
            limits: (j.limits[0], j.limits[1]),
            capsule: Capsule::new(
                Vector3::from(j.capsule.a),
                Vector3::from(j.capsule.b),
                j.capsule.radius,
            ),
        });
    }
    Ok(ArmModel {
        base: pose_from_7(&spec.base)?,
        joints,
        tool: pose_from_7(&spec.tool)?,
        gripper: Gripper {
            max_opening: spec.gripper.max_opening,
            finger_length: spec.gripper.finger_length,
            finger_radius: spec.gripper.finger_radius,
            palm_radius: spec.gripper.palm_radius,
            palm_halfwidth: spec.gripper.palm_halfwidth,
        },
    })
}

pub fn load_arm(path: impl AsRef<Path>) -> Result<ArmModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_arm_toml(&text, &path.display().to_string())
}

/// A ready posture hovering above the table center with the tool pointing
/// down; used as the default start configuration.
pub fn home_config() -> JointConfig {
    JointConfig([0.0, 0.55, 1.05, 0.0, std::f64::consts::PI - 1.6, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_model_parses() {
        let arm = ArmModel::default_model();
        assert_eq!(arm.joints.len(), 6);
        assert!((arm.gripper.max_opening - 0.10).abs() < 1e-12);
    }

    #[test]
    fn zero_config_points_up() {
        // All-zero config stacks the chain vertically above the base.
        let arm = ArmModel::default_model();
        let p = arm.fk(&JointConfig::zeros());
        let total: f64 = arm.joints.iter().map(|j| j.offset.translation.z).sum::<f64>()
            + arm.tool.translation.z;
        assert!((p.translation.x - arm.base.translation.x).abs() < 1e-12);
        assert!((p.translation.z - total).abs() < 1e-12);
        assert!((total - 0.90).abs() < 1e-12);
    }

    #[test]
    fn base_yaw_rotates_home() {
        let arm = ArmModel::default_model();
        let home = home_config();
        let p0 = arm.fk(&home);
        let mut q = home;
        q.0[0] = 1.0;
        let p1 = arm.fk(&q);
        // End effector swings about the base z axis through the base origin.
        let r0 = p0.translation - arm.base.translation;
        let r1 = p1.translation - arm.base.translation;
        assert!((r0.norm() - r1.norm()).abs() < 1e-9);
        assert!((r0.z - r1.z).abs() < 1e-9);
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 1.0);
        assert!(((rot * r0) - r1).norm() < 1e-9);
    }

    #[test]
    fn home_hovers_pointing_down() {
        let arm = ArmModel::default_model();
        let p = arm.fk(&home_config());
        assert!(p.translation.z > 0.15 && p.translation.z < 0.25);
        let approach = p.rotation * Vector3::z();
        assert!((approach - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
    }

    #[test]
    fn ik_round_trips_random_targets() {
        let arm = ArmModel::default_model();
        let effort = Effort::new();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut ok = 0;
        for _ in 0..20 {
            let q = arm.sample_config(&mut rng);
            let target = arm.fk(&q);
            if let Some(sol) = ik(&arm, &target, &home_config(), 8, &mut rng, &effort) {
                let reached = arm.fk(&sol);
                assert!(reached.translation_distance(&target) < IK_TRANS_TOL);
                assert!(reached.rotation_distance(&target) < IK_ROT_TOL);
                ok += 1;
            }
        }
        assert!(ok >= 18, "ik solved only {ok}/20 reachable targets");
    }

    #[test]
    fn ik_rejects_unreachable() {
        let arm = ArmModel::default_model();
        let effort = Effort::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let target = Pose::from_translation(0.0, 0.0, 10.0);
        assert!(ik(&arm, &target, &JointConfig::zeros(), 4, &mut rng, &effort).is_none());
    }

    #[test]
    fn ik_home_target_from_zero_initial() {
        let arm = ArmModel::default_model();
        let effort = Effort::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = arm.fk(&home_config());
        let sol = ik(&arm, &target, &JointConfig::zeros(), 8, &mut rng, &effort).unwrap();
        assert!(arm.fk(&sol).translation_distance(&target) < IK_TRANS_TOL);
        assert!(arm.fk(&sol).rotation_distance(&target) < IK_ROT_TOL);
    }
}
