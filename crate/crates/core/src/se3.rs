//! Rigid-body poses, composition, grasp retargeting and the 6-dim vector
//! encoding consumed by the learned models.

use nalgebra::{UnitQuaternion, Vector3};

/// A rigid transform in SE(3): rotation followed by translation.
///
/// The quaternion is renormalized after every operation so that norm drift
/// stays below 1e-9 even over long chains of compositions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Pose {
            translation,
            rotation: renormalize(rotation),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose {
            translation: Vector3::new(x, y, z),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Pose::new(Vector3::zeros(), rotation)
    }

    pub fn rot_x(angle: f64) -> Self {
        Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), angle))
    }

    pub fn rot_y(angle: f64) -> Self {
        Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::y_axis(), angle))
    }

    pub fn rot_z(angle: f64) -> Self {
        Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle))
    }

    /// Apply `other` first, then `self` (a ∘ b).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.rotation * other.translation + self.translation,
            rotation: renormalize(self.rotation * other.rotation),
        }
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose {
            translation: -(r_inv * self.translation),
            rotation: renormalize(r_inv),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Rotation angle between the two poses, in radians.
    pub fn rotation_distance(&self, other: &Pose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Text form: `tx ty tz qw qx qy qz`, full round-trip precision.
    pub fn to_line(&self) -> String {
        let q = self.rotation.quaternion();
        format!(
            "{} {} {} {} {} {} {}",
            self.translation.x, self.translation.y, self.translation.z, q.w, q.i, q.j, q.k
        )
    }

    pub fn from_line(line: &str) -> Option<Pose> {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .ok()?;
        if v.len() != 7 {
            return None;
        }
        let q = nalgebra::Quaternion::new(v[3], v[4], v[5], v[6]);
        if q.norm() < 1e-12 {
            return None;
        }
        Some(Pose::new(
            Vector3::new(v[0], v[1], v[2]),
            UnitQuaternion::from_quaternion(q),
        ))
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_unchecked(q.into_inner().normalize())
}

/// Transport a grasp defined at object pose `p_i` to object pose `p_j`:
/// `p_j ∘ p_i⁻¹ ∘ g_i`. The grasp's object-relative transform is preserved.
pub fn retarget_grasp(g_i: &Pose, p_i: &Pose, p_j: &Pose) -> Pose {
    p_j.compose(&p_i.inverse()).compose(g_i)
}

/// Pose encoded as `[tx, ty, tz, rx, ry, rz]` where the last three are a
/// rotation vector (axis times angle), canonical branch angle in `[0, π]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseVec6(pub [f64; 6]);

impl PoseVec6 {
    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn rotation_vector(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }
}

/// Encode a pose on the canonical axis-angle branch (angle in `[0, π]`).
///
/// Rotations with angle at or beyond `π − 1e-6` are renormalized to the
/// canonical representative (first nonzero axis component positive); the
/// encoding is bijective on the open branch.
pub fn to_vec6(p: &Pose) -> PoseVec6 {
    let q = p.rotation.quaternion();
    // Flip to the w >= 0 cover so the encoded angle lands in [0, π].
    let (w, mut v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let sin_half = v.norm();
    let angle = 2.0 * sin_half.atan2(w);
    let rv = if sin_half < 1e-15 {
        Vector3::zeros()
    } else {
        if angle >= std::f64::consts::PI - 1e-6 {
            // At the branch seam ±axis describe the same rotation; pick the
            // representative whose first nonzero component is positive.
            for i in 0..3 {
                if v[i].abs() > 1e-12 {
                    if v[i] < 0.0 {
                        v = -v;
                    }
                    break;
                }
            }
        }
        v * (angle / sin_half)
    };
    PoseVec6([
        p.translation.x,
        p.translation.y,
        p.translation.z,
        rv.x,
        rv.y,
        rv.z,
    ])
}

pub fn from_vec6(v: &PoseVec6) -> Pose {
    let rv = v.rotation_vector();
    let angle = rv.norm();
    let rotation = if angle < 1e-15 {
        UnitQuaternion::identity()
    } else {
        UnitQuaternion::from_scaled_axis(rv)
    };
    Pose::new(v.translation(), rotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn compose_identity() {
        let p = Pose::new(
            Vector3::new(0.3, -0.2, 0.7),
            UnitQuaternion::from_euler_angles(0.1, 0.4, -0.9),
        );
        let r = Pose::identity().compose(&p);
        assert!(r.translation_distance(&p) < 1e-12);
        assert!(r.rotation_distance(&p) < 1e-12);
    }

    #[test]
    fn compose_inverse_is_identity() {
        let p = Pose::new(
            Vector3::new(1.0, 2.0, 3.0),
            UnitQuaternion::from_euler_angles(0.5, -1.2, 2.0),
        );
        let r = p.compose(&p.inverse());
        assert!(r.translation.norm() < 1e-9);
        assert!(r.rotation.angle() < 1e-9);
    }

    #[test]
    fn rotation_then_translation_order() {
        // Rz(90°) ∘ T(1,0,0) moves the origin to (0,1,0).
        let r = Pose::rot_z(FRAC_PI_2).compose(&Pose::from_translation(1.0, 0.0, 0.0));
        assert!((r.translation - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn retarget_identity_and_translation() {
        let g = Pose::new(
            Vector3::new(0.1, 0.0, 0.3),
            UnitQuaternion::from_euler_angles(0.0, PI, 0.0),
        );
        let p = Pose::from_translation(0.2, 0.2, 0.0);
        let same = retarget_grasp(&g, &p, &p);
        assert!(same.translation_distance(&g) < 1e-12);
        assert!(same.rotation_distance(&g) < 1e-12);

        let lifted = retarget_grasp(&g, &Pose::identity(), &Pose::from_translation(0.0, 0.0, 0.1));
        assert!((lifted.translation - (g.translation + Vector3::new(0.0, 0.0, 0.1))).norm() < 1e-12);
        assert!(lifted.rotation_distance(&g) < 1e-12);
    }

    #[test]
    fn vec6_trivial_encodings() {
        let v = to_vec6(&Pose::identity());
        assert_eq!(v.0, [0.0; 6]);

        let v = to_vec6(&Pose::rot_z(FRAC_PI_2));
        assert!(v.0[..3].iter().all(|c| c.abs() < 1e-15));
        assert!(v.0[3].abs() < 1e-12 && v.0[4].abs() < 1e-12);
        assert!((v.0[5] - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn vec6_round_trip() {
        let p = Pose::new(
            Vector3::new(-0.4, 0.9, 0.05),
            UnitQuaternion::from_euler_angles(1.1, -0.3, 2.5),
        );
        let back = from_vec6(&to_vec6(&p));
        assert!(back.translation_distance(&p) < 1e-9);
        assert!(back.rotation_distance(&p) < 1e-9);
    }

    #[test]
    fn pose_line_round_trip() {
        let p = Pose::new(
            Vector3::new(0.123456789012345, -2.0, 1e-7),
            UnitQuaternion::from_euler_angles(0.3, 0.1, -1.7),
        );
        let q = Pose::from_line(&p.to_line()).unwrap();
        assert_eq!(p.translation, q.translation);
        assert!(p.rotation_distance(&q) < 1e-15);
    }
}
