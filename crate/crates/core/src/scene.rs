//! Table-top scenes: static geometry, attachment state, and the collision
//! queries used by planning.

use crate::arm::{ArmModel, JointConfig, NUM_JOINTS};
use crate::effort::Effort;
use crate::error::{Error, Result};
use crate::hull::ConvexHull;
use crate::mesh::{load_mesh, TriMesh};
use crate::se3::Pose;
use crate::shapes::{
    gjk_distance, segment_segment_distance, BoxShape, Capsule, PosedHull, SupportShape,
};
use nalgebra::Vector3;
use std::path::{Path, PathBuf};

/// Interpenetration tolerance for static scene validation.
const SCENE_PENETRATION_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SceneObject {
    /// Mesh path as written in the scene file (relative to the file).
    pub mesh_path: String,
    pub mesh: TriMesh,
    /// Convex hull of the mesh, object frame.
    pub hull: ConvexHull,
    pub pose: Pose,
}

#[derive(Clone, Copy, Debug)]
pub struct Attachment {
    pub object: usize,
    /// Object pose = end-effector pose ∘ this transform.
    pub grasp_to_object: Pose,
}

#[derive(Clone, Debug)]
pub struct SceneSpec {
    pub arm_path: String,
    /// Table surface extents (full x size, full y size), centered at origin.
    /// The table itself is the half-space z ≤ 0.
    pub table_size: (f64, f64),
    pub obstacles: Vec<BoxShape>,
    pub objects: Vec<SceneObject>,
    pub target_object: usize,
    pub goal: Pose,
    pub home: JointConfig,
    pub attached: Option<Attachment>,
}

impl SceneSpec {
    /// Validate the static layout: no interpenetration among objects and
    /// obstacles beyond tolerance.
    pub fn validate(&self) -> Result<()> {
        if self.target_object >= self.objects.len() {
            return Err(Error::Scene(format!(
                "target index {} out of {} objects",
                self.target_object,
                self.objects.len()
            )));
        }
        for i in 0..self.objects.len() {
            let hi = self.posed_hull(i);
            if hi.min_z() < -SCENE_PENETRATION_TOL {
                return Err(Error::Scene(format!("object {i} penetrates the table")));
            }
            for j in (i + 1)..self.objects.len() {
                let hj = self.posed_hull(j);
                if penetrates(&SupportShape::Hull(hi), &SupportShape::Hull(hj)) {
                    return Err(Error::Scene(format!("objects {i} and {j} interpenetrate")));
                }
            }
            for (k, b) in self.obstacles.iter().enumerate() {
                if penetrates(&SupportShape::Hull(hi), &SupportShape::Box(b)) {
                    return Err(Error::Scene(format!(
                        "object {i} interpenetrates obstacle {k}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn target_pose(&self) -> Pose {
        self.objects[self.target_object].pose
    }

    fn posed_hull(&self, i: usize) -> PosedHull<'_> {
        PosedHull {
            points: &self.objects[i].hull.points,
            pose: &self.objects[i].pose,
        }
    }

    /// Clone with the target object moved to `pose`.
    pub fn with_target_pose(&self, pose: &Pose) -> SceneSpec {
        let mut s = self.clone();
        s.objects[s.target_object].pose = *pose;
        s
    }

    pub fn with_attachment(&self, grasp_to_object: Pose) -> SceneSpec {
        let mut s = self.clone();
        s.attached = Some(Attachment {
            object: s.target_object,
            grasp_to_object,
        });
        s
    }

    pub fn detached(&self) -> SceneSpec {
        let mut s = self.clone();
        s.attached = None;
        s
    }

    /// Full arm collision query at configuration `q`: capsules against table,
    /// obstacles, non-attached objects, non-adjacent self pairs, and the
    /// attached object (if any) against everything except the gripper.
    pub fn arm_collides(&self, arm: &ArmModel, q: &JointConfig, effort: &Effort) -> bool {
        let capsules = arm.collision_capsules(q);
        let attached_idx = self.attached.map(|a| a.object);
        for (_, c) in &capsules {
            effort.add_distance_queries(1);
            if c.a.z.min(c.b.z) - c.radius < 0.0 {
                return true;
            }
        }
        for (_, c) in &capsules {
            let ca = c.aabb();
            for b in &self.obstacles {
                if !ca.overlaps(&b.aabb(), 0.0) {
                    effort.add_broad_rejects(1);
                    continue;
                }
                effort.add_distance_queries(1);
                let d = gjk_distance(
                    &SupportShape::Segment(c.a, c.b),
                    &SupportShape::Box(b),
                ) - c.radius;
                if d <= 0.0 {
                    return true;
                }
            }
            for (i, _) in self.objects.iter().enumerate() {
                if Some(i) == attached_idx {
                    continue;
                }
                let h = self.posed_hull(i);
                if !ca.overlaps(&h.aabb(), 0.0) {
                    effort.add_broad_rejects(1);
                    continue;
                }
                effort.add_distance_queries(1);
                let d =
                    gjk_distance(&SupportShape::Segment(c.a, c.b), &SupportShape::Hull(h))
                        - c.radius;
                if d <= 0.0 {
                    return true;
                }
            }
        }
        // Self collision, adjacent segments excluded.
        for i in 0..capsules.len() {
            for j in (i + 1)..capsules.len() {
                let (si, ci) = &capsules[i];
                let (sj, cj) = &capsules[j];
                if si.abs_diff(*sj) <= 1 {
                    continue;
                }
                effort.add_distance_queries(1);
                let d = segment_segment_distance(&ci.a, &ci.b, &cj.a, &cj.b)
                    - ci.radius
                    - cj.radius;
                if d <= 0.0 {
                    return true;
                }
            }
        }
        if let Some(att) = &self.attached {
            let ee = arm.fk(q);
            let obj_pose = ee.compose(&att.grasp_to_object);
            let h = PosedHull {
                points: &self.objects[att.object].hull.points,
                pose: &obj_pose,
            };
            if self.carried_hull_collides(&h, att.object, &capsules, effort) {
                return true;
            }
        }
        false
    }

    fn carried_hull_collides(
        &self,
        h: &PosedHull,
        carried_idx: usize,
        capsules: &[(usize, Capsule)],
        effort: &Effort,
    ) -> bool {
        effort.add_distance_queries(1);
        if h.min_z() < 0.0 {
            return true;
        }
        let ha = h.aabb();
        for b in &self.obstacles {
            if !ha.overlaps(&b.aabb(), 0.0) {
                effort.add_broad_rejects(1);
                continue;
            }
            effort.add_distance_queries(1);
            if gjk_distance(&SupportShape::Hull(*h), &SupportShape::Box(b)) <= 0.0 {
                return true;
            }
        }
        for (i, _) in self.objects.iter().enumerate() {
            if i == carried_idx {
                continue;
            }
            let other = self.posed_hull(i);
            if !ha.overlaps(&other.aabb(), 0.0) {
                effort.add_broad_rejects(1);
                continue;
            }
            if hull_hull_distance(h, &other, effort) <= 0.0 {
                return true;
            }
        }
        // Carried object against arm links; the gripper holding it is exempt.
        for (seg, c) in capsules {
            if *seg >= NUM_JOINTS {
                continue;
            }
            if !ha.overlaps(&c.aabb(), 0.0) {
                effort.add_broad_rejects(1);
                continue;
            }
            effort.add_distance_queries(1);
            let d = gjk_distance(&SupportShape::Segment(c.a, c.b), &SupportShape::Hull(*h))
                - c.radius;
            if d <= 0.0 {
                return true;
            }
        }
        false
    }

    /// Gripper-only clearance at an end-effector pose: the gripper body must
    /// be free of table, obstacles and every object other than the target
    /// (whose surfaces the fingers straddle).
    pub fn gripper_collision_free(&self, arm: &ArmModel, grasp: &Pose, effort: &Effort) -> bool {
        for c in arm.gripper_capsules_at(grasp) {
            effort.add_distance_queries(1);
            if c.a.z.min(c.b.z) - c.radius < 0.0 {
                return false;
            }
            let ca = c.aabb();
            for b in &self.obstacles {
                if !ca.overlaps(&b.aabb(), 0.0) {
                    effort.add_broad_rejects(1);
                    continue;
                }
                effort.add_distance_queries(1);
                let d = gjk_distance(&SupportShape::Segment(c.a, c.b), &SupportShape::Box(b))
                    - c.radius;
                if d <= 0.0 {
                    return false;
                }
            }
            for (i, _) in self.objects.iter().enumerate() {
                if i == self.target_object {
                    continue;
                }
                let h = self.posed_hull(i);
                if !ca.overlaps(&h.aabb(), 0.0) {
                    effort.add_broad_rejects(1);
                    continue;
                }
                effort.add_distance_queries(1);
                let d = gjk_distance(&SupportShape::Segment(c.a, c.b), &SupportShape::Hull(h))
                    - c.radius;
                if d <= 0.0 {
                    return false;
                }
            }
        }
        true
    }
}

fn hull_hull_distance(a: &PosedHull, b: &PosedHull, effort: &Effort) -> f64 {
    effort.add_distance_queries(1);
    gjk_distance(&SupportShape::Hull(*a), &SupportShape::Hull(*b))
}

/// GJK reports distance 0 both at contact and under overlap. For static
/// validation, estimate separation as the best gap over sampled directions:
/// contact keeps a gap near zero, true overlap pushes all gaps negative.
fn penetrates(a: &SupportShape, b: &SupportShape) -> bool {
    if gjk_distance(a, b) > 0.0 {
        return false;
    }
    let mut best = f64::NEG_INFINITY;
    for dir in sample_directions() {
        let sup_a = match a {
            SupportShape::Segment(p, q) => {
                if p.dot(&dir) >= q.dot(&dir) {
                    p.dot(&dir)
                } else {
                    q.dot(&dir)
                }
            }
            SupportShape::Box(bx) => bx.support(&dir).dot(&dir),
            SupportShape::Hull(h) => h.support(&dir).dot(&dir),
        };
        let inf_b = match b {
            SupportShape::Segment(p, q) => {
                if p.dot(&dir) <= q.dot(&dir) {
                    p.dot(&dir)
                } else {
                    q.dot(&dir)
                }
            }
            SupportShape::Box(bx) => bx.support(&-dir).dot(&dir),
            SupportShape::Hull(h) => h.support(&-dir).dot(&dir),
        };
        best = best.max(inf_b - sup_a);
    }
    best < -SCENE_PENETRATION_TOL
}

fn sample_directions() -> Vec<Vector3<f64>> {
    let mut dirs = Vec::with_capacity(26);
    for x in -1..=1 {
        for y in -1..=1 {
            for z in -1..=1 {
                if x == 0 && y == 0 && z == 0 {
                    continue;
                }
                dirs.push(Vector3::new(x as f64, y as f64, z as f64).normalize());
            }
        }
    }
    dirs
}

// ---------------------------------------------------------------------------
// Scene file I/O: line-oriented key-value text.

pub fn write_scene(scene: &SceneSpec) -> String {
    let mut s = String::from("# anyplace scene v1\n");
    s.push_str(&format!("arm {}\n", scene.arm_path));
    s.push_str(&format!("table {} {}\n", scene.table_size.0, scene.table_size.1));
    for b in &scene.obstacles {
        s.push_str(&format!(
            "obstacle {} {} {} {} {} {}\n",
            b.center.x, b.center.y, b.center.z, b.half.x, b.half.y, b.half.z
        ));
    }
    for o in &scene.objects {
        s.push_str(&format!("object {} {}\n", o.mesh_path, o.pose.to_line()));
    }
    s.push_str(&format!("target {}\n", scene.target_object));
    s.push_str(&format!("goal {}\n", scene.goal.to_line()));
    s.push_str(&format!(
        "home {}\n",
        scene
            .home
            .0
            .iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    ));
    s
}

pub fn save_scene(scene: &SceneSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_scene(scene))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.display().to_string();
    parse_scene(&text, &name, dir)
}

pub fn parse_scene(text: &str, name: &str, dir: &Path) -> Result<SceneSpec> {
    let mut arm_path = None;
    let mut table_size = (1.2, 0.8);
    let mut obstacles = Vec::new();
    let mut objects = Vec::new();
    let mut target = None;
    let mut goal = None;
    let mut home = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::parse(name, format!("{what} on line {}", ln + 1));
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match key {
            "arm" => arm_path = Some(rest.trim().to_string()),
            "table" => {
                let v: Vec<f64> = rest
                    .split_whitespace()
                    .filter_map(|t| t.parse().ok())
                    .collect();
                if v.len() != 2 {
                    return Err(bad("bad table size"));
                }
                table_size = (v[0], v[1]);
            }
            "obstacle" => {
                let v: Vec<f64> = rest
                    .split_whitespace()
                    .filter_map(|t| t.parse().ok())
                    .collect();
                if v.len() != 6 {
                    return Err(bad("bad obstacle"));
                }
                obstacles.push(BoxShape {
                    center: Vector3::new(v[0], v[1], v[2]),
                    half: Vector3::new(v[3], v[4], v[5]),
                });
            }
            "object" => {
                let (mesh_rel, pose_part) = rest
                    .trim()
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| bad("bad object line"))?;
                let pose = Pose::from_line(pose_part).ok_or_else(|| bad("bad object pose"))?;
                let mesh_file: PathBuf = dir.join(mesh_rel);
                let mesh = load_mesh(&mesh_file)?;
                let hull = ConvexHull::from_points(&mesh.vertices)?;
                objects.push(SceneObject {
                    mesh_path: mesh_rel.to_string(),
                    mesh,
                    hull,
                    pose,
                });
            }
            "target" => {
                target = Some(
                    rest.trim()
                        .parse::<usize>()
                        .map_err(|_| bad("bad target index"))?,
                );
            }
            "goal" => {
                goal = Some(Pose::from_line(rest).ok_or_else(|| bad("bad goal pose"))?);
            }
            "home" => {
                let v: Vec<f64> = rest
                    .split_whitespace()
                    .filter_map(|t| t.parse().ok())
                    .collect();
                if v.len() != NUM_JOINTS {
                    return Err(bad("bad home config"));
                }
                let mut q = [0.0; NUM_JOINTS];
                q.copy_from_slice(&v);
                home = Some(JointConfig(q));
            }
            _ => return Err(bad(&format!("unknown key '{key}'"))),
        }
    }
    let scene = SceneSpec {
        arm_path: arm_path.ok_or_else(|| Error::parse(name, "missing arm line"))?,
        table_size,
        obstacles,
        objects,
        target_object: target.ok_or_else(|| Error::parse(name, "missing target line"))?,
        goal: goal.ok_or_else(|| Error::parse(name, "missing goal line"))?,
        home: home.unwrap_or_else(crate::arm::home_config),
        attached: None,
    };
    scene.validate()?;
    Ok(scene)
}

/// A minimal scene: bare table, one object, no obstacles. Used by dataset
/// collection and pretraining episodes.
pub fn bare_scene(mesh: TriMesh, pose: Pose, goal: Pose) -> Result<SceneSpec> {
    let hull = ConvexHull::from_points(&mesh.vertices)?;
    let scene = SceneSpec {
        arm_path: "arm6.toml".to_string(),
        table_size: (1.2, 0.8),
        obstacles: Vec::new(),
        objects: vec![SceneObject {
            mesh_path: "<memory>".to_string(),
            mesh,
            hull,
            pose,
        }],
        target_object: 0,
        goal,
        home: crate::arm::home_config(),
        attached: None,
    };
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::{home_config, ArmModel};
    use crate::mesh::parse_obj;

    fn small_box_mesh() -> TriMesh {
        // 6 cm cube centered on its bottom face.
        parse_obj(
            "v -0.03 -0.03 0\nv 0.03 -0.03 0\nv 0.03 0.03 0\nv -0.03 0.03 0\n\
             v -0.03 -0.03 0.06\nv 0.03 -0.03 0.06\nv 0.03 0.03 0.06\nv -0.03 0.03 0.06\n\
             f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\n\
             f 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n",
            "box6",
        )
        .unwrap()
    }

    #[test]
    fn home_is_collision_free_over_empty_table() {
        let arm = ArmModel::default_model();
        let scene = bare_scene(
            small_box_mesh(),
            Pose::from_translation(0.3, 0.3, 0.0),
            Pose::from_translation(0.3, 0.3, 0.0),
        )
        .unwrap();
        let effort = Effort::new();
        assert!(!scene.arm_collides(&arm, &home_config(), &effort));
    }

    #[test]
    fn link_below_table_collides() {
        let arm = ArmModel::default_model();
        let scene = bare_scene(
            small_box_mesh(),
            Pose::from_translation(0.3, 0.3, 0.0),
            Pose::from_translation(0.3, 0.3, 0.0),
        )
        .unwrap();
        let effort = Effort::new();
        // Fold the shoulder far forward to drive the arm into the table.
        let q = JointConfig([0.0, 2.2, 0.4, 0.0, 0.0, 0.0]);
        assert!(scene.arm_collides(&arm, &q, &effort));
    }

    #[test]
    fn carried_object_pose_matches_attachment() {
        let arm = ArmModel::default_model();
        let p0 = Pose::from_translation(0.0, 0.0, 0.0);
        let scene = bare_scene(small_box_mesh(), p0, p0).unwrap();
        let q = home_config();
        let ee = arm.fk(&q);
        let grasp_to_object = ee.inverse().compose(&p0);
        let s = scene.with_attachment(grasp_to_object);
        let att = s.attached.unwrap();
        let obj_world = arm.fk(&q).compose(&att.grasp_to_object);
        assert!(obj_world.translation_distance(&p0) < 1e-9);
        assert!(obj_world.rotation_distance(&p0) < 1e-9);
    }

    #[test]
    fn scene_round_trips_through_text() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let mesh_path = dir.path().join("box.obj");
        let mut f = std::fs::File::create(&mesh_path).unwrap();
        f.write_all(small_box_mesh().to_obj().as_bytes()).unwrap();

        let mesh = small_box_mesh();
        let hull = ConvexHull::from_points(&mesh.vertices).unwrap();
        let scene = SceneSpec {
            arm_path: "arm6.toml".into(),
            table_size: (1.2, 0.8),
            obstacles: vec![BoxShape {
                center: Vector3::new(0.2, 0.0, 0.05),
                half: Vector3::new(0.02, 0.1, 0.05),
            }],
            objects: vec![SceneObject {
                mesh_path: "box.obj".into(),
                mesh,
                hull,
                pose: Pose::from_translation(0.0, 0.2, 0.0),
            }],
            target_object: 0,
            goal: Pose::from_translation(0.1, -0.2, 0.0),
            home: home_config(),
            attached: None,
        };
        let scene_path = dir.path().join("scene.txt");
        save_scene(&scene, &scene_path).unwrap();
        let loaded = load_scene(&scene_path).unwrap();
        assert_eq!(loaded.objects.len(), 1);
        assert_eq!(loaded.obstacles.len(), 1);
        assert!(loaded.goal.translation_distance(&scene.goal) < 1e-15);
        assert_eq!(write_scene(&loaded), write_scene(&scene));
    }

    #[test]
    fn interpenetrating_objects_rejected() {
        let mesh = small_box_mesh();
        let hull = ConvexHull::from_points(&mesh.vertices).unwrap();
        let obj = |pose| SceneObject {
            mesh_path: "m".into(),
            mesh: mesh.clone(),
            hull: hull.clone(),
            pose,
        };
        let scene = SceneSpec {
            arm_path: "arm6.toml".into(),
            table_size: (1.2, 0.8),
            obstacles: vec![],
            objects: vec![
                obj(Pose::from_translation(0.0, 0.0, 0.0)),
                obj(Pose::from_translation(0.02, 0.0, 0.0)),
            ],
            target_object: 0,
            goal: Pose::identity(),
            home: home_config(),
            attached: None,
        };
        assert!(scene.validate().is_err());
    }
}
