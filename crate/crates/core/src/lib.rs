//! Hierarchical 6-DoF object manipulation planning.
//!
//! Given an object's initial and goal pose on a table, the library searches
//! intermediate resting placements that make infeasible manipulations
//! feasible, using a learned path-cost estimator and a learned pose-priority
//! model to drive an anytime prioritized solver. Exhaustive baselines share
//! the same enumeration core and serve as oracles.

pub mod arm;
pub mod effort;
pub mod error;
pub mod grasp;
pub mod hull;
pub mod mlp;
pub mod planner;
pub mod mesh;
pub mod scene;
pub mod se3;
pub mod shapes;
pub mod stability;

pub use arm::{ArmModel, JointConfig};
pub use effort::Effort;
pub use error::{Error, Result};
pub use mesh::TriMesh;
pub use scene::SceneSpec;
pub use se3::{from_vec6, retarget_grasp, to_vec6, Pose, PoseVec6};
pub use stability::{CandidateSet, StablePose};
