//! Configuration-space collision checking against obstacle point clouds:
//! the robot's capsule body (plus the convex hull of anything it is
//! holding) must keep a clearance margin from every obstacle point.

use crate::arm::{body_capsules, forward_kinematics, JointConfig};
use crate::geom::{capsule_dist, Placed, Solid, Vec3};
use crate::seq::cloud::{PointCloud, SpatialHash};
use crate::sim::types::{object_primitives, ObjectSpec, Pose};

/// Minimum allowed distance between any robot surface and an obstacle
/// point, meters.
pub const CLEARANCE: f64 = 0.005;

/// Collision-check interpolation resolution for the revolute joints,
/// radians per step.
pub const ANGLE_RESOLUTION: f64 = 0.01;
/// Collision-check interpolation resolution for the prismatic joint,
/// meters per step.
pub const LIFT_RESOLUTION: f64 = 0.005;

/// Grid cell size for the obstacle index. Coarser than the cloud's voxel
/// size so each query touches a handful of buckets.
const INDEX_CELL: f64 = 0.02;

/// An object rigidly held by the gripper, swept along with the arm during
/// collision checks. Its convex hull keeps the clearance margin (a held
/// ring's hole is not exploited as free space).
#[derive(Debug, Clone)]
pub struct AttachedShape {
    pub spec: ObjectSpec,
    /// Object base position minus end-effector position.
    pub rel: Vec3,
    pub yaw: f64,
}

impl AttachedShape {
    fn primitives_at(&self, q: &JointConfig) -> Vec<Placed> {
        let pose = Pose { pos: forward_kinematics(q) + self.rel, yaw: self.yaw };
        object_primitives(&self.spec, &pose, 0.0)
    }
}

/// A sphere guaranteed to contain the placed solid.
fn bounding_sphere(p: &Placed) -> (Vec3, f64) {
    let r = match p.solid {
        Solid::Cuboid { hx, hy, hz } => (hx * hx + hy * hy + hz * hz).sqrt(),
        Solid::Cylinder { r, h } => (r * r + h * h / 4.0).sqrt(),
        Solid::Ring { r_out, h, .. } => (r_out * r_out + h * h / 4.0).sqrt(),
    };
    (p.centroid(), r)
}

/// Point-cloud collision oracle for arm configurations.
pub struct CollisionChecker {
    points: Vec<Vec3>,
    index: SpatialHash,
    clearance: f64,
    attached: Option<AttachedShape>,
}

impl CollisionChecker {
    pub fn new(cloud: &PointCloud, clearance: f64) -> CollisionChecker {
        CollisionChecker {
            index: SpatialHash::build(&cloud.points, INDEX_CELL),
            points: cloud.points.clone(),
            clearance,
            attached: None,
        }
    }

    /// Also sweep a held object along with the arm.
    pub fn with_attachment(mut self, attached: AttachedShape) -> CollisionChecker {
        self.attached = Some(attached);
        self
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    /// True when every robot capsule (and the held object's hull, if any)
    /// clears every obstacle point by more than the margin.
    pub fn is_free(&self, q: &JointConfig) -> bool {
        let mut candidates: Vec<u32> = Vec::new();
        for cap in body_capsules(q) {
            self.index
                .segment_candidates(cap.a, cap.b, cap.r + self.clearance, &mut candidates);
            for &i in &candidates {
                if capsule_dist(self.points[i as usize], cap.a, cap.b, cap.r) <= self.clearance {
                    return false;
                }
            }
        }
        if let Some(attached) = &self.attached {
            for prim in attached.primitives_at(q) {
                let (center, radius) = bounding_sphere(&prim);
                self.index.segment_candidates(
                    center,
                    center,
                    radius + self.clearance,
                    &mut candidates,
                );
                for &i in &candidates {
                    if prim.hull_dist(self.points[i as usize]) <= self.clearance {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// True when every interpolated configuration between `a` and `b`
    /// (at the angle/lift resolutions, endpoints included) is free.
    pub fn edge_is_free(&self, a: &JointConfig, b: &JointConfig) -> bool {
        let n = interpolation_steps(a, b);
        (0..=n).all(|i| self.is_free(&lerp_config(a, b, i as f64 / n as f64)))
    }
}

/// Number of interpolation intervals needed to sweep `a` → `b` without any
/// joint moving more than its check resolution per step. At least 1.
pub fn interpolation_steps(a: &JointConfig, b: &JointConfig) -> usize {
    let angular = (a.theta1 - b.theta1).abs().max((a.theta2 - b.theta2).abs());
    let lift = (a.d_z - b.d_z).abs();
    (angular / ANGLE_RESOLUTION)
        .max(lift / LIFT_RESOLUTION)
        .ceil()
        .max(1.0) as usize
}

/// Straight-line interpolation in joint space (grip included).
pub fn lerp_config(a: &JointConfig, b: &JointConfig, t: f64) -> JointConfig {
    JointConfig {
        theta1: a.theta1 + (b.theta1 - a.theta1) * t,
        theta2: a.theta2 + (b.theta2 - a.theta2) * t,
        d_z: a.d_z + (b.d_z - a.d_z) * t,
        grip: a.grip + (b.grip - a.grip) * t,
    }
}
