//! Kinematics of the tabletop arm: a planar two-link shoulder/elbow pair
//! (SCARA-style) whose links travel in a fixed horizontal plane above the
//! table, a prismatic column that drops the gripper to height `d_z`, and a
//! two-finger parallel gripper.
//!
//! Because both links have equal length the reachable set in the plane is
//! the full disk of radius `L1 + L2` around the base (the inner annulus
//! boundary is degenerate): any target inside the disk has an elbow-up and
//! an elbow-down solution, which coincide only on the outer circle.

use crate::geom::{v3, Vec3};

/// Shoulder position in the world (the arm reaches over the table edge).
pub const BASE: Vec3 = v3(0.5, -0.1, 0.0);
/// Link lengths (equal by design, see module docs).
pub const L1: f64 = 0.35;
pub const L2: f64 = 0.35;
/// Height of the plane the two links travel in.
pub const ARM_PLANE_Z: f64 = 0.35;
/// Capsule radii for the links, the prismatic column, and the fingers.
pub const LINK_RADIUS: f64 = 0.03;
pub const COLUMN_RADIUS: f64 = 0.02;
pub const FINGER_RADIUS: f64 = 0.008;
/// Vertical extent of the fingers; fingertips sit at z = d_z.
pub const FINGER_LEN: f64 = 0.04;
/// Half-depth of the finger plates perpendicular to the closing axis:
/// points further than this from the grasp plane cannot be captured.
pub const FINGER_HALF_DEPTH: f64 = 0.015;
/// Gripper opening at grip = 1.
pub const MAX_APERTURE: f64 = 0.08;

/// Joint limits.
pub const THETA_RANGE: (f64, f64) = (-std::f64::consts::PI, std::f64::consts::PI);
pub const DZ_RANGE: (f64, f64) = (0.0, 0.3);
pub const GRIP_RANGE: (f64, f64) = (0.0, 1.0);

/// Joint-space configuration: two revolute angles, the column height, and
/// the normalized gripper opening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub d_z: f64,
    pub grip: f64,
}

impl JointConfig {
    pub fn new(theta1: f64, theta2: f64, d_z: f64, grip: f64) -> JointConfig {
        JointConfig { theta1, theta2, d_z, grip }
    }

    /// Start-of-episode configuration: arm extended straight over the
    /// table, column raised, gripper fully open.
    /// Scan parking: the entire arm folds to y = -0.1, south of the table,
    /// so cameras see the scene unobstructed.
    pub fn parked() -> JointConfig {
        JointConfig::new(std::f64::consts::PI, 0.0, 0.25, 1.0)
    }

    pub fn home() -> JointConfig {
        JointConfig::new(std::f64::consts::FRAC_PI_2, 0.0, 0.25, 1.0)
    }

    pub fn aperture(&self) -> f64 {
        MAX_APERTURE * self.grip
    }

    pub fn in_bounds(&self) -> bool {
        let eps = 1e-12;
        self.theta1 >= THETA_RANGE.0 - eps
            && self.theta1 <= THETA_RANGE.1 + eps
            && self.theta2 >= THETA_RANGE.0 - eps
            && self.theta2 <= THETA_RANGE.1 + eps
            && self.d_z >= DZ_RANGE.0 - eps
            && self.d_z <= DZ_RANGE.1 + eps
            && self.grip >= GRIP_RANGE.0 - eps
            && self.grip <= GRIP_RANGE.1 + eps
    }

    pub fn clamped(mut self) -> JointConfig {
        self.theta1 = self.theta1.clamp(THETA_RANGE.0, THETA_RANGE.1);
        self.theta2 = self.theta2.clamp(THETA_RANGE.0, THETA_RANGE.1);
        self.d_z = self.d_z.clamp(DZ_RANGE.0, DZ_RANGE.1);
        self.grip = self.grip.clamp(GRIP_RANGE.0, GRIP_RANGE.1);
        self
    }

    /// Distance used for branch selection and planner goal projection:
    /// plain Euclidean metric over (theta1, theta2, d_z).
    pub fn joint_dist(&self, o: &JointConfig) -> f64 {
        let d1 = self.theta1 - o.theta1;
        let d2 = self.theta2 - o.theta2;
        let dz = self.d_z - o.d_z;
        (d1 * d1 + d2 * d2 + dz * dz).sqrt()
    }
}

/// Elbow joint position in the link plane.
pub fn elbow_xy(q: &JointConfig) -> Vec3 {
    BASE + v3(L1 * q.theta1.cos(), L1 * q.theta1.sin(), 0.0)
}

/// Forward kinematics: world position of the gripper center (fingertip
/// height equals the column height `d_z`).
pub fn forward_kinematics(q: &JointConfig) -> Vec3 {
    let e = elbow_xy(q);
    let a = q.theta1 + q.theta2;
    v3(e.x + L2 * a.cos(), e.y + L2 * a.sin(), q.d_z)
}

/// Why inverse kinematics rejected a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unreachable {
    /// Nearest reachable point to the requested target.
    pub clamped: Vec3,
}

/// Closed-form inverse kinematics. Picks the elbow branch closest to
/// `current` (Euclidean metric on joint values) and preserves the current
/// grip. Targets outside the reach disk or the prismatic range return
/// `Unreachable` carrying the nearest reachable point.
pub fn inverse_kinematics(target: Vec3, current: &JointConfig) -> Result<JointConfig, Unreachable> {
    let eps = 1e-9;
    let planar = v3(target.x - BASE.x, target.y - BASE.y, 0.0);
    let r = planar.norm_xy();
    let max_r = L1 + L2;

    let out_of_reach = r > max_r + eps;
    let out_of_z = target.z < DZ_RANGE.0 - eps || target.z > DZ_RANGE.1 + eps;
    if out_of_reach || out_of_z {
        let xy = if out_of_reach {
            BASE + planar * ((max_r - 1e-7) / r)
        } else {
            v3(target.x, target.y, 0.0)
        };
        return Err(Unreachable {
            clamped: v3(xy.x, xy.y, target.z.clamp(DZ_RANGE.0, DZ_RANGE.1)),
        });
    }

    let cos_t2 = ((r * r - L1 * L1 - L2 * L2) / (2.0 * L1 * L2)).clamp(-1.0, 1.0);
    let t2 = cos_t2.acos();
    let base_angle = planar.y.atan2(planar.x);

    let mut best: Option<JointConfig> = None;
    for theta2 in [t2, -t2] {
        let theta1 = wrap_pi(base_angle - (L2 * theta2.sin()).atan2(L1 + L2 * theta2.cos()));
        let cand = JointConfig::new(theta1, theta2, target.z.clamp(DZ_RANGE.0, DZ_RANGE.1), current.grip);
        if best
            .as_ref()
            .map_or(true, |b| cand.joint_dist(current) < b.joint_dist(current))
        {
            best = Some(cand);
        }
    }
    Ok(best.expect("two candidate branches always exist"))
}

/// Wrap an angle into [-pi, pi].
pub fn wrap_pi(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if w < -std::f64::consts::PI {
        w += two_pi;
    }
    w
}

/// One capsule of the robot body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub r: f64,
}

/// The full capsule model of the robot at configuration `q`: two links in
/// the arm plane, the prismatic column, and both fingers. The fingers hang
/// with their inner faces `aperture` apart, separated along the world x
/// axis (the gripper does not rotate with the arm).
pub fn body_capsules(q: &JointConfig) -> Vec<Capsule> {
    let elbow = elbow_xy(q);
    let ee = forward_kinematics(q);
    let lift = v3(0.0, 0.0, ARM_PLANE_Z);
    let finger_off = q.aperture() / 2.0 + FINGER_RADIUS;
    let finger_top = q.d_z + FINGER_LEN;
    let mut caps = vec![
        Capsule { a: BASE + lift, b: elbow + lift, r: LINK_RADIUS },
        Capsule { a: elbow + lift, b: v3(ee.x, ee.y, ARM_PLANE_Z), r: LINK_RADIUS },
        Capsule {
            a: v3(ee.x, ee.y, ARM_PLANE_Z),
            b: v3(ee.x, ee.y, finger_top),
            r: COLUMN_RADIUS,
        },
    ];
    for side in [-1.0, 1.0] {
        let x = ee.x + side * finger_off;
        caps.push(Capsule {
            a: v3(x, ee.y, finger_top),
            b: v3(x, ee.y, q.d_z),
            r: FINGER_RADIUS,
        });
    }
    caps
}
