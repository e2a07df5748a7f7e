//! Data types for the kinematic tabletop world.

use crate::arm::JointConfig;
use crate::geom::{v3, Placed, Solid, Vec3};

/// Axis-aligned workspace bounds; everything outside is cropped from point
/// clouds and nothing is ever spawned outside.
pub const WORKSPACE_MIN: Vec3 = v3(0.0, 0.0, 0.0);
pub const WORKSPACE_MAX: Vec3 = v3(1.0, 1.0, 0.4);

/// Largest end-effector translation per simulation step, per axis (meters).
pub const MAX_EE_STEP: f64 = 0.02;
/// Change of the normalized grip value per step at |grip_cmd| = 1.
pub const GRIP_RATE: f64 = 0.25;
/// Extra opening (beyond the caged span) at which a held object is released.
pub const RELEASE_MARGIN: f64 = 0.005;
/// Default per-stage step budget for the low-level policy.
pub const DEFAULT_STAGE_STEPS: usize = 25;

/// Object pose: `pos` is the xy center and the z of the object's *bottom*
/// surface (a resting object on the table has z = 0); `yaw` about +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub pos: Vec3,
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Pose {
        Pose { pos: v3(x, y, z), yaw }
    }
}

/// Shapes an object can take. Trays are open bins: a floor slab plus four
/// walls, used as place targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectShape {
    Cuboid { hx: f64, hy: f64, hz: f64 },
    Cylinder { r: f64, h: f64 },
    Ring { r_in: f64, r_out: f64, h: f64 },
    Tray { hx: f64, hy: f64, wall_h: f64, t: f64 },
}

impl ObjectShape {
    pub fn height(&self) -> f64 {
        match *self {
            ObjectShape::Cuboid { hz, .. } => 2.0 * hz,
            ObjectShape::Cylinder { h, .. } | ObjectShape::Ring { h, .. } => h,
            ObjectShape::Tray { wall_h, .. } => wall_h,
        }
    }
}

/// Articulated degrees of freedom for fixtures that move in place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Articulation {
    /// Body translates along the unit direction `axis_yaw` by the joint
    /// value (drawers).
    Prismatic { axis_yaw: f64, lo: f64, hi: f64 },
    /// Body rotates about its vertical axis by the joint value (dials).
    Hinge { lo: f64, hi: f64 },
}

/// Rectangle the sampler draws an object's xy position from. Degenerate
/// ranges pin the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRegion {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub yaw: (f64, f64),
}

impl SampleRegion {
    pub fn fixed(x: f64, y: f64) -> SampleRegion {
        SampleRegion { x: (x, x), y: (y, y), yaw: (0.0, 0.0) }
    }

    pub fn jittered(x: f64, y: f64, j: f64) -> SampleRegion {
        SampleRegion { x: (x - j, x + j), y: (y - j, y + j), yaw: (0.0, 0.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub label: String,
    pub shape: ObjectShape,
    pub graspable: bool,
    /// Free objects can be pushed around the table; fixtures cannot.
    pub movable: bool,
    pub articulation: Option<Articulation>,
    pub region: SampleRegion,
}

/// A goal component; tasks are conjunctions of these, in order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    /// Object rests inside a tray within `tol` of its center (xy).
    Place { obj: usize, dest: usize, tol: f64 },
    /// Ring-on-peg style placement: within `tol` of the peg axis, at rest.
    PlaceOn { obj: usize, dest: usize, tol: f64 },
    /// Object bottom raised at least `rise` above the table.
    LiftTo { obj: usize, rise: f64 },
    /// Object displaced at least `dist` toward `goal` (from its start pose).
    PushToward { obj: usize, goal: usize, dist: f64 },
    /// Hinge joint value at least `angle`.
    HingeTo { obj: usize, angle: f64 },
    /// Prismatic joint value at least `dist`.
    SlideTo { obj: usize, dist: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    /// One-sentence natural-language goal, used to build planner prompts.
    pub description: String,
    pub objects: Vec<ObjectSpec>,
    /// Labels a plan step may address (all object labels).
    pub vocabulary: Vec<String>,
    pub goals: Vec<Goal>,
    /// Number of stages the reference plan for this task has.
    pub stage_count: usize,
    pub reward: RewardMode,
}

impl TaskSpec {
    pub fn object_index(&self, label: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.label == label)
    }
}

/// Rigid attachment of a grasped object to the gripper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attachment {
    pub obj: usize,
    /// Object base position minus end-effector position, frozen at grasp.
    pub rel: Vec3,
    /// Extent of the grasped material along the closing axis, frozen at
    /// grasp; opening beyond this span plus `RELEASE_MARGIN` releases.
    pub span: f64,
}

/// Complete, deterministic world state.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub robot: JointConfig,
    /// Aligned with `TaskSpec::objects`.
    pub poses: Vec<Pose>,
    /// Poses at reset time (push progress is measured from these).
    pub init_poses: Vec<Pose>,
    /// Joint values for articulated objects (0.0 for rigid ones).
    pub articulations: Vec<f64>,
    pub attachment: Option<Attachment>,
    pub step_index: u64,
    /// Seed that produced this episode (also drives render corruption).
    pub seed: u64,
}

/// Low-level action: an end-effector translation plus a gripper rate
/// command in [-1, 1] (negative closes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub d_ee: Vec3,
    pub grip_cmd: f64,
}

impl Action {
    pub const ZERO: Action = Action { d_ee: Vec3::ZERO, grip_cmd: 0.0 };

    /// Map a normalized vector in [-1, 1]^4 onto action bounds.
    pub fn from_normalized(a: [f64; 4]) -> Action {
        Action {
            d_ee: v3(a[0] * MAX_EE_STEP, a[1] * MAX_EE_STEP, a[2] * MAX_EE_STEP),
            grip_cmd: a[3],
        }
        .sanitized()
    }

    /// Clamp to bounds; non-finite components become zero.
    pub fn sanitized(self) -> Action {
        let f = |v: f64, lim: f64| if v.is_finite() { v.clamp(-lim, lim) } else { 0.0 };
        Action {
            d_ee: v3(
                f(self.d_ee.x, MAX_EE_STEP),
                f(self.d_ee.y, MAX_EE_STEP),
                f(self.d_ee.z, MAX_EE_STEP),
            ),
            grip_cmd: f(self.grip_cmd, 1.0),
        }
    }
}

/// Instance-id conventions for rendered masks.
pub const ID_TABLE: u16 = 0;
pub const ID_ROBOT: u16 = 1;

pub fn object_id(index: usize) -> u16 {
    index as u16 + 2
}

/// Orthographic camera: pixel (row, col) starts a ray at
/// `origin + du*(col+0.5) + dv*(row+0.5)` along `dir`; stored depth is the
/// ray parameter, so back-projection is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    pub origin: Vec3,
    pub du: Vec3,
    pub dv: Vec3,
    pub dir: Vec3,
}

impl CameraModel {
    pub fn ray_start(&self, row: usize, col: usize) -> Vec3 {
        self.origin + self.du * (col as f64 + 0.5) + self.dv * (row as f64 + 0.5)
    }

    pub fn back_project(&self, row: usize, col: usize, depth: f64) -> Vec3 {
        self.ray_start(row, col) + self.dir * depth
    }

    /// Worst-case world-space footprint of one pixel.
    pub fn pixel_footprint(&self) -> f64 {
        self.du.norm().max(self.dv.norm())
    }
}

/// One rendered view: per-pixel depth along the ray and per-pixel instance
/// id of the first surface, with the id legend for self-description.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub camera: CameraModel,
    pub depth: Vec<f64>,
    pub ids: Vec<u16>,
    pub legend: Vec<String>,
}

impl DepthFrame {
    pub fn at(&self, row: usize, col: usize) -> (f64, u16) {
        let i = row * self.camera.width + col;
        (self.depth[i], self.ids[i])
    }

    pub fn id_of(&self, label: &str) -> Option<u16> {
        self.legend.iter().position(|l| l == label).map(|i| i as u16)
    }

    pub fn mask_pixel_count(&self, id: u16) -> usize {
        self.ids.iter().filter(|&&v| v == id).count()
    }
}

/// What the agent sees after a step: two global depth/mask views, the
/// compact local feature vector, and raw proprioception.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frames: Vec<DepthFrame>,
    pub local: Vec<f64>,
    pub proprio: JointConfig,
}

/// Result of one simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    /// True exactly when the task's success predicate holds; stage and
    /// episode budgets are the caller's business.
    pub done: bool,
}

/// Number of nearest object centroids exposed in the local feature vector.
pub const K_LOCAL: usize = 4;
/// Objects further than this from the gripper are invisible locally.
pub const LOCAL_RADIUS: f64 = 0.15;
/// Length of the local feature vector: K_LOCAL relative centroids plus
/// gripper aperture, attachment flag, and end-effector height.
pub const LOCAL_DIM: usize = K_LOCAL * 3 + 3;

/// Expand an object (at `pose`, with articulation joint `value`) into solid
/// primitives for rendering, sampling, and rest-height queries.
pub fn object_primitives(spec: &ObjectSpec, pose: &Pose, value: f64) -> Vec<Placed> {
    let mut base = pose.pos;
    let mut yaw = pose.yaw;
    match spec.articulation {
        Some(Articulation::Prismatic { axis_yaw, .. }) => {
            base = base + v3(axis_yaw.cos(), axis_yaw.sin(), 0.0) * value;
        }
        Some(Articulation::Hinge { .. }) => yaw += value,
        None => {}
    }
    match spec.shape {
        ObjectShape::Cuboid { hx, hy, hz } => {
            vec![Placed::new(Solid::Cuboid { hx, hy, hz }, base, yaw)]
        }
        ObjectShape::Cylinder { r, h } => {
            vec![Placed::new(Solid::Cylinder { r, h }, base, yaw)]
        }
        ObjectShape::Ring { r_in, r_out, h } => {
            vec![Placed::new(Solid::Ring { r_in, r_out, h }, base, yaw)]
        }
        ObjectShape::Tray { hx, hy, wall_h, t } => {
            let mut prims = vec![Placed::new(
                Solid::Cuboid { hx, hy, hz: t / 2.0 },
                base,
                yaw,
            )];
            let wz = wall_h / 2.0;
            // Two walls along x, two along y, sitting on the floor slab.
            for side in [-1.0, 1.0] {
                prims.push(Placed::new(
                    Solid::Cuboid { hx: t / 2.0, hy, hz: wz },
                    base + v3(side * (hx - t / 2.0), 0.0, 0.0).rot_z(yaw),
                    yaw,
                ));
                prims.push(Placed::new(
                    Solid::Cuboid { hx: hx - t, hy: t / 2.0, hz: wz },
                    base + v3(0.0, side * (hy - t / 2.0), 0.0).rot_z(yaw),
                    yaw,
                ));
            }
            prims
        }
    }
}

/// World-frame centroid of an object, accounting for articulation.
pub fn object_centroid(spec: &ObjectSpec, pose: &Pose, value: f64) -> Vec3 {
    let prims = object_primitives(spec, pose, value);
    match spec.shape {
        // The tray centroid is its cavity center, which is what a placement
        // aims for.
        ObjectShape::Tray { wall_h, .. } => {
            prims[0].base + v3(0.0, 0.0, wall_h / 2.0)
        }
        _ => prims[0].centroid(),
    }
}
