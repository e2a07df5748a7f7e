//! A deterministic 2.5-D kinematic tabletop simulator.
//!
//! The world is a 1 m x 1 m table with a SCARA-style arm above it.  State
//! is purely kinematic: objects rest at computed support heights, move when
//! pushed or carried, and articulated fixtures (dials, drawers) move when
//! dragged near their handles.  There is no dynamics integration, which
//! keeps stepping exact, fast, and bit-reproducible.
//!
//! Mechanics summary:
//! - The end-effector follows bounded Cartesian displacements through
//!   closed-form inverse kinematics.
//! - The gripper closes at a bounded rate.  Closing plates squeeze captured
//!   material toward the gripper center, stop at contact, and rigidly
//!   attach the object once it is caged.  Opening past the grasped span
//!   releases it; released objects drop to their support height.
//! - Finger and column probes push free objects out of the way; pushes and
//!   carried objects jam against fixtures instead of tunnelling through
//!   them, so e.g. a bin has to be entered from above.
//! - The zero action is an exact fixed point: no state changes except the
//!   step counter.

pub mod registry;
pub mod render;
pub mod snapshot;
pub mod types;

pub use registry::{create_task, task_spec, TASK_NAMES};
pub use render::RenderConfig;
pub use types::*;

use crate::arm::{
    forward_kinematics, inverse_kinematics, JointConfig, ARM_PLANE_Z, COLUMN_RADIUS,
    FINGER_HALF_DEPTH, FINGER_LEN, FINGER_RADIUS, GRIP_RANGE, MAX_APERTURE,
};
use crate::error::SimError;
use crate::geom::{v3, Placed, Vec3};
use crate::grip::GripperGeom;

/// Surface sampling pitch for grasp/blocking point sets.
const GRASP_SAMPLE_SPACING: f64 = 0.004;
/// Extra capture slack while the plates are sweeping inward.
const SWEEP_SLACK: f64 = 0.002;
/// Objects shorter than this never block motion (painted markers).
const BLOCKER_MIN_HEIGHT: f64 = 0.01;
/// Interpenetration deeper than this counts as blocked.
const BLOCK_TOL: f64 = 0.001;
/// How far outside a dial's radius the end-effector still engages it.
const HINGE_GRAB_MARGIN: f64 = 0.02;
/// Engagement radius around a drawer handle.
const HANDLE_GRAB_RADIUS: f64 = 0.06;

/// The simulator: task specification, mutable world state, and cached
/// object surface samples.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub spec: TaskSpec,
    pub state: WorldState,
    pub render_cfg: RenderConfig,
    /// Surface samples in each object's canonical frame (base at origin,
    /// yaw 0, articulation 0); empty for fixtures that are never grasped
    /// or pushed.
    canonical_points: Vec<Vec<Vec3>>,
}

impl Simulator {
    /// Build a registered task and sample its initial state under `seed`.
    pub fn new(task: &str, seed: u64) -> Result<Simulator, SimError> {
        let (spec, state) = create_task(task, seed)?;
        Ok(Simulator::from_parts(spec, state))
    }

    /// Assemble a simulator around an existing state (snapshot loading).
    pub fn from_parts(spec: TaskSpec, state: WorldState) -> Simulator {
        let canonical_points = spec
            .objects
            .iter()
            .map(|o| {
                if !(o.graspable || o.movable) {
                    return Vec::new();
                }
                let canonical = Pose::new(0.0, 0.0, 0.0, 0.0);
                object_primitives(o, &canonical, 0.0)
                    .iter()
                    .flat_map(|p| p.sample_surface(GRASP_SAMPLE_SPACING))
                    .collect()
            })
            .collect();
        Simulator { spec, state, render_cfg: RenderConfig::OFF, canonical_points }
    }

    /// Resample the scene under a new seed and return the first observation.
    pub fn reset(&mut self, seed: u64) -> Observation {
        let (_, state) =
            create_task(&self.spec.name, seed).expect("task was registered at construction");
        self.state = state;
        self.observe()
    }

    /// Step with a fully rendered observation.
    pub fn step(&mut self, action: Action) -> StepOutcome {
        let (reward, done) = self.advance(action);
        StepOutcome { obs: self.observe(), reward, done }
    }

    /// Step without rendering global views; returns (reward, done).  Used
    /// in training hot loops where cameras are not consumed every step.
    pub fn step_lite(&mut self, action: Action) -> (f64, bool) {
        self.advance(action)
    }

    /// The full observation for the current state.
    pub fn observe(&self) -> Observation {
        Observation {
            frames: render::render_all(&self.spec, &self.state, &self.render_cfg),
            local: self.local_features(),
            proprio: self.state.robot,
        }
    }

    pub fn ee(&self) -> Vec3 {
        forward_kinematics(&self.state.robot)
    }

    /// Teleport the arm to `q` (clamped to joint limits), carrying any
    /// attached object rigidly.  No contact resolution happens: callers —
    /// motion-plan executors — are responsible for feeding configurations
    /// already validated as collision-free.
    pub fn set_config(&mut self, q: JointConfig) {
        self.state.robot = q.clamped();
        if let Some(att) = self.state.attachment {
            self.state.poses[att.obj].pos = forward_kinematics(&self.state.robot) + att.rel;
        }
    }

    pub fn centroid_of(&self, i: usize) -> Vec3 {
        object_centroid(&self.spec.objects[i], &self.state.poses[i], self.state.articulations[i])
    }

    pub fn is_attached(&self, i: usize) -> bool {
        self.state.attachment.map_or(false, |a| a.obj == i)
    }

    /// World-frame surface samples of object `i` at its current pose.
    pub fn object_points(&self, i: usize) -> Vec<Vec3> {
        let (base, yaw) = articulated_frame(
            &self.spec.objects[i],
            &self.state.poses[i],
            self.state.articulations[i],
        );
        self.canonical_points[i].iter().map(|&p| p.rot_z(yaw) + base).collect()
    }

    /// Whether the gripper currently cages object `i` (material pressed
    /// against both plates with a near-matching aperture).
    pub fn caged_on(&self, i: usize) -> bool {
        if self.canonical_points[i].is_empty() {
            return false;
        }
        GripperGeom::from_config(&self.state.robot).caged(&self.object_points(i))
    }

    // ------------------------------------------------------------------
    // Stepping
    // ------------------------------------------------------------------

    fn advance(&mut self, action: Action) -> (f64, bool) {
        let a = action.sanitized();
        let phi0 = self.potential();
        let moved = a.d_ee != Vec3::ZERO;
        let gripping = a.grip_cmd != 0.0;
        if moved || gripping {
            let ee_old = forward_kinematics(&self.state.robot);
            if moved {
                self.move_ee(ee_old + a.d_ee);
            }
            let ee_new = forward_kinematics(&self.state.robot);
            if let Some(att) = self.state.attachment {
                self.state.poses[att.obj].pos = ee_new + att.rel;
            }
            if gripping {
                self.update_grip(a.grip_cmd, ee_new);
            }
            self.resolve_pushes(ee_new);
            self.drag_articulations(ee_old, ee_new);
        }
        self.state.step_index += 1;
        let done = self.is_success();
        let reward = match self.spec.reward {
            RewardMode::Dense => self.potential() - phi0 + if done { 1.0 } else { 0.0 },
            RewardMode::Sparse => {
                if done {
                    1.0
                } else {
                    0.0
                }
            }
        };
        (reward, done)
    }

    /// Move the end-effector toward `target`, clamping to the reachable
    /// set.  A carried object that would be driven into a fixture jams the
    /// whole move.
    fn move_ee(&mut self, target: Vec3) {
        let q = match inverse_kinematics(target, &self.state.robot) {
            Ok(q) => q,
            Err(u) => inverse_kinematics(u.clamped, &self.state.robot)
                .expect("clamped target is reachable"),
        }
        .clamped();
        if let Some(att) = self.state.attachment {
            let carried = Pose {
                pos: forward_kinematics(&q) + att.rel,
                yaw: self.state.poses[att.obj].yaw,
            };
            if self.object_blocked(att.obj, &carried) {
                return;
            }
        }
        self.state.robot = q;
    }

    /// Apply the grip rate command: close with squeeze-centering, contact
    /// clamping, and caging attachment, or open with release.
    fn update_grip(&mut self, cmd: f64, ee: Vec3) {
        let g0 = self.state.robot.grip;
        let g1 = (g0 + GRIP_RATE * cmd).clamp(GRIP_RANGE.0, GRIP_RANGE.1);
        if g1 == g0 {
            return;
        }
        let ap0 = MAX_APERTURE * g0;
        let mut ap1 = MAX_APERTURE * g1;
        if ap1 < ap0 {
            if let Some(att) = self.state.attachment {
                // Already holding something: the plates stay at its span.
                ap1 = ap1.max(att.span).min(ap0);
            } else {
                ap1 = self.close_on_material(ee, ap0, ap1);
            }
        } else if let Some(att) = self.state.attachment {
            // Fully retracted plates always release, even a snug span.
            if ap1 > att.span + RELEASE_MARGIN || ap1 >= MAX_APERTURE {
                self.state.attachment = None;
                self.settle(att.obj);
            }
        }
        self.state.robot.grip = ap1 / MAX_APERTURE;
    }

    /// Closing step: find the best-captured free object, squeeze it toward
    /// the gripper center, stop the plates at contact, and attach if caged.
    /// Returns the realized aperture.
    fn close_on_material(&mut self, ee: Vec3, ap0: f64, ap1: f64) -> f64 {
        let sweep = (ap0 - ap1) / 2.0 + SWEEP_SLACK;
        let grip = |aperture| GripperGeom { center: ee, aperture };
        let mut best: Option<(usize, usize)> = None;
        for (i, o) in self.spec.objects.iter().enumerate() {
            if !o.graspable || !o.movable || o.articulation.is_some() {
                continue;
            }
            if let Some(span) = grip(ap1).capture_span(&self.object_points(i), sweep) {
                if best.map_or(true, |(_, n)| span.n > n) {
                    best = Some((i, span.n));
                }
            }
        }
        let Some((i, _)) = best else {
            return ap1;
        };
        // Squeeze-centering: the first plate to touch pushes the object
        // toward the middle of the gripper.
        if let Some(span) = grip(ap1).capture_span(&self.object_points(i), sweep) {
            let shift = span.center().clamp(-sweep, sweep);
            let centered = Pose {
                pos: self.state.poses[i].pos - v3(shift, 0.0, 0.0),
                yaw: self.state.poses[i].yaw,
            };
            if shift != 0.0 && !self.object_blocked(i, &centered) {
                self.state.poses[i].pos = centered.pos;
            }
        }
        let pts = self.object_points(i);
        let Some(span) = grip(ap1).capture_span(&pts, sweep) else {
            return ap1;
        };
        // Contact clamp: plates stop at the material (they can only close).
        let ap = ap1.max(span.width()).min(ap0);
        if grip(ap).caged(&pts) {
            self.state.attachment = Some(Attachment {
                obj: i,
                rel: self.state.poses[i].pos - ee,
                span: span.width(),
            });
        }
        ap
    }

    /// Drop object `i` straight down onto whatever supports it.
    fn settle(&mut self, i: usize) {
        self.state.poses[i].pos.z = self.rest_z(i);
    }

    /// Support height under object `i` at its current xy position: tray
    /// floors and walls, object tops, and ring-over-peg pass-through.
    fn rest_z(&self, i: usize) -> f64 {
        let center = self.centroid_of(i);
        let ring_r_in = match self.spec.objects[i].shape {
            ObjectShape::Ring { r_in, .. } => Some(r_in),
            _ => None,
        };
        let mut support: f64 = 0.0;
        for (j, o) in self.spec.objects.iter().enumerate() {
            if j == i || self.is_attached(j) {
                continue;
            }
            let pose = &self.state.poses[j];
            match o.shape {
                ObjectShape::Tray { hx, hy, wall_h, t } => {
                    let local = (v3(center.x, center.y, 0.0) - v3(pose.pos.x, pose.pos.y, 0.0))
                        .rot_z(-pose.yaw);
                    if local.x.abs() < hx - t && local.y.abs() < hy - t {
                        support = support.max(pose.pos.z + t);
                    } else if local.x.abs() < hx && local.y.abs() < hy {
                        support = support.max(pose.pos.z + wall_h);
                    }
                }
                ObjectShape::Cylinder { r, h } => {
                    let d = center.dist_xy(pose.pos);
                    if let Some(r_in) = ring_r_in {
                        // A ring whose hole clears the cylinder slides all
                        // the way down around it.
                        if d + r <= r_in {
                            continue;
                        }
                        if d - self.ring_r_out(i) <= r {
                            support = support.max(pose.pos.z + h);
                        }
                    } else if d <= r {
                        support = support.max(pose.pos.z + h);
                    }
                }
                _ => {
                    for p in
                        object_primitives(o, pose, self.state.articulations[j])
                    {
                        if p.footprint_dist_xy(center) <= 1e-9 {
                            support = support.max(p.base.z + p.height());
                        }
                    }
                }
            }
        }
        support
    }

    fn ring_r_out(&self, i: usize) -> f64 {
        match self.spec.objects[i].shape {
            ObjectShape::Ring { r_out, .. } => r_out,
            _ => 0.0,
        }
    }

    /// Finger and column probes shove free objects out of the way; a shove
    /// that would drive an object into a fixture jams instead.
    fn resolve_pushes(&mut self, ee: Vec3) {
        let q = &self.state.robot;
        let half_gap = q.aperture() / 2.0 + FINGER_RADIUS;
        let tip = q.d_z;
        let mut probes: Vec<(Vec3, f64, f64, f64)> = Vec::with_capacity(7);
        for side in [-1.0, 1.0] {
            for dy in [-(FINGER_HALF_DEPTH - FINGER_RADIUS), 0.0, FINGER_HALF_DEPTH - FINGER_RADIUS]
            {
                probes.push((
                    v3(ee.x + side * half_gap, ee.y + dy, 0.0),
                    FINGER_RADIUS,
                    tip,
                    tip + FINGER_LEN,
                ));
            }
        }
        probes.push((v3(ee.x, ee.y, 0.0), COLUMN_RADIUS, tip + FINGER_LEN, ARM_PLANE_Z));

        for i in 0..self.spec.objects.len() {
            if !self.spec.objects[i].movable || self.is_attached(i) {
                continue;
            }
            for &(c, r, zlo, zhi) in &probes {
                let pose = self.state.poses[i];
                let top = pose.pos.z + self.spec.objects[i].shape.height();
                let lo = zlo.max(pose.pos.z);
                let hi = zhi.min(top);
                if lo >= hi {
                    continue;
                }
                let probe = v3(c.x, c.y, (lo + hi) / 2.0);
                let prims = object_primitives(
                    &self.spec.objects[i],
                    &pose,
                    self.state.articulations[i],
                );
                let sd = |p: Vec3| {
                    prims.iter().map(|pr| pr.signed_dist(p)).fold(f64::INFINITY, f64::min)
                };
                let d = sd(probe);
                if d >= r {
                    continue;
                }
                let h = 1e-5;
                let gx = (sd(probe + v3(h, 0.0, 0.0)) - sd(probe - v3(h, 0.0, 0.0))) / (2.0 * h);
                let gy = (sd(probe + v3(0.0, h, 0.0)) - sd(probe - v3(0.0, h, 0.0))) / (2.0 * h);
                let g = v3(gx, gy, 0.0);
                let dir = if g.norm() > 1e-9 {
                    g.normalized()
                } else {
                    let away = self.centroid_of(i) - probe;
                    if away.norm_xy() > 1e-9 {
                        v3(away.x, away.y, 0.0).normalized()
                    } else {
                        v3(1.0, 0.0, 0.0)
                    }
                };
                let push = dir * -(r - d + 1e-6);
                let mut candidate = pose;
                candidate.pos = candidate.pos + push;
                candidate.pos.x = candidate.pos.x.clamp(0.02, 0.98);
                candidate.pos.y = candidate.pos.y.clamp(0.02, 0.98);
                if !self.object_blocked(i, &candidate) {
                    self.state.poses[i] = candidate;
                }
            }
        }
    }

    /// Whether object `i` at `pose` would interpenetrate any other
    /// blocking object (taller than a painted marker).
    fn object_blocked(&self, i: usize, pose: &Pose) -> bool {
        if self.canonical_points[i].is_empty() {
            return false;
        }
        let (base, yaw) = articulated_frame(&self.spec.objects[i], pose, self.state.articulations[i]);
        let pts: Vec<Vec3> = self.canonical_points[i]
            .iter()
            .step_by(3)
            .map(|&p| p.rot_z(yaw) + base)
            .collect();
        for (j, o) in self.spec.objects.iter().enumerate() {
            if j == i || o.shape.height() < BLOCKER_MIN_HEIGHT {
                continue;
            }
            for prim in object_primitives(o, &self.state.poses[j], self.state.articulations[j]) {
                // Coarse reject before point-wise tests.
                if prim.hull_dist(v3(base.x, base.y, prim.base.z)) > 0.3 {
                    continue;
                }
                if pts.iter().any(|&p| prim.signed_dist(p) < -BLOCK_TOL) {
                    return true;
                }
            }
        }
        false
    }

    /// Drag articulated fixtures whose engagement zone contains the
    /// end-effector: dial rims follow the angular sweep around their axis,
    /// drawer handles follow motion along their slide axis.
    fn drag_articulations(&mut self, ee_old: Vec3, ee_new: Vec3) {
        for i in 0..self.spec.objects.len() {
            let Some(art) = self.spec.objects[i].articulation else {
                continue;
            };
            let pose = self.state.poses[i];
            let top = pose.pos.z + self.spec.objects[i].shape.height();
            match art {
                Articulation::Hinge { lo, hi } => {
                    let r = match self.spec.objects[i].shape {
                        ObjectShape::Cylinder { r, .. } => r,
                        _ => continue,
                    };
                    if self.state.robot.d_z > top + 0.005 {
                        continue;
                    }
                    let axis = pose.pos;
                    let d0 = ee_old.dist_xy(axis);
                    let d1 = ee_new.dist_xy(axis);
                    let engaged = |d: f64| (0.012..=r + HINGE_GRAB_MARGIN).contains(&d);
                    if engaged(d0) && engaged(d1) {
                        let a0 = (ee_old.y - axis.y).atan2(ee_old.x - axis.x);
                        let a1 = (ee_new.y - axis.y).atan2(ee_new.x - axis.x);
                        let da = crate::arm::wrap_pi(a1 - a0);
                        self.state.articulations[i] =
                            (self.state.articulations[i] + da).clamp(lo, hi);
                    }
                }
                Articulation::Prismatic { axis_yaw, lo, hi } => {
                    if self.state.robot.d_z > top + 0.01 {
                        continue;
                    }
                    let handle = self.handle_point(i);
                    if ee_old.dist_xy(handle) <= HANDLE_GRAB_RADIUS {
                        let dir = v3(axis_yaw.cos(), axis_yaw.sin(), 0.0);
                        let dv = (ee_new - ee_old).dot(dir);
                        self.state.articulations[i] =
                            (self.state.articulations[i] + dv).clamp(lo, hi);
                    }
                }
            }
        }
    }

    /// The point a drawer-like fixture is dragged by: the center of the
    /// face that leads in the slide direction.
    pub fn handle_point(&self, i: usize) -> Vec3 {
        let o = &self.spec.objects[i];
        let pose = &self.state.poses[i];
        let c = object_centroid(o, pose, self.state.articulations[i]);
        match o.articulation {
            Some(Articulation::Prismatic { axis_yaw, .. }) => {
                let dir = v3(axis_yaw.cos(), axis_yaw.sin(), 0.0);
                let ext = match o.shape {
                    ObjectShape::Cuboid { hx, hy, .. } => {
                        // Support extent of the yaw-rotated box along dir.
                        let d = dir.rot_z(-pose.yaw);
                        d.x.abs() * hx + d.y.abs() * hy
                    }
                    ObjectShape::Cylinder { r, .. } | ObjectShape::Ring { r_out: r, .. } => r,
                    ObjectShape::Tray { hx, hy, .. } => hx.max(hy),
                };
                c + dir * ext
            }
            _ => c,
        }
    }

    // ------------------------------------------------------------------
    // Goals and rewards
    // ------------------------------------------------------------------

    pub fn is_success(&self) -> bool {
        self.spec.goals.iter().all(|g| self.goal_met(g))
    }

    pub fn goal_met(&self, g: &Goal) -> bool {
        let st = &self.state;
        match *g {
            Goal::Place { obj, dest, tol } => {
                let floor = match self.spec.objects[dest].shape {
                    ObjectShape::Tray { t, .. } => st.poses[dest].pos.z + t,
                    _ => st.poses[dest].pos.z,
                };
                self.centroid_of(obj).dist_xy(self.centroid_of(dest)) <= tol
                    && !self.is_attached(obj)
                    && st.poses[obj].pos.z <= floor + 0.002
            }
            Goal::PlaceOn { obj, dest, tol } => {
                self.centroid_of(obj).dist_xy(self.centroid_of(dest)) <= tol
                    && !self.is_attached(obj)
                    && st.poses[obj].pos.z <= st.poses[dest].pos.z + 0.002
            }
            Goal::LiftTo { obj, rise } => {
                st.poses[obj].pos.z >= st.init_poses[obj].pos.z + rise
            }
            Goal::PushToward { obj, goal, dist } => self.push_progress(obj, goal) >= dist,
            Goal::HingeTo { obj, angle } => st.articulations[obj] >= angle,
            Goal::SlideTo { obj, dist } => st.articulations[obj] >= dist,
        }
    }

    /// Displacement of `obj` since reset, projected on the initial
    /// direction toward `goal`.
    pub fn push_progress(&self, obj: usize, goal: usize) -> f64 {
        let init = self.state.init_poses[obj].pos;
        let target = object_centroid(
            &self.spec.objects[goal],
            &self.state.poses[goal],
            self.state.articulations[goal],
        );
        let to_goal = v3(target.x - init.x, target.y - init.y, 0.0);
        if to_goal.norm_xy() < 1e-9 {
            return 0.0;
        }
        let dir = to_goal.normalized();
        (self.state.poses[obj].pos - init).dot(dir)
    }

    /// Monotone progress potential: 1.5 per completed goal (in order) plus
    /// a staged term for the first incomplete one.  The dense per-step
    /// reward is the increase of this potential, so idling earns nothing
    /// and undoing progress is punished.
    pub fn potential(&self) -> f64 {
        let mut phi = 0.0;
        for g in &self.spec.goals {
            if self.goal_met(g) {
                phi += 1.5;
            } else {
                return phi + self.staged_term(g);
            }
        }
        phi
    }

    /// Within-goal shaping.  Far phase: negative distance to the point the
    /// hand should reach.  Engaged phase: 0.5 minus a scaled shortfall,
    /// tuned so every phase transition is a reward increase.
    fn staged_term(&self, g: &Goal) -> f64 {
        let ee = self.ee();
        match *g {
            Goal::Place { obj, dest, .. } | Goal::PlaceOn { obj, dest, .. } => {
                if self.is_attached(obj) {
                    0.5 - self.centroid_of(obj).dist_xy(self.centroid_of(dest))
                } else {
                    -ee.dist(self.grasp_point(obj))
                }
            }
            Goal::LiftTo { obj, rise } => {
                if self.is_attached(obj) {
                    let shortfall = (self.state.init_poses[obj].pos.z + rise
                        - self.state.poses[obj].pos.z)
                        .max(0.0);
                    0.5 - 4.0 * shortfall
                } else {
                    -ee.dist(self.grasp_point(obj))
                }
            }
            Goal::PushToward { obj, goal, dist } => {
                let c = self.centroid_of(obj);
                let top = self.state.poses[obj].pos.z + self.spec.objects[obj].shape.height();
                if ee.dist_xy(c) <= 0.07 && self.state.robot.d_z <= top + 0.01 {
                    0.5 - 3.0 * (dist - self.push_progress(obj, goal)).max(0.0)
                } else {
                    let target = object_centroid(
                        &self.spec.objects[goal],
                        &self.state.poses[goal],
                        self.state.articulations[goal],
                    );
                    let away = v3(c.x - target.x, c.y - target.y, 0.0);
                    let behind = if away.norm_xy() > 1e-9 {
                        c + away.normalized() * 0.05
                    } else {
                        c
                    };
                    -ee.dist(v3(behind.x, behind.y, (top - 0.01).max(0.005)))
                }
            }
            Goal::HingeTo { obj, angle } => {
                let pose = self.state.poses[obj];
                let r = match self.spec.objects[obj].shape {
                    ObjectShape::Cylinder { r, .. } => r,
                    _ => 0.03,
                };
                let top = pose.pos.z + self.spec.objects[obj].shape.height();
                let d = ee.dist_xy(pose.pos);
                if (0.012..=r + HINGE_GRAB_MARGIN).contains(&d)
                    && self.state.robot.d_z <= top + 0.005
                {
                    0.5 - 0.22 * (angle - self.state.articulations[obj]).max(0.0)
                } else {
                    let out = v3(ee.x - pose.pos.x, ee.y - pose.pos.y, 0.0);
                    let dir = if out.norm_xy() > 1e-9 { out.normalized() } else { v3(1.0, 0.0, 0.0) };
                    let rim = pose.pos + dir * r;
                    -ee.dist(v3(rim.x, rim.y, (top - 0.01).max(0.0)))
                }
            }
            Goal::SlideTo { obj, dist } => {
                let handle = self.handle_point(obj);
                let top = self.state.poses[obj].pos.z + self.spec.objects[obj].shape.height();
                if ee.dist_xy(handle) <= HANDLE_GRAB_RADIUS
                    && self.state.robot.d_z <= top + 0.01
                {
                    0.5 - 3.0 * (dist - self.state.articulations[obj]).max(0.0)
                } else {
                    -ee.dist(v3(handle.x, handle.y, (top - 0.005).max(0.0)))
                }
            }
        }
    }

    /// Where the hand should go to grasp object `i`: the centroid, except
    /// for rings, which are grasped at the nearest point of the tube.
    pub fn grasp_point(&self, i: usize) -> Vec3 {
        let c = self.centroid_of(i);
        match self.spec.objects[i].shape {
            ObjectShape::Ring { r_in, r_out, .. } => {
                let ee = self.ee();
                let out = v3(ee.x - c.x, ee.y - c.y, 0.0);
                let dir = if out.norm_xy() > 1e-9 { out.normalized() } else { v3(1.0, 0.0, 0.0) };
                c + dir * ((r_in + r_out) / 2.0)
            }
            _ => c,
        }
    }

    // ------------------------------------------------------------------
    // Feature vectors
    // ------------------------------------------------------------------

    /// Compact local view: up to `K_LOCAL` nearest object centroids within
    /// `LOCAL_RADIUS` of the hand (relative coordinates, zero-padded,
    /// nearest first), then aperture, attachment flag, and hand height.
    pub fn local_features(&self) -> Vec<f64> {
        let ee = self.ee();
        let mut near: Vec<(f64, usize)> = (0..self.spec.objects.len())
            .filter_map(|i| {
                let d = self.centroid_of(i).dist(ee);
                (d <= LOCAL_RADIUS).then_some((d, i))
            })
            .collect();
        near.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
        let mut f = Vec::with_capacity(LOCAL_DIM);
        for k in 0..K_LOCAL {
            if let Some(&(_, i)) = near.get(k) {
                let rel = self.centroid_of(i) - ee;
                f.extend_from_slice(&[rel.x, rel.y, rel.z]);
            } else {
                f.extend_from_slice(&[0.0, 0.0, 0.0]);
            }
        }
        f.push(self.state.robot.aperture());
        f.push(if self.state.attachment.is_some() { 1.0 } else { 0.0 });
        f.push(self.state.robot.d_z);
        f
    }

    /// Full-state view for monolithic policies: proprioception, hand pose,
    /// every object centroid, and every articulation value.
    pub fn global_features(&self) -> Vec<f64> {
        let q = &self.state.robot;
        let ee = self.ee();
        let mut f = vec![
            q.theta1,
            q.theta2,
            q.d_z,
            q.grip,
            ee.x,
            ee.y,
            ee.z,
            if self.state.attachment.is_some() { 1.0 } else { 0.0 },
        ];
        for i in 0..self.spec.objects.len() {
            let c = self.centroid_of(i);
            f.extend_from_slice(&[c.x, c.y, c.z]);
        }
        for (i, o) in self.spec.objects.iter().enumerate() {
            if o.articulation.is_some() {
                f.push(self.state.articulations[i]);
            }
        }
        f
    }

    /// Length of `global_features` for a task.
    pub fn global_dim(spec: &TaskSpec) -> usize {
        8 + 3 * spec.objects.len()
            + spec.objects.iter().filter(|o| o.articulation.is_some()).count()
    }
}

/// World-frame placement (base point and yaw) of an object's canonical
/// frame, accounting for its articulation value.
fn articulated_frame(spec: &ObjectSpec, pose: &Pose, value: f64) -> (Vec3, f64) {
    let mut base = pose.pos;
    let mut yaw = pose.yaw;
    match spec.articulation {
        Some(Articulation::Prismatic { axis_yaw, .. }) => {
            base = base + v3(axis_yaw.cos(), axis_yaw.sin(), 0.0) * value;
        }
        Some(Articulation::Hinge { .. }) => yaw += value,
        None => {}
    }
    (base, yaw)
}

/// All solid primitives of the scene's objects with their instance ids.
pub fn scene_primitives(spec: &TaskSpec, state: &WorldState) -> Vec<(u16, Placed)> {
    let mut out = Vec::new();
    for (i, o) in spec.objects.iter().enumerate() {
        for p in object_primitives(o, &state.poses[i], state.articulations[i]) {
            out.push((object_id(i), p));
        }
    }
    out
}
