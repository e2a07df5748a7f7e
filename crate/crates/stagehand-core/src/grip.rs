//! Gripper capture geometry and the caging test.
//!
//! The parallel gripper closes along the world x axis. A point can be
//! captured if it sits between the finger plates: within the aperture along
//! x, within the plate depth along y, and within the finger length above
//! the fingertip plane. An object is *caged* when captured material presses
//! against both finger plates (within a small contact tolerance) and the
//! aperture is no wider than the captured span plus a small margin — i.e.
//! the fingers actually enclose it rather than hovering around it.

use crate::arm::{forward_kinematics, JointConfig, FINGER_HALF_DEPTH, FINGER_LEN, FINGER_RADIUS};
use crate::geom::Vec3;

/// Captured material may be this far from a finger plate and still count as
/// touching it.
pub const CONTACT_TOL: f64 = 0.003;
/// The aperture may exceed the captured span by this much and still cage.
pub const CAGE_APERTURE_MARGIN: f64 = 0.005;
/// Points may start slightly below the fingertip plane and still be
/// captured (surface sampling slack).
const BELOW_TIP_SLACK: f64 = 0.002;
/// Extent of a finger plate beyond its inner face along the closing axis.
const PLATE_DEPTH: f64 = 2.0 * FINGER_RADIUS;

/// Gripper pose reduced to what capture needs: fingertip-center position
/// and the current opening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperGeom {
    pub center: Vec3,
    pub aperture: f64,
}

impl GripperGeom {
    pub fn from_config(q: &JointConfig) -> GripperGeom {
        GripperGeom { center: forward_kinematics(q), aperture: q.aperture() }
    }

    /// Offset along the closing axis if `p` is between the plates, else
    /// None. `slack` widens the capture region along x (used to find
    /// material the fingers are *about* to touch while closing).
    pub fn capture_dx(&self, p: Vec3, slack: f64) -> Option<f64> {
        let d = p - self.center;
        let within_x = d.x.abs() <= self.aperture / 2.0 + slack;
        let within_y = d.y.abs() <= FINGER_HALF_DEPTH;
        let within_z = d.z >= -BELOW_TIP_SLACK && d.z <= FINGER_LEN;
        (within_x && within_y && within_z).then_some(d.x)
    }

    /// Span statistics of the captured subset of `points`.
    pub fn capture_span(&self, points: &[Vec3], slack: f64) -> Option<CaptureSpan> {
        let mut min_dx = f64::INFINITY;
        let mut max_dx = f64::NEG_INFINITY;
        let mut n = 0usize;
        for &p in points {
            if let Some(dx) = self.capture_dx(p, slack) {
                min_dx = min_dx.min(dx);
                max_dx = max_dx.max(dx);
                n += 1;
            }
        }
        (n > 0).then_some(CaptureSpan { min_dx, max_dx, n })
    }

    /// The caging predicate over an object point cloud: captured points
    /// exist on both sides, each side touches its plate within
    /// `CONTACT_TOL`, the aperture does not exceed the captured span by
    /// more than `CAGE_APERTURE_MARGIN`, and no material occupies the
    /// plate volumes themselves (which the plates could never have closed
    /// through, e.g. an annulus straddled across its hole).
    pub fn caged(&self, points: &[Vec3]) -> bool {
        let Some(span) = self.capture_span(points, 0.0) else {
            return false;
        };
        let plate = self.aperture / 2.0;
        let blocked = points.iter().any(|&p| {
            let d = p - self.center;
            let ax = d.x.abs();
            ax > plate + CONTACT_TOL
                && ax <= plate + PLATE_DEPTH
                && d.y.abs() <= FINGER_HALF_DEPTH
                && d.z >= -BELOW_TIP_SLACK
                && d.z <= FINGER_LEN
        });
        !blocked
            && span.max_dx >= plate - CONTACT_TOL
            && span.min_dx <= -(plate - CONTACT_TOL)
            && self.aperture <= span.width() + CAGE_APERTURE_MARGIN
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureSpan {
    pub min_dx: f64,
    pub max_dx: f64,
    pub n: usize,
}

impl CaptureSpan {
    pub fn width(&self) -> f64 {
        self.max_dx - self.min_dx
    }

    /// Midpoint offset of the captured material along the closing axis.
    pub fn center(&self) -> f64 {
        (self.max_dx + self.min_dx) / 2.0
    }
}
