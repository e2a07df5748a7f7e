//! Analytic 3-D primitives shared by the simulator, the renderer, and the
//! collision checker: vectors, solid shapes, exact point distances, ray
//! intersections, and deterministic surface sampling.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Plain 3-D vector used across the crate (points, directions, deltas).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const fn v3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

impl Vec3 {
    pub const ZERO: Vec3 = v3(0.0, 0.0, 0.0);

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_xy(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n == 0.0 {
            Vec3::ZERO
        } else {
            self / n
        }
    }

    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn dist_xy(self, o: Vec3) -> f64 {
        (self - o).norm_xy()
    }

    /// Rotate about the +z axis by `yaw` radians.
    pub fn rot_z(self, yaw: f64) -> Vec3 {
        let (s, c) = yaw.sin_cos();
        v3(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        v3(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        v3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        v3(self.x * k, self.y * k, self.z * k)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, k: f64) -> Vec3 {
        v3(self.x / k, self.y / k, self.z / k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        v3(-self.x, -self.y, -self.z)
    }
}

/// Solid primitives. Boxes use half-extents; cylinders and rings sit with
/// their base at local z = 0 and their axis along +z. Capsules are given by
/// their two segment endpoints (world frame) and radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solid {
    Cuboid { hx: f64, hy: f64, hz: f64 },
    Cylinder { r: f64, h: f64 },
    Ring { r_in: f64, r_out: f64, h: f64 },
}

/// A solid placed in the world. `center` is the xy position of the solid's
/// vertical axis and the z of its *base*; `yaw` rotates it about +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placed {
    pub solid: Solid,
    pub base: Vec3,
    pub yaw: f64,
}

impl Placed {
    pub fn new(solid: Solid, base: Vec3, yaw: f64) -> Placed {
        Placed { solid, base, yaw }
    }

    /// Height of the solid above its base plane.
    pub fn height(&self) -> f64 {
        match self.solid {
            Solid::Cuboid { hz, .. } => 2.0 * hz,
            Solid::Cylinder { h, .. } | Solid::Ring { h, .. } => h,
        }
    }

    /// Geometric (volume) centroid in world coordinates.
    pub fn centroid(&self) -> Vec3 {
        self.base + v3(0.0, 0.0, self.height() / 2.0)
    }

    /// Map a world point into the solid's local frame (base at origin,
    /// yaw removed).
    fn to_local(&self, p: Vec3) -> Vec3 {
        (p - self.base).rot_z(-self.yaw)
    }

    /// Exact distance from `p` to the solid's surface: negative inside,
    /// positive outside.
    pub fn signed_dist(&self, p: Vec3) -> f64 {
        let q = self.to_local(p);
        match self.solid {
            Solid::Cuboid { hx, hy, hz } => {
                // Shift so the box is centered at the origin in z as well.
                let q = v3(q.x, q.y, q.z - hz);
                sd_box(q, v3(hx, hy, hz))
            }
            Solid::Cylinder { r, h } => sd_rect_of_revolution(q, 0.0, r, h),
            Solid::Ring { r_in, r_out, h } => sd_rect_of_revolution(q, r_in, r_out, h),
        }
    }

    pub fn dist(&self, p: Vec3) -> f64 {
        self.signed_dist(p).max(0.0)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.signed_dist(p) <= 0.0
    }

    /// Distance from `p` to the solid's convex hull (a ring's hull fills in
    /// the hole, other solids are already convex).
    pub fn hull_dist(&self, p: Vec3) -> f64 {
        match self.solid {
            Solid::Ring { r_out, h, .. } => Placed {
                solid: Solid::Cylinder { r: r_out, h },
                ..*self
            }
            .dist(p),
            _ => self.dist(p),
        }
    }

    /// First intersection of the ray `origin + t * dir` (t > 1e-9) with the
    /// solid's surface, or None.
    pub fn ray_hit(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let o = self.to_local(origin);
        let d = dir.rot_z(-self.yaw);
        match self.solid {
            Solid::Cuboid { hx, hy, hz } => {
                ray_box(v3(o.x, o.y, o.z - hz), d, v3(hx, hy, hz))
            }
            Solid::Cylinder { r, h } => ray_revolved_rect(o, d, 0.0, r, h),
            Solid::Ring { r_in, r_out, h } => ray_revolved_rect(o, d, r_in, r_out, h),
        }
    }

    /// Deterministic sample of surface points with roughly `spacing` meter
    /// pitch, in world coordinates.
    pub fn sample_surface(&self, spacing: f64) -> Vec<Vec3> {
        let local = match self.solid {
            Solid::Cuboid { hx, hy, hz } => sample_box(hx, hy, hz, spacing),
            Solid::Cylinder { r, h } => sample_revolved(0.0, r, h, spacing),
            Solid::Ring { r_in, r_out, h } => sample_revolved(r_in, r_out, h, spacing),
        };
        local
            .into_iter()
            .map(|q| q.rot_z(self.yaw) + self.base)
            .collect()
    }

    /// Distance in the xy plane from point `p` to the solid's footprint
    /// (0 when inside the footprint).
    pub fn footprint_dist_xy(&self, p: Vec3) -> f64 {
        let q = self.to_local(v3(p.x, p.y, 0.0));
        match self.solid {
            Solid::Cuboid { hx, hy, .. } => {
                let dx = (q.x.abs() - hx).max(0.0);
                let dy = (q.y.abs() - hy).max(0.0);
                (dx * dx + dy * dy).sqrt()
            }
            Solid::Cylinder { r, .. } | Solid::Ring { r_out: r, .. } => {
                (q.norm_xy() - r).max(0.0)
            }
        }
    }
}

/// Signed distance to an origin-centered axis-aligned box with half extents
/// `h`.
fn sd_box(p: Vec3, h: Vec3) -> f64 {
    let q = v3(p.x.abs() - h.x, p.y.abs() - h.y, p.z.abs() - h.z);
    let outside = v3(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

/// Signed distance to the solid of revolution whose radial cross-section is
/// the rectangle [r_in, r_out] x [0, h]: a cylinder when r_in = 0, otherwise
/// a ring.
fn sd_rect_of_revolution(p: Vec3, r_in: f64, r_out: f64, h: f64) -> f64 {
    let rho = p.norm_xy();
    // 2-D box distance in the (rho, z) half-plane.
    let cx = (r_in + r_out) / 2.0;
    let hx = (r_out - r_in) / 2.0;
    let dx = (rho - cx).abs() - hx;
    let dz = (p.z - h / 2.0).abs() - h / 2.0;
    let outside = (dx.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
    let inside = dx.max(dz).min(0.0);
    outside + inside
}

/// Distance from point `p` to the capsule with segment [a, b] and radius
/// `r`: the standard segment-clamp form.
pub fn capsule_dist(p: Vec3, a: Vec3, b: Vec3, r: f64) -> f64 {
    let pa = p - a;
    let ba = b - a;
    let denom = ba.dot(ba);
    let h = if denom == 0.0 {
        0.0
    } else {
        (pa.dot(ba) / denom).clamp(0.0, 1.0)
    };
    (pa - ba * h).norm() - r
}

/// Ray vs origin-centered axis-aligned box via the slab method. Returns the
/// smallest positive hit parameter.
fn ray_box(o: Vec3, d: Vec3, h: Vec3) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (oc, dc, hc) in [(o.x, d.x, h.x), (o.y, d.y, h.y), (o.z, d.z, h.z)] {
        if dc.abs() < 1e-15 {
            if oc.abs() > hc {
                return None;
            }
        } else {
            let ta = (-hc - oc) / dc;
            let tb = (hc - oc) / dc;
            let (ta, tb) = if ta < tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
    }
    let eps = 1e-9;
    if t0 > eps {
        Some(t0)
    } else if t1 > eps {
        Some(t1)
    } else {
        None
    }
}

/// Ray vs solid of revolution (cylinder or ring) in local coordinates.
fn ray_revolved_rect(o: Vec3, d: Vec3, r_in: f64, r_out: f64, h: f64) -> Option<f64> {
    let eps = 1e-9;
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t > eps && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    };

    // Lateral surfaces: |xy| = radius, z in [0, h].
    for radius in [r_out, r_in] {
        if radius <= 0.0 {
            continue;
        }
        let a = d.x * d.x + d.y * d.y;
        if a < 1e-15 {
            continue;
        }
        let b = 2.0 * (o.x * d.x + o.y * d.y);
        let c = o.x * o.x + o.y * o.y - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            continue;
        }
        let s = disc.sqrt();
        for t in [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)] {
            let z = o.z + t * d.z;
            if (0.0..=h).contains(&z) {
                consider(t);
            }
        }
    }

    // Caps: z = 0 and z = h with r_in <= |xy| <= r_out.
    if d.z.abs() > 1e-15 {
        for plane in [0.0, h] {
            let t = (plane - o.z) / d.z;
            let x = o.x + t * d.x;
            let y = o.y + t * d.y;
            let rho = (x * x + y * y).sqrt();
            if rho >= r_in - 1e-12 && rho <= r_out + 1e-12 {
                consider(t);
            }
        }
    }
    best
}

/// Ray vs capsule [a, b] radius r, world frame. Returns smallest positive t.
pub fn ray_capsule(origin: Vec3, dir: Vec3, a: Vec3, b: Vec3, r: f64) -> Option<f64> {
    let eps = 1e-9;
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t > eps && best.map_or(true, |v| t < v) {
            best = Some(t);
        }
    };

    let ba = b - a;
    let oa = origin - a;
    let baba = ba.dot(ba);

    if baba > 1e-15 {
        // Infinite cylinder around the segment axis (multiplied through by
        // |ba|^2 so it holds for any ray direction length).
        let bard = ba.dot(dir);
        let baoa = ba.dot(oa);
        let a2 = baba * dir.dot(dir) - bard * bard;
        let b2 = baba * oa.dot(dir) - baoa * bard;
        let c2 = baba * oa.dot(oa) - baoa * baoa - r * r * baba;
        let disc = b2 * b2 - a2 * c2;
        if a2.abs() > 1e-15 && disc >= 0.0 {
            let s = disc.sqrt();
            for t in [(-b2 - s) / a2, (-b2 + s) / a2] {
                let y = baoa + t * bard;
                if y >= 0.0 && y <= baba {
                    consider(t);
                }
            }
        }
    }

    // Sphere caps.
    for cap in [a, b] {
        let oc = origin - cap;
        let b2 = oc.dot(dir);
        let c2 = oc.dot(oc) - r * r;
        let disc = b2 * b2 - c2;
        if disc >= 0.0 {
            let s = disc.sqrt();
            consider(-b2 - s);
            consider(-b2 + s);
        }
    }
    best
}

fn sample_box(hx: f64, hy: f64, hz: f64, spacing: f64) -> Vec<Vec3> {
    let mut pts = Vec::new();
    let steps = |len: f64| ((len / spacing).ceil() as usize).max(1);
    let (nx, ny, nz) = (steps(2.0 * hx), steps(2.0 * hy), steps(2.0 * hz));
    let lin = |i: usize, n: usize, half: f64| -half + (i as f64 + 0.5) * (2.0 * half / n as f64);
    // Top and bottom faces.
    for i in 0..nx {
        for j in 0..ny {
            let (x, y) = (lin(i, nx, hx), lin(j, ny, hy));
            pts.push(v3(x, y, 2.0 * hz));
            pts.push(v3(x, y, 0.0));
        }
    }
    // Side faces.
    for k in 0..nz {
        let z = hz + lin(k, nz, hz);
        for i in 0..nx {
            let x = lin(i, nx, hx);
            pts.push(v3(x, -hy, z));
            pts.push(v3(x, hy, z));
        }
        for j in 0..ny {
            let y = lin(j, ny, hy);
            pts.push(v3(-hx, y, z));
            pts.push(v3(hx, y, z));
        }
    }
    pts
}

fn sample_revolved(r_in: f64, r_out: f64, h: f64, spacing: f64) -> Vec<Vec3> {
    let mut pts = Vec::new();
    let ring_pts = |radius: f64| ((2.0 * std::f64::consts::PI * radius / spacing).ceil() as usize).max(4);
    let nz = ((h / spacing).ceil() as usize).max(1);
    // Lateral surfaces.
    for radius in [r_out, r_in] {
        if radius <= 0.0 {
            continue;
        }
        let n = ring_pts(radius);
        for k in 0..nz {
            let z = (k as f64 + 0.5) * h / nz as f64;
            for i in 0..n {
                let ang = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                pts.push(v3(radius * ang.cos(), radius * ang.sin(), z));
            }
        }
    }
    // Caps (annulus or disk), sampled on concentric rings.
    let nr = (((r_out - r_in) / spacing).ceil() as usize).max(1);
    for k in 0..nr {
        let radius = r_in + (k as f64 + 0.5) * (r_out - r_in) / nr as f64;
        let n = ring_pts(radius.max(spacing));
        for i in 0..n {
            let ang = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            for z in [0.0, h] {
                pts.push(v3(radius * ang.cos(), radius * ang.sin(), z));
            }
        }
    }
    pts
}
