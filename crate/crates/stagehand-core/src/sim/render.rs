//! Analytic depth rendering.
//!
//! Two orthographic cameras observe the table: one straight down, one at 45
//! degrees from the west.  Every pixel ray is intersected against the table
//! plane, the robot's capsule model, and each object's solid primitives;
//! the nearest hit wins.  Depth is the ray parameter, so back-projection
//! through the camera model is exact.  The instance-id channel can be
//! corrupted (erosion of mask borders, then random label flips) to mimic a
//! trained segmentation model; depth itself stays clean.

use super::types::*;
use super::{scene_primitives, TaskSpec, WorldState};
use crate::arm::body_capsules;
use crate::geom::{ray_capsule, v3, Placed, Solid, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Square resolution of both cameras.
pub const CAM_RES: usize = 96;

/// Segmentation corruption knobs.  `OFF` renders perfect masks; `noisy()`
/// is the default imperfect-perception setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    /// Per-pixel probability that the instance id is replaced by a
    /// uniformly random one.
    pub p_flip: f64,
    /// Chebyshev radius of mask-border erosion (borders become table).
    pub r_erode: usize,
}

impl RenderConfig {
    pub const OFF: RenderConfig = RenderConfig { p_flip: 0.0, r_erode: 0 };

    /// Default corruption level for imperfect segmentation.
    pub fn noisy() -> RenderConfig {
        RenderConfig { p_flip: 0.02, r_erode: 1 }
    }
}

/// The straight-down camera, covering the whole 1 m x 1 m table.
pub fn top_camera() -> CameraModel {
    let px = 1.0 / CAM_RES as f64;
    CameraModel {
        width: CAM_RES,
        height: CAM_RES,
        origin: v3(0.0, 0.0, 1.0),
        du: v3(px, 0.0, 0.0),
        dv: v3(0.0, px, 0.0),
        dir: v3(0.0, 0.0, -1.0),
    }
}

/// The 45-degree camera looking down-east from above the west edge.  Rows
/// scan a vertical start plane, so the ground trace spans the full table.
pub fn oblique_camera() -> CameraModel {
    let px = 1.0 / CAM_RES as f64;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CameraModel {
        width: CAM_RES,
        height: CAM_RES,
        origin: v3(-0.2, 0.0, 1.2),
        du: v3(0.0, px, 0.0),
        dv: v3(0.0, 0.0, -px),
        dir: v3(s, 0.0, -s),
    }
}

pub fn camera(index: usize) -> CameraModel {
    match index {
        0 => top_camera(),
        _ => oblique_camera(),
    }
}

/// Render both cameras.
pub fn render_all(spec: &TaskSpec, state: &WorldState, cfg: &RenderConfig) -> Vec<DepthFrame> {
    vec![render(spec, state, cfg, 0), render(spec, state, cfg, 1)]
}

/// Bounding sphere for a quick ray reject.
fn bound_of(p: &Placed) -> (Vec3, f64) {
    match p.solid {
        Solid::Cuboid { hx, hy, hz } => {
            (p.base + v3(0.0, 0.0, hz), (hx * hx + hy * hy + hz * hz).sqrt())
        }
        Solid::Cylinder { r, h } | Solid::Ring { r_out: r, h, .. } => {
            (p.base + v3(0.0, 0.0, h / 2.0), (r * r + h * h / 4.0).sqrt())
        }
    }
}

fn ray_misses_sphere(o: Vec3, d: Vec3, c: Vec3, r: f64) -> bool {
    let m = c - o;
    let proj = m.dot(d);
    if proj < -r {
        return true;
    }
    m.dot(m) - proj * proj > r * r
}

/// Render one camera: nearest-surface depth and instance ids, then the
/// configured segmentation corruption.
pub fn render(spec: &TaskSpec, state: &WorldState, cfg: &RenderConfig, cam_index: usize) -> DepthFrame {
    let cam = camera(cam_index);
    let prims = scene_primitives(spec, state);
    let bounds: Vec<(Vec3, f64)> = prims.iter().map(|(_, p)| bound_of(p)).collect();
    let caps = body_capsules(&state.robot);
    let cap_bounds: Vec<(Vec3, f64)> = caps
        .iter()
        .map(|c| ((c.a + c.b) * 0.5, (c.b - c.a).norm() / 2.0 + c.r))
        .collect();

    let n = cam.width * cam.height;
    let mut depth = vec![0.0; n];
    let mut ids = vec![ID_TABLE; n];
    for row in 0..cam.height {
        for col in 0..cam.width {
            let o = cam.ray_start(row, col);
            let d = cam.dir;
            // The table is an infinite plane at z = 0, so every ray hits.
            let mut best = o.z / -d.z;
            let mut id = ID_TABLE;
            for (k, (obj_id, p)) in prims.iter().enumerate() {
                let (c, r) = bounds[k];
                if ray_misses_sphere(o, d, c, r) {
                    continue;
                }
                if let Some(t) = p.ray_hit(o, d) {
                    if t < best {
                        best = t;
                        id = *obj_id;
                    }
                }
            }
            for (k, c) in caps.iter().enumerate() {
                let (bc, br) = cap_bounds[k];
                if ray_misses_sphere(o, d, bc, br) {
                    continue;
                }
                if let Some(t) = ray_capsule(o, d, c.a, c.b, c.r) {
                    if t < best {
                        best = t;
                        id = ID_ROBOT;
                    }
                }
            }
            let i = row * cam.width + col;
            depth[i] = best;
            ids[i] = id;
        }
    }

    if cfg.r_erode > 0 {
        ids = erode(&ids, cam.width, cam.height, cfg.r_erode);
    }
    if cfg.p_flip > 0.0 {
        flip(&mut ids, spec.objects.len() + 2, cfg.p_flip, state, cam_index);
    }

    let mut legend = vec!["table".to_string(), "robot".to_string()];
    legend.extend(spec.objects.iter().map(|o| o.label.clone()));
    DepthFrame { camera: cam, depth, ids, legend }
}

/// Per-class erosion: a non-table pixel keeps its id only if every
/// neighbor within Chebyshev radius `r` (inside the image) agrees.
fn erode(ids: &[u16], w: usize, h: usize, r: usize) -> Vec<u16> {
    let r = r as isize;
    let mut out = ids.to_vec();
    for row in 0..h as isize {
        for col in 0..w as isize {
            let id = ids[row as usize * w + col as usize];
            if id == ID_TABLE {
                continue;
            }
            'scan: for dr in -r..=r {
                for dc in -r..=r {
                    let (nr, nc) = (row + dr, col + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    if ids[nr as usize * w + nc as usize] != id {
                        out[row as usize * w + col as usize] = ID_TABLE;
                        break 'scan;
                    }
                }
            }
        }
    }
    out
}

/// Random label flips, deterministically seeded by (episode seed, step,
/// camera).
fn flip(ids: &mut [u16], n_ids: usize, p: f64, state: &WorldState, cam_index: usize) {
    let seed = state
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(state.step_index.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(cam_index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in ids.iter_mut() {
        if rng.gen::<f64>() < p {
            *v = rng.gen_range(0..n_ids as u16);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Simulator;

    fn scene() -> Simulator {
        Simulator::new("PickPlaceCan", 3).unwrap()
    }

    #[test]
    fn every_ray_hits_and_table_pixels_backproject_to_the_table() {
        let s = scene();
        for frame in render_all(&s.spec, &s.state, &RenderConfig::OFF) {
            for row in 0..CAM_RES {
                for col in 0..CAM_RES {
                    let (d, id) = frame.at(row, col);
                    assert!(d.is_finite() && d > 0.0);
                    if id == ID_TABLE {
                        let p = frame.camera.back_project(row, col, d);
                        assert!(p.z.abs() < 1e-9, "table depth wrong at ({row},{col})");
                    }
                }
            }
        }
    }

    #[test]
    fn object_pixels_backproject_onto_object_surfaces() {
        let s = scene();
        let prims = super::scene_primitives(&s.spec, &s.state);
        for frame in render_all(&s.spec, &s.state, &RenderConfig::OFF) {
            let mut checked = 0;
            for row in 0..CAM_RES {
                for col in 0..CAM_RES {
                    let (d, id) = frame.at(row, col);
                    if id < 2 {
                        continue;
                    }
                    let p = frame.camera.back_project(row, col, d);
                    let best = prims
                        .iter()
                        .filter(|(pid, _)| *pid == id)
                        .map(|(_, pr)| pr.signed_dist(p).abs())
                        .fold(f64::INFINITY, f64::min);
                    assert!(best < 1e-7, "pixel ({row},{col}) off-surface by {best}");
                    checked += 1;
                }
            }
            assert!(checked > 20, "too few object pixels to trust this test");
        }
    }

    #[test]
    fn both_cameras_see_every_object_and_the_robot() {
        let s = scene();
        for (ci, frame) in render_all(&s.spec, &s.state, &RenderConfig::OFF)
            .iter()
            .enumerate()
        {
            for i in 0..s.spec.objects.len() {
                let n = frame.mask_pixel_count(object_id(i));
                assert!(n > 3, "camera {ci}: object {i} has only {n} pixels");
            }
            assert!(frame.mask_pixel_count(ID_ROBOT) > 3, "camera {ci}: robot invisible");
        }
    }

    #[test]
    fn top_view_mask_centroid_matches_object_position() {
        let mut s = scene();
        // Park the arm off-table as a scan would, so the mask is unoccluded.
        s.state.robot = crate::arm::JointConfig::parked();
        let frame = render(&s.spec, &s.state, &RenderConfig::OFF, 0);
        let can = s.centroid_of(0);
        let mut sum = v3(0.0, 0.0, 0.0);
        let mut n = 0.0;
        for row in 0..CAM_RES {
            for col in 0..CAM_RES {
                let (d, id) = frame.at(row, col);
                if id == object_id(0) {
                    let p = frame.camera.back_project(row, col, d);
                    sum = sum + p;
                    n += 1.0;
                }
            }
        }
        let est = sum * (1.0 / n);
        assert!(
            est.dist_xy(can) < 0.006,
            "top-view centroid off by {}",
            est.dist_xy(can)
        );
    }

    #[test]
    fn rendering_is_deterministic_and_corruption_is_seeded() {
        let s = scene();
        let noisy = RenderConfig::noisy();
        let a = render(&s.spec, &s.state, &noisy, 0);
        let b = render(&s.spec, &s.state, &noisy, 0);
        assert_eq!(a, b, "same state and config must render identically");
        let mut s2 = scene();
        s2.state.step_index += 1;
        let c = render(&s2.spec, &s2.state, &noisy, 0);
        assert_ne!(a.ids, c.ids, "corruption should vary with the step index");
        // Depth is never corrupted.
        assert_eq!(a.depth, c.depth);
    }

    #[test]
    fn erosion_shrinks_masks_and_flips_hit_about_p_fraction() {
        let s = scene();
        let clean = render(&s.spec, &s.state, &RenderConfig::OFF, 0);
        let eroded = render(
            &s.spec,
            &s.state,
            &RenderConfig { p_flip: 0.0, r_erode: 1 },
            0,
        );
        for i in 0..s.spec.objects.len() {
            let id = object_id(i);
            assert!(
                eroded.mask_pixel_count(id) < clean.mask_pixel_count(id),
                "erosion did not shrink mask {i}"
            );
        }
        let flipped = render(
            &s.spec,
            &s.state,
            &RenderConfig { p_flip: 0.05, r_erode: 0 },
            0,
        );
        let changed = clean
            .ids
            .iter()
            .zip(&flipped.ids)
            .filter(|(a, b)| a != b)
            .count() as f64;
        let n = (CAM_RES * CAM_RES) as f64;
        // A flip may keep the old id, so the observed rate is slightly
        // below p; allow a generous band.
        let rate = changed / n;
        assert!(
            rate > 0.02 && rate < 0.08,
            "flip rate {rate} far from configured 0.05"
        );
    }

    #[test]
    fn oblique_camera_sees_vertical_faces_the_top_camera_cannot() {
        // A can's lateral surface is invisible from straight above but
        // visible from the west at 45 degrees.
        let s = scene();
        let oblique = render(&s.spec, &s.state, &RenderConfig::OFF, 1);
        let mut lateral = 0;
        for row in 0..CAM_RES {
            for col in 0..CAM_RES {
                let (d, id) = oblique.at(row, col);
                if id == object_id(0) {
                    let p = oblique.camera.back_project(row, col, d);
                    // Points clearly below the top face are lateral hits.
                    if p.z < 0.030 {
                        lateral += 1;
                    }
                }
            }
        }
        assert!(lateral > 2, "no lateral surface visible obliquely");
    }
}
