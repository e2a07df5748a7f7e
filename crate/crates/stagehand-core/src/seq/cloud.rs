//! Scene point clouds: back-projection from depth views, workspace crop,
//! voxel downsampling, statistical outlier removal, robot-point removal,
//! and a plain-text serialization for golden tests.

use std::collections::HashMap;

use crate::arm::Capsule;
use crate::error::SeqError;
use crate::geom::{capsule_dist, v3, Vec3};
use crate::sim::DepthFrame;

/// Voxel edge length for downsampling, meters.
pub const VOXEL_SIZE: f64 = 0.005;
/// Neighbor count for the statistical outlier filter.
pub const OUTLIER_NEIGHBORS: usize = 20;
/// Points whose mean neighbor distance exceeds mean + this many stds go.
pub const OUTLIER_STD_FACTOR: f64 = 2.0;
/// Unlabeled points this close to a robot capsule are treated as robot.
pub const ROBOT_POINT_GUARD: f64 = 0.01;

/// A labeled set of 3-D points in the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Per-point instance ids (mask ids), when known.
    pub labels: Option<Vec<u16>>,
}

impl PointCloud {
    pub fn empty() -> PointCloud {
        PointCloud { points: Vec::new(), labels: Some(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self, i: usize) -> Option<u16> {
        self.labels.as_ref().map(|l| l[i])
    }

    /// Keep exactly the points where `pred` holds.
    fn retain_indices(&self, pred: impl Fn(usize) -> bool) -> PointCloud {
        let points: Vec<Vec3> =
            (0..self.len()).filter(|&i| pred(i)).map(|i| self.points[i]).collect();
        let labels = self.labels.as_ref().map(|l| {
            (0..l.len()).filter(|&i| pred(i)).map(|i| l[i]).collect()
        });
        PointCloud { points, labels }
    }
}

/// Axis-aligned workspace bounds used to crop scene clouds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workspace {
    pub min: Vec3,
    pub max: Vec3,
}

impl Workspace {
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// Default planning workspace: the unit table up to 0.4 m. The lower z bound
/// sits just above the support plane so the table surface itself is not an
/// obstacle (the prismatic joint's own limit keeps the arm from diving
/// below it), while every object — including the 4 mm goal marker — stays.
pub const WORKSPACE: Workspace = Workspace {
    min: Vec3 { x: 0.0, y: 0.0, z: 0.003 },
    max: Vec3 { x: 1.0, y: 1.0, z: 0.4 },
};

/// Back-project every finite depth pixel of every view into the world frame,
/// carrying instance labels.
pub fn project_point_cloud(frames: &[DepthFrame]) -> PointCloud {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for frame in frames {
        for row in 0..frame.camera.height {
            for col in 0..frame.camera.width {
                let (depth, id) = frame.at(row, col);
                if depth.is_finite() {
                    points.push(frame.camera.back_project(row, col, depth));
                    labels.push(id);
                }
            }
        }
    }
    PointCloud { points, labels: Some(labels) }
}

fn voxel_key(p: Vec3, cell: f64) -> (i64, i64, i64) {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

/// Voxel downsample: one representative per occupied cell — the centroid of
/// the cell's members, labeled by majority vote (smallest id wins ties).
/// Output is ordered by cell key, so the result is deterministic.
fn voxel_downsample(pc: &PointCloud, cell: f64) -> PointCloud {
    struct CellAcc {
        sum: Vec3,
        n: usize,
        label_votes: Vec<(u16, usize)>,
    }
    let mut cells: HashMap<(i64, i64, i64), CellAcc> = HashMap::new();
    for (i, &p) in pc.points.iter().enumerate() {
        let acc = cells.entry(voxel_key(p, cell)).or_insert(CellAcc {
            sum: Vec3::ZERO,
            n: 0,
            label_votes: Vec::new(),
        });
        acc.sum = acc.sum + p;
        acc.n += 1;
        if let Some(label) = pc.label(i) {
            match acc.label_votes.iter_mut().find(|(l, _)| *l == label) {
                Some((_, count)) => *count += 1,
                None => acc.label_votes.push((label, 1)),
            }
        }
    }
    let mut keys: Vec<(i64, i64, i64)> = cells.keys().copied().collect();
    keys.sort_unstable();
    let mut points = Vec::with_capacity(keys.len());
    let mut labels = pc.labels.as_ref().map(|_| Vec::with_capacity(keys.len()));
    for key in keys {
        let acc = &cells[&key];
        points.push(acc.sum * (1.0 / acc.n as f64));
        if let Some(labels) = labels.as_mut() {
            let best = acc
                .label_votes
                .iter()
                .copied()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("labeled cloud has votes in every occupied cell");
            labels.push(best.0);
        }
    }
    PointCloud { points, labels }
}

/// Statistical outlier removal: drop points whose mean distance to their
/// `k` nearest neighbors exceeds mean + `factor`·std of that statistic over
/// the whole cloud. `k` shrinks to n−1 on small clouds; clouds of ≤ 2 points
/// are returned unchanged.
fn remove_outliers(pc: &PointCloud, k: usize, factor: f64) -> PointCloud {
    let n = pc.len();
    if n <= 2 {
        return pc.clone();
    }
    let k = k.min(n - 1);
    let hash = SpatialHash::build(&pc.points, VOXEL_SIZE * 2.0);
    let means: Vec<f64> =
        (0..n).map(|i| hash.knn_mean_distance(&pc.points, i, k)).collect();
    let mean = means.iter().sum::<f64>() / n as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n as f64;
    let threshold = mean + factor * var.sqrt();
    pc.retain_indices(|i| means[i] <= threshold)
}

/// Crop to the workspace, voxel-downsample, then remove statistical
/// outliers. Errors when nothing survives the crop.
pub fn preprocess_cloud(pc: &PointCloud, workspace: &Workspace) -> Result<PointCloud, SeqError> {
    let cropped = pc.retain_indices(|i| workspace.contains(pc.points[i]));
    if cropped.is_empty() {
        return Err(SeqError::EmptyCloudError);
    }
    let down = voxel_downsample(&cropped, VOXEL_SIZE);
    Ok(remove_outliers(&down, OUTLIER_NEIGHBORS, OUTLIER_STD_FACTOR))
}

/// Remove every point labeled with one of `remove_ids`, plus any point
/// (whatever its label claims) within [`ROBOT_POINT_GUARD`] of a robot
/// capsule — the guard catches robot pixels whose labels were corrupted.
pub fn remove_robot_points(
    pc: &PointCloud,
    remove_ids: &[u16],
    robot: &[Capsule],
) -> PointCloud {
    pc.retain_indices(|i| {
        if pc.label(i).is_some_and(|l| remove_ids.contains(&l)) {
            return false;
        }
        let p = pc.points[i];
        !robot.iter().any(|c| capsule_dist(p, c.a, c.b, c.r) <= ROBOT_POINT_GUARD)
    })
}

// ---------------------------------------------------------------------------
// Spatial hash
// ---------------------------------------------------------------------------

/// Uniform-grid index over a fixed point set, for exact k-NN and range
/// queries without O(n²) scans.
pub struct SpatialHash {
    cell: f64,
    map: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl SpatialHash {
    pub fn build(points: &[Vec3], cell: f64) -> SpatialHash {
        let mut map: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, &p) in points.iter().enumerate() {
            map.entry(voxel_key(p, cell)).or_default().push(i as u32);
        }
        SpatialHash { cell, map }
    }

    /// Indices of all points within Chebyshev cell radius `r` of `p`'s cell.
    fn cell_candidates(&self, p: Vec3, r: i64, out: &mut Vec<u32>) {
        out.clear();
        let (cx, cy, cz) = voxel_key(p, self.cell);
        for ix in cx - r..=cx + r {
            for iy in cy - r..=cy + r {
                for iz in cz - r..=cz + r {
                    if let Some(bucket) = self.map.get(&(ix, iy, iz)) {
                        out.extend_from_slice(bucket);
                    }
                }
            }
        }
    }

    /// Exact mean distance from point `i` to its `k` nearest neighbors.
    /// Grows the search ring until the k-th distance is provably inside the
    /// covered radius.
    fn knn_mean_distance(&self, points: &[Vec3], i: usize, k: usize) -> f64 {
        let p = points[i];
        let mut candidates = Vec::new();
        let mut ring = 1i64;
        loop {
            self.cell_candidates(p, ring, &mut candidates);
            // Distances to everything gathered so far, excluding self.
            let mut dists: Vec<f64> = candidates
                .iter()
                .filter(|&&j| j as usize != i)
                .map(|&j| points[j as usize].dist(p))
                .collect();
            if dists.len() >= k {
                dists.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                let kth = dists[k - 1];
                // Chebyshev ring r covers every point within (r−1)·cell.
                if kth <= (ring - 1) as f64 * self.cell {
                    return dists[..k].iter().sum::<f64>() / k as f64;
                }
            }
            ring += 1;
        }
    }

    /// Indices of all points possibly within `radius` of segment [a, b];
    /// exact distances are the caller's to check.
    pub fn segment_candidates(&self, a: Vec3, b: Vec3, radius: f64, out: &mut Vec<u32>) {
        out.clear();
        let pad = radius + self.cell;
        let lo = v3(a.x.min(b.x) - pad, a.y.min(b.y) - pad, a.z.min(b.z) - pad);
        let hi = v3(a.x.max(b.x) + pad, a.y.max(b.y) + pad, a.z.max(b.z) + pad);
        let (x0, y0, z0) = voxel_key(lo, self.cell);
        let (x1, y1, z1) = voxel_key(hi, self.cell);
        for ix in x0..=x1 {
            for iy in y0..=y1 {
                for iz in z0..=z1 {
                    if let Some(bucket) = self.map.get(&(ix, iy, iz)) {
                        out.extend_from_slice(bucket);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Plain-text serialization
// ---------------------------------------------------------------------------

/// Serialize as a line-oriented text file:
///
/// ```text
/// cloud v1
/// point 0.25 0.5 0.035 4
/// point 0.1 0.2 0.0
/// ```
///
/// The trailing field is the optional per-point label. Floats use the
/// shortest representation that round-trips exactly.
pub fn write_cloud(pc: &PointCloud) -> String {
    let mut out = String::from("cloud v1\n");
    for (i, p) in pc.points.iter().enumerate() {
        out.push_str(&format!("point {:?} {:?} {:?}", p.x, p.y, p.z));
        if let Some(label) = pc.label(i) {
            out.push_str(&format!(" {label}"));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`write_cloud`], with line-numbered errors.
pub fn parse_cloud(text: &str) -> Result<PointCloud, SeqError> {
    let err = |line: usize, msg: &str| SeqError::CloudParse { line, msg: msg.to_string() };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "cloud v1")) => {}
        _ => return Err(err(1, "expected header `cloud v1`")),
    }
    let mut points = Vec::new();
    let mut labels: Vec<u16> = Vec::new();
    let mut labeled = 0usize;
    for (idx, line) in lines {
        let n = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        if fields.next() != Some("point") {
            return Err(err(n, "expected `point x y z [label]`"));
        }
        let mut coord = || -> Result<f64, SeqError> {
            fields
                .next()
                .ok_or_else(|| err(n, "missing coordinate"))?
                .parse::<f64>()
                .map_err(|_| err(n, "bad float"))
        };
        let (x, y, z) = (coord()?, coord()?, coord()?);
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(err(n, "non-finite coordinate"));
        }
        points.push(v3(x, y, z));
        match fields.next() {
            Some(field) => {
                labels.push(field.parse::<u16>().map_err(|_| err(n, "bad label"))?);
                labeled += 1;
            }
            None => {}
        }
        if fields.next().is_some() {
            return Err(err(n, "trailing fields"));
        }
    }
    if labeled != 0 && labeled != points.len() {
        return Err(err(1, "labels must be present on all points or none"));
    }
    let labels = if labeled == points.len() && labeled > 0 { Some(labels) } else { None };
    Ok(PointCloud { points, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::types::CameraModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // ---- oracles ----

    /// Brute-force voxel grouping: map of cell key → member indices.
    fn voxel_groups_oracle(points: &[Vec3], cell: f64) -> HashMap<(i64, i64, i64), Vec<usize>> {
        let mut groups: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, &p) in points.iter().enumerate() {
            groups.entry(voxel_key(p, cell)).or_default().push(i);
        }
        groups
    }

    /// Brute-force mean distance to the k nearest neighbors.
    fn knn_mean_oracle(points: &[Vec3], i: usize, k: usize) -> f64 {
        let mut dists: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| q.dist(points[i]))
            .collect();
        dists.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        dists[..k].iter().sum::<f64>() / k as f64
    }

    /// Brute-force outlier set under the mean + factor·std rule.
    fn outlier_set_oracle(points: &[Vec3], k: usize, factor: f64) -> Vec<usize> {
        let n = points.len();
        let k = k.min(n - 1);
        let means: Vec<f64> = (0..n).map(|i| knn_mean_oracle(points, i, k)).collect();
        let mean = means.iter().sum::<f64>() / n as f64;
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n as f64;
        let thr = mean + factor * var.sqrt();
        (0..n).filter(|&i| means[i] > thr).collect()
    }

    fn synthetic_frame(pixels: &[(usize, usize, f64, u16)]) -> DepthFrame {
        let camera = CameraModel {
            width: 8,
            height: 8,
            origin: v3(0.0, 0.0, 1.0),
            du: v3(1.0 / 96.0, 0.0, 0.0),
            dv: v3(0.0, 1.0 / 96.0, 0.0),
            dir: v3(0.0, 0.0, -1.0),
        };
        let mut depth = vec![f64::NAN; 64];
        let mut ids = vec![0u16; 64];
        for &(row, col, d, id) in pixels {
            depth[row * 8 + col] = d;
            ids[row * 8 + col] = id;
        }
        DepthFrame { camera, depth, ids, legend: vec!["table".into(), "robot".into()] }
    }

    // ---- projection ----

    #[test]
    fn single_pixel_back_projects_to_the_hand_computed_point() {
        // Ray start: origin + du·(col+0.5) + dv·(row+0.5) with col=20? col
        // must fit an 8-wide frame: use col=3, row=5, depth 0.6.
        // start = (3.5/96, 5.5/96, 1.0); point = start + 0.6·(0,0,−1).
        let frame = synthetic_frame(&[(5, 3, 0.6, 7)]);
        let pc = project_point_cloud(std::slice::from_ref(&frame));
        assert_eq!(pc.len(), 1);
        let expected = v3(3.5 / 96.0, 5.5 / 96.0, 0.4);
        assert!(pc.points[0].dist(expected) < 1e-12);
        assert_eq!(pc.label(0), Some(7));
    }

    #[test]
    fn all_invalid_depth_projects_to_an_empty_cloud() {
        let frame = synthetic_frame(&[]);
        let pc = project_point_cloud(std::slice::from_ref(&frame));
        assert!(pc.is_empty());
    }

    #[test]
    fn two_views_union_covers_each_single_view() {
        let sim = crate::sim::Simulator::new("PickPlaceCan", 3).unwrap();
        let frames = sim.observe().frames;
        let both = project_point_cloud(&frames);
        let top = project_point_cloud(std::slice::from_ref(&frames[0]));
        let obl = project_point_cloud(std::slice::from_ref(&frames[1]));
        assert_eq!(both.len(), top.len() + obl.len());
    }

    // ---- voxel downsampling ----

    #[test]
    fn coincident_points_collapse_to_one() {
        let pc = PointCloud {
            points: vec![v3(0.21, 0.47, 0.012); 1000],
            labels: Some(vec![3; 1000]),
        };
        let down = voxel_downsample(&pc, VOXEL_SIZE);
        assert_eq!(down.len(), 1);
        assert!(down.points[0].dist(v3(0.21, 0.47, 0.012)) < 1e-12);
        assert_eq!(down.label(0), Some(3));
    }

    #[test]
    fn well_separated_grid_survives_downsampling_intact() {
        // 0.01 m spacing on a 0.005 m grid: every point in its own voxel.
        let mut points = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                points.push(v3(0.1 + 0.01 * i as f64 + 0.001, 0.2 + 0.01 * j as f64 + 0.001, 0.05));
            }
        }
        let oracle = voxel_groups_oracle(&points, VOXEL_SIZE);
        assert!(oracle.values().all(|group| group.len() == 1), "oracle: one point per cell");
        let pc = PointCloud { points: points.clone(), labels: None };
        let down = voxel_downsample(&pc, VOXEL_SIZE);
        assert_eq!(down.len(), points.len());
    }

    #[test]
    fn voxel_centroid_and_majority_label_match_the_group_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Vec3> = (0..500)
            .map(|_| {
                v3(rng.gen_range(0.0..0.08), rng.gen_range(0.0..0.08), rng.gen_range(0.0..0.03))
            })
            .collect();
        let labels: Vec<u16> = (0..500).map(|_| rng.gen_range(0..4)).collect();
        let pc = PointCloud { points: points.clone(), labels: Some(labels.clone()) };
        let down = voxel_downsample(&pc, VOXEL_SIZE);
        let oracle = voxel_groups_oracle(&points, VOXEL_SIZE);
        assert_eq!(down.len(), oracle.len());
        for (i, &p) in down.points.iter().enumerate() {
            let group = &oracle[&voxel_key(p, VOXEL_SIZE)];
            let centroid = group.iter().fold(Vec3::ZERO, |acc, &g| acc + points[g])
                * (1.0 / group.len() as f64);
            assert!(p.dist(centroid) < 1e-9, "representative must be the member centroid");
            // Majority label with smallest-id tie-break.
            let mut counts: HashMap<u16, usize> = HashMap::new();
            for &g in group {
                *counts.entry(labels[g]).or_default() += 1;
            }
            let best = counts
                .iter()
                .map(|(&l, &c)| (c, std::cmp::Reverse(l)))
                .max()
                .map(|(_, std::cmp::Reverse(l))| l)
                .unwrap();
            assert_eq!(down.label(i), Some(best));
        }
    }

    // ---- outlier removal ----

    #[test]
    fn isolated_points_far_from_a_plane_cluster_are_removed() {
        // A dense plane patch plus 5 isolated points 0.2 m away.
        let mut points = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                points.push(v3(0.3 + 0.005 * i as f64, 0.3 + 0.005 * j as f64, 0.05));
            }
        }
        let strays = [
            v3(0.6, 0.6, 0.25),
            v3(0.1, 0.8, 0.3),
            v3(0.8, 0.1, 0.28),
            v3(0.05, 0.05, 0.22),
            v3(0.9, 0.9, 0.26),
        ];
        points.extend_from_slice(&strays);
        let expected_removed = outlier_set_oracle(&points, OUTLIER_NEIGHBORS, OUTLIER_STD_FACTOR);
        assert_eq!(expected_removed, vec![400, 401, 402, 403, 404], "oracle flags the strays");

        let pc = PointCloud { points, labels: None };
        let cleaned = remove_outliers(&pc, OUTLIER_NEIGHBORS, OUTLIER_STD_FACTOR);
        assert_eq!(cleaned.len(), 400);
        assert!(cleaned.points.iter().all(|p| p.z < 0.1), "only plane points remain");
    }

    #[test]
    fn grid_knn_matches_the_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Vec3> = (0..300)
            .map(|_| v3(rng.gen_range(0.0..0.3), rng.gen_range(0.0..0.3), rng.gen_range(0.0..0.1)))
            .collect();
        let hash = SpatialHash::build(&points, VOXEL_SIZE * 2.0);
        for i in (0..points.len()).step_by(7) {
            let fast = hash.knn_mean_distance(&points, i, 20);
            let slow = knn_mean_oracle(&points, i, 20);
            assert!(
                (fast - slow).abs() < 1e-12,
                "point {i}: grid {fast} vs brute force {slow}"
            );
        }
    }

    #[test]
    fn tiny_clouds_pass_through_outlier_removal() {
        let pc = PointCloud { points: vec![v3(0.1, 0.1, 0.1), v3(0.9, 0.9, 0.3)], labels: None };
        assert_eq!(remove_outliers(&pc, OUTLIER_NEIGHBORS, OUTLIER_STD_FACTOR).len(), 2);
    }

    // ---- preprocess ----

    #[test]
    fn preprocessing_crops_the_table_plane_and_out_of_bounds_points() {
        let pc = PointCloud {
            points: vec![
                v3(0.5, 0.5, 0.0),    // table plane: below z_min
                v3(0.5, 0.5, 0.02),   // kept
                v3(1.4, 0.5, 0.02),   // outside x
                v3(0.5, 0.5, 0.45),   // above z_max
            ],
            labels: Some(vec![0, 4, 4, 4]),
        };
        let out = preprocess_cloud(&pc, &WORKSPACE).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out.points[0].dist(v3(0.5, 0.5, 0.02)) < 1e-12);
    }

    #[test]
    fn preprocessing_an_out_of_workspace_cloud_is_an_error() {
        let pc = PointCloud { points: vec![v3(2.0, 2.0, 2.0)], labels: None };
        assert!(matches!(preprocess_cloud(&pc, &WORKSPACE), Err(SeqError::EmptyCloudError)));
    }

    #[test]
    fn point_count_never_increases_and_no_two_points_share_a_voxel() {
        let sim = crate::sim::Simulator::new("CanBread", 9).unwrap();
        let frames = sim.observe().frames;
        let raw = project_point_cloud(&frames);
        let pre = preprocess_cloud(&raw, &WORKSPACE).unwrap();
        assert!(pre.len() <= raw.len());
        let mut seen = std::collections::HashSet::new();
        for &p in &pre.points {
            assert!(seen.insert(voxel_key(p, VOXEL_SIZE)), "two points share a voxel");
        }
    }

    // ---- robot removal ----

    #[test]
    fn robot_labeled_points_are_removed_and_others_kept_exactly() {
        let capsules = crate::arm::body_capsules(&crate::arm::JointConfig::home());
        let pc = PointCloud {
            points: vec![v3(0.5, 0.6, 0.25), v3(0.2, 0.2, 0.01)],
            labels: Some(vec![crate::sim::types::ID_ROBOT, 5]),
        };
        let out = remove_robot_points(&pc, &[crate::sim::types::ID_ROBOT], &capsules);
        assert_eq!(out.len(), 1);
        assert_eq!(out.label(0), Some(5));
        assert!(out.points[0].dist(v3(0.2, 0.2, 0.01)) < 1e-12);
    }

    #[test]
    fn mislabeled_points_near_a_link_are_removed_by_the_proximity_guard() {
        let q = crate::arm::JointConfig::home();
        let capsules = crate::arm::body_capsules(&q);
        // Points displaced perpendicular to the first link's axis (the
        // link runs along +y at the home configuration), one just off the
        // surface and one well away, both labeled as an object.
        let link = &capsules[0];
        let mid = (link.a + link.b) * 0.5;
        let near = v3(mid.x + link.r + 0.004, mid.y, mid.z);
        let far = v3(mid.x + link.r + 0.05, mid.y, mid.z);
        assert!(capsule_dist(near, link.a, link.b, link.r) <= ROBOT_POINT_GUARD);
        assert!(capsule_dist(far, link.a, link.b, link.r) > ROBOT_POINT_GUARD);
        let pc = PointCloud { points: vec![near, far], labels: Some(vec![5, 5]) };
        let out = remove_robot_points(&pc, &[crate::sim::types::ID_ROBOT], &capsules);
        assert_eq!(out.len(), 1);
        assert!(out.points[0].dist(far) < 1e-12);
    }

    #[test]
    fn a_cloud_of_only_robot_points_empties() {
        let q = crate::arm::JointConfig::home();
        let capsules = crate::arm::body_capsules(&q);
        let ee = crate::arm::forward_kinematics(&q);
        let pc = PointCloud {
            points: vec![ee, ee + v3(0.0, 0.0, 0.05)],
            labels: Some(vec![crate::sim::types::ID_ROBOT; 2]),
        };
        assert!(remove_robot_points(&pc, &[crate::sim::types::ID_ROBOT], &capsules).is_empty());
    }

    // ---- text round-trip ----

    #[test]
    fn cloud_text_round_trips_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pc = PointCloud {
            points: (0..50)
                .map(|_| {
                    v3(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.4))
                })
                .collect(),
            labels: Some((0..50).map(|_| rng.gen_range(0..9)).collect()),
        };
        let text = write_cloud(&pc);
        let parsed = parse_cloud(&text).unwrap();
        assert_eq!(parsed, pc);
        assert_eq!(write_cloud(&parsed), text);

        let unlabeled = PointCloud { points: pc.points.clone(), labels: None };
        let text = write_cloud(&unlabeled);
        assert_eq!(parse_cloud(&text).unwrap(), unlabeled);
    }

    #[test]
    fn malformed_cloud_lines_report_their_line_number() {
        let bad = "cloud v1\npoint 0.1 0.2 0.3\npoint oops 0.2 0.3\n";
        match parse_cloud(bad) {
            Err(SeqError::CloudParse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("bad float"));
            }
            other => panic!("expected CloudParse, got {other:?}"),
        }
        assert!(matches!(
            parse_cloud("not a cloud"),
            Err(SeqError::CloudParse { line: 1, .. })
        ));
        assert!(matches!(
            parse_cloud("cloud v1\npoint 0.1 0.2 0.3 4\npoint 0.1 0.2 0.3\n"),
            Err(SeqError::CloudParse { line: 1, .. })
        ));
    }
}
