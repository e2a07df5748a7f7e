//! Segmentation mask cleanup. Rendered instance ids arrive with salt-and-
//! pepper corruption; before back-projecting an object's pixels we fill
//! holes punched into its silhouette and drop stray pixels elsewhere.

use crate::sim::DepthFrame;

/// A cleaned boolean mask over one frame's pixels: the largest 4-connected
/// component of `ids == id`, with enclosed holes filled first. Returns all
/// `false` when the id appears nowhere.
pub fn refine_mask(ids: &[u16], width: usize, height: usize, id: u16) -> Vec<bool> {
    let mut mask: Vec<bool> = ids.iter().map(|&v| v == id).collect();
    if !mask.iter().any(|&m| m) {
        return mask;
    }
    fill_enclosed_holes(&mut mask, width, height);
    keep_largest_component(&mut mask, width, height);
    mask
}

/// Convenience wrapper: the refined mask for a labeled instance, or None
/// when the label is not in the frame legend or has no pixels.
pub fn label_mask(frame: &DepthFrame, label: &str) -> Option<Vec<bool>> {
    let id = frame.id_of(label)?;
    let mask = refine_mask(&frame.ids, frame.camera.width, frame.camera.height, id);
    if mask.iter().any(|&m| m) {
        Some(mask)
    } else {
        None
    }
}

fn neighbors4(i: usize, width: usize, height: usize, out: &mut [usize; 4]) -> usize {
    let (row, col) = (i / width, i % width);
    let mut n = 0;
    if row > 0 {
        out[n] = i - width;
        n += 1;
    }
    if row + 1 < height {
        out[n] = i + width;
        n += 1;
    }
    if col > 0 {
        out[n] = i - 1;
        n += 1;
    }
    if col + 1 < width {
        out[n] = i + 1;
        n += 1;
    }
    n
}

/// Flood the background from the border; background pixels the flood never
/// reaches are enclosed by mask pixels and become mask.
fn fill_enclosed_holes(mask: &mut [bool], width: usize, height: usize) {
    let mut outside = vec![false; mask.len()];
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..mask.len() {
        let (row, col) = (i / width, i % width);
        let on_border = row == 0 || row == height - 1 || col == 0 || col == width - 1;
        if on_border && !mask[i] && !outside[i] {
            outside[i] = true;
            stack.push(i);
        }
    }
    let mut nbrs = [0usize; 4];
    while let Some(i) = stack.pop() {
        let n = neighbors4(i, width, height, &mut nbrs);
        for &j in &nbrs[..n] {
            if !mask[j] && !outside[j] {
                outside[j] = true;
                stack.push(j);
            }
        }
    }
    for i in 0..mask.len() {
        if !mask[i] && !outside[i] {
            mask[i] = true;
        }
    }
}

/// Erase everything but the largest 4-connected true component (earliest in
/// scan order wins a size tie).
fn keep_largest_component(mask: &mut [bool], width: usize, height: usize) {
    let mut component = vec![usize::MAX; mask.len()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut nbrs = [0usize; 4];
    for start in 0..mask.len() {
        if !mask[start] || component[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        let mut size = 0usize;
        component[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            let n = neighbors4(i, width, height, &mut nbrs);
            for &j in &nbrs[..n] {
                if mask[j] && component[j] == usize::MAX {
                    component[j] = label;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    let best = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(label, _)| label)
        .expect("mask has at least one true pixel");
    for i in 0..mask.len() {
        mask[i] = component[i] == best;
    }
}
