//! Point-sampled voxel traversal of straight segments.
//!
//! Instead of exact ray/voxel intersection, the part of a segment inside the
//! grid is sampled at points no farther apart than half the smallest voxel
//! edge, and each maximal run of samples falling into the same voxel counts as
//! one entrance. Voxels whose chord is at least that spacing are never missed.

use alloc::vec::Vec;

use crate::field::GridSpec;
use crate::geometry::Aabb;
use crate::vec3::Vec3;

/// Voxel entered by a segment and the first sample point inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelEntrance {
    pub index: [usize; 3],
    pub flat: usize,
    pub entry_m: Vec3,
}

/// Largest distance between consecutive sample points for `grid`.
pub fn sample_spacing(grid: &GridSpec) -> f64 {
    0.5 * grid.voxel_m.min_elem()
}

/// Calls `visit` once per voxel run along `start..end`, in travel order.
///
/// The segment is first clipped to the grid box; sample points are then
/// spread evenly over the clipped part, both clipped endpoints included.
pub fn for_each_entrance<F>(start: Vec3, end: Vec3, grid: &GridSpec, mut visit: F)
where
    F: FnMut(VoxelEntrance),
{
    let delta = end - start;
    let bounds = Aabb::new(grid.origin_m, grid.max_corner());
    let Some((t0, t1)) = bounds.ray_interval(start, delta) else {
        return;
    };
    let (t0, t1) = (t0.max(0.0), t1.min(1.0));
    if t0 > t1 {
        return;
    }
    let a = start + delta * t0;
    let b = start + delta * t1;
    let span = b - a;
    let length = span.norm();
    let steps = if length > 0.0 {
        libm::ceil(length / sample_spacing(grid)).max(1.0) as usize
    } else {
        0
    };

    let mut last: Option<usize> = None;
    for i in 0..=steps {
        let p = if i == steps {
            b
        } else {
            a + span * (i as f64 / steps as f64)
        };
        let Some(index) = grid.voxel_of(p) else {
            continue;
        };
        let flat = grid.flat_index(index[0], index[1], index[2]);
        if last != Some(flat) {
            last = Some(flat);
            visit(VoxelEntrance {
                index,
                flat,
                entry_m: p,
            });
        }
    }
}

/// Ordered voxel entrances of `start..end`.
pub fn traverse_segment(start: Vec3, end: Vec3, grid: &GridSpec) -> Vec<VoxelEntrance> {
    let mut out = Vec::new();
    for_each_entrance(start, end, grid, |e| out.push(e));
    out
}
