//! Exact voxel walking along a segment (Amanatides & Woo).

use nalgebra::Point3;

use super::GridSpec;

/// Parameter interval `[t0, t1] ⊆ [0, 1]` of the segment `a + t(b − a)`
/// inside the axis-aligned box `[lo, hi]`.
pub fn clip_segment(
    a: &Point3<f64>,
    b: &Point3<f64>,
    lo: &Point3<f64>,
    hi: &Point3<f64>,
) -> Option<(f64, f64)> {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for axis in 0..3 {
        if d[axis] == 0.0 {
            if a[axis] < lo[axis] || a[axis] > hi[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[axis];
        let (mut near, mut far) = ((lo[axis] - a[axis]) * inv, (hi[axis] - a[axis]) * inv);
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

/// Iterator over the cells crossed by a segment, in order from `a` to
/// `b`. Each cell is visited once; the walk ends at the cell containing
/// `b` or where the segment leaves the grid.
#[derive(Debug, Clone)]
pub struct VoxelWalk {
    cell: [i64; 3],
    step: [i64; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    t_end: f64,
    dims: [i64; 3],
    done: bool,
}

impl VoxelWalk {
    pub fn new(spec: &GridSpec, a: &Point3<f64>, b: &Point3<f64>) -> VoxelWalk {
        let dims = spec.resolution.map(|n| n as i64);
        let cell_size = spec.cell_size();
        let hi = spec.origin + spec.extents;
        let Some((t_start, t_end)) = clip_segment(a, b, &spec.origin, &hi) else {
            return VoxelWalk {
                cell: [0; 3],
                step: [0; 3],
                t_max: [f64::INFINITY; 3],
                t_delta: [f64::INFINITY; 3],
                t_end: 0.0,
                dims,
                done: true,
            };
        };
        let d = b - a;
        let entry = a + d * t_start;
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for axis in 0..3 {
            let rel = (entry[axis] - spec.origin[axis]) / cell_size[axis];
            cell[axis] = (rel.floor() as i64).clamp(0, dims[axis] - 1);
            if d[axis] > 0.0 {
                step[axis] = 1;
                let boundary = spec.origin[axis] + (cell[axis] + 1) as f64 * cell_size[axis];
                t_max[axis] = (boundary - a[axis]) / d[axis];
                t_delta[axis] = cell_size[axis] / d[axis];
            } else if d[axis] < 0.0 {
                step[axis] = -1;
                let boundary = spec.origin[axis] + cell[axis] as f64 * cell_size[axis];
                t_max[axis] = (boundary - a[axis]) / d[axis];
                t_delta[axis] = -cell_size[axis] / d[axis];
            }
        }
        VoxelWalk {
            cell,
            step,
            t_max,
            t_delta,
            t_end,
            dims,
            done: false,
        }
    }
}

impl Iterator for VoxelWalk {
    type Item = [usize; 3];

    fn next(&mut self) -> Option<[usize; 3]> {
        if self.done {
            return None;
        }
        let current = self.cell.map(|c| c as usize);
        let axis = if self.t_max[0] < self.t_max[1] {
            if self.t_max[0] < self.t_max[2] {
                0
            } else {
                2
            }
        } else if self.t_max[1] < self.t_max[2] {
            1
        } else {
            2
        };
        if self.t_max[axis] > self.t_end {
            self.done = true;
        } else {
            self.cell[axis] += self.step[axis];
            self.t_max[axis] += self.t_delta[axis];
            if self.cell[axis] < 0 || self.cell[axis] >= self.dims[axis] {
                self.done = true;
            }
        }
        Some(current)
    }
}

impl VoxelWalk {
    /// Visits linear cell indices from the start cell to `end`, the cell
    /// holding the segment's far point, until `visit` returns false. Each
    /// axis steps exactly as often as the start and end cells differ
    /// along it, so the walk always finishes in `end`.
    pub(crate) fn visit_linear(self, spec: &GridSpec, end: [usize; 3], mut visit: impl FnMut(usize) -> bool) {
        if self.done {
            return;
        }
        let [nx, ny, _] = spec.resolution;
        let stride = [1, nx as isize, (nx * ny) as isize];
        let mut t_max = self.t_max;
        let mut left = [0usize; 3];
        let mut jump = [0isize; 3];
        for k in 0..3 {
            left[k] = ((end[k] as i64 - self.cell[k]) * self.step[k]).max(0) as usize;
            if left[k] == 0 {
                t_max[k] = f64::INFINITY;
            }
            jump[k] = self.step[k] as isize * stride[k];
        }
        let mut index = spec.linear(self.cell.map(|c| c as usize)) as isize;
        loop {
            if !visit(index as usize) {
                return;
            }
            // branch-free argmin; ties go to the higher axis
            let lo = (t_max[0] < t_max[1]) as usize ^ 1;
            let axis = if t_max[lo] < t_max[2] { lo } else { 2 };
            if t_max[axis] == f64::INFINITY {
                return;
            }
            index += jump[axis];
            left[axis] -= 1;
            t_max[axis] = if left[axis] == 0 {
                f64::INFINITY
            } else {
                t_max[axis] + self.t_delta[axis]
            };
        }
    }
}
