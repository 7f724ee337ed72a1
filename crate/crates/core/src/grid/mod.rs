//! Labeled voxel map of the workcell, rebuilt from scratch for every frame.
//!
//! A frame is processed in two passes: [`voxelize`] marks every cell that
//! contains a point as [`VoxelLabel::Seen`] (everything else starts
//! [`VoxelLabel::Unseen`]), then [`OccupancyGrid::carve_empty`] walks the
//! ray from each sensor to every seen cell and marks the unseen cells in
//! front of the first seen cell as [`VoxelLabel::Empty`].

mod traversal;

pub use traversal::{clip_segment, VoxelWalk};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Geometry of the voxel grid. Cell `[0, 0, 0]` touches `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub origin: Point3<f64>,
    pub extents: Vector3<f64>,
    pub resolution: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Point3<f64>, extents: Vector3<f64>, resolution: [usize; 3]) -> Result<Self> {
        if extents.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidGrid(format!(
                "extents must be positive, got {} {} {}",
                extents.x, extents.y, extents.z
            )));
        }
        if resolution.contains(&0) {
            return Err(Error::InvalidGrid("resolution must be at least 1 per axis".into()));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(GridSpec {
            origin,
            extents,
            resolution,
        })
    }

    /// Grid with cubic cells of roughly `voxel` meters.
    pub fn with_voxel_size(origin: Point3<f64>, extents: Vector3<f64>, voxel: f64) -> Result<Self> {
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
        if !(voxel > 0.0) {
            return Err(Error::InvalidGrid(format!("voxel size must be positive, got {voxel}")));
        }
        let resolution = [0, 1, 2].map(|k| ((extents[k] / voxel).round() as usize).max(1));
        GridSpec::new(origin, extents, resolution)
    }

    pub fn cell_size(&self) -> Vector3<f64> {
        Vector3::new(
            self.extents.x / self.resolution[0] as f64,
            self.extents.y / self.resolution[1] as f64,
            self.extents.z / self.resolution[2] as f64,
        )
    }

    pub fn cell_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn linear(&self, cell: [usize; 3]) -> usize {
        cell[0] + self.resolution[0] * (cell[1] + self.resolution[1] * cell[2])
    }

    pub fn unlinear(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Cell containing `p` by floor division; points on the upper boundary
    /// face belong to the last cell. `None` outside the grid.
    pub fn cell_of(&self, p: &Point3<f64>) -> Option<[usize; 3]> {
        let cs = self.cell_size();
        let mut cell = [0usize; 3];
        for k in 0..3 {
            let rel = p[k] - self.origin[k];
            if !(rel >= 0.0 && rel <= self.extents[k]) {
                return None;
            }
            cell[k] = ((rel / cs[k]).floor() as usize).min(self.resolution[k] - 1);
        }
        Some(cell)
    }

    pub fn cell_center(&self, cell: [usize; 3]) -> Point3<f64> {
        let cs = self.cell_size();
        Point3::new(
            self.origin.x + (cell[0] as f64 + 0.5) * cs.x,
            self.origin.y + (cell[1] as f64 + 0.5) * cs.y,
            self.origin.z + (cell[2] as f64 + 0.5) * cs.z,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VoxelLabel {
    Unseen,
    Empty,
    Seen,
}

/// Dense labeled grid for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    spec: GridSpec,
    labels: Vec<VoxelLabel>,
    seen: Vec<usize>,
    seen_centers: Vec<Point3<f64>>,
    out_of_bounds: usize,
    degenerate_rays: usize,
}

/// Builds a fresh grid from a point cloud: all cells unseen, then every
/// cell holding a point becomes seen. Points outside the grid are
/// counted in [`OccupancyGrid::out_of_bounds`].
pub fn voxelize<'a, I>(points: I, spec: &GridSpec) -> OccupancyGrid
where
    I: IntoIterator<Item = &'a Point3<f64>>,
{
    let mut labels = vec![VoxelLabel::Unseen; spec.cell_count()];
    let mut out_of_bounds = 0;
    for p in points {
        match spec.cell_of(p) {
            Some(cell) => labels[spec.linear(cell)] = VoxelLabel::Seen,
            None => out_of_bounds += 1,
        }
    }
    let seen: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == VoxelLabel::Seen)
        .map(|(i, _)| i)
        .collect();
    let seen_centers = seen
        .iter()
        .map(|&i| spec.cell_center(spec.unlinear(i)))
        .collect();
    OccupancyGrid {
        spec: spec.clone(),
        labels,
        seen,
        seen_centers,
        out_of_bounds,
        degenerate_rays: 0,
    }
}

impl OccupancyGrid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[VoxelLabel] {
        &self.labels
    }

    pub fn label(&self, cell: [usize; 3]) -> VoxelLabel {
        self.labels[self.spec.linear(cell)]
    }

    /// Centers of the seen cells, in linear-index order.
    pub fn seen_centers(&self) -> &[Point3<f64>] {
        &self.seen_centers
    }

    /// Linear indices of the seen cells, ascending.
    pub fn seen_indices(&self) -> &[usize] {
        &self.seen
    }

    pub fn count(&self, label: VoxelLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    pub fn out_of_bounds(&self) -> usize {
        self.out_of_bounds
    }

    /// Rays skipped because the sensor sat exactly on a seen cell center.
    pub fn degenerate_rays(&self) -> usize {
        self.degenerate_rays
    }

    /// Marks as empty every unseen cell lying on a ray from `sensor` to a
    /// seen cell center before the first seen cell on that ray. Seen cells
    /// are never relabeled, so repeated calls and calls for several
    /// sensors commute.
    pub fn carve_empty(&mut self, sensor: &Point3<f64>) {
        for &target in &self.seen {
            let center = self.spec.cell_center(self.spec.unlinear(target));
            if (center - sensor).norm_squared() == 0.0 {
                self.degenerate_rays += 1;
                continue;
            }
            let labels = &mut self.labels;
            VoxelWalk::new(&self.spec, sensor, &center).visit_linear(&self.spec, self.spec.unlinear(target), |i| {
                match labels[i] {
                    VoxelLabel::Seen => return false,
                    VoxelLabel::Unseen => labels[i] = VoxelLabel::Empty,
                    VoxelLabel::Empty => {}
                }
                true
            });
        }
    }
}

/// Voxelizes a merged multi-sensor cloud and carves free space from each
/// sensor origin.
pub fn build_frame_grid<'a, I>(points: I, sensors: &[Point3<f64>], spec: &GridSpec) -> OccupancyGrid
where
    I: IntoIterator<Item = &'a Point3<f64>>,
{
    let mut grid = voxelize(points, spec);
    for sensor in sensors {
        grid.carve_empty(sensor);
    }
    grid
}
