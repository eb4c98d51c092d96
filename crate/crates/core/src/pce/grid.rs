use serde::{Deserialize, Serialize};

use super::pulling::{MergeState, merge_layer, pull};
use super::sdf::ScalarField;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Vertices per axis.
    pub resolution: usize,
    /// Relative padding of the surface bounding box.
    pub margin: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { resolution: 128, margin: 0.05 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 8 {
            return Err(Error::precondition(format!("grid resolution {} is below 8", self.resolution)));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::precondition("grid margin must be non-negative"));
        }
        Ok(())
    }

    /// Cubic lattice over the padded bounds of `points`.
    pub fn lattice_for(&self, points: &[Vec3]) -> Result<Lattice> {
        self.validate()?;
        let cube = Aabb::from_points(points).padded(self.margin).cubic();
        let side = cube.max_extent();
        if !(side > 0.0) {
            return Err(Error::DegenerateExtent("cannot lay a grid over a single point".into()));
        }
        Lattice::new(cube.min, side, self.resolution)
    }
}

/// Regular cubic lattice of `resolution³` vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub origin: Vec3,
    /// Distance between neighbouring vertices.
    pub edge: f64,
    pub resolution: usize,
}

impl Lattice {
    pub fn new(origin: Vec3, side: f64, resolution: usize) -> Result<Self> {
        if resolution < 2 || !(side > 0.0) {
            return Err(Error::precondition("lattice needs two vertices per axis and a positive side"));
        }
        Ok(Self { origin, edge: side / (resolution - 1) as f64, resolution })
    }

    /// Length of a cell diagonal, `√3 · edge`.
    pub fn cell_diagonal(&self) -> f64 {
        3f64.sqrt() * self.edge
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.resolution == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.resolution + j) * self.resolution + k
    }

    pub fn vertex(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.edge
    }

    pub fn vertices(&self) -> Vec<Vec3> {
        let n = self.resolution;
        let mut out = Vec::with_capacity(self.len());
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out.push(self.vertex(i, j, k));
                }
            }
        }
        out
    }
}

/// Field values on every lattice vertex, in [`Lattice::index`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

pub fn evaluate_grid(field: &dyn ScalarField, lattice: &Lattice) -> GridValues {
    GridValues { lattice: *lattice, values: field.values(&lattice.vertices()) }
}

/// Lattice vertices with `|g| < r/2`, `r` the cell diagonal.
pub fn select_band(grid: &GridValues) -> Vec<Vec3> {
    let half = 0.5 * grid.lattice.cell_diagonal();
    let n = grid.lattice.resolution;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if grid.values[grid.lattice.index(i, j, k)].abs() < half {
                    out.push(grid.lattice.vertex(i, j, k));
                }
            }
        }
    }
    out
}

/// Selects the near-surface lattice vertices, pulls each once onto the zero set
/// and merges the result with the input.
pub fn extract_uniform_points(
    field: &dyn ScalarField,
    merge: &MergeState,
    p_surf: &PointCloud,
    p_in: &PointCloud,
    cfg: &GridConfig,
) -> Result<PointCloud> {
    if p_surf.is_empty() || p_in.is_empty() {
        return Err(Error::precondition("extraction needs non-empty surface and input clouds"));
    }
    let lattice = cfg.lattice_for(p_surf.points())?;
    let grid = evaluate_grid(field, &lattice);
    let band = select_band(&grid);
    if band.is_empty() {
        return Err(Error::LevelSetMissedGrid { margin: cfg.margin });
    }
    log::debug!("grid band: {} of {} vertices", band.len(), lattice.len());
    let pulled = pull(field, &band);
    PointCloud::new(merge_layer(merge, &pulled, p_in))
}
