//! Point cloud extraction: surface Gaussians, grid pulling and meshing.

mod grid;
mod mcubes;
mod pulling;
mod sdf;
mod surface;

pub use grid::{GridConfig, GridValues, Lattice, evaluate_grid, extract_uniform_points, select_band};
pub use mcubes::marching_cubes;
pub use pulling::{
    MergeState, Merged, PullingConfig, PullingRecord, TrainedField, merge_layer, merge_point, pull, pull_point,
    train_grid_pulling,
};
pub use sdf::{ScalarField, SdfArchitecture, SdfNetwork, SphereSdf, Tape};
pub use surface::{SurfaceExtraction, SurfaceViews, gaussian_surface_extraction};
