//! The full completion chain: normalise, complete with Gaussians, extract points.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Similarity, farthest_point_sample, normalize_unit_box};
use crate::guidance::{GuidanceProvider, OracleProvider};
use crate::mesh::TriMesh;
use crate::pce::{
    GridConfig, PullingConfig, SurfaceExtraction, SurfaceViews, TrainedField, evaluate_grid, extract_uniform_points,
    gaussian_surface_extraction, marching_cubes, train_grid_pulling,
};
use crate::zfc::{ZfcConfig, ZfcOutput, run_zfc};

/// Every stage's settings; the TOML file mirrors this layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub zfc: ZfcConfig,
    pub surface: SurfaceViews,
    pub pulling: PullingConfig,
    pub grid: GridConfig,
    /// Farthest-point sample the dense result to this many points; `None` keeps it dense.
    pub output_points: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            zfc: ZfcConfig::default(),
            surface: SurfaceViews::default(),
            pulling: PullingConfig::default(),
            grid: GridConfig::default(),
            output_points: Some(16_384),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.zfc.validate()?;
        self.pulling.validate()?;
        self.grid.validate()?;
        if self.output_points == Some(0) {
            return Err(Error::precondition("output_points must be at least 1"));
        }
        Ok(())
    }

    /// Sets the seed of every stochastic stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.zfc.seed = seed;
        self.pulling.seed = seed;
        self
    }
}

/// Results of [`complete`], the output points in input coordinates.
#[derive(Debug, Clone)]
pub struct Completion {
    pub points: PointCloud,
    /// Maps input coordinates to the unit box every stage works in.
    pub similarity: Similarity,
    pub zfc: ZfcOutput,
    pub surface: SurfaceExtraction,
    pub field: TrainedField,
}

impl Completion {
    /// Marching-cubes mesh of the fitted field, in input coordinates.
    pub fn mesh(&self, grid: &GridConfig) -> Result<TriMesh> {
        let lattice = grid.lattice_for(self.surface.points.points())?;
        let mesh = marching_cubes(&evaluate_grid(&self.field.network, &lattice));
        Ok(mesh.map_vertices(|v| self.similarity.invert(v)))
    }
}

/// The similarity [`complete`] applies to `p_in`; use it to bring a ground truth
/// into the working frame of an oracle provider.
pub fn working_frame(p_in: &PointCloud) -> Result<Similarity> {
    Ok(normalize_unit_box(p_in)?.1)
}

/// Oracle guidance from a ground truth given in the coordinates of `p_in`.
pub fn oracle_for(p_in: &PointCloud, gt: &PointCloud) -> Result<OracleProvider> {
    OracleProvider::new(&working_frame(p_in)?.apply_cloud(gt))
}

/// Normalise, initialise and complete with Gaussians, extract the surface, fit the
/// field, resample it on the grid and map back.
pub fn complete(p_in: &PointCloud, provider: &mut dyn GuidanceProvider, cfg: &PipelineConfig) -> Result<Completion> {
    cfg.validate()?;
    if p_in.len() < 3 {
        return Err(Error::InvalidInput("completion needs at least three input points".into()));
    }
    let (normalized, similarity) = normalize_unit_box(p_in)?;
    let zfc = run_zfc(&normalized, provider, &cfg.zfc)?;
    let surface = gaussian_surface_extraction(&zfc.sets(), &cfg.surface)?;
    log::info!("surface extraction kept {} of {} Gaussians", surface.points.len(), zfc.g_in.len() + zfc.g_m.len());
    let field = train_grid_pulling(&surface.points, &normalized, &cfg.pulling)?;
    let dense = extract_uniform_points(&field.network, &field.merge, &surface.points, &normalized, &cfg.grid)?;
    let sampled = match cfg.output_points {
        Some(n) if n < dense.len() => farthest_point_sample(&dense, n, cfg.pulling.seed)?,
        _ => dense,
    };
    Ok(Completion { points: similarity.invert_cloud(&sampled), similarity, zfc, surface, field })
}
