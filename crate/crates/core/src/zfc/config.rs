use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::adam::AdamParams;
use crate::camera::ViewpointSearch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningRates {
    pub centers: f64,
    pub opacity: f64,
    /// Step size of the log-scale.
    pub scale: f64,
    pub colors: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self { centers: 1e-3, opacity: 5e-2, scale: 5e-3, colors: 1e-2 }
    }
}

/// Settings of partial initialisation and fractal completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZfcConfig {
    pub iterations: usize,
    /// Weight of the scale regulariser.
    pub w1: f64,
    /// Weight of the preservation constraint.
    pub w2: f64,
    /// Standard deviation of the noise that seeds the completion Gaussians.
    pub sigma_n: f64,
    /// Number of completion Gaussians; `None` uses the input size.
    pub completion_size: Option<usize>,
    /// Range of the elevation offset of training views, degrees.
    pub elevation_range: [f64; 2],
    /// Range of the azimuth offset of training views, degrees.
    pub azimuth_range: [f64; 2],
    pub lr: LearningRates,
    pub adam: AdamParams,
    /// Side of the square training and reference renders.
    pub render_size: usize,
    pub viewpoint: ViewpointSearch,
    /// Optional clamp of the completion-set gradient norm.
    pub max_grad_norm: Option<f64>,
    /// Retries of a guidance call that failed at the transport level.
    pub guidance_retries: usize,
    pub checkpoint_every: Option<usize>,
    /// Where periodic checkpoints and the failure dump are written.
    pub checkpoint_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ZfcConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            w1: 1e3,
            w2: 1e2,
            sigma_n: 0.05,
            completion_size: None,
            elevation_range: [-45.0, 45.0],
            azimuth_range: [-180.0, 180.0],
            lr: LearningRates::default(),
            adam: AdamParams::default(),
            render_size: 256,
            viewpoint: ViewpointSearch::default(),
            max_grad_norm: None,
            guidance_retries: 3,
            checkpoint_every: None,
            checkpoint_dir: None,
            seed: 0,
        }
    }
}

impl ZfcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::precondition("ZFC needs at least one iteration"));
        }
        if self.w1 < 0.0 || self.w2 < 0.0 {
            return Err(Error::precondition("loss weights must be non-negative"));
        }
        if self.sigma_n < 0.0 || !self.sigma_n.is_finite() {
            return Err(Error::precondition("sigma_n must be finite and non-negative"));
        }
        if self.render_size == 0 || self.completion_size == Some(0) {
            return Err(Error::precondition("render size and completion size must be positive"));
        }
        if self.elevation_range[0] > self.elevation_range[1] || self.azimuth_range[0] > self.azimuth_range[1] {
            return Err(Error::precondition("pose ranges must be ordered"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
