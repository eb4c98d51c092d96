//! Image-space guidance providers.
//!
//! The optimiser only ever sees `∂L/∂I` for the current render. A provider may be the
//! built-in photometric [`OracleProvider`], the TCP [`BridgeProvider`] talking to an
//! external diffusion server, or anything else implementing [`GuidanceProvider`].

mod bridge;
mod oracle;
pub mod protocol;

use thiserror::Error;

use crate::camera::{CameraIntrinsics, CameraPose, RelativePose};

pub use bridge::{BridgeProvider, DEFAULT_BRIDGE_ADDR, DEFAULT_BRIDGE_PORT, bridge_addr_from_env, healthcheck};
pub use oracle::OracleProvider;

#[derive(Debug, Error)]
pub enum GuidanceError {
    /// Connection-level failure; the same request may succeed if retried.
    #[error("guidance transport error: {0}")]
    Transport(String),
    /// The provider answered, but the exchange broke the request/response contract.
    #[error("guidance contract violation: {0}")]
    Contract(String),
    /// The provider reported a failure through its error channel.
    #[error("guidance provider error: {0}")]
    Remote(String),
}

impl GuidanceError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GuidanceError::Transport(_))
    }
}

impl From<std::io::Error> for GuidanceError {
    fn from(e: std::io::Error) -> Self {
        GuidanceError::Transport(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceRequest {
    pub width: usize,
    pub height: usize,
    /// `H×W×3` colour of the reference render.
    pub reference: Vec<f64>,
    /// `H×W×3` colour of the current render.
    pub current: Vec<f64>,
    pub relative_pose: RelativePose,
    pub step_fraction: f64,
}

impl GuidanceRequest {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        let n = 3 * self.width * self.height;
        if n == 0 || self.reference.len() != n || self.current.len() != n {
            return Err(GuidanceError::Contract(format!(
                "image blocks must hold {n} values (got {} and {})",
                self.reference.len(),
                self.current.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.step_fraction) {
            return Err(GuidanceError::Contract(format!("step fraction {} outside [0, 1]", self.step_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceResponse {
    /// `∂L/∂I`, same layout as the request images.
    pub grad_image: Vec<f64>,
    pub weight: f64,
}

impl GuidanceResponse {
    pub fn check_against(&self, req: &GuidanceRequest) -> Result<(), GuidanceError> {
        if self.grad_image.len() != req.current.len() {
            return Err(GuidanceError::Contract(format!(
                "gradient image has {} values, expected {}",
                self.grad_image.len(),
                req.current.len()
            )));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) || self.grad_image.iter().any(|v| !v.is_finite()) {
            return Err(GuidanceError::Contract("non-finite gradient or negative weight".into()));
        }
        Ok(())
    }

    pub fn zeros(len: usize) -> Self {
        Self { grad_image: vec![0.0; len], weight: 1.0 }
    }
}

pub trait GuidanceProvider {
    fn name(&self) -> &str;

    /// Called once before optimisation with the reference pose and render intrinsics.
    fn begin(&mut self, _reference_pose: &CameraPose, _intr: &CameraIntrinsics) -> Result<(), GuidanceError> {
        Ok(())
    }

    fn image_gradient(&mut self, req: &GuidanceRequest) -> Result<GuidanceResponse, GuidanceError>;
}

/// Provider that never moves anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroProvider;

impl GuidanceProvider for ZeroProvider {
    fn name(&self) -> &str {
        "zero"
    }

    fn image_gradient(&mut self, req: &GuidanceRequest) -> Result<GuidanceResponse, GuidanceError> {
        req.validate()?;
        Ok(GuidanceResponse::zeros(req.current.len()))
    }
}

pub const T_MAX: f64 = 0.98;
pub const T_MIN: f64 = 0.02;

/// Diffusion timestep linearly annealed from `T_MAX` at the start to `T_MIN` at the end.
pub fn timestep_schedule(step_fraction: f64) -> f64 {
    let f = step_fraction.clamp(0.0, 1.0);
    T_MAX - (T_MAX - T_MIN) * f
}
