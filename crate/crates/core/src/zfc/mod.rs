//! Partial Gaussian initialisation and zero-shot fractal completion.
//!
//! The input points become a frozen, opaque set `G_in`. A second, trainable set
//! `G_m` starts at a noisy copy of the input and is optimised from random views
//! around the reference pose under image-space guidance, a scale regulariser, and a
//! Chamfer constraint that keeps what the reference view sees close to the input.

mod adam;
mod checkpoint;
mod config;
mod init;
mod losses;
mod run;

pub use adam::{Adam, AdamParams};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use config::{LearningRates, ZfcConfig};
pub use init::{
    COMPLETION_INITIAL_COLOR, COMPLETION_INITIAL_OPACITY, INPUT_OPACITY_LOGIT, ensure_normals,
    init_completion_gaussians, init_partial_gaussians, sample_training_pose,
};
pub use losses::{Preservation, preservation_loss, scaling_regularizer};
pub use run::{StepRecord, ZfcOutput, run_zfc};
