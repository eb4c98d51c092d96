//! Test-time point-cloud completion with isotropic Gaussian splats.
//!
//! The pipeline has three stages:
//!
//! 1. **Partial initialisation** ([`zfc::init_partial_gaussians`]): pick the reference
//!    viewpoint from which the partial scan looks most complete ([`camera`]), turn
//!    the scan into frozen, opaque, normal-coloured Gaussians and render a reference
//!    image ([`render`]).
//! 2. **Fractal completion** ([`zfc::run_zfc`]): optimise a second, trainable set of
//!    Gaussians under image-space guidance from a pluggable [`guidance`] provider,
//!    a preservation constraint and a scale regulariser.
//! 3. **Extraction** ([`pce`]): keep the opaque Gaussians visible from a sphere of
//!    views, fit a signed distance field to them and resample it on a grid.
//!
//! [`pipeline::complete`] chains the stages; [`bench`] holds the partial-scan
//! synthesis and metric tables.

pub mod bench;
pub mod camera;
mod error;
pub mod geometry;
pub mod guidance;
pub mod mesh;
pub mod pce;
pub mod pipeline;
pub mod render;
pub mod zfc;

pub use error::{Error, Result, Stage};
pub use geometry::{PointCloud, Vec3};
