//! Differentiable rendering of isotropic, flat-coloured 3D Gaussians.

mod gaussians;
mod image;
mod raster;

pub use gaussians::{
    DELTA_OPACITY, GaussianSet, RenderGradients, binarize_opacity, binarize_opacity_backward, colorize_by_normals,
    logit, sigmoid, sigmoid_derivative,
};
pub use image::{BACKGROUND, RenderedImage, decode_f32_le, encode_f32_le, write_color_png};
pub use raster::{
    ALPHA_MAX, SplatGradients, Splats, TRUNCATION_SIGMAS, footprint_weight, render, render_backward, render_splats,
    render_splats_backward,
};
