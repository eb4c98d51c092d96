use super::adam::Adam;
use super::checkpoint::write_checkpoint;
use super::config::ZfcConfig;
use super::init::{ensure_normals, init_completion_gaussians, init_partial_gaussians, sample_training_pose};
use super::losses::{preservation_loss, scaling_regularizer};
use crate::camera::{CameraIntrinsics, CameraPose, ViewpointEstimate, estimate_reference_viewpoint};
use crate::error::{Error, Result, Stage};
use crate::geometry::{PointCloud, SpatialIndex, Vec3};
use crate::guidance::{GuidanceProvider, GuidanceRequest, GuidanceResponse};
use crate::render::{GaussianSet, RenderedImage, render, render_backward};

/// Diagnostics of one optimisation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    pub preservation: f64,
    pub regularizer: f64,
    /// Euclidean norm of the weighted guidance image gradient.
    pub guidance_norm: f64,
    pub scale: f64,
    /// Completion Gaussians with binarised opacity 1.
    pub opaque: usize,
}

#[derive(Debug, Clone)]
pub struct ZfcOutput {
    pub g_in: GaussianSet,
    pub g_m: GaussianSet,
    pub reference_pose: CameraPose,
    pub reference_image: RenderedImage,
    pub viewpoint: ViewpointEstimate,
    pub intrinsics: CameraIntrinsics,
    pub history: Vec<StepRecord>,
}

impl ZfcOutput {
    pub fn sets(&self) -> [&GaussianSet; 2] {
        [&self.g_in, &self.g_m]
    }
}

fn call_provider(
    provider: &mut dyn GuidanceProvider,
    req: &GuidanceRequest,
    retries: usize,
) -> std::result::Result<GuidanceResponse, crate::guidance::GuidanceError> {
    let mut attempt = 0;
    loop {
        match provider.image_gradient(req) {
            Ok(resp) => {
                resp.check_against(req)?;
                return Ok(resp);
            }
            Err(e) if e.is_retryable() && attempt < retries => {
                attempt += 1;
                log::warn!("guidance call failed ({e}); retry {attempt}/{retries}");
            }
            Err(e) => return Err(e),
        }
    }
}

/// Runs partial initialisation and fractal completion on a normalised input cloud.
///
/// Only the completion set is updated. If the provider keeps failing the current
/// state is dumped to `checkpoint_dir/failed.ply` (when configured) before the error
/// is returned.
pub fn run_zfc(p_in: &PointCloud, provider: &mut dyn GuidanceProvider, cfg: &ZfcConfig) -> Result<ZfcOutput> {
    cfg.validate()?;
    let p_in = ensure_normals(p_in)?;
    let search_intr = cfg.viewpoint.intrinsics();
    let candidates = cfg.viewpoint.candidate_poses(&p_in);
    let viewpoint = estimate_reference_viewpoint(&p_in, &candidates, &search_intr, cfg.viewpoint.w0)?;
    let v_p = viewpoint.pose;
    log::info!("reference view: elevation {:.1}°, azimuth {:.1}°", v_p.elevation, v_p.azimuth);

    let g_in = init_partial_gaussians(&p_in)?;
    let mut g_m = init_completion_gaussians(&p_in, cfg)?;
    let intr = search_intr.with_size(cfg.render_size);
    let reference_image = render(&[&g_in], &v_p, &intr);
    provider.begin(&v_p, &intr)?;

    let m = g_m.len();
    let mut opt_centers = Adam::new(3 * m, cfg.lr.centers, cfg.adam);
    let mut opt_logits = Adam::new(m, cfg.lr.opacity, cfg.adam);
    let mut opt_colors = Adam::new(3 * m, cfg.lr.colors, cfg.adam);
    let mut opt_scale = Adam::new(1, cfg.lr.scale, cfg.adam);
    let in_index = SpatialIndex::new(p_in.points());
    let mut history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let (rel, pose) = sample_training_pose(&v_p, cfg, it);
        let current = render(&[&g_in, &g_m], &pose, &intr);
        let step_fraction = if cfg.iterations > 1 { it as f64 / (cfg.iterations - 1) as f64 } else { 1.0 };
        let req = GuidanceRequest {
            width: intr.width,
            height: intr.height,
            reference: reference_image.color.clone(),
            current: current.color,
            relative_pose: rel,
            step_fraction,
        };
        let resp = match call_provider(provider, &req, cfg.guidance_retries) {
            Ok(r) => r,
            Err(e) => {
                if let Some(dir) = &cfg.checkpoint_dir {
                    let path = dir.join("failed.ply");
                    match write_checkpoint(&path, &g_in, &g_m) {
                        Ok(()) => log::error!("guidance failed at iteration {it}; state dumped to {}", path.display()),
                        Err(w) => log::error!("guidance failed at iteration {it}; dump failed: {w}"),
                    }
                }
                return Err(e.into());
            }
        };
        let d_image: Vec<f64> = resp.grad_image.iter().map(|g| g * resp.weight).collect();
        let guidance_norm = d_image.iter().map(|g| g * g).sum::<f64>().sqrt();
        let mut grads = render_backward(&[&g_in, &g_m], &pose, &intr, &d_image).pop().expect("two sets");

        let pres = preservation_loss(&g_in, &g_m, p_in.points(), &in_index, &v_p, &search_intr, cfg.w2);
        for (g, p) in grads.d_centers.iter_mut().zip(&pres.d_completion_centers) {
            *g += p;
        }
        let (reg, d_reg) = scaling_regularizer(g_m.scale, cfg.w1);
        grads.d_scale += d_reg;

        if let Some(max) = cfg.max_grad_norm {
            let norm = (grads.d_centers.iter().map(|v| v.norm_squared()).sum::<f64>()
                + grads.d_colors.iter().map(|v| v.norm_squared()).sum::<f64>()
                + grads.d_opacity_logits.iter().map(|v| v * v).sum::<f64>()
                + grads.d_scale * grads.d_scale)
                .sqrt();
            if norm > max {
                let k = max / norm;
                grads.d_centers.iter_mut().for_each(|v| *v *= k);
                grads.d_colors.iter_mut().for_each(|v| *v *= k);
                grads.d_opacity_logits.iter_mut().for_each(|v| *v *= k);
                grads.d_scale *= k;
            }
        }
        if !grads.is_finite() {
            return Err(Error::Diverged { stage: Stage::Completion, iteration: it, detail: "non-finite completion gradient".into() });
        }

        let mut flat = flatten(&g_m.centers);
        opt_centers.step(&mut flat, &flatten(&grads.d_centers));
        unflatten(&flat, &mut g_m.centers);
        let mut flat = flatten(&g_m.colors);
        opt_colors.step(&mut flat, &flatten(&grads.d_colors));
        unflatten(&flat, &mut g_m.colors);
        for c in &mut g_m.colors {
            c.apply(|v| *v = v.clamp(0.0, 1.0));
        }
        opt_logits.step(&mut g_m.opacity_logits, &grads.d_opacity_logits);
        let mut log_scale = [g_m.scale.ln()];
        opt_scale.step(&mut log_scale, &[grads.d_scale * g_m.scale]);
        g_m.scale = log_scale[0].exp();

        let record = StepRecord {
            iteration: it,
            preservation: pres.loss,
            regularizer: reg,
            guidance_norm,
            scale: g_m.scale,
            opaque: (0..m).filter(|&i| g_m.is_opaque(i)).count(),
        };
        if it % 100 == 0 || it + 1 == cfg.iterations {
            log::debug!(
                "zfc {it}: preservation {:.4} guidance {:.3} scale {:.4} opaque {}",
                record.preservation,
                record.guidance_norm,
                record.scale,
                record.opaque
            );
        }
        history.push(record);
        if let (Some(k), Some(dir)) = (cfg.checkpoint_every, &cfg.checkpoint_dir) {
            if k > 0 && (it + 1) % k == 0 {
                write_checkpoint(dir.join(format!("zfc_{:05}.ply", it + 1)), &g_in, &g_m)?;
            }
        }
    }

    Ok(ZfcOutput { g_in, g_m, reference_pose: v_p, reference_image, viewpoint, intrinsics: intr, history })
}

fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

fn unflatten(flat: &[f64], out: &mut [Vec3]) {
    for (p, c) in out.iter_mut().zip(flat.chunks_exact(3)) {
        *p = Vec3::new(c[0], c[1], c[2]);
    }
}
