use super::{GuidanceError, GuidanceProvider, GuidanceRequest, GuidanceResponse};
use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::Result;
use crate::geometry::PointCloud;
use crate::render::{GaussianSet, render};
use crate::zfc::init_partial_gaussians;

/// Photometric stand-in for a diffusion prior: knows the complete shape and returns
/// the gradient of `‖I − I_gt‖²`, where `I_gt` renders the hidden shape at the
/// requested pose.
#[derive(Debug, Clone)]
pub struct OracleProvider {
    hidden: GaussianSet,
    weight: f64,
    anchor: Option<(CameraPose, CameraIntrinsics)>,
}

impl OracleProvider {
    /// Hidden Gaussians follow the partial-initialisation rules: normal colours,
    /// opacity 1 and the mean nearest-neighbour distance as scale.
    pub fn new(gt: &PointCloud) -> Result<Self> {
        Ok(Self { hidden: init_partial_gaussians(gt)?, weight: 1.0, anchor: None })
    }

    /// Scalar reported alongside every gradient image.
    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn hidden(&self) -> &GaussianSet {
        &self.hidden
    }

    fn pose_for(&self, req: &GuidanceRequest) -> Result<(CameraPose, CameraIntrinsics), GuidanceError> {
        let (vp, intr) = self.anchor.ok_or_else(|| GuidanceError::Contract("oracle used before begin()".into()))?;
        let mut intr = intr;
        intr.width = req.width;
        intr.height = req.height;
        Ok((vp.compose_relative(&req.relative_pose), intr))
    }

    /// The hidden shape rendered where `req` is looking.
    pub fn target_image(&self, req: &GuidanceRequest) -> Result<Vec<f64>, GuidanceError> {
        let (pose, intr) = self.pose_for(req)?;
        Ok(render(&[&self.hidden], &pose, &intr).color)
    }
}

impl GuidanceProvider for OracleProvider {
    fn name(&self) -> &str {
        "oracle"
    }

    fn begin(&mut self, reference_pose: &CameraPose, intr: &CameraIntrinsics) -> Result<(), GuidanceError> {
        self.anchor = Some((*reference_pose, *intr));
        Ok(())
    }

    fn image_gradient(&mut self, req: &GuidanceRequest) -> Result<GuidanceResponse, GuidanceError> {
        req.validate()?;
        let target = self.target_image(req)?;
        let grad_image = req.current.iter().zip(&target).map(|(c, t)| 2.0 * (c - t)).collect();
        Ok(GuidanceResponse { grad_image, weight: self.weight })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::RelativePose;
    use crate::geometry::shapes;

    fn sphere_oracle() -> OracleProvider {
        let pts = shapes::fibonacci_sphere_points(600, 0.5);
        let cloud = PointCloud::with_normals(pts.clone(), pts.iter().map(|p| p.normalize()).collect()).unwrap();
        OracleProvider::new(&cloud).unwrap()
    }

    fn request_for(oracle: &OracleProvider, offset: f64) -> GuidanceRequest {
        let mut req = GuidanceRequest {
            width: 24,
            height: 24,
            reference: vec![1.0; 24 * 24 * 3],
            current: vec![0.0; 24 * 24 * 3],
            relative_pose: RelativePose { d_elevation: 10.0, d_azimuth: 40.0, d_radius: 0.0 },
            step_fraction: 0.0,
        };
        req.current = oracle.target_image(&req).unwrap().iter().map(|v| v + offset).collect();
        req
    }

    #[test]
    fn gradient_is_mse_derivative() {
        let mut o = sphere_oracle();
        let intr = CameraIntrinsics::square(24, 49.1);
        o.begin(&CameraPose::new(90.0, 0.0, 1.5), &intr).unwrap();
        let exact = o.image_gradient(&request_for(&o, 0.0)).unwrap();
        assert!(exact.grad_image.iter().all(|g| *g == 0.0));
        let shifted = o.image_gradient(&request_for(&o, 0.1)).unwrap();
        assert!(shifted.grad_image.iter().all(|g| (g - 0.2).abs() < 1e-12));
        let mut o2 = sphere_oracle();
        o2.begin(&CameraPose::new(90.0, 0.0, 1.5), &intr).unwrap();
        assert_eq!(o2.image_gradient(&request_for(&o, 0.1)).unwrap(), shifted);
    }

    #[test]
    fn pole_view_is_a_disk() {
        let mut o = sphere_oracle();
        let intr = CameraIntrinsics::square(32, 49.1);
        let pose = CameraPose::new(90.0, 0.0, 1.5);
        o.begin(&pose, &intr).unwrap();
        let mut req = request_for(&o, 0.0);
        req.width = 32;
        req.height = 32;
        req.relative_pose = RelativePose::default();
        req.current = vec![1.0; 32 * 32 * 3];
        req.reference = req.current.clone();
        let target = o.target_image(&req).unwrap();
        let grad = o.image_gradient(&req).unwrap().grad_image;
        let f = intr.focal();
        // Silhouette radius of a 0.5-sphere seen from distance 1.5, padded by the footprint.
        let radius_px = f * (0.5f64 / (1.5f64.powi(2) - 0.25).sqrt()) + 3.0 * o.hidden().scale * f / 1.0;
        for y in 0..32 {
            for x in 0..32 {
                let d = ((x as f64 + 0.5 - 16.0).powi(2) + (y as f64 + 0.5 - 16.0).powi(2)).sqrt();
                if d > radius_px {
                    assert_eq!(target[3 * (y * 32 + x)], 1.0);
                    assert_eq!(grad[3 * (y * 32 + x)], 0.0);
                }
            }
        }
        assert!(target[3 * (16 * 32 + 16)] < 1.0);
    }

    #[test]
    fn requires_begin() {
        let mut o = sphere_oracle();
        let req = GuidanceRequest {
            width: 2,
            height: 2,
            reference: vec![0.0; 12],
            current: vec![0.0; 12],
            relative_pose: RelativePose::default(),
            step_fraction: 0.0,
        };
        assert!(matches!(o.image_gradient(&req), Err(GuidanceError::Contract(_))));
    }
}
