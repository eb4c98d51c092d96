use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

/// Opacity of a "transparent" Gaussian after binarisation.
pub const DELTA_OPACITY: f64 = 0.01;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Forward value of the binarised opacity: 1 when `sigmoid(logit) > 0.5`, δ otherwise.
pub fn binarize_opacity(logit: f64) -> f64 {
    if sigmoid(logit) > 0.5 { 1.0 } else { DELTA_OPACITY }
}

/// Straight-through backward: the rounding residual is treated as a constant, so the
/// gradient reaching the logit is the one of the continuous sigmoid path.
pub fn binarize_opacity_backward(logit: f64, d_opacity: f64) -> f64 {
    d_opacity * sigmoid_derivative(logit)
}

/// Maps unit normals in `[-1, 1]³` to colours in `[0, 1]³`.
pub fn colorize_by_normals(cloud: &PointCloud) -> Result<Vec<Vec3>> {
    let normals = cloud.normals().ok_or_else(|| Error::precondition("colouring by normals needs normals"))?;
    Ok(normals.iter().map(|n| (n.add_scalar(1.0) * 0.5).map(|c| c.clamp(0.0, 1.0))).collect())
}

/// Isotropic, flat-coloured Gaussians sharing one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSet {
    pub centers: Vec<Vec3>,
    pub scale: f64,
    pub opacity_logits: Vec<f64>,
    pub colors: Vec<Vec3>,
    pub frozen: bool,
}

impl GaussianSet {
    pub fn new(centers: Vec<Vec3>, scale: f64, opacity_logits: Vec<f64>, colors: Vec<Vec3>, frozen: bool) -> Result<Self> {
        let n = centers.len();
        if opacity_logits.len() != n || colors.len() != n {
            return Err(Error::InvalidInput(format!(
                "Gaussian attribute lengths differ: {n} centres, {} logits, {} colours",
                opacity_logits.len(),
                colors.len()
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::precondition(format!("Gaussian scale must be positive, got {scale}")));
        }
        if centers.iter().any(|c| !c.iter().all(|v| v.is_finite())) || opacity_logits.iter().any(|l| l.is_nan()) {
            return Err(Error::InvalidInput("non-finite Gaussian parameters".into()));
        }
        let colors = colors.into_iter().map(|c| c.map(|v| v.clamp(0.0, 1.0))).collect();
        Ok(Self { centers, scale, opacity_logits, colors, frozen })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn opacity(&self, i: usize) -> f64 {
        binarize_opacity(self.opacity_logits[i])
    }

    pub fn is_opaque(&self, i: usize) -> bool {
        self.opacity(i) > 0.5
    }

    pub fn opacities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.opacity(i)).collect()
    }

    pub fn centers_cloud(&self) -> Result<PointCloud> {
        PointCloud::new(self.centers.clone())
    }

    /// Little-endian dump of every parameter; two sets with equal bytes are bit-identical.
    pub fn parameter_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.len() * 56 + 1);
        out.extend_from_slice(&self.scale.to_le_bytes());
        for i in 0..self.len() {
            for v in self.centers[i].iter().chain(self.colors[i].iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&self.opacity_logits[i].to_le_bytes());
        }
        out.push(self.frozen as u8);
        out
    }
}

/// Gradients of a scalar loss with respect to one [`GaussianSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderGradients {
    pub d_centers: Vec<Vec3>,
    pub d_scale: f64,
    pub d_opacity_logits: Vec<f64>,
    pub d_colors: Vec<Vec3>,
}

impl RenderGradients {
    pub fn zeros(n: usize) -> Self {
        Self { d_centers: vec![Vec3::zeros(); n], d_scale: 0.0, d_opacity_logits: vec![0.0; n], d_colors: vec![Vec3::zeros(); n] }
    }

    pub fn is_zero(&self) -> bool {
        self.d_scale == 0.0
            && self.d_centers.iter().all(|v| v.iter().all(|x| *x == 0.0))
            && self.d_colors.iter().all(|v| v.iter().all(|x| *x == 0.0))
            && self.d_opacity_logits.iter().all(|x| *x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.d_scale.is_finite()
            && self.d_centers.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.d_colors.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.d_opacity_logits.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarisation_values() {
        assert_eq!(binarize_opacity(logit(0.7)), 1.0);
        assert_eq!(binarize_opacity(logit(0.3)), DELTA_OPACITY);
        assert_eq!(binarize_opacity(0.0), DELTA_OPACITY);
        for l in [-4.0, -0.3, 0.0, 0.2, 3.0] {
            let h = 1e-6;
            let fd = (sigmoid(l + h) - sigmoid(l - h)) / (2.0 * h);
            assert!((binarize_opacity_backward(l, 1.0) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn normal_colours() {
        let c = PointCloud::with_normals(
            vec![Vec3::zeros(), Vec3::x()],
            vec![Vec3::z(), -Vec3::x()],
        )
        .unwrap();
        let cols = colorize_by_normals(&c).unwrap();
        assert_eq!(cols[0], Vec3::new(0.5, 0.5, 1.0));
        assert_eq!(cols[1], Vec3::new(0.0, 0.5, 0.5));
        assert!(colorize_by_normals(&c.without_normals()).is_err());
    }

    #[test]
    fn set_validation() {
        assert!(GaussianSet::new(vec![Vec3::zeros()], 0.0, vec![0.0], vec![Vec3::zeros()], false).is_err());
        assert!(GaussianSet::new(vec![Vec3::zeros()], 0.1, vec![], vec![Vec3::zeros()], false).is_err());
        let g = GaussianSet::new(vec![Vec3::zeros()], 0.1, vec![2.0], vec![Vec3::repeat(2.0)], true).unwrap();
        assert_eq!(g.colors[0], Vec3::repeat(1.0));
        assert!(g.is_opaque(0));
    }
}
