use crate::camera::{CameraIntrinsics, CameraPose, frontmost_filter};
use crate::geometry::{SpatialIndex, Vec3};
use crate::render::GaussianSet;

/// `w1 · |scale|` and its derivative.
pub fn scaling_regularizer(scale: f64, w1: f64) -> (f64, f64) {
    (w1 * scale.abs(), w1 * scale.signum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preservation {
    pub loss: f64,
    /// Gradient with respect to the centres of the completion set.
    pub d_completion_centers: Vec<Vec3>,
    /// Indices into the concatenation `[input, completion]` visible from the reference view.
    pub visible: Vec<usize>,
}

/// `w2 · CD(P_pre, P_in)` where `P_pre` are the centres of the frontmost Gaussians of
/// the union seen from the reference pose. The visible set is held fixed while
/// differentiating; only completion centres receive gradient.
pub fn preservation_loss(
    g_in: &GaussianSet,
    g_m: &GaussianSet,
    p_in: &[Vec3],
    p_in_index: &SpatialIndex,
    v_p: &CameraPose,
    intr: &CameraIntrinsics,
    w2: f64,
) -> Preservation {
    let visible = frontmost_filter(&[g_in, g_m], v_p, intr);
    let mut grad = vec![Vec3::zeros(); g_m.len()];
    if visible.is_empty() || p_in.is_empty() {
        log::warn!("preservation term skipped: nothing visible from the reference pose");
        return Preservation { loss: 0.0, d_completion_centers: grad, visible };
    }
    let n_in = g_in.len();
    let center = |k: usize| if k < n_in { g_in.centers[k] } else { g_m.centers[k - n_in] };
    let pre: Vec<Vec3> = visible.iter().map(|&k| center(k)).collect();
    let pre_index = SpatialIndex::new(&pre);
    let (np, ni) = (pre.len() as f64, p_in.len() as f64);

    let mut forward = 0.0;
    for (j, a) in pre.iter().enumerate() {
        let nn = p_in_index.nearest(a).expect("non-empty input");
        let d = nn.dist();
        forward += d;
        let k = visible[j];
        if k >= n_in && d > 0.0 {
            grad[k - n_in] += (a - p_in[nn.index]) * (0.5 * w2 / (np * d));
        }
    }
    let mut backward = 0.0;
    for b in p_in {
        let nn = pre_index.nearest(b).expect("non-empty visible set");
        let d = nn.dist();
        backward += d;
        let k = visible[nn.index];
        if k >= n_in && d > 0.0 {
            grad[k - n_in] += (pre[nn.index] - b) * (0.5 * w2 / (ni * d));
        }
    }
    let loss = w2 * 0.5 * (forward / np + backward / ni);
    Preservation { loss, d_completion_centers: grad, visible }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chamfer_l1_points;
    use crate::render::logit;

    fn set(centers: Vec<Vec3>, frozen: bool) -> GaussianSet {
        let n = centers.len();
        GaussianSet::new(centers, 0.01, vec![logit(0.99); n], vec![Vec3::repeat(0.5); n], frozen).unwrap()
    }

    fn patch() -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                pts.push(Vec3::new(0.0, -0.3 + 0.2 * i as f64, -0.3 + 0.2 * j as f64));
            }
        }
        pts
    }

    #[test]
    fn regulariser_values() {
        assert_eq!(scaling_regularizer(0.02, 1e3), (20.0, 1e3));
        assert_eq!(scaling_regularizer(1e-12, 1e3).1, 1e3);
    }

    #[test]
    fn identity_and_stray_point() {
        let pose = CameraPose::new(0.0, 0.0, 2.0);
        let intr = CameraIntrinsics::square(64, 49.1);
        let p_in = patch();
        let index = SpatialIndex::new(&p_in);
        let g_in = set(p_in.clone(), true);
        let same = preservation_loss(&g_in, &set(p_in.clone(), false), &p_in, &index, &pose, &intr, 100.0);
        assert_eq!(same.loss, 0.0);

        // Both lie on the ray through input point 10 = (0, 0.1, 0.1): one in front, one behind.
        assert!((p_in[10] - Vec3::new(0.0, 0.1, 0.1)).norm() < 1e-12);
        let g_m = set(vec![Vec3::new(0.3, 0.085, 0.085), Vec3::new(-0.5, 0.125, 0.125)], false);
        let out = preservation_loss(&g_in, &g_m, &p_in, &index, &pose, &intr, 100.0);
        let pre: Vec<Vec3> = out.visible.iter().map(|&k| if k < 16 { p_in[k] } else { g_m.centers[k - 16] }).collect();
        assert!(out.visible.contains(&16) && !out.visible.contains(&17) && !out.visible.contains(&10));
        assert_eq!(out.visible.len(), 16);
        assert!((out.loss - 100.0 * chamfer_l1_points(&pre, &p_in)).abs() < 1e-12);
        assert_eq!(out.d_completion_centers[1], Vec3::zeros());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pose = CameraPose::new(0.0, 0.0, 2.0);
        let intr = CameraIntrinsics::square(64, 49.1);
        let p_in = patch();
        let index = SpatialIndex::new(&p_in);
        let g_in = set(p_in.clone(), true);
        let g_m = set(vec![Vec3::new(0.2, 0.47, 0.1), Vec3::new(0.15, -0.45, -0.43)], false);
        let out = preservation_loss(&g_in, &g_m, &p_in, &index, &pose, &intr, 100.0);
        let h = 1e-6;
        for i in 0..2 {
            for k in 0..3 {
                let mut plus = g_m.clone();
                plus.centers[i][k] += h;
                let mut minus = g_m.clone();
                minus.centers[i][k] -= h;
                let fd = (preservation_loss(&g_in, &plus, &p_in, &index, &pose, &intr, 100.0).loss
                    - preservation_loss(&g_in, &minus, &p_in, &index, &pose, &intr, 100.0).loss)
                    / (2.0 * h);
                let a = out.d_completion_centers[i][k];
                assert!((a - fd).abs() <= 1e-2 * fd.abs().max(1e-3), "{i},{k}: {a} vs {fd}");
            }
        }
    }
}
