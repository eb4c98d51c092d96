use std::cmp::Ordering;

use crate::camera::{CameraIntrinsics, CameraPose, Projector};
use crate::geometry::Vec3;

use super::gaussians::{GaussianSet, RenderGradients, binarize_opacity_backward};
use super::image::RenderedImage;

/// Footprints end at this many standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 3.0;
/// Per-splat alpha never exceeds this value.
pub const ALPHA_MAX: f64 = 0.999;

const Q_CUT: f64 = 0.5 * TRUNCATION_SIGMAS * TRUNCATION_SIGMAS;

/// Footprint profile at `q = d²/(2σ²)`: `exp(−q)` minus its first-order expansion at
/// the truncation radius, rescaled to 1 at the centre. Value and slope both reach 0
/// at the cut, so the image is continuously differentiable in every parameter.
pub fn footprint_weight(q: f64) -> f64 {
    if q >= Q_CUT {
        return 0.0;
    }
    let tail = (-Q_CUT).exp();
    ((-q).exp() - tail * (1.0 + Q_CUT - q)) / (1.0 - tail * (1.0 + Q_CUT))
}

fn footprint_weight_dq(q: f64) -> f64 {
    if q >= Q_CUT {
        return 0.0;
    }
    let tail = (-Q_CUT).exp();
    (tail - (-q).exp()) / (1.0 - tail * (1.0 + Q_CUT))
}

/// Flat list of splats with explicit per-splat opacity and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Splats {
    pub centers: Vec<Vec3>,
    pub scales: Vec<f64>,
    pub opacities: Vec<f64>,
    pub colors: Vec<Vec3>,
}

impl Splats {
    /// Concatenates sets in order, applying binarised opacity.
    pub fn from_sets(sets: &[&GaussianSet]) -> Self {
        let mut s = Splats { centers: Vec::new(), scales: Vec::new(), opacities: Vec::new(), colors: Vec::new() };
        for set in sets {
            s.centers.extend_from_slice(&set.centers);
            s.scales.extend(std::iter::repeat_n(set.scale, set.len()));
            s.opacities.extend(set.opacities());
            s.colors.extend_from_slice(&set.colors);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplatGradients {
    pub d_centers: Vec<Vec3>,
    pub d_scales: Vec<f64>,
    pub d_opacities: Vec<f64>,
    pub d_colors: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy)]
struct Projected {
    index: usize,
    u: f64,
    v: f64,
    cam: Vec3,
    sigma: f64,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

fn project_splats(splats: &Splats, proj: &Projector) -> Vec<Projected> {
    let mut out = Vec::with_capacity(splats.len());
    for (index, c) in splats.centers.iter().enumerate() {
        let cam = proj.camera_coords(c);
        if !(cam.z > proj.near && cam.z < proj.far) {
            continue;
        }
        let u = proj.cx + proj.focal * cam.x / cam.z;
        let v = proj.cy + proj.focal * cam.y / cam.z;
        let sigma = splats.scales[index] * proj.focal / cam.z;
        let r = TRUNCATION_SIGMAS * sigma;
        let fx0 = (u - r - 0.5).ceil().max(0.0);
        let fx1 = (u + r - 0.5).floor().min(proj.width as f64 - 1.0);
        let fy0 = (v - r - 0.5).ceil().max(0.0);
        let fy1 = (v + r - 0.5).floor().min(proj.height as f64 - 1.0);
        if !(fx0 <= fx1 && fy0 <= fy1) {
            continue;
        }
        out.push(Projected { index, u, v, cam, sigma, x0: fx0 as usize, x1: fx1 as usize, y0: fy0 as usize, y1: fy1 as usize });
    }
    out.sort_by(|a, b| match a.cam.z.total_cmp(&b.cam.z) {
        Ordering::Equal => a.index.cmp(&b.index),
        o => o,
    });
    out
}

/// Visits every (splat, covered pixel) pair front to back with the raw footprint terms.
fn for_each_fragment(
    sorted: &[Projected],
    width: usize,
    mut f: impl FnMut(&Projected, usize, f64, f64, f64),
) {
    for p in sorted {
        let inv2 = 1.0 / (2.0 * p.sigma * p.sigma);
        for y in p.y0..=p.y1 {
            let dy = y as f64 + 0.5 - p.v;
            for x in p.x0..=p.x1 {
                let dx = x as f64 + 0.5 - p.u;
                let q = (dx * dx + dy * dy) * inv2;
                if q < Q_CUT {
                    f(p, y * width + x, q, dx, dy);
                }
            }
        }
    }
}

fn splat_alpha(opacity: f64, q: f64) -> (f64, bool) {
    let a = opacity * footprint_weight(q);
    if a > ALPHA_MAX { (ALPHA_MAX, true) } else { (a.max(0.0), false) }
}

/// Front-to-back alpha compositing over a white background. Splats are ordered by
/// camera depth with ties broken by index, which gives every pixel the same order.
pub fn render_splats(splats: &Splats, pose: &CameraPose, intr: &CameraIntrinsics) -> RenderedImage {
    let proj = Projector::new(pose, intr);
    let sorted = project_splats(splats, &proj);
    composite(splats, &sorted, intr)
}

fn composite(splats: &Splats, sorted: &[Projected], intr: &CameraIntrinsics) -> RenderedImage {
    let (w, h) = (intr.width, intr.height);
    let mut color = vec![0.0; 3 * w * h];
    let mut depth = vec![0.0; w * h];
    let mut trans = vec![1.0; w * h];
    for_each_fragment(sorted, w, |p, px, q, _, _| {
        let (a, _) = splat_alpha(splats.opacities[p.index], q);
        let weight = a * trans[px];
        let c = &splats.colors[p.index];
        color[3 * px] += weight * c.x;
        color[3 * px + 1] += weight * c.y;
        color[3 * px + 2] += weight * c.z;
        depth[px] += weight * p.cam.z;
        trans[px] *= 1.0 - a;
    });
    let mut img = RenderedImage::background(w, h, intr.far);
    for px in 0..w * h {
        let t = trans[px];
        for ch in 0..3 {
            img.color[3 * px + ch] = color[3 * px + ch] + t * super::image::BACKGROUND;
        }
        img.depth[px] = depth[px] + t * intr.far;
        img.alpha[px] = 1.0 - t;
    }
    img
}

/// Reverse-mode gradients of `Σ d_color · color` with respect to every splat
/// parameter. The forward pass is recomputed so the call is self-contained.
pub fn render_splats_backward(
    splats: &Splats,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    d_color: &[f64],
) -> SplatGradients {
    let n = splats.len();
    assert_eq!(d_color.len(), 3 * intr.width * intr.height, "gradient image size mismatch");
    let proj = Projector::new(pose, intr);
    let sorted = project_splats(splats, &proj);
    let final_img = composite(splats, &sorted, intr);
    let final_color = &final_img.color;
    let (w, h) = (intr.width, intr.height);

    let mut trans = vec![1.0; w * h];
    let mut acc = vec![0.0; 3 * w * h];
    let mut d_u = vec![0.0; n];
    let mut d_v = vec![0.0; n];
    let mut d_sigma = vec![0.0; n];
    let mut d_opacities = vec![0.0; n];
    let mut d_colors = vec![Vec3::zeros(); n];

    for_each_fragment(&sorted, w, |p, px, q, dx, dy| {
        let i = p.index;
        let o = splats.opacities[i];
        let (a, clamped) = splat_alpha(o, q);
        let t = trans[px];
        let weight = a * t;
        let c = splats.colors[i];
        let g = [d_color[3 * px], d_color[3 * px + 1], d_color[3 * px + 2]];
        let mut d_alpha = 0.0;
        for ch in 0..3 {
            let acc_incl = acc[3 * px + ch] + c[ch] * weight;
            let rest = final_color[3 * px + ch] - acc_incl;
            d_alpha += g[ch] * (c[ch] * t - rest / (1.0 - a));
            d_colors[i][ch] += g[ch] * weight;
            acc[3 * px + ch] = acc_incl;
        }
        trans[px] = t * (1.0 - a);
        if clamped || a <= 0.0 {
            return;
        }
        d_opacities[i] += d_alpha * footprint_weight(q);
        let d_q = d_alpha * o * footprint_weight_dq(q);
        let s2 = p.sigma * p.sigma;
        d_u[i] += d_q * (-dx / s2);
        d_v[i] += d_q * (-dy / s2);
        d_sigma[i] += d_q * (-2.0 * q / p.sigma);
    });

    let rt = proj.rotation.transpose();
    let f = proj.focal;
    let mut d_centers = vec![Vec3::zeros(); n];
    let mut d_scales = vec![0.0; n];
    for p in &sorted {
        let i = p.index;
        let (x, y, z) = (p.cam.x, p.cam.y, p.cam.z);
        let s = splats.scales[i];
        let d_cam = Vec3::new(
            d_u[i] * f / z,
            d_v[i] * f / z,
            -(d_u[i] * f * x + d_v[i] * f * y + d_sigma[i] * s * f) / (z * z),
        );
        d_centers[i] = rt * d_cam;
        d_scales[i] = d_sigma[i] * f / z;
    }
    SplatGradients { d_centers, d_scales, d_opacities, d_colors }
}

/// Renders the concatenation of `sets`.
pub fn render(sets: &[&GaussianSet], pose: &CameraPose, intr: &CameraIntrinsics) -> RenderedImage {
    render_splats(&Splats::from_sets(sets), pose, intr)
}

/// Per-set gradients; opacity gradients flow to the logits through the
/// straight-through path and frozen sets receive zeros.
pub fn render_backward(
    sets: &[&GaussianSet],
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    d_color: &[f64],
) -> Vec<RenderGradients> {
    let splats = Splats::from_sets(sets);
    let grads = render_splats_backward(&splats, pose, intr, d_color);
    let mut out = Vec::with_capacity(sets.len());
    let mut offset = 0;
    for set in sets {
        let n = set.len();
        if set.frozen {
            out.push(RenderGradients::zeros(n));
        } else {
            let r = offset..offset + n;
            out.push(RenderGradients {
                d_centers: grads.d_centers[r.clone()].to_vec(),
                d_scale: grads.d_scales[r.clone()].iter().sum(),
                d_opacity_logits: set
                    .opacity_logits
                    .iter()
                    .zip(&grads.d_opacities[r.clone()])
                    .map(|(l, d)| binarize_opacity_backward(*l, *d))
                    .collect(),
                d_colors: grads.d_colors[r].to_vec(),
            });
        }
        offset += n;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{BACKGROUND, DELTA_OPACITY, logit};

    fn one(center: Vec3, scale: f64, opacity: f64, color: Vec3) -> Splats {
        Splats { centers: vec![center], scales: vec![scale], opacities: vec![opacity], colors: vec![color] }
    }

    #[test]
    fn single_splat_peaks_at_centre() {
        let intr = CameraIntrinsics::square(33, 49.1);
        let pose = CameraPose::new(0.0, 0.0, 2.0);
        let img = render_splats(&one(Vec3::zeros(), 0.05, 1.0, Vec3::zeros()), &pose, &intr);
        // Dark splat on white: darkest pixel is the one holding the projected centre.
        let (cx, cy) = (16, 16);
        let centre = img.rgb(cx, cy)[0];
        for y in 0..33 {
            for x in 0..33 {
                assert!(img.rgb(x, y)[0] >= centre);
            }
        }
        for x in cx..32 {
            assert!(img.rgb(x + 1, cy)[0] >= img.rgb(x, cy)[0]);
        }
        assert_eq!(img.rgb(0, 0), [BACKGROUND; 3]);
    }

    #[test]
    fn nearer_splat_wins() {
        let intr = CameraIntrinsics::square(16, 49.1);
        let pose = CameraPose::new(0.0, 0.0, 3.0);
        let s = Splats {
            centers: vec![Vec3::new(-0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)],
            scales: vec![0.4, 0.4],
            opacities: vec![1.0, 1.0],
            colors: vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)],
        };
        let c = render_splats(&s, &pose, &intr).rgb(8, 8);
        // Both project to the image centre; pixel (8, 8) sits half a pixel off in x and y.
        let f = intr.focal();
        let alpha = |depth: f64| footprint_weight(0.5 / (2.0 * (0.4 * f / depth).powi(2)));
        let (a1, a2) = (alpha(2.5), alpha(3.5));
        let expect = [a1 + (1.0 - a1) * (1.0 - a2), (1.0 - a1) * (1.0 - a2), (1.0 - a1) * (a2 + 1.0 - a2)];
        for ch in 0..3 {
            assert!((c[ch] - expect[ch]).abs() < 1e-12, "{c:?} vs {expect:?}");
        }
        assert!(c[0] > 0.9 && c[2] < 0.1);
    }

    #[test]
    fn compositing_weights_bounded() {
        let intr = CameraIntrinsics::square(24, 49.1);
        let pose = CameraPose::new(20.0, 10.0, 2.5);
        let s = Splats {
            centers: crate::geometry::shapes::random_ball_points(40, 0.5, 2),
            scales: vec![0.08; 40],
            opacities: vec![DELTA_OPACITY; 40],
            colors: vec![Vec3::zeros(); 40],
        };
        let img = render_splats(&s, &pose, &intr);
        assert!(img.alpha.iter().all(|a| (0.0..=1.0).contains(a)));
        assert!(img.alpha.iter().cloned().fold(0.0, f64::max) < 1.0 - (1.0 - DELTA_OPACITY).powi(40) + 1e-12);
        assert_eq!(img, render_splats(&s, &pose, &intr));
    }

    #[test]
    fn colour_gradient_of_sum() {
        let intr = CameraIntrinsics::square(20, 49.1);
        let pose = CameraPose::new(0.0, 0.0, 2.0);
        let s = one(Vec3::zeros(), 0.06, 1.0, Vec3::repeat(0.3));
        let ones = vec![1.0; 3 * 400];
        let g = render_splats_backward(&s, &pose, &intr, &ones);
        let img = render_splats(&s, &pose, &intr);
        let weight_sum: f64 = img.alpha.iter().sum();
        for ch in 0..3 {
            assert!((g.d_colors[0][ch] - weight_sum).abs() < 1e-9);
        }
    }

    #[test]
    fn frozen_sets_get_zero_gradients() {
        let intr = CameraIntrinsics::square(16, 49.1);
        let pose = CameraPose::new(0.0, 0.0, 2.0);
        let a = GaussianSet::new(vec![Vec3::zeros()], 0.1, vec![logit(0.99)], vec![Vec3::zeros()], true).unwrap();
        let b = GaussianSet::new(vec![Vec3::new(0.1, 0.0, 0.0)], 0.1, vec![logit(0.9)], vec![Vec3::zeros()], false)
            .unwrap();
        let grads = render_backward(&[&a, &b], &pose, &intr, &vec![1.0; 3 * 256]);
        assert!(grads[0].is_zero());
        assert!(!grads[1].is_zero());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let intr = CameraIntrinsics::square(32, 49.1);
        let pose = CameraPose::new(15.0, 30.0, 2.0);
        let n = 6;
        let s = Splats {
            centers: crate::geometry::shapes::random_ball_points(n, 0.4, 7),
            scales: vec![0.07; n],
            opacities: (0..n).map(|i| 0.3 + 0.1 * i as f64).collect(),
            colors: (0..n).map(|i| Vec3::new(0.1 * i as f64, 0.5, 0.9 - 0.1 * i as f64)).collect(),
        };
        let weights: Vec<f64> = (0..3 * 32 * 32).map(|k| ((k * 37) % 11) as f64 / 11.0 - 0.4).collect();
        let loss = |s: &Splats| -> f64 {
            render_splats(s, &pose, &intr).color.iter().zip(&weights).map(|(c, w)| c * w).sum()
        };
        let g = render_splats_backward(&s, &pose, &intr, &weights);
        let h = 1e-5;
        let check = |analytic: f64, plus: Splats, minus: Splats| {
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!((analytic - fd).abs() <= 1e-4 * fd.abs().max(1.0), "{analytic} vs {fd}");
        };
        for i in 0..n {
            for k in 0..3 {
                let (mut p, mut m) = (s.clone(), s.clone());
                p.centers[i][k] += h;
                m.centers[i][k] -= h;
                check(g.d_centers[i][k], p, m);
                let (mut p, mut m) = (s.clone(), s.clone());
                p.colors[i][k] += h;
                m.colors[i][k] -= h;
                check(g.d_colors[i][k], p, m);
            }
            let (mut p, mut m) = (s.clone(), s.clone());
            p.scales[i] += h;
            m.scales[i] -= h;
            check(g.d_scales[i], p, m);
            let (mut p, mut m) = (s.clone(), s.clone());
            p.opacities[i] += h;
            m.opacities[i] -= h;
            check(g.d_opacities[i], p, m);
        }
    }
}
