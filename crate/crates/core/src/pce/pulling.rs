use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sdf::{ScalarField, SdfArchitecture, SdfNetwork, Tape};
use crate::error::{Error, Result, Stage};
use crate::geometry::{PointCloud, SpatialIndex, Vec3};
use crate::zfc::{Adam, AdamParams};

/// Moves `p` along the normalised field gradient by the field value. Points with a
/// vanishing gradient stay put.
pub fn pull_point(value: f64, gradient: &Vec3, p: &Vec3) -> Vec3 {
    let norm = gradient.norm();
    if norm < 1e-8 { *p } else { p - gradient * (value / norm) }
}

pub fn pull(field: &dyn ScalarField, points: &[Vec3]) -> Vec<Vec3> {
    let (values, grads) = field.values_and_gradients(points);
    points.iter().zip(values.iter().zip(&grads)).map(|(p, (v, g))| pull_point(*v, g, p)).collect()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 { x } else { x.exp().ln_1p() }
}

fn inverse_softplus(y: f64) -> f64 {
    if y > 30.0 { y } else { y.exp_m1().ln() }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Learnable merge bandwidth `σ = softplus(ρ)` and its regulariser weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeState {
    rho: f64,
    pub w3: f64,
}

impl MergeState {
    pub fn new(sigma: f64, w3: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::precondition("merge sigma must be positive"));
        }
        Ok(Self { rho: inverse_softplus(sigma), w3 })
    }

    pub fn sigma(&self) -> f64 {
        softplus(self.rho)
    }
}

/// One merged point and what its gradient needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merged {
    pub point: Vec3,
    /// Nearest input point.
    pub anchor: Vec3,
    pub dist: f64,
    pub weight: f64,
}

/// `w · y + (1 − w) · q` with `y` the nearest input point and `w = exp(−dist/σ)`.
pub fn merge_point(sigma: f64, q: &Vec3, p_in: &[Vec3], index: &SpatialIndex) -> Merged {
    let nn = index.nearest(q).expect("non-empty input");
    let y = p_in[nn.index];
    let dist = nn.dist();
    let weight = (-dist / sigma).exp();
    let point = if dist == 0.0 { y } else { y * weight + q * (1.0 - weight) };
    Merged { point, anchor: y, dist, weight }
}

pub fn merge_layer(state: &MergeState, pulled: &[Vec3], p_in: &PointCloud) -> Vec<Vec3> {
    let index = SpatialIndex::new(p_in.points());
    let sigma = state.sigma();
    pulled.iter().map(|q| merge_point(sigma, q, p_in.points(), &index).point).collect()
}

/// `chamfer_l1(a, b)` and its gradient with respect to `a`.
fn chamfer_with_grad(a: &[Vec3], b: &[Vec3], b_index: &SpatialIndex) -> (f64, Vec<Vec3>) {
    let a_index = SpatialIndex::new(a);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut grad = vec![Vec3::zeros(); a.len()];
    let mut fwd = 0.0;
    for (i, p) in a.iter().enumerate() {
        let nn = b_index.nearest(p).expect("non-empty target");
        let d = nn.dist();
        fwd += d;
        if d > 0.0 {
            grad[i] += (p - b[nn.index]) * (0.5 / (na * d));
        }
    }
    let mut bwd = 0.0;
    for t in b {
        let nn = a_index.nearest(t).expect("non-empty source");
        let d = nn.dist();
        bwd += d;
        if d > 0.0 {
            grad[nn.index] += (a[nn.index] - t) * (0.5 / (nb * d));
        }
    }
    (0.5 * (fwd / na + bwd / nb), grad)
}

/// Settings of the field fitting stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PullingConfig {
    pub iterations: usize,
    pub near_batch: usize,
    pub far_batch: usize,
    /// Standard deviation of the noise around surface points.
    pub sigma0: f64,
    pub w3: f64,
    pub initial_merge_sigma: f64,
    /// Peak network step size; decays to a tenth on a cosine schedule.
    pub lr: f64,
    pub merge_lr: f64,
    pub adam: AdamParams,
    pub architecture: SdfArchitecture,
    /// Relative padding of the box far samples are drawn from.
    pub padding: f64,
    /// Radius of the initial sphere, as a fraction of the half extent.
    pub init_radius: f64,
    pub seed: u64,
}

impl Default for PullingConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            near_batch: 1024,
            far_batch: 1024,
            sigma0: 0.005,
            w3: 0.1,
            initial_merge_sigma: 0.01,
            lr: 1e-3,
            merge_lr: 1e-3,
            adam: AdamParams::default(),
            architecture: SdfArchitecture::default(),
            padding: 0.05,
            init_radius: 0.5,
            seed: 0,
        }
    }
}

impl PullingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.near_batch == 0 || self.far_batch == 0 {
            return Err(Error::precondition("pulling needs at least one iteration and non-empty batches"));
        }
        if !(self.sigma0 >= 0.0) || !(self.w3 >= 0.0) || !(self.lr > 0.0) || !(self.merge_lr >= 0.0) {
            return Err(Error::precondition("pulling noise, weights and step sizes must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullingRecord {
    pub iteration: usize,
    pub far: f64,
    pub near: f64,
    pub merge: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedField {
    pub network: SdfNetwork,
    pub merge: MergeState,
    pub history: Vec<PullingRecord>,
}

struct Pulled {
    points: Vec<Vec3>,
    values: Vec<f64>,
    grads: Vec<Vec3>,
}

fn pull_from_tape(tape: &Tape, half_extent: f64, samples: &[Vec3]) -> Pulled {
    let mut out = Pulled { points: Vec::new(), values: Vec::new(), grads: Vec::new() };
    for (i, p) in samples.iter().enumerate() {
        let v = tape.value(i, half_extent);
        let g = tape.gradient(i);
        out.points.push(pull_point(v, &g, p));
        out.values.push(v);
        out.grads.push(g);
    }
    out
}

/// Chains a gradient on pulled points back to field values and input gradients.
fn pull_backward(pulled: &Pulled, d_points: &[Vec3], d_values: &mut [f64], d_grads: &mut [Vec3]) {
    for i in 0..d_points.len() {
        let g = pulled.grads[i];
        let norm = g.norm();
        if norm < 1e-8 {
            continue;
        }
        let n = g / norm;
        let q_bar = d_points[i];
        let along = q_bar.dot(&n);
        d_values[i] += -along;
        d_grads[i] += (q_bar - n * along) * (-pulled.values[i] / norm);
    }
}

/// Fits the field so that pulled noisy samples land on `p_surf`.
///
/// Every step draws `near_batch` surface points perturbed by `N(0, σ0²)` and
/// `far_batch` uniform points in the padded bounding box. The loss is
/// `CD(pull(far)) + CD(pull(near)) + CD(merge(pull(near))) + w3·σ`, all against
/// `p_surf`.
pub fn train_grid_pulling(p_surf: &PointCloud, p_in: &PointCloud, cfg: &PullingConfig) -> Result<TrainedField> {
    cfg.validate()?;
    if p_surf.is_empty() || p_in.is_empty() {
        return Err(Error::precondition("grid pulling needs non-empty surface and input clouds"));
    }
    let surf = p_surf.points();
    let bounds = p_surf.bounding_box().padded(cfg.padding);
    let mut network = SdfNetwork::new(cfg.architecture, &bounds, cfg.init_radius, cfg.seed)?;
    let mut merge = MergeState::new(cfg.initial_merge_sigma, cfg.w3)?;
    let surf_index = SpatialIndex::new(surf);
    let in_index = SpatialIndex::new(p_in.points());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9_01_1ed);
    let noise = Normal::new(0.0, cfg.sigma0.max(f64::MIN_POSITIVE)).expect("finite std");

    let mut params: Vec<f64> = network.parameters().iter().map(|v| *v as f64).collect();
    let mut opt = Adam::new(params.len(), cfg.lr, cfg.adam);
    let mut opt_rho = Adam::new(1, cfg.merge_lr, cfg.adam);
    let mut history = Vec::with_capacity(cfg.iterations);
    let (nn, nf) = (cfg.near_batch, cfg.far_batch);

    for it in 0..cfg.iterations {
        let mut samples = Vec::with_capacity(nn + nf);
        for _ in 0..nn {
            let p = surf[rng.gen_range(0..surf.len())];
            samples.push(if cfg.sigma0 > 0.0 {
                p + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                p
            });
        }
        for _ in 0..nf {
            samples.push(Vec3::new(
                rng.gen_range(bounds.min.x..=bounds.max.x),
                rng.gen_range(bounds.min.y..=bounds.max.y),
                rng.gen_range(bounds.min.z..=bounds.max.z),
            ));
        }
        let tape = network.forward(&samples);
        let pulled = pull_from_tape(&tape, network.half_extent(), &samples);

        let (near_loss, mut d_near) = chamfer_with_grad(&pulled.points[..nn], surf, &surf_index);
        let (far_loss, d_far) = chamfer_with_grad(&pulled.points[nn..], surf, &surf_index);

        let sigma = merge.sigma();
        let merged: Vec<Merged> =
            pulled.points[..nn].iter().map(|q| merge_point(sigma, q, p_in.points(), &in_index)).collect();
        let merged_points: Vec<Vec3> = merged.iter().map(|m| m.point).collect();
        let (mer_cd, d_merged) = chamfer_with_grad(&merged_points, surf, &surf_index);
        let mut d_sigma = merge.w3;
        for (i, (m, o_bar)) in merged.iter().zip(&d_merged).enumerate() {
            if m.dist == 0.0 {
                continue;
            }
            let q = pulled.points[i];
            let u = (q - m.anchor) / m.dist;
            let k = m.weight * m.dist / sigma;
            d_near[i] += o_bar * (1.0 - m.weight) + u * (k * o_bar.dot(&u));
            d_sigma += o_bar.dot(&(m.anchor - q)) * k / sigma;
        }

        let loss = far_loss + near_loss + mer_cd + merge.w3 * sigma;
        if !loss.is_finite() {
            return Err(Error::Diverged { stage: Stage::Extraction, iteration: it, detail: format!("pulling loss {loss}") });
        }
        let d_points: Vec<Vec3> = d_near.into_iter().chain(d_far).collect();
        let mut d_values = vec![0.0; nn + nf];
        let mut d_grads = vec![Vec3::zeros(); nn + nf];
        pull_backward(&pulled, &d_points, &mut d_values, &mut d_grads);
        let grad: Vec<f64> = network.backward(&tape, &d_values, &d_grads).iter().map(|v| *v as f64).collect();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { stage: Stage::Extraction, iteration: it, detail: "non-finite network gradient".into() });
        }

        let progress = it as f64 / cfg.iterations as f64;
        opt.lr = cfg.lr * (0.1 + 0.45 * (1.0 + (std::f64::consts::PI * progress).cos()));
        opt.step(&mut params, &grad);
        let p32: Vec<f32> = params.iter().map(|v| *v as f32).collect();
        network.set_parameters(&p32);
        let mut rho = [merge.rho];
        opt_rho.step(&mut rho, &[d_sigma * sigmoid(merge.rho)]);
        merge.rho = rho[0];

        let record = PullingRecord { iteration: it, far: far_loss, near: near_loss, merge: mer_cd, sigma: merge.sigma() };
        if it % 500 == 0 || it + 1 == cfg.iterations {
            log::debug!("pulling {it}: far {:.5} near {:.5} merge {:.5} sigma {:.5}", far_loss, near_loss, mer_cd, record.sigma);
        }
        history.push(record);
    }
    if !network.is_finite() {
        return Err(Error::Diverged { stage: Stage::Extraction, iteration: cfg.iterations, detail: "non-finite network weights".into() });
    }
    Ok(TrainedField { network, merge, history })
}
