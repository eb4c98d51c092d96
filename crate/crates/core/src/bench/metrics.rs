use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EmdOptions, PointCloud, SpatialIndex, chamfer_l1, emd_approx, farthest_point_sample};

/// How predictions are compared with ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Both clouds are farthest-point sampled to this many points before the Chamfer distance.
    pub resolution: usize,
    /// Matching size for the approximate EMD; the auction is quadratic in it.
    pub emd_size: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { resolution: 16_384, emd_size: 2048, seed: 0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.emd_size == 0 {
            return Err(Error::precondition("evaluation resolution and EMD size must be positive"));
        }
        Ok(())
    }
}

/// Distances scaled by 10².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub cd_x100: f64,
    pub emd_x100: f64,
}

fn at_resolution(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if cloud.len() > n { farthest_point_sample(cloud, n, seed) } else { Ok(cloud.without_normals()) }
}

/// L1 Chamfer and approximate EMD, ×10², after bringing both clouds to `cfg.resolution`.
pub fn evaluate(pred: &PointCloud, gt: &PointCloud, cfg: &EvalConfig) -> Result<Scores> {
    cfg.validate()?;
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty cloud".into()));
    }
    let pred = at_resolution(pred, cfg.resolution, cfg.seed)?;
    let gt = at_resolution(gt, cfg.resolution, cfg.seed)?;
    let emd = emd_approx(&pred, &gt, &EmdOptions { size: cfg.emd_size, seed: cfg.seed, ..Default::default() })?;
    Ok(Scores { cd_x100: 100.0 * chamfer_l1(&pred, &gt), emd_x100: 100.0 * emd })
}

/// Diversity and fidelity of repeated completions of one input, ×10².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multimodal {
    /// Mean pairwise Chamfer distance among the completions.
    pub tmd: f64,
    /// Mean over completions of the largest input-to-completion distance.
    pub uhd: f64,
    /// Smallest Chamfer distance from a completion to the ground truth.
    pub mmd: f64,
}

pub fn multimodal_metrics(completions: &[PointCloud], p_in: &PointCloud, gt: &PointCloud) -> Result<Multimodal> {
    if completions.len() < 2 {
        return Err(Error::precondition("multi-modal metrics need at least two completions"));
    }
    if p_in.is_empty() || gt.is_empty() || completions.iter().any(PointCloud::is_empty) {
        return Err(Error::InvalidInput("multi-modal metrics need non-empty clouds".into()));
    }
    let k = completions.len();
    let mut pair_sum = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            pair_sum += chamfer_l1(&completions[i], &completions[j]);
        }
    }
    let tmd = pair_sum / (k * (k - 1) / 2) as f64;
    let uhd = completions
        .iter()
        .map(|c| {
            let index = SpatialIndex::new(c.points());
            p_in.points().iter().map(|p| index.nearest(p).map_or(0.0, |n| n.dist())).fold(0.0, f64::max)
        })
        .sum::<f64>()
        / k as f64;
    let mmd = completions.iter().map(|c| chamfer_l1(c, gt)).fold(f64::INFINITY, f64::min);
    Ok(Multimodal { tmd: 100.0 * tmd, uhd: 100.0 * uhd, mmd: 100.0 * mmd })
}
