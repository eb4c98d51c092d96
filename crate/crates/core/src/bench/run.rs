use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{EvalConfig, evaluate, multimodal_metrics};
use super::report::{ResultRow, aggregate};
use super::synth::{ScanSetup, add_noise, synth_partial_from_mesh};
use crate::error::{Error, Result};
use crate::geometry::io::write_cloud;
use crate::geometry::{PointCloud, Similarity};
use crate::guidance::{BridgeProvider, GuidanceProvider};
use crate::mesh::TriMesh;
use crate::pipeline::{PipelineConfig, complete, oracle_for};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuidanceMode {
    /// Photometric guidance from the object's own ground truth.
    Oracle,
    /// A guidance server at `COMPC_BRIDGE_ADDR` or the default port.
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    /// Meshes; each one is an object.
    pub inputs: Vec<PathBuf>,
    /// Number of consecutive depth maps merged into the partial scan.
    pub level: usize,
    pub noise_std: f64,
    pub resolution: usize,
    pub repeats: usize,
    /// Completion seeds, one per repeat; defaults to `0..repeats`.
    pub seeds: Vec<u64>,
    pub guidance: GuidanceMode,
    /// Seed of the partial scan and its noise, shared by every repeat.
    pub data_seed: u64,
    /// Points sampled from the mesh as ground truth for the oracle.
    pub oracle_points: usize,
    /// Where to write each completion as `<object>_s<seed>.ply`.
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub scan: ScanSetup,
    pub eval: EvalConfig,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            level: 1,
            noise_std: 0.0,
            resolution: 16_384,
            repeats: 3,
            seeds: Vec::new(),
            guidance: GuidanceMode::Oracle,
            data_seed: 0,
            oracle_points: 4096,
            output_dir: None,
            jobs: 0,
            scan: ScanSetup::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.repeats == 0 {
            return Err(Error::precondition("resolution and repeats must be at least 1"));
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.repeats {
            return Err(Error::precondition(format!("{} seeds given for {} repeats", self.seeds.len(), self.repeats)));
        }
        if !matches!(self.level, 1 | 3 | 7) {
            log::warn!("incompleteness level {} is outside the usual 1, 3, 7", self.level);
        }
        if self.level == 0 {
            return Err(Error::precondition("incompleteness level must be at least 1"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::precondition("noise std must be non-negative"));
        }
        self.eval.validate()
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() { (0..self.repeats as u64).collect() } else { self.seeds.clone() }
    }
}

/// A named benchmark shape.
#[derive(Debug, Clone)]
pub struct BenchObject {
    pub id: String,
    pub mesh: TriMesh,
}

impl BenchObject {
    /// Loads an OBJ file; the id is the file stem.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let id = path.file_stem().map_or_else(|| "object".into(), |s| s.to_string_lossy().into_owned());
        Ok(Self { id, mesh: TriMesh::read_obj(path)? })
    }
}

/// Everything one object contributes to a benchmark.
#[derive(Debug, Clone)]
pub struct ObjectRun {
    pub partial: PointCloud,
    pub gt: PointCloud,
    pub completions: Vec<(u64, PointCloud)>,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<(u64, String)>,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    /// Per-seed rows followed by each object's aggregate.
    pub rows: Vec<ResultRow>,
    /// (object, seed, error) for every job that did not finish.
    pub failures: Vec<(String, u64, String)>,
}

/// Scales the mesh into the unit box so scores are comparable across objects.
fn unit_mesh(mesh: &TriMesh) -> Result<TriMesh> {
    let bbox = mesh.bounding_box();
    let extent = bbox.max_extent();
    if !(extent > 0.0) {
        return Err(Error::DegenerateExtent("mesh has no extent".into()));
    }
    let sim = Similarity { scale: 1.0 / extent, offset: -bbox.center() / extent };
    Ok(mesh.map_vertices(|v| sim.apply(v)))
}

fn provider(spec: &BenchmarkSpec, partial: &PointCloud, gt: &PointCloud) -> Result<Box<dyn GuidanceProvider>> {
    Ok(match spec.guidance {
        GuidanceMode::Oracle => Box::new(oracle_for(partial, gt)?),
        GuidanceMode::Bridge => Box::new(BridgeProvider::from_env()),
    })
}

/// Scans the object, completes it once per seed and scores every completion.
pub fn run_object(object: &BenchObject, spec: &BenchmarkSpec, cfg: &PipelineConfig) -> Result<ObjectRun> {
    spec.validate()?;
    let mesh = unit_mesh(&object.mesh)?;
    let partial = add_noise(&synth_partial_from_mesh(&mesh, spec.level, spec.data_seed, &spec.scan)?, spec.noise_std, spec.data_seed)?;
    let gt = mesh.sample_surface(spec.resolution, spec.data_seed)?;
    let oracle_gt = mesh.sample_surface(spec.oracle_points, spec.data_seed.wrapping_add(1))?;
    let cfg = PipelineConfig { output_points: Some(spec.resolution), ..cfg.clone() };

    let mut run = ObjectRun { partial, gt, completions: Vec::new(), rows: Vec::new(), failures: Vec::new() };
    for seed in spec.seeds() {
        let started = Instant::now();
        let attempt = provider(spec, &run.partial, &oracle_gt).and_then(|mut guide| {
            let out = complete(&run.partial, guide.as_mut(), &cfg.clone().with_seed(seed))?;
            let scores = evaluate(&out.points, &run.gt, &EvalConfig { seed, ..spec.eval })?;
            Ok((out.points, scores))
        });
        match attempt {
            Ok((points, scores)) => {
                if let Some(dir) = &spec.output_dir {
                    write_cloud(dir.join(format!("{}_s{seed}.ply", object.id)), &points)?;
                }
                let row = ResultRow {
                    object: object.id.clone(),
                    seed: Some(seed),
                    cd_x100: scores.cd_x100,
                    emd_x100: scores.emd_x100,
                    tmd: None,
                    uhd: None,
                    mmd: None,
                    seconds: started.elapsed().as_secs_f64(),
                };
                row.validate()?;
                log::info!("{} seed {seed}: CD {:.3} EMD {:.3}", object.id, row.cd_x100, row.emd_x100);
                run.rows.push(row);
                run.completions.push((seed, points));
            }
            Err(e) => {
                log::error!("{} seed {seed} failed: {e}", object.id);
                run.failures.push((seed, e.to_string()));
            }
        }
    }
    Ok(run)
}

/// Runs every object in a worker pool and appends one aggregate row per object.
pub fn run_benchmark(objects: &[BenchObject], spec: &BenchmarkSpec, cfg: &PipelineConfig) -> Result<BenchReport> {
    spec.validate()?;
    cfg.validate()?;
    if let Some(dir) = &spec.output_dir {
        std::fs::create_dir_all(dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    let runs: Vec<(String, Result<ObjectRun>)> =
        pool.install(|| objects.par_iter().map(|o| (o.id.clone(), run_object(o, spec, cfg))).collect());

    let mut report = BenchReport::default();
    for (id, run) in runs {
        let run = match run {
            Ok(run) => run,
            Err(e) => {
                report.failures.extend(spec.seeds().into_iter().map(|s| (id.clone(), s, e.to_string())));
                continue;
            }
        };
        let clouds: Vec<PointCloud> = run.completions.iter().map(|(_, c)| c.clone()).collect();
        let multimodal = if clouds.len() >= 2 { Some(multimodal_metrics(&clouds, &run.partial, &run.gt)?) } else { None };
        let mean = aggregate(&run.rows, multimodal);
        report.rows.extend(run.rows);
        report.rows.extend(mean);
        report.failures.extend(run.failures.into_iter().map(|(s, e)| (id.clone(), s, e)));
    }
    Ok(report)
}
