use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use compc::bench::{
    BenchObject, BenchmarkSpec, EvalConfig, GuidanceMode, ResultRow, ScanSetup, add_noise, evaluate, format_table,
    synth_partial_from_mesh, write_csv,
};
use compc::geometry::io::{read_cloud, write_cloud};
use compc::guidance::{BridgeProvider, GuidanceProvider};
use compc::mesh::TriMesh;
use compc::pce::{GridConfig, Lattice, SdfNetwork, evaluate_grid, marching_cubes};
use compc::pipeline::{PipelineConfig, complete, oracle_for, working_frame};
use compc::zfc::write_checkpoint;
use compc::{Error, Result};

#[derive(Parser)]
#[command(name = "compc", version, about = "Point-cloud completion with Gaussian splats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Complete a partial point cloud.
    Complete(CompleteArgs),
    /// Cut a partial scan out of a mesh with virtual depth cameras.
    Synth(SynthArgs),
    /// Add Gaussian noise to a cloud.
    Noise(NoiseArgs),
    /// Score a prediction against ground truth.
    Eval(EvalArgs),
    /// Marching-cubes mesh of a saved distance field.
    Mesh(MeshArgs),
    /// Synthesise, complete and score a set of meshes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Guidance {
    Oracle,
    Bridge,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "completed.ply")]
    output: PathBuf,
    /// TOML pipeline configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bridge")]
    guidance: Guidance,
    /// Complete shape, in input coordinates; required by the oracle and used for scoring.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fractal-completion iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Grid-pulling iterations.
    #[arg(long)]
    pce_iterations: Option<usize>,
    /// Output size; 0 keeps every extracted point.
    #[arg(long)]
    points: Option<usize>,
    /// Also write the marching-cubes mesh (OBJ).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Also write the reference render (PNG).
    #[arg(long)]
    reference_image: Option<PathBuf>,
    /// Also write both Gaussian sets.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Also write the distance-field weights.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Evaluation size for the printed scores.
    #[arg(long, default_value_t = 16_384)]
    eval_resolution: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, default_value = "partial.ply")]
    output: PathBuf,
    /// Consecutive depth maps to merge.
    #[arg(long, default_value_t = 1)]
    level: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Size after farthest-point sampling; 0 keeps every hit.
    #[arg(long, default_value_t = 2048)]
    points: usize,
    /// Depth-map side in pixels.
    #[arg(long, default_value_t = 256)]
    resolution: usize,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 16_384)]
    resolution: usize,
    #[arg(long, default_value_t = 2048)]
    emd_size: usize,
}

#[derive(Args)]
struct MeshArgs {
    /// Weights written by `complete --weights`.
    #[arg(long)]
    weights: PathBuf,
    /// The cloud that was completed; maps the mesh back to its coordinates.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "mesh.obj")]
    output: PathBuf,
    #[arg(long, default_value_t = 128)]
    resolution: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Meshes (OBJ), one object each.
    inputs: Vec<PathBuf>,
    /// TOML file with a `[bench]` table and the pipeline tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_enum)]
    guidance: Option<Guidance>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    pce_iterations: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Results CSV.
    #[arg(long, default_value = "results.csv")]
    csv: PathBuf,
}

#[derive(serde::Deserialize, Default)]
#[serde(default)]
struct BenchFile {
    bench: BenchmarkSpec,
    #[serde(flatten)]
    pipeline: PipelineConfig,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Complete(a) => run_complete(a),
        Command::Synth(a) => run_synth(a),
        Command::Noise(a) => run_noise(a),
        Command::Eval(a) => run_eval(a),
        Command::Mesh(a) => run_mesh(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    path.map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
}

fn apply_overrides(cfg: &mut PipelineConfig, iterations: Option<usize>, pce_iterations: Option<usize>) {
    if let Some(n) = iterations {
        cfg.zfc.iterations = n;
    }
    if let Some(n) = pce_iterations {
        cfg.pulling.iterations = n;
    }
}

fn run_complete(a: CompleteArgs) -> Result<()> {
    let p_in = read_cloud(&a.input)?;
    let gt = a.gt.as_deref().map(read_cloud).transpose()?;
    let mut cfg = load_config(a.config.as_deref())?;
    apply_overrides(&mut cfg, a.iterations, a.pce_iterations);
    if let Some(seed) = a.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(n) = a.points {
        cfg.output_points = (n > 0).then_some(n);
    }
    let mut provider: Box<dyn GuidanceProvider> = match (a.guidance, &gt) {
        (Guidance::Oracle, Some(gt)) => Box::new(oracle_for(&p_in, gt)?),
        (Guidance::Oracle, None) => return Err(Error::InvalidInput("--guidance oracle needs --gt".into())),
        (Guidance::Bridge, _) => Box::new(BridgeProvider::from_env()),
    };
    let started = std::time::Instant::now();
    let out = complete(&p_in, provider.as_mut(), &cfg)?;
    write_cloud(&a.output, &out.points)?;
    log::info!("wrote {} points to {}", out.points.len(), a.output.display());
    if let Some(path) = &a.mesh {
        out.mesh(&cfg.grid)?.write_obj(path)?;
    }
    if let Some(path) = &a.reference_image {
        out.zfc.reference_image.write_png(path)?;
    }
    if let Some(path) = &a.checkpoint {
        write_checkpoint(path, &out.zfc.g_in, &out.zfc.g_m)?;
    }
    if let Some(path) = &a.weights {
        out.field.network.save(path)?;
    }
    if let Some(gt) = gt {
        let scores = evaluate(&out.points, &gt, &EvalConfig { resolution: a.eval_resolution, ..Default::default() })?;
        let row = ResultRow {
            object: a.input.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
            seed: Some(cfg.zfc.seed),
            cd_x100: scores.cd_x100,
            emd_x100: scores.emd_x100,
            tmd: None,
            uhd: None,
            mmd: None,
            seconds: started.elapsed().as_secs_f64(),
        };
        print!("{}", format_table(&[row]));
    }
    Ok(())
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let mesh = TriMesh::read_obj(&a.mesh)?;
    let setup = ScanSetup { resolution: a.resolution, points: (a.points > 0).then_some(a.points), ..Default::default() };
    let cloud = synth_partial_from_mesh(&mesh, a.level, a.seed, &setup)?;
    write_cloud(&a.output, &cloud)?;
    log::info!("wrote {} points to {}", cloud.len(), a.output.display());
    Ok(())
}

fn run_noise(a: NoiseArgs) -> Result<()> {
    write_cloud(&a.output, &add_noise(&read_cloud(&a.input)?, a.std, a.seed)?)
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let cfg = EvalConfig { resolution: a.resolution, emd_size: a.emd_size, seed: 0 };
    let s = evaluate(&read_cloud(&a.pred)?, &read_cloud(&a.gt)?, &cfg)?;
    println!("cd_x100 {:.4}\nemd_x100 {:.4}", s.cd_x100, s.emd_x100);
    Ok(())
}

fn run_mesh(a: MeshArgs) -> Result<()> {
    let network = SdfNetwork::load(&a.weights)?;
    GridConfig { resolution: a.resolution, ..Default::default() }.validate()?;
    let h = network.half_extent();
    let lattice = Lattice::new(network.center() - compc::Vec3::repeat(h), 2.0 * h, a.resolution)?;
    let mut mesh = marching_cubes(&evaluate_grid(&network, &lattice));
    if mesh.is_empty() {
        return Err(Error::LevelSetMissedGrid { margin: 0.0 });
    }
    if let Some(input) = &a.input {
        let frame = working_frame(&read_cloud(input)?)?;
        mesh = mesh.map_vertices(|v| frame.invert(v));
    }
    mesh.write_obj(&a.output)?;
    log::info!("wrote {} triangles to {}", mesh.triangles.len(), a.output.display());
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let file: BenchFile = match &a.config {
        Some(path) => toml::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Parse(e.to_string()))?,
        None => BenchFile::default(),
    };
    let mut spec = file.bench;
    let mut cfg = file.pipeline;
    apply_overrides(&mut cfg, a.iterations, a.pce_iterations);
    if !a.inputs.is_empty() {
        spec.inputs = a.inputs;
    }
    spec.level = a.level.unwrap_or(spec.level);
    spec.noise_std = a.noise_std.unwrap_or(spec.noise_std);
    spec.resolution = a.resolution.unwrap_or(spec.resolution);
    spec.repeats = a.repeats.unwrap_or(spec.repeats);
    spec.seeds = a.seeds.unwrap_or(spec.seeds);
    spec.jobs = a.jobs.unwrap_or(spec.jobs);
    spec.output_dir = a.output_dir.or(spec.output_dir);
    if let Some(g) = a.guidance {
        spec.guidance = match g {
            Guidance::Oracle => GuidanceMode::Oracle,
            Guidance::Bridge => GuidanceMode::Bridge,
        };
    }
    if spec.inputs.is_empty() {
        return Err(Error::InvalidInput("no benchmark meshes given".into()));
    }
    let objects = spec.inputs.iter().map(|p| BenchObject::load(p)).collect::<Result<Vec<_>>>()?;
    let report = compc::bench::run_benchmark(&objects, &spec, &cfg)?;
    write_csv(std::fs::File::create(&a.csv)?, &report.rows)?;
    print!("{}", format_table(&report.rows));
    for (object, seed, err) in &report.failures {
        eprintln!("failed: {object} seed {seed}: {err}");
    }
    if report.rows.is_empty() {
        return Err(Error::Internal("every benchmark job failed".into()));
    }
    Ok(())
}
