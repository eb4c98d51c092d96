//! Exit codes and file plumbing of the `compc` binary.

use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use compc::geometry::io::{read_cloud, write_xyz};
use compc::geometry::{PointCloud, shapes};
use compc::mesh::icosphere;

/// Small enough that a full run takes seconds.
const TINY: &str = r#"
output_points = 256

[zfc]
iterations = 4
render_size = 32

[zfc.viewpoint]
candidates = 40
resolution = 64

[surface]
count = 30
resolution = 64

[pulling]
iterations = 30
near_batch = 128
far_batch = 128

[grid]
resolution = 32
"#;

fn compc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compc"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("compc runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_xyz(dir.path().join("hemi.xyz"), &PointCloud::new(shapes::random_hemisphere_points(400, 0.5, 1)).unwrap()).unwrap();
    write_xyz(dir.path().join("sphere.xyz"), &PointCloud::new(shapes::fibonacci_sphere_points(800, 0.5)).unwrap()).unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

#[test]
fn oracle_completion_writes_points_and_prints_scores() {
    let dir = setup();
    let out = compc(
        &["complete", "--input", "hemi.xyz", "--gt", "sphere.xyz", "--guidance", "oracle", "--config", "tiny.toml"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("CDx100") && stdout.contains("hemi"), "{stdout}");
    assert_eq!(read_cloud(dir.path().join("completed.ply")).unwrap().len(), 256);
}

#[test]
fn missing_input_is_bad_input() {
    let dir = setup();
    let out = compc(&["complete", "--input", "nope.ply", "--guidance", "oracle", "--gt", "sphere.xyz"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(compc(&["eval", "--pred", "nope.ply", "--gt", "sphere.xyz"], dir.path()).status.code(), Some(2));
}

#[test]
fn oracle_without_ground_truth_and_bad_config_are_bad_input() {
    let dir = setup();
    assert_eq!(compc(&["complete", "--input", "hemi.xyz", "--guidance", "oracle"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "[zfc]\niterations = \"many\"\n").unwrap();
    let out = compc(&["complete", "--input", "hemi.xyz", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn absent_bridge_is_a_guidance_failure() {
    let dir = setup();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string();
    let out = Command::new(env!("CARGO_BIN_EXE_compc"))
        .args(["complete", "--input", "hemi.xyz", "--guidance", "bridge", "--config", "tiny.toml"])
        .current_dir(dir.path())
        .env("COMPC_BRIDGE_ADDR", &port)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn diverging_extraction_is_a_pce_failure() {
    let dir = setup();
    std::fs::write(dir.path().join("diverge.toml"), TINY.replace("iterations = 30", "iterations = 30\nlr = 1e30")).unwrap();
    let out = compc(
        &["complete", "--input", "hemi.xyz", "--gt", "sphere.xyz", "--guidance", "oracle", "--config", "diverge.toml"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_noise_eval_chain() {
    let dir = setup();
    icosphere(2, 0.5).write_obj(dir.path().join("ball.obj")).unwrap();
    let ok = |args: &[&str]| {
        let out = compc(args, dir.path());
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    ok(&["synth", "--mesh", "ball.obj", "--level", "3", "--resolution", "64", "--points", "300", "--output", "p.ply"]);
    ok(&["noise", "--input", "p.ply", "--std", "0.01", "--seed", "4", "--output", "n.ply"]);
    assert_eq!(read_cloud(dir.path().join("n.ply")).unwrap().len(), 300);
    let scores = ok(&["eval", "--pred", "p.ply", "--gt", "p.ply", "--resolution", "300", "--emd-size", "300"]);
    assert!(scores.contains("cd_x100 0.0000") && scores.contains("emd_x100 0.0000"), "{scores}");
    assert_eq!(compc(&["synth", "--mesh", "ball.obj", "--level", "0"], dir.path()).status.code(), Some(2));
}
