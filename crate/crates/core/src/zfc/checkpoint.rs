use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::geometry::io::{PlyEncoding, comment_map, read_ply_table, write_ply_table};
use crate::render::GaussianSet;

/// Dumps the union `[input, completion]` as a binary PLY. Per vertex: position,
/// the normal encoded by the colour (`2c − 1`), binarised opacity, frozen flag and the
/// raw opacity logit. The two shared scales travel as `scale_in=` / `scale_m=` comments.
pub fn write_checkpoint(path: impl AsRef<Path>, g_in: &GaussianSet, g_m: &GaussianSet) -> Result<()> {
    let sets = [g_in, g_m];
    let col = |f: &dyn Fn(&GaussianSet, usize) -> f64| -> Vec<f32> {
        sets.iter().flat_map(|s| (0..s.len()).map(move |i| (s, i))).map(|(s, i)| f(s, i) as f32).collect()
    };
    let columns = vec![
        ("x", col(&|s, i| s.centers[i].x)),
        ("y", col(&|s, i| s.centers[i].y)),
        ("z", col(&|s, i| s.centers[i].z)),
        ("nx", col(&|s, i| 2.0 * s.colors[i].x - 1.0)),
        ("ny", col(&|s, i| 2.0 * s.colors[i].y - 1.0)),
        ("nz", col(&|s, i| 2.0 * s.colors[i].z - 1.0)),
        ("opacity", col(&|s, i| s.opacity(i))),
        ("frozen", col(&|s, _| s.frozen as u8 as f64)),
        ("logit", col(&|s, i| s.opacity_logits[i])),
    ];
    let comments = vec![
        format!("scale_in={:e}", g_in.scale),
        format!("scale_m={:e}", g_m.scale),
        format!("count_in={}", g_in.len()),
    ];
    write_ply_table(path, PlyEncoding::BinaryLittleEndian, &comments, &columns)
}

/// Reads a checkpoint back into its input and completion sets (float32 precision).
pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(GaussianSet, GaussianSet)> {
    let table = read_ply_table(path)?;
    let meta = comment_map(&table.comments);
    let get = |k: &str| -> Result<f64> {
        meta.get(k)
            .ok_or_else(|| Error::Parse(format!("checkpoint lacks `{k}`")))?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad `{k}`: {e}")))
    };
    let (scale_in, scale_m, count_in) = (get("scale_in")?, get("scale_m")?, get("count_in")? as usize);
    let column = |name: &str| table.column(name).ok_or_else(|| Error::Parse(format!("checkpoint lacks `{name}`")));
    let (x, y, z) = (column("x")?, column("y")?, column("z")?);
    let (nx, ny, nz) = (column("nx")?, column("ny")?, column("nz")?);
    let (frozen, logits) = (column("frozen")?, column("logit")?);
    if count_in > x.len() {
        return Err(Error::Parse("checkpoint count_in exceeds vertex count".into()));
    }
    let build = |range: std::ops::Range<usize>, scale: f64| {
        let centers = range.clone().map(|i| Vec3::new(x[i], y[i], z[i])).collect();
        let colors = range.clone().map(|i| Vec3::new(nx[i] + 1.0, ny[i] + 1.0, nz[i] + 1.0) * 0.5).collect();
        let is_frozen = range.clone().next().is_some_and(|i| frozen[i] > 0.5);
        GaussianSet::new(centers, scale, logits[range].to_vec(), colors, is_frozen)
    };
    Ok((build(0..count_in, scale_in)?, build(count_in..x.len(), scale_m)?))
}
