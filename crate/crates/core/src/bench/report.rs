use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a results table. Rows without a seed aggregate an object's repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub object: String,
    pub seed: Option<u64>,
    pub cd_x100: f64,
    pub emd_x100: f64,
    pub tmd: Option<f64>,
    pub uhd: Option<f64>,
    pub mmd: Option<f64>,
    pub seconds: f64,
}

impl ResultRow {
    pub fn validate(&self) -> Result<()> {
        let metrics = [Some(self.cd_x100), Some(self.emd_x100), self.tmd, self.uhd, self.mmd];
        if metrics.iter().flatten().any(|m| !(*m >= 0.0)) {
            return Err(Error::Internal(format!("negative or NaN metric in row for {}", self.object)));
        }
        Ok(())
    }
}

/// Mean of an object's per-seed rows, with the multi-modal metrics attached.
pub fn aggregate(rows: &[ResultRow], multimodal: Option<super::Multimodal>) -> Option<ResultRow> {
    let first = rows.first()?;
    let n = rows.len() as f64;
    Some(ResultRow {
        object: first.object.clone(),
        seed: None,
        cd_x100: rows.iter().map(|r| r.cd_x100).sum::<f64>() / n,
        emd_x100: rows.iter().map(|r| r.emd_x100).sum::<f64>() / n,
        tmd: multimodal.map(|m| m.tmd),
        uhd: multimodal.map(|m| m.uhd),
        mmd: multimodal.map(|m| m.mmd),
        seconds: rows.iter().map(|r| r.seconds).sum(),
    })
}

/// CSV with the header `object,seed,cd_x100,emd_x100,tmd,uhd,mmd,seconds`; missing values are empty.
pub fn write_csv(w: impl Write, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(["object", "seed", "cd_x100", "emd_x100", "tmd", "uhd", "mmd", "seconds"])
            .map_err(csv_error)?;
    }
    for row in rows {
        out.serialize(row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv(r: impl std::io::Read) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Right-aligned text table; aggregate rows show `mean` in the seed column.
pub fn format_table(rows: &[ResultRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
    let header = ["object", "seed", "CDx100", "EMDx100", "TMD", "UHD", "MMD", "seconds"].map(String::from);
    let mut cells: Vec<[String; 8]> = vec![header];
    for r in rows {
        cells.push([
            r.object.clone(),
            r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
            format!("{:.3}", r.cd_x100),
            format!("{:.3}", r.emd_x100),
            opt(r.tmd),
            opt(r.uhd),
            opt(r.mmd),
            format!("{:.1}", r.seconds),
        ]);
    }
    let widths: Vec<usize> = (0..8).map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, &w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}
