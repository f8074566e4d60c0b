//! Trajectory CSV files.
//!
//! Header `t,theta_hat_1,…,theta_hat_q,err_norm,manifold_residual,storage`,
//! `,`-separated, `\n`-terminated. Floats use Rust's shortest round-trip
//! `Display` form, so parsing a file back reproduces the values bit for bit.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::ScenarioResult;
use crate::error::{Error, Result};
use crate::types::Trajectory;

fn header(q: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=q {
        let _ = write!(h, ",theta_hat_{i}");
    }
    h.push_str(",err_norm,manifold_residual,storage\n");
    h
}

pub fn write_trajectory_csv<W: Write>(
    traj: &Trajectory,
    q: usize,
    mut out: W,
) -> std::io::Result<()> {
    let mut buf = header(q);
    for k in 0..traj.len() {
        let _ = write!(buf, "{}", traj.times[k]);
        for x in &traj.estimates[k] {
            let _ = write!(buf, ",{x}");
        }
        let _ = writeln!(
            buf,
            ",{},{},{}",
            traj.err_norms[k], traj.manifold_residuals[k], traj.storage_values[k]
        );
    }
    out.write_all(buf.as_bytes())
}

/// Writes `<prefix>_<label>.csv` for every estimator and returns the paths.
pub fn export_csv(result: &ScenarioResult, prefix: &Path) -> Result<Vec<PathBuf>> {
    let q = result.true_params.len();
    let stem = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    result
        .estimators
        .iter()
        .map(|e| {
            let path = prefix.with_file_name(format!("{stem}_{}.csv", e.label));
            let file = std::fs::File::create(&path).map_err(|err| Error::io(&path, err))?;
            write_trajectory_csv(&e.trajectory, q, std::io::BufWriter::new(file))
                .map_err(|err| Error::io(&path, err))?;
            Ok(path)
        })
        .collect()
}

/// Columns of a parsed trajectory file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTrajectory {
    pub times: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
    pub err_norms: Vec<f64>,
    pub manifold_residuals: Vec<f64>,
    pub storage_values: Vec<f64>,
}

impl CsvTrajectory {
    /// Bitwise comparison with the CSV-visible columns of `traj` (NaN-safe).
    pub fn matches(&self, traj: &Trajectory) -> bool {
        fn same(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        same(&self.times, &traj.times)
            && self.estimates.len() == traj.estimates.len()
            && self
                .estimates
                .iter()
                .zip(&traj.estimates)
                .all(|(a, b)| same(a, b))
            && same(&self.err_norms, &traj.err_norms)
            && same(&self.manifold_residuals, &traj.manifold_residuals)
            && same(&self.storage_values, &traj.storage_values)
    }
}

pub fn parse_csv(text: &str) -> std::result::Result<CsvTrajectory, String> {
    let mut lines = text.lines();
    let head = lines.next().ok_or("empty file")?;
    let cols: Vec<&str> = head.split(',').collect();
    let q = cols.iter().filter(|c| c.starts_with("theta_hat_")).count();
    if cols.len() != q + 4 || format!("{head}\n") != header(q) {
        return Err(format!("unexpected header '{head}'"));
    }
    let mut out = CsvTrajectory::default();
    for (n, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format!("row {}: {e}", n + 1))?;
        if vals.len() != q + 4 {
            return Err(format!("row {}: expected {} fields", n + 1, q + 4));
        }
        out.times.push(vals[0]);
        out.estimates.push(vals[1..=q].to_vec());
        out.err_norms.push(vals[q + 1]);
        out.manifold_residuals.push(vals[q + 2]);
        out.storage_values.push(vals[q + 3]);
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<CsvTrajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|msg| Error::Format {
        path: path.to_path_buf(),
        msg,
    })
}
