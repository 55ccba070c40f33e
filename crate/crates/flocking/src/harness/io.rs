//! CSV and JSON persistence.
//!
//! All floats are written with 17 significant digits so files round-trip
//! bit-exactly; rows are always emitted in a deterministic order so reruns
//! with the same seed produce byte-identical files.

use crate::cleanliness::EpsilonEstimate;
use crate::error::{Error, Result};
use crate::gpc::{GpcEnsemble, Histogram};
use crate::kinetic::{GpcDensity, KineticSample};
use crate::meanfield::{SamplePool, Theorem2Table};
use crate::particle::{Diagnostics, Ensemble};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

/// Write one CSV with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(text, "{}", row.join(","));
    }
    write_text(path, &text)
}

/// Serialize anything serde-serializable as pretty JSON.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::config(format!("cannot serialize sidecar: {e}")))?;
    write_text(path, &text)
}

/// Create `root/<name>-<unix seconds>[-k]/`, avoiding collisions.
pub fn create_run_dir(root: &Path, name: &str) -> Result<PathBuf> {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut k = 0u32;
    loop {
        let dir = if k == 0 {
            root.join(format!("{name}-{stamp}"))
        } else {
            root.join(format!("{name}-{stamp}-{k}"))
        };
        if !dir.exists() {
            std::fs::create_dir_all(&dir)?;
            return Ok(dir);
        }
        k += 1;
    }
}

/// Trajectory CSV: `t`, momentum components, kinetic energy, diameters.
pub fn write_trajectory_csv(path: &Path, dim: usize, times: &[f64], diags: &[Diagnostics]) -> Result<()> {
    let mut header: Vec<String> = vec!["t".to_string()];
    for c in 0..dim {
        header.push(format!("momentum_{c}"));
    }
    header.extend(["kinetic_energy", "diam_x", "diam_v"].map(str::to_string));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = times
        .iter()
        .zip(diags)
        .map(|(&t, d)| {
            let mut row = vec![fmt_f64(t)];
            row.extend(d.momentum.iter().map(|&m| fmt_f64(m)));
            row.push(fmt_f64(d.kinetic_energy));
            row.push(fmt_f64(d.diam_x));
            row.push(fmt_f64(d.diam_v));
            row
        })
        .collect();
    write_csv(path, &header_refs, &rows)
}

/// Snapshot CSV: one row per particle, positions then velocities.
pub fn write_snapshot_csv(path: &Path, ens: &Ensemble) -> Result<()> {
    let mut header = Vec::new();
    for c in 0..ens.dim {
        header.push(format!("x{}", c + 1));
    }
    for c in 0..ens.dim {
        header.push(format!("v{}", c + 1));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (0..ens.n)
        .map(|i| {
            let mut row: Vec<String> = ens.position(i).iter().map(|&x| fmt_f64(x)).collect();
            row.extend(ens.velocity(i).iter().map(|&v| fmt_f64(v)));
            row
        })
        .collect();
    write_csv(path, &header_refs, &rows)
}

/// Pool snapshots share the particle snapshot format.
pub fn write_pool_csv(path: &Path, pool: &SamplePool) -> Result<()> {
    write_snapshot_csv(path, &pool.to_ensemble())
}

/// Unclean-probability table.
pub fn write_epsilon_csv(path: &Path, rows: &[EpsilonEstimate]) -> Result<()> {
    let header = ["N", "p", "k", "trials", "epsilon_hat", "stderr"];
    let data: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.p.to_string(),
                r.k.to_string(),
                r.trials.to_string(),
                fmt_f64(r.epsilon_hat),
                fmt_f64(r.stderr),
            ]
        })
        .collect();
    write_csv(path, &header, &data)
}

/// Interval-size scan table.
pub fn write_theorem2_csv(path: &Path, table: &Theorem2Table) -> Result<()> {
    let header = ["tau", "w2_gap", "w2_stderr", "n_replicates"];
    let data: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.tau),
                fmt_f64(r.w2_gap),
                fmt_f64(r.w2_stderr),
                r.n_replicates.to_string(),
            ]
        })
        .collect();
    write_csv(path, &header, &data)
}

/// Histogram CSV: cell centers then density, one row per cell.
pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<()> {
    let axes = hist.grid.n_axes();
    let mut header: Vec<String> = (0..axes).map(|a| format!("c{}", a + 1)).collect();
    header.push("density".to_string());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = hist
        .densities
        .iter()
        .enumerate()
        .map(|(idx, &d)| {
            let mut row: Vec<String> = hist.grid.center_of(idx).iter().map(|&c| fmt_f64(c)).collect();
            row.push(fmt_f64(d));
            row
        })
        .collect();
    write_csv(path, &header_refs, &rows)
}

/// Chaos ensemble snapshot: one row per (particle, mode).
pub fn write_gpc_snapshot_csv(path: &Path, ens: &GpcEnsemble) -> Result<()> {
    let mut header: Vec<String> = vec!["i".to_string(), "k".to_string()];
    for c in 0..ens.dim {
        header.push(format!("xhat{}", c + 1));
    }
    for c in 0..ens.dim {
        header.push(format!("vhat{}", c + 1));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let k1 = ens.order + 1;
    let mut rows = Vec::with_capacity(ens.n * k1);
    for i in 0..ens.n {
        for k in 0..k1 {
            let mut row = vec![i.to_string(), k.to_string()];
            for c in 0..ens.dim {
                row.push(fmt_f64(ens.xhat[(i * k1 + k) * ens.dim + c]));
            }
            for c in 0..ens.dim {
                row.push(fmt_f64(ens.vhat[(i * k1 + k) * ens.dim + c]));
            }
            rows.push(row);
        }
    }
    write_csv(path, &header_refs, &rows)
}

/// Kinetic reference trajectory CSV.
pub fn write_kinetic_csv(path: &Path, samples: &[KineticSample]) -> Result<()> {
    let header = ["t", "expected_temperature", "zeroth_mode_mass", "momentum"];
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            vec![
                fmt_f64(s.t),
                fmt_f64(s.expected_temperature),
                fmt_f64(s.mass),
                fmt_f64(s.momentum),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Final kinetic density CSV: `v`, then one column per mode.
pub fn write_density_csv(path: &Path, density: &GpcDensity) -> Result<()> {
    let k1 = density.order + 1;
    let mut header: Vec<String> = vec!["v".to_string()];
    for h in 0..k1 {
        header.push(format!("f{h}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (0..density.grid.n_cells)
        .map(|i| {
            let mut row = vec![fmt_f64(density.grid.center(i))];
            for h in 0..k1 {
                row.push(fmt_f64(density.mode(h)[i]));
            }
            row
        })
        .collect();
    write_csv(path, &header_refs, &rows)
}
