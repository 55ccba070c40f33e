//! Distances and statistics between empirical measures.
//!
//! Transport distances of order `q` between equal-size sample sets: the 1-D
//! case uses the sorted (monotone) coupling, the general case solves the
//! minimum-cost assignment with shortest augmenting paths. Histogram
//! distances reduce to cellwise L1. Inputs of unequal size are resampled by
//! the caller, never here.

use crate::error::{Error, Result};
use crate::gpc::Histogram;
use crate::rng;
use rand::seq::SliceRandom;
use rayon::prelude::*;

/// Equal-weight samples in `dim` dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::domain("samples: data must be a nonempty multiple of dim"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("samples: non-finite entries"));
        }
        Ok(Samples { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows selected by index, in order.
    pub fn subset(&self, indices: &[usize]) -> Samples {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Samples { dim: self.dim, data }
    }
}

/// An empirical measure: either weighted-equal samples or a grid histogram.
#[derive(Debug, Clone)]
pub enum MeasureSample {
    Samples(Samples),
    Histogram(Histogram),
}

/// Order-`q` transport distance between two 1-D sample sets of equal size,
/// via the sorted coupling.
pub fn wasserstein_1d(a: &[f64], b: &[f64], q: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("wasserstein_1d: empty input"));
    }
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "wasserstein_1d: sizes differ ({} vs {}); resample upstream",
            a.len(),
            b.len()
        )));
    }
    if q < 1.0 {
        return Err(Error::domain("wasserstein_1d: order q must be >= 1"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let total: f64 = sa
        .iter()
        .zip(&sb)
        .map(|(&x, &y)| (x - y).abs().powf(q))
        .sum();
    Ok((total / a.len() as f64).powf(1.0 / q))
}

/// Minimum-cost assignment over a dense cost matrix (row-major) by the
/// shortest-augmenting-path method with dual potentials; returns the column
/// matched to each row.
fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    // Virtual column n anchors the alternating tree of each row.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![NONE; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 0..n {
        matched_row[n] = row;
        let mut j0 = n;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[i0 * n + j] - u[i0] - v[j];
                    if cur < min_slack[j] {
                        min_slack[j] = cur;
                        way[j] = j0;
                    }
                    if min_slack[j] < delta {
                        delta = min_slack[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == NONE {
                break;
            }
        }
        while j0 != n {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }
    let mut row_to_col = vec![NONE; n];
    for j in 0..n {
        if matched_row[j] != NONE {
            row_to_col[matched_row[j]] = j;
        }
    }
    row_to_col
}

fn pair_cost(a: &[f64], b: &[f64], q: f64) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.powf(q / 2.0)
}

/// Exact order-`q` transport distance between two equal-size sample sets of
/// any dimension via optimal assignment.
///
/// Inputs are canonicalized (lexicographically smaller set first) so the
/// result is exactly symmetric.
pub fn wasserstein_exact(a: &Samples, b: &Samples, q: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("wasserstein: empty input"));
    }
    if a.dim != b.dim {
        return Err(Error::domain("wasserstein: dimension mismatch"));
    }
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "wasserstein: sizes differ ({} vs {}); resample upstream",
            a.len(),
            b.len()
        )));
    }
    if q < 1.0 {
        return Err(Error::domain("wasserstein: order q must be >= 1"));
    }
    let (first, second) = if a.data <= b.data { (a, b) } else { (b, a) };
    let m = first.len();
    let mut cost = vec![0.0; m * m];
    cost.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let ri = first.row(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = pair_cost(ri, second.row(j), q);
        }
    });
    let assignment = solve_assignment(&cost, m);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * m + j]).sum();
    Ok((total / m as f64).powf(1.0 / q))
}

/// Assignment-based estimate with a size cap.
#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinEstimate {
    pub value: f64,
    /// Standard error over subsample replicates; `None` for exact solves.
    pub stderr: Option<f64>,
    pub n_replicates: usize,
}

/// Options for [`wasserstein_assignment`].
#[derive(Debug, Clone, Copy)]
pub struct AssignmentOptions {
    /// Largest size solved exactly.
    pub cap: usize,
    /// Number of random subsample pairs when inputs exceed the cap;
    /// `None` disables subsampling (over-cap inputs become an error).
    pub replicates: Option<usize>,
    pub seed: u64,
}

impl Default for AssignmentOptions {
    fn default() -> Self {
        AssignmentOptions { cap: 512, replicates: Some(8), seed: 0 }
    }
}

/// Order-`q` transport distance between equal-size sample sets: exact up to
/// `opts.cap`, otherwise averaged over random subsample pairs of cap size
/// with a reported standard error.
pub fn wasserstein_assignment(a: &Samples, b: &Samples, q: f64, opts: &AssignmentOptions) -> Result<WassersteinEstimate> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "wasserstein: sizes differ ({} vs {}); resample upstream",
            a.len(),
            b.len()
        )));
    }
    let m = a.len();
    if m <= opts.cap {
        return Ok(WassersteinEstimate {
            value: wasserstein_exact(a, b, q)?,
            stderr: None,
            n_replicates: 1,
        });
    }
    let replicates = opts
        .replicates
        .ok_or_else(|| Error::usage(format!("sample size {m} exceeds the assignment cap {} and subsampling is disabled", opts.cap)))?;
    if replicates == 0 {
        return Err(Error::usage("subsample replicate count must be positive"));
    }
    let values: Result<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(opts.seed, &[0x77325375, r as u64]);
            let mut idx_a: Vec<usize> = (0..m).collect();
            let mut idx_b: Vec<usize> = (0..m).collect();
            idx_a.shuffle(&mut rng);
            idx_b.shuffle(&mut rng);
            idx_a.truncate(opts.cap);
            idx_b.truncate(opts.cap);
            wasserstein_exact(&a.subset(&idx_a), &b.subset(&idx_b), q)
        })
        .collect();
    let values = values?;
    let mean = values.iter().sum::<f64>() / replicates as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (replicates.max(2) - 1) as f64;
    Ok(WassersteinEstimate {
        value: mean,
        stderr: Some((var / replicates as f64).sqrt()),
        n_replicates: replicates,
    })
}

/// L1 distance between two histogram densities on the same grid.
pub fn tv_error(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(
            "histograms live on different grids".to_string(),
        ));
    }
    let vol = a.grid.cell_volume();
    Ok(a.densities
        .iter()
        .zip(&b.densities)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        * vol)
}

/// Least-squares slope of `ys` against `xs` (already log-transformed by
/// the caller when fitting power laws).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(xs.len() == ys.len() && xs.len() >= 2, "need at least two points");
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Mean squared deviation of run temperatures from a reference value.
pub fn mse_temperature(run_temps: &[f64], ref_temp: f64) -> Result<f64> {
    if run_temps.is_empty() {
        return Err(Error::domain("mse_temperature: no runs"));
    }
    Ok(run_temps.iter().map(|t| (ref_temp - t).powi(2)).sum::<f64>() / run_temps.len() as f64)
}

/// Mean squared deviation plus its standard error over the runs.
pub fn mse_temperature_with_stderr(run_temps: &[f64], ref_temp: f64) -> Result<(f64, f64)> {
    let mse = mse_temperature(run_temps, ref_temp)?;
    let n = run_temps.len();
    if n < 2 {
        return Ok((mse, 0.0));
    }
    let sq: Vec<f64> = run_temps.iter().map(|t| (ref_temp - t).powi(2)).collect();
    let var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mse, (var / n as f64).sqrt()))
}
