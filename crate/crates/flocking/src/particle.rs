//! The N-body velocity-alignment system, its random batch variant and
//! per-step diagnostics.
//!
//! The full system couples every particle pair with weight
//! `kappa / (N-1) * psi(|x_j - x_i|)`; the random batch variant re-partitions
//! the particles into batches of size `p` every interval and couples only
//! within batches with prefactor `kappa / (p-1)`. Both share one pairwise
//! rhs so that the batch variant with `p = N` reproduces the full system
//! bit for bit.

use crate::error::{Error, Result};
use crate::integrators::StepperSpec;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::rng;
use rand::seq::SliceRandom;
use rayon::prelude::*;

/// Particle-index diameter scans switch to a fixed-size subsample above
/// this count so diagnostics stay cheap at large N.
const DIAMETER_EXACT_MAX: usize = 4096;

/// Positions and velocities of `n` particles in `dim` dimensions, stored as
/// row-major flat arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub dim: usize,
    pub n: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub time: f64,
}

impl Ensemble {
    pub fn new(dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("ensemble: dim must be at least 1"));
        }
        if positions.is_empty() || positions.len() % dim != 0 || positions.len() != velocities.len() {
            return Err(Error::config("ensemble: state arrays must be nonempty n*dim pairs"));
        }
        if positions.iter().chain(velocities.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("ensemble: non-finite entries in initial state"));
        }
        let n = positions.len() / dim;
        Ok(Ensemble { dim, n, positions, velocities, time: 0.0 })
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }
}

/// One random partition of `0..n` into `n/p` batches, valid for a single
/// step interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub n: usize,
    pub p: usize,
    /// `assignment[i]` is the batch index of particle `i`.
    pub assignment: Vec<usize>,
    pub step_index: u64,
}

impl BatchPlan {
    /// Member lists per batch, each in ascending particle order.
    pub fn batches(&self) -> Vec<Vec<usize>> {
        let mut batches = vec![Vec::with_capacity(self.p); self.n / self.p];
        for (i, &b) in self.assignment.iter().enumerate() {
            batches[b].push(i);
        }
        batches
    }

    /// The degenerate plan with a single batch holding every particle.
    pub fn single_batch(n: usize) -> Self {
        BatchPlan { n, p: n, assignment: vec![0; n], step_index: 0 }
    }

    /// Group members into reusable CSR buffers: batch `q` holds
    /// `members[offsets[q]..offsets[q + 1]]`, ascending within each batch.
    pub fn batches_into(&self, members: &mut Vec<usize>, offsets: &mut Vec<usize>) {
        let n_batches = self.n / self.p;
        members.clear();
        members.resize(self.n, 0);
        offsets.clear();
        offsets.resize(n_batches + 1, 0);
        for &b in &self.assignment {
            offsets[b + 1] += 1;
        }
        for q in 0..n_batches {
            offsets[q + 1] += offsets[q];
        }
        let mut cursor = offsets.clone();
        for (i, &b) in self.assignment.iter().enumerate() {
            members[cursor[b]] = i;
            cursor[b] += 1;
        }
    }
}

/// Draw a uniformly random partition into batches of size `p`, deterministic
/// in `(seed, step_index)`.
pub fn sample_batch_plan(n: usize, p: usize, step_index: u64, seed: u64) -> Result<BatchPlan> {
    if p < 2 {
        return Err(Error::config(format!("batch size p = {p} must be at least 2")));
    }
    if n == 0 || n % p != 0 {
        return Err(Error::config(format!("batch size p = {p} must divide n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, &[0x62617463, step_index]);
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; n];
    for (block, chunk) in order.chunks_exact(p).enumerate() {
        for &i in chunk {
            assignment[i] = block;
        }
    }
    Ok(BatchPlan { n, p, assignment, step_index })
}

/// A kernel reduced to a plain distance -> weight map with the random
/// parameter fixed.
#[derive(Clone, Copy)]
pub(crate) enum Weight<'a> {
    Constant(f64),
    InversePower(f64),
    Tabulated(&'a [f64], &'a [f64]),
}

impl Weight<'_> {
    #[inline]
    pub(crate) fn eval(&self, r: f64) -> f64 {
        match *self {
            Weight::Constant(c) => c,
            Weight::InversePower(g) => (1.0 + r * r).powf(-g),
            Weight::Tabulated(radii, values) => crate::kernels::interp_clamped(radii, values, r),
        }
    }
}

/// Reduce a kernel spec to a weight map, fixing the random parameter when
/// one is supplied.
pub(crate) fn weight_of(spec: &KernelSpec, theta: Option<f64>) -> Result<Weight<'_>> {
    if spec.is_stochastic() && theta.is_none() {
        return Err(Error::usage("stochastic kernel requires a parameter value"));
    }
    let th = theta.unwrap_or(0.0);
    Ok(match &spec.family {
        KernelFamily::Constant { base, slope } => Weight::Constant(base + slope * th),
        KernelFamily::InversePower { gamma_base, gamma_slope } => {
            Weight::InversePower(gamma_base + gamma_slope * th)
        }
        KernelFamily::Tabulated { radii, values } => Weight::Tabulated(radii, values),
    })
}

fn dist(dim: usize, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        let d = b[k] - a[k];
        s += d * d;
    }
    s.sqrt()
}

/// Pairwise alignment acceleration: for every particle `i` in the slice,
/// `dv_i = prefactor * sum_j psi(|x_j - x_i|) (v_j - v_i)` with `j` running
/// over the same slice in index order (`j == i` skipped).
///
/// Constant weights skip the distance computation; the accumulation order
/// and products are identical to the generic loop, so the fast path is
/// bit-equal to it.
fn alignment_accel(dim: usize, xs: &[f64], vs: &[f64], prefactor: f64, psi: &Weight<'_>, dvs: &mut [f64], parallel: bool) {
    let count = xs.len() / dim;
    let row = |i: usize, dv: &mut [f64]| {
        let xi = &xs[i * dim..(i + 1) * dim];
        let vi = &vs[i * dim..(i + 1) * dim];
        let mut acc = [0.0f64; 4];
        let acc = &mut acc[..dim];
        if let Weight::Constant(w) = *psi {
            for j in 0..count {
                if j == i {
                    continue;
                }
                let vj = &vs[j * dim..(j + 1) * dim];
                for k in 0..dim {
                    acc[k] += w * (vj[k] - vi[k]);
                }
            }
        } else {
            for j in 0..count {
                if j == i {
                    continue;
                }
                let xj = &xs[j * dim..(j + 1) * dim];
                let vj = &vs[j * dim..(j + 1) * dim];
                let w = psi.eval(dist(dim, xi, xj));
                for k in 0..dim {
                    acc[k] += w * (vj[k] - vi[k]);
                }
            }
        }
        for k in 0..dim {
            dv[k] = prefactor * acc[k];
        }
    };
    if parallel && count >= 256 {
        dvs.par_chunks_mut(dim).enumerate().for_each(|(i, dv)| row(i, dv));
    } else {
        for (i, dv) in dvs.chunks_mut(dim).enumerate() {
            row(i, dv);
        }
    }
}

/// Time derivative of the full system: `(dx, dv)` as flat arrays.
pub fn cs_rhs(ens: &Ensemble, spec: &KernelSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if ens.n < 2 {
        return Err(Error::config("alignment dynamics are degenerate for a single particle"));
    }
    let psi = weight_of(spec, None)?;
    let mut dxs = ens.velocities.clone();
    let mut dvs = vec![0.0; ens.velocities.len()];
    let prefactor = spec.kappa / (ens.n as f64 - 1.0);
    alignment_accel(ens.dim, &ens.positions, &ens.velocities, prefactor, &psi, &mut dvs, true);
    dxs.copy_from_slice(&ens.velocities);
    Ok((dxs, dvs))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn evolve_group(
    dim: usize,
    members: &[usize],
    positions: &[f64],
    velocities: &[f64],
    prefactor: f64,
    psi: &Weight<'_>,
    stepper: &StepperSpec,
    tau: f64,
) -> Result<Vec<f64>> {
    let m = members.len();
    let mut state = vec![0.0; 2 * m * dim];
    for (slot, &i) in members.iter().enumerate() {
        state[slot * dim..(slot + 1) * dim].copy_from_slice(&positions[i * dim..(i + 1) * dim]);
        state[(m + slot) * dim..(m + slot + 1) * dim]
            .copy_from_slice(&velocities[i * dim..(i + 1) * dim]);
    }
    let rhs = |s: &[f64], out: &mut [f64]| {
        let (xs, vs) = s.split_at(m * dim);
        let (dxs, dvs) = out.split_at_mut(m * dim);
        dxs.copy_from_slice(vs);
        alignment_accel(dim, xs, vs, prefactor, psi, dvs, false);
    };
    stepper.integrate_interval(rhs, &state, tau)
}

/// Advance one batch interval: every batch evolves independently under the
/// `p`-particle dynamics with prefactor `kappa / (p-1)` for duration `tau`.
pub fn rbm_step(
    ens: &Ensemble,
    plan: &BatchPlan,
    spec: &KernelSpec,
    stepper: &StepperSpec,
    tau: f64,
) -> Result<Ensemble> {
    if plan.n != ens.n {
        return Err(Error::config(format!(
            "batch plan covers {} particles, ensemble has {}",
            plan.n, ens.n
        )));
    }
    let psi = weight_of(spec, None)?;
    let prefactor = spec.kappa / (plan.p as f64 - 1.0);
    let dim = ens.dim;
    let batches = plan.batches();
    let evolved: Result<Vec<(usize, Vec<f64>)>> = batches
        .par_iter()
        .enumerate()
        .map(|(b, members)| {
            let state = evolve_group(
                dim,
                members,
                &ens.positions,
                &ens.velocities,
                prefactor,
                &psi,
                stepper,
                tau,
            )?;
            Ok((b, state))
        })
        .collect();
    let mut out = ens.clone();
    for (b, state) in evolved? {
        let members = &batches[b];
        let m = members.len();
        for (slot, &i) in members.iter().enumerate() {
            out.positions[i * dim..(i + 1) * dim].copy_from_slice(&state[slot * dim..(slot + 1) * dim]);
            out.velocities[i * dim..(i + 1) * dim]
                .copy_from_slice(&state[(m + slot) * dim..(m + slot + 1) * dim]);
        }
    }
    out.time = ens.time + tau;
    Ok(out)
}

/// Advance the full system by one interval. This is the single-batch special
/// case of [`rbm_step`], so batched runs with `p = N` match it exactly.
pub fn cs_step(ens: &Ensemble, spec: &KernelSpec, stepper: &StepperSpec, tau: f64) -> Result<Ensemble> {
    rbm_step(ens, &BatchPlan::single_batch(ens.n), spec, stepper, tau)
}

/// Scalar summaries of an ensemble state.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Total momentum, one entry per dimension.
    pub momentum: Vec<f64>,
    /// Sum of squared velocity norms.
    pub kinetic_energy: f64,
    /// Largest pairwise position distance.
    pub diam_x: f64,
    /// Largest pairwise velocity distance.
    pub diam_v: f64,
    /// True when the diameters were estimated on a subsample.
    pub approximate: bool,
}

fn pairwise_diameter(dim: usize, data: &[f64], indices: &[usize]) -> f64 {
    let m = indices.len();
    (0..m)
        .into_par_iter()
        .map(|a| {
            let ia = indices[a];
            let pa = &data[ia * dim..(ia + 1) * dim];
            let mut best = 0.0f64;
            for &ib in &indices[a + 1..] {
                let pb = &data[ib * dim..(ib + 1) * dim];
                let d = dist(dim, pa, pb);
                if d > best {
                    best = d;
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Momentum, kinetic energy and support diameters of an ensemble.
pub fn diagnostics(ens: &Ensemble) -> Diagnostics {
    let dim = ens.dim;
    let mut momentum = vec![0.0; dim];
    let mut ke = 0.0;
    for i in 0..ens.n {
        let v = ens.velocity(i);
        for k in 0..dim {
            momentum[k] += v[k];
            ke += v[k] * v[k];
        }
    }
    let (indices, approximate): (Vec<usize>, bool) = if ens.n <= DIAMETER_EXACT_MAX {
        ((0..ens.n).collect(), false)
    } else {
        let mut idx: Vec<usize> = (0..ens.n).collect();
        let mut sub_rng = rng::stream(0xd1a6, &[ens.n as u64]);
        idx.shuffle(&mut sub_rng);
        idx.truncate(DIAMETER_EXACT_MAX);
        (idx, true)
    };
    Diagnostics {
        momentum,
        kinetic_energy: ke,
        diam_x: pairwise_diameter(dim, &ens.positions, &indices),
        diam_v: pairwise_diameter(dim, &ens.velocities, &indices),
        approximate,
    }
}

/// Whether a run couples all particles or random batches of size `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    FullCs,
    Rbm { p: usize },
}

/// Driver configuration for [`simulate`].
#[derive(Debug, Clone)]
pub struct SimulateSpec {
    pub mode: SimMode,
    pub kernel: KernelSpec,
    pub stepper: StepperSpec,
    pub t_final: f64,
    pub seed: u64,
    /// Times (matched to the nearest step) at which full states are kept.
    pub snapshot_times: Vec<f64>,
    /// Record diagnostics every this many steps (1 = every step).
    pub diag_stride: usize,
}

/// Time series of diagnostics plus optional state snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    pub snapshots: Vec<(f64, Ensemble)>,
}

/// Run the full or batched dynamics from `t = 0` to `t_final` with the fixed
/// outer step `stepper.dt`, re-sampling the batch partition every step.
pub fn simulate(initial: &Ensemble, spec: &SimulateSpec) -> Result<Trajectory> {
    if spec.t_final < 0.0 {
        return Err(Error::config("simulate: t_final must be nonnegative"));
    }
    if spec.kernel.is_stochastic() {
        return Err(Error::config(
            "simulate: particle dynamics need a deterministic kernel (fix the parameter first)",
        ));
    }
    if spec.diag_stride == 0 {
        return Err(Error::config("simulate: diag_stride must be at least 1"));
    }
    if let SimMode::Rbm { p } = spec.mode {
        // Surface partition errors before stepping.
        if spec.t_final > 0.0 {
            sample_batch_plan(initial.n, p, 0, spec.seed)?;
        }
    }
    let tau = spec.stepper.dt;
    let n_steps = (spec.t_final / tau).round() as usize;
    let snap_steps: Vec<usize> = spec
        .snapshot_times
        .iter()
        .map(|&t| (t / tau).round() as usize)
        .collect();

    let mut ens = initial.clone();
    ens.time = 0.0;
    let mut traj = Trajectory {
        times: vec![0.0],
        diagnostics: vec![diagnostics(&ens)],
        snapshots: Vec::new(),
    };
    if snap_steps.contains(&0) {
        traj.snapshots.push((0.0, ens.clone()));
    }
    for step in 0..n_steps {
        ens = match spec.mode {
            SimMode::FullCs => cs_step(&ens, &spec.kernel, &spec.stepper, tau),
            SimMode::Rbm { p } => {
                let plan = sample_batch_plan(ens.n, p, step as u64, spec.seed)?;
                rbm_step(&ens, &plan, &spec.kernel, &spec.stepper, tau)
            }
        }
        .map_err(|e| e.at_step(step))?;
        ens.time = (step + 1) as f64 * tau;
        if (step + 1) % spec.diag_stride == 0 || step + 1 == n_steps {
            traj.times.push(ens.time);
            traj.diagnostics.push(diagnostics(&ens));
        }
        if snap_steps.contains(&(step + 1)) {
            traj.snapshots.push((ens.time, ens.clone()));
        }
    }
    Ok(traj)
}
