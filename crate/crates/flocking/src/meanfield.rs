//! Sample-pool realization of the batch method's mean-field step.
//!
//! One mean-field step evolves a product law of `p` particles for one
//! interval and keeps the first marginal. With the law represented by a
//! finite sample pool, each pool member draws `p - 1` companions uniformly
//! (with replacement) from the frozen pool, the small system runs for one
//! interval, and only the member's own state survives. A large full-coupling
//! run provides the kinetic reference the iterated map is compared against.

use crate::error::{Error, Result};
use crate::integrators::StepperSpec;
use crate::kernels::KernelSpec;
use crate::metrics::{wasserstein_exact, Samples};

use crate::particle::{self, cs_step, evolve_group, Ensemble, SimMode, SimulateSpec};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

/// Equal-weight phase-space samples representing a one-particle law.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePool {
    pub dim: usize,
    pub m: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub time: f64,
}

impl SamplePool {
    pub fn from_ensemble(ens: &Ensemble) -> Self {
        SamplePool {
            dim: ens.dim,
            m: ens.n,
            positions: ens.positions.clone(),
            velocities: ens.velocities.clone(),
            time: ens.time,
        }
    }

    pub fn to_ensemble(&self) -> Ensemble {
        Ensemble {
            dim: self.dim,
            n: self.m,
            positions: self.positions.clone(),
            velocities: self.velocities.clone(),
            time: self.time,
        }
    }

    /// Concatenated (x, v) rows as a `2 dim`-dimensional sample set.
    pub fn phase_samples(&self) -> Samples {
        let mut data = Vec::with_capacity(self.m * 2 * self.dim);
        for i in 0..self.m {
            data.extend_from_slice(&self.positions[i * self.dim..(i + 1) * self.dim]);
            data.extend_from_slice(&self.velocities[i * self.dim..(i + 1) * self.dim]);
        }
        Samples { dim: 2 * self.dim, data }
    }

    /// Mean velocity of the pool.
    pub fn mean_velocity(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for i in 0..self.m {
            for c in 0..self.dim {
                mean[c] += self.velocities[i * self.dim + c];
            }
        }
        for m in mean.iter_mut() {
            *m /= self.m as f64;
        }
        mean
    }

    /// Average squared velocity norm of the pool.
    pub fn velocity_second_moment(&self) -> f64 {
        self.velocities.iter().map(|v| v * v).sum::<f64>() / self.m as f64
    }
}

/// One mean-field interval: every member evolves a fresh `p`-particle system
/// built from itself plus `p - 1` companions drawn from the frozen pool, and
/// keeps its own updated state. Members are independent; companion draws use
/// per-member streams derived from `(seed, step_index, member)`.
pub fn qinf_step(
    pool: &SamplePool,
    p: usize,
    spec: &KernelSpec,
    stepper: &StepperSpec,
    tau: f64,
    seed: u64,
    step_index: u64,
) -> Result<SamplePool> {
    if p < 2 {
        return Err(Error::config("mean-field step: batch size p must be at least 2"));
    }
    if pool.m < p {
        return Err(Error::config(format!(
            "mean-field step: pool of {} samples cannot host batches of {p}",
            pool.m
        )));
    }
    let psi = particle::weight_of(spec, None)?;
    let dim = pool.dim;
    let prefactor = spec.kappa / (p as f64 - 1.0);
    let new_states: Result<Vec<Vec<f64>>> = (0..pool.m)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, &[0x71696e66, step_index, i as u64]);
            let mut members = Vec::with_capacity(p);
            members.push(i);
            for _ in 0..p - 1 {
                members.push(rng.gen_range(0..pool.m));
            }
            let state = evolve_group(
                dim,
                &members,
                &pool.positions,
                &pool.velocities,
                prefactor,
                &psi,
                stepper,
                tau,
            )?;
            // Keep only the member's own row: position block 0 and velocity
            // block p.
            let mut own = Vec::with_capacity(2 * dim);
            own.extend_from_slice(&state[..dim]);
            own.extend_from_slice(&state[p * dim..(p + 1) * dim]);
            Ok(own)
        })
        .collect();
    let new_states = new_states?;
    let mut out = pool.clone();
    for (i, own) in new_states.iter().enumerate() {
        out.positions[i * dim..(i + 1) * dim].copy_from_slice(&own[..dim]);
        out.velocities[i * dim..(i + 1) * dim].copy_from_slice(&own[dim..]);
    }
    out.time = pool.time + tau;
    Ok(out)
}

/// Degenerate mean-field step where every member interacts with the whole
/// pool: one full-coupling step on the pool. Exposed for tests.
pub fn qinf_step_whole_pool(
    pool: &SamplePool,
    spec: &KernelSpec,
    stepper: &StepperSpec,
    tau: f64,
) -> Result<SamplePool> {
    let ens = cs_step(&pool.to_ensemble(), spec, stepper, tau)?;
    Ok(SamplePool::from_ensemble(&ens))
}

/// Full-coupling reference run: evolves `initial` (sampled i.i.d. from the
/// target law) and returns pool snapshots at the requested times.
pub fn meanfield_reference(
    initial: &Ensemble,
    kernel: &KernelSpec,
    stepper: &StepperSpec,
    t_final: f64,
    snapshot_times: &[f64],
) -> Result<Vec<(f64, SamplePool)>> {
    let spec = SimulateSpec {
        mode: SimMode::FullCs,
        kernel: kernel.clone(),
        stepper: *stepper,
        t_final,
        seed: 0,
        snapshot_times: snapshot_times.to_vec(),
        // The reference only needs snapshots; diagnostics stay cheap.
        diag_stride: usize::MAX / 2,
    };
    let traj = particle::simulate(initial, &spec)?;
    Ok(traj
        .snapshots
        .iter()
        .map(|(t, ens)| (*t, SamplePool::from_ensemble(ens)))
        .collect())
}

/// Configuration of the interval-size scan against the kinetic reference.
#[derive(Debug, Clone)]
pub struct Theorem2Config {
    pub kernel: KernelSpec,
    pub p: usize,
    pub taus: Vec<f64>,
    pub t_final: f64,
    /// Sub-steps per interval for the small systems.
    pub substeps: usize,
    /// Outer step of the reference run.
    pub ref_dt: f64,
    /// Exact-assignment size for each gap measurement.
    pub assignment_size: usize,
    /// Subsample replicates per gap.
    pub n_replicates: usize,
    pub seed: u64,
}

/// One scan row: the measured transport gap at a given interval size.
#[derive(Debug, Clone)]
pub struct Theorem2Row {
    pub tau: f64,
    pub w2_gap: f64,
    pub w2_stderr: f64,
    pub n_replicates: usize,
    /// Gap with the null sampling floor removed in quadrature.
    pub w2_corrected: f64,
    /// True when the corrected gap clears three standard errors.
    pub above_floor: bool,
}

/// Scan output: rows per interval size, the measured sampling floor, and the
/// log-log slope fitted over the rows that clear the floor.
#[derive(Debug, Clone)]
pub struct Theorem2Table {
    pub rows: Vec<Theorem2Row>,
    /// Reference-side null gap (disjoint reference halves at the
    /// measurement size); the per-row floors also fold in the pool side.
    pub sampling_floor: f64,
    /// Fitted slope of `log gap` vs `log tau` over qualifying rows; `None`
    /// when fewer than two rows rise above the sampling floor.
    pub slope: Option<f64>,
}

fn draw_disjoint_subsets(m: usize, size: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    let a = idx[..size].to_vec();
    let b = idx[size..2 * size].to_vec();
    (a, b)
}

/// Iterate the mean-field map to the final time for every interval size and
/// measure the phase-space transport distance to the reference snapshot.
///
/// The same subsample index sets are reused across interval sizes (common
/// random numbers), and the sampling floor is estimated from disjoint
/// subsample pairs of the reference against itself.
pub fn theorem2_scan(
    pool0: &SamplePool,
    reference: &SamplePool,
    cfg: &Theorem2Config,
) -> Result<Theorem2Table> {
    let m_sub = cfg.assignment_size;
    if reference.m < 2 * m_sub || pool0.m < m_sub {
        return Err(Error::config(
            "theorem2_scan: pools too small for the requested assignment size",
        ));
    }
    if cfg.n_replicates == 0 || cfg.taus.is_empty() {
        return Err(Error::config("theorem2_scan: need replicates and at least one interval size"));
    }
    let ref_samples = reference.phase_samples();

    // Reference-side null: disjoint halves of the reference against each
    // other at the measurement size.
    let null_of = |samples: &Samples, m: usize, tag: u64| -> Result<f64> {
        let values: Result<Vec<f64>> = (0..cfg.n_replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng::stream(cfg.seed, &[tag, r as u64]);
                let (ia, ib) = draw_disjoint_subsets(m, m_sub, &mut rng);
                wasserstein_exact(&samples.subset(&ia), &samples.subset(&ib), 2.0)
            })
            .collect();
        Ok(values?.iter().sum::<f64>() / cfg.n_replicates as f64)
    };
    let sampling_floor = null_of(&ref_samples, reference.m, 0x666c6f6f)?;

    let mut rows = Vec::with_capacity(cfg.taus.len());
    for (ti, &tau) in cfg.taus.iter().enumerate() {
        let n_steps = (cfg.t_final / tau).round() as usize;
        let run_seed = rng::derive_seed(cfg.seed, &[0x74617573, ti as u64]);
        let mut pool = pool0.clone();
        let stepper = StepperSpec::new(crate::integrators::Scheme::Rk4, tau, cfg.substeps)?;
        for step in 0..n_steps {
            pool = qinf_step(&pool, cfg.p, &cfg.kernel, &stepper, tau, run_seed, step as u64)
                .map_err(|e| e.at_step(step))?;
        }
        let pool_samples = pool.phase_samples();
        let gaps: Result<Vec<f64>> = (0..cfg.n_replicates)
            .into_par_iter()
            .map(|r| {
                // Index draws share a stream across interval sizes so the
                // reference-side noise cancels in comparisons.
                let mut rng = rng::stream(cfg.seed, &[0x77327375, r as u64]);
                let mut idx_pool: Vec<usize> = (0..pool.m).collect();
                idx_pool.shuffle(&mut rng);
                idx_pool.truncate(m_sub);
                let mut idx_ref: Vec<usize> = (0..reference.m).collect();
                idx_ref.shuffle(&mut rng);
                idx_ref.truncate(m_sub);
                wasserstein_exact(&pool_samples.subset(&idx_pool), &ref_samples.subset(&idx_ref), 2.0)
            })
            .collect();
        let gaps = gaps?;
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>()
            / (gaps.len().max(2) - 1) as f64;
        let stderr = (var / gaps.len() as f64).sqrt();
        // The null gap of a pool-vs-reference pair with equal laws combines
        // the sides' sampling noises; each side's null measures twice its
        // own, hence the averaged squares.
        let pool_null = null_of(&pool_samples, pool.m, 0x706e756c)?;
        let floor = ((sampling_floor * sampling_floor + pool_null * pool_null) / 2.0).sqrt();
        let corrected = (mean * mean - floor * floor).max(0.0).sqrt();
        rows.push(Theorem2Row {
            tau,
            w2_gap: mean,
            w2_stderr: stderr,
            n_replicates: gaps.len(),
            w2_corrected: corrected,
            above_floor: corrected > 3.0 * stderr,
        });
    }

    // Log-log fit over the rows whose corrected gap is resolved.
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.above_floor && r.w2_corrected > 0.0)
        .map(|r| (r.tau.ln(), r.w2_corrected.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    } else {
        None
    };
    Ok(Theorem2Table { rows, sampling_floor, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::Scheme;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_pool(dim: usize, m: usize, seed: u64, x_scale: f64, v_scale: f64) -> SamplePool {
        let mut rng = rng::stream(seed, &[0x706f6f6c]);
        let normal = StandardNormal;
        let positions: Vec<f64> = (0..m * dim)
            .map(|_| {
                let g: f64 = normal.sample(&mut rng);
                x_scale * g
            })
            .collect();
        let velocities: Vec<f64> = (0..m * dim)
            .map(|_| {
                let g: f64 = normal.sample(&mut rng);
                v_scale * g
            })
            .collect();
        SamplePool { dim, m, positions, velocities, time: 0.0 }
    }

    #[test]
    fn identical_pool_is_a_fixed_point_up_to_translation() {
        let dim = 2;
        let m = 50;
        let mut pool = gaussian_pool(dim, m, 1, 1.0, 1.0);
        let x0 = [0.3, -0.7];
        let v0 = [0.5, 0.25];
        for i in 0..m {
            pool.positions[i * dim..(i + 1) * dim].copy_from_slice(&x0);
            pool.velocities[i * dim..(i + 1) * dim].copy_from_slice(&v0);
        }
        let tau = 0.05;
        let spec = KernelSpec::inverse_power(1.0, 0.1, 10.0);
        let out = qinf_step(&pool, 2, &spec, &StepperSpec::rk4(tau), tau, 9, 0).unwrap();
        for i in 0..m {
            for c in 0..dim {
                assert_eq!(out.velocities[i * dim + c], v0[c]);
                let expected = x0[c] + tau * v0[c];
                assert!((out.positions[i * dim + c] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pool_too_small_is_rejected() {
        let pool = gaussian_pool(1, 3, 2, 1.0, 1.0);
        let spec = KernelSpec::constant(1.0, 1.0);
        assert!(qinf_step(&pool, 4, &spec, &StepperSpec::rk4(0.1), 0.1, 0, 0).is_err());
    }

    #[test]
    fn mean_velocity_fluctuates_at_the_sampling_scale() {
        // Conservation holds in law; the finite-pool estimate moves by
        // O(1/sqrt(M)) per step. 30 replicates calibrate the constant.
        let m = 800;
        let tau = 1e-2;
        let spec = KernelSpec::constant(1.0, 1.0);
        let mut devs = Vec::new();
        for rep in 0..30 {
            let pool = gaussian_pool(1, m, 100 + rep, 1.0, 1.0);
            let before = pool.mean_velocity()[0];
            let out = qinf_step(&pool, 2, &spec, &StepperSpec::rk4(tau), tau, rep, 0).unwrap();
            let after = out.mean_velocity()[0];
            devs.push((after - before).abs());
        }
        let max_dev = devs.iter().cloned().fold(0.0f64, f64::max);
        // One pair interaction moves a velocity by O(kappa tau |dv|);
        // averaged over M members the drift is O(kappa tau / sqrt(M)).
        let scale = 1.0 * tau / (m as f64).sqrt();
        assert!(max_dev <= 10.0 * scale, "max deviation {max_dev} vs scale {scale}");
        let mean_dev = devs.iter().sum::<f64>() / devs.len() as f64;
        assert!(mean_dev <= 3.0 * scale, "mean deviation {mean_dev} vs scale {scale}");
    }

    #[test]
    fn pair_relaxation_second_moment_matches_linear_oracle() {
        // Constant kernel, p = 2, centered pool: the two-body system is
        // linear, v1 + v2 frozen and v1 - v2 damped at rate 2 kappa. One
        // step maps the second moment to M2 (1 + exp(-4 kappa tau)) / 2 in
        // expectation over companion draws, exactly even for a finite pool
        // because the draws use the pool's own empirical moments.
        let kappa = 0.5;
        let tau = 0.25;
        let m = 20_000;
        let spec = KernelSpec::constant(kappa, 1.0);
        let factor = (1.0 + (-4.0 * kappa * tau).exp()) / 2.0;

        let mut ratios = Vec::new();
        for rep in 0..24u64 {
            let mut pool = gaussian_pool(1, m, 700 + rep, 0.5, 1.0);
            let mean = pool.mean_velocity()[0];
            for v in pool.velocities.iter_mut() {
                *v -= mean;
            }
            let expected = pool.velocity_second_moment() * factor;
            let out = qinf_step(&pool, 2, &spec, &StepperSpec::rk4(tau), tau, 50 + rep, 0).unwrap();
            ratios.push(out.velocity_second_moment() / expected);
        }
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let var = ratios.iter().map(|r| (r - mean_ratio).powi(2)).sum::<f64>() / (ratios.len() - 1) as f64;
        let stderr = (var / ratios.len() as f64).sqrt();
        // The step integrates the pair exactly up to the fourth-order
        // one-step defect of the relaxation factor, hence the small floor.
        assert!(
            (mean_ratio - 1.0).abs() <= 3.0 * stderr + 2e-4,
            "ratio {mean_ratio} vs 1 (stderr {stderr})"
        );
    }

    #[test]
    fn whole_pool_mode_equals_full_step() {
        let pool = gaussian_pool(2, 40, 11, 1.0, 1.0);
        let spec = KernelSpec::inverse_power(1.0, 0.1, 20.0);
        let tau = 1e-2;
        let out = qinf_step_whole_pool(&pool, &spec, &StepperSpec::rk4(tau), tau).unwrap();
        let direct = cs_step(&pool.to_ensemble(), &spec, &StepperSpec::rk4(tau), tau).unwrap();
        assert_eq!(out.positions, direct.positions);
        assert_eq!(out.velocities, direct.velocities);
    }

    #[test]
    fn second_moment_mean_decreases_across_steps() {
        let m = 1500;
        let tau = 1e-2;
        let kappa = 1.0;
        let spec = KernelSpec::constant(kappa, 1.0);
        let n_steps = 30;
        let n_reps = 20;
        let mut means = vec![0.0; n_steps + 1];
        for rep in 0..n_reps {
            let mut pool = gaussian_pool(1, m, 300 + rep, 0.5, 1.0);
            // Center so the second moment is the variance that dissipates.
            let mean = pool.mean_velocity()[0];
            for v in pool.velocities.iter_mut() {
                *v -= mean;
            }
            means[0] += pool.velocity_second_moment();
            for step in 0..n_steps {
                pool = qinf_step(&pool, 2, &spec, &StepperSpec::rk4(tau), tau, rep, step as u64).unwrap();
                means[step + 1] += pool.velocity_second_moment();
            }
        }
        for m in means.iter_mut() {
            *m /= n_reps as f64;
        }
        for w in means.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "{} -> {}", w[0], w[1]);
        }
        // Dissipation envelope with the constant kernel's floor psi0 = 1.
        let per_step = (-2.0 * kappa * tau).exp() + 8.0 * kappa * kappa * tau * tau;
        for (k, &mk) in means.iter().enumerate() {
            let envelope = means[0] * per_step.powi(k as i32);
            assert!(mk <= envelope * (1.0 + 0.05), "step {k}: {mk} vs envelope {envelope}");
        }
    }

    #[test]
    fn reference_run_keeps_momentum_and_dissipates_energy() {
        let pool = gaussian_pool(1, 400, 17, 0.7, 1.0);
        let kernel = KernelSpec::constant(1.0, 1.0);
        let stepper = StepperSpec::new(Scheme::Rk4, 1e-2, 1).unwrap();
        let snaps = meanfield_reference(&pool.to_ensemble(), &kernel, &stepper, 0.5, &[0.0, 0.25, 0.5]).unwrap();
        assert_eq!(snaps.len(), 3);
        let m0 = snaps[0].1.mean_velocity()[0];
        let m_end = snaps.last().unwrap().1.mean_velocity()[0];
        assert!((m_end - m0).abs() < 1e-10 * (1.0 + m0.abs()));
        assert!(
            snaps.last().unwrap().1.velocity_second_moment()
                <= snaps[0].1.velocity_second_moment()
        );
    }

    #[test]
    fn flocked_reference_velocity_marginal_is_a_point_mass() {
        let mut pool = gaussian_pool(1, 100, 23, 1.0, 0.0);
        for v in pool.velocities.iter_mut() {
            *v = 0.4;
        }
        let kernel = KernelSpec::constant(1.0, 1.0);
        let stepper = StepperSpec::new(Scheme::Rk4, 1e-2, 1).unwrap();
        let snaps = meanfield_reference(&pool.to_ensemble(), &kernel, &stepper, 0.2, &[0.2]).unwrap();
        for v in &snaps[0].1.velocities {
            assert_eq!(*v, 0.4);
        }
    }

    #[test]
    fn scan_handles_a_single_interval_size() {
        let pool = gaussian_pool(1, 256, 31, 0.7, 1.0);
        let reference = gaussian_pool(1, 512, 32, 0.7, 1.0);
        let cfg = Theorem2Config {
            kernel: KernelSpec::constant(1.0, 1.0),
            p: 2,
            taus: vec![0.1],
            t_final: 0.2,
            substeps: 1,
            ref_dt: 1e-2,
            assignment_size: 64,
            n_replicates: 4,
            seed: 5,
        };
        let table = theorem2_scan(&pool, &reference, &cfg).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].w2_gap > 0.0);
        assert!(table.sampling_floor > 0.0);
    }

    #[test]
    fn doubling_pool_size_does_not_grow_the_gap() {
        // The bootstrap bias shrinks with the pool; the measured gap from a
        // doubled pool must not exceed the smaller pool's by more than two
        // standard errors.
        let kernel = KernelSpec::constant(1.0, 1.0);
        let stepper = StepperSpec::new(Scheme::Rk4, 1e-2, 1).unwrap();
        let ref0 = gaussian_pool(1, 2048, 41, 0.7, 1.0).to_ensemble();
        let snaps = meanfield_reference(&ref0, &kernel, &stepper, 0.5, &[0.5]).unwrap();
        let reference = &snaps[0].1;
        let mut gaps = Vec::new();
        for m in [512usize, 1024] {
            let pool = gaussian_pool(1, m, 41, 0.7, 1.0);
            let cfg = Theorem2Config {
                kernel: kernel.clone(),
                p: 2,
                taus: vec![0.1],
                t_final: 0.5,
                substeps: 1,
                ref_dt: 1e-2,
                assignment_size: 128,
                n_replicates: 6,
                seed: 77,
            };
            let table = theorem2_scan(&pool, reference, &cfg).unwrap();
            gaps.push((table.rows[0].w2_gap, table.rows[0].w2_stderr));
        }
        let (g1, s1) = gaps[0];
        let (g2, s2) = gaps[1];
        assert!(g2 <= g1 + 2.0 * (s1 + s2), "gap grew: {g1} -> {g2}");
    }
}
