//! Experiment drivers: the homogeneous relaxation study, the 1-D/2-D
//! flocking runs with random kernels, and the parameter scans.

use crate::cleanliness::{estimate_epsilon, EpsilonEstimate};
use crate::error::{Error, Result};
use crate::gpc::{
    build_basis, quadrature, reconstruct_expected_density, GpcEnsemble, GpcSystem, GridSpace,
    Histogram, PhaseGrid,
};
use crate::harness::config::{ScenarioConfig, ScenarioKind};
use crate::harness::init::sample_initial;
use crate::integrators::{Scheme, StepperSpec};
use crate::kernels::KernelFamily;
use crate::kinetic::{
    assemble_h, bimodal_density, expected_temperature_samples, fgpc_solve, KineticTrajectory,
    VelocityGrid,
};
use crate::meanfield::{meanfield_reference, theorem2_scan, SamplePool, Theorem2Config, Theorem2Table};
use crate::metrics::{mse_temperature_with_stderr, tv_error};
use crate::particle::{diagnostics, sample_batch_plan, Diagnostics, Ensemble};
use crate::rng;
use rayon::prelude::*;

const REPLICATE_TAG: u64 = 0x726570;
const INIT_TAG: u64 = 0x696e69;
const REFERENCE_TAG: u64 = 0x707265;

/// Options for one chaos-coefficient batch run.
#[derive(Debug, Clone)]
pub struct GpcRunOptions {
    pub p: usize,
    pub dt: f64,
    pub substeps: usize,
    pub t_final: f64,
    pub seed: u64,
    /// Times at which full chaos states are kept.
    pub snapshot_times: Vec<f64>,
    /// Record global per-mode momenta every this many steps; 0 disables.
    pub momenta_stride: usize,
    /// Record mode-zero diagnostics every this many steps; 0 disables.
    pub diag_stride: usize,
}

/// Output of one chaos-coefficient batch run.
#[derive(Debug, Clone)]
pub struct GpcRunRecord {
    pub final_state: GpcEnsemble,
    /// `(t, momenta[mode][coord])` rows.
    pub mode_momenta: Vec<(f64, Vec<Vec<f64>>)>,
    /// `(t, diagnostics of the mode-zero ensemble)` rows.
    pub diags: Vec<(f64, Diagnostics)>,
    pub snapshots: Vec<(f64, GpcEnsemble)>,
}

fn all_mode_momenta(ens: &GpcEnsemble) -> Vec<Vec<f64>> {
    (0..=ens.order).map(|l| ens.mode_momentum(l)).collect()
}

/// Drive the batched chaos dynamics from `t = 0` to `t_final`, re-drawing
/// the partition every interval. A final fractional interval is taken when
/// `dt` does not divide `t_final`.
pub fn run_rbm_gpc(initial: &GpcEnsemble, system: &GpcSystem, opts: &GpcRunOptions) -> Result<GpcRunRecord> {
    let n_full = (opts.t_final / opts.dt + 1e-9).floor() as usize;
    let remainder = opts.t_final - n_full as f64 * opts.dt;
    let total_steps = n_full + usize::from(remainder > 1e-12);

    let stepper = StepperSpec::new(Scheme::Rk4, opts.dt, opts.substeps)?;
    let snap_steps: Vec<usize> = opts
        .snapshot_times
        .iter()
        .map(|&t| (t / opts.dt).round() as usize)
        .collect();

    let mut state = initial.clone();
    state.time = 0.0;
    let mut record = GpcRunRecord {
        final_state: state.clone(),
        mode_momenta: Vec::new(),
        diags: Vec::new(),
        snapshots: Vec::new(),
    };
    let log_state = |step: usize, state: &GpcEnsemble, record: &mut GpcRunRecord| {
        let t = state.time;
        if opts.momenta_stride > 0 && (step % opts.momenta_stride == 0 || step == total_steps) {
            record.mode_momenta.push((t, all_mode_momenta(state)));
        }
        if opts.diag_stride > 0 && (step % opts.diag_stride == 0 || step == total_steps) {
            record.diags.push((t, diagnostics(&state.mode_zero())));
        }
        if snap_steps.contains(&step) {
            record.snapshots.push((t, state.clone()));
        }
    };
    log_state(0, &state, &mut record);

    for step in 0..total_steps {
        let tau = if step < n_full { opts.dt } else { remainder };
        let plan = sample_batch_plan(state.n, opts.p, step as u64, opts.seed)?;
        state = crate::gpc::rbm_gpc_step(&state, &plan, system, &stepper, tau)
            .map_err(|e| e.at_step(step))?;
        state.time = if step + 1 == total_steps {
            opts.t_final
        } else {
            (step + 1) as f64 * opts.dt
        };
        log_state(step + 1, &state, &mut record);
    }
    record.final_state = state;
    Ok(record)
}

/// Effective affine relaxation rate of a distance-independent kernel,
/// including the coupling strength.
fn constant_rate(cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    let spec = cfg.kernel.to_spec()?;
    match spec.family {
        KernelFamily::Constant { base, slope } => Ok((spec.kappa * base, spec.kappa * slope)),
        _ => Err(Error::config(
            "the homogeneous scenario needs a constant kernel family",
        )),
    }
}

/// Output of the homogeneous relaxation experiment.
#[derive(Debug, Clone)]
pub struct HomogeneousResult {
    /// Parameter-averaged temperature of each replicate at the final time.
    pub temps: Vec<f64>,
    /// Reference temperature from the velocity-grid solver.
    pub t_ref: f64,
    pub mse_t: f64,
    pub mse_stderr: f64,
    /// L1 gap between the replicate-averaged expected velocity density and
    /// the reference density.
    pub err_tv: f64,
    /// Replicate-averaged expected velocity density at the final time.
    pub mean_hist: Histogram,
    /// Reference density as a histogram on the same grid.
    pub ref_hist: Histogram,
    pub kinetic: KineticTrajectory,
    /// Expected velocity densities of replicate zero at snapshot times.
    pub snapshots: Vec<(f64, Histogram)>,
    /// Parameter-averaged mass outside the grid, replicate-averaged.
    pub out_of_domain: f64,
}

fn velocity_grid_of(cfg: &ScenarioConfig) -> Result<(VelocityGrid, PhaseGrid)> {
    let vg = VelocityGrid::new(cfg.grid.min, cfg.grid.max, cfg.grid.v_cells)?;
    let pg = PhaseGrid::new(vec![cfg.grid.min], vec![cfg.grid.max], vec![cfg.grid.v_cells])?;
    Ok((vg, pg))
}

/// Run the homogeneous relaxation experiment: batched chaos replicates
/// against the velocity-grid reference.
pub fn run_homogeneous(cfg: &ScenarioConfig) -> Result<HomogeneousResult> {
    let (k_base, k_slope) = constant_rate(cfg)?;
    let param = cfg.param.to_spec()?;
    let basis = build_basis(param, cfg.gpc_order)?;
    let quad = quadrature(param, cfg.quadrature_order())?;
    let spec = cfg.kernel.to_spec()?;
    let system = GpcSystem::new(spec, basis.clone(), quad.clone());
    let dist = cfg.initial_distribution();

    // Velocity-grid reference.
    let (vgrid, pgrid) = velocity_grid_of(cfg)?;
    let f0 = match dist {
        crate::harness::init::InitialDistribution::Bimodal1dV { sigma2, mu } => {
            bimodal_density(&vgrid, mu, sigma2)
        }
        _ => return Err(Error::config("homogeneous scenario expects bimodal velocity data")),
    };
    let h_matrix = assemble_h(k_base, k_slope, &basis, &quad);
    let kinetic = fgpc_solve(&vgrid, &h_matrix, &f0, cfg.dt, cfg.t_final)?;
    let t_ref = kinetic.samples.last().unwrap().expected_temperature;
    let ref_hist = Histogram { grid: pgrid.clone(), densities: kinetic.final_density.mode(0).to_vec() };

    // Replicates.
    let runs: Result<Vec<(f64, Histogram, f64, Vec<(f64, Histogram)>)>> = (0..cfg.n_replicates)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = rng::derive_seed(cfg.seed, &[REPLICATE_TAG, rep as u64]);
            let init_seed = rng::derive_seed(rep_seed, &[INIT_TAG]);
            let ens = sample_initial(&dist, cfg.n, 1, init_seed)?;
            let state0 = GpcEnsemble::from_ensemble(&ens, cfg.gpc_order);
            let opts = GpcRunOptions {
                p: cfg.p,
                dt: cfg.dt,
                substeps: cfg.substeps,
                t_final: cfg.t_final,
                seed: rep_seed,
                snapshot_times: if rep == 0 { cfg.snapshot_times.clone() } else { Vec::new() },
                momenta_stride: 0,
                diag_stride: 0,
            };
            let record = run_rbm_gpc(&state0, &system, &opts)?;
            let temp = expected_temperature_samples(&record.final_state, &basis, &quad)?;
            let (hist, out_mass) =
                reconstruct_expected_density(&record.final_state, &pgrid, &system, GridSpace::Velocity)?;
            let snaps: Result<Vec<(f64, Histogram)>> = record
                .snapshots
                .iter()
                .map(|(t, s)| {
                    let (h, _) = reconstruct_expected_density(s, &pgrid, &system, GridSpace::Velocity)?;
                    Ok((*t, h))
                })
                .collect();
            Ok((temp, hist, out_mass, snaps?))
        })
        .collect();
    let runs = runs?;

    let temps: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (mse_t, mse_stderr) = mse_temperature_with_stderr(&temps, t_ref)?;
    let mut mean_hist = Histogram::zeros(pgrid.clone());
    let mut out_of_domain = 0.0;
    for (_, hist, om, _) in &runs {
        for (acc, d) in mean_hist.densities.iter_mut().zip(&hist.densities) {
            *acc += d / cfg.n_replicates as f64;
        }
        out_of_domain += om / cfg.n_replicates as f64;
    }
    let err_tv = tv_error(&mean_hist, &ref_hist)?;
    let snapshots = runs.into_iter().next().map(|r| r.3).unwrap_or_default();

    Ok(HomogeneousResult {
        temps,
        t_ref,
        mse_t,
        mse_stderr,
        err_tv,
        mean_hist,
        ref_hist,
        kinetic,
        snapshots,
        out_of_domain,
    })
}

/// Output of a 1-D or 2-D flocking run with a random kernel.
#[derive(Debug, Clone)]
pub struct CsResult {
    pub record: GpcRunRecord,
    /// `(t, histogram, out-of-domain mass)` at each snapshot time.
    pub histograms: Vec<(f64, Histogram, f64)>,
}

/// Run the 1-D or 2-D flocking scenario: batched chaos dynamics with the
/// distance-decaying random kernel, expected phase-space densities at the
/// snapshot times, and per-mode momentum plus mode-zero diameter series.
pub fn run_cs(cfg: &ScenarioConfig) -> Result<CsResult> {
    let dim = match cfg.scenario {
        ScenarioKind::Cs1d => 1,
        ScenarioKind::Cs2d => 2,
        _ => return Err(Error::config("run_cs expects the cs1d or cs2d scenario")),
    };
    let param = cfg.param.to_spec()?;
    let basis = build_basis(param, cfg.gpc_order)?;
    let quad = quadrature(param, cfg.quadrature_order())?;
    let spec = cfg.kernel.to_spec()?;
    let system = GpcSystem::new(spec, basis, quad);

    let dist = cfg.initial_distribution();
    let init_seed = rng::derive_seed(cfg.seed, &[INIT_TAG]);
    let ens = sample_initial(&dist, cfg.n, dim, init_seed)?;
    let state0 = GpcEnsemble::from_ensemble(&ens, cfg.gpc_order);

    let snapshot_times = if cfg.snapshot_times.is_empty() {
        (0..=cfg.t_final.floor() as usize).map(|t| t as f64).collect()
    } else {
        cfg.snapshot_times.clone()
    };
    let opts = GpcRunOptions {
        p: cfg.p,
        dt: cfg.dt,
        substeps: cfg.substeps,
        t_final: cfg.t_final,
        seed: cfg.seed,
        snapshot_times,
        momenta_stride: 1,
        diag_stride: cfg.diag_stride,
    };
    let record = run_rbm_gpc(&state0, &system, &opts)?;

    let grid = PhaseGrid::new(
        vec![cfg.grid.min; 2 * dim],
        vec![cfg.grid.max; 2 * dim],
        vec![cfg.grid.cells_per_axis; 2 * dim],
    )?;
    let histograms: Result<Vec<(f64, Histogram, f64)>> = record
        .snapshots
        .iter()
        .map(|(t, s)| {
            let (h, om) = reconstruct_expected_density(s, &grid, &system, GridSpace::Phase)?;
            Ok((*t, h, om))
        })
        .collect();
    Ok(CsResult { record, histograms: histograms? })
}

/// One row of a population / batch-size / interval scan.
#[derive(Debug, Clone)]
pub struct TemperatureScanRow {
    /// The varied quantity (population, batch size, or interval length).
    pub value: f64,
    pub n_replicates: usize,
    pub mse_t: f64,
    pub mse_stderr: f64,
    /// L1 gap of the replicate-averaged expected density, when measured.
    pub err_tv: Option<f64>,
    pub t_ref: f64,
}

fn homogeneous_with(cfg: &ScenarioConfig, n: usize, p: usize, dt: f64) -> ScenarioConfig {
    let mut sub = cfg.clone();
    sub.n = n;
    sub.p = p;
    sub.dt = dt;
    sub
}

/// Temperature of a single batched chaos run, used as scan reference.
fn single_run_temperature(cfg: &ScenarioConfig, n: usize, p: usize, dt: f64, seed: u64) -> Result<f64> {
    let param = cfg.param.to_spec()?;
    let basis = build_basis(param, cfg.gpc_order)?;
    let quad = quadrature(param, cfg.quadrature_order())?;
    let spec = cfg.kernel.to_spec()?;
    let system = GpcSystem::new(spec, basis.clone(), quad.clone());
    let dist = cfg.initial_distribution();
    let ens = sample_initial(&dist, n, 1, rng::derive_seed(seed, &[INIT_TAG]))?;
    let state0 = GpcEnsemble::from_ensemble(&ens, cfg.gpc_order);
    let opts = GpcRunOptions {
        p,
        dt,
        substeps: cfg.substeps,
        t_final: cfg.t_final,
        seed,
        snapshot_times: Vec::new(),
        momenta_stride: 0,
        diag_stride: 0,
    };
    let record = run_rbm_gpc(&state0, &system, &opts)?;
    expected_temperature_samples(&record.final_state, &basis, &quad)
}

/// Temperature error vs population size, referenced to the velocity-grid
/// solver.
pub fn run_n_scan(cfg: &ScenarioConfig) -> Result<Vec<TemperatureScanRow>> {
    let n_list = if cfg.scan.n_list.is_empty() {
        vec![32, 64, 128, 256, 512]
    } else {
        cfg.scan.n_list.clone()
    };
    let mut rows = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let sub = homogeneous_with(cfg, n, cfg.p, cfg.dt);
        let mut scoped = sub;
        scoped.seed = rng::derive_seed(cfg.seed, &[0x6e7363, idx as u64]);
        let result = run_homogeneous(&scoped)?;
        rows.push(TemperatureScanRow {
            value: n as f64,
            n_replicates: cfg.n_replicates,
            mse_t: result.mse_t,
            mse_stderr: result.mse_stderr,
            err_tv: Some(result.err_tv),
            t_ref: result.t_ref,
        });
    }
    Ok(rows)
}

/// Temperature error vs batch size, referenced to a full-batch run.
pub fn run_p_scan(cfg: &ScenarioConfig) -> Result<Vec<TemperatureScanRow>> {
    let p_list = if cfg.scan.p_list.is_empty() { vec![2, 4, 8, 16] } else { cfg.scan.p_list.clone() };
    let ref_seed = rng::derive_seed(cfg.seed, &[REFERENCE_TAG]);
    let t_ref = single_run_temperature(cfg, cfg.n, cfg.n, cfg.dt, ref_seed)?;
    let mut rows = Vec::with_capacity(p_list.len());
    for (idx, &p) in p_list.iter().enumerate() {
        if cfg.n % p != 0 {
            return Err(Error::config(format!("scan batch size {p} must divide n = {}", cfg.n)));
        }
        let temps = scan_replicate_temps(cfg, cfg.n, p, cfg.dt, idx as u64)?;
        let (mse_t, mse_stderr) = mse_temperature_with_stderr(&temps, t_ref)?;
        rows.push(TemperatureScanRow {
            value: p as f64,
            n_replicates: temps.len(),
            mse_t,
            mse_stderr,
            err_tv: None,
            t_ref,
        });
    }
    Ok(rows)
}

/// Temperature error vs interval length, referenced to a run at the
/// config's base interval.
pub fn run_dt_scan(cfg: &ScenarioConfig) -> Result<Vec<TemperatureScanRow>> {
    let dt_list = if cfg.scan.dt_list.is_empty() {
        vec![4e-2, 2e-2, 1e-2, 5e-3]
    } else {
        cfg.scan.dt_list.clone()
    };
    let ref_seed = rng::derive_seed(cfg.seed, &[REFERENCE_TAG]);
    let t_ref = single_run_temperature(cfg, cfg.n, cfg.p, cfg.dt, ref_seed)?;
    let mut rows = Vec::with_capacity(dt_list.len());
    for (idx, &dt) in dt_list.iter().enumerate() {
        let temps = scan_replicate_temps(cfg, cfg.n, cfg.p, dt, 1000 + idx as u64)?;
        let (mse_t, mse_stderr) = mse_temperature_with_stderr(&temps, t_ref)?;
        rows.push(TemperatureScanRow {
            value: dt,
            n_replicates: temps.len(),
            mse_t,
            mse_stderr,
            err_tv: None,
            t_ref,
        });
    }
    Ok(rows)
}

fn scan_replicate_temps(cfg: &ScenarioConfig, n: usize, p: usize, dt: f64, scan_index: u64) -> Result<Vec<f64>> {
    let param = cfg.param.to_spec()?;
    let basis = build_basis(param, cfg.gpc_order)?;
    let quad = quadrature(param, cfg.quadrature_order())?;
    let spec = cfg.kernel.to_spec()?;
    let system = GpcSystem::new(spec, basis.clone(), quad.clone());
    let dist = cfg.initial_distribution();
    (0..cfg.n_replicates)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = rng::derive_seed(cfg.seed, &[REPLICATE_TAG, scan_index, rep as u64]);
            let ens = sample_initial(&dist, n, 1, rng::derive_seed(rep_seed, &[INIT_TAG]))?;
            let state0 = GpcEnsemble::from_ensemble(&ens, cfg.gpc_order);
            let opts = GpcRunOptions {
                p,
                dt,
                substeps: cfg.substeps,
                t_final: cfg.t_final,
                seed: rep_seed,
                snapshot_times: Vec::new(),
                momenta_stride: 0,
                diag_stride: 0,
            };
            let record = run_rbm_gpc(&state0, &system, &opts)?;
            expected_temperature_samples(&record.final_state, &basis, &quad)
        })
        .collect()
}

/// Unclean-probability scan over population sizes.
pub fn run_epsilon_scan(cfg: &ScenarioConfig) -> Result<Vec<EpsilonEstimate>> {
    let n_list = if cfg.scan.n_list.is_empty() {
        vec![64, 128, 256, 512]
    } else {
        cfg.scan.n_list.clone()
    };
    n_list
        .iter()
        .map(|&n| estimate_epsilon(n, cfg.p, cfg.scan.k, cfg.scan.trials, cfg.seed))
        .collect()
}

/// Interval-size scan of the mean-field map against the full-coupling
/// reference.
pub fn run_tau_scan(cfg: &ScenarioConfig) -> Result<Theorem2Table> {
    let kernel = cfg.kernel.to_spec()?;
    if kernel.is_stochastic() {
        return Err(Error::config("the interval scan uses a deterministic kernel"));
    }
    let dist = cfg.initial_distribution();
    let dim = dist.dim();
    let pool0 = SamplePool::from_ensemble(&sample_initial(
        &dist,
        cfg.scan.pool_m,
        dim,
        rng::derive_seed(cfg.seed, &[INIT_TAG, 1]),
    )?);
    let ref0 = sample_initial(&dist, cfg.scan.n_ref, dim, rng::derive_seed(cfg.seed, &[INIT_TAG, 2]))?;
    let ref_stepper = StepperSpec::new(Scheme::Rk4, cfg.dt, 1)?;
    let snaps = meanfield_reference(&ref0, &kernel, &ref_stepper, cfg.t_final, &[cfg.t_final])?;
    let reference = &snaps
        .last()
        .ok_or_else(|| Error::config("reference run produced no snapshot"))?
        .1;
    let taus = if cfg.scan.tau_list.is_empty() {
        vec![0.2, 0.1, 0.05, 0.025]
    } else {
        cfg.scan.tau_list.clone()
    };
    let scan_cfg = Theorem2Config {
        kernel,
        p: cfg.p,
        taus,
        t_final: cfg.t_final,
        substeps: cfg.substeps,
        ref_dt: cfg.dt,
        assignment_size: cfg.scan.assignment_size,
        n_replicates: cfg.scan.w2_replicates,
        seed: cfg.seed,
    };
    theorem2_scan(&pool0, reference, &scan_cfg)
}

/// Full-system or batched particle run from a scenario config (no chaos
/// expansion; the kernel must be deterministic).
pub fn run_particle(cfg: &ScenarioConfig, batched: bool) -> Result<(Ensemble, crate::particle::Trajectory)> {
    let dist = cfg.initial_distribution();
    let dim = dist.dim();
    let ens = sample_initial(&dist, cfg.n, dim, rng::derive_seed(cfg.seed, &[INIT_TAG]))?;
    let spec = crate::particle::SimulateSpec {
        mode: if batched {
            crate::particle::SimMode::Rbm { p: cfg.p }
        } else {
            crate::particle::SimMode::FullCs
        },
        kernel: cfg.kernel.to_spec()?,
        stepper: StepperSpec::new(Scheme::Rk4, cfg.dt, cfg.substeps)?,
        t_final: cfg.t_final,
        seed: cfg.seed,
        snapshot_times: cfg.snapshot_times.clone(),
        diag_stride: cfg.diag_stride,
    };
    let traj = crate::particle::simulate(&ens, &spec)?;
    Ok((ens, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{GridConfig, KernelConfig, ParamConfig, ScanConfig};
    use crate::harness::init::InitialDistribution;

    fn homogeneous_cfg(n: usize, n_replicates: usize) -> ScenarioConfig {
        ScenarioConfig {
            scenario: ScenarioKind::Homogeneous,
            n,
            p: 2,
            dt: 1e-2,
            t_final: 0.5,
            gpc_order: 3,
            quad_order: None,
            seed: 12345,
            n_replicates,
            substeps: 1,
            diag_stride: 1,
            snapshot_times: vec![],
            out_dir: None,
            kernel: KernelConfig {
                family: "constant".to_string(),
                kappa: 1.0,
                gamma_base: 0.5,
                gamma_slope: 0.01,
                psi0: None,
                psi_m: None,
                lip: None,
                r_max: 10.0,
                radii: vec![],
                values: vec![],
            },
            param: ParamConfig { distribution: "uniform".to_string(), a: 0.0, b: 1.0 },
            init: Some(InitialDistribution::Bimodal1dV { sigma2: 0.1, mu: 0.5 }),
            grid: GridConfig::default(),
            scan: ScanConfig::default(),
        }
    }

    #[test]
    fn homogeneous_temperatures_track_the_reference() {
        let cfg = homogeneous_cfg(2048, 8);
        let result = run_homogeneous(&cfg).unwrap();
        assert!((result.t_ref - 0.2112279).abs() / 0.2112279 < 1e-2);
        for &t in &result.temps {
            assert!((t - result.t_ref).abs() / result.t_ref < 0.2, "temp {t}");
        }
        assert!(result.err_tv < 1.0, "err_tv {}", result.err_tv);
        assert!(result.out_of_domain < 1e-6);
        assert!((result.mean_hist.total_mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_time_homogeneous_matches_initial_temperature() {
        let mut cfg = homogeneous_cfg(4096, 6);
        cfg.t_final = 0.0;
        let result = run_homogeneous(&cfg).unwrap();
        // Sampling error of the variance at n = 4096 stays within a few
        // percent of the closed-form initial temperature 0.35.
        assert!((result.t_ref - 0.35).abs() < 2e-3);
        let spread = (result.mse_t).sqrt();
        assert!(spread < 0.05 * 0.35, "spread {spread}");
    }

    #[test]
    fn cs1d_momentum_is_conserved_per_mode() {
        let mut cfg = homogeneous_cfg(256, 1);
        cfg.scenario = ScenarioKind::Cs1d;
        cfg.kernel = KernelConfig {
            family: "inverse-power".to_string(),
            kappa: 1.0,
            gamma_base: 0.1,
            gamma_slope: 0.05,
            psi0: None,
            psi_m: None,
            lip: None,
            r_max: 10.0,
            radii: vec![],
            values: vec![],
        };
        cfg.param = ParamConfig { distribution: "uniform".to_string(), a: -1.0, b: 1.0 };
        cfg.init = None;
        cfg.t_final = 0.5;
        cfg.diag_stride = 10;
        let result = run_cs(&cfg).unwrap();
        let (_, first) = &result.record.mode_momenta.first().unwrap();
        let (_, last) = &result.record.mode_momenta.last().unwrap();
        for (m0, mt) in first.iter().zip(last) {
            for (a, b) in m0.iter().zip(mt) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
        assert_eq!(result.histograms.len(), 1);
        let (_, hist, out) = &result.histograms[0];
        assert!((hist.total_mass() + out - 1.0).abs() < 1e-9);
    }

    #[test]
    fn epsilon_scan_covers_the_population_list() {
        let mut cfg = homogeneous_cfg(64, 1);
        cfg.scenario = ScenarioKind::EpsilonScan;
        cfg.scan.n_list = vec![16, 32];
        cfg.scan.k = 2;
        cfg.scan.trials = 2000;
        let rows = run_epsilon_scan(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].epsilon_hat >= rows[1].epsilon_hat - 0.05);
    }
}
