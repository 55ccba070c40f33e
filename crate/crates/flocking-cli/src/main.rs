//! Command-line driver: runs scenarios from a config file and writes CSV
//! bundles plus a resolved-config JSON sidecar into a run directory.

use clap::{Args, Parser, Subcommand};
use flocking::error::{Error, Result};
use flocking::gpc::gaussian_smooth;
use flocking::harness::config::{ScenarioConfig, ScenarioKind};
use flocking::harness::experiments::{
    run_cs, run_dt_scan, run_epsilon_scan, run_homogeneous, run_n_scan, run_p_scan, run_particle,
    run_tau_scan,
};
use flocking::harness::io;
use flocking::metrics::{wasserstein_assignment, AssignmentOptions, Samples};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "flocking", about = "flocking dynamics, random batches and chaos expansions", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario config file (TOML, or JSON with .json extension).
    #[arg(long)]
    config: PathBuf,
    /// Seed pinning all randomness of the run (mandatory: results are
    /// Monte Carlo and unreproducible without it).
    #[arg(long)]
    seed: u64,
    /// Output directory (defaults to a timestamped directory under
    /// FLOCKING_OUT_ROOT or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the particle count.
    #[arg(long)]
    n: Option<usize>,
    /// Override the batch size.
    #[arg(long)]
    p: Option<usize>,
    /// Override the interval length.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the final time.
    #[arg(long)]
    t_final: Option<f64>,
    /// Override the replicate count.
    #[arg(long)]
    replicates: Option<usize>,
    /// Override the diagnostics stride.
    #[arg(long)]
    diag_stride: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-coupling particle run.
    Simulate(RunArgs),
    /// Random-batch particle run.
    Rbm(RunArgs),
    /// Mean-field sample-pool run.
    Meanfield(RunArgs),
    /// Unclean-probability estimate over the configured population list.
    Epsilon(RunArgs),
    /// Chaos-expansion run (homogeneous, cs1d or cs2d scenario).
    Gpc {
        #[command(flatten)]
        args: RunArgs,
        /// Also write Gaussian-smoothed copies of the histograms
        /// (plotting aid; never used in metrics).
        #[arg(long)]
        smooth: bool,
    },
    /// Parameter scan (scenario chooses n/p/dt/epsilon/tau).
    Scan(RunArgs),
    /// Distances between two CSV files (snapshot or histogram format).
    Metrics {
        /// w2 (samples) or tv (histograms).
        #[arg(long)]
        kind: String,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Transport order.
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Exact-assignment cap.
        #[arg(long, default_value_t = 512)]
        cap: usize,
        /// Subsample replicates above the cap.
        #[arg(long, default_value_t = 8)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_path(&args.config)?;
    cfg.seed = args.seed;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(t) = args.t_final {
        cfg.t_final = t;
    }
    if let Some(r) = args.replicates {
        cfg.n_replicates = r;
    }
    if let Some(s) = args.diag_stride {
        cfg.diag_stride = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(args: &RunArgs, name: &str) -> Result<PathBuf> {
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        return Ok(dir.clone());
    }
    let root = std::env::var("FLOCKING_OUT_ROOT").unwrap_or_else(|_| "runs".to_string());
    io::create_run_dir(Path::new(&root), name)
}

fn sidecar(dir: &Path, cfg: &ScenarioConfig) -> Result<()> {
    io::write_json(&dir.join("config.json"), cfg)
}

fn particle_bundle(args: &RunArgs, batched: bool) -> Result<PathBuf> {
    let cfg = load_config(args)?;
    let dir = out_dir(args, if batched { "rbm" } else { "simulate" })?;
    sidecar(&dir, &cfg)?;
    let (_, traj) = run_particle(&cfg, batched)?;
    io::write_trajectory_csv(&dir.join("trajectory.csv"), cfg.dim(), &traj.times, &traj.diagnostics)?;
    for (t, snap) in &traj.snapshots {
        io::write_snapshot_csv(&dir.join(format!("snapshot-t{t:.3}.csv")), snap)?;
    }
    let approx = traj.diagnostics.iter().any(|d| d.approximate);
    io::write_json(
        &dir.join("summary.json"),
        &serde_json::json!({ "diameters_subsampled": approx, "steps": traj.times.len() - 1 }),
    )?;
    Ok(dir)
}

fn meanfield_bundle(args: &RunArgs) -> Result<PathBuf> {
    use flocking::harness::sample_initial;
    use flocking::integrators::{Scheme, StepperSpec};
    use flocking::meanfield::qinf_step;
    use flocking::rng;

    let cfg = load_config(args)?;
    let dir = out_dir(args, "meanfield")?;
    sidecar(&dir, &cfg)?;
    let dist = cfg.initial_distribution();
    let dim = dist.dim();
    let pool_m = cfg.scan.pool_m;
    let ens = sample_initial(&dist, pool_m, dim, rng::derive_seed(cfg.seed, &[0x696e69]))?;
    let mut pool = flocking::meanfield::SamplePool::from_ensemble(&ens);
    let kernel = cfg.kernel.to_spec()?;
    let stepper = StepperSpec::new(Scheme::Rk4, cfg.dt, cfg.substeps)?;
    let n_steps = (cfg.t_final / cfg.dt).round() as usize;
    let mut rows = Vec::with_capacity(n_steps + 1);
    let record = |pool: &flocking::meanfield::SamplePool, rows: &mut Vec<Vec<String>>| {
        let mean_v = pool.mean_velocity();
        let mut row = vec![io::fmt_f64(pool.time)];
        row.extend(mean_v.iter().map(|&m| io::fmt_f64(m)));
        row.push(io::fmt_f64(pool.velocity_second_moment()));
        rows.push(row);
    };
    record(&pool, &mut rows);
    for step in 0..n_steps {
        pool = qinf_step(&pool, cfg.p, &kernel, &stepper, cfg.dt, cfg.seed, step as u64)?;
        record(&pool, &mut rows);
    }
    let mut header: Vec<String> = vec!["t".to_string()];
    for c in 0..dim {
        header.push(format!("mean_v_{c}"));
    }
    header.push("second_moment".to_string());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    io::write_csv(&dir.join("pool_moments.csv"), &header_refs, &rows)?;
    io::write_pool_csv(&dir.join("pool_final.csv"), &pool)?;
    Ok(dir)
}

fn epsilon_bundle(args: &RunArgs) -> Result<PathBuf> {
    let cfg = load_config(args)?;
    let dir = out_dir(args, "epsilon")?;
    sidecar(&dir, &cfg)?;
    let rows = run_epsilon_scan(&cfg)?;
    io::write_epsilon_csv(&dir.join("epsilon.csv"), &rows)?;
    let impossible: Vec<usize> = rows
        .iter()
        .filter(|r| r.cleanliness_impossible)
        .map(|r| r.n)
        .collect();
    io::write_json(
        &dir.join("summary.json"),
        &serde_json::json!({
            "invariant_violations": rows.iter().map(|r| r.invariant_violations).sum::<usize>(),
            "cleanliness_impossible_for": impossible,
        }),
    )?;
    Ok(dir)
}

fn gpc_bundle(args: &RunArgs, smooth: bool) -> Result<PathBuf> {
    let cfg = load_config(args)?;
    let dir = out_dir(args, "gpc")?;
    sidecar(&dir, &cfg)?;
    match cfg.scenario {
        ScenarioKind::Homogeneous => {
            let result = run_homogeneous(&cfg)?;
            io::write_kinetic_csv(&dir.join("kinetic_reference.csv"), &result.kinetic.samples)?;
            io::write_density_csv(&dir.join("kinetic_density.csv"), &result.kinetic.final_density)?;
            let temp_rows: Vec<Vec<String>> = result
                .temps
                .iter()
                .enumerate()
                .map(|(i, &t)| vec![i.to_string(), io::fmt_f64(t)])
                .collect();
            io::write_csv(&dir.join("temperatures.csv"), &["replicate", "temperature"], &temp_rows)?;
            io::write_histogram_csv(&dir.join("expected_density.csv"), &result.mean_hist)?;
            io::write_histogram_csv(&dir.join("reference_density.csv"), &result.ref_hist)?;
            for (t, hist) in &result.snapshots {
                io::write_histogram_csv(&dir.join(format!("density-t{t:.3}.csv")), hist)?;
                if smooth {
                    io::write_histogram_csv(
                        &dir.join(format!("density-t{t:.3}-smooth.csv")),
                        &gaussian_smooth(hist),
                    )?;
                }
            }
            io::write_json(
                &dir.join("summary.json"),
                &serde_json::json!({
                    "t_ref": result.t_ref,
                    "mse_t": result.mse_t,
                    "mse_stderr": result.mse_stderr,
                    "err_tv": result.err_tv,
                    "out_of_domain_mass": result.out_of_domain,
                }),
            )?;
        }
        ScenarioKind::Cs1d | ScenarioKind::Cs2d => {
            let result = run_cs(&cfg)?;
            for (t, hist, out_mass) in &result.histograms {
                io::write_histogram_csv(&dir.join(format!("density-t{t:.3}.csv")), hist)?;
                if smooth {
                    io::write_histogram_csv(
                        &dir.join(format!("density-t{t:.3}-smooth.csv")),
                        &gaussian_smooth(hist),
                    )?;
                }
                let _ = out_mass;
            }
            let k1 = cfg.gpc_order + 1;
            let dim = cfg.dim();
            let mut header: Vec<String> = vec!["t".to_string()];
            for l in 0..k1 {
                for c in 0..dim {
                    header.push(format!("momentum_m{l}_{c}"));
                }
            }
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<String>> = result
                .record
                .mode_momenta
                .iter()
                .map(|(t, modes)| {
                    let mut row = vec![io::fmt_f64(*t)];
                    for m in modes {
                        row.extend(m.iter().map(|&x| io::fmt_f64(x)));
                    }
                    row
                })
                .collect();
            io::write_csv(&dir.join("mode_momenta.csv"), &header_refs, &rows)?;
            let times: Vec<f64> = result.record.diags.iter().map(|(t, _)| *t).collect();
            let diags: Vec<_> = result.record.diags.iter().map(|(_, d)| d.clone()).collect();
            io::write_trajectory_csv(&dir.join("mode0_trajectory.csv"), dim, &times, &diags)?;
            io::write_gpc_snapshot_csv(&dir.join("gpc_final.csv"), &result.record.final_state)?;
        }
        other => {
            return Err(Error::config(format!(
                "gpc subcommand expects homogeneous/cs1d/cs2d, got {other:?}"
            )))
        }
    }
    Ok(dir)
}

fn scan_bundle(args: &RunArgs) -> Result<PathBuf> {
    let cfg = load_config(args)?;
    let dir = out_dir(args, "scan")?;
    sidecar(&dir, &cfg)?;
    match cfg.scenario {
        ScenarioKind::NScan | ScenarioKind::PScan | ScenarioKind::DtScan => {
            let (rows, label) = match cfg.scenario {
                ScenarioKind::NScan => (run_n_scan(&cfg)?, "N"),
                ScenarioKind::PScan => (run_p_scan(&cfg)?, "p"),
                _ => (run_dt_scan(&cfg)?, "dt"),
            };
            let header = [label, "n_replicates", "mse_t", "mse_stderr", "err_tv", "t_ref"];
            let data: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        if label == "dt" { io::fmt_f64(r.value) } else { format!("{}", r.value as usize) },
                        r.n_replicates.to_string(),
                        io::fmt_f64(r.mse_t),
                        io::fmt_f64(r.mse_stderr),
                        r.err_tv.map(io::fmt_f64).unwrap_or_default(),
                        io::fmt_f64(r.t_ref),
                    ]
                })
                .collect();
            io::write_csv(&dir.join("scan.csv"), &header, &data)?;
        }
        ScenarioKind::EpsilonScan => {
            let rows = run_epsilon_scan(&cfg)?;
            io::write_epsilon_csv(&dir.join("epsilon.csv"), &rows)?;
        }
        ScenarioKind::TauScan => {
            let table = run_tau_scan(&cfg)?;
            io::write_theorem2_csv(&dir.join("theorem2.csv"), &table)?;
            io::write_json(
                &dir.join("summary.json"),
                &serde_json::json!({
                    "sampling_floor": table.sampling_floor,
                    "slope": table.slope,
                    "corrected_gaps": table.rows.iter().map(|r| r.w2_corrected).collect::<Vec<_>>(),
                    "above_floor": table.rows.iter().map(|r| r.above_floor).collect::<Vec<_>>(),
                }),
            )?;
        }
        other => {
            return Err(Error::config(format!(
                "scan subcommand expects a *_scan scenario, got {other:?}"
            )))
        }
    }
    Ok(dir)
}

fn read_samples_csv(path: &Path) -> Result<Samples> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::domain(format!("{}: empty file", path.display())))?;
    let dim = header.split(',').count();
    let mut data = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::domain(format!("{}: bad float: {e}", path.display())))?;
            data.push(v);
        }
    }
    Samples::new(dim, data)
}

fn metrics_command(kind: &str, a: &Path, b: &Path, q: f64, cap: usize, replicates: usize, seed: u64) -> Result<()> {
    match kind {
        "w2" => {
            let sa = read_samples_csv(a)?;
            let sb = read_samples_csv(b)?;
            let opts = AssignmentOptions { cap, replicates: Some(replicates), seed };
            let est = wasserstein_assignment(&sa, &sb, q, &opts)?;
            match est.stderr {
                Some(se) => println!("w2 = {} +- {se} ({} replicates)", est.value, est.n_replicates),
                None => println!("w2 = {}", est.value),
            }
        }
        "tv" => {
            // Histogram CSVs carry cell centers; rebuild grids is overkill
            // for a distance, so require identical center columns and
            // integrate |density difference| with the common cell volume.
            let ha = read_samples_csv(a)?;
            let hb = read_samples_csv(b)?;
            if ha.dim != hb.dim || ha.len() != hb.len() {
                return Err(Error::GridMismatch("histogram files differ in shape".to_string()));
            }
            let axes = ha.dim - 1;
            let mut centers_a: Vec<Vec<f64>> = Vec::new();
            for i in 0..ha.len() {
                if ha.row(i)[..axes] != hb.row(i)[..axes] {
                    return Err(Error::GridMismatch("histogram files differ in cell centers".to_string()));
                }
                centers_a.push(ha.row(i)[..axes].to_vec());
            }
            // Edge length from the smallest positive spacing of the first axis.
            let mut firsts: Vec<f64> = centers_a.iter().map(|c| c[0]).collect();
            firsts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            firsts.dedup();
            let h = firsts
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            if !h.is_finite() {
                return Err(Error::GridMismatch("cannot infer the cell edge length".to_string()));
            }
            let vol = h.powi(axes as i32);
            let tv: f64 = (0..ha.len())
                .map(|i| (ha.row(i)[axes] - hb.row(i)[axes]).abs())
                .sum::<f64>()
                * vol;
            println!("tv = {tv}");
        }
        other => return Err(Error::usage(format!("unknown metric kind '{other}'"))),
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let dir = match &cli.command {
        Command::Simulate(args) => Some(particle_bundle(args, false)?),
        Command::Rbm(args) => Some(particle_bundle(args, true)?),
        Command::Meanfield(args) => Some(meanfield_bundle(args)?),
        Command::Epsilon(args) => Some(epsilon_bundle(args)?),
        Command::Gpc { args, smooth } => Some(gpc_bundle(args, *smooth)?),
        Command::Scan(args) => Some(scan_bundle(args)?),
        Command::Metrics { kind, a, b, q, cap, replicates, seed } => {
            metrics_command(kind, a, b, *q, *cap, *replicates, *seed)?;
            None
        }
    };
    if let Some(dir) = dir {
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
