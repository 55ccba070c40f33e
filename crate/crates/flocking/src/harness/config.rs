//! Scenario configuration: file format, defaults and validation.
//!
//! Configs load from TOML or JSON (by extension); command-line flags
//! override file keys. Every experiment writes the fully resolved config
//! next to its outputs as a JSON sidecar.

use crate::error::{Error, Result};
use crate::gpc::RandomParamSpec;
use crate::harness::init::InitialDistribution;
use crate::kernels::{KernelFamily, KernelSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Homogeneous,
    Cs1d,
    Cs2d,
    EpsilonScan,
    TauScan,
    NScan,
    PScan,
    DtScan,
}

/// Kernel block of the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// One of `constant`, `inverse-power`, `tabulated`.
    pub family: String,
    #[serde(default = "one")]
    pub kappa: f64,
    /// Base coefficient: the constant value, or the inverse-power exponent.
    #[serde(default)]
    pub gamma_base: f64,
    /// Slope of the parameter dependence; zero means deterministic.
    #[serde(default)]
    pub gamma_slope: f64,
    /// Claimed lower bound; derived from `r_max` when missing.
    pub psi0: Option<f64>,
    /// Claimed upper bound.
    #[serde(alias = "psiM")]
    pub psi_m: Option<f64>,
    pub lip: Option<f64>,
    /// Radius up to which the bounds are declared (inverse-power family).
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub values: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_r_max() -> f64 {
    10.0
}

impl KernelConfig {
    pub fn to_spec(&self) -> Result<KernelSpec> {
        let mut spec = match self.family.as_str() {
            "constant" => KernelSpec::stochastic_constant(self.kappa, self.gamma_base, self.gamma_slope),
            "inverse-power" => KernelSpec::stochastic_inverse_power(
                self.kappa,
                self.gamma_base,
                self.gamma_slope,
                self.r_max,
            ),
            "tabulated" => KernelSpec::new(
                KernelFamily::Tabulated { radii: self.radii.clone(), values: self.values.clone() },
                self.kappa,
                self.psi0.unwrap_or(1e-12),
                self.psi_m.unwrap_or(1.0),
                self.lip.unwrap_or(1.0),
            )?,
            other => return Err(Error::config(format!("unknown kernel family '{other}'"))),
        };
        if let Some(psi0) = self.psi0 {
            spec.psi0 = psi0;
        }
        if let Some(psi_m) = self.psi_m {
            spec.psi_m = psi_m;
        }
        if let Some(lip) = self.lip {
            spec.lip = lip;
        }
        Ok(spec)
    }
}

/// Random parameter block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamConfig {
    #[serde(default = "uniform_name")]
    pub distribution: String,
    pub a: f64,
    pub b: f64,
}

fn uniform_name() -> String {
    "uniform".to_string()
}

impl ParamConfig {
    pub fn to_spec(&self) -> Result<RandomParamSpec> {
        match self.distribution.as_str() {
            "uniform" => RandomParamSpec::uniform(self.a, self.b),
            other => Err(Error::config(format!("unsupported parameter law '{other}'"))),
        }
    }
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig { distribution: uniform_name(), a: -1.0, b: 1.0 }
    }
}

/// Grid block: phase-space histograms and the velocity reference grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_grid_min")]
    pub min: f64,
    #[serde(default = "default_grid_max")]
    pub max: f64,
    /// Cells per axis of phase-space histograms.
    #[serde(default = "default_cells")]
    pub cells_per_axis: usize,
    /// Cells of the 1-D velocity reference grid.
    #[serde(default = "default_v_cells")]
    pub v_cells: usize,
}

fn default_grid_min() -> f64 {
    -3.0
}

fn default_grid_max() -> f64 {
    3.0
}

fn default_cells() -> usize {
    100
}

fn default_v_cells() -> usize {
    600
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            min: default_grid_min(),
            max: default_grid_max(),
            cells_per_axis: default_cells(),
            v_cells: default_v_cells(),
        }
    }
}

/// Scan block: lists and sizes for the scan scenarios.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub p_list: Vec<usize>,
    #[serde(default)]
    pub dt_list: Vec<f64>,
    #[serde(default)]
    pub tau_list: Vec<f64>,
    /// Batch steps for the unclean-probability scan.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_n_ref")]
    pub n_ref: usize,
    #[serde(default = "default_pool_m")]
    pub pool_m: usize,
    #[serde(default = "default_assignment_size")]
    pub assignment_size: usize,
    #[serde(default = "default_w2_replicates")]
    pub w2_replicates: usize,
}

fn default_k() -> usize {
    3
}

fn default_trials() -> usize {
    100_000
}

fn default_n_ref() -> usize {
    8192
}

fn default_pool_m() -> usize {
    4096
}

fn default_assignment_size() -> usize {
    1024
}

fn default_w2_replicates() -> usize {
    8
}

/// Whole scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_p")]
    pub p: usize,
    /// Outer interval length (batches are re-drawn every interval).
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    /// Chaos expansion order.
    #[serde(default = "default_order")]
    pub gpc_order: usize,
    /// Quadrature order; defaults to `gpc_order + 3`.
    pub quad_order: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_stride")]
    pub diag_stride: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    pub out_dir: Option<String>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub param: ParamConfig,
    pub init: Option<InitialDistribution>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub scan: ScanConfig,
}

fn default_n() -> usize {
    10_000
}

fn default_p() -> usize {
    2
}

fn default_dt() -> f64 {
    1e-2
}

fn default_t_final() -> f64 {
    0.5
}

fn default_order() -> usize {
    3
}

fn default_replicates() -> usize {
    100
}

fn default_substeps() -> usize {
    1
}

fn default_stride() -> usize {
    1
}

impl ScenarioConfig {
    /// Parse a TOML (default) or JSON (`.json`) config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ScenarioConfig = if path.extension().and_then(|s| s.to_str()) == Some("json") {
            serde_json::from_str(&text).map_err(|e| Error::config(format!("bad JSON config: {e}")))?
        } else {
            toml::from_str(&text).map_err(|e| Error::config(format!("bad TOML config: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The spatial dimension of the configured scenario.
    pub fn dim(&self) -> usize {
        match self.scenario {
            ScenarioKind::Cs2d => 2,
            _ => self.init.as_ref().map(|d| d.dim()).unwrap_or(1),
        }
    }

    /// The initial distribution, falling back to the scenario's canonical
    /// choice.
    pub fn initial_distribution(&self) -> InitialDistribution {
        if let Some(init) = &self.init {
            return init.clone();
        }
        match self.scenario {
            ScenarioKind::Cs1d => {
                InitialDistribution::BivariateBimodal { sigma_x2: 0.5, sigma_v2: 0.2, mu_v: 1.0 }
            }
            ScenarioKind::Cs2d => InitialDistribution::Annulus2d { r_min: 0.5, r_max: 1.0 },
            _ => InitialDistribution::Bimodal1dV { sigma2: 0.1, mu: 0.5 },
        }
    }

    pub fn quadrature_order(&self) -> usize {
        self.quad_order.unwrap_or(self.gpc_order + 3)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_final >= 0.0) {
            return Err(Error::config("need dt > 0 and t_final >= 0"));
        }
        if self.p < 2 && !matches!(self.scenario, ScenarioKind::EpsilonScan) {
            return Err(Error::config("batch size p must be at least 2"));
        }
        if self.n == 0 || self.n % self.p != 0 {
            return Err(Error::config(format!(
                "batch size p = {} must divide n = {}",
                self.p, self.n
            )));
        }
        if self.substeps == 0 || self.diag_stride == 0 {
            return Err(Error::config("substeps and diag_stride must be positive"));
        }
        self.kernel.to_spec()?;
        self.param.to_spec()?;
        Ok(())
    }
}
