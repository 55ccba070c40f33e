//! Communication weights.
//!
//! A kernel maps an inter-particle distance (and optionally a scalar random
//! parameter) to an interaction weight. All kernels used here are bounded,
//! nonincreasing in the distance and Lipschitz; the spec carries the claimed
//! bounds so runs can declare and check an effective positive lower bound on
//! the support they actually visit.

use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Functional form of the weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `psi(r, theta) = base + slope * theta`, independent of the distance.
    Constant { base: f64, slope: f64 },
    /// `psi(r, theta) = (1 + r^2)^(-gamma(theta))` with
    /// `gamma(theta) = gamma_base + gamma_slope * theta`.
    InversePower { gamma_base: f64, gamma_slope: f64 },
    /// Piecewise-linear interpolation of `(radius, value)` knots; clamped to
    /// the end values outside the knot range.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

/// A communication weight together with coupling strength and claimed bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Coupling strength multiplying the whole interaction term.
    pub kappa: f64,
    /// Claimed lower bound of the weight on the radii a run visits.
    pub psi0: f64,
    /// Claimed upper bound (1 unless the kernel is deliberately rescaled).
    pub psi_m: f64,
    /// Claimed Lipschitz constant in the distance argument.
    pub lip: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, kappa: f64, psi0: f64, psi_m: f64, lip: f64) -> Result<Self> {
        if kappa < 0.0 || !kappa.is_finite() {
            return Err(Error::config("kernel: kappa must be finite and nonnegative"));
        }
        if !(psi0 > 0.0) || !(psi_m >= psi0) {
            return Err(Error::config("kernel: bounds must satisfy 0 < psi0 <= psi_m"));
        }
        if lip < 0.0 {
            return Err(Error::config("kernel: Lipschitz constant must be nonnegative"));
        }
        if let KernelFamily::Tabulated { radii, values } = &family {
            if radii.is_empty() || radii.len() != values.len() {
                return Err(Error::config("kernel: tabulated knots must be nonempty and paired"));
            }
            if radii.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config("kernel: tabulated radii must be strictly increasing"));
            }
        }
        Ok(KernelSpec { family, kappa, psi0, psi_m, lip })
    }

    /// Deterministic constant weight `psi == value`.
    pub fn constant(kappa: f64, value: f64) -> Self {
        KernelSpec::new(
            KernelFamily::Constant { base: value, slope: 0.0 },
            kappa,
            value,
            value,
            0.0,
        )
        .expect("constant kernel")
    }

    /// Parameter-dependent constant weight `base + slope * theta`; bounds are
    /// declared for `theta` in `[-1, 1]`.
    pub fn stochastic_constant(kappa: f64, base: f64, slope: f64) -> Self {
        let lo = (base - slope.abs()).min(base + slope.abs());
        let hi = (base - slope.abs()).max(base + slope.abs());
        KernelSpec::new(KernelFamily::Constant { base, slope }, kappa, lo, hi, 0.0)
            .expect("stochastic constant kernel")
    }

    /// Deterministic inverse-power weight with exponent `gamma`, with bounds
    /// declared on `[0, r_max]`.
    pub fn inverse_power(kappa: f64, gamma: f64, r_max: f64) -> Self {
        Self::stochastic_inverse_power(kappa, gamma, 0.0, r_max)
    }

    /// Inverse-power weight with exponent `gamma_base + gamma_slope * theta`,
    /// `theta` in `[-1, 1]`; bounds declared on `[0, r_max]`.
    pub fn stochastic_inverse_power(kappa: f64, gamma_base: f64, gamma_slope: f64, r_max: f64) -> Self {
        let gmax = gamma_base + gamma_slope.abs();
        let psi0 = (1.0 + r_max * r_max).powf(-gmax);
        // max |d/dr (1+r^2)^(-g)| = 2g r (1+r^2)^(-g-1) <= g at r = 1.
        let lip = gmax.max(1e-12);
        KernelSpec::new(
            KernelFamily::InversePower { gamma_base, gamma_slope },
            kappa,
            psi0,
            1.0,
            lip,
        )
        .expect("inverse power kernel")
    }

    /// True when the weight actually depends on the random parameter.
    pub fn is_stochastic(&self) -> bool {
        match &self.family {
            KernelFamily::Constant { slope, .. } => *slope != 0.0,
            KernelFamily::InversePower { gamma_slope, .. } => *gamma_slope != 0.0,
            KernelFamily::Tabulated { .. } => false,
        }
    }

    /// Evaluate the weight at distance `r`.
    ///
    /// `theta` is required for stochastic kernels and ignored by tabulated
    /// ones; deterministic parametric kernels accept it as a no-op.
    pub fn eval(&self, r: f64, theta: Option<f64>) -> Result<f64> {
        if r < 0.0 || !r.is_finite() {
            return Err(Error::domain(format!("kernel evaluated at invalid radius {r}")));
        }
        if self.is_stochastic() && theta.is_none() {
            return Err(Error::usage("stochastic kernel evaluated without a parameter value"));
        }
        let th = theta.unwrap_or(0.0);
        Ok(match &self.family {
            KernelFamily::Constant { base, slope } => base + slope * th,
            KernelFamily::InversePower { gamma_base, gamma_slope } => {
                let gamma = gamma_base + gamma_slope * th;
                (1.0 + r * r).powf(-gamma)
            }
            KernelFamily::Tabulated { radii, values } => interp_clamped(radii, values, r),
        })
    }

    /// Kernel value for a deterministic kernel; errors on stochastic ones.
    pub fn eval_deterministic(&self, r: f64) -> Result<f64> {
        self.eval(r, None)
    }
}

pub(crate) fn interp_clamped(radii: &[f64], values: &[f64], r: f64) -> f64 {
    if r <= radii[0] {
        return values[0];
    }
    if r >= *radii.last().unwrap() {
        return *values.last().unwrap();
    }
    let j = radii.partition_point(|&x| x <= r);
    let (r0, r1) = (radii[j - 1], radii[j]);
    let (v0, v1) = (values[j - 1], values[j]);
    v0 + (v1 - v0) * (r - r0) / (r1 - r0)
}

/// One sampled violation of the declared kernel properties.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub r1: f64,
    pub r2: Option<f64>,
    pub theta: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Bound,
    Monotonicity,
    Lipschitz,
}

/// Result of sampling-based kernel validation; empty `violations` means the
/// claims held at the sampled resolution.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_samples: usize,
    pub r_max: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check bounds, monotonicity and the Lipschitz claim on sampled radii in
/// `[0, r_max]`. Stochastic kernels are sampled with `theta` in `[-1, 1]`,
/// which covers the parameter laws used by the experiments.
pub fn validate_kernel(spec: &KernelSpec, n_samples: usize, r_max: f64, rng_seed: u64) -> ValidationReport {
    const SLACK: f64 = 1e-12;
    let mut rng = rng::stream(rng_seed, &[0x6b65726e]);
    let mut violations = Vec::new();

    let n = n_samples.max(2);
    let mut radii: Vec<f64> = (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect();
    radii.extend((0..n).map(|_| rng.gen::<f64>() * r_max));
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let thetas: Vec<Option<f64>> = if spec.is_stochastic() {
        (0..8).map(|i| Some(-1.0 + 2.0 * i as f64 / 7.0)).collect()
    } else {
        vec![None]
    };

    for &theta in &thetas {
        let values: Vec<f64> = radii
            .iter()
            .map(|&r| spec.eval(r, theta).expect("sampled radius is valid"))
            .collect();
        for (&r, &v) in radii.iter().zip(&values) {
            if v < spec.psi0 - SLACK || v > spec.psi_m + SLACK {
                violations.push(Violation {
                    kind: ViolationKind::Bound,
                    r1: r,
                    r2: None,
                    theta,
                    detail: format!("psi({r}) = {v} outside [{}, {}]", spec.psi0, spec.psi_m),
                });
            }
        }
        // Consecutive sorted radii exercise monotonicity most tightly.
        for w in radii.windows(2).zip(values.windows(2)) {
            let ((r1, r2), (v1, v2)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
            if (v1 - v2) * (r1 - r2) > SLACK {
                violations.push(Violation {
                    kind: ViolationKind::Monotonicity,
                    r1,
                    r2: Some(r2),
                    theta,
                    detail: format!("psi increases from {v1} to {v2} over [{r1}, {r2}]"),
                });
            }
            if (v1 - v2).abs() > spec.lip * (r1 - r2).abs() + SLACK {
                violations.push(Violation {
                    kind: ViolationKind::Lipschitz,
                    r1,
                    r2: Some(r2),
                    theta,
                    detail: format!(
                        "|psi({r1}) - psi({r2})| = {} exceeds lip * {}",
                        (v1 - v2).abs(),
                        (r1 - r2).abs()
                    ),
                });
            }
        }
    }

    ValidationReport { n_samples, r_max, violations }
}
