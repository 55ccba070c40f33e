//! Initial-condition samplers.

use crate::error::{Error, Result};
use crate::particle::Ensemble;
use crate::rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Families of initial laws used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialDistribution {
    /// 1-D, positions at zero: velocities from the symmetric two-bump
    /// mixture `N(mu, sigma2) / N(-mu, sigma2)` with equal weights.
    Bimodal1dV { sigma2: f64, mu: f64 },
    /// 1-D: `x ~ N(0, sigma_x2)`, `v` from the two-bump mixture at
    /// `+/- mu_v` with variance `sigma_v2`.
    BivariateBimodal {
        sigma_x2: f64,
        sigma_v2: f64,
        #[serde(default = "default_mu_v")]
        mu_v: f64,
    },
    /// 2-D: positions area-uniform on the annulus `r_min <= |x| <= r_max`,
    /// velocities the unit counterclockwise tangent.
    Annulus2d { r_min: f64, r_max: f64 },
    /// All particles at one phase-space point.
    PointMass { x: Vec<f64>, v: Vec<f64> },
    /// Isotropic Gaussians in position and velocity.
    CustomGaussian {
        mean_x: Vec<f64>,
        mean_v: Vec<f64>,
        sigma_x2: f64,
        sigma_v2: f64,
    },
}

fn default_mu_v() -> f64 {
    1.0
}

impl InitialDistribution {
    /// The spatial dimension this family produces.
    pub fn dim(&self) -> usize {
        match self {
            InitialDistribution::Bimodal1dV { .. } | InitialDistribution::BivariateBimodal { .. } => 1,
            InitialDistribution::Annulus2d { .. } => 2,
            InitialDistribution::PointMass { x, .. } => x.len(),
            InitialDistribution::CustomGaussian { mean_x, .. } => mean_x.len(),
        }
    }
}

/// Draw `n` i.i.d. samples of the distribution.
pub fn sample_initial(dist: &InitialDistribution, n: usize, dim: usize, seed: u64) -> Result<Ensemble> {
    if dist.dim() != dim {
        return Err(Error::config(format!(
            "initial distribution is {}-dimensional, run asks for {dim}",
            dist.dim()
        )));
    }
    if n == 0 {
        return Err(Error::config("cannot sample an empty ensemble"));
    }
    let mut rng = rng::stream(seed, &[0x696e6974]);
    let normal = StandardNormal;
    let mut positions = vec![0.0; n * dim];
    let mut velocities = vec![0.0; n * dim];
    match dist {
        InitialDistribution::Bimodal1dV { sigma2, mu } => {
            let sigma = sigma2.sqrt();
            for i in 0..n {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let g: f64 = normal.sample(&mut rng);
                velocities[i] = sign * mu + sigma * g;
            }
        }
        InitialDistribution::BivariateBimodal { sigma_x2, sigma_v2, mu_v } => {
            let sx = sigma_x2.sqrt();
            let sv = sigma_v2.sqrt();
            for i in 0..n {
                let gx: f64 = normal.sample(&mut rng);
                positions[i] = sx * gx;
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let gv: f64 = normal.sample(&mut rng);
                velocities[i] = sign * mu_v + sv * gv;
            }
        }
        InitialDistribution::Annulus2d { r_min, r_max } => {
            if !(0.0 <= *r_min && r_min < r_max) {
                return Err(Error::config("annulus: need 0 <= r_min < r_max"));
            }
            for i in 0..n {
                // Area-uniform radius, uniform angle; velocity is the unit
                // counterclockwise tangent at the sampled position.
                let u: f64 = rng.gen();
                let r = (r_min * r_min + (r_max * r_max - r_min * r_min) * u).sqrt();
                let phi = rng.gen::<f64>() * std::f64::consts::TAU;
                let x = [r * phi.cos(), r * phi.sin()];
                let norm = (x[0] * x[0] + x[1] * x[1]).sqrt();
                positions[i * 2] = x[0];
                positions[i * 2 + 1] = x[1];
                velocities[i * 2] = -x[1] / norm;
                velocities[i * 2 + 1] = x[0] / norm;
            }
        }
        InitialDistribution::PointMass { x, v } => {
            if x.len() != dim || v.len() != dim {
                return Err(Error::config("point mass: coordinate arrays must match dim"));
            }
            for i in 0..n {
                positions[i * dim..(i + 1) * dim].copy_from_slice(x);
                velocities[i * dim..(i + 1) * dim].copy_from_slice(v);
            }
        }
        InitialDistribution::CustomGaussian { mean_x, mean_v, sigma_x2, sigma_v2 } => {
            if mean_x.len() != dim || mean_v.len() != dim {
                return Err(Error::config("gaussian: mean arrays must match dim"));
            }
            let sx = sigma_x2.sqrt();
            let sv = sigma_v2.sqrt();
            for i in 0..n {
                for c in 0..dim {
                    let gx: f64 = normal.sample(&mut rng);
                    let gv: f64 = normal.sample(&mut rng);
                    positions[i * dim + c] = mean_x[c] + sx * gx;
                    velocities[i * dim + c] = mean_v[c] + sv * gv;
                }
            }
        }
    }
    Ensemble::new(dim, positions, velocities)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_rows_are_identical() {
        let dist = InitialDistribution::PointMass { x: vec![1.0, 2.0], v: vec![-0.5, 0.25] };
        let ens = sample_initial(&dist, 10, 2, 1).unwrap();
        for i in 0..10 {
            assert_eq!(ens.position(i), &[1.0, 2.0]);
            assert_eq!(ens.velocity(i), &[-0.5, 0.25]);
        }
    }

    #[test]
    fn bimodal_moments_match_mixture_closed_form() {
        // Mixture of N(+-mu, sigma2) with equal weights: mean 0, variance
        // sigma2 + mu^2 = 0.35.
        let n = 100_000;
        let dist = InitialDistribution::Bimodal1dV { sigma2: 0.1, mu: 0.5 };
        let ens = sample_initial(&dist, n, 1, 7).unwrap();
        let mean: f64 = ens.velocities.iter().sum::<f64>() / n as f64;
        let var: f64 = ens.velocities.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * (0.35f64 / n as f64).sqrt());
        assert!((var - 0.35).abs() / 0.35 < 0.05, "variance {var}");
        assert!(ens.positions.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bivariate_bimodal_moments() {
        let n = 100_000;
        let dist = InitialDistribution::BivariateBimodal { sigma_x2: 0.5, sigma_v2: 0.2, mu_v: 1.0 };
        let ens = sample_initial(&dist, n, 1, 9).unwrap();
        let x_var: f64 = ens.positions.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let v_var: f64 = ens.velocities.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((x_var - 0.5).abs() / 0.5 < 0.05);
        assert!((v_var - 1.2).abs() / 1.2 < 0.05);
    }

    #[test]
    fn annulus_positions_and_tangential_velocities() {
        let n = 5000;
        let dist = InitialDistribution::Annulus2d { r_min: 0.5, r_max: 1.0 };
        let ens = sample_initial(&dist, n, 2, 11).unwrap();
        for i in 0..n {
            let x = ens.position(i);
            let v = ens.velocity(i);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!((0.5..=1.0 + 1e-12).contains(&r), "radius {r}");
            let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!((speed - 1.0).abs() < 1e-12);
            let dot = x[0] * v[0] + x[1] * v[1];
            assert!(dot.abs() < 1e-12);
            // Counterclockwise: the cross product z-component is positive.
            assert!(x[0] * v[1] - x[1] * v[0] > 0.0);
        }
        // Area-uniform: the inner half-annulus (r < ~0.79) carries half the
        // mass.
        let r_half = (0.5f64 * (0.25 + 1.0)).sqrt();
        let inner = (0..n)
            .filter(|&i| {
                let x = ens.position(i);
                (x[0] * x[0] + x[1] * x[1]).sqrt() < r_half
            })
            .count();
        let frac = inner as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.03, "inner fraction {frac}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let dist = InitialDistribution::Annulus2d { r_min: 0.5, r_max: 1.0 };
        assert!(sample_initial(&dist, 10, 1, 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let dist = InitialDistribution::CustomGaussian {
            mean_x: vec![0.0],
            mean_v: vec![0.0],
            sigma_x2: 1.0,
            sigma_v2: 1.0,
        };
        let a = sample_initial(&dist, 32, 1, 5).unwrap();
        let b = sample_initial(&dist, 32, 1, 5).unwrap();
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.velocities, b.velocities);
    }
}
