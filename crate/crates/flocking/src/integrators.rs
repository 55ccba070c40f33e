//! Fixed-step explicit time steppers over flat state vectors.
//!
//! Right-hand sides are autonomous: `rhs(state, out)` writes the derivative
//! into `out`. Every scheme here is a linear combination of rhs evaluations,
//! so linear first integrals of the rhs (total momentum, batch momenta) are
//! preserved to rounding.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
    Euler,
}

/// Stepping policy: outer step `dt` and the number of sub-steps used to
/// integrate each outer interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub substeps: usize,
}

impl StepperSpec {
    pub fn new(scheme: Scheme, dt: f64, substeps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config("stepper: dt must be positive and finite"));
        }
        if substeps == 0 {
            return Err(Error::config("stepper: substeps must be at least 1"));
        }
        Ok(StepperSpec { scheme, dt, substeps })
    }

    pub fn rk4(dt: f64) -> Self {
        StepperSpec::new(Scheme::Rk4, dt, 1).expect("rk4 stepper")
    }

    /// Integrate one interval of length `tau` in `self.substeps` sub-steps.
    pub fn integrate_interval<F>(&self, rhs: F, state: &[f64], tau: f64) -> Result<Vec<f64>>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let h = tau / self.substeps as f64;
        let mut current = state.to_vec();
        for _ in 0..self.substeps {
            current = match self.scheme {
                Scheme::Rk4 => rk4_step(&rhs, &current, h)?,
                Scheme::Euler => euler_step(&rhs, &current, h)?,
            };
        }
        Ok(current)
    }
}

fn check_finite(stage: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numerical(0, format!("non-finite value in {stage}")))
    }
}

/// Classical four-stage Runge-Kutta update.
pub fn rk4_step<F>(rhs: F, state: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = state.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    rhs(state, &mut k1);
    check_finite("rk4 stage 1", &k1)?;
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * dt * k1[i];
    }
    rhs(&tmp, &mut k2);
    check_finite("rk4 stage 2", &k2)?;
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * dt * k2[i];
    }
    rhs(&tmp, &mut k3);
    check_finite("rk4 stage 3", &k3)?;
    for i in 0..n {
        tmp[i] = state[i] + dt * k3[i];
    }
    rhs(&tmp, &mut k4);
    check_finite("rk4 stage 4", &k4)?;

    let sixth = dt / 6.0;
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = state[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Forward Euler update; first order, exposed for validation runs.
pub fn euler_step<F>(rhs: F, state: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = state.len();
    let mut k = vec![0.0; n];
    rhs(state, &mut k);
    check_finite("euler stage", &k)?;
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = state[i] + dt * k[i];
    }
    Ok(out)
}
