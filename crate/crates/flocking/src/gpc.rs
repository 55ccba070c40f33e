//! Polynomial chaos machinery for random interaction kernels.
//!
//! A scalar random parameter `theta` enters the kernel; positions and
//! velocities are expanded in polynomials orthonormal under the parameter's
//! law (Legendre chaos for uniform laws). The batch stepper evolves the
//! coefficient vectors of every particle; pair coefficient matrices couple
//! the modes through the kernel and are evaluated by Gauss-Legendre
//! quadrature. Expected phase-space densities are reconstructed by
//! histogramming the particle cloud at every quadrature node.

use crate::error::{Error, Result};
use crate::integrators::StepperSpec;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::particle::{BatchPlan, Ensemble};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Law of the scalar random parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "lowercase")]
pub enum RandomParamSpec {
    Uniform { a: f64, b: f64 },
}

impl RandomParamSpec {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::config("random parameter: need a < b"));
        }
        Ok(RandomParamSpec::Uniform { a, b })
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            RandomParamSpec::Uniform { a, b } => (a, b),
        }
    }
}

/// Orthonormal polynomial basis w.r.t. the parameter law; `phi(0, .) == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpcBasis {
    pub order: usize,
    pub param: RandomParamSpec,
}

impl GpcBasis {
    /// Evaluate `phi_0..phi_order` at `theta` into `out`.
    pub fn eval_all(&self, theta: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.order + 1);
        let (a, b) = self.param.support();
        let s = 2.0 * (theta - a) / (b - a) - 1.0;
        // Legendre recurrence on [-1, 1], normalized by sqrt(2k + 1) so the
        // uniform-law Gram matrix is the identity.
        let mut pm1 = 1.0;
        out[0] = 1.0;
        if self.order == 0 {
            return;
        }
        let mut p = s;
        out[1] = 3f64.sqrt() * s;
        for k in 2..=self.order {
            let kf = k as f64;
            let next = ((2.0 * kf - 1.0) * s * p - (kf - 1.0) * pm1) / kf;
            pm1 = p;
            p = next;
            out[k] = (2.0 * kf + 1.0).sqrt() * p;
        }
    }

    pub fn eval(&self, k: usize, theta: f64) -> f64 {
        let mut buf = vec![0.0; self.order + 1];
        self.eval_all(theta, &mut buf);
        buf[k]
    }
}

/// Build the basis and verify its Gram matrix is the identity to 1e-12
/// under quadrature of order `order + 2`.
pub fn build_basis(param: RandomParamSpec, order: usize) -> Result<GpcBasis> {
    let basis = GpcBasis { order, param };
    let quad = quadrature(param, order + 2)?;
    let gram = gram_matrix(&basis, &quad);
    let k1 = order + 1;
    for l in 0..k1 {
        for k in 0..k1 {
            let expected = if l == k { 1.0 } else { 0.0 };
            if (gram[l * k1 + k] - expected).abs() > 1e-12 {
                return Err(Error::Numerical {
                    step: 0,
                    msg: format!(
                        "basis Gram entry ({l},{k}) = {} deviates from identity",
                        gram[l * k1 + k]
                    ),
                });
            }
        }
    }
    Ok(basis)
}

/// Gram matrix of the basis under the given quadrature, row-major.
pub fn gram_matrix(basis: &GpcBasis, quad: &Quadrature) -> Vec<f64> {
    let k1 = basis.order + 1;
    let mut gram = vec![0.0; k1 * k1];
    let mut phi = vec![0.0; k1];
    for (&node, &w) in quad.nodes.iter().zip(&quad.weights) {
        basis.eval_all(node, &mut phi);
        for l in 0..k1 {
            for k in 0..k1 {
                gram[l * k1 + k] += w * phi[l] * phi[k];
            }
        }
    }
    gram
}

/// Probability-normalized Gauss-Legendre rule on the parameter support:
/// weights sum to one and integrate polynomials of degree `<= 2 q_order - 1`
/// exactly against the uniform law.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn quadrature(param: RandomParamSpec, q_order: usize) -> Result<Quadrature> {
    if q_order == 0 {
        return Err(Error::config("quadrature order must be at least 1"));
    }
    let (a, b) = param.support();
    let n = q_order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Newton iteration on the degree-n Legendre polynomial; roots are
    // symmetric, so solve half and mirror.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    // Map [-1, 1] to [a, b] and normalize weights to a probability rule.
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    for x in nodes.iter_mut() {
        *x = a + (b - a) * (*x + 1.0) / 2.0;
    }
    Ok(Quadrature { nodes, weights })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut pm1 = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * pm1) / kf;
        pm1 = p;
        p = next;
    }
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Uniform rectangular grid with a common edge length on every axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub mins: Vec<f64>,
    pub h: f64,
    pub cells: Vec<usize>,
}

impl PhaseGrid {
    /// Grid covering `[mins, maxs]` with `cells` per axis; every axis must
    /// yield the same edge length.
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if mins.len() != maxs.len() || mins.len() != cells.len() || mins.is_empty() {
            return Err(Error::config("grid: axis arrays must be nonempty and equally long"));
        }
        if cells.iter().any(|&c| c == 0) {
            return Err(Error::config("grid: need at least one cell per axis"));
        }
        let h = (maxs[0] - mins[0]) / cells[0] as f64;
        if !(h > 0.0) {
            return Err(Error::config("grid: bounds must be increasing"));
        }
        for a in 0..mins.len() {
            let ha = (maxs[a] - mins[a]) / cells[a] as f64;
            if ((ha - h) / h).abs() > 1e-9 {
                return Err(Error::config("grid: all axes must share one edge length"));
            }
        }
        Ok(PhaseGrid { mins, h, cells })
    }

    pub fn n_axes(&self) -> usize {
        self.mins.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n_axes() as i32)
    }

    /// Flat cell index of a point, or `None` when it falls outside.
    pub fn index_of(&self, point: &[f64]) -> Option<usize> {
        let mut idx = 0usize;
        for (a, (&x, &min)) in point.iter().zip(&self.mins).enumerate() {
            let u = (x - min) / self.h;
            if u < 0.0 {
                return None;
            }
            let mut c = u.floor() as usize;
            if c >= self.cells[a] {
                // Points exactly on the upper face belong to the last cell.
                if x <= min + self.h * self.cells[a] as f64 {
                    c = self.cells[a] - 1;
                } else {
                    return None;
                }
            }
            idx = idx * self.cells[a] + c;
        }
        Some(idx)
    }

    /// Center coordinates of a flat cell index.
    pub fn center_of(&self, mut idx: usize) -> Vec<f64> {
        let mut coords = vec![0.0; self.n_axes()];
        for a in (0..self.n_axes()).rev() {
            let c = idx % self.cells[a];
            idx /= self.cells[a];
            coords[a] = self.mins[a] + (c as f64 + 0.5) * self.h;
        }
        coords
    }
}

/// Cellwise density values on a [`PhaseGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub grid: PhaseGrid,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn zeros(grid: PhaseGrid) -> Self {
        let n = grid.n_cells();
        Histogram { grid, densities: vec![0.0; n] }
    }

    /// Integral of the density over the grid.
    pub fn total_mass(&self) -> f64 {
        self.densities.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Per-particle chaos coefficients of positions and velocities.
///
/// Layout: `xhat[(i * (order + 1) + k) * dim + c]` is coefficient `k` of
/// coordinate `c` of particle `i`, so evaluating at any `theta` is a dot
/// product of the mode block with the basis values.
#[derive(Debug, Clone, PartialEq)]
pub struct GpcEnsemble {
    pub dim: usize,
    pub n: usize,
    pub order: usize,
    pub xhat: Vec<f64>,
    pub vhat: Vec<f64>,
    pub time: f64,
}

impl GpcEnsemble {
    /// Lift a deterministic ensemble: mode zero carries the state, higher
    /// modes start at zero.
    pub fn from_ensemble(ens: &Ensemble, order: usize) -> Self {
        let k1 = order + 1;
        let dim = ens.dim;
        let mut xhat = vec![0.0; ens.n * k1 * dim];
        let mut vhat = vec![0.0; ens.n * k1 * dim];
        for i in 0..ens.n {
            let src = i * dim..(i + 1) * dim;
            let dst = i * k1 * dim..i * k1 * dim + dim;
            xhat[dst.clone()].copy_from_slice(&ens.positions[src.clone()]);
            vhat[dst].copy_from_slice(&ens.velocities[src]);
        }
        GpcEnsemble { dim: ens.dim, n: ens.n, order, xhat, vhat, time: ens.time }
    }

    fn block(&self, i: usize) -> std::ops::Range<usize> {
        let k1 = self.order + 1;
        i * k1 * self.dim..(i + 1) * k1 * self.dim
    }

    /// Realized positions and velocities at a parameter value.
    pub fn eval_at(&self, theta: f64, basis: &GpcBasis) -> Ensemble {
        let k1 = self.order + 1;
        let mut phi = vec![0.0; k1];
        basis.eval_all(theta, &mut phi);
        let mut positions = vec![0.0; self.n * self.dim];
        let mut velocities = vec![0.0; self.n * self.dim];
        for i in 0..self.n {
            let xb = &self.xhat[self.block(i)];
            let vb = &self.vhat[self.block(i)];
            for c in 0..self.dim {
                let mut x = 0.0;
                let mut v = 0.0;
                for k in 0..k1 {
                    x += xb[k * self.dim + c] * phi[k];
                    v += vb[k * self.dim + c] * phi[k];
                }
                positions[i * self.dim + c] = x;
                velocities[i * self.dim + c] = v;
            }
        }
        Ensemble { dim: self.dim, n: self.n, positions, velocities, time: self.time }
    }

    /// The mode-zero (parameter-mean) ensemble.
    pub fn mode_zero(&self) -> Ensemble {
        let k1 = self.order + 1;
        let mut positions = vec![0.0; self.n * self.dim];
        let mut velocities = vec![0.0; self.n * self.dim];
        for i in 0..self.n {
            for c in 0..self.dim {
                positions[i * self.dim + c] = self.xhat[(i * k1) * self.dim + c];
                velocities[i * self.dim + c] = self.vhat[(i * k1) * self.dim + c];
            }
        }
        Ensemble { dim: self.dim, n: self.n, positions, velocities, time: self.time }
    }

    /// Sum of velocity coefficients of mode `l` over all particles.
    pub fn mode_momentum(&self, l: usize) -> Vec<f64> {
        let k1 = self.order + 1;
        let mut m = vec![0.0; self.dim];
        for i in 0..self.n {
            for c in 0..self.dim {
                m[c] += self.vhat[(i * k1 + l) * self.dim + c];
            }
        }
        m
    }
}

/// Kernel, basis and quadrature bundled with precomputed tables.
#[derive(Debug, Clone)]
pub struct GpcSystem {
    pub spec: KernelSpec,
    pub basis: GpcBasis,
    pub quad: Quadrature,
    /// Basis values at quadrature nodes, node-major.
    phi_table: Vec<f64>,
    /// Pair coefficient matrix of a distance-independent kernel, shared by
    /// every pair.
    const_matrix: Option<Vec<f64>>,
    /// Freeze pair coefficients over each batch interval instead of
    /// re-evaluating them at every integrator stage (faster, adds an extra
    /// first-order-in-tau error).
    pub frozen_coeffs: bool,
}

impl GpcSystem {
    pub fn new(spec: KernelSpec, basis: GpcBasis, quad: Quadrature) -> Self {
        let k1 = basis.order + 1;
        let mut phi_table = vec![0.0; quad.nodes.len() * k1];
        for (q, &node) in quad.nodes.iter().enumerate() {
            basis.eval_all(node, &mut phi_table[q * k1..(q + 1) * k1]);
        }
        let const_matrix = match &spec.family {
            KernelFamily::Constant { base, slope } => {
                let mut mat = vec![0.0; k1 * k1];
                if *slope == 0.0 {
                    // Orthonormality gives exactly base * identity.
                    for l in 0..k1 {
                        mat[l * k1 + l] = *base;
                    }
                } else {
                    for (q, &w) in quad.weights.iter().enumerate() {
                        let value = base + slope * quad.nodes[q];
                        let phi = &phi_table[q * k1..(q + 1) * k1];
                        for l in 0..k1 {
                            for k in l..k1 {
                                mat[l * k1 + k] += w * value * phi[l] * phi[k];
                            }
                        }
                    }
                    for l in 0..k1 {
                        for k in 0..l {
                            mat[l * k1 + k] = mat[k * k1 + l];
                        }
                    }
                }
                Some(mat)
            }
            _ => None,
        };
        GpcSystem { spec, basis, quad, phi_table, const_matrix, frozen_coeffs: false }
    }

    pub fn modes(&self) -> usize {
        self.basis.order + 1
    }
}

/// Pair coefficient matrix `e[l * (order+1) + k]` coupling the modes of two
/// particles through the kernel, symmetric in `(l, k)` and invariant under
/// swapping the particles.
pub fn pair_coeffs(xhat_i: &[f64], xhat_j: &[f64], dim: usize, system: &GpcSystem) -> Vec<f64> {
    let k1 = system.modes();
    debug_assert_eq!(xhat_i.len(), k1 * dim);
    let mut mat = vec![0.0; k1 * k1];
    pair_coeffs_into(xhat_i, xhat_j, dim, system, &mut mat);
    mat
}

fn pair_coeffs_into(xhat_i: &[f64], xhat_j: &[f64], dim: usize, system: &GpcSystem, mat: &mut [f64]) {
    let k1 = system.modes();
    if let Some(cm) = &system.const_matrix {
        mat.copy_from_slice(cm);
        return;
    }
    if !system.spec.is_stochastic() && system.basis.order == 0 {
        // Deterministic kernel, single mode: the integral collapses to a
        // plain kernel evaluation, bit-equal to the particle dynamics path.
        let mut s = 0.0;
        for c in 0..dim {
            let d = xhat_j[c] - xhat_i[c];
            s += d * d;
        }
        mat[0] = system
            .spec
            .eval(s.sqrt(), None)
            .expect("deterministic kernel eval");
        return;
    }
    mat.fill(0.0);
    let theta_needed = system.spec.is_stochastic();
    for (q, (&w, &node)) in system.quad.weights.iter().zip(&system.quad.nodes).enumerate() {
        let phi = &system.phi_table[q * k1..(q + 1) * k1];
        let mut s = 0.0;
        for c in 0..dim {
            let mut di = 0.0;
            for k in 0..k1 {
                di += (xhat_j[k * dim + c] - xhat_i[k * dim + c]) * phi[k];
            }
            s += di * di;
        }
        let theta = if theta_needed { Some(node) } else { None };
        let value = system.spec.eval(s.sqrt(), theta).expect("kernel eval at quadrature node");
        for l in 0..k1 {
            for k in l..k1 {
                mat[l * k1 + k] += w * value * phi[l] * phi[k];
            }
        }
    }
    for l in 0..k1 {
        for k in 0..l {
            mat[l * k1 + k] = mat[k * k1 + l];
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gpc_group_rhs(
    dim: usize,
    k1: usize,
    m: usize,
    prefactor: f64,
    system: &GpcSystem,
    frozen: Option<&[f64]>,
    state: &[f64],
    out: &mut [f64],
) {
    let block = k1 * dim;
    let (xs, vs) = state.split_at(m * block);
    let (dxs, dvs) = out.split_at_mut(m * block);
    dxs.copy_from_slice(vs);

    // One coefficient matrix per unordered pair, stage-fresh unless frozen.
    let n_pairs = m * (m - 1) / 2;
    let emats_storage;
    let emats: &[f64] = match frozen {
        Some(f) => f,
        None => {
            let mut buf = vec![0.0; n_pairs * k1 * k1];
            let mut idx = 0;
            for a in 0..m {
                for b in (a + 1)..m {
                    pair_coeffs_into(
                        &xs[a * block..(a + 1) * block],
                        &xs[b * block..(b + 1) * block],
                        dim,
                        system,
                        &mut buf[idx * k1 * k1..(idx + 1) * k1 * k1],
                    );
                    idx += 1;
                }
            }
            emats_storage = buf;
            &emats_storage
        }
    };
    let pair_index = |a: usize, b: usize| -> usize {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        lo * m - lo * (lo + 1) / 2 + (hi - lo - 1)
    };

    let mut acc = vec![0.0; block];
    for i in 0..m {
        acc.fill(0.0);
        let vi = &vs[i * block..(i + 1) * block];
        for j in 0..m {
            if j == i {
                continue;
            }
            let vj = &vs[j * block..(j + 1) * block];
            let e = &emats[pair_index(i, j) * k1 * k1..(pair_index(i, j) + 1) * k1 * k1];
            for l in 0..k1 {
                for k in 0..k1 {
                    let w = e[l * k1 + k];
                    for c in 0..dim {
                        acc[l * dim + c] += w * (vj[k * dim + c] - vi[k * dim + c]);
                    }
                }
            }
        }
        let dv = &mut dvs[i * block..(i + 1) * block];
        for (o, a) in dv.iter_mut().zip(&acc) {
            *o = prefactor * a;
        }
    }
}

/// Advance one batch interval of the chaos-coefficient dynamics: inside each
/// batch, mode `l` of every velocity relaxes through the pair matrices with
/// prefactor `kappa / (p-1)`; positions integrate their velocities.
pub fn rbm_gpc_step(
    ens: &GpcEnsemble,
    plan: &BatchPlan,
    system: &GpcSystem,
    stepper: &StepperSpec,
    tau: f64,
) -> Result<GpcEnsemble> {
    if plan.n != ens.n {
        return Err(Error::config(format!(
            "batch plan covers {} particles, chaos ensemble has {}",
            plan.n, ens.n
        )));
    }
    let dim = ens.dim;
    let k1 = ens.order + 1;
    let block = k1 * dim;
    let prefactor = system.spec.kappa / (plan.p as f64 - 1.0);
    let batches = plan.batches();
    let evolved: Result<Vec<(usize, Vec<f64>)>> = batches
        .par_iter()
        .enumerate()
        .map(|(bi, members)| {
            let m = members.len();
            let mut state = vec![0.0; 2 * m * block];
            for (slot, &i) in members.iter().enumerate() {
                state[slot * block..(slot + 1) * block]
                    .copy_from_slice(&ens.xhat[i * block..(i + 1) * block]);
                state[(m + slot) * block..(m + slot + 1) * block]
                    .copy_from_slice(&ens.vhat[i * block..(i + 1) * block]);
            }
            let frozen = if system.frozen_coeffs {
                let n_pairs = m * (m - 1) / 2;
                let mut f = vec![0.0; n_pairs * k1 * k1];
                let (xs, _) = state.split_at(m * block);
                let mut idx = 0;
                for a in 0..m {
                    for b in (a + 1)..m {
                        pair_coeffs_into(
                            &xs[a * block..(a + 1) * block],
                            &xs[b * block..(b + 1) * block],
                            dim,
                            system,
                            &mut f[idx * k1 * k1..(idx + 1) * k1 * k1],
                        );
                        idx += 1;
                    }
                }
                Some(f)
            } else {
                None
            };
            let rhs = |s: &[f64], out: &mut [f64]| {
                gpc_group_rhs(dim, k1, m, prefactor, system, frozen.as_deref(), s, out);
            };
            let new_state = stepper.integrate_interval(rhs, &state, tau)?;
            Ok((bi, new_state))
        })
        .collect();
    let mut out = ens.clone();
    for (bi, state) in evolved? {
        let members = &batches[bi];
        let m = members.len();
        for (slot, &i) in members.iter().enumerate() {
            out.xhat[i * block..(i + 1) * block]
                .copy_from_slice(&state[slot * block..(slot + 1) * block]);
            out.vhat[i * block..(i + 1) * block]
                .copy_from_slice(&state[(m + slot) * block..(m + slot + 1) * block]);
        }
    }
    out.time = ens.time + tau;
    Ok(out)
}

/// Which coordinates of the particle cloud a histogram bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpace {
    /// Position then velocity coordinates (`2 * dim` axes).
    Phase,
    /// Velocity coordinates only (`dim` axes).
    Velocity,
}

/// Parameter-averaged density reconstruction: the particle cloud is
/// evaluated and histogrammed at every quadrature node and the node
/// histograms are averaged with the quadrature weights. Returns the
/// histogram and the parameter-averaged mass falling outside the grid.
pub fn reconstruct_expected_density(
    ens: &GpcEnsemble,
    grid: &PhaseGrid,
    system: &GpcSystem,
    space: GridSpace,
) -> Result<(Histogram, f64)> {
    let expected_axes = match space {
        GridSpace::Phase => 2 * ens.dim,
        GridSpace::Velocity => ens.dim,
    };
    if grid.n_axes() != expected_axes {
        return Err(Error::config(format!(
            "grid has {} axes, expected {expected_axes}",
            grid.n_axes()
        )));
    }
    let n_cells = grid.n_cells();
    let scale = 1.0 / (ens.n as f64 * grid.cell_volume());
    let results: Vec<(Vec<f64>, f64)> = system
        .quad
        .nodes
        .par_iter()
        .zip(&system.quad.weights)
        .map(|(&node, &w)| {
            let realized = ens.eval_at(node, &system.basis);
            let mut dens = vec![0.0; n_cells];
            let mut out_mass = 0.0;
            let mut point = vec![0.0; expected_axes];
            for i in 0..ens.n {
                match space {
                    GridSpace::Phase => {
                        point[..ens.dim].copy_from_slice(realized.position(i));
                        point[ens.dim..].copy_from_slice(realized.velocity(i));
                    }
                    GridSpace::Velocity => point.copy_from_slice(realized.velocity(i)),
                }
                match grid.index_of(&point) {
                    Some(idx) => dens[idx] += w * scale,
                    None => out_mass += w / ens.n as f64,
                }
            }
            (dens, out_mass)
        })
        .collect();
    let mut hist = Histogram::zeros(grid.clone());
    let mut out_mass = 0.0;
    for (dens, om) in results {
        for (h, d) in hist.densities.iter_mut().zip(&dens) {
            *h += d;
        }
        out_mass += om;
    }
    Ok((hist, out_mass))
}

/// Separable Gaussian blur with bandwidth equal to one cell edge; intended
/// for plotting only. Mass leaking over the grid boundary is dropped.
pub fn gaussian_smooth(hist: &Histogram) -> Histogram {
    let radius = 4i64;
    let kernel: Vec<f64> = (-radius..=radius).map(|t| (-0.5 * (t * t) as f64).exp()).collect();
    let ksum: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / ksum).collect();

    let mut current = hist.densities.clone();
    let axes = hist.grid.n_axes();
    let dims: Vec<usize> = hist.grid.cells.clone();
    for axis in 0..axes {
        let stride: usize = dims[axis + 1..].iter().product();
        let len = dims[axis];
        let outer: usize = current.len() / len;
        let mut next = vec![0.0; current.len()];
        for o in 0..outer {
            // Decompose the outer index into (before, after) block offsets.
            let before = o / stride;
            let after = o % stride;
            let base = before * len * stride + after;
            for s in 0..len {
                let v = current[base + s * stride];
                if v == 0.0 {
                    continue;
                }
                for (t, &kw) in (-radius..=radius).zip(&kernel) {
                    let target = s as i64 + t;
                    if target >= 0 && (target as usize) < len {
                        next[base + target as usize * stride] += v * kw;
                    }
                }
            }
        }
        current = next;
    }
    Histogram { grid: hist.grid.clone(), densities: current }
}
