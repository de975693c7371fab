//! Atomic-norm DoA estimation through the dual program.
//!
//! Atoms are the rank-one matrices `b(θ)·a_rᴴ(θ̄)`. Rather than recovering
//! the primal decomposition, the estimator solves for the dual variable `G`
//!
//! ```text
//! minimize    tr[(C − G)·R·(C − G)ᴴ],   C = Y·Dᴴ,  R = (D·Dᴴ)⁻¹
//! subject to  [[W, G], [Gᴴ, ϱ·I]] ⪰ 0
//!             tr(W) = β²/(ϱ·N)
//!             Σ_m W[m, m+v] = 0   for every offset v ≠ 0
//! ```
//!
//! and reads the directions off the peaks of `f(θ) = |a_rᴴ(θ̄)·Gᴴ·b(θ)|`,
//! which the constraints keep below `β`.
//!
//! The program is solved with a consensus splitting scheme: the bordered
//! matrix has a PSD copy `S`, the `(G, W)` block is updated in closed form
//! (`G` through the eigen-decomposition of `R`, `W` by projection onto the
//! trace/offset affine set), `S` by projection onto the PSD cone, followed
//! by a scaled dual step. Each iteration costs one `(M+N)×(M+N)` Hermitian
//! eigen-decomposition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    frobenius, hermitian_eig, hermitian_part, is_finite, psd_project, real, regularized_inverse,
    ComplexMatrix, HermitianEig,
};
use crate::scene::{re_frequency, se_frequency, ula_steering, EchoData, MeasurementMatrix};
use crate::spectrum::{angle_grid, pick_peaks, validate_grid_step, DoaEstimate, Method, Spectrum};

/// `ϱ` used together with [`default_beta`].
pub const DEFAULT_RHO: f64 = 1000.0;

/// `β = √(1000·N)`, i.e. `ϱ = β²/N = 1000`.
pub fn default_beta(n_res: usize) -> f64 {
    (DEFAULT_RHO * n_res as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnmConfig {
    pub beta: f64,
    pub rho: f64,
    pub admm_penalty: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    /// Radians.
    pub grid_step: f64,
    pub refine: bool,
}

impl AnmConfig {
    pub fn for_n_res(n_res: usize) -> Self {
        Self {
            beta: default_beta(n_res),
            rho: DEFAULT_RHO,
            admm_penalty: 1.0,
            tolerance: 1e-6,
            max_iters: 20_000,
            grid_step: crate::spectrum::DEFAULT_GRID_STEP,
            refine: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("rho", self.rho),
            ("admm_penalty", self.admm_penalty),
            ("tolerance", self.tolerance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("ANM {name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("ANM max_iters must be >= 1".into()));
        }
        validate_grid_step(self.grid_step)
    }
}

/// File-level ANM options. A missing `beta` resolves to [`default_beta`] for
/// the scene's RE count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnmSettings {
    pub beta: Option<f64>,
    pub rho: f64,
    pub admm_penalty: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub grid_step_deg: f64,
    pub refine: bool,
}

impl Default for AnmSettings {
    fn default() -> Self {
        let d = AnmConfig::for_n_res(1);
        Self {
            beta: None,
            rho: d.rho,
            admm_penalty: d.admm_penalty,
            tolerance: d.tolerance,
            max_iters: d.max_iters,
            grid_step_deg: d.grid_step.to_degrees(),
            refine: d.refine,
        }
    }
}

impl AnmSettings {
    pub fn resolve(&self, n_res: usize) -> Result<AnmConfig> {
        let cfg = AnmConfig {
            beta: self.beta.unwrap_or_else(|| default_beta(n_res)),
            rho: self.rho,
            admm_penalty: self.admm_penalty,
            tolerance: self.tolerance,
            max_iters: self.max_iters,
            grid_step: self.grid_step_deg.to_radians(),
            refine: self.refine,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Data of one dual program: `C = Y·Dᴴ` and `R = (D·Dᴴ)⁻¹`.
#[derive(Debug, Clone)]
pub struct AnmProblem {
    pub c: ComplexMatrix,
    pub r: ComplexMatrix,
    r_eig: HermitianEig,
}

pub fn build_problem(echo: &EchoData, measurement: &MeasurementMatrix) -> Result<AnmProblem> {
    let (y, d) = (&echo.y, &measurement.matrix);
    if y.ncols() != d.ncols() {
        return Err(Error::Dimension(format!(
            "echo has {} slots but the measurement matrix has {}",
            y.ncols(),
            d.ncols()
        )));
    }
    if !is_finite(y) {
        return Err(Error::NonFinite("echo matrix"));
    }
    let c = y * d.adjoint();
    let r = regularized_inverse(&hermitian_eig(&(d * d.adjoint()))?)?;
    AnmProblem::new(c, r)
}

impl AnmProblem {
    pub fn new(c: ComplexMatrix, r: ComplexMatrix) -> Result<Self> {
        if r.nrows() != c.ncols() || !r.is_square() {
            return Err(Error::Dimension(format!(
                "C is {}x{} but R is {}x{}",
                c.nrows(),
                c.ncols(),
                r.nrows(),
                r.ncols()
            )));
        }
        let r = hermitian_part(&r);
        let r_eig = hermitian_eig(&r)?;
        Ok(Self { c, r, r_eig })
    }

    pub fn n_ses(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_res(&self) -> usize {
        self.c.ncols()
    }

    /// `tr[(C − G)·R·(C − G)ᴴ]`.
    pub fn objective(&self, g: &ComplexMatrix) -> f64 {
        let e = &self.c - g;
        (&e * &self.r * e.adjoint()).trace().re
    }
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    /// `M×N`.
    pub g: ComplexMatrix,
    /// `M×M` Hermitian.
    pub w: ComplexMatrix,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every iteration.
    pub objective_history: Vec<f64>,
    /// `(primal, dual)` residuals after every iteration.
    pub residual_history: Vec<(f64, f64)>,
}

/// `[[W, G], [Gᴴ, ϱ·I]]`.
pub fn bordered(w: &ComplexMatrix, g: &ComplexMatrix, rho: f64) -> ComplexMatrix {
    let (m, n) = (w.nrows(), g.ncols());
    let mut s = ComplexMatrix::zeros(m + n, m + n);
    s.view_mut((0, 0), (m, m)).copy_from(w);
    s.view_mut((0, m), (m, n)).copy_from(g);
    s.view_mut((m, 0), (n, m)).copy_from(&g.adjoint());
    for i in 0..n {
        s[(m + i, m + i)] = real(rho);
    }
    s
}

/// Euclidean projection of a Hermitian `w` onto
/// `{tr(W) = trace, Σ_m W[m, m+v] = 0 for v ≠ 0}`.
pub fn project_trace_offsets(w: &ComplexMatrix, trace: f64) -> ComplexMatrix {
    let m = w.nrows();
    let mut out = w.clone();
    for v in 1..m {
        let len = (m - v) as f64;
        let mean = (0..m - v).map(|i| w[(i, i + v)]).sum::<num_complex::Complex64>() / len;
        for i in 0..m - v {
            out[(i, i + v)] -= mean;
            out[(i + v, i)] = out[(i, i + v)].conj();
        }
    }
    let shift = (trace - (0..m).map(|i| w[(i, i)].re).sum::<f64>()) / m as f64;
    for i in 0..m {
        out[(i, i)] = real(w[(i, i)].re + shift);
    }
    out
}

/// Sum of each off-diagonal offset `v = 1..M−1` of `w`.
pub fn offset_sums(w: &ComplexMatrix) -> Vec<num_complex::Complex64> {
    let m = w.nrows();
    (1..m)
        .map(|v| (0..m - v).map(|i| w[(i, i + v)]).sum())
        .collect()
}

pub fn solve_dual(problem: &AnmProblem, cfg: &AnmConfig) -> Result<DualSolution> {
    cfg.validate()?;
    let (m, n) = (problem.n_ses(), problem.n_res());
    let (beta, rho) = (cfg.beta, cfg.rho);
    let trace_target = beta * beta / (rho * n as f64);

    // G = C is optimal whenever it is feasible; W = tr/M·I certifies that
    // when ‖C‖₂² ≤ β²/(N·M).
    let threshold = beta / ((n * m) as f64).sqrt();
    let c_norm = spectral_norm(&problem.c)?;
    if c_norm <= threshold {
        return Ok(DualSolution {
            g: problem.c.clone(),
            w: ComplexMatrix::identity(m, m).scale(trace_target / m as f64),
            objective: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
            converged: true,
            objective_history: Vec::new(),
            residual_history: Vec::new(),
        });
    }

    // Internal units: G' = G/s with s = β/√(NM), ϱ' = 1, so that the
    // bordered matrix is O(1) regardless of the physical signal level, and R
    // is normalized by its mean eigenvalue. The constraint set maps exactly:
    // W = (s²/ϱ)·W'.
    let s = threshold;
    let r_scale = problem.r_eig.eigenvalues.mean();
    let c = problem.c.unscale(s);
    let r_vals: Vec<f64> = problem.r_eig.eigenvalues.iter().map(|x| x / r_scale).collect();
    let r_vecs = &problem.r_eig.eigenvectors;
    let r_int = problem.r.unscale(r_scale);
    let c_r = &c * &r_int;
    let trace_int = m as f64;
    let objective_unit = s * s * r_scale;

    let mut w = ComplexMatrix::identity(m, m);
    let mut g = ComplexMatrix::zeros(m, n);
    let mut s_mat = bordered(&w, &g, 1.0);
    let mut u = ComplexMatrix::zeros(m + n, m + n);
    let mut mu = cfg.admm_penalty;

    let mut history = Vec::new();
    let mut residual_history = Vec::new();
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iters {
        iterations = it;
        let t = &s_mat - &u;

        w = project_trace_offsets(&hermitian_part(&t.view((0, 0), (m, m)).into_owned()), trace_int);

        // G = (C·R + μ·P)·(R + μI)⁻¹ with P the average of the two copies of
        // G in T.
        let p = (t.view((0, m), (m, n)).into_owned() + t.view((m, 0), (n, m)).adjoint()).scale(0.5);
        let rhs = &c_r + p.scale(mu);
        let mut right = r_vecs.clone();
        for (j, lam) in r_vals.iter().enumerate() {
            right.column_mut(j).scale_mut(1.0 / (lam + mu));
        }
        g = rhs * r_vecs * right.adjoint();

        let phi = bordered(&w, &g, 1.0);
        let s_next = psd_project(&(&phi + &u))?;
        u += &phi - &s_next;

        let norm = frobenius(&s_next).max(1.0);
        primal = frobenius(&(&phi - &s_next)) / norm;
        dual = mu * frobenius(&(&s_next - &s_mat)) / norm;
        s_mat = s_next;

        if !primal.is_finite() || !dual.is_finite() || !is_finite(&g) {
            return Err(Error::NonFinite("ANM solver iterate"));
        }
        let e = &c - &g;
        history.push((&e * &r_int * e.adjoint()).trace().re * objective_unit);
        residual_history.push((primal, dual));

        if primal < cfg.tolerance && dual < cfg.tolerance {
            converged = true;
            break;
        }
        if primal > 10.0 * dual {
            mu *= 2.0;
            u.unscale_mut(2.0);
        } else if dual > 10.0 * primal {
            mu /= 2.0;
            u.scale_mut(2.0);
        }
    }

    let g_user = g.scale(s);
    let w_user = w.scale(s * s / rho);
    Ok(DualSolution {
        objective: problem.objective(&g_user),
        g: g_user,
        w: w_user,
        primal_residual: primal,
        dual_residual: dual,
        iterations,
        converged,
        objective_history: history,
        residual_history,
    })
}

fn spectral_norm(a: &ComplexMatrix) -> Result<f64> {
    // eigen-decompose the smaller Gram matrix
    let gram = if a.nrows() <= a.ncols() {
        a * a.adjoint()
    } else {
        a.adjoint() * a
    };
    Ok(hermitian_eig(&gram)?.max_eigenvalue().max(0.0).sqrt())
}

/// Scene geometry needed to evaluate the dual spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub n_ses: usize,
    pub n_res: usize,
    pub irs_arrival_angle: f64,
}

/// `|a_rᴴ(θ̄)·Gᴴ·b(θ)|` at one angle.
pub fn dual_value(g: &ComplexMatrix, geometry: &ArrayGeometry, theta: f64) -> f64 {
    let b = ula_steering(geometry.n_ses, se_frequency(theta));
    let a = ula_steering(geometry.n_res, re_frequency(theta, geometry.irs_arrival_angle));
    // aᴴ·Gᴴ·b = conj(bᴴ·G·a)
    (b.adjoint() * g * a)[(0, 0)].norm()
}

pub fn dual_spectrum(g: &ComplexMatrix, geometry: &ArrayGeometry, grid: &[f64]) -> Result<Spectrum> {
    if g.nrows() != geometry.n_ses || g.ncols() != geometry.n_res {
        return Err(Error::Dimension(format!(
            "G is {}x{} but the geometry has M = {}, N = {}",
            g.nrows(),
            g.ncols(),
            geometry.n_ses,
            geometry.n_res
        )));
    }
    let values = grid.par_iter().map(|&theta| dual_value(g, geometry, theta)).collect();
    Ok(Spectrum {
        grid: grid.to_vec(),
        values,
    })
}

/// Output of [`estimate_anm_detailed`].
#[derive(Debug, Clone)]
pub struct AnmOutput {
    pub estimate: DoaEstimate,
    pub solution: DualSolution,
    pub spectrum: Spectrum,
}

pub fn estimate_anm_detailed(
    echo: &EchoData,
    measurement: &MeasurementMatrix,
    irs_arrival_angle: f64,
    k: usize,
    cfg: &AnmConfig,
) -> Result<AnmOutput> {
    let problem = build_problem(echo, measurement)?;
    let solution = solve_dual(&problem, cfg)?;
    let geometry = ArrayGeometry {
        n_ses: problem.n_ses(),
        n_res: problem.n_res(),
        irs_arrival_angle,
    };
    let spectrum = dual_spectrum(&solution.g, &geometry, &angle_grid(cfg.grid_step))?;
    let mut estimate = pick_peaks(&spectrum, k, cfg.refine, Method::Anm)?;
    estimate.degraded |= !solution.converged;
    estimate.solver_iterations = Some(solution.iterations);
    Ok(AnmOutput {
        estimate,
        solution,
        spectrum,
    })
}

/// `build_problem → solve_dual → dual_spectrum → pick_peaks`.
pub fn estimate_anm(
    echo: &EchoData,
    measurement: &MeasurementMatrix,
    irs_arrival_angle: f64,
    k: usize,
    cfg: &AnmConfig,
) -> Result<DoaEstimate> {
    estimate_anm_detailed(echo, measurement, irs_arrival_angle, k, cfg).map(|o| o.estimate)
}
