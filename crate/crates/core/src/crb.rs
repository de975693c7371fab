//! Fisher information and Cramér–Rao bounds for the stacked echo model.
//!
//! Parameter order is `θ_1..θ_K`, then `Re α_1..Re α_K`, then
//! `Im α_1..Im α_K`. All bounds are in radians².

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{c64, ComplexMatrix};
use crate::scene::{model_matrices, MeasurementMatrix, SceneConfig};

/// `|cos θ|` below this counts as endfire.
const ENDFIRE_COS: f64 = 1e-12;

/// Real symmetric `3K×3K` Fisher information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub f: DMatrix<f64>,
    pub k: usize,
    /// Some target sits at ±90°.
    pub endfire: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    pub fisher: FisherMatrix,
    /// `[F⁻¹]_{k,k}`, radians².
    pub crb_per_target: Vec<f64>,
    /// `√(mean CRB)`, radians.
    pub rcrb: f64,
    pub closed_form_single: Option<f64>,
    pub endfire_flag: bool,
}

fn hadamard_transposed(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.component_mul(&b.transpose())
}

/// Fisher matrix for an arbitrary measurement covariance `R_D = D·Dᴴ`.
pub fn fisher_matrix_with_covariance(scene: &SceneConfig, r_d: &ComplexMatrix) -> Result<FisherMatrix> {
    scene.validate()?;
    let n = scene.n_res;
    if r_d.nrows() != n || r_d.ncols() != n {
        return Err(Error::Dimension(format!(
            "measurement covariance is {}x{}, expected {n}x{n}",
            r_d.nrows(),
            r_d.ncols()
        )));
    }
    let k = scene.n_targets();
    let mm = model_matrices(scene);
    let lam = mm.lambda_matrix();
    let lam_h = lam.adjoint();
    let c = mm.link_gain;

    let (b, bd, q, qd) = (&mm.b, &mm.b_dot, &mm.q, &mm.q_dot);
    let bhb = b.adjoint() * b;
    let bdhb = bd.adjoint() * b;
    let bhbd = b.adjoint() * bd;
    let bdhbd = bd.adjoint() * bd;

    let rq = r_d * q;
    let rqd = r_d * qd;
    let qrq = q.adjoint() * &rq;
    let qdrq = qd.adjoint() * &rq;
    let qrqd = q.adjoint() * &rqd;
    let qdrqd = qd.adjoint() * &rqd;

    let t_tt = hadamard_transposed(&bdhbd, &(&lam * &qrq * &lam_h))
        + hadamard_transposed(&bdhb, &(&lam * &qdrq * &lam_h))
        + hadamard_transposed(&bhbd, &(&lam * &qrqd * &lam_h))
        + hadamard_transposed(&bhb, &(&lam * &qdrqd * &lam_h));
    let x = hadamard_transposed(&bhb, &qrq).scale(c.norm_sqr());
    let y = (hadamard_transposed(&bdhb, &(&qrq * &lam_h)) + hadamard_transposed(&bhb, &(&qrqd * &lam_h))) * c;

    // α block is [[1, j], [−j, 1]] ⊗ X, θα block is [1, j] ⊗ Y.
    let j = c64(0.0, 1.0);
    let mut t = ComplexMatrix::zeros(3 * k, 3 * k);
    t.view_mut((0, 0), (k, k)).copy_from(&t_tt);
    t.view_mut((0, k), (k, k)).copy_from(&y);
    t.view_mut((0, 2 * k), (k, k)).copy_from(&(&y * j));
    t.view_mut((k, k), (k, k)).copy_from(&x);
    t.view_mut((k, 2 * k), (k, k)).copy_from(&(&x * j));
    t.view_mut((2 * k, k), (k, k)).copy_from(&(&x * -j));
    t.view_mut((2 * k, 2 * k), (k, k)).copy_from(&x);

    let scale = 2.0 / scene.noise_power;
    let mut f = DMatrix::<f64>::zeros(3 * k, 3 * k);
    for row in 0..3 * k {
        for col in row..3 * k {
            let v = scale * t[(row, col)].re;
            f[(row, col)] = v;
            f[(col, row)] = v;
        }
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Fisher matrix"));
    }
    let endfire = scene.targets.iter().any(|t| t.angle.cos().abs() < ENDFIRE_COS);
    Ok(FisherMatrix { f, k, endfire })
}

pub fn fisher_matrix(scene: &SceneConfig, measurement: &MeasurementMatrix) -> Result<FisherMatrix> {
    if measurement.n_slots() != scene.n_slots {
        return Err(Error::Dimension(format!(
            "measurement has {} slots, scene has {}",
            measurement.n_slots(),
            scene.n_slots
        )));
    }
    fisher_matrix_with_covariance(scene, &measurement.covariance())
}

/// Inverts `F` after Jacobi scaling and reads the angle diagonal.
pub fn crb_values(fisher: &FisherMatrix) -> Result<CrbReport> {
    let f = &fisher.f;
    let dim = f.nrows();
    if dim == 0 || dim != 3 * fisher.k {
        return Err(Error::Dimension(format!("Fisher matrix is {dim}x{dim} for K = {}", fisher.k)));
    }
    let sym = (f + f.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    let threshold = 1e-12 * sym.trace() / dim as f64;
    if !(min_eig > threshold) {
        return Err(Error::Singular { eigenvalue: min_eig });
    }

    let d = DVector::from_iterator(dim, sym.diagonal().iter().map(|v| 1.0 / v.sqrt()));
    let scaled = DMatrix::from_fn(dim, dim, |r, c| sym[(r, c)] * d[r] * d[c]);
    let inverse = scaled
        .cholesky()
        .ok_or(Error::Singular { eigenvalue: min_eig })?
        .inverse();

    let crb_per_target: Vec<f64> = (0..fisher.k).map(|i| inverse[(i, i)] * d[i] * d[i]).collect();
    if crb_per_target.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Singular { eigenvalue: min_eig });
    }
    let rcrb = (crb_per_target.iter().sum::<f64>() / fisher.k as f64).sqrt();
    Ok(CrbReport {
        fisher: fisher.clone(),
        crb_per_target,
        rcrb,
        closed_form_single: None,
        endfire_flag: fisher.endfire,
    })
}

/// `6σ² / (L·N_b·P_t·|α_g|²·|α_0|²·π²·cos²θ_0·M·N·(M² + N² − 2))`, valid when
/// `D·Dᴴ = L·I`.
pub fn closed_form_single_crb(scene: &SceneConfig, n_slots: usize) -> Result<f64> {
    scene.validate()?;
    if scene.n_targets() != 1 {
        return Err(Error::Config(format!(
            "closed-form CRB needs exactly one target, scene has {}",
            scene.n_targets()
        )));
    }
    if n_slots == 0 {
        return Err(Error::Config("number of slots must be >= 1".into()));
    }
    let target = scene.targets[0];
    let cos = target.angle.cos();
    if cos.abs() < ENDFIRE_COS {
        return Err(Error::Endfire);
    }
    let mm = model_matrices(scene);
    let (m, n) = (scene.n_ses as f64, scene.n_res as f64);
    // |c|² = N_b·P_t·|α_g|²
    let gain = mm.link_gain.norm_sqr() * mm.target_gains[0].norm_sqr();
    let denom = n_slots as f64 * gain * PI * PI * cos * cos * m * n * (m * m + n * n - 2.0);
    Ok(6.0 * scene.noise_power / denom)
}

/// Full report for `R_D`; the closed form is attached for single-target scenes.
pub fn crb_report(scene: &SceneConfig, r_d: &ComplexMatrix) -> Result<CrbReport> {
    let fisher = fisher_matrix_with_covariance(scene, r_d)?;
    let mut report = crb_values(&fisher)?;
    if scene.n_targets() == 1 {
        report.closed_form_single = closed_form_single_crb(scene, scene.n_slots).ok();
    }
    Ok(report)
}

/// `L·I`, the covariance of a DFT schedule with `L = N` and the expected
/// covariance of i.i.d. random phases.
pub fn identity_covariance(n_res: usize, n_slots: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n_res, n_res) * Complex64::from(n_slots as f64)
}

/// Finite-difference Fisher matrix, exposed for validation. Differentiates
/// `vec(B·Λ·Qᴴ·D)` by central differences with relative step `h`.
pub fn finite_difference_fisher(scene: &SceneConfig, d: &ComplexMatrix, h: f64) -> Result<DMatrix<f64>> {
    scene.validate()?;
    let k = scene.n_targets();
    let base = model_matrices(scene);
    let c = base.link_gain;
    let alphas = base.target_gains.clone();

    // echo as a function of (θ, α), keeping c fixed
    let echo = |angles: &[f64], alphas: &[Complex64]| -> ComplexMatrix {
        let mut s = scene.clone();
        for (t, a) in s.targets.iter_mut().zip(angles) {
            t.angle = *a;
        }
        let mut mm = model_matrices(&s);
        mm.lambda = alphas.iter().map(|a| c * a).collect();
        mm.noiseless_echo(d)
    };

    let angles = scene.target_angles();
    let mut columns: Vec<ComplexMatrix> = Vec::with_capacity(3 * k);
    for p in 0..3 * k {
        let (mut plus_t, mut minus_t) = (angles.clone(), angles.clone());
        let (mut plus_a, mut minus_a) = (alphas.clone(), alphas.clone());
        let step;
        if p < k {
            step = h * angles[p].abs().max(1.0);
            plus_t[p] += step;
            minus_t[p] -= step;
        } else {
            let idx = (p - k) % k;
            step = h * alphas[idx].norm().max(f64::MIN_POSITIVE);
            let delta = if p < 2 * k { c64(step, 0.0) } else { c64(0.0, step) };
            plus_a[idx] += delta;
            minus_a[idx] -= delta;
        }
        let diff = echo(&plus_t, &plus_a) - echo(&minus_t, &minus_a);
        columns.push(diff.unscale(2.0 * step));
    }

    let scale = 2.0 / scene.noise_power;
    Ok(DMatrix::from_fn(3 * k, 3 * k, |r, col| {
        scale * columns[r].dotc(&columns[col]).re
    }))
}
