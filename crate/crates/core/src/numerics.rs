//! Dense complex linear algebra used throughout the crate.
//!
//! Everything is built on `nalgebra`'s dynamically sized matrices. Hermitian
//! inputs are symmetrized as `(A + Aᴴ)/2` before any factorization so that
//! roundoff asymmetry from products such as `Y·Dᴴ` never leaks into the
//! spectrum.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending
/// order and the matching unitary eigenvector matrix (one vector per column).
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// `V·diag(f(λ))·Vᴴ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for j in 0..n {
            let w = f(self.eigenvalues[j]);
            scaled.column_mut(j).scale_mut(w);
        }
        &scaled * self.eigenvectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|x| x)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `exp(j·phase)`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    let (s, c) = phase.sin_cos();
    Complex64::new(c, s)
}

pub fn frobenius(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// `(A + Aᴴ)/2`.
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

fn check_square(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{what} expects a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Eigen-decomposition of the Hermitian part of `a`.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEig> {
    check_square(a, "hermitian_eig")?;
    if !is_finite(a) {
        return Err(Error::NonFinite("hermitian_eig input"));
    }
    let eig = hermitian_part(a).symmetric_eigen();
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("hermitian_eig output"));
    }

    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    // total_cmp with an index tie-break keeps the ordering deterministic.
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .total_cmp(&eig.eigenvalues[j])
            .then(i.cmp(&j))
    });
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Frobenius-nearest positive semidefinite matrix: `V·diag(max(λ, 0))·Vᴴ`.
pub fn psd_project(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a)?;
    if eig.min_eigenvalue() >= 0.0 {
        return Ok(hermitian_part(a));
    }
    Ok(hermitian_part(&eig.reconstruct_with(|x| x.max(0.0))))
}

/// Solves `A·X = B` for Hermitian positive definite `A`.
///
/// When the smallest eigenvalue falls below `1e-12·tr(A)/n` the system is
/// regularized with `1e-10·tr(A)/n` on the diagonal. A matrix that is still
/// not positive after that is reported as singular.
pub fn hermitian_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_square(a, "hermitian_solve")?;
    if b.nrows() != a.nrows() {
        return Err(Error::Dimension(format!(
            "hermitian_solve: A is {}x{} but B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if !is_finite(b) {
        return Err(Error::NonFinite("hermitian_solve right-hand side"));
    }
    let eig = hermitian_eig(a)?;
    let inverse = regularized_inverse(&eig)?;
    Ok(inverse * b)
}

/// Inverse of a Hermitian positive definite matrix from its eigen-decomposition,
/// applying the same regularization rule as [`hermitian_solve`].
pub fn regularized_inverse(eig: &HermitianEig) -> Result<ComplexMatrix> {
    let n = eig.eigenvalues.len() as f64;
    let mean_eig = eig.eigenvalues.sum() / n;
    let lambda_min = eig.min_eigenvalue();
    if !(mean_eig > 0.0) {
        return Err(Error::Singular {
            eigenvalue: lambda_min,
        });
    }
    let shift = if lambda_min < 1e-12 * mean_eig {
        1e-10 * mean_eig
    } else {
        0.0
    };
    if lambda_min + shift <= 0.0 {
        return Err(Error::Singular {
            eigenvalue: lambda_min,
        });
    }
    Ok(eig.reconstruct_with(|x| 1.0 / (x + shift)))
}
