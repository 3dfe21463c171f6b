//! Dense-matrix reference computations. These deliberately ignore the
//! diagonal structure exploited by the closed forms and work on full
//! covariance matrices with Cholesky factorizations.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::model::{CouplingPlan, GaussianMeasure};

fn cholesky(matrix: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(matrix.clone())
        .ok_or_else(|| Error::InvalidArgument("matrix is not positive definite".into()))
}

/// `log det` of a symmetric positive-definite matrix.
pub fn dense_log_det(matrix: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky(matrix)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// KL between `N(0, a)` and `N(0, b)` from full covariances.
pub fn dense_kl_normal(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            found: a.nrows(),
        });
    }
    let chol_b = cholesky(b)?;
    let trace = chol_b.solve(a).trace();
    Ok(0.5 * (trace - a.nrows() as f64 + dense_log_det(b)? - dense_log_det(a)?))
}

/// Block-diagonal `[[a, 0], [0, b]]`.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(m + n, m + n);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (n, n)).copy_from(b);
    out
}

fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))
}

/// Dense `log det` of the plan's block covariance.
pub fn dense_plan_log_det(plan: &CouplingPlan) -> Result<f64> {
    dense_log_det(&plan.block_covariance())
}

/// `KL(plan || mu (x) nu)` for normalized measures, from the dense block
/// covariance of the plan and the spectra of `mu` and `nu`.
pub fn dense_joint_kl(
    plan: &CouplingPlan,
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
) -> Result<f64> {
    let reference = block_diag(&diag(mu.spectrum()), &diag(nu.spectrum()));
    dense_kl_normal(&plan.block_covariance(), &reference)
}

fn scalar_kl(a: f64, b: f64) -> f64 {
    a * a.ln() - a * b.ln() - a + b
}

/// Generalized KL between scaled Gaussians from their full covariances.
pub fn dense_kl_gaussian(alpha: &GaussianMeasure, beta: &GaussianMeasure) -> Result<f64> {
    let normalized = dense_kl_normal(&alpha.covariance(), &beta.covariance())?;
    Ok(alpha.mass() * normalized + scalar_kl(alpha.mass(), beta.mass()))
}

/// `KL(alpha (x) alpha || beta (x) beta)` evaluated directly on the
/// `2k`-dimensional product measures (mass `m^2`, block-diagonal covariance).
pub fn dense_kl_product(alpha: &GaussianMeasure, beta: &GaussianMeasure) -> Result<f64> {
    let ca = alpha.covariance();
    let cb = beta.covariance();
    let normalized = dense_kl_normal(&block_diag(&ca, &ca), &block_diag(&cb, &cb))?;
    let (ma, mb) = (alpha.mass() * alpha.mass(), beta.mass() * beta.mass());
    Ok(ma * normalized + scalar_kl(ma, mb))
}
