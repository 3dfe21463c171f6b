//! Scaled zero-mean Gaussian measures, Gaussian coupling plans, and the KL and
//! transport-cost primitives shared by the closed-form evaluators.
//!
//! A measure is stored through its covariance spectrum (sorted descending) and
//! the orthogonal eigenbasis that carries it back to input coordinates. All
//! closed forms work in eigencoordinates, where the optimal plans are diagonal.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues at or below this floor are rejected (log-determinants diverge).
pub const PD_FLOOR: f64 = 1e-12;

/// Absolute tolerance on `|A_ij - A_ji|` for accepting a covariance.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Correlation levels at or above `1 - SINGULAR_GAP` make a plan singular.
pub const SINGULAR_GAP: f64 = 1e-12;

/// A scaled zero-mean Gaussian `mass * N(0, basis * diag(spectrum) * basis^T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mass: f64,
    spectrum: Vec<f64>,
    basis: DMatrix<f64>,
}

impl GaussianMeasure {
    /// Builds a measure directly from covariance eigenvalues, skipping the
    /// eigendecomposition. The spectrum is stably sorted descending and the
    /// basis records the resulting coordinate permutation.
    pub fn from_spectrum(mass: f64, spectrum: &[f64]) -> Result<Self> {
        check_mass(mass)?;
        if spectrum.is_empty() {
            return Err(Error::InvalidSpectrum("spectrum is empty".into()));
        }
        if let Some(&bad) = spectrum.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSpectrum(format!(
                "non-finite eigenvalue {bad}"
            )));
        }
        if let Some(&bad) = spectrum.iter().find(|&&v| v <= PD_FLOOR) {
            return Err(Error::NonPositiveDefinite { eigenvalue: bad });
        }
        let order = descending_order(spectrum);
        let dim = spectrum.len();
        let mut basis = DMatrix::zeros(dim, dim);
        for (col, &src) in order.iter().enumerate() {
            basis[(src, col)] = 1.0;
        }
        Ok(Self {
            mass,
            spectrum: order.iter().map(|&i| spectrum[i]).collect(),
            basis,
        })
    }

    /// Unit-mass measure from a spectrum.
    pub fn probability(spectrum: &[f64]) -> Result<Self> {
        Self::from_spectrum(1.0, spectrum)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.spectrum.len()
    }

    /// Covariance eigenvalues, non-increasing.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Orthogonal matrix whose columns are the eigenvectors, in spectrum order.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn is_probability(&self) -> bool {
        (self.mass - 1.0).abs() <= 1e-12
    }

    /// Same shape, mass multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mass = self.mass * factor;
        check_mass(mass)?;
        Ok(Self {
            mass,
            ..self.clone()
        })
    }

    /// Same shape with mass replaced.
    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        check_mass(mass)?;
        Ok(Self {
            mass,
            ..self.clone()
        })
    }

    /// Reconstructs `basis * diag(spectrum) * basis^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.basis[(i, j)] * self.spectrum[j]
        });
        &scaled * self.basis.transpose()
    }

    pub fn log_det(&self) -> f64 {
        self.spectrum.iter().map(|v| v.ln()).sum()
    }

    /// `tr(Sigma^2)`, the squared Frobenius norm of the covariance.
    pub fn trace_sq(&self) -> f64 {
        self.spectrum.iter().map(|v| v * v).sum()
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if mass.is_finite() && mass > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveMass(mass))
    }
}

/// Indices sorting `values` descending; equal values keep input order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    order
}

/// Eigendecomposes a symmetric covariance into a [`GaussianMeasure`].
///
/// Diagonal inputs bypass the iterative solver so that their basis is an exact
/// permutation matrix. Eigenvectors are sign-normalized so their largest
/// component is positive.
pub fn make_gaussian(mass: f64, covariance: &DMatrix<f64>) -> Result<GaussianMeasure> {
    check_mass(mass)?;
    let dim = covariance.nrows();
    if dim == 0 || covariance.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: covariance.ncols(),
        });
    }
    if covariance.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpectrum(
            "covariance has non-finite entries".into(),
        ));
    }
    let mut max_asymmetry = 0.0_f64;
    let mut off_diagonal = false;
    for i in 0..dim {
        for j in 0..dim {
            max_asymmetry = max_asymmetry.max((covariance[(i, j)] - covariance[(j, i)]).abs());
            off_diagonal |= i != j && covariance[(i, j)] != 0.0;
        }
    }
    if max_asymmetry > SYMMETRY_TOL {
        return Err(Error::NonSymmetric { max_asymmetry });
    }

    if !off_diagonal {
        let diag: Vec<f64> = (0..dim).map(|i| covariance[(i, i)]).collect();
        return GaussianMeasure::from_spectrum(mass, &diag);
    }

    let symmetric = (covariance + covariance.transpose()) * 0.5;
    let eig = SymmetricEigen::new(symmetric);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if let Some(&bad) = values.iter().find(|&&v| v <= PD_FLOOR) {
        return Err(Error::NonPositiveDefinite { eigenvalue: bad });
    }
    let order = descending_order(&values);
    let mut basis = DMatrix::zeros(dim, dim);
    for (col, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let pivot = v
            .iter()
            .copied()
            .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for row in 0..dim {
            basis[(row, col)] = sign * v[row];
        }
    }
    Ok(GaussianMeasure {
        mass,
        spectrum: order.iter().map(|&i| values[i]).collect(),
        basis,
    })
}

/// `Psi(x) = x - log x - 1`, non-negative with its only zero at `x = 1`.
pub fn psi(x: f64) -> f64 {
    x - x.ln() - 1.0
}

/// Generalized KL between two non-negative scalars: `a log(a/b) - a + b`.
pub fn kl_scalar(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        b
    } else {
        a * (a / b).ln() - a + b
    }
}

/// KL between the normalized Gaussians, using both eigenbases.
fn kl_normalized(alpha: &GaussianMeasure, beta: &GaussianMeasure) -> f64 {
    // tr(S_a S_b^{-1}) = sum_ij la_i / lb_j * <u_i, v_j>^2
    let overlap = beta.basis.transpose() * &alpha.basis;
    let mut trace = 0.0;
    for (i, la) in alpha.spectrum.iter().enumerate() {
        for (j, lb) in beta.spectrum.iter().enumerate() {
            let c = overlap[(j, i)];
            trace += la / lb * c * c;
        }
    }
    0.5 * (trace - alpha.dim() as f64 + beta.log_det() - alpha.log_det())
}

/// Generalized KL divergence between scaled Gaussians:
/// `m_a * KL(normalized) + KL(m_a || m_b)`.
pub fn kl_gaussian(alpha: &GaussianMeasure, beta: &GaussianMeasure) -> Result<f64> {
    check_same_dim(alpha, beta)?;
    let value = alpha.mass * kl_normalized(alpha, beta) + kl_scalar(alpha.mass, beta.mass);
    Ok(value.max(0.0))
}

/// Quadratic KL, `KL(alpha (x) alpha || beta (x) beta)`, via
/// `2 m_a KL(alpha || beta) + (m_a - m_b)^2`.
pub fn kl_quadratic(alpha: &GaussianMeasure, beta: &GaussianMeasure) -> Result<f64> {
    let kl = kl_gaussian(alpha, beta)?;
    let dm = alpha.mass - beta.mass;
    Ok(2.0 * alpha.mass * kl + dm * dm)
}

fn check_same_dim(alpha: &GaussianMeasure, beta: &GaussianMeasure) -> Result<()> {
    if alpha.dim() == beta.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: alpha.dim(),
            found: beta.dim(),
        })
    }
}

/// A scaled Gaussian coupling whose block covariance is diagonal in the shared
/// eigenbasis: `Sigma_pi = [[diag(sigma_x), K], [K^T, diag(sigma_y)]]` with
/// `K[k][k] = k_xy[k]`.
///
/// Coordinate `k` of `x` is paired with coordinate `k` of `y`. The optimal plans
/// built by this crate are sorted descending, but the type also admits
/// non-aligned pairings so that suboptimal plans can be represented.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingPlan {
    mass: f64,
    sigma_x: Vec<f64>,
    sigma_y: Vec<f64>,
    k_xy: Vec<f64>,
}

impl CouplingPlan {
    /// Validates and builds a plan. A zero mass is accepted: it arises when
    /// the optimal unbalanced mass underflows.
    pub fn new(mass: f64, sigma_x: Vec<f64>, sigma_y: Vec<f64>, k_xy: Vec<f64>) -> Result<Self> {
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(Error::NonPositiveMass(mass));
        }
        if sigma_y.len() > sigma_x.len() {
            return Err(Error::InvalidPlan(format!(
                "sigma_y has {} entries but sigma_x only {}",
                sigma_y.len(),
                sigma_x.len()
            )));
        }
        if k_xy.len() != sigma_y.len() {
            return Err(Error::DimensionMismatch {
                expected: sigma_y.len(),
                found: k_xy.len(),
            });
        }
        if sigma_x.is_empty() {
            return Err(Error::InvalidPlan("empty plan".into()));
        }
        if let Some(bad) = sigma_x
            .iter()
            .chain(&sigma_y)
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidPlan(format!(
                "marginal variance {bad} is not positive"
            )));
        }
        for (k, &c) in k_xy.iter().enumerate() {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidPlan(format!(
                    "k_xy[{k}] = {c} is not non-negative"
                )));
            }
            let bound = sigma_x[k] * sigma_y[k];
            if c * c > bound * (1.0 + 1e-12) {
                return Err(Error::InvalidPlan(format!(
                    "k_xy[{k}]^2 = {} exceeds sigma_x*sigma_y = {bound}",
                    c * c
                )));
            }
        }
        Ok(Self {
            mass,
            sigma_x,
            sigma_y,
            k_xy,
        })
    }

    /// Unit-mass plan.
    pub fn balanced(sigma_x: Vec<f64>, sigma_y: Vec<f64>, k_xy: Vec<f64>) -> Result<Self> {
        Self::new(1.0, sigma_x, sigma_y, k_xy)
    }

    /// Plan with the given marginals and correlation levels `kappa[k]`.
    pub fn from_kappas(
        mass: f64,
        sigma_x: Vec<f64>,
        sigma_y: Vec<f64>,
        kappas: &[f64],
    ) -> Result<Self> {
        if kappas.len() != sigma_y.len() {
            return Err(Error::DimensionMismatch {
                expected: sigma_y.len(),
                found: kappas.len(),
            });
        }
        let k_xy = kappas
            .iter()
            .enumerate()
            .map(|(k, kappa)| (sigma_x[k] * sigma_y[k] * kappa.clamp(0.0, 1.0)).sqrt())
            .collect();
        Self::new(mass, sigma_x, sigma_y, k_xy)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sigma_x(&self) -> &[f64] {
        &self.sigma_x
    }

    pub fn sigma_y(&self) -> &[f64] {
        &self.sigma_y
    }

    pub fn k_xy(&self) -> &[f64] {
        &self.k_xy
    }

    pub fn dim_x(&self) -> usize {
        self.sigma_x.len()
    }

    pub fn dim_y(&self) -> usize {
        self.sigma_y.len()
    }

    /// `kappa_k = k_xy[k]^2 / (sigma_x[k] sigma_y[k])`, in `[0, 1]`.
    pub fn kappas(&self) -> Vec<f64> {
        self.k_xy
            .iter()
            .enumerate()
            .map(|(k, c)| (c * c / (self.sigma_x[k] * self.sigma_y[k])).min(1.0))
            .collect()
    }

    /// `tr(K^T K)`.
    pub fn cross_trace(&self) -> f64 {
        self.k_xy.iter().map(|c| c * c).sum()
    }

    /// Errors with [`Error::SingularPlan`] at the first `kappa >= 1 - 1e-12`.
    pub fn check_nonsingular(&self) -> Result<()> {
        match self
            .kappas()
            .into_iter()
            .enumerate()
            .find(|(_, kappa)| *kappa >= 1.0 - SINGULAR_GAP)
        {
            Some((index, kappa)) => Err(Error::SingularPlan { index, kappa }),
            None => Ok(()),
        }
    }

    /// Dense `(m + n) x (m + n)` block covariance of the normalized plan.
    pub fn block_covariance(&self) -> DMatrix<f64> {
        let m = self.dim_x();
        let n = self.dim_y();
        let mut cov = DMatrix::zeros(m + n, m + n);
        for (i, s) in self.sigma_x.iter().enumerate() {
            cov[(i, i)] = *s;
        }
        for (j, s) in self.sigma_y.iter().enumerate() {
            cov[(m + j, m + j)] = *s;
        }
        for (k, c) in self.k_xy.iter().enumerate() {
            cov[(k, m + k)] = *c;
            cov[(m + k, k)] = *c;
        }
        cov
    }
}

/// `E_pi[(<X,X'> - <Y,Y'>)^2] = tr(Sigma_x^2) + tr(Sigma_y^2) - 2 tr(K^T K)` for
/// the normalized plan.
pub fn igw_cost_of_plan(plan: &CouplingPlan) -> f64 {
    let sx: f64 = plan.sigma_x.iter().map(|v| v * v).sum();
    let sy: f64 = plan.sigma_y.iter().map(|v| v * v).sum();
    (sx + sy - 2.0 * plan.cross_trace()).max(0.0)
}

/// Components of `KL(plan || mu (x) nu)` for normalized measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlDecomposition {
    /// `KL(pi_x || mu)`.
    pub kl_x: f64,
    /// `KL(pi_y || nu)`.
    pub kl_y: f64,
    /// `-1/2 sum log(1 - kappa_k)`.
    pub mutual: f64,
}

impl KlDecomposition {
    pub fn total(&self) -> f64 {
        self.kl_x + self.kl_y + self.mutual
    }
}

/// Splits the joint KL of a plan against the product of its reference measures
/// into the two marginal KLs and the mutual-information term.
///
/// The plan is read in the eigencoordinates of `mu` and `nu`: `sigma_x[i]`
/// is compared with `mu.spectrum()[i]`, and likewise for `y`.
pub fn plan_kl_decomposition(
    plan: &CouplingPlan,
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
) -> Result<KlDecomposition> {
    if plan.dim_x() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: plan.dim_x(),
        });
    }
    if plan.dim_y() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: nu.dim(),
            found: plan.dim_y(),
        });
    }
    plan.check_nonsingular()?;
    let half_psi = |var: &[f64], reference: &[f64]| -> f64 {
        0.5 * var
            .iter()
            .zip(reference)
            .map(|(v, r)| psi(v / r))
            .sum::<f64>()
    };
    let mutual = -0.5 * plan.kappas().iter().map(|k| (-k).ln_1p()).sum::<f64>();
    Ok(KlDecomposition {
        kl_x: half_psi(&plan.sigma_x, mu.spectrum()),
        kl_y: half_psi(&plan.sigma_y, nu.spectrum()),
        mutual,
    })
}

/// Measure file contents: either a full covariance or a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    Covariance {
        mass: f64,
        covariance: Vec<Vec<f64>>,
    },
    Spectrum {
        mass: f64,
        spectrum: Vec<f64>,
    },
}

impl MeasureSpec {
    pub fn to_measure(&self) -> Result<GaussianMeasure> {
        match self {
            MeasureSpec::Spectrum { mass, spectrum } => {
                GaussianMeasure::from_spectrum(*mass, spectrum)
            }
            MeasureSpec::Covariance { mass, covariance } => {
                let dim = covariance.len();
                if let Some(row) = covariance.iter().find(|row| row.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: row.len(),
                    });
                }
                let matrix = DMatrix::from_fn(dim, dim, |i, j| covariance[i][j]);
                make_gaussian(*mass, &matrix)
            }
        }
    }
}
