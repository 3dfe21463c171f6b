//! Entropic unbalanced inner-product GW between scaled Gaussians.
//!
//! The normalized objective `Upsilon` separates over eigencoordinates. Paired
//! coordinates `k < n` minimize
//!
//! ```text
//! g+(x, y; a, b) = x^2 + y^2 + (tau + eps) (x/a + y/b - log(xy/(ab)) - 2)
//!                  - 2 [xy - eps/2]^+ + eps [log(xy) - log(eps/2)]^+
//! ```
//!
//! whose two smooth pieces (`g-1` without the bracketed terms, `g1` with them
//! active) are convex with closed-form minimizers: a quadratic for `g-1` and a
//! quadratic driven by the positive root of a cubic for `g1`. Unpaired
//! coordinates minimize `h(x; a) = x^2 + (tau + eps) Psi(x/a)`. The optimal
//! plan mass then follows from a one-dimensional log-linear stationarity
//! condition.

use serde::Serialize;

use crate::balanced::check_epsilon;
use crate::error::{Error, Result};
use crate::model::{kl_scalar, psi, CouplingPlan, GaussianMeasure};

fn check_regularizers(epsilon: f64, tau: f64) -> Result<()> {
    check_epsilon(epsilon)?;
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRegularizers(format!(
            "tau must be positive and finite, got {tau}"
        )))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// `g-1(x, y; a, b)`: marginal penalties only, no cross term.
pub fn g_neg1(x: f64, y: f64, a: f64, b: f64, epsilon: f64, tau: f64) -> f64 {
    x * x + y * y + (tau + epsilon) * (psi(x / a) + psi(y / b))
}

/// `g1(x, y; a, b)`: `g-1` with the correlated-branch terms always active.
pub fn g_pos1(x: f64, y: f64, a: f64, b: f64, epsilon: f64, tau: f64) -> f64 {
    let xy = x * y;
    let mut v = g_neg1(x, y, a, b, epsilon, tau) - 2.0 * (xy - epsilon / 2.0);
    if epsilon > 0.0 {
        v += epsilon * (xy.ln() - (epsilon / 2.0).ln());
    }
    v
}

/// `g+(x, y; a, b)`, the per-coordinate objective for paired coordinates.
pub fn g_plus(x: f64, y: f64, a: f64, b: f64, epsilon: f64, tau: f64) -> f64 {
    let xy = x * y;
    let mut v = g_neg1(x, y, a, b, epsilon, tau) - 2.0 * (xy - epsilon / 2.0).max(0.0);
    if epsilon > 0.0 {
        v += epsilon * (xy.ln() - (epsilon / 2.0).ln()).max(0.0);
    }
    v
}

/// `h(x; a) = x^2 + (tau + eps) Psi(x/a)`, for unpaired coordinates.
pub fn h_value(x: f64, a: f64, epsilon: f64, tau: f64) -> f64 {
    x * x + (tau + epsilon) * psi(x / a)
}

/// Positive root of `x^2 + p x - q = 0` (`p, q > 0`), without cancellation.
fn positive_quadratic_root(p: f64, q: f64) -> f64 {
    2.0 * q / (p + (p * p + 4.0 * q).sqrt())
}

/// Positive root of `2x^2 + (c/a) x - c = 0`, `c = tau + eps`: the stationary
/// point of `x^2 + c Psi(x/a)`.
fn marginal_root(a: f64, c: f64) -> f64 {
    positive_quadratic_root(c / (2.0 * a), c / 2.0)
}

/// Minimizer of `g-1`; the two coordinates decouple.
pub fn minimize_g_neg1(a: f64, b: f64, epsilon: f64, tau: f64) -> Result<(f64, f64)> {
    check_regularizers(epsilon, tau)?;
    check_positive("a", a)?;
    check_positive("b", b)?;
    let c = tau + epsilon;
    let (x, y) = (marginal_root(a, c), marginal_root(b, c));
    debug_assert!(hessian_neg1_is_pd(x, y, c));
    Ok((x, y))
}

/// Minimizer of `h(x; a)`.
pub fn minimize_h(a: f64, epsilon: f64, tau: f64) -> Result<f64> {
    check_regularizers(epsilon, tau)?;
    check_positive("a", a)?;
    Ok(marginal_root(a, tau + epsilon))
}

/// Coefficients `[c0, c1, c2, c3]` of the cubic whose unique positive root
/// is `tau / (x y)` at the minimizer of `g1`:
///
/// ```text
/// tau z^3 + (8 tau - c^2/(ab)) z^2 + (16 tau - 2 c^2 s^2) z - 4 c^2 s^2
/// ```
///
/// with `c = tau + eps` and `s = 1/a + 1/b`.
pub fn branch_cubic_coefficients(a: f64, b: f64, epsilon: f64, tau: f64) -> [f64; 4] {
    let c2 = (tau + epsilon).powi(2);
    let s2 = (1.0 / a + 1.0 / b).powi(2);
    [
        -4.0 * c2 * s2,
        16.0 * tau - 2.0 * c2 * s2,
        8.0 * tau - c2 / (a * b),
        tau,
    ]
}

/// Horner evaluation of a cubic and its derivative.
pub fn cubic_eval(coef: &[f64; 4], z: f64) -> (f64, f64) {
    let value = ((coef[3] * z + coef[2]) * z + coef[1]) * z + coef[0];
    let slope = (3.0 * coef[3] * z + 2.0 * coef[2]) * z + coef[1];
    (value, slope)
}

/// Sum of absolute term magnitudes at `z`, the natural scale for residuals.
pub fn cubic_scale(coef: &[f64; 4], z: f64) -> f64 {
    coef.iter()
        .enumerate()
        .map(|(i, c)| c.abs() * z.powi(i as i32))
        .sum()
}

/// Unique positive root of the branch cubic, by Newton's method safeguarded
/// with a bisection bracket `[0, z_hi]` (`t(0) < 0`, `z_hi` grown until
/// `t(z_hi) > 0`).
pub fn solve_branch_cubic(a: f64, b: f64, epsilon: f64, tau: f64) -> Result<f64> {
    check_regularizers(epsilon, tau)?;
    check_positive("a", a)?;
    check_positive("b", b)?;
    let coef = branch_cubic_coefficients(a, b, epsilon, tau);
    let no_root = || Error::NoPositiveRoot { a, b, epsilon, tau };

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grown = 0;
    while cubic_eval(&coef, hi).0 <= 0.0 {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > 1100 || !hi.is_finite() {
            return Err(no_root());
        }
    }

    let mut z = hi;
    for _ in 0..200 {
        let (f, df) = cubic_eval(&coef, z);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z - f / df;
        let next = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - z).abs();
        z = next;
        if step <= 2.0 * f64::EPSILON * z || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    if z > 0.0 && z.is_finite() {
        Ok(z)
    } else {
        Err(no_root())
    }
}

/// Minimizer of `g1` from the positive cubic root `z`:
/// `x^2 + (c / 2a) x = tau (1/2 + 1/z)`, and likewise for `y`.
pub fn minimize_g_plus1(a: f64, b: f64, epsilon: f64, tau: f64) -> Result<(f64, f64)> {
    let z = solve_branch_cubic(a, b, epsilon, tau)?;
    let c = tau + epsilon;
    let q = tau * (0.5 + 1.0 / z);
    let x = positive_quadratic_root(c / (2.0 * a), q);
    let y = positive_quadratic_root(c / (2.0 * b), q);
    debug_assert!(hessian_pos1_is_pd(x, y, tau));
    Ok((x, y))
}

fn hessian_neg1_is_pd(x: f64, y: f64, c: f64) -> bool {
    2.0 + c / (x * x) > 0.0 && 2.0 + c / (y * y) > 0.0
}

fn hessian_pos1_is_pd(x: f64, y: f64, tau: f64) -> bool {
    let (hxx, hyy) = (2.0 + tau / (x * x), 2.0 + tau / (y * y));
    hxx > 0.0 && hxx * hyy - 4.0 > 0.0
}

/// Which smooth piece of `g+` holds the minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `xy >= eps/2`: coordinates are correlated (`g1` minimizer).
    Correlated,
    /// `xy < eps/2`: no cross-covariance (`g-1` minimizer). Also used for
    /// unpaired coordinates.
    Decoupled,
}

/// Per-coordinate solution of the unbalanced problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoordSolution {
    /// Plan variance on the `x` side.
    pub x: f64,
    /// Plan variance on the `y` side; `None` for unpaired coordinates.
    pub y: Option<f64>,
    /// Cross-covariance, `psi^2 = [1 - eps/(2xy)]^+ xy`.
    pub psi: f64,
    pub branch: Branch,
    /// `g+` (or `h`) at the solution.
    pub g_value: f64,
    /// `g+` at the other branch's stationary point; never below `g_value`.
    pub alternative_value: f64,
}

/// Minimizer of `g+`: the `g-1` minimizer when its product falls below
/// `eps/2`, otherwise the `g1` minimizer.
pub fn minimize_g_plus(a: f64, b: f64, epsilon: f64, tau: f64) -> Result<CoordSolution> {
    let (xt, yt) = minimize_g_neg1(a, b, epsilon, tau)?;
    let (xh, yh) = minimize_g_plus1(a, b, epsilon, tau)?;
    let decoupled = xt * yt < epsilon / 2.0;
    let (x, y, other) = if decoupled {
        (xt, yt, (xh, yh))
    } else {
        (xh, yh, (xt, yt))
    };
    let psi = if decoupled {
        0.0
    } else {
        (x * y - epsilon / 2.0).max(0.0).sqrt()
    };
    Ok(CoordSolution {
        x,
        y: Some(y),
        psi,
        branch: if decoupled {
            Branch::Decoupled
        } else {
            Branch::Correlated
        },
        g_value: g_plus(x, y, a, b, epsilon, tau),
        alternative_value: g_plus(other.0, other.1, a, b, epsilon, tau),
    })
}

/// `f(x) = Upsilon x + tau KL(x||a) + tau KL(x||b) + eps KL(x||c)` with
/// `a = m_mu^2`, `b = m_nu^2`, `c = m_mu^2 m_nu^2`; `x` is the squared plan
/// mass.
pub fn mass_objective(x: f64, upsilon: f64, m_mu: f64, m_nu: f64, epsilon: f64, tau: f64) -> f64 {
    let (a, b) = (m_mu * m_mu, m_nu * m_nu);
    let mut v = upsilon * x + tau * (kl_scalar(x, a) + kl_scalar(x, b));
    if epsilon > 0.0 {
        v += epsilon * kl_scalar(x, a * b);
    }
    v
}

/// Minimizer of [`mass_objective`], i.e. the optimal squared plan mass:
/// `a^(tau/w) b^(tau/w) c^(eps/w) exp(-Upsilon/w)` with `w = 2 tau + eps`.
pub fn optimal_mass(upsilon: f64, m_mu: f64, m_nu: f64, epsilon: f64, tau: f64) -> Result<f64> {
    check_regularizers(epsilon, tau)?;
    check_positive("m_mu", m_mu)?;
    check_positive("m_nu", m_nu)?;
    if !upsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "upsilon must be finite, got {upsilon}"
        )));
    }
    let w = 2.0 * tau + epsilon;
    let (log_a, log_b) = (2.0 * m_mu.ln(), 2.0 * m_nu.ln());
    let log_x = (tau * (log_a + log_b) + epsilon * (log_a + log_b) - upsilon) / w;
    Ok(log_x.exp())
}

/// Optimal value, mass and plan of the unbalanced problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UigwResult {
    pub value: f64,
    /// Optimal plan mass `m_pi` (its square enters the objective).
    pub mass: f64,
    pub mass_sq: f64,
    /// Minimal normalized objective.
    pub upsilon: f64,
    /// One entry per coordinate of the higher-dimensional measure.
    pub coords: Vec<CoordSolution>,
    pub plan: CouplingPlan,
    pub epsilon: f64,
    pub tau: f64,
    /// `true` when `mu` had fewer dimensions than `nu`.
    pub swapped: bool,
    /// Plan variances are non-increasing within each branch class.
    pub ordered: bool,
}

fn non_increasing<I: Iterator<Item = f64>>(mut it: I) -> bool {
    let Some(mut prev) = it.next() else {
        return true;
    };
    for v in it {
        if v > prev * (1.0 + 1e-12) {
            return false;
        }
        prev = v;
    }
    true
}

/// Closed-form entropic unbalanced IGW between two scaled Gaussians.
pub fn uigw_entropic(
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
    epsilon: f64,
    tau: f64,
) -> Result<UigwResult> {
    check_regularizers(epsilon, tau)?;
    let swapped = mu.dim() < nu.dim();
    let (big, small) = if swapped { (nu, mu) } else { (mu, nu) };
    let n = small.dim();

    let mut coords = Vec::with_capacity(big.dim());
    for (k, &a) in big.spectrum().iter().enumerate() {
        if k < n {
            coords.push(minimize_g_plus(a, small.spectrum()[k], epsilon, tau)?);
        } else {
            let x = minimize_h(a, epsilon, tau)?;
            let g = h_value(x, a, epsilon, tau);
            coords.push(CoordSolution {
                x,
                y: None,
                psi: 0.0,
                branch: Branch::Decoupled,
                g_value: g,
                alternative_value: g,
            });
        }
    }
    let upsilon: f64 = coords.iter().map(|c| c.g_value).sum();

    let mass_sq = optimal_mass(upsilon, big.mass(), small.mass(), epsilon, tau)?;
    let value = mass_objective(mass_sq, upsilon, big.mass(), small.mass(), epsilon, tau);
    let mass = mass_sq.sqrt();

    let plan = CouplingPlan::new(
        mass,
        coords.iter().map(|c| c.x).collect(),
        coords.iter().filter_map(|c| c.y).collect(),
        coords.iter().take(n).map(|c| c.psi).collect(),
    )?;

    let class = |branch: Branch, paired: bool| {
        coords
            .iter()
            .filter(move |c| c.branch == branch && c.y.is_some() == paired)
    };
    let ordered = [
        (Branch::Correlated, true),
        (Branch::Decoupled, true),
        (Branch::Decoupled, false),
    ]
    .into_iter()
    .all(|(branch, paired)| {
        non_increasing(class(branch, paired).map(|c| c.x))
            && non_increasing(class(branch, paired).filter_map(|c| c.y))
    });

    Ok(UigwResult {
        value,
        mass,
        mass_sq,
        upsilon,
        coords,
        plan,
        epsilon,
        tau,
        swapped,
        ordered,
    })
}
