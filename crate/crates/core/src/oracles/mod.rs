//! Independent numerical checks for every closed form.
//!
//! Nothing here feeds production output except the per-coordinate
//! barycenter maximizer, which arbitrates between the two candidate
//! correlation formulas of the entropic barycenter.

pub mod dense;
pub mod discrete;
pub mod monte_carlo;
pub mod search;

pub use dense::{
    dense_joint_kl, dense_kl_gaussian, dense_kl_product, dense_log_det, dense_plan_log_det,
};
pub use discrete::{
    discrete_entropic_gw, quantize_gaussian, DiscreteGwSolution, DiscreteMeasure, SolverReport,
};
pub use monte_carlo::{monte_carlo_igw_cost, McEstimate};
pub use search::{
    coordinate_ascent_unit_cube, golden_section_min, grid_refine_min, grid_refine_min2d, SearchBox,
};

use serde::Serialize;

use crate::error::Result;
use crate::model::GaussianMeasure;
use crate::unbalanced::{g_neg1, g_plus, h_value, mass_objective};

const GOLDEN_TOL: f64 = 1e-13;
const GRID_LEVELS: usize = 22;

/// Balanced value rebuilt from per-coordinate golden-section minimizations
/// of `-2 ll k - (eps/2) log(1 - k)`, plus the trace terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalancedOracle {
    pub value: f64,
    pub kappas: Vec<f64>,
}

pub fn balanced_igw_oracle(
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
    epsilon: f64,
) -> Result<BalancedOracle> {
    let (big, small) = if mu.dim() < nu.dim() {
        (nu, mu)
    } else {
        (mu, nu)
    };
    let mut value = big.trace_sq() + small.trace_sq();
    let mut kappas = Vec::with_capacity(small.dim());
    for (lx, ly) in big.spectrum().iter().zip(small.spectrum()) {
        let ll = lx * ly;
        let f = |k: f64| {
            let entropic = if epsilon > 0.0 {
                -0.5 * epsilon * (-k).ln_1p()
            } else {
                0.0
            };
            -2.0 * ll * k + entropic
        };
        let (k, fk) = golden_section_min(f, 0.0, 1.0, GOLDEN_TOL)?;
        value += fk;
        kappas.push(k);
    }
    Ok(BalancedOracle { value, kappas })
}

fn log_box(a: f64, b: f64, c: f64) -> ((f64, f64), (f64, f64)) {
    let lo = 1e-3 * a.min(b).min(c.sqrt());
    let hi = 10.0 * a.max(b).max(c.sqrt()).max(1.0);
    ((lo.ln(), hi.ln()), (lo.ln(), hi.ln()))
}

/// Global minimization of `g+` by multi-start grid refinement in
/// log-coordinates. Returns `(x, y, g+(x, y))`.
pub fn g_plus_grid_min(a: f64, b: f64, epsilon: f64, tau: f64) -> Result<(f64, f64, f64)> {
    let (xr, yr) = log_box(a, b, tau + epsilon);
    let (u, v, val) = grid_refine_min2d(
        |u, v| g_plus(u.exp(), v.exp(), a, b, epsilon, tau),
        xr,
        yr,
        GRID_LEVELS,
    )?;
    Ok((u.exp(), v.exp(), val))
}

/// Grid minimization of `g-1`. Returns `(x, y, g-1(x, y))`.
pub fn g_neg1_grid_min(a: f64, b: f64, epsilon: f64, tau: f64) -> Result<(f64, f64, f64)> {
    let (xr, yr) = log_box(a, b, tau + epsilon);
    let (u, v, val) = grid_refine_min2d(
        |u, v| g_neg1(u.exp(), v.exp(), a, b, epsilon, tau),
        xr,
        yr,
        GRID_LEVELS,
    )?;
    Ok((u.exp(), v.exp(), val))
}

/// Golden-section minimization of the convex `h(x; a)`.
pub fn h_golden_min(a: f64, epsilon: f64, tau: f64) -> Result<(f64, f64)> {
    let c = tau + epsilon;
    let hi = 2.0 * a.max(c.sqrt()).max(1.0);
    golden_section_min(|x| h_value(x, a, epsilon, tau), 0.0, hi, GOLDEN_TOL * hi)
}

/// Minimization of the mass objective over `x = e^t`, `t` in `[-700, 50]`:
/// a unit-step scan brackets the minimum (the objective is flat to machine
/// precision for very negative `t`), then golden section refines it.
/// Returns `(x, f(x))`.
pub fn mass_golden_min(
    upsilon: f64,
    m_mu: f64,
    m_nu: f64,
    epsilon: f64,
    tau: f64,
) -> Result<(f64, f64)> {
    let f = |t: f64| mass_objective(t.exp(), upsilon, m_mu, m_nu, epsilon, tau);
    let (best, _) = (-700..=50)
        .map(|t| (t as f64, f(t as f64)))
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("non-empty scan");
    let (t, v) = golden_section_min(f, (best - 1.0).max(-700.0), (best + 1.0).min(50.0), 1e-12)?;
    Ok((t.exp(), v))
}

/// Unbalanced value rebuilt numerically: grid minimization of each paired
/// coordinate, golden section for unpaired ones and for the mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbalancedOracle {
    pub value: f64,
    pub upsilon: f64,
    pub mass_sq: f64,
}

pub fn uigw_composed_oracle(
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
    epsilon: f64,
    tau: f64,
) -> Result<UnbalancedOracle> {
    let (big, small) = if mu.dim() < nu.dim() {
        (nu, mu)
    } else {
        (mu, nu)
    };
    let mut upsilon = 0.0;
    for (k, &a) in big.spectrum().iter().enumerate() {
        upsilon += match small.spectrum().get(k) {
            Some(&b) => g_plus_grid_min(a, b, epsilon, tau)?.2,
            None => h_golden_min(a, epsilon, tau)?.1,
        };
    }
    let (mass_sq, value) = mass_golden_min(upsilon, big.mass(), small.mass(), epsilon, tau)?;
    Ok(UnbalancedOracle {
        value,
        upsilon,
        mass_sq,
    })
}

/// `(sum a_i x_i)^2 + sum (b_i / 2) log(1 - x_i)`.
pub fn subset_objective(a: &[f64], b: &[f64], x: &[f64]) -> f64 {
    let linear: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
    let penalty: f64 = b.iter().zip(x).map(|(b, x)| 0.5 * b * (-x).ln_1p()).sum();
    linear * linear + penalty
}

/// Dense grid maximization of [`subset_objective`] over `[0, 1)^s`, in the
/// coordinates `x = 1 - e^(-u)`, `u` in `[0, 40]`. Intended for `s <= 3`.
pub fn subset_grid_max(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let s = a.len();
    let bx = SearchBox::new(vec![0.0; s], vec![40.0; s])?;
    let to_x = |u: &[f64]| -> Vec<f64> { u.iter().map(|u| -(-u).exp_m1()).collect() };
    let (u, v) = grid_refine_min(
        |u: &[f64]| -subset_objective(a, b, &to_x(u)),
        &bx,
        GRID_LEVELS,
        41,
        6,
    )?;
    Ok((to_x(&u), -v))
}

/// Per-coordinate entropic barycenter objective
/// `(sum_l a_l k_l l_l)^2 + (eps/2) sum_l a_l log(1 - k_l)` for
/// `terms = [(weight a_l, eigenvalue l_l)]`.
pub fn barycenter_coordinate_objective(terms: &[(f64, f64)], epsilon: f64, kappas: &[f64]) -> f64 {
    let s: f64 = terms.iter().zip(kappas).map(|((w, l), k)| w * l * k).sum();
    let penalty: f64 = if epsilon > 0.0 {
        terms
            .iter()
            .zip(kappas)
            .map(|((w, _), k)| w * (-k).ln_1p())
            .sum()
    } else {
        0.0
    };
    s * s + 0.5 * epsilon * penalty
}

/// Numerical maximizer of [`barycenter_coordinate_objective`] by multi-start
/// coordinate ascent over `[0, 1)^L`.
pub fn barycenter_coordinate_oracle(terms: &[(f64, f64)], epsilon: f64) -> (Vec<f64>, f64) {
    let n = terms.len();
    let starts: Vec<Vec<f64>> = [0.0, 0.5, 0.9, 0.999, 0.999_999]
        .iter()
        .map(|v| vec![*v; n])
        .collect();
    coordinate_ascent_unit_cube(
        |k| barycenter_coordinate_objective(terms, epsilon, k),
        &starts,
        2000,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unbalanced::minimize_g_neg1;

    #[test]
    fn balanced_oracle_scalar_example() {
        let m = GaussianMeasure::probability(&[2.0]).unwrap();
        let o = balanced_igw_oracle(&m, &m, 1.0).unwrap();
        assert!((o.value - (0.5 + 0.5 * 16f64.ln())).abs() < 1e-8);
    }

    #[test]
    fn grid_matches_g_neg1_example() {
        let (x, y, _) = g_neg1_grid_min(1.0, 1.0, 0.5, 1.5).unwrap();
        let golden = 0.5 * (5f64.sqrt() - 1.0);
        assert!((x - golden).abs() < 1e-6 && (y - golden).abs() < 1e-6);
        assert!((x - y).abs() <= 2e-6);
        let (cx, cy) = minimize_g_neg1(1.0, 1.0, 0.5, 1.5).unwrap();
        assert!((cx - x).abs() < 1e-6 && (cy - y).abs() < 1e-6);
    }

    #[test]
    fn subset_grid_single_index() {
        let (x, _) = subset_grid_max(&[2.0], &[1.0]).unwrap();
        let expected = 1.0 - 1.0 / (4.0 * (2.0 + 3f64.sqrt()));
        assert!((x[0] - expected).abs() < 1e-6);
    }

    #[test]
    fn barycenter_oracle_single_measure() {
        let (k, _) = barycenter_coordinate_oracle(&[(1.0, 1.0)], 0.1);
        let expected = 0.5 * (1.0 + 0.9f64.sqrt());
        assert!((k[0] - expected).abs() < 1e-7, "{k:?} {expected}");
    }
}
