//! Entropic inner-product GW between zero-mean Gaussian probability measures.
//!
//! With spectra `l_mu` (length `m`) and `l_nu` (length `n <= m`), both
//! descending, the optimal plan is diagonal in the eigenbases and pairs the
//! `k`-th coordinates with squared correlation
//! `kappa_k = [1 - eps / (4 l_mu_k l_nu_k)]^+`. The divergence is
//!
//! ```text
//! tr(S_mu^2) + tr(S_nu^2) - 2 sum_k (l_mu_k l_nu_k - eps/4)^+
//!     + eps/2 sum_k [log(l_mu_k l_nu_k) - log(eps/4)]^+
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CouplingPlan, GaussianMeasure, SINGULAR_GAP};

/// Optimal value and plan of the balanced entropic problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IgwResult {
    pub value: f64,
    /// Optimal squared correlation per paired coordinate, in `[0, 1]`.
    pub kappas: Vec<f64>,
    /// Oriented with the higher-dimensional measure on `x`.
    pub plan: CouplingPlan,
    pub epsilon: f64,
    /// `true` when `mu` had fewer dimensions than `nu`, so `plan.x` is `nu`.
    pub swapped: bool,
    /// Some `kappa_k` reaches 1 (only at `epsilon = 0`); the plan covariance is
    /// singular but the value is the finite limit.
    pub degenerate: bool,
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeEpsilon(epsilon))
    }
}

/// Optimal squared correlation for one coordinate pair with product `ll`.
pub fn optimal_kappa(ll: f64, epsilon: f64) -> f64 {
    (1.0 - epsilon / (4.0 * ll)).max(0.0)
}

/// Closed-form entropic IGW between two Gaussian probability measures.
pub fn igw_entropic(mu: &GaussianMeasure, nu: &GaussianMeasure, epsilon: f64) -> Result<IgwResult> {
    check_epsilon(epsilon)?;
    for m in [mu, nu] {
        if !m.is_probability() {
            return Err(Error::UnbalancedInput { mass: m.mass() });
        }
    }
    let swapped = mu.dim() < nu.dim();
    let (big, small) = if swapped { (nu, mu) } else { (mu, nu) };

    let threshold = epsilon / 4.0;
    let mut value = big.trace_sq() + small.trace_sq();
    let mut kappas = Vec::with_capacity(small.dim());
    for (lx, ly) in big.spectrum().iter().zip(small.spectrum()) {
        let ll = lx * ly;
        if ll > threshold {
            value -= 2.0 * (ll - threshold);
            if epsilon > 0.0 {
                value += 0.5 * epsilon * (ll.ln() - threshold.ln());
            }
        }
        kappas.push(optimal_kappa(ll, epsilon));
    }
    let plan = CouplingPlan::from_kappas(
        1.0,
        big.spectrum().to_vec(),
        small.spectrum().to_vec(),
        &kappas,
    )?;
    let degenerate = kappas.iter().any(|k| *k >= 1.0 - SINGULAR_GAP);
    Ok(IgwResult {
        value: value.max(0.0),
        kappas,
        plan,
        epsilon,
        swapped,
        degenerate,
    })
}

/// Outcome of checking a plan against the rearrangement bound on `tr(K^T K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceBound {
    /// `sum_j l_mu_j l_nu_j kappa_(j)` with all three sequences descending.
    pub bound: f64,
    /// `tr(K^T K)` of the plan.
    pub trace: f64,
    /// `trace` equals `bound` within `1e-9` (relative to `max(1, bound)`).
    pub attained: bool,
}

fn same_multiset(values: &[f64], reference: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.len() == reference.len()
        && sorted
            .iter()
            .zip(reference)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0))
}

/// Evaluates the von Neumann bound `tr(K^T K) <= sum l_mu_j l_nu_j kappa_j`
/// for a plan whose marginals are `mu` and `nu`, and whether the plan
/// attains it. Aligned diagonal plans attain it; cross-paired ones do not.
pub fn verify_trace_bound(
    plan: &CouplingPlan,
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
) -> Result<TraceBound> {
    if !same_multiset(plan.sigma_x(), mu.spectrum()) {
        return Err(Error::MarginalMismatch(format!(
            "sigma_x {:?} vs spectrum {:?}",
            plan.sigma_x(),
            mu.spectrum()
        )));
    }
    if !same_multiset(plan.sigma_y(), nu.spectrum()) {
        return Err(Error::MarginalMismatch(format!(
            "sigma_y {:?} vs spectrum {:?}",
            plan.sigma_y(),
            nu.spectrum()
        )));
    }
    let mut kappas = plan.kappas();
    kappas.sort_by(|a, b| b.total_cmp(a));
    let bound: f64 = kappas
        .iter()
        .zip(mu.spectrum().iter().zip(nu.spectrum()))
        .map(|(k, (lx, ly))| lx * ly * k)
        .sum();
    let trace = plan.cross_trace();
    Ok(TraceBound {
        bound,
        trace,
        attained: (bound - trace).abs() <= 1e-9 * bound.max(1.0),
    })
}

/// `log det Sigma_pi = sum log sigma_x + sum log sigma_y + sum log(1 - kappa_k)`.
pub fn plan_log_det(plan: &CouplingPlan) -> Result<f64> {
    plan.check_nonsingular()?;
    let marginals: f64 = plan
        .sigma_x()
        .iter()
        .chain(plan.sigma_y())
        .map(|v| v.ln())
        .sum();
    let coupling: f64 = plan.kappas().iter().map(|k| (-k).ln_1p()).sum();
    Ok(marginals + coupling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::igw_cost_of_plan;

    fn unit(spectrum: &[f64]) -> GaussianMeasure {
        GaussianMeasure::probability(spectrum).unwrap()
    }

    #[test]
    fn threshold_boundary_gives_zero_correlation() {
        let r = igw_entropic(&unit(&[1.0]), &unit(&[1.0]), 4.0).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.kappas, vec![0.0]);
        assert!(!r.degenerate);
    }

    #[test]
    fn zero_epsilon_is_trace_difference() {
        let r = igw_entropic(&unit(&[2.0, 1.0]), &unit(&[3.0]), 0.0).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.kappas, vec![1.0]);
        assert!(r.degenerate);
        assert!(!r.swapped);
    }

    #[test]
    fn scalar_example() {
        // 8 - 2 (4 - 1/4) + 1/2 log 16
        let r = igw_entropic(&unit(&[2.0]), &unit(&[2.0]), 1.0).unwrap();
        let expected = 0.5 + 0.5 * 16f64.ln();
        assert!((r.value - expected).abs() < 1e-14);
        assert!((r.kappas[0] - 15.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn swaps_lower_dimensional_first_argument() {
        let a = unit(&[3.0]);
        let b = unit(&[2.0, 1.0]);
        let r = igw_entropic(&a, &b, 0.5).unwrap();
        let s = igw_entropic(&b, &a, 0.5).unwrap();
        assert!(r.swapped && !s.swapped);
        assert_eq!(r.value, s.value);
        assert_eq!(r.plan.sigma_x(), &[2.0, 1.0]);
    }

    #[test]
    fn rejects_unbalanced_and_negative_epsilon() {
        let heavy = GaussianMeasure::from_spectrum(2.0, &[1.0]).unwrap();
        assert!(matches!(
            igw_entropic(&heavy, &unit(&[1.0]), 1.0),
            Err(Error::UnbalancedInput { .. })
        ));
        assert!(matches!(
            igw_entropic(&unit(&[1.0]), &unit(&[1.0]), -1.0),
            Err(Error::NegativeEpsilon(_))
        ));
    }

    #[test]
    fn value_decomposes_into_cost_plus_entropy() {
        let mu = unit(&[3.0, 1.5, 0.2]);
        let nu = unit(&[2.0, 0.3]);
        let eps = 0.7;
        let r = igw_entropic(&mu, &nu, eps).unwrap();
        let entropy = -0.5 * r.kappas.iter().map(|k| (1.0 - k).ln()).sum::<f64>();
        assert!((igw_cost_of_plan(&r.plan) + eps * entropy - r.value).abs() < 1e-10);
    }

    #[test]
    fn optimal_plan_attains_trace_bound() {
        let mu = unit(&[3.0, 1.0]);
        let nu = unit(&[2.0, 0.5]);
        let r = igw_entropic(&mu, &nu, 0.4).unwrap();
        assert!(verify_trace_bound(&r.plan, &mu, &nu).unwrap().attained);
    }

    #[test]
    fn cross_paired_plan_misses_trace_bound() {
        let mu = unit(&[2.0, 1.0]);
        let nu = unit(&[2.0, 1.0]);
        // x(2) with y(1) and x(1) with y(2), both at kappa = 0.5
        let plan =
            CouplingPlan::from_kappas(1.0, vec![2.0, 1.0], vec![1.0, 2.0], &[0.5, 0.5]).unwrap();
        let tb = verify_trace_bound(&plan, &mu, &nu).unwrap();
        assert!(!tb.attained);
        assert!((tb.trace - 2.0).abs() < 1e-12);
        assert!((tb.bound - 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_plan_trace_bound() {
        let mu = unit(&[2.0, 1.0]);
        let nu = unit(&[1.0]);
        let plan = CouplingPlan::balanced(vec![2.0, 1.0], vec![1.0], vec![0.0]).unwrap();
        let tb = verify_trace_bound(&plan, &mu, &nu).unwrap();
        assert_eq!((tb.bound, tb.trace, tb.attained), (0.0, 0.0, true));
    }

    #[test]
    fn trace_bound_rejects_wrong_marginals() {
        let plan = CouplingPlan::balanced(vec![2.0], vec![1.0], vec![0.0]).unwrap();
        assert!(matches!(
            verify_trace_bound(&plan, &unit(&[3.0]), &unit(&[1.0])),
            Err(Error::MarginalMismatch(_))
        ));
    }

    #[test]
    fn log_det_examples() {
        let block = CouplingPlan::balanced(vec![2.0, 3.0], vec![5.0], vec![0.0]).unwrap();
        assert!((plan_log_det(&block).unwrap() - 30f64.ln()).abs() < 1e-14);
        let plan = CouplingPlan::from_kappas(1.0, vec![1.0], vec![1.0], &[0.75]).unwrap();
        assert!((plan_log_det(&plan).unwrap() - 0.25f64.ln()).abs() < 1e-14);
        let singular = CouplingPlan::balanced(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(
            plan_log_det(&singular),
            Err(Error::SingularPlan { .. })
        ));
    }
}
