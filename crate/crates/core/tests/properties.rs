use gw_gauss_core::oracles::{
    barycenter_coordinate_oracle, dense_joint_kl, discrete_entropic_gw, g_plus_grid_min,
    golden_section_min, monte_carlo_igw_cost, quantize_gaussian,
};
use gw_gauss_core::unbalanced::{g_plus, g_pos1};
use gw_gauss_core::*;
use proptest::collection::vec;
use proptest::prelude::*;

fn descending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn spectrum(max_dim: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    vec(lo..hi, 1..=max_dim).prop_map(descending)
}

/// Plans with `n <= m`, marginals drawn independently of the reference
/// spectra and correlations in `[0, 0.99]`.
fn plan_with_refs() -> impl Strategy<Value = (CouplingPlan, GaussianMeasure, GaussianMeasure)> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(m, n)| {
        let (m, n) = (m.max(n), m.min(n));
        (
            vec(0.1..5.0f64, m),
            vec(0.1..5.0f64, n),
            vec(0.0..0.99f64, n),
            vec(0.1..5.0f64, m),
            vec(0.1..5.0f64, n),
        )
            .prop_map(|(sx, sy, k, rx, ry)| {
                let plan =
                    CouplingPlan::from_kappas(1.0, descending(sx), descending(sy), &k).unwrap();
                let mu = GaussianMeasure::probability(&descending(rx)).unwrap();
                let nu = GaussianMeasure::probability(&descending(ry)).unwrap();
                (plan, mu, nu)
            })
    })
}

fn barycenter_spec() -> impl Strategy<Value = BarycenterSpec> {
    vec((spectrum(4, 0.5, 5.0), 0.1..1.0f64), 1..=4).prop_flat_map(|parts| {
        let max_dim = parts.iter().map(|(s, _)| s.len()).max().unwrap();
        (Just(parts), 1..=max_dim).prop_map(|(parts, d)| {
            let total: f64 = parts.iter().map(|(_, w)| w).sum();
            let mut weights: Vec<f64> = parts.iter().map(|(_, w)| w / total).collect();
            let rest: f64 = weights[1..].iter().sum();
            weights[0] = 1.0 - rest;
            BarycenterSpec {
                measures: parts
                    .iter()
                    .map(|(s, _)| GaussianMeasure::probability(s).unwrap())
                    .collect(),
                weights,
                target_dim: d,
                epsilon: 0.0,
            }
        })
    })
}

/// Sets epsilon to `fraction` of the smallest `A_j^2 / B_j`.
fn with_small_epsilon(mut spec: BarycenterSpec, fraction: f64) -> BarycenterSpec {
    let sums = igw_barycenter(&spec).unwrap();
    let bound = sums
        .a
        .iter()
        .zip(&sums.b)
        .map(|(a, b)| a * a / b)
        .fold(f64::INFINITY, f64::min);
    spec.epsilon = fraction * bound;
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kl_gaussian_is_nonnegative(a in spectrum(5, 0.05, 10.0), b_raw in vec(0.05..10.0f64, 5), ma in 0.1..5.0f64, mb in 0.1..5.0f64) {
        let b = descending(b_raw[..a.len()].to_vec());
        let alpha = GaussianMeasure::from_spectrum(ma, &a).unwrap();
        let beta = GaussianMeasure::from_spectrum(mb, &b).unwrap();
        prop_assert!(kl_gaussian(&alpha, &beta).unwrap() >= 0.0);
        prop_assert_eq!(kl_gaussian(&alpha, &alpha).unwrap(), 0.0);
        if (ma - mb).abs() > 1e-6 || a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-6) {
            prop_assert!(kl_gaussian(&alpha, &beta).unwrap() > 0.0);
        }
    }

    #[test]
    fn psi_is_nonnegative(x in 1e-6..1e6f64) {
        prop_assert!(psi(x) >= 0.0);
        prop_assert_eq!(psi(1.0), 0.0);
        if (x - 1.0).abs() > 1e-6 {
            prop_assert!(psi(x) > 0.0);
        }
    }

    #[test]
    fn cost_is_invariant_under_coordinate_permutation((plan, _, _) in plan_with_refs(), shift in 0usize..6) {
        let n = plan.dim_y();
        let rot = |v: &[f64]| -> Vec<f64> { (0..v.len()).map(|i| v[(i + shift) % v.len()]).collect() };
        let mut sx = rot(&plan.sigma_x()[..n]);
        sx.extend_from_slice(&plan.sigma_x()[n..]);
        let permuted = CouplingPlan::new(1.0, sx, rot(plan.sigma_y()), rot(plan.k_xy())).unwrap();
        let (c, p) = (igw_cost_of_plan(&plan), igw_cost_of_plan(&permuted));
        prop_assert!((c - p).abs() <= 1e-12 * c.max(1.0));
        prop_assert!(c >= 0.0);
    }

    #[test]
    fn decomposition_matches_dense_joint_kl((plan, mu, nu) in plan_with_refs()) {
        let parts = plan_kl_decomposition(&plan, &mu, &nu).unwrap();
        let dense = dense_joint_kl(&plan, &mu, &nu).unwrap();
        prop_assert!((parts.total() - dense).abs() <= 1e-9 * dense.abs().max(1.0), "{} vs {}", parts.total(), dense);
    }

    #[test]
    fn kappa_is_the_coordinate_argmin(l in 0.1..10.0f64, m in 0.1..10.0f64, eps in 0.0..10.0f64) {
        let ll = l * m;
        let k = optimal_kappa(ll, eps);
        let f = |k: f64| -2.0 * ll * k - 0.5 * eps * (-k).ln_1p();
        if eps > 0.0 {
            let (g, _) = golden_section_min(f, 0.0, 1.0, 1e-12).unwrap();
            prop_assert!((g - k).abs() <= 1e-7, "{} vs {}", g, k);
        } else {
            prop_assert_eq!(k, 1.0);
        }
    }

    #[test]
    fn balanced_value_is_monotone_in_epsilon(a in spectrum(8, 0.1, 10.0), b in spectrum(8, 0.1, 10.0), e1 in 0.0..10.0f64, e2 in 0.0..10.0f64) {
        let mu = GaussianMeasure::probability(&a).unwrap();
        let nu = GaussianMeasure::probability(&b).unwrap();
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let v_lo = igw_entropic(&mu, &nu, lo).unwrap().value;
        let v_hi = igw_entropic(&mu, &nu, hi).unwrap().value;
        prop_assert!(v_lo <= v_hi + 1e-12 * v_hi.abs().max(1.0));
        prop_assert!(v_lo >= 0.0);
    }

    #[test]
    fn balanced_at_zero_epsilon_is_trace_formula(a in spectrum(8, 0.1, 10.0), b in spectrum(8, 0.1, 10.0)) {
        let mu = GaussianMeasure::probability(&a).unwrap();
        let nu = GaussianMeasure::probability(&b).unwrap();
        let (big, small) = if a.len() >= b.len() { (&mu, &nu) } else { (&nu, &mu) };
        let mut expected = big.trace_sq() + small.trace_sq();
        for (x, y) in big.spectrum().iter().zip(small.spectrum()) {
            expected -= 2.0 * x * y;
        }
        prop_assert_eq!(igw_entropic(&mu, &nu, 0.0).unwrap().value, expected.max(0.0));
    }

    #[test]
    fn balanced_plan_is_valid_and_decomposes(a in spectrum(6, 0.1, 10.0), b in spectrum(6, 0.1, 10.0), eps in 0.0..10.0f64) {
        let mu = GaussianMeasure::probability(&a).unwrap();
        let nu = GaussianMeasure::probability(&b).unwrap();
        let r = igw_entropic(&mu, &nu, eps).unwrap();
        let plan = &r.plan;
        for k in 0..plan.dim_y() {
            prop_assert!(plan.k_xy()[k].powi(2) <= plan.sigma_x()[k] * plan.sigma_y()[k] * (1.0 + 1e-12));
            let ll = plan.sigma_x()[k] * plan.sigma_y()[k];
            prop_assert!((plan.k_xy()[k].powi(2) - ll * r.kappas[k]).abs() <= 1e-12 * ll);
        }
        if eps > 0.0 {
            let entropy = -0.5 * r.kappas.iter().map(|k| (-k).ln_1p()).sum::<f64>();
            let total = igw_cost_of_plan(plan) + eps * entropy;
            prop_assert!((total - r.value).abs() <= 1e-10 * r.value.abs().max(1.0), "{} vs {}", total, r.value);
        }
    }

    #[test]
    fn unbalanced_coordinate_structure(a in 0.1..10.0f64, b in 0.1..10.0f64, eps in 0.0..10.0f64, tau in 0.01..10.0f64) {
        let s = minimize_g_plus(a, b, eps, tau).unwrap();
        let (x, y) = (s.x, s.y.unwrap());
        let (xt, yt) = minimize_g_neg1(a, b, eps, tau).unwrap();
        let (xh, yh) = minimize_g_plus1(a, b, eps, tau).unwrap();
        // both stationary products sit on the same side of eps / 2
        prop_assert_eq!(xt * yt < eps / 2.0, xh * yh < eps / 2.0);
        prop_assert_eq!(s.branch == Branch::Decoupled, xt * yt < eps / 2.0);
        prop_assert!(s.g_value <= g_plus(xt, yt, a, b, eps, tau) + 1e-12 * s.g_value.abs().max(1.0));
        prop_assert!(s.g_value <= g_plus(xh, yh, a, b, eps, tau) + 1e-12 * s.g_value.abs().max(1.0));
        prop_assert!(g_pos1(x, y, a, b, eps, tau).is_finite());
        prop_assert!(s.psi * s.psi <= x * y * (1.0 + 1e-12));
        let c = tau + eps;
        let (hxx, hyy, hxy) = match s.branch {
            Branch::Decoupled => (2.0 + c / (x * x), 2.0 + c / (y * y), 0.0),
            Branch::Correlated => (2.0 + tau / (x * x), 2.0 + tau / (y * y), -2.0),
        };
        prop_assert!(hxx > 0.0 && hxx * hyy - hxy * hxy > 0.0);
    }

    #[test]
    fn uigw_orders_and_decomposes(a in spectrum(5, 0.1, 10.0), b in spectrum(5, 0.1, 10.0), ma in 0.2..3.0f64, mb in 0.2..3.0f64, eps in 0.0..5.0f64, tau in 0.05..5.0f64) {
        let mu = GaussianMeasure::from_spectrum(ma, &a).unwrap();
        let nu = GaussianMeasure::from_spectrum(mb, &b).unwrap();
        let r = uigw_entropic(&mu, &nu, eps, tau).unwrap();
        prop_assert!(r.ordered);
        let x = r.mass_sq;
        let (la, lb) = (ma * ma, mb * mb);
        let mut expected = x * r.upsilon + tau * (kl_scalar(x, la) + kl_scalar(x, lb));
        if eps > 0.0 {
            expected += eps * kl_scalar(x, la * lb);
        }
        prop_assert!((r.value - expected).abs() <= 1e-10 * r.value.abs().max(1.0));
        for c in &r.coords {
            if let Some(y) = c.y {
                prop_assert!(c.psi * c.psi <= c.x * y * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn barycenter_spectrum_is_non_increasing(spec in barycenter_spec()) {
        let r = igw_barycenter(&spec).unwrap();
        prop_assert!(r.spectrum.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn barycenter_is_permutation_equivariant(spec in barycenter_spec(), shift in 0usize..4, fraction in 0.001..0.5f64) {
        for spec in [spec.clone(), with_small_epsilon(spec, fraction)] {
            let n = spec.measures.len();
            let idx: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let permuted = BarycenterSpec {
                measures: idx.iter().map(|&i| spec.measures[i].clone()).collect(),
                weights: idx.iter().map(|&i| spec.weights[i]).collect(),
                ..spec.clone()
            };
            let total: f64 = permuted.weights.iter().sum();
            prop_assume!((total - 1.0).abs() <= 1e-12);
            let (r, p) = (entropic_igw_barycenter(&spec).unwrap(), entropic_igw_barycenter(&permuted).unwrap());
            for (x, y) in r.spectrum.iter().zip(&p.spectrum) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{:?} vs {:?}", r.spectrum, p.spectrum);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn barycenter_first_order_system(spec in barycenter_spec(), fraction in 0.001..0.5f64) {
        let spec = with_small_epsilon(spec, fraction);
        let eps = spec.epsilon;
        let r = entropic_igw_barycenter(&spec).unwrap();
        for (j, s) in r.spectrum.iter().enumerate() {
            for (l, m) in spec.measures.iter().enumerate() {
                if let Some(&lam) = m.spectrum().get(j) {
                    let k = r.kappas[l][j];
                    // d/dk of (S^2 + (eps/2) w log(1 - k)), divided by w
                    let lhs = 2.0 * lam * s;
                    let rhs = eps / (2.0 * (1.0 - k));
                    prop_assert!((lhs - rhs).abs() <= 1e-7 * lhs.max(1.0), "{} vs {}", lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn barycenter_matches_coordinate_oracle(spec in barycenter_spec(), fraction in 0.001..0.5f64) {
        let spec = with_small_epsilon(spec, fraction);
        let r = entropic_igw_barycenter(&spec).unwrap();
        for j in 0..spec.target_dim {
            let terms: Vec<(f64, f64)> = spec.measures.iter().zip(&spec.weights)
                .filter_map(|(m, w)| m.spectrum().get(j).map(|l| (*w, *l)))
                .collect();
            let (oracle, _) = barycenter_coordinate_oracle(&terms, spec.epsilon);
            let mine: Vec<f64> = spec.measures.iter().enumerate()
                .filter(|(_, m)| m.dim() > j)
                .map(|(l, _)| r.kappas[l][j])
                .collect();
            for (a, b) in mine.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn g_plus_matches_grid(a in 0.1..10.0f64, b in 0.1..10.0f64, eps in 0.01..10.0f64, tau in 0.01..10.0f64) {
        let s = minimize_g_plus(a, b, eps, tau).unwrap();
        let (_, _, grid) = g_plus_grid_min(a, b, eps, tau).unwrap();
        prop_assert!((s.g_value - grid).abs() <= 1e-6, "{} vs {}", s.g_value, grid);
    }
}

#[test]
fn monte_carlo_is_unbiased_over_seeds() {
    let plan = CouplingPlan::from_kappas(1.0, vec![2.0, 1.0], vec![1.5], &[0.6]).unwrap();
    let exact = igw_cost_of_plan(&plan);
    let runs: Vec<_> = (0..50u64)
        .map(|seed| monte_carlo_igw_cost(&plan, 10_000, 1000 + seed).unwrap())
        .collect();
    let mean = runs.iter().map(|r| r.estimate).sum::<f64>() / runs.len() as f64;
    let pooled =
        (runs.iter().map(|r| r.std_error * r.std_error).sum::<f64>() / runs.len() as f64).sqrt();
    assert!(
        (mean - exact).abs() <= pooled,
        "{mean} vs {exact} (pooled se {pooled})"
    );
}

#[test]
fn discrete_solver_converges_with_grid_refinement() {
    let mu = GaussianMeasure::probability(&[1.0]).unwrap();
    let nu = GaussianMeasure::probability(&[2.0]).unwrap();
    let eps = 1.0;
    let exact = igw_entropic(&mu, &nu, eps).unwrap().value;
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let sol = discrete_entropic_gw(
                &quantize_gaussian(&mu, n).unwrap(),
                &quantize_gaussian(&nu, n).unwrap(),
                eps,
                1000,
                1e-10,
            )
            .unwrap();
            assert!(sol.report.converged);
            ((sol.value - exact) / exact).abs()
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}
