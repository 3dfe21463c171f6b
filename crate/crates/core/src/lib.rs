//! Closed-form entropic inner-product Gromov-Wasserstein divergences between
//! zero-mean Gaussian measures, their unbalanced variant, barycenters, and the
//! numerical oracles used to cross-check every closed form.
//!
//! All evaluators work in the eigencoordinates of the input covariances, where
//! optimal plans are diagonal and the problems separate coordinate by
//! coordinate.

pub mod balanced;
pub mod barycenter;
pub mod error;
pub mod model;
pub mod oracles;
pub mod unbalanced;

pub use balanced::{
    igw_entropic, optimal_kappa, plan_log_det, verify_trace_bound, IgwResult, TraceBound,
};
pub use barycenter::{
    entropic_igw_barycenter, igw_barycenter, subset_search_maximizer, BarycenterResult,
    BarycenterSpec, FormulaFlag, SubsetSolution,
};
pub use error::{Error, Result};
pub use model::{
    igw_cost_of_plan, kl_gaussian, kl_quadratic, kl_scalar, make_gaussian, plan_kl_decomposition,
    psi, CouplingPlan, GaussianMeasure, KlDecomposition, MeasureSpec,
};
pub use unbalanced::{
    minimize_g_neg1, minimize_g_plus, minimize_g_plus1, minimize_h, optimal_mass,
    solve_branch_cubic, uigw_entropic, Branch, CoordSolution, UigwResult,
};
