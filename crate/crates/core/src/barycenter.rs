//! IGW barycenters of Gaussian probability measures.
//!
//! Coordinate `j` of a `d`-dimensional barycenter receives contributions from
//! every input with at least `j + 1` dimensions. Write
//! `A_j = sum_l a_l lambda_{l,j}` and `B_j = sum_l a_l` over those inputs.
//! Without regularization the barycenter eigenvalue is `A_j`. With
//! regularization each input's squared correlation maximizes
//!
//! ```text
//! F_j(k) = (sum_l a_l lambda_{l,j} k_l)^2 + (eps/2) sum_l a_l log(1 - k_l)
//! ```
//!
//! whose interior critical point is
//! `k_l = 1 - eps / (2 lambda_{l,j} (A_j + sqrt(A_j^2 - eps B_j)))`,
//! and the eigenvalue is `sum_l a_l lambda_{l,j} k_l`.

use serde::Serialize;

use crate::balanced::check_epsilon;
use crate::error::{Error, Result};
use crate::model::GaussianMeasure;
use crate::oracles::barycenter_coordinate_oracle;

/// Maximum index count for exhaustive subset search.
pub const MAX_SUBSET_INDICES: usize = 24;

/// Agreement threshold between a printed correlation formula and the
/// numerical per-coordinate maximizer.
pub const FORMULA_TOL: f64 = 1e-6;

/// Inputs of a barycenter problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterSpec {
    pub measures: Vec<GaussianMeasure>,
    pub weights: Vec<f64>,
    pub target_dim: usize,
    pub epsilon: f64,
}

impl BarycenterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::InvalidWeights("no input measures".into()));
        }
        if self.weights.len() != self.measures.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} measures",
                self.weights.len(),
                self.measures.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidWeights(format!("weight {w} is not positive")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {total}, not 1"
            )));
        }
        if let Some(m) = self.measures.iter().find(|m| !m.is_probability()) {
            return Err(Error::UnbalancedInput { mass: m.mass() });
        }
        let max_dim = self
            .measures
            .iter()
            .map(GaussianMeasure::dim)
            .max()
            .unwrap_or(0);
        if self.target_dim == 0 {
            return Err(Error::InvalidArgument(
                "target dimension must be positive".into(),
            ));
        }
        if self.target_dim > max_dim {
            return Err(Error::DimensionTooLarge {
                requested: self.target_dim,
                max: max_dim,
            });
        }
        check_epsilon(self.epsilon)
    }

    /// `(input index, weight, eigenvalue)` for every input reaching coordinate `j`.
    fn contributors(&self, j: usize) -> Vec<(usize, f64, f64)> {
        self.measures
            .iter()
            .zip(&self.weights)
            .enumerate()
            .filter_map(|(l, (m, w))| m.spectrum().get(j).map(|lam| (l, *w, *lam)))
            .collect()
    }
}

/// Which printed correlation formula the numerical maximizer confirmed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormulaFlag {
    /// `1 - eps / (lambda (A + sqrt(A^2 - eps B)))`.
    Statement,
    /// `1 - eps / (2 lambda (A + sqrt(A^2 - eps B)))`.
    Proof,
    /// Both agree within tolerance, which happens when `eps` is tiny
    /// relative to `lambda A`.
    Both,
    /// Neither agrees at some coordinate; the numerical maximizer was used.
    /// This happens when `eps B` approaches `A^2`: the interior critical
    /// point then has a negative objective and the maximizer is `k = 0`.
    Neither,
}

impl FormulaFlag {
    fn classify(statement: bool, proof: bool) -> Self {
        match (statement, proof) {
            (true, true) => FormulaFlag::Both,
            (true, false) => FormulaFlag::Statement,
            (false, true) => FormulaFlag::Proof,
            (false, false) => FormulaFlag::Neither,
        }
    }

    fn merge(self, other: Self) -> Self {
        if self == other {
            return self;
        }
        match (self, other) {
            (FormulaFlag::Both, x) | (x, FormulaFlag::Both) => x,
            _ => FormulaFlag::Neither,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarycenterResult {
    /// Barycenter eigenvalues, one per target coordinate.
    pub spectrum: Vec<f64>,
    /// `kappas[l][j]` for `j < min(d, m_l)`.
    pub kappas: Vec<Vec<f64>>,
    /// Small-epsilon condition per coordinate.
    pub condition_ok: Vec<bool>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub formula_flag: FormulaFlag,
    /// Largest `|kappa_oracle - kappa_returned|` over all coordinates.
    pub oracle_delta: f64,
    pub epsilon: f64,
}

fn weighted_sums(spec: &BarycenterSpec) -> (Vec<f64>, Vec<f64>) {
    (0..spec.target_dim)
        .map(|j| {
            spec.contributors(j)
                .iter()
                .fold((0.0, 0.0), |(a, b), (_, w, lam)| (a + w * lam, b + w))
        })
        .unzip()
}

fn empty_kappas(spec: &BarycenterSpec) -> Vec<Vec<f64>> {
    spec.measures
        .iter()
        .map(|m| Vec::with_capacity(m.dim().min(spec.target_dim)))
        .collect()
}

/// Unregularized barycenter: the eigenvalues are the weighted means of the
/// input eigenvalues, each input contributing only up to its dimension.
pub fn igw_barycenter(spec: &BarycenterSpec) -> Result<BarycenterResult> {
    spec.validate()?;
    if spec.epsilon != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "unregularized barycenter needs epsilon = 0, got {}",
            spec.epsilon
        )));
    }
    let (a, b) = weighted_sums(spec);
    let mut kappas = empty_kappas(spec);
    for j in 0..spec.target_dim {
        for (l, _, _) in spec.contributors(j) {
            kappas[l].push(1.0);
        }
    }
    Ok(BarycenterResult {
        spectrum: a.clone(),
        kappas,
        condition_ok: vec![true; spec.target_dim],
        a,
        b,
        formula_flag: FormulaFlag::Both,
        oracle_delta: 0.0,
        epsilon: 0.0,
    })
}

/// Entropic barycenter under the small-epsilon condition
/// `A_j^2 >= eps B_j` and `eps <= 2 lambda_{l,j} (A_j + sqrt(A_j^2 - eps B_j))`.
///
/// Each coordinate's correlations are cross-checked against a numerical
/// maximizer of `F_j`; the flag records which printed formula it confirms.
/// Where neither formula agrees the numerical maximizer is returned.
pub fn entropic_igw_barycenter(spec: &BarycenterSpec) -> Result<BarycenterResult> {
    spec.validate()?;
    if spec.epsilon == 0.0 {
        return igw_barycenter(spec);
    }
    let eps = spec.epsilon;
    let (a, b) = weighted_sums(spec);

    let mut violations = Vec::new();
    for j in 0..spec.target_dim {
        let disc = a[j] * a[j] - eps * b[j];
        for (l, _, lam) in spec.contributors(j) {
            if disc < 0.0 || eps > 2.0 * lam * (a[j] + disc.sqrt()) {
                violations.push((j, l));
            }
        }
    }
    if !violations.is_empty() {
        return Err(Error::EpsilonConditionViolated { pairs: violations });
    }

    let mut kappas = empty_kappas(spec);
    let mut spectrum = Vec::with_capacity(spec.target_dim);
    let mut flag: Option<FormulaFlag> = None;
    let mut oracle_delta = 0.0_f64;
    for j in 0..spec.target_dim {
        let contributors = spec.contributors(j);
        let root = a[j] + (a[j] * a[j] - eps * b[j]).sqrt();
        let proof: Vec<f64> = contributors
            .iter()
            .map(|(_, _, lam)| 1.0 - eps / (2.0 * lam * root))
            .collect();
        let statement: Vec<f64> = contributors
            .iter()
            .map(|(_, _, lam)| 1.0 - eps / (lam * root))
            .collect();

        let terms: Vec<(f64, f64)> = contributors.iter().map(|(_, w, lam)| (*w, *lam)).collect();
        let (oracle, _) = barycenter_coordinate_oracle(&terms, eps);

        let max_gap = |k: &[f64]| {
            k.iter()
                .zip(&oracle)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let (gap_statement, gap_proof) = (max_gap(&statement), max_gap(&proof));
        let local = FormulaFlag::classify(gap_statement <= FORMULA_TOL, gap_proof <= FORMULA_TOL);
        flag = Some(flag.map_or(local, |f| f.merge(local)));

        let chosen = match local {
            FormulaFlag::Proof | FormulaFlag::Both => proof,
            FormulaFlag::Statement => statement,
            FormulaFlag::Neither => oracle.clone(),
        };
        oracle_delta = oracle_delta.max(max_gap(&chosen));
        let mut value = 0.0;
        for ((l, w, lam), k) in contributors.iter().zip(&chosen) {
            value += w * lam * k;
            kappas[*l].push(*k);
        }
        spectrum.push(value);
    }

    Ok(BarycenterResult {
        spectrum,
        kappas,
        condition_ok: vec![true; spec.target_dim],
        a,
        b,
        formula_flag: flag.unwrap_or(FormulaFlag::Both),
        oracle_delta,
        epsilon: eps,
    })
}

/// Maximizer of `(sum a_i x_i)^2 + sum (b_i/2) log(1 - x_i)` over `[0, 1)^s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSolution {
    /// Active indices, ascending.
    pub subset: Vec<usize>,
    pub x: Vec<f64>,
    pub value: f64,
}

/// Exhaustive search over active sets `S`. On each `S` the candidate is
/// `x_i = 1 - b_i / (2 a_i (A_S + sqrt(A_S^2 - B_S)))`, admissible when
/// `A_S^2 >= B_S` and every `x_i >= 0`; indices outside `S` are 0. Subsets
/// are visited by decreasing size and a later subset replaces the incumbent
/// only with a strictly larger value.
pub fn subset_search_maximizer(a: &[f64], b: &[f64]) -> Result<SubsetSolution> {
    let s = a.len();
    if b.len() != s {
        return Err(Error::DimensionMismatch {
            expected: s,
            found: b.len(),
        });
    }
    if s > MAX_SUBSET_INDICES {
        return Err(Error::TooManyIndices {
            requested: s,
            max: MAX_SUBSET_INDICES,
        });
    }
    if let Some(v) = a.iter().chain(b).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "coefficients must be positive, got {v}"
        )));
    }

    let mut best = SubsetSolution {
        subset: Vec::new(),
        x: vec![0.0; s],
        value: 0.0,
    };
    let mut found = false;
    let mut x = vec![0.0; s];
    for size in (1..=s).rev() {
        // Gosper's hack: all masks with `size` bits set, in increasing order
        let mut mask: u32 = (1u32 << size) - 1;
        while mask < (1u32 << s) {
            let members = (0..s).filter(|i| mask & (1 << i) != 0);
            let (sum_a, sum_b) = members
                .clone()
                .fold((0.0, 0.0), |(sa, sb), i| (sa + a[i], sb + b[i]));
            let disc = sum_a * sum_a - sum_b;
            if disc >= 0.0 {
                let root = sum_a + disc.sqrt();
                x.iter_mut().for_each(|v| *v = 0.0);
                let mut admissible = true;
                for i in members.clone() {
                    x[i] = 1.0 - b[i] / (2.0 * a[i] * root);
                    admissible &= x[i] >= 0.0;
                }
                if admissible {
                    let value = subset_value(a, b, &x);
                    if !found || value > best.value {
                        best = SubsetSolution {
                            subset: members.collect(),
                            x: x.clone(),
                            value,
                        };
                        found = true;
                    }
                }
            }
            let low = mask & mask.wrapping_neg();
            let ripple = mask + low;
            mask = (((ripple ^ mask) >> 2) / low) | ripple;
        }
    }
    if !found || best.value < 0.0 {
        best = SubsetSolution {
            subset: Vec::new(),
            x: vec![0.0; s],
            value: 0.0,
        };
    }
    Ok(best)
}

fn subset_value(a: &[f64], b: &[f64], x: &[f64]) -> f64 {
    let linear: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
    let penalty: f64 = b.iter().zip(x).map(|(b, x)| 0.5 * b * (-x).ln_1p()).sum();
    linear * linear + penalty
}
