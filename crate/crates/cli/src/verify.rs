//! Randomized oracle sweeps behind `gw-gauss verify`.

use std::thread;

use gw_gauss_core::oracles::{
    balanced_igw_oracle, discrete_entropic_gw, monte_carlo_igw_cost, quantize_gaussian,
    subset_grid_max, uigw_composed_oracle,
};
use gw_gauss_core::{
    entropic_igw_barycenter, igw_barycenter, igw_cost_of_plan, igw_entropic,
    subset_search_maximizer, uigw_entropic, BarycenterSpec, CouplingPlan, FormulaFlag,
    GaussianMeasure,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::CliError;

pub const SUITES: [&str; 6] = [
    "balanced",
    "uigw",
    "barycenter",
    "subset",
    "monte_carlo",
    "discrete",
];

/// `(suite, check, tolerance)`; every check passes when its worst observed
/// delta is at most the tolerance.
pub const TOLERANCES: [(&str, &str, f64); 8] = [
    ("balanced", "value vs golden section", 1e-7),
    ("balanced", "kappa vs golden section", 1e-7),
    ("uigw", "value vs composed oracle", 1e-5),
    ("barycenter", "kappa vs coordinate oracle", 1e-6),
    ("subset", "value vs grid maximization", 1e-5),
    ("monte_carlo", "standard errors from trace formula", 3.0),
    ("discrete", "relative gap to closed form at 64 points", 0.05),
    ("discrete", "solver marginal error", 1e-6),
];

fn tolerance(suite: &str, check: &str) -> f64 {
    TOLERANCES
        .iter()
        .find(|(s, c, _)| *s == suite && *c == check)
        .map(|t| t.2)
        .expect("every check has a tolerance entry")
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub seed: u64,
    pub instances: usize,
    pub checks: Vec<Check>,
    pub formula_flags: Vec<String>,
    pub converged: bool,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToleranceEntry {
    pub suite: &'static str,
    pub check: &'static str,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub root_seed: u64,
    pub suites: Vec<SuiteReport>,
    pub tolerances: Vec<ToleranceEntry>,
    pub passed: bool,
}

impl VerifyReport {
    /// Largest `worst / tolerance` over all checks; at most 1 when all pass.
    pub fn worst_ratio(&self) -> f64 {
        self.suites
            .iter()
            .flat_map(|s| &s.checks)
            .map(|c| c.worst / c.tolerance)
            .fold(0.0, f64::max)
    }

    pub fn converged(&self) -> bool {
        self.suites.iter().all(|s| s.converged)
    }
}

struct Tracker {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Tracker {
    fn new(suite: &'static str) -> Self {
        Self {
            suite,
            checks: Vec::new(),
        }
    }

    fn record(&mut self, name: &'static str, delta: f64) {
        let delta = if delta.is_nan() { f64::INFINITY } else { delta };
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(c) => {
                c.worst = c.worst.max(delta);
                c.pass = c.worst <= c.tolerance;
            }
            None => {
                let tolerance = tolerance(self.suite, name);
                self.checks.push(Check {
                    name,
                    worst: delta,
                    tolerance,
                    pass: delta <= tolerance,
                });
            }
        }
    }

    fn finish(self, seed: u64, instances: usize) -> SuiteReport {
        SuiteReport {
            suite: self.suite,
            seed,
            instances,
            checks: self.checks,
            formula_flags: Vec::new(),
            converged: true,
        }
    }
}

fn log_uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn spectrum(rng: &mut ChaCha20Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut s: Vec<f64> = (0..dim).map(|_| log_uniform(rng, lo, hi)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn measure(rng: &mut ChaCha20Rng, mass: f64, max_dim: usize) -> GaussianMeasure {
    let dim = rng.random_range(1..=max_dim);
    GaussianMeasure::from_spectrum(mass, &spectrum(rng, dim, 0.1, 10.0)).expect("positive spectrum")
}

fn balanced(seed: u64) -> Result<SuiteReport, CliError> {
    const N: usize = 50;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut t = Tracker::new("balanced");
    for _ in 0..N {
        let mu = measure(&mut rng, 1.0, 6);
        let nu = measure(&mut rng, 1.0, 6);
        let eps = if rng.random_bool(0.1) {
            0.0
        } else {
            rng.random_range(0.0..10.0)
        };
        let closed = igw_entropic(&mu, &nu, eps)?;
        let oracle = balanced_igw_oracle(&mu, &nu, eps)?;
        t.record(
            "value vs golden section",
            (closed.value - oracle.value).abs(),
        );
        let dk = closed
            .kappas
            .iter()
            .zip(&oracle.kappas)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        t.record("kappa vs golden section", dk);
    }
    Ok(t.finish(seed, N))
}

fn uigw(seed: u64) -> Result<SuiteReport, CliError> {
    const N: usize = 5;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut t = Tracker::new("uigw");
    for _ in 0..N {
        let ma = log_uniform(&mut rng, 0.5, 2.0);
        let mb = log_uniform(&mut rng, 0.5, 2.0);
        let mu = measure(&mut rng, ma, 2);
        let nu = measure(&mut rng, mb, 2);
        let eps = log_uniform(&mut rng, 0.01, 10.0);
        let tau = log_uniform(&mut rng, 0.01, 10.0);
        let closed = uigw_entropic(&mu, &nu, eps, tau)?;
        let oracle = uigw_composed_oracle(&mu, &nu, eps, tau)?;
        t.record(
            "value vs composed oracle",
            (closed.value - oracle.value).abs(),
        );
    }
    Ok(t.finish(seed, N))
}

fn barycenter(seed: u64) -> Result<SuiteReport, CliError> {
    const N: usize = 10;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut t = Tracker::new("barycenter");
    let mut flags = Vec::new();
    for _ in 0..N {
        let count = rng.random_range(1..=3usize);
        let measures: Vec<GaussianMeasure> = (0..count)
            .map(|_| {
                let dim = rng.random_range(1..=3);
                GaussianMeasure::probability(&spectrum(&mut rng, dim, 0.5, 5.0))
                    .expect("positive spectrum")
            })
            .collect();
        let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let rest: f64 = weights[1..].iter().sum();
        weights[0] = 1.0 - rest;
        let max_dim = measures.iter().map(GaussianMeasure::dim).max().unwrap_or(1);
        let mut spec = BarycenterSpec {
            measures,
            weights,
            target_dim: rng.random_range(1..=max_dim),
            epsilon: 0.0,
        };
        let sums = igw_barycenter(&spec)?;
        let bound = sums
            .a
            .iter()
            .zip(&sums.b)
            .map(|(a, b)| a * a / b)
            .fold(f64::INFINITY, f64::min);
        spec.epsilon = log_uniform(&mut rng, 1e-3, 0.5) * bound;
        let r = entropic_igw_barycenter(&spec)?;
        t.record("kappa vs coordinate oracle", r.oracle_delta);
        flags.push(r.formula_flag);
    }
    let mut report = t.finish(seed, N);
    report.formula_flags = distinct_flags(&flags);
    Ok(report)
}

fn distinct_flags(flags: &[FormulaFlag]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for f in flags {
        let name = format!("{f:?}");
        if !names.contains(&name) {
            names.push(name);
        }
    }
    names
}

fn subset(seed: u64) -> Result<SuiteReport, CliError> {
    const N: usize = 20;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut t = Tracker::new("subset");
    for i in 0..N {
        let s = 1 + i % 2;
        let a = spectrum(&mut rng, s, 0.1, 5.0);
        let b = spectrum(&mut rng, s, 0.01, 10.0);
        let exact = subset_search_maximizer(&a, &b)?;
        let (_, grid) = subset_grid_max(&a, &b)?;
        t.record("value vs grid maximization", (exact.value - grid).abs());
    }
    Ok(t.finish(seed, N))
}

fn monte_carlo(seed: u64) -> Result<SuiteReport, CliError> {
    const N: usize = 3;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut t = Tracker::new("monte_carlo");
    for _ in 0..N {
        let m = rng.random_range(1..=3usize);
        let n = rng.random_range(1..=m);
        let sx = spectrum(&mut rng, m, 0.1, 5.0);
        let sy = spectrum(&mut rng, n, 0.1, 5.0);
        let kappas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.95)).collect();
        let plan = CouplingPlan::from_kappas(1.0, sx, sy, &kappas)?;
        let mc = monte_carlo_igw_cost(&plan, 100_000, rng.next_u64())?;
        let z = (mc.estimate - igw_cost_of_plan(&plan)).abs() / mc.std_error;
        t.record("standard errors from trace formula", z);
    }
    Ok(t.finish(seed, N))
}

fn discrete(seed: u64) -> Result<SuiteReport, CliError> {
    let mut t = Tracker::new("discrete");
    let mu = GaussianMeasure::probability(&[1.0])?;
    let nu = GaussianMeasure::probability(&[4.0])?;
    let eps = 0.5;
    let exact = igw_entropic(&mu, &nu, eps)?.value;
    let sol = discrete_entropic_gw(
        &quantize_gaussian(&mu, 64)?,
        &quantize_gaussian(&nu, 64)?,
        eps,
        1000,
        1e-9,
    )?;
    t.record(
        "relative gap to closed form at 64 points",
        ((sol.value - exact) / exact).abs(),
    );
    t.record("solver marginal error", sol.report.marginal_error);
    let mut report = t.finish(seed, 1);
    report.converged = sol.report.converged;
    Ok(report)
}

fn run_suite(name: &str, seed: u64) -> Result<SuiteReport, CliError> {
    match name {
        "balanced" => balanced(seed),
        "uigw" => uigw(seed),
        "barycenter" => barycenter(seed),
        "subset" => subset(seed),
        "monte_carlo" => monte_carlo(seed),
        "discrete" => discrete(seed),
        other => Err(CliError::Validation(format!("unknown suite {other}"))),
    }
}

/// Runs the named suite (or all of them) concurrently. Suite `i` is seeded
/// with the `i`-th draw of a ChaCha20 stream on `root_seed`, so a suite sees
/// the same seed whether it runs alone or with the others.
pub fn verify(suite: Option<&str>, root_seed: u64) -> Result<VerifyReport, CliError> {
    let mut root = ChaCha20Rng::seed_from_u64(root_seed);
    let seeds: Vec<u64> = SUITES.iter().map(|_| root.next_u64()).collect();
    let selected: Vec<(&'static str, u64)> = match suite {
        None | Some("all") => SUITES.iter().copied().zip(seeds).collect(),
        Some(name) => {
            let idx = SUITES.iter().position(|s| *s == name).ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown suite {name}; expected all or one of {}",
                    SUITES.join(", ")
                ))
            })?;
            vec![(SUITES[idx], seeds[idx])]
        }
    };
    let results: Vec<Result<SuiteReport, CliError>> = thread::scope(|scope| {
        let handles: Vec<_> = selected
            .iter()
            .map(|&(name, seed)| scope.spawn(move || run_suite(name, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite thread panicked"))
            .collect()
    });
    let suites = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let names: Vec<&str> = suites.iter().map(|s| s.suite).collect();
    let tolerances = TOLERANCES
        .iter()
        .filter(|(s, _, _)| names.contains(s))
        .map(|&(suite, check, tolerance)| ToleranceEntry {
            suite,
            check,
            tolerance,
        })
        .collect();
    let passed = suites.iter().all(SuiteReport::passed);
    Ok(VerifyReport {
        root_seed,
        suites,
        tolerances,
        passed,
    })
}
