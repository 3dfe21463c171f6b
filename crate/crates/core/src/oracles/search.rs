//! Derivative-free scalar and low-dimensional searches.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
///
/// Only interior points are evaluated, so `f` may be singular at the
/// endpoints. Returns `(x, f(x))` with `x` within `tol` of the minimizer.
pub fn golden_section_min<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi && tol > 0.0) {
        return Err(Error::InvalidInterval { lo, hi, tol });
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let best = [(c, fc), (d, fd), (mid, fm)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("non-empty");
    Ok(best)
}

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidInterval {
                    lo: *l,
                    hi: *h,
                    tol: 0.0,
                });
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// Evaluates `f` on a tensor grid with `points` nodes per axis and returns the
/// `keep` best nodes (ascending by value).
fn grid_best<F: Fn(&[f64]) -> f64>(
    f: &F,
    bx: &SearchBox,
    points: usize,
    keep: usize,
) -> Vec<(Vec<f64>, f64)> {
    let dim = bx.dim();
    let total = points.pow(dim as u32);
    let mut best: Vec<(Vec<f64>, f64)> = Vec::with_capacity(keep + 1);
    let mut node = vec![0.0; dim];
    for flat in 0..total {
        let mut rest = flat;
        for (axis, coord) in node.iter_mut().enumerate() {
            let i = rest % points;
            rest /= points;
            let t = i as f64 / (points - 1) as f64;
            *coord = bx.lo[axis] + t * (bx.hi[axis] - bx.lo[axis]);
        }
        let v = f(&node);
        if !v.is_finite() {
            continue;
        }
        if best.len() < keep || v < best[best.len() - 1].1 {
            let pos = best.partition_point(|(_, bv)| *bv <= v);
            best.insert(pos, (node.clone(), v));
            best.truncate(keep);
        }
    }
    best
}

/// Multi-level grid refinement: each level evaluates a tensor grid, then
/// shrinks the box fivefold around the incumbent (clamped to the original
/// box). The `starts` best nodes of the first, finer level are each refined
/// and the overall best is returned.
pub fn grid_refine_min<F: Fn(&[f64]) -> f64>(
    f: F,
    bx: &SearchBox,
    levels: usize,
    points: usize,
    starts: usize,
) -> Result<(Vec<f64>, f64)> {
    if levels < 3 || points < 3 {
        return Err(Error::InvalidArgument(format!(
            "grid refinement needs levels >= 3 and points >= 3, got {levels} and {points}"
        )));
    }
    let first = grid_best(&f, bx, 2 * points - 1, starts.max(1));
    let mut overall: Option<(Vec<f64>, f64)> = None;
    for (mut center, mut value) in first {
        let mut half: Vec<f64> = (0..bx.dim())
            .map(|i| (bx.hi[i] - bx.lo[i]) / 10.0)
            .collect();
        for _ in 1..levels {
            let lo: Vec<f64> = (0..bx.dim())
                .map(|i| (center[i] - half[i]).max(bx.lo[i]))
                .collect();
            let hi: Vec<f64> = (0..bx.dim())
                .map(|i| (center[i] + half[i]).min(bx.hi[i]))
                .collect();
            if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
                break;
            }
            let local = SearchBox { lo, hi };
            if let Some((c, v)) = grid_best(&f, &local, points, 1).into_iter().next() {
                if v <= value {
                    center = c;
                    value = v;
                }
            }
            half.iter_mut().for_each(|h| *h /= 5.0);
        }
        if overall.as_ref().is_none_or(|(_, bv)| value < *bv) {
            overall = Some((center, value));
        }
    }
    overall.ok_or_else(|| {
        Error::InvalidArgument("objective is not finite anywhere on the grid".into())
    })
}

/// Two-dimensional grid refinement with 41 nodes per axis per level (81 on
/// the first level). Returns `(x, y, f(x, y))`.
pub fn grid_refine_min2d<F: Fn(f64, f64) -> f64>(
    f: F,
    x_range: (f64, f64),
    y_range: (f64, f64),
    levels: usize,
) -> Result<(f64, f64, f64)> {
    let bx = SearchBox::new(vec![x_range.0, y_range.0], vec![x_range.1, y_range.1])?;
    let (p, v) = grid_refine_min(|p: &[f64]| f(p[0], p[1]), &bx, levels, 41, 6)?;
    Ok((p[0], p[1], v))
}

/// Maximizes `f` over `[0, 1)` by a dense scan (uniform nodes plus nodes
/// accumulating at 1) followed by golden-section refinement between the
/// neighbours of the best node.
pub fn maximize_unit_interval<F: Fn(f64) -> f64>(f: F) -> (f64, f64) {
    let mut nodes: Vec<f64> = (0..=200).map(|i| i as f64 / 201.0).collect();
    nodes.extend((1..=150).map(|k| 1.0 - 10f64.powf(-(k as f64) / 10.0)));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap_or((0, &values[0]));
    let lo = if best == 0 { 0.0 } else { nodes[best - 1] };
    let hi = if best + 1 < nodes.len() {
        nodes[best + 1]
    } else {
        1.0
    };
    let mut incumbent = (nodes[best], values[best]);
    let span = hi - lo;
    if span > 0.0 {
        if let Ok((x, v)) = golden_section_min(|x| -f(x), lo, hi, (span * 1e-13).max(1e-300)) {
            if -v > incumbent.1 {
                incumbent = (x, -v);
            }
        }
    }
    if f(0.0) >= incumbent.1 {
        incumbent = (0.0, f(0.0));
    }
    incumbent
}

/// Cyclic coordinate ascent over `[0, 1)^n` from each start, every step an
/// exact one-dimensional maximization by [`maximize_unit_interval`].
/// Returns the best point found.
pub fn coordinate_ascent_unit_cube<F: Fn(&[f64]) -> f64>(
    f: F,
    starts: &[Vec<f64>],
    max_sweeps: usize,
) -> (Vec<f64>, f64) {
    let mut overall: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let mut x = start.clone();
        let mut value = f(&x);
        for _ in 0..max_sweeps {
            let before = value;
            let previous = x.clone();
            for i in 0..x.len() {
                let (xi, vi) = maximize_unit_interval(|t| {
                    let mut probe = x.clone();
                    probe[i] = t;
                    f(&probe)
                });
                if vi >= value {
                    x[i] = xi;
                    value = vi;
                }
            }
            let moved = x
                .iter()
                .zip(&previous)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if moved <= 1e-14 || value - before <= 1e-16 * value.abs().max(1.0) {
                break;
            }
        }
        if overall.as_ref().is_none_or(|(_, bv)| value > *bv) {
            overall = Some((x, value));
        }
    }
    overall.unwrap_or_else(|| (Vec::new(), f64::NEG_INFINITY))
}
