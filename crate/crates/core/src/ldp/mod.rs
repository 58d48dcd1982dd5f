//! Large-deviation rate functions of the optimal excess-cost probability.
//!
//! * `f(α) = inf { max{D(Q_X‖P_X), D(Q_Y‖P_Y)} : E(Q_X, Q_Y) ≤ α }` governs
//!   `1 - G` below the transport cost.
//! * `g(α) = min{g_XY(α), g_YX(α)}` governs `G` above it, where `g_XY` is the
//!   smallest `D(Q_X‖P_X)` such that every `Q_Y` at least as close to `P_Y`
//!   leaves `E(Q_X, Q_Y) > α`.

mod barrier;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{kl_binary, kl_slice, Dist};
use crate::numeric::{bisect, compositions, zero_sum_basis};
use crate::transport::{transport_raw, CostMatrix};
use barrier::{min_cost_in_balls, Side, MIN_RADIUS};

/// Default simplex-grid resolution (points per dimension).
pub const DEFAULT_GRID: usize = 201;

/// Margin implementing the strict inequality in `g`'s constraint.
pub const STRICT_MARGIN: f64 = 1e-9;

const BISECTION_STEPS: usize = 60;
const MAX_GRID_POINTS: usize = 50_000;

/// Marginals, cost and threshold for a rate evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct RateQuery {
    pub p_x: Dist,
    pub p_y: Dist,
    pub c: CostMatrix,
    pub alpha: f64,
}

impl RateQuery {
    pub fn new(p_x: Dist, p_y: Dist, c: CostMatrix, alpha: f64) -> Result<Self> {
        c.check_dims(&p_x, &p_y)?;
        if alpha.is_nan() {
            return Err(Error::InvalidArgument("alpha is NaN".into()));
        }
        Ok(RateQuery { p_x, p_y, c, alpha })
    }

    fn with_alpha(&self, alpha: f64) -> Self {
        RateQuery {
            alpha,
            ..self.clone()
        }
    }
}

/// A rate value with a flag raised when an inner solve failed to settle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub value: f64,
    pub stalled: bool,
}

impl RateEstimate {
    fn exact(value: f64) -> Self {
        RateEstimate {
            value,
            stalled: false,
        }
    }
}

fn grid_resolution(grid: usize, dims: usize) -> usize {
    let mut n = grid.max(2) - 1;
    while n > 1 && compositions_count(n, dims) > MAX_GRID_POINTS {
        n -= 1;
    }
    n
}

fn compositions_count(n: usize, parts: usize) -> usize {
    crate::numeric::binomial_f64((n + parts - 1) as u64, (parts - 1) as u64) as usize
}

/// Grid of distributions supported on `support` (within an alphabet of size `k`).
fn simplex_grid(k: usize, support: &[usize], resolution: usize) -> Vec<Vec<f64>> {
    compositions(resolution, support.len())
        .into_iter()
        .map(|comp| {
            let mut q = vec![0.0; k];
            for (&i, &v) in support.iter().zip(&comp) {
                q[i] = v as f64 / resolution as f64;
            }
            q
        })
        .collect()
}

/// `f(α)`: bisection on the KL level, each level decided by minimising the
/// cost over the product of the two balls.
pub fn rate_f(q: &RateQuery, grid: usize) -> Result<RateEstimate> {
    if q.p_x.len() > 4 || q.p_y.len() > 4 {
        return Err(Error::SizeGuard(
            "rate_f handles alphabets of at most 4 letters".into(),
        ));
    }
    let (px, py) = (q.p_x.mass(), q.p_y.mass());
    let e0 = transport_raw(px, py, |x, y| q.c.get(x, y)).objective;
    if q.alpha >= e0 - 1e-12 {
        return Ok(RateEstimate::exact(0.0));
    }
    if q.alpha < q.c.min_on_support(px, py) - 1e-12 {
        return Ok(RateEstimate::exact(f64::INFINITY));
    }
    let point_mass = |p: &[f64]| {
        p.iter()
            .filter(|&&m| m > 0.0)
            .map(|m| -m.ln())
            .fold(0.0, f64::max)
    };
    let mut hi = point_mass(px).max(point_mass(py));

    // One-sided perturbations give feasible levels and tighten the bracket.
    for (p, other, transpose) in [(px, py, false), (py, px, true)] {
        let support: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
        let res = grid_resolution(grid, support.len());
        let best = simplex_grid(p.len(), &support, res)
            .par_iter()
            .filter_map(|cand| {
                let e = if transpose {
                    transport_raw(other, cand, |x, y| q.c.get(x, y)).objective
                } else {
                    transport_raw(cand, other, |x, y| q.c.get(x, y)).objective
                };
                (e <= q.alpha).then(|| kl_slice(cand, p))
            })
            .reduce(|| f64::INFINITY, f64::min);
        hi = hi.min(best);
    }

    let mut lo = 0.0;
    let mut stalled = false;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let r = min_cost_in_balls(
            &q.c,
            Side::Ball {
                center: px,
                radius: mid,
            },
            Side::Ball {
                center: py,
                radius: mid,
            },
        );
        stalled |= !r.converged;
        if r.value <= q.alpha + 1e-12 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RateEstimate { value: hi, stalled })
}

/// `f(α)` for Bernoulli marginals `a ≤ b ≤ ½` under Hamming cost.
///
/// The minimiser moves `P_X` up to `a*` and `P_Y` down to `a* + α`, where the
/// two divergences balance.
pub fn rate_f_binary(a: f64, b: f64, alpha: f64) -> Result<f64> {
    check_binary(a, b)?;
    if alpha >= b - a {
        return Ok(0.0);
    }
    if alpha < 0.0 || alpha + a > 1.0 {
        return Ok(f64::INFINITY);
    }
    let phi = |t: f64| kl_binary(t + alpha, b) - kl_binary(t, a);
    let (lo, _) = bisect(phi, a, b - alpha, 200);
    Ok(kl_binary(lo + alpha, b).max(kl_binary(lo, a)))
}

fn check_binary(a: f64, b: f64) -> Result<()> {
    if !(0.0 <= a && a <= b && b <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "need 0 ≤ a ≤ b ≤ 1/2, got a={a}, b={b}"
        )));
    }
    Ok(())
}

/// Sign scan followed by bisection. Returns the root of the first sign
/// change met when walking the grid in the given direction.
fn scan_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, from_right: bool) -> Option<f64> {
    const STEPS: usize = 4096;
    let pts: Vec<f64> = (0..=STEPS)
        .map(|i| lo + (hi - lo) * i as f64 / STEPS as f64)
        .collect();
    let vals: Vec<f64> = pts.iter().map(|&t| f(t)).collect();
    let pairs: Vec<usize> = if from_right {
        (0..STEPS).rev().collect()
    } else {
        (0..STEPS).collect()
    };
    for i in pairs {
        let (u, v) = (vals[i], vals[i + 1]);
        if u == 0.0 {
            return Some(pts[i]);
        }
        if v == 0.0 {
            return Some(pts[i + 1]);
        }
        if (u > 0.0) != (v > 0.0) {
            let (l, h) = bisect(&f, pts[i], pts[i + 1], 200);
            return Some(0.5 * (l + h));
        }
    }
    None
}

/// `g(α)` for Bernoulli marginals `a ≤ b ≤ ½` under Hamming cost, for
/// `b - a < α ≤ 1`.
pub fn rate_g_binary(a: f64, b: f64, alpha: f64) -> Result<f64> {
    check_binary(a, b)?;
    if !(b - a < alpha && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need b - a < α ≤ 1, got α={alpha}"
        )));
    }
    // Branch moving P_X: largest a' ≤ b - α with D(a'+α‖b) = D(a'‖a).
    let a_branch = if b - alpha >= 0.0 {
        let phi = |t: f64| kl_binary(t + alpha, b) - kl_binary(t, a);
        scan_root(phi, 0.0, b - alpha, true).map_or(f64::INFINITY, |t| kl_binary(t, a))
    } else {
        f64::INFINITY
    };
    // Branch moving P_Y: smallest b' ≥ a + α with D(b'‖b) = D(b'-α‖a).
    let b_branch = if a + alpha <= 1.0 {
        let psi = |t: f64| kl_binary(t - alpha, a) - kl_binary(t, b);
        scan_root(psi, a + alpha, 1.0, false).map_or(f64::INFINITY, |t| kl_binary(t, b))
    } else {
        f64::INFINITY
    };
    Ok(a_branch.min(b_branch))
}

/// `g(α)`: simplex-grid search over `Q_X` with local refinement, in both
/// orientations.
///
/// The outer problem is not convex; the result is optimal up to the grid
/// resolution.
pub fn rate_g(q: &RateQuery, grid: usize) -> Result<RateEstimate> {
    if q.p_x.len() > 3 || q.p_y.len() > 3 {
        return Err(Error::SizeGuard(
            "rate_g handles alphabets of at most 3 letters".into(),
        ));
    }
    let (px, py) = (q.p_x.mass(), q.p_y.mass());
    let e0 = transport_raw(px, py, |x, y| q.c.get(x, y)).objective;
    if q.alpha <= e0 + 1e-12 {
        return Ok(RateEstimate::exact(0.0));
    }
    if q.alpha + STRICT_MARGIN > q.c.max_on_support(px, py) {
        return Ok(RateEstimate::exact(f64::INFINITY));
    }
    let ct = q.c.transpose();
    let xy = directional_g(px, py, &q.c, q.alpha, grid);
    let yx = directional_g(py, px, &ct, q.alpha, grid);
    Ok(RateEstimate {
        value: xy.value.min(yx.value),
        stalled: xy.stalled || yx.stalled,
    })
}

/// `h(Q_X) > α` test: the cheapest `Q_Y` within `D(Q_X‖P_X)` of `P_Y`.
fn g_feasible(
    cand: &[f64],
    p: &[f64],
    other: &[f64],
    c: &CostMatrix,
    alpha: f64,
) -> (bool, f64, bool) {
    let d = kl_slice(cand, p);
    let side_y = if d < MIN_RADIUS {
        Side::Fixed(other)
    } else {
        Side::Ball {
            center: other,
            radius: d,
        }
    };
    let r = min_cost_in_balls(c, Side::Fixed(cand), side_y);
    (r.value >= alpha + STRICT_MARGIN, d, r.converged)
}

fn directional_g(
    p: &[f64],
    other: &[f64],
    c: &CostMatrix,
    alpha: f64,
    grid: usize,
) -> RateEstimate {
    let k = p.len();
    let support: Vec<usize> = (0..k).filter(|&i| p[i] > 0.0).collect();
    if support.len() < 2 {
        return RateEstimate::exact(f64::INFINITY);
    }
    let res = grid_resolution(grid, support.len());
    let mut pts: Vec<(f64, Vec<f64>)> = simplex_grid(k, &support, res)
        .into_iter()
        .map(|cand| (kl_slice(&cand, p), cand))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut stalled = false;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for chunk in pts.chunks(64) {
        let results: Vec<(bool, f64, bool)> = chunk
            .par_iter()
            .map(|(_, cand)| g_feasible(cand, p, other, c, alpha))
            .collect();
        stalled |= results.iter().any(|r| !r.2);
        if let Some(i) = results.iter().position(|r| r.0) {
            best = Some((results[i].1, chunk[i].1.clone()));
            break;
        }
    }
    let Some((mut best_d, mut center)) = best else {
        return RateEstimate {
            value: f64::INFINITY,
            stalled,
        };
    };

    // Local zoom around the best feasible grid point.
    let basis: Vec<Vec<f64>> = zero_sum_basis(support.len())
        .into_iter()
        .map(|v| {
            let mut full = vec![0.0; k];
            for (&i, x) in support.iter().zip(v) {
                full[i] = x;
            }
            full
        })
        .collect();
    let dims = basis.len();
    let per_dim = 9usize;
    let offsets: Vec<Vec<f64>> = (0..per_dim.pow(dims as u32))
        .map(|mut code| {
            (0..dims)
                .map(|_| {
                    let i = code % per_dim;
                    code /= per_dim;
                    (i as f64 - (per_dim / 2) as f64) / (per_dim / 2) as f64
                })
                .collect()
        })
        .collect();
    let mut radius = 2.0 / res as f64;
    for _ in 0..60 {
        let cands: Vec<Vec<f64>> = offsets
            .iter()
            .filter_map(|off| {
                let mut cand = center.clone();
                for (b, &o) in basis.iter().zip(off) {
                    for (x, v) in cand.iter_mut().zip(b) {
                        *x += radius * o * v;
                    }
                }
                support.iter().all(|&i| cand[i] >= 0.0).then_some(cand)
            })
            .collect();
        let results: Vec<(bool, f64, bool)> = cands
            .par_iter()
            .map(|cand| g_feasible(cand, p, other, c, alpha))
            .collect();
        for (cand, r) in cands.into_iter().zip(results) {
            stalled |= !r.2;
            if r.0 && r.1 < best_d {
                best_d = r.1;
                center = cand;
            }
        }
        radius *= 0.6;
    }
    RateEstimate {
        value: best_d,
        stalled,
    }
}

/// `α ↦ f(α)` (or `g`) over a grid of thresholds, evaluated in parallel.
pub fn rate_curve(
    q: &RateQuery,
    alphas: &[f64],
    grid: usize,
    which: RateKind,
) -> Result<Vec<RateEstimate>> {
    alphas
        .par_iter()
        .map(|&a| {
            let qa = q.with_alpha(a);
            match which {
                RateKind::F => rate_f(&qa, grid),
                RateKind::G => rate_g(&qa, grid),
            }
        })
        .collect()
}

/// Which rate function to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateKind {
    F,
    G,
}
