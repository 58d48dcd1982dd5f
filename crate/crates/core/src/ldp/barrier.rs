//! Minimum transport cost over a product of KL balls.
//!
//! Solves `min ⟨π, c⟩` over couplings `π` whose marginals either lie in a
//! ball `{Q : D(Q‖P) ≤ r}` or are pinned to a given distribution. The problem
//! is convex; a log-barrier interior-point method with Newton steps in the
//! null space of the equality constraints solves it to about `1e-10`.

use nalgebra::{DMatrix, DVector};

use crate::numeric::zero_sum_basis;
use crate::transport::{transport_raw, CostMatrix};

/// Radius below which a ball is treated as its centre.
pub(crate) const MIN_RADIUS: f64 = 1e-13;

const GAP_TOL: f64 = 1e-11;
const NEWTON_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 80;
const OBJECTIVE_TOL: f64 = 1e-12;

/// Constraint on one marginal.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Side<'a> {
    Ball { center: &'a [f64], radius: f64 },
    Fixed(&'a [f64]),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct BallMin {
    pub value: f64,
    pub converged: bool,
}

struct Marginal {
    idx: Vec<usize>,
    base: Vec<f64>,
    radius: Option<f64>,
}

impl Marginal {
    fn from_side(s: Side<'_>) -> Self {
        let (m, radius) = match s {
            Side::Ball { center, radius } => (center, Some(radius)),
            Side::Fixed(q) => (q, None),
        };
        let idx: Vec<usize> = (0..m.len()).filter(|&i| m[i] > 0.0).collect();
        let total: f64 = idx.iter().map(|&i| m[i]).sum();
        let base = idx.iter().map(|&i| m[i] / total).collect();
        let radius = radius.filter(|&r| r >= MIN_RADIUS && idx.len() > 1);
        Marginal { idx, base, radius }
    }
}

fn kl(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 })
        .sum::<f64>()
}

/// `min ⟨π, c⟩` subject to the two marginal constraints.
pub(crate) fn min_cost_in_balls(c: &CostMatrix, x: Side<'_>, y: Side<'_>) -> BallMin {
    let mx = Marginal::from_side(x);
    let my = Marginal::from_side(y);
    let (nr, nc) = (mx.idx.len(), my.idx.len());
    let cost: Vec<f64> = mx
        .idx
        .iter()
        .flat_map(|&a| my.idx.iter().map(move |&b| c.get(a, b)))
        .collect();
    if mx.radius.is_none() && my.radius.is_none() {
        let raw = transport_raw(&mx.base, &my.base, |a, b| cost[a * nc + b]);
        return BallMin {
            value: raw.objective,
            converged: true,
        };
    }
    let m = nr * nc;
    let z = null_space_basis(nr, nc, mx.radius.is_none(), my.radius.is_none());
    let mut pi: Vec<f64> = mx
        .base
        .iter()
        .flat_map(|a| my.base.iter().map(move |b| a * b))
        .collect();
    let n_ineq = (m + usize::from(mx.radius.is_some()) + usize::from(my.radius.is_some())) as f64;
    let problem = Barrier {
        nr,
        nc,
        cost: &cost,
        mx: &mx,
        my: &my,
    };
    let mut t = 1.0;
    let mut converged = true;
    loop {
        converged &= problem.center(&mut pi, t, &z);
        if n_ineq / t < GAP_TOL {
            break;
        }
        t *= 10.0;
    }
    BallMin {
        value: cost.iter().zip(&pi).map(|(c, p)| c * p).sum(),
        converged,
    }
}

/// Orthonormal basis of directions preserving the pinned marginals (and
/// total mass).
fn null_space_basis(nr: usize, nc: usize, x_fixed: bool, y_fixed: bool) -> DMatrix<f64> {
    let m = nr * nc;
    let cols: Vec<Vec<f64>> = if x_fixed {
        let b = zero_sum_basis(nc);
        (0..nr)
            .flat_map(|a| {
                b.iter().map(move |v| {
                    let mut full = vec![0.0; m];
                    full[a * nc..(a + 1) * nc].copy_from_slice(v);
                    full
                })
            })
            .collect()
    } else if y_fixed {
        let b = zero_sum_basis(nr);
        (0..nc)
            .flat_map(|col| {
                b.iter().map(move |v| {
                    let mut full = vec![0.0; m];
                    for (a, &val) in v.iter().enumerate() {
                        full[a * nc + col] = val;
                    }
                    full
                })
            })
            .collect()
    } else {
        zero_sum_basis(m)
    };
    DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i])
}

struct Barrier<'a> {
    nr: usize,
    nc: usize,
    cost: &'a [f64],
    mx: &'a Marginal,
    my: &'a Marginal,
}

impl Barrier<'_> {
    fn marginals(&self, pi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rx = vec![0.0; self.nr];
        let mut ry = vec![0.0; self.nc];
        for a in 0..self.nr {
            for b in 0..self.nc {
                rx[a] += pi[a * self.nc + b];
                ry[b] += pi[a * self.nc + b];
            }
        }
        (rx, ry)
    }

    /// Barrier objective; `None` outside the strict interior.
    fn value(&self, pi: &[f64], t: f64) -> Option<f64> {
        if pi.iter().any(|&p| p <= 0.0) {
            return None;
        }
        let (rx, ry) = self.marginals(pi);
        let mut v = t * self.cost.iter().zip(pi).map(|(c, p)| c * p).sum::<f64>();
        v -= pi.iter().map(|p| p.ln()).sum::<f64>();
        for (marg, q) in [(self.mx, &rx), (self.my, &ry)] {
            if let Some(r) = marg.radius {
                let s = r - kl(q, &marg.base);
                if s <= 0.0 {
                    return None;
                }
                v -= s.ln();
            }
        }
        Some(v)
    }

    fn grad_hess(&self, pi: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let m = pi.len();
        let nc = self.nc;
        let (rx, ry) = self.marginals(pi);
        let mut g = DVector::from_fn(m, |i, _| t * self.cost[i] - 1.0 / pi[i]);
        let mut h = DMatrix::from_fn(
            m,
            m,
            |i, j| if i == j { 1.0 / (pi[i] * pi[i]) } else { 0.0 },
        );
        let row_of = |i: usize| i / nc;
        let col_of = |i: usize| i % nc;
        for (marg, q, key) in [
            (self.mx, &rx, &row_of as &dyn Fn(usize) -> usize),
            (self.my, &ry, &col_of as &dyn Fn(usize) -> usize),
        ] {
            let Some(r) = marg.radius else { continue };
            let s = r - kl(q, &marg.base);
            let d: Vec<f64> = (0..m)
                .map(|i| (q[key(i)] / marg.base[key(i)]).ln() + 1.0)
                .collect();
            for i in 0..m {
                g[i] += d[i] / s;
                for j in 0..m {
                    let mut v = d[i] * d[j] / (s * s);
                    if key(i) == key(j) {
                        v += 1.0 / (s * q[key(i)]);
                    }
                    h[(i, j)] += v;
                }
            }
        }
        (g, h)
    }

    /// Newton centering at barrier weight `t`; false if it did not settle.
    fn center(&self, pi: &mut Vec<f64>, t: f64, z: &DMatrix<f64>) -> bool {
        let mut prev_dec = f64::INFINITY;
        for _ in 0..MAX_NEWTON {
            let (g, h) = self.grad_hess(pi, t);
            let hr = z.transpose() * &h * z;
            let gr = z.transpose() * &g;
            let w = match hr.clone().cholesky() {
                Some(ch) => ch.solve(&(-&gr)),
                None => match hr.lu().solve(&(-&gr)) {
                    Some(w) => w,
                    None => return prev_dec / t <= 1e3 * OBJECTIVE_TOL,
                },
            };
            let step = z * w;
            let dec = -g.dot(&step);
            // `dec / t` bounds the objective error of the current iterate; at
            // large t rounding keeps `dec` itself from reaching NEWTON_TOL.
            if !dec.is_finite() {
                return false;
            }
            if dec / 2.0 <= NEWTON_TOL || dec / t <= OBJECTIVE_TOL {
                return true;
            }
            prev_dec = dec;
            let f0 = self.value(pi, t).unwrap_or(f64::INFINITY);
            let mut s = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let cand: Vec<f64> = pi.iter().zip(step.iter()).map(|(p, d)| p + s * d).collect();
                if cand == *pi {
                    break;
                }
                if let Some(f1) = self.value(&cand, t) {
                    if f1 <= f0 - 0.1 * s * dec {
                        *pi = cand;
                        moved = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !moved {
                // No progress possible at working precision.
                return dec / t <= 1e3 * OBJECTIVE_TOL;
            }
        }
        false
    }
}
