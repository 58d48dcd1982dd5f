//! Moderate deviations: the signed-coupling program `θ` and the rates
//! `f̃(Δ)` (below the transport cost) and `g̃(Δ)` (above it).
//!
//! `θ(β_X, β_Y)` is the smallest `Σ β_XY c` over signed matrices with row
//! sums `β_X`, column sums `β_Y` and negative entries only on the optimal
//! support `S`. It is the directional derivative of the transport cost, so
//! perturbations of size `a` move `E` by `a θ(β) + o(a)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{chi2_half_slice, Dist, SignedVec};
use crate::numeric::{
    combine, convex_min, golden_min, nelder_mead, normalize, sphere_directions, zero_sum_basis,
};
use crate::transport::flow::MinCostFlow;
use crate::transport::{optimal_support, ot_cost, CostMatrix, SupportSet};

/// Signed matrix with prescribed row and column sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedMatrix {
    pub values: Vec<Vec<f64>>,
}

impl SignedMatrix {
    pub fn row_sums(&self) -> Vec<f64> {
        self.values.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let cols = self.values.first().map_or(0, |r| r.len());
        (0..cols)
            .map(|j| self.values.iter().map(|r| r[j]).sum())
            .collect()
    }
}

/// Tolerance for support membership when `S` is derived internally.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Cycle depth below which the `θ` network is considered to have no
/// negative cycle (support sets derived with a tolerance may include cells
/// whose reduced cost is a rounding error away from zero).
const THETA_CYCLE_TOL: f64 = 1e-9;

/// `θ` and an optimal signed coupling. `+∞` (no plan) when infeasible,
/// `-∞` when `S` admits a negative-cost circulation.
pub fn theta_with_plan(
    beta_x: &SignedVec,
    beta_y: &SignedVec,
    s: &SupportSet,
    c: &CostMatrix,
) -> Result<(f64, Option<SignedMatrix>)> {
    if beta_x.len() != c.rows() || beta_y.len() != c.cols() {
        return Err(Error::Dimension(format!(
            "β of sizes {} and {} for a {}x{} cost",
            beta_x.len(),
            beta_y.len(),
            c.rows(),
            c.cols()
        )));
    }
    if s.iter().any(|(x, y)| x >= c.rows() || y >= c.cols()) {
        return Err(Error::Dimension(
            "support cell outside the cost matrix".into(),
        ));
    }
    Ok(theta_solve(beta_x.values(), beta_y.values(), s, c))
}

/// `θ(β_X, β_Y)` for the support set `s`.
pub fn theta(
    beta_x: &SignedVec,
    beta_y: &SignedVec,
    s: &SupportSet,
    c: &CostMatrix,
) -> Result<f64> {
    Ok(theta_with_plan(beta_x, beta_y, s, c)?.0)
}

pub(crate) fn theta_raw(bx: &[f64], by: &[f64], s: &SupportSet, c: &CostMatrix) -> f64 {
    theta_solve(bx, by, s, c).0
}

fn theta_solve(
    bx: &[f64],
    by: &[f64],
    s: &SupportSet,
    c: &CostMatrix,
) -> (f64, Option<SignedMatrix>) {
    let (r, k) = (bx.len(), by.len());
    let (src, sink) = (r + k, r + k + 1);
    let required: f64 = bx.iter().filter(|&&v| v > 0.0).sum::<f64>()
        + by.iter().filter(|&&v| v < 0.0).map(|v| -v).sum::<f64>();
    let scale = required.max(1.0);
    let mut g = MinCostFlow::new(r + k + 2, 1e-15 * scale).with_cycle_tol(THETA_CYCLE_TOL);
    for (x, &v) in bx.iter().enumerate() {
        if v > 0.0 {
            g.add_edge(src, x, v, 0.0);
        } else if v < 0.0 {
            g.add_edge(x, sink, -v, 0.0);
        }
    }
    for (y, &v) in by.iter().enumerate() {
        if v > 0.0 {
            g.add_edge(r + y, sink, v, 0.0);
        } else if v < 0.0 {
            g.add_edge(src, r + y, -v, 0.0);
        }
    }
    let big = 2.0 * required + 1.0;
    let mut fwd = Vec::with_capacity(r * k);
    for x in 0..r {
        for y in 0..k {
            fwd.push(g.add_edge(x, r + y, big, c.get(x, y)));
        }
    }
    let bwd: Vec<((usize, usize), usize)> = s
        .iter()
        .map(|(x, y)| ((x, y), g.add_edge(r + y, x, big, -c.get(x, y))))
        .collect();
    if g.has_negative_cycle() {
        return (f64::NEG_INFINITY, None);
    }
    let Ok((flow, cost)) = g.run(src, sink, required) else {
        return (f64::NEG_INFINITY, None);
    };
    if flow < required - 1e-12 * scale {
        return (f64::INFINITY, None);
    }
    let mut values = vec![vec![0.0; k]; r];
    for x in 0..r {
        for y in 0..k {
            values[x][y] = g.flow(fwd[x * k + y]);
        }
    }
    for ((x, y), e) in bwd {
        values[x][y] -= g.flow(e);
    }
    (cost, Some(SignedMatrix { values }))
}

fn check_mdp_inputs(p_x: &Dist, p_y: &Dist, c: &CostMatrix) -> Result<()> {
    c.check_dims(p_x, p_y)?;
    if p_x.len() > 4 || p_y.len() > 4 {
        return Err(Error::SizeGuard(
            "moderate-deviation rates handle alphabets of at most 4 letters".into(),
        ));
    }
    if p_x.mass().iter().chain(p_y.mass()).any(|&m| m <= 0.0) {
        return Err(Error::InvalidArgument(
            "marginals must be strictly positive".into(),
        ));
    }
    if p_x.len() < 2 && p_y.len() < 2 {
        return Err(Error::InvalidArgument(
            "both alphabets are singletons".into(),
        ));
    }
    Ok(())
}

/// `f̃(Δ)` for `Δ < 0`:
/// `inf { max{χ²_X(β_X), χ²_Y(β_Y)} : θ(β) ≤ Δ }` with `χ²(β) = ½ Σ β²/P`.
///
/// Both `θ` and the χ² terms are homogeneous (degrees 1 and 2), so the value
/// is `Δ²` times the minimum of `q(u) / θ(u)²` over unit directions with
/// `θ(u) < 0`.
pub fn mdp_rate_lower(p_x: &Dist, p_y: &Dist, c: &CostMatrix, delta: f64) -> Result<f64> {
    if !(delta < 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lower-tail rate needs Δ < 0, got {delta}"
        )));
    }
    check_mdp_inputs(p_x, p_y, c)?;
    let s = optimal_support(p_x, p_y, c, SUPPORT_TOL)?;
    let (px, py) = (p_x.mass(), p_y.mass());
    let bx = zero_sum_basis(px.len());
    let by = zero_sum_basis(py.len());
    let dx = bx.len();
    let obj = |u: &[f64]| -> f64 {
        let Some(u) = normalize(u) else {
            return f64::INFINITY;
        };
        let beta_x = combine(&bx, &u[..dx]);
        let beta_y = combine(&by, &u[dx..]);
        let th = theta_raw(&beta_x, &beta_y, &s, c);
        if th < -1e-13 {
            chi2_half_slice(&beta_x, px).max(chi2_half_slice(&beta_y, py)) / (th * th)
        } else {
            f64::INFINITY
        }
    };
    let best = minimize_on_sphere(dx + by.len(), obj);
    Ok(delta * delta * best)
}

/// Minimum of a 0-homogeneous function over the unit sphere in `R^d`.
fn minimize_on_sphere(d: usize, obj: impl Fn(&[f64]) -> f64) -> f64 {
    let count = match d {
        1 => 2,
        2 => 720,
        3 => 2000,
        _ => 4000,
    };
    let dirs = sphere_directions(d, count);
    let (mut best_u, mut best) = (dirs[0].clone(), f64::INFINITY);
    for u in &dirs {
        let v = obj(u);
        if v < best {
            best = v;
            best_u = u.clone();
        }
    }
    if !best.is_finite() || d == 1 {
        return best;
    }
    if d == 2 {
        let phi = best_u[1].atan2(best_u[0]);
        let h = 2.0 * std::f64::consts::PI / count as f64;
        let (_, v) = golden_min(|t| obj(&[t.cos(), t.sin()]), phi - h, phi + h, 100);
        return best.min(v);
    }
    let mut simplex = vec![best_u.clone()];
    for i in 0..d {
        let mut p = best_u.clone();
        p[i] += 0.05;
        simplex.push(p);
    }
    let (_, v) = nelder_mead(&obj, simplex, 2000, 1e-14);
    best.min(v)
}

/// `g̃(Δ)` for `Δ > 0`: the smaller of the two orientations
/// `g̃_XY(Δ) = inf { χ²_X(β_X) : θ(β_X, β_Y) ≥ Δ for all β_Y with
/// χ²_Y(β_Y) ≤ χ²_X(β_X) }` and its mirror image.
pub fn mdp_rate_upper(p_x: &Dist, p_y: &Dist, c: &CostMatrix, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "upper-tail rate needs Δ > 0, got {delta}"
        )));
    }
    check_mdp_inputs(p_x, p_y, c)?;
    let s = optimal_support(p_x, p_y, c, SUPPORT_TOL)?;
    let (px, py) = (p_x.mass(), p_y.mass());
    let xy = upper_direction(px, py, |u, v| theta_raw(u, v, &s, c));
    let yx = upper_direction(py, px, |u, v| theta_raw(v, u, &s, c));
    Ok(delta * delta * xy.min(yx))
}

/// `inf_u χ²_u(u) / m(u)²` where `m(u)` is the smallest `θ` over the
/// ellipsoid `{v : χ²_v(v) ≤ χ²_u(u)}`; directions with `m(u) ≤ 0` are
/// excluded.
fn upper_direction(pu: &[f64], pv: &[f64], th: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let bu = zero_sum_basis(pu.len());
    let bv = zero_sum_basis(pv.len());
    if bu.is_empty() {
        return f64::INFINITY;
    }
    // Ellipsoid coordinates: with M = Bᵀ diag(1/P) B = L Lᵀ, the zero-sum
    // vectors v = B y with ½ yᵀ M y ≤ ρ are v = B √(2ρ) L⁻ᵀ z, |z| ≤ 1.
    let dv = bv.len();
    let map = if dv > 0 {
        let m = nalgebra::DMatrix::from_fn(dv, dv, |i, j| {
            (0..pv.len())
                .map(|y| bv[i][y] * bv[j][y] / pv[y])
                .sum::<f64>()
        });
        let l = m
            .cholesky()
            .expect("positive marginals give a positive definite metric")
            .l();
        let lt_inv = l
            .transpose()
            .try_inverse()
            .expect("triangular factor is invertible");
        Some(lt_inv)
    } else {
        None
    };
    let obj = |u: &[f64]| -> f64 {
        let Some(u) = normalize(u) else {
            return f64::INFINITY;
        };
        let beta_u = combine(&bu, &u);
        let rho = chi2_half_slice(&beta_u, pu);
        let m = match &map {
            None => th(&beta_u, &vec![0.0; pv.len()]),
            Some(lt_inv) => {
                let radius = (2.0 * rho).sqrt();
                let at = |z: &[f64]| -> f64 {
                    let zv = nalgebra::DVector::from_column_slice(z);
                    let y = lt_inv * zv * radius;
                    let v = combine(&bv, y.as_slice());
                    th(&beta_u, &v)
                };
                ball_min(dv, &at)
            }
        };
        if m > 1e-13 {
            rho / (m * m)
        } else {
            f64::INFINITY
        }
    };
    minimize_on_sphere(bu.len(), obj)
}

/// Minimum of a convex function over the closed unit ball in `R^d` by
/// nested ternary search.
fn ball_min(d: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    fn rec(prefix: &mut Vec<f64>, d: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let used: f64 = prefix.iter().map(|x| x * x).sum();
        let half = (1.0 - used).max(0.0).sqrt();
        let iters = match d {
            1 => 100,
            2 => 60,
            _ => 36,
        };
        if prefix.len() + 1 == d {
            let (_, v) = convex_min(
                |t| {
                    prefix.push(t);
                    let v = f(prefix);
                    prefix.pop();
                    v
                },
                -half,
                half,
                iters,
            );
            return v;
        }
        let inner = |t: f64| -> f64 {
            let mut p = prefix.clone();
            p.push(t);
            rec(&mut p, d, f)
        };
        convex_min(inner, -half, half, iters).1
    }
    rec(&mut Vec::new(), d, f)
}

/// Both sides of the first-order bound `(E(Q) - α)/a ≥ θ((Q - P)/a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SetaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates `(E(Q_X, Q_Y) - α)/a` against `θ((Q_X - P_X)/a, (Q_Y - P_Y)/a)`
/// with `α = E(P_X, P_Y)`.
pub fn seta_check(
    p_x: &Dist,
    p_y: &Dist,
    c: &CostMatrix,
    q_x: &Dist,
    q_y: &Dist,
    a: f64,
) -> Result<SetaCheck> {
    c.check_dims(p_x, p_y)?;
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("a = {a} must be positive")));
    }
    let alpha = ot_cost(p_x, p_y, c)?.objective;
    let s = optimal_support(p_x, p_y, c, SUPPORT_TOL)?;
    let lhs = (ot_cost(q_x, q_y, c)?.objective - alpha) / a;
    let bx = SignedVec::difference(q_x, p_x, a)?;
    let by = SignedVec::difference(q_y, p_y, a)?;
    let rhs = theta(&bx, &by, &s, c)?;
    Ok(SetaCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-9,
    })
}

/// One step of the first-order expansion check along `P + a β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SetaLimitRow {
    pub a: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// `(E(P + a_k β) - α)/a_k` against `θ(β)` for `a_k = 2^{-k}`.
pub fn seta_limit(
    p_x: &Dist,
    p_y: &Dist,
    c: &CostMatrix,
    beta_x: &SignedVec,
    beta_y: &SignedVec,
    ks: &[i32],
) -> Result<Vec<SetaLimitRow>> {
    c.check_dims(p_x, p_y)?;
    let alpha = ot_cost(p_x, p_y, c)?.objective;
    let s = optimal_support(p_x, p_y, c, SUPPORT_TOL)?;
    let rhs = theta(beta_x, beta_y, &s, c)?;
    ks.iter()
        .map(|&k| {
            let a = 2f64.powi(-k);
            let qx = beta_x.perturb(p_x, a)?;
            let qy = beta_y.perturb(p_y, a)?;
            let lhs = (ot_cost(&qx, &qy, c)?.objective - alpha) / a;
            Ok(SetaLimitRow {
                a,
                lhs,
                rhs,
                gap: lhs - rhs,
            })
        })
        .collect()
}

/// Vertices of `{β : Σβ = 0, ‖β‖∞ ≤ 1}` in `R^k`.
fn zero_sum_box_vertices(k: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for free in 0..k {
        for signs in 0..(1u32 << (k - 1)) {
            let mut v = vec![0.0; k];
            let mut bit = 0;
            for (i, x) in v.iter_mut().enumerate() {
                if i != free {
                    *x = if signs >> bit & 1 == 1 { 1.0 } else { -1.0 };
                    bit += 1;
                }
            }
            let rest: f64 = v.iter().sum();
            if rest.abs() <= 1.0 {
                v[free] = -rest;
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
    }
    out
}

/// `C = sup θ(β)` over the unit `∞`-ball of zero-sum pairs, the Lipschitz
/// constant of `θ` in the max-of-sup-norms metric. `θ` is convex, so the
/// supremum is attained at a vertex.
pub fn lipschitz_constant(p_x: &Dist, p_y: &Dist, c: &CostMatrix) -> Result<f64> {
    c.check_dims(p_x, p_y)?;
    if p_x.len() > 8 || p_y.len() > 8 {
        return Err(Error::SizeGuard(
            "vertex enumeration limited to 8 letters".into(),
        ));
    }
    let s = optimal_support(p_x, p_y, c, SUPPORT_TOL)?;
    let vx = zero_sum_box_vertices(p_x.len());
    let vy = zero_sum_box_vertices(p_y.len());
    let mut best = 0.0f64;
    for a in &vx {
        for b in &vy {
            best = best.max(theta_raw(a, b, &s, c));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> (Dist, Dist, CostMatrix, SupportSet) {
        let (px, py) = (Dist::binary(0.1).unwrap(), Dist::binary(0.5).unwrap());
        let c = CostMatrix::hamming(2);
        let s = optimal_support(&px, &py, &c, SUPPORT_TOL).unwrap();
        (px, py, c, s)
    }

    fn sv(v: &[f64]) -> SignedVec {
        SignedVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn theta_of_zero_is_zero() {
        let (_, _, c, s) = binary();
        let (v, plan) = theta_with_plan(&sv(&[0.0, 0.0]), &sv(&[0.0, 0.0]), &s, &c).unwrap();
        assert_eq!(v, 0.0);
        assert!(plan.unwrap().values.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn theta_binary_is_b_minus_a() {
        let (_, _, c, s) = binary();
        let (v, plan) = theta_with_plan(&sv(&[0.2, -0.2]), &sv(&[-0.1, 0.1]), &s, &c).unwrap();
        assert!((v + 0.3).abs() < 1e-15);
        let plan = plan.unwrap();
        assert!((plan.row_sums()[0] - 0.2).abs() < 1e-15);
        assert!((plan.col_sums()[0] + 0.1).abs() < 1e-15);
        for (x, row) in plan.values.iter().enumerate() {
            for (y, &m) in row.iter().enumerate() {
                assert!(m >= -1e-15 || s.contains(x, y));
            }
        }
    }

    #[test]
    fn theta_infeasible_without_negative_cells() {
        let c = CostMatrix::hamming(2);
        let v = theta(
            &sv(&[0.1, -0.1]),
            &sv(&[0.1, -0.1]),
            &SupportSet::default(),
            &c,
        )
        .unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    #[test]
    fn lower_rate_binary_homogeneity() {
        let (px, py, c, _) = binary();
        let f1 = mdp_rate_lower(&px, &py, &c, -1.0).unwrap();
        let f2 = mdp_rate_lower(&px, &py, &c, -2.0).unwrap();
        assert!((f2 - 4.0 * f1).abs() < 1e-9 * f2);
    }

    #[test]
    fn lower_rate_binary_value() {
        // Spending the χ² budget equally on both sides: Δ²/(2(σ_X + σ_Y)²).
        let (px, py, c, _) = binary();
        let f = mdp_rate_lower(&px, &py, &c, -1.0).unwrap();
        assert!((f - 1.0 / (2.0 * 0.8f64.powi(2))).abs() < 1e-9, "{f}");
    }

    #[test]
    fn upper_rate_binary_value() {
        // Only the Y-side orientation is finite: Δ²/(2(σ_Y - σ_X)²).
        let (px, py, c, _) = binary();
        let g = mdp_rate_upper(&px, &py, &c, 1.0).unwrap();
        assert!((g - 1.0 / (2.0 * 0.2f64.powi(2))).abs() < 1e-6, "{g}");
    }

    #[test]
    fn seta_trivial_and_limit() {
        let (px, py, c, _) = binary();
        let r = seta_check(&px, &py, &c, &px, &py, 0.1).unwrap();
        assert_eq!((r.lhs, r.rhs, r.holds), (0.0, 0.0, true));
        let rows = seta_limit(
            &px,
            &py,
            &c,
            &sv(&[0.2, -0.2]),
            &sv(&[-0.1, 0.1]),
            &[4, 8, 12],
        )
        .unwrap();
        for row in rows {
            assert!(row.gap.abs() < 1e-9);
        }
    }

    #[test]
    fn box_vertices() {
        assert_eq!(zero_sum_box_vertices(2).len(), 2);
        let v3 = zero_sum_box_vertices(3);
        assert_eq!(v3.len(), 6);
        assert!(v3.iter().all(|v| v.iter().sum::<f64>() == 0.0));
    }

    #[test]
    fn lipschitz_binary() {
        let (px, py, c, _) = binary();
        // Vertices (±1, ∓1): θ = b' - a' ranges over {-2, 0, 2}.
        assert!((lipschitz_constant(&px, &py, &c).unwrap() - 2.0).abs() < 1e-12);
    }
}
