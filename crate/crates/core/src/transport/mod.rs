//! Optimal transport and Strassen's excess-cost probability on finite
//! alphabets.

mod band;
pub(crate) mod flow;

use std::collections::BTreeSet;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Dist, JointDist};
use flow::{MaxFlow, MinCostFlow};

pub(crate) use band::{staircase, staircase_flow};

/// Slack added to `α` when testing `c(x, y) ≤ α`.
pub const ADMISSIBLE_TOL: f64 = 1e-12;

/// Reduced-cost threshold (relative to `1 + max c`) for complementary slackness.
pub const TIGHT_TOL: f64 = 1e-9;

/// Finite, non-negative cost on `X × Y`, row-major by `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for CostMatrix {
    type Error = Error;
    fn try_from(m: Vec<Vec<f64>>) -> Result<Self> {
        CostMatrix::from_rows(m)
    }
}

impl From<CostMatrix> for Vec<Vec<f64>> {
    fn from(c: CostMatrix) -> Self {
        c.to_rows()
    }
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} cost with {} entries",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cost entry {v} must be finite and non-negative"
            )));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_rows(m: Vec<Vec<f64>>) -> Result<Self> {
        let rows = m.len();
        let cols = m.first().map_or(0, |r| r.len());
        if m.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged cost matrix".into()));
        }
        Self::new(rows, cols, m.into_iter().flatten().collect())
    }

    /// Hamming cost `1{x ≠ y}` on a `k`-letter alphabet.
    pub fn hamming(k: usize) -> Self {
        let data = (0..k * k)
            .map(|i| if i / k == i % k { 0.0 } else { 1.0 })
            .collect();
        CostMatrix {
            rows: k,
            cols: k,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.cols + y]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.cols {
            for x in 0..self.rows {
                data.push(self.get(x, y));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Checks that the cost is defined on `p_x.alphabet × p_y.alphabet`.
    pub fn check_dims(&self, p_x: &Dist, p_y: &Dist) -> Result<()> {
        if self.rows != p_x.len() || self.cols != p_y.len() {
            return Err(Error::Dimension(format!(
                "{}x{} cost for alphabets of size {} and {}",
                self.rows,
                self.cols,
                p_x.len(),
                p_y.len()
            )));
        }
        Ok(())
    }

    /// Smallest cost over cells with positive mass on both sides.
    pub fn min_on_support(&self, p_x: &[f64], p_y: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for (x, &a) in p_x.iter().enumerate() {
            for (y, &b) in p_y.iter().enumerate() {
                if a > 0.0 && b > 0.0 {
                    m = m.min(self.get(x, y));
                }
            }
        }
        m
    }

    /// Largest cost over cells with positive mass on both sides.
    pub fn max_on_support(&self, p_x: &[f64], p_y: &[f64]) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for (x, &a) in p_x.iter().enumerate() {
            for (y, &b) in p_y.iter().enumerate() {
                if a > 0.0 && b > 0.0 {
                    m = m.max(self.get(x, y));
                }
            }
        }
        m
    }

    pub(crate) fn admissible(&self, x: usize, y: usize, alpha: f64) -> bool {
        self.get(x, y) <= alpha + ADMISSIBLE_TOL
    }
}

/// A coupling together with the value it certifies.
///
/// For [`ot_cost`] the objective is `⟨π, c⟩`; for [`ecp`] it is the excess
/// probability `π{c > α}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanRepr", into = "PlanRepr")]
pub struct TransportPlan {
    pub plan: JointDist,
    pub objective: f64,
}

#[derive(Serialize, Deserialize)]
struct PlanRepr {
    matrix: Vec<Vec<f64>>,
    objective: f64,
}

impl TryFrom<PlanRepr> for TransportPlan {
    type Error = Error;
    fn try_from(r: PlanRepr) -> Result<Self> {
        Ok(TransportPlan {
            plan: JointDist::from_rows(r.matrix)?,
            objective: r.objective,
        })
    }
}

impl From<TransportPlan> for PlanRepr {
    fn from(p: TransportPlan) -> Self {
        PlanRepr {
            matrix: p.plan.to_rows(),
            objective: p.objective,
        }
    }
}

/// Cells `(x, y)` charged by at least one optimal coupling.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    cells: BTreeSet<(usize, usize)>,
}

impl SupportSet {
    pub fn new(cells: impl IntoIterator<Item = (usize, usize)>) -> Self {
        SupportSet {
            cells: cells.into_iter().collect(),
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.cells.contains(&(x, y))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Kantorovich dual potentials with the duality gap of a given plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `⟨π, c⟩ - (Σ f P_X + Σ g P_Y)`; zero exactly when the plan is optimal.
    pub gap: f64,
}

/// Maximiser of the dual form `P_X(E) - P_Y(Γ_α(E))`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualWitness {
    pub value: f64,
    pub set: BTreeSet<usize>,
}

/// Optimal plan and dual potentials on raw (possibly unnormalised) masses.
pub(crate) struct RawTransport {
    pub plan: Vec<f64>,
    pub objective: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// Solves the transport problem between `px` and `py` (equal totals) with
/// cost `cost(x, y)`, returning an optimal plan and optimal duals.
pub(crate) fn transport_raw(
    px: &[f64],
    py: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> RawTransport {
    let (r, c) = (px.len(), py.len());
    let total: f64 = px.iter().sum();
    let eps = 1e-15 * total.max(1.0);
    let (s, t) = (r + c, r + c + 1);
    let mut g = MinCostFlow::new(r + c + 2, eps);
    for (x, &m) in px.iter().enumerate() {
        g.add_edge(s, x, m, 0.0);
    }
    for (y, &m) in py.iter().enumerate() {
        g.add_edge(r + y, t, m, 0.0);
    }
    let mut cell_edges = Vec::with_capacity(r * c);
    for x in 0..r {
        for y in 0..c {
            cell_edges.push(g.add_edge(x, r + y, 2.0 * total + 1.0, cost(x, y)));
        }
    }
    // Non-negative costs: no negative cycle is possible.
    let _ = g.run(s, t, total);
    let plan: Vec<f64> = cell_edges.iter().map(|&e| g.flow(e).max(0.0)).collect();
    let objective = (0..r * c).map(|i| plan[i] * cost(i / c, i % c)).sum();
    let (f, gg) = residual_duals(&plan, r, c, &cost, eps);
    RawTransport {
        plan,
        objective,
        f,
        g: gg,
    }
}

/// Optimal duals from the residual graph of an optimal plan.
///
/// Arcs `x → y` cost `c(x, y)`; arcs `y → x` cost `-c(x, y)` wherever the
/// plan is positive. Shortest distances `d` from a virtual source give
/// `f = -d` on `X` and `g = d` on `Y`.
fn residual_duals(
    plan: &[f64],
    r: usize,
    c: usize,
    cost: &impl Fn(usize, usize) -> f64,
    eps: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0f64; r + c];
    for _ in 0..=(r + c) {
        let mut changed = false;
        for x in 0..r {
            for y in 0..c {
                let w = cost(x, y);
                if d[x] + w < d[r + y] - 1e-15 {
                    d[r + y] = d[x] + w;
                    changed = true;
                }
                if plan[x * c + y] > eps && d[r + y] - w < d[x] - 1e-15 {
                    d[x] = d[r + y] - w;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let f = d[..r].iter().map(|v| -v).collect();
    let g = d[r..].to_vec();
    (f, g)
}

/// Maximum flow of the admissibility network in floating point, with the
/// routed flow on every cell.
pub(crate) fn admissible_flow(
    px: &[f64],
    py: &[f64],
    adm: impl Fn(usize, usize) -> bool,
) -> (f64, Vec<f64>) {
    let (r, c) = (px.len(), py.len());
    let total: f64 = px.iter().sum::<f64>().max(py.iter().sum());
    let (s, t) = (r + c, r + c + 1);
    let mut g = MaxFlow::<f64>::new(r + c + 2);
    for (x, &m) in px.iter().enumerate() {
        g.add_edge(s, x, m);
    }
    for (y, &m) in py.iter().enumerate() {
        g.add_edge(r + y, t, m);
    }
    let mut edges = Vec::new();
    for x in 0..r {
        for y in 0..c {
            if adm(x, y) {
                edges.push((x * c + y, g.add_edge(x, r + y, total + 1.0)));
            }
        }
    }
    let value = g.run(s, t, total + 1.0);
    let mut plan = vec![0.0; r * c];
    for (i, e) in edges {
        plan[i] = g.flow(e);
    }
    (value, plan)
}

/// Exact maximum flow of the admissibility network with integer masses.
pub(crate) fn admissible_flow_exact(
    px: &[BigInt],
    py: &[BigInt],
    adm: impl Fn(usize, usize) -> bool,
) -> BigInt {
    let (r, c) = (px.len(), py.len());
    if let Some(iv) = staircase(r, &adm, c) {
        return staircase_flow(px, py, &iv);
    }
    let total: BigInt = px.iter().sum::<BigInt>() + py.iter().sum::<BigInt>() + 1;
    let (s, t) = (r + c, r + c + 1);
    let mut g = MaxFlow::<BigInt>::new(r + c + 2);
    for (x, m) in px.iter().enumerate() {
        g.add_edge(s, x, m.clone());
    }
    for (y, m) in py.iter().enumerate() {
        g.add_edge(r + y, t, m.clone());
    }
    for x in 0..r {
        for y in 0..c {
            if adm(x, y) {
                g.add_edge(x, r + y, total.clone());
            }
        }
    }
    g.run(s, t, total)
}

/// Completes a partial plan by routing the leftover row and column masses in
/// north-west-corner order.
pub(crate) fn complete_northwest(plan: &mut [f64], px: &[f64], py: &[f64]) {
    let c = py.len();
    let mut rx: Vec<f64> = px
        .iter()
        .enumerate()
        .map(|(x, &m)| (m - plan[x * c..(x + 1) * c].iter().sum::<f64>()).max(0.0))
        .collect();
    let mut ry: Vec<f64> = py
        .iter()
        .enumerate()
        .map(|(y, &m)| (m - (0..px.len()).map(|x| plan[x * c + y]).sum::<f64>()).max(0.0))
        .collect();
    let (mut x, mut y) = (0, 0);
    while x < rx.len() && y < ry.len() {
        let m = rx[x].min(ry[y]);
        plan[x * c + y] += m;
        rx[x] -= m;
        ry[y] -= m;
        if rx[x] <= ry[y] {
            x += 1;
        } else {
            y += 1;
        }
    }
}

/// Monge–Kantorovich cost `E(P_X, P_Y) = min_π ⟨π, c⟩` with an optimal plan.
pub fn ot_cost(p_x: &Dist, p_y: &Dist, c: &CostMatrix) -> Result<TransportPlan> {
    c.check_dims(p_x, p_y)?;
    let raw = transport_raw(p_x.mass(), p_y.mass(), |x, y| c.get(x, y));
    Ok(TransportPlan {
        plan: JointDist::new(c.rows, c.cols, raw.plan)?,
        objective: raw.objective,
    })
}

/// Strassen's excess-cost probability `G_α = min_π π{c > α}` with an optimal
/// plan; computed as one minus the admissible max-flow.
pub fn ecp(p_x: &Dist, p_y: &Dist, c: &CostMatrix, alpha: f64) -> Result<TransportPlan> {
    c.check_dims(p_x, p_y)?;
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha = {alpha}")));
    }
    let (flow, mut plan) =
        admissible_flow(p_x.mass(), p_y.mass(), |x, y| c.admissible(x, y, alpha));
    complete_northwest(&mut plan, p_x.mass(), p_y.mass());
    let total: f64 = p_x.mass().iter().sum();
    Ok(TransportPlan {
        plan: JointDist::new(c.rows, c.cols, plan)?,
        objective: (total - flow).clamp(0.0, 1.0),
    })
}

/// `π{c > α}` for a given coupling.
pub fn excess_mass(plan: &JointDist, c: &CostMatrix, alpha: f64) -> f64 {
    let mut s = 0.0;
    for x in 0..plan.rows() {
        for y in 0..plan.cols() {
            if !c.admissible(x, y, alpha) {
                s += plan.get(x, y);
            }
        }
    }
    s
}

/// `Γ_α(E) = {y : c(x, y) ≤ α for some x ∈ E}`.
pub fn gamma_enlarge(set: &BTreeSet<usize>, c: &CostMatrix, alpha: f64) -> BTreeSet<usize> {
    (0..c.cols)
        .filter(|&y| set.iter().any(|&x| c.admissible(x, y, alpha)))
        .collect()
}

/// Brute-force `max_E P_X(E) - P_Y(Γ_α(E))` over all subsets of `X`.
///
/// The first maximiser in subset-bitmask order is reported.
pub fn ecp_dual_bruteforce(
    p_x: &Dist,
    p_y: &Dist,
    c: &CostMatrix,
    alpha: f64,
) -> Result<DualWitness> {
    c.check_dims(p_x, p_y)?;
    let r = c.rows;
    if r > 20 {
        return Err(Error::SizeGuard(format!(
            "subset enumeration over {r} symbols (limit 20)"
        )));
    }
    let words = c.cols.div_ceil(64);
    let row_masks: Vec<Vec<u64>> = (0..r)
        .map(|x| {
            let mut m = vec![0u64; words];
            for y in 0..c.cols {
                if c.admissible(x, y, alpha) {
                    m[y / 64] |= 1 << (y % 64);
                }
            }
            m
        })
        .collect();
    let mut best = 0.0;
    let mut best_mask = 0u32;
    let mut gamma = vec![0u64; words];
    for mask in 1u32..(1 << r) {
        gamma.iter_mut().for_each(|w| *w = 0);
        let mut px = 0.0;
        for (x, row) in row_masks.iter().enumerate() {
            if mask >> x & 1 == 1 {
                px += p_x.get(x);
                for (g, m) in gamma.iter_mut().zip(row) {
                    *g |= m;
                }
            }
        }
        let py: f64 = (0..c.cols)
            .filter(|&y| gamma[y / 64] >> (y % 64) & 1 == 1)
            .map(|y| p_y.get(y))
            .sum();
        if px - py > best {
            best = px - py;
            best_mask = mask;
        }
    }
    Ok(DualWitness {
        value: best,
        set: (0..r).filter(|&x| best_mask >> x & 1 == 1).collect(),
    })
}

/// Checks that `plan` couples `(P_X, P_Y)` and certifies its optimality gap
/// against optimal Kantorovich potentials.
pub fn kantorovich_certificate(
    p_x: &Dist,
    p_y: &Dist,
    c: &CostMatrix,
    plan: &JointDist,
) -> Result<Certificate> {
    c.check_dims(p_x, p_y)?;
    let err = plan.marginal_error(p_x.mass(), p_y.mass());
    if err > 1e-9 {
        return Err(Error::Infeasible(format!("plan marginals off by {err:e}")));
    }
    let raw = transport_raw(p_x.mass(), p_y.mass(), |x, y| c.get(x, y));
    let mut cost = 0.0;
    for x in 0..c.rows {
        for y in 0..c.cols {
            cost += plan.get(x, y) * c.get(x, y);
        }
    }
    let dual: f64 = raw
        .f
        .iter()
        .zip(p_x.mass())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + raw
            .g
            .iter()
            .zip(p_y.mass())
            .map(|(a, b)| a * b)
            .sum::<f64>();
    Ok(Certificate {
        f: raw.f,
        g: raw.g,
        gap: cost - dual,
    })
}

/// Union of supports of all optimal couplings.
///
/// A cell belongs to the set when some optimal plan puts more than `tol` on
/// it. Optimal plans are exactly the couplings living on cells tight for an
/// optimal dual pair; for each tight cell a min-cost flow on the tight cells,
/// rewarding that one cell, finds the largest mass it can carry.
pub fn optimal_support(p_x: &Dist, p_y: &Dist, c: &CostMatrix, tol: f64) -> Result<SupportSet> {
    c.check_dims(p_x, p_y)?;
    let (px, py) = (p_x.mass(), p_y.mass());
    let (r, cc) = (c.rows, c.cols);
    let raw = transport_raw(px, py, |x, y| c.get(x, y));
    let thr = TIGHT_TOL * (1.0 + c.max_value());
    let tight: Vec<(usize, usize)> = (0..r)
        .flat_map(|x| (0..cc).map(move |y| (x, y)))
        .filter(|&(x, y)| px[x] > 0.0 && py[y] > 0.0 && c.get(x, y) - raw.f[x] - raw.g[y] <= thr)
        .collect();
    let mut cells = BTreeSet::new();
    for &target in &tight {
        if raw.plan[target.0 * cc + target.1] > tol {
            cells.insert(target);
            continue;
        }
        let (s, t) = (r + cc, r + cc + 1);
        let mut g = MinCostFlow::new(r + cc + 2, 1e-15);
        for (x, &m) in px.iter().enumerate() {
            g.add_edge(s, x, m, 0.0);
        }
        for (y, &m) in py.iter().enumerate() {
            g.add_edge(r + y, t, m, 0.0);
        }
        let mut te = 0;
        for &(x, y) in &tight {
            let e = g.add_edge(x, r + y, 2.0, if (x, y) == target { -1.0 } else { 0.0 });
            if (x, y) == target {
                te = e;
            }
        }
        if g.run(s, t, px.iter().sum()).is_ok() && g.flow(te) > tol {
            cells.insert(target);
        }
    }
    Ok(SupportSet { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(a: f64) -> Dist {
        Dist::binary(a).unwrap()
    }

    #[test]
    fn hamming_binary_cost_is_mass_gap() {
        let p = ot_cost(&bern(0.1), &bern(0.5), &CostMatrix::hamming(2)).unwrap();
        assert!((p.objective - 0.4).abs() < 1e-15);
        assert!(p.plan.marginal_error(&[0.1, 0.9], &[0.5, 0.5]) < 1e-15);
    }

    #[test]
    fn ecp_hamming_zero_alpha() {
        let p = ecp(&bern(0.1), &bern(0.5), &CostMatrix::hamming(2), 0.0).unwrap();
        assert!((p.objective - 0.4).abs() < 1e-15);
        assert!((excess_mass(&p.plan, &CostMatrix::hamming(2), 0.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn dual_witness_for_hamming_example() {
        let w = ecp_dual_bruteforce(&bern(0.1), &bern(0.5), &CostMatrix::hamming(2), 0.0).unwrap();
        assert!((w.value - 0.4).abs() < 1e-15);
        assert_eq!(w.set, BTreeSet::from([1]));
    }

    #[test]
    fn support_of_binary_hamming_example() {
        let s = optimal_support(&bern(0.1), &bern(0.5), &CostMatrix::hamming(2), 1e-9).unwrap();
        assert_eq!(s, SupportSet::new([(0, 0), (1, 0), (1, 1)]));
    }

    #[test]
    fn support_includes_all_cells_for_constant_cost() {
        let c = CostMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let s = optimal_support(&bern(0.3), &bern(0.6), &c, 1e-9).unwrap();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn certificate_gap_zero_for_optimal_plan() {
        let px = Dist::from_mass(vec![0.2, 0.5, 0.3]).unwrap();
        let py = Dist::from_mass(vec![0.6, 0.1, 0.3]).unwrap();
        let c = CostMatrix::from_rows(vec![
            vec![0.0, 2.0, 1.0],
            vec![3.0, 0.5, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let p = ot_cost(&px, &py, &c).unwrap();
        let cert = kantorovich_certificate(&px, &py, &c, &p.plan).unwrap();
        assert!(cert.gap.abs() < 1e-12);
        for x in 0..3 {
            for y in 0..3 {
                assert!(cert.f[x] + cert.g[y] <= c.get(x, y) + 1e-12);
            }
        }
        let indep = JointDist::product(&px, &py);
        assert!(kantorovich_certificate(&px, &py, &c, &indep).unwrap().gap > 0.1);
    }

    #[test]
    fn certificate_rejects_wrong_marginals() {
        let plan = JointDist::product(&bern(0.2), &bern(0.5));
        let r = kantorovich_certificate(&bern(0.1), &bern(0.5), &CostMatrix::hamming(2), &plan);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn cost_json_is_nested_array() {
        let c: CostMatrix = serde_json::from_str("[[0,1],[1,0]]").unwrap();
        assert_eq!(c, CostMatrix::hamming(2));
        assert!(serde_json::from_str::<CostMatrix>("[[0,1],[1]]").is_err());
        assert!(serde_json::from_str::<CostMatrix>("[[0,-1],[1,0]]").is_err());
    }
}
