//! Exact finite-`n` excess-cost probabilities through the lattice of
//! empirical types.
//!
//! For product marginals, `G_α(P_X^n, P_Y^n)` equals the excess-cost
//! probability between the type laws `μ = P_X^n ∘ T^{-1}` and
//! `ν = P_Y^n ∘ T^{-1}` under the inner cost `E(T_X, T_Y)`. The lattice has
//! polynomially many points, so this is a polynomial-size max-flow instead of
//! one over `|X|^n × |Y|^n` sequences.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{ln_ratio, ExactMasses};
use crate::instance::RateCurve;
use crate::measures::{Dist, JointDist};
use crate::numeric::{binomial_f64, ln_factorials};
use crate::transport::flow::MaxFlow;
use crate::transport::{
    admissible_flow, admissible_flow_exact, complete_northwest, staircase, staircase_flow,
    transport_raw, CostMatrix, TransportPlan, TIGHT_TOL,
};

/// Largest lattice size `enum_types` will produce.
pub const LATTICE_LIMIT: f64 = 1e7;

/// Largest number of type pairs a [`NestedInstance`] will tabulate.
pub const PAIR_LIMIT: f64 = 1e7;

/// Largest number of sequence pairs the brute-force oracle will touch.
pub const SEQUENCE_LIMIT: f64 = 1e6;

/// Empirical type: symbol counts of a length-`n` sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TypeVector(Vec<usize>);

impl TypeVector {
    pub fn new(counts: Vec<usize>) -> Self {
        TypeVector(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.iter().sum()
    }

    /// The type as a distribution on the given alphabet.
    pub fn to_dist(&self, labels: &[String]) -> Result<Dist> {
        let n = self.n() as f64;
        Dist::new(
            labels.to_vec(),
            self.0.iter().map(|&c| c as f64 / n).collect(),
        )
    }
}

/// All types of length-`n` sequences over `k` letters, in lexicographic order
/// of the count vectors.
pub fn enum_types(n: usize, k: usize) -> Result<Vec<TypeVector>> {
    if k == 0 {
        return Err(Error::InvalidArgument("empty alphabet".into()));
    }
    let size = binomial_f64((n + k - 1) as u64, (k - 1) as u64);
    if size > LATTICE_LIMIT {
        return Err(Error::SizeGuard(format!(
            "type lattice for n={n}, k={k} has {size:.3e} points (limit {LATTICE_LIMIT:e})"
        )));
    }
    Ok(crate::numeric::compositions(n, k)
        .into_iter()
        .map(TypeVector)
        .collect())
}

/// `ln P^n(T)`: log-multinomial plus `Σ_x T(x) ln p(x)`.
pub fn type_log_prob(t: &TypeVector, p: &Dist) -> Result<f64> {
    if t.0.len() != p.len() {
        return Err(Error::Dimension(format!("{} vs {}", t.0.len(), p.len())));
    }
    let lf = ln_factorials(t.n());
    Ok(type_log_prob_with(t, p.mass(), &lf))
}

fn type_log_prob_with(t: &TypeVector, p: &[f64], lf: &[f64]) -> f64 {
    let mut s = lf[t.n()];
    for (&c, &m) in t.0.iter().zip(p) {
        if c > 0 {
            if m <= 0.0 {
                return f64::NEG_INFINITY;
            }
            s += c as f64 * m.ln() - lf[c];
        }
    }
    s
}

/// Law of the empirical type under `P^n`, stored as log-masses.
#[derive(Clone, Debug)]
pub struct TypeMeasure {
    n: usize,
    types: Vec<TypeVector>,
    log_mass: Vec<f64>,
}

impl TypeMeasure {
    pub fn new(p: &Dist, n: usize) -> Result<Self> {
        let types = enum_types(n, p.len())?;
        let lf = ln_factorials(n);
        let log_mass = types
            .iter()
            .map(|t| type_log_prob_with(t, p.mass(), &lf))
            .collect();
        Ok(TypeMeasure { n, types, log_mass })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn types(&self) -> &[TypeVector] {
        &self.types
    }

    pub fn log_mass(&self) -> &[f64] {
        &self.log_mass
    }

    pub fn mass(&self) -> Vec<f64> {
        self.log_mass.iter().map(|l| l.exp()).collect()
    }
}

/// `G` and its complement, each with its logarithm, so that tails far below
/// `f64` resolution relative to one stay representable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GnValue {
    pub g: f64,
    pub one_minus_g: f64,
    pub ln_g: f64,
    pub ln_one_minus_g: f64,
    /// True when computed in exact integer arithmetic.
    pub exact: bool,
}

impl GnValue {
    fn from_float(g: f64) -> Self {
        let g = g.clamp(0.0, 1.0);
        GnValue {
            g,
            one_minus_g: 1.0 - g,
            ln_g: g.ln(),
            ln_one_minus_g: (-g).ln_1p(),
            exact: false,
        }
    }
}

/// Integer type masses over the common denominator `total`.
#[derive(Clone, Debug)]
struct ExactLattice {
    mu: Vec<BigInt>,
    nu: Vec<BigInt>,
    total: BigUint,
}

fn exact_type_masses(types: &[TypeVector], m: &ExactMasses, n: usize) -> Vec<BigUint> {
    let mut fact = vec![BigUint::from(1u32)];
    for i in 1..=n {
        let next = &fact[i - 1] * BigUint::from(i);
        fact.push(next);
    }
    let powers: Vec<Vec<BigUint>> = m
        .numerators
        .iter()
        .map(|a| {
            let mut v = vec![BigUint::from(1u32)];
            for i in 1..=n {
                let next = &v[i - 1] * a;
                v.push(next);
            }
            v
        })
        .collect();
    types
        .par_iter()
        .map(|t| {
            let mut denom = BigUint::from(1u32);
            let mut num = fact[n].clone();
            for (x, &c) in t.0.iter().enumerate() {
                denom *= &fact[c];
                num *= &powers[x][c];
            }
            num / denom
        })
        .collect()
}

/// The nested (type-lattice) instance for a fixed `n`.
#[derive(Clone, Debug)]
pub struct NestedInstance {
    n: usize,
    cost: CostMatrix,
    mu: TypeMeasure,
    nu: TypeMeasure,
    inner: Vec<f64>,
    exact: Option<ExactLattice>,
}

/// `E(T_X, T_Y)` between two types given by counts, as an average per letter.
fn inner_cost(tx: &[usize], ty: &[usize], c: &CostMatrix, n: usize) -> f64 {
    if tx.len() == 2 && ty.len() == 2 {
        // One free parameter u = π(0,0) in counts; the cost is linear in u.
        let (i, j) = (tx[0] as f64, ty[0] as f64);
        let nf = n as f64;
        let at = |u: f64| {
            u * c.get(0, 0)
                + (i - u) * c.get(0, 1)
                + (j - u) * c.get(1, 0)
                + (nf - i - j + u) * c.get(1, 1)
        };
        let lo = (i + j - nf).max(0.0);
        let hi = i.min(j);
        return at(lo).min(at(hi)) / nf;
    }
    let a: Vec<f64> = tx.iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = ty.iter().map(|&v| v as f64).collect();
    transport_raw(&a, &b, |x, y| c.get(x, y)).objective / n as f64
}

impl NestedInstance {
    pub fn build(p_x: &Dist, p_y: &Dist, c: &CostMatrix, n: usize) -> Result<Self> {
        c.check_dims(p_x, p_y)?;
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let lx = binomial_f64((n + p_x.len() - 1) as u64, (p_x.len() - 1) as u64);
        let ly = binomial_f64((n + p_y.len() - 1) as u64, (p_y.len() - 1) as u64);
        if lx * ly > PAIR_LIMIT {
            return Err(Error::SizeGuard(format!(
                "{:.3e} type pairs at n={n} (limit {PAIR_LIMIT:e})",
                lx * ly
            )));
        }
        let mu = TypeMeasure::new(p_x, n)?;
        let nu = TypeMeasure::new(p_y, n)?;
        let cols = nu.len();
        let inner: Vec<f64> = mu
            .types
            .par_iter()
            .flat_map_iter(|tx| {
                nu.types
                    .iter()
                    .map(|ty| inner_cost(&tx.0, &ty.0, c, n))
                    .collect::<Vec<_>>()
            })
            .collect();
        debug_assert_eq!(inner.len(), mu.len() * cols);
        let exact = match (ExactMasses::from_dist(p_x), ExactMasses::from_dist(p_y)) {
            (Some(ex), Some(ey)) => {
                let mx = exact_type_masses(&mu.types, &ex, n);
                let my = exact_type_masses(&nu.types, &ey, n);
                let sx = ey.denominator.pow(n as u32);
                let sy = ex.denominator.pow(n as u32);
                let total = &sx * &sy;
                Some(ExactLattice {
                    mu: mx.into_iter().map(|v| BigInt::from(v * &sx)).collect(),
                    nu: my.into_iter().map(|v| BigInt::from(v * &sy)).collect(),
                    total,
                })
            }
            _ => None,
        };
        Ok(NestedInstance {
            n,
            cost: c.clone(),
            mu,
            nu,
            inner,
            exact,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> &TypeMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &TypeMeasure {
        &self.nu
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    /// Whether [`NestedInstance::gn`] runs in exact integer arithmetic.
    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// `E(T_X, T_Y)` for lattice indices `i`, `j`.
    pub fn inner_cost(&self, i: usize, j: usize) -> f64 {
        self.inner[i * self.nu.len() + j]
    }

    fn admissible(&self, alpha: f64) -> impl Fn(usize, usize) -> bool + '_ {
        let cols = self.nu.len();
        move |i, j| self.inner[i * cols + j] <= alpha + crate::transport::ADMISSIBLE_TOL
    }

    /// `G_α(P_X^n, P_Y^n)` via the nested formula.
    pub fn gn(&self, alpha: f64) -> GnValue {
        let adm = self.admissible(alpha);
        if let Some(ex) = &self.exact {
            let flow = admissible_flow_exact(&ex.mu, &ex.nu, &adm);
            let flow = flow.to_biguint().unwrap_or_default();
            let rest = &ex.total - &flow;
            let ln_g = ln_ratio(&rest, &ex.total);
            let ln_one_minus_g = ln_ratio(&flow, &ex.total);
            return GnValue {
                g: ln_g.exp(),
                one_minus_g: ln_one_minus_g.exp(),
                ln_g,
                ln_one_minus_g,
                exact: true,
            };
        }
        let (mx, my) = (self.mu.mass(), self.nu.mass());
        let flow = match staircase(mx.len(), &adm, my.len()) {
            Some(iv) => staircase_flow(&mx, &my, &iv),
            None => admissible_flow(&mx, &my, &adm).0,
        };
        GnValue::from_float(mx.iter().sum::<f64>() - flow)
    }

    /// An optimal coupling of the type laws for the nested problem, with the
    /// excess probability as objective (floating point).
    pub fn outer_plan(&self, alpha: f64) -> Result<TransportPlan> {
        let (mx, my) = (self.mu.mass(), self.nu.mass());
        let (flow, mut plan) = admissible_flow(&mx, &my, self.admissible(alpha));
        complete_northwest(&mut plan, &mx, &my);
        let total: f64 = plan.iter().sum();
        let plan: Vec<f64> = plan.into_iter().map(|v| v / total).collect();
        Ok(TransportPlan {
            plan: JointDist::new(mx.len(), my.len(), plan)?,
            objective: (mx.iter().sum::<f64>() - flow).clamp(0.0, 1.0),
        })
    }
}

/// `G_α(P_X^n, P_Y^n)` by the nested formula.
pub fn exact_gn(p_x: &Dist, p_y: &Dist, c: &CostMatrix, alpha: f64, n: usize) -> Result<f64> {
    Ok(NestedInstance::build(p_x, p_y, c, n)?.gn(alpha).g)
}

/// `G_α(P_X^n, P_Y^n)` by max-flow over all sequence pairs. Only for tiny
/// instances; used to cross-check the nested formula.
pub fn direct_gn_oracle(
    p_x: &Dist,
    p_y: &Dist,
    c: &CostMatrix,
    alpha: f64,
    n: usize,
) -> Result<f64> {
    c.check_dims(p_x, p_y)?;
    let sx = (p_x.len() as f64).powi(n as i32);
    let sy = (p_y.len() as f64).powi(n as i32);
    if sx * sy > SEQUENCE_LIMIT {
        return Err(Error::SizeGuard(format!(
            "{:.3e} sequence pairs (limit {SEQUENCE_LIMIT:e})",
            sx * sy
        )));
    }
    let seqs = |k: usize| -> Vec<Vec<usize>> {
        let total = k.pow(n as u32);
        (0..total)
            .map(|mut v| {
                let mut s = vec![0; n];
                for d in s.iter_mut().rev() {
                    *d = v % k;
                    v /= k;
                }
                s
            })
            .collect()
    };
    let xs = seqs(p_x.len());
    let ys = seqs(p_y.len());
    let prob = |s: &[usize], p: &Dist| s.iter().map(|&i| p.get(i)).product::<f64>();
    let px: Vec<f64> = xs.iter().map(|s| prob(s, p_x)).collect();
    let py: Vec<f64> = ys.iter().map(|s| prob(s, p_y)).collect();
    let adm = |i: usize, j: usize| {
        let cn = xs[i]
            .iter()
            .zip(&ys[j])
            .map(|(&a, &b)| c.get(a, b))
            .sum::<f64>()
            / n as f64;
        cn <= alpha + crate::transport::ADMISSIBLE_TOL
    };
    let (flow, _) = admissible_flow(&px, &py, adm);
    Ok((px.iter().sum::<f64>() - flow).clamp(0.0, 1.0))
}

/// Lexicographically smallest (row-major) integer joint type with marginals
/// `tx`, `ty` that is optimal for the cost `c`.
pub fn optimal_joint_type(tx: &[usize], ty: &[usize], c: &CostMatrix) -> Vec<usize> {
    let (r, k) = (tx.len(), ty.len());
    let a: Vec<f64> = tx.iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = ty.iter().map(|&v| v as f64).collect();
    let raw = transport_raw(&a, &b, |x, y| c.get(x, y));
    let thr = TIGHT_TOL * (1.0 + c.max_value());
    let tight: Vec<bool> = (0..r * k)
        .map(|i| c.get(i / k, i % k) - raw.f[i / k] - raw.g[i % k] <= thr)
        .collect();
    let total: usize = tx.iter().sum();

    // Feasible iff the tight cells can carry everything with cell `cap` bounds.
    let feasible = |caps: &[Option<usize>], fixed: &[usize]| -> bool {
        let mut g = MaxFlow::<f64>::new(r + k + 2);
        let (s, t) = (r + k, r + k + 1);
        for (x, &m) in tx.iter().enumerate() {
            g.add_edge(s, x, m as f64);
        }
        for (y, &m) in ty.iter().enumerate() {
            g.add_edge(r + y, t, m as f64);
        }
        for i in 0..r * k {
            if !tight[i] {
                continue;
            }
            let cap = if i < fixed.len() {
                fixed[i] as f64
            } else {
                caps[i].map_or(total as f64, |v| v as f64)
            };
            g.add_edge(i / k, r + i % k, cap);
        }
        g.run(s, t, total as f64 + 1.0) >= total as f64
    };

    let mut fixed: Vec<usize> = Vec::with_capacity(r * k);
    let none = vec![None; r * k];
    for i in 0..r * k {
        if !tight[i] {
            fixed.push(0);
            continue;
        }
        let (mut lo, mut hi) = (0usize, tx[i / k].min(ty[i % k]));
        while lo < hi {
            let mid = (lo + hi) / 2;
            let mut caps = none.clone();
            caps[i] = Some(mid);
            if feasible(&caps, &fixed) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        fixed.push(lo);
    }
    fixed
}

/// Sampler for the coupling of `P_X^n` and `P_Y^n` lifted from a coupling of
/// the type laws: draw a type pair, then a uniformly random arrangement of an
/// optimal joint type for that pair.
#[derive(Clone, Debug)]
pub struct LiftedCoupling {
    n: usize,
    rows: usize,
    cols: usize,
    pairs: Vec<(usize, usize)>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    joint: Vec<Vec<usize>>,
    joint_cost: Vec<f64>,
}

/// Lifts a coupling `pi` of the type laws of `inst` to sequences.
pub fn lift_coupling(pi: &JointDist, inst: &NestedInstance) -> Result<LiftedCoupling> {
    if pi.rows() != inst.mu.len() || pi.cols() != inst.nu.len() {
        return Err(Error::Dimension(format!(
            "{}x{} coupling for a {}x{} lattice",
            pi.rows(),
            pi.cols(),
            inst.mu.len(),
            inst.nu.len()
        )));
    }
    let err = pi.marginal_error(&inst.mu.mass(), &inst.nu.mass());
    if err > 1e-9 {
        return Err(Error::Infeasible(format!(
            "type coupling marginals off by {err:e}"
        )));
    }
    let c = &inst.cost;
    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    for i in 0..pi.rows() {
        for j in 0..pi.cols() {
            if pi.get(i, j) > 0.0 {
                pairs.push((i, j));
                weights.push(pi.get(i, j));
            }
        }
    }
    let joint: Vec<Vec<usize>> = pairs
        .par_iter()
        .map(|&(i, j)| optimal_joint_type(&inst.mu.types[i].0, &inst.nu.types[j].0, c))
        .collect();
    let cols = c.cols();
    let joint_cost = joint
        .iter()
        .map(|t| {
            t.iter()
                .enumerate()
                .map(|(k, &m)| m as f64 * c.get(k / cols, k % cols))
                .sum::<f64>()
                / inst.n as f64
        })
        .collect();
    let mut acc = 0.0;
    let cumulative = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    Ok(LiftedCoupling {
        n: inst.n,
        rows: c.rows(),
        cols,
        pairs,
        weights,
        cumulative,
        joint,
        joint_cost,
    })
}

/// One sequence pair with its probability under a lifted coupling.
pub type SequencePair = (Vec<usize>, Vec<usize>, f64);

impl LiftedCoupling {
    /// Draws a pair of sequences `(x^n, y^n)` of symbol indices.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let u = rng.random::<f64>() * total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.pairs.len() - 1);
        let mut cells = self.cells(k);
        cells.shuffle(rng);
        cells.into_iter().unzip()
    }

    fn cells(&self, k: usize) -> Vec<(usize, usize)> {
        let mut cells = Vec::with_capacity(self.n);
        for (idx, &m) in self.joint[k].iter().enumerate() {
            cells.extend(std::iter::repeat_n((idx / self.cols, idx % self.cols), m));
        }
        cells
    }

    /// Probability that the per-letter cost exceeds `alpha`.
    pub fn excess_probability(&self, alpha: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.joint_cost)
            .filter(|(_, &c)| c > alpha + crate::transport::ADMISSIBLE_TOL)
            .map(|(w, _)| w)
            .sum()
    }

    /// The full law on sequence pairs, for small `n`.
    pub fn law(&self) -> Result<Vec<SequencePair>> {
        let size = (self.rows as f64 * self.cols as f64).powi(self.n as i32);
        if size > SEQUENCE_LIMIT {
            return Err(Error::SizeGuard(format!(
                "{size:.3e} sequence pairs (limit {SEQUENCE_LIMIT:e})"
            )));
        }
        let lf = ln_factorials(self.n);
        let mut out = Vec::new();
        for (k, &w) in self.weights.iter().enumerate() {
            let counts = &self.joint[k];
            let ln_class = lf[self.n] - counts.iter().map(|&m| lf[m]).sum::<f64>();
            let each = w / ln_class.exp().round();
            let mut left = counts.clone();
            let mut cur = Vec::with_capacity(self.n);
            arrangements(&mut left, &mut cur, self.n, &mut |seq| {
                let (x, y) = seq.iter().map(|&i| (i / self.cols, i % self.cols)).unzip();
                out.push((x, y, each));
            });
        }
        Ok(out)
    }
}

/// Calls `emit` on every distinct arrangement of the multiset `left`.
fn arrangements(
    left: &mut [usize],
    cur: &mut Vec<usize>,
    n: usize,
    emit: &mut impl FnMut(&[usize]),
) {
    if cur.len() == n {
        emit(cur);
        return;
    }
    for i in 0..left.len() {
        if left[i] > 0 {
            left[i] -= 1;
            cur.push(i);
            arrangements(left, cur, n, emit);
            cur.pop();
            left[i] += 1;
        }
    }
}

/// Splitting coupling of `μ` and `ν` guaranteeing mass on `A × B`.
///
/// With `p = min{μ(A), ν(B)}` the result is
/// `(1 - p) μ' ⊗ ν' + p μ|_A ⊗ ν|_B`, where `μ|_A` is `μ` conditioned on `A`
/// and `μ' = (μ - p μ|_A) / (1 - p)`.
pub fn splitting_coupling(
    mu: &TypeMeasure,
    nu: &TypeMeasure,
    a_set: &BTreeSet<usize>,
    b_set: &BTreeSet<usize>,
) -> Result<JointDist> {
    if a_set.iter().any(|&i| i >= mu.len()) || b_set.iter().any(|&j| j >= nu.len()) {
        return Err(Error::InvalidArgument(
            "set index outside the lattice".into(),
        ));
    }
    let (mx, my) = (mu.mass(), nu.mass());
    splitting_from_masses(&mx, &my, a_set, b_set)
}

pub(crate) fn splitting_from_masses(
    mx: &[f64],
    my: &[f64],
    a_set: &BTreeSet<usize>,
    b_set: &BTreeSet<usize>,
) -> Result<JointDist> {
    let (r, c) = (mx.len(), my.len());
    let ma: f64 = a_set.iter().map(|&i| mx[i]).sum();
    let nb: f64 = b_set.iter().map(|&j| my[j]).sum();
    let p = ma.min(nb);
    let cond = |m: &[f64], set: &BTreeSet<usize>, z: f64| -> Vec<f64> {
        (0..m.len())
            .map(|i| {
                if z > 0.0 && set.contains(&i) {
                    m[i] / z
                } else {
                    0.0
                }
            })
            .collect()
    };
    let mu_a = cond(mx, a_set, ma);
    let nu_b = cond(my, b_set, nb);
    let mut data = vec![0.0; r * c];
    if p < 1.0 {
        let rest = |m: &[f64], cm: &[f64]| -> Vec<f64> {
            m.iter()
                .zip(cm)
                .map(|(a, b)| ((a - p * b) / (1.0 - p)).max(0.0))
                .collect()
        };
        let mu_r = rest(mx, &mu_a);
        let nu_r = rest(my, &nu_b);
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] += (1.0 - p) * mu_r[i] * nu_r[j];
            }
        }
    }
    if p > 0.0 {
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] += p * mu_a[i] * nu_b[j];
            }
        }
    }
    JointDist::new(r, c, data)
}

/// Tail regime for [`exponent_series`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TailMode {
    /// `-(1/n) ln(1 - G)`, for `α` below the transport cost.
    Lower,
    /// `-(1/n) ln G`, for `α` above the transport cost.
    Upper,
}

/// Exact finite-`n` exponents along a sequence of thresholds `α_n`.
pub fn exponent_series(
    p_x: &Dist,
    p_y: &Dist,
    c: &CostMatrix,
    alpha_fn: impl Fn(usize) -> f64 + Sync,
    n_list: &[usize],
    mode: TailMode,
) -> Result<RateCurve> {
    let rows: Vec<Vec<f64>> = n_list
        .par_iter()
        .map(|&n| -> Result<Vec<f64>> {
            let inst = NestedInstance::build(p_x, p_y, c, n)?;
            let alpha = alpha_fn(n);
            let v = inst.gn(alpha);
            let ln = match mode {
                TailMode::Lower => v.ln_one_minus_g,
                TailMode::Upper => v.ln_g,
            };
            let e = if ln == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                -ln / n as f64
            };
            Ok(vec![n as f64, alpha, v.g, e])
        })
        .collect::<Result<_>>()?;
    Ok(RateCurve::new(
        "n",
        &["n", "alpha_n", "G", "exponent"],
        rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(a: f64) -> Dist {
        Dist::binary(a).unwrap()
    }

    #[test]
    fn binary_lattice_order() {
        let t = enum_types(2, 2).unwrap();
        assert_eq!(
            t,
            vec![
                TypeVector::new(vec![0, 2]),
                TypeVector::new(vec![1, 1]),
                TypeVector::new(vec![2, 0])
            ]
        );
        assert!(matches!(enum_types(100, 10), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn type_probabilities_sum_to_one() {
        let p = Dist::from_mass(vec![0.2, 0.3, 0.5]).unwrap();
        let m = TypeMeasure::new(&p, 7).unwrap();
        assert!((m.mass().iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn inner_cost_hamming_is_index_gap() {
        let c = CostMatrix::hamming(2);
        assert!((inner_cost(&[1, 3], &[3, 1], &c, 4) - 0.5).abs() < 1e-15);
        let c3 = CostMatrix::hamming(3);
        assert!((inner_cost(&[2, 1, 0], &[0, 1, 2], &c3, 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn n_one_reduces_to_single_letter() {
        let c = CostMatrix::hamming(2);
        let g = exact_gn(&bern(0.1), &bern(0.5), &c, 0.0, 1).unwrap();
        assert!((g - 0.4).abs() < 1e-15);
    }

    #[test]
    fn exact_and_float_paths_agree() {
        let c = CostMatrix::hamming(2);
        let inst = NestedInstance::build(&bern(0.1), &bern(0.5), &c, 12).unwrap();
        assert!(inst.is_exact());
        let odd = NestedInstance::build(
            &bern(0.1 + 1e-17 + std::f64::consts::PI * 1e-12),
            &bern(0.5),
            &c,
            12,
        )
        .unwrap();
        assert!(!odd.is_exact());
        for k in 0..12 {
            let a = k as f64 / 12.0;
            let e = inst.gn(a);
            let f = odd.gn(a);
            assert!((e.g - f.g).abs() < 1e-9, "alpha {a}: {} vs {}", e.g, f.g);
        }
    }

    #[test]
    fn nested_matches_direct_oracle() {
        let c = CostMatrix::from_rows(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ])
        .unwrap();
        let px = Dist::from_mass(vec![0.5, 0.3, 0.2]).unwrap();
        let py = Dist::from_mass(vec![0.2, 0.3, 0.5]).unwrap();
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let a = exact_gn(&px, &py, &c, alpha, 3).unwrap();
            let b = direct_gn_oracle(&px, &py, &c, alpha, 3).unwrap();
            assert!((a - b).abs() < 1e-12, "alpha {alpha}: {a} vs {b}");
        }
    }

    #[test]
    fn optimal_joint_type_is_optimal_and_lexicographically_least() {
        let c = CostMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(optimal_joint_type(&[2, 1], &[1, 2], &c), vec![0, 2, 1, 0]);
        let h = CostMatrix::hamming(2);
        assert_eq!(optimal_joint_type(&[2, 1], &[1, 2], &h), vec![1, 1, 0, 1]);
    }

    #[test]
    fn lifted_law_has_product_marginals() {
        let c = CostMatrix::hamming(2);
        let (px, py) = (bern(0.3), bern(0.6));
        let inst = NestedInstance::build(&px, &py, &c, 3).unwrap();
        let plan = inst.outer_plan(1.0 / 3.0).unwrap();
        let lift = lift_coupling(&plan.plan, &inst).unwrap();
        let law = lift.law().unwrap();
        let mut mx = std::collections::HashMap::new();
        let mut my = std::collections::HashMap::new();
        for (x, y, p) in &law {
            *mx.entry(x.clone()).or_insert(0.0) += p;
            *my.entry(y.clone()).or_insert(0.0) += p;
        }
        for (x, p) in mx {
            let want: f64 = x.iter().map(|&i| px.get(i)).product();
            assert!((p - want).abs() < 1e-12);
        }
        for (y, p) in my {
            let want: f64 = y.iter().map(|&i| py.get(i)).product();
            assert!((p - want).abs() < 1e-12);
        }
    }

    #[test]
    fn splitting_trivial_cases() {
        let mu = TypeMeasure::new(&bern(0.3), 4).unwrap();
        let nu = TypeMeasure::new(&bern(0.6), 4).unwrap();
        let full_a: BTreeSet<usize> = (0..mu.len()).collect();
        let full_b: BTreeSet<usize> = (0..nu.len()).collect();
        let prod = JointDist::new(
            mu.len(),
            nu.len(),
            mu.mass()
                .iter()
                .flat_map(|a| nu.mass().into_iter().map(move |b| a * b))
                .collect(),
        )
        .unwrap();
        let s = splitting_coupling(&mu, &nu, &full_a, &full_b).unwrap();
        assert!(s.tv(&prod).unwrap() < 1e-15);
        let s0 = splitting_coupling(&mu, &nu, &BTreeSet::new(), &full_b).unwrap();
        assert!(s0.tv(&prod).unwrap() < 1e-15);
    }
}
