//! Random instances and property checks shared by the proptest suite and the
//! acceptance runner. Each check returns `Err` with a description on failure.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use strassen_lab::finite_n::{exact_gn, splitting_coupling, TypeMeasure};
use strassen_lab::mdp::{lipschitz_constant, seta_check, theta};
use strassen_lab::measures::{coupling_transfer, kl, tv};
use strassen_lab::transport::{optimal_support, ot_cost};
use strassen_lab::{CostMatrix, Dist, JointDist, SignedVec};

pub type Check = std::result::Result<(), String>;

/// Strictly positive masses with a spread of magnitudes.
pub fn random_dist<R: Rng>(rng: &mut R, k: usize) -> Dist {
    let raw: Vec<f64> = (0..k)
        .map(|_| rng.random_range(0.02..1.0f64).powi(2))
        .collect();
    let s: f64 = raw.iter().sum();
    Dist::from_mass(raw.iter().map(|v| v / s).collect()).unwrap()
}

pub fn random_cost<R: Rng>(rng: &mut R, r: usize, c: usize) -> CostMatrix {
    CostMatrix::new(
        r,
        c,
        (0..r * c).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap()
}

/// Masses that are multiples of `1/den`, so nested solvers run exactly.
pub fn random_rational_dist<R: Rng>(rng: &mut R, k: usize, den: u32) -> Dist {
    let mut counts = vec![1u32; k];
    for _ in 0..den - k as u32 {
        counts[rng.random_range(0..k)] += 1;
    }
    Dist::from_mass(counts.iter().map(|&c| c as f64 / den as f64).collect()).unwrap()
}

/// Zero-sum vector with entries in `[-1, 1]`.
pub fn random_zero_sum<R: Rng>(rng: &mut R, k: usize) -> SignedVec {
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = v.iter().sum::<f64>() / k as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m > 1.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
    SignedVec::new(v).unwrap()
}

fn mix(p: &Dist, q: &Dist, t: f64) -> Dist {
    p.with_mass(
        p.mass()
            .iter()
            .zip(q.mass())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect(),
    )
    .unwrap()
}

pub fn kl_tv_axioms(p: &Dist, q: &Dist) -> Check {
    let d = kl(q, p).unwrap();
    let t = tv(q, p).unwrap();
    if kl(p, p).unwrap().abs() > 1e-14 || tv(p, p).unwrap() != 0.0 {
        return Err("divergence of a distribution from itself".into());
    }
    if d < -1e-14 {
        return Err(format!("negative KL {d}"));
    }
    if !(0.0..=1.0 + 1e-15).contains(&t) || (t - tv(p, q).unwrap()).abs() > 1e-15 {
        return Err(format!("TV {t} out of range or asymmetric"));
    }
    // Pinsker.
    if 2.0 * t * t > d + 1e-12 {
        return Err(format!("Pinsker fails: tv={t}, kl={d}"));
    }
    Ok(())
}

pub fn e_convexity(p0: &Dist, q0: &Dist, p1: &Dist, q1: &Dist, c: &CostMatrix, t: f64) -> Check {
    let e = |p: &Dist, q: &Dist| ot_cost(p, q, c).unwrap().objective;
    let mid = e(&mix(p0, p1, t), &mix(q0, q1, t));
    let chord = (1.0 - t) * e(p0, q0) + t * e(p1, q1);
    if mid > chord + 1e-10 {
        return Err(format!("E above chord: {mid} > {chord}"));
    }
    Ok(())
}

pub fn theta_homogeneity(
    p: &Dist,
    q: &Dist,
    c: &CostMatrix,
    bx: &SignedVec,
    by: &SignedVec,
    t: f64,
) -> Check {
    let s = optimal_support(p, q, c, 1e-9).unwrap();
    let base = theta(bx, by, &s, c).unwrap();
    let scaled = theta(&bx.scaled(t), &by.scaled(t), &s, c).unwrap();
    if base.is_infinite() {
        return if scaled == base {
            Ok(())
        } else {
            Err(format!("θ={base} but θ(tβ)={scaled}"))
        };
    }
    if (scaled - t * base).abs() > 1e-9 * (1.0 + t * base.abs()) {
        return Err(format!("θ(tβ)={scaled}, tθ(β)={}", t * base));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn theta_subadditivity(
    p: &Dist,
    q: &Dist,
    c: &CostMatrix,
    ax: &SignedVec,
    ay: &SignedVec,
    bx: &SignedVec,
    by: &SignedVec,
) -> Check {
    let s = optimal_support(p, q, c, 1e-9).unwrap();
    let sum = |u: &SignedVec, v: &SignedVec| {
        SignedVec::new(
            u.values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap()
    };
    let lhs = theta(&sum(ax, bx), &sum(ay, by), &s, c).unwrap();
    let rhs = theta(ax, ay, &s, c).unwrap() + theta(bx, by, &s, c).unwrap();
    if lhs > rhs + 1e-9 {
        return Err(format!("θ(α+β)={lhs} > θ(α)+θ(β)={rhs}"));
    }
    Ok(())
}

/// `|θ(α) - θ(β)| ≤ C' max(‖α_X - β_X‖∞, ‖α_Y - β_Y‖∞)` with `C'` the exact
/// constant inflated by 10%.
#[allow(clippy::too_many_arguments)]
pub fn theta_lipschitz(
    p: &Dist,
    q: &Dist,
    c: &CostMatrix,
    ax: &SignedVec,
    ay: &SignedVec,
    bx: &SignedVec,
    by: &SignedVec,
) -> Check {
    let s = optimal_support(p, q, c, 1e-9).unwrap();
    let lip = 1.1 * lipschitz_constant(p, q, c).unwrap();
    let dist = |u: &SignedVec, v: &SignedVec| {
        u.values()
            .iter()
            .zip(v.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let d = dist(ax, bx).max(dist(ay, by));
    let (ta, tb) = (theta(ax, ay, &s, c).unwrap(), theta(bx, by, &s, c).unwrap());
    if (ta - tb).abs() > lip * d + 1e-9 {
        return Err(format!("|{ta} - {tb}| > {lip} * {d}"));
    }
    Ok(())
}

pub fn seta_inequality(p: &Dist, q: &Dist, c: &CostMatrix, qx: &Dist, qy: &Dist, a: f64) -> Check {
    let r = seta_check(p, q, c, qx, qy, a).unwrap();
    if !r.holds {
        return Err(format!("(E(Q)-α)/a = {} < θ = {}", r.lhs, r.rhs));
    }
    Ok(())
}

pub fn coupling_transfer_bound(q_xy: &JointDist, p: &Dist, q: &Dist) -> Check {
    let moved = coupling_transfer(q_xy, p, q).unwrap();
    let err = moved.marginal_error(p.mass(), q.mass());
    if err > 1e-12 {
        return Err(format!("marginal error {err}"));
    }
    let qx = p.with_mass(q_xy.row_marginal()).unwrap();
    let qy = q.with_mass(q_xy.col_marginal()).unwrap();
    let bound = tv(&qx, p).unwrap() + tv(&qy, q).unwrap();
    let d = moved.tv(q_xy).unwrap();
    if d > bound + 1e-12 {
        return Err(format!("TV moved {d} > {bound}"));
    }
    Ok(())
}

pub fn gn_alpha_monotone(p: &Dist, q: &Dist, c: &CostMatrix, n: usize, a0: f64, a1: f64) -> Check {
    let (lo, hi) = if a0 <= a1 { (a0, a1) } else { (a1, a0) };
    let g_lo = exact_gn(p, q, c, lo, n).unwrap();
    let g_hi = exact_gn(p, q, c, hi, n).unwrap();
    if g_hi > g_lo + 1e-12 {
        return Err(format!("G({hi})={g_hi} > G({lo})={g_lo}"));
    }
    Ok(())
}

pub fn splitting_identities(
    p: &Dist,
    q: &Dist,
    n: usize,
    a_set: &BTreeSet<usize>,
    b_set: &BTreeSet<usize>,
) -> Check {
    let mu = TypeMeasure::new(p, n).unwrap();
    let nu = TypeMeasure::new(q, n).unwrap();
    let a_set: BTreeSet<usize> = a_set.iter().map(|i| i % mu.len()).collect();
    let b_set: BTreeSet<usize> = b_set.iter().map(|j| j % nu.len()).collect();
    let pi = splitting_coupling(&mu, &nu, &a_set, &b_set).unwrap();
    let (mx, my) = (mu.mass(), nu.mass());
    let err = pi.marginal_error(&mx, &my);
    if err > 1e-12 {
        return Err(format!("marginal error {err}"));
    }
    let target = a_set
        .iter()
        .map(|&i| mx[i])
        .sum::<f64>()
        .min(b_set.iter().map(|&j| my[j]).sum());
    let mass: f64 = a_set
        .iter()
        .flat_map(|&i| b_set.iter().map(move |&j| (i, j)))
        .map(|(i, j)| pi.get(i, j))
        .sum();
    if mass < target - 1e-12 {
        return Err(format!("π(A×B) = {mass} < {target}"));
    }
    Ok(())
}
