//! Central-limit quantities for Bernoulli marginals under Hamming cost.
//!
//! At `α_n = E + Δ/√n` the optimal excess-cost probability tends to
//! `Λ_Δ = sup_{a'} F_X(a') - F_Y(a' + Δ)`, where `F_X`, `F_Y` are centred
//! normal CDFs with the Bernoulli variances.

use libm::erfc;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::golden_min;

/// `Φ(x / σ)` for variance `sigma2 > 0`.
pub fn normal_cdf(x: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "variance {sigma2} must be positive"
        )));
    }
    Ok(cdf(x, sigma2.sqrt()))
}

fn cdf(x: f64, sigma: f64) -> f64 {
    0.5 * erfc(-x / (sigma * std::f64::consts::SQRT_2))
}

fn upper(x: f64, sigma: f64) -> f64 {
    0.5 * erfc(x / (sigma * std::f64::consts::SQRT_2))
}

/// `F_X(u) - F_Y(v)` without cancellation in either tail.
fn cdf_diff(u: f64, sx: f64, v: f64, sy: f64) -> f64 {
    if u > 0.0 && v > 0.0 {
        upper(v, sy) - upper(u, sx)
    } else {
        cdf(u, sx) - cdf(v, sy)
    }
}

/// Variances and shift of the binary Gaussian limit problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinaryCltInstance {
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub delta: f64,
}

impl BinaryCltInstance {
    /// Requires `0 < a ≤ b ≤ ½`.
    pub fn new(a: f64, b: f64, delta: f64) -> Result<Self> {
        if !(0.0 < a && a <= b && b <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < a ≤ b ≤ 1/2, got a={a}, b={b}"
            )));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta = {delta}")));
        }
        Ok(BinaryCltInstance {
            sigma_x2: a * (1.0 - a),
            sigma_y2: b * (1.0 - b),
            delta,
        })
    }
}

/// Solutions of `f_X(a') = f_Y(a' + Δ)` for the two normal densities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Crossing {
    /// Roots in increasing order; empty when the discriminant is negative.
    pub roots: Vec<f64>,
}

/// Crossing points of the densities (quadratic in `a'` when the variances
/// differ, linear otherwise).
pub fn crossing_points(inst: &BinaryCltInstance) -> Crossing {
    let (vx, vy, d) = (inst.sigma_x2, inst.sigma_y2, inst.delta);
    if vx == vy {
        return Crossing {
            roots: vec![-d / 2.0],
        };
    }
    // (vy - vx) t² - 2 vx d t - vx d² - vx vy ln(vy / vx) = 0
    let qa = vy - vx;
    let qb = -2.0 * vx * d;
    let qc = -vx * d * d - vx * vy * (vy / vx).ln();
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Crossing { roots: vec![] };
    }
    let s = disc.sqrt();
    let mut roots = vec![(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)];
    roots.sort_by(f64::total_cmp);
    Crossing { roots }
}

/// `Λ_Δ` in closed form. For `a = b` it is `(F(-Δ/2) - F(Δ/2)) 1{Δ ≤ 0}`;
/// otherwise the supremum sits at the larger crossing point `a₂'`.
pub fn lambda_binary(a: f64, b: f64, delta: f64) -> Result<f64> {
    let inst = BinaryCltInstance::new(a, b, delta)?;
    let (sx, sy) = (inst.sigma_x2.sqrt(), inst.sigma_y2.sqrt());
    if inst.sigma_x2 == inst.sigma_y2 {
        if delta > 0.0 {
            return Ok(0.0);
        }
        return Ok(cdf_diff(-delta / 2.0, sx, delta / 2.0, sy).max(0.0));
    }
    let c = crossing_points(&inst);
    let Some(&t) = c.roots.last() else {
        return Err(Error::Infeasible("densities do not cross".into()));
    };
    Ok(cdf_diff(t, sx, t + delta, sy).clamp(0.0, 1.0))
}

/// `Λ_Δ` by direct maximisation over a grid with golden-section polish.
pub fn lambda_dual_grid(a: f64, b: f64, delta: f64, grid: usize) -> Result<f64> {
    let inst = BinaryCltInstance::new(a, b, delta)?;
    let (sx, sy) = (inst.sigma_x2.sqrt(), inst.sigma_y2.sqrt());
    let obj = |t: f64| cdf_diff(t, sx, t + delta, sy);
    let half = 6.0 * sx.max(sy) + delta.abs();
    let grid = grid.max(3);
    let step = 2.0 * half / (grid - 1) as f64;
    let (mut best_t, mut best) = (-half, f64::NEG_INFINITY);
    for i in 0..grid {
        let t = -half + step * i as f64;
        let v = obj(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let (_, neg) = golden_min(|t| -obj(t), best_t - step, best_t + step, 200);
    // The supremum also covers a' → ±∞, where the objective tends to 0.
    Ok(best.max(-neg).max(0.0))
}

/// Mean and covariance of a Gaussian vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussParams {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// Covariance of the indicator vector `(1{X = x})_x` under `p`:
/// `diag(p) - p pᵀ`.
pub fn gauss_params(p: &crate::measures::Dist) -> GaussParams {
    let m = p.mass();
    let k = m.len();
    let cov = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        m[i] - m[i] * m[j]
                    } else {
                        -m[i] * m[j]
                    }
                })
                .collect()
        })
        .collect();
    GaussParams {
        mean: vec![0.0; k],
        cov,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0, 1.0).unwrap(), 0.5);
        let v = normal_cdf(1.0, 1.0).unwrap();
        assert!((v - 0.841_344_746_068_542_9).abs() < 1e-15, "{v}");
        assert!((normal_cdf(-3.0, 4.0).unwrap() - 0.066_807_201_268_858_06).abs() < 1e-15);
        assert!(normal_cdf(1.0, 0.0).is_err());
    }

    #[test]
    fn crossing_points_equalise_densities() {
        let inst = BinaryCltInstance::new(0.1, 0.5, 0.7).unwrap();
        let pdf =
            |x: f64, v: f64| (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let c = crossing_points(&inst);
        assert_eq!(c.roots.len(), 2);
        for t in c.roots {
            assert!((pdf(t, 0.09) - pdf(t + 0.7, 0.25)).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_variance_cutoff() {
        assert_eq!(lambda_binary(0.3, 0.3, 0.5).unwrap(), 0.0);
        assert!(lambda_binary(0.3, 0.3, -0.5).unwrap() > 0.0);
        assert_eq!(lambda_binary(0.3, 0.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_matches_grid() {
        for d in [-2.0, -0.3, 0.0, 0.4, 2.5] {
            let a = lambda_binary(0.1, 0.5, d).unwrap();
            let b = lambda_dual_grid(0.1, 0.5, d, 2001).unwrap();
            assert!((a - b).abs() < 1e-9, "Δ={d}: {a} vs {b}");
        }
    }

    #[test]
    fn covariance_rows_sum_to_zero() {
        let g = gauss_params(&crate::measures::Dist::from_mass(vec![0.2, 0.3, 0.5]).unwrap());
        for r in &g.cov {
            assert!(r.iter().sum::<f64>().abs() < 1e-15);
        }
    }
}
