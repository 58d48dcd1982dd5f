//! Small numerical helpers shared by the rate solvers.

/// `ln(i!)` for `i = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Binomial coefficient as `f64`, saturating at `+∞`.
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0f64;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Minimises `f` on `[lo, hi]` by golden-section search.
pub fn golden_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Ternary search for a convex function on `[lo, hi]`.
///
/// Ties move the left end, which is safe for convex functions with flat
/// stretches.
pub fn convex_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> (f64, f64) {
    for _ in 0..iters {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Bisection for a sign change of `f` on `[lo, hi]`, with `f(lo)` and
/// `f(hi)` of opposite sign. Returns the final bracket.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> (f64, f64) {
    let lo_pos = f(lo) > 0.0;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Nelder–Mead simplex minimisation from an initial simplex.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: Vec<Vec<f64>>,
    iters: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let dim = start[0].len();
    let mut pts: Vec<(Vec<f64>, f64)> = start
        .into_iter()
        .map(|p| {
            let v = f(&p);
            (p, v)
        })
        .collect();
    for _ in 0..iters {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = pts[0].1;
        let worst = pts[dim].1;
        if worst.is_finite() && (worst - best).abs() <= tol * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = vec![0.0; dim];
        for (p, _) in &pts[..dim] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / dim as f64;
            }
        }
        let lerp = |t: f64, w: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(w)
                .map(|(c, x)| c + t * (x - c))
                .collect()
        };
        let worst_p = pts[dim].0.clone();
        let refl = lerp(-1.0, &worst_p);
        let fr = f(&refl);
        if fr < pts[0].1 {
            let exp = lerp(-2.0, &worst_p);
            let fe = f(&exp);
            pts[dim] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < pts[dim - 1].1 {
            pts[dim] = (refl, fr);
        } else {
            let con = lerp(0.5, &worst_p);
            let fc = f(&con);
            if fc < pts[dim].1 {
                pts[dim] = (con, fc);
            } else {
                let b = pts[0].0.clone();
                for (p, v) in pts.iter_mut().skip(1) {
                    *p = b
                        .iter()
                        .zip(p.iter())
                        .map(|(a, x)| a + 0.5 * (x - a))
                        .collect();
                    *v = f(p);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    pts.swap_remove(0)
}

/// Orthonormal basis of the zero-sum hyperplane in `R^k`, as `k - 1` columns
/// (Helmert contrasts).
pub fn zero_sum_basis(k: usize) -> Vec<Vec<f64>> {
    (1..k)
        .map(|j| {
            let norm = ((j * (j + 1)) as f64).sqrt();
            let mut v = vec![0.0; k];
            for x in v.iter_mut().take(j) {
                *x = 1.0 / norm;
            }
            v[j] = -(j as f64) / norm;
            v
        })
        .collect()
}

/// `Σ_j u_j basis_j`.
pub fn combine(basis: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    let k = basis.first().map_or(u.len() + 1, |b| b.len());
    let mut out = vec![0.0; k];
    for (b, &c) in basis.iter().zip(u) {
        for (o, v) in out.iter_mut().zip(b) {
            *o += c * v;
        }
    }
    out
}

/// Deterministic, roughly uniform directions on the unit sphere in `R^d`.
pub fn sphere_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        0 => vec![],
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let g = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = g * i as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed_0000 + d as u64);
            let normal = rand_distr_normal;
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..d).map(|_| normal(rng.random(), rng.random())).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                    v.into_iter().map(|x| x / n).collect()
                })
                .collect()
        }
    }
}

fn rand_distr_normal(u1: f64, u2: f64) -> f64 {
    let u1 = u1.max(f64::MIN_POSITIVE);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Normalises `u` to unit Euclidean length; `None` for the zero vector.
pub fn normalize(u: &[f64]) -> Option<Vec<f64>> {
    let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 0.0 && n.is_finite()).then(|| u.iter().map(|x| x / n).collect())
}

/// All compositions of `total` into `parts` non-negative parts, in
/// lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; parts];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
    }
    if parts > 0 {
        rec(0, total, &mut cur, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helmert_basis_is_orthonormal_and_zero_sum() {
        for k in 2..6 {
            let b = zero_sum_basis(k);
            for (i, u) in b.iter().enumerate() {
                assert!(u.iter().sum::<f64>().abs() < 1e-15);
                for (j, v) in b.iter().enumerate() {
                    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((d - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, _) = golden_min(|x| (x - 0.3).powi(2), -1.0, 2.0, 100);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn convex_min_handles_flat_bottom() {
        let (_, v) = convex_min(|x: f64| (x.abs() - 1.0).max(0.0), -5.0, 3.0, 100);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let (x, v) = nelder_mead(
            f,
            vec![vec![-1.0, 1.0], vec![-0.9, 1.0], vec![-1.0, 1.1]],
            5000,
            1e-16,
        );
        assert!(v < 1e-8, "{x:?} {v}");
    }

    #[test]
    fn compositions_are_lexicographic() {
        assert_eq!(compositions(2, 2), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert_eq!(compositions(3, 3).len(), 10);
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        for d in 1..6 {
            for p in sphere_directions(d, 50) {
                let n: f64 = p.iter().map(|x| x * x).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }
}
