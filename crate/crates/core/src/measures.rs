//! Distributions on finite alphabets and the functionals defined on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total mass and on zero-sum constraints.
pub const MASS_TOL: f64 = 1e-12;

/// Probability distribution on an ordered finite alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistRepr", into = "DistRepr")]
pub struct Dist {
    labels: Vec<String>,
    mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistRepr {
    labels: Vec<String>,
    mass: Vec<f64>,
}

impl TryFrom<DistRepr> for Dist {
    type Error = Error;
    fn try_from(r: DistRepr) -> Result<Self> {
        Dist::new(r.labels, r.mass)
    }
}

impl From<Dist> for DistRepr {
    fn from(d: Dist) -> Self {
        DistRepr {
            labels: d.labels,
            mass: d.mass,
        }
    }
}

impl Dist {
    /// Validates masses (finite, non-negative, summing to one) and labels.
    ///
    /// Negative rounding noise down to `-MASS_TOL` is clamped to zero.
    pub fn new(labels: Vec<String>, mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        if labels.len() != mass.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} labels for {} masses",
                labels.len(),
                mass.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::InvalidDistribution(format!("duplicate label {l:?}")));
            }
        }
        let mut mass = mass;
        for m in mass.iter_mut() {
            if !m.is_finite() || *m < -MASS_TOL {
                return Err(Error::InvalidDistribution(format!("bad mass {m}")));
            }
            if *m < 0.0 {
                *m = 0.0;
            }
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(Dist { labels, mass })
    }

    /// Distribution with labels `"0"`, `"1"`, ...
    pub fn from_mass(mass: Vec<f64>) -> Result<Self> {
        let labels = (0..mass.len()).map(|i| i.to_string()).collect();
        Self::new(labels, mass)
    }

    /// Binary distribution `[a, 1 - a]`: symbol `"0"` carries mass `a`.
    pub fn binary(a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidDistribution(format!(
                "binary mass {a} outside [0,1]"
            )));
        }
        Self::from_mass(vec![a, 1.0 - a])
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::from_mass(vec![1.0 / k as f64; k])
    }

    /// Same alphabet, new masses.
    pub fn with_mass(&self, mass: Vec<f64>) -> Result<Self> {
        Self::new(self.labels.clone(), mass)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> f64 {
        self.mass[i]
    }

    /// Indices carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.mass[i] > 0.0).collect()
    }

    pub fn same_alphabet(&self, other: &Dist) -> bool {
        self.labels == other.labels
    }

    pub(crate) fn check_same_alphabet(&self, other: &Dist) -> Result<()> {
        if self.same_alphabet(other) {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch(format!(
                "{:?} vs {:?}",
                self.labels, other.labels
            )))
        }
    }
}

/// Zero-sum vector on an alphabet: a tangent direction of the simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignedVec(Vec<f64>);

impl TryFrom<Vec<f64>> for SignedVec {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SignedVec::new(v)
    }
}

impl From<SignedVec> for Vec<f64> {
    fn from(v: SignedVec) -> Self {
        v.0
    }
}

impl SignedVec {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "signed vector must be finite and non-empty".into(),
            ));
        }
        let scale: f64 = v.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        let s: f64 = v.iter().sum();
        if s.abs() > MASS_TOL * scale {
            return Err(Error::InvalidArgument(format!(
                "signed vector sums to {s}, expected 0"
            )));
        }
        Ok(SignedVec(v))
    }

    pub fn zeros(k: usize) -> Self {
        SignedVec(vec![0.0; k])
    }

    /// `(q - p) / scale`.
    pub fn difference(q: &Dist, p: &Dist, scale: f64) -> Result<Self> {
        q.check_same_alphabet(p)?;
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale {scale} must be positive"
            )));
        }
        SignedVec::new(
            q.mass
                .iter()
                .zip(&p.mass)
                .map(|(a, b)| (a - b) / scale)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, t: f64) -> Self {
        SignedVec(self.0.iter().map(|x| x * t).collect())
    }

    /// `p + a * self`, if that is still a distribution.
    pub fn perturb(&self, p: &Dist, a: f64) -> Result<Dist> {
        if p.len() != self.len() {
            return Err(Error::Dimension(format!("{} vs {}", p.len(), self.len())));
        }
        p.with_mass(p.mass.iter().zip(&self.0).map(|(m, b)| m + a * b).collect())
    }
}

/// Probability distribution on a product alphabet, stored row-major by `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointDist {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct JointRepr {
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<JointRepr> for JointDist {
    type Error = Error;
    fn try_from(r: JointRepr) -> Result<Self> {
        JointDist::from_rows(r.matrix)
    }
}

impl From<JointDist> for JointRepr {
    fn from(j: JointDist) -> Self {
        JointRepr {
            matrix: j.to_rows(),
        }
    }
}

impl JointDist {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix with {} entries",
                data.len()
            )));
        }
        let mut data = data;
        for m in data.iter_mut() {
            if !m.is_finite() || *m < -MASS_TOL {
                return Err(Error::InvalidDistribution(format!("bad joint mass {m}")));
            }
            if *m < 0.0 {
                *m = 0.0;
            }
        }
        let total: f64 = data.iter().sum();
        // Large lattices accumulate rounding in the sum, so scale the slack.
        let tol = MASS_TOL * (1.0 + (data.len() as f64).sqrt());
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "joint masses sum to {total}, expected 1"
            )));
        }
        Ok(JointDist { rows, cols, data })
    }

    pub fn from_rows(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, |r| r.len());
        if matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged joint matrix".into()));
        }
        Self::new(rows, cols, matrix.into_iter().flatten().collect())
    }

    /// Independent coupling `p ⊗ q`.
    pub fn product(p: &Dist, q: &Dist) -> Self {
        let data = p
            .mass
            .iter()
            .flat_map(|a| q.mass.iter().map(move |b| a * b))
            .collect();
        JointDist {
            rows: p.len(),
            cols: q.len(),
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in self.data.chunks(self.cols) {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    /// Largest deviation of the marginals from `(p, q)`.
    pub fn marginal_error(&self, p: &[f64], q: &[f64]) -> f64 {
        if p.len() != self.rows || q.len() != self.cols {
            return f64::INFINITY;
        }
        let a = self
            .row_marginal()
            .iter()
            .zip(p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let b = self
            .col_marginal()
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        a.max(b)
    }

    pub fn tv(&self, other: &JointDist) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(
                "joint distributions differ in shape".into(),
            ));
        }
        Ok(0.5
            * self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// Relative entropy `D(q‖p)` in nats; `+∞` when `q` is not absolutely
/// continuous with respect to `p`.
pub fn kl(q: &Dist, p: &Dist) -> Result<f64> {
    q.check_same_alphabet(p)?;
    Ok(kl_slice(&q.mass, &p.mass))
}

pub(crate) fn kl_slice(q: &[f64], p: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in q.iter().zip(p) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            d += a * (a / b).ln();
        }
    }
    d.max(0.0)
}

/// Binary relative entropy `D(Bern(x)‖Bern(y))`, with mass `x` on symbol 0.
pub fn kl_binary(x: f64, y: f64) -> f64 {
    kl_slice(&[x, 1.0 - x], &[y, 1.0 - y])
}

/// Total variation distance `½ Σ |p - q|`.
pub fn tv(p: &Dist, q: &Dist) -> Result<f64> {
    p.check_same_alphabet(q)?;
    Ok(0.5
        * p.mass
            .iter()
            .zip(&q.mass)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// `½ Σ β(x)² / p(x)`; `+∞` if `β` charges a zero of `p`.
pub fn chi2_half(beta: &SignedVec, p: &Dist) -> Result<f64> {
    if beta.len() != p.len() {
        return Err(Error::Dimension(format!("{} vs {}", beta.len(), p.len())));
    }
    Ok(chi2_half_slice(&beta.0, &p.mass))
}

pub(crate) fn chi2_half_slice(beta: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&b, &m) in beta.iter().zip(p) {
        if b != 0.0 {
            if m <= 0.0 {
                return f64::INFINITY;
            }
            s += b * b / m;
        }
    }
    0.5 * s
}

/// Maximal coupling of `(from, to)` as a kernel `K[i][j] = P(from = i | to = j)`.
fn maximal_kernel(from: &[f64], to: &[f64]) -> Vec<Vec<f64>> {
    let k = from.len();
    let diag: Vec<f64> = from.iter().zip(to).map(|(a, b)| a.min(*b)).collect();
    let ex_from: Vec<f64> = from
        .iter()
        .zip(&diag)
        .map(|(a, d)| (a - d).max(0.0))
        .collect();
    let ex_to: Vec<f64> = to
        .iter()
        .zip(&diag)
        .map(|(a, d)| (a - d).max(0.0))
        .collect();
    let t: f64 = ex_from.iter().sum();
    let mut kern = vec![vec![0.0; k]; k];
    for j in 0..k {
        if to[j] <= 0.0 {
            continue;
        }
        for i in 0..k {
            let mut m = if i == j { diag[j] } else { 0.0 };
            if t > 0.0 {
                m += ex_from[i] * ex_to[j] / t;
            }
            kern[i][j] = m / to[j];
        }
    }
    kern
}

/// Moves a coupling of `(Q_X, Q_Y)` onto a coupling of `(p_x, p_y)`.
///
/// Each coordinate is re-drawn through a maximal coupling of its current
/// marginal with the target, so the result is within
/// `TV(Q_X, p_x) + TV(Q_Y, p_y)` of `q_xy` in total variation.
pub fn coupling_transfer(q_xy: &JointDist, p_x: &Dist, p_y: &Dist) -> Result<JointDist> {
    if q_xy.rows != p_x.len() || q_xy.cols != p_y.len() {
        return Err(Error::Dimension(format!(
            "{}x{} coupling for alphabets of size {} and {}",
            q_xy.rows,
            q_xy.cols,
            p_x.len(),
            p_y.len()
        )));
    }
    let kx = maximal_kernel(&p_x.mass, &q_xy.row_marginal());
    let ky = maximal_kernel(&p_y.mass, &q_xy.col_marginal());
    let (r, c) = (q_xy.rows, q_xy.cols);
    let mut out = vec![0.0; r * c];
    for x in 0..r {
        for y in 0..c {
            let q = q_xy.get(x, y);
            if q == 0.0 {
                continue;
            }
            for (xp, kxr) in kx.iter().enumerate() {
                let w = kxr[x] * q;
                if w == 0.0 {
                    continue;
                }
                for (yp, kyr) in ky.iter().enumerate() {
                    out[xp * c + yp] += w * kyr[y];
                }
            }
        }
    }
    JointDist::new(r, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn binary_puts_first_mass_on_symbol_zero() {
        let d = Dist::binary(0.1).unwrap();
        assert_eq!(d.mass(), &[0.1, 0.9]);
        assert_eq!(d.labels(), &["0".to_string(), "1".to_string()]);
    }

    #[test]
    fn rejects_bad_masses() {
        assert!(Dist::from_mass(vec![0.5, 0.6]).is_err());
        assert!(Dist::from_mass(vec![1.1, -0.1]).is_err());
        assert!(Dist::from_mass(vec![]).is_err());
        assert!(Dist::new(vec!["a".into(), "a".into()], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn kl_matches_hand_values() {
        let p = Dist::binary(0.5).unwrap();
        let q = Dist::binary(0.1).unwrap();
        let expect = 0.1 * (0.2f64).ln() + 0.9 * (1.8f64).ln();
        assert_abs_diff_eq!(kl(&q, &p).unwrap(), expect, epsilon = 1e-15);
        let z = Dist::binary(0.0).unwrap();
        assert_eq!(kl(&q, &z).unwrap(), f64::INFINITY);
        assert_abs_diff_eq!(kl(&z, &q).unwrap(), -(0.9f64).ln(), epsilon = 1e-15);
    }

    #[test]
    fn kl_rejects_alphabet_mismatch() {
        let p = Dist::binary(0.5).unwrap();
        let q = Dist::new(vec!["a".into(), "b".into()], vec![0.5, 0.5]).unwrap();
        assert!(matches!(kl(&p, &q), Err(Error::AlphabetMismatch(_))));
    }

    #[test]
    fn chi2_half_infinite_off_support() {
        let p = Dist::from_mass(vec![0.0, 1.0]).unwrap();
        let b = SignedVec::new(vec![0.5, -0.5]).unwrap();
        assert_eq!(chi2_half(&b, &p).unwrap(), f64::INFINITY);
        assert_eq!(chi2_half(&SignedVec::zeros(2), &p).unwrap(), 0.0);
    }

    #[test]
    fn signed_vec_requires_zero_sum() {
        assert!(SignedVec::new(vec![0.2, -0.1]).is_err());
        assert!(SignedVec::new(vec![1e6, -1e6]).is_ok());
    }

    #[test]
    fn joint_json_shape() {
        let j = JointDist::product(&Dist::binary(0.5).unwrap(), &Dist::binary(0.25).unwrap());
        let s = serde_json::to_string(&j).unwrap();
        assert_eq!(s, r#"{"matrix":[[0.125,0.375],[0.125,0.375]]}"#);
        let back: JointDist = serde_json::from_str(&s).unwrap();
        assert_eq!(back, j);
    }

    #[test]
    fn coupling_transfer_identity_when_marginals_match() {
        let px = Dist::from_mass(vec![0.2, 0.3, 0.5]).unwrap();
        let py = Dist::binary(0.4).unwrap();
        let q = JointDist::product(&px, &py);
        let t = coupling_transfer(&q, &px, &py).unwrap();
        assert!(t.tv(&q).unwrap() < 1e-15);
    }

    #[test]
    fn coupling_transfer_tv_bound() {
        let q = JointDist::from_rows(vec![vec![0.3, 0.1], vec![0.2, 0.4]]).unwrap();
        let px = Dist::binary(0.6).unwrap();
        let py = Dist::binary(0.3).unwrap();
        let t = coupling_transfer(&q, &px, &py).unwrap();
        assert!(t.marginal_error(px.mass(), py.mass()) < 1e-15);
        let bound = 0.2 + 0.2;
        assert!(t.tv(&q).unwrap() <= bound + 1e-15);
    }
}
