//! Problem instances and tabular output shared by the CLI and the library.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::measures::Dist;
use crate::transport::CostMatrix;

/// Marginals, cost and an optional threshold, as read from instance JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct Instance {
    pub px: Dist,
    pub py: Dist,
    pub cost: CostMatrix,
    pub alpha: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRepr {
    px: Dist,
    py: Dist,
    cost: CostMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

impl TryFrom<InstanceRepr> for Instance {
    type Error = Error;
    fn try_from(r: InstanceRepr) -> Result<Self> {
        Instance::new(r.px, r.py, r.cost, r.alpha)
    }
}

impl From<Instance> for InstanceRepr {
    fn from(i: Instance) -> Self {
        InstanceRepr {
            px: i.px,
            py: i.py,
            cost: i.cost,
            alpha: i.alpha,
        }
    }
}

impl Instance {
    pub fn new(px: Dist, py: Dist, cost: CostMatrix, alpha: Option<f64>) -> Result<Self> {
        cost.check_dims(&px, &py)?;
        if let Some(a) = alpha {
            if !a.is_finite() {
                return Err(Error::InvalidArgument(format!("alpha = {a}")));
            }
        }
        Ok(Instance {
            px,
            py,
            cost,
            alpha,
        })
    }

    /// Bernoulli marginals with mass `a`, `b` on symbol 0 and Hamming cost.
    pub fn binary_hamming(a: f64, b: f64, alpha: Option<f64>) -> Result<Self> {
        Self::new(
            Dist::binary(a)?,
            Dist::binary(b)?,
            CostMatrix::hamming(2),
            alpha,
        )
    }

    /// Parses instance JSON; errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::InvalidArgument(format!(
                "instance JSON, line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialisation is infallible")
    }

    /// `(a, b)` when this is a Bernoulli pair with `a ≤ b ≤ ½` under Hamming cost.
    pub fn as_binary_hamming(&self) -> Option<(f64, f64)> {
        if self.px.len() != 2 || self.py.len() != 2 || self.cost != CostMatrix::hamming(2) {
            return None;
        }
        let (a, b) = (self.px.get(0), self.py.get(0));
        (0.0 <= a && a <= b && b <= 0.5).then_some((a, b))
    }
}

/// A sampled map from a parameter to one or more values: the unit of CLI
/// output. Infinite values are written as `inf` in CSV and as the string
/// `"inf"` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub parameter: String,
    pub columns: Vec<String>,
    #[serde(serialize_with = "ser_rows", deserialize_with = "de_rows")]
    pub rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExtReal {
    Num(f64),
    Text(String),
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            ExtReal::Num(v)
        } else {
            ExtReal::Text(format_ext(v))
        }
    }
}

fn ser_rows<S: Serializer>(rows: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let out: Vec<Vec<ExtReal>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| v.into()).collect())
        .collect();
    out.serialize(s)
}

fn de_rows<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
    let raw: Vec<Vec<ExtReal>> = Vec::deserialize(d)?;
    raw.into_iter()
        .map(|r| {
            r.into_iter()
                .map(|v| match v {
                    ExtReal::Num(x) => Ok(x),
                    ExtReal::Text(t) => parse_ext(&t)
                        .ok_or_else(|| serde::de::Error::custom(format!("bad value {t:?}"))),
                })
                .collect()
        })
        .collect()
}

fn format_ext(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.11e}")
    }
}

fn parse_ext(t: &str) -> Option<f64> {
    match t {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => t.parse().ok(),
    }
}

impl RateCurve {
    pub fn new(parameter: &str, columns: &[&str], rows: Vec<Vec<f64>>) -> Self {
        RateCurve {
            parameter: parameter.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// CSV with a header row and 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|&v| format_ext(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serialisation is infallible")
    }
}
