//! Command-line front end: one subcommand per layer, CSV or JSON output.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use serde_json::json;

use crate::clt::{lambda_binary, lambda_dual_grid};
use crate::error::{Error, Result};
use crate::finite_n::{direct_gn_oracle, exponent_series, lift_coupling, NestedInstance, TailMode};
use crate::instance::{Instance, RateCurve};
use crate::ldp::{rate_f, rate_f_binary, rate_g, rate_g_binary, RateQuery};
use crate::mdp::{mdp_rate_lower, mdp_rate_upper};
use crate::transport::{ecp, ecp_dual_bruteforce, ot_cost};

#[derive(Debug, Parser)]
#[command(
    name = "strassen-lab",
    version,
    about = "Exact and asymptotic optimal excess-cost probabilities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// Instance JSON with `px`, `py`, `cost` and optionally `alpha`.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    pub instance: Option<PathBuf>,
    /// Bernoulli mass of symbol 0 under P_X (Hamming cost shortcut).
    #[arg(long, requires = "b")]
    pub a: Option<f64>,
    /// Bernoulli mass of symbol 0 under P_Y (Hamming cost shortcut).
    #[arg(long, requires = "a")]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tail {
    Lower,
    Upper,
}

/// Inclusive grid `lo:hi:steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        return Err(format!("expected lo:hi:steps, got {s:?}"));
    };
    let lo: f64 = lo.parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("{hi:?}: {e}"))?;
    let steps: usize = steps.parse().map_err(|e| format!("{steps:?}: {e}"))?;
    if steps == 0 || !lo.is_finite() || !hi.is_finite() || (steps == 1 && lo != hi) || hi < lo {
        return Err(format!("bad grid {s:?}"));
    }
    if steps == 1 {
        return Ok(Grid(vec![lo]));
    }
    Ok(Grid(
        (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect(),
    ))
}

/// Sample sizes: `lo:hi:doubling` or a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct NList(pub Vec<usize>);

fn parse_nlist(s: &str) -> std::result::Result<NList, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [lo, hi, "doubling"] => {
            let lo: usize = lo.parse().map_err(|e| format!("{lo:?}: {e}"))?;
            let hi: usize = hi.parse().map_err(|e| format!("{hi:?}: {e}"))?;
            if lo == 0 {
                return Err("n must be positive".into());
            }
            std::iter::successors(Some(lo), |&n| Some(n * 2))
                .take_while(|&n| n <= hi)
                .collect()
        }
        [list] => list
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        _ => return Err(format!("expected lo:hi:doubling or a list, got {s:?}")),
    };
    if out.is_empty() || out.contains(&0) {
        return Err(format!("no valid sample sizes in {s:?}"));
    }
    Ok(NList(out))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal transport cost and plan.
    Ot {
        #[command(flatten)]
        inst: InstanceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Single-letter excess-cost probability.
    Ecp {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        /// Also evaluate the subset-enumeration dual.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact G for product marginals at a fixed n.
    ExactGn {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_negative_numbers = true, conflicts_with = "alpha_grid")]
        alpha: Option<f64>,
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        alpha_grid: Option<Grid>,
        /// Also evaluate the brute-force sequence-space max-flow.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Large-deviation rates f(α) and g(α).
    LdpRate {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        alpha_grid: Grid,
        /// Simplex grid resolution per dimension.
        #[arg(long, default_value_t = crate::ldp::DEFAULT_GRID)]
        grid: usize,
        /// Also evaluate the binary closed forms (binary Hamming instances).
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Moderate-deviation rate: f̃ for Δ < 0, g̃ for Δ > 0.
    MdpRate {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        delta_grid: Grid,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Gaussian limit Λ_Δ for Bernoulli marginals.
    Clt {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        delta_grid: Grid,
        /// Also maximise over a grid directly.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 2001)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact exponents over a sequence of n.
    Converge {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, value_parser = parse_nlist)]
        n: NList,
        /// Fixed threshold α.
        #[arg(long, allow_negative_numbers = true, conflicts_with = "delta")]
        alpha: Option<f64>,
        /// Central-limit scaling α_n = E + Δ/√n.
        #[arg(long, allow_negative_numbers = true)]
        delta: Option<f64>,
        /// Tail; by default lower when α < E and upper otherwise.
        #[arg(long, value_enum)]
        mode: Option<Tail>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Draw sequence pairs from the lifted optimal coupling.
    Sample {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, required = true)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance> {
        match (&self.instance, self.a, self.b) {
            (Some(path), _, _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
                Instance::from_json(&text)
            }
            (None, Some(a), Some(b)) => Instance::binary_hamming(a, b, None),
            _ => Err(Error::InvalidArgument(
                "give --instance or both --a and --b".into(),
            )),
        }
    }
}

fn alpha_of(inst: &Instance, flag: Option<f64>) -> Result<f64> {
    flag.or(inst.alpha).ok_or_else(|| {
        Error::InvalidArgument("no alpha: pass --alpha or set it in the instance".into())
    })
}

fn render(curve: &RateCurve, format: Format) -> String {
    match format {
        Format::Csv => curve.to_csv(),
        Format::Json => curve.to_json() + "\n",
    }
}

/// Output of one command and where it should go.
pub struct Output {
    pub text: String,
    pub path: Option<PathBuf>,
    pub warnings: Vec<String>,
}

/// Runs a parsed command.
pub fn run(cli: Cli) -> Result<Output> {
    let mut warnings = Vec::new();
    let (text, path) = match cli.command {
        Command::Ot { inst, output } => {
            let i = inst.load()?;
            let plan = ot_cost(&i.px, &i.py, &i.cost)?;
            let text = match output.format {
                Format::Csv => {
                    RateCurve::new("objective", &["objective"], vec![vec![plan.objective]]).to_csv()
                }
                Format::Json => {
                    serde_json::to_string_pretty(&plan).expect("plan serialises") + "\n"
                }
            };
            (text, output.out)
        }
        Command::Ecp {
            inst,
            alpha,
            oracle,
            output,
        } => {
            let i = inst.load()?;
            let alpha = alpha_of(&i, alpha)?;
            let plan = ecp(&i.px, &i.py, &i.cost, alpha)?;
            let dual = if oracle {
                Some(ecp_dual_bruteforce(&i.px, &i.py, &i.cost, alpha)?)
            } else {
                None
            };
            let text = match output.format {
                Format::Csv => {
                    let mut cols = vec!["alpha", "G"];
                    let mut row = vec![alpha, plan.objective];
                    if let Some(d) = &dual {
                        cols.push("G_dual");
                        row.push(d.value);
                    }
                    RateCurve::new("alpha", &cols, vec![row]).to_csv()
                }
                Format::Json => {
                    let mut v = json!({ "alpha": alpha, "G": plan.objective, "plan": plan });
                    if let Some(d) = &dual {
                        v["dual"] = json!({ "value": d.value, "witness": d.set });
                    }
                    serde_json::to_string_pretty(&v).expect("json serialises") + "\n"
                }
            };
            (text, output.out)
        }
        Command::ExactGn {
            inst,
            n,
            alpha,
            alpha_grid,
            oracle,
            output,
        } => {
            let i = inst.load()?;
            let alphas = match alpha_grid {
                Some(g) => g.0,
                None => vec![alpha_of(&i, alpha)?],
            };
            let nested = NestedInstance::build(&i.px, &i.py, &i.cost, n)?;
            let e0 = ot_cost(&i.px, &i.py, &i.cost)?.objective;
            let mut cols = vec!["n", "alpha_n", "G", "exponent"];
            if oracle {
                cols.push("G_direct");
            }
            let mut rows = Vec::new();
            for a in alphas {
                let v = nested.gn(a);
                let ln = if a < e0 { v.ln_one_minus_g } else { v.ln_g };
                let mut row = vec![n as f64, a, v.g, exponent(ln, n)];
                if oracle {
                    row.push(direct_gn_oracle(&i.px, &i.py, &i.cost, a, n)?);
                }
                rows.push(row);
            }
            (
                render(&RateCurve::new("alpha_n", &cols, rows), output.format),
                output.out,
            )
        }
        Command::LdpRate {
            inst,
            alpha_grid,
            grid,
            oracle,
            output,
        } => {
            let i = inst.load()?;
            let binary = if oracle {
                Some(i.as_binary_hamming().ok_or_else(|| {
                    Error::InvalidArgument(
                        "--oracle needs a binary Hamming instance with a ≤ b ≤ 1/2".into(),
                    )
                })?)
            } else {
                None
            };
            let q = RateQuery::new(i.px.clone(), i.py.clone(), i.cost.clone(), 0.0)?;
            let mut cols = vec!["alpha", "f", "g"];
            if binary.is_some() {
                cols.extend(["f_binary", "g_binary"]);
            }
            let rows: Vec<Vec<f64>> = {
                use rayon::prelude::*;
                alpha_grid
                    .0
                    .par_iter()
                    .map(|&a| -> Result<(Vec<f64>, bool)> {
                        let qa = RateQuery {
                            alpha: a,
                            ..q.clone()
                        };
                        let f = rate_f(&qa, grid)?;
                        let g = rate_g(&qa, grid)?;
                        let mut row = vec![a, f.value, g.value];
                        if let Some((pa, pb)) = binary {
                            row.push(rate_f_binary(pa, pb, a)?);
                            row.push(if a > pb - pa {
                                rate_g_binary(pa, pb, a)?
                            } else {
                                0.0
                            });
                        }
                        Ok((row, f.stalled || g.stalled))
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .map(|(row, stalled)| {
                        if stalled {
                            warnings
                                .push(format!("inner solver did not settle at alpha = {}", row[0]));
                        }
                        row
                    })
                    .collect()
            };
            (
                render(&RateCurve::new("alpha", &cols, rows), output.format),
                output.out,
            )
        }
        Command::MdpRate {
            inst,
            delta_grid,
            output,
        } => {
            let i = inst.load()?;
            let rows = delta_grid
                .0
                .iter()
                .map(|&d| {
                    let v = if d < 0.0 {
                        mdp_rate_lower(&i.px, &i.py, &i.cost, d)?
                    } else if d > 0.0 {
                        mdp_rate_upper(&i.px, &i.py, &i.cost, d)?
                    } else {
                        0.0
                    };
                    Ok(vec![d, v])
                })
                .collect::<Result<Vec<_>>>()?;
            (
                render(
                    &RateCurve::new("delta", &["delta", "rate"], rows),
                    output.format,
                ),
                output.out,
            )
        }
        Command::Clt {
            a,
            b,
            delta_grid,
            oracle,
            grid,
            output,
        } => {
            let mut cols = vec!["delta", "lambda"];
            if oracle {
                cols.push("lambda_grid");
            }
            let rows = delta_grid
                .0
                .iter()
                .map(|&d| {
                    let mut row = vec![d, lambda_binary(a, b, d)?];
                    if oracle {
                        row.push(lambda_dual_grid(a, b, d, grid)?);
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            (
                render(&RateCurve::new("delta", &cols, rows), output.format),
                output.out,
            )
        }
        Command::Converge {
            inst,
            n,
            alpha,
            delta,
            mode,
            output,
        } => {
            let i = inst.load()?;
            let e0 = ot_cost(&i.px, &i.py, &i.cost)?.objective;
            let (alpha_fn, default_mode): (Box<dyn Fn(usize) -> f64 + Sync>, TailMode) =
                match (alpha, delta) {
                    (_, Some(d)) => (
                        Box::new(move |n| e0 + d / (n as f64).sqrt()),
                        TailMode::Upper,
                    ),
                    (a, None) => {
                        let a = alpha_of(&i, a)?;
                        (
                            Box::new(move |_| a),
                            if a < e0 {
                                TailMode::Lower
                            } else {
                                TailMode::Upper
                            },
                        )
                    }
                };
            let mode = match mode {
                Some(Tail::Lower) => TailMode::Lower,
                Some(Tail::Upper) => TailMode::Upper,
                None => default_mode,
            };
            let curve = exponent_series(&i.px, &i.py, &i.cost, alpha_fn, &n.0, mode)?;
            (render(&curve, output.format), output.out)
        }
        Command::Sample {
            inst,
            n,
            alpha,
            count,
            seed,
            out,
        } => {
            let i = inst.load()?;
            let alpha = alpha_of(&i, alpha)?;
            let nested = NestedInstance::build(&i.px, &i.py, &i.cost, n)?;
            let plan = nested.outer_plan(alpha)?;
            let lifted = lift_coupling(&plan.plan, &nested)?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<_> = (0..count)
                .map(|_| {
                    let (x, y) = lifted.sample(&mut rng);
                    json!({ "x": x, "y": y })
                })
                .collect();
            let v = json!({ "n": n, "alpha": alpha, "seed": seed, "samples": samples });
            (
                serde_json::to_string(&v).expect("json serialises") + "\n",
                out,
            )
        }
    };
    Ok(Output {
        text,
        path,
        warnings,
    })
}

fn exponent(ln: f64, n: usize) -> f64 {
    if ln == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        -ln / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse() {
        assert_eq!(
            parse_grid("-3:3:7").unwrap().0,
            vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]
        );
        assert_eq!(parse_grid("0.2:0.2:1").unwrap().0, vec![0.2]);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1").is_err());
        assert_eq!(
            parse_nlist("50:800:doubling").unwrap().0,
            vec![50, 100, 200, 400, 800]
        );
        assert_eq!(parse_nlist("3,5").unwrap().0, vec![3, 5]);
        assert!(parse_nlist("0,5").is_err());
    }
}
