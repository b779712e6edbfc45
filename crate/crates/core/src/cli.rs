//! Command-line front end. Every command prints one JSON document.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::check::{run_suite, CheckConfig, SUITES};
use crate::domain::{delta_extract, least_ideal_stream};
use crate::error::{Error, Result};
use crate::lift::{enumerate_dense, interpret_type, Bases, FnPoint, TypeExpr};
use crate::metric::validate_metric;
use crate::numeric::{FastCauchy, Rat};
use crate::select::{convergence_harness, metric_selection_level};
use crate::spaces::{
    all_pairs, builtin_space, embed_into_u, point_dist, point_from_json, space_from_json,
    verify_isometry, Elem, Point, Space,
};
use crate::urysohn::{lock, UrysohnBuilder};

#[derive(Parser, Debug)]
#[command(name = "urysohn", version, about = "Rational Urysohn space toolkit")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Default evaluation precision `p` (distances within `2^-p`).
    #[arg(long, global = true, default_value_t = 16,
          value_parser = clap::value_parser!(u32).range(1..))]
    pub precision: u32,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the bookkeeping construction and save the resulting space.
    BuildUrysohn {
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Largest request height visited; `0` means unbounded.
        #[arg(long, default_value_t = 4)]
        height: u32,
        /// Omit the saved builder state from the report.
        #[arg(long)]
        summary: bool,
    },
    /// Embed the first dense points of a space into U and verify distances.
    Embed {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Saved builder state to extend (`@file` or inline JSON).
        #[arg(long)]
        builder: Option<String>,
        #[arg(long, default_value_t = 4)]
        height: u32,
    },
    /// Compute the least-ideal cluster stream of a point and read it back.
    Represent {
        #[command(flatten)]
        space: SpaceArg,
        /// The point, as JSON (e.g. `"1/3"` or `{"dense": 4}`).
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 8)]
        stages: u32,
        #[arg(long, default_value_t = 4096)]
        max_stage: u32,
    },
    /// Evaluate the selection distribution of one level at a point.
    Select {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        point: String,
        /// Number of seeded draws to include.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Sample selection trajectories along a sequence converging to a point.
    Harness {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 0)]
        from: u32,
        #[arg(long, default_value_t = 32)]
        to: u32,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Use `x_n = x + 2^-n` in every coordinate instead of `x_n = x`.
        #[arg(long)]
        perturb: bool,
    },
    /// Enumerate dense elements of a typed space, optionally on a grid.
    Density {
        /// Type expression such as `V1->V1` or `(V1,V2)->V1`
        #[arg(long = "type", value_parser = TypeExpr::from_str)]
        ty: TypeExpr,
        /// Base assignment `V<i>=<space>`; repeatable.
        #[arg(long = "base", value_parser = parse_base, required = true)]
        bases: Vec<(u32, String)>,
        /// Enumerate only this level instead of the diagonal over levels.
        #[arg(long)]
        level: Option<u32>,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// JSON list of arguments to evaluate each element at.
        #[arg(long)]
        eval_grid: Option<PathBuf>,
    },
    /// Run an invariant suite; exits 1 when any assertion fails.
    Check {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        height: u32,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Corrupt one ball radius to exercise failure reporting.
        #[arg(long)]
        inject_fault: bool,
    },
}

/// A space given by kind name, inline JSON, or `@file`.
#[derive(Args, Debug, Clone)]
pub struct SpaceArg {
    #[arg(long, default_value = "real-line")]
    pub space: String,
}

impl SpaceArg {
    pub fn resolve(&self) -> Result<Space> {
        parse_space(&self.space)
    }
}

fn parse_base(s: &str) -> std::result::Result<(u32, String), String> {
    let (var, space) = s
        .split_once('=')
        .ok_or_else(|| format!("expected V<i>=<space>, got {s:?}"))?;
    let i = var
        .strip_prefix('V')
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| format!("bad base variable {var:?}"))?;
    Ok((i, space.to_string()))
}

fn read_json(arg: &str) -> Result<Value> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)?,
        None => arg.to_string(),
    };
    Ok(serde_json::from_str(&text)?)
}

/// `real-line`, `{"kind": ...}`, or `@spec.json`.
pub fn parse_space(arg: &str) -> Result<Space> {
    if arg.starts_with('@') || arg.trim_start().starts_with('{') {
        return space_from_json(&read_json(arg)?);
    }
    builtin_space(arg, &json!({}))
}

fn parse_point(space: &Space, arg: &str) -> Result<Point> {
    let value = serde_json::from_str(arg).unwrap_or_else(|_| Value::String(arg.to_string()));
    point_from_json(space.as_ref(), &value)
}

/// A finished command: its report and whether every check in it held.
#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub ok: bool,
}

fn done(report: Value) -> Result<Outcome> {
    Ok(Outcome { report, ok: true })
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let p = cli.precision;
    match &cli.command {
        Command::BuildUrysohn {
            steps,
            height,
            summary,
        } => {
            let mut b = UrysohnBuilder::new((*height > 0).then_some(*height));
            let taken = b.run_bookkeeping(*steps);
            let metric = validate_metric(b.space());
            let mut report = json!({
                "command": "build-urysohn",
                "steps": steps,
                "steps_taken": taken,
                "height": height,
                "points": b.len(),
                "metric_valid": metric.is_metric(),
                "violations": metric.violations,
            });
            if !summary {
                report["builder"] = b.to_json();
            }
            Ok(Outcome {
                report,
                ok: metric.is_metric(),
            })
        }
        Command::Embed {
            space,
            count,
            builder,
            height,
        } => {
            let space = space.resolve()?;
            let b = match builder {
                Some(arg) => UrysohnBuilder::from_json(&read_json(arg)?)?,
                None => UrysohnBuilder::new((*height > 0).then_some(*height)),
            };
            let shared = b.into_shared();
            let e = embed_into_u(space.clone(), shared.clone(), *count, p)?;
            let iso = verify_isometry(&e, &all_pairs(*count), p)?;
            let images: Vec<Value> = e
                .images()
                .iter()
                .map(|img| {
                    json!({
                        "exact": img.is_exact(),
                        "stages": img.stages().iter().map(|s| s.0).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let points = lock(&shared).len();
            Ok(Outcome {
                ok: iso.all_ok(),
                report: json!({
                    "command": "embed",
                    "space": space.describe(),
                    "precision": p,
                    "images": images,
                    "builder_points": points,
                    "max_discrepancy": iso.max_discrepancy(),
                    "isometry": iso,
                }),
            })
        }
        Command::Represent {
            space,
            point,
            stages,
            max_stage,
        } => {
            let space = space.resolve()?;
            let x = parse_point(&space, point)?;
            let stream = least_ideal_stream(space.as_ref(), &x, *stages, *max_stage)?;
            let back = delta_extract(space.as_ref(), &stream)?;
            let mut errors = Vec::new();
            let mut ok = true;
            for n in 0..*stages {
                let at_n = FastCauchy::constant(space.tag(), back.approx(n));
                let d = point_dist(space.as_ref(), &at_n, &x, n + 4)?;
                // Read within 2^-(n+4) of the truth, so this bound is sound.
                ok &= d <= Rat::pow2_neg(n) + Rat::pow2_neg(n + 4);
                errors.push(d);
            }
            Ok(Outcome {
                ok,
                report: json!({
                    "command": "represent",
                    "space": space.describe(),
                    "stream": stream,
                    "extracted": (0..*stages).map(|n| back.approx(n)).collect::<Vec<Elem>>(),
                    "errors": errors,
                }),
            })
        }
        Command::Select {
            space,
            level,
            point,
            samples,
        } => {
            let space = space.resolve()?;
            let x = parse_point(&space, point)?;
            let l = metric_selection_level(space.clone(), *level)?;
            let trace = l.mu_trace(&x)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let draws: Vec<usize> = (0..*samples).map(|_| trace.dist.sample(&mut rng)).collect();
            let nodes = l
                .points()
                .iter()
                .map(|&i| space.dense_elem(i))
                .collect::<Result<Vec<_>>>()?;
            done(json!({
                "command": "select",
                "space": space.describe(),
                "level": level,
                "nodes": nodes,
                "trace": trace,
                "support": trace.dist.support(),
                "samples": draws,
            }))
        }
        Command::Harness {
            space,
            point,
            from,
            to,
            trials,
            perturb,
        } => {
            let space = space.resolve()?;
            let x = parse_point(&space, point)?;
            let inputs = {
                let x = x.clone();
                let perturb = *perturb;
                move |n: u32| -> Point {
                    if !perturb {
                        return x.clone();
                    }
                    x.map(x.tag().clone(), move |e| match e {
                        Elem::Coords(v) => {
                            Elem::Coords(v.iter().map(|c| c + Rat::pow2_neg(n)).collect())
                        }
                        other => other,
                    })
                }
            };
            if *perturb && !matches!(x.approx(0), Elem::Coords(_)) {
                return Err(Error::UnsupportedElement {
                    space: space.tag().to_string(),
                    detail: "perturbation needs coordinates".into(),
                });
            }
            let rep = convergence_harness(&space, &x, inputs, *from..=*to, *trials, cli.seed)?;
            Ok(Outcome {
                ok: rep.ok(),
                report: json!({
                    "command": "harness",
                    "space": space.describe(),
                    "envelope_below_2^-5": rep.envelope_below(&Rat::pow2_neg(5)),
                    "report": rep,
                }),
            })
        }
        Command::Density {
            ty,
            bases,
            level,
            count,
            eval_grid,
        } => {
            let mut assigned = Bases::new();
            for (i, arg) in bases {
                assigned.insert(*i, parse_space(arg)?);
            }
            let elements = match level {
                None => enumerate_dense(ty, &assigned, *count)?,
                Some(n) => {
                    let l = interpret_type(ty, &assigned, *n)?;
                    let len = l.size().unwrap_or(usize::MAX).min(*count);
                    (0..len).map(|k| l.nu(k)).collect::<Result<_>>()?
                }
            };
            let grid = match eval_grid {
                Some(path) => Some(grid_arguments(
                    ty,
                    &assigned,
                    &read_json(&format!("@{}", path.display()))?,
                )?),
                None => None,
            };
            let items = elements
                .iter()
                .map(|f| {
                    let mut item = json!({ "element": f.describe(p) });
                    if let Some(grid) = &grid {
                        item["values"] = Value::Array(
                            grid.iter()
                                .map(|args| Ok(f.apply_all(args.clone())?.describe(p)))
                                .collect::<Result<_>>()?,
                        );
                    }
                    Ok(item)
                })
                .collect::<Result<Vec<_>>>()?;
            done(json!({
                "command": "density",
                "type": ty,
                "curried": ty.curried(),
                "level": level,
                "count": items.len(),
                "elements": items,
            }))
        }
        Command::Check {
            suite,
            steps,
            height,
            trials,
            inject_fault,
        } => {
            let cfg = CheckConfig {
                seed: cli.seed,
                steps: *steps,
                height: *height,
                trials: *trials,
                precision: p,
                inject_fault: *inject_fault,
            };
            let report = run_suite(suite, &cfg)?;
            Ok(Outcome {
                ok: report.passed,
                report: serde_json::to_value(&report)?,
            })
        }
    }
}

/// Grid entries for the arguments of a curried arrow type with base
/// arguments: one JSON point per argument, or a list for several.
fn grid_arguments(ty: &TypeExpr, bases: &Bases, grid: &Value) -> Result<Vec<Vec<FnPoint>>> {
    let TypeExpr::Arrow { args, .. } = ty.curried() else {
        return Err(Error::UnsupportedType(format!(
            "{ty} is not a function type"
        )));
    };
    let spaces = args
        .iter()
        .map(|a| match a {
            TypeExpr::Base(i) => bases
                .get(i)
                .cloned()
                .ok_or_else(|| Error::UnsupportedType(format!("V{i} has no assigned space"))),
            other => Err(Error::UnsupportedType(format!(
                "grid arguments of type {other} are not supported"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    let entries = grid
        .as_array()
        .ok_or_else(|| Error::InvalidRequest("evaluation grid must be a JSON list".into()))?;
    entries
        .iter()
        .map(|entry| {
            let parts: Vec<&Value> = match (spaces.len(), entry) {
                (1, v) => vec![v],
                (k, Value::Array(vs)) if vs.len() == k => vs.iter().collect(),
                (k, _) => {
                    return Err(Error::InvalidRequest(format!(
                        "grid entry {entry} does not hold {k} arguments"
                    )))
                }
            };
            parts
                .into_iter()
                .zip(&spaces)
                .map(|(v, s)| Ok(FnPoint::Base(point_from_json(s.as_ref(), v)?)))
                .collect()
        })
        .collect()
}

/// Runs one invocation and renders its report as the bytes to print.
pub fn render(outcome: &Outcome) -> String {
    let mut s = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Outcome {
        let cli =
            Cli::try_parse_from(std::iter::once("urysohn").chain(args.iter().copied())).unwrap();
        run(&cli).unwrap()
    }

    #[test]
    fn build_reports_a_metric() {
        let out = run_args(&["build-urysohn", "--steps", "20", "--summary"]);
        assert!(out.ok);
        assert_eq!(out.report["steps_taken"], 20);
        assert!(out.report.get("builder").is_none());
    }

    #[test]
    fn select_midpoint() {
        let out = run_args(&["select", "--level", "1", "--point", "1/2", "--samples", "4"]);
        assert_eq!(out.report["trace"]["dist"], json!(["1/2", "1/2"]));
        assert_eq!(out.report["samples"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn embed_exact_prefix() {
        let out = run_args(&[
            "embed",
            "--space",
            r#"{"kind": "real-line", "prefix": ["0", "1/4", "1/2", "3/4", "1"]}"#,
            "--count",
            "5",
        ]);
        assert!(out.ok);
        assert_eq!(out.report["max_discrepancy"], "0");
    }

    #[test]
    fn represent_and_harness() {
        let out = run_args(&["represent", "--point", "1/3", "--stages", "6"]);
        assert!(out.ok);
        let out = run_args(&[
            "harness",
            "--point",
            "1/3",
            "--to",
            "12",
            "--trials",
            "5",
            "--perturb",
        ]);
        assert!(out.ok);
    }

    #[test]
    fn density_on_grid() {
        let dir = std::env::temp_dir().join(format!("urysohn-grid-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let grid = dir.join("grid.json");
        std::fs::write(&grid, r#"["0", "1/2", "1"]"#).unwrap();
        let out = run_args(&[
            "density",
            "--type",
            "(V1->V1)",
            "--base",
            "V1=real-line",
            "--count",
            "4",
            "--eval-grid",
            grid.to_str().unwrap(),
        ]);
        let elems = out.report["elements"].as_array().unwrap();
        assert_eq!(elems.len(), 4);
        assert!(elems
            .iter()
            .all(|e| e["values"].as_array().unwrap().len() == 3));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn usage_errors_are_parse_failures() {
        for args in [
            vec!["urysohn", "check", "no-such-suite"],
            vec![
                "urysohn",
                "density",
                "--type",
                "(V1->",
                "--base",
                "V1=real-line",
            ],
            vec![
                "urysohn",
                "density",
                "--type",
                "V1",
                "--base",
                "X=real-line",
            ],
            vec![
                "urysohn",
                "select",
                "--precision",
                "0",
                "--level",
                "1",
                "--point",
                "0",
            ],
        ] {
            let err = Cli::try_parse_from(args).unwrap_err();
            assert_eq!(err.exit_code(), 2);
        }
    }
}
