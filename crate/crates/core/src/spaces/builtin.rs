use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Value};

use super::enumerate::{dyadic_unit_shell, index_shell, rational_shell, Enumerator};
use super::{Combine, EffectiveSpace, Elem, Space};
use crate::error::{Error, Result};
use crate::metric::FinMetric;
use crate::numeric::{Rat, SpaceTag};
use crate::urysohn::{lock, SharedBuilder, UPoint, UrysohnBuilder};

/// `sqrt(s)` rounded down to a multiple of `2^-p`, hence within `2^-p`.
pub fn sqrt_within(s: &Rat, p: u32) -> Rat {
    assert!(!s.is_negative(), "square root of a negative number");
    let scale = BigInt::from(1u8) << (2 * p as usize);
    let scaled = (s.numer() * scale) / s.denom();
    let root = scaled.sqrt();
    Rat::from_big(BigRational::new(root, BigInt::from(1u8) << p as usize))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    Max,
    Euclidean,
}

/// `Q^d` or `[0,1]` with a norm metric, points given by rational coordinates.
#[derive(Debug)]
pub struct CoordSpace {
    kind: &'static str,
    dim: usize,
    norm: Norm,
    dense: Enumerator<Vec<Rat>>,
    params: Value,
}

impl CoordSpace {
    pub fn real_line(prefix: Vec<Rat>) -> CoordSpace {
        let params = json!({ "kind": "real-line", "prefix": prefix });
        CoordSpace {
            kind: "real-line",
            dim: 1,
            norm: Norm::Max,
            dense: Enumerator::new(prefix.into_iter().map(|q| vec![q]).collect(), |h| {
                rational_shell(h).into_iter().map(|q| vec![q]).collect()
            }),
            params,
        }
    }

    pub fn unit_interval(prefix: Vec<Rat>) -> Result<CoordSpace> {
        if let Some(q) = prefix.iter().find(|q| q.is_negative() || **q > Rat::ONE) {
            return Err(Error::SpaceParams(format!("{q} lies outside [0, 1]")));
        }
        let params = json!({ "kind": "unit-interval", "prefix": prefix });
        Ok(CoordSpace {
            kind: "unit-interval",
            dim: 1,
            norm: Norm::Max,
            dense: Enumerator::new(prefix.into_iter().map(|q| vec![q]).collect(), |k| {
                dyadic_unit_shell(k).into_iter().map(|q| vec![q]).collect()
            }),
            params,
        })
    }

    /// `Q^dim` enumerated in shells of the one-dimensional rational order.
    pub fn rational_grid(dim: usize, norm: Norm, prefix: Vec<Vec<Rat>>) -> Result<CoordSpace> {
        if dim == 0 {
            return Err(Error::SpaceParams("dimension must be positive".into()));
        }
        if let Some(v) = prefix.iter().find(|v| v.len() != dim) {
            return Err(Error::SpaceParams(format!(
                "prefix vector of length {} in dimension {dim}",
                v.len()
            )));
        }
        let kind = match norm {
            Norm::Max => "maxnorm-rd",
            Norm::Euclidean => "euclidean-rd",
        };
        let params = json!({ "kind": kind, "dim": dim, "prefix": prefix });
        let line = Arc::new(Enumerator::new(Vec::new(), rational_shell));
        Ok(CoordSpace {
            kind,
            dim,
            norm,
            dense: Enumerator::new(prefix, move |k| {
                index_shell(dim, k)
                    .into_iter()
                    .map(|idx| idx.into_iter().map(|i| line.get(i)).collect())
                    .collect()
            }),
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn coords(&self, e: &Elem) -> Result<Vec<Rat>> {
        let v = match e {
            Elem::Dense(i) => self.dense.get(*i),
            Elem::Coords(v) => v.clone(),
        };
        if v.len() != self.dim {
            return Err(Error::UnsupportedElement {
                space: self.kind.to_string(),
                detail: format!("{} coordinates, expected {}", v.len(), self.dim),
            });
        }
        Ok(v)
    }
}

impl EffectiveSpace for CoordSpace {
    fn tag(&self) -> SpaceTag {
        if self.dim == 1 || self.kind == "unit-interval" {
            SpaceTag::new(self.kind)
        } else {
            SpaceTag::new(format!("{}:{}", self.kind, self.dim))
        }
    }

    fn dense_len(&self) -> Option<usize> {
        None
    }

    fn is_exact(&self) -> bool {
        self.norm == Norm::Max || self.dim == 1
    }

    fn dense_elem(&self, i: usize) -> Result<Elem> {
        Ok(Elem::Coords(self.dense.get(i)))
    }

    fn elem_dist(&self, a: &Elem, b: &Elem, prec: u32) -> Result<Rat> {
        let (x, y) = (self.coords(a)?, self.coords(b)?);
        let diffs = x.iter().zip(&y).map(|(p, q)| (p - q).abs());
        Ok(match (self.norm, self.dim) {
            (Norm::Max, _) | (_, 1) => diffs.max().unwrap_or(Rat::ZERO),
            (Norm::Euclidean, _) => {
                let s: Rat = diffs.map(|d| &d * &d).sum();
                sqrt_within(&s, prec)
            }
        })
    }

    fn combine(&self) -> Combine {
        Combine::Linear
    }

    fn describe(&self) -> Value {
        self.params.clone()
    }
}

/// A finite space read from a distance matrix; the dense set is the space.
#[derive(Debug)]
pub struct FiniteSpace {
    metric: FinMetric,
}

impl FiniteSpace {
    pub fn new(metric: FinMetric) -> FiniteSpace {
        FiniteSpace { metric }
    }

    pub fn metric(&self) -> &FinMetric {
        &self.metric
    }

    fn index(&self, e: &Elem) -> Result<usize> {
        match e {
            Elem::Dense(i) => {
                self.check_index(*i)?;
                Ok(*i)
            }
            Elem::Coords(_) => Err(Error::UnsupportedElement {
                space: "finite".into(),
                detail: "points of a finite space are dense indices".into(),
            }),
        }
    }
}

impl EffectiveSpace for FiniteSpace {
    fn tag(&self) -> SpaceTag {
        SpaceTag::new(format!("finite:{}", self.metric.len()))
    }

    fn dense_len(&self) -> Option<usize> {
        Some(self.metric.len())
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn dense_elem(&self, i: usize) -> Result<Elem> {
        self.check_index(i)?;
        Ok(Elem::Dense(i))
    }

    fn elem_dist(&self, a: &Elem, b: &Elem, _prec: u32) -> Result<Rat> {
        Ok(self.metric.d(self.index(a)?, self.index(b)?).clone())
    }

    fn describe(&self) -> Value {
        json!({ "kind": "finite", "dist": self.metric.matrix() })
    }
}

/// The rational Urysohn space as an effective space: dense points are the
/// builder's points, and asking for a point not yet built runs bookkeeping.
#[derive(Debug)]
pub struct UrysohnSpace {
    builder: SharedBuilder,
}

impl UrysohnSpace {
    pub fn new(builder: SharedBuilder) -> UrysohnSpace {
        UrysohnSpace { builder }
    }

    pub fn builder(&self) -> &SharedBuilder {
        &self.builder
    }

    fn upoint(e: &Elem) -> Result<UPoint> {
        match e {
            Elem::Dense(i) => Ok(UPoint(*i)),
            Elem::Coords(_) => Err(Error::UnsupportedElement {
                space: "U".into(),
                detail: "points of U are dense indices".into(),
            }),
        }
    }
}

impl EffectiveSpace for UrysohnSpace {
    fn tag(&self) -> SpaceTag {
        UrysohnBuilder::tag()
    }

    fn dense_len(&self) -> Option<usize> {
        None
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn dense_elem(&self, i: usize) -> Result<Elem> {
        lock(&self.builder).ensure_points(i + 1)?;
        Ok(Elem::Dense(i))
    }

    fn elem_dist(&self, a: &Elem, b: &Elem, _prec: u32) -> Result<Rat> {
        let (a, b) = (Self::upoint(a)?, Self::upoint(b)?);
        let mut g = lock(&self.builder);
        g.ensure_points(a.0.max(b.0) + 1)?;
        Ok(g.d(a, b).clone())
    }

    fn combine(&self) -> Combine {
        Combine::Urysohn(self.builder.clone())
    }

    fn describe(&self) -> Value {
        json!({ "kind": "urysohn", "points": lock(&self.builder).len() })
    }
}

fn rat_list(v: Option<&Value>) -> Result<Vec<Rat>> {
    match v {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(v) => Ok(serde_json::from_value(v.clone())?),
    }
}

fn usize_param(params: &Value, key: &str) -> Result<Option<usize>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|x| Some(x as usize))
            .ok_or_else(|| Error::SpaceParams(format!("{key} must be a non-negative integer"))),
    }
}

/// A built-in space by name: `real-line`, `unit-interval`, `maxnorm-rd`,
/// `euclidean-rd`, `finite` or `urysohn`.
pub fn builtin_space(kind: &str, params: &Value) -> Result<Space> {
    Ok(match kind {
        "real-line" => Arc::new(CoordSpace::real_line(rat_list(params.get("prefix"))?)),
        "unit-interval" => Arc::new(CoordSpace::unit_interval(rat_list(params.get("prefix"))?)?),
        "maxnorm-rd" | "euclidean-rd" => {
            let dim = usize_param(params, "dim")?
                .ok_or_else(|| Error::SpaceParams("missing dim".into()))?;
            let prefix: Vec<Vec<Rat>> = match params.get("prefix") {
                None | Some(Value::Null) => Vec::new(),
                Some(v) => serde_json::from_value(v.clone())?,
            };
            let norm = if kind == "maxnorm-rd" {
                Norm::Max
            } else {
                Norm::Euclidean
            };
            Arc::new(CoordSpace::rational_grid(dim, norm, prefix)?)
        }
        "finite" => {
            let dist: Vec<Vec<Rat>> = serde_json::from_value(
                params
                    .get("dist")
                    .cloned()
                    .ok_or_else(|| Error::SpaceParams("missing dist".into()))?,
            )?;
            // `unchecked` admits a faulty oracle, which downstream code must
            // then detect on its own.
            let unchecked = params.get("unchecked").and_then(Value::as_bool) == Some(true);
            let metric = if unchecked {
                FinMetric::from_matrix(dist)?
            } else {
                FinMetric::try_new(dist)?
            };
            if metric.is_empty() {
                return Err(Error::SpaceParams("finite space needs a point".into()));
            }
            Arc::new(FiniteSpace::new(metric))
        }
        "urysohn" => {
            let mut b = match params.get("builder") {
                Some(state) => UrysohnBuilder::from_json(state)?,
                None => UrysohnBuilder::new(usize_param(params, "height")?.map(|h| h as u32)),
            };
            if let Some(steps) = usize_param(params, "steps")? {
                b.run_bookkeeping(steps);
            }
            Arc::new(UrysohnSpace::new(b.into_shared()))
        }
        other => return Err(Error::UnknownSpaceKind(other.to_string())),
    })
}

/// Reads a space spec: `{"kind": ..., params...}`, a bare FinMetric
/// `{"points", "dist"}`, or saved builder state (which carries a `log`).
pub fn space_from_json(spec: &Value) -> Result<Space> {
    if let Some(kind) = spec.get("kind").and_then(Value::as_str) {
        return builtin_space(kind, spec);
    }
    if spec.get("dist").is_some() {
        if spec.get("log").is_some() {
            return builtin_space("urysohn", &json!({ "builder": spec }));
        }
        return builtin_space("finite", spec);
    }
    Err(Error::SpaceParams(
        "space spec needs a kind or a dist matrix".into(),
    ))
}
