//! Effective metric spaces: a dense enumeration plus a distance oracle.

mod builtin;
mod embed;
mod enumerate;

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use builtin::{
    builtin_space, space_from_json, sqrt_within, CoordSpace, FiniteSpace, Norm, UrysohnSpace,
};
pub use embed::{
    all_pairs, embed_into_u, verify_isometry, EmbeddingIntoU, IsometryEntry, IsometryReport,
};
pub use enumerate::{dyadic_unit_shell, rational_shell, Enumerator};

use crate::error::{Error, Result};
use crate::numeric::{fc_dist, FastCauchy, Rat, SpaceTag};
use crate::urysohn::SharedBuilder;

/// An element a space's oracle can measure: a dense-set index, or explicit
/// rational coordinates for spaces that have them.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Elem {
    Dense(usize),
    Coords(Vec<Rat>),
}

/// A point of the completion of an effective space.
pub type Point = FastCauchy<Elem>;

/// How a space combines finitely many points under a probability vector.
#[derive(Clone)]
pub enum Combine {
    /// No semiconvex structure.
    None,
    /// Exact convex combination of coordinates.
    Linear,
    /// Realization in the rational Urysohn space.
    Urysohn(SharedBuilder),
}

impl fmt::Debug for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combine::None => f.write_str("None"),
            Combine::Linear => f.write_str("Linear"),
            Combine::Urysohn(_) => f.write_str("Urysohn"),
        }
    }
}

pub trait EffectiveSpace: Send + Sync + fmt::Debug {
    fn tag(&self) -> SpaceTag;

    /// Size of the dense set, `None` when infinite.
    fn dense_len(&self) -> Option<usize>;

    /// Whether `dense_dist` returns exact distances at every precision.
    fn is_exact(&self) -> bool;

    /// The element naming the `i`-th dense point.
    fn dense_elem(&self, i: usize) -> Result<Elem>;

    /// `d(a, b)` within `2^-prec`.
    fn elem_dist(&self, a: &Elem, b: &Elem, prec: u32) -> Result<Rat>;

    /// `d(r_i, r_j)` within `2^-prec`.
    fn dense_dist(&self, i: usize, j: usize, prec: u32) -> Result<Rat> {
        self.elem_dist(&self.dense_elem(i)?, &self.dense_elem(j)?, prec)
    }

    fn combine(&self) -> Combine {
        Combine::None
    }

    /// A JSON description sufficient to rebuild the space.
    fn describe(&self) -> serde_json::Value;

    fn check_index(&self, i: usize) -> Result<()> {
        match self.dense_len() {
            Some(len) if i >= len => Err(Error::DenseOutOfRange { index: i, len }),
            _ => Ok(()),
        }
    }

    /// The `i`-th dense point as a constant stream.
    fn dense_point(&self, i: usize) -> Result<Point> {
        Ok(FastCauchy::constant(self.tag(), self.dense_elem(i)?))
    }
}

pub type Space = Arc<dyn EffectiveSpace>;

/// `d(x, y)` within `2^-n` for points of a space.
pub fn point_dist(space: &dyn EffectiveSpace, x: &Point, y: &Point, n: u32) -> Result<Rat> {
    if x.tag() != &space.tag() {
        return Err(Error::SpaceMismatch {
            left: x.tag().to_string(),
            right: space.tag().to_string(),
        });
    }
    if let (Some(a), Some(b)) = (x.exact(), y.exact()) {
        if y.tag() != x.tag() {
            return Err(Error::SpaceMismatch {
                left: x.tag().to_string(),
                right: y.tag().to_string(),
            });
        }
        return space.elem_dist(a, b, n);
    }
    let failure = RefCell::new(None);
    let d = fc_dist(
        x,
        y,
        |a, b, p| match space.elem_dist(a, b, p) {
            Ok(d) => d,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                Rat::ZERO
            }
        },
        n,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(d),
    }
}

/// `d(x, r_i)` within `2^-n`.
pub fn point_dense_dist(space: &dyn EffectiveSpace, x: &Point, i: usize, n: u32) -> Result<Rat> {
    let r = space.dense_point(i)?;
    point_dist(space, x, &r, n)
}

/// Reads a point of `space` from JSON.
///
/// Accepted forms: a rational (`"1/3"` or a number) or an array of rationals
/// for coordinate spaces, `{"dense": i}`, `{"coords": [...]}`, and
/// `{"prefix": [p0, p1, ...]}` for a fast-converging stream whose `n`-th
/// entry is any of the forms above.
pub fn point_from_json(space: &dyn EffectiveSpace, value: &serde_json::Value) -> Result<Point> {
    if let Some(obj) = value.as_object() {
        if let Some(prefix) = obj.get("prefix") {
            let items = prefix
                .as_array()
                .filter(|a| !a.is_empty())
                .ok_or(Error::EmptyStream)?;
            let elems = items
                .iter()
                .map(|v| elem_from_json(space, v))
                .collect::<Result<Vec<_>>>()?;
            return Ok(FastCauchy::from_prefix(space.tag(), elems));
        }
    }
    Ok(FastCauchy::constant(
        space.tag(),
        elem_from_json(space, value)?,
    ))
}

pub fn elem_from_json(space: &dyn EffectiveSpace, value: &serde_json::Value) -> Result<Elem> {
    use serde_json::Value;
    let bad = || Error::UnsupportedElement {
        space: space.tag().to_string(),
        detail: value.to_string(),
    };
    match value {
        Value::String(_) | Value::Number(_) => Ok(Elem::Coords(vec![rat_from_json(value)?])),
        Value::Array(items) => Ok(Elem::Coords(
            items.iter().map(rat_from_json).collect::<Result<_>>()?,
        )),
        Value::Object(obj) => {
            if let Some(i) = obj.get("dense") {
                let i = i.as_u64().ok_or_else(bad)? as usize;
                space.check_index(i)?;
                Ok(Elem::Dense(i))
            } else if let Some(c) = obj.get("coords") {
                elem_from_json(space, c)
            } else {
                Err(bad())
            }
        }
        _ => Err(bad()),
    }
}

pub fn rat_from_json(value: &serde_json::Value) -> Result<Rat> {
    Ok(serde_json::from_value(value.clone())?)
}
