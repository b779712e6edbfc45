use serde::{Deserialize, Serialize};

use super::Dist;
use crate::error::{Error, Result};
use crate::numeric::Rat;
use crate::spaces::{point_dense_dist, Point, Space};

/// One level of the probabilistic selection on a metric space: the first
/// `n + 1` dense points, `delta = min(2^-n, min pairwise distance)`, and
/// `mu(x)(a) = ((d(x, A) + delta) ∸ d(x, a)) / sum`.
#[derive(Clone, Debug)]
pub struct MetricLevel {
    space: Space,
    n: u32,
    points: Vec<usize>,
    delta: Rat,
}

/// Distances and masses behind one evaluation of `mu`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuTrace {
    pub precision: u32,
    pub dists: Vec<Rat>,
    pub dist_to_set: Rat,
    pub delta: Rat,
    pub dist: Dist,
}

impl MetricLevel {
    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dense indices of `A_n`.
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn delta(&self) -> &Rat {
        &self.delta
    }

    /// Shared evaluation precision for every distance entering `mu`.
    pub fn precision(&self) -> u32 {
        self.n + 4
    }

    /// `nu(a)`, the dense point behind the `a`-th element of `A_n`.
    pub fn nu(&self, a: usize) -> Result<Point> {
        self.space.dense_point(self.points[a])
    }

    pub fn mu(&self, x: &Point) -> Result<Dist> {
        Ok(self.mu_trace(x)?.dist)
    }

    /// `mu(x)` along with the approximants it was computed from.
    pub fn mu_trace(&self, x: &Point) -> Result<MuTrace> {
        let p = self.precision();
        let dists = self
            .points
            .iter()
            .map(|&i| point_dense_dist(self.space.as_ref(), x, i, p))
            .collect::<Result<Vec<_>>>()?;
        let dist_to_set = dists.iter().min().cloned().expect("A_n is nonempty");
        let reach = &dist_to_set + &self.delta;
        let weights: Vec<Rat> = dists.iter().map(|d| reach.saturating_sub(d)).collect();
        Ok(MuTrace {
            precision: p,
            dist: Dist::normalized(weights)?,
            dists,
            dist_to_set,
            delta: self.delta.clone(),
        })
    }
}

/// Level `n` of the selection on `space`.
pub fn metric_selection_level(space: Space, n: u32) -> Result<MetricLevel> {
    let count = n as usize + 1;
    if let Some(len) = space.dense_len() {
        if len < count {
            return Err(Error::DenseOutOfRange {
                index: n as usize,
                len,
            });
        }
    }
    let points: Vec<usize> = (0..count).collect();
    let p = n + 4;
    let mut delta = Rat::pow2_neg(n);
    for i in 0..count {
        for j in (i + 1)..count {
            let d = space.dense_dist(i, j, p)?;
            if !d.is_positive() {
                return Err(Error::InvalidRequest(format!(
                    "dense points {i} and {j} coincide at precision {p}"
                )));
            }
            if d < delta {
                delta = d;
            }
        }
    }
    Ok(MetricLevel {
        space,
        n,
        points,
        delta,
    })
}
