//! Domain representation of a separable metric space by finite clusters of
//! closed balls around dense points.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{FastCauchy, Rat};
use crate::spaces::{point_dense_dist, EffectiveSpace, Point};
use crate::urysohn::{witness_intersection, UBall, UPoint, UrysohnBuilder};

/// The closed ball of radius `radius` around dense point `center`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: Rat,
}

impl Ball {
    pub fn new(center: usize, radius: Rat) -> Result<Ball> {
        if !radius.is_positive() {
            return Err(Error::InvalidRequest(format!(
                "radius {radius} is not positive"
            )));
        }
        Ok(Ball { center, radius })
    }
}

/// A finite set of balls, kept sorted and free of repeats.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cluster {
    balls: Vec<Ball>,
}

impl Cluster {
    pub fn new(balls: impl IntoIterator<Item = Ball>) -> Cluster {
        let set: BTreeSet<Ball> = balls.into_iter().collect();
        Cluster {
            balls: set.into_iter().collect(),
        }
    }

    pub fn single(ball: Ball) -> Cluster {
        Cluster { balls: vec![ball] }
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn max_radius(&self) -> Option<&Rat> {
        self.balls.iter().map(|b| &b.radius).max()
    }

    pub fn union(&self, other: &Cluster) -> Cluster {
        Cluster::new(self.balls.iter().chain(&other.balls).cloned())
    }
}

/// Three-valued answer for questions only semidecidable from finite data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tri {
    Yes,
    No,
    Unknown,
}

impl Tri {
    fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::No, _) | (_, Tri::No) => Tri::No,
            (Tri::Yes, Tri::Yes) => Tri::Yes,
            _ => Tri::Unknown,
        }
    }
}

/// Dense distance with its error bound: exact oracles report error zero.
fn dense_dist_err(x: &dyn EffectiveSpace, i: usize, j: usize, prec: u32) -> Result<(Rat, Rat)> {
    let d = x.dense_dist(i, j, prec)?;
    let err = if x.is_exact() {
        Rat::ZERO
    } else {
        Rat::pow2_neg(prec)
    };
    Ok((d, err))
}

/// `d(x, r_i)` with its error bound, exact when both the point and the
/// oracle are.
fn point_dist_err(
    space: &dyn EffectiveSpace,
    x: &Point,
    i: usize,
    prec: u32,
) -> Result<(Rat, Rat)> {
    let d = point_dense_dist(space, x, i, prec)?;
    let err = if space.is_exact() && x.exact().is_some() {
        Rat::ZERO
    } else {
        Rat::pow2_neg(prec)
    };
    Ok((d, err))
}

/// Pairwise consistency `p + q >= d(a_n, a_m)`, decided at precision `prec`.
pub fn cluster_valid_at(x: &dyn EffectiveSpace, k: &Cluster, prec: u32) -> Result<Tri> {
    let mut out = Tri::Yes;
    for (i, a) in k.balls.iter().enumerate() {
        for b in &k.balls[i + 1..] {
            let (d, err) = dense_dist_err(x, a.center, b.center, prec)?;
            out = out.and(le_d(&d, &err, &(&a.radius + &b.radius)));
        }
    }
    Ok(out)
}

/// Exact pairwise consistency; needs an exact oracle.
pub fn cluster_valid(x: &dyn EffectiveSpace, k: &Cluster) -> Result<bool> {
    if !x.is_exact() {
        return Err(Error::InexactOracle);
    }
    Ok(cluster_valid_at(x, k, 0)? == Tri::Yes)
}

/// `K ⊑ L`: every ball `B(n, r)` of `K` has some `B(m, s)` in `L` with
/// `s + d(a_n, a_m) <= r`, decided at precision `prec`.
pub fn cluster_leq_at(x: &dyn EffectiveSpace, k: &Cluster, l: &Cluster, prec: u32) -> Result<Tri> {
    let mut out = Tri::Yes;
    for a in &k.balls {
        let mut best = Tri::No;
        for b in &l.balls {
            let (d, err) = dense_dist_err(x, a.center, b.center, prec)?;
            let budget = &a.radius - &b.radius;
            // s + d <= r  iff  d <= r - s
            let t = le_d(&d, &err, &budget);
            best = match (best, t) {
                (Tri::Yes, _) | (_, Tri::Yes) => Tri::Yes,
                (Tri::Unknown, _) | (_, Tri::Unknown) => Tri::Unknown,
                _ => Tri::No,
            };
        }
        out = out.and(best);
    }
    Ok(out)
}

/// `d <= bound` where `d` is known within `err`.
fn le_d(d: &Rat, err: &Rat, bound: &Rat) -> Tri {
    if d + err <= *bound {
        Tri::Yes
    } else if d - err > *bound {
        Tri::No
    } else {
        Tri::Unknown
    }
}

/// Exact `K ⊑ L`; needs an exact oracle.
pub fn cluster_leq(x: &dyn EffectiveSpace, k: &Cluster, l: &Cluster) -> Result<bool> {
    if !x.is_exact() {
        return Err(Error::InexactOracle);
    }
    Ok(cluster_leq_at(x, k, l, 0)? == Tri::Yes)
}

/// In the Urysohn space a finite family of closed balls meets iff it is a
/// cluster. Returns a point of the intersection, realized on the spheres of
/// the tightened radii `t_i = min_j (r_j + d(a_i, a_j))`.
pub fn cluster_witness_in_u(b: &mut UrysohnBuilder, k: &Cluster) -> Result<Option<UPoint>> {
    if k.is_empty() {
        return Err(Error::EmptyStream);
    }
    for ball in &k.balls {
        b.check_point(UPoint(ball.center))?;
    }
    for (i, a) in k.balls.iter().enumerate() {
        for c in &k.balls[i + 1..] {
            if *b.d(UPoint(a.center), UPoint(c.center)) > &a.radius + &c.radius {
                return Ok(None);
            }
        }
    }
    let balls: Vec<UBall> = k
        .balls
        .iter()
        .map(|a| {
            let t = k
                .balls
                .iter()
                .map(|c| &c.radius + b.d(UPoint(a.center), UPoint(c.center)))
                .min()
                .unwrap();
            UBall::new(UPoint(a.center), t)
        })
        .collect();
    // Repeated centers keep only their tightest radius.
    let mut merged: Vec<UBall> = Vec::new();
    for ball in balls {
        match merged.iter_mut().find(|m| m.center == ball.center) {
            Some(m) if ball.radius < m.radius => m.radius = ball.radius,
            Some(_) => {}
            None => merged.push(ball),
        }
    }
    witness_intersection(b, &merged).map(Some)
}

/// A ⊑-increasing finite chain of clusters: a finite stage of an ideal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdealApprox {
    chain: Vec<Cluster>,
}

impl IdealApprox {
    /// Checks validity and monotonicity exactly.
    pub fn new(x: &dyn EffectiveSpace, chain: Vec<Cluster>) -> Result<IdealApprox> {
        for (i, k) in chain.iter().enumerate() {
            if k.is_empty() {
                return Err(Error::EmptyStream);
            }
            if !cluster_valid(x, k)? {
                return Err(Error::InvalidRequest(format!(
                    "cluster {i} is inconsistent"
                )));
            }
            if i > 0 && !cluster_leq(x, &chain[i - 1], k)? {
                return Err(Error::InvalidRequest(format!(
                    "cluster {i} does not refine cluster {}",
                    i - 1
                )));
            }
        }
        Ok(IdealApprox { chain })
    }

    /// Wraps a chain without checks, for spaces with inexact oracles.
    pub fn unchecked(chain: Vec<Cluster>) -> IdealApprox {
        IdealApprox { chain }
    }

    pub fn chain(&self) -> &[Cluster] {
        &self.chain
    }

    pub fn extended(&self, more: impl IntoIterator<Item = Cluster>) -> IdealApprox {
        let mut chain = self.chain.clone();
        chain.extend(more);
        IdealApprox { chain }
    }
}

/// Whether the ideal stage represents `x` at scale `eps`: yes once every
/// ball provably contains `x` and some cluster has all radii below `eps`;
/// no once some ball provably misses `x`.
pub fn ideal_represents(
    space: &dyn EffectiveSpace,
    ideal: &IdealApprox,
    x: &Point,
    eps: &Rat,
    prec: u32,
) -> Result<Tri> {
    let mut members = Tri::Yes;
    for k in &ideal.chain {
        for ball in &k.balls {
            let (d, err) = point_dist_err(space, x, ball.center, prec)?;
            let t = le_d(&d, &err, &ball.radius);
            if t == Tri::No {
                return Ok(Tri::No);
            }
            members = members.and(t);
        }
    }
    let fine = ideal
        .chain
        .iter()
        .any(|k| k.max_radius().is_some_and(|r| r < eps));
    Ok(match members {
        Tri::Yes if fine => Tri::Yes,
        _ => Tri::Unknown,
    })
}

/// Stage `k` of the least ideal of a point: per-center upper bounds on
/// `d(x, a_i)` for the centers `0..=k`. A ball lies in the least ideal as
/// soon as its radius exceeds the bound for its center.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdealStage {
    pub stage: u32,
    /// `t_i = min_{i <= k' <= k} (e_i(k') + 2^-(k'+2))`, with `e_i(k')` the
    /// distance to center `i` read at precision `k' + 2`.
    pub thresholds: Vec<Rat>,
}

impl IdealStage {
    pub fn start(space: &dyn EffectiveSpace, x: &Point) -> Result<IdealStage> {
        let mut s = IdealStage {
            stage: 0,
            thresholds: Vec::new(),
        };
        s.thresholds.push(Self::bound(space, x, 0, 0)?);
        Ok(s)
    }

    fn bound(space: &dyn EffectiveSpace, x: &Point, i: usize, k: u32) -> Result<Rat> {
        let e = point_dense_dist(space, x, i, k + 2)?;
        Ok(e + Rat::pow2_neg(k + 2))
    }

    pub fn at(space: &dyn EffectiveSpace, x: &Point, k: u32) -> Result<IdealStage> {
        let mut s = Self::start(space, x)?;
        while s.stage < k {
            s.advance(space, x)?;
        }
        Ok(s)
    }

    /// Moves from stage `k` to `k + 1`, admitting center `k + 1` if the
    /// dense set has one.
    pub fn advance(&mut self, space: &dyn EffectiveSpace, x: &Point) -> Result<()> {
        let k = self.stage + 1;
        for i in 0..self.thresholds.len() {
            let t = Self::bound(space, x, i, k)?;
            if t < self.thresholds[i] {
                self.thresholds[i] = t;
            }
        }
        let next = self.thresholds.len();
        if space.dense_len().is_none_or(|len| next < len) {
            self.thresholds.push(Self::bound(space, x, next, k)?);
        }
        self.stage = k;
        Ok(())
    }

    pub fn contains_ball(&self, ball: &Ball) -> bool {
        self.thresholds
            .get(ball.center)
            .is_some_and(|t| ball.radius > *t)
    }

    pub fn contains(&self, k: &Cluster) -> bool {
        !k.is_empty() && k.balls.iter().all(|b| self.contains_ball(b))
    }

    /// Radii of height at most `k`: `p / 2^j` with `1 <= p <= k`, `j <= k`.
    pub fn canonical_radii(k: u32) -> Vec<Rat> {
        let mut set = BTreeSet::new();
        for j in 0..=k {
            for p in 1..=k.max(1) as i64 {
                set.insert(Rat::new(p, 1) * Rat::pow2_neg(j));
            }
        }
        set.into_iter().collect()
    }

    /// Canonical balls of height at most the stage that the stage contains.
    pub fn certified_balls(&self) -> Vec<Ball> {
        let radii = Self::canonical_radii(self.stage);
        let mut out = Vec::new();
        for (i, t) in self.thresholds.iter().enumerate() {
            for r in radii.iter().filter(|r| *r > t) {
                out.push(Ball {
                    center: i,
                    radius: r.clone(),
                });
            }
        }
        out
    }

    /// The canonical clusters of the stage: nonempty sets of at most
    /// `max(stage, 1)` certified balls. Fails when there are more than
    /// `limit` of them.
    pub fn clusters(&self, limit: usize) -> Result<Vec<Cluster>> {
        let balls = self.certified_balls();
        let cap = (self.stage.max(1) as usize).min(balls.len());
        let mut out = Vec::new();
        let mut idx: Vec<usize> = Vec::new();
        fn rec(
            balls: &[Ball],
            start: usize,
            cap: usize,
            idx: &mut Vec<usize>,
            out: &mut Vec<Cluster>,
            limit: usize,
        ) -> Result<()> {
            for i in start..balls.len() {
                idx.push(i);
                out.push(Cluster::new(idx.iter().map(|&j| balls[j].clone())));
                if out.len() > limit {
                    return Err(Error::TooLarge(format!("more than {limit} clusters")));
                }
                if idx.len() < cap {
                    rec(balls, i + 1, cap, idx, out, limit)?;
                }
                idx.pop();
            }
            Ok(())
        }
        rec(&balls, 0, cap, &mut idx, &mut out, limit)?;
        Ok(out)
    }

    /// The contained ball with the lowest center index among those of radius
    /// at most `max_radius`, taking the largest dyadic radius `2^-j` allowed.
    pub fn finest_ball(&self, max_radius: &Rat) -> Option<Ball> {
        let j = max_radius.log2_floor_inv();
        let r = Rat::pow2_neg(j);
        let r = if r <= *max_radius {
            r
        } else {
            Rat::pow2_neg(j + 1)
        };
        self.thresholds
            .iter()
            .position(|t| r > *t)
            .map(|center| Ball { center, radius: r })
    }
}

/// All canonical clusters of the least ideal of `x` at stage `k`.
pub fn least_ideal_clusters(
    space: &dyn EffectiveSpace,
    x: &Point,
    k: u32,
    limit: usize,
) -> Result<Vec<Cluster>> {
    IdealStage::at(space, x, k)?.clusters(limit)
}

/// Reads a point off a cluster stream whose stage `n` has radii at most
/// `2^-(n+1)`: stage `n` contributes the center of its first ball.
pub fn delta_extract(space: &dyn EffectiveSpace, stream: &[Cluster]) -> Result<Point> {
    if stream.is_empty() || stream.iter().any(Cluster::is_empty) {
        return Err(Error::EmptyStream);
    }
    for (n, k) in stream.iter().enumerate() {
        let bound = Rat::pow2_neg(n as u32 + 1);
        let r = k.max_radius().unwrap();
        if *r > bound {
            return Err(Error::RadiusSchedule {
                stage: n,
                radius: r.clone(),
                bound,
            });
        }
    }
    let prec = stream.len() as u32 + 4;
    for (n, k) in stream.iter().enumerate() {
        for (m, l) in stream.iter().enumerate().skip(n) {
            for a in &k.balls {
                for b in &l.balls {
                    let (d, err) = dense_dist_err(space, a.center, b.center, prec)?;
                    if le_d(&d, &err, &(&a.radius + &b.radius)) == Tri::No {
                        return Err(Error::InconsistentMembership {
                            first: n,
                            second: m,
                        });
                    }
                }
            }
        }
    }
    let elems = stream
        .iter()
        .map(|k| space.dense_elem(k.balls[0].center))
        .collect::<Result<Vec<_>>>()?;
    Ok(FastCauchy::from_prefix(space.tag(), elems))
}

/// The radius-scheduled stream of least-ideal clusters for `x`: stage `n`
/// is the single ball chosen by [`IdealStage::finest_ball`] at radius
/// `2^-(n+1)`, found at the first ideal stage that contains one.
pub fn least_ideal_stream(
    space: &dyn EffectiveSpace,
    x: &Point,
    stages: u32,
    max_stage: u32,
) -> Result<Vec<Cluster>> {
    let mut ideal = IdealStage::start(space, x)?;
    let mut out = Vec::with_capacity(stages as usize);
    for n in 0..stages {
        let r = Rat::pow2_neg(n + 1);
        loop {
            if let Some(ball) = ideal.finest_ball(&r) {
                out.push(Cluster::single(ball));
                break;
            }
            if ideal.stage >= max_stage {
                return Err(Error::TooLarge(format!(
                    "no ball of radius {r} by ideal stage {max_stage}"
                )));
            }
            ideal.advance(space, x)?;
        }
    }
    Ok(out)
}

/// Balls of `later` farther from `x` than their radius plus twice the
/// largest radius of `base`. When every ball of `base` contains `x` and
/// `base ⊑ L` for each cluster `L` of `later`, this list is empty.
pub fn upward_closure_violations(
    space: &dyn EffectiveSpace,
    base: &Cluster,
    later: &[Cluster],
    x: &Point,
    prec: u32,
) -> Result<Vec<Ball>> {
    let slack = base.max_radius().cloned().unwrap_or(Rat::ZERO) * Rat::from_integer(2);
    let mut out = Vec::new();
    for l in later {
        for ball in &l.balls {
            let (d, err) = point_dist_err(space, x, ball.center, prec)?;
            if le_d(&d, &err, &(&ball.radius + &slack)) == Tri::No {
                out.push(ball.clone());
            }
        }
    }
    Ok(out)
}
