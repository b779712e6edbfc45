//! Fast-converging sequences in the built space and approximate saturation.

use serde::{Deserialize, Serialize};

use super::{UPoint, UrysohnBuilder};
use crate::error::{Error, Result};
use crate::metric::{admissibility_violation, project_admissible, ExtensionRequest};
use crate::numeric::{FastCauchy, Rat};

/// Stage `n` is matched against anchors sampled at stage `n + ANCHOR_LOOKAHEAD`.
/// Sampling anchors at stage `n` itself leaves an error of order `2^-n` in
/// the stage targets, which the chaining step cannot absorb.
pub const ANCHOR_LOOKAHEAD: u32 = 7;

/// A point of the completion, given by a finite run of stage points with
/// `d(stage n, stage n+1) <= 2^-(n+1)`. Exact values need only one stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UReal {
    stages: Vec<UPoint>,
    exact: bool,
}

impl UReal {
    pub fn exact(p: UPoint) -> UReal {
        UReal {
            stages: vec![p],
            exact: true,
        }
    }

    pub fn from_stages(stages: Vec<UPoint>) -> Result<UReal> {
        if stages.is_empty() {
            return Err(Error::EmptyStream);
        }
        Ok(UReal {
            stages,
            exact: false,
        })
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn exact_point(&self) -> Option<UPoint> {
        self.exact.then(|| self.stages[0])
    }

    /// Number of stages available; unbounded for exact values.
    pub fn depth(&self) -> Option<usize> {
        (!self.exact).then_some(self.stages.len())
    }

    pub fn stages(&self) -> &[UPoint] {
        &self.stages
    }

    pub fn stage(&self, n: u32) -> Result<UPoint> {
        if self.exact {
            return Ok(self.stages[0]);
        }
        self.stages
            .get(n as usize)
            .copied()
            .ok_or(Error::ShortAnchor {
                have: self.stages.len(),
                need: n as usize,
            })
    }

    /// Stage point at `n`, clamped to the last available stage.
    pub fn stage_clamped(&self, n: u32) -> UPoint {
        let i = (n as usize).min(self.stages.len() - 1);
        self.stages[i]
    }

    pub fn to_fast_cauchy(&self) -> FastCauchy<UPoint> {
        if self.exact {
            FastCauchy::constant(UrysohnBuilder::tag(), self.stages[0])
        } else {
            FastCauchy::from_prefix(UrysohnBuilder::tag(), self.stages.clone())
        }
    }

    /// Checks `d(stage n, stage m) <= 2^-n + 2^-m` for every pair of stages.
    pub fn chain_violation(&self, b: &UrysohnBuilder) -> Option<(usize, usize)> {
        for n in 0..self.stages.len() {
            for m in (n + 1)..self.stages.len() {
                let bound = Rat::pow2_neg(n as u32) + Rat::pow2_neg(m as u32);
                if *b.d(self.stages[n], self.stages[m]) > bound {
                    return Some((n, m));
                }
            }
        }
        None
    }
}

/// Distance between two completion points, within `2^-n`.
pub fn ureal_dist(b: &UrysohnBuilder, x: &UReal, y: &UReal, n: u32) -> Result<Rat> {
    let p = n + 1;
    Ok(b.d(x.stage(p)?, y.stage(p)?).clone())
}

fn inconsistent(stage: u32, detail: impl Into<String>) -> Error {
    Error::InconsistentRequirements {
        stage,
        detail: detail.into(),
    }
}

/// Builds a point `u` of the completion with `d(u, anchor_i) = target_i`.
///
/// Stage `n` samples anchors and targets at `m = n + ANCHOR_LOOKAHEAD`, floors
/// targets at `2^-m`, merges anchors landing on one stage point and projects
/// the targets onto the admissible set, moving each by at most `2^-(n+2)`.
/// From stage 1 on, the previous stage point joins the base with the target
/// `c = max_j |t_j - d(y_{n-1}, s_j)|`, required to be at most `2^-n`. That
/// choice is always admissible and ties the stages into a fast chain.
///
/// When every anchor and target is exact the request is realized once and
/// the result is exact.
pub fn realize_approx(
    b: &mut UrysohnBuilder,
    anchors: &[UReal],
    targets: &[FastCauchy<Rat>],
    depth: u32,
) -> Result<UReal> {
    if anchors.len() != targets.len() {
        return Err(Error::InvalidRequest(format!(
            "{} anchors but {} targets",
            anchors.len(),
            targets.len()
        )));
    }
    if anchors.is_empty() {
        return Ok(UReal::exact(b.seed()));
    }
    for a in anchors {
        for &p in a.stages() {
            b.check_point(p)?;
        }
    }
    for t in targets {
        if t.exact().is_some_and(|v| !v.is_positive()) {
            return Err(Error::InvalidRequest(format!(
                "target {} is not positive",
                t.exact().unwrap()
            )));
        }
    }

    if anchors.iter().all(UReal::is_exact) && targets.iter().all(|t| t.exact().is_some()) {
        let mut base: Vec<usize> = Vec::new();
        let mut vals: Vec<Rat> = Vec::new();
        for (a, t) in anchors.iter().zip(targets) {
            let p = a.stages()[0].0;
            let v = t.exact().unwrap().clone();
            match base.iter().position(|&q| q == p) {
                Some(k) if vals[k] == v => {}
                Some(_) => return Err(inconsistent(0, format!("two targets for point {p}"))),
                None => {
                    base.push(p);
                    vals.push(v);
                }
            }
        }
        let req = ExtensionRequest::new(base, vals)?;
        if let Some(err) = admissibility_violation(b.space(), &req)? {
            return Err(inconsistent(0, err.to_string()));
        }
        return Ok(UReal::exact(b.realize_rational(&req)?));
    }

    if depth == 0 {
        return Err(Error::InvalidRequest("depth must be positive".into()));
    }
    let mut stages: Vec<UPoint> = Vec::with_capacity(depth as usize);
    for n in 0..depth {
        let m = n + ANCHOR_LOOKAHEAD;
        let floor = Rat::pow2_neg(m);
        let slack = Rat::pow2_neg(n + 2);

        let mut base: Vec<usize> = Vec::new();
        let mut prefs: Vec<Rat> = Vec::new();
        for (a, t) in anchors.iter().zip(targets) {
            let p = a.stage(m)?.0;
            let v = Rat::max_of([&t.approx(m), &floor]).unwrap();
            match base.iter().position(|&q| q == p) {
                Some(k) => {
                    if (&prefs[k] - &v).abs() > slack {
                        return Err(inconsistent(
                            n,
                            format!("targets {} and {v} at one stage point {p}", prefs[k]),
                        ));
                    }
                    if v > prefs[k] {
                        prefs[k] = v;
                    }
                }
                None => {
                    base.push(p);
                    prefs.push(v);
                }
            }
        }
        let fixed = project_admissible(b.space(), &base, &prefs);
        for (k, (f, g)) in fixed.iter().zip(&prefs).enumerate() {
            if f - g > slack {
                return Err(inconsistent(
                    n,
                    format!(
                        "target at point {} moved from {g} to {f}, beyond slack {slack}",
                        base[k]
                    ),
                ));
            }
        }

        let point = match stages.last().copied() {
            None => b.realize_rational(&ExtensionRequest::new(base, fixed)?)?,
            Some(prev) => {
                let c = base
                    .iter()
                    .zip(&fixed)
                    .map(|(&s, t)| (t - b.d(prev, UPoint(s))).abs())
                    .max()
                    .unwrap();
                let budget = Rat::pow2_neg(n + 1);
                if c > budget {
                    return Err(inconsistent(
                        n,
                        format!("stage moves {c} from its predecessor, beyond {budget}"),
                    ));
                }
                if c.is_zero() {
                    prev
                } else {
                    let mut base = base;
                    let mut fixed = fixed;
                    if !base.contains(&prev.0) {
                        base.push(prev.0);
                        fixed.push(c);
                    }
                    let req = ExtensionRequest::new(base, fixed)?;
                    if let Some(err) = admissibility_violation(b.space(), &req)? {
                        return Err(inconsistent(n, err.to_string()));
                    }
                    b.realize_rational(&req)?
                }
            }
        };
        stages.push(point);
    }
    UReal::from_stages(stages)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Rat {
        Rat::new(p, q)
    }

    /// A stream for `q` that approaches from alternating sides.
    fn fuzzy(q: Rat) -> FastCauchy<Rat> {
        FastCauchy::real(move |n| {
            let off = Rat::pow2_neg(n + 1);
            if n % 2 == 0 {
                &q + off
            } else {
                &q - off
            }
        })
    }

    fn pair_at_two() -> (UrysohnBuilder, UPoint, UPoint) {
        let mut b = UrysohnBuilder::new(None);
        let p = b.seed();
        let q = b
            .realize_rational(&ExtensionRequest::new(vec![p.0], vec![r(2, 1)]).unwrap())
            .unwrap();
        (b, p, q)
    }

    fn check_stage_bounds(b: &UrysohnBuilder, u: &UReal, anchors: &[UPoint], targets: &[Rat]) {
        assert_eq!(u.chain_violation(b), None);
        for (n, &y) in u.stages().iter().enumerate() {
            for (a, t) in anchors.iter().zip(targets) {
                let dev = (b.d(y, *a) - t).abs();
                assert!(dev <= Rat::pow2_neg(n as u32), "stage {n}: deviation {dev}");
            }
        }
    }

    #[test]
    fn exact_target_is_exact_at_stage_zero() {
        let mut b = UrysohnBuilder::new(None);
        let p = b.seed();
        let u = realize_approx(
            &mut b,
            &[UReal::exact(p)],
            &[FastCauchy::rational(r(3, 5))],
            8,
        )
        .unwrap();
        assert!(u.is_exact());
        assert_eq!(*b.d(u.stage(0).unwrap(), p), r(3, 5));
    }

    #[test]
    fn midpoint_from_streams() {
        let (mut b, p, q) = pair_at_two();
        let anchors = [UReal::exact(p), UReal::exact(q)];
        let u = realize_approx(&mut b, &anchors, &[fuzzy(Rat::ONE), fuzzy(Rat::ONE)], 12).unwrap();
        assert!(!u.is_exact());
        check_stage_bounds(&b, &u, &[p, q], &[Rat::ONE, Rat::ONE]);
    }

    #[test]
    fn inconsistent_targets_fail_at_stage_zero() {
        let (mut b, p, q) = pair_at_two();
        let anchors = [UReal::exact(p), UReal::exact(q)];
        let err = realize_approx(
            &mut b,
            &anchors,
            &[FastCauchy::rational(r(1, 2)), FastCauchy::rational(r(1, 2))],
            4,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InconsistentRequirements { stage: 0, .. }
        ));

        let err =
            realize_approx(&mut b, &anchors, &[fuzzy(r(1, 2)), fuzzy(r(1, 2))], 4).unwrap_err();
        assert!(matches!(
            err,
            Error::InconsistentRequirements { stage: 0, .. }
        ));
    }

    #[test]
    fn anchors_that_are_streams() {
        let (mut b, p, q) = pair_at_two();
        // A stream anchor converging to a point at distance 1/3 from p.
        let exact = [UReal::exact(p), UReal::exact(q)];
        let a = realize_approx(&mut b, &exact, &[fuzzy(r(1, 3)), fuzzy(r(5, 3))], 30).unwrap();
        let u = realize_approx(
            &mut b,
            &[UReal::exact(p), a.clone()],
            &[fuzzy(r(1, 2)), fuzzy(r(1, 6))],
            20,
        )
        .unwrap();
        assert_eq!(u.chain_violation(&b), None);
        for n in 0..20u32 {
            let y = u.stage(n).unwrap();
            let to_p = (b.d(y, p) - r(1, 2)).abs();
            assert!(to_p <= Rat::pow2_neg(n));
            // The anchor itself is only known to within 2^-m at stage m.
            let to_a = (b.d(y, a.stage(29).unwrap()) - r(1, 6)).abs();
            assert!(to_a <= Rat::pow2_neg(n) + Rat::pow2_neg(29));
        }
        assert!(matches!(
            realize_approx(&mut b, &[a], &[fuzzy(Rat::ONE)], 30),
            Err(Error::ShortAnchor { .. })
        ));
    }

    #[test]
    fn zero_exact_target_rejected() {
        let mut b = UrysohnBuilder::new(None);
        let p = b.seed();
        assert!(realize_approx(
            &mut b,
            &[UReal::exact(p)],
            &[FastCauchy::rational(Rat::ZERO)],
            4
        )
        .is_err());
    }
}
