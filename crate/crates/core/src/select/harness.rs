use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metric_selection_level;
use crate::error::Result;
use crate::numeric::Rat;
use crate::spaces::{point_dist, Point, Space};

/// Per-level summary of sampled trajectories.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessRow {
    pub n: u32,
    pub precision: u32,
    pub delta: Rat,
    /// `d(x_n, A_n)`.
    pub dist_to_set: Rat,
    /// `d(x_n, x)`.
    pub input_offset: Rat,
    /// `d(x_n, A_n) + delta_n + d(x_n, x)`.
    pub envelope: Rat,
    pub support_size: usize,
    pub max_sample_dist: Rat,
    pub violations: usize,
}

/// A sample outside its envelope, with the exact numbers involved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessViolation {
    pub trial: usize,
    pub n: u32,
    pub picked: usize,
    pub sample_dist: Rat,
    pub envelope: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<HarnessRow>,
    pub violations: Vec<HarnessViolation>,
    /// `trajectories[t][k]` is the index in `A_n` picked by trial `t` at the
    /// `k`-th level.
    pub trajectories: Vec<Vec<usize>>,
}

impl HarnessReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// The first level whose envelope is strictly below `bound`.
    pub fn envelope_below(&self, bound: &Rat) -> Option<u32> {
        self.rows.iter().find(|r| r.envelope < *bound).map(|r| r.n)
    }
}

/// Samples `a_n ~ mu_n(x_n)` for every level in `levels` and every trial,
/// recording `d(nu(a_n), x)` against the envelope
/// `d(x_n, A_n) + delta_n + d(x_n, x)`.
///
/// Randomness comes from one ChaCha8 stream seeded with `seed`, consumed
/// level by level and, within a level, trial by trial. All distances are read
/// at the level's shared precision `n + 4`; a sample is flagged when it
/// exceeds the envelope by more than the `3 * 2^-(n+4)` that approximation
/// can account for.
pub fn convergence_harness(
    space: &Space,
    x: &Point,
    inputs: impl Fn(u32) -> Point,
    levels: impl IntoIterator<Item = u32>,
    trials: usize,
    seed: u64,
) -> Result<HarnessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut trajectories = vec![Vec::new(); trials];
    for n in levels {
        let level = metric_selection_level(space.clone(), n)?;
        let xn = inputs(n);
        let trace = level.mu_trace(&xn)?;
        let p = trace.precision;
        let input_offset = point_dist(space.as_ref(), &xn, x, p)?;
        let envelope = &trace.dist_to_set + &trace.delta + &input_offset;
        let exact = space.is_exact() && x.exact().is_some() && xn.exact().is_some();
        let tolerance = if exact {
            Rat::ZERO
        } else {
            Rat::from_integer(3) * Rat::pow2_neg(p)
        };
        let sample_dists: Vec<Rat> = (0..level.len())
            .map(|a| point_dist(space.as_ref(), &level.nu(a)?, x, p))
            .collect::<Result<_>>()?;
        let mut max_sample = Rat::ZERO;
        let mut row_violations = 0;
        for (t, path) in trajectories.iter_mut().enumerate() {
            let a = trace.dist.sample(&mut rng);
            path.push(a);
            let d = &sample_dists[a];
            if *d > max_sample {
                max_sample = d.clone();
            }
            if *d > &envelope + &tolerance {
                row_violations += 1;
                violations.push(HarnessViolation {
                    trial: t,
                    n,
                    picked: a,
                    sample_dist: d.clone(),
                    envelope: envelope.clone(),
                });
            }
        }
        rows.push(HarnessRow {
            n,
            precision: p,
            delta: trace.delta.clone(),
            dist_to_set: trace.dist_to_set.clone(),
            input_offset,
            envelope,
            support_size: trace.dist.support().len(),
            max_sample_dist: max_sample,
            violations: row_violations,
        });
    }
    Ok(HarnessReport {
        trials,
        seed,
        rows,
        violations,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::FastCauchy;
    use crate::spaces::{builtin_space, Elem};
    use serde_json::json;

    fn at(s: &Space, q: Rat) -> Point {
        FastCauchy::constant(s.tag(), Elem::Coords(vec![q]))
    }

    #[test]
    fn constant_inputs_stay_in_support_bound() {
        let s = builtin_space("real-line", &json!({})).unwrap();
        let x = at(&s, Rat::new(2, 5));
        let rep = convergence_harness(&s, &x, |_| x.clone(), 0..30, 20, 3).unwrap();
        assert!(rep.ok());
        for row in &rep.rows {
            assert!(row.input_offset.is_zero());
            assert!(row.max_sample_dist <= &row.dist_to_set + &row.delta);
        }
    }

    #[test]
    fn singleton_level_is_exact() {
        let s = builtin_space("real-line", &json!({})).unwrap();
        let x = at(&s, Rat::new(7, 3));
        let rep = convergence_harness(&s, &x, |_| x.clone(), [0], 5, 0).unwrap();
        assert_eq!(rep.rows[0].max_sample_dist, Rat::new(7, 3));
    }

    #[test]
    fn envelope_shrinks_for_rational_targets() {
        let s = builtin_space("real-line", &json!({})).unwrap();
        let q = Rat::new(1, 3);
        let x = at(&s, q.clone());
        let space = s.clone();
        let inputs = move |m: u32| at(&space, &q + Rat::pow2_neg(m));
        let rep = convergence_harness(&s, &x, inputs, 0..=64, 10, 11).unwrap();
        assert!(rep.ok());
        assert!(rep.envelope_below(&Rat::pow2_neg(5)).is_some());
        assert!(rep.rows.last().unwrap().envelope < Rat::pow2_neg(5));
    }

    #[test]
    fn reports_are_reproducible() {
        let s = builtin_space("real-line", &json!({})).unwrap();
        let x = at(&s, Rat::new(1, 2));
        let run = || convergence_harness(&s, &x, |_| x.clone(), 0..12, 8, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&run()).unwrap(),
            serde_json::to_string(&run()).unwrap()
        );
    }
}
