use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Rat;
use crate::error::{Error, Result};

/// Names the ambient space a stream lives in.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpaceTag(Arc<str>);

impl SpaceTag {
    pub fn new(name: impl AsRef<str>) -> SpaceTag {
        SpaceTag(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The tag used for plain computable reals.
    pub fn reals() -> SpaceTag {
        SpaceTag::new("R")
    }
}

impl fmt::Display for SpaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for SpaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpaceTag({})", self.0)
    }
}

type ApproxFn<T> = dyn Fn(u32) -> T + Send + Sync;

/// A point given by a fast-converging stream: `approx(n)` lies within `2^-n`
/// of the represented point, for every `n`.
///
/// Streams built with [`FastCauchy::constant`] remember their exact value so
/// downstream code can skip precision bookkeeping.
pub struct FastCauchy<T> {
    tag: SpaceTag,
    approx: Arc<ApproxFn<T>>,
    exact: Option<T>,
}

impl<T> Clone for FastCauchy<T>
where
    T: Clone,
{
    fn clone(&self) -> Self {
        FastCauchy {
            tag: self.tag.clone(),
            approx: Arc::clone(&self.approx),
            exact: self.exact.clone(),
        }
    }
}

impl<T: Clone + Send + Sync + 'static> FastCauchy<T> {
    /// Wraps a pure approximation function. The caller vouches for the
    /// `2^-n` contract.
    pub fn new(tag: SpaceTag, approx: impl Fn(u32) -> T + Send + Sync + 'static) -> Self {
        FastCauchy {
            tag,
            approx: Arc::new(approx),
            exact: None,
        }
    }

    pub fn constant(tag: SpaceTag, value: T) -> Self {
        let v = value.clone();
        FastCauchy {
            tag,
            approx: Arc::new(move |_| v.clone()),
            exact: Some(value),
        }
    }

    /// A stream from a finite prefix; indices past the end repeat the last
    /// entry, so the `2^-n` guarantee only covers `n < prefix.len()`.
    pub fn from_prefix(tag: SpaceTag, prefix: Vec<T>) -> Self {
        assert!(!prefix.is_empty(), "empty prefix");
        if prefix.len() == 1 {
            return FastCauchy::constant(tag, prefix.into_iter().next().unwrap());
        }
        let prefix = Arc::new(prefix);
        FastCauchy::new(tag, move |n| {
            let i = (n as usize).min(prefix.len() - 1);
            prefix[i].clone()
        })
    }

    pub fn approx(&self, n: u32) -> T {
        match &self.exact {
            Some(v) => v.clone(),
            None => (self.approx)(n),
        }
    }

    pub fn exact(&self) -> Option<&T> {
        self.exact.as_ref()
    }

    pub fn tag(&self) -> &SpaceTag {
        &self.tag
    }

    pub fn prefix(&self, len: u32) -> Vec<T> {
        (0..len).map(|n| self.approx(n)).collect()
    }

    pub fn map<U: Clone + Send + Sync + 'static>(
        &self,
        tag: SpaceTag,
        f: impl Fn(T) -> U + Send + Sync + 'static,
    ) -> FastCauchy<U> {
        match &self.exact {
            Some(v) => FastCauchy::constant(tag, f(v.clone())),
            None => {
                let inner = Arc::clone(&self.approx);
                FastCauchy::new(tag, move |n| f(inner(n)))
            }
        }
    }
}

impl FastCauchy<Rat> {
    pub fn rational(q: Rat) -> Self {
        FastCauchy::constant(SpaceTag::reals(), q)
    }

    pub fn real(approx: impl Fn(u32) -> Rat + Send + Sync + 'static) -> Self {
        FastCauchy::new(SpaceTag::reals(), approx)
    }
}

impl<T: fmt::Debug> fmt::Debug for FastCauchy<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(v) => write!(f, "FastCauchy[{}]({v:?})", self.tag),
            None => write!(f, "FastCauchy[{}](<stream>)", self.tag),
        }
    }
}

/// Checks the pairwise consequence of the fast-convergence contract:
/// `|x(n) - x(m)| <= 2^-n + 2^-m`.
pub fn fc_consistency_check(x: &FastCauchy<Rat>, n: u32, m: u32) -> bool {
    let gap = (x.approx(n) - x.approx(m)).abs();
    gap <= Rat::pow2_neg(n) + Rat::pow2_neg(m)
}

/// Generic form of [`fc_consistency_check`] for streams over any space.
pub fn fc_consistency_check_by<T: Clone + Send + Sync + 'static>(
    x: &FastCauchy<T>,
    n: u32,
    m: u32,
    dist: impl Fn(&T, &T) -> Rat,
) -> bool {
    dist(&x.approx(n), &x.approx(m)) <= Rat::pow2_neg(n) + Rat::pow2_neg(m)
}

/// Distance between two stream points, within `2^-n` of the true value.
///
/// `oracle(a, b, p)` must return `d(a, b)` within `2^-p`. Approximants and
/// the oracle are both queried at `n + 2`.
pub fn fc_dist<T, F>(x: &FastCauchy<T>, y: &FastCauchy<T>, oracle: F, n: u32) -> Result<Rat>
where
    T: Clone + Send + Sync + 'static,
    F: Fn(&T, &T, u32) -> Rat,
{
    if x.tag() != y.tag() {
        return Err(Error::SpaceMismatch {
            left: x.tag().to_string(),
            right: y.tag().to_string(),
        });
    }
    let p = n + 2;
    Ok(oracle(&x.approx(p), &y.approx(p), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abs_oracle(a: &Rat, b: &Rat, _p: u32) -> Rat {
        (a - b).abs()
    }

    #[test]
    fn consistency_examples() {
        let third = FastCauchy::rational(Rat::new(1, 3));
        assert!(fc_consistency_check(&third, 4, 9));

        let halving = FastCauchy::real(Rat::pow2_neg);
        assert!(fc_consistency_check(&halving, 1, 3));

        let jumpy = FastCauchy::real(|n| {
            if n >= 5 {
                Rat::from_integer(2)
            } else {
                Rat::ZERO
            }
        });
        assert!(!fc_consistency_check(&jumpy, 0, 5));
    }

    #[test]
    fn dist_examples() {
        let x = FastCauchy::real(|n| Rat::new(1, 3) + Rat::pow2_neg(n + 1));
        assert!(fc_dist(&x, &x, abs_oracle, 7).unwrap() <= Rat::pow2_neg(7));

        let third = FastCauchy::real(|n| Rat::new(1, 3) - Rat::pow2_neg(n));
        let two_thirds = FastCauchy::rational(Rat::new(2, 3));
        let d = fc_dist(&third, &two_thirds, abs_oracle, 10).unwrap();
        assert!((d - Rat::new(1, 3)).abs() <= Rat::pow2_neg(10));

        let q = Rat::new(-7, 5);
        let zero = FastCauchy::rational(Rat::ZERO);
        let d = fc_dist(&zero, &FastCauchy::rational(q.clone()), abs_oracle, 3).unwrap();
        assert!((d - q.abs()).abs() <= Rat::pow2_neg(3));
    }

    #[test]
    fn dist_rejects_mismatched_spaces() {
        let x = FastCauchy::constant(SpaceTag::new("A"), Rat::ZERO);
        let y = FastCauchy::constant(SpaceTag::new("B"), Rat::ZERO);
        assert!(matches!(
            fc_dist(&x, &y, abs_oracle, 1),
            Err(Error::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn prefix_streams_clamp() {
        let s = FastCauchy::from_prefix(SpaceTag::reals(), vec![Rat::ONE, Rat::new(1, 2)]);
        assert_eq!(s.approx(0), Rat::ONE);
        assert_eq!(s.approx(9), Rat::new(1, 2));
        assert!(s.exact().is_none());
    }

    /// A real given by a dyadic truncation stream around `target`, offset by
    /// a bounded wobble so approximants are not all equal.
    fn wobbly(target: Rat, phase: i64) -> FastCauchy<Rat> {
        FastCauchy::real(move |n| {
            let sign = if (n as i64 + phase) % 2 == 0 { 1 } else { -1 };
            &target + Rat::from_integer(sign) * Rat::pow2_neg(n + 1)
        })
    }

    proptest! {
        #[test]
        fn wobbly_streams_are_consistent(p in -50i64..50, q in 1i64..20, phase in 0i64..2) {
            let x = wobbly(Rat::new(p, q), phase);
            for n in 0..=20 {
                for m in 0..=20 {
                    prop_assert!(fc_consistency_check(&x, n, m));
                }
            }
        }

        #[test]
        fn dist_symmetric_and_triangular(
            a in -50i64..50, b in -50i64..50, c in -50i64..50, q in 1i64..9, n in 0u32..16
        ) {
            let x = wobbly(Rat::new(a, q), 0);
            let y = wobbly(Rat::new(b, q), 1);
            let z = wobbly(Rat::new(c, q), 0);
            let tol = Rat::pow2_neg(n);
            let dxy = fc_dist(&x, &y, abs_oracle, n).unwrap();
            let dyx = fc_dist(&y, &x, abs_oracle, n).unwrap();
            prop_assert!((&dxy - &dyx).abs() <= Rat::from_integer(2) * &tol);
            let dxz = fc_dist(&x, &z, abs_oracle, n).unwrap();
            let dyz = fc_dist(&y, &z, abs_oracle, n).unwrap();
            prop_assert!(dxz <= &dxy + &dyz + Rat::from_integer(3) * &tol);
        }
    }
}
