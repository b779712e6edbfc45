use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Rat;
use crate::select::Dist;

/// Upper bound on the support size of any distribution this crate writes out
/// in full.
pub const MATERIALIZE_LIMIT: usize = 1 << 20;

/// Mixed-radix index arithmetic, first coordinate most significant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Radix {
    sizes: Vec<usize>,
}

impl Radix {
    pub fn new(sizes: Vec<usize>) -> Radix {
        Radix { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Total number of tuples, `None` on overflow.
    pub fn total(&self) -> Option<usize> {
        self.sizes
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
    }

    pub fn decode(&self, mut index: usize) -> Result<Vec<usize>> {
        let mut out = vec![0; self.sizes.len()];
        for (slot, &s) in out.iter_mut().zip(&self.sizes).rev() {
            if s == 0 {
                return Err(Error::DenseOutOfRange { index, len: 0 });
            }
            *slot = index % s;
            index /= s;
        }
        if index != 0 {
            return Err(Error::DenseOutOfRange {
                index,
                len: self.total().unwrap_or(usize::MAX),
            });
        }
        Ok(out)
    }

    pub fn encode(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.sizes.len() {
            return Err(Error::InvalidRequest(format!(
                "{} coordinates for {} factors",
                digits.len(),
                self.sizes.len()
            )));
        }
        let mut index = 0usize;
        for (&d, &s) in digits.iter().zip(&self.sizes) {
            if d >= s {
                return Err(Error::DenseOutOfRange { index: d, len: s });
            }
            index = index
                .checked_mul(s)
                .and_then(|i| i.checked_add(d))
                .ok_or_else(|| Error::TooLarge("tuple index overflows".into()))?;
        }
        Ok(index)
    }
}

/// A product of independent distributions, kept in factored form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductDist {
    factors: Vec<Dist>,
}

impl ProductDist {
    pub fn new(factors: Vec<Dist>) -> Result<ProductDist> {
        if factors.is_empty() {
            return Err(Error::InvalidDistribution("product of no factors".into()));
        }
        Ok(ProductDist { factors })
    }

    pub fn factors(&self) -> &[Dist] {
        &self.factors
    }

    pub fn radix(&self) -> Radix {
        Radix::new(self.factors.iter().map(Dist::len).collect())
    }

    /// Mass of one tuple: the product of its coordinate masses.
    pub fn mass(&self, coords: &[usize]) -> Rat {
        self.factors
            .iter()
            .zip(coords)
            .map(|(d, &c)| d.mass(c).clone())
            .fold(Rat::ONE, |acc, m| acc * m)
    }

    /// The joint distribution over all tuples in radix order.
    pub fn materialize(&self) -> Result<Dist> {
        let radix = self.radix();
        let total = radix
            .total()
            .filter(|&t| t <= MATERIALIZE_LIMIT)
            .ok_or_else(|| {
                Error::TooLarge(format!("product over factor sizes {:?}", radix.sizes()))
            })?;
        let masses = (0..total)
            .map(|i| Ok(self.mass(&radix.decode(i)?)))
            .collect::<Result<Vec<_>>>()?;
        Dist::new(masses)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.factors.iter().map(|d| d.sample(rng)).collect()
    }
}

/// The `i`-th marginal of a joint distribution over tuples of `radix`.
pub fn marginal(joint: &Dist, radix: &Radix, i: usize) -> Result<Dist> {
    let size = radix.sizes()[i];
    let mut out = vec![Rat::ZERO; size];
    for (t, m) in joint.masses().iter().enumerate() {
        out[radix.decode(t)?[i]] += m;
    }
    Dist::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rat {
        Rat::new(p, q)
    }

    #[test]
    fn radix_order() {
        let radix = Radix::new(vec![2, 3]);
        assert_eq!(radix.total(), Some(6));
        assert_eq!(radix.decode(0).unwrap(), vec![0, 0]);
        assert_eq!(radix.decode(1).unwrap(), vec![0, 1]);
        assert_eq!(radix.decode(3).unwrap(), vec![1, 0]);
        assert!(radix.decode(6).is_err());
        assert_eq!(radix.encode(&[1, 2]).unwrap(), 5);
        assert!(Radix::new(vec![usize::MAX, 3]).total().is_none());
    }

    #[test]
    fn half_half_times_point_mass() {
        let p = ProductDist::new(vec![
            Dist::new(vec![r(1, 2), r(1, 2)]).unwrap(),
            Dist::new(vec![Rat::ONE, Rat::ZERO]).unwrap(),
        ])
        .unwrap();
        let joint = p.materialize().unwrap();
        assert_eq!(joint.masses(), &[r(1, 2), Rat::ZERO, r(1, 2), Rat::ZERO]);
    }

    #[test]
    fn oversized_products_refuse() {
        let big = Dist::uniform(1 << 11);
        let p = ProductDist::new(vec![big.clone(), big]).unwrap();
        assert!(matches!(p.materialize(), Err(Error::TooLarge(_))));
    }

    fn arb_dist() -> impl Strategy<Value = Dist> {
        prop::collection::vec(0i64..6, 1..5)
            .prop_filter("some positive weight", |w| w.iter().any(|&x| x > 0))
            .prop_map(|w| Dist::normalized(w.into_iter().map(Rat::from_integer).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn marginals_are_exact(factors in prop::collection::vec(arb_dist(), 1..4)) {
            let p = ProductDist::new(factors.clone()).unwrap();
            let joint = p.materialize().unwrap();
            let radix = p.radix();
            for (i, f) in factors.iter().enumerate() {
                prop_assert_eq!(&marginal(&joint, &radix, i).unwrap(), f);
            }
        }

        #[test]
        fn radix_round_trips(sizes in prop::collection::vec(1usize..5, 1..5), seed in any::<usize>()) {
            let radix = Radix::new(sizes);
            let i = seed % radix.total().unwrap();
            prop_assert_eq!(radix.encode(&radix.decode(i).unwrap()).unwrap(), i);
        }
    }
}
