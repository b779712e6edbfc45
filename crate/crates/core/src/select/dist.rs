use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Rat;

/// A probability distribution on `0..len()` with exact rational masses.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rat>", into = "Vec<Rat>")]
pub struct Dist {
    masses: Vec<Rat>,
}

impl Dist {
    pub fn new(masses: Vec<Rat>) -> Result<Dist> {
        if masses.is_empty() {
            return Err(Error::InvalidDistribution("empty support set".into()));
        }
        if let Some(m) = masses.iter().find(|m| m.is_negative()) {
            return Err(Error::InvalidDistribution(format!("negative mass {m}")));
        }
        let total: Rat = masses.iter().sum();
        if total != Rat::ONE {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        Ok(Dist { masses })
    }

    /// Divides non-negative weights by their exact sum.
    pub fn normalized(weights: Vec<Rat>) -> Result<Dist> {
        let total: Rat = weights.iter().sum();
        if !total.is_positive() || weights.iter().any(Rat::is_negative) {
            return Err(Error::InvalidDistribution(format!(
                "weights {weights:?} cannot be normalized"
            )));
        }
        Dist::new(weights.iter().map(|w| w / &total).collect())
    }

    pub fn point_mass(len: usize, at: usize) -> Dist {
        assert!(at < len);
        let mut masses = vec![Rat::ZERO; len];
        masses[at] = Rat::ONE;
        Dist { masses }
    }

    pub fn uniform(len: usize) -> Dist {
        assert!(len > 0);
        Dist {
            masses: vec![Rat::new(1, len as i64); len],
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, a: usize) -> &Rat {
        &self.masses[a]
    }

    pub fn masses(&self) -> &[Rat] {
        &self.masses
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&a| self.masses[a].is_positive())
            .collect()
    }

    pub fn is_point_mass(&self) -> Option<usize> {
        match self.support()[..] {
            [a] => Some(a),
            _ => None,
        }
    }

    /// Exact inverse-CDF sampling: draws `u` uniformly from `0..L`, `L` the
    /// lcm of the denominators, and returns the first index whose cumulative
    /// mass times `L` exceeds `u`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let l = self
            .masses
            .iter()
            .fold(BigInt::one(), |acc, m| acc.lcm(&m.denom()));
        let u = match l.to_u64() {
            Some(small) => BigInt::from(rng.random_range(0..small)),
            None => uniform_below(rng, &l),
        };
        let mut cum = BigInt::zero();
        for (a, m) in self.masses.iter().enumerate() {
            cum += m.numer() * (&l / m.denom());
            if u < cum {
                return a;
            }
        }
        unreachable!("masses sum to one")
    }

    pub fn sample_seeded(&self, seed: u64) -> usize {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// The law of `f(a)` for `a` drawn from this distribution.
    pub fn pushforward(&self, len: usize, f: impl Fn(usize) -> usize) -> Result<Dist> {
        let mut out = vec![Rat::ZERO; len];
        for (a, m) in self.masses.iter().enumerate() {
            let c = f(a);
            if c >= len {
                return Err(Error::InvalidDistribution(format!(
                    "image {c} outside 0..{len}"
                )));
            }
            out[c] += m;
        }
        Dist::new(out)
    }
}

/// Uniform integer in `0..bound` by rejection on whole bytes.
fn uniform_below<R: Rng + ?Sized>(rng: &mut R, bound: &BigInt) -> BigInt {
    let bits = bound.bits() as usize;
    let mut buf = vec![0u8; bits.div_ceil(8)];
    let spare = buf.len() * 8 - bits;
    loop {
        rng.fill(&mut buf[..]);
        if let Some(top) = buf.last_mut() {
            *top &= 0xff >> spare;
        }
        let u = BigInt::from_bytes_le(Sign::Plus, &buf);
        if &u < bound {
            return u;
        }
    }
}

impl TryFrom<Vec<Rat>> for Dist {
    type Error = Error;

    fn try_from(masses: Vec<Rat>) -> Result<Dist> {
        Dist::new(masses)
    }
}

impl From<Dist> for Vec<Rat> {
    fn from(d: Dist) -> Vec<Rat> {
        d.masses
    }
}

/// Pearson's statistic for observed counts against the masses of `d`.
pub fn chi_square(d: &Dist, counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    d.masses
        .iter()
        .zip(counts)
        .filter(|(m, _)| m.is_positive())
        .map(|(m, &c)| {
            let e = m.to_f64() * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rat {
        Rat::new(p, q)
    }

    #[test]
    fn support_examples() {
        assert_eq!(Dist::point_mass(3, 1).support(), vec![1]);
        let half = Dist::new(vec![r(1, 2), r(1, 2)]).unwrap();
        assert_eq!(half.support(), vec![0, 1]);
        let edge = Dist::new(vec![Rat::ONE, Rat::ZERO]).unwrap();
        assert_eq!(edge.support(), vec![0]);
    }

    #[test]
    fn rejects_bad_masses() {
        assert!(Dist::new(vec![r(1, 2), r(1, 3)]).is_err());
        assert!(Dist::new(vec![r(3, 2), r(-1, 2)]).is_err());
        assert!(Dist::new(vec![]).is_err());
        assert!(Dist::normalized(vec![Rat::ZERO]).is_err());
    }

    #[test]
    fn point_mass_always_sampled() {
        let d = Dist::point_mass(4, 2);
        for seed in 0..50 {
            assert_eq!(d.sample_seeded(seed), 2);
        }
    }

    #[test]
    fn fair_coin_frequencies() {
        let d = Dist::new(vec![r(1, 2), r(1, 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0u64; 2];
        for _ in 0..10_000 {
            counts[d.sample(&mut rng)] += 1;
        }
        // 99.9% quantile of chi-square with one degree of freedom.
        assert!(chi_square(&d, &counts) < 10.83, "{counts:?}");
    }

    #[test]
    fn huge_denominators_sample() {
        let tiny = Rat::pow2_neg(100);
        let d = Dist::new(vec![tiny.clone(), Rat::ONE - tiny]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), 1);
        }
    }

    #[test]
    fn json_is_a_list_of_masses() {
        let d = Dist::new(vec![r(1, 3), r(2, 3)]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"["1/3","2/3"]"#);
        let back: Dist = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<Dist>(r#"["1/3","1/3"]"#).is_err());
    }

    proptest! {
        #[test]
        fn samples_stay_in_support(
            weights in prop::collection::vec(0i64..5, 1..8),
            seed in any::<u64>(),
        ) {
            prop_assume!(weights.iter().any(|&w| w > 0));
            let d = Dist::normalized(weights.iter().map(|&w| Rat::from_integer(w)).collect()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let a = d.sample(&mut rng);
                prop_assert!(d.mass(a).is_positive());
            }
        }

        #[test]
        fn pushforward_conserves_mass(
            weights in prop::collection::vec(1i64..5, 1..8),
            map in prop::collection::vec(0usize..3, 8),
        ) {
            let d = Dist::normalized(weights.iter().map(|&w| Rat::from_integer(w)).collect()).unwrap();
            let p = d.pushforward(3, |a| map[a]).unwrap();
            let total: Rat = p.masses().iter().sum();
            prop_assert_eq!(total, Rat::ONE);
        }
    }
}
