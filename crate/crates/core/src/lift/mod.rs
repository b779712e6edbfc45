//! Selections on product and function spaces, typed hierarchies over base
//! spaces, and dense enumeration of their elements.

mod product;
mod types;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numeric::{FastCauchy, Rat};
use crate::select::{metric_selection_level, semiconvex_for, Dist, MetricLevel, SemiconvexOp};
use crate::spaces::{Combine, Point, Space};

pub use product::{marginal, ProductDist, Radix, MATERIALIZE_LIMIT};
pub use types::TypeExpr;

/// Assignment of spaces to base variables.
pub type Bases = BTreeMap<u32, Space>;

/// A total map `A_n -> C_n` stored as the image of each domain index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteFn {
    table: Vec<usize>,
    codomain: usize,
}

impl FiniteFn {
    pub fn new(table: Vec<usize>, codomain: usize) -> Result<FiniteFn> {
        if table.is_empty() {
            return Err(Error::InvalidRequest(
                "finite function on an empty domain".into(),
            ));
        }
        if let Some(&c) = table.iter().find(|&&c| c >= codomain) {
            return Err(Error::DenseOutOfRange {
                index: c,
                len: codomain,
            });
        }
        Ok(FiniteFn { table, codomain })
    }

    pub fn constant(domain: usize, codomain: usize, c: usize) -> Result<FiniteFn> {
        FiniteFn::new(vec![c; domain], codomain)
    }

    fn radix(domain: usize, codomain: usize) -> Radix {
        Radix::new(vec![codomain; domain])
    }

    /// The `k`-th map in lexicographic order of tables.
    pub fn from_index(k: usize, domain: usize, codomain: usize) -> Result<FiniteFn> {
        FiniteFn::new(FiniteFn::radix(domain, codomain).decode(k)?, codomain)
    }

    pub fn index(&self) -> Result<usize> {
        FiniteFn::radix(self.table.len(), self.codomain).encode(&self.table)
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn domain_len(&self) -> usize {
        self.table.len()
    }

    pub fn codomain_len(&self) -> usize {
        self.codomain
    }

    pub fn apply(&self, a: usize) -> usize {
        self.table[a]
    }
}

type NativeBody = dyn Fn(&FnPoint) -> Result<FnPoint> + Send + Sync;

/// A named host function, used for targets such as polynomials.
#[derive(Clone)]
pub struct NativeFn {
    name: Arc<str>,
    body: Arc<NativeBody>,
}

impl fmt::Debug for NativeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NativeFn({})", self.name)
    }
}

/// An element of a typed hierarchy.
#[derive(Clone, Debug)]
pub enum FnPoint {
    Base(Point),
    Tuple(Vec<FnPoint>),
    Lifted {
        level: Arc<LiftedLevel>,
        phi: FiniteFn,
    },
    Native(NativeFn),
}

impl FnPoint {
    pub fn native(
        name: impl AsRef<str>,
        body: impl Fn(&FnPoint) -> Result<FnPoint> + Send + Sync + 'static,
    ) -> FnPoint {
        FnPoint::Native(NativeFn {
            name: Arc::from(name.as_ref()),
            body: Arc::new(body),
        })
    }

    pub fn identity() -> FnPoint {
        FnPoint::native("id", |x| Ok(x.clone()))
    }

    /// The constant function with value `y`.
    pub fn constant(y: FnPoint) -> FnPoint {
        FnPoint::native("const", move |_| Ok(y.clone()))
    }

    pub fn as_point(&self) -> Result<&Point> {
        match self {
            FnPoint::Base(p) => Ok(p),
            other => Err(Error::Evaluation(format!(
                "expected a base point, got {}",
                other.kind()
            ))),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            FnPoint::Base(_) => "base point",
            FnPoint::Tuple(_) => "tuple",
            FnPoint::Lifted { .. } => "lifted function",
            FnPoint::Native(_) => "native function",
        }
    }

    pub fn apply(&self, arg: &FnPoint) -> Result<FnPoint> {
        match self {
            FnPoint::Lifted { level, phi } => Ok(FnPoint::Base(lift_apply(level, phi, arg)?)),
            FnPoint::Native(f) => (f.body)(arg),
            other => Err(Error::Evaluation(format!(
                "cannot apply a {}",
                other.kind()
            ))),
        }
    }

    /// Applies a curried function to all of its arguments at once.
    pub fn apply_all(&self, mut args: Vec<FnPoint>) -> Result<FnPoint> {
        match args.len() {
            1 => self.apply(&args.pop().expect("one argument")),
            _ => self.apply(&FnPoint::Tuple(args)),
        }
    }

    /// A JSON rendering, with base points read at precision `prec`.
    pub fn describe(&self, prec: u32) -> Value {
        match self {
            FnPoint::Base(p) => json!({
                "space": p.tag().as_str(),
                "point": serde_json::to_value(p.approx(prec)).expect("elements serialize"),
                "exact": p.exact().is_some(),
            }),
            FnPoint::Tuple(items) => Value::Array(items.iter().map(|x| x.describe(prec)).collect()),
            FnPoint::Lifted { level, phi } => json!({
                "level": level.n(),
                "table": phi.table(),
                "codomain": level.codomain.points(),
            }),
            FnPoint::Native(f) => json!({ "native": &*f.name }),
        }
    }
}

/// Level `n` of the selection on a typed space.
#[derive(Clone, Debug)]
pub enum TypedLevel {
    Base(MetricLevel),
    Product(ProductLevel),
    Arrow(Arc<LiftedLevel>),
}

#[derive(Clone, Debug)]
pub struct ProductLevel {
    n: u32,
    factors: Vec<TypedLevel>,
    radix: Radix,
}

impl ProductLevel {
    pub fn factors(&self) -> &[TypedLevel] {
        &self.factors
    }

    pub fn radix(&self) -> &Radix {
        &self.radix
    }

    /// `mu` of the product, in factored form.
    pub fn mu_factors(&self, x: &FnPoint) -> Result<ProductDist> {
        match x {
            FnPoint::Tuple(xs) if xs.len() == self.factors.len() => ProductDist::new(
                self.factors
                    .iter()
                    .zip(xs)
                    .map(|(l, x)| l.mu(x))
                    .collect::<Result<_>>()?,
            ),
            other => Err(Error::Evaluation(format!(
                "expected a {}-tuple, got {}",
                self.factors.len(),
                other.kind()
            ))),
        }
    }
}

impl TypedLevel {
    pub fn n(&self) -> u32 {
        match self {
            TypedLevel::Base(l) => l.n(),
            TypedLevel::Product(p) => p.n,
            TypedLevel::Arrow(l) => l.n(),
        }
    }

    /// `|A_n|`, `None` when it does not fit in a `usize`.
    pub fn size(&self) -> Option<usize> {
        match self {
            TypedLevel::Base(l) => Some(l.len()),
            TypedLevel::Product(p) => p.radix.total(),
            TypedLevel::Arrow(l) => l.size(),
        }
    }

    fn finite_size(&self) -> Result<usize> {
        self.size()
            .ok_or_else(|| Error::TooLarge(format!("level {} has too many elements", self.n())))
    }

    /// Whether this level's space carries a combination operator.
    pub fn has_semiconvex(&self) -> bool {
        match self {
            TypedLevel::Base(l) => !matches!(l.space().combine(), Combine::None),
            _ => false,
        }
    }

    /// `nu_n(i)`.
    pub fn nu(&self, i: usize) -> Result<FnPoint> {
        match self {
            TypedLevel::Base(l) => {
                if i >= l.len() {
                    return Err(Error::DenseOutOfRange {
                        index: i,
                        len: l.len(),
                    });
                }
                Ok(FnPoint::Base(l.nu(i)?))
            }
            TypedLevel::Product(p) => Ok(FnPoint::Tuple(
                p.radix
                    .decode(i)?
                    .into_iter()
                    .zip(&p.factors)
                    .map(|(d, l)| l.nu(d))
                    .collect::<Result<_>>()?,
            )),
            TypedLevel::Arrow(l) => Ok(FnPoint::Lifted {
                level: l.clone(),
                phi: FiniteFn::from_index(i, l.domain_len()?, l.codomain_len())?,
            }),
        }
    }

    /// `mu_n(x)`, written out in full.
    pub fn mu(&self, x: &FnPoint) -> Result<Dist> {
        match self {
            TypedLevel::Base(l) => l.mu(x.as_point()?),
            TypedLevel::Product(p) => p.mu_factors(x)?.materialize(),
            TypedLevel::Arrow(l) => eta(l, x)?.materialize(),
        }
    }
}

/// The product of levels sharing one index; a single level is returned as is.
pub fn product_selection(mut levels: Vec<TypedLevel>) -> Result<TypedLevel> {
    let n = match levels.first() {
        None => return Err(Error::InvalidRequest("product of no levels".into())),
        Some(l) => l.n(),
    };
    if let Some(l) = levels.iter().find(|l| l.n() != n) {
        return Err(Error::InvalidRequest(format!(
            "levels {n} and {} cannot be combined",
            l.n()
        )));
    }
    if levels.len() == 1 {
        return Ok(levels.pop().expect("one level"));
    }
    let sizes = levels
        .iter()
        .map(TypedLevel::finite_size)
        .collect::<Result<Vec<_>>>()?;
    Ok(TypedLevel::Product(ProductLevel {
        n,
        factors: levels,
        radix: Radix::new(sizes),
    }))
}

/// The selection on `X -> Y` at one level: `B_n = A_n -> C_n`, with
/// `nu*(phi)(x) = h_n(push of mu_n(x) along phi)`.
pub struct LiftedLevel {
    domain: TypedLevel,
    codomain: MetricLevel,
    op: SemiconvexOp,
}

impl fmt::Debug for LiftedLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiftedLevel")
            .field("n", &self.n())
            .field("domain", &self.domain)
            .field("codomain", &self.codomain)
            .finish()
    }
}

impl LiftedLevel {
    pub fn new(domain: TypedLevel, codomain: MetricLevel) -> Result<LiftedLevel> {
        if domain.n() != codomain.n() {
            return Err(Error::InvalidRequest(format!(
                "domain level {} with codomain level {}",
                domain.n(),
                codomain.n()
            )));
        }
        domain.finite_size()?;
        let space = codomain.space();
        let nodes = codomain
            .points()
            .iter()
            .map(|&i| space.dense_elem(i))
            .collect::<Result<Vec<_>>>()?;
        let op = semiconvex_for(space, &nodes)?;
        Ok(LiftedLevel {
            domain,
            codomain,
            op,
        })
    }

    pub fn n(&self) -> u32 {
        self.codomain.n()
    }

    pub fn domain(&self) -> &TypedLevel {
        &self.domain
    }

    pub fn codomain(&self) -> &MetricLevel {
        &self.codomain
    }

    pub fn op(&self) -> &SemiconvexOp {
        &self.op
    }

    pub fn domain_len(&self) -> Result<usize> {
        self.domain.finite_size()
    }

    pub fn codomain_len(&self) -> usize {
        self.codomain.len()
    }

    /// `|C_n|^|A_n|`, `None` on overflow.
    pub fn size(&self) -> Option<usize> {
        let a = self.domain.size()?;
        FiniteFn::radix(a, self.codomain_len()).total()
    }

    fn check_fn(&self, phi: &FiniteFn) -> Result<()> {
        if phi.domain_len() != self.domain_len()? || phi.codomain_len() != self.codomain_len() {
            return Err(Error::InvalidRequest(format!(
                "map of shape {}->{} on a level of shape {}->{}",
                phi.domain_len(),
                phi.codomain_len(),
                self.domain_len()?,
                self.codomain_len()
            )));
        }
        Ok(())
    }
}

/// The law of `phi(a)` for `a ~ mu_n(x)`.
pub fn lift_pushforward(level: &LiftedLevel, phi: &FiniteFn, x: &FnPoint) -> Result<Dist> {
    level.check_fn(phi)?;
    level
        .domain
        .mu(x)?
        .pushforward(level.codomain_len(), |a| phi.apply(a))
}

/// `nu*_n(phi)(x)`.
pub fn lift_apply(level: &LiftedLevel, phi: &FiniteFn, x: &FnPoint) -> Result<Point> {
    let m = lift_pushforward(level, phi, x)?;
    let elem = level.op.combine(&m)?;
    Ok(FastCauchy::constant(level.codomain.space().tag(), elem))
}

/// The `a`-th factor of `eta_n(f)`: `lambda_n(f(nu_n(a)))`.
pub fn lift_dist_factor(level: &LiftedLevel, f: &FnPoint, a: usize) -> Result<Dist> {
    let y = f.apply(&level.domain.nu(a)?)?;
    level.codomain.mu(y.as_point()?)
}

/// `eta_n(f)` as a product over the domain level.
pub fn eta(level: &LiftedLevel, f: &FnPoint) -> Result<ProductDist> {
    ProductDist::new(
        (0..level.domain_len()?)
            .map(|a| lift_dist_factor(level, f, a))
            .collect::<Result<_>>()?,
    )
}

/// `eta_n(f)(phi)`.
pub fn eta_mass(level: &LiftedLevel, f: &FnPoint, phi: &FiniteFn) -> Result<Rat> {
    level.check_fn(phi)?;
    Ok(eta(level, f)?.mass(phi.table()))
}

/// Draws `phi ~ eta_n(f)`, one coordinate at a time in domain order.
pub fn lift_sample_with<R: Rng + ?Sized>(
    level: &LiftedLevel,
    f: &FnPoint,
    rng: &mut R,
) -> Result<FiniteFn> {
    let table = eta(level, f)?.sample(rng);
    FiniteFn::new(table, level.codomain_len())
}

pub fn lift_sample(level: &LiftedLevel, f: &FnPoint, seed: u64) -> Result<FiniteFn> {
    lift_sample_with(level, f, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Level `n` of the selection on `t` over `bases`, after currying.
pub fn interpret_type(t: &TypeExpr, bases: &Bases, n: u32) -> Result<TypedLevel> {
    build(&t.curried(), bases, n)
}

fn base_space(bases: &Bases, i: u32) -> Result<&Space> {
    bases
        .get(&i)
        .ok_or_else(|| Error::UnsupportedType(format!("V{i} has no assigned space")))
}

fn build(t: &TypeExpr, bases: &Bases, n: u32) -> Result<TypedLevel> {
    match t {
        TypeExpr::Base(i) => Ok(TypedLevel::Base(metric_selection_level(
            base_space(bases, *i)?.clone(),
            n,
        )?)),
        TypeExpr::Product(ts) => product_selection(
            ts.iter()
                .map(|t| build(t, bases, n))
                .collect::<Result<_>>()?,
        ),
        TypeExpr::Arrow { args, result } => {
            let TypeExpr::Base(j) = **result else {
                return Err(Error::UnsupportedType(format!(
                    "codomain {result} is not a base type"
                )));
            };
            let space = base_space(bases, j)?;
            if matches!(space.combine(), Combine::None) {
                return Err(Error::UnsupportedType(format!(
                    "codomain V{j} ({}) has no combination operator",
                    space.tag()
                )));
            }
            let domain = product_selection(
                args.iter()
                    .map(|t| build(t, bases, n))
                    .collect::<Result<_>>()?,
            )?;
            let codomain = metric_selection_level(space.clone(), n)?;
            Ok(TypedLevel::Arrow(Arc::new(LiftedLevel::new(
                domain, codomain,
            )?)))
        }
    }
}

/// The first `count` elements of a dense subset of the space of type `t`.
///
/// Base types list their dense sequence. Other types walk the pairs
/// `(n, k)` by increasing `n + k`, then increasing `n`, emitting `nu_n(k)`
/// whenever `k < |A_n|`.
pub fn enumerate_dense(t: &TypeExpr, bases: &Bases, count: usize) -> Result<Vec<FnPoint>> {
    let t = t.curried();
    if let TypeExpr::Base(i) = t {
        let space = base_space(bases, i)?;
        let len = space.dense_len().map_or(count, |l| l.min(count));
        return (0..len)
            .map(|k| Ok(FnPoint::Base(space.dense_point(k)?)))
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    let mut levels: Vec<TypedLevel> = Vec::new();
    // Set once level construction runs past a finite base space.
    let mut last: Option<u32> = None;
    let mut s: usize = 0;
    while out.len() < count {
        if let Some(m) = last {
            let widest = levels.iter().map(|l| l.size().unwrap_or(usize::MAX)).max();
            if s > m as usize + widest.unwrap_or(0) {
                break;
            }
        }
        for n in 0..=s {
            if out.len() == count {
                break;
            }
            let n32 = u32::try_from(n).map_err(|_| Error::TooLarge("level index".into()))?;
            if last.is_some_and(|m| n32 > m) {
                break;
            }
            if n == levels.len() {
                match interpret_type(&t, bases, n32) {
                    Ok(l) => levels.push(l),
                    Err(Error::DenseOutOfRange { .. }) if n > 0 => {
                        last = Some(n32 - 1);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            let k = s - n;
            if levels[n].size().is_none_or(|z| k < z) {
                out.push(levels[n].nu(k)?);
            }
        }
        s += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::chi_square;
    use crate::spaces::{builtin_space, Elem};
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn r(p: i64, q: i64) -> Rat {
        Rat::new(p, q)
    }

    fn line() -> Space {
        builtin_space("real-line", &json!({})).unwrap()
    }

    fn line_bases() -> Bases {
        Bases::from([(1, line())])
    }

    fn real(q: Rat) -> FnPoint {
        FnPoint::Base(FastCauchy::constant(line().tag(), Elem::Coords(vec![q])))
    }

    fn value(p: &FnPoint) -> Rat {
        match p.as_point().unwrap().exact().unwrap() {
            Elem::Coords(v) => v[0].clone(),
            other => panic!("{other:?}"),
        }
    }

    fn lifted(ty: &str, n: u32) -> Arc<LiftedLevel> {
        match interpret_type(&ty.parse().unwrap(), &line_bases(), n).unwrap() {
            TypedLevel::Arrow(l) => l,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn finite_fn_lexicographic() {
        let all: Vec<Vec<usize>> = (0..4)
            .map(|k| FiniteFn::from_index(k, 2, 2).unwrap().table().to_vec())
            .collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert!(FiniteFn::new(vec![0, 2], 2).is_err());
        assert_eq!(FiniteFn::new(vec![1, 0], 2).unwrap().index().unwrap(), 2);
    }

    #[test]
    fn apply_examples() {
        let l = lifted("(V1->V1)", 1);
        let x = real(r(1, 2));
        // Constant maps give the codomain point.
        let c = FiniteFn::constant(2, 2, 1).unwrap();
        assert_eq!(
            value(&FnPoint::Base(lift_apply(&l, &c, &x).unwrap())),
            Rat::ONE
        );
        // Identity on {0, 1} at 1/2.
        let id = FiniteFn::new(vec![0, 1], 2).unwrap();
        assert_eq!(
            lift_pushforward(&l, &id, &x).unwrap().masses(),
            &[r(1, 2), r(1, 2)]
        );
        assert_eq!(
            value(&FnPoint::Base(lift_apply(&l, &id, &x).unwrap())),
            r(1, 2)
        );
        // A bijection relabels mu.
        let swap = FiniteFn::new(vec![1, 0], 2).unwrap();
        let y = real(r(1, 4));
        let mu = l.domain().mu(&y).unwrap();
        let pushed = lift_pushforward(&l, &swap, &y).unwrap();
        assert_eq!(pushed.masses(), &[mu.mass(1).clone(), mu.mass(0).clone()]);
    }

    #[test]
    fn eta_sums_to_one_on_small_levels() {
        let l = lifted("(V1->V1)", 1);
        for f in [FnPoint::identity(), FnPoint::constant(real(r(1, 3)))] {
            let total: Rat = (0..4)
                .map(|k| eta_mass(&l, &f, &FiniteFn::from_index(k, 2, 2).unwrap()).unwrap())
                .sum();
            assert_eq!(total, Rat::ONE);
        }
        // Constant f: every factor is lambda(y).
        let y = real(r(1, 3));
        let e = eta(&l, &FnPoint::constant(y.clone())).unwrap();
        let lambda = l.codomain().mu(y.as_point().unwrap()).unwrap();
        assert!(e.factors().iter().all(|d| *d == lambda));
    }

    #[test]
    fn point_mass_factors_sample_deterministically() {
        let l = lifted("(V1->V1)", 1);
        let f = FnPoint::identity();
        let first = lift_sample(&l, &f, 0).unwrap();
        assert_eq!(first.table(), &[0, 1]);
        for seed in 1..20 {
            assert_eq!(lift_sample(&l, &f, seed).unwrap(), first);
        }
    }

    #[test]
    fn sampler_matches_eta_on_three_points() {
        // A_2 = C_2 = {0, 1, -1}; f(x) = x/8 + 7/16 splits two of the factors.
        let l = lifted("(V1->V1)", 2);
        let f = FnPoint::native("affine", |x| {
            let v = value(x);
            Ok(real(v / r(8, 1) + r(7, 16)))
        });
        let joint = eta(&l, &f).unwrap().materialize().unwrap();
        assert_eq!(joint.support().len(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = vec![0u64; joint.len()];
        for _ in 0..10_000 {
            counts[lift_sample_with(&l, &f, &mut rng).unwrap().index().unwrap()] += 1;
        }
        let dof = (joint.support().len() - 1) as f64;
        let bound = ChiSquared::new(dof).unwrap().inverse_cdf(0.999);
        assert!(chi_square(&joint, &counts) < bound);
    }

    #[test]
    fn identity_lift_stays_within_enumerated_bound() {
        let l = lifted("(V1->V1)", 2);
        let f = FnPoint::identity();
        let grid: Vec<Rat> = (-4..=4).map(|k| r(k, 4)).collect();
        let joint = eta(&l, &f).unwrap().materialize().unwrap();
        let err = |phi: &FiniteFn| -> Rat {
            grid.iter()
                .map(|q| {
                    let y = value(&FnPoint::Base(
                        lift_apply(&l, phi, &real(q.clone())).unwrap(),
                    ));
                    (y - q).abs()
                })
                .max()
                .unwrap()
        };
        let bound = joint
            .support()
            .into_iter()
            .map(|k| err(&FiniteFn::from_index(k, 3, 3).unwrap()))
            .max()
            .unwrap();
        for seed in 0..50 {
            assert!(err(&lift_sample(&l, &f, seed).unwrap()) <= bound);
        }
    }

    #[test]
    fn interpretation_shapes() {
        let b = line_bases();
        let base = interpret_type(&"V1".parse().unwrap(), &b, 1).unwrap();
        assert_eq!(base.size(), Some(2));
        assert!(base.has_semiconvex());
        let arrow = interpret_type(&"(V1->V1)".parse().unwrap(), &b, 1).unwrap();
        assert_eq!(arrow.size(), Some(4));
        assert!(!arrow.has_semiconvex());
        let pair = interpret_type(&"(V1,V1)->V1".parse().unwrap(), &b, 1).unwrap();
        assert_eq!(pair.size(), Some(16));
        // Curried and uncurried forms share a level.
        let curried = interpret_type(&"(V1->(V1->V1))".parse().unwrap(), &b, 1).unwrap();
        assert_eq!(curried.size(), Some(16));
    }

    #[test]
    fn unsupported_types() {
        let finite = builtin_space("finite", &json!({"dist": [["0","1"],["1","0"]]})).unwrap();
        let b = Bases::from([(1, line()), (2, finite)]);
        let into_finite = interpret_type(&"(V1->V2)".parse().unwrap(), &b, 1);
        assert!(matches!(into_finite, Err(Error::UnsupportedType(_))));
        let into_pair = interpret_type(&"(V1->(V1,V1))".parse().unwrap(), &b, 1);
        assert!(matches!(into_pair, Err(Error::UnsupportedType(_))));
        let unbound = interpret_type(&"V3".parse().unwrap(), &b, 1);
        assert!(matches!(unbound, Err(Error::UnsupportedType(_))));
        // A finite domain is fine.
        assert!(interpret_type(&"(V2->V1)".parse().unwrap(), &b, 1).is_ok());
    }

    #[test]
    fn nested_lift_evaluates_on_lifted_arguments() {
        let outer = lifted("((V1->V1)->V1)", 1);
        let inner = lifted("(V1->V1)", 1);
        assert_eq!(outer.domain_len().unwrap(), 4);
        assert_eq!(outer.size(), Some(16));
        // F(g) = g(1/2), evaluated on the identity-like lifted map.
        let at_half = FnPoint::native("at-half", |g| g.apply(&real(r(1, 2))));
        let g = FnPoint::Lifted {
            level: inner,
            phi: FiniteFn::new(vec![0, 1], 2).unwrap(),
        };
        assert_eq!(value(&at_half.apply(&g).unwrap()), r(1, 2));
        let e = eta(&outer, &at_half).unwrap();
        assert_eq!(e.factors().len(), 4);
        for seed in 0..10 {
            let phi = lift_sample(&outer, &at_half, seed).unwrap();
            let y = lift_apply(&outer, &phi, &g).unwrap();
            assert!(y.exact().is_some());
        }
    }

    #[test]
    fn product_level_marginals() {
        let b = line_bases();
        let l1 = interpret_type(&"V1".parse().unwrap(), &b, 1).unwrap();
        let p = product_selection(vec![l1.clone(), l1.clone()]).unwrap();
        let x = FnPoint::Tuple(vec![real(r(1, 2)), real(Rat::ZERO)]);
        let joint = p.mu(&x).unwrap();
        assert_eq!(joint.masses(), &[r(1, 2), Rat::ZERO, r(1, 2), Rat::ZERO]);
        let TypedLevel::Product(pl) = &p else {
            panic!()
        };
        assert_eq!(
            marginal(&joint, pl.radix(), 0).unwrap(),
            l1.mu(&real(r(1, 2))).unwrap()
        );
        // Single factors pass through; mismatched levels do not combine.
        assert_eq!(product_selection(vec![l1.clone()]).unwrap().size(), Some(2));
        let l2 = interpret_type(&"V1".parse().unwrap(), &b, 2).unwrap();
        assert!(product_selection(vec![l1, l2]).is_err());
    }

    #[test]
    fn dense_enumeration() {
        let b = line_bases();
        let reals = enumerate_dense(&"V1".parse().unwrap(), &b, 3).unwrap();
        assert_eq!(
            reals.iter().map(value).collect::<Vec<_>>(),
            vec![Rat::ZERO, Rat::ONE, r(-1, 1)]
        );
        assert!(enumerate_dense(&"(V1->V1)".parse().unwrap(), &b, 0)
            .unwrap()
            .is_empty());
        let fns = enumerate_dense(&"(V1->V1)".parse().unwrap(), &b, 12).unwrap();
        assert_eq!(fns.len(), 12);
        for f in &fns {
            for k in -3..=3 {
                assert!(f
                    .apply(&real(r(k, 2)))
                    .unwrap()
                    .as_point()
                    .unwrap()
                    .exact()
                    .is_some());
            }
        }
        let again = enumerate_dense(&"(V1->V1)".parse().unwrap(), &b, 12).unwrap();
        let show = |v: &[FnPoint]| v.iter().map(|f| f.describe(8)).collect::<Vec<_>>();
        assert_eq!(show(&fns), show(&again));
    }

    #[test]
    fn enumeration_over_finite_domain_terminates() {
        let finite = builtin_space("finite", &json!({"dist": [["0","1"],["1","0"]]})).unwrap();
        let b = Bases::from([(1, line()), (2, finite)]);
        // Levels 0 and 1 hold 1 and 4 maps.
        let all = enumerate_dense(&"(V2->V1)".parse().unwrap(), &b, 100).unwrap();
        assert_eq!(all.len(), 5);
    }

    proptest! {
        #[test]
        fn sampled_maps_respect_support(p in -8i64..8, q in 1i64..5, seed in any::<u64>()) {
            let l = lifted("(V1->V1)", 2);
            let f = FnPoint::identity();
            let x = real(r(p, q));
            let phi = lift_sample(&l, &f, seed).unwrap();
            prop_assert!(eta_mass(&l, &f, &phi).unwrap().is_positive());
            let mu = l.domain().mu(&x).unwrap();
            for a in mu.support() {
                let factor = lift_dist_factor(&l, &f, a).unwrap();
                prop_assert!(factor.mass(phi.apply(a)).is_positive());
            }
            let pushed = lift_pushforward(&l, &phi, &x).unwrap();
            let total: Rat = pushed.masses().iter().sum();
            prop_assert_eq!(total, Rat::ONE);
        }
    }
}
