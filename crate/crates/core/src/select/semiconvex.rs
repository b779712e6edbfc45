use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use super::Dist;
use crate::error::{Error, Result};
use crate::metric::{admissibility_violation, ExtensionRequest};
use crate::numeric::Rat;
use crate::spaces::{Combine, Elem, Space};
use crate::urysohn::{lock, SharedBuilder, UPoint, UrysohnBuilder};

/// A combination operator `h(m)` on distributions over finitely many nodes.
pub enum SemiconvexOp {
    /// Exact convex combination of coordinate vectors.
    Banach { nodes: Vec<Vec<Rat>> },
    /// Realization in U through the max-norm coordinates of the nodes.
    Urysohn(UrysohnCombine),
}

impl fmt::Debug for SemiconvexOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemiconvexOp::Banach { nodes } => {
                f.debug_struct("Banach").field("nodes", nodes).finish()
            }
            SemiconvexOp::Urysohn(u) => f.debug_struct("Urysohn").field("nodes", &u.nodes).finish(),
        }
    }
}

pub fn banach_semiconvex(nodes: Vec<Vec<Rat>>) -> Result<SemiconvexOp> {
    let dim = nodes
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidRequest("a combination needs at least one node".into()))?;
    if nodes.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidRequest(
            "nodes of different dimensions".into(),
        ));
    }
    Ok(SemiconvexOp::Banach { nodes })
}

pub fn urysohn_semiconvex(builder: SharedBuilder, nodes: Vec<UPoint>) -> Result<SemiconvexOp> {
    if nodes.is_empty() {
        return Err(Error::InvalidRequest(
            "a combination needs at least one node".into(),
        ));
    }
    {
        let b = lock(&builder);
        for &v in &nodes {
            b.check_point(v)?;
        }
    }
    Ok(SemiconvexOp::Urysohn(UrysohnCombine {
        builder,
        nodes,
        realized: Mutex::new(Realized::default()),
    }))
}

/// The operator for `nodes` of `space`, if the space has one.
pub fn semiconvex_for(space: &Space, nodes: &[Elem]) -> Result<SemiconvexOp> {
    match space.combine() {
        Combine::None => Err(Error::UnsupportedType(format!(
            "space {} has no combination operator",
            space.tag()
        ))),
        Combine::Linear => banach_semiconvex(
            nodes
                .iter()
                .map(|e| match e {
                    Elem::Coords(v) => Ok(v.clone()),
                    Elem::Dense(i) => match space.dense_elem(*i)? {
                        Elem::Coords(v) => Ok(v),
                        other => Err(Error::UnsupportedElement {
                            space: space.tag().to_string(),
                            detail: format!("{other:?}"),
                        }),
                    },
                })
                .collect::<Result<_>>()?,
        ),
        Combine::Urysohn(b) => urysohn_semiconvex(
            b,
            nodes
                .iter()
                .map(|e| match e {
                    Elem::Dense(i) => Ok(UPoint(*i)),
                    other => Err(Error::UnsupportedElement {
                        space: "U".into(),
                        detail: format!("{other:?}"),
                    }),
                })
                .collect::<Result<_>>()?,
        ),
    }
}

impl SemiconvexOp {
    pub fn len(&self) -> usize {
        match self {
            SemiconvexOp::Banach { nodes } => nodes.len(),
            SemiconvexOp::Urysohn(u) => u.nodes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn combine(&self, m: &Dist) -> Result<Elem> {
        if m.len() != self.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} masses for {} nodes",
                m.len(),
                self.len()
            )));
        }
        match self {
            SemiconvexOp::Banach { nodes } => {
                let dim = nodes[0].len();
                let mut out = vec![Rat::ZERO; dim];
                for (v, w) in nodes.iter().zip(m.masses()) {
                    if w.is_zero() {
                        continue;
                    }
                    for (o, c) in out.iter_mut().zip(v) {
                        *o += w * c;
                    }
                }
                Ok(Elem::Coords(out))
            }
            SemiconvexOp::Urysohn(u) => Ok(Elem::Dense(u.combine(m)?.0)),
        }
    }
}

#[derive(Default)]
struct Realized {
    by_w: HashMap<Vec<Rat>, UPoint>,
    order: Vec<(Vec<Rat>, UPoint)>,
}

/// `h(m) = psi(sum_i m_i phi(v_i))`, with `phi(v) = (d(v, v_1), ..., d(v, v_n))`
/// in max norm. A new point is placed at distance `|w - phi(v_i)|` from each
/// node and `|w - w'|` from each point realized before for some `w'`, so the
/// realized points stay isometric to their vectors.
pub struct UrysohnCombine {
    builder: SharedBuilder,
    nodes: Vec<UPoint>,
    realized: Mutex<Realized>,
}

fn sup_dist(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .max()
        .unwrap_or(Rat::ZERO)
}

impl UrysohnCombine {
    pub fn nodes(&self) -> &[UPoint] {
        &self.nodes
    }

    fn phi(&self, b: &UrysohnBuilder, v: UPoint) -> Vec<Rat> {
        self.nodes.iter().map(|&u| b.d(v, u).clone()).collect()
    }

    /// `w = sum_i m_i phi(v_i)`.
    pub fn vector(&self, m: &Dist) -> Vec<Rat> {
        let b = lock(&self.builder);
        let mut w = vec![Rat::ZERO; self.nodes.len()];
        for (&v, mass) in self.nodes.iter().zip(m.masses()) {
            if mass.is_zero() {
                continue;
            }
            for (o, d) in w.iter_mut().zip(self.phi(&b, v)) {
                *o += mass * &d;
            }
        }
        w
    }

    pub fn combine(&self, m: &Dist) -> Result<UPoint> {
        let w = self.vector(m);
        let mut realized = self.realized.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(&u) = realized.by_w.get(&w) {
            return Ok(u);
        }
        let mut b = lock(&self.builder);
        let mut base: Vec<usize> = Vec::new();
        let mut targets: Vec<Rat> = Vec::new();
        let mut hit: Option<UPoint> = None;
        let mut add = |p: UPoint, t: Rat, base: &mut Vec<usize>, targets: &mut Vec<Rat>| {
            if t.is_zero() {
                hit.get_or_insert(p);
            } else if !base.contains(&p.0) {
                base.push(p.0);
                targets.push(t);
            }
        };
        for &v in &self.nodes {
            let t = sup_dist(&w, &self.phi(&b, v));
            add(v, t, &mut base, &mut targets);
        }
        for (w_old, u) in &realized.order {
            add(*u, sup_dist(&w, w_old), &mut base, &mut targets);
        }
        let u = match hit {
            Some(p) => p,
            None => {
                let req = ExtensionRequest::new(base, targets)?;
                if let Some(err) = admissibility_violation(b.space(), &req)? {
                    unreachable!("max-norm targets are always admissible: {err}");
                }
                b.realize_rational(&req)?
            }
        };
        drop(b);
        realized.by_w.insert(w.clone(), u);
        realized.order.push((w, u));
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::validate_metric;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rat {
        Rat::new(p, q)
    }

    #[test]
    fn banach_examples() {
        let line = banach_semiconvex(vec![vec![Rat::ZERO], vec![Rat::ONE]]).unwrap();
        assert_eq!(
            line.combine(&Dist::point_mass(2, 1)).unwrap(),
            Elem::Coords(vec![Rat::ONE])
        );
        assert_eq!(
            line.combine(&Dist::uniform(2)).unwrap(),
            Elem::Coords(vec![r(1, 2)])
        );
        let plane = banach_semiconvex(vec![
            vec![Rat::ZERO, Rat::ZERO],
            vec![r(2, 1), Rat::ZERO],
            vec![Rat::ZERO, r(2, 1)],
        ])
        .unwrap();
        assert_eq!(
            plane.combine(&Dist::uniform(3)).unwrap(),
            Elem::Coords(vec![r(2, 3), r(2, 3)])
        );
    }

    fn pair_at_two() -> (SharedBuilder, UPoint, UPoint) {
        let mut b = UrysohnBuilder::new(None);
        let p = b.seed();
        let q = b
            .realize_rational(&ExtensionRequest::new(vec![p.0], vec![r(2, 1)]).unwrap())
            .unwrap();
        (b.into_shared(), p, q)
    }

    #[test]
    fn urysohn_examples() {
        let (b, p, q) = pair_at_two();
        let op = urysohn_semiconvex(b.clone(), vec![p, q]).unwrap();
        assert_eq!(
            op.combine(&Dist::point_mass(2, 0)).unwrap(),
            Elem::Dense(p.0)
        );
        let mid = match op.combine(&Dist::uniform(2)).unwrap() {
            Elem::Dense(i) => UPoint(i),
            _ => unreachable!(),
        };
        let g = lock(&b);
        assert_eq!(*g.d(mid, p), Rat::ONE);
        assert_eq!(*g.d(mid, q), Rat::ONE);
        drop(g);
        assert_eq!(op.combine(&Dist::uniform(2)).unwrap(), Elem::Dense(mid.0));

        let single = urysohn_semiconvex(b.clone(), vec![q]).unwrap();
        assert_eq!(
            single.combine(&Dist::point_mass(1, 0)).unwrap(),
            Elem::Dense(q.0)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn banach_is_affine(
            a in prop::collection::vec(0i64..5, 3),
            c in prop::collection::vec(0i64..5, 3),
            lam in 0i64..=4,
        ) {
            prop_assume!(a.iter().sum::<i64>() > 0 && c.iter().sum::<i64>() > 0);
            let op = banach_semiconvex(vec![vec![r(1, 1), r(0, 1)], vec![r(-2, 3), r(5, 1)], vec![r(7, 2), r(-1, 1)]]).unwrap();
            let m1 = Dist::normalized(a.iter().map(|&x| Rat::from_integer(x)).collect()).unwrap();
            let m2 = Dist::normalized(c.iter().map(|&x| Rat::from_integer(x)).collect()).unwrap();
            let l = r(lam, 4);
            let mix = Dist::new(
                m1.masses().iter().zip(m2.masses()).map(|(x, y)| &l * x + (Rat::ONE - &l) * y).collect(),
            ).unwrap();
            let (Elem::Coords(h1), Elem::Coords(h2), Elem::Coords(hm)) =
                (op.combine(&m1).unwrap(), op.combine(&m2).unwrap(), op.combine(&mix).unwrap())
            else { unreachable!() };
            for k in 0..2 {
                prop_assert_eq!(&hm[k], &(&l * &h1[k] + (Rat::ONE - &l) * &h2[k]));
            }
        }

        #[test]
        fn urysohn_combine_stays_near_support(
            steps in 6usize..30,
            picks in prop::collection::vec(0usize..1000, 2..5),
            draws in prop::collection::vec(prop::collection::vec(0i64..4, 5), 1..5),
        ) {
            let mut b = UrysohnBuilder::new(Some(3));
            b.run_bookkeeping(steps);
            let n = b.len();
            let mut nodes: Vec<UPoint> = picks.iter().map(|i| UPoint(i % n)).collect();
            nodes.dedup();
            let shared = b.into_shared();
            let op = urysohn_semiconvex(shared.clone(), nodes.clone()).unwrap();
            for w in draws {
                let weights: Vec<Rat> = w.iter().take(nodes.len()).map(|&x| Rat::from_integer(x)).collect();
                prop_assume!(weights.iter().any(Rat::is_positive));
                let m = Dist::normalized(weights).unwrap();
                let Elem::Dense(u) = op.combine(&m).unwrap() else { unreachable!() };
                let g = lock(&shared);
                let supp = m.support();
                for &a in &supp {
                    let bound = supp.iter().map(|&c| g.d(nodes[a], nodes[c]).clone()).max().unwrap();
                    prop_assert!(*g.d(UPoint(u), nodes[a]) <= bound);
                }
            }
            prop_assert!(validate_metric(lock(&shared).space()).is_metric());
        }
    }
}
