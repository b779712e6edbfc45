//! Self-contained invariant suites with exact witnesses for every failure.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::domain::{
    delta_extract, ideal_represents, least_ideal_stream, upward_closure_violations, IdealApprox,
    Tri,
};
use crate::error::{Error, Result};
use crate::lift::{
    eta, eta_mass, interpret_type, lift_apply, lift_dist_factor, lift_pushforward,
    lift_sample_with, Bases, FiniteFn, FnPoint, LiftedLevel, TypedLevel,
};
use crate::metric::{extension_admissible, project_admissible, validate_metric, ExtensionRequest};
use crate::numeric::{FastCauchy, Rat};
use crate::select::{chi_square, metric_selection_level, Dist};
use crate::spaces::{all_pairs, builtin_space, embed_into_u, verify_isometry, Elem, Point, Space};
use crate::urysohn::{
    ball_condition_failure, balls_intersect, lock, sphere_request, witness_intersection, UBall,
    UPoint, UrysohnBuilder,
};

pub const SUITES: [&str; 7] = [
    "metric-axioms",
    "saturation",
    "observation",
    "selection",
    "lift",
    "domain-rep",
    "embedding",
];

/// At most this many witnesses are kept per assertion.
const MAX_WITNESSES: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub seed: u64,
    /// Bookkeeping steps for suites that build a space first.
    pub steps: usize,
    pub height: u32,
    /// Random cases per assertion.
    pub trials: usize,
    pub precision: u32,
    /// Corrupts one radius in the observation suite.
    pub inject_fault: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            seed: 0,
            steps: 100,
            height: 4,
            trials: 100,
            precision: 16,
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub checked: usize,
    pub failures: usize,
    pub witnesses: Vec<Value>,
}

impl Assertion {
    fn new(name: &str) -> Assertion {
        Assertion {
            name: name.into(),
            checked: 0,
            failures: 0,
            witnesses: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, witness: impl FnOnce() -> Value) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(witness());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: CheckConfig,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
}

pub fn run_suite(name: &str, cfg: &CheckConfig) -> Result<SuiteReport> {
    let assertions = match name {
        "metric-axioms" => metric_axioms(cfg)?,
        "saturation" => saturation(cfg)?,
        "observation" => observation(cfg)?,
        "selection" => selection(cfg)?,
        "lift" => lift(cfg)?,
        "domain-rep" => domain_rep(cfg)?,
        "embedding" => embedding(cfg)?,
        other => return Err(Error::InvalidRequest(format!("unknown suite {other:?}"))),
    };
    Ok(SuiteReport {
        suite: name.into(),
        config: cfg.clone(),
        passed: assertions.iter().all(Assertion::passed),
        assertions,
    })
}

fn built(cfg: &CheckConfig) -> (UrysohnBuilder, usize) {
    let mut b = UrysohnBuilder::new(Some(cfg.height));
    let taken = b.run_bookkeeping(cfg.steps);
    (b, taken)
}

fn metric_axioms(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let (b, taken) = built(cfg);
    let mut steps = Assertion::new("bookkeeping-steps");
    steps.check(
        taken == cfg.steps,
        || json!({ "requested": cfg.steps, "taken": taken }),
    );

    let mut axioms = Assertion::new("validate-metric");
    let report = validate_metric(b.space());
    axioms.checked = report.points;
    axioms.failures = report.violations.len();
    axioms.witnesses = report
        .violations
        .iter()
        .take(MAX_WITNESSES)
        .map(|v| serde_json::to_value(v).expect("violations serialize"))
        .collect();

    let mut log = Assertion::new("log-distances");
    for (k, entry) in b.log().iter().enumerate() {
        for (u, t) in entry.request.pairs() {
            let d = b.d(UPoint(u), entry.point);
            log.check(
                d == t,
                || json!({ "entry": k, "base": u, "target": t, "actual": d }),
            );
        }
    }

    let mut replay = Assertion::new("json-round-trip");
    let back = UrysohnBuilder::from_json(&b.to_json())?;
    replay.check(
        back.space() == b.space(),
        || json!({ "points": b.len(), "restored": back.len() }),
    );
    Ok(vec![steps, axioms, log, replay])
}

/// Uniform targets in `(0, 2]` with denominator 8.
fn random_targets(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rat> {
    (0..k)
        .map(|_| Rat::new(rng.random_range(1..=16), 8))
        .collect()
}

fn saturation(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let (mut b, _) = built(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut exact = Assertion::new("exact-realization");
    let mut rejected = Assertion::new("inadmissible-rejected");
    for trial in 0..cfg.trials {
        let n = b.len();
        let k = rng.random_range(1..=n.min(4));
        let mut base = sample_indices(&mut rng, n, k).into_vec();
        base.sort_unstable();
        // Rejection sampling, falling back to the nearest admissible targets.
        let mut targets = None;
        for _ in 0..64 {
            let t = random_targets(&mut rng, k);
            let req = ExtensionRequest::new(base.clone(), t.clone())?;
            if extension_admissible(b.space(), &req)? {
                targets = Some(t);
                break;
            }
            let before = b.len();
            let outcome = b.realize_rational(&req);
            rejected.check(
                matches!(outcome, Err(Error::Inadmissible { .. })) && b.len() == before,
                || json!({ "trial": trial, "base": &base, "targets": &t }),
            );
        }
        let targets = match targets {
            Some(t) => t,
            None => {
                let prefs = random_targets(&mut rng, k);
                project_admissible(b.space(), &base, &prefs)
            }
        };
        let req = ExtensionRequest::new(base.clone(), targets.clone())?;
        let y = b.realize_rational(&req)?;
        let actual: Vec<Rat> = base.iter().map(|&u| b.d(UPoint(u), y).clone()).collect();
        exact.check(
            actual == targets,
            || json!({ "trial": trial, "base": &base, "targets": &targets, "actual": &actual }),
        );
    }
    let mut axioms = Assertion::new("metric-after-realization");
    for v in validate_metric(b.space()).violations {
        axioms.check(false, || {
            serde_json::to_value(&v).expect("violations serialize")
        });
    }
    axioms.checked = b.len();
    Ok(vec![exact, rejected, axioms])
}

fn observation(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let (mut b, _) = built(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut iff_witness = Assertion::new("condition-iff-witness");
    let mut on_spheres = Assertion::new("witness-on-spheres");
    let mut iff_admissible = Assertion::new("condition-iff-sphere-admissible");
    for family in 0..cfg.trials {
        let n = b.len();
        let inject = cfg.inject_fault && family == 0;
        let k = if inject { 2 } else { rng.random_range(1..=4) };
        let balls: Vec<UBall> = (0..k)
            .map(|_| {
                UBall::new(
                    UPoint(rng.random_range(0..n)),
                    Rat::new(rng.random_range(1..=16), 8),
                )
            })
            .collect();
        let condition = balls_intersect(&b, &balls);
        let admissible = match sphere_request(&b, &balls) {
            Ok(req) => extension_admissible(b.space(), &req)?,
            Err(Error::NoWitness(_)) => false,
            Err(e) => return Err(e),
        };
        iff_admissible.check(
            condition == admissible,
            || json!({ "family": family, "balls": &balls, "condition": condition }),
        );
        let mut tried = balls.clone();
        if inject {
            let d = b.d(tried[0].center, tried[1].center).clone();
            tried[1].radius = d + &tried[0].radius + Rat::ONE;
        }
        match witness_intersection(&mut b, &tried) {
            Ok(w) => {
                iff_witness.check(condition, || json!({ "family": family, "balls": &tried }));
                for ball in &tried {
                    let d = b.d(w, ball.center).clone();
                    on_spheres.check(
                        d == ball.radius,
                        || json!({ "family": family, "witness": w, "ball": ball, "distance": d }),
                    );
                }
            }
            Err(Error::NoWitness(_)) => {
                iff_witness.check(!condition, || {
                    let pair = ball_condition_failure(&b, &tried).expect("condition fails");
                    let (i, j) = pair;
                    json!({
                        "family": family,
                        "pair": [i, j],
                        "radii": [&tried[i].radius, &tried[j].radius],
                        "center_distance": b.d(tried[i].center, tried[j].center),
                        "claimed_radii": [&balls[i].radius, &balls[j].radius],
                    })
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(vec![iff_witness, on_spheres, iff_admissible])
}

fn coord(p: &Point) -> Result<Rat> {
    match p.exact() {
        Some(Elem::Coords(v)) if v.len() == 1 => Ok(v[0].clone()),
        _ => Err(Error::Evaluation("expected an exact real".into())),
    }
}

fn real(space: &Space, q: Rat) -> Point {
    FastCauchy::constant(space.tag(), Elem::Coords(vec![q]))
}

fn selection(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    const TOP: u32 = 40;
    let space = builtin_space("real-line", &json!({}))?;
    let levels = (0..=TOP)
        .map(|n| metric_selection_level(space.clone(), n))
        .collect::<Result<Vec<_>>>()?;
    let dense: Vec<Rat> = (0..=TOP as usize)
        .map(|i| match space.dense_elem(i)? {
            Elem::Coords(v) => Ok(v[0].clone()),
            other => Err(Error::UnsupportedElement {
                space: space.tag().to_string(),
                detail: format!("{other:?}"),
            }),
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sums = Assertion::new("sums-to-one");
    let mut formula = Assertion::new("masses-match-formula");
    let mut support = Assertion::new("support-matches-formula");
    for _ in 0..cfg.trials {
        let x = Rat::new(rng.random_range(-64..=64), rng.random_range(1..=16));
        let point = real(&space, x.clone());
        for (n, level) in levels.iter().enumerate() {
            let mu = level.mu(&point)?;
            let total: Rat = mu.masses().iter().sum();
            sums.check(
                total == Rat::ONE,
                || json!({ "x": &x, "n": n, "total": total }),
            );
            // Exact oracle from the coordinates themselves.
            let a = &dense[..=n];
            let dists: Vec<Rat> = a.iter().map(|c| (&x - c).abs()).collect();
            let mut delta = Rat::pow2_neg(n as u32);
            for i in 0..a.len() {
                for j in (i + 1)..a.len() {
                    delta = delta.min((&a[i] - &a[j]).abs());
                }
            }
            let reach = dists.iter().min().expect("nonempty") + &delta;
            let weights: Vec<Rat> = dists.iter().map(|d| reach.saturating_sub(d)).collect();
            let expected = Dist::normalized(weights)?;
            formula.check(
                mu == expected,
                || json!({ "x": &x, "n": n, "got": &mu, "expected": &expected }),
            );
            let want: Vec<usize> = (0..a.len()).filter(|&i| dists[i] < reach).collect();
            support.check(
                mu.support() == want,
                || json!({ "x": &x, "n": n, "support": mu.support(), "expected": want }),
            );
        }
    }
    let mut hand = Assertion::new("two-point-midpoint");
    let half = levels[1].mu(&real(&space, Rat::new(1, 2)))?;
    hand.check(
        half.masses() == [Rat::new(1, 2), Rat::new(1, 2)],
        || json!({ "got": &half }),
    );
    Ok(vec![sums, formula, support, hand])
}

/// The real line whose dense sequence starts `0, 1/2, 1`.
pub fn three_point_line() -> Result<Space> {
    builtin_space("real-line", &json!({ "prefix": ["0", "1/2", "1"] }))
}

/// `V1 -> V1` at level 2 over [`three_point_line`]: `A_2 = C_2 = {0, 1/2, 1}`.
pub fn three_point_lift() -> Result<std::sync::Arc<LiftedLevel>> {
    let bases = Bases::from([(1, three_point_line()?)]);
    match interpret_type(&"(V1->V1)".parse()?, &bases, 2)? {
        TypedLevel::Arrow(l) => Ok(l),
        _ => unreachable!("arrow types interpret as lifted levels"),
    }
}

/// A map on the line whose factors on `{0, 1/2, 1}` are not all point masses.
pub fn spread_map(space: &Space) -> FnPoint {
    let space = space.clone();
    FnPoint::native("x/2+1/4", move |x| {
        let v = coord(x.as_point()?)?;
        Ok(FnPoint::Base(real(
            &space,
            v * Rat::new(1, 2) + Rat::new(1, 4),
        )))
    })
}

/// `sum_a mu(x)(a) * c_{phi(a)}`, computed directly from coordinates.
fn hand_combination(level: &LiftedLevel, phi: &FiniteFn, x: &FnPoint) -> Result<Rat> {
    let mu = level.domain().mu(x)?;
    let mut out = Rat::ZERO;
    for (a, m) in mu.masses().iter().enumerate() {
        out += m * coord(&level.codomain().nu(phi.apply(a))?)?;
    }
    Ok(out)
}

fn lift(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let space = three_point_line()?;
    let level = three_point_lift()?;
    let (a_len, c_len) = (level.domain_len()?, level.codomain_len());
    let maps = [FnPoint::identity(), spread_map(&space)];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut total = Assertion::new("eta-sums-to-one");
    let mut brute = Assertion::new("eta-matches-enumeration");
    let mut convex = Assertion::new("apply-matches-convex-combination");
    let grid: Vec<Rat> = [
        (0, 1),
        (1, 4),
        (1, 3),
        (1, 2),
        (2, 3),
        (1, 1),
        (-1, 2),
        (3, 2),
    ]
    .iter()
    .map(|&(p, q)| Rat::new(p, q))
    .collect();
    for (fi, f) in maps.iter().enumerate() {
        // Each factor straight from the codomain selection.
        let lambdas = (0..a_len)
            .map(|a| {
                let y = f.apply(&level.domain().nu(a)?)?;
                level.codomain().mu(y.as_point()?)
            })
            .collect::<Result<Vec<_>>>()?;
        let count = c_len.pow(a_len as u32);
        let mut sum = Rat::ZERO;
        for k in 0..count {
            let mut table = vec![0; a_len];
            let mut rest = k;
            for slot in table.iter_mut().rev() {
                *slot = rest % c_len;
                rest /= c_len;
            }
            let mass = table
                .iter()
                .enumerate()
                .fold(Rat::ONE, |acc, (a, &c)| acc * lambdas[a].mass(c).clone());
            let phi = FiniteFn::new(table, c_len)?;
            let got = eta_mass(&level, f, &phi)?;
            brute.check(
                got == mass,
                || json!({ "map": fi, "phi": phi.table(), "got": &got, "expected": &mass }),
            );
            sum += &mass;
            if mass.is_positive() {
                for q in &grid {
                    let x = FnPoint::Base(real(&space, q.clone()));
                    let got = coord(&lift_apply(&level, &phi, &x)?)?;
                    let want = hand_combination(&level, &phi, &x)?;
                    convex.check(got == want, || {
                        json!({ "map": fi, "phi": phi.table(), "x": q, "got": got, "expected": want })
                    });
                }
            }
        }
        total.check(sum == Rat::ONE, || json!({ "map": fi, "sum": sum }));
    }

    let mut fit = Assertion::new("sampler-chi-square");
    for (fi, f) in maps.iter().enumerate() {
        let joint = eta(&level, f)?.materialize()?;
        let mut counts = vec![0u64; joint.len()];
        for _ in 0..10_000 {
            counts[lift_sample_with(&level, f, &mut rng)?.index()?] += 1;
        }
        let support = joint.support();
        if support.len() == 1 {
            fit.check(
                counts[support[0]] == 10_000,
                || json!({ "map": fi, "counts": counts }),
            );
            continue;
        }
        let stat = chi_square(&joint, &counts);
        let bound = ChiSquared::new((support.len() - 1) as f64)
            .map_err(|e| Error::Evaluation(e.to_string()))?
            .inverse_cdf(0.999);
        fit.check(
            stat < bound,
            || json!({ "map": fi, "statistic": stat, "bound": bound, "counts": counts }),
        );
    }

    let mut propagation = Assertion::new("support-propagation");
    let mut conservation = Assertion::new("pushforward-conservation");
    for trial in 0..cfg.trials {
        let f = &maps[trial % maps.len()];
        let phi = lift_sample_with(&level, f, &mut rng)?;
        let q = Rat::new(rng.random_range(-8..=16), rng.random_range(1..=8));
        let x = FnPoint::Base(real(&space, q.clone()));
        for a in level.domain().mu(&x)?.support() {
            let factor = lift_dist_factor(&level, f, a)?;
            propagation.check(factor.mass(phi.apply(a)).is_positive(), || {
                json!({ "trial": trial, "x": &q, "a": a, "phi": phi.table(), "factor": &factor })
            });
        }
        let pushed = lift_pushforward(&level, &phi, &x)?;
        let sum: Rat = pushed.masses().iter().sum();
        conservation.check(sum == Rat::ONE, || json!({ "trial": trial, "sum": sum }));
    }
    Ok(vec![total, brute, convex, fit, propagation, conservation])
}

fn domain_rep(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    const STAGES: u32 = 17;
    let space = builtin_space("real-line", &json!({}))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut round_trip = Assertion::new("round-trip");
    let mut upward = Assertion::new("upward-closure");
    let mut own = Assertion::new("represents-own-point");
    let mut unique = Assertion::new("hausdorff-uniqueness");
    let eps = Rat::pow2_neg(STAGES - 1);
    for trial in 0..cfg.trials {
        let q = Rat::new(rng.random_range(-24..=24), rng.random_range(1..=8));
        let x = real(&space, q.clone());
        let stream = least_ideal_stream(space.as_ref(), &x, STAGES, 1 << 14)?;
        let back = delta_extract(space.as_ref(), &stream)?;
        for n in 0..STAGES {
            let Elem::Coords(v) = back.approx(n) else {
                return Err(Error::Evaluation(
                    "extracted point has no coordinates".into(),
                ));
            };
            let err = (&v[0] - &q).abs();
            round_trip.check(
                err <= Rat::pow2_neg(n),
                || json!({ "trial": trial, "x": &q, "n": n, "approx": &v[0], "error": err }),
            );
        }
        for (n, base) in stream.iter().enumerate() {
            let bad =
                upward_closure_violations(space.as_ref(), base, &stream[n + 1..], &x, STAGES + 4)?;
            upward.check(
                bad.is_empty(),
                || json!({ "trial": trial, "x": &q, "stage": n, "balls": bad }),
            );
        }
        let ideal = IdealApprox::unchecked(stream);
        let mine = ideal_represents(space.as_ref(), &ideal, &x, &eps, STAGES + 4)?;
        own.check(
            mine == Tri::Yes,
            || json!({ "trial": trial, "x": &q, "answer": mine }),
        );
        let y_q = &q + Rat::pow2_neg(rng.random_range(1..=12));
        let y = real(&space, y_q.clone());
        let other = ideal_represents(space.as_ref(), &ideal, &y, &eps, STAGES + 4)?;
        unique.check(
            other == Tri::No,
            || json!({ "trial": trial, "x": &q, "y": y_q, "answer": other }),
        );
    }
    Ok(vec![round_trip, upward, own, unique])
}

fn embedding(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let mut out = Vec::new();
    let line = builtin_space(
        "real-line",
        &json!({ "prefix": ["0", "1/4", "1/2", "3/4", "1"] }),
    )?;
    let path = builtin_space(
        "finite",
        &json!({ "dist": [
            ["0", "1", "2", "3"],
            ["1", "0", "1", "2"],
            ["2", "1", "0", "1"],
            ["3", "2", "1", "0"],
        ]}),
    )?;
    for (name, space, len, exact) in [
        ("real-line-prefix", line, 5, false),
        ("finite-path", path, 4, true),
    ] {
        let builder = UrysohnBuilder::new(Some(cfg.height)).into_shared();
        let e = embed_into_u(space, builder.clone(), len, cfg.precision)?;
        let report = verify_isometry(&e, &all_pairs(len), cfg.precision)?;
        let mut a = Assertion::new(name);
        for entry in &report.entries {
            let ok = if exact {
                entry.discrepancy.is_zero()
            } else {
                entry.ok
            };
            a.check(ok, || {
                serde_json::to_value(entry).expect("entries serialize")
            });
        }
        let b = lock(&builder);
        for (i, img) in e.images().iter().enumerate() {
            let bad = img.chain_violation(&b);
            a.check(
                bad.is_none(),
                || json!({ "image": i, "chain_violation": bad }),
            );
        }
        a.check(
            validate_metric(b.space()).is_metric(),
            || json!({ "builder": "not a metric" }),
        );
        out.push(a);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CheckConfig {
        CheckConfig {
            trials: 10,
            steps: 40,
            ..CheckConfig::default()
        }
    }

    #[test]
    fn every_suite_passes_at_small_scale() {
        for suite in SUITES {
            let report = run_suite(suite, &small()).unwrap();
            assert!(
                report.passed,
                "{}",
                serde_json::to_string_pretty(&report).unwrap()
            );
        }
    }

    #[test]
    fn injected_radius_is_caught() {
        let cfg = CheckConfig {
            inject_fault: true,
            ..small()
        };
        let report = run_suite("observation", &cfg).unwrap();
        assert!(!report.passed);
        let failed = report.assertions.iter().find(|a| !a.passed()).unwrap();
        assert_eq!(failed.name, "condition-iff-witness");
        assert!(failed.witnesses[0].get("pair").is_some());
    }

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_suite("nope", &small()).is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let a = serde_json::to_string(&run_suite("saturation", &small()).unwrap()).unwrap();
        let b = serde_json::to_string(&run_suite("saturation", &small()).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
