//! Finite rational metric spaces and one-point extensions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Rat;

/// A finite metric space with rational distances. Points are the ids
/// `0..len()`, assigned in creation order.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FinMetric {
    dist: Vec<Vec<Rat>>,
}

impl FinMetric {
    pub fn empty() -> FinMetric {
        FinMetric::default()
    }

    /// Wraps a square matrix without checking the metric axioms; see
    /// [`validate_metric`].
    pub fn from_matrix(dist: Vec<Vec<Rat>>) -> Result<FinMetric> {
        let n = dist.len();
        if let Some(i) = dist.iter().position(|row| row.len() != n) {
            return Err(Error::MalformedMetric(format!(
                "row {i} has {} entries, expected {n}",
                dist[i].len()
            )));
        }
        Ok(FinMetric { dist })
    }

    /// Like [`FinMetric::from_matrix`] but rejects non-metrics.
    pub fn try_new(dist: Vec<Vec<Rat>>) -> Result<FinMetric> {
        let m = FinMetric::from_matrix(dist)?;
        let report = validate_metric(&m);
        match report.violations.first() {
            None => Ok(m),
            Some(v) => Err(Error::MalformedMetric(v.to_string())),
        }
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn points(&self) -> std::ops::Range<usize> {
        0..self.dist.len()
    }

    pub fn d(&self, i: usize, j: usize) -> &Rat {
        &self.dist[i][j]
    }

    pub fn get(&self, i: usize, j: usize) -> Result<&Rat> {
        let n = self.len();
        if i >= n {
            return Err(Error::UnknownPoint(i));
        }
        if j >= n {
            return Err(Error::UnknownPoint(j));
        }
        Ok(&self.dist[i][j])
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.dist[i]
    }

    pub fn matrix(&self) -> &[Vec<Rat>] {
        &self.dist
    }

    /// Appends a point with the given distances to all existing points.
    /// No validation happens here.
    pub(crate) fn push_point(&mut self, to_existing: Vec<Rat>) -> usize {
        debug_assert_eq!(to_existing.len(), self.len());
        let id = self.len();
        for (row, d) in self.dist.iter_mut().zip(&to_existing) {
            row.push(d.clone());
        }
        let mut own = to_existing;
        own.push(Rat::ZERO);
        self.dist.push(own);
        id
    }

    /// The subspace on `ids`, renumbered in the given order.
    pub fn restrict(&self, ids: &[usize]) -> Result<FinMetric> {
        for &i in ids {
            if i >= self.len() {
                return Err(Error::UnknownPoint(i));
            }
        }
        let dist = ids
            .iter()
            .map(|&i| ids.iter().map(|&j| self.dist[i][j].clone()).collect())
            .collect();
        Ok(FinMetric { dist })
    }
}

/// One metric axiom instance that fails.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "axiom", rename_all = "kebab-case")]
pub enum Violation {
    Diagonal {
        i: usize,
        value: Rat,
    },
    Identity {
        i: usize,
        j: usize,
        value: Rat,
    },
    Symmetry {
        i: usize,
        j: usize,
        dij: Rat,
        dji: Rat,
    },
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        dik: Rat,
        via: Rat,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Diagonal { i, value } => write!(f, "d({i},{i}) = {value} != 0"),
            Violation::Identity { i, j, value } => {
                write!(f, "d({i},{j}) = {value} is not positive")
            }
            Violation::Symmetry { i, j, dij, dji } => {
                write!(f, "d({i},{j}) = {dij} != d({j},{i}) = {dji}")
            }
            Violation::Triangle { i, j, k, dik, via } => {
                write!(f, "d({i},{k}) = {dik} > d({i},{j}) + d({j},{k}) = {via}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricReport {
    pub points: usize,
    pub violations: Vec<Violation>,
}

impl MetricReport {
    pub fn is_metric(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every violated axiom instance. Exhaustive: O(N³).
pub fn validate_metric(m: &FinMetric) -> MetricReport {
    let n = m.len();
    let mut violations = Vec::new();
    for i in 0..n {
        if !m.dist[i][i].is_zero() {
            violations.push(Violation::Diagonal {
                i,
                value: m.dist[i][i].clone(),
            });
        }
        for j in (i + 1)..n {
            let (dij, dji) = (&m.dist[i][j], &m.dist[j][i]);
            if dij != dji {
                violations.push(Violation::Symmetry {
                    i,
                    j,
                    dij: dij.clone(),
                    dji: dji.clone(),
                });
            }
            if !dij.is_positive() {
                violations.push(Violation::Identity {
                    i,
                    j,
                    value: dij.clone(),
                });
            }
        }
    }
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let dik = &m.dist[i][k];
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                let via = &m.dist[i][j] + &m.dist[j][k];
                if *dik > via {
                    violations.push(Violation::Triangle {
                        i,
                        j,
                        k,
                        dik: dik.clone(),
                        via,
                    });
                }
            }
        }
    }
    MetricReport {
        points: n,
        violations,
    }
}

/// Demand for a new point `y` with `d(base[i], y) = targets[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtensionRequest {
    base: Vec<usize>,
    targets: Vec<Rat>,
}

impl ExtensionRequest {
    pub fn new(base: Vec<usize>, targets: Vec<Rat>) -> Result<ExtensionRequest> {
        if base.len() != targets.len() {
            return Err(Error::InvalidRequest(format!(
                "{} base points but {} targets",
                base.len(),
                targets.len()
            )));
        }
        for (k, &u) in base.iter().enumerate() {
            if base[..k].contains(&u) {
                return Err(Error::InvalidRequest(format!("base point {u} repeated")));
            }
        }
        if let Some(t) = targets.iter().find(|t| !t.is_positive()) {
            return Err(Error::InvalidRequest(format!("target {t} is not positive")));
        }
        Ok(ExtensionRequest { base, targets })
    }

    pub fn empty() -> ExtensionRequest {
        ExtensionRequest {
            base: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn base(&self) -> &[usize] {
        &self.base
    }

    pub fn targets(&self) -> &[Rat] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, &Rat)> {
        self.base.iter().copied().zip(&self.targets)
    }

    /// Bookkeeping height: the largest numerator, denominator or base size.
    pub fn height(&self) -> u64 {
        let mut h = self.base.len().max(1) as u64;
        for t in &self.targets {
            let (p, q) = t
                .as_small()
                .map(|(p, q)| (p.unsigned_abs(), q as u64))
                .unwrap_or((u64::MAX, u64::MAX));
            h = h.max(p).max(q);
        }
        h
    }

    /// Drops the `k`-th constraint.
    pub fn without(&self, k: usize) -> ExtensionRequest {
        let mut r = self.clone();
        r.base.remove(k);
        r.targets.remove(k);
        r
    }
}

/// The first pair of base points whose targets contradict the metric axioms.
pub fn admissibility_violation(m: &FinMetric, req: &ExtensionRequest) -> Result<Option<Error>> {
    for &u in req.base() {
        if u >= m.len() {
            return Err(Error::UnknownPoint(u));
        }
    }
    let k = req.len();
    for a in 0..k {
        for b in (a + 1)..k {
            let (ui, uj) = (req.base[a], req.base[b]);
            let (ai, aj) = (&req.targets[a], &req.targets[b]);
            let d = m.d(ui, uj);
            if (ai - aj).abs() > *d || *d > ai + aj {
                return Ok(Some(Error::Inadmissible {
                    u_i: ui,
                    u_j: uj,
                    a_i: ai.clone(),
                    a_j: aj.clone(),
                    d: d.clone(),
                }));
            }
        }
    }
    Ok(None)
}

/// True iff `|a_i - a_j| <= d(u_i, u_j) <= a_i + a_j` for all base pairs.
pub fn extension_admissible(m: &FinMetric, req: &ExtensionRequest) -> Result<bool> {
    Ok(admissibility_violation(m, req)?.is_none())
}

/// Distances from a new point realizing `req` to every point of `m`:
/// the targets on the base, `min_i d(x, u_i) + a_i` elsewhere.
pub(crate) fn extension_row(m: &FinMetric, req: &ExtensionRequest) -> Vec<Rat> {
    m.points()
        .map(|x| {
            if let Some(k) = req.base.iter().position(|&u| u == x) {
                return req.targets[k].clone();
            }
            req.pairs()
                .map(|(u, a)| m.d(x, u) + a)
                .min()
                .expect("nonempty base")
        })
        .collect()
}

/// Adds a fresh point realizing an admissible request.
pub fn urysohn_extend(m: &FinMetric, req: &ExtensionRequest) -> Result<FinMetric> {
    if let Some(err) = admissibility_violation(m, req)? {
        return Err(err);
    }
    if req.is_empty() && !m.is_empty() {
        return Err(Error::InvalidRequest(
            "empty base over a nonempty space leaves the new point unconstrained".into(),
        ));
    }
    let mut out = m.clone();
    out.push_point(extension_row(m, req));
    Ok(out)
}

/// Raises `prefs` as little as possible, coordinatewise, so that the targets
/// satisfy `|t_i - t_j| <= d_ij <= t_i + t_j` over `points`.
///
/// First the smallest 1-Lipschitz majorant `max_j (g_j - d_ij)` is taken,
/// then every coordinate is lifted by half of the worst remaining sum
/// defect. Both steps keep 1-Lipschitz continuity, and the result is at most
/// `lipschitz defect + sum defect / 2` above `prefs`.
pub fn project_admissible(m: &FinMetric, points: &[usize], prefs: &[Rat]) -> Vec<Rat> {
    debug_assert_eq!(points.len(), prefs.len());
    let k = points.len();
    let mut raised: Vec<Rat> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        prefs[i].clone()
                    } else {
                        &prefs[j] - m.d(points[i], points[j])
                    }
                })
                .max()
                .expect("k > 0")
        })
        .collect();
    let mut defect = Rat::ZERO;
    for i in 0..k {
        for j in (i + 1)..k {
            let gap = m.d(points[i], points[j]) - &raised[i] - &raised[j];
            if gap > defect {
                defect = gap;
            }
        }
    }
    if defect.is_positive() {
        let lift = defect * Rat::new(1, 2);
        for t in &mut raised {
            *t += &lift;
        }
    }
    raised
}
