//! The countable rational Urysohn space, built one extension at a time.

mod approx;
mod bookkeeping;

use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

pub use approx::{realize_approx, ureal_dist, UReal, ANCHOR_LOOKAHEAD};
pub use bookkeeping::{target_values, BookkeepingCursor};

use crate::error::{Error, Result};
use crate::metric::{admissibility_violation, extension_row, ExtensionRequest, FinMetric};
use crate::numeric::{Rat, SpaceTag};

/// A point of the rational Urysohn space: an index into the builder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UPoint(pub usize);

impl UPoint {
    pub fn index(self) -> usize {
        self.0
    }
}

/// One realized request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub request: ExtensionRequest,
    pub point: UPoint,
    pub reused: bool,
}

/// The growing rational space together with its request log and bookkeeping
/// cursor. Every operation keeps `space` a metric and every logged request
/// exactly satisfied.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UrysohnBuilder {
    space: FinMetric,
    log: Vec<LogEntry>,
    cursor: BookkeepingCursor,
}

/// A builder shared between owners that take turns mutating it.
pub type SharedBuilder = Arc<Mutex<UrysohnBuilder>>;

impl Default for UrysohnBuilder {
    fn default() -> Self {
        UrysohnBuilder::new(None)
    }
}

impl UrysohnBuilder {
    /// An empty builder whose bookkeeping never exceeds `height_limit`.
    pub fn new(height_limit: Option<u32>) -> UrysohnBuilder {
        UrysohnBuilder {
            space: FinMetric::empty(),
            log: Vec::new(),
            cursor: BookkeepingCursor::new(height_limit),
        }
    }

    pub fn tag() -> SpaceTag {
        SpaceTag::new("U")
    }

    pub fn into_shared(self) -> SharedBuilder {
        Arc::new(Mutex::new(self))
    }

    pub fn space(&self) -> &FinMetric {
        &self.space
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn cursor(&self) -> &BookkeepingCursor {
        &self.cursor
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = UPoint> {
        self.space.points().map(UPoint)
    }

    pub fn d(&self, a: UPoint, b: UPoint) -> &Rat {
        self.space.d(a.0, b.0)
    }

    pub fn check_point(&self, p: UPoint) -> Result<UPoint> {
        if p.0 < self.len() {
            Ok(p)
        } else {
            Err(Error::UnknownPoint(p.0))
        }
    }

    /// The first point of the space, creating it if necessary.
    pub fn seed(&mut self) -> UPoint {
        if self.is_empty() {
            self.realize_rational(&ExtensionRequest::empty())
                .expect("empty request on empty space")
        } else {
            UPoint(0)
        }
    }

    /// An existing point meeting every constraint of `req` exactly.
    pub fn find_exact(&self, req: &ExtensionRequest) -> Option<UPoint> {
        let mut pairs = req.pairs();
        let Some((u0, a0)) = pairs.next() else {
            return if self.is_empty() {
                None
            } else {
                Some(UPoint(0))
            };
        };
        let row = self.space.row(u0);
        'candidates: for (y, d) in row.iter().enumerate() {
            if d != a0 {
                continue;
            }
            for (u, a) in req.pairs().skip(1) {
                if self.space.d(u, y) != a {
                    continue 'candidates;
                }
            }
            return Some(UPoint(y));
        }
        None
    }

    /// Realizes `req` exactly: reuses a point meeting all constraints, or
    /// adds a fresh one through the extension formula.
    pub fn realize_rational(&mut self, req: &ExtensionRequest) -> Result<UPoint> {
        if let Some(err) = admissibility_violation(&self.space, req)? {
            return Err(err);
        }
        let (point, reused) = match self.find_exact(req) {
            Some(p) => (p, true),
            None => {
                let row = extension_row(&self.space, req);
                (UPoint(self.space.push_point(row)), false)
            }
        };
        self.log.push(LogEntry {
            request: req.clone(),
            point,
            reused,
        });
        Ok(point)
    }

    /// Realizes the next `steps` admissible requests of the bookkeeping
    /// enumeration. Inadmissible requests are skipped and do not count.
    /// Returns the number of steps actually taken, which is short only when
    /// a bounded height has nothing left to visit.
    pub fn run_bookkeeping(&mut self, steps: usize) -> usize {
        let mut done = 0;
        while done < steps {
            let Some(req) = self.cursor.next_request(self.len()) else {
                break;
            };
            match admissibility_violation(&self.space, &req) {
                Ok(None) => {
                    self.realize_rational(&req).expect("admissible");
                    done += 1;
                }
                Ok(Some(_)) => {}
                Err(e) => unreachable!("cursor produced unknown point: {e}"),
            }
        }
        done
    }

    /// Runs bookkeeping until the space holds at least `count` points.
    pub fn ensure_points(&mut self, count: usize) -> Result<()> {
        while self.len() < count {
            if self.run_bookkeeping(1) == 0 {
                return Err(Error::TooLarge(format!(
                    "bookkeeping exhausted at {} points, {count} requested",
                    self.len()
                )));
            }
        }
        Ok(())
    }

    /// Serialized form: the metric, the request log and the cursor.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "points": self.space.points().collect::<Vec<_>>(),
            "dist": self.space.matrix(),
            "log": self.log,
            "cursor": self.cursor,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<UrysohnBuilder> {
        #[derive(Deserialize)]
        struct Stored {
            dist: Vec<Vec<Rat>>,
            #[serde(default)]
            log: Vec<LogEntry>,
            cursor: Option<BookkeepingCursor>,
        }
        let stored: Stored = serde_json::from_value(value.clone())?;
        let space = FinMetric::try_new(stored.dist)?;
        let mut cursor = stored
            .cursor
            .unwrap_or_else(|| BookkeepingCursor::new(None));
        cursor.rehydrate();
        Ok(UrysohnBuilder {
            space,
            log: stored.log,
            cursor,
        })
    }
}

/// A closed ball `B(center, radius)` in the built space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UBall {
    pub center: UPoint,
    pub radius: Rat,
}

impl UBall {
    pub fn new(center: UPoint, radius: Rat) -> UBall {
        UBall { center, radius }
    }
}

/// The first pair `(i, j)` breaking `r_i - r_j <= d(a_i, a_j) <= r_i + r_j`.
pub fn ball_condition_failure(b: &UrysohnBuilder, balls: &[UBall]) -> Option<(usize, usize)> {
    for i in 0..balls.len() {
        for j in 0..balls.len() {
            let d = b.d(balls[i].center, balls[j].center);
            let (ri, rj) = (&balls[i].radius, &balls[j].radius);
            if ri - rj > *d || *d > ri + rj {
                return Some((i, j));
            }
        }
    }
    None
}

/// Decides whether the closed balls meet in the completion, via the pairwise
/// condition `r_i - r_j <= d(a_i, a_j) <= r_i + r_j`. For families where no
/// ball lies in the interior of another, this is equivalent to a nonempty
/// intersection.
pub fn balls_intersect(b: &UrysohnBuilder, balls: &[UBall]) -> bool {
    ball_condition_failure(b, balls).is_none()
}

/// The sphere request `d(y, a_i) = r_i`, with repeated balls merged.
pub fn sphere_request(b: &UrysohnBuilder, balls: &[UBall]) -> Result<ExtensionRequest> {
    let mut base = Vec::new();
    let mut targets: Vec<Rat> = Vec::new();
    for ball in balls {
        b.check_point(ball.center)?;
        if !ball.radius.is_positive() {
            return Err(Error::InvalidRequest(format!(
                "radius {} is not positive",
                ball.radius
            )));
        }
        match base.iter().position(|&c| c == ball.center.0) {
            Some(k) if targets[k] == ball.radius => {}
            Some(_) => {
                return Err(Error::NoWitness(format!(
                    "two spheres around {} with different radii",
                    ball.center.0
                )))
            }
            None => {
                base.push(ball.center.0);
                targets.push(ball.radius.clone());
            }
        }
    }
    ExtensionRequest::new(base, targets)
}

/// Realizes a point on every sphere `d(y, a_i) = r_i`, hence in every ball.
pub fn witness_intersection(b: &mut UrysohnBuilder, balls: &[UBall]) -> Result<UPoint> {
    if let Some((i, j)) = ball_condition_failure(b, balls) {
        return Err(Error::NoWitness(format!(
            "balls {i} and {j}: r = {}, {} with center distance {}",
            balls[i].radius,
            balls[j].radius,
            b.d(balls[i].center, balls[j].center)
        )));
    }
    let req = sphere_request(b, balls)?;
    b.realize_rational(&req)
}

/// Locks a shared builder, recovering from poisoning.
pub fn lock(shared: &SharedBuilder) -> MutexGuard<'_, UrysohnBuilder> {
    shared.lock().unwrap_or_else(|e| e.into_inner())
}
