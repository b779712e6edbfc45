//! Canonical enumeration of rational one-point extension requests.
//!
//! Work is organised in rounds. Round `r` freezes the point count `P_r` seen
//! when it starts and the height bound `h_r = min(r, H)`. It then visits, in
//! increasing height `g = 1..=h_r`, every request whose base is a subset of
//! `0..P_r` of size at most `g` and whose targets are reduced fractions
//! `p/q` with `p, q <= g`, skipping requests already covered by round
//! `r - 1`. Within one height, subsets come in lexicographic order and target
//! tuples in lexicographic order of the sorted target list.

use serde::{Deserialize, Serialize};

use crate::metric::ExtensionRequest;
use crate::numeric::Rat;

/// Reduced fractions `p/q` with `1 <= p, q <= g`, ascending.
pub fn target_values(g: u32) -> Vec<Rat> {
    let mut out: Vec<Rat> = Vec::new();
    for q in 1..=g as i64 {
        for p in 1..=g as i64 {
            if num_integer::gcd(p, q) == 1 {
                out.push(Rat::new(p, q));
            }
        }
    }
    out.sort();
    out
}

fn request_height(size: usize, targets: &[Rat]) -> u32 {
    let mut h = size.max(1) as u32;
    for t in targets {
        let (p, q) = t.as_small().expect("small target");
        h = h.max(p as u32).max(q as u32);
    }
    h
}

/// Cursor into the request enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookkeepingCursor {
    /// Current round; 0 before the first request is drawn.
    pub round: u32,
    /// `P_r`, points frozen for this round.
    pub frozen_points: usize,
    /// `P_{r-1}` and `h_{r-1}`: the domain already covered.
    pub prev_points: usize,
    pub prev_height: u32,
    /// `h_r`.
    pub round_height: u32,
    /// Height `g` being visited.
    pub height: u32,
    /// Base size being visited.
    pub size: usize,
    /// Current subset, strictly increasing ids.
    pub subset: Vec<usize>,
    /// Current indices into `target_values(height)`.
    pub digits: Vec<usize>,
    /// Optional global height bound `H`.
    pub height_limit: Option<u32>,
    #[serde(skip)]
    values: Vec<Rat>,
}

impl BookkeepingCursor {
    pub fn new(height_limit: Option<u32>) -> BookkeepingCursor {
        BookkeepingCursor {
            round: 0,
            frozen_points: 0,
            prev_points: 0,
            prev_height: 0,
            round_height: 0,
            height: 0,
            size: 0,
            subset: Vec::new(),
            digits: Vec::new(),
            height_limit,
            values: Vec::new(),
        }
    }

    fn bounded(&self, h: u32) -> u32 {
        match self.height_limit {
            Some(lim) => h.min(lim),
            None => h,
        }
    }

    /// Whether round `r`'s predecessor already visited the request.
    fn covered_before(&self, req: &ExtensionRequest) -> bool {
        req.base().iter().all(|&u| u < self.prev_points)
            && request_height(req.len(), req.targets()) <= self.prev_height
    }

    /// True if the request belongs to the domain of the current round.
    pub fn in_round_domain(&self, req: &ExtensionRequest) -> bool {
        let h = request_height(req.len(), req.targets());
        let in_frozen = req.base().iter().all(|&u| u < self.frozen_points);
        let base_ok = if req.is_empty() {
            self.frozen_points == 0
        } else {
            in_frozen
        };
        base_ok && h <= self.round_height && !self.covered_before(req)
    }

    /// The round by whose end `req` is guaranteed to have been visited, given
    /// that all its base points exist among the first `point_count` points.
    /// `None` if its height exceeds the global bound.
    pub fn scheduled_round(&self, req: &ExtensionRequest, point_count: usize) -> Option<u32> {
        let h = request_height(req.len(), req.targets());
        if let Some(lim) = self.height_limit {
            if h > lim {
                return None;
            }
        }
        let max_id = req.base().iter().copied().max();
        debug_assert!(max_id.is_none_or(|m| m < point_count));
        let fits_now = max_id.is_none_or(|m| m < self.frozen_points);
        if self.round > 0 && fits_now && h <= self.round_height {
            return Some(self.round);
        }
        // Every later round freezes at least `point_count` points, and rounds
        // numbered `>= h` reach height `h`.
        Some((self.round + 1).max(h))
    }

    fn start_round(&mut self, point_count: usize) {
        self.prev_points = self.frozen_points;
        self.prev_height = self.round_height;
        self.round += 1;
        self.frozen_points = point_count;
        self.round_height = self.bounded(self.round);
        self.height = 1;
        self.size = if point_count == 0 { 0 } else { 1 };
        self.reset_height_state();
    }

    fn reset_height_state(&mut self) {
        self.values = target_values(self.height);
        self.subset = (0..self.size).collect();
        self.digits = vec![0; self.size];
    }

    fn size_cap(&self) -> usize {
        if self.frozen_points == 0 {
            0
        } else {
            (self.height as usize).min(self.frozen_points)
        }
    }

    /// Whether the cursor currently points at a valid enumeration slot.
    fn slot_valid(&self) -> bool {
        self.round > 0 && self.height <= self.round_height && self.size <= self.size_cap()
    }

    /// The slot's request counts only at its exact height within the round.
    fn emits(&self, req: &ExtensionRequest) -> bool {
        request_height(req.len(), req.targets()) == self.height.max(1) && self.in_round_domain(req)
    }

    fn current(&self) -> ExtensionRequest {
        let targets = self
            .digits
            .iter()
            .map(|&d| self.values[d].clone())
            .collect();
        ExtensionRequest::new(self.subset.clone(), targets).expect("canonical request")
    }

    /// Moves to the next slot in the current round; false when exhausted.
    fn step(&mut self) -> bool {
        // Next target tuple.
        for pos in (0..self.digits.len()).rev() {
            if self.digits[pos] + 1 < self.values.len() {
                self.digits[pos] += 1;
                for d in &mut self.digits[pos + 1..] {
                    *d = 0;
                }
                return true;
            }
        }
        // Next subset of the same size.
        let n = self.frozen_points;
        let s = self.subset.len();
        for pos in (0..s).rev() {
            if self.subset[pos] < n - s + pos {
                self.subset[pos] += 1;
                for k in pos + 1..s {
                    self.subset[k] = self.subset[k - 1] + 1;
                }
                self.digits = vec![0; s];
                return true;
            }
        }
        // Next size, then next height.
        if self.size < self.size_cap() {
            self.size += 1;
            self.reset_height_state();
            return true;
        }
        if self.height < self.round_height {
            self.height += 1;
            self.size = if self.frozen_points == 0 { 0 } else { 1 };
            self.reset_height_state();
            return true;
        }
        false
    }

    /// Draws the next request, starting new rounds as needed. Returns `None`
    /// when a whole round passes without anything new to visit, which only
    /// happens once a bounded height has been exhausted.
    pub fn next_request(&mut self, point_count: usize) -> Option<ExtensionRequest> {
        if self.round == 0 {
            self.start_round(point_count);
            if self.slot_valid() {
                let req = self.current();
                if self.emits(&req) {
                    return Some(req);
                }
            }
        }
        let mut idle_rounds = 0;
        loop {
            if !self.step() {
                let before = (self.frozen_points, self.round_height);
                self.start_round(point_count);
                if (self.frozen_points, self.round_height) == before {
                    idle_rounds += 1;
                    if idle_rounds > 1 {
                        return None;
                    }
                }
                if !self.slot_valid() {
                    continue;
                }
            }
            let req = self.current();
            if self.emits(&req) {
                return Some(req);
            }
        }
    }

    /// Every request of a round with the given frozen bounds, in
    /// visiting order, without touching a builder.
    pub fn dry_run_round(
        prev_points: usize,
        prev_height: u32,
        frozen_points: usize,
        round_height: u32,
    ) -> Vec<ExtensionRequest> {
        let mut c = BookkeepingCursor::new(None);
        c.round = 1;
        c.prev_points = prev_points;
        c.prev_height = prev_height;
        c.frozen_points = frozen_points;
        c.round_height = round_height;
        c.height = 1;
        c.size = if frozen_points == 0 { 0 } else { 1 };
        c.reset_height_state();
        let mut out = Vec::new();
        if !c.slot_valid() {
            return out;
        }
        loop {
            let req = c.current();
            if c.emits(&req) {
                out.push(req);
            }
            if !c.step() {
                return out;
            }
        }
    }

    /// Restores the cached target list after deserialization.
    pub(crate) fn rehydrate(&mut self) {
        if self.round > 0 {
            self.values = target_values(self.height);
        }
    }
}
