//! Euclidean tours and asymptotic tour-length predictions.
//!
//! Tours are built by nearest-neighbor construction and then improved with
//! 2-opt and Or-opt moves restricted to short candidate lists, until no
//! improving move remains.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::PiecewiseUniformDensity;
use crate::geometry::Point;

/// Asymptotic constant of the shortest tour through `n` i.i.d. points.
pub const BHH_BETA: f64 = 0.7120;

/// Candidate-list size for local search.
const NEIGHBORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    order: Vec<usize>,
    length: f64,
}

impl Tour {
    pub fn from_order(points: &[Point], order: Vec<usize>) -> Self {
        let length = cycle_length(points, &order);
        Self { order, length }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Length of the closed cycle visiting `points` in `order`.
pub fn cycle_length(points: &[Point], order: &[usize]) -> f64 {
    let n = order.len();
    if n < 2 {
        return 0.0;
    }
    (0..n)
        .map(|i| points[order[i]].distance(points[order[(i + 1) % n]]))
        .sum()
}

/// Greedy nearest-neighbor order starting from point 0.
pub fn nearest_neighbor_order(points: &[Point]) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = 0;
    visited[0] = true;
    order.push(0);
    for _ in 1..n {
        let here = points[cur];
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, p) in points.iter().enumerate() {
            if !visited[j] {
                let d = (p.x - here.x).powi(2) + (p.y - here.y).powi(2);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
        }
        visited[best] = true;
        order.push(best);
        cur = best;
    }
    order
}

fn neighbor_lists(points: &[Point], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut out = Vec::with_capacity(n);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        scratch.clear();
        scratch.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (points[i].distance(points[j]), j)),
        );
        if scratch.len() > k {
            scratch.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
            scratch.truncate(k);
        }
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.push(scratch.iter().map(|&(_, j)| j).collect());
    }
    out
}

/// Array tour with inverse positions, for local search.
struct LocalSearch<'a> {
    points: &'a [Point],
    tour: Vec<usize>,
    pos: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    eps: f64,
}

impl<'a> LocalSearch<'a> {
    fn new(points: &'a [Point], order: Vec<usize>) -> Self {
        let n = points.len();
        let mut pos = vec![0; n];
        for (i, &c) in order.iter().enumerate() {
            pos[c] = i;
        }
        let scale = crate::geometry::BoundingBox::of_points(points.iter().copied())
            .map(|b| b.width().hypot(b.height()))
            .unwrap_or(1.0)
            .max(1e-300);
        Self {
            points,
            tour: order,
            pos,
            neighbors: neighbor_lists(points, NEIGHBORS.min(n - 1)),
            eps: 1e-12 * scale,
        }
    }

    fn d(&self, a: usize, b: usize) -> f64 {
        self.points[a].distance(self.points[b])
    }

    fn n(&self) -> usize {
        self.tour.len()
    }

    fn succ(&self, c: usize) -> usize {
        self.tour[(self.pos[c] + 1) % self.n()]
    }

    fn pred(&self, c: usize) -> usize {
        self.tour[(self.pos[c] + self.n() - 1) % self.n()]
    }

    /// Reverses the cyclic position range `from..=to`, or its complement when
    /// that is shorter (both give the same cycle).
    fn reverse(&mut self, from: usize, to: usize) {
        let n = self.n();
        let mut len = (to + n - from) % n + 1;
        let (mut i, mut j) = (from, to);
        if 2 * len > n {
            i = (to + 1) % n;
            j = (from + n - 1) % n;
            len = n - len;
        }
        for _ in 0..len / 2 {
            self.tour.swap(i, j);
            self.pos[self.tour[i]] = i;
            self.pos[self.tour[j]] = j;
            i = (i + 1) % n;
            j = (j + n - 1) % n;
        }
    }

    /// One first-improvement sweep of 2-opt over all cities.
    fn two_opt_pass(&mut self) -> bool {
        let n = self.n();
        let mut improved = false;
        for a in 0..n {
            // Successor side: replace (a, sa), (c, sc) with (a, c), (sa, sc).
            let mut moved = true;
            while moved {
                moved = false;
                let sa = self.succ(a);
                let d_asa = self.d(a, sa);
                for k in 0..self.neighbors[a].len() {
                    let c = self.neighbors[a][k];
                    let d_ac = self.d(a, c);
                    if d_ac >= d_asa {
                        break;
                    }
                    let sc = self.succ(c);
                    if c == sa || sc == a {
                        continue;
                    }
                    let gain = d_asa + self.d(c, sc) - d_ac - self.d(sa, sc);
                    if gain > self.eps {
                        self.reverse(self.pos[sa], self.pos[c]);
                        moved = true;
                        improved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                // Predecessor side: replace (pa, a), (pc, c) with (a, c), (pa, pc).
                let pa = self.pred(a);
                let d_apa = self.d(a, pa);
                for k in 0..self.neighbors[a].len() {
                    let c = self.neighbors[a][k];
                    let d_ac = self.d(a, c);
                    if d_ac >= d_apa {
                        break;
                    }
                    let pc = self.pred(c);
                    if c == pa || pc == a {
                        continue;
                    }
                    let gain = d_apa + self.d(c, pc) - d_ac - self.d(pa, pc);
                    if gain > self.eps {
                        self.reverse(self.pos[a], self.pos[pc]);
                        moved = true;
                        improved = true;
                        break;
                    }
                }
            }
        }
        improved
    }

    /// Moves the segment of `len` cities starting at position `start` to sit
    /// between `c` and its successor, optionally reversed.
    fn move_segment(&mut self, start: usize, len: usize, c: usize, reversed: bool) {
        let n = self.n();
        // Rotate so the segment occupies positions 0..len.
        let rotated: Vec<usize> = (0..n).map(|k| self.tour[(start + k) % n]).collect();
        let pc = (self.pos[c] + n - start) % n;
        debug_assert!(pc >= len && pc < n - 1);
        let mut next = Vec::with_capacity(n);
        next.extend_from_slice(&rotated[len..=pc]);
        if reversed {
            next.extend(rotated[..len].iter().rev());
        } else {
            next.extend_from_slice(&rotated[..len]);
        }
        next.extend_from_slice(&rotated[pc + 1..]);
        self.tour = next;
        for (i, &city) in self.tour.iter().enumerate() {
            self.pos[city] = i;
        }
    }

    /// One first-improvement sweep of Or-opt (segments of 1 to 3 cities).
    fn or_opt_pass(&mut self) -> bool {
        let n = self.n();
        if n < 5 {
            return false;
        }
        let mut improved = false;
        for seg_len in 1..=3usize {
            if n < seg_len + 3 {
                break;
            }
            for first in 0..n {
                let start = self.pos[first];
                let last = self.tour[(start + seg_len - 1) % n];
                let p = self.pred(first);
                let nx = self.succ(last);
                let removal = self.d(p, first) + self.d(last, nx) - self.d(p, nx);
                if removal <= self.eps {
                    continue;
                }
                let in_segment = |me: &Self, city: usize| (me.pos[city] + n - start) % n < seg_len;
                let mut best: Option<(f64, usize, bool)> = None;
                for &end in &[first, last] {
                    for k in 0..self.neighbors[end].len() {
                        let x = self.neighbors[end][k];
                        if self.d(end, x) >= removal {
                            break;
                        }
                        for c in [x, self.pred(x)] {
                            let e = self.succ(c);
                            if in_segment(self, c) || in_segment(self, e) || c == p {
                                continue;
                            }
                            let base = self.d(c, e);
                            let fwd = self.d(c, first) + self.d(last, e) - base;
                            let rev = self.d(c, last) + self.d(first, e) - base;
                            let (cost, reversed) = if fwd <= rev { (fwd, false) } else { (rev, true) };
                            let gain = removal - cost;
                            if gain > self.eps && best.is_none_or(|b| gain > b.0) {
                                best = Some((gain, c, reversed));
                            }
                        }
                    }
                }
                if let Some((_, c, reversed)) = best {
                    self.move_segment(start, seg_len, c, reversed);
                    improved = true;
                }
            }
        }
        improved
    }

    fn optimize(&mut self) {
        loop {
            while self.two_opt_pass() {}
            if !self.or_opt_pass() {
                break;
            }
        }
    }
}

/// Nearest neighbor followed by 2-opt only (no Or-opt).
pub fn two_opt_tour(points: &[Point]) -> Tour {
    if points.len() <= 3 {
        return Tour::from_order(points, (0..points.len()).collect());
    }
    let mut ls = LocalSearch::new(points, nearest_neighbor_order(points));
    while ls.two_opt_pass() {}
    Tour::from_order(points, ls.tour)
}

/// Heuristic closed tour through `points`.
pub fn build_tour(points: &[Point]) -> Tour {
    if points.len() <= 3 {
        return Tour::from_order(points, (0..points.len()).collect());
    }
    let mut ls = LocalSearch::new(points, nearest_neighbor_order(points));
    ls.optimize();
    Tour::from_order(points, ls.tour)
}

/// `beta * sqrt(n) * integral of sqrt(phi)`.
pub fn bhh_predicted_length(phi: &PiecewiseUniformDensity, n: usize) -> f64 {
    let root = phi
        .power_integral(0.5, None)
        .expect("whole-environment integral is infallible");
    BHH_BETA * (n as f64).sqrt() * root
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Reverse,
}

/// A tour together with a starting arc-length position and a direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourCursor {
    pub tour: Tour,
    pub start_offset: f64,
    pub direction: Direction,
}

pub fn random_cursor<R: Rng + ?Sized>(tour: Tour, rng: &mut R) -> TourCursor {
    let start_offset = if tour.length() > 0.0 {
        (rng.random::<f64>() * tour.length()).min(tour.length() * (1.0 - f64::EPSILON))
    } else {
        0.0
    };
    let direction = if rng.random::<bool>() {
        Direction::Forward
    } else {
        Direction::Reverse
    };
    TourCursor {
        tour,
        start_offset,
        direction,
    }
}

/// Timed execution of a cursor's tour.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    /// Point on the cycle where the walk starts and ends.
    pub start: Point,
    /// `(point index, location, time since start)` in visiting order.
    pub visits: Vec<(usize, Point, f64)>,
    /// Time to traverse the full cycle.
    pub duration: f64,
}

pub fn walk(cursor: &TourCursor, points: &[Point], speed: f64) -> Walk {
    assert!(speed > 0.0, "speed must be positive");
    let order = cursor.tour.order();
    let n = order.len();
    if n == 0 {
        return Walk {
            start: Point::default(),
            visits: Vec::new(),
            duration: 0.0,
        };
    }
    let total = cursor.tour.length();
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        cum.push(acc);
        acc += points[order[i]].distance(points[order[(i + 1) % n]]);
    }
    let s = cursor.start_offset;
    let edge = cum.partition_point(|&c| c <= s).saturating_sub(1);
    let a = points[order[edge]];
    let b = points[order[(edge + 1) % n]];
    let edge_len = a.distance(b);
    let start = if edge_len > 0.0 {
        a.lerp(b, ((s - cum[edge]) / edge_len).clamp(0.0, 1.0))
    } else {
        a
    };
    let wrap = |x: f64| {
        if total <= 0.0 {
            0.0
        } else {
            let r = x.rem_euclid(total);
            if (total - r) <= 1e-12 * total { 0.0 } else { r }
        }
    };
    let mut visits: Vec<(usize, Point, f64)> = (0..n)
        .map(|i| {
            let dist = match cursor.direction {
                Direction::Forward => wrap(cum[i] - s),
                Direction::Reverse => wrap(s - cum[i]),
            };
            (order[i], points[order[i]], dist / speed)
        })
        .collect();
    visits.sort_by(|x, y| x.2.total_cmp(&y.2).then(x.0.cmp(&y.0)));
    Walk {
        start,
        visits,
        duration: total / speed,
    }
}
