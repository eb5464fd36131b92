//! Boustrophedon strip coverage (SWEEP-SERVICE) and its detour rule.
//!
//! A region is cut into horizontal bands of height `2r`, top to bottom. Each
//! band is swept along its horizontal bisector, alternating direction, so
//! every point of the region passes within `r` of the path.

use serde::{Deserialize, Serialize};

use crate::geometry::{ConvexPolygon, Point, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    /// Oriented in the sweep direction.
    pub bisector: Segment,
    pub index: usize,
    pub y_low: f64,
    pub y_high: f64,
}

impl Strip {
    /// `+1` when sweeping toward increasing x.
    pub fn direction(&self) -> f64 {
        if self.bisector.end.x >= self.bisector.start.x {
            1.0
        } else {
            -1.0
        }
    }

    /// Signed distance travelled along the bisector to reach abscissa `x`.
    pub fn along(&self, x: f64) -> f64 {
        (x - self.bisector.start.x) * self.direction()
    }

    pub fn length(&self) -> f64 {
        self.bisector.length()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub strips: Vec<Strip>,
    pub connectors: Vec<Segment>,
    pub total_length: f64,
    pub r: f64,
    y_top: f64,
}

impl SweepPlan {
    pub fn start(&self) -> Point {
        self.strips[0].bisector.start
    }

    pub fn end(&self) -> Point {
        self.strips[self.strips.len() - 1].bisector.end
    }

    pub fn bisector_length(&self) -> f64 {
        self.strips.iter().map(Strip::length).sum()
    }

    /// Index of the band containing `q` (clamped to the plan's range).
    pub fn strip_of(&self, q: Point) -> usize {
        let k = ((self.y_top - q.y) / (2.0 * self.r)).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(self.strips.len() - 1)
        }
    }
}

/// Horizontal extent of `poly ∩ {y_low <= y <= y_high}`.
fn x_extent_in_band(poly: &ConvexPolygon, y_low: f64, y_high: f64) -> Option<(f64, f64)> {
    let vs = poly.vertices();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut take = |x: f64| {
        lo = lo.min(x);
        hi = hi.max(x);
    };
    for i in 0..vs.len() {
        let a = vs[i];
        let b = vs[(i + 1) % vs.len()];
        if a.y >= y_low && a.y <= y_high {
            take(a.x);
        }
        for y in [y_low, y_high] {
            if (a.y - y) * (b.y - y) < 0.0 {
                take(a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y));
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

pub fn plan_sweep(region: &ConvexPolygon, r: f64) -> SweepPlan {
    assert!(r > 0.0, "sensing radius must be positive");
    let bb = region.bounding_box();
    let height = bb.height();
    let count = ((height / (2.0 * r)) - 1e-9).ceil().max(1.0) as usize;
    let mut strips = Vec::with_capacity(count);
    for k in 0..count {
        let y_high = bb.max.y - 2.0 * r * k as f64;
        let y_low = (y_high - 2.0 * r).max(bb.min.y);
        let y_mid = 0.5 * (y_low + y_high);
        let (x0, x1) = x_extent_in_band(region, y_low, y_high)
            .unwrap_or((region.centroid().x, region.centroid().x));
        let (sx, ex) = if k % 2 == 0 { (x0, x1) } else { (x1, x0) };
        strips.push(Strip {
            bisector: Segment::new(Point::new(sx, y_mid), Point::new(ex, y_mid)),
            index: k,
            y_low,
            y_high,
        });
    }
    let connectors: Vec<Segment> = strips
        .windows(2)
        .map(|w| Segment::new(w[0].bisector.end, w[1].bisector.start))
        .collect();
    let total_length = strips.iter().map(Strip::length).sum::<f64>()
        + connectors.iter().map(Segment::length).sum::<f64>();
    SweepPlan {
        strips,
        connectors,
        total_length,
        r,
        y_top: bb.max.y,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepLegKind {
    Bisector(usize),
    Connector(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedLeg {
    pub segment: Segment,
    pub t_start: f64,
    pub t_end: f64,
    pub kind: SweepLegKind,
}

/// Legs of the plan in execution order, timed from zero, without detours.
pub fn sweep_leg_stream(plan: &SweepPlan, speed: f64) -> Vec<TimedLeg> {
    assert!(speed > 0.0, "speed must be positive");
    let mut legs = Vec::with_capacity(2 * plan.strips.len());
    let mut t = 0.0;
    for (k, strip) in plan.strips.iter().enumerate() {
        if k > 0 {
            let c = plan.connectors[k - 1];
            let dt = c.length() / speed;
            legs.push(TimedLeg {
                segment: c,
                t_start: t,
                t_end: t + dt,
                kind: SweepLegKind::Connector(k - 1),
            });
            t += dt;
        }
        let dt = strip.length() / speed;
        legs.push(TimedLeg {
            segment: strip.bisector,
            t_start: t,
            t_end: t + dt,
            kind: SweepLegKind::Bisector(k),
        });
        t += dt;
    }
    legs
}

/// The detour rule: a detected target is serviced iff it lies in the strip
/// being swept and not behind the agent. `agent_pos` is on that bisector.
pub fn is_serviceable(plan: &SweepPlan, current: usize, agent_pos: Point, target: Point) -> bool {
    let strip = &plan.strips[current];
    plan.strip_of(target) == current && strip.along(target.x) >= strip.along(agent_pos.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_five_strips() {
        let plan = plan_sweep(&ConvexPolygon::unit_square(), 0.1);
        assert_eq!(plan.strips.len(), 5);
        assert!((plan.bisector_length() - 5.0).abs() < 1e-12);
        // Four vertical connectors of length 2r each.
        assert!((plan.total_length - 5.8).abs() < 1e-12);
        assert!(plan.total_length <= 2.0 * 0.1 * 25.0 + 4.0);
        assert_eq!(plan.start(), Point::new(0.0, 0.9));
        assert!(plan.end().distance(Point::new(1.0, 0.1)) < 1e-12);
    }

    #[test]
    fn serpentine_order() {
        let plan = plan_sweep(&ConvexPolygon::unit_square(), 0.1);
        for (k, s) in plan.strips.iter().enumerate() {
            assert_eq!(s.direction(), if k % 2 == 0 { 1.0 } else { -1.0 });
            assert_eq!(s.index, k);
        }
        for (k, c) in plan.connectors.iter().enumerate() {
            assert_eq!(c.start, plan.strips[k].bisector.end);
            assert_eq!(c.end, plan.strips[k + 1].bisector.start);
        }
    }

    #[test]
    fn narrow_last_strip() {
        let plan = plan_sweep(&ConvexPolygon::rectangle(0.0, 0.0, 1.0, 0.5).unwrap(), 0.1);
        assert_eq!(plan.strips.len(), 3);
        let last = &plan.strips[2];
        assert!((last.y_high - 0.1).abs() < 1e-12);
        assert!((last.y_low - 0.0).abs() < 1e-12);
        assert!((last.bisector.start.y - 0.05).abs() < 1e-12);
    }

    #[test]
    fn triangle_bisectors_span_band_extent() {
        let tri = ConvexPolygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        let plan = plan_sweep(&tri, 0.25);
        assert_eq!(plan.strips.len(), 2);
        // Top band y in [0.5, 1]: widest at y = 0.5, where x reaches 0.5.
        let top = &plan.strips[0];
        assert!((top.bisector.start.x - 0.0).abs() < 1e-12);
        assert!((top.bisector.end.x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn legs_are_contiguous() {
        let plan = plan_sweep(&ConvexPolygon::unit_square(), 0.1);
        let legs = sweep_leg_stream(&plan, 2.0);
        assert_eq!(legs.len(), 9);
        for w in legs.windows(2) {
            assert_eq!(w[0].segment.end, w[1].segment.start);
            assert!((w[0].t_end - w[1].t_start).abs() < 1e-15);
        }
        assert!((legs.last().unwrap().t_end - plan.total_length / 2.0).abs() < 1e-12);
    }

    #[test]
    fn serviceability() {
        let plan = plan_sweep(&ConvexPolygon::unit_square(), 0.1);
        let agent = Point::new(0.4, 0.9);
        assert!(is_serviceable(&plan, 0, agent, Point::new(0.6, 0.95)));
        assert!(is_serviceable(&plan, 0, agent, Point::new(0.4, 0.85)));
        assert!(!is_serviceable(&plan, 0, agent, Point::new(0.6, 0.75)));
        assert!(!is_serviceable(&plan, 0, agent, Point::new(0.3, 0.9)));
        // Strip 1 runs right to left.
        let agent = Point::new(0.4, 0.7);
        assert!(is_serviceable(&plan, 1, agent, Point::new(0.2, 0.7)));
        assert!(!is_serviceable(&plan, 1, agent, Point::new(0.5, 0.7)));
    }

    #[test]
    fn strip_of_clamps() {
        let plan = plan_sweep(&ConvexPolygon::unit_square(), 0.1);
        assert_eq!(plan.strip_of(Point::new(0.5, 1.0)), 0);
        assert_eq!(plan.strip_of(Point::new(0.5, 0.0)), 4);
        assert_eq!(plan.strip_of(Point::new(0.5, 0.55)), 2);
    }
}
