//! Continuous-time simulation of one run.
//!
//! Agents never interact: each owns the targets that appear in its region of
//! dominance and its behavior depends only on those. Every agent is therefore
//! simulated on its own, from a private copy of the arrival stream, and the
//! recorded motion legs are merged afterwards to compute first-detection
//! times by any agent. Within an agent, time advances from event to event
//! (arrival, leg end, service), so waiting times carry no discretization
//! error.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::Strip;
use crate::density::PiecewiseUniformDensity;
use crate::geometry::{disk_entry_time, BoundingBox, ConvexPolygon, Point, Segment};
use crate::partition::{DominanceRegions, DEFAULT_SLACK};
use crate::policies::{erd_wrap, Activity, AgentPlan, KChoice, PolicyError, PolicyKind, PolicyState, TileRef};
use crate::stochastic::{agent_stream, ArrivalStream, SeedSpec, TargetArrival, ARRIVAL_STREAM};
use crate::tsp::{build_tour, random_cursor, walk, BHH_BETA};

pub const DEFAULT_WARMUP: f64 = 0.2;
pub const DEFAULT_QUEUE_CAP: usize = 1_000_000;
/// Minimum number of policy cycles covered by the horizon.
pub const MIN_PHASES: f64 = 10.0;
pub const BATCHES: usize = 10;
/// Fewer post-warm-up services than this flags the estimate.
pub const LOW_CONFIDENCE_COUNT: usize = 100;
/// Two-sided 95% Student t quantile with `BATCHES - 1` degrees of freedom.
pub const T_QUANTILE_95: f64 = 2.262;
/// Simulated time allowed for draining, as a multiple of the horizon.
pub const DRAIN_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub policy: PolicyKind,
    pub phi: PiecewiseUniformDensity,
    pub lambda: f64,
    pub speed: f64,
    pub radius: f64,
    pub agents: usize,
    pub k: KChoice,
    pub slack: f64,
    pub horizon: f64,
    /// Fraction of the horizon discarded as transient.
    pub warmup: f64,
    pub seed: u64,
    pub queue_cap: usize,
    pub record_events: bool,
}

impl EngineConfig {
    pub fn new(policy: PolicyKind, phi: PiecewiseUniformDensity) -> Self {
        Self {
            policy,
            phi,
            lambda: 1.0,
            speed: 1.0,
            radius: 0.1,
            agents: 1,
            k: KChoice::Auto,
            slack: DEFAULT_SLACK,
            horizon: 1000.0,
            warmup: DEFAULT_WARMUP,
            seed: 0,
            queue_cap: DEFAULT_QUEUE_CAP,
            record_events: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |what: &str| Err(EngineError::InvalidConfig(what.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and nonnegative");
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return bad("speed must be positive");
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius must be positive");
        }
        if self.agents == 0 {
            return bad("agents must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return bad("warmup must lie in [0, 1)");
        }
        if self.queue_cap == 0 {
            return bad("queue_cap must be at least 1");
        }
        if matches!(self.k, KChoice::Fixed(0)) {
            return bad("K must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("unstable: agent {agent} has {outstanding} outstanding targets at t = {time:.3}")]
    Instability {
        agent: usize,
        time: f64,
        outstanding: usize,
    },
    #[error("agent {agent} failed to drain its queue by t = {time:.3}")]
    DrainTimeout { agent: usize, time: f64 },
}

/// A straight motion at constant speed over `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub segment: Segment,
    pub t0: f64,
    pub t1: f64,
}

impl Leg {
    pub fn position(&self, t: f64) -> Point {
        if self.t1 <= self.t0 {
            return self.segment.end;
        }
        let s = ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0);
        self.segment.start.lerp(self.segment.end, s)
    }

    pub fn speed(&self) -> f64 {
        let dt = self.t1 - self.t0;
        if dt > 0.0 {
            self.segment.length() / dt
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub id: usize,
    pub location: Point,
    pub t_gen: f64,
    pub t_detect: Option<f64>,
    pub t_serve: Option<f64>,
    /// Index of the density region containing the target.
    pub region: usize,
    /// Index of the agent region (region of dominance) containing it.
    pub cell: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub start: f64,
    pub end: f64,
    /// Total out-and-back detour length (sweep policies).
    pub detour: f64,
    /// Base path length excluding detours and transit between tiles.
    pub base: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub agent: usize,
    pub legs: Vec<Leg>,
    pub phases: Vec<PhaseRecord>,
    pub distance: f64,
    pub snapshots: usize,
    pub purity_violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Arrival,
    Detection,
    Completion,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Detection => "detection",
            EventKind::Completion => "completion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub agent: usize,
    pub target: usize,
    pub x: f64,
    pub y: f64,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.time,
            self.kind.name(),
            self.agent,
            self.target,
            self.x,
            self.y
        )
    }
}

/// Mean and batch-means uncertainty of a subset of system times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub mean: f64,
    /// Standard error from batch means (NaN with too few samples).
    pub std_error: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub t_sys_mean: f64,
    /// Half-width of the 95% batch-means interval.
    pub t_sys_ci: f64,
    pub t_detect_mean: f64,
    pub t_detect_ci: f64,
    /// Time-averaged number of outstanding targets over the window.
    pub n_bar: f64,
    pub little_lhs: f64,
    pub little_rhs: f64,
    pub n_generated: usize,
    pub n_served: usize,
    pub n_outstanding_final: usize,
    /// Services counted in the estimates.
    pub n_window: usize,
    pub low_confidence: bool,
    pub horizon: f64,
    pub warmup_time: f64,
    pub phases_completed: usize,
    pub phase_length_mean: f64,
    pub region_means: Vec<GroupStat>,
    pub cell_means: Vec<GroupStat>,
}

impl RunStats {
    /// `|n̄ - λT̄| / (λT̄)`.
    pub fn little_error(&self) -> f64 {
        ((self.little_lhs - self.little_rhs) / self.little_rhs).abs()
    }
}

/// Counts of invariant violations found after a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub legs_checked: usize,
    pub speed_violations: usize,
    pub targets_checked: usize,
    pub detection_violations: usize,
    pub service_location_violations: usize,
    pub snapshots_checked: usize,
    pub purity_violations: usize,
    pub conservation_violations: usize,
    pub partition_violations: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.speed_violations == 0
            && self.detection_violations == 0
            && self.service_location_violations == 0
            && self.purity_violations == 0
            && self.conservation_violations == 0
            && self.partition_violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub stats: RunStats,
    pub targets: Vec<Target>,
    pub events: Option<Vec<Event>>,
    pub audit: AuditReport,
    pub dominance: DominanceRegions,
    pub plans: Vec<AgentPlan>,
    pub traces: Vec<AgentTrace>,
}

/// Where arrivals come from: the seeded Poisson process or a fixed list.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Source {
    Poisson(ArrivalStream),
    Fixed(std::vec::IntoIter<TargetArrival>),
}

impl Iterator for Source {
    type Item = TargetArrival;

    fn next(&mut self) -> Option<TargetArrival> {
        match self {
            Source::Poisson(s) => s.next(),
            Source::Fixed(s) => s.next(),
        }
    }
}

/// Index of the first cell containing `q`, else the nearest by centroid.
fn owner_of(cells: &[ConvexPolygon], q: Point) -> usize {
    cells.iter().position(|c| c.contains(q)).unwrap_or_else(|| {
        (0..cells.len())
            .min_by(|&a, &b| {
                cells[a]
                    .centroid()
                    .distance(q)
                    .total_cmp(&cells[b].centroid().distance(q))
            })
            .expect("at least one cell")
    })
}

struct LocalTarget {
    id: usize,
    location: Point,
    t_gen: f64,
}

struct AgentResult {
    trace: AgentTrace,
    local: Vec<LocalTarget>,
    services: Vec<(usize, f64, Point)>,
}

struct AgentSim<'a> {
    agent: usize,
    plan: &'a AgentPlan,
    cells: &'a [ConvexPolygon],
    speed: f64,
    horizon: f64,
    cap: usize,
    source: Source,
    peeked: Option<TargetArrival>,
    time: f64,
    pos: Point,
    local: Vec<LocalTarget>,
    /// Outstanding local targets per bucket: one bucket per sweep strip of
    /// each tile, or one per tile for snapshot policies.
    buckets: Vec<Vec<usize>>,
    bucket_base: Vec<Vec<usize>>,
    outstanding: usize,
    outstanding_before_horizon: usize,
    legs: Vec<Leg>,
    distance: f64,
    services: Vec<(usize, f64, Point)>,
    phases: Vec<PhaseRecord>,
    detour: f64,
    base: f64,
    rng: ChaCha8Rng,
    snapshots: usize,
    purity_violations: usize,
}

impl<'a> AgentSim<'a> {
    fn new(
        agent: usize,
        plan: &'a AgentPlan,
        cells: &'a [ConvexPolygon],
        source: Source,
        config: &EngineConfig,
        horizon: f64,
    ) -> Self {
        let mut bucket_base = Vec::new();
        let mut next = 0;
        for (g, group) in plan.tiling.tiles.iter().enumerate() {
            let mut bases = Vec::with_capacity(group.len());
            for i in 0..group.len() {
                bases.push(next);
                next += if plan.kind.sweeps() {
                    plan.sweeps[g][i].strips.len()
                } else {
                    1
                };
            }
            bucket_base.push(bases);
        }
        let start = if plan.kind.sweeps() {
            plan.sweeps[0][0].start()
        } else {
            plan.snap_points[0][0]
        };
        Self {
            agent,
            plan,
            cells,
            speed: config.speed,
            horizon,
            cap: config.queue_cap,
            source,
            peeked: None,
            time: 0.0,
            pos: start,
            local: Vec::new(),
            buckets: vec![Vec::new(); next],
            bucket_base,
            outstanding: 0,
            outstanding_before_horizon: 0,
            legs: Vec::new(),
            distance: 0.0,
            services: Vec::new(),
            phases: Vec::new(),
            detour: 0.0,
            base: 0.0,
            rng: SeedSpec::new(config.seed, agent_stream(agent)).rng(),
            snapshots: 0,
            purity_violations: 0,
        }
    }

    /// Next arrival owned by this agent, without consuming it.
    fn peek(&mut self) -> Option<TargetArrival> {
        if self.peeked.is_none() {
            let (agent, cells) = (self.agent, self.cells);
            self.peeked = self.source.find(|a| owner_of(cells, a.location) == agent);
        }
        self.peeked
    }

    fn bucket_of(&self, q: Point) -> usize {
        let t = self.plan.locate(q);
        let base = self.bucket_base[t.group][t.index];
        if self.plan.kind.sweeps() {
            base + self.plan.sweeps[t.group][t.index].strip_of(q)
        } else {
            base
        }
    }

    /// Admits every owned arrival with `t_gen <= t`.
    fn pull_until(&mut self, t: f64) -> Result<(), EngineError> {
        while let Some(a) = self.peek() {
            if a.t_gen > t {
                break;
            }
            self.peeked = None;
            let b = self.bucket_of(a.location);
            self.buckets[b].push(self.local.len());
            self.local.push(LocalTarget {
                id: a.id,
                location: a.location,
                t_gen: a.t_gen,
            });
            self.outstanding += 1;
            if a.t_gen < self.horizon {
                self.outstanding_before_horizon += 1;
            }
            if self.outstanding > self.cap {
                return Err(EngineError::Instability {
                    agent: self.agent,
                    time: a.t_gen,
                    outstanding: self.outstanding,
                });
            }
        }
        Ok(())
    }

    fn serve(&mut self, local: usize) {
        let t = &self.local[local];
        self.services.push((t.id, self.time, self.pos));
        self.outstanding -= 1;
        if t.t_gen < self.horizon {
            self.outstanding_before_horizon -= 1;
        }
    }

    /// Straight move at full speed; returns the distance covered.
    fn move_to(&mut self, p: Point) -> f64 {
        let d = self.pos.distance(p);
        if d > 0.0 {
            let t1 = self.time + d / self.speed;
            self.legs.push(Leg {
                segment: Segment::new(self.pos, p),
                t0: self.time,
                t1,
            });
            self.time = t1;
            self.pos = p;
            self.distance += d;
        }
        d
    }

    /// Move that must end exactly at `t1` (used to stop at an arrival time).
    fn move_until(&mut self, p: Point, t1: f64) {
        let d = self.pos.distance(p);
        if t1 > self.time {
            self.legs.push(Leg {
                segment: Segment::new(self.pos, p),
                t0: self.time,
                t1,
            });
            self.time = t1;
        }
        self.pos = p;
        self.distance += d;
    }

    fn idle_until(&mut self, t1: f64) {
        if t1 > self.time {
            self.legs.push(Leg {
                segment: Segment::new(self.pos, self.pos),
                t0: self.time,
                t1,
            });
            self.time = t1;
        }
    }

    fn run(mut self) -> Result<AgentResult, EngineError> {
        let limit = self.horizon * DRAIN_LIMIT;
        let mut state = PolicyState::new(self.plan.groups());
        loop {
            self.pull_until(self.time)?;
            if self.time >= self.horizon && self.outstanding_before_horizon == 0 {
                break;
            }
            if self.time > limit {
                return Err(EngineError::DrainTimeout {
                    agent: self.agent,
                    time: self.time,
                });
            }
            let start = self.time;
            self.detour = 0.0;
            self.base = 0.0;
            for activity in self.plan.step(&mut state) {
                match activity {
                    Activity::Sweep(t) => self.sweep_tile(t)?,
                    Activity::Snapshot(t) => self.snapshot_tile(t)?,
                }
            }
            if self.time == start {
                // Nothing to do: wait for the next arrival.
                let next = self.peek().map_or(self.horizon, |a| a.t_gen.max(self.time));
                self.idle_until(next.max(self.time));
                if self.time == start {
                    break;
                }
            }
            self.phases.push(PhaseRecord {
                start,
                end: self.time,
                detour: self.detour,
                base: self.base,
            });
        }
        Ok(AgentResult {
            trace: AgentTrace {
                agent: self.agent,
                legs: self.legs,
                phases: self.phases,
                distance: self.distance,
                snapshots: self.snapshots,
                purity_violations: self.purity_violations,
            },
            local: self.local,
            services: self.services,
        })
    }

    fn sweep_tile(&mut self, t: TileRef) -> Result<(), EngineError> {
        let plans: &'a AgentPlan = self.plan;
        let plan = &plans.sweeps[t.group][t.index];
        let base = self.bucket_base[t.group][t.index];
        self.move_to(plan.start());
        for (k, strip) in plan.strips.iter().enumerate() {
            if k > 0 {
                self.base += self.move_to(strip.bisector.start);
            }
            self.sweep_strip(strip, base + k)?;
        }
        Ok(())
    }

    /// Traverses one strip bisector, servicing every target of the strip
    /// that is not behind the agent when it comes level with it.
    fn sweep_strip(&mut self, strip: &Strip, bucket: usize) -> Result<(), EngineError> {
        let len = strip.length();
        let origin = strip.bisector.start;
        let dir = strip.direction();
        let y = origin.y;
        let at = |s: f64| Point::new(origin.x + dir * s, y);
        let along = |q: Point| strip.along(q.x).clamp(0.0, len);
        let mut s = 0.0;
        loop {
            self.pull_until(self.time)?;
            let best = self.buckets[bucket]
                .iter()
                .enumerate()
                .filter(|(_, &i)| along(self.local[i].location) >= s)
                .min_by(|(_, &a), (_, &b)| {
                    let (ta, tb) = (&self.local[a], &self.local[b]);
                    along(ta.location)
                        .total_cmp(&along(tb.location))
                        .then((ta.location.y - y).abs().total_cmp(&(tb.location.y - y).abs()))
                        .then(ta.id.cmp(&tb.id))
                })
                .map(|(slot, &i)| (slot, i));
            let s_next = best.map_or(len, |(_, i)| along(self.local[i].location));
            let t_reach = self.time + (s_next - s) / self.speed;
            if let Some(a) = self.peek() {
                if a.t_gen <= t_reach && a.t_gen > self.time {
                    // Stop where the agent is when the arrival happens.
                    let s_a = (s + (a.t_gen - self.time) * self.speed).min(s_next);
                    self.base += s_a - s;
                    self.move_until(at(s_a), a.t_gen);
                    s = s_a;
                    continue;
                }
            }
            self.base += s_next - s;
            self.move_until(at(s_next), t_reach);
            s = s_next;
            let Some((slot, i)) = best else {
                break;
            };
            self.buckets[bucket].swap_remove(slot);
            let depart = self.pos;
            let target = self.local[i].location;
            let d = self.move_to(target);
            self.serve(i);
            self.move_to(depart);
            self.detour += 2.0 * d;
        }
        Ok(())
    }

    fn snapshot_tile(&mut self, t: TileRef) -> Result<(), EngineError> {
        let p = self.plan.snap_points[t.group][t.index];
        self.move_to(p);
        self.pull_until(self.time)?;
        let bucket = self.bucket_base[t.group][t.index];
        let members = std::mem::take(&mut self.buckets[bucket]);
        if members.is_empty() {
            return Ok(());
        }
        let t_snap = self.time;
        self.snapshots += 1;
        self.purity_violations += members
            .iter()
            .filter(|&&i| self.local[i].t_gen > t_snap)
            .count();
        let points: Vec<Point> = members.iter().map(|&i| self.local[i].location).collect();
        let cursor = random_cursor(build_tour(&points), &mut self.rng);
        let w = walk(&cursor, &points, self.speed);
        self.move_to(w.start);
        for &(idx, location, _) in &w.visits {
            self.base += self.move_to(location);
            self.serve(members[idx]);
        }
        self.base += self.move_to(w.start);
        Ok(())
    }
}

/// Expected length of one phase times the number of phases in a full cycle
/// of the schedule, ignoring detours and transit.
pub fn cycle_estimate(plan: &AgentPlan, speed: f64) -> f64 {
    let period = (0..plan.groups())
        .map(|g| plan.revisit_period(g))
        .max()
        .unwrap_or(1) as f64;
    let phase = if plan.kind.sweeps() {
        plan.sweeps
            .iter()
            .map(|g| g.iter().map(|p| p.total_length).sum::<f64>() / g.len() as f64)
            .sum::<f64>()
            / speed
    } else {
        // Fixed point of L = (beta / v) sqrt(lambda L) sum_S sqrt(period_S) ∫_S sqrt(phi).
        let tiles_per_phase = if plan.kind == PolicyKind::Uttsp {
            plan.tiling.tiles[0].len() as f64
        } else {
            1.0
        };
        let s: f64 = (0..plan.groups())
            .map(|g| {
                let group = &plan.tiling.tiles[g];
                let mean_root = group
                    .iter()
                    .map(|t| plan.phi.power_integral_clipped(0.5, t))
                    .sum::<f64>()
                    / group.len() as f64;
                (plan.revisit_period(g) as f64).sqrt() * mean_root * tiles_per_phase
            })
            .sum();
        (BHH_BETA / speed).powi(2) * plan.lambda * s * s
    };
    phase * period
}

/// Per-agent first-detection times for all targets, from that agent's legs.
///
/// A target can only be detected while it exists and is unserved, so each
/// leg is tested against the part `[max(t0, t_gen), min(t1, t_serve)]`.
pub fn detect_events(legs: &[Leg], targets: &[Target], r: f64, bounds: BoundingBox) -> Vec<Option<f64>> {
    let mut detected: Vec<Option<f64>> = vec![None; targets.len()];
    let extent = bounds.width().max(bounds.height()).max(f64::MIN_POSITIVE);
    let cell = r.clamp(extent / 512.0, extent / 8.0);
    let nx = ((bounds.width() / cell).ceil() as usize).max(1);
    let ny = ((bounds.height() / cell).ceil() as usize).max(1);
    let index = |p: Point| -> (usize, usize) {
        let i = (((p.x - bounds.min.x) / cell).floor().max(0.0) as usize).min(nx - 1);
        let j = (((p.y - bounds.min.y) / cell).floor().max(0.0) as usize).min(ny - 1);
        (i, j)
    };
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[a].t_gen.total_cmp(&targets[b].t_gen));
    let mut next = 0;
    for leg in legs {
        while next < order.len() && targets[order[next]].t_gen <= leg.t1 {
            let k = order[next];
            let (i, j) = index(targets[k].location);
            grid[j * nx + i].push(k);
            next += 1;
        }
        let bb = BoundingBox::of_points([leg.segment.start, leg.segment.end])
            .expect("two points")
            .inflate(r);
        let (i0, j0) = index(bb.min);
        let (i1, j1) = index(bb.max);
        let speed = leg.speed();
        for j in j0..=j1 {
            for i in i0..=i1 {
                grid[j * nx + i].retain(|&k| {
                    let t = &targets[k];
                    let serve = t.t_serve.unwrap_or(f64::INFINITY);
                    if serve < leg.t0 {
                        return false;
                    }
                    let ta = leg.t0.max(t.t_gen);
                    let tb = leg.t1.min(serve);
                    if ta > tb {
                        return true;
                    }
                    let hit = if speed > 0.0 {
                        let sub = Segment::new(leg.position(ta), leg.position(tb));
                        disk_entry_time(&sub, speed, t.location, r).map(|dt| ta + dt)
                    } else {
                        (leg.segment.start.distance(t.location) <= r).then_some(ta)
                    };
                    match hit {
                        Some(time) => {
                            detected[k] = Some(time.min(tb));
                            false
                        }
                        None => true,
                    }
                });
            }
        }
    }
    detected
}

/// Mean and 95% half-width from `BATCHES` contiguous batch means.
pub fn batch_means(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < BATCHES {
        return (mean, f64::NAN);
    }
    let means: Vec<f64> = (0..BATCHES)
        .map(|b| {
            let chunk = &values[b * n / BATCHES..(b + 1) * n / BATCHES];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let grand = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    (mean, T_QUANTILE_95 * (var / BATCHES as f64).sqrt())
}

fn group_stat(values: &[f64]) -> GroupStat {
    let (mean, half) = batch_means(values);
    GroupStat {
        mean,
        std_error: half / T_QUANTILE_95,
        count: values.len(),
    }
}

/// Steady-state estimates from the targets generated in
/// `[warmup_time, horizon)`, taken in generation order.
pub fn steady_state(
    targets: &[Target],
    lambda: f64,
    horizon: f64,
    warmup_time: f64,
    regions: usize,
    cells: usize,
) -> RunStats {
    let mut window: Vec<&Target> = targets
        .iter()
        .filter(|t| t.t_gen >= warmup_time && t.t_gen < horizon && t.t_serve.is_some())
        .collect();
    window.sort_by(|a, b| a.t_gen.total_cmp(&b.t_gen).then(a.id.cmp(&b.id)));
    let sys: Vec<f64> = window.iter().map(|t| t.t_serve.unwrap() - t.t_gen).collect();
    let det: Vec<f64> = window
        .iter()
        .filter_map(|t| t.t_detect.map(|d| d - t.t_gen))
        .collect();
    let (t_sys_mean, t_sys_ci) = batch_means(&sys);
    let (t_detect_mean, t_detect_ci) = batch_means(&det);
    let span = horizon - warmup_time;
    let occupancy: f64 = targets
        .iter()
        .map(|t| {
            let end = t.t_serve.unwrap_or(f64::INFINITY).min(horizon);
            (end - t.t_gen.max(warmup_time)).max(0.0)
        })
        .sum();
    let n_bar = if span > 0.0 { occupancy / span } else { f64::NAN };
    let by = |key: &dyn Fn(&Target) -> usize, count: usize| -> Vec<GroupStat> {
        (0..count)
            .map(|g| {
                let v: Vec<f64> = window
                    .iter()
                    .filter(|t| key(t) == g)
                    .map(|t| t.t_serve.unwrap() - t.t_gen)
                    .collect();
                group_stat(&v)
            })
            .collect()
    };
    let generated = targets.iter().filter(|t| t.t_gen < horizon).count();
    let served = targets
        .iter()
        .filter(|t| t.t_serve.is_some_and(|s| s <= horizon))
        .count();
    let outstanding = targets
        .iter()
        .filter(|t| t.t_gen < horizon && t.t_serve.is_none_or(|s| s > horizon))
        .count();
    RunStats {
        t_sys_mean,
        t_sys_ci,
        t_detect_mean,
        t_detect_ci,
        n_bar,
        little_lhs: n_bar,
        little_rhs: lambda * t_sys_mean,
        n_generated: generated,
        n_served: served,
        n_outstanding_final: outstanding,
        n_window: sys.len(),
        low_confidence: sys.len() < LOW_CONFIDENCE_COUNT,
        horizon,
        warmup_time,
        phases_completed: 0,
        phase_length_mean: f64::NAN,
        region_means: by(&|t| t.region, regions),
        cell_means: by(&|t| t.cell, cells),
    }
}

/// Cells must cover `parent_area` without overlap; when `measure` is given
/// they must also be equal under it.
fn partition_violations(cells: &[ConvexPolygon], parent_area: f64, measure: Option<&dyn Fn(&ConvexPolygon) -> f64>) -> usize {
    let mut violations = 0;
    let total: f64 = cells.iter().map(ConvexPolygon::area).sum();
    if (total - parent_area).abs() > 1e-9 * parent_area.max(1.0) * cells.len() as f64 {
        violations += 1;
    }
    // Sweep over bounding boxes sorted by their left edge.
    let boxes: Vec<BoundingBox> = cells.iter().map(ConvexPolygon::bounding_box).collect();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| boxes[a].min.x.total_cmp(&boxes[b].min.x));
    for (n, &a) in order.iter().enumerate() {
        for &b in &order[n + 1..] {
            if boxes[b].min.x >= boxes[a].max.x {
                break;
            }
            if boxes[b].min.y < boxes[a].max.y
                && boxes[a].min.y < boxes[b].max.y
                && cells[a].intersection_area(&cells[b]) >= 1e-12
            {
                violations += 1;
            }
        }
    }
    if let Some(measure) = measure {
        let m: Vec<f64> = cells.iter().map(measure).collect();
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        if m.iter().any(|x| (x - mean).abs() > 1e-6 * mean) {
            violations += 1;
        }
    }
    violations
}

fn audit_partitions(phi: &PiecewiseUniformDensity, dominance: &DominanceRegions, plans: &[AgentPlan]) -> usize {
    let alpha = dominance.alpha;
    let psi = |c: &ConvexPolygon| phi.power_integral_clipped(alpha, c);
    let mut violations = partition_violations(&dominance.cells, phi.environment().area(), Some(&psi));
    for plan in plans {
        for (g, group) in plan.tiling.tiles.iter().enumerate() {
            let parent = if plan.groups() == 1 {
                plan.region.area()
            } else {
                plan.phi.regions()[g].cell.area()
            };
            // Tiles within one group of a biased policy lie in a single
            // density region, so they must have equal area.
            let equal = plan.groups() > 1 && plan.kind == PolicyKind::Bts;
            let area = |c: &ConvexPolygon| c.area();
            violations += partition_violations(group, parent, equal.then_some(&area as &dyn Fn(&ConvexPolygon) -> f64));
        }
    }
    violations
}

/// Simulates a configuration with Poisson arrivals.
pub fn run(config: &EngineConfig) -> Result<RunOutput, EngineError> {
    config.validate()?;
    let stream = ArrivalStream::new(&config.phi, config.lambda, SeedSpec::new(config.seed, ARRIVAL_STREAM));
    simulate(config, Source::Poisson(stream))
}

/// Simulates a configuration against a fixed, time-ordered arrival list.
pub fn run_with_arrivals(config: &EngineConfig, arrivals: Vec<TargetArrival>) -> Result<RunOutput, EngineError> {
    config.validate()?;
    if arrivals.windows(2).any(|w| w[1].t_gen < w[0].t_gen) {
        return Err(EngineError::InvalidConfig("arrivals must be time-ordered".into()));
    }
    if arrivals.iter().enumerate().any(|(i, a)| a.id != i) {
        return Err(EngineError::InvalidConfig("arrival ids must be 0, 1, 2, ...".into()));
    }
    simulate(config, Source::Fixed(arrivals.into_iter()))
}

fn simulate(config: &EngineConfig, source: Source) -> Result<RunOutput, EngineError> {
    let (dominance, plans) = erd_wrap(
        config.policy,
        config.agents,
        &config.phi,
        config.lambda,
        config.radius,
        config.k,
        config.slack,
    )?;
    let cycle = plans
        .iter()
        .map(|p| cycle_estimate(p, config.speed))
        .fold(0.0, f64::max);
    let horizon = config.horizon.max(MIN_PHASES * cycle);
    let warmup_time = config.warmup * horizon;

    let results = plans
        .iter()
        .enumerate()
        .map(|(l, plan)| AgentSim::new(l, plan, &dominance.cells, source.clone(), config, horizon).run())
        .collect::<Result<Vec<_>, _>>()?;

    let mut audit = AuditReport::default();
    let mut targets: Vec<Target> = results
        .iter()
        .enumerate()
        .flat_map(|(l, res)| {
            res.local.iter().map(move |t| Target {
                id: t.id,
                location: t.location,
                t_gen: t.t_gen,
                t_detect: None,
                t_serve: None,
                region: 0,
                cell: l,
            })
        })
        .collect();
    targets.sort_by_key(|t| t.id);
    for t in &mut targets {
        t.region = config.phi.region_of(t.location).unwrap_or(0);
    }
    let mut server = vec![usize::MAX; targets.len()];
    for (l, res) in results.iter().enumerate() {
        for &(id, time, pos) in &res.services {
            let Ok(k) = targets.binary_search_by_key(&id, |t| t.id) else {
                audit.conservation_violations += 1;
                continue;
            };
            if server[k] != usize::MAX {
                audit.conservation_violations += 1;
                continue;
            }
            server[k] = l;
            targets[k].t_serve = Some(time);
            if pos.distance(targets[k].location) >= 1e-9 {
                audit.service_location_violations += 1;
            }
        }
    }

    let bounds = config.phi.environment().bounding_box();
    let mut detector = vec![usize::MAX; targets.len()];
    for (l, res) in results.iter().enumerate() {
        let times = detect_events(&res.trace.legs, &targets, config.radius, bounds);
        for (k, t) in times.into_iter().enumerate() {
            if let Some(t) = t {
                if targets[k].t_detect.is_none_or(|d| t < d) {
                    targets[k].t_detect = Some(t);
                    detector[k] = l;
                }
            }
        }
    }

    let tol = 1e-9;
    for res in &results {
        for leg in &res.trace.legs {
            audit.legs_checked += 1;
            let reach = config.speed * (leg.t1 - leg.t0) * (1.0 + tol) + 1e-12;
            if leg.t1 < leg.t0 || leg.segment.length() > reach {
                audit.speed_violations += 1;
            }
        }
        audit.snapshots_checked += res.trace.snapshots;
        audit.purity_violations += res.trace.purity_violations;
    }
    for t in &targets {
        audit.targets_checked += 1;
        if let Some(s) = t.t_serve {
            match t.t_detect {
                Some(d) if d <= s + tol && d >= t.t_gen - tol => {}
                _ => audit.detection_violations += 1,
            }
            if s < t.t_gen {
                audit.conservation_violations += 1;
            }
        }
    }
    audit.partition_violations = audit_partitions(&config.phi, &dominance, &plans);

    let mut stats = steady_state(
        &targets,
        config.lambda,
        horizon,
        warmup_time,
        config.phi.regions().len(),
        dominance.cells.len(),
    );
    let generated_ok = stats.n_generated == stats.n_served + stats.n_outstanding_final;
    if !generated_ok {
        audit.conservation_violations += 1;
    }
    let phase_lengths: Vec<f64> = results
        .iter()
        .flat_map(|r| r.trace.phases.iter())
        .filter(|p| p.start >= warmup_time && p.end <= horizon)
        .map(|p| p.end - p.start)
        .collect();
    stats.phases_completed = results.iter().map(|r| r.trace.phases.len()).sum();
    if !phase_lengths.is_empty() {
        stats.phase_length_mean = phase_lengths.iter().sum::<f64>() / phase_lengths.len() as f64;
    }

    let events = config.record_events.then(|| {
        let mut events = Vec::with_capacity(3 * targets.len());
        for (k, t) in targets.iter().enumerate() {
            let (x, y) = (t.location.x, t.location.y);
            events.push(Event {
                time: t.t_gen,
                kind: EventKind::Arrival,
                agent: t.cell,
                target: t.id,
                x,
                y,
            });
            if let Some(time) = t.t_detect {
                events.push(Event {
                    time,
                    kind: EventKind::Detection,
                    agent: detector[k],
                    target: t.id,
                    x,
                    y,
                });
            }
            if let Some(time) = t.t_serve {
                events.push(Event {
                    time,
                    kind: EventKind::Completion,
                    agent: server[k],
                    target: t.id,
                    x,
                    y,
                });
            }
        }
        events.sort_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.kind.cmp(&b.kind))
                .then(a.agent.cmp(&b.agent))
                .then(a.target.cmp(&b.target))
        });
        events
    });

    Ok(RunOutput {
        stats,
        targets,
        events,
        audit,
        dominance,
        plans,
        traces: results.into_iter().map(|r| r.trace).collect(),
    })
}
