//! The four single-agent policies and the multi-agent wrapper that assigns
//! each agent its own region of dominance.
//!
//! A policy is reduced to static data (a tiling plus per-tile sweep plans or
//! snapshot points) and a cyclic schedule over that tiling. The engine
//! executes the schedule one tile at a time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{Bias, Regime};
use crate::coverage::{plan_sweep, SweepPlan};
use crate::density::PiecewiseUniformDensity;
use crate::geometry::{ConvexPolygon, Point};
use crate::partition::{
    auto_k, bts_tiling, bttsp_tiling, dominance_partition, tile_counts, uttsp_tiling,
    DominanceRegions, PartitionError, Tiling,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Urs,
    Bts,
    Uttsp,
    Bttsp,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [Self::Urs, Self::Bts, Self::Uttsp, Self::Bttsp];

    pub fn bias(self) -> Bias {
        match self {
            Self::Urs | Self::Uttsp => Bias::Unbiased,
            Self::Bts | Self::Bttsp => Bias::Biased,
        }
    }

    pub fn regime(self) -> Regime {
        match self {
            Self::Urs | Self::Bts => Regime::SmallR,
            Self::Uttsp | Self::Bttsp => Regime::HeavyLoad,
        }
    }

    /// Exponent `alpha` of the measure `phi^alpha` that regions of dominance
    /// equalize.
    pub fn psi_exponent(self) -> f64 {
        match self {
            Self::Urs => 0.0,
            Self::Bts | Self::Uttsp => 0.5,
            Self::Bttsp => 2.0 / 3.0,
        }
    }

    /// Exponent in `K_j = K / mu_j^e` for the biased tilings.
    pub fn tile_exponent(self) -> Option<f64> {
        match self {
            Self::Bts => Some(0.5),
            Self::Bttsp => Some(1.0 / 3.0),
            _ => None,
        }
    }

    pub fn sweeps(self) -> bool {
        self.regime() == Regime::SmallR
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Urs => "URS",
            Self::Bts => "BTS",
            Self::Uttsp => "UTTSP",
            Self::Bttsp => "BTTSP",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown policy `{s}` (expected URS, BTS, UTTSP or BTTSP)"))
    }
}

/// Master tile count: fixed, or the smallest accurate one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KChoice {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("agent region {0} carries no probability mass")]
    EmptyRegion(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileRef {
    pub group: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activity {
    Sweep(TileRef),
    Snapshot(TileRef),
}

impl Activity {
    pub fn tile(self) -> TileRef {
        match self {
            Activity::Sweep(t) | Activity::Snapshot(t) => t,
        }
    }
}

/// Phase counter and one cyclic cursor per tile group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyState {
    pub phase: usize,
    pub cursors: Vec<usize>,
}

impl PolicyState {
    pub fn new(groups: usize) -> Self {
        Self {
            phase: 0,
            cursors: vec![0; groups],
        }
    }

    /// Tiles visited in the current phase (one per group, in group order),
    /// then advances every cursor cyclically.
    pub fn next_phase(&mut self, counts: &[usize]) -> Vec<TileRef> {
        let tiles = self
            .cursors
            .iter()
            .enumerate()
            .map(|(group, &index)| TileRef { group, index })
            .collect();
        for (c, &k) in self.cursors.iter_mut().zip(counts) {
            *c = (*c + 1) % k;
        }
        self.phase += 1;
        tiles
    }
}

/// Targets frozen at `t_snap`; later arrivals are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tile: TileRef,
    pub t_snap: f64,
    pub targets: Vec<usize>,
}

/// Everything one agent needs to run its policy on its own region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPlan {
    pub kind: PolicyKind,
    pub region: ConvexPolygon,
    /// Density conditioned on `region`.
    pub phi: PiecewiseUniformDensity,
    /// Arrival rate of targets inside `region`.
    pub lambda: f64,
    pub r: f64,
    pub tiling: Tiling,
    /// Per-tile sweep plans (sweep policies only).
    pub sweeps: Vec<Vec<SweepPlan>>,
    /// Per-tile snapshot points (snapshot policies only).
    pub snap_points: Vec<Vec<Point>>,
}

impl AgentPlan {
    pub fn build(
        kind: PolicyKind,
        region: ConvexPolygon,
        phi: PiecewiseUniformDensity,
        lambda: f64,
        r: f64,
        k: KChoice,
        slack: f64,
    ) -> Result<Self, PolicyError> {
        let counts = |e: f64| match k {
            KChoice::Auto => auto_k(&phi, e, slack),
            KChoice::Fixed(k) => tile_counts(&phi, k, e, slack),
        };
        let tiling = match kind {
            PolicyKind::Urs => Tiling {
                tiles: vec![vec![region.clone()]],
                k: 1,
                counts: vec![1],
                residuals: vec![0.0],
                subdivision: (1, 1),
            },
            PolicyKind::Bts => bts_tiling(&phi, &counts(0.5)?)?,
            PolicyKind::Uttsp => uttsp_tiling(&phi, r)?,
            PolicyKind::Bttsp => bttsp_tiling(&phi, &counts(1.0 / 3.0)?, r)?,
        };
        let (sweeps, snap_points) = if kind.sweeps() {
            let sweeps = tiling
                .tiles
                .iter()
                .map(|g| g.iter().map(|t| plan_sweep(t, r)).collect())
                .collect();
            (sweeps, Vec::new())
        } else {
            let points = tiling
                .tiles
                .iter()
                .map(|g| g.iter().map(ConvexPolygon::centroid).collect())
                .collect();
            (Vec::new(), points)
        };
        Ok(Self {
            kind,
            region,
            phi,
            lambda,
            r,
            tiling,
            sweeps,
            snap_points,
        })
    }

    pub fn groups(&self) -> usize {
        self.tiling.tiles.len()
    }

    pub fn tile(&self, t: TileRef) -> &ConvexPolygon {
        &self.tiling.tiles[t.group][t.index]
    }

    /// Tile containing `q`, or the one with the nearest centroid when `q`
    /// sits on no tile within tolerance.
    pub fn locate(&self, q: Point) -> TileRef {
        let group = if self.groups() == 1 {
            0
        } else {
            self.phi.region_of(q).unwrap_or_else(|| self.nearest_group(q))
        };
        let tiles = &self.tiling.tiles[group];
        let index = tiles.iter().position(|t| t.contains(q)).unwrap_or_else(|| {
            (0..tiles.len())
                .min_by(|&a, &b| {
                    tiles[a]
                        .centroid()
                        .distance(q)
                        .total_cmp(&tiles[b].centroid().distance(q))
                })
                .expect("groups are nonempty")
        });
        TileRef { group, index }
    }

    fn nearest_group(&self, q: Point) -> usize {
        (0..self.groups())
            .min_by(|&a, &b| {
                let da = self.phi.regions()[a].cell.centroid().distance(q);
                let db = self.phi.regions()[b].cell.centroid().distance(q);
                da.total_cmp(&db)
            })
            .expect("at least one group")
    }

    /// Phases between consecutive visits to a tile of `group`.
    pub fn revisit_period(&self, group: usize) -> usize {
        match self.kind {
            PolicyKind::Uttsp => 1,
            _ => self.tiling.counts[group],
        }
    }

    /// The activities of the next phase. UTTSP visits every tile of its grid
    /// each phase; the other policies visit one tile per group.
    pub fn step(&self, state: &mut PolicyState) -> Vec<Activity> {
        let tiles = if self.kind == PolicyKind::Uttsp {
            state.phase += 1;
            (0..self.tiling.tiles[0].len())
                .map(|index| TileRef { group: 0, index })
                .collect()
        } else {
            state.next_phase(&self.tiling.counts)
        };
        tiles
            .into_iter()
            .map(|t| {
                if self.kind.sweeps() {
                    Activity::Sweep(t)
                } else {
                    Activity::Snapshot(t)
                }
            })
            .collect()
    }
}

/// One plan per agent, each on its own region of dominance with the local
/// rate `lambda * phi(V)` and density `phi / phi(V)`.
pub fn erd_wrap(
    kind: PolicyKind,
    m: usize,
    phi: &PiecewiseUniformDensity,
    lambda: f64,
    r: f64,
    k: KChoice,
    slack: f64,
) -> Result<(DominanceRegions, Vec<AgentPlan>), PolicyError> {
    let regions = dominance_partition(phi, kind.psi_exponent(), m)?;
    let plans = regions
        .cells
        .iter()
        .enumerate()
        .map(|(l, cell)| {
            let mass = phi.power_integral_clipped(1.0, cell);
            let local = phi.restricted_to(cell).ok_or(PolicyError::EmptyRegion(l))?;
            AgentPlan::build(kind, cell.clone(), local, lambda * mass, r, k, slack)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((regions, plans))
}
