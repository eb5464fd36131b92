//! Seeded spatio-temporal Poisson target generation.
//!
//! Every random consumer draws from its own ChaCha stream, addressed by a
//! `(master_seed, stream_id)` pair. Streams with different ids are
//! independent, so replications and agents can run in any order or in
//! parallel without changing results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::density::PiecewiseUniformDensity;
use crate::geometry::{BoundingBox, ConvexPolygon, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

/// Stream used for target arrivals within one run.
pub const ARRIVAL_STREAM: u64 = 0;

/// Stream used for the random tour offsets of agent `agent`.
pub fn agent_stream(agent: usize) -> u64 {
    1 + agent as u64
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// SplitMix64 finalizer; maps `(master, index)` to a well-mixed seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetArrival {
    pub id: usize,
    pub location: Point,
    pub t_gen: f64,
}

/// Draws locations from a piecewise-uniform density: pick a region by mass,
/// then rejection-sample inside its bounding box.
#[derive(Debug, Clone)]
pub struct LocationSampler {
    cells: Vec<(ConvexPolygon, BoundingBox)>,
    cumulative: Vec<f64>,
}

impl LocationSampler {
    pub fn new(phi: &PiecewiseUniformDensity) -> Self {
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(phi.regions().len());
        let mut cells = Vec::with_capacity(phi.regions().len());
        for r in phi.regions() {
            acc += r.level * r.cell.area();
            cumulative.push(acc);
            cells.push((r.cell.clone(), r.cell.bounding_box()));
        }
        Self { cells, cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let total = *self.cumulative.last().expect("density has regions");
        let u = rng.random::<f64>() * total;
        let j = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cells.len() - 1);
        let (cell, bb) = &self.cells[j];
        loop {
            let p = Point::new(
                bb.min.x + rng.random::<f64>() * bb.width(),
                bb.min.y + rng.random::<f64>() * bb.height(),
            );
            if cell.contains(p) {
                return p;
            }
        }
    }
}

/// Infinite, lazily generated arrival sequence in time order.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    rng: ChaCha8Rng,
    gap: Option<Exp<f64>>,
    sampler: LocationSampler,
    clock: f64,
    next_id: usize,
}

impl ArrivalStream {
    /// A rate of zero (or below) yields an empty stream.
    pub fn new(phi: &PiecewiseUniformDensity, lambda: f64, seed: SeedSpec) -> Self {
        let gap = (lambda > 0.0 && lambda.is_finite()).then(|| Exp::new(lambda).expect("positive rate"));
        Self {
            rng: seed.rng(),
            gap,
            sampler: LocationSampler::new(phi),
            clock: 0.0,
            next_id: 0,
        }
    }
}

impl Iterator for ArrivalStream {
    type Item = TargetArrival;

    fn next(&mut self) -> Option<TargetArrival> {
        let gap = self.gap.as_ref()?;
        self.clock += gap.sample(&mut self.rng);
        let location = self.sampler.sample(&mut self.rng);
        let id = self.next_id;
        self.next_id += 1;
        Some(TargetArrival {
            id,
            location,
            t_gen: self.clock,
        })
    }
}

/// All arrivals with `t_gen < horizon`.
pub fn arrivals_until(
    phi: &PiecewiseUniformDensity,
    lambda: f64,
    horizon: f64,
    seed: SeedSpec,
) -> Vec<TargetArrival> {
    ArrivalStream::new(phi, lambda, seed)
        .take_while(|a| a.t_gen < horizon)
        .collect()
}

/// Number of arrivals with `t_gen` in `[t0, t1)` located in `region`.
pub fn count_in(arrivals: &[TargetArrival], window: (f64, f64), region: &ConvexPolygon) -> usize {
    let (t0, t1) = window;
    arrivals
        .iter()
        .filter(|a| a.t_gen >= t0 && a.t_gen < t1 && region.contains(a.location))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_matches_rate() {
        let phi = PiecewiseUniformDensity::uniform(ConvexPolygon::unit_square());
        let arrivals = arrivals_until(&phi, 5.0, 1000.0, SeedSpec::new(7, ARRIVAL_STREAM));
        let n = arrivals.len() as f64;
        assert!((n - 5000.0).abs() < 3.0 * 5000f64.sqrt(), "n = {n}");
        assert!(arrivals.windows(2).all(|w| w[0].t_gen <= w[1].t_gen));
        assert!(arrivals.iter().enumerate().all(|(i, a)| a.id == i));
    }

    #[test]
    fn same_seed_same_sequence() {
        let phi = PiecewiseUniformDensity::epsilon_family(0.3).unwrap();
        let a = arrivals_until(&phi, 3.0, 200.0, SeedSpec::new(11, 0));
        let b = arrivals_until(&phi, 3.0, 200.0, SeedSpec::new(11, 0));
        assert_eq!(a, b);
        let c = arrivals_until(&phi, 3.0, 200.0, SeedSpec::new(11, 1));
        assert_ne!(a, c);
    }

    #[test]
    fn small_region_fraction() {
        let phi = PiecewiseUniformDensity::epsilon_family(0.89).unwrap();
        let small = ConvexPolygon::rectangle(0.0, 0.9, 1.0, 1.0).unwrap();
        let arrivals = arrivals_until(&phi, 10.0, 1000.0, SeedSpec::new(3, 0));
        let n = arrivals.len() as f64;
        let k = count_in(&arrivals, (0.0, f64::INFINITY), &small) as f64;
        let sigma = (0.99 * 0.01 / n).sqrt();
        assert!((k / n - 0.99).abs() < 3.0 * sigma, "fraction {}", k / n);
    }

    #[test]
    fn count_in_windows() {
        let phi = PiecewiseUniformDensity::uniform(ConvexPolygon::unit_square());
        let arrivals = arrivals_until(&phi, 2.0, 50.0, SeedSpec::new(1, 0));
        let env = ConvexPolygon::unit_square();
        assert_eq!(count_in(&arrivals, (10.0, 10.0), &env), 0);
        assert_eq!(count_in(&arrivals, (0.0, 50.0), &env), arrivals.len());
    }

    #[test]
    fn zero_rate_is_empty() {
        let phi = PiecewiseUniformDensity::uniform(ConvexPolygon::unit_square());
        assert!(ArrivalStream::new(&phi, 0.0, SeedSpec::new(0, 0)).next().is_none());
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
