use dtrp_core::bounds::{heavy_biased, heavy_unbiased, optimal_frequency, small_r_biased, small_r_unbiased};
use dtrp_core::coverage::plan_sweep;
use dtrp_core::density::PiecewiseUniformDensity;
use dtrp_core::geometry::{ConvexPolygon, Point};
use dtrp_core::partition::{
    auto_k, bts_tiling, bttsp_tiling, dominance_partition, footprint_grid, footprint_side, uttsp_tiling, DEFAULT_SLACK,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_density(seed: u64, cuts: usize) -> PiecewiseUniformDensity {
    PiecewiseUniformDensity::random(&mut ChaCha8Rng::seed_from_u64(seed), &ConvexPolygon::unit_square(), cuts)
}

/// Density with vertical bands, the shape the biased tilings assume.
fn banded(levels: &[f64]) -> PiecewiseUniformDensity {
    let w = 1.0 / levels.len() as f64;
    let mass: f64 = levels.iter().map(|l| l * w).sum();
    let regions = levels
        .iter()
        .enumerate()
        .map(|(i, l)| dtrp_core::density::DensityRegion {
            cell: ConvexPolygon::rectangle(i as f64 * w, 0.0, (i + 1) as f64 * w, 1.0).unwrap(),
            level: l / mass,
        })
        .collect();
    PiecewiseUniformDensity::new(ConvexPolygon::unit_square(), regions).unwrap()
}

fn assert_partition(cells: &[ConvexPolygon], parent: f64, measure: impl Fn(&ConvexPolygon) -> f64) {
    let total: f64 = cells.iter().map(ConvexPolygon::area).sum();
    assert!((total - parent).abs() < 1e-9, "cover: {total} vs {parent}");
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            assert!(cells[i].intersection_area(&cells[j]) < 1e-12);
        }
    }
    let m: Vec<f64> = cells.iter().map(measure).collect();
    let mean = m.iter().sum::<f64>() / m.len() as f64;
    for x in m {
        assert!((x - mean).abs() < 1e-6 * mean, "equitability: {x} vs {mean}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sweep_covers_region(seed in any::<u64>(), r in 0.01..0.3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(3..9);
        let mut angles: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let pts = angles.iter().map(|t| Point::new(0.5 + 0.5 * t.cos(), 0.5 + 0.5 * t.sin())).collect();
        let Ok(region) = ConvexPolygon::new(pts) else { return Ok(()); };
        let plan = plan_sweep(&region, r);
        let bb = region.bounding_box();
        let mut checked = 0;
        while checked < 2000 {
            let q = Point::new(rng.random_range(bb.min.x..bb.max.x), rng.random_range(bb.min.y..bb.max.y));
            if !region.contains(q) {
                continue;
            }
            checked += 1;
            let d = plan.strips.iter().map(|s| s.bisector.distance_to(q)).fold(f64::INFINITY, f64::min);
            prop_assert!(d <= r + 1e-9, "point {q:?} at distance {d}");
        }
    }

    #[test]
    fn dominance_regions_are_equitable(seed in any::<u64>(), m in 1usize..6, alpha_pick in 0usize..4) {
        let phi = random_density(seed, 3);
        let alpha = [0.0, 0.5, 2.0 / 3.0, 1.0][alpha_pick];
        let d = dominance_partition(&phi, alpha, m).unwrap();
        assert_partition(&d.cells, 1.0, |c| phi.power_integral_clipped(alpha, c));
    }

    #[test]
    fn footprint_grid_fits_disk(seed in any::<u64>(), r in 0.05..0.5f64) {
        let phi = random_density(seed, 2);
        let grid = footprint_grid(phi.environment(), &phi, 0.5, r).unwrap();
        assert_partition(&grid, 1.0, |c| phi.power_integral_clipped(0.5, c));
        for cell in &grid {
            let bb = cell.bounding_box();
            prop_assert!(bb.width().max(bb.height()) <= footprint_side(r) * (1.0 + 1e-9));
            prop_assert!(bb.half_diagonal() <= r + 1e-12);
        }
    }
}

#[test]
fn sweep_length_bound() {
    let square = ConvexPolygon::unit_square();
    let mut last = f64::INFINITY;
    for k in 0..5 {
        let r = 0.1 * 0.5f64.powi(k);
        let plan = plan_sweep(&square, r);
        // N_sq squares of side 2r cover the region; P is its perimeter.
        let n_sq = (1.0 / (2.0 * r) - 1e-9).ceil().powi(2);
        assert!(plan.total_length <= 2.0 * r * n_sq + square.perimeter() + 1e-9);
        last = plan.total_length * r;
    }
    assert!(last <= 0.5 * 1.05, "{last}");
}

#[test]
fn biased_tilings_partition_each_region() {
    for (levels, r) in [(vec![1.8, 0.2], 0.3), (vec![36.0, 9.0, 4.0, 1.0], 0.2), (vec![3.0, 1.0, 2.0], 0.15)] {
        let phi = banded(&levels);
        let counts = auto_k(&phi, 0.5, DEFAULT_SLACK).unwrap();
        let bts = bts_tiling(&phi, &counts).unwrap();
        for (j, tiles) in bts.tiles.iter().enumerate() {
            let region = &phi.regions()[j];
            assert_eq!(tiles.len(), counts.counts[j]);
            assert_partition(tiles, region.cell.area(), ConvexPolygon::area);
            // Tile area A_j sqrt(mu_j) / K up to the count rounding.
            let ideal = region.cell.area() * (region.level / phi.min_level()).sqrt() / counts.k as f64;
            let got = tiles[0].area();
            assert!((got - ideal).abs() / ideal <= 0.05 + 1e-9, "{got} vs {ideal}");
        }
        let counts = auto_k(&phi, 1.0 / 3.0, DEFAULT_SLACK).unwrap();
        let bttsp = bttsp_tiling(&phi, &counts, r).unwrap();
        let (c, s) = bttsp.subdivision;
        for (j, tiles) in bttsp.tiles.iter().enumerate() {
            assert_eq!(tiles.len(), counts.counts[j] * c * s);
            assert_partition(tiles, phi.regions()[j].cell.area(), ConvexPolygon::area);
            for t in tiles {
                assert!(t.bounding_box().half_diagonal() <= r + 1e-12);
            }
        }
        let uttsp = uttsp_tiling(&phi, r).unwrap();
        assert_partition(&uttsp.tiles[0], 1.0, |t| phi.power_integral_clipped(0.5, t));
    }
}

#[test]
fn frequency_program_matches_closed_form() {
    for seed in 0..20 {
        let phi = random_density(1000 + seed, 1 + seed as usize % 4);
        let r = 0.01;
        let profile = optimal_frequency(&phi, 1, 1.0, r, 64);
        let closed = small_r_biased(&phi, 1, 1.0, r);
        let rel = (0.5 * profile.objective() - closed).abs() / closed;
        assert!(rel < 1e-6, "seed {seed}: relative error {rel}");
    }
    let phi = banded(&[1.8, 0.2]);
    let p = optimal_frequency(&phi, 2, 1.5, 0.02, 32);
    let f = |level: f64| p.cells.iter().find(|c| (c.level - level).abs() < 1e-12).unwrap().frequency;
    assert!((f(1.8) / f(0.2) - 3.0).abs() < 1e-6);
}

#[test]
fn bounds_scale_as_stated() {
    for seed in 0..20 {
        let phi = random_density(seed, 3);
        let (l, r) = (50.0, 0.02);
        for (b1, b2) in [
            (small_r_biased(&phi, 1, 1.0, r), small_r_biased(&phi, 2, 1.0, r)),
            (heavy_unbiased(&phi, l, 1, 1.0), heavy_unbiased(&phi, l, 1, 2.0)),
            (heavy_biased(&phi, l, 1, 1.0), heavy_biased(&phi, l, 2, 1.0)),
        ] {
            assert!(b1 > 0.0 && b2 < b1);
        }
        assert!((small_r_biased(&phi, 1, 1.0, r / 2.0) - 2.0 * small_r_biased(&phi, 1, 1.0, r)).abs() < 1e-9);
        assert!((heavy_biased(&phi, 2.0 * l, 1, 1.0) - 2.0 * heavy_biased(&phi, l, 1, 1.0)).abs() < 1e-9);
        assert!(heavy_biased(&phi, l, 1, 1.0) <= heavy_unbiased(&phi, l, 1, 1.0) + 1e-12);
        assert!(small_r_biased(&phi, 1, 1.0, r) <= small_r_unbiased(1.0, 1, 1.0, r) + 1e-12);
    }
}
