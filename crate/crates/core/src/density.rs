//! Piecewise-uniform spatial densities and their power integrals.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexPolygon, GeometryError, Point};

/// Relative tolerance on normalization and exact-cover checks.
const NORMALIZATION_TOL: f64 = 1e-9;
/// Largest interior overlap allowed between two density cells.
const OVERLAP_TOL: f64 = 1e-12;

/// Upper end of the epsilon family, where the small region carries 99% of the mass.
pub const EPSILON_MAX: f64 = 0.89;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("density needs at least one region")]
    Empty,
    #[error("region {index} has invalid level {level}")]
    InvalidLevel { index: usize, level: f64 },
    #[error("region {0} extends outside the environment")]
    RegionOutsideEnvironment(usize),
    #[error("regions {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("regions cover area {covered} but the environment has area {expected}")]
    CoverMismatch { covered: f64, expected: f64 },
    #[error("density integrates to {0}, expected 1")]
    NotNormalized(f64),
    #[error("query polygon extends outside the density support")]
    OutsideSupport,
    #[error("epsilon {0} outside [0, {EPSILON_MAX}]")]
    EpsilonOutOfRange(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A convex cell with a constant density level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRegion {
    pub cell: ConvexPolygon,
    pub level: f64,
}

/// Density that is constant on each cell of a convex partition of the environment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseUniformDensity {
    environment: ConvexPolygon,
    regions: Vec<DensityRegion>,
}

impl<'de> Deserialize<'de> for PiecewiseUniformDensity {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            environment: ConvexPolygon,
            regions: Vec<DensityRegion>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Self::new(raw.environment, raw.regions).map_err(serde::de::Error::custom)
    }
}

impl PiecewiseUniformDensity {
    pub fn new(
        environment: ConvexPolygon,
        regions: Vec<DensityRegion>,
    ) -> Result<Self, DensityError> {
        if regions.is_empty() {
            return Err(DensityError::Empty);
        }
        let env_area = environment.area();
        let mut covered = 0.0;
        let mut mass = 0.0;
        for (index, region) in regions.iter().enumerate() {
            let level = region.level;
            if !(level.is_finite() && level > 0.0) {
                return Err(DensityError::InvalidLevel { index, level });
            }
            let a = region.cell.area();
            let inside = region.cell.intersection_area(&environment);
            if (a - inside).abs() > NORMALIZATION_TOL * a.max(1.0) {
                return Err(DensityError::RegionOutsideEnvironment(index));
            }
            covered += a;
            mass += level * a;
        }
        for i in 0..regions.len() {
            for j in i + 1..regions.len() {
                if regions[i].cell.intersection_area(&regions[j].cell) > OVERLAP_TOL {
                    return Err(DensityError::Overlap(i, j));
                }
            }
        }
        if (covered - env_area).abs() > NORMALIZATION_TOL * env_area.max(1.0) {
            return Err(DensityError::CoverMismatch {
                covered,
                expected: env_area,
            });
        }
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DensityError::NotNormalized(mass));
        }
        Ok(Self {
            environment,
            regions,
        })
    }

    /// Uniform density `1/A` on the environment.
    pub fn uniform(environment: ConvexPolygon) -> Self {
        let level = 1.0 / environment.area();
        Self {
            regions: vec![DensityRegion {
                cell: environment.clone(),
                level,
            }],
            environment,
        }
    }

    /// Two-region family on the unit square: a top band of area 0.1 with
    /// level `1 + 10 eps` over a bottom rectangle with level `1 - 10 eps / 9`.
    pub fn epsilon_family(eps: f64) -> Result<Self, DensityError> {
        if !(0.0..=EPSILON_MAX).contains(&eps) {
            return Err(DensityError::EpsilonOutOfRange(eps));
        }
        let small = ConvexPolygon::rectangle(0.0, 0.9, 1.0, 1.0)?;
        let big = ConvexPolygon::rectangle(0.0, 0.0, 1.0, 0.9)?;
        Self::new(
            ConvexPolygon::unit_square(),
            vec![
                DensityRegion {
                    cell: small,
                    level: 1.0 + 10.0 * eps,
                },
                DensityRegion {
                    cell: big,
                    level: 1.0 - 10.0 * eps / 9.0,
                },
            ],
        )
    }

    /// Random density: `cuts` random straight cuts of the environment and
    /// levels drawn from `[0.05, 5]`, then normalized.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, environment: &ConvexPolygon, cuts: usize) -> Self {
        let mut cells = vec![environment.clone()];
        let bb = environment.bounding_box();
        let mut attempts = 0;
        while cells.len() < cuts + 1 && attempts < 50 * (cuts + 1) {
            attempts += 1;
            let idx = rng.random_range(0..cells.len());
            let anchor = Point::new(
                rng.random_range(bb.min.x..bb.max.x),
                rng.random_range(bb.min.y..bb.max.y),
            );
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let normal = Point::new(theta.cos(), theta.sin());
            let offset = normal.dot(anchor);
            let lo = cells[idx].clip_half_plane(normal, offset);
            let hi = cells[idx].clip_half_plane(normal * -1.0, -offset);
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if lo.area() > 1e-3 * environment.area() && hi.area() > 1e-3 * environment.area() {
                    cells[idx] = lo;
                    cells.push(hi);
                }
            }
        }
        let raw: Vec<f64> = cells.iter().map(|_| rng.random_range(0.05..5.0)).collect();
        let mass: f64 = cells.iter().zip(&raw).map(|(c, l)| c.area() * l).sum();
        let regions = cells
            .into_iter()
            .zip(raw)
            .map(|(cell, l)| DensityRegion {
                cell,
                level: l / mass,
            })
            .collect();
        Self {
            environment: environment.clone(),
            regions,
        }
    }

    pub fn environment(&self) -> &ConvexPolygon {
        &self.environment
    }

    pub fn regions(&self) -> &[DensityRegion] {
        &self.regions
    }

    pub fn min_level(&self) -> f64 {
        self.regions.iter().map(|r| r.level).fold(f64::INFINITY, f64::min)
    }

    pub fn is_uniform(&self) -> bool {
        let lo = self.min_level();
        self.regions
            .iter()
            .all(|r| (r.level - lo).abs() <= 1e-12 * lo.max(1.0))
    }

    /// Index of the first region containing `q`.
    pub fn region_of(&self, q: Point) -> Option<usize> {
        self.regions.iter().position(|r| r.cell.contains(q))
    }

    pub fn level_at(&self, q: Point) -> Option<f64> {
        self.region_of(q).map(|j| self.regions[j].level)
    }

    /// `sum_j level_j^alpha * area(cell_j ∩ over)`; `over = None` means the
    /// whole environment.
    pub fn power_integral(
        &self,
        alpha: f64,
        over: Option<&ConvexPolygon>,
    ) -> Result<f64, DensityError> {
        match over {
            None => Ok(self
                .regions
                .iter()
                .map(|r| r.level.powf(alpha) * r.cell.area())
                .sum()),
            Some(poly) => {
                let inside = poly.intersection_area(&self.environment);
                if (inside - poly.area()).abs() > NORMALIZATION_TOL * poly.area().max(1.0) {
                    return Err(DensityError::OutsideSupport);
                }
                Ok(self.power_integral_clipped(alpha, poly))
            }
        }
    }

    /// Like [`power_integral`](Self::power_integral) but silently ignores the
    /// part of `poly` outside the support.
    pub fn power_integral_clipped(&self, alpha: f64, poly: &ConvexPolygon) -> f64 {
        self.regions
            .iter()
            .map(|r| r.level.powf(alpha) * r.cell.intersection_area(poly))
            .sum()
    }

    /// Probability mass `phi(S)`. A polygon disjoint from the environment has
    /// mass zero; one that straddles the boundary is an error.
    pub fn region_mass(&self, over: &ConvexPolygon) -> Result<f64, DensityError> {
        if self.environment.intersection(over).is_none() {
            return Ok(0.0);
        }
        self.power_integral(1.0, Some(over)).map(|m| m.clamp(0.0, 1.0))
    }

    /// Density conditioned on `cell`: `phi / phi(cell)` restricted to `cell`.
    pub fn restricted_to(&self, cell: &ConvexPolygon) -> Option<Self> {
        let pieces: Vec<(ConvexPolygon, f64)> = self
            .regions
            .iter()
            .filter_map(|r| r.cell.intersection(cell).map(|c| (c, r.level)))
            .collect();
        let mass: f64 = pieces.iter().map(|(c, l)| c.area() * l).sum();
        if pieces.is_empty() || mass <= 0.0 {
            return None;
        }
        let environment = cell.intersection(&self.environment)?;
        Some(Self {
            environment,
            regions: pieces
                .into_iter()
                .map(|(cell, level)| DensityRegion {
                    cell,
                    level: level / mass,
                })
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_split(left: f64, right: f64) -> PiecewiseUniformDensity {
        PiecewiseUniformDensity::new(
            ConvexPolygon::unit_square(),
            vec![
                DensityRegion {
                    cell: ConvexPolygon::rectangle(0.0, 0.0, 0.5, 1.0).unwrap(),
                    level: left,
                },
                DensityRegion {
                    cell: ConvexPolygon::rectangle(0.5, 0.0, 1.0, 1.0).unwrap(),
                    level: right,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn power_integral_examples() {
        let u = PiecewiseUniformDensity::uniform(ConvexPolygon::unit_square());
        assert!((u.power_integral(0.5, None).unwrap() - 1.0).abs() < 1e-15);
        let d = half_split(1.8, 0.2);
        // Closed-form sums evaluated by hand.
        let half = 0.5 * 1.8f64.sqrt() + 0.5 * 0.2f64.sqrt();
        assert!((half - 0.894427).abs() < 1e-6);
        assert!((d.power_integral(0.5, None).unwrap() - half).abs() < 1e-12);
        let two_thirds = 0.5 * 1.8f64.powf(2.0 / 3.0) + 0.5 * 0.2f64.powf(2.0 / 3.0);
        assert!((two_thirds - 0.910861).abs() < 1e-6);
        assert!((d.power_integral(2.0 / 3.0, None).unwrap() - two_thirds).abs() < 1e-12);
    }

    #[test]
    fn power_integral_over_subpolygon() {
        let d = half_split(1.8, 0.2);
        let left = ConvexPolygon::rectangle(0.0, 0.0, 0.5, 1.0).unwrap();
        let got = d.power_integral(0.5, Some(&left)).unwrap();
        assert!((got - 0.5 * 1.8f64.sqrt()).abs() < 1e-12);
        let outside = ConvexPolygon::rectangle(0.5, 0.5, 1.5, 1.0).unwrap();
        assert_eq!(
            d.power_integral(0.5, Some(&outside)),
            Err(DensityError::OutsideSupport)
        );
    }

    #[test]
    fn region_mass_examples() {
        let d = half_split(1.8, 0.2);
        assert!((d.region_mass(&ConvexPolygon::unit_square()).unwrap() - 1.0).abs() < 1e-12);
        let eps = PiecewiseUniformDensity::epsilon_family(0.89).unwrap();
        let small = ConvexPolygon::rectangle(0.0, 0.9, 1.0, 1.0).unwrap();
        assert!((eps.region_mass(&small).unwrap() - 0.99).abs() < 1e-12);
    }

    #[test]
    fn region_mass_of_disjoint_polygon_is_zero() {
        let d = PiecewiseUniformDensity::uniform(ConvexPolygon::unit_square());
        let away = ConvexPolygon::rectangle(2.0, 2.0, 3.0, 3.0).unwrap();
        assert_eq!(d.region_mass(&away).unwrap(), 0.0);
        let straddling = ConvexPolygon::rectangle(0.5, 0.5, 1.5, 1.5).unwrap();
        assert!(d.region_mass(&straddling).is_err());
    }

    #[test]
    fn epsilon_family_examples() {
        let zero = PiecewiseUniformDensity::epsilon_family(0.0).unwrap();
        assert!(zero.is_uniform());
        assert!(zero.regions().iter().all(|r| (r.level - 1.0).abs() < 1e-15));
        let mid = PiecewiseUniformDensity::epsilon_family(0.45).unwrap();
        let small = ConvexPolygon::rectangle(0.0, 0.9, 1.0, 1.0).unwrap();
        assert!((mid.region_mass(&small).unwrap() - 0.55).abs() < 1e-12);
        assert!(matches!(
            PiecewiseUniformDensity::epsilon_family(0.9),
            Err(DensityError::EpsilonOutOfRange(_))
        ));
        assert!(PiecewiseUniformDensity::epsilon_family(-0.1).is_err());
    }

    #[test]
    fn validation_errors() {
        let sq = ConvexPolygon::unit_square();
        let left = ConvexPolygon::rectangle(0.0, 0.0, 0.5, 1.0).unwrap();
        let right = ConvexPolygon::rectangle(0.5, 0.0, 1.0, 1.0).unwrap();
        let bad_level = PiecewiseUniformDensity::new(
            sq.clone(),
            vec![DensityRegion { cell: sq.clone(), level: 0.0 }],
        );
        assert!(matches!(bad_level, Err(DensityError::InvalidLevel { .. })));
        let not_normalized = PiecewiseUniformDensity::new(
            sq.clone(),
            vec![DensityRegion { cell: sq.clone(), level: 2.0 }],
        );
        assert!(matches!(not_normalized, Err(DensityError::NotNormalized(_))));
        let gap = PiecewiseUniformDensity::new(
            sq.clone(),
            vec![DensityRegion { cell: left.clone(), level: 2.0 }],
        );
        assert!(matches!(gap, Err(DensityError::CoverMismatch { .. })));
        let overlap = PiecewiseUniformDensity::new(
            sq.clone(),
            vec![
                DensityRegion { cell: left, level: 0.5 },
                DensityRegion { cell: sq.clone(), level: 0.5 },
            ],
        );
        assert!(matches!(overlap, Err(DensityError::Overlap(0, 1))));
        let outside = PiecewiseUniformDensity::new(
            sq,
            vec![DensityRegion { cell: right.translated(Point::new(0.25, 0.0)), level: 1.0 }],
        );
        assert!(matches!(outside, Err(DensityError::RegionOutsideEnvironment(0))));
    }

    #[test]
    fn restriction_renormalizes() {
        let d = half_split(1.8, 0.2);
        let cell = ConvexPolygon::rectangle(0.25, 0.0, 0.75, 1.0).unwrap();
        let local = d.restricted_to(&cell).unwrap();
        assert!((local.power_integral(1.0, None).unwrap() - 1.0).abs() < 1e-12);
        // Level ratio is preserved.
        let levels: Vec<f64> = local.regions().iter().map(|r| r.level).collect();
        assert!((levels[0] / levels[1] - 9.0).abs() < 1e-9);
    }
}
