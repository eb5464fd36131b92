//! Closed-form lower bounds on the system time and the optimal search
//! frequency program behind the small-radius biased bound.

use serde::{Deserialize, Serialize};

use crate::density::PiecewiseUniformDensity;
use crate::geometry::ConvexPolygon;
use crate::tsp::BHH_BETA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmallR,
    HeavyLoad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    Unbiased,
    Biased,
}

/// `A / (4 m v r)`.
pub fn small_r_unbiased(area: f64, m: usize, v: f64, r: f64) -> f64 {
    area / (4.0 * m as f64 * v * r)
}

/// `(∫ sqrt(phi))^2 / (4 m v r)`.
pub fn small_r_biased(phi: &PiecewiseUniformDensity, m: usize, v: f64, r: f64) -> f64 {
    let s = root_integral(phi);
    s * s / (4.0 * m as f64 * v * r)
}

/// `lambda beta^2 (∫ sqrt(phi))^2 / (2 m^2 v^2)`.
pub fn heavy_unbiased(phi: &PiecewiseUniformDensity, lambda: f64, m: usize, v: f64) -> f64 {
    let s = root_integral(phi);
    lambda * BHH_BETA * BHH_BETA * s * s / (2.0 * (m * m) as f64 * v * v)
}

/// `lambda beta^2 (∫ phi^(2/3))^3 / (2 m^2 v^2)`.
pub fn heavy_biased(phi: &PiecewiseUniformDensity, lambda: f64, m: usize, v: f64) -> f64 {
    let s = phi
        .power_integral(2.0 / 3.0, None)
        .expect("whole-environment integral is infallible");
    lambda * BHH_BETA * BHH_BETA * s.powi(3) / (2.0 * (m * m) as f64 * v * v)
}

fn root_integral(phi: &PiecewiseUniformDensity) -> f64 {
    phi.power_integral(0.5, None)
        .expect("whole-environment integral is infallible")
}

/// Selects one of the four bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub regime: Regime,
    pub bias: Bias,
    pub m: usize,
    pub v: f64,
    pub r: f64,
    pub lambda: f64,
}

impl BoundSpec {
    pub fn evaluate(&self, phi: &PiecewiseUniformDensity) -> f64 {
        match (self.regime, self.bias) {
            (Regime::SmallR, Bias::Unbiased) => {
                small_r_unbiased(phi.environment().area(), self.m, self.v, self.r)
            }
            (Regime::SmallR, Bias::Biased) => small_r_biased(phi, self.m, self.v, self.r),
            (Regime::HeavyLoad, Bias::Unbiased) => heavy_unbiased(phi, self.lambda, self.m, self.v),
            (Regime::HeavyLoad, Bias::Biased) => heavy_biased(phi, self.lambda, self.m, self.v),
        }
    }
}

/// One element of the discretized environment; `phi` is constant on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCell {
    pub cell: ConvexPolygon,
    pub area: f64,
    pub level: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub cells: Vec<FrequencyCell>,
    pub gamma: f64,
    /// `2 m v r`.
    pub capacity: f64,
}

impl FrequencyProfile {
    /// `∫ f`.
    pub fn total_frequency(&self) -> f64 {
        self.cells.iter().map(|c| c.area * c.frequency).sum()
    }

    /// `∫ phi / f`.
    pub fn objective(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.area * c.level / c.frequency)
            .sum()
    }
}

pub const DEFAULT_RESOLUTION: usize = 128;

/// Minimizes `∫ phi/f` subject to `∫ f <= 2 m v r` on a `resolution`-square
/// grid. Stationarity gives `f = sqrt(phi / gamma)`; `gamma` is found by
/// bisection on the binding capacity constraint.
pub fn optimal_frequency(
    phi: &PiecewiseUniformDensity,
    m: usize,
    v: f64,
    r: f64,
    resolution: usize,
) -> FrequencyProfile {
    assert!(resolution >= 32, "resolution must be at least 32");
    let bb = phi.environment().bounding_box();
    let (dx, dy) = (bb.width() / resolution as f64, bb.height() / resolution as f64);
    let mut cells = Vec::new();
    for i in 0..resolution {
        for j in 0..resolution {
            let x0 = bb.min.x + dx * i as f64;
            let y0 = bb.min.y + dy * j as f64;
            let Ok(square) = ConvexPolygon::rectangle(x0, y0, x0 + dx, y0 + dy) else {
                continue;
            };
            for region in phi.regions() {
                if let Some(piece) = square.intersection(&region.cell) {
                    cells.push(FrequencyCell {
                        area: piece.area(),
                        cell: piece,
                        level: region.level,
                        frequency: 0.0,
                    });
                }
            }
        }
    }
    let capacity = 2.0 * m as f64 * v * r;
    let used = |gamma: f64| -> f64 {
        cells
            .iter()
            .map(|c| c.area * (c.level / gamma).sqrt())
            .sum()
    };
    // Usage decreases in gamma; bracket the root, then bisect in log space.
    let (mut lo, mut hi) = (1.0, 1.0);
    while used(lo) < capacity {
        lo *= 0.5;
    }
    while used(hi) > capacity {
        hi *= 2.0;
    }
    let mut gamma = (lo * hi).sqrt();
    for _ in 0..200 {
        gamma = (lo * hi).sqrt();
        let u = used(gamma);
        if (u - capacity).abs() <= 1e-13 * capacity {
            break;
        }
        if u > capacity {
            lo = gamma;
        } else {
            hi = gamma;
        }
    }
    for c in &mut cells {
        c.frequency = (c.level / gamma).sqrt();
    }
    FrequencyProfile {
        cells,
        gamma,
        capacity,
    }
}
