//! Simulation of dynamic repair with limited-range sensing: targets arrive
//! as a spatio-temporal Poisson process over a convex environment and must be
//! detected within radius `r` before they can be serviced.

pub mod density;
pub mod geometry;
pub mod stochastic;
pub mod tsp;
pub mod coverage;
pub mod partition;
pub mod bounds;
pub mod policies;
pub mod engine;
