//! Geometric billiards on Euclidean, flat-torus, hyperbolic and spherical
//! tables: exact geodesic tracing, the causality and billiard maps, the
//! cosine boundary measure, well-balanced Lyapunov functions, ergodic
//! averages and scattering-data reconstruction.
//!
//! All tables are immutable after construction. Monte Carlo work is split
//! into fixed-size batches with independent random streams, so results do
//! not depend on the number of worker threads.

pub mod cli;
pub mod dynamics;
mod error;
pub mod ergodic;
pub mod geometry;
pub mod holography;
pub mod lyapunov;
pub mod measure;
pub mod parallel;

pub use error::{Error, Result};
pub use geometry::{PhasePoint, Table};
pub use measure::Estimate;

/// Volume of the Euclidean unit ball `B^k`.
pub fn unit_ball_volume(k: usize) -> f64 {
    use std::f64::consts::PI;
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(k - 2) * 2.0 * PI / k as f64,
    }
}

/// Volume of the unit sphere `S^k` in `R^{k+1}`.
pub fn unit_sphere_volume(k: usize) -> f64 {
    (k + 1) as f64 * unit_ball_volume(k + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn unit_volumes() {
        assert_relative_eq!(unit_ball_volume(1), 2.0);
        assert_relative_eq!(unit_ball_volume(2), PI);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0);
        assert_relative_eq!(unit_sphere_volume(1), 2.0 * PI);
        assert_relative_eq!(unit_sphere_volume(2), 4.0 * PI);
    }
}
