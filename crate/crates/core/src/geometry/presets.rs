//! Named tables shipped with the library.

use std::f64::consts::PI;

use super::{vec2, vec3, BoundaryPiece, FourierCurve, ModelSpace, Side, Table};
use crate::{Error, Result};

/// Every preset name accepted by [`by_name`].
pub const NAMES: &[&str] = &[
    "disk",
    "ball3",
    "ellipse",
    "torus-one-ball",
    "torus-two-balls",
    "hyperbolic-disk-0.5",
    "hyperbolic-disk-1",
    "hyperbolic-disk-2",
    "spherical-cap-pi6",
    "spherical-cap-pi4",
];

pub fn by_name(name: &str) -> Result<Table> {
    let t = match name {
        "disk" => unit_disk(),
        "ball3" => unit_ball(),
        "ellipse" => ellipse(),
        "torus-one-ball" => torus_one_ball(0.1),
        "torus-two-balls" => torus_two_balls(),
        "hyperbolic-disk-0.5" => hyperbolic_disk(0.5),
        "hyperbolic-disk-1" => hyperbolic_disk(1.0),
        "hyperbolic-disk-2" => hyperbolic_disk(2.0),
        "spherical-cap-pi6" => spherical_cap(PI / 6.0),
        "spherical-cap-pi4" => spherical_cap(PI / 4.0),
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (known: {})",
                NAMES.join(", ")
            )))
        }
    };
    Ok(t.with_name(name))
}

fn build(space: ModelSpace, pieces: Vec<BoundaryPiece>, name: &str) -> Table {
    Table::new(space, pieces).expect("preset tables are valid").with_name(name)
}

pub fn unit_disk() -> Table {
    build(
        ModelSpace::Euclidean { dim: 2 },
        vec![BoundaryPiece::ball(vec2(0.0, 0.0), 1.0, Side::Outer)],
        "disk",
    )
}

pub fn unit_ball() -> Table {
    build(
        ModelSpace::Euclidean { dim: 3 },
        vec![BoundaryPiece::ball(vec3(0.0, 0.0, 0.0), 1.0, Side::Outer)],
        "ball3",
    )
}

/// Fourier fit of the ellipse with semi-axes 1.25 and 0.8.
pub fn ellipse() -> Table {
    build(
        ModelSpace::Euclidean { dim: 2 },
        vec![BoundaryPiece::fourier(FourierCurve::ellipse([0.0, 0.0], 1.25, 0.8, 40), Side::Outer)],
        "ellipse",
    )
}

/// Unit square torus minus one ball of radius `eps` at its center. Has
/// free corridors, so free paths are unbounded.
pub fn torus_one_ball(eps: f64) -> Table {
    build(
        ModelSpace::FlatTorus { dim: 2, periods: vec![1.0, 1.0] },
        vec![BoundaryPiece::ball(vec2(0.5, 0.5), eps, Side::Obstacle)],
        "torus-one-ball",
    )
}

/// Unit square torus minus balls of radius 0.4 at the corner and 0.2 at the
/// center. Every line meets an obstacle (finite horizon).
pub fn torus_two_balls() -> Table {
    build(
        ModelSpace::FlatTorus { dim: 2, periods: vec![1.0, 1.0] },
        vec![
            BoundaryPiece::ball(vec2(0.0, 0.0), 0.4, Side::Obstacle),
            BoundaryPiece::ball(vec2(0.5, 0.5), 0.2, Side::Obstacle),
        ],
        "torus-two-balls",
    )
}

/// Hyperbolic disk of geodesic radius `r` centered at the chart origin.
pub fn hyperbolic_disk(r: f64) -> Table {
    build(
        ModelSpace::HyperbolicBall { dim: 2 },
        vec![BoundaryPiece::ball(vec2(0.0, 0.0), r, Side::Outer)],
        &format!("hyperbolic-disk-{r}"),
    )
}

/// Cap of geodesic radius `rho` around the north pole of the unit sphere.
pub fn spherical_cap(rho: f64) -> Table {
    build(
        ModelSpace::Sphere { dim: 2 },
        vec![BoundaryPiece::ball(vec3(0.0, 0.0, 1.0), rho, Side::Outer)],
        &format!("spherical-cap-{rho:.4}"),
    )
}
