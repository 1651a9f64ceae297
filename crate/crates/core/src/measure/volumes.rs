use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{ModelSpace, Shape, Side, Table};
use crate::{unit_ball_volume, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainVolumes {
    pub vol_m: f64,
    pub vol_dm: f64,
}

/// (volume, boundary volume) of a geodesic ball of radius `r`.
fn ball_volumes(space: &ModelSpace, r: f64) -> (f64, f64) {
    match (space, space.dim()) {
        (ModelSpace::HyperbolicBall { .. }, 2) => (2.0 * PI * (r.cosh() - 1.0), 2.0 * PI * r.sinh()),
        (ModelSpace::HyperbolicBall { .. }, _) => (PI * ((2.0 * r).sinh() - 2.0 * r), 4.0 * PI * r.sinh().powi(2)),
        (ModelSpace::Sphere { .. }, 2) => (2.0 * PI * (1.0 - r.cos()), 2.0 * PI * r.sin()),
        (ModelSpace::Sphere { .. }, _) => (PI * (2.0 * r - (2.0 * r).sin()), 4.0 * PI * r.sin().powi(2)),
        (_, 2) => (PI * r * r, 2.0 * PI * r),
        (_, _) => (4.0 / 3.0 * PI * r.powi(3), 4.0 * PI * r * r),
    }
}

fn piece_volumes(table: &Table, i: usize) -> Result<(f64, f64)> {
    match &table.pieces()[i].shape {
        Shape::Ball { radius, .. } => Ok(ball_volumes(table.space(), *radius)),
        Shape::Fourier(c) => Ok((c.area(), c.perimeter())),
        Shape::HalfSpace { .. } => Err(Error::Unsupported("volumes of half-space pieces".into())),
    }
}

pub fn piece_boundary_volume(table: &Table, i: usize) -> Result<f64> {
    Ok(piece_volumes(table, i)?.1)
}

/// Cumulative boundary volumes, for choosing a piece proportionally.
pub(crate) fn piece_weights(table: &Table) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    (0..table.pieces().len())
        .map(|i| {
            acc += piece_boundary_volume(table, i)?;
            Ok(acc)
        })
        .collect()
}

pub fn domain_volumes(table: &Table) -> Result<DomainVolumes> {
    let space = table.space();
    let mut outer = Vec::new();
    let mut removed = 0.0;
    let mut vol_dm = 0.0;
    for (i, p) in table.pieces().iter().enumerate() {
        let (v, a) = piece_volumes(table, i)?;
        vol_dm += a;
        match p.side {
            Side::Outer => outer.push(v),
            Side::Obstacle => removed += v,
        }
    }
    let ambient = match (space, outer.as_slice()) {
        (ModelSpace::FlatTorus { periods, .. }, []) => periods.iter().product(),
        (ModelSpace::Sphere { dim }, []) => crate::unit_sphere_volume(*dim),
        (_, [v]) => *v,
        (_, []) => return Err(Error::Unsupported("unbounded table has infinite volume".into())),
        _ => return Err(Error::Unsupported("volume of an intersection of outer walls".into())),
    };
    Ok(DomainVolumes { vol_m: ambient - removed, vol_dm })
}

/// Θ-volume of the trajectory space: `vol(B^{n-1}) · vol(∂M)`.
pub fn trajectory_space_volume(table: &Table) -> Result<f64> {
    let vol_dm: f64 = (0..table.pieces().len()).map(|i| piece_boundary_volume(table, i)).sum::<Result<f64>>()?;
    Ok(unit_ball_volume(table.dim() - 1) * vol_dm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use approx::assert_relative_eq;

    /// ∫∫ cos θ dθ ds over the inward half of the unit tangent circle bundle,
    /// by the midpoint rule on both factors.
    fn disk_quadrature(perimeter: f64) -> f64 {
        let m = 20_000;
        let h = PI / m as f64;
        let inner: f64 = (0..m).map(|j| (-PI / 2.0 + (j as f64 + 0.5) * h).cos() * h).sum();
        inner * perimeter
    }

    #[test]
    fn trajectory_space_volumes() {
        assert_relative_eq!(trajectory_space_volume(&presets::unit_disk()).unwrap(), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(disk_quadrature(2.0 * PI), 4.0 * PI, max_relative = 1e-8);
        assert_relative_eq!(trajectory_space_volume(&presets::unit_ball()).unwrap(), 4.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(
            trajectory_space_volume(&presets::hyperbolic_disk(1.0)).unwrap(),
            4.0 * PI * 1f64.sinh(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn domain_volume_examples() {
        let d = domain_volumes(&presets::unit_disk()).unwrap();
        assert_relative_eq!(d.vol_m, PI);
        assert_relative_eq!(d.vol_dm, 2.0 * PI);
        let t = domain_volumes(&presets::torus_one_ball(0.1)).unwrap();
        assert_relative_eq!(t.vol_m, 1.0 - 0.01 * PI, max_relative = 1e-15);
        assert_relative_eq!(t.vol_dm, 0.2 * PI, max_relative = 1e-15);
        let h = domain_volumes(&presets::hyperbolic_disk(1.0)).unwrap();
        assert_relative_eq!(h.vol_m, 2.0 * PI * (1f64.cosh() - 1.0), max_relative = 1e-15);
        assert_relative_eq!(h.vol_dm, 2.0 * PI * 1f64.sinh(), max_relative = 1e-15);
        let e = domain_volumes(&presets::ellipse()).unwrap();
        assert_relative_eq!(e.vol_m, PI * 1.25 * 0.8, max_relative = 1e-9);
    }

    #[test]
    fn curved_ball_volumes_match_radial_quadrature() {
        // area = ∫₀ʳ (boundary length at radius s) ds
        for space in [ModelSpace::HyperbolicBall { dim: 2 }, ModelSpace::HyperbolicBall { dim: 3 }, ModelSpace::Sphere { dim: 2 }, ModelSpace::Sphere { dim: 3 }] {
            let r = 0.9;
            let m = 10_000;
            let h = r / m as f64;
            let integral: f64 = (0..m).map(|j| ball_volumes(&space, (j as f64 + 0.5) * h).1 * h).sum();
            assert_relative_eq!(integral, ball_volumes(&space, r).0, max_relative = 1e-7);
        }
    }
}
