use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{ModelSpace, PhasePoint, Shape, Table, Vector};
use crate::{Error, Result};

/// Coordinates of a boundary phase point.
///
/// * `pos`: angle around the piece center (n = 2), or polar and azimuthal
///   angles (n = 3), measured in an orthonormal frame at the center.
/// * `dir`: signed angle from the inward normal (n = 2), or the two
///   tangential components of `v` (n = 3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoords {
    pub piece: usize,
    pub pos: [f64; 2],
    pub dir: [f64; 2],
}

fn piece_center(table: &Table, piece: usize) -> Result<Vector> {
    match &table.pieces()[piece].shape {
        Shape::Ball { center, .. } => Ok(*center),
        Shape::Fourier(c) => Ok(Vector::new(c.center[0], c.center[1], 0.0, 0.0)),
        Shape::HalfSpace { .. } => Err(Error::Unsupported("boundary coordinates on half-space pieces".into())),
    }
}

fn frame_components(space: &ModelSpace, center: &Vector, d: &Vector) -> Vec<f64> {
    space.tangent_frame(center).iter().map(|e| space.metric_dot(center, d, e)).collect()
}

pub fn boundary_coords(table: &Table, z: &PhasePoint) -> Result<BoundaryCoords> {
    let space = table.space();
    let (piece, image) = table.locate(&z.q).map_err(|gauge| Error::NotOnBoundary { gauge })?;
    let center = piece_center(table, piece)?;
    let d = space.log_dir(&center, &z.q);
    let c = frame_components(space, &center, &d);
    let n = table.normal_on(piece, image, &z.q);
    let frame = space.complement_frame(&z.q, &n);
    let vn = space.metric_dot(&z.q, &z.v, &n);
    let (pos, dir) = if table.dim() == 2 {
        let vt = space.metric_dot(&z.q, &z.v, &frame[0]);
        ([c[1].atan2(c[0]).rem_euclid(TAU), 0.0], [vt.atan2(vn), 0.0])
    } else {
        (
            [c[2].clamp(-1.0, 1.0).acos(), c[1].atan2(c[0]).rem_euclid(TAU)],
            [space.metric_dot(&z.q, &z.v, &frame[0]), space.metric_dot(&z.q, &z.v, &frame[1])],
        )
    };
    Ok(BoundaryCoords { piece, pos, dir })
}

/// Inverse of [`boundary_coords`].
pub fn entry_from_coords(table: &Table, c: &BoundaryCoords) -> Result<PhasePoint> {
    let space = table.space();
    let piece = c.piece;
    let shape = &table.pieces().get(piece).ok_or_else(|| Error::Config(format!("no piece {piece}")))?.shape;
    let q = match shape {
        Shape::Fourier(curve) => curve.point(c.pos[0]),
        Shape::Ball { center, radius } => {
            let frame = space.tangent_frame(center);
            let w = if table.dim() == 2 {
                frame[0] * c.pos[0].cos() + frame[1] * c.pos[0].sin()
            } else {
                let (st, ct) = c.pos[0].sin_cos();
                frame[0] * (st * c.pos[1].cos()) + frame[1] * (st * c.pos[1].sin()) + frame[2] * ct
            };
            match space {
                ModelSpace::Euclidean { .. } | ModelSpace::FlatTorus { .. } => space.wrap(&(center + w * *radius)),
                _ => space.exp(center, &w, *radius),
            }
        }
        Shape::HalfSpace { .. } => return Err(Error::Unsupported("boundary coordinates on half-space pieces".into())),
    };
    let image = table.piece_gauge(piece, &q).1;
    let n = table.normal_on(piece, image, &q);
    let frame = space.complement_frame(&q, &n);
    let v = if table.dim() == 2 {
        n * c.dir[0].cos() + frame[0] * c.dir[0].sin()
    } else {
        let u2 = c.dir[0] * c.dir[0] + c.dir[1] * c.dir[1];
        n * (1.0 - u2).max(0.0).sqrt() + frame[0] * c.dir[0] + frame[1] * c.dir[1]
    };
    Ok(PhasePoint::new(q, space.normalize(&q, &v)))
}

/// Axis-aligned box in boundary coordinates. Missing ranges are unconstrained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox {
    pub piece: Option<usize>,
    pub pos: Vec<[f64; 2]>,
    pub dir: Vec<[f64; 2]>,
}

impl PhaseBox {
    /// Box on the first position and direction coordinates.
    pub fn new(piece: Option<usize>, pos: [f64; 2], dir: [f64; 2]) -> Self {
        PhaseBox { piece, pos: vec![pos], dir: vec![dir] }
    }

    pub fn contains(&self, c: &BoundaryCoords) -> bool {
        if self.piece.is_some_and(|p| p != c.piece) {
            return false;
        }
        let inside = |ranges: &[[f64; 2]], xs: &[f64; 2]| ranges.iter().zip(xs).all(|(r, x)| r[0] <= *x && *x <= r[1]);
        inside(&self.pos, &c.pos) && inside(&self.dir, &c.dir)
    }

    /// Random box on a random piece, with widths between a tenth and about
    /// half of each coordinate range.
    pub fn random<R: Rng + ?Sized>(table: &Table, rng: &mut R) -> Self {
        let piece = rng.random_range(0..table.pieces().len());
        let mut span = |lo: f64, hi: f64| {
            let w = (hi - lo) * rng.random_range(0.1..0.5);
            let a = lo + rng.random::<f64>() * (hi - lo - w);
            [a, a + w]
        };
        if table.dim() == 2 {
            let pos = span(0.0, TAU);
            let dir = span(-FRAC_PI_2, FRAC_PI_2);
            PhaseBox::new(Some(piece), pos, dir)
        } else {
            let pos = vec![span(0.0, PI), span(0.0, TAU)];
            let dir = vec![span(-1.0, 1.0), span(-1.0, 1.0)];
            PhaseBox { piece: Some(piece), pos, dir }
        }
    }
}
