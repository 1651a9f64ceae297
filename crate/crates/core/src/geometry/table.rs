use serde::{Deserialize, Serialize};

use super::piece::{ball_crossing, BoundaryPiece, Kernel, Ray, Shape, Side, Trend};
use super::space::{ModelSpace, Vector};
use super::{PhasePoint, Stratum, StratumLabel};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Length tolerance for boundary membership and minimal hit distance.
    pub hit_tol: f64,
    /// Cosine band treated as tangent.
    pub grazing_tol: f64,
    /// Length cap for a single free path.
    pub l_max: f64,
}

impl Tolerances {
    pub fn for_diameter(diameter: f64) -> Self {
        Tolerances { hit_tol: 1e-10, grazing_tol: 1e-7, l_max: 1e4 * diameter }
    }
}

/// Result of tracing a geodesic to the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub s_hit: f64,
    /// Position and velocity at the hit (position snapped onto the piece).
    pub exit: PhasePoint,
    pub piece: usize,
    /// Lattice image of the piece that was hit (torus only, zero elsewhere).
    pub image: [i32; 3],
    pub cos_in: f64,
    pub stratum: Stratum,
}

/// A billiard table: a model space minus obstacle interiors, inside its outer
/// walls. Immutable once built.
#[derive(Clone, Debug)]
pub struct Table {
    name: String,
    space: ModelSpace,
    pieces: Vec<BoundaryPiece>,
    kernels: Vec<Kernel>,
    tol: Tolerances,
    diameter: f64,
}

const NO_IMAGE: [i32; 3] = [0, 0, 0];

impl Table {
    pub fn new(space: ModelSpace, pieces: Vec<BoundaryPiece>) -> Result<Self> {
        space.validate().map_err(Error::InvalidTable)?;
        if pieces.is_empty() {
            return Err(Error::InvalidTable("a table needs at least one boundary piece".into()));
        }
        let mut pieces = pieces;
        for p in &mut pieces {
            normalize_piece(&space, p)?;
        }
        let kernels = pieces
            .iter()
            .map(|p| Kernel::prepare(&space, &p.shape))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(Error::InvalidTable)?;
        let diameter = diameter_estimate(&space, &pieces, &kernels);
        let table = Table {
            name: String::from("custom"),
            space,
            pieces,
            kernels,
            tol: Tolerances::for_diameter(diameter),
            diameter,
        };
        table.check_disjoint()?;
        Ok(table)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Result<Self> {
        if !(tol.hit_tol > 0.0 && tol.grazing_tol >= 0.0 && tol.l_max > tol.hit_tol) {
            return Err(Error::InvalidTable(format!("bad tolerances {tol:?}")));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn with_l_max(mut self, l_max: f64) -> Result<Self> {
        let tol = Tolerances { l_max, ..self.tol };
        self = self.with_tolerances(tol)?;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn pieces(&self) -> &[BoundaryPiece] {
        &self.pieces
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Rough geodesic diameter used for default length caps.
    pub fn diameter_estimate(&self) -> f64 {
        self.diameter
    }

    /// Unit phase point at `q` pointing along `dir` (normalized in g).
    pub fn phase(&self, q: Vector, dir: Vector) -> PhasePoint {
        PhasePoint::new(q, self.space.normalize(&q, &dir))
    }

    fn image_offset(&self, image: [i32; 3]) -> Vector {
        let mut off = Vector::zeros();
        if let Some(periods) = self.space.periods() {
            for (i, &l) in periods.iter().enumerate() {
                off[i] = image[i] as f64 * l;
            }
        }
        off
    }

    fn neighbor_images(&self) -> Vec<[i32; 3]> {
        match self.space.periods() {
            None => vec![NO_IMAGE],
            Some(p) => {
                let n = p.len();
                let mut out = Vec::with_capacity(27);
                for a in -1..=1 {
                    for b in -1..=1 {
                        for c in -1..=1 {
                            if (n < 3 && c != 0) || (n < 2 && b != 0) {
                                continue;
                            }
                            out.push([a, b, c]);
                        }
                    }
                }
                out
            }
        }
    }

    /// Gauge of one piece and the lattice image realizing it.
    pub fn piece_gauge(&self, piece: usize, q: &Vector) -> (f64, [i32; 3]) {
        match (&self.kernels[piece], self.space.periods()) {
            (Kernel::EuclidBall { center, radius }, Some(_)) => self
                .neighbor_images()
                .into_iter()
                .map(|im| ((q - center - self.image_offset(im)).norm() - radius, im))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("at least one image"),
            (k, _) => (k.gauge(q, &self.space.lift_point(q)), NO_IMAGE),
        }
    }

    /// Table gauge: negative in the interior of the table.
    pub fn domain_gauge(&self, q: &Vector) -> f64 {
        (0..self.pieces.len())
            .map(|i| self.pieces[i].side.sign() * self.piece_gauge(i, q).0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, q: &Vector) -> bool {
        self.domain_gauge(q) <= self.tol.hit_tol
    }

    /// The piece whose zero set passes within `hit_tol` of `q`.
    pub fn locate(&self, q: &Vector) -> std::result::Result<(usize, [i32; 3]), f64> {
        let mut best = (f64::INFINITY, 0usize, NO_IMAGE);
        for i in 0..self.pieces.len() {
            let (g, im) = self.piece_gauge(i, q);
            if g.abs() < best.0 {
                best = (g.abs(), i, im);
            }
        }
        if best.0 <= self.tol.hit_tol {
            Ok((best.1, best.2))
        } else {
            Err(best.0)
        }
    }

    fn shifted_point(&self, q: &Vector, image: [i32; 3]) -> Vector {
        q - self.image_offset(image)
    }

    pub(crate) fn normal_on(&self, piece: usize, image: [i32; 3], q: &Vector) -> Vector {
        let local = self.shifted_point(q, image);
        let x = self.space.lift_point(&local);
        let g = self.kernels[piece].gradient(&self.space, &local, &x);
        self.space.normalize(q, &(g * -self.pieces[piece].side.sign()))
    }

    pub fn inward_normal(&self, q: &Vector) -> Result<Vector> {
        let (piece, image) = self.locate(q).map_err(|gauge| Error::NotOnBoundary { gauge })?;
        Ok(self.normal_on(piece, image, q))
    }

    /// Cosine between `v` and the inward normal, plus the piece id.
    pub fn boundary_cos(&self, z: &PhasePoint) -> Result<(f64, usize, [i32; 3])> {
        let (piece, image) = self.locate(&z.q).map_err(|gauge| Error::NotOnBoundary { gauge })?;
        let n = self.normal_on(piece, image, &z.q);
        Ok((self.space.metric_dot(&z.q, &z.v, &n), piece, image))
    }

    pub fn classify(&self, z: &PhasePoint) -> Result<Stratum> {
        let (cos_in, piece, _) = self.boundary_cos(z)?;
        Ok(self.stratum_for(z, cos_in, piece))
    }

    fn stratum_for(&self, z: &PhasePoint, cos_in: f64, piece: usize) -> Stratum {
        let g = self.tol.grazing_tol;
        let label = if cos_in > g {
            StratumLabel::TransversalIn
        } else if cos_in < -g {
            StratumLabel::TransversalOut
        } else {
            // curvature of the table gauge along the tangent geodesic
            let h = 1e-3;
            let side = self.pieces[piece].side.sign();
            let gauge = |s: f64| side * self.piece_gauge(piece, &self.space.geodesic_flow(z, s).q).0;
            let d2 = (gauge(h) - 2.0 * gauge(0.0) + gauge(-h)) / (h * h);
            if d2 > 1e-6 {
                StratumLabel::TangentConvex
            } else {
                StratumLabel::TangentConcave
            }
        };
        Stratum { label, cos_in }
    }

    pub fn first_boundary_hit(&self, z: &PhasePoint) -> Result<HitRecord> {
        self.first_boundary_hit_capped(z, self.tol.l_max)
    }

    pub fn first_boundary_hit_capped(&self, z: &PhasePoint, l_max: f64) -> Result<HitRecord> {
        let start = match self.locate(&z.q) {
            Ok((piece, image)) => {
                let n = self.normal_on(piece, image, &z.q);
                let cos_in = self.space.metric_dot(&z.q, &z.v, &n);
                if cos_in < -self.tol.grazing_tol {
                    return Err(Error::DegenerateStart { cos_in });
                }
                Some((piece, image))
            }
            Err(_) => None,
        };
        let ray = Ray {
            q: z.q,
            v: z.v,
            x: self.space.lift_point(&z.q),
            u: self.space.lift_vector(&z.q, &z.v),
        };
        let best = if self.space.periods().is_some() {
            self.torus_search(&ray, start, l_max)
        } else {
            let mut best: Option<(f64, usize, [i32; 3])> = None;
            for (i, (k, p)) in self.kernels.iter().zip(&self.pieces).enumerate() {
                let trend = match p.side {
                    Side::Outer => Trend::Up,
                    Side::Obstacle => Trend::Down,
                };
                let on_piece = matches!(start, Some((j, _)) if j == i);
                let hi = best.map_or(l_max, |b| b.0);
                if let Some(s) = k.crossing(&ray, trend, on_piece, self.tol.hit_tol, hi) {
                    best = Some((s, i, NO_IMAGE));
                }
            }
            best
        };
        let (s_hit, piece, image) = best.ok_or(Error::Trapped { l_max })?;
        Ok(self.finish_hit(z, s_hit, piece, image))
    }

    fn finish_hit(&self, z: &PhasePoint, s_hit: f64, piece: usize, image: [i32; 3]) -> HitRecord {
        let q = match self.space {
            ModelSpace::FlatTorus { .. } => {
                let unwrapped = z.q + z.v * s_hit;
                let local = self.shifted_point(&unwrapped, image);
                let snapped = self.kernels[piece].snap(&self.space, &local, &local);
                self.space.wrap(&(snapped + self.image_offset(image)))
            }
            _ => {
                let q = self.space.geodesic_flow(z, s_hit).q;
                self.kernels[piece].snap(&self.space, &q, &self.space.lift_point(&q))
            }
        };
        let v = self.space.geodesic_flow(z, s_hit).v;
        let v = self.space.normalize(&q, &v);
        let exit = PhasePoint::new(q, v);
        // image of the hit piece relative to the wrapped exit point
        let local_image = match self.space.periods() {
            Some(_) => self.piece_gauge(piece, &q).1,
            None => NO_IMAGE,
        };
        let n = self.normal_on(piece, local_image, &q);
        let cos_in = self.space.metric_dot(&q, &v, &n);
        let stratum = self.stratum_for(&exit, cos_in, piece);
        HitRecord { s_hit, exit, piece, image, cos_in, stratum }
    }

    /// Cell-by-cell traversal of the periodic lattice. Every ball image
    /// intersecting a cell is centered within one cell of it, so after testing
    /// the 3ⁿ neighborhood of each visited cell the earliest crossing inside
    /// that cell is known.
    fn torus_search(&self, ray: &Ray, start: Option<(usize, [i32; 3])>, l_max: f64) -> Option<(f64, usize, [i32; 3])> {
        let periods = self.space.periods().expect("torus");
        let n = periods.len();
        let q = self.space.wrap(&ray.q);
        let v = ray.v;
        let mut cell = [0i32; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        let mut step = [0i32; 3];
        for i in 0..n {
            if v[i] > 0.0 {
                step[i] = 1;
                t_max[i] = (periods[i] - q[i]) / v[i];
                t_delta[i] = periods[i] / v[i];
            } else if v[i] < 0.0 {
                step[i] = -1;
                t_max[i] = q[i] / -v[i];
                t_delta[i] = periods[i] / -v[i];
            }
        }
        let mut best: Option<(f64, usize, [i32; 3])> = None;
        let test = |image: [i32; 3], best: &mut Option<(f64, usize, [i32; 3])>| {
            let off = self.image_offset(image);
            for (i, k) in self.kernels.iter().enumerate() {
                if let Kernel::EuclidBall { center, radius } = k {
                    let on_piece = start == Some((i, image));
                    let hi = best.map_or(l_max, |b| b.0);
                    let p = q - center - off;
                    if let Some(s) = ball_crossing(&p, &v, *radius, Trend::Down, on_piece, self.tol.hit_tol, hi) {
                        *best = Some((s, i, image));
                    }
                }
            }
        };
        for im in self.neighbor_images() {
            test(im, &mut best);
        }
        loop {
            let axis = (0..n).min_by(|&a, &b| t_max[a].total_cmp(&t_max[b])).expect("n ≥ 2");
            let t_exit = t_max[axis];
            if let Some(b) = best {
                if b.0 <= t_exit {
                    return best;
                }
            }
            if t_exit > l_max || !t_exit.is_finite() {
                return best;
            }
            cell[axis] += step[axis];
            t_max[axis] += t_delta[axis];
            for k in self.neighbor_images() {
                if k[axis] != step[axis] {
                    continue;
                }
                let image = [cell[0] + k[0], cell[1] + k[1], cell[2] + k[2]];
                test(image, &mut best);
            }
        }
    }

    fn check_disjoint(&self) -> Result<()> {
        let balls: Vec<(usize, Vector, f64)> = self
            .pieces
            .iter()
            .enumerate()
            .filter_map(|(i, p)| match p.shape {
                Shape::Ball { center, radius } => Some((i, center, radius)),
                _ => None,
            })
            .collect();
        if let Some(periods) = self.space.periods() {
            let min_period = periods.iter().copied().fold(f64::INFINITY, f64::min);
            for (i, _, r) in &balls {
                if 2.0 * r >= min_period {
                    return Err(Error::InvalidTable(format!("piece {i} overlaps its own periodic image")));
                }
                if self.pieces[*i].side != Side::Obstacle {
                    return Err(Error::InvalidTable("torus pieces must be obstacles".into()));
                }
            }
        }
        for (a, (i, ci, ri)) in balls.iter().enumerate() {
            for (j, cj, rj) in &balls[a + 1..] {
                let d = self.space.distance(ci, cj);
                let (si, sj) = (self.pieces[*i].side, self.pieces[*j].side);
                let ok = match (si, sj) {
                    (Side::Obstacle, Side::Obstacle) => d > ri + rj,
                    (Side::Obstacle, Side::Outer) => d + ri < *rj,
                    (Side::Outer, Side::Obstacle) => d + rj < *ri,
                    (Side::Outer, Side::Outer) => true,
                };
                if !ok {
                    return Err(Error::InvalidTable(format!("pieces {i} and {j} intersect")));
                }
            }
        }
        // sampled check for curved walls against every other piece
        for (i, p) in self.pieces.iter().enumerate() {
            if let Shape::Fourier(curve) = &p.shape {
                for (j, other) in self.pieces.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let pts: Vec<Vector> = (0..512)
                        .map(|k| curve.point(std::f64::consts::TAU * k as f64 / 512.0))
                        .collect();
                    let bad = pts.iter().any(|q| other.side.sign() * self.piece_gauge(j, q).0 >= 0.0);
                    if bad {
                        return Err(Error::InvalidTable(format!("pieces {i} and {j} intersect")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn normalize_piece(space: &ModelSpace, p: &mut BoundaryPiece) -> Result<()> {
    let len = space.chart_len();
    let check_slots = |v: &Vector, what: &str| -> Result<()> {
        if (len..4).any(|i| v[i] != 0.0) || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidTable(format!("{what} has components outside the chart")));
        }
        Ok(())
    };
    match &mut p.shape {
        Shape::Ball { center, radius } => {
            check_slots(center, "ball center")?;
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(Error::InvalidTable("ball radius must be positive".into()));
            }
            match space {
                ModelSpace::Sphere { .. } => {
                    if *radius >= std::f64::consts::PI {
                        return Err(Error::InvalidTable("spherical ball radius must be below π".into()));
                    }
                    let n = center.norm();
                    if n == 0.0 {
                        return Err(Error::InvalidTable("sphere center must be nonzero".into()));
                    }
                    *center /= n;
                }
                ModelSpace::HyperbolicBall { .. } if center.norm() >= 1.0 => {
                    return Err(Error::InvalidTable("hyperbolic center must satisfy |q| < 1".into()));
                }
                ModelSpace::FlatTorus { .. } => *center = space.wrap(center),
                _ => {}
            }
        }
        Shape::HalfSpace { point, normal } => {
            check_slots(point, "half-space point")?;
            check_slots(normal, "half-space normal")?;
            if normal.norm() == 0.0 {
                return Err(Error::InvalidTable("half-space normal must be nonzero".into()));
            }
            match space {
                ModelSpace::Sphere { .. } => *point /= point.norm(),
                ModelSpace::HyperbolicBall { .. } if point.norm() >= 1.0 => {
                    return Err(Error::InvalidTable("hyperbolic point must satisfy |q| < 1".into()));
                }
                _ => {}
            }
        }
        Shape::Fourier(_) => {}
    }
    Ok(())
}

fn diameter_estimate(space: &ModelSpace, pieces: &[BoundaryPiece], kernels: &[Kernel]) -> f64 {
    let outer = pieces
        .iter()
        .zip(kernels)
        .filter(|(p, _)| p.side == Side::Outer)
        .filter_map(|(p, k)| match (&p.shape, k) {
            (Shape::Ball { radius, .. }, _) => Some(2.0 * radius),
            (_, Kernel::Fourier { r_max, .. }) => Some(2.0 * r_max),
            _ => None,
        })
        .fold(f64::INFINITY, f64::min);
    match space {
        ModelSpace::FlatTorus { periods, .. } => periods.iter().map(|p| p * p).sum::<f64>().sqrt(),
        ModelSpace::Sphere { .. } => outer.min(std::f64::consts::PI),
        _ if outer.is_finite() => outer,
        _ => 10.0,
    }
}
