//! Boundary pieces as signed gauge functions and their exact ray kernels.
//!
//! A piece gauge is negative on the piece's own interior (inside a ball,
//! inside a radial curve, on the negative side of a hyperplane). Whether that
//! interior belongs to the table is decided by [`Side`].

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::space::{minkowski, ModelSpace, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// The table lies outside the piece.
    Obstacle,
    /// The table lies inside the piece.
    Outer,
}

impl Side {
    /// Sign that turns a piece gauge into a table gauge (negative in the table).
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Side::Outer => 1.0,
            Side::Obstacle => -1.0,
        }
    }
}

/// Closed curve `r(φ) = a₀ + Σ aₖ cos kφ + bₖ sin kφ` around `center` (n = 2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierCurve {
    pub center: [f64; 2],
    /// `cos[0]` is the mean radius a₀.
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FourierCurve {
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        FourierCurve { center, cos: vec![radius], sin: vec![] }
    }

    /// Truncated Fourier series of the radial function of an axis-aligned
    /// ellipse with semi-axes `a` (x) and `b` (y).
    pub fn ellipse(center: [f64; 2], a: f64, b: f64, harmonics: usize) -> Self {
        let m = 2048;
        let radial = |phi: f64| a * b / ((b * phi.cos()).powi(2) + (a * phi.sin()).powi(2)).sqrt();
        let mut cos = vec![0.0; harmonics + 1];
        for j in 0..m {
            let phi = TAU * j as f64 / m as f64;
            let r = radial(phi);
            for (k, c) in cos.iter_mut().enumerate() {
                *c += r * (k as f64 * phi).cos();
            }
        }
        for (k, c) in cos.iter_mut().enumerate() {
            *c *= if k == 0 { 1.0 } else { 2.0 } / m as f64;
            if c.abs() < 1e-15 {
                *c = 0.0;
            }
        }
        FourierCurve { center, cos, sin: vec![] }
    }

    /// Returns (r, r', r'').
    pub fn radius(&self, phi: f64) -> (f64, f64, f64) {
        let mut r = self.cos.first().copied().unwrap_or(0.0);
        let (mut d1, mut d2) = (0.0, 0.0);
        for (k, &a) in self.cos.iter().enumerate().skip(1) {
            let kf = k as f64;
            let (s, c) = (kf * phi).sin_cos();
            r += a * c;
            d1 -= a * kf * s;
            d2 -= a * kf * kf * c;
        }
        for (k, &b) in self.sin.iter().enumerate().skip(1) {
            let kf = k as f64;
            let (s, c) = (kf * phi).sin_cos();
            r += b * s;
            d1 += b * kf * c;
            d2 -= b * kf * kf * s;
        }
        (r, d1, d2)
    }

    fn center(&self) -> Vector {
        Vector::new(self.center[0], self.center[1], 0.0, 0.0)
    }

    pub fn point(&self, phi: f64) -> Vector {
        let (r, _, _) = self.radius(phi);
        self.center() + Vector::new(r * phi.cos(), r * phi.sin(), 0.0, 0.0)
    }

    pub fn gauge(&self, q: &Vector) -> f64 {
        let d = q - self.center();
        let phi = d[1].atan2(d[0]);
        (d[0] * d[0] + d[1] * d[1]).sqrt() - self.radius(phi).0
    }

    pub fn gradient(&self, q: &Vector) -> Vector {
        let d = q - self.center();
        let rho = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let phi = d[1].atan2(d[0]);
        let (_, dr, _) = self.radius(phi);
        let (s, c) = phi.sin_cos();
        // e_r - (r'/ρ) e_φ
        Vector::new(c + dr / rho * s, s - dr / rho * c, 0.0, 0.0)
    }

    pub fn snap(&self, q: &Vector) -> Vector {
        let d = q - self.center();
        self.point(d[1].atan2(d[0]))
    }

    /// Speed |γ'(φ)| of the parametrization φ ↦ point(φ).
    pub fn speed(&self, phi: f64) -> f64 {
        let (r, dr, _) = self.radius(phi);
        (r * r + dr * dr).sqrt()
    }

    pub fn area(&self) -> f64 {
        let a0 = self.cos.first().copied().unwrap_or(0.0);
        let rest: f64 = self.cos.iter().skip(1).chain(self.sin.iter().skip(1)).map(|c| c * c).sum();
        PI * a0 * a0 + 0.5 * PI * rest
    }

    pub fn perimeter(&self) -> f64 {
        let m = 4096;
        (0..m).map(|j| self.speed(TAU * j as f64 / m as f64)).sum::<f64>() * TAU / m as f64
    }

    /// (min r, max r, max speed) on a dense grid.
    pub fn extent(&self) -> (f64, f64, f64) {
        let m = 4096;
        let mut out = (f64::INFINITY, 0.0f64, 0.0f64);
        for j in 0..m {
            let phi = TAU * j as f64 / m as f64;
            let r = self.radius(phi).0;
            out.0 = out.0.min(r);
            out.1 = out.1.max(r);
            out.2 = out.2.max(self.speed(phi));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    /// Geodesic ball. `center` is in chart coordinates (ambient unit vector on
    /// the sphere), `radius` is geodesic.
    Ball { center: Vector, radius: f64 },
    /// Totally geodesic hyperplane through `point`, with `normal` a chart
    /// tangent at `point` pointing out of the piece's interior half.
    HalfSpace { point: Vector, normal: Vector },
    /// Radial Fourier curve; Euclidean plane only.
    Fourier(FourierCurve),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPiece {
    #[serde(flatten)]
    pub shape: Shape,
    pub side: Side,
}

impl BoundaryPiece {
    pub fn ball(center: Vector, radius: f64, side: Side) -> Self {
        BoundaryPiece { shape: Shape::Ball { center, radius }, side }
    }

    pub fn half_space(point: Vector, normal: Vector, side: Side) -> Self {
        BoundaryPiece { shape: Shape::HalfSpace { point, normal }, side }
    }

    pub fn fourier(curve: FourierCurve, side: Side) -> Self {
        BoundaryPiece { shape: Shape::Fourier(curve), side }
    }
}

/// Which way the gauge must cross zero for a root to count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Trend {
    /// Gauge increasing: leaving the piece interior.
    Up,
    /// Gauge decreasing: entering the piece interior.
    Down,
}

impl Trend {
    #[inline]
    fn sign(self) -> f64 {
        match self {
            Trend::Up => 1.0,
            Trend::Down => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum LevelKind {
    Ball { radius: f64 },
    Plane,
}

/// Per-piece data prepared for fast tracing.
#[derive(Clone, Debug)]
pub(crate) enum Kernel {
    EuclidBall { center: Vector, radius: f64 },
    EuclidPlane { point: Vector, normal: Vector },
    /// Curved spaces: `f(X) = ⟨X, normal⟩` (ambient product) with the piece
    /// interior at `f < target`.
    Level { normal: Vector, target: f64, kind: LevelKind, hyperbolic: bool },
    Fourier { curve: FourierCurve, r_max: f64, step: f64 },
}

/// Geodesic start data shared across pieces.
pub(crate) struct Ray {
    pub q: Vector,
    pub v: Vector,
    /// Ambient lift (curved spaces only).
    pub x: Vector,
    pub u: Vector,
}

impl Kernel {
    pub fn prepare(space: &ModelSpace, shape: &Shape) -> Result<Kernel, String> {
        match (space, shape) {
            (ModelSpace::Euclidean { .. } | ModelSpace::FlatTorus { .. }, Shape::Ball { center, radius }) => {
                Ok(Kernel::EuclidBall { center: *center, radius: *radius })
            }
            (ModelSpace::Euclidean { .. }, Shape::HalfSpace { point, normal }) => {
                Ok(Kernel::EuclidPlane { point: *point, normal: normal / normal.norm() })
            }
            (ModelSpace::FlatTorus { .. }, Shape::HalfSpace { .. }) => {
                Err("half-space pieces are not defined on the flat torus".into())
            }
            (ModelSpace::Euclidean { dim: 2 }, Shape::Fourier(curve)) => {
                let (r_min, r_max, vmax) = curve.extent();
                if r_min <= 0.0 {
                    return Err("Fourier radius must stay positive".into());
                }
                // bracketing step well below the smallest feature size
                let step = 0.02 * r_min * r_min / vmax.max(r_min);
                Ok(Kernel::Fourier { curve: curve.clone(), r_max, step })
            }
            (_, Shape::Fourier(_)) => Err("Fourier walls exist only in the Euclidean plane".into()),
            (ModelSpace::HyperbolicBall { .. }, Shape::Ball { center, radius }) => {
                let c = space.lift_point(center);
                Ok(Kernel::Level {
                    normal: -c,
                    target: radius.cosh(),
                    kind: LevelKind::Ball { radius: *radius },
                    hyperbolic: true,
                })
            }
            (ModelSpace::HyperbolicBall { .. }, Shape::HalfSpace { point, normal }) => {
                let n = space.lift_vector(point, normal);
                let n = n / minkowski(&n, &n).sqrt();
                Ok(Kernel::Level { normal: n, target: 0.0, kind: LevelKind::Plane, hyperbolic: true })
            }
            (ModelSpace::Sphere { .. }, Shape::Ball { center, radius }) => {
                let c = center / center.norm();
                Ok(Kernel::Level {
                    normal: -c,
                    target: -radius.cos(),
                    kind: LevelKind::Ball { radius: *radius },
                    hyperbolic: false,
                })
            }
            (ModelSpace::Sphere { .. }, Shape::HalfSpace { point, normal }) => {
                let p = point / point.norm();
                let n = normal - p * p.dot(normal);
                Ok(Kernel::Level { normal: n / n.norm(), target: 0.0, kind: LevelKind::Plane, hyperbolic: false })
            }
        }
    }

    /// Signed gauge at a chart point (`x` is its ambient lift).
    pub fn gauge(&self, q: &Vector, x: &Vector) -> f64 {
        match self {
            Kernel::EuclidBall { center, radius } => (q - center).norm() - radius,
            Kernel::EuclidPlane { point, normal } => (q - point).dot(normal),
            Kernel::Level { normal, kind, hyperbolic, .. } => {
                let f = if *hyperbolic { minkowski(x, normal) } else { x.dot(normal) };
                match (kind, hyperbolic) {
                    (LevelKind::Ball { radius }, true) => f.max(1.0).acosh() - radius,
                    (LevelKind::Plane, true) => f.asinh(),
                    (LevelKind::Ball { radius }, false) => (-f).clamp(-1.0, 1.0).acos() - radius,
                    (LevelKind::Plane, false) => f.clamp(-1.0, 1.0).asin(),
                }
            }
            Kernel::Fourier { curve, .. } => curve.gauge(q),
        }
    }

    /// Chart-coordinate direction of increasing gauge (not normalized).
    pub fn gradient(&self, space: &ModelSpace, q: &Vector, x: &Vector) -> Vector {
        match self {
            Kernel::EuclidBall { center, .. } => q - center,
            Kernel::EuclidPlane { normal, .. } => *normal,
            Kernel::Level { normal, hyperbolic, .. } => {
                let g = if *hyperbolic {
                    normal + x * minkowski(normal, x)
                } else {
                    normal - x * x.dot(normal)
                };
                space.lower_vector(x, &g)
            }
            Kernel::Fourier { curve, .. } => curve.gradient(q),
        }
    }

    /// Nearest point of the zero set (exact for every kernel).
    pub fn snap(&self, space: &ModelSpace, q: &Vector, x: &Vector) -> Vector {
        match self {
            Kernel::EuclidBall { center, radius } => {
                let d = q - center;
                center + d * (radius / d.norm())
            }
            Kernel::EuclidPlane { point, normal } => q - normal * (q - point).dot(normal),
            Kernel::Level { normal, kind, hyperbolic, .. } => {
                let y = match (kind, hyperbolic) {
                    (LevelKind::Ball { radius }, true) => {
                        let c = -normal;
                        let ch = -minkowski(x, &c);
                        let sh = (ch * ch - 1.0).max(0.0).sqrt();
                        if sh < 1e-300 {
                            return *q;
                        }
                        let w = (x - c * ch) / sh;
                        c * radius.cosh() + w * radius.sinh()
                    }
                    (LevelKind::Plane, true) => {
                        let sh = minkowski(x, normal);
                        (x - normal * sh) / (1.0 + sh * sh).sqrt()
                    }
                    (LevelKind::Ball { radius }, false) => {
                        let c = -normal;
                        let cs = x.dot(&c);
                        let w = x - c * cs;
                        let wn = w.norm();
                        if wn < 1e-300 {
                            return *q;
                        }
                        c * radius.cos() + w * (radius.sin() / wn)
                    }
                    (LevelKind::Plane, false) => {
                        let y = x - normal * x.dot(normal);
                        y / y.norm()
                    }
                };
                space.lower_point(&y)
            }
            Kernel::Fourier { curve, .. } => curve.snap(q),
        }
    }

    /// Smallest `s` in `(lo, hi]` where the gauge along the geodesic crosses
    /// zero with the requested trend. `on_piece` means the ray starts on the
    /// zero set, in which case the root at `s = 0` is factored out exactly.
    pub fn crossing(&self, ray: &Ray, trend: Trend, on_piece: bool, lo: f64, hi: f64) -> Option<f64> {
        match self {
            Kernel::EuclidBall { center, radius } => ball_crossing(&(ray.q - center), &ray.v, *radius, trend, on_piece, lo, hi),
            Kernel::EuclidPlane { point, normal } => {
                if on_piece {
                    return None;
                }
                let vn = ray.v.dot(normal);
                if vn == 0.0 || vn.signum() != trend.sign() {
                    return None;
                }
                let s = -(ray.q - point).dot(normal) / vn;
                (s > lo && s <= hi).then_some(s)
            }
            Kernel::Level { normal, target, hyperbolic, .. } => {
                let dot = |a: &Vector| if *hyperbolic { minkowski(a, normal) } else { a.dot(normal) };
                let a = if on_piece { *target } else { dot(&ray.x) };
                let b = dot(&ray.u);
                if *hyperbolic {
                    hyperbolic_crossing(a, b, *target, trend, on_piece, lo, hi)
                } else {
                    circular_crossing(a, b, *target, trend, on_piece, lo, hi)
                }
            }
            Kernel::Fourier { curve, r_max, step, .. } => fourier_crossing(curve, *r_max, *step, ray, trend, lo, hi),
        }
    }
}

/// Ray `p + s v` (p relative to the ball center, |v| = 1) against a sphere.
pub(crate) fn ball_crossing(p: &Vector, v: &Vector, radius: f64, trend: Trend, on_piece: bool, lo: f64, hi: f64) -> Option<f64> {
    let b = p.dot(v);
    let s = if on_piece {
        // roots 0 and -2b; the second is increasing iff it lies beyond -b
        let other = -2.0 * b;
        let up = b < 0.0;
        if (trend == Trend::Up) != up {
            return None;
        }
        other
    } else {
        let c = p.norm_squared() - radius * radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // stable pair: q = -(b + sign(b) sq), roots q and c/q
        let qq = -(b + b.signum() * sq);
        let (r1, r2) = if qq == 0.0 { (0.0, 0.0) } else { (qq, c / qq) };
        let (small, large) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        match trend {
            Trend::Up => large,
            Trend::Down => small,
        }
    };
    (s > lo && s <= hi).then_some(s)
}

/// Roots of `a cosh s + b sinh s = target`.
fn hyperbolic_crossing(a: f64, b: f64, target: f64, trend: Trend, on_piece: bool, lo: f64, hi: f64) -> Option<f64> {
    let slope = |s: f64| a * s.sinh() + b * s.cosh();
    let mut candidates: [f64; 2] = [f64::NAN; 2];
    if on_piece {
        if target != 0.0 && (b / target).abs() < 1.0 {
            candidates[0] = 2.0 * (-b / target).atanh();
        }
    } else {
        // (a + b) y² - 2 target y + (a - b) = 0 with y = e^s
        let qa = a + b;
        let qb = -2.0 * target;
        let qc = a - b;
        if qa.abs() <= 1e-300 {
            if qb != 0.0 {
                let y = -qc / qb;
                if y > 0.0 {
                    candidates[0] = y.ln();
                }
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let t = -0.5 * (qb + qb.signum() * sq);
                let ys = if t == 0.0 { [0.0, 0.0] } else { [t / qa, qc / t] };
                for (slot, y) in candidates.iter_mut().zip(ys) {
                    if y > 0.0 {
                        *slot = y.ln();
                    }
                }
            }
        }
    }
    candidates
        .into_iter()
        .filter(|s| s.is_finite() && *s > lo && *s <= hi && slope(*s) * trend.sign() > 0.0)
        .reduce(f64::min)
}

/// Roots of `a cos s + b sin s = target`.
fn circular_crossing(a: f64, b: f64, target: f64, trend: Trend, on_piece: bool, lo: f64, hi: f64) -> Option<f64> {
    let slope = |s: f64| -a * s.sin() + b * s.cos();
    let valid = |s: f64| s > lo && s <= hi && slope(s) * trend.sign() > 0.0;
    if on_piece {
        let beta = b.atan2(target);
        let other = (2.0 * beta).rem_euclid(TAU);
        return [other, TAU].into_iter().filter(|&s| valid(s)).reduce(f64::min);
    }
    let amp = a.hypot(b);
    if amp <= target.abs() {
        return None;
    }
    let phase = b.atan2(a);
    let alpha = (target / amp).clamp(-1.0, 1.0).acos();
    // A cos(s - phase) increases through target at s - phase = -alpha
    let base = match trend {
        Trend::Up => phase - alpha,
        Trend::Down => phase + alpha,
    };
    let mut s = base + TAU * ((lo - base) / TAU).floor();
    while s <= lo {
        s += TAU;
    }
    (s <= hi).then_some(s)
}

/// Bracketing + bisection on a radial Fourier curve.
fn fourier_crossing(curve: &FourierCurve, r_max: f64, step: f64, ray: &Ray, trend: Trend, lo: f64, hi: f64) -> Option<f64> {
    let c = Vector::new(curve.center[0], curve.center[1], 0.0, 0.0);
    let p = ray.q - c;
    // only the part of the ray inside the bounding circle can cross
    let b = p.dot(&ray.v);
    let cc = p.norm_squared() - (r_max * 1.001) * (r_max * 1.001);
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let start = lo.max(-b - sq);
    let end = hi.min(-b + sq);
    if start >= end {
        return None;
    }
    let sign = trend.sign();
    let f = |s: f64| sign * curve.gauge(&(ray.q + ray.v * s));
    let mut s0 = start;
    let mut f0 = f(s0);
    while s0 < end {
        let s1 = (s0 + step).min(end);
        let f1 = f(s1);
        if f0 <= 0.0 && f1 > 0.0 {
            let (mut a, mut z) = (s0, s1);
            for _ in 0..200 {
                let m = 0.5 * (a + z);
                if f(m) > 0.0 {
                    z = m;
                } else {
                    a = m;
                }
                if z - a < 1e-13 * z.max(1.0) {
                    break;
                }
            }
            return Some(z);
        }
        s0 = s1;
        f0 = f1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::space::vec2;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ball_roots_from_inside() {
        let s = ball_crossing(&vec2(0.0, 0.0), &vec2(1.0, 0.0), 1.0, Trend::Up, false, 0.0, 10.0);
        assert_abs_diff_eq!(s.unwrap(), 1.0);
        let s = ball_crossing(&vec2(1.0, 0.0), &vec2(-1.0, 0.0), 1.0, Trend::Up, true, 1e-10, 10.0);
        assert_abs_diff_eq!(s.unwrap(), 2.0);
        // leaving an obstacle outward: no forward entry root
        assert!(ball_crossing(&vec2(1.0, 0.0), &vec2(1.0, 0.0), 1.0, Trend::Down, true, 1e-10, 10.0).is_none());
    }

    #[test]
    fn circular_roots() {
        // great circle through the north pole against the cap X·e₃ ≥ cos(π/4)
        let rho = PI / 4.0;
        // start at pole: a = -1 (f = -X·C), b = 0, target = -cos ρ
        let s = circular_crossing(-1.0, 0.0, -rho.cos(), Trend::Up, false, 1e-10, 10.0).unwrap();
        assert_abs_diff_eq!(s, rho, epsilon = 1e-14);
    }

    #[test]
    fn hyperbolic_roots() {
        // from the origin, distance to a centered sphere of radius 1
        let s = hyperbolic_crossing(1.0, 0.0, 1f64.cosh(), Trend::Up, false, 1e-10, 10.0).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
        // diameter chord from the boundary, on-piece formula
        let (a, b) = (1f64.cosh(), -1f64.sinh());
        let s = hyperbolic_crossing(a, b, a, Trend::Up, true, 1e-10, 10.0).unwrap();
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn ellipse_coefficients_reproduce_radius() {
        let e = FourierCurve::ellipse([0.0, 0.0], 1.25, 0.8, 40);
        for phi in [0.0, 0.3, 1.0, PI / 2.0, 2.5] {
            let exact = 1.25 * 0.8 / ((0.8 * f64::cos(phi)).powi(2) + (1.25 * f64::sin(phi)).powi(2)).sqrt();
            assert_abs_diff_eq!(e.radius(phi).0, exact, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(e.area(), PI * 1.25 * 0.8, epsilon = 1e-9);
    }
}
