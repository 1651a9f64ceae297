//! Model spaces and their closed-form geodesic flows.
//!
//! Every space stores positions and tangent vectors in a [`Vector`] with four
//! slots; unused trailing slots stay zero.
//!
//! * `Euclidean(n)` and `FlatTorus(n)` use the first `n` slots.
//! * `HyperbolicBall(n)` is the Poincaré ball chart with metric
//!   `4|dq|² / (1 - |q|²)²`. Geodesics are computed on the hyperboloid
//!   `{-x₀² + x₁² + … + xₙ² = -1}`, which also fits in four slots for `n ≤ 3`.
//! * `Sphere(n)` is the unit sphere embedded in `R^{n+1}`; the chart *is* the
//!   ambient embedding, so `q` uses `n + 1` slots.

use serde::{Deserialize, Serialize};

use super::PhasePoint;

pub type Vector = nalgebra::Vector4<f64>;

pub fn vec2(x: f64, y: f64) -> Vector {
    Vector::new(x, y, 0.0, 0.0)
}

pub fn vec3(x: f64, y: f64, z: f64) -> Vector {
    Vector::new(x, y, z, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpace {
    Euclidean { dim: usize },
    FlatTorus { dim: usize, periods: Vec<f64> },
    HyperbolicBall { dim: usize },
    Sphere { dim: usize },
}

/// Minkowski product with signature (-, +, +, +).
#[inline]
pub fn minkowski(a: &Vector, b: &Vector) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

impl ModelSpace {
    pub fn dim(&self) -> usize {
        match self {
            ModelSpace::Euclidean { dim }
            | ModelSpace::FlatTorus { dim, .. }
            | ModelSpace::HyperbolicBall { dim }
            | ModelSpace::Sphere { dim } => *dim,
        }
    }

    /// Number of vector slots used by chart coordinates.
    pub fn chart_len(&self) -> usize {
        match self {
            ModelSpace::Sphere { dim } => dim + 1,
            _ => self.dim(),
        }
    }

    pub fn is_curved(&self) -> bool {
        matches!(self, ModelSpace::HyperbolicBall { .. } | ModelSpace::Sphere { .. })
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.dim();
        if !(2..=3).contains(&n) {
            return Err(format!("dimension {n} outside 2..=3"));
        }
        if let ModelSpace::FlatTorus { periods, .. } = self {
            if periods.len() != n {
                return Err(format!("torus needs {n} periods, got {}", periods.len()));
            }
            if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                return Err("torus periods must be strictly positive".into());
            }
        }
        Ok(())
    }

    pub fn periods(&self) -> Option<&[f64]> {
        match self {
            ModelSpace::FlatTorus { periods, .. } => Some(periods),
            _ => None,
        }
    }

    /// Conformal factor λ(q) with g = λ² · (chart Euclidean metric).
    #[inline]
    pub fn conformal_factor(&self, q: &Vector) -> f64 {
        match self {
            ModelSpace::HyperbolicBall { .. } => 2.0 / (1.0 - q.norm_squared()),
            _ => 1.0,
        }
    }

    #[inline]
    pub fn metric_dot(&self, q: &Vector, a: &Vector, b: &Vector) -> f64 {
        let l = self.conformal_factor(q);
        l * l * a.dot(b)
    }

    #[inline]
    pub fn metric_norm(&self, q: &Vector, v: &Vector) -> f64 {
        self.metric_dot(q, v, v).sqrt()
    }

    /// Projects `v` onto the tangent space at `q` and rescales it to unit
    /// metric length.
    pub fn normalize(&self, q: &Vector, v: &Vector) -> Vector {
        let v = match self {
            ModelSpace::Sphere { .. } => v - q * q.dot(v),
            _ => *v,
        };
        v / self.metric_norm(q, &v)
    }

    /// Maps a chart point into the torus fundamental domain `[0, L)ⁿ`.
    pub fn wrap(&self, q: &Vector) -> Vector {
        match self {
            ModelSpace::FlatTorus { periods, .. } => {
                let mut out = *q;
                for (i, &l) in periods.iter().enumerate() {
                    let mut x = q[i].rem_euclid(l);
                    if x >= l {
                        x -= l;
                    }
                    out[i] = x;
                }
                out
            }
            _ => *q,
        }
    }

    /// Chart point → ambient model point (hyperboloid for the hyperbolic ball,
    /// identity otherwise).
    pub fn lift_point(&self, q: &Vector) -> Vector {
        match self {
            ModelSpace::HyperbolicBall { dim } => {
                let r2 = q.norm_squared();
                let d = 1.0 - r2;
                let mut x = Vector::zeros();
                x[0] = (1.0 + r2) / d;
                for i in 0..*dim {
                    x[i + 1] = 2.0 * q[i] / d;
                }
                x
            }
            _ => *q,
        }
    }

    /// Chart tangent vector at `q` → ambient tangent vector at `lift_point(q)`.
    pub fn lift_vector(&self, q: &Vector, v: &Vector) -> Vector {
        match self {
            ModelSpace::HyperbolicBall { dim } => {
                let d = 1.0 - q.norm_squared();
                let qv = q.dot(v);
                let mut u = Vector::zeros();
                u[0] = 4.0 * qv / (d * d);
                for i in 0..*dim {
                    u[i + 1] = 2.0 * v[i] / d + 4.0 * q[i] * qv / (d * d);
                }
                u
            }
            _ => *v,
        }
    }

    pub fn lower_point(&self, x: &Vector) -> Vector {
        match self {
            ModelSpace::HyperbolicBall { dim } => {
                let mut q = Vector::zeros();
                for i in 0..*dim {
                    q[i] = x[i + 1] / (1.0 + x[0]);
                }
                q
            }
            _ => *x,
        }
    }

    pub fn lower_vector(&self, x: &Vector, u: &Vector) -> Vector {
        match self {
            ModelSpace::HyperbolicBall { dim } => {
                let den = 1.0 + x[0];
                let mut v = Vector::zeros();
                for i in 0..*dim {
                    v[i] = u[i + 1] / den - x[i + 1] * u[0] / (den * den);
                }
                v
            }
            _ => *u,
        }
    }

    /// Inner product of ambient tangent vectors.
    #[inline]
    pub fn ambient_dot(&self, a: &Vector, b: &Vector) -> f64 {
        match self {
            ModelSpace::HyperbolicBall { .. } => minkowski(a, b),
            _ => a.dot(b),
        }
    }

    /// Time-`s` point of the unit-speed geodesic through `z`.
    pub fn geodesic_flow(&self, z: &PhasePoint, s: f64) -> PhasePoint {
        match self {
            ModelSpace::Euclidean { .. } => PhasePoint::new(z.q + z.v * s, z.v),
            ModelSpace::FlatTorus { .. } => PhasePoint::new(self.wrap(&(z.q + z.v * s)), z.v),
            ModelSpace::HyperbolicBall { .. } => {
                let x = self.lift_point(&z.q);
                let u = self.lift_vector(&z.q, &z.v);
                let (ch, sh) = (s.cosh(), s.sinh());
                let x1 = x * ch + u * sh;
                let u1 = x * sh + u * ch;
                let q1 = self.lower_point(&x1);
                let v1 = self.lower_vector(&x1, &u1);
                PhasePoint::new(q1, self.normalize(&q1, &v1))
            }
            ModelSpace::Sphere { .. } => {
                let (c, sn) = (s.cos(), s.sin());
                let q1 = z.q * c + z.v * sn;
                let v1 = z.v * c - z.q * sn;
                let q1 = q1 / q1.norm();
                PhasePoint::new(q1, self.normalize(&q1, &v1))
            }
        }
    }

    /// Geodesic distance (minimal image on the torus).
    pub fn distance(&self, a: &Vector, b: &Vector) -> f64 {
        match self {
            ModelSpace::Euclidean { .. } => (a - b).norm(),
            ModelSpace::FlatTorus { .. } => self.chart_distance(a, b),
            ModelSpace::HyperbolicBall { .. } => {
                let c = -minkowski(&self.lift_point(a), &self.lift_point(b));
                c.max(1.0).acosh()
            }
            ModelSpace::Sphere { .. } => {
                // atan2 form stays accurate for nearby points
                let cross = (a - b * a.dot(b)).norm();
                cross.atan2(a.dot(b))
            }
        }
    }

    /// Euclidean distance of chart coordinates (minimal image on the torus).
    pub fn chart_distance(&self, a: &Vector, b: &Vector) -> f64 {
        match self {
            ModelSpace::FlatTorus { periods, .. } => {
                let mut d2 = 0.0;
                for (i, &l) in periods.iter().enumerate() {
                    let mut d = (a[i] - b[i]).rem_euclid(l);
                    if d > 0.5 * l {
                        d = l - d;
                    }
                    d2 += d * d;
                }
                d2.sqrt()
            }
            _ => (a - b).norm(),
        }
    }

    /// Point at geodesic distance `r` from `center` in the unit direction `w`
    /// (a chart tangent vector at `center`).
    pub fn exp(&self, center: &Vector, w: &Vector, r: f64) -> Vector {
        let w = self.normalize(center, w);
        self.geodesic_flow(&PhasePoint::new(*center, w), r).q
    }

    /// Unit chart direction at `center` of the geodesic towards `q`
    /// (inverse of [`ModelSpace::exp`] up to length).
    pub fn log_dir(&self, center: &Vector, q: &Vector) -> Vector {
        let w = match self {
            ModelSpace::Euclidean { .. } => q - center,
            ModelSpace::FlatTorus { periods, .. } => {
                let mut d = q - center;
                for (i, &l) in periods.iter().enumerate() {
                    d[i] -= l * (d[i] / l).round();
                }
                d
            }
            ModelSpace::HyperbolicBall { .. } => {
                let c = self.lift_point(center);
                let x = self.lift_point(q);
                let u = x + c * minkowski(&x, &c);
                self.lower_vector(&c, &u)
            }
            ModelSpace::Sphere { .. } => q - center * center.dot(q),
        };
        self.normalize(center, &w)
    }

    /// An orthonormal (in g) basis of the tangent space at `q`, in chart
    /// coordinates. Depends continuously on `q` only within a chart patch.
    pub fn tangent_frame(&self, q: &Vector) -> Vec<Vector> {
        let axes = [
            Vector::new(1.0, 0.0, 0.0, 0.0),
            Vector::new(0.0, 1.0, 0.0, 0.0),
            Vector::new(0.0, 0.0, 1.0, 0.0),
            Vector::new(0.0, 0.0, 0.0, 1.0),
        ];
        match self {
            ModelSpace::Sphere { dim } => {
                let mut basis: Vec<Vector> = Vec::with_capacity(*dim);
                let mut used = vec![*q];
                let mut order: Vec<usize> = (0..=*dim).collect();
                order.sort_by(|&i, &j| q[i].abs().total_cmp(&q[j].abs()));
                for i in order {
                    let mut e = axes[i];
                    for b in &used {
                        e -= b * b.dot(&e);
                    }
                    let n = e.norm();
                    if n > 1e-6 {
                        let e = e / n;
                        used.push(e);
                        basis.push(e);
                        if basis.len() == *dim {
                            break;
                        }
                    }
                }
                basis
            }
            _ => {
                let l = self.conformal_factor(q);
                axes[..self.dim()].iter().map(|a| a / l).collect()
            }
        }
    }

    /// Completes a unit normal `n` at `q` to a g-orthonormal basis
    /// `(t₁, …, t_{n-1})` of its orthogonal complement. For two-dimensional
    /// spaces the single tangent is oriented consistently (`t = J n`).
    pub fn complement_frame(&self, q: &Vector, n: &Vector) -> Vec<Vector> {
        let dim = self.dim();
        if dim == 2 {
            let t = match self {
                ModelSpace::Sphere { .. } => q.xyz().cross(&n.xyz()),
                _ => nalgebra::Vector3::new(-n[1], n[0], 0.0),
            };
            return vec![Vector::new(t[0], t[1], t[2], 0.0)];
        }
        let frame = self.tangent_frame(q);
        let mut order: Vec<usize> = (0..frame.len()).collect();
        order.sort_by(|&i, &j| {
            self.metric_dot(q, &frame[i], n)
                .abs()
                .total_cmp(&self.metric_dot(q, &frame[j], n).abs())
        });
        let mut out: Vec<Vector> = Vec::with_capacity(dim - 1);
        for i in order {
            let mut e = frame[i];
            e -= n * self.metric_dot(q, n, &e);
            for b in &out {
                e -= b * self.metric_dot(q, b, &e);
            }
            let len = self.metric_norm(q, &e);
            if len > 1e-6 {
                out.push(e / len);
                if out.len() == dim - 1 {
                    break;
                }
            }
        }
        out
    }
}
