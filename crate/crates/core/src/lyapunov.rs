//! Well-balanced Lyapunov functions built from an enclosing geodesic ball.
//!
//! `F(q, v)` is the length of the backward geodesic from `(q, v)` to the
//! boundary of the enclosing ball `L`. Along any geodesic inside `L` it grows
//! at unit rate, so its increment over a chord equals the chord length.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{causality_map, ChordRecord};
use crate::geometry::piece::{Kernel, Ray, Trend};
use crate::geometry::{ModelSpace, PhasePoint, Shape, Side, Table, Vector};
use crate::measure::{self, csv_err, Estimate};
use crate::{parallel, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnclosingBody {
    pub center: Vector,
    pub radius: f64,
}

impl EnclosingBody {
    pub fn new(center: Vector, radius: f64) -> Self {
        EnclosingBody { center, radius }
    }

    /// Ball concentric with the outer wall: twice its radius in flat and
    /// hyperbolic space, halfway to the equator on the sphere.
    pub fn default_for(table: &Table) -> Result<Self> {
        let space = table.space();
        if space.periods().is_some() {
            return Err(Error::Unsupported("no enclosing ball exists on the torus".into()));
        }
        let outer: Vec<_> = table.pieces().iter().filter(|p| p.side == Side::Outer).collect();
        let [piece] = outer.as_slice() else {
            return Err(Error::Unsupported("default enclosing ball needs exactly one outer wall".into()));
        };
        match (&piece.shape, space) {
            (Shape::Ball { center, radius }, ModelSpace::Sphere { .. }) => {
                if *radius >= FRAC_PI_2 {
                    return Err(Error::BodyTooSmall("cap is not inside a hemisphere".into()));
                }
                Ok(EnclosingBody::new(*center, 0.5 * (radius + FRAC_PI_2)))
            }
            (Shape::Ball { center, radius }, _) => Ok(EnclosingBody::new(*center, 2.0 * radius)),
            (Shape::Fourier(c), _) => {
                let (_, r_max, _) = c.extent();
                Ok(EnclosingBody::new(Vector::new(c.center[0], c.center[1], 0.0, 0.0), 2.0 * r_max))
            }
            (Shape::HalfSpace { .. }, _) => Err(Error::Unsupported("half-space outer wall is unbounded".into())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LyapunovF {
    space: ModelSpace,
    body: EnclosingBody,
    kernel: Kernel,
}

impl LyapunovF {
    /// Evaluator without the pilot check; see [`build_well_balanced_f`].
    pub fn unchecked(table: &Table, body: EnclosingBody) -> Result<Self> {
        let space = table.space().clone();
        if space.periods().is_some() {
            return Err(Error::Unsupported("no enclosing ball exists on the torus".into()));
        }
        let kernel = Kernel::prepare(&space, &Shape::Ball { center: body.center, radius: body.radius })
            .map_err(Error::Unsupported)?;
        Ok(LyapunovF { space, body, kernel })
    }

    pub fn body(&self) -> &EnclosingBody {
        &self.body
    }

    fn ray(&self, q: &Vector, v: &Vector) -> Ray {
        Ray { q: *q, v: *v, x: self.space.lift_point(q), u: self.space.lift_vector(q, v) }
    }

    /// Distance along `v` from `q` to the boundary of the enclosing ball.
    fn exit_distance(&self, q: &Vector, v: &Vector) -> Option<f64> {
        self.kernel.crossing(&self.ray(q, v), Trend::Up, false, 0.0, f64::INFINITY)
    }

    pub fn eval(&self, z: &PhasePoint) -> Result<f64> {
        self.exit_distance(&z.q, &-z.v)
            .ok_or_else(|| Error::BodyTooSmall("point lies outside the enclosing ball".into()))
    }

    /// |cos| between `v` and the normal of ∂L at the point where the geodesic
    /// through `(q, v)` leaves L forwards.
    fn crossing_cos(&self, q: &Vector, v: &Vector) -> Option<f64> {
        let s = self.exit_distance(q, v)?;
        let z = self.space.geodesic_flow(&PhasePoint::new(*q, *v), s);
        let x = self.space.lift_point(&z.q);
        let g = self.kernel.gradient(&self.space, &z.q, &x);
        let n = self.space.normalize(&z.q, &g);
        Some(self.space.metric_dot(&z.q, &z.v, &n).abs())
    }
}

/// Builds `F` after checking on `pilot` sampled chords that each one,
/// extended both ways, leaves `L` transversally.
pub fn build_well_balanced_f(table: &Table, body: EnclosingBody, pilot: usize, seed: u64) -> Result<LyapunovF> {
    let f = LyapunovF::unchecked(table, body)?;
    let grazing = table.tolerances().grazing_tol;
    let hit_tol = table.tolerances().hit_tol;
    let sampler = crate::measure::Sampler::new(table)?;
    let failures = parallel::map_batches(pilot, seed, |rng, _, len| -> Result<Option<String>> {
        for _ in 0..len {
            let z = sampler.draw(rng)?.z;
            let x = f.space.lift_point(&z.q);
            if f.kernel.gauge(&z.q, &x) >= -hit_tol {
                return Ok(Some(format!("boundary point {:?} is not inside L", z.q.as_slice())));
            }
            let chord = match causality_map(table, &z) {
                Ok(c) => c,
                Err(Error::Trapped { .. } | Error::GrazingExit(_)) => continue,
                Err(e) => return Err(e),
            };
            let back = f.crossing_cos(&z.q, &-z.v);
            let fwd = f.crossing_cos(&chord.exit.q, &chord.exit.v);
            match (back, fwd) {
                (Some(a), Some(b)) if a > grazing && b > grazing => {}
                _ => return Ok(Some("a chord does not cross ∂L transversally twice".into())),
            }
        }
        Ok(None)
    });
    for r in failures {
        if let Some(msg) = r? {
            return Err(Error::BodyTooSmall(msg));
        }
    }
    Ok(f)
}

pub(crate) fn chord_or_grazing(table: &Table, z: &PhasePoint) -> Result<ChordRecord> {
    match causality_map(table, z) {
        Ok(c) => Ok(c),
        Err(Error::GrazingExit(c)) => Ok(*c),
        Err(e) => Err(e),
    }
}

/// `F(C(z)) − F(z)`.
pub fn delta_f(table: &Table, f: &LyapunovF, z: &PhasePoint) -> Result<f64> {
    let chord = chord_or_grazing(table, z)?;
    if chord.degenerate {
        return Ok(0.0);
    }
    Ok(f.eval(&chord.exit)? - f.eval(&chord.entry)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub var: f64,
    pub f_min: f64,
    pub f_max: f64,
}

fn uniform_direction_entry<R: Rng + ?Sized>(table: &Table, z: &PhasePoint, rng: &mut R) -> Result<PhasePoint> {
    let space = table.space();
    let n = table.inward_normal(&z.q)?;
    let frame = space.complement_frame(&z.q, &n);
    let v = if frame.len() == 1 {
        let th = (rng.random::<f64>() - 0.5) * std::f64::consts::PI;
        n * th.cos() + frame[0] * th.sin()
    } else {
        // uniform on the hemisphere: cos θ uniform on (0, 1]
        let c = 1.0 - rng.random::<f64>();
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        let s = (1.0 - c * c).sqrt();
        n * c + frame[0] * (s * phi.cos()) + frame[1] * (s * phi.sin())
    };
    Ok(PhasePoint::new(z.q, space.normalize(&z.q, &v)))
}

/// Empirical range of `F` over boundary phase points, from cosine-weighted
/// and uniform-direction entries and their exits.
pub fn var_f_boundary(table: &Table, f: &LyapunovF, count: usize, seed: u64) -> Result<Variation> {
    let sampler = crate::measure::Sampler::new(table)?;
    let parts = parallel::map_batches(count, seed, |rng, _, len| -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..len {
            let z = sampler.draw(rng)?.z;
            let zu = uniform_direction_entry(table, &z, rng)?;
            for e in [z, zu] {
                let chord = match chord_or_grazing(table, &e) {
                    Ok(c) => c,
                    Err(Error::Trapped { .. }) => continue,
                    Err(err) => return Err(err),
                };
                let (a, b) = (f.eval(&chord.entry)?, f.eval(&chord.exit)?);
                lo = lo.min(a.min(b));
                hi = hi.max(a.max(b));
            }
        }
        Ok((lo, hi))
    });
    let (mut f_min, mut f_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in parts {
        let (a, b) = p?;
        f_min = f_min.min(a);
        f_max = f_max.max(b);
    }
    Ok(Variation { var: f_max - f_min, f_min, f_max })
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceCurve {
    pub ts: Vec<f64>,
    pub areas: Vec<Estimate>,
    pub total_mass: f64,
    pub samples: usize,
    pub excluded: u64,
}

impl SliceCurve {
    /// Trapezoid rule over the grid.
    pub fn integral(&self) -> f64 {
        self.ts
            .windows(2)
            .zip(self.areas.windows(2))
            .map(|(t, a)| 0.5 * (t[1] - t[0]) * (a[0].mean() + a[1].mean()))
            .sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mean", "stderr"]).map_err(csv_err)?;
        for (t, a) in self.ts.iter().zip(&self.areas) {
            w.write_record([t.to_string(), a.mean().to_string(), a.stderr().to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `A(t) = μ{z : F(z) ≤ t < F(z) + ℓ(z)}` on an ascending grid, in one pass
/// over the sample.
pub fn slice_curve(table: &Table, f: &LyapunovF, ts: &[f64], count: usize, seed: u64) -> Result<SliceCurve> {
    if ts.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("slice grid must be ascending".into()));
    }
    let m = ts.len();
    let sampler = crate::measure::Sampler::new(table)?;
    let parts = parallel::map_batches(count, seed, |rng, _, len| -> Result<(Vec<i64>, u64)> {
        let mut diff = vec![0i64; m + 1];
        let mut excluded = 0;
        for _ in 0..len {
            let z = sampler.draw(rng)?.z;
            let chord = match chord_or_grazing(table, &z) {
                Ok(c) => c,
                Err(Error::Trapped { .. }) => {
                    excluded += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let a = f.eval(&z)?;
            let b = a + chord.length;
            let lo = ts.partition_point(|&t| t < a);
            let hi = ts.partition_point(|&t| t < b);
            diff[lo] += 1;
            diff[hi] -= 1;
        }
        Ok((diff, excluded))
    });
    let mut hits = vec![0i64; m + 1];
    let mut excluded = 0;
    for p in parts {
        let (d, e) = p?;
        hits.iter_mut().zip(d).for_each(|(h, x)| *h += x);
        excluded += e;
    }
    let total_mass = measure::trajectory_space_volume(table)?;
    let mut running = 0i64;
    let areas = (0..m)
        .map(|i| {
            running += hits[i];
            Estimate::from_counts(count as u64, running as u64, total_mass)
        })
        .collect();
    Ok(SliceCurve { ts: ts.to_vec(), areas, total_mass, samples: count, excluded })
}

pub fn slice_area(table: &Table, f: &LyapunovF, t: f64, count: usize, seed: u64) -> Result<Estimate> {
    Ok(slice_curve(table, f, &[t], count, seed)?.areas.remove(0))
}

/// `m` evenly spaced points covering `[lo, hi]`.
pub fn grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{presets, vec2};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn disk_f() -> (Table, LyapunovF) {
        let t = presets::unit_disk();
        let f = build_well_balanced_f(&t, EnclosingBody::new(vec2(0.0, 0.0), 2.0), 2000, 1).unwrap();
        (t, f)
    }

    #[test]
    fn disk_values() {
        let (t, f) = disk_f();
        let z = PhasePoint::new(vec2(1.0, 0.0), vec2(-1.0, 0.0));
        assert_abs_diff_eq!(f.eval(&z).unwrap(), 1.0, epsilon = 1e-15);
        let z1 = t.space().geodesic_flow(&z, 0.7);
        assert_abs_diff_eq!(f.eval(&z1).unwrap(), 1.7, epsilon = 1e-14);
        assert_abs_diff_eq!(delta_f(&t, &f, &z).unwrap(), 2.0, epsilon = 1e-14);
        let tangent = PhasePoint::new(vec2(1.0, 0.0), vec2(0.0, 1.0));
        assert_eq!(delta_f(&t, &f, &tangent).unwrap(), 0.0);
        let th: f64 = 0.8;
        let z = PhasePoint::new(vec2(1.0, 0.0), vec2(-th.cos(), th.sin()));
        assert_abs_diff_eq!(delta_f(&t, &f, &z).unwrap(), 2.0 * th.cos(), epsilon = 1e-12);
    }

    #[test]
    fn hyperbolic_radial_value_matches_quadrature() {
        let t = presets::hyperbolic_disk(1.0);
        let f = build_well_balanced_f(&t, EnclosingBody::new(vec2(0.0, 0.0), 3.0), 500, 2).unwrap();
        let q = vec2(0.5f64.tanh(), 0.0);
        let z = t.phase(q, vec2(-1.0, 0.0));
        // ∫ 2/(1−r²) dr from tanh(1/2) to tanh(3/2), midpoint rule
        let (a, b) = (0.5f64.tanh(), 1.5f64.tanh());
        let m = 200_000;
        let h = (b - a) / m as f64;
        let oracle: f64 = (0..m).map(|i| { let r = a + (i as f64 + 0.5) * h; 2.0 / (1.0 - r * r) * h }).sum();
        assert_abs_diff_eq!(f.eval(&z).unwrap(), oracle, epsilon = 1e-8);
        assert_abs_diff_eq!(f.eval(&z).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn small_body_is_rejected() {
        let t = presets::unit_disk();
        let r = build_well_balanced_f(&t, EnclosingBody::new(vec2(0.0, 0.0), 0.9), 100, 1);
        assert!(matches!(r, Err(Error::BodyTooSmall(_))));
        assert!(matches!(EnclosingBody::default_for(&presets::torus_two_balls()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn default_bodies() {
        let b = EnclosingBody::default_for(&presets::spherical_cap(PI / 4.0)).unwrap();
        assert_abs_diff_eq!(b.radius, 3.0 * PI / 8.0);
        for t in [presets::unit_disk(), presets::unit_ball(), presets::ellipse(), presets::hyperbolic_disk(2.0), presets::spherical_cap(PI / 6.0)] {
            let body = EnclosingBody::default_for(&t).unwrap();
            build_well_balanced_f(&t, body, 2000, 3).unwrap();
        }
    }

    #[test]
    fn variation_against_grid_oracle() {
        let (t, f) = disk_f();
        let v = var_f_boundary(&t, &f, 20_000, 4).unwrap();
        // dense grid over (boundary angle, θ): by symmetry only θ matters
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..=4000 {
            let th = -FRAC_PI_2 + PI * j as f64 / 4000.0;
            let a = (4.0 - th.sin().powi(2)).sqrt() - th.cos();
            lo = lo.min(a);
            hi = hi.max(a + 2.0 * th.cos());
        }
        assert!(v.f_min >= lo - 1e-12 && v.f_max <= hi + 1e-12);
        assert!((v.var - (hi - lo)).abs() / (hi - lo) < 0.01);
        let again = var_f_boundary(&t, &f, 40_000, 4).unwrap();
        assert!(again.var >= v.var);
    }

    #[test]
    fn slices() {
        let (t, f) = disk_f();
        assert_eq!(slice_area(&t, &f, 0.5, 1000, 1).unwrap().mean(), 0.0);
        let ts = grid(1.0, 3.0, 100);
        let c = slice_curve(&t, &f, &ts, 50_000, 6).unwrap();
        assert!(c.areas.iter().all(|a| a.mean() >= 0.0 && a.mean() <= 4.0 * PI));
        assert!((c.integral() - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 0.03);
    }
}
