//! The cosine boundary measure on inward boundary phase points: density,
//! exact sampler, volumes, boundary coordinates and preservation tests.

mod coords;
mod estimate;
mod volumes;

use std::f64::consts::TAU;
use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::dynamics::{billiard_map, ReflectionLaw};
use crate::geometry::{ModelSpace, PhasePoint, Shape, Table, Vector};
use crate::parallel;
use crate::{Error, Result};

pub use coords::{boundary_coords, entry_from_coords, BoundaryCoords, PhaseBox};
pub use estimate::{Estimate, EstimateSummary, ExactSum};
pub use volumes::{domain_volumes, piece_boundary_volume, trajectory_space_volume, DomainVolumes};

/// Cosine between `v` and the inward normal: the density of the boundary
/// measure against boundary phase volume.
pub fn mu_theta_density(table: &Table, z: &PhasePoint) -> Result<f64> {
    Ok(table.boundary_cos(z)?.0)
}

#[derive(Clone, Copy, Debug)]
pub struct SampledEntry {
    pub z: PhasePoint,
    pub piece: usize,
    /// Draws rejected for landing in the grazing band.
    pub grazing_redraws: u32,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

fn uniform_direction<R: Rng + ?Sized>(rng: &mut R, k: usize) -> [f64; 4] {
    loop {
        let mut d = [0.0; 4];
        let mut n2 = 0.0;
        for x in d.iter_mut().take(k) {
            *x = gaussian(rng);
            n2 += *x * *x;
        }
        if n2 > 1e-20 {
            let n = n2.sqrt();
            d.iter_mut().for_each(|x| *x /= n);
            return d;
        }
    }
}

/// Uniform point on the geodesic sphere `∂B(center, r)`.
fn sphere_point<R: Rng + ?Sized>(space: &ModelSpace, center: &Vector, r: f64, rng: &mut R) -> Vector {
    let frame = space.tangent_frame(center);
    let d = uniform_direction(rng, frame.len());
    let w = frame.iter().zip(d).fold(Vector::zeros(), |acc, (e, c)| acc + e * c);
    match space {
        ModelSpace::Euclidean { .. } | ModelSpace::FlatTorus { .. } => space.wrap(&(center + w * r)),
        _ => space.exp(center, &w, r),
    }
}

/// Uniform point on piece `piece` (boundary volume measure). `vmax` bounds
/// the parametrization speed of Fourier pieces.
fn sample_boundary_point<R: Rng + ?Sized>(table: &Table, piece: usize, vmax: f64, rng: &mut R) -> Result<Vector> {
    let space = table.space();
    match &table.pieces()[piece].shape {
        Shape::Ball { center, radius } => Ok(sphere_point(space, center, *radius, rng)),
        Shape::Fourier(curve) => loop {
            let phi = rng.random::<f64>() * TAU;
            if rng.random::<f64>() * vmax <= curve.speed(phi) {
                return Ok(curve.point(phi));
            }
        },
        Shape::HalfSpace { .. } => Err(Error::Unsupported("sampling on half-space pieces".into())),
    }
}

/// Exact sampler of the normalized boundary measure: boundary volume on
/// the position, cosine-weighted inward directions.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    table: &'a Table,
    cumulative: Vec<f64>,
    vmax: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(table: &'a Table) -> Result<Self> {
        let cumulative = volumes::piece_weights(table)?;
        let vmax = table
            .pieces()
            .iter()
            .map(|p| match &p.shape {
                Shape::Fourier(c) => c.extent().2 * 1.001,
                _ => 0.0,
            })
            .collect();
        Ok(Sampler { table, cumulative, vmax })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SampledEntry> {
        let table = self.table;
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.random::<f64>() * total;
        let piece = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.cumulative.len() - 1);
        let q = sample_boundary_point(table, piece, self.vmax[piece], rng)?;
        let space = table.space();
        let image = table.piece_gauge(piece, &q).1;
        let n = table.normal_on(piece, image, &q);
        let frame = space.complement_frame(&q, &n);
        let grazing = table.tolerances().grazing_tol;
        let mut redraws = 0;
        loop {
            // uniform point of the unit (n-1)-ball lifted to the hemisphere
            let (a, b) = if frame.len() == 1 {
                (rng.random::<f64>() * 2.0 - 1.0, 0.0)
            } else {
                loop {
                    let a = rng.random::<f64>() * 2.0 - 1.0;
                    let b = rng.random::<f64>() * 2.0 - 1.0;
                    if a * a + b * b < 1.0 {
                        break (a, b);
                    }
                }
            };
            let c = (1.0 - a * a - b * b).max(0.0).sqrt();
            if c <= grazing {
                redraws += 1;
                continue;
            }
            let mut v = n * c + frame[0] * a;
            if frame.len() > 1 {
                v += frame[1] * b;
            }
            return Ok(SampledEntry { z: PhasePoint::new(q, space.normalize(&q, &v)), piece, grazing_redraws: redraws });
        }
    }
}

/// One draw from the normalized boundary measure. Builds a [`Sampler`]
/// each call; keep one around for repeated draws.
pub fn sample_entry<R: Rng + ?Sized>(table: &Table, rng: &mut R) -> Result<SampledEntry> {
    Sampler::new(table)?.draw(rng)
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedSampleSet {
    pub points: Vec<PhasePoint>,
    /// Total mass represented by the set (each point carries `total_mass / len`).
    pub total_mass: f64,
    pub seed: u64,
    pub grazing_redraws: u64,
}

pub fn sample_mu_theta(table: &Table, count: usize, seed: u64) -> Result<WeightedSampleSet> {
    let sampler = Sampler::new(table)?;
    let parts = parallel::map_batches(count, seed, |rng, _, len| -> Result<(Vec<PhasePoint>, u64)> {
        let mut pts = Vec::with_capacity(len);
        let mut redraws = 0u64;
        for _ in 0..len {
            let s = sampler.draw(rng)?;
            redraws += s.grazing_redraws as u64;
            pts.push(s.z);
        }
        Ok((pts, redraws))
    });
    let mut points = Vec::with_capacity(count);
    let mut grazing_redraws = 0;
    for p in parts {
        let (pts, r) = p?;
        points.extend(pts);
        grazing_redraws += r;
    }
    Ok(WeightedSampleSet { points, total_mass: trajectory_space_volume(table)?, seed, grazing_redraws })
}

impl WeightedSampleSet {
    /// Columns: chart coordinates, direction, weight.
    pub fn write_csv<W: Write>(&self, out: W, chart_len: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..chart_len).map(|i| format!("q{i}")).collect();
        header.extend((0..chart_len).map(|i| format!("v{i}")));
        header.push("weight".into());
        w.write_record(&header).map_err(csv_err)?;
        let weight = self.total_mass / self.points.len().max(1) as f64;
        for z in &self.points {
            let mut row: Vec<String> = z.q.iter().take(chart_len).map(|x| x.to_string()).collect();
            row.extend(z.v.iter().take(chart_len).map(|x| x.to_string()));
            row.push(weight.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxResult {
    pub region: PhaseBox,
    /// Fraction of the measure in the box.
    pub mu_k: Estimate,
    /// Fraction of the measure mapped into the box by one billiard step.
    pub mu_preimage_k: Estimate,
    /// Paired difference over standard error.
    pub z_score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreservationReport {
    pub total_mass: f64,
    pub samples: usize,
    pub excluded: u64,
    pub boxes: Vec<BoxResult>,
}

impl PreservationReport {
    pub fn max_abs_z(&self) -> f64 {
        self.boxes.iter().map(|b| b.z_score.abs()).fold(0.0, f64::max)
    }
}

/// Compares the mass of each box with the mass of its preimage under one
/// billiard step, from the same sample (paired indicators).
pub fn measure_preservation_test(
    table: &Table,
    law: &ReflectionLaw,
    boxes: &[PhaseBox],
    count: usize,
    seed: u64,
) -> Result<PreservationReport> {
    let sampler = Sampler::new(table)?;
    let k = boxes.len();
    type Acc = (Vec<Estimate>, Vec<Estimate>, Vec<Estimate>, u64);
    let parts = parallel::map_batches(count, seed, |rng, _, len| -> Result<Acc> {
        let mut a = vec![Estimate::new(); k];
        let mut b = vec![Estimate::new(); k];
        let mut d = vec![Estimate::new(); k];
        let mut excluded = 0u64;
        for _ in 0..len {
            let z = sampler.draw(rng)?.z;
            let z1 = match billiard_map(table, law, &z) {
                Ok((z1, _)) => z1,
                Err(Error::Trapped { .. } | Error::GrazingExit(_)) => {
                    excluded += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let c0 = boundary_coords(table, &z)?;
            let c1 = boundary_coords(table, &z1)?;
            for i in 0..k {
                let x = boxes[i].contains(&c0) as u8 as f64;
                let y = boxes[i].contains(&c1) as u8 as f64;
                a[i].push(x);
                b[i].push(y);
                d[i].push(x - y);
            }
        }
        Ok((a, b, d, excluded))
    });
    let mut a = vec![Estimate::new(); k];
    let mut b = vec![Estimate::new(); k];
    let mut d = vec![Estimate::new(); k];
    let mut excluded = 0;
    for p in parts {
        let (pa, pb, pd, e) = p?;
        for i in 0..k {
            a[i].merge(&pa[i]);
            b[i].merge(&pb[i]);
            d[i].merge(&pd[i]);
        }
        excluded += e;
    }
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        if a[i].sum() == 0.0 {
            return Err(Error::DegenerateSet);
        }
        let (m, se) = (d[i].mean(), d[i].stderr());
        let z_score = if se > 0.0 { m / se } else if m == 0.0 { 0.0 } else { f64::INFINITY };
        out.push(BoxResult { region: boxes[i].clone(), mu_k: a[i].clone(), mu_preimage_k: b[i].clone(), z_score });
    }
    Ok(PreservationReport { total_mass: trajectory_space_volume(table)?, samples: count, excluded, boxes: out })
}
