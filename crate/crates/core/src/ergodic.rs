//! Space and time averages of chord observables, mean free path, volume
//! recovery from bounce lengths, recurrence counts and the isoperimetric
//! inequality checks.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{billiard_map, free_corridor, trapping_probe, ChordRecord, Orbit, ReflectionLaw, Termination};
use crate::geometry::{ModelSpace, PhasePoint, Shape, Side, Table};
use crate::lyapunov::{self, EnclosingBody, LyapunovF};
use crate::measure::{self, boundary_coords, csv_err, Estimate, EstimateSummary, ExactSum, PhaseBox, Sampler};
use crate::{parallel, unit_ball_volume, unit_sphere_volume, Error, Result};

/// Largest excluded fraction a space average tolerates.
pub const MAX_EXCLUDED: f64 = 0.01;

#[derive(Clone, Copy, Debug)]
pub enum Observable<'a> {
    ChordLength,
    /// `F(C(z)) − F(z)` for a Lyapunov function `F`.
    DeltaF(&'a LyapunovF),
}

impl Observable<'_> {
    pub fn on_chord(&self, chord: &ChordRecord) -> Result<f64> {
        match self {
            Observable::ChordLength => Ok(chord.length),
            Observable::DeltaF(_) if chord.degenerate => Ok(0.0),
            Observable::DeltaF(f) => Ok(f.eval(&chord.exit)? - f.eval(&chord.entry)?),
        }
    }
}

/// `vol(S^{n-1}) / vol(B^{n-1})`.
pub fn sphere_to_ball_ratio(n: usize) -> f64 {
    unit_sphere_volume(n - 1) / unit_ball_volume(n - 1)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpaceAverage {
    pub estimate: Estimate,
    pub samples: usize,
    pub trapped: u64,
    pub grazing: u64,
}

impl SpaceAverage {
    pub fn excluded_fraction(&self) -> f64 {
        (self.trapped + self.grazing) as f64 / self.samples.max(1) as f64
    }
}

/// Mean of the observable under the normalized boundary measure. Trapped
/// and grazing chords are excluded and counted.
pub fn space_average(table: &Table, obs: Observable<'_>, count: usize, seed: u64) -> Result<SpaceAverage> {
    if count == 0 {
        return Err(Error::Config("space average needs at least one sample".into()));
    }
    let sampler = Sampler::new(table)?;
    let parts = parallel::map_batches(count, seed, |rng, _, len| -> Result<(Estimate, u64, u64)> {
        let mut est = Estimate::new();
        let (mut trapped, mut grazing) = (0, 0);
        for _ in 0..len {
            let z = sampler.draw(rng)?.z;
            match crate::dynamics::causality_map(table, &z) {
                Ok(chord) => est.push(obs.on_chord(&chord)?),
                Err(Error::Trapped { .. }) => trapped += 1,
                Err(Error::GrazingExit(_)) => grazing += 1,
                Err(e) => return Err(e),
            }
        }
        Ok((est, trapped, grazing))
    });
    let mut out = SpaceAverage { estimate: Estimate::new(), samples: count, trapped: 0, grazing: 0 };
    for p in parts {
        let (e, t, g) = p?;
        out.estimate.merge(&e);
        out.trapped += t;
        out.grazing += g;
    }
    let fraction = out.excluded_fraction();
    if fraction > MAX_EXCLUDED {
        return Err(Error::TooManyTrapped { fraction });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeAverage {
    /// `(m, mean of the first m values)` at every power of two, plus the end.
    pub checkpoints: Vec<(usize, f64)>,
    pub mean: f64,
    pub bounces: usize,
    pub termination: Termination,
}

/// Running Birkhoff means of the observable along the billiard orbit of `z0`.
pub fn time_average(table: &Table, law: &ReflectionLaw, obs: Observable<'_>, z0: &PhasePoint, m: usize) -> Result<TimeAverage> {
    let mut sum = ExactSum::new();
    let mut checkpoints = Vec::new();
    let mut k = 0;
    let mut termination = Termination::Completed { bounces: m };
    for item in Orbit::new(table, law, *z0).take(m) {
        let chord = match item {
            Ok(c) => c,
            Err(Error::Trapped { .. }) => {
                termination = Termination::Trapped { after: k };
                break;
            }
            Err(Error::GrazingExit(_)) => {
                termination = Termination::Grazing { after: k };
                break;
            }
            Err(e) => return Err(e),
        };
        sum.add(obs.on_chord(&chord)?);
        k += 1;
        if k.is_power_of_two() {
            checkpoints.push((k, sum.value() / k as f64));
        }
    }
    let mean = if k == 0 { f64::NAN } else { sum.value() / k as f64 };
    if k > 0 && !k.is_power_of_two() {
        checkpoints.push((k, mean));
    }
    Ok(TimeAverage { checkpoints, mean, bounces: k, termination })
}

#[derive(Clone, Debug, Serialize)]
pub struct AverageReport {
    pub space_avg: EstimateSummary,
    pub time_avg: Vec<TimeAverage>,
    /// `|time − space| / |space|` per orbit; NaN for orbits cut short.
    pub agreement: Vec<f64>,
    /// Closed-form space mean when one is known.
    pub prediction: Option<f64>,
    pub ergodicity: ErgodicityStatus,
}

/// Known ergodic behaviour of a table. Reported with Birkhoff comparisons;
/// never inferred from the simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErgodicityStatus {
    /// Dispersing (Sinai) billiard: convex scatterers on a flat torus.
    Dispersing,
    /// Round table: the reflection angle is a first integral.
    IntegrableRound,
    /// Elliptic table: confocal caustics.
    IntegrableElliptic,
    Unknown,
}

pub fn ergodicity_status(table: &Table) -> ErgodicityStatus {
    let pieces = table.pieces();
    let all_balls = pieces.iter().all(|p| matches!(p.shape, Shape::Ball { .. }));
    match table.space() {
        ModelSpace::FlatTorus { .. } if all_balls => ErgodicityStatus::Dispersing,
        _ if pieces.len() == 1 && all_balls && pieces[0].side == Side::Outer => ErgodicityStatus::IntegrableRound,
        _ if pieces.len() == 1 && table.name() == "ellipse" => ErgodicityStatus::IntegrableElliptic,
        _ => ErgodicityStatus::Unknown,
    }
}

impl AverageReport {
    /// Number of orbits whose time average is within `tol` of the space average.
    pub fn agreeing(&self, tol: f64) -> usize {
        self.agreement.iter().filter(|a| **a < tol).count()
    }
}

/// Birkhoff comparison: time averages from `starters` random starting
/// points against the space average of the same observable.
pub fn birkhoff_report(
    table: &Table,
    law: &ReflectionLaw,
    obs: Observable<'_>,
    starters: usize,
    m: usize,
    space_samples: usize,
    seed: u64,
) -> Result<AverageReport> {
    let space = space_average(table, obs, space_samples, seed)?;
    let starts = measure::sample_mu_theta(table, starters, seed ^ 0x5eed_0b17)?.points;
    let time_avg = starts
        .par_iter()
        .map(|z| time_average(table, law, obs, z, m))
        .collect::<Result<Vec<_>>>()?;
    let s = space.estimate.mean();
    let agreement = time_avg
        .iter()
        .map(|t| if t.bounces == m { (t.mean - s).abs() / s.abs() } else { f64::NAN })
        .collect();
    let prediction = match obs {
        Observable::ChordLength => measure::domain_volumes(table)
            .ok()
            .map(|v| sphere_to_ball_ratio(table.dim()) * v.vol_m / v.vol_dm),
        Observable::DeltaF(_) => None,
    };
    Ok(AverageReport {
        space_avg: space.estimate.summary(),
        time_avg,
        agreement,
        prediction,
        ergodicity: ergodicity_status(table),
    })
}

/// Convergence curves as CSV rows `orbit, m, running_mean`.
pub fn write_convergence_csv<W: Write>(out: W, orbits: &[TimeAverage]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["orbit", "m", "running_mean"]).map_err(csv_err)?;
    for (i, t) in orbits.iter().enumerate() {
        for (m, v) in &t.checkpoints {
            w.write_record([i.to_string(), m.to_string(), v.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanFreePath {
    pub prediction: f64,
    pub space: EstimateSummary,
    pub relative_gap: f64,
    /// `(space − prediction) / stderr`.
    pub z_score: f64,
    pub excluded_fraction: f64,
    pub vol_m: f64,
    pub vol_dm: f64,
    pub note: Option<String>,
}

pub fn mean_free_path(table: &Table, count: usize, seed: u64) -> Result<MeanFreePath> {
    let vols = measure::domain_volumes(table)?;
    let prediction = sphere_to_ball_ratio(table.dim()) * vols.vol_m / vols.vol_dm;
    let space = space_average(table, Observable::ChordLength, count, seed)?;
    let e = &space.estimate;
    let note = match free_corridor(table) {
        Some(true) => Some(format!(
            "infinite horizon: free corridors make chord lengths unbounded; chords longer than {} are excluded as trapped ({} of {})",
            table.tolerances().l_max,
            space.trapped,
            count
        )),
        _ => None,
    };
    Ok(MeanFreePath {
        prediction,
        space: e.summary(),
        relative_gap: (e.mean() - prediction).abs() / prediction,
        z_score: (e.mean() - prediction) / e.stderr(),
        excluded_fraction: space.excluded_fraction(),
        vol_m: vols.vol_m,
        vol_dm: vols.vol_dm,
        note,
    })
}

/// Running estimates of `vol(M)` from a sequence of bounce lengths, by
/// inverting the mean free path formula. Uses exact sums, so the final
/// value does not depend on the order of the lengths.
pub fn hear_volume(lengths: &[f64], vol_dm: f64, n: usize) -> Result<Vec<f64>> {
    if lengths.is_empty() {
        return Err(Error::EmptySequence);
    }
    if vol_dm <= 0.0 || !(2..=3).contains(&n) {
        return Err(Error::Config("need a positive boundary volume and dimension 2 or 3".into()));
    }
    let c = vol_dm / sphere_to_ball_ratio(n);
    let mut sum = ExactSum::new();
    Ok(lengths
        .iter()
        .enumerate()
        .map(|(k, l)| {
            sum.add(*l);
            c * sum.value() / (k + 1) as f64
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceReport {
    pub starters: usize,
    pub bounces: usize,
    pub returned_fraction: f64,
    pub mean_return_count: f64,
    /// Orbits cut short by trapping or grazing.
    pub terminated: usize,
    /// Draws needed to find the starters in `U`.
    pub draws: u64,
}

/// Draws `starters` points of the boundary measure conditioned on `u` and
/// counts how often each orbit re-enters `u` within `m` bounces.
pub fn recurrence_test(
    table: &Table,
    law: &ReflectionLaw,
    u: &PhaseBox,
    starters: usize,
    m: usize,
    seed: u64,
) -> Result<RecurrenceReport> {
    let sampler = Sampler::new(table)?;
    let budget = 100_000 * starters.max(1) as u64;
    let mut rng = parallel::stream_rng(seed, 0);
    let mut starts = Vec::with_capacity(starters);
    let mut draws = 0u64;
    while starts.len() < starters {
        if draws >= budget {
            return Err(Error::DegenerateSet);
        }
        draws += 1;
        let z = sampler.draw(&mut rng)?.z;
        if u.contains(&boundary_coords(table, &z)?) {
            starts.push(z);
        }
    }
    let counts = starts
        .par_iter()
        .map(|z0| -> Result<(usize, bool)> {
            let mut returns = 0;
            let mut cut = false;
            let mut z = *z0;
            for _ in 0..m {
                let (next, chord) = match billiard_map(table, law, &z) {
                    Ok(step) => step,
                    Err(Error::Trapped { .. } | Error::GrazingExit(_)) => {
                        cut = true;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                if chord.degenerate {
                    cut = true;
                    break;
                }
                if u.contains(&boundary_coords(table, &next)?) {
                    returns += 1;
                }
                z = next;
            }
            Ok((returns, cut))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = starters.max(1) as f64;
    Ok(RecurrenceReport {
        starters,
        bounces: m,
        returned_fraction: counts.iter().filter(|(r, _)| *r > 0).count() as f64 / n,
        mean_return_count: counts.iter().map(|(r, _)| *r as f64).sum::<f64>() / n,
        terminated: counts.iter().filter(|(_, c)| *c).count(),
        draws,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs / lhs` for inequalities, relative error for identities.
    pub margin: f64,
    pub passed: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub name: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub table: String,
    pub checks: Vec<Check>,
    pub skipped: Vec<Skipped>,
}

impl InequalityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Exact geodesic diameter for a table bounded by a single geodesic ball.
fn exact_diameter(table: &Table) -> Option<f64> {
    match table.pieces() {
        [p] if p.side == Side::Outer => match (&p.shape, table.space()) {
            (Shape::Ball { radius, .. }, ModelSpace::Sphere { .. }) if *radius <= PI / 2.0 => Some(2.0 * radius),
            (Shape::Ball { radius, .. }, ModelSpace::Euclidean { .. } | ModelSpace::HyperbolicBall { .. }) => {
                Some(2.0 * radius)
            }
            _ => None,
        },
        _ => None,
    }
}

pub const SLICE_TOLERANCE: f64 = 0.03;

/// Diameter inequality, slice bound and slice integral identity. `f` defaults
/// to the standard enclosing ball when it exists.
pub fn inequality_report(table: &Table, f: Option<&LyapunovF>, samples: usize, seed: u64) -> Result<InequalityReport> {
    let n = table.dim();
    let vols = measure::domain_volumes(table)?;
    let vol_t = measure::trajectory_space_volume(table)?;
    let mut checks = Vec::new();
    let mut skipped = Vec::new();

    let (gd, note) = match exact_diameter(table) {
        Some(d) => (d, None),
        None => {
            let probe = trapping_probe(table, samples, table.tolerances().l_max, seed)?;
            (probe.max_chord, Some("geodesic diameter is a sampled lower bound; a failure may reflect underestimation".to_string()))
        }
    };
    let rhs = gd * vols.vol_dm / sphere_to_ball_ratio(n);
    checks.push(Check {
        name: "diameter".into(),
        lhs: vols.vol_m,
        rhs,
        margin: rhs / vols.vol_m,
        passed: vols.vol_m <= rhs,
        note,
    });

    let owned;
    let f = match f {
        Some(f) => Some(f),
        None => match EnclosingBody::default_for(table).and_then(|b| LyapunovF::unchecked(table, b)) {
            Ok(g) => {
                owned = g;
                Some(&owned)
            }
            Err(e) => {
                skipped.push(Skipped { name: "slices".into(), reason: e.to_string() });
                None
            }
        },
    };
    if let Some(f) = f {
        let var = lyapunov::var_f_boundary(table, f, samples.min(100_000), seed)?;
        let pad = 0.05 * var.var;
        let ts = lyapunov::grid(var.f_min - pad, var.f_max + pad, 100);
        let curve = lyapunov::slice_curve(table, f, &ts, samples, seed)?;
        let max_a = curve.areas.iter().map(Estimate::mean).fold(0.0, f64::max);
        checks.push(Check {
            name: "slice-bound".into(),
            lhs: max_a,
            rhs: vol_t,
            margin: vol_t / max_a,
            passed: max_a <= vol_t,
            note: None,
        });
        let integral = curve.integral();
        let target = unit_sphere_volume(n - 1) * vols.vol_m;
        let rel = (integral - target).abs() / target;
        checks.push(Check {
            name: "slice-integral".into(),
            lhs: integral,
            rhs: target,
            margin: rel,
            passed: rel < SLICE_TOLERANCE,
            note: Some(format!("trapezoid over {} points, relative tolerance {SLICE_TOLERANCE}", ts.len())),
        });
    }
    skipped.push(Skipped {
        name: "trajectory-space-boundary-volume".into(),
        reason: "needs the induced metric on the boundary of the unit tangent bundle, which is not modelled".into(),
    });
    Ok(InequalityReport { table: table.name().to_string(), checks, skipped })
}
