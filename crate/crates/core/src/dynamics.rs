//! Causality map, reflection laws, billiard map and orbits.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{ModelSpace, PhasePoint, Stratum, StratumLabel, Table, Vector};
use crate::parallel;
use crate::{Error, Result};

/// One free geodesic segment from an inward boundary point to the next
/// boundary point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordRecord {
    pub entry: PhasePoint,
    pub exit: PhasePoint,
    pub length: f64,
    pub entry_stratum: Stratum,
    pub exit_stratum: Stratum,
    pub exit_cos_in: f64,
    /// Tangent entry with no forward segment: exit = entry, length 0.
    pub degenerate: bool,
    pub entry_piece: usize,
    pub exit_piece: usize,
    /// Lattice image of the exit piece relative to the entry cell (torus).
    pub exit_image: [i32; 3],
}

impl ChordRecord {
    /// Exit point unwrapped along the chord: on the torus it is the entry
    /// plus the flight vector, elsewhere the exit itself.
    pub fn exit_lift(&self, space: &ModelSpace) -> Vector {
        match space {
            ModelSpace::FlatTorus { .. } if !self.degenerate => self.entry.q + self.entry.v * self.length,
            _ => self.exit.q,
        }
    }
}

/// Reflection stretch for one boundary piece: the boundary metric is
/// `g + (k² − 1)⟨·, e⟩²` with `e = cos(tilt)·n + sin(tilt)·t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stretch {
    pub factor: f64,
    pub tilt: f64,
}

impl Stretch {
    pub const IDENTITY: Stretch = Stretch { factor: 1.0, tilt: 0.0 };
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReflectionLaw {
    #[default]
    Elastic,
    /// Elastic reflection in a modified metric g̃, one stretch per piece
    /// (pieces without an entry reflect elastically).
    Rescaled { stretches: Vec<Stretch> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    Completed { bounces: usize },
    Trapped { after: usize },
    Grazing { after: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub chords: Vec<ChordRecord>,
    pub termination: Termination,
}

fn degenerate_chord(z: &PhasePoint, stratum: Stratum, piece: usize) -> ChordRecord {
    ChordRecord {
        entry: *z,
        exit: *z,
        length: 0.0,
        entry_stratum: stratum,
        exit_stratum: stratum,
        exit_cos_in: stratum.cos_in,
        degenerate: true,
        entry_piece: piece,
        exit_piece: piece,
        exit_image: [0; 3],
    }
}

pub fn causality_map(table: &Table, z: &PhasePoint) -> Result<ChordRecord> {
    let (cos_in, piece, _) = table.boundary_cos(z)?;
    let stratum = table.classify(z)?;
    match stratum.label {
        StratumLabel::TransversalOut => return Err(Error::DegenerateStart { cos_in }),
        StratumLabel::TangentConvex => return Ok(degenerate_chord(z, stratum, piece)),
        _ => {}
    }
    let hit = table.first_boundary_hit(z)?;
    let record = ChordRecord {
        entry: *z,
        exit: hit.exit,
        length: hit.s_hit,
        entry_stratum: stratum,
        exit_stratum: hit.stratum,
        exit_cos_in: hit.cos_in,
        degenerate: false,
        entry_piece: piece,
        exit_piece: hit.piece,
        exit_image: hit.image,
    };
    if hit.cos_in.abs() < table.tolerances().grazing_tol {
        return Err(Error::GrazingExit(Box::new(record)));
    }
    Ok(record)
}

/// Reflects `v` at a boundary point whose inward unit normal is `n`.
pub(crate) fn reflect_with_normal(table: &Table, law: &ReflectionLaw, piece: usize, q: &Vector, v: &Vector, n: &Vector) -> Vector {
    let space = table.space();
    let stretch = match law {
        ReflectionLaw::Elastic => Stretch::IDENTITY,
        ReflectionLaw::Rescaled { stretches } => stretches.get(piece).copied().unwrap_or(Stretch::IDENTITY),
    };
    let vn = space.metric_dot(q, v, n);
    if stretch.factor == 1.0 {
        return space.normalize(q, &(v - n * (2.0 * vn)));
    }
    let t = space.complement_frame(q, n)[0];
    let e = n * stretch.tilt.cos() + t * stretch.tilt.sin();
    let k2 = stretch.factor * stretch.factor;
    let en = space.metric_dot(q, &e, n);
    // g̃-normal to the boundary
    let m = n - e * ((k2 - 1.0) / k2 * en);
    let mn = space.metric_dot(q, &m, n);
    space.normalize(q, &(v - m * (2.0 * vn / mn)))
}

pub fn reflect(law: &ReflectionLaw, table: &Table, z: &PhasePoint) -> Result<PhasePoint> {
    let (piece, image) = table.locate(&z.q).map_err(|gauge| Error::NotOnBoundary { gauge })?;
    let n = table.normal_on(piece, image, &z.q);
    Ok(PhasePoint::new(z.q, reflect_with_normal(table, law, piece, &z.q, &z.v, &n)))
}

/// One step of the billiard map: the chord from `z`, then reflection at its
/// exit. Degenerate chords pass `z` through unchanged.
pub fn billiard_map(table: &Table, law: &ReflectionLaw, z: &PhasePoint) -> Result<(PhasePoint, ChordRecord)> {
    let chord = causality_map(table, z)?;
    if chord.degenerate {
        return Ok((*z, chord));
    }
    let q = chord.exit.q;
    let image = table.piece_gauge(chord.exit_piece, &q).1;
    let n = table.normal_on(chord.exit_piece, image, &q);
    let v = reflect_with_normal(table, law, chord.exit_piece, &q, &chord.exit.v, &n);
    Ok((PhasePoint::new(q, v), chord))
}

/// Lazy orbit of the billiard map. Yields chords until an error, which is
/// yielded once before the iterator ends.
pub struct Orbit<'a> {
    table: &'a Table,
    law: &'a ReflectionLaw,
    z: Option<PhasePoint>,
}

impl<'a> Orbit<'a> {
    pub fn new(table: &'a Table, law: &'a ReflectionLaw, z0: PhasePoint) -> Self {
        Orbit { table, law, z: Some(z0) }
    }
}

impl Iterator for Orbit<'_> {
    type Item = Result<ChordRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let z = self.z.take()?;
        match billiard_map(self.table, self.law, &z) {
            Ok((next, chord)) => {
                if !chord.degenerate {
                    self.z = Some(next);
                }
                Some(Ok(chord))
            }
            Err(e) => Some(Err(e)),
        }
    }
}

pub fn iterate_orbit(table: &Table, law: &ReflectionLaw, z0: &PhasePoint, k_max: usize) -> OrbitRecord {
    let mut chords = Vec::with_capacity(k_max.min(1 << 20));
    for item in Orbit::new(table, law, *z0).take(k_max) {
        match item {
            Ok(c) => chords.push(c),
            Err(Error::GrazingExit(c)) => {
                chords.push(*c);
                let after = chords.len();
                return OrbitRecord { chords, termination: Termination::Grazing { after } };
            }
            Err(Error::Trapped { .. }) => {
                let after = chords.len();
                return OrbitRecord { chords, termination: Termination::Trapped { after } };
            }
            Err(_) => {
                let after = chords.len();
                return OrbitRecord { chords, termination: Termination::Grazing { after } };
            }
        }
    }
    let bounces = chords.len();
    OrbitRecord { chords, termination: Termination::Completed { bounces } }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub l_max: f64,
    pub escape_fraction: f64,
    pub grazing_fraction: f64,
    /// Longest observed free chord; a lower bound for the geodesic diameter.
    pub max_chord: f64,
    /// Whether some straight line of the torus avoids every obstacle.
    pub free_corridor: Option<bool>,
}

pub fn trapping_probe(table: &Table, sample_count: usize, l_max: f64, seed: u64) -> Result<ProbeReport> {
    let capped = table.clone().with_l_max(l_max)?;
    let sampler = crate::measure::Sampler::new(&capped)?;
    let parts = parallel::map_batches(sample_count, seed, |rng, _, len| -> Result<(u64, u64, f64)> {
        let (mut escaped, mut grazing, mut longest) = (0u64, 0u64, 0.0f64);
        for _ in 0..len {
            let z = sampler.draw(rng)?.z;
            match causality_map(&capped, &z) {
                Ok(c) => {
                    escaped += 1;
                    longest = longest.max(c.length);
                }
                Err(Error::GrazingExit(c)) => {
                    escaped += 1;
                    grazing += 1;
                    longest = longest.max(c.length);
                }
                Err(Error::Trapped { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok((escaped, grazing, longest))
    });
    let (mut escaped, mut grazing, mut longest) = (0u64, 0u64, 0.0f64);
    for p in parts {
        let (e, g, l) = p?;
        escaped += e;
        grazing += g;
        longest = longest.max(l);
    }
    let n = sample_count.max(1) as f64;
    Ok(ProbeReport {
        samples: sample_count,
        l_max,
        escape_fraction: escaped as f64 / n,
        grazing_fraction: grazing as f64 / n,
        max_chord: longest,
        free_corridor: free_corridor(table),
    })
}

/// For two-dimensional tori: scans rational directions `(p, q)` with
/// `|p|, |q| ≤ 12` for a line family that misses every obstacle.
pub fn free_corridor(table: &Table) -> Option<bool> {
    let periods = table.space().periods()?;
    if periods.len() != 2 {
        return None;
    }
    let balls: Vec<(Vector, f64)> = table
        .pieces()
        .iter()
        .filter_map(|p| match p.shape {
            crate::geometry::Shape::Ball { center, radius } => Some((center, radius)),
            _ => None,
        })
        .collect();
    let gcd = |mut a: i64, mut b: i64| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a.abs()
    };
    for p in 0..=12i64 {
        for q in -12..=12i64 {
            if gcd(p, q) != 1 || (p == 0 && q != 1) {
                continue;
            }
            let d = [p as f64 * periods[0], q as f64 * periods[1]];
            let len = d[0].hypot(d[1]);
            let perp = [-d[1] / len, d[0] / len];
            // lattice projects onto the perpendicular with this spacing
            let spacing = periods[0] * periods[1] / len;
            let mut intervals: Vec<(f64, f64)> = balls
                .iter()
                .map(|(c, r)| {
                    let x = (c[0] * perp[0] + c[1] * perp[1]).rem_euclid(spacing);
                    (x - r, x + r)
                })
                .collect();
            if intervals.iter().any(|(a, b)| b - a >= spacing) {
                continue;
            }
            intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let start = intervals[0].0;
            let mut reach = intervals[0].1;
            let mut gap = false;
            for &(a, b) in &intervals[1..] {
                if a > reach {
                    gap = true;
                    break;
                }
                reach = reach.max(b);
            }
            if gap || reach < start + spacing {
                return Some(true);
            }
        }
    }
    Some(false)
}

#[derive(Serialize)]
struct ChordLine<'a> {
    orbit: usize,
    index: usize,
    entry_q: &'a [f64],
    entry_v: &'a [f64],
    exit_q: &'a [f64],
    exit_v: &'a [f64],
    length: f64,
    exit_cos_in: f64,
    degenerate: bool,
    entry_piece: usize,
    exit_piece: usize,
}

/// One JSON object per chord, with the first `chart_len` chart coordinates.
pub fn write_orbit_jsonl<W: Write>(mut out: W, orbit_index: usize, orbit: &OrbitRecord, chart_len: usize) -> Result<()> {
    let dim = chart_len;
    for (index, c) in orbit.chords.iter().enumerate() {
        let line = ChordLine {
            orbit: orbit_index,
            index,
            entry_q: &c.entry.q.as_slice()[..dim],
            entry_v: &c.entry.v.as_slice()[..dim],
            exit_q: &c.exit.q.as_slice()[..dim],
            exit_v: &c.exit.v.as_slice()[..dim],
            length: c.length,
            exit_cos_in: c.exit_cos_in,
            degenerate: c.degenerate,
            entry_piece: c.entry_piece,
            exit_piece: c.exit_piece,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub orbit: usize,
    pub bounces: usize,
    pub termination: String,
    pub mean_length: f64,
    pub min_length: f64,
    pub max_length: f64,
}

impl OrbitSummary {
    pub fn of(orbit_index: usize, orbit: &OrbitRecord) -> Self {
        let lengths = crate::measure::Estimate::from_values(orbit.chords.iter().map(|c| c.length));
        OrbitSummary {
            orbit: orbit_index,
            bounces: orbit.chords.len(),
            termination: match orbit.termination {
                Termination::Completed { .. } => "completed",
                Termination::Trapped { .. } => "trapped",
                Termination::Grazing { .. } => "grazing",
            }
            .into(),
            mean_length: lengths.mean(),
            min_length: orbit.chords.iter().map(|c| c.length).fold(f64::INFINITY, f64::min),
            max_length: orbit.chords.iter().map(|c| c.length).fold(0.0, f64::max),
        }
    }
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[OrbitSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs independent orbits from the given starts in parallel.
pub fn iterate_many(table: &Table, law: &ReflectionLaw, starts: &[PhasePoint], k_max: usize) -> Vec<OrbitRecord> {
    starts.par_iter().map(|z| iterate_orbit(table, law, z, k_max)).collect()
}
