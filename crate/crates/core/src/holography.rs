//! Scattering data on boundary grids: conjugacy residuals under isometries,
//! chord-cloud reconstruction of the interior, and a discrete atlas of the
//! trajectory space with its discontinuity edges.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::causality_map;
use crate::geometry::{BoundaryPiece, FourierCurve, ModelSpace, PhasePoint, Shape, Side, Table, Vector};
use crate::lyapunov::{EnclosingBody, LyapunovF};
use crate::measure::{self, boundary_coords, csv_err, entry_from_coords, BoundaryCoords};
use crate::{parallel, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRecord {
    /// `(piece, position index, direction index)` of the grid cell.
    pub cell: [usize; 3],
    pub entry: PhasePoint,
    pub exit: PhasePoint,
    pub exit_lift: Vector,
    pub length: f64,
    pub exit_piece: usize,
    /// Lattice image of the exit piece seen from the entry (torus).
    pub exit_image: [i32; 3],
    pub f_entry: f64,
    pub f_exit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringDataset {
    pub table: String,
    pub space: ModelSpace,
    /// Cells per coordinate on each piece.
    pub grid: usize,
    pub records: Vec<ScatterRecord>,
    /// Grid cells dropped for trapping or grazing.
    pub dropped: usize,
}

/// Cell-center coordinates of an `n = 2` boundary grid.
fn cell_coords(piece: usize, i: usize, j: usize, grid: usize) -> BoundaryCoords {
    let g = grid as f64;
    BoundaryCoords {
        piece,
        pos: [(i as f64 + 0.5) * TAU / g, 0.0],
        dir: [-FRAC_PI_2 + (j as f64 + 0.5) * PI / g, 0.0],
    }
}

/// Lyapunov function used for datasets: the default enclosing ball, or
/// `None` on the torus, where flight time from the entry stands in.
fn dataset_f(table: &Table) -> Result<Option<LyapunovF>> {
    if table.space().periods().is_some() {
        return Ok(None);
    }
    Ok(Some(LyapunovF::unchecked(table, EnclosingBody::default_for(table)?)?))
}

fn grid_cells(table: &Table, f: Option<&LyapunovF>, grid: usize) -> Result<Vec<Option<ScatterRecord>>> {
    if table.dim() != 2 {
        return Err(Error::Unsupported("boundary grids are two-dimensional tables only".into()));
    }
    if grid < 8 {
        return Err(Error::Config("grid needs at least 8 cells per coordinate".into()));
    }
    let rows: Vec<(usize, usize)> = (0..table.pieces().len()).flat_map(|p| (0..grid).map(move |i| (p, i))).collect();
    let cells = rows
        .par_iter()
        .map(|&(piece, i)| -> Result<Vec<Option<ScatterRecord>>> {
            (0..grid)
                .map(|j| {
                    let z = entry_from_coords(table, &cell_coords(piece, i, j, grid))?;
                    let chord = match causality_map(table, &z) {
                        Ok(c) if !c.degenerate => c,
                        Ok(_) | Err(Error::Trapped { .. } | Error::GrazingExit(_)) => return Ok(None),
                        Err(e) => return Err(e),
                    };
                    let (f_entry, f_exit) = match f {
                        Some(f) => (f.eval(&chord.entry)?, f.eval(&chord.exit)?),
                        None => (0.0, chord.length),
                    };
                    Ok(Some(ScatterRecord {
                        cell: [piece, i, j],
                        entry: chord.entry,
                        exit: chord.exit,
                        exit_lift: chord.exit_lift(table.space()),
                        length: chord.length,
                        exit_piece: chord.exit_piece,
                        exit_image: chord.exit_image,
                        f_entry,
                        f_exit,
                    }))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(cells.into_iter().flatten().collect())
}

/// Chords from a `grid × grid` lattice of cell centers in (position,
/// direction) on every piece.
pub fn scattering_dataset(table: &Table, f: Option<&LyapunovF>, grid: usize) -> Result<ScatteringDataset> {
    let owned = match f {
        Some(_) => None,
        None => dataset_f(table)?,
    };
    let cells = grid_cells(table, f.or(owned.as_ref()), grid)?;
    let total = cells.len();
    let records: Vec<ScatterRecord> = cells.into_iter().flatten().collect();
    Ok(ScatteringDataset {
        table: table.name().to_string(),
        space: table.space().clone(),
        grid,
        dropped: total - records.len(),
        records,
    })
}

impl ScatteringDataset {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Isometries of the model spaces, acting on chart coordinates in the
/// first two axes. Rotations turn about the origin (the polar axis on the
/// sphere); reflections flip the second axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Isometry {
    Rotation { angle: f64 },
    Reflection,
    /// Flat spaces only.
    Translation { shift: [f64; 2] },
}

impl Isometry {
    pub fn apply_point(&self, q: &Vector) -> Vector {
        let mut p = *q;
        match *self {
            Isometry::Rotation { angle } => {
                let (s, c) = angle.sin_cos();
                p[0] = c * q[0] - s * q[1];
                p[1] = s * q[0] + c * q[1];
            }
            Isometry::Reflection => p[1] = -q[1],
            Isometry::Translation { shift } => {
                p[0] += shift[0];
                p[1] += shift[1];
            }
        }
        p
    }

    fn apply_curve(&self, c: &FourierCurve) -> FourierCurve {
        let p = self.apply_point(&Vector::new(c.center[0], c.center[1], 0.0, 0.0));
        let center = [p[0], p[1]];
        let n = c.cos.len().max(c.sin.len());
        let get = |xs: &[f64], k: usize| xs.get(k).copied().unwrap_or(0.0);
        let (cos, sin) = match *self {
            Isometry::Rotation { angle } => (0..n)
                .map(|k| {
                    let (s, co) = (k as f64 * angle).sin_cos();
                    let (a, b) = (get(&c.cos, k), get(&c.sin, k));
                    (a * co - b * s, a * s + b * co)
                })
                .unzip(),
            Isometry::Reflection => (c.cos.clone(), c.sin.iter().map(|b| -b).collect()),
            Isometry::Translation { .. } => (c.cos.clone(), c.sin.clone()),
        };
        FourierCurve { center, cos, sin }
    }

    /// Image of the table.
    pub fn apply_table(&self, table: &Table) -> Result<Table> {
        let space = table.space();
        if matches!(self, Isometry::Translation { .. }) && space.is_curved() {
            return Err(Error::Unsupported("translations of curved spaces".into()));
        }
        let pieces = table
            .pieces()
            .iter()
            .map(|p| -> Result<BoundaryPiece> {
                Ok(match &p.shape {
                    Shape::Ball { center, radius } => BoundaryPiece::ball(space.wrap(&self.apply_point(center)), *radius, p.side),
                    Shape::Fourier(c) => BoundaryPiece::fourier(self.apply_curve(c), p.side),
                    Shape::HalfSpace { .. } => return Err(Error::Unsupported("isometric images of half-spaces".into())),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Table::new(space.clone(), pieces)?.with_tolerances(*table.tolerances())?.with_name(table.name()))
    }

    /// Induced map from boundary coordinates of a table to those of its image.
    pub fn apply_coords(&self, c: &BoundaryCoords) -> BoundaryCoords {
        let mut out = *c;
        match *self {
            Isometry::Rotation { angle } => out.pos[0] = (c.pos[0] + angle).rem_euclid(TAU),
            Isometry::Reflection => {
                out.pos[0] = (-c.pos[0]).rem_euclid(TAU);
                out.dir[0] = -c.dir[0];
            }
            Isometry::Translation { .. } => {}
        }
        out
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Largest coordinate gap between two boundary points; infinite across pieces.
fn coords_gap(a: &BoundaryCoords, b: &BoundaryCoords) -> f64 {
    if a.piece != b.piece {
        return f64::INFINITY;
    }
    angle_gap(a.pos[0], b.pos[0]).max(angle_gap(a.dir[0], b.dir[0]))
}

fn skippable(e: &Error) -> bool {
    matches!(e, Error::Trapped { .. } | Error::GrazingExit(_) | Error::DegenerateStart { .. })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugacyReport {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub samples: usize,
    pub skipped: usize,
}

/// Residual of `phi ∘ C₁ = C₂ ∘ phi` over sampled boundary points of
/// `table1`, measured in boundary coordinates of `table2`.
pub fn conjugacy_residual<P>(table1: &Table, table2: &Table, phi: P, count: usize, seed: u64) -> Result<ConjugacyReport>
where
    P: Fn(&BoundaryCoords) -> BoundaryCoords + Sync,
{
    if table1.dim() != 2 || table2.dim() != 2 {
        return Err(Error::Unsupported("conjugacy residuals for two-dimensional tables only".into()));
    }
    let sampler = measure::Sampler::new(table1)?;
    let parts = parallel::map_batches(count, seed, |rng, _, len| -> Result<(f64, f64, usize, usize)> {
        let (mut max, mut sum, mut used, mut skipped) = (0.0f64, 0.0, 0, 0);
        for _ in 0..len {
            let z = sampler.draw(rng)?.z;
            let z2 = entry_from_coords(table2, &phi(&boundary_coords(table1, &z)?))?;
            let (c1, c2) = match (causality_map(table1, &z), causality_map(table2, &z2)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) if skippable(&e) => {
                    skipped += 1;
                    continue;
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let r = coords_gap(&phi(&boundary_coords(table1, &c1.exit)?), &boundary_coords(table2, &c2.exit)?);
            max = max.max(r);
            sum += r;
            used += 1;
        }
        Ok((max, sum, used, skipped))
    });
    let (mut max, mut sum, mut used, mut skipped) = (0.0f64, 0.0, 0, 0);
    for p in parts {
        let (m, s, u, k) = p?;
        max = max.max(m);
        sum += s;
        used += u;
        skipped += k;
    }
    Ok(ConjugacyReport { max_residual: max, mean_residual: sum / used.max(1) as f64, samples: used, skipped })
}

/// Points at spacing at most `h` along the geodesic from `a` to `b`
/// (`b` unwrapped on the torus).
pub fn geodesic_segment(space: &ModelSpace, a: &Vector, b: &Vector, h: f64) -> Result<Vec<Vector>> {
    let d = match space {
        ModelSpace::Euclidean { .. } | ModelSpace::FlatTorus { .. } => (b - a).norm(),
        _ => space.distance(a, b),
    };
    let steps = ((d / h).ceil() as usize).max(1);
    let ts = (0..=steps).map(|k| k as f64 / steps as f64);
    Ok(match space {
        ModelSpace::Euclidean { .. } => ts.map(|t| a + (b - a) * t).collect(),
        ModelSpace::FlatTorus { .. } => ts.map(|t| space.wrap(&(a + (b - a) * t))).collect(),
        ModelSpace::HyperbolicBall { .. } => {
            let (x0, x1) = (space.lift_point(a), space.lift_point(b));
            if d < 1e-12 {
                return Ok(vec![*a]);
            }
            let s = d.sinh();
            ts.map(|t| space.lower_point(&((x0 * ((1.0 - t) * d).sinh() + x1 * (t * d).sinh()) / s))).collect()
        }
        ModelSpace::Sphere { .. } => {
            if d > PI - 1e-9 {
                return Err(Error::AmbiguousGeodesic);
            }
            if d < 1e-12 {
                return Ok(vec![*a]);
            }
            let s = d.sin();
            ts.map(|t| {
                let p = (a * ((1.0 - t) * d).sin() + b * (t * d).sin()) / s;
                p / p.norm()
            })
            .collect()
        }
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    pub cloud: Vec<Vector>,
    pub h: f64,
    pub ambiguous: usize,
}

/// Samples every recorded chord as a model-space geodesic between its
/// endpoints, using nothing of the table but its model space.
pub fn reconstruct_chords(data: &ScatteringDataset, space: &ModelSpace, h: f64) -> Result<Reconstruction> {
    let segments: Vec<Result<Vec<Vector>>> =
        data.records.par_iter().map(|r| geodesic_segment(space, &r.entry.q, &r.exit_lift, h)).collect();
    let mut cloud = Vec::new();
    let mut ambiguous = 0;
    for s in segments {
        match s {
            Ok(points) => cloud.extend(points),
            Err(Error::AmbiguousGeodesic) => ambiguous += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(Reconstruction { cloud, h, ambiguous })
}

impl Reconstruction {
    pub fn write_csv<W: Write>(&self, out: W, chart_len: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z", "w"][..chart_len].iter()).map_err(csv_err)?;
        for p in &self.cloud {
            w.write_record(p.iter().take(chart_len).map(|x| x.to_string())).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Chart bounding box of the table interior.
fn chart_box(table: &Table) -> Result<Vec<(f64, f64)>> {
    let space = table.space();
    let n = space.chart_len();
    if let Some(periods) = space.periods() {
        return Ok(periods.iter().map(|&l| (0.0, l)).collect());
    }
    match space {
        ModelSpace::Sphere { .. } => return Ok(vec![(-1.0, 1.0); n]),
        ModelSpace::HyperbolicBall { .. } => return Ok(vec![(-1.0, 1.0); n]),
        _ => {}
    }
    let outer: Vec<_> = table.pieces().iter().filter(|p| p.side == Side::Outer).collect();
    let [piece] = outer.as_slice() else {
        return Err(Error::Unsupported("reference sampling needs one outer wall".into()));
    };
    match &piece.shape {
        Shape::Ball { center, radius } => Ok((0..n).map(|i| (center[i] - radius, center[i] + radius)).collect()),
        Shape::Fourier(c) => {
            let r = c.extent().1;
            Ok((0..2).map(|i| (c.center[i] - r, c.center[i] + r)).collect())
        }
        Shape::HalfSpace { .. } => Err(Error::Unsupported("unbounded table".into())),
    }
}

/// Interior points of the table, uniform in the chart (on the sphere,
/// uniform on the sphere).
pub fn reference_points(table: &Table, count: usize, seed: u64) -> Result<Vec<Vector>> {
    let space = table.space();
    let bounds = chart_box(table)?;
    let mut rng = parallel::stream_rng(seed, 0);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * count.max(1) {
            return Err(Error::DegenerateSet);
        }
        let mut q = Vector::zeros();
        if let ModelSpace::Sphere { .. } = space {
            for i in 0..space.chart_len() {
                q[i] = rng.sample(StandardNormal);
            }
            q /= q.norm();
        } else {
            for (i, (lo, hi)) in bounds.iter().enumerate() {
                q[i] = lo + (hi - lo) * rng.random::<f64>();
            }
            if let ModelSpace::HyperbolicBall { .. } = space {
                if q.norm() >= 1.0 {
                    continue;
                }
            }
        }
        if table.domain_gauge(&q) < 0.0 {
            out.push(q);
        }
    }
    Ok(out)
}

/// Nearest-neighbour index over chart points on a uniform bucket grid.
struct CloudIndex<'a> {
    points: &'a [Vector],
    cell: f64,
    dims: usize,
    buckets: HashMap<[i64; 3], Vec<usize>>,
    reach: i64,
}

impl<'a> CloudIndex<'a> {
    fn new(points: &'a [Vector], cell: f64, dims: usize) -> Self {
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for (i, p) in points.iter().enumerate() {
            let k = Self::key(p, cell, dims);
            for d in 0..3 {
                lo[d] = lo[d].min(k[d]);
                hi[d] = hi[d].max(k[d]);
            }
            buckets.entry(k).or_default().push(i);
        }
        let reach = (0..3).map(|d| hi[d].saturating_sub(lo[d])).max().unwrap_or(0) + 2;
        CloudIndex { points, cell, dims, buckets, reach }
    }

    fn key(p: &Vector, cell: f64, dims: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        for d in 0..dims.min(3) {
            k[d] = (p[d] / cell).floor() as i64;
        }
        k
    }

    fn nearest(&self, p: &Vector) -> f64 {
        let c = Self::key(p, self.cell, self.dims);
        let mut best = f64::INFINITY;
        for ring in 0..=self.reach {
            let span = |d: usize| if d < self.dims { -ring..=ring } else { 0..=0 };
            for a in span(0) {
                for b in span(1) {
                    for e in span(2) {
                        if a.abs().max(b.abs()).max(e.abs()) != ring {
                            continue;
                        }
                        if let Some(ids) = self.buckets.get(&[c[0] + a, c[1] + b, c[2] + e]) {
                            for &i in ids {
                                best = best.min((self.points[i] - p).norm());
                            }
                        }
                    }
                }
            }
            if best <= ring as f64 * self.cell {
                break;
            }
        }
        best
    }
}

/// One-sided Hausdorff distance from `reference` to `cloud`, in chart
/// coordinates (minimal image on the torus).
pub fn hausdorff_to_cloud(space: &ModelSpace, reference: &[Vector], cloud: &[Vector], cell: f64) -> f64 {
    if cloud.is_empty() {
        return f64::INFINITY;
    }
    let dims = space.chart_len().min(3);
    let index = CloudIndex::new(cloud, cell, dims);
    let shifts: Vec<Vector> = match space.periods() {
        Some(p) => {
            let mut v = Vec::new();
            for a in -1..=1 {
                for b in -1..=1 {
                    v.push(Vector::new(a as f64 * p[0], b as f64 * p.get(1).copied().unwrap_or(0.0), 0.0, 0.0));
                }
            }
            v
        }
        None => vec![Vector::zeros()],
    };
    reference
        .par_iter()
        .map(|q| shifts.iter().map(|s| index.nearest(&(q + s))).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtlasCell {
    pub cell: [usize; 3],
    pub record: Option<ScatterRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtlasEdge {
    pub a: [usize; 3],
    pub b: [usize; 3],
    /// Chart distance between the two exits; infinite if either cell has no chord.
    pub jump: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Atlas {
    pub grid: usize,
    pub cells: Vec<AtlasCell>,
    /// Adjacent cell pairs whose exits jump by more than `threshold`.
    pub discontinuities: Vec<AtlasEdge>,
    pub cell_diameter: f64,
    pub threshold: f64,
}

/// Distance between the exits of two chords with nearby entries. On the
/// torus the flight vectors are compared, so exits on different lattice
/// images count as far apart.
fn exit_jump(space: &ModelSpace, a: &ScatterRecord, b: &ScatterRecord) -> f64 {
    match space {
        ModelSpace::FlatTorus { .. } => {
            let da = a.exit_lift - a.entry.q;
            let db = b.exit_lift - b.entry.q;
            space.chart_distance(&a.entry.q, &b.entry.q) + (da - db).norm()
        }
        _ => space.chart_distance(&a.exit.q, &b.exit.q),
    }
}

/// Jump threshold in multiples of the cell diameter.
pub const JUMP_FACTOR: f64 = 10.0;

/// Grid over each piece labelled by chord endpoints and `F`, with edges
/// between neighbouring cells marked where the exit jumps.
pub fn trajectory_atlas(table: &Table, f: Option<&LyapunovF>, grid: usize) -> Result<Atlas> {
    let owned = match f {
        Some(_) => None,
        None => dataset_f(table)?,
    };
    let records = grid_cells(table, f.or(owned.as_ref()), grid)?;
    let space = table.space();
    let dtheta = PI / grid as f64;
    let cell_diameter = (0..table.pieces().len())
        .map(|p| measure::piece_boundary_volume(table, p).map(|v| (v / grid as f64).hypot(dtheta)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let threshold = JUMP_FACTOR * cell_diameter;
    let at = |p: usize, i: usize, j: usize| &records[(p * grid + i) * grid + j];
    let mut discontinuities = Vec::new();
    for p in 0..table.pieces().len() {
        for i in 0..grid {
            for j in 0..grid {
                // position wraps around the piece; direction does not
                let mut next = vec![((i + 1) % grid, j)];
                if j + 1 < grid {
                    next.push((i, j + 1));
                }
                for (i2, j2) in next {
                    let jump = match (at(p, i, j), at(p, i2, j2)) {
                        (Some(a), Some(b)) => exit_jump(space, a, b),
                        _ => f64::INFINITY,
                    };
                    if jump > threshold {
                        discontinuities.push(AtlasEdge { a: [p, i, j], b: [p, i2, j2], jump });
                    }
                }
            }
        }
    }
    let cells = records
        .into_iter()
        .enumerate()
        .map(|(k, record)| AtlasCell { cell: [k / (grid * grid), (k / grid) % grid, k % grid], record })
        .collect();
    Ok(Atlas { grid, cells, discontinuities, cell_diameter, threshold })
}

impl Atlas {
    /// Rows `piece, i, j, pos, dir, exit_x, exit_y, f_entry, f_exit, discontinuous`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut flagged = std::collections::HashSet::new();
        for e in &self.discontinuities {
            flagged.insert(e.a);
            flagged.insert(e.b);
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["piece", "i", "j", "pos", "dir", "exit_x", "exit_y", "f_entry", "f_exit", "discontinuous"])
            .map_err(csv_err)?;
        for c in &self.cells {
            let bc = cell_coords(c.cell[0], c.cell[1], c.cell[2], self.grid);
            let (ex, ey, fa, fb) = match &c.record {
                Some(r) => (r.exit.q[0], r.exit.q[1], r.f_entry, r.f_exit),
                None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            };
            w.write_record([
                c.cell[0].to_string(),
                c.cell[1].to_string(),
                c.cell[2].to_string(),
                bc.pos[0].to_string(),
                bc.dir[0].to_string(),
                ex.to_string(),
                ey.to_string(),
                fa.to_string(),
                fb.to_string(),
                flagged.contains(&c.cell).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}
