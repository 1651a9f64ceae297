//! Batch front-end. Every subcommand prints a JSON report (config, seed,
//! version, wall time, payload) and optionally writes it with its data
//! files into `--out`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{self, ReflectionLaw};
use crate::ergodic;
use crate::geometry::{config, presets, Table};
use crate::holography::{self, Isometry};
use crate::lyapunov::{self, EnclosingBody};
use crate::measure::{self, PhaseBox};
use crate::parallel::{self, WORKERS_ENV};
use crate::{Error, Result};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("SCATTERLAB_GIT_DESCRIBE"), ")");

/// Exit status for validation errors (bad input).
pub const EXIT_VALIDATION: i32 = 1;
/// Exit status for runtime failures.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "scatterlab", version = VERSION, about = "Billiard and scattering experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct Common {
    /// Named preset table.
    #[arg(long)]
    pub preset: Option<String>,
    /// TOML table description.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Directory for the report and data files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cap on a single chord length.
    #[arg(long)]
    pub lmax: Option<f64>,
}

/// Accepts `1000000`, `1e6` or `1_000_000`.
fn count(s: &str) -> std::result::Result<usize, String> {
    let clean = s.replace('_', "");
    if let Ok(n) = clean.parse::<usize>() {
        return Ok(n);
    }
    match clean.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= 1e15 => Ok(x as usize),
        _ => Err(format!("`{s}` is not a nonnegative integer")),
    }
}

#[derive(Clone, Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Billiard orbits from sampled starts (JSON Lines per chord).
    Simulate {
        /// Number of orbits.
        #[arg(long, value_parser = count, default_value = "1")]
        samples: usize,
        #[arg(long, value_parser = count, default_value = "1000")]
        bounces: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Mean free path: sampled chord average against the volume formula.
    Mfp {
        #[arg(long, value_parser = count, default_value = "100000")]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Invariance of the boundary measure on random boxes.
    MeasureCheck {
        #[arg(long, value_parser = count, default_value = "100000")]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        boxes: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Returns to a phase box.
    Recurrence {
        /// Number of starters.
        #[arg(long, value_parser = count, default_value = "100")]
        samples: usize,
        #[arg(long, value_parser = count, default_value = "10000")]
        bounces: usize,
        /// `pos_lo,pos_hi,dir_lo,dir_hi` in boundary coordinates.
        #[arg(long = "box", value_delimiter = ',', num_args = 4, default_values_t = [0.0, 0.1, 0.4, 0.6])]
        region: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Slice areas A(t) of the default Lyapunov function (CSV curve).
    Slices {
        #[arg(long, value_parser = count, default_value = "100000")]
        samples: usize,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Trapping probe and geodesic diameter lower bound.
    Probe {
        #[arg(long, value_parser = count, default_value = "100000")]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Scattering dataset, chord-cloud reconstruction and atlas.
    Reconstruct {
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Sampling step along chords.
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        /// Reference points for the coverage distance.
        #[arg(long, value_parser = count, default_value = "20000")]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Conjugacy residual of an isometry (or the identity map onto another table).
    Conjugacy {
        /// `rotation:ANGLE`, `reflection`, `translation:X,Y` or `identity`.
        #[arg(long, default_value = "rotation:1")]
        isometry: String,
        /// Compare against this preset instead of the isometric image.
        #[arg(long)]
        other: Option<String>,
        #[arg(long, value_parser = count, default_value = "10000")]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Volume from a file of bounce lengths.
    Hear {
        /// One length per line, or a CSV whose `length` column is used.
        #[arg(long)]
        lengths: PathBuf,
        /// Boundary volume.
        #[arg(long)]
        boundary: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Mfp { common, .. }
            | Command::MeasureCheck { common, .. }
            | Command::Recurrence { common, .. }
            | Command::Slices { common, .. }
            | Command::Probe { common, .. }
            | Command::Reconstruct { common, .. }
            | Command::Conjugacy { common, .. }
            | Command::Hear { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Mfp { .. } => "mfp",
            Command::MeasureCheck { .. } => "measure-check",
            Command::Recurrence { .. } => "recurrence",
            Command::Slices { .. } => "slices",
            Command::Probe { .. } => "probe",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Conjugacy { .. } => "conjugacy",
            Command::Hear { .. } => "hear",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: Value,
    pub table: Option<String>,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    pub payload: Value,
}

fn load_table(common: &Common) -> Result<Table> {
    let table = match (&common.preset, &common.config) {
        (Some(_), Some(_)) => return Err(Error::Config("give either --preset or --config, not both".into())),
        (Some(name), None) => presets::by_name(name)?,
        (None, Some(path)) => config::load_table(path)?,
        (None, None) => return Err(Error::Config("a table is required: --preset or --config".into())),
    };
    match common.lmax {
        Some(l) => table.with_l_max(l),
        None => Ok(table),
    }
}

/// Output sink for data files.
struct Files<'a> {
    dir: Option<&'a Path>,
    written: Vec<String>,
}

impl Files<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        if let Some(dir) = self.dir {
            let path = dir.join(name);
            let mut w = BufWriter::new(File::create(&path)?);
            f(&mut w)?;
            w.flush()?;
            self.written.push(path.display().to_string());
        }
        Ok(())
    }
}

fn parse_isometry(s: &str) -> Result<Option<Isometry>> {
    let bad = || Error::Config(format!("unknown isometry `{s}`"));
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    let nums = || -> Result<Vec<f64>> {
        arg.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect()
    };
    Ok(Some(match kind {
        "identity" => return Ok(None),
        "rotation" => Isometry::Rotation { angle: *nums()?.first().ok_or_else(bad)? },
        "reflection" => Isometry::Reflection,
        "translation" => match nums()?.as_slice() {
            [x, y] => Isometry::Translation { shift: [*x, *y] },
            _ => return Err(bad()),
        },
        _ => return Err(bad()),
    }))
}

fn read_lengths(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).peekable();
    let mut column = 0;
    if let Some(first) = lines.peek() {
        if first.parse::<f64>().is_err() {
            let header: Vec<&str> = first.split(',').map(str::trim).collect();
            column = header
                .iter()
                .position(|h| *h == "length")
                .ok_or_else(|| Error::Config("lengths file has a header without a `length` column".into()))?;
            lines.next();
        }
    }
    lines
        .map(|l| {
            l.split(',')
                .nth(column)
                .and_then(|x| x.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("bad length line `{l}`")))
        })
        .collect()
}

fn execute(cmd: &Command, files: &mut Files) -> Result<(Option<String>, Value)> {
    let common = cmd.common();
    let seed = common.seed;
    let law = ReflectionLaw::Elastic;
    if let Command::Hear { lengths, boundary, dim, .. } = cmd {
        let ls = read_lengths(lengths)?;
        let running = ergodic::hear_volume(&ls, *boundary, *dim)?;
        files.write("volume.csv", |w| {
            writeln!(w, "k,vol_m")?;
            for (k, v) in running.iter().enumerate() {
                writeln!(w, "{},{v}", k + 1)?;
            }
            Ok(())
        })?;
        let payload = json!({ "count": ls.len(), "vol_m": running.last(), "boundary": boundary, "dim": dim });
        return Ok((None, payload));
    }
    let table = load_table(common)?;
    let name = Some(table.name().to_string());
    let payload = match cmd {
        Command::Simulate { samples, bounces, .. } => {
            let starts = measure::sample_mu_theta(&table, *samples, seed)?.points;
            let orbits = dynamics::iterate_many(&table, &law, &starts, *bounces);
            let summaries: Vec<_> = orbits.iter().enumerate().map(|(i, o)| dynamics::OrbitSummary::of(i, o)).collect();
            let chart_len = table.space().chart_len();
            files.write("orbits.jsonl", |w| {
                for (i, o) in orbits.iter().enumerate() {
                    dynamics::write_orbit_jsonl(&mut *w, i, o, chart_len)?;
                }
                Ok(())
            })?;
            files.write("orbits.csv", |w| dynamics::write_summary_csv(w, &summaries))?;
            json!({ "orbits": summaries })
        }
        Command::Mfp { samples, .. } => serde_json::to_value(ergodic::mean_free_path(&table, *samples, seed)?)?,
        Command::MeasureCheck { samples, boxes, .. } => {
            let mut rng = parallel::stream_rng(seed, u64::MAX);
            let regions: Vec<PhaseBox> = (0..*boxes).map(|_| PhaseBox::random(&table, &mut rng)).collect();
            let r = measure::measure_preservation_test(&table, &law, &regions, *samples, seed)?;
            json!({ "max_abs_z": r.max_abs_z(), "report": r })
        }
        Command::Recurrence { samples, bounces, region, .. } => {
            let u = PhaseBox::new(None, [region[0], region[1]], [region[2], region[3]]);
            serde_json::to_value(ergodic::recurrence_test(&table, &law, &u, *samples, *bounces, seed)?)?
        }
        Command::Slices { samples, points, .. } => {
            let f = lyapunov::build_well_balanced_f(&table, EnclosingBody::default_for(&table)?, 10_000, seed)?;
            let var = lyapunov::var_f_boundary(&table, &f, (*samples).min(100_000), seed)?;
            let pad = 0.05 * var.var;
            let ts = lyapunov::grid(var.f_min - pad, var.f_max + pad, *points);
            let curve = lyapunov::slice_curve(&table, &f, &ts, *samples, seed)?;
            files.write("slices.csv", |w| curve.write_csv(w))?;
            let report = ergodic::inequality_report(&table, Some(&f), *samples, seed)?;
            json!({
                "variation": var,
                "integral": curve.integral(),
                "trajectory_space_volume": curve.total_mass,
                "max_area": curve.areas.iter().map(|a| a.mean()).fold(0.0, f64::max),
                "excluded": curve.excluded,
                "inequalities": report,
            })
        }
        Command::Probe { samples, .. } => {
            let l_max = common.lmax.unwrap_or(table.tolerances().l_max);
            let p = dynamics::trapping_probe(&table, *samples, l_max, seed)?;
            let mut warnings = Vec::new();
            if p.escape_fraction < 1.0 {
                warnings.push(format!("{} of sampled chords exceed the length cap", 1.0 - p.escape_fraction));
            }
            if p.free_corridor == Some(true) {
                warnings.push("free corridor: chord lengths, and the geodesic diameter, are unbounded".to_string());
            }
            json!({ "probe": p, "warnings": warnings })
        }
        Command::Reconstruct { grid, h, samples, .. } => {
            let data = holography::scattering_dataset(&table, None, *grid)?;
            let rec = holography::reconstruct_chords(&data, table.space(), *h)?;
            let reference = holography::reference_points(&table, *samples, seed)?;
            let hausdorff = holography::hausdorff_to_cloud(table.space(), &reference, &rec.cloud, 4.0 * h);
            let atlas = holography::trajectory_atlas(&table, None, *grid)?;
            files.write("dataset.jsonl", |w| data.write_jsonl(w))?;
            files.write("cloud.csv", |w| rec.write_csv(w, table.space().chart_len()))?;
            files.write("atlas.csv", |w| atlas.write_csv(w))?;
            json!({
                "records": data.records.len(),
                "dropped": data.dropped,
                "cloud_points": rec.cloud.len(),
                "ambiguous": rec.ambiguous,
                "hausdorff": hausdorff,
                "discontinuity_edges": atlas.discontinuities.len(),
                "cell_diameter": atlas.cell_diameter,
            })
        }
        Command::Conjugacy { isometry, other, samples, .. } => {
            let iso = parse_isometry(isometry)?;
            let image = match (other, iso) {
                (Some(p), _) => presets::by_name(p)?,
                (None, Some(iso)) => iso.apply_table(&table)?,
                (None, None) => table.clone(),
            };
            let r = match iso {
                Some(iso) => holography::conjugacy_residual(&table, &image, |c| iso.apply_coords(c), *samples, seed)?,
                None => holography::conjugacy_residual(&table, &image, |c| *c, *samples, seed)?,
            };
            json!({ "isometry": iso, "other": image.name(), "residual": r })
        }
        Command::Hear { .. } => unreachable!("handled above"),
    };
    Ok((name, payload))
}

/// Runs a parsed command and returns its report.
pub fn run(cmd: &Command) -> Result<Report> {
    let start = Instant::now();
    let common = cmd.common();
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
    }
    let mut files = Files { dir: common.out.as_deref(), written: Vec::new() };
    let (table, payload) = parallel::with_workers(common.workers, || execute(cmd, &mut files))??;
    let mut report = Report {
        command: cmd.name().to_string(),
        version: VERSION.to_string(),
        seed: common.seed,
        config: serde_json::to_value(cmd)?,
        table,
        wall_time_s: 0.0,
        files: files.written,
        payload,
    };
    if let Some(dir) = &common.out {
        report.files.push(dir.join("report.json").display().to_string());
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(dir) = &common.out {
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

pub fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(s: &str) {
    let _ = std::io::stdout().write_all(s.as_bytes());
}

fn emit_line(s: String) {
    emit(&s);
    emit("\n");
}

/// Entry point: parses `args`, prints the report (or an error object) to
/// stdout and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                emit(&e.to_string());
                return 0;
            }
            emit_line(error_json("usage", e.to_string().trim()));
            return EXIT_VALIDATION;
        }
    };
    match run(&cli.command) {
        Ok(report) => match serde_json::to_string_pretty(&report) {
            Ok(s) => {
                emit_line(s);
                0
            }
            Err(e) => {
                emit_line(error_json("json", &e.to_string()));
                EXIT_RUNTIME
            }
        },
        Err(e) => {
            emit_line(error_json(e.kind(), &e.to_string()));
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(count("1e6"), Ok(1_000_000));
        assert_eq!(count("1_000"), Ok(1000));
        assert!(count("1.5").is_err());
        assert!(count("-3").is_err());
    }

    #[test]
    fn isometry_strings() {
        assert_eq!(parse_isometry("rotation:0.5").unwrap(), Some(Isometry::Rotation { angle: 0.5 }));
        assert_eq!(parse_isometry("translation:0.1,0.2").unwrap(), Some(Isometry::Translation { shift: [0.1, 0.2] }));
        assert_eq!(parse_isometry("identity").unwrap(), None);
        assert!(parse_isometry("shear:1").is_err());
    }

    #[test]
    fn lengths_file_forms() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("a.txt");
        std::fs::write(&plain, "1.0\n2.0\n\n3.5\n").unwrap();
        assert_eq!(read_lengths(&plain).unwrap(), vec![1.0, 2.0, 3.5]);
        let csv = dir.path().join("b.csv");
        std::fs::write(&csv, "k,length\n0,1.5\n1,2.5\n").unwrap();
        assert_eq!(read_lengths(&csv).unwrap(), vec![1.5, 2.5]);
    }

    #[test]
    fn report_payload_does_not_depend_on_workers() {
        let run_with = |w: &str| {
            let cli = Cli::try_parse_from(["scatterlab", "mfp", "--preset", "disk", "--samples", "20000", "--workers", w]).unwrap();
            run(&cli.command).unwrap().payload
        };
        assert_eq!(run_with("1"), run_with("8"));
    }

    #[test]
    fn errors_map_to_exit_codes() {
        assert_eq!(main_with_args(["scatterlab", "mfp", "--preset", "nope"]), EXIT_VALIDATION);
        assert_eq!(main_with_args(["scatterlab", "mfp"]), EXIT_VALIDATION);
        assert_eq!(main_with_args(["scatterlab", "bogus"]), EXIT_VALIDATION);
        // half of the sampled chords exceed the cap
        assert_eq!(main_with_args(["scatterlab", "mfp", "--preset", "disk", "--samples", "100", "--lmax", "0.5"]), EXIT_RUNTIME);
    }
}
