//! TOML table descriptions. The schema is documented in `docs/table-schema.md`.

use serde::{Deserialize, Serialize};

use super::{presets, BoundaryPiece, FourierCurve, ModelSpace, Side, Table, Tolerances, Vector};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub name: Option<String>,
    /// Start from a named preset; `space` and `pieces` must then be absent.
    pub preset: Option<String>,
    pub space: Option<ModelSpace>,
    #[serde(default)]
    pub pieces: Vec<PieceConfig>,
    pub tolerances: Option<ToleranceConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PieceConfig {
    Ball { center: Vec<f64>, radius: f64, side: Side },
    HalfSpace { point: Vec<f64>, normal: Vec<f64>, side: Side },
    Fourier {
        center: [f64; 2],
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
        side: Side,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub hit_tol: Option<f64>,
    pub grazing_tol: Option<f64>,
    pub l_max: Option<f64>,
}

fn to_vector(xs: &[f64], what: &str) -> Result<Vector> {
    if xs.is_empty() || xs.len() > 4 {
        return Err(Error::Config(format!("{what} needs 1 to 4 coordinates, got {}", xs.len())));
    }
    let mut v = Vector::zeros();
    for (i, x) in xs.iter().enumerate() {
        v[i] = *x;
    }
    Ok(v)
}

impl PieceConfig {
    fn build(&self, space: &ModelSpace) -> Result<BoundaryPiece> {
        let len = space.chart_len();
        let check = |xs: &[f64], what: &str| -> Result<Vector> {
            if xs.len() != len {
                return Err(Error::Config(format!("{what} needs {len} coordinates, got {}", xs.len())));
            }
            to_vector(xs, what)
        };
        Ok(match self {
            PieceConfig::Ball { center, radius, side } => BoundaryPiece::ball(check(center, "ball center")?, *radius, *side),
            PieceConfig::HalfSpace { point, normal, side } => {
                BoundaryPiece::half_space(check(point, "half-space point")?, check(normal, "half-space normal")?, *side)
            }
            PieceConfig::Fourier { center, cos, sin, side } => {
                if cos.is_empty() {
                    return Err(Error::Config("fourier piece needs at least the mean radius in `cos`".into()));
                }
                BoundaryPiece::fourier(FourierCurve { center: *center, cos: cos.clone(), sin: sin.clone() }, *side)
            }
        })
    }
}

impl TableConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<Table> {
        let mut table = match (&self.preset, &self.space) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `preset` or `space`, not both".into())),
            (Some(name), None) => {
                if !self.pieces.is_empty() {
                    return Err(Error::Config("a preset cannot take extra pieces".into()));
                }
                presets::by_name(name)?
            }
            (None, Some(space)) => {
                let pieces = self.pieces.iter().map(|p| p.build(space)).collect::<Result<Vec<_>>>()?;
                Table::new(space.clone(), pieces)?
            }
            (None, None) => return Err(Error::Config("missing `space` (or `preset`)".into())),
        };
        if let Some(name) = &self.name {
            table = table.with_name(name.clone());
        }
        if let Some(t) = self.tolerances {
            let base = *table.tolerances();
            table = table.with_tolerances(Tolerances {
                hit_tol: t.hit_tol.unwrap_or(base.hit_tol),
                grazing_tol: t.grazing_tol.unwrap_or(base.grazing_tol),
                l_max: t.l_max.unwrap_or(base.l_max),
            })?;
        }
        Ok(table)
    }
}

pub fn load_table(path: &std::path::Path) -> Result<Table> {
    TableConfig::from_path(path)?.build()
}
