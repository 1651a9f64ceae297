//! Model spaces, billiard tables, exact geodesic tracing and boundary strata.

pub mod config;
pub mod piece;
pub mod presets;
pub mod space;
mod table;

use serde::{Deserialize, Serialize};

pub use piece::{BoundaryPiece, FourierCurve, Shape, Side};
pub use space::{vec2, vec3, ModelSpace, Vector};
pub use table::{HitRecord, Table, Tolerances};

/// A unit tangent element `(q, v)` of SM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: Vector,
    pub v: Vector,
}

impl PhasePoint {
    pub fn new(q: Vector, v: Vector) -> Self {
        PhasePoint { q, v }
    }

    pub fn reversed(&self) -> Self {
        PhasePoint { q: self.q, v: -self.v }
    }
}

/// Tangency classification of a boundary phase point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StratumLabel {
    /// ∂₁⁺: strictly inward.
    TransversalIn,
    /// ∂₁⁻: strictly outward.
    TransversalOut,
    /// ∂₂⁻: tangent, the geodesic leaves the table on both sides.
    TangentConvex,
    /// ∂₂⁺: tangent, the geodesic stays in the table (discontinuity locus).
    TangentConcave,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub label: StratumLabel,
    /// Cosine between `v` and the inward normal.
    pub cos_in: f64,
}

impl Stratum {
    pub fn is_tangent(&self) -> bool {
        matches!(self.label, StratumLabel::TangentConvex | StratumLabel::TangentConcave)
    }
}

/// Time-`s` point of the unit-speed geodesic through `z`.
pub fn geodesic_flow(space: &ModelSpace, z: &PhasePoint, s: f64) -> PhasePoint {
    space.geodesic_flow(z, s)
}

pub fn first_boundary_hit(table: &Table, z: &PhasePoint) -> crate::Result<HitRecord> {
    table.first_boundary_hit(z)
}

pub fn inward_normal(table: &Table, q: &Vector) -> crate::Result<Vector> {
    table.inward_normal(q)
}

pub fn classify_boundary_point(table: &Table, z: &PhasePoint) -> crate::Result<Stratum> {
    table.classify(z)
}
