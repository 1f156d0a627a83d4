//! Lattice and analytic realizations of pairs (A, u) with gauge-covariant
//! calculus: derivatives, curvature, energy density, gauge transformations,
//! parabolic rescaling and radial gauge.

pub mod analytic;
pub mod lattice;
pub mod random;

pub use analytic::{
    gauge_transform_analytic, make_self_similar, pure_gauge_pair, radial_bump_profile,
    radial_gauge, rescale_pair, AnalyticGauge, AnalyticPair, GaugedProfile,
};
pub use lattice::{
    bianchi_residual, commutator_residual, compat_g_residual, compat_v_residual, curvature,
    discrete_identity_residuals, energy_density, energy_density_from_parts,
    gauge_transform_lattice, grad_cov_g, grad_cov_v,
    interpolate, sample, total_energy, ymh_operator, ymhe_residual, CurvatureField, GaugeField,
    LatticeField, LatticeGeometry, ScalarFieldV, YmhOperator,
};
pub use random::band_limited_pair;

use crate::algebra::{Representation, StructureData};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid lattice geometry: {0}")]
    InvalidGeometry(String),
    #[error("geometry mismatch between fields")]
    GeometryMismatch,
    #[error("rescale factor must be positive, got {0}")]
    BadRescaleFactor(f64),
    #[error("requested time {t} is not before the similarity time {center}")]
    TimePastCenter { t: f64, center: f64 },
    #[error("radial-gauge ray integration failed: {0}")]
    RayIntegration(String),
}

/// The fixed algebraic context shared by all field operations: structure
/// data for g and the representation carrying the scalar field.
#[derive(Debug, Clone)]
pub struct Model {
    pub algebra: StructureData,
    pub rep: Representation,
}

impl Model {
    /// Default model: su(2) with the adjoint representation.
    pub fn su2_adjoint() -> Self {
        let algebra = StructureData::su2();
        let rep = Representation::adjoint(&algebra);
        Self { algebra, rep }
    }

    pub fn dim_g(&self) -> usize {
        self.algebra.dim()
    }

    pub fn dim_v(&self) -> usize {
        self.rep.dim_v()
    }
}

/// Scalar potential W acting on s = |u|^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Zero,
    /// W(s) = (lambda/4) (s - v^2)^2; Higgs-like since W(v^2) = W'(v^2) = 0.
    Quartic { lambda: f64, v: f64 },
}

impl Potential {
    pub fn quartic(lambda: f64, v: f64) -> Self {
        assert!(lambda >= 0.0 && v >= 0.0);
        Potential::Quartic { lambda, v }
    }

    /// W(s).
    pub fn w(&self, s: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Quartic { lambda, v } => {
                let d = s - v * v;
                0.25 * lambda * d * d
            }
        }
    }

    /// W'(s).
    pub fn w_prime(&self, s: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Quartic { lambda, v } => 0.5 * lambda * (s - v * v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_potential_vanishes_at_vacuum() {
        let w = Potential::quartic(0.8, 1.5);
        assert_eq!(w.w(2.25), 0.0);
        assert_eq!(w.w_prime(2.25), 0.0);
        assert!(w.w(1.0) > 0.0);
        assert!(w.w_prime(1.0) < 0.0);
    }
}
