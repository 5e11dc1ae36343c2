//! Dense numerics for perturbed operator semigroups on one-dimensional grids.
//!
//! Generators are assembled as dense matrices on a weighted vertex grid, the
//! semigroups are evaluated through cached eigendecompositions, and each
//! analytical estimate is turned into a certificate that carries its raw
//! samples so that a verdict can be re-derived offline.
//!
//! ```
//! use ultrapos_core::{lattice::GridSpace, operators, semigroup::SemigroupEvaluator};
//!
//! let space = GridSpace::new(-std::f64::consts::PI, std::f64::consts::PI, 64).unwrap();
//! let form = operators::build_robin_laplacian(&space, |_| 1.0, 0.0, 0.0).unwrap();
//! let heat = SemigroupEvaluator::from_form(&form).unwrap();
//! let t1 = heat.evaluate(0.1).unwrap();
//! assert!((t1.column_sum()[3] - 1.0).abs() < 1e-10);
//! ```

pub mod error;
pub mod estimates;
pub mod lattice;
pub mod numkernel;
pub mod operators;
pub mod positivity;
pub mod semigroup;
pub mod spectral;

pub use error::{Error, Result};
pub use estimates::{AdmissibilityReport, CompatFit, InterpolationCheck, GrowthCheck, PreservedUltra, UltraFit};
pub use lattice::{GridSpace, LatticeVector, NormKind, OpNorm, WeightVector};
pub use numkernel::{CMat, ContourNodes, EigenDecomposition, RMat, C64};
pub use operators::{DiscreteOperator, PerturbationFamily};
pub use positivity::{NegativeEntry, PositivityCertificate, PositivitySweep, SampleGrid};
pub use semigroup::{DysonPhillipsResult, SemigroupEvaluator};
pub use spectral::{AnalyticityReport, GapResult, NeumannCheck, SpectralTrack, TrackRow};

/// Outcome attached to every certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Combine two verdicts; FAIL dominates INCONCLUSIVE which dominates PASS.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}
