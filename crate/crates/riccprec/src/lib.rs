//! Low-rank Riccati-regularized precision matrices for high-dimensional
//! signals: estimation, network biomarkers (Gaussian entropy, partial
//! correlations, Mahalanobis distances) and test-retest validation
//! (split-sample likelihood, intraclass correlation).

pub mod analysis;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod matcore;
pub mod randproj;
pub mod riccati;
pub mod rng;
pub mod shared;
pub(crate) mod util;
pub mod validation;

pub use analysis::NetworkSelection;
pub use error::{Error, Result};
pub use ingest::{DataMatrix, DataState, MatrixFormat, ParcellationMap};
pub use matcore::{DenseMatrix, SvdMode, SvdResult};
pub use randproj::ProjectionConfig;
pub use riccati::{Baseline, FactoredPrecision, PenaltyShape};
pub use shared::{JsvdOptions, SharedBasisModel};
pub use validation::{
    Cohort, DimensionSpec, EstimationMethod, SplitPlan, Subject, SweepGrid, ValidationReport,
};
