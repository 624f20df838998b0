// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple change-point inference for piecewise-stationary GCINAR count
//! series by likelihood-ratio scanning.
//!
//! The pipeline has three steps. [`scan`] computes local likelihood-ratio
//! scan statistics and keeps their local maxima as candidates, [`select`]
//! picks a subset of candidates by minimum description length with an exact
//! dynamic program, and [`refine`] re-locates each chosen change-point by an
//! exhaustive search in an extended local window. [`ci`] builds confidence
//! intervals for the refined change-points, and [`metrics`] holds the
//! evaluation measures used in simulation studies.

pub mod ci;
pub mod error;
pub mod metrics;
pub mod pqml;
pub mod refine;
pub mod rng;
pub mod scan;
pub mod select;
pub mod series;
pub mod simulate;

pub use ci::{simultaneous_ci, CiMethod, CiRequest, CiResult};
pub use error::{LrsmError, Result};
pub use pqml::{FitResult, InformationCriterion, SandwichVariance};
pub use refine::lrsm_detect;
pub use scan::{OrderPolicy, ScanConfig, WindowRule};
pub use series::{
    segment_view, Candidate, ChangePointSet, CountSeries, GcinarParams, LrsmEstimate, SegmentFit,
    StageTrace, Window, DEFAULT_DELTA,
};
pub use simulate::{
    builtin_model, simulate_mcp, InnovationFamily, McpSpec, SegmentSpec, ThinningFamily,
    DEFAULT_BURN_IN,
};
