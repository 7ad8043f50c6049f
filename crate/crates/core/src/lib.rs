//! Nighttime-light economic analysis toolkit.
//!
//! The pipeline runs from raw brightness rasters to model scoring:
//!
//! * [`raster`] — ESRI ASCII grid parsing, negative-DN adjustment, blooming
//!   thresholds, whole-grid aggregates.
//! * [`zones`] — square analysis grids, point/cell-to-zone assignment,
//!   per-zone light statistics.
//! * [`panel`] — observation tables keyed by (unit, year), derived insurance
//!   indicators, summary statistics, Pearson correlation matrices.
//! * [`regress`] — OLS, weighted least squares, and geographically weighted
//!   regression with adaptive bandwidths and local diagnostics.
//! * [`modelcmp`] — AIC/BIC/likelihood-ratio scoring and candidate ranking.
//! * [`rgdp`] — GDP per unit light intensity and provincial proportion tables.
//! * [`synth`] — deterministic synthetic worlds with known ground truth, used
//!   by the statistical test suites.

pub mod fmt;
pub mod modelcmp;
pub mod panel;
pub mod raster;
pub mod regress;
pub mod rgdp;
pub mod synth;
pub mod zones;
