//! Nighttime-light raster grids in ESRI ASCII format.
//!
//! A [`RasterGrid`] stores per-cell digital numbers (DN) row-major with row 0
//! as the northernmost row. All operations are pure: they take a grid and
//! return a new one, so grids can be shared freely across threads.

use std::fmt::Write as _;

use thiserror::Error;

/// Errors raised while parsing or transforming rasters.
#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("cell count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("non-numeric token {token:?}")]
    NonNumeric { token: String },
    #[error("negative DN {value} at cell {index}; run the DN adjustment first")]
    NegativeInput { index: usize, value: f64 },
}

/// How a DN threshold is meant to be read. Both modes zero out cells below
/// the cutoff; the tag records whether the cutoff delimits urban extents
/// (high values, e.g. 40) or suppresses blooming spillover (low values,
/// e.g. 10).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    UrbanExtent,
    BloomingFloor,
}

/// A DN cutoff plus its interpretation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec {
    pub mode: ThresholdMode,
    pub value: f64,
}

impl ThresholdSpec {
    pub fn new(mode: ThresholdMode, value: f64) -> Result<Self, RasterError> {
        if !value.is_finite() || value < 0.0 {
            return Err(RasterError::MalformedHeader(format!(
                "threshold value must be non-negative, got {value}"
            )));
        }
        Ok(Self { mode, value })
    }
}

/// Georeferenced grid of digital numbers with a nodata sentinel.
///
/// `values` is row-major with `values[row * ncols + col]`; row 0 is the
/// northernmost row, matching the ESRI ASCII convention. Cells equal to the
/// nodata sentinel (or NaN) are excluded from every aggregate and never
/// modified by the adjustment or threshold operations.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
    values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self, RasterError> {
        if ncols == 0 || nrows == 0 {
            return Err(RasterError::MalformedHeader(
                "ncols and nrows must be positive".to_string(),
            ));
        }
        if !cellsize.is_finite() || cellsize <= 0.0 {
            return Err(RasterError::MalformedHeader(format!(
                "cellsize must be positive, got {cellsize}"
            )));
        }
        if values.len() != ncols * nrows {
            return Err(RasterError::CountMismatch {
                expected: ncols * nrows,
                found: values.len(),
            });
        }
        Ok(Self {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    /// True when the value is the nodata sentinel (or NaN).
    pub fn is_nodata(&self, value: f64) -> bool {
        value.is_nan() || value == self.nodata
    }

    /// Map coordinates of a cell's center. Row 0 is the northernmost row.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let x = self.xll + (col as f64 + 0.5) * self.cellsize;
        let y = self.yll + ((self.nrows - 1 - row) as f64 + 0.5) * self.cellsize;
        (x, y)
    }

    /// Iterate `(row, col, value)` over every cell, nodata included.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let ncols = self.ncols;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i / ncols, i % ncols, v))
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> RasterGrid {
        let values = self
            .values
            .iter()
            .map(|&v| if self.is_nodata(v) { v } else { f(v) })
            .collect();
        RasterGrid {
            values,
            ..self.clone()
        }
    }
}

const HEADER_KEYS: [&str; 6] = [
    "ncols",
    "nrows",
    "xllcorner",
    "yllcorner",
    "cellsize",
    "nodata_value",
];

fn parse_number(token: &str) -> Result<f64, RasterError> {
    token.parse::<f64>().map_err(|_| RasterError::NonNumeric {
        token: token.to_string(),
    })
}

fn parse_dimension(token: &str, key: &str) -> Result<usize, RasterError> {
    let n: usize = token.parse().map_err(|_| RasterError::NonNumeric {
        token: token.to_string(),
    })?;
    if n == 0 {
        return Err(RasterError::MalformedHeader(format!(
            "{key} must be positive"
        )));
    }
    Ok(n)
}

/// Parse an ESRI ASCII grid.
///
/// The text must begin with six header lines (`ncols`, `nrows`, `xllcorner`,
/// `yllcorner`, `cellsize`, `NODATA_value`; keys case-insensitive, any order,
/// each exactly once) followed by exactly `ncols × nrows` whitespace-separated
/// numbers in file order.
pub fn parse_ascii_grid(text: &str) -> Result<RasterGrid, RasterError> {
    let mut lines = text.lines();
    let mut header: [Option<f64>; 6] = [None; 6];

    for _ in 0..6 {
        let line = lines
            .next()
            .ok_or_else(|| RasterError::MalformedHeader("fewer than six header lines".into()))?;
        let mut parts = line.split_whitespace();
        let key = parts
            .next()
            .ok_or_else(|| RasterError::MalformedHeader("blank header line".into()))?
            .to_ascii_lowercase();
        let value = parts
            .next()
            .ok_or_else(|| RasterError::MalformedHeader(format!("missing value for {key}")))?;
        if parts.next().is_some() {
            return Err(RasterError::MalformedHeader(format!(
                "trailing tokens after {key}"
            )));
        }
        let slot = HEADER_KEYS
            .iter()
            .position(|&k| k == key)
            .ok_or_else(|| RasterError::MalformedHeader(format!("unknown key {key}")))?;
        if header[slot].is_some() {
            return Err(RasterError::MalformedHeader(format!("duplicate key {key}")));
        }
        header[slot] = Some(parse_number(value)?);
    }

    // Re-parse the integer dimensions strictly so "2.5" is rejected.
    let raw = text.lines().take(6).collect::<Vec<_>>();
    let mut ncols = 0;
    let mut nrows = 0;
    for line in raw {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap().to_ascii_lowercase();
        let value = parts.next().unwrap();
        match key.as_str() {
            "ncols" => ncols = parse_dimension(value, "ncols")?,
            "nrows" => nrows = parse_dimension(value, "nrows")?,
            _ => {}
        }
    }

    let xll = header[2].unwrap();
    let yll = header[3].unwrap();
    let cellsize = header[4].unwrap();
    let nodata = header[5].unwrap();

    let expected = ncols * nrows;
    let mut values = Vec::with_capacity(expected);
    for token in lines.flat_map(str::split_whitespace) {
        if values.len() == expected {
            return Err(RasterError::CountMismatch {
                expected,
                found: values.len() + 1,
            });
        }
        values.push(parse_number(token)?);
    }
    if values.len() != expected {
        return Err(RasterError::CountMismatch {
            expected,
            found: values.len(),
        });
    }

    RasterGrid::new(ncols, nrows, xll, yll, cellsize, nodata, values)
}

/// Serialize a grid back to ESRI ASCII text.
///
/// Emits the six-line header with one space between key and value, then one
/// line per raster row. Values use the shortest round-trip representation, so
/// parse → serialize → parse is a fixed point.
pub fn write_ascii_grid(grid: &RasterGrid) -> String {
    let mut out = String::new();
    writeln!(out, "ncols {}", grid.ncols).unwrap();
    writeln!(out, "nrows {}", grid.nrows).unwrap();
    writeln!(out, "xllcorner {}", grid.xll).unwrap();
    writeln!(out, "yllcorner {}", grid.yll).unwrap();
    writeln!(out, "cellsize {}", grid.cellsize).unwrap();
    writeln!(out, "NODATA_value {}", grid.nodata).unwrap();
    for row in 0..grid.nrows {
        let line = (0..grid.ncols)
            .map(|col| grid.get(row, col).to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(out, "{line}").unwrap();
    }
    out
}

/// Clamp negative DN to zero, leaving nodata cells untouched.
///
/// Idempotent and pointwise monotone.
pub fn adjust_dn(grid: &RasterGrid) -> RasterGrid {
    grid.map_values(|v| v.max(0.0))
}

/// Zero out cells with DN strictly below the threshold value.
///
/// Cells exactly at the cutoff are kept. The grid must already be adjusted:
/// any negative non-nodata value is rejected with [`RasterError::NegativeInput`].
pub fn apply_threshold(grid: &RasterGrid, spec: &ThresholdSpec) -> Result<RasterGrid, RasterError> {
    for (i, &v) in grid.values.iter().enumerate() {
        if !grid.is_nodata(v) && v < 0.0 {
            return Err(RasterError::NegativeInput { index: i, value: v });
        }
    }
    Ok(grid.map_values(|v| if v < spec.value { 0.0 } else { v }))
}

/// Sum of all non-nodata DN values; zero for an all-nodata grid.
pub fn total_dn(grid: &RasterGrid) -> f64 {
    grid.values
        .iter()
        .filter(|&&v| !grid.is_nodata(v))
        .sum()
}
