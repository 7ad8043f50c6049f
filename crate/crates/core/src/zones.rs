//! Square analysis zones built from a lower-left origin.
//!
//! Zones are half-open squares `[x0, x0+s) × [y0, y0+s)` tiling a rectangle,
//! so every point inside the tiling belongs to exactly one zone and boundary
//! points are never double counted. Raster cells are assigned to the zone
//! containing the cell's center, which keeps zonal sums conservative: when
//! all centers are covered, the zone sums add up to the grid total exactly.

use std::collections::BTreeMap;
use std::io::Read;

use thiserror::Error;

use crate::fmt::sig6;
use crate::raster::{RasterError, RasterGrid};

#[derive(Debug, Error, PartialEq)]
pub enum ZoneError {
    #[error("invalid zone dimension: {0}")]
    InvalidDimension(String),
    #[error("points CSV: {0}")]
    PointsCsv(String),
}

/// Tiling of square zones. Zone ids are `row * ncols + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSet {
    pub origin_x: f64,
    pub origin_y: f64,
    pub zone_size: f64,
    pub ncols: usize,
    pub nrows: usize,
}

/// A geocoded observation, e.g. an insurance office location.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub kind: String,
    pub weight: f64,
}

impl PointRecord {
    pub fn new(x: f64, y: f64, kind: impl Into<String>) -> Self {
        Self {
            x,
            y,
            kind: kind.into(),
            weight: 1.0,
        }
    }
}

/// Per-zone aggregates. `zonal_light` fills the light fields, `zonal_points`
/// the point fields; [`merge_stats`] combines both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneStats {
    pub zone: usize,
    pub sum_light: f64,
    pub mean_light: f64,
    pub cell_count: usize,
    pub point_count: usize,
    pub presence: bool,
}

impl ZoneStats {
    fn empty(zone: usize) -> Self {
        Self {
            zone,
            sum_light: 0.0,
            mean_light: 0.0,
            cell_count: 0,
            point_count: 0,
            presence: false,
        }
    }
}

/// Point-assignment result with the count of out-of-tiling strays.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalPoints {
    pub stats: Vec<ZoneStats>,
    /// Points that fell outside the tiling and were dropped.
    pub outside: usize,
}

/// Build the square zone grid covering
/// `[origin_x, origin_x + ncols·size) × [origin_y, origin_y + nrows·size)`.
pub fn build_zoneset(
    origin_x: f64,
    origin_y: f64,
    zone_size: f64,
    ncols: usize,
    nrows: usize,
) -> Result<ZoneSet, ZoneError> {
    if !zone_size.is_finite() || zone_size <= 0.0 {
        return Err(ZoneError::InvalidDimension(format!(
            "zone_size must be positive, got {zone_size}"
        )));
    }
    if ncols == 0 || nrows == 0 {
        return Err(ZoneError::InvalidDimension(
            "ncols and nrows must be at least 1".to_string(),
        ));
    }
    if !origin_x.is_finite() || !origin_y.is_finite() {
        return Err(ZoneError::InvalidDimension(
            "origin coordinates must be finite".to_string(),
        ));
    }
    Ok(ZoneSet {
        origin_x,
        origin_y,
        zone_size,
        ncols,
        nrows,
    })
}

impl ZoneSet {
    pub fn n_zones(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn id_of(&self, col: usize, row: usize) -> usize {
        row * self.ncols + col
    }

    pub fn col_row(&self, zone: usize) -> (usize, usize) {
        (zone % self.ncols, zone / self.ncols)
    }

    /// Lower-left corner of a zone.
    pub fn zone_origin(&self, zone: usize) -> (f64, f64) {
        let (col, row) = self.col_row(zone);
        (
            self.origin_x + col as f64 * self.zone_size,
            self.origin_y + row as f64 * self.zone_size,
        )
    }

    /// Center of a zone, used as the zone's location in spatial regressions.
    pub fn zone_center(&self, zone: usize) -> (f64, f64) {
        let (x0, y0) = self.zone_origin(zone);
        (x0 + self.zone_size / 2.0, y0 + self.zone_size / 2.0)
    }
}

/// Zone containing `(x, y)`, or `None` outside the tiling.
///
/// Squares are half-open on both axes, so a point on a shared edge belongs
/// to the zone on its right (or above).
pub fn assign_point(zs: &ZoneSet, x: f64, y: f64) -> Option<usize> {
    let col = ((x - zs.origin_x) / zs.zone_size).floor();
    let row = ((y - zs.origin_y) / zs.zone_size).floor();
    if col < 0.0 || row < 0.0 || col >= zs.ncols as f64 || row >= zs.nrows as f64 {
        return None;
    }
    Some(zs.id_of(col as usize, row as usize))
}

/// Sum raster light per zone.
///
/// Each non-nodata cell contributes its DN to the zone containing the cell
/// center; cells whose centers fall outside every zone are dropped. Cells are
/// visited in row-major order so the per-zone sums are reproducible.
pub fn zonal_light(zs: &ZoneSet, grid: &RasterGrid) -> Vec<ZoneStats> {
    let mut stats: Vec<ZoneStats> = (0..zs.n_zones()).map(ZoneStats::empty).collect();
    for (row, col, v) in grid.cells() {
        if grid.is_nodata(v) {
            continue;
        }
        let (cx, cy) = grid.cell_center(row, col);
        if let Some(zone) = assign_point(zs, cx, cy) {
            stats[zone].sum_light += v;
            stats[zone].cell_count += 1;
        }
    }
    for s in &mut stats {
        if s.cell_count > 0 {
            s.mean_light = s.sum_light / s.cell_count as f64;
        }
    }
    stats
}

/// Count points per zone; out-of-tiling points are dropped and tallied.
pub fn zonal_points(zs: &ZoneSet, points: &[PointRecord]) -> ZonalPoints {
    let mut stats: Vec<ZoneStats> = (0..zs.n_zones()).map(ZoneStats::empty).collect();
    let mut outside = 0;
    for p in points {
        match assign_point(zs, p.x, p.y) {
            Some(zone) => stats[zone].point_count += 1,
            None => outside += 1,
        }
    }
    for s in &mut stats {
        s.presence = s.point_count > 0;
    }
    ZonalPoints { stats, outside }
}

/// Combine light-side and point-side stats for the same zone set.
pub fn merge_stats(light: &[ZoneStats], points: &[ZoneStats]) -> Vec<ZoneStats> {
    debug_assert_eq!(light.len(), points.len());
    light
        .iter()
        .zip(points)
        .map(|(l, p)| ZoneStats {
            zone: l.zone,
            sum_light: l.sum_light,
            mean_light: l.mean_light,
            cell_count: l.cell_count,
            point_count: p.point_count,
            presence: p.presence,
        })
        .collect()
}

/// Apply zone-specific DN cutoffs (e.g. per economic region).
///
/// Cells in a zone with a configured cutoff are zeroed when below it; cells
/// in unconfigured zones, or whose centers fall outside the tiling, pass
/// through unchanged. Like the whole-grid threshold this rejects grids that
/// were never DN-adjusted.
pub fn threshold_by_zone(
    grid: &RasterGrid,
    zs: &ZoneSet,
    cutoffs: &BTreeMap<usize, f64>,
) -> Result<RasterGrid, RasterError> {
    let mut values = Vec::with_capacity(grid.values().len());
    for (row, col, v) in grid.cells() {
        if grid.is_nodata(v) {
            values.push(v);
            continue;
        }
        if v < 0.0 {
            return Err(RasterError::NegativeInput {
                index: row * grid.ncols + col,
                value: v,
            });
        }
        let (cx, cy) = grid.cell_center(row, col);
        let cutoff = assign_point(zs, cx, cy).and_then(|z| cutoffs.get(&z));
        match cutoff {
            Some(&t) if v < t => values.push(0.0),
            _ => values.push(v),
        }
    }
    RasterGrid::new(
        grid.ncols,
        grid.nrows,
        grid.xll,
        grid.yll,
        grid.cellsize,
        grid.nodata,
        values,
    )
}

/// Read points from CSV with header `x,y,kind[,weight]`.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<PointRecord>, ZoneError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ZoneError::PointsCsv(e.to_string()))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    let has_weight = match cols.as_slice() {
        ["x", "y", "kind"] => false,
        ["x", "y", "kind", "weight"] => true,
        _ => {
            return Err(ZoneError::PointsCsv(format!(
                "expected header x,y,kind[,weight], got {}",
                cols.join(",")
            )))
        }
    };

    let mut points = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| ZoneError::PointsCsv(e.to_string()))?;
        let field = |j: usize| record.get(j).unwrap_or("");
        let parse = |j: usize, name: &str| -> Result<f64, ZoneError> {
            field(j).parse::<f64>().map_err(|_| {
                ZoneError::PointsCsv(format!("row {}: bad {name} {:?}", i + 2, field(j)))
            })
        };
        let weight = if has_weight { parse(3, "weight")? } else { 1.0 };
        if weight < 0.0 {
            return Err(ZoneError::PointsCsv(format!(
                "row {}: weight must be non-negative",
                i + 2
            )));
        }
        points.push(PointRecord {
            x: parse(0, "x")?,
            y: parse(1, "y")?,
            kind: field(2).to_string(),
            weight,
        });
    }
    Ok(points)
}

/// Render zone stats as the report CSV
/// `zone_id,sum_light,mean_light,cell_count,point_count,presence`.
pub fn write_zone_stats_csv(stats: &[ZoneStats]) -> String {
    let mut out = String::from("zone_id,sum_light,mean_light,cell_count,point_count,presence\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.zone,
            sig6(s.sum_light),
            sig6(s.mean_light),
            s.cell_count,
            s.point_count,
            s.presence
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::parse_ascii_grid;

    #[test]
    fn build_2x2() {
        let zs = build_zoneset(0.0, 0.0, 10.0, 2, 2).unwrap();
        assert_eq!(zs.n_zones(), 4);
        assert_eq!(zs.zone_origin(0), (0.0, 0.0));
        assert_eq!(assign_point(&zs, 5.0, 5.0), Some(0));
    }

    #[test]
    fn build_rejects_bad_dimensions() {
        assert!(matches!(
            build_zoneset(0.0, 0.0, 0.0, 2, 2),
            Err(ZoneError::InvalidDimension(_))
        ));
        assert!(matches!(
            build_zoneset(0.0, 0.0, 1.0, 0, 2),
            Err(ZoneError::InvalidDimension(_))
        ));
    }

    #[test]
    fn vertical_stack_with_negative_origin() {
        let zs = build_zoneset(5.0, -5.0, 1.0, 1, 3).unwrap();
        assert_eq!(zs.n_zones(), 3);
        assert_eq!(assign_point(&zs, 5.5, -4.5), Some(0));
        assert_eq!(assign_point(&zs, 5.5, -2.5), Some(2));
    }

    #[test]
    fn boundary_point_belongs_to_right_zone() {
        let zs = build_zoneset(0.0, 0.0, 10.0, 2, 2).unwrap();
        // Half-open squares: x = 10 starts the second column.
        assert_eq!(assign_point(&zs, 10.0, 0.0), Some(1));
        assert_eq!(assign_point(&zs, 25.0, 5.0), None);
        assert_eq!(assign_point(&zs, -0.0001, 5.0), None);
    }

    fn grid_2x2() -> RasterGrid {
        parse_ascii_grid(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 4\n",
        )
        .unwrap()
    }

    #[test]
    fn zonal_light_total_containment() {
        let zs = build_zoneset(0.0, 0.0, 2.0, 1, 1).unwrap();
        let stats = zonal_light(&zs, &grid_2x2());
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].sum_light, 10.0);
        assert_eq!(stats[0].cell_count, 4);
        assert_eq!(stats[0].mean_light, 2.5);
    }

    #[test]
    fn zonal_light_one_cell_per_zone() {
        let zs = build_zoneset(0.0, 0.0, 1.0, 2, 2).unwrap();
        let stats = zonal_light(&zs, &grid_2x2());
        // Raster row 0 is the northern row, zone row 0 the southern one.
        let sums: Vec<f64> = stats.iter().map(|s| s.sum_light).collect();
        assert_eq!(sums, vec![3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn zonal_light_skips_nodata() {
        let g = parse_ascii_grid(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 -9999\n3 4\n",
        )
        .unwrap();
        let zs = build_zoneset(0.0, 0.0, 2.0, 1, 1).unwrap();
        let stats = zonal_light(&zs, &g);
        assert_eq!(stats[0].sum_light, 8.0);
        assert_eq!(stats[0].cell_count, 3);
    }

    #[test]
    fn zonal_points_counts_and_presence() {
        let zs = build_zoneset(0.0, 0.0, 10.0, 2, 1).unwrap();
        let pts = vec![
            PointRecord::new(1.0, 1.0, "insurance_office"),
            PointRecord::new(2.0, 2.0, "insurance_office"),
            PointRecord::new(3.0, 3.0, "insurance_office"),
        ];
        let zp = zonal_points(&zs, &pts);
        assert_eq!(zp.stats[0].point_count, 3);
        assert!(zp.stats[0].presence);
        assert_eq!(zp.stats[1].point_count, 0);
        assert!(!zp.stats[1].presence);
        assert_eq!(zp.outside, 0);
    }

    #[test]
    fn zonal_points_empty_and_outside() {
        let zs = build_zoneset(0.0, 0.0, 10.0, 2, 1).unwrap();
        let zp = zonal_points(&zs, &[]);
        assert!(zp.stats.iter().all(|s| s.point_count == 0));
        let stray = vec![PointRecord::new(100.0, 100.0, "stray")];
        let zp = zonal_points(&zs, &stray);
        assert_eq!(zp.outside, 1);
        assert!(zp.stats.iter().all(|s| s.point_count == 0));
    }

    #[test]
    fn per_zone_cutoffs() {
        let zs = build_zoneset(0.0, 0.0, 1.0, 2, 2).unwrap();
        // Cells map to zones 2,3 (north row) and 0,1 (south row).
        let g = grid_2x2();
        let cutoffs = BTreeMap::from([(2usize, 2.0), (0usize, 10.0)]);
        let out = threshold_by_zone(&g, &zs, &cutoffs).unwrap();
        // Zone 2 holds DN 1 (< 2 → 0); zone 0 holds DN 3 (< 10 → 0); others untouched.
        assert_eq!(out.values(), &[0.0, 2.0, 0.0, 4.0]);
    }

    #[test]
    fn points_csv_roundtrip_shapes() {
        let csv = "x,y,kind\n1.5,2.5,insurance_office\n3,4,bank\n";
        let pts = read_points_csv(csv.as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].weight, 1.0);

        let csv_w = "x,y,kind,weight\n1,2,office,2.5\n";
        let pts = read_points_csv(csv_w.as_bytes()).unwrap();
        assert_eq!(pts[0].weight, 2.5);

        assert!(read_points_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_points_csv("x,y,kind\noops,2,k\n".as_bytes()).is_err());
    }

    #[test]
    fn stats_csv_shape() {
        let zs = build_zoneset(0.0, 0.0, 2.0, 1, 1).unwrap();
        let stats = zonal_light(&zs, &grid_2x2());
        let text = write_zone_stats_csv(&stats);
        assert_eq!(
            text,
            "zone_id,sum_light,mean_light,cell_count,point_count,presence\n0,10,2.5,4,0,false\n"
        );
    }
}
