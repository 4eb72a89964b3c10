//! Ingestion of gridded scalar fields, such as temperature-anomaly maps,
//! given as `lat_degrees,lon_degrees,value` rows on a regular lat-lon grid.
//!
//! The input grid is not a quadrature grid, so projection onto the harmonic
//! basis goes through bilinear interpolation: the field is resampled at the
//! quadrature nodes and analyzed there. The result is an approximation
//! whose accuracy is set by the input resolution, roughly the square of the
//! grid spacing for smooth fields.

use std::collections::HashMap;
use std::path::Path;

use sphere_heat::harmonics::{analyze, build_grid};
use sphere_heat::Coeffs;

use crate::files::{FileError, Result};

/// Relative tolerance for spacing regularity: printed coordinates carry
/// small formatting jitter but genuine grid irregularities are far larger.
const SPACING_TOL: f64 = 1e-6;

/// A complete regular lat-lon grid of samples. Latitudes ascend, longitudes
/// ascend after normalization into [0, 360); values are stored row-major by
/// latitude.
#[derive(Debug, Clone)]
pub struct LatLonField {
    lats: Vec<f64>,
    lons: Vec<f64>,
    values: Vec<f64>,
    wraps: bool,
}

fn bad_grid(path: &Path, reason: impl Into<String>) -> FileError {
    FileError::BadGrid {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn sorted_axis(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    values
}

fn check_regular(path: &Path, axis: &str, values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(bad_grid(
            path,
            format!("grid needs at least two distinct {axis} values"),
        ));
    }
    let step = values[1] - values[0];
    for pair in values.windows(2) {
        let gap = pair[1] - pair[0];
        if (gap - step).abs() > SPACING_TOL * step.abs().max(1.0) {
            return Err(bad_grid(
                path,
                format!(
                    "irregular {axis} spacing: {} after steps of {}",
                    gap, step
                ),
            ));
        }
    }
    Ok(step)
}

impl LatLonField {
    /// Parses and validates a field file. The rows must fill a complete
    /// regular grid: every latitude-longitude combination exactly once,
    /// uniform spacing along both axes.
    pub fn load(path: &Path) -> Result<LatLonField> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        crate::files::for_each_row(path, 3, |line, record| {
            let lat: f64 = crate::files::parse_field(path, line, "lat_degrees", &record[0])?;
            let lon: f64 = crate::files::parse_field(path, line, "lon_degrees", &record[1])?;
            let value: f64 = crate::files::parse_field(path, line, "value", &record[2])?;
            if !(-90.0..=90.0).contains(&lat) {
                return Err(FileError::Malformed {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("latitude {lat} outside [-90, 90]"),
                });
            }
            if !lon.is_finite() || !value.is_finite() {
                return Err(FileError::Malformed {
                    path: path.to_path_buf(),
                    line,
                    reason: "longitude and value must be finite".into(),
                });
            }
            rows.push((lat, lon.rem_euclid(360.0), value));
            Ok(())
        })?;

        let lats = sorted_axis(rows.iter().map(|r| r.0).collect());
        let lons = sorted_axis(rows.iter().map(|r| r.1).collect());
        check_regular(path, "latitude", &lats)?;
        let lon_step = check_regular(path, "longitude", &lons)?;
        let wraps = (lons.len() as f64 * lon_step - 360.0).abs() <= SPACING_TOL * 360.0;

        let mut index = HashMap::with_capacity(lats.len() * lons.len());
        for (i, lat) in lats.iter().enumerate() {
            for (j, lon) in lons.iter().enumerate() {
                index.insert((lat.to_bits(), lon.to_bits()), i * lons.len() + j);
            }
        }
        let mut values = vec![f64::NAN; lats.len() * lons.len()];
        for (lat, lon, value) in rows {
            let slot = index[&(lat.to_bits(), lon.to_bits())];
            if !values[slot].is_nan() {
                return Err(bad_grid(
                    path,
                    format!("duplicate sample at latitude {lat}, longitude {lon}"),
                ));
            }
            values[slot] = value;
        }
        if let Some(hole) = values.iter().position(|v| v.is_nan()) {
            let lat = lats[hole / lons.len()];
            let lon = lons[hole % lons.len()];
            return Err(bad_grid(
                path,
                format!("gap in the grid: no sample at latitude {lat}, longitude {lon}"),
            ));
        }
        Ok(LatLonField {
            lats,
            lons,
            values,
            wraps,
        })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.lons.len() + j]
    }

    /// Axis weights for bilinear interpolation: the bracketing lower index
    /// and the fractional position inside that cell, clamped at the ends.
    fn bracket(axis: &[f64], q: f64) -> (usize, f64) {
        let hi = axis.partition_point(|&x| x <= q).clamp(1, axis.len() - 1);
        let lo = hi - 1;
        let t = (q - axis[lo]) / (axis[hi] - axis[lo]);
        (lo, t.clamp(0.0, 1.0))
    }

    /// Bilinear sample at a latitude and longitude in degrees. Latitudes
    /// beyond the sampled band clamp to the nearest row; longitudes wrap
    /// when the grid covers the full circle and clamp otherwise.
    pub fn sample(&self, lat: f64, lon: f64) -> f64 {
        let (i, s) = Self::bracket(&self.lats, lat);
        let lon = lon.rem_euclid(360.0);
        let n = self.lons.len();
        let (j0, j1, t) = if self.wraps && (lon < self.lons[0] || lon >= self.lons[n - 1]) {
            let gap = (self.lons[0] + 360.0) - self.lons[n - 1];
            let offset = (lon - self.lons[n - 1]).rem_euclid(360.0);
            (n - 1, 0, offset / gap)
        } else {
            let (j, t) = Self::bracket(&self.lons, lon);
            (j, j + 1, t)
        };
        let top = self.at(i, j0) * (1.0 - t) + self.at(i, j1) * t;
        let bottom = self.at(i + 1, j0) * (1.0 - t) + self.at(i + 1, j1) * t;
        top * (1.0 - s) + bottom * s
    }
}

/// Loads a gridded field and projects it onto the harmonic basis up to
/// degree `l`: bilinear resampling at the quadrature nodes, then analysis.
/// An approximation by construction; see the module docs.
pub fn project_gridded_field(path: &Path, l: usize) -> Result<Coeffs> {
    let field = LatLonField::load(path)?;
    let grid = build_grid::<f64>(2 * l);
    let mut samples = Vec::with_capacity(grid.len());
    for i in 0..grid.n_theta() {
        let lat = 90.0 - grid.theta_nodes()[i].to_degrees();
        for j in 0..grid.n_phi() {
            let lon = grid.phi(j).to_degrees();
            samples.push(field.sample(lat, lon));
        }
    }
    analyze(&samples, &grid, l).map_err(|e| FileError::Invalid {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
