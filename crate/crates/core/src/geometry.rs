//! Spherical distances and the regular latitude-longitude grid abstraction.
//!
//! Interfaces take degrees; everything internal works in radians. The Earth
//! radius is a crate-level constant so fitted range parameters are
//! interpretable in kilometres.

use nalgebra::DMatrix;
use thiserror::Error;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("latitude {0} outside [-90, 90] degrees")]
    LatitudeRange(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field dimensions {got_rows}x{got_cols} do not match grid {m}x{n}")]
    DimensionMismatch {
        m: usize,
        n: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("field value at ({0}, {1}) is not finite")]
    NonFiniteValue(usize, usize),
}

/// Longitude cell convention: centers offset by half a cell from -180, or
/// edges aligned with -180.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LonOffset {
    /// Longitudes at -180 + 360 (j + 1/2) / n.
    #[default]
    CellCenter,
    /// Longitudes at -180 + 360 j / n.
    CellEdge,
}

/// Regular latitude-longitude grid: m equally spaced latitudes (degrees,
/// strictly increasing) and n equally spaced longitudes covering the full
/// circle with spacing 360/n.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lats: Vec<f64>,
    lons: Vec<f64>,
    lat_min: f64,
    lat_max: f64,
    offset: LonOffset,
}

impl GridSpec {
    /// Builds a grid with the default cell-center longitude convention.
    pub fn new(m: usize, n: usize, lat_min: f64, lat_max: f64) -> Result<Self, GeometryError> {
        Self::with_offset(m, n, lat_min, lat_max, LonOffset::CellCenter)
    }

    pub fn with_offset(
        m: usize,
        n: usize,
        lat_min: f64,
        lat_max: f64,
        offset: LonOffset,
    ) -> Result<Self, GeometryError> {
        if m < 2 || n < 2 {
            return Err(GeometryError::InvalidGrid(format!(
                "need at least 2 latitudes and 2 longitudes, got {m}x{n}"
            )));
        }
        if !(lat_min.is_finite() && lat_max.is_finite())
            || lat_min <= -90.0
            || lat_max >= 90.0
            || lat_min >= lat_max
        {
            return Err(GeometryError::InvalidGrid(format!(
                "latitude bounds must satisfy -90 < {lat_min} < {lat_max} < 90"
            )));
        }
        let lat_step = (lat_max - lat_min) / (m - 1) as f64;
        let lats = (0..m).map(|i| lat_min + i as f64 * lat_step).collect();
        let lon_step = 360.0 / n as f64;
        let shift = match offset {
            LonOffset::CellCenter => 0.5,
            LonOffset::CellEdge => 0.0,
        };
        let lons = (0..n)
            .map(|j| -180.0 + (j as f64 + shift) * lon_step)
            .collect();
        Ok(Self {
            lats,
            lons,
            lat_min,
            lat_max,
            offset,
        })
    }

    pub fn n_lat(&self) -> usize {
        self.lats.len()
    }

    pub fn n_lon(&self) -> usize {
        self.lons.len()
    }

    pub fn lats(&self) -> &[f64] {
        &self.lats
    }

    pub fn lons(&self) -> &[f64] {
        &self.lons
    }

    pub fn lat_min(&self) -> f64 {
        self.lat_min
    }

    pub fn lat_max(&self) -> f64 {
        self.lat_max
    }

    pub fn offset(&self) -> LonOffset {
        self.offset
    }

    /// Longitude spacing in degrees, 360/n.
    pub fn lon_spacing(&self) -> f64 {
        360.0 / self.lons.len() as f64
    }

    /// Latitude spacing in degrees.
    pub fn lat_spacing(&self) -> f64 {
        (self.lat_max - self.lat_min) / (self.lats.len() - 1) as f64
    }

    /// Latitude spacing converted to kilometres of arc.
    pub fn lat_spacing_km(&self) -> f64 {
        self.lat_spacing().to_radians() * EARTH_RADIUS_KM
    }
}

/// Real values on a [`GridSpec`] with a missing-value mask. Row i holds
/// latitude `lats[i]`, column j longitude `lons[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: DMatrix<f64>,
    missing: DMatrix<bool>,
}

impl Field {
    /// Wraps a complete (no missing cells) value matrix.
    pub fn new(grid: GridSpec, values: DMatrix<f64>) -> Result<Self, GeometryError> {
        let missing = DMatrix::from_element(grid.n_lat(), grid.n_lon(), false);
        Self::with_mask(grid, values, missing)
    }

    /// Wraps values plus a mask; `missing[(i, j)] == true` marks a hole.
    /// Present cells must be finite.
    pub fn with_mask(
        grid: GridSpec,
        values: DMatrix<f64>,
        missing: DMatrix<bool>,
    ) -> Result<Self, GeometryError> {
        let (m, n) = (grid.n_lat(), grid.n_lon());
        if values.nrows() != m || values.ncols() != n {
            return Err(GeometryError::DimensionMismatch {
                m,
                n,
                got_rows: values.nrows(),
                got_cols: values.ncols(),
            });
        }
        if missing.nrows() != m || missing.ncols() != n {
            return Err(GeometryError::DimensionMismatch {
                m,
                n,
                got_rows: missing.nrows(),
                got_cols: missing.ncols(),
            });
        }
        for i in 0..m {
            for j in 0..n {
                if !missing[(i, j)] && !values[(i, j)].is_finite() {
                    return Err(GeometryError::NonFiniteValue(i, j));
                }
            }
        }
        Ok(Self {
            grid,
            values,
            missing,
        })
    }

    /// Builds a complete field from a function of (lat index, lon index).
    pub fn from_fn(grid: GridSpec, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = DMatrix::from_fn(grid.n_lat(), grid.n_lon(), f);
        Self::new(grid, values).expect("from_fn produced non-finite values")
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let values = DMatrix::zeros(grid.n_lat(), grid.n_lon());
        Self::new(grid, values).unwrap()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[(i, j)]
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.missing
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|&&b| b).count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing.iter().all(|&b| !b)
    }

    /// Replaces the values, keeping grid and mask.
    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let values = DMatrix::from_fn(self.values.nrows(), self.values.ncols(), |i, j| {
            f(i, j, self.values[(i, j)])
        });
        Self {
            grid: self.grid.clone(),
            values,
            missing: self.missing.clone(),
        }
    }
}

fn check_lat(lat: f64) -> Result<(), GeometryError> {
    if !(-90.0..=90.0).contains(&lat) || lat.is_nan() {
        return Err(GeometryError::LatitudeRange(lat));
    }
    Ok(())
}

/// Normalizes a longitude difference to (-180, 180] degrees. Exact for
/// multiples of 360 so periodicity and coincidence tests hold bitwise.
pub(crate) fn normalize_dlon_deg(dlon: f64) -> f64 {
    let d = dlon - 360.0 * (dlon / 360.0).round();
    if d <= -180.0 {
        d + 360.0
    } else {
        d
    }
}

/// Squared chordal distance (km^2) from latitudes/longitude-difference in
/// radians. This is the smooth coordinate every covariance derivative runs
/// through.
#[inline]
pub(crate) fn chordal_sq_rad(lat1: f64, lat2: f64, dlon: f64) -> f64 {
    let sd = ((lat1 - lat2) / 2.0).sin();
    let sl = (dlon / 2.0).sin();
    4.0 * EARTH_RADIUS_KM * EARTH_RADIUS_KM
        * (sd * sd + lat1.cos() * lat2.cos() * sl * sl)
}

/// Chordal (through-the-sphere) distance in km between points at latitudes
/// `lat1`, `lat2` separated by `dlon` degrees of longitude.
pub fn chordal_distance(lat1: f64, lat2: f64, dlon: f64) -> Result<f64, GeometryError> {
    check_lat(lat1)?;
    check_lat(lat2)?;
    let d = normalize_dlon_deg(dlon);
    Ok(chordal_sq_rad(lat1.to_radians(), lat2.to_radians(), d.to_radians()).sqrt())
}

/// Great-circle distance in km: `2R asin(ch / 2R)`.
pub fn great_circle_distance(lat1: f64, lat2: f64, dlon: f64) -> Result<f64, GeometryError> {
    let ch = chordal_distance(lat1, lat2, dlon)?;
    Ok(2.0 * EARTH_RADIUS_KM * (ch / (2.0 * EARTH_RADIUS_KM)).min(1.0).asin())
}
