//! Spatial diagnostics: per-latitude/longitude summary curves (variances of
//! the field and of its longitude differences) and directional variograms
//! between neighboring cells, both empirical and model-implied.
//!
//! The empirical profile estimators are sample variances with mean
//! subtraction and run over the printed index ranges with no date-line
//! wraparound. The directional variogram estimators are plain mean squared
//! increments without mean subtraction, reported as square roots. The two
//! conventions are deliberately kept distinct.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::covmodel::{cov_eval, CovError, ModelSpec, ParamVector};
use crate::geometry::{Field, GridSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("field has missing values; impute first")]
    MissingData,
    #[error("latitude index {lat_index} is on the boundary for direction {direction}")]
    BoundaryLat {
        lat_index: usize,
        direction: Direction,
    },
    #[error("latitude index {0} out of range")]
    LatIndexRange(usize),
    #[error("grid too small for {0}")]
    GridTooSmall(&'static str),
    #[error(transparent)]
    Cov(#[from] CovError),
}

/// Which summary curve to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// Variance across latitudes at each fixed longitude.
    VarByLon,
    /// Variance across longitudes at each fixed latitude.
    VarByLat,
    /// Variance of first longitude differences at each latitude.
    LonDiff1,
    /// Variance of second longitude differences at each latitude.
    LonDiff2,
    /// Variance of the latitude-by-longitude cross difference, per latitude
    /// pair (L_i, L_{i-1}).
    CrossDiff,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 5] = [
        ProfileKind::VarByLon,
        ProfileKind::VarByLat,
        ProfileKind::LonDiff1,
        ProfileKind::LonDiff2,
        ProfileKind::CrossDiff,
    ];
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProfileKind::VarByLon => "var-by-lon",
            ProfileKind::VarByLat => "var-by-lat",
            ProfileKind::LonDiff1 => "lon-diff1",
            ProfileKind::LonDiff2 => "lon-diff2",
            ProfileKind::CrossDiff => "cross-diff",
        };
        f.write_str(s)
    }
}

impl FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "var-by-lon" => Ok(ProfileKind::VarByLon),
            "var-by-lat" => Ok(ProfileKind::VarByLat),
            "lon-diff1" => Ok(ProfileKind::LonDiff1),
            "lon-diff2" => Ok(ProfileKind::LonDiff2),
            "cross-diff" => Ok(ProfileKind::CrossDiff),
            other => Err(format!("unknown profile kind '{other}'")),
        }
    }
}

/// A plot-ready curve: axis values (degrees), the empirical estimates and
/// optionally the model-implied values. `fitted` stays `None` for
/// [`ProfileKind::VarByLon`], which is constant under axial symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub kind: ProfileKind,
    pub axis: Vec<f64>,
    pub empirical: Vec<f64>,
    pub fitted: Option<Vec<f64>>,
}

/// Compass direction between neighboring grid cells. North is toward
/// higher latitude, east toward higher longitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    SE,
    S,
    SW,
    W,
    NW,
    N,
    NE,
    E,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
        Direction::N,
        Direction::NE,
        Direction::E,
    ];

    /// Latitude row offset of the far cell.
    fn dlat(self) -> i64 {
        match self {
            Direction::SE | Direction::S | Direction::SW => -1,
            Direction::NE | Direction::N | Direction::NW => 1,
            Direction::E | Direction::W => 0,
        }
    }

    /// Longitude column offset of the far cell.
    fn dlon(self) -> i64 {
        match self {
            Direction::SE | Direction::NE | Direction::E => 1,
            Direction::SW | Direction::NW | Direction::W => -1,
            Direction::S | Direction::N => 0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::SE => "SE",
            Direction::S => "S",
            Direction::SW => "SW",
            Direction::W => "W",
            Direction::NW => "NW",
            Direction::N => "N",
            Direction::NE => "NE",
            Direction::E => "E",
        };
        f.write_str(s)
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "SE" => Ok(Direction::SE),
            "S" => Ok(Direction::S),
            "SW" => Ok(Direction::SW),
            "W" => Ok(Direction::W),
            "NW" => Ok(Direction::NW),
            "N" => Ok(Direction::N),
            "NE" => Ok(Direction::NE),
            "E" => Ok(Direction::E),
            other => Err(format!("unknown direction '{other}'")),
        }
    }
}

fn sample_var(values: &[f64]) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let mean: f64 = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

/// Empirical summary curve of a complete field.
pub fn empirical_profile(
    field: &Field,
    kind: ProfileKind,
) -> Result<ProfileCurve, DiagnosticsError> {
    if !field.is_complete() {
        return Err(DiagnosticsError::MissingData);
    }
    let grid = field.grid();
    let m = grid.n_lat();
    let n = grid.n_lon();
    let (axis, empirical) = match kind {
        ProfileKind::VarByLon => {
            if m < 2 {
                return Err(DiagnosticsError::GridTooSmall("var-by-lon"));
            }
            let vals = (0..n)
                .map(|j| sample_var(&(0..m).map(|i| field.get(i, j)).collect::<Vec<_>>()))
                .collect();
            (grid.lons().to_vec(), vals)
        }
        ProfileKind::VarByLat => {
            if n < 2 {
                return Err(DiagnosticsError::GridTooSmall("var-by-lat"));
            }
            let vals = (0..m)
                .map(|i| sample_var(&(0..n).map(|j| field.get(i, j)).collect::<Vec<_>>()))
                .collect();
            (grid.lats().to_vec(), vals)
        }
        ProfileKind::LonDiff1 => {
            if n < 3 {
                return Err(DiagnosticsError::GridTooSmall("lon-diff1"));
            }
            let vals = (0..m)
                .map(|i| {
                    let d: Vec<f64> = (1..n)
                        .map(|j| field.get(i, j) - field.get(i, j - 1))
                        .collect();
                    sample_var(&d)
                })
                .collect();
            (grid.lats().to_vec(), vals)
        }
        ProfileKind::LonDiff2 => {
            if n < 4 {
                return Err(DiagnosticsError::GridTooSmall("lon-diff2"));
            }
            let vals = (0..m)
                .map(|i| {
                    let d: Vec<f64> = (1..n - 1)
                        .map(|j| {
                            field.get(i, j + 1) - 2.0 * field.get(i, j) + field.get(i, j - 1)
                        })
                        .collect();
                    sample_var(&d)
                })
                .collect();
            (grid.lats().to_vec(), vals)
        }
        ProfileKind::CrossDiff => {
            if m < 2 || n < 3 {
                return Err(DiagnosticsError::GridTooSmall("cross-diff"));
            }
            let vals = (1..m)
                .map(|i| {
                    let d: Vec<f64> = (0..n - 1)
                        .map(|j| {
                            field.get(i, j + 1) - field.get(i, j) - field.get(i - 1, j + 1)
                                + field.get(i - 1, j)
                        })
                        .collect();
                    sample_var(&d)
                })
                .collect();
            (grid.lats()[1..].to_vec(), vals)
        }
    };
    Ok(ProfileCurve {
        kind,
        axis,
        empirical,
        fitted: None,
    })
}

/// Model-implied population values of the summary curves, per latitude.
/// Returns `None` for [`ProfileKind::VarByLon`] (no fitted curve: the
/// quantity is constant in longitude under axial symmetry).
pub fn fitted_profile(
    spec: &ModelSpec,
    params: &ParamVector,
    grid: &GridSpec,
    kind: ProfileKind,
) -> Result<Option<Vec<f64>>, DiagnosticsError> {
    let lats = grid.lats();
    let dl = grid.lon_spacing();
    let k = |l1: f64, l2: f64, lag: f64| cov_eval(spec, params, l1, l2, lag);
    let vals = match kind {
        ProfileKind::VarByLon => return Ok(None),
        ProfileKind::VarByLat => lats
            .iter()
            .map(|&l| k(l, l, 0.0))
            .collect::<Result<Vec<_>, _>>()?,
        ProfileKind::LonDiff1 => lats
            .iter()
            .map(|&l| Ok(2.0 * (k(l, l, 0.0)? - k(l, l, dl)?)))
            .collect::<Result<Vec<_>, CovError>>()?,
        ProfileKind::LonDiff2 => lats
            .iter()
            .map(|&l| Ok(6.0 * k(l, l, 0.0)? - 8.0 * k(l, l, dl)? + 2.0 * k(l, l, 2.0 * dl)?))
            .collect::<Result<Vec<_>, CovError>>()?,
        ProfileKind::CrossDiff => (1..lats.len())
            .map(|i| {
                let (hi, lo) = (lats[i], lats[i - 1]);
                // eight-term expansion; the two cross terms with opposite
                // longitude lags differ for irreversible models
                Ok(2.0 * k(hi, hi, 0.0)? + 2.0 * k(lo, lo, 0.0)?
                    - 2.0 * k(hi, hi, dl)?
                    - 2.0 * k(lo, lo, dl)?
                    - 4.0 * k(hi, lo, 0.0)?
                    + 2.0 * k(hi, lo, dl)?
                    + 2.0 * k(hi, lo, -dl)?)
            })
            .collect::<Result<Vec<_>, CovError>>()?,
    };
    Ok(Some(vals))
}

/// Helper wiring an empirical curve and its fitted counterpart together.
pub fn profile_with_fit(
    field: &Field,
    spec: &ModelSpec,
    params: &ParamVector,
    kind: ProfileKind,
) -> Result<ProfileCurve, DiagnosticsError> {
    let mut curve = empirical_profile(field, kind)?;
    curve.fitted = fitted_profile(spec, params, field.grid(), kind)?;
    Ok(curve)
}

fn check_dir_bounds(
    m: usize,
    lat_index: usize,
    direction: Direction,
) -> Result<(), DiagnosticsError> {
    if lat_index >= m {
        return Err(DiagnosticsError::LatIndexRange(lat_index));
    }
    let far = lat_index as i64 + direction.dlat();
    if far < 0 || far >= m as i64 {
        return Err(DiagnosticsError::BoundaryLat {
            lat_index,
            direction,
        });
    }
    Ok(())
}

/// Square root of the mean squared increment between each cell of latitude
/// row `lat_index` and its neighbor in the given direction. No mean
/// subtraction, no date-line wraparound (shifted directions use n-1 pairs).
pub fn empirical_dir_variogram(
    field: &Field,
    lat_index: usize,
    direction: Direction,
) -> Result<f64, DiagnosticsError> {
    if !field.is_complete() {
        return Err(DiagnosticsError::MissingData);
    }
    let grid = field.grid();
    let m = grid.n_lat();
    let n = grid.n_lon();
    check_dir_bounds(m, lat_index, direction)?;
    let far_i = (lat_index as i64 + direction.dlat()) as usize;
    let (j_range, count): (Box<dyn Iterator<Item = usize>>, usize) = match direction.dlon() {
        0 => (Box::new(0..n), n),
        1 => (Box::new(0..n - 1), n - 1),
        _ => (Box::new(1..n), n - 1),
    };
    let mut sum = 0.0;
    for j in j_range {
        let far_j = (j as i64 + direction.dlon()) as usize;
        let d = field.get(lat_index, j) - field.get(far_i, far_j);
        sum += d * d;
    }
    Ok((sum / count as f64).sqrt())
}

/// Model-implied directional variogram,
/// `sqrt(K(L,L,0) + K(L',L',0) - 2 K(L,L',lag))` with the longitude lag
/// signed by the direction (so NE and NW differ for longitudinally
/// irreversible models).
pub fn fitted_dir_variogram(
    spec: &ModelSpec,
    params: &ParamVector,
    grid: &GridSpec,
    lat_index: usize,
    direction: Direction,
) -> Result<f64, DiagnosticsError> {
    let m = grid.n_lat();
    check_dir_bounds(m, lat_index, direction)?;
    let far_i = (lat_index as i64 + direction.dlat()) as usize;
    let near_l = grid.lats()[lat_index];
    let far_l = grid.lats()[far_i];
    // lag enters as l_near - l_far
    let lag = -(direction.dlon() as f64) * grid.lon_spacing();
    let v = cov_eval(spec, params, near_l, near_l, 0.0)?
        + cov_eval(spec, params, far_l, far_l, 0.0)?
        - 2.0 * cov_eval(spec, params, near_l, far_l, lag)?;
    Ok(v.max(0.0).sqrt())
}
