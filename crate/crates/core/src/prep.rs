//! Preprocessing: neighbor-average imputation of missing cells and the
//! split cosine-bell taper applied per latitude row.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::geometry::Field;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrepError {
    #[error("field is entirely missing; nothing to impute from")]
    AllMissing,
    #[error("taper fraction must lie in [0, 0.5), got {0}")]
    BadFraction(f64),
    #[error("field has missing values; taper after imputation")]
    MissingData,
}

/// Split cosine-bell taper configuration: the fraction of each end of every
/// latitude row that is down-weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaperSpec {
    pub fraction: f64,
}

impl TaperSpec {
    pub fn new(fraction: f64) -> Result<Self, PrepError> {
        if !(0.0..0.5).contains(&fraction) {
            return Err(PrepError::BadFraction(fraction));
        }
        Ok(Self { fraction })
    }
}

impl Default for TaperSpec {
    /// 5% of each end.
    fn default() -> Self {
        Self { fraction: 0.05 }
    }
}

/// Fills missing cells with the average of their available 8-neighbors
/// (longitude wraps around, latitude does not), repeating passes until
/// every cell is filled. Within a pass all averages use the values present
/// at the start of the pass; cells whose neighbors are all missing wait for
/// a later pass. Observed cells are never modified.
pub fn impute_missing(field: &Field) -> Result<Field, PrepError> {
    let grid = field.grid();
    let m = grid.n_lat();
    let n = grid.n_lon();
    if field.n_missing() == m * n {
        return Err(PrepError::AllMissing);
    }
    if field.is_complete() {
        return Ok(field.clone());
    }
    let mut values = field.values().clone();
    let mut missing = field.mask().clone();
    loop {
        let snapshot_vals = values.clone();
        let snapshot_miss = missing.clone();
        let mut filled_any = false;
        let mut remaining = false;
        for i in 0..m {
            for j in 0..n {
                if !snapshot_miss[(i, j)] {
                    continue;
                }
                let mut sum = 0.0;
                let mut count = 0usize;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let ni = i as i64 + di;
                        if ni < 0 || ni >= m as i64 {
                            continue;
                        }
                        let nj = (j as i64 + dj).rem_euclid(n as i64) as usize;
                        if !snapshot_miss[(ni as usize, nj)] {
                            sum += snapshot_vals[(ni as usize, nj)];
                            count += 1;
                        }
                    }
                }
                if count > 0 {
                    values[(i, j)] = sum / count as f64;
                    missing[(i, j)] = false;
                    filled_any = true;
                } else {
                    remaining = true;
                }
            }
        }
        if !remaining {
            break;
        }
        debug_assert!(filled_any, "a nonempty present set always grows");
    }
    let mask = DMatrix::from_element(m, n, false);
    Ok(Field::with_mask(grid.clone(), values, mask).expect("imputed field is finite"))
}

/// The per-row taper weights for n longitude cells: L = floor(fraction * n)
/// points at each end get `0.5 (1 - cos(pi (j + 0.5) / L))`, mirrored at
/// the far end; interior weights are exactly 1. The half-sample offset
/// matches cells that straddle the zeroed end point.
pub fn taper_weights(n: usize, fraction: f64) -> Vec<f64> {
    let l = (fraction * n as f64).floor() as usize;
    let mut w = vec![1.0; n];
    for j in 0..l {
        let v = 0.5 * (1.0 - (std::f64::consts::PI * (j as f64 + 0.5) / l as f64).cos());
        w[j] = v;
        w[n - 1 - j] = v;
    }
    w
}

/// Applies the split cosine-bell taper to every latitude row of a complete
/// field.
pub fn taper_field(field: &Field, taper: &TaperSpec) -> Result<Field, PrepError> {
    if !(0.0..0.5).contains(&taper.fraction) {
        return Err(PrepError::BadFraction(taper.fraction));
    }
    if !field.is_complete() {
        return Err(PrepError::MissingData);
    }
    let n = field.grid().n_lon();
    let w = taper_weights(n, taper.fraction);
    Ok(field.map_values(|_, j, v| v * w[j]))
}
