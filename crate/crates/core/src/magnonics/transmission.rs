use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DeviceGeometry, FieldConfig, MaterialParams};
use crate::scalar::{is_sorted_finite, Real};

use super::{mode_ladder, SpectrumSettings};

/// Zero-field-referenced transmission between the two microstrips.
///
/// `s21[i][j]` belongs to `b_grid[i]` and `f_grid[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionMap<T> {
    pub b_grid: Vec<T>,
    pub f_grid: Vec<T>,
    pub s21: Vec<Vec<T>>,
}

impl<T: Real> TransmissionMap<T> {
    /// Builds the map
    ///
    /// ```text
    /// S21(f, B) = sum_n eta_n^2 exp(-s / L_n) w(f - f_n)  -  S21(f, B_ref)
    /// ```
    ///
    /// where `s` is the antenna separation and `w` the transmission line shape.
    /// Rows are evaluated in parallel; each cell sums modes in ladder order so
    /// results do not depend on the worker count.
    pub fn compute(
        b_grid: &[T],
        f_grid: &[T],
        theta: T,
        geometry: &DeviceGeometry<T>,
        params: &MaterialParams<T>,
        settings: &SpectrumSettings<T>,
        reference_field: T,
    ) -> Result<Self> {
        if b_grid.is_empty() || !is_sorted_finite(b_grid) {
            return Err(Error::UnsortedGrid { name: "b_grid" });
        }
        if f_grid.is_empty() || !is_sorted_finite(f_grid) {
            return Err(Error::UnsortedGrid { name: "f_grid" });
        }
        let raw_row = |b: T| -> Result<Vec<T>> {
            let field = FieldConfig { b_ext: b, theta };
            let ladder = mode_ladder(&field, params, geometry, settings)?;
            let weights: Vec<(T, T)> = ladder
                .iter()
                .map(|m| {
                    let w = m.efficiency * m.efficiency * (-geometry.msl_separation / m.decay_length).exp();
                    (m.frequency, w)
                })
                .collect();
            Ok(f_grid
                .iter()
                .map(|&f| {
                    weights.iter().fold(T::zero(), |acc, &(fm, w)| {
                        acc + w * settings.transmission_line.weight(f - fm)
                    })
                })
                .collect())
        };
        let reference = raw_row(reference_field)?;
        let s21 = b_grid
            .par_iter()
            .map(|&b| {
                if b == reference_field {
                    return Ok(vec![T::zero(); f_grid.len()]);
                }
                let row = raw_row(b)?;
                Ok(row.into_iter().zip(&reference).map(|(a, r)| a - *r).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            b_grid: b_grid.to_vec(),
            f_grid: f_grid.to_vec(),
            s21,
        })
    }

    /// Lowest and highest grid frequency of row `i` whose value exceeds
    /// `rel_threshold` times the row maximum.
    pub fn support(&self, i: usize, rel_threshold: T) -> Option<(T, T)> {
        let row = self.s21.get(i)?;
        let peak = row.iter().fold(T::zero(), |m, &v| m.max(v));
        if peak <= T::zero() {
            return None;
        }
        let thr = peak * rel_threshold;
        let lo = row.iter().position(|&v| v > thr)?;
        let hi = row.iter().rposition(|&v| v > thr)?;
        Some((self.f_grid[lo], self.f_grid[hi]))
    }
}
