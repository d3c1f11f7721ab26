use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

/// Lorentzian of half width `width` (MHz), truncated at `cutoff` and shifted
/// so that it falls continuously to zero there.
///
/// weight(0) = 1 and weight(|delta| >= cutoff) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineShape<T> {
    pub width: T,
    pub cutoff: T,
}

impl<T: Real> LineShape<T> {
    pub fn new(width: T, cutoff: T) -> Self {
        Self { width, cutoff }
    }

    pub fn validate(&self) -> Result<()> {
        let w = to_f64(self.width);
        let c = to_f64(self.cutoff);
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::invalid("width", w, "must be finite and > 0"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("cutoff", c, "must be finite and > 0"));
        }
        Ok(())
    }

    fn lorentzian(&self, detuning: T) -> T {
        let w2 = self.width * self.width;
        w2 / (w2 + detuning * detuning)
    }

    pub fn weight(&self, detuning: T) -> T {
        if detuning.abs() >= self.cutoff {
            return T::zero();
        }
        let floor = self.lorentzian(self.cutoff);
        (self.lorentzian(detuning) - floor) / (T::one() - floor)
    }
}
