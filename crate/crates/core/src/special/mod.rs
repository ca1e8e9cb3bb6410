//! Numerical building blocks shared by every other module.

mod bessel;
mod polylog;
mod quadrature;
mod roots;

pub use bessel::{
    bessel_i0_scaled, bessel_i1_scaled, bessel_ratio_table, inv_bessel_ratio, ln_bessel_i0,
    mean_resultant_length, BesselRatioTable,
};
pub use polylog::polylog;
pub use quadrature::{integrate, integrate_circle, QuadratureConfig};
pub use roots::{find_root, find_root_with, RootConfig};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new(start: f64) -> Self {
        Self {
            sum: start,
            comp: 0.0,
        }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
