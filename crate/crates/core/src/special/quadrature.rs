use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

// Gauss-Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let s = f(center - dx) + f(center + dx);
        kronrod += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    integrate_split(&mut f, a, b, 1, cfg)
}

fn integrate_split<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    pieces: usize,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(cfg.abs_tol > 0.0) || cfg.max_subdivisions == 0 {
        return Err(Error::domain(
            "quadrature needs abs_tol > 0 and max_subdivisions >= 1",
        ));
    }
    let mut heap = BinaryHeap::new();
    let width = (b - a) / pieces as f64;
    for p in 0..pieces {
        let lo = a + width * p as f64;
        let hi = if p + 1 == pieces { b } else { lo + width };
        let (value, error) = gk15(f, lo, hi);
        heap.push(Segment {
            a: lo,
            b: hi,
            value,
            error,
        });
    }
    let mut splits = 0;
    loop {
        let (total, err) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !total.is_finite() {
            return Err(Error::domain("integrand is not finite on the domain"));
        }
        if err <= cfg.abs_tol {
            return Ok(total);
        }
        if splits >= cfg.max_subdivisions {
            return Err(Error::ToleranceNotMet {
                what: "adaptive quadrature",
                estimate: total,
                error: err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            return Err(Error::ToleranceNotMet {
                what: "adaptive quadrature",
                estimate: total,
                error: err,
            });
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(f, lo, hi);
            heap.push(Segment {
                a: lo,
                b: hi,
                value,
                error,
            });
        }
        splits += 1;
    }
}

/// `∫_{-π}^{π} f(θ) dθ`. The circle is seeded with eight panels so sharply
/// peaked integrands are not missed by the first rule.
pub fn integrate_circle<F: FnMut(f64) -> f64>(mut f: F, cfg: &QuadratureConfig) -> Result<f64> {
    integrate_split(&mut f, -PI, PI, 8, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_density() {
        let cfg = QuadratureConfig::default();
        let v = integrate_circle(|_| 1.0 / (2.0 * PI), &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cos_squared() {
        let cfg = QuadratureConfig::default();
        let v = integrate_circle(|t: f64| t.cos().powi(2), &cfg).unwrap();
        assert!((v - PI).abs() < 1e-10);
    }

    #[test]
    fn von_mises_density_has_unit_mass() {
        let cfg = QuadratureConfig::default();
        let i0 = 2.279_585_302_336_067_3;
        let v = integrate_circle(|t: f64| (2.0 * t.cos()).exp() / (2.0 * PI * i0), &cfg).unwrap();
        assert!((v - 1.0).abs() < cfg.abs_tol);
    }

    #[test]
    fn peaked_integrand() {
        let cfg = QuadratureConfig::with_tol(1e-10);
        let kappa = 5000.0_f64;
        let norm = (kappa / (2.0 * PI)).sqrt();
        let v = integrate_circle(|t: f64| norm * (-0.5 * kappa * t * t).exp(), &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let cfg = QuadratureConfig {
            abs_tol: 1e-14,
            max_subdivisions: 2,
        };
        match integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, &cfg) {
            Err(Error::ToleranceNotMet { estimate, .. }) => {
                assert!((estimate - 4.0 / 3.0).abs() < 1e-2)
            }
            other => panic!("expected tolerance failure, got {other:?}"),
        }
    }
}
