//! Modified Bessel functions of the first kind, restricted to what circular
//! kernels need: exponentially scaled `I_0`, `I_1`, the ratios
//! `I_j(κ)/I_0(κ)` and the inverse of `A(κ) = I_1(κ)/I_0(κ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this concentration every quantity is summed from the power series.
const SERIES_LIMIT: f64 = 20.0;

/// `I_j(κ)/I_0(κ)` for `j = 0..=max_order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselRatioTable {
    pub kappa: f64,
    pub max_order: usize,
    pub ratios: Vec<f64>,
}

impl BesselRatioTable {
    pub fn ratio(&self, j: usize) -> f64 {
        self.ratios.get(j).copied().unwrap_or(0.0)
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::domain(format!(
            "concentration must be finite and nonnegative, got {kappa}"
        )));
    }
    Ok(())
}

/// Power series `Σ_m (x/2)^{2m+ν} / (m! (m+ν)!)` for integer order ν.
fn series_i(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = 1.0;
    for k in 1..=order {
        term *= half / k as f64;
    }
    let mut sum = term;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * (m + order as f64));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Hankel asymptotic expansion of `e^{-x} I_ν(x)`, accurate to machine
/// precision once `x > 20` for small orders.
fn asymptotic_scaled_i(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// `e^{-x} I_0(x)` for `x ≥ 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        series_i(0, x) * (-x).exp()
    } else {
        asymptotic_scaled_i(0, x)
    }
}

/// `e^{-x} I_1(x)` for `x ≥ 0`.
pub fn bessel_i1_scaled(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        series_i(1, x) * (-x).exp()
    } else {
        asymptotic_scaled_i(1, x)
    }
}

/// `ln I_0(x)` for `x ≥ 0`, without overflow.
pub fn ln_bessel_i0(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        series_i(0, x).ln()
    } else {
        x + asymptotic_scaled_i(0, x).ln()
    }
}

/// Mean resultant length of a von Mises distribution, `A(κ) = I_1(κ)/I_0(κ)`.
pub fn mean_resultant_length(kappa: f64) -> f64 {
    if kappa <= 0.0 {
        0.0
    } else if kappa <= SERIES_LIMIT {
        series_i(1, kappa) / series_i(0, kappa)
    } else {
        asymptotic_scaled_i(1, kappa) / asymptotic_scaled_i(0, kappa)
    }
}

fn ratio_derivative(kappa: f64, a: f64) -> f64 {
    if kappa < 1e-8 {
        0.5
    } else {
        1.0 - a / kappa - a * a
    }
}

/// Ratios `I_j(κ)/I_0(κ)`, `j = 0..=max_order`.
///
/// Power series for `κ ≤ 20`, normalized downward (Miller) recurrence above.
pub fn bessel_ratio_table(kappa: f64, max_order: usize) -> Result<BesselRatioTable> {
    check_kappa(kappa)?;
    if max_order == 0 {
        return Err(Error::domain("max_order must be at least 1"));
    }
    let ratios = if kappa == 0.0 {
        let mut r = vec![0.0; max_order + 1];
        r[0] = 1.0;
        r
    } else if kappa <= SERIES_LIMIT {
        series_ratios(kappa, max_order)
    } else {
        miller_ratios(kappa, max_order)
    };
    Ok(BesselRatioTable {
        kappa,
        max_order,
        ratios,
    })
}

fn series_ratios(kappa: f64, max_order: usize) -> Vec<f64> {
    let half = 0.5 * kappa;
    let q = half * half;
    let ln_half = half.ln();
    let ln_i0 = series_i(0, kappa).ln();
    let mut ratios = vec![0.0; max_order + 1];
    ratios[0] = 1.0;
    let mut ln_fact = 0.0;
    for (j, slot) in ratios.iter_mut().enumerate().skip(1) {
        ln_fact += (j as f64).ln();
        let ln_lead = j as f64 * ln_half - ln_fact;
        // sum of the series relative to its leading term
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut m = 0.0;
        loop {
            m += 1.0;
            term *= q / (m * (m + j as f64));
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        let r = (ln_lead + sum.ln() - ln_i0).exp();
        *slot = r;
        if r < 1e-300 {
            break;
        }
    }
    ratios
}

fn miller_ratios(kappa: f64, max_order: usize) -> Vec<f64> {
    let start = max_order + 30 + (10.0 * kappa.sqrt()).ceil() as usize;
    let mut stored = vec![0.0; max_order + 1];
    let mut above = 0.0; // i_{j+1}
    let mut current = 1.0; // i_j, starting at j = start
    let two_over_kappa = 2.0 / kappa;
    let mut j = start;
    while j > 0 {
        if j <= max_order {
            stored[j] = current;
        }
        let below = two_over_kappa * j as f64 * current + above;
        above = current;
        current = below;
        j -= 1;
        if current > 1e200 {
            above *= 1e-200;
            current *= 1e-200;
            for s in stored.iter_mut().skip(j + 1) {
                *s *= 1e-200;
            }
        }
    }
    let i0 = current;
    stored[0] = i0;
    stored.iter().map(|v| v / i0).collect()
}

/// Inverse of `A(κ) = I_1(κ)/I_0(κ)`: the concentration with mean resultant
/// length `nu`. Safeguarded Newton iteration inside a maintained bracket.
pub fn inv_bessel_ratio(nu: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::domain(format!(
            "mean resultant length must lie in [0, 1), got {nu}"
        )));
    }
    if nu == 0.0 {
        return Ok(0.0);
    }
    // Best & Fisher starting approximation
    let mut kappa = if nu < 0.53 {
        2.0 * nu + nu.powi(3) + 5.0 * nu.powi(5) / 6.0
    } else if nu < 0.85 {
        -0.4 + 1.39 * nu + 0.43 / (1.0 - nu)
    } else {
        1.0 / (nu.powi(3) - 4.0 * nu * nu + 3.0 * nu)
    };
    let mut lo = 0.0;
    let mut hi = (2.0 * kappa).max(1.0);
    while mean_resultant_length(hi) < nu {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::domain("mean resultant length too close to 1"));
        }
    }
    if !(kappa > lo && kappa < hi) {
        kappa = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let a = mean_resultant_length(kappa);
        let f = a - nu;
        if f == 0.0 {
            return Ok(kappa);
        }
        if f < 0.0 {
            lo = kappa;
        } else {
            hi = kappa;
        }
        let step = f / ratio_derivative(kappa, a);
        let mut next = kappa - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - kappa).abs() <= 1e-15 * kappa.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        kappa = next;
    }
    Ok(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent oracle: the defining power series for `I_j`, summed in
    /// plain f64 without scaling.
    fn bessel_series_oracle(j: u32, x: f64) -> f64 {
        let mut sum = 0.0;
        for m in 0..200u32 {
            let mut t = (x / 2.0).powi((2 * m + j) as i32);
            for k in 1..=m {
                t /= k as f64;
            }
            for k in 1..=(m + j) {
                t /= k as f64;
            }
            sum += t;
            if t < 1e-18 * sum && m > 2 {
                break;
            }
        }
        sum
    }

    #[test]
    fn zero_concentration_table() {
        let t = bessel_ratio_table(0.0, 4).unwrap();
        assert_eq!(t.ratios, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn ratio_at_two_matches_series_oracle() {
        let t = bessel_ratio_table(2.0, 1).unwrap();
        let expect = bessel_series_oracle(1, 2.0) / bessel_series_oracle(0, 2.0);
        assert_relative_eq!(t.ratios[1], expect, max_relative = 1e-14);
        assert!((t.ratios[1] - 0.69777).abs() < 1e-5);
    }

    #[test]
    fn large_kappa_ratio_near_asymptote() {
        let t = bessel_ratio_table(1000.0, 1).unwrap();
        assert!((t.ratios[1] - 0.9995).abs() < 1e-3);
        // the series (1 - 1/(2κ) - 1/(8κ²)) is far more accurate than 1e-3
        assert!((t.ratios[1] - (1.0 - 1.0 / 2000.0 - 1.0 / 8e6)).abs() < 1e-9);
    }

    #[test]
    fn series_and_miller_agree_across_the_switch() {
        for &kappa in &[15.0, 19.9, 20.1, 25.0, 60.0] {
            let a = series_ratios(kappa, 40);
            let b = miller_ratios(kappa, 40);
            for j in 0..=40 {
                assert_relative_eq!(a[j], b[j], max_relative = 1e-11, epsilon = 1e-280);
            }
        }
    }

    #[test]
    fn table_matches_oracle_for_many_orders() {
        for &kappa in &[0.3, 1.0, 5.0, 12.0, 18.0] {
            let t = bessel_ratio_table(kappa, 12).unwrap();
            let i0 = bessel_series_oracle(0, kappa);
            for j in 1..=12u32 {
                let expect = bessel_series_oracle(j, kappa) / i0;
                assert_relative_eq!(t.ratios[j as usize], expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn table_is_monotone_and_finite_for_huge_kappa() {
        for &kappa in &[50.0, 1e3, 1e5, 1e6] {
            let t = bessel_ratio_table(kappa, 50).unwrap();
            assert_eq!(t.ratios[0], 1.0);
            for w in t.ratios.windows(2) {
                assert!(w[1].is_finite());
                assert!(w[1] <= w[0] && w[1] >= 0.0);
            }
            assert_relative_eq!(
                t.ratios[1],
                mean_resultant_length(kappa),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn scaled_functions_match_series() {
        for &x in &[0.5, 3.0, 19.0, 21.0, 30.0] {
            assert_relative_eq!(
                bessel_i0_scaled(x),
                bessel_series_oracle(0, x) * (-x).exp(),
                max_relative = 1e-13
            );
            assert_relative_eq!(
                bessel_i1_scaled(x),
                bessel_series_oracle(1, x) * (-x).exp(),
                max_relative = 1e-13
            );
        }
        assert_relative_eq!(
            ln_bessel_i0(2.0),
            2.2795853023360673_f64.ln(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn negative_kappa_rejected() {
        assert!(matches!(bessel_ratio_table(-1.0, 2), Err(Error::Domain(_))));
        assert!(matches!(
            bessel_ratio_table(f64::NAN, 2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inv_bessel_ratio(0.0).unwrap(), 0.0);
        let nu2 = bessel_ratio_table(2.0, 1).unwrap().ratios[1];
        assert!((inv_bessel_ratio(nu2).unwrap() - 2.0).abs() < 1e-10);
        assert!((inv_bessel_ratio(0.69777).unwrap() - 2.0).abs() < 1e-4);
        let k = inv_bessel_ratio(0.9995).unwrap();
        assert!((k - 1000.0).abs() / 1000.0 < 0.01);
        assert!(matches!(inv_bessel_ratio(1.0), Err(Error::Domain(_))));
        assert!(matches!(inv_bessel_ratio(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_round_trip_grid() {
        for i in 0..100 {
            let nu = i as f64 / 100.0;
            let kappa = inv_bessel_ratio(nu).unwrap();
            let back = bessel_ratio_table(kappa, 1).unwrap().ratios[1];
            assert!((back - nu).abs() < 1e-8, "nu={nu} back={back}");
        }
        let kappa = inv_bessel_ratio(0.999_999).unwrap();
        assert_relative_eq!(
            mean_resultant_length(kappa),
            0.999_999,
            max_relative = 1e-12
        );
    }

    #[test]
    fn ratio_increases_with_kappa() {
        let mut prev = 0.0;
        for i in 1..200 {
            let a = mean_resultant_length(i as f64 * 0.37);
            assert!(a > prev);
            prev = a;
        }
        assert!(mean_resultant_length(1e8) > 0.999_999_99);
    }
}
