use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Polylogarithm `Li_s(x) = Σ_{j≥1} x^j / j^s` for integer orders `s ≤ 2`.
///
/// Nonpositive orders use the rational closed forms built from Eulerian
/// numbers; `Li_1(x) = -ln(1-x)`; `Li_2` is reduced to `|x| ≤ 1/2` by the
/// reflection and Landen identities before summing.
pub fn polylog(order: i32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("polylog argument must be finite"));
    }
    let inside = x.abs() < 1.0;
    let ok = match order {
        2 => (-1.0..=1.0).contains(&x),
        1 => inside || x == -1.0,
        o if o <= 0 => inside,
        _ => false,
    };
    if !ok {
        return Err(Error::domain(format!(
            "polylog of order {order} diverges or is unsupported at x = {x}"
        )));
    }
    Ok(match order {
        2 => dilog(x),
        1 => -(-x).ln_1p(),
        o => negative_order(o.unsigned_abs() as usize, x),
    })
}

fn negative_order(n: usize, x: f64) -> f64 {
    if n == 0 {
        return x / (1.0 - x);
    }
    // Eulerian numbers A(n, k), k = 0..n-1
    let mut row = vec![1.0_f64];
    for m in 2..=n {
        let mut next = vec![0.0; m];
        for (k, slot) in next.iter_mut().enumerate() {
            let keep = if k < row.len() {
                (k + 1) as f64 * row[k]
            } else {
                0.0
            };
            let shift = if k >= 1 {
                (m - k) as f64 * row[k - 1]
            } else {
                0.0
            };
            *slot = keep + shift;
        }
        row = next;
    }
    let mut numer = 0.0;
    let mut xp = x;
    for a in &row {
        numer += a * xp;
        xp *= x;
    }
    numer / (1.0 - x).powi(n as i32 + 1)
}

fn dilog_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut xp = x;
    let mut j = 1.0;
    loop {
        let term = xp / (j * j);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
        xp *= x;
        j += 1.0;
    }
    sum
}

fn dilog(x: f64) -> f64 {
    if x == 1.0 {
        PI * PI / 6.0
    } else if x.abs() <= 0.5 {
        dilog_series(x)
    } else if x > 0.5 {
        // Li2(x) + Li2(1-x) = π²/6 - ln x ln(1-x)
        PI * PI / 6.0 - x.ln() * (-x).ln_1p() - dilog_series(1.0 - x)
    } else {
        // Landen: Li2(x) = -Li2(x/(x-1)) - ln²(1-x)/2, with x/(x-1) ∈ (1/3, 1/2]
        let l = (-x).ln_1p();
        -dilog_series(x / (x - 1.0)) - 0.5 * l * l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_oracle(order: i32, x: f64) -> f64 {
        let mut sum = 0.0;
        for j in 1..2_000_000u64 {
            let term = x.powi(j as i32) / (j as f64).powi(order);
            sum += term;
            if term.abs() < 1e-16 && j > 10 {
                break;
            }
        }
        sum
    }

    #[test]
    fn closed_form_examples() {
        assert!((polylog(0, 0.25).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((polylog(2, -1.0).unwrap() + PI * PI / 12.0).abs() < 1e-10);
        let expect = 0.25 * 1.25 / 0.75_f64.powi(3);
        assert!((polylog(-2, 0.25).unwrap() - expect).abs() < 1e-12);
        assert!((polylog(-2, 0.25).unwrap() - series_oracle(-2, 0.25)).abs() < 1e-10);
        assert!((polylog(2, 1.0).unwrap() - PI * PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn dilog_matches_partial_sums() {
        for &x in &[-0.99, -0.5, 0.0, 0.5, 0.99] {
            let got = polylog(2, x).unwrap();
            // alternating/geometric tails are bounded by the next term
            let oracle = series_oracle(2, x);
            assert!(
                (got - oracle).abs() < 1e-12,
                "x={x} got={got} oracle={oracle}"
            );
        }
    }

    #[test]
    fn negative_orders_match_series() {
        for order in [-1, -2, -3, -4, -6, -8] {
            // large alternating terms make the naive oracle itself inaccurate
            // for high orders at strongly negative x
            let xs: &[f64] = if order >= -4 {
                &[-0.7, -0.2, 0.1, 0.45, 0.81]
            } else {
                &[-0.4, -0.2, 0.1, 0.45, 0.81]
            };
            for &x in xs {
                let got = polylog(order, x).unwrap();
                let oracle = series_oracle(order, x);
                assert!(
                    (got - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
                    "order={order} x={x} got={got} oracle={oracle}"
                );
            }
        }
    }

    #[test]
    fn first_order_is_log() {
        assert!((polylog(1, 0.5).unwrap() - 2.0_f64.ln()).abs() < 1e-15);
        assert!((polylog(1, -1.0).unwrap() + 2.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn divergent_arguments_rejected() {
        assert!(polylog(0, 1.0).is_err());
        assert!(polylog(1, 1.0).is_err());
        assert!(polylog(-2, -1.0).is_err());
        assert!(polylog(2, 1.5).is_err());
        assert!(polylog(3, 0.5).is_err());
    }
}
