use std::f64::consts::PI;

use super::{Alphas, FourierTruncation, KernelFamily, KernelSpec};
use crate::error::{Error, Result};
use crate::special::bessel_i0_scaled;

/// Wrapped normal kernels with `σ` below this are evaluated as a sum over
/// wrapped images; wider ones through their fast-decaying Fourier series.
const WN_IMAGE_SIGMA: f64 = 1.0;

#[derive(Debug, Clone)]
enum Form {
    Zero,
    Constant(f64),
    /// `norm · e^{κ(cos θ − 1)} · Σ coef · sin^a θ · cos^b θ`
    VonMises {
        norm: f64,
        kappa: f64,
        terms: Vec<(usize, usize, f64)>,
        degree: usize,
    },
    WrappedNormal {
        sigma: f64,
        images: i32,
    },
    Cauchy {
        nu: f64,
    },
    Epanechnikov {
        lambda: f64,
    },
    Cardioid {
        nu: f64,
    },
    /// `base + Σ_j c_j · trig(jθ)` with `trig` fixed by `r mod 4`.
    Fourier {
        base: f64,
        coef: Vec<f64>,
        phase: usize,
    },
}

/// A kernel derivative `K^{(r)}` prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct KernelEval {
    form: Form,
    r: usize,
}

/// `e^{κ cos θ}` differentiated `r` times is `e^{κ cos θ} P_r(sin θ, cos θ)`
/// with `P_{r+1} = dP_r/dθ − κ sin θ P_r`.
fn von_mises_polynomial(kappa: f64, r: usize) -> Vec<(usize, usize, f64)> {
    let dim = r + 2;
    let mut p = vec![0.0; dim * dim];
    p[0] = 1.0;
    for _ in 0..r {
        let mut next = vec![0.0; dim * dim];
        for a in 0..dim {
            for b in 0..dim {
                let c = p[a * dim + b];
                if c == 0.0 {
                    continue;
                }
                // d/dθ sin^a cos^b = a sin^{a-1} cos^{b+1} − b sin^{a+1} cos^{b-1}
                if a > 0 {
                    next[(a - 1) * dim + b + 1] += a as f64 * c;
                }
                if b > 0 {
                    next[(a + 1) * dim + b - 1] -= b as f64 * c;
                }
                next[(a + 1) * dim + b] -= kappa * c;
            }
        }
        p = next;
    }
    let mut terms = Vec::new();
    for a in 0..dim {
        for b in 0..dim {
            if p[a * dim + b] != 0.0 {
                terms.push((a, b, p[a * dim + b]));
            }
        }
    }
    terms
}

fn hermite_he(r: usize, u: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, u);
    if r == 0 {
        return 1.0;
    }
    for n in 1..r {
        let next = u * cur - n as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

impl KernelEval {
    pub fn new(k: &KernelSpec, r: usize, trunc: &FourierTruncation) -> Result<Self> {
        let form = if k.is_uniform() {
            if r == 0 {
                Form::Constant(1.0 / (2.0 * PI))
            } else {
                Form::Zero
            }
        } else {
            match k.family() {
                KernelFamily::VonMises => {
                    let kappa = k.kappa().expect("von Mises carries kappa");
                    Form::VonMises {
                        norm: 1.0 / (2.0 * PI * bessel_i0_scaled(kappa)),
                        kappa,
                        terms: von_mises_polynomial(kappa, r),
                        degree: r,
                    }
                }
                KernelFamily::WrappedNormal if k.wn_sigma() < WN_IMAGE_SIGMA => {
                    let sigma = k.wn_sigma();
                    let reach = 40.0 * sigma + PI;
                    Form::WrappedNormal {
                        sigma,
                        images: (reach / (2.0 * PI)).ceil() as i32,
                    }
                }
                KernelFamily::WrappedCauchy if r == 0 => Form::Cauchy { nu: k.nu() },
                KernelFamily::WrappedEpanechnikov => Form::Epanechnikov {
                    lambda: k.lambda().expect("wrapped Epanechnikov carries lambda"),
                },
                KernelFamily::Cardioid => Form::Cardioid { nu: k.nu() },
                _ => Self::fourier_form(k, r, trunc)?,
            }
        };
        Ok(Self { form, r })
    }

    /// Always evaluates through the truncated Fourier series, independent
    /// of any closed form.
    pub fn fourier(k: &KernelSpec, r: usize, trunc: &FourierTruncation) -> Result<Self> {
        Ok(Self {
            form: Self::fourier_form(k, r, trunc)?,
            r,
        })
    }

    fn fourier_form(k: &KernelSpec, r: usize, trunc: &FourierTruncation) -> Result<Form> {
        let mut alphas = Alphas::new(k);
        let mut coef = Vec::new();
        let mut j = 1;
        let mut quiet = 0;
        let mut scale = if r == 0 { 1.0 } else { 0.0 };
        while quiet < 3 && j <= trunc.max_terms {
            let a = alphas.get(j)?;
            let c = (j as f64).powi(r as i32) * a;
            scale += c.abs();
            quiet = if c.abs() <= trunc.rel_tol * scale {
                quiet + 1
            } else {
                0
            };
            coef.push(c / PI);
            j += 1;
        }
        if quiet < 3 {
            return Err(Error::ToleranceNotMet {
                what: "kernel Fourier series",
                estimate: coef.iter().sum(),
                error: coef.last().map_or(0.0, |c| c.abs()),
            });
        }
        Ok(Form::Fourier {
            base: if r == 0 { 0.5 / PI } else { 0.0 },
            coef,
            phase: r % 4,
        })
    }

    pub fn order(&self) -> usize {
        self.r
    }

    /// `K^{(r)}(θ)`.
    pub fn eval(&self, theta: f64) -> f64 {
        match &self.form {
            Form::VonMises { .. } => self.eval_cs(theta, theta.cos(), theta.sin()),
            _ => self.eval_cs(theta, f64::NAN, f64::NAN),
        }
    }

    /// `K^{(r)}(θ)` given precomputed `cos θ` and `sin θ`. Only the von Mises
    /// form reads the trigonometric values; others may receive NaN.
    pub fn eval_cs(&self, theta: f64, cos: f64, sin: f64) -> f64 {
        match &self.form {
            Form::Zero => 0.0,
            Form::Constant(c) => *c,
            Form::VonMises {
                norm,
                kappa,
                terms,
                degree,
            } => {
                let envelope = norm * (kappa * (cos - 1.0)).exp();
                if *degree == 0 {
                    return envelope;
                }
                let mut sp = [1.0; 32];
                let mut cp = [1.0; 32];
                let d = (*degree + 1).min(31);
                for i in 1..=d {
                    sp[i] = sp[i - 1] * sin;
                    cp[i] = cp[i - 1] * cos;
                }
                let poly: f64 = terms.iter().map(|&(a, b, c)| c * sp[a] * cp[b]).sum();
                envelope * poly
            }
            Form::WrappedNormal { sigma, images } => {
                let theta = wrap(theta);
                let norm = 1.0 / ((2.0 * PI).sqrt() * sigma.powi(self.r as i32 + 1));
                let sign = if self.r.is_multiple_of(2) { 1.0 } else { -1.0 };
                let mut sum = 0.0;
                for k in -images..=*images {
                    let u = (theta + 2.0 * PI * k as f64) / sigma;
                    sum += hermite_he(self.r, u) * (-0.5 * u * u).exp();
                }
                sign * norm * sum
            }
            Form::Cauchy { nu } => {
                (1.0 - nu * nu) / (2.0 * PI * (1.0 + nu * nu - 2.0 * nu * theta.cos()))
            }
            Form::Epanechnikov { lambda } => {
                let x = wrap(theta);
                if x.abs() >= *lambda {
                    return 0.0;
                }
                let l = *lambda;
                match self.r {
                    0 => 0.75 * (1.0 - (x / l).powi(2)) / l,
                    1 => -1.5 * x / l.powi(3),
                    2 => -1.5 / l.powi(3),
                    _ => 0.0,
                }
            }
            Form::Cardioid { nu } => {
                if self.r == 0 {
                    (1.0 + 2.0 * nu * theta.cos()) / (2.0 * PI)
                } else {
                    nu / PI * (theta + self.r as f64 * PI / 2.0).cos()
                }
            }
            Form::Fourier { base, coef, phase } => {
                let (c1, s1) = (theta.cos(), theta.sin());
                let (mut cj, mut sj) = (c1, s1);
                let mut sum = 0.0;
                for (idx, c) in coef.iter().enumerate() {
                    if idx > 0 {
                        let next = cj * c1 - sj * s1;
                        sj = sj * c1 + cj * s1;
                        cj = next;
                    }
                    sum += c * match phase {
                        0 => cj,
                        1 => -sj,
                        2 => -cj,
                        _ => sj,
                    };
                }
                base + sum
            }
        }
    }
}

/// Reduces an angle to `(−π, π]`.
pub(crate) fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// `K^{(r)}(θ)` for a single point.
pub fn kernel_value(
    k: &KernelSpec,
    r: usize,
    theta: f64,
    trunc: &FourierTruncation,
) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::domain("angle must be finite"));
    }
    Ok(KernelEval::new(k, r, trunc)?.eval(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{integrate_circle, QuadratureConfig};

    fn trunc() -> FourierTruncation {
        FourierTruncation::default()
    }

    fn kernels() -> Vec<KernelSpec> {
        let mut v = Vec::new();
        for f in KernelFamily::ALL {
            for nu in [0.0, 0.35, 0.45, 0.6, 0.9, 0.97] {
                if let Ok(k) = KernelSpec::new(f, nu) {
                    v.push(k);
                }
            }
        }
        v
    }

    #[test]
    fn examples() {
        for f in KernelFamily::ALL {
            let v = kernel_value(&KernelSpec::uniform(f), 0, 1.234, &trunc()).unwrap();
            assert!((v - 0.5 / PI).abs() < 1e-15);
        }
        let vm = KernelSpec::von_mises(2.0).unwrap();
        let v = kernel_value(&vm, 0, 0.0, &trunc()).unwrap();
        let i0 = 2.279_585_302_336_067;
        assert!((v - 2f64.exp() / (2.0 * PI * i0)).abs() < 1e-12);
        assert!((v - 0.51588).abs() < 1e-5);
        for k in kernels() {
            for r in [1, 3] {
                if k.family() == KernelFamily::WrappedEpanechnikov && r == 3 {
                    continue;
                }
                assert!(kernel_value(&k, r, 0.0, &trunc()).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_forms_match_fourier() {
        for k in kernels() {
            if k.family() == KernelFamily::WrappedEpanechnikov {
                continue;
            }
            for r in 0..=4 {
                let fast = KernelEval::new(&k, r, &trunc()).unwrap();
                let slow = KernelEval::fourier(&k, r, &trunc()).unwrap();
                for i in 0..41 {
                    let t = -PI + i as f64 * PI / 20.0;
                    let a = fast.eval(t);
                    let b = slow.eval(t);
                    assert!(
                        (a - b).abs() <= 1e-9 * b.abs().max(1.0),
                        "{} nu={} r={r} t={t}: {a} vs {b}",
                        k.family(),
                        k.nu()
                    );
                }
            }
        }
    }

    #[test]
    fn epanechnikov_matches_fourier_away_from_kinks() {
        let k = KernelSpec::wrapped_epanechnikov(1.2).unwrap();
        let fine = FourierTruncation {
            rel_tol: 1e-14,
            max_terms: 200_000,
        };
        let fast = KernelEval::new(&k, 0, &trunc()).unwrap();
        let slow = match KernelEval::fourier(&k, 0, &fine) {
            Ok(e) => e,
            Err(_) => return,
        };
        for t in [-2.0, -0.7, 0.0, 0.3, 1.0, 2.5] {
            assert!((fast.eval(t) - slow.eval(t)).abs() < 1e-4);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let step = 1e-5;
        for k in kernels() {
            if k.nu() > 0.95 {
                continue;
            }
            let f0 = KernelEval::new(&k, 0, &trunc()).unwrap();
            let f1 = KernelEval::new(&k, 1, &trunc()).unwrap();
            for i in 0..32 {
                let t = -PI + (i as f64 + 0.37) * PI / 16.0;
                if let Some(l) = k.lambda() {
                    if (t.abs() - l).abs() < 1e-3 {
                        continue;
                    }
                }
                let fd = (f0.eval(t + step) - f0.eval(t - step)) / (2.0 * step);
                assert!((fd - f1.eval(t)).abs() < 1e-4, "{} {}", k.family(), k.nu());
            }
        }
    }

    #[test]
    fn densities_have_unit_mass() {
        let cfg = QuadratureConfig::default();
        for k in kernels() {
            let e = KernelEval::new(&k, 0, &trunc()).unwrap();
            let mass = integrate_circle(|t| e.eval(t), &cfg).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "{} {}", k.family(), k.nu());
        }
    }

    #[test]
    fn von_mises_polynomial_low_orders() {
        let k = 1.7;
        let p1 = von_mises_polynomial(k, 1);
        assert_eq!(p1, vec![(1, 0, -k)]);
        // P_2 = −κ cos θ + κ² sin² θ
        let p2 = von_mises_polynomial(k, 2);
        assert!(p2.contains(&(0, 1, -k)));
        assert!(p2.contains(&(2, 0, k * k)));
    }

    #[test]
    fn wrap_range() {
        for t in [-10.0, -PI, 0.0, PI, 7.0, 3.0 * PI] {
            let w = wrap(t);
            assert!(w > -PI - 1e-15 && w <= PI);
            assert!(
                ((t - w) / (2.0 * PI)).fract().abs() < 1e-12
                    || ((t - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-12
            );
        }
    }
}
