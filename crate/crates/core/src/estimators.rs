//! Kernel density and density-derivative estimators, the density-functional
//! estimator `ψ̂_s`, and integrated squared error.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{FourierTruncation, KernelEval, KernelSpec};
use crate::special::{integrate, integrate_circle, CompensatedSum, QuadratureConfig};

/// Default number of evaluation points on the circle.
pub const DEFAULT_GRID_SIZE: usize = 512;

/// Reduces an angle to `[−π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π
    if t >= PI {
        -PI
    } else {
        t
    }
}

/// Angles on the circle, each stored in `[−π, π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularSample {
    angles: Vec<f64>,
}

impl CircularSample {
    pub fn new(angles: impl IntoIterator<Item = f64>) -> Result<Self> {
        let angles: Vec<f64> = angles.into_iter().collect();
        if angles.is_empty() {
            return Err(Error::domain("a sample needs at least one angle"));
        }
        if let Some(bad) = angles.iter().find(|a| !a.is_finite()) {
            return Err(Error::domain(format!("angle {bad} is not finite")));
        }
        Ok(Self {
            angles: angles.into_iter().map(wrap_angle).collect(),
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// The sample rotated by `c`.
    pub fn rotated(&self, c: f64) -> Self {
        Self {
            angles: self.angles.iter().map(|a| wrap_angle(a + c)).collect(),
        }
    }

    /// Mean direction and mean resultant length.
    pub fn mean_direction(&self) -> (f64, f64) {
        let n = self.len() as f64;
        let (c, s) = self
            .angles
            .iter()
            .fold((0.0, 0.0), |(c, s), a| (c + a.cos(), s + a.sin()));
        (s.atan2(c), (c * c + s * s).sqrt() / n)
    }

    pub(crate) fn require(&self, min: usize, what: &str) -> Result<()> {
        if self.len() < min {
            return Err(Error::domain(format!(
                "{what} needs at least {min} observations, got {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Estimator values on a grid of angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub deriv_order: usize,
}

impl DensityGrid {
    /// `theta,value` rows with nine significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,value\n");
        for (t, v) in self.thetas.iter().zip(&self.values) {
            let _ = writeln!(out, "{t:.8e},{v:.8e}");
        }
        out
    }

    /// Periodic trapezoid rule over the grid, assuming equal spacing.
    pub fn trapezoid(&self) -> f64 {
        let m = self.values.len() as f64;
        self.values.iter().sum::<f64>() * 2.0 * PI / m
    }

    /// Periodic linear interpolation; `thetas` must be strictly increasing
    /// inside `[−π, π)`.
    pub fn interpolate(&self, theta: f64) -> f64 {
        let t = wrap_angle(theta);
        let m = self.thetas.len();
        let idx = self.thetas.partition_point(|&g| g <= t);
        let (lo, hi) = if idx == 0 || idx == m {
            (m - 1, 0)
        } else {
            (idx - 1, idx)
        };
        let (t0, mut t1) = (self.thetas[lo], self.thetas[hi]);
        let mut x = t;
        if hi <= lo {
            t1 += 2.0 * PI;
            if x < t0 {
                x += 2.0 * PI;
            }
        }
        let w = (x - t0) / (t1 - t0);
        self.values[lo] * (1.0 - w) + self.values[hi] * w
    }
}

/// `m` equispaced angles starting at `−π`.
pub fn equispaced_grid(m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| -PI + 2.0 * PI * i as f64 / m as f64)
        .collect()
}

/// `f̂^{(r)}_ν(θ) = n⁻¹ Σ_i K_ν^{(r)}(θ − Θ_i)` prepared for exact evaluation.
#[derive(Debug, Clone)]
pub struct KernelDensity {
    angles: Vec<f64>,
    cs: Vec<(f64, f64)>,
    kernel: KernelSpec,
    eval: KernelEval,
}

impl KernelDensity {
    pub fn new(
        sample: &CircularSample,
        kernel: &KernelSpec,
        r: usize,
        trunc: &FourierTruncation,
    ) -> Result<Self> {
        Ok(Self {
            angles: sample.angles.clone(),
            cs: sample.angles.iter().map(|a| (a.cos(), a.sin())).collect(),
            kernel: *kernel,
            eval: KernelEval::new(kernel, r, trunc)?,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn deriv_order(&self) -> usize {
        self.eval.order()
    }

    pub fn value(&self, theta: f64) -> f64 {
        let (ct, st) = (theta.cos(), theta.sin());
        let mut sum = 0.0;
        for (a, (c, s)) in self.angles.iter().zip(&self.cs) {
            // cos and sin of θ − Θ_i by the addition formulas
            sum += self
                .eval
                .eval_cs(theta - a, ct * c + st * s, st * c - ct * s);
        }
        sum / self.angles.len() as f64
    }

    pub fn on_grid(&self, thetas: &[f64]) -> DensityGrid {
        DensityGrid {
            thetas: thetas.to_vec(),
            values: thetas.iter().map(|&t| self.value(t)).collect(),
            deriv_order: self.deriv_order(),
        }
    }
}

/// Kernel density estimate on `thetas`.
pub fn kde(sample: &CircularSample, k: &KernelSpec, thetas: &[f64]) -> Result<DensityGrid> {
    kde_deriv(sample, k, 0, thetas)
}

/// `r`-th derivative of the kernel density estimate on `thetas`.
pub fn kde_deriv(
    sample: &CircularSample,
    k: &KernelSpec,
    r: usize,
    thetas: &[f64],
) -> Result<DensityGrid> {
    Ok(KernelDensity::new(sample, k, r, &FourierTruncation::default())?.on_grid(thetas))
}

/// An estimate of `ψ_s = ∫ f^{(s)} f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalEstimate {
    pub s: usize,
    pub value: f64,
    pub pilot: KernelSpec,
}

/// `ψ̂_{s;ρ} = n⁻² Σ_i Σ_j L_ρ^{(s)}(Θ_i − Θ_j)`, diagonal included.
pub fn psi_hat(
    sample: &CircularSample,
    pilot: &KernelSpec,
    s: usize,
    trunc: &FourierTruncation,
) -> Result<FunctionalEstimate> {
    sample.require(2, "a density functional estimate")?;
    if !s.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "functional order must be even, got {s}"
        )));
    }
    let eval = KernelEval::new(pilot, s, trunc)?;
    let a = sample.angles();
    let n = a.len();
    let cs: Vec<(f64, f64)> = a.iter().map(|t| (t.cos(), t.sin())).collect();
    // per-row partial sums keep the reduction order fixed
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (ci, si) = cs[i];
            let mut row = 0.0;
            for j in (i + 1)..n {
                let (cj, sj) = cs[j];
                row += eval.eval_cs(a[i] - a[j], ci * cj + si * sj, si * cj - ci * sj);
            }
            row
        })
        .collect();
    let mut total = CompensatedSum::new(n as f64 * eval.eval_cs(0.0, 1.0, 0.0));
    for r in rows {
        total.add(2.0 * r);
    }
    let value = total.value() / (n * n) as f64;
    if !value.is_finite() {
        return Err(Error::domain("density functional estimate is not finite"));
    }
    Ok(FunctionalEstimate {
        s,
        value,
        pilot: *pilot,
    })
}

/// `∫ (f̂ − f)²` with the estimator re-evaluated exactly.
pub fn ise_exact(
    est: &KernelDensity,
    truth: impl Fn(f64) -> f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if est.deriv_order() != 0 {
        return Err(Error::domain(
            "integrated squared error needs a density estimate",
        ));
    }
    integrate_circle(
        |t| {
            let d = est.value(t) - truth(t);
            d * d
        },
        cfg,
    )
}

/// `∫ (f̂ − f)²` for an estimate known only on a grid, linearly
/// interpolated between nodes; each panel is integrated separately.
pub fn ise(est: &DensityGrid, truth: impl Fn(f64) -> f64, cfg: &QuadratureConfig) -> Result<f64> {
    if est.deriv_order != 0 {
        return Err(Error::domain(
            "integrated squared error needs a density estimate",
        ));
    }
    if est.thetas.len() < 2 || est.thetas.len() != est.values.len() {
        return Err(Error::domain("grid needs at least two matching points"));
    }
    let m = est.thetas.len();
    let panel_cfg = QuadratureConfig {
        abs_tol: cfg.abs_tol / m as f64,
        ..*cfg
    };
    let mut total = CompensatedSum::default();
    for i in 0..m {
        let t0 = est.thetas[i];
        let t1 = if i + 1 < m {
            est.thetas[i + 1]
        } else {
            est.thetas[0] + 2.0 * PI
        };
        let (v0, v1) = (est.values[i], est.values[(i + 1) % m]);
        total.add(integrate(
            |t| {
                let w = (t - t0) / (t1 - t0);
                let d = v0 * (1.0 - w) + v1 * w - truth(t);
                d * d
            },
            t0,
            t1,
            &panel_cfg,
        )?);
    }
    // the panels cover [θ_0, θ_0 + 2π), which is the whole circle
    Ok(total.value())
}

/// Trigonometric moments `C_j = n⁻¹ Σ cos jΘ_i`, `S_j = n⁻¹ Σ sin jΘ_i`.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    cs: Vec<(f64, f64)>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl EmpiricalMoments {
    pub fn new(sample: &CircularSample, order: usize) -> Self {
        let mut m = Self {
            cs: sample.angles().iter().map(|a| (a.cos(), a.sin())).collect(),
            cos: Vec::new(),
            sin: Vec::new(),
        };
        m.ensure(order);
        m
    }

    /// Extends the moments through order `order`; index 0 holds order 1.
    pub fn ensure(&mut self, order: usize) {
        if self.cos.len() >= order {
            return;
        }
        let n = self.cs.len() as f64;
        let mut cos = vec![0.0; order];
        let mut sin = vec![0.0; order];
        for &(c1, s1) in &self.cs {
            let (mut c, mut s) = (c1, s1);
            for j in 0..order {
                if j > 0 {
                    // exact re-anchoring every 64 steps bounds rotation drift
                    if j % 64 == 0 {
                        let a = s1.atan2(c1) * (j + 1) as f64;
                        c = a.cos();
                        s = a.sin();
                    } else {
                        let next = c * c1 - s * s1;
                        s = s * c1 + c * s1;
                        c = next;
                    }
                }
                cos[j] += c;
                sin[j] += s;
            }
        }
        self.cos = cos.into_iter().map(|v| v / n).collect();
        self.sin = sin.into_iter().map(|v| v / n).collect();
    }

    pub fn len(&self) -> usize {
        self.cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty()
    }
}

/// Parseval form of the ISE for a kernel estimate against a density with
/// Fourier coefficients `truth[j-1] = (a_j, b_j)`:
/// `ISE = π⁻¹ Σ_j [(α_j C_j − a_j)² + (α_j S_j − b_j)²]`.
///
/// `alphas[j-1] = α_j`. Both coefficient lists are implicitly zero beyond
/// their length; `moments` is extended as needed.
pub fn ise_fourier(moments: &mut EmpiricalMoments, alphas: &[f64], truth: &[(f64, f64)]) -> f64 {
    let order = alphas.len().max(truth.len());
    moments.ensure(order);
    let mut sum = CompensatedSum::default();
    for j in 0..order {
        let a = alphas.get(j).copied().unwrap_or(0.0);
        let (ta, tb) = truth.get(j).copied().unwrap_or((0.0, 0.0));
        let dc = a * moments.cos[j] - ta;
        let ds = a * moments.sin[j] - tb;
        sum.add(dc * dc + ds * ds);
    }
    sum.value() / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{alpha_coeff, KernelFamily};
    use crate::special::bessel_ratio_table;

    fn sample() -> CircularSample {
        CircularSample::new([0.1, 0.5, -1.2, 2.9, -3.0, 1.7, 0.3, -0.4]).unwrap()
    }

    fn trunc() -> FourierTruncation {
        FourierTruncation::default()
    }

    #[test]
    fn wrapping() {
        let s = CircularSample::new([PI, 3.0 * PI, -PI, 7.0]).unwrap();
        for a in s.angles() {
            assert!(*a >= -PI && *a < PI);
        }
        assert_eq!(s.angles()[0], -PI);
        assert!(CircularSample::new(Vec::<f64>::new()).is_err());
        assert!(CircularSample::new([f64::NAN]).is_err());
    }

    #[test]
    fn uniform_kernel_gives_constant() {
        let g = kde(
            &sample(),
            &KernelSpec::uniform(KernelFamily::VonMises),
            &equispaced_grid(16),
        )
        .unwrap();
        assert!(g.values.iter().all(|v| (v - 0.5 / PI).abs() < 1e-15));
        let d = kde_deriv(
            &sample(),
            &KernelSpec::uniform(KernelFamily::VonMises),
            2,
            &equispaced_grid(16),
        )
        .unwrap();
        assert!(d.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_observation_reproduces_kernel() {
        let s = CircularSample::new([0.0]).unwrap();
        let k = KernelSpec::von_mises(2.0).unwrap();
        let g = kde(&s, &k, &[0.0, 1.0]).unwrap();
        assert!((g.values[0] - 0.51588).abs() < 1e-5);
        let kv = crate::kernels::kernel_value(&k, 0, 1.0, &trunc()).unwrap();
        assert!((g.values[1] - kv).abs() < 1e-15);
    }

    #[test]
    fn estimates_integrate_correctly() {
        let cfg = QuadratureConfig::default();
        for f in [
            KernelFamily::VonMises,
            KernelFamily::WrappedNormal,
            KernelFamily::WrappedCauchy,
        ] {
            let k = KernelSpec::new(f, 0.8).unwrap();
            let d0 = KernelDensity::new(&sample(), &k, 0, &trunc()).unwrap();
            let d1 = KernelDensity::new(&sample(), &k, 1, &trunc()).unwrap();
            assert!((integrate_circle(|t| d0.value(t), &cfg).unwrap() - 1.0).abs() < 1e-6);
            assert!(integrate_circle(|t| d1.value(t), &cfg).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let k = KernelSpec::von_mises(6.0).unwrap();
        let d0 = KernelDensity::new(&sample(), &k, 0, &trunc()).unwrap();
        let d1 = KernelDensity::new(&sample(), &k, 1, &trunc()).unwrap();
        let h = 1e-5;
        for t in equispaced_grid(40) {
            let fd = (d0.value(t + h) - d0.value(t - h)) / (2.0 * h);
            assert!((fd - d1.value(t)).abs() < 1e-4);
        }
    }

    #[test]
    fn psi_examples() {
        let u = KernelSpec::uniform(KernelFamily::VonMises);
        let p = psi_hat(&sample(), &u, 0, &trunc()).unwrap();
        assert!((p.value - 0.5 / PI).abs() < 1e-15);

        let s = CircularSample::new([0.0, PI / 2.0]).unwrap();
        let k = KernelSpec::von_mises(2.0).unwrap();
        let p = psi_hat(&s, &k, 0, &trunc()).unwrap();
        let i0 = 2.279_585_302_336_067;
        let k0 = 2f64.exp() / (2.0 * PI * i0);
        let kh = 1.0 / (2.0 * PI * i0);
        assert!((p.value - (2.0 * k0 + 2.0 * kh) / 4.0).abs() < 1e-12);
        assert!((p.value - 0.29285).abs() < 1e-5);

        assert!(psi_hat(&CircularSample::new([0.0]).unwrap(), &k, 0, &trunc()).is_err());
        assert!(psi_hat(&s, &k, 1, &trunc()).is_err());
    }

    #[test]
    fn psi_equals_mean_of_derivative_estimate() {
        for s in [0usize, 2, 4] {
            let k = KernelSpec::von_mises(3.0).unwrap();
            let p = psi_hat(&sample(), &k, s, &trunc()).unwrap().value;
            let d = KernelDensity::new(&sample(), &k, s, &trunc()).unwrap();
            let mean: f64 =
                sample().angles().iter().map(|&a| d.value(a)).sum::<f64>() / sample().len() as f64;
            assert!((p - mean).abs() <= 1e-12 * p.abs().max(1e-300));
        }
    }

    #[test]
    fn ise_examples() {
        let cfg = QuadratureConfig::default();
        let u = KernelSpec::uniform(KernelFamily::VonMises);
        let est = KernelDensity::new(&sample(), &u, 0, &trunc()).unwrap();
        assert!(ise_exact(&est, |_| 0.5 / PI, &cfg).unwrap() < 1e-20);

        let i0_1 = 1.266_065_877_752_008_4;
        let i0_2 = 2.279_585_302_336_067;
        let vm1 = |t: f64| t.cos().exp() / (2.0 * PI * i0_1);
        let expect = i0_2 / (2.0 * PI * i0_1 * i0_1) - 0.5 / PI;
        let v = ise_exact(&est, vm1, &cfg).unwrap();
        assert!((v - expect).abs() < 1e-8);
        assert!((v - 0.067186).abs() < 1e-5);

        let grid = est.on_grid(&equispaced_grid(64));
        assert!((ise(&grid, vm1, &cfg).unwrap() - expect).abs() < 1e-8);
    }

    #[test]
    fn fourier_ise_matches_quadrature() {
        let cfg = QuadratureConfig::with_tol(1e-11);
        let kappa = 2.0;
        let i0 = 2.279_585_302_336_067;
        let truth = |t: f64| (kappa * (t - 0.3).cos()).exp() / (2.0 * PI * i0);
        let tab = bessel_ratio_table(kappa, 80).unwrap();
        let coeffs: Vec<(f64, f64)> = (1..=80)
            .map(|j| {
                let r = tab.ratio(j);
                (r * (0.3 * j as f64).cos(), r * (0.3 * j as f64).sin())
            })
            .collect();
        let mut m = EmpiricalMoments::new(&sample(), 10);
        for nu in [0.3, 0.7, 0.95] {
            let k = KernelSpec::new(KernelFamily::VonMises, nu).unwrap();
            let alphas: Vec<f64> = (1..=400).map(|j| alpha_coeff(&k, j).unwrap()).collect();
            let est = KernelDensity::new(&sample(), &k, 0, &trunc()).unwrap();
            let q = ise_exact(&est, truth, &cfg).unwrap();
            let f = ise_fourier(&mut m, &alphas, &coeffs);
            assert!((q - f).abs() < 1e-9, "nu={nu} {q} {f}");
        }
    }

    #[test]
    fn interpolation_is_periodic() {
        let g = DensityGrid {
            thetas: equispaced_grid(4),
            values: vec![0.0, 1.0, 2.0, 3.0],
            deriv_order: 0,
        };
        assert!((g.interpolate(-PI) - 0.0).abs() < 1e-15);
        assert!((g.interpolate(-0.75 * PI) - 0.5).abs() < 1e-12);
        // between the last node (π/2) and the first (−π + 2π)
        assert!((g.interpolate(3.0 * PI / 4.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn moments_match_direct_sums() {
        let s = sample();
        let m = EmpiricalMoments::new(&s, 200);
        for j in [1usize, 2, 63, 64, 65, 130, 200] {
            let c: f64 =
                s.angles().iter().map(|a| (j as f64 * a).cos()).sum::<f64>() / s.len() as f64;
            assert!((m.cos[j - 1] - c).abs() < 1e-12, "j={j}");
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = kde(
            &sample(),
            &KernelSpec::von_mises(1.0).unwrap(),
            &equispaced_grid(8),
        )
        .unwrap();
        let csv = g.to_csv();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("theta,value\n"));
        assert!((g.trapezoid() - 1.0).abs() < 1e-3);
    }
}
