//! Von Mises mixtures: maximum-likelihood fitting with a shared
//! concentration, AIC selection of the number of components, Fourier
//! coefficients and exact density functionals.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{wrap_angle, CircularSample};
use crate::kernels::{FourierTruncation, KAPPA_MAX};
use crate::special::{
    bessel_i0_scaled, bessel_ratio_table, inv_bessel_ratio, ln_bessel_i0, mean_resultant_length,
    CompensatedSum,
};

const RESTARTS: u64 = 10;
const MAX_ITER: usize = 500;
const REL_TOL: f64 = 1e-8;

/// `Σ_m w_m vM(μ_m, κ)` with one concentration shared by all components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    #[serde(rename = "M")]
    pub m: usize,
    pub mus: Vec<f64>,
    pub kappa: f64,
    pub weights: Vec<f64>,
}

impl MixtureModel {
    pub fn new(mus: Vec<f64>, kappa: f64, weights: Vec<f64>) -> Result<Self> {
        if mus.is_empty() || mus.len() != weights.len() {
            return Err(Error::domain("need matching, nonempty means and weights"));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::domain(format!("invalid concentration {kappa}")));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-10
        {
            return Err(Error::domain("weights must be nonnegative and sum to one"));
        }
        Ok(Self {
            m: mus.len(),
            mus: mus.into_iter().map(wrap_angle).collect(),
            kappa,
            weights,
        })
    }

    pub fn uniform() -> Self {
        Self {
            m: 1,
            mus: vec![0.0],
            kappa: 0.0,
            weights: vec![1.0],
        }
    }

    pub fn components(&self) -> ComponentMixture {
        ComponentMixture {
            components: self
                .mus
                .iter()
                .zip(&self.weights)
                .map(|(&mu, &w)| VonMisesComponent {
                    weight: w,
                    mu,
                    kappa: self.kappa,
                })
                .collect(),
        }
    }

    pub fn density(&self, theta: f64) -> f64 {
        self.components().density(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesComponent {
    pub weight: f64,
    pub mu: f64,
    pub kappa: f64,
}

/// A von Mises mixture whose components may have different concentrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMixture {
    pub components: Vec<VonMisesComponent>,
}

impl ComponentMixture {
    pub fn density(&self, theta: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                c.weight * (c.kappa * ((theta - c.mu).cos() - 1.0)).exp()
                    / (2.0 * PI * bessel_i0_scaled(c.kappa))
            })
            .sum()
    }

    /// `(a_j, b_j)`, `j = 1..=order`, with
    /// `f(θ) = (2π)⁻¹ (1 + 2 Σ_j (a_j cos jθ + b_j sin jθ))`.
    pub fn fourier(&self, order: usize) -> Result<Vec<(f64, f64)>> {
        let mut out = vec![(0.0, 0.0); order];
        for c in &self.components {
            if c.kappa == 0.0 || order == 0 {
                continue;
            }
            let tab = bessel_ratio_table(c.kappa, order)?;
            for (idx, slot) in out.iter_mut().enumerate() {
                let j = (idx + 1) as f64;
                let r = c.weight * tab.ratio(idx + 1);
                slot.0 += r * (j * c.mu).cos();
                slot.1 += r * (j * c.mu).sin();
            }
        }
        Ok(out)
    }

    /// Fourier order beyond which `j^s (a_j² + b_j²)` is negligible.
    pub fn fourier_order(&self, s: usize) -> usize {
        let kmax = self.components.iter().fold(0.0f64, |a, c| a.max(c.kappa));
        32 + (8.0 * kmax.sqrt()) as usize + 2 * s
    }

    /// Draws `n` angles.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = self.components.last().expect("nonempty mixture");
                for c in &self.components {
                    acc += c.weight;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                sample_von_mises(rng, chosen.mu, chosen.kappa)
            })
            .collect()
    }
}

/// Best–Fisher rejection sampler for `vM(μ, κ)`, returned in `[−π, π)`.
pub fn sample_von_mises<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return wrap_angle(-PI + 2.0 * PI * rng.gen::<f64>());
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let angle = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 < 0.5 { -angle } else { angle };
            return wrap_angle(mu + signed);
        }
    }
}

/// `f^{(r)}(θ)` of a density with Fourier coefficients `coeffs[j-1] = (a_j, b_j)`.
pub fn fourier_density_deriv(coeffs: &[(f64, f64)], theta: f64, r: usize) -> f64 {
    let mut sum = if r == 0 { 0.5 / PI } else { 0.0 };
    let shift = r as f64 * PI / 2.0;
    for (idx, (a, b)) in coeffs.iter().enumerate() {
        let j = (idx + 1) as f64;
        let w = j.powi(r as i32) / PI;
        sum += w * (a * (j * theta + shift).cos() + b * (j * theta + shift).sin());
    }
    sum
}

/// `(a_j, b_j)` of a shared-concentration mixture for `j = 1..=order`.
pub fn mixture_fourier(model: &MixtureModel, order: usize) -> Result<Vec<(f64, f64)>> {
    model.components().fourier(order)
}

/// `ψ_s = ∫ f^{(s)} f` for a density with the given Fourier coefficients:
/// `[s = 0]/(2π) + π⁻¹ (−1)^{s/2} Σ_j j^s (a_j² + b_j²)`.
pub fn psi_from_coefficients(coeffs: &[(f64, f64)], s: usize) -> Result<f64> {
    if !s.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "functional order must be even, got {s}"
        )));
    }
    let mut sum = CompensatedSum::default();
    for (idx, (a, b)) in coeffs.iter().enumerate() {
        sum.add(((idx + 1) as f64).powi(s as i32) * (a * a + b * b));
    }
    let sign = if (s / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let base = if s == 0 { 0.5 / PI } else { 0.0 };
    Ok(base + sign * sum.value() / PI)
}

/// Exact `ψ_s` of a mixture.
pub fn psi_from_mixture(
    mix: &ComponentMixture,
    s: usize,
    trunc: &FourierTruncation,
) -> Result<f64> {
    if !s.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "functional order must be even, got {s}"
        )));
    }
    let mut order = mix.fourier_order(s);
    while order <= trunc.max_terms {
        let coeffs = mix.fourier(order)?;
        let total = psi_from_coefficients(&coeffs, s)?;
        // the last three terms must be negligible against the sum
        let tail: f64 = coeffs[order - 3..]
            .iter()
            .enumerate()
            .map(|(i, (a, b))| ((order - 2 + i) as f64).powi(s as i32) * (a * a + b * b))
            .fold(0.0, f64::max);
        if tail <= trunc.rel_tol * (total.abs() * PI).max(f64::MIN_POSITIVE) {
            return Ok(total);
        }
        order *= 2;
    }
    Err(Error::ToleranceNotMet {
        what: "mixture functional series",
        estimate: psi_from_coefficients(&mix.fourier(trunc.max_terms)?, s)?,
        error: f64::NAN,
    })
}

/// Exact `ψ_s` of a shared-concentration mixture.
pub fn psi_from_model(model: &MixtureModel, s: usize) -> Result<f64> {
    psi_from_mixture(&model.components(), s, &FourierTruncation::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: MixtureModel,
    pub loglik: f64,
    pub aic: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every EM iteration of the winning restart.
    #[serde(skip)]
    pub history: Vec<f64>,
}

fn aic(loglik: f64, m: usize) -> f64 {
    -2.0 * loglik + 2.0 * (2 * m) as f64
}

fn log_norm(kappa: f64) -> f64 {
    (2.0 * PI).ln() + ln_bessel_i0(kappa)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn fit_single(sample: &CircularSample) -> Result<FitReport> {
    let (mu, rbar) = sample.mean_direction();
    if rbar >= mean_resultant_length(KAPPA_MAX) {
        return Err(Error::FitFailed("sample is concentrated at a point".into()));
    }
    let kappa = inv_bessel_ratio(rbar)?;
    let n = sample.len() as f64;
    let loglik = kappa * rbar * n - n * log_norm(kappa);
    let model = MixtureModel {
        m: 1,
        mus: vec![mu],
        kappa,
        weights: vec![1.0],
    };
    Ok(FitReport {
        model,
        loglik,
        aic: aic(loglik, 1),
        iterations: 1,
        converged: true,
        history: vec![loglik],
    })
}

struct Restart {
    mus: Vec<f64>,
    weights: Vec<f64>,
    kappa: f64,
}

fn em_run(angles: &[f64], init: Restart) -> Option<FitReport> {
    let n = angles.len();
    let m = init.mus.len();
    let Restart {
        mut mus,
        mut weights,
        mut kappa,
    } = init;
    let cs: Vec<(f64, f64)> = angles.iter().map(|a| (a.cos(), a.sin())).collect();
    let mut resp = vec![0.0; n * m];
    let mut history = Vec::new();
    let mut logits = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..MAX_ITER {
        iterations += 1;
        // E step; the shared normalizer cancels in the responsibilities
        let mut ll = CompensatedSum::default();
        let mcs: Vec<(f64, f64)> = mus.iter().map(|u| (u.cos(), u.sin())).collect();
        for (i, &(c, s)) in cs.iter().enumerate() {
            for k in 0..m {
                let cosd = c * mcs[k].0 + s * mcs[k].1;
                logits[k] = weights[k].ln() + kappa * cosd;
            }
            let lse = log_sum_exp(&logits);
            ll.add(lse);
            for k in 0..m {
                resp[i * m + k] = (logits[k] - lse).exp();
            }
        }
        let loglik = ll.value() - n as f64 * log_norm(kappa);
        if !loglik.is_finite() {
            return None;
        }
        if let Some(&prev) = history.last() {
            history.push(loglik);
            if (loglik - prev).abs() <= REL_TOL * loglik.abs().max(1.0) {
                converged = true;
                break;
            }
        } else {
            history.push(loglik);
        }
        // M step
        let mut resultant = 0.0;
        for k in 0..m {
            let (mut sw, mut sc, mut ss) = (0.0, 0.0, 0.0);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let g = resp[i * m + k];
                sw += g;
                sc += g * c;
                ss += g * s;
            }
            weights[k] = sw / n as f64;
            if weights[k] < 1e-10 {
                return None;
            }
            mus[k] = ss.atan2(sc);
            resultant += (sc * sc + ss * ss).sqrt();
        }
        let rbar = (resultant / n as f64).min(1.0);
        if rbar >= mean_resultant_length(KAPPA_MAX) {
            return None;
        }
        kappa = inv_bessel_ratio(rbar).ok()?;
    }
    // report the likelihood of the final parameters
    let loglik = *history.last()?;
    let model = MixtureModel {
        m,
        mus: mus.into_iter().map(wrap_angle).collect(),
        kappa,
        weights,
    };
    Some(FitReport {
        model,
        loglik,
        aic: aic(loglik, m),
        iterations,
        converged,
        history,
    })
}

fn initial_values(sample: &CircularSample, m: usize, restart: u64, seed: u64) -> Restart {
    let (center, _) = sample.mean_direction();
    let mut rel: Vec<f64> = sample
        .angles()
        .iter()
        .map(|a| wrap_angle(a - center))
        .collect();
    rel.sort_by(f64::total_cmp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    let n = rel.len();
    let mus = (0..m)
        .map(|k| {
            let q = rel[((k as f64 + 0.5) / m as f64 * n as f64) as usize % n];
            let jitter = if restart == 0 {
                0.0
            } else {
                (rng.gen::<f64>() - 0.5) * 2.0 * PI / m as f64
            };
            wrap_angle(center + q + jitter)
        })
        .collect();
    Restart {
        mus,
        weights: vec![1.0 / m as f64; m],
        kappa: 2.0,
    }
}

/// Maximum-likelihood fit of an `m`-component shared-concentration mixture
/// by EM, best of ten seeded restarts.
pub fn fit_em(sample: &CircularSample, m: usize, seed: u64) -> Result<FitReport> {
    if m == 0 {
        return Err(Error::domain("a mixture needs at least one component"));
    }
    sample.require(2 * m, "a mixture fit")?;
    if m == 1 {
        return fit_single(sample);
    }
    let mut best: Option<FitReport> = None;
    for restart in 0..RESTARTS {
        let init = initial_values(sample, m, restart, seed);
        if let Some(fit) = em_run(sample.angles(), init) {
            if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
                best = Some(fit);
            }
        }
    }
    best.ok_or_else(|| {
        Error::FitFailed(format!(
            "every restart of the {m}-component fit degenerated"
        ))
    })
}

/// Fits `M = 1..=m_max` and keeps the smallest AIC; ties go to fewer
/// components.
pub fn select_aic(sample: &CircularSample, m_max: usize, seed: u64) -> Result<FitReport> {
    if m_max == 0 {
        return Err(Error::domain("m_max must be at least 1"));
    }
    let mut best: Option<FitReport> = None;
    let mut last_err = None;
    for m in 1..=m_max {
        match fit_em(sample, m, seed) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.aic < b.aic) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::FitFailed("no fit".into())))
}
