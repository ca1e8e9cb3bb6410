//! Circular kernel families.
//!
//! Every kernel is a symmetric circular density with Fourier series
//! `K_ν(θ) = (2π)⁻¹ (1 + 2 Σ_j α_j(ν) cos jθ)`. The smoothing parameter is the
//! mean resultant length `ν = α_1`; `ν = 0` is the uniform kernel for every
//! family.

mod eval;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    bessel_ratio_table, find_root, inv_bessel_ratio, mean_resultant_length, polylog, CompensatedSum,
};

pub use eval::{kernel_value, KernelEval};

/// `h_K(0)`: the bandwidth functional of the uniform kernel.
pub const H_UNIFORM: f64 = PI * PI / 3.0;

/// Smallest mean resultant length reachable by the wrapped Epanechnikov
/// kernel (half-support `λ = π`).
pub const WE_NU_MIN: f64 = 3.0 / (PI * PI);

/// Concentrations above this are treated as numerically degenerate.
pub const KAPPA_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    VonMises,
    WrappedNormal,
    WrappedCauchy,
    WrappedEpanechnikov,
    Cardioid,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::VonMises,
        KernelFamily::WrappedNormal,
        KernelFamily::WrappedCauchy,
        KernelFamily::WrappedEpanechnikov,
        KernelFamily::Cardioid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::VonMises => "vonmises",
            KernelFamily::WrappedNormal => "wrappednormal",
            KernelFamily::WrappedCauchy => "wrappedcauchy",
            KernelFamily::WrappedEpanechnikov => "wrappedepanechnikov",
            KernelFamily::Cardioid => "cardioid",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL
            .into_iter()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::domain(format!("unknown kernel family '{s}'")))
    }
}

/// A kernel family together with its smoothing parameter.
///
/// `nu` is always the mean resultant length. Von Mises kernels also carry
/// `κ` with `I_1(κ)/I_0(κ) = ν`; wrapped Epanechnikov kernels carry the
/// half-support `λ ∈ (0, π]`. Both are `None` exactly when `ν = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec {
    family: KernelFamily,
    nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
}

impl KernelSpec {
    /// Builds a kernel from its mean resultant length.
    pub fn new(family: KernelFamily, nu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&nu) {
            return Err(Error::domain(format!(
                "mean resultant length must lie in [0, 1), got {nu}"
            )));
        }
        if nu == 0.0 {
            return Ok(Self::uniform(family));
        }
        match family {
            KernelFamily::VonMises => Ok(Self {
                family,
                nu,
                kappa: Some(inv_bessel_ratio(nu)?),
                lambda: None,
            }),
            KernelFamily::WrappedEpanechnikov => {
                if nu < WE_NU_MIN {
                    return Err(Error::domain(format!(
                        "wrapped Epanechnikov needs nu >= 3/pi^2 or nu = 0, got {nu}"
                    )));
                }
                let lambda = we_lambda_from_nu(nu)?;
                Ok(Self {
                    family,
                    nu,
                    kappa: None,
                    lambda: Some(lambda),
                })
            }
            KernelFamily::Cardioid if nu >= 0.5 => {
                Err(Error::domain(format!("cardioid needs nu < 1/2, got {nu}")))
            }
            _ => Ok(Self {
                family,
                nu,
                kappa: None,
                lambda: None,
            }),
        }
    }

    /// The uniform kernel, tagged with `family`.
    pub fn uniform(family: KernelFamily) -> Self {
        Self {
            family,
            nu: 0.0,
            kappa: None,
            lambda: None,
        }
    }

    pub fn von_mises(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::domain(format!("invalid concentration {kappa}")));
        }
        if kappa == 0.0 {
            return Ok(Self::uniform(KernelFamily::VonMises));
        }
        let nu = mean_resultant_length(kappa);
        if nu >= 1.0 {
            return Err(Error::domain(format!(
                "concentration {kappa} is indistinguishable from a point mass"
            )));
        }
        Ok(Self {
            family: KernelFamily::VonMises,
            nu,
            kappa: Some(kappa),
            lambda: None,
        })
    }

    pub fn wrapped_epanechnikov(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= PI) {
            return Err(Error::domain(format!(
                "half-support must lie in (0, pi], got {lambda}"
            )));
        }
        let nu = we_alpha(lambda);
        if nu >= 1.0 {
            return Err(Error::domain(format!("half-support {lambda} is too small")));
        }
        Ok(Self {
            family: KernelFamily::WrappedEpanechnikov,
            nu,
            kappa: None,
            lambda: Some(lambda),
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn is_uniform(&self) -> bool {
        self.nu == 0.0
    }

    /// `κ` for von Mises, `λ` for wrapped Epanechnikov.
    pub fn native_param(&self) -> Option<f64> {
        self.kappa.or(self.lambda)
    }

    /// Wrapped normal scale `σ` with `ν = exp(-σ²/2)`.
    pub(crate) fn wn_sigma(&self) -> f64 {
        (-2.0 * self.nu.ln()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierTruncation {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for FourierTruncation {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

/// `3(sin x − x cos x)/x³`, the Fourier coefficient of the unit-support
/// Epanechnikov kernel at frequency `x`.
pub(crate) fn we_alpha(x: f64) -> f64 {
    let x = x.abs();
    if x < 0.1 {
        let x2 = x * x;
        1.0 - x2 / 10.0 + x2 * x2 / 280.0 - x2 * x2 * x2 / 15120.0 + x2 * x2 * x2 * x2 / 1_330_560.0
    } else {
        3.0 * (x.sin() - x * x.cos()) / (x * x * x)
    }
}

fn we_lambda_from_nu(nu: f64) -> Result<f64> {
    if nu <= WE_NU_MIN {
        return Ok(PI);
    }
    find_root(|l| we_alpha(l) - nu, 0.0, PI, 1e-15)
}

/// Lazily extended table of `α_j`, `j ≥ 1`.
pub(crate) struct Alphas {
    kernel: KernelSpec,
    table: Vec<f64>,
}

impl Alphas {
    pub(crate) fn new(kernel: &KernelSpec) -> Self {
        Self {
            kernel: *kernel,
            table: Vec::new(),
        }
    }

    pub(crate) fn get(&mut self, j: usize) -> Result<f64> {
        let k = &self.kernel;
        if k.is_uniform() {
            return Ok(0.0);
        }
        Ok(match k.family {
            KernelFamily::VonMises => {
                if j >= self.table.len() {
                    let kappa = k.kappa.expect("von Mises carries kappa");
                    let guess = 32 + (8.0 * kappa.sqrt()) as usize;
                    let order = guess.max(2 * self.table.len()).max(j + 1);
                    self.table = bessel_ratio_table(kappa, order)?.ratios;
                }
                self.table[j]
            }
            KernelFamily::WrappedNormal => ((j * j) as f64 * k.nu.ln()).exp(),
            KernelFamily::WrappedCauchy => k.nu.powi(j as i32),
            KernelFamily::Cardioid => {
                if j == 1 {
                    k.nu
                } else {
                    0.0
                }
            }
            KernelFamily::WrappedEpanechnikov => {
                we_alpha(j as f64 * k.lambda.expect("wrapped Epanechnikov carries lambda"))
            }
        })
    }
}

/// `α_{K,j}(ν)`.
pub fn alpha_coeff(k: &KernelSpec, j: usize) -> Result<f64> {
    if j == 0 {
        return Ok(1.0);
    }
    if k.family == KernelFamily::VonMises && !k.is_uniform() {
        return Ok(bessel_ratio_table(k.kappa.expect("von Mises carries kappa"), j)?.ratio(j));
    }
    Alphas::new(k).get(j)
}

/// `α_1, α_2, …` up to the point where three consecutive coefficients fall
/// below `abs_tol` in magnitude.
pub fn alpha_table(k: &KernelSpec, abs_tol: f64, trunc: &FourierTruncation) -> Result<Vec<f64>> {
    let mut alphas = Alphas::new(k);
    let mut out = Vec::new();
    if k.is_uniform() {
        return Ok(out);
    }
    let mut quiet = 0;
    for j in 1..=trunc.max_terms {
        let a = alphas.get(j)?;
        out.push(a);
        quiet = if a.abs() <= abs_tol { quiet + 1 } else { 0 };
        if quiet >= 3 {
            return Ok(out);
        }
    }
    Err(Error::ToleranceNotMet {
        what: "kernel coefficient table",
        estimate: out.len() as f64,
        error: out.last().map_or(0.0, |a| a.abs()),
    })
}

/// `base + Σ_{j≥1} term(j, α_j)`, stopped after three consecutive terms
/// below `rel_tol` times the running absolute scale.
pub(crate) fn fourier_series(
    k: &KernelSpec,
    trunc: &FourierTruncation,
    base: f64,
    what: &'static str,
    mut term: impl FnMut(usize, f64) -> f64,
) -> Result<f64> {
    let mut alphas = Alphas::new(k);
    let mut sum = CompensatedSum::new(base);
    let mut scale = base.abs();
    let mut quiet = 0;
    let mut last = f64::INFINITY;
    for j in 1..=trunc.max_terms {
        let t = term(j, alphas.get(j)?);
        if !t.is_finite() {
            break;
        }
        sum.add(t);
        scale += t.abs();
        last = t.abs();
        if last <= trunc.rel_tol * scale {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum.value());
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::ToleranceNotMet {
        what,
        estimate: sum.value(),
        error: last,
    })
}

/// Bandwidth functional `h_K(ν) = π²/3 + 4 Σ_j (−1)^j α_j / j²`, the circular
/// second moment of the kernel.
pub fn bandwidth_h(k: &KernelSpec, trunc: &FourierTruncation) -> Result<f64> {
    if k.is_uniform() {
        return Ok(H_UNIFORM);
    }
    match k.family {
        KernelFamily::WrappedCauchy => Ok(H_UNIFORM + 4.0 * polylog(2, -k.nu)?),
        KernelFamily::Cardioid => Ok(H_UNIFORM - 4.0 * k.nu),
        KernelFamily::WrappedEpanechnikov => {
            let l = k.lambda.expect("wrapped Epanechnikov carries lambda");
            Ok(l * l / 5.0)
        }
        KernelFamily::WrappedNormal if k.wn_sigma() < 0.3 => Ok(k.wn_sigma().powi(2)),
        _ => fourier_series(k, trunc, H_UNIFORM, "bandwidth series", |j, a| {
            let jf = j as f64;
            let sign = if j % 2 == 1 { -4.0 } else { 4.0 };
            sign * a / (jf * jf)
        }),
    }
}

/// `(1 − α_2)/2`, the large-concentration approximation of `h_K(ν)`.
pub fn approx_h(k: &KernelSpec) -> Result<f64> {
    Ok(0.5 * (1.0 - alpha_coeff(k, 2)?))
}

fn roughness_sign(r: usize, t: u32) -> f64 {
    if t == 1 && matches!(r % 4, 1 | 2) {
        -1.0
    } else {
        1.0
    }
}

/// Roughness functional `R_{K;r,t}(ν)`.
///
/// `R_{K;r,2} = ∫ (K^{(r)})²` and, for even `r`, `R_{K;r,1} = K^{(r)}(0)`.
pub fn roughness_r(k: &KernelSpec, r: usize, t: u32, trunc: &FourierTruncation) -> Result<f64> {
    if !(t == 1 || t == 2) {
        return Err(Error::domain(format!(
            "roughness power must be 1 or 2, got {t}"
        )));
    }
    let sign = roughness_sign(r, t);
    if k.is_uniform() {
        return Ok(if r == 0 { 1.0 / (2.0 * PI) } else { 0.0 });
    }
    let nu = k.nu;
    let ti = t as i32;
    match k.family {
        KernelFamily::WrappedCauchy => {
            let x = nu.powi(ti);
            return Ok(if r == 0 {
                (1.0 + 2.0 * polylog(0, x)?) / (2.0 * PI)
            } else {
                sign * polylog(-(r as i32) * ti, x)? / PI
            });
        }
        KernelFamily::Cardioid => {
            return Ok(if r == 0 {
                (1.0 + 2.0 * nu.powi(ti)) / (2.0 * PI)
            } else {
                sign * nu.powi(ti) / PI
            });
        }
        KernelFamily::WrappedEpanechnikov => {
            let l = k.lambda.expect("wrapped Epanechnikov carries lambda");
            match (r, t) {
                (0, 1) => return Ok(3.0 / (4.0 * l)),
                (0, 2) => return Ok(3.0 / (5.0 * l)),
                (1, 2) => return Ok(3.0 / (2.0 * l.powi(3))),
                (2, 1) => return Ok(-3.0 / (2.0 * l.powi(3))),
                (_, 2) => {
                    return Err(Error::Capability(format!(
                        "wrapped Epanechnikov derivative of order {r} is not square integrable"
                    )))
                }
                _ => {}
            }
        }
        KernelFamily::WrappedNormal if k.wn_sigma() < 0.3 && (t == 2 || r.is_multiple_of(2)) => {
            // wrapping corrections are below exp(-π²/(2σ²)) and negligible here
            let sigma = k.wn_sigma();
            let q = q_constants(KernelFamily::WrappedNormal, r)?;
            return Ok(if t == 2 {
                q.q2.expect("normal Q2 always exists") * sigma.powi(-(2 * r as i32 + 1))
            } else {
                q.q1.expect("normal Q1 exists for even r") * sigma.powi(-(r as i32 + 1))
            });
        }
        _ => {}
    }
    let power = (t as usize * r) as i32;
    if r == 0 {
        fourier_series(k, trunc, 1.0 / (2.0 * PI), "roughness series", |_, a| {
            a.powi(ti) / PI
        })
    } else {
        let s = fourier_series(k, trunc, 0.0, "roughness series", |j, a| {
            (j as f64).powi(power) * a.powi(ti)
        })?;
        Ok(sign * s / PI)
    }
}

/// The kernel constants in the asymptotic expansions of the roughness:
/// `R_{K;r,1} ≈ Q1 h^{-(r+1)/2}` (even `r`) and `R_{K;r,2} ≈ Q2 h^{-(2r+1)/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QConstants {
    pub q1: Option<f64>,
    pub q2: Option<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `Q_{K;r,1}` and `Q_{K;r,2}` for kernels whose constants are known.
pub fn q_constants(family: KernelFamily, r: usize) -> Result<QConstants> {
    match family {
        KernelFamily::VonMises | KernelFamily::WrappedNormal => {
            let q1 = r.is_multiple_of(2).then(|| {
                let half = r / 2;
                let sign = if half.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * factorial(r) / (2f64.powi(half as i32) * factorial(half) * (2.0 * PI).sqrt())
            });
            let q2 = factorial(2 * r) / (2f64.powi(2 * r as i32 + 1) * factorial(r) * PI.sqrt());
            Ok(QConstants { q1, q2: Some(q2) })
        }
        KernelFamily::WrappedEpanechnikov if r == 0 => Ok(QConstants {
            q1: None,
            q2: Some(3.0 / (5.0 * 5f64.sqrt())),
        }),
        _ => Err(Error::Capability(format!(
            "no kernel constants for {family} at derivative order {r}"
        ))),
    }
}

/// Result of inverting the bandwidth functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuSolution {
    Kernel(KernelSpec),
    /// The target bandwidth is at or beyond the uniform kernel's, or outside
    /// the range of the asymptotic inversion: use `ν = 0`.
    UniformFallback,
}

impl NuSolution {
    pub fn into_spec(self, family: KernelFamily) -> KernelSpec {
        match self {
            NuSolution::Kernel(k) => k,
            NuSolution::UniformFallback => KernelSpec::uniform(family),
        }
    }
}

/// Finds `ν` with `h_K(ν) = h`, exactly by root finding or through the
/// family's large-concentration approximation.
pub fn solve_nu_from_h(
    family: KernelFamily,
    h: f64,
    exact: bool,
    trunc: &FourierTruncation,
) -> Result<NuSolution> {
    if !(h > 0.0) || h.is_nan() {
        return Err(Error::domain(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    if h >= H_UNIFORM {
        return Ok(NuSolution::UniformFallback);
    }
    let spec = match family {
        KernelFamily::WrappedEpanechnikov => {
            let lambda = (5.0 * h).sqrt();
            if lambda >= PI {
                return Ok(NuSolution::UniformFallback);
            }
            KernelSpec::wrapped_epanechnikov(lambda)?
        }
        KernelFamily::Cardioid => {
            let nu = (H_UNIFORM - h) / 4.0;
            if nu >= 0.5 {
                return Err(Error::domain(format!(
                    "cardioid bandwidth cannot go below pi^2/3 - 2, got {h}"
                )));
            }
            KernelSpec::new(family, nu)?
        }
        KernelFamily::VonMises if !exact => {
            let kappa = 1.0 / h;
            if kappa > KAPPA_MAX {
                return Err(Error::domain(format!("bandwidth {h} is too small")));
            }
            KernelSpec::von_mises(kappa)?
        }
        KernelFamily::VonMises => {
            let hk = |kappa: f64| -> f64 {
                KernelSpec::von_mises(kappa)
                    .and_then(|k| bandwidth_h(&k, trunc))
                    .map(|v| v - h)
                    .unwrap_or(f64::NAN)
            };
            let mut hi = 2.0 / h;
            while hk(hi) > 0.0 {
                hi *= 2.0;
                if hi > KAPPA_MAX {
                    return Err(Error::domain(format!("bandwidth {h} is too small")));
                }
            }
            let kappa = find_root(hk, 0.0, hi, 1e-13 * hi)?;
            KernelSpec::von_mises(kappa)?
        }
        KernelFamily::WrappedNormal if !exact => {
            // inverse of h ≈ (1 − ν⁴)/2
            if h >= 0.5 {
                return Ok(NuSolution::UniformFallback);
            }
            KernelSpec::new(family, (1.0 - 2.0 * h).powf(0.25))?
        }
        KernelFamily::WrappedNormal => {
            // h_WN(σ²) = σ² up to terms below exp(-π²/(2σ²))
            let var = if h < 0.09 {
                h
            } else {
                let hv = |v: f64| -> f64 {
                    KernelSpec::new(family, (-0.5 * v).exp())
                        .and_then(|k| bandwidth_h(&k, trunc))
                        .map(|x| x - h)
                        .unwrap_or(f64::NAN)
                };
                let mut hi = 2.0 * h;
                while hv(hi) < 0.0 {
                    hi *= 2.0;
                }
                find_root(hv, 0.5 * h, hi, 1e-14)?
            };
            KernelSpec::new(family, (-0.5 * var).exp())?
        }
        KernelFamily::WrappedCauchy => {
            let nu = find_root(
                |nu| H_UNIFORM + 4.0 * polylog(2, -nu).unwrap_or(f64::NAN) - h,
                0.0,
                1.0,
                1e-15,
            )?;
            if nu >= 1.0 {
                return Err(Error::domain(format!("bandwidth {h} is too small")));
            }
            KernelSpec::new(family, nu)?
        }
    };
    Ok(NuSolution::Kernel(spec))
}
