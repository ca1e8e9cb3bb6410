//! Data-driven choice of the smoothing parameter: rule of thumb, multi-stage
//! direct plug-in, solve-the-equation, likelihood cross-validation and the
//! ISE-optimal gold standard.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    ise_exact, ise_fourier, psi_hat, CircularSample, EmpiricalMoments, KernelDensity,
};
use crate::kernels::{
    alpha_table, bandwidth_h, q_constants, solve_nu_from_h, FourierTruncation, KernelEval,
    KernelFamily, KernelSpec, NuSolution, H_UNIFORM,
};
use crate::mixture::{fit_em, psi_from_model, select_aic};
use crate::special::{find_root, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rt,
    Dpi,
    Ste,
    Lcv,
    Gs,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rt => "rt",
            Method::Dpi => "dpi",
            Method::Ste => "ste",
            Method::Lcv => "lcv",
            Method::Gs => "gs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rt" => Ok(Method::Rt),
            "dpi" => Ok(Method::Dpi),
            "ste" => Ok(Method::Ste),
            "lcv" => Ok(Method::Lcv),
            "gs" => Ok(Method::Gs),
            _ => Err(Error::domain(format!("unknown selector '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub kernel: KernelFamily,
    pub pilot: KernelFamily,
    /// Derivative order of the target `f^{(r)}`.
    pub r: usize,
    pub nstage: usize,
    pub m_max: usize,
    pub exact_inversion: bool,
    pub seed: u64,
    pub ste_bracket: (f64, f64),
    pub ste_tol: f64,
    pub trunc: FourierTruncation,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::VonMises,
            pilot: KernelFamily::VonMises,
            r: 0,
            nstage: 2,
            m_max: 1,
            exact_inversion: false,
            seed: 0,
            ste_bracket: (1e-6, H_UNIFORM - 1e-6),
            ste_tol: 1e-8,
            trunc: FourierTruncation::default(),
        }
    }
}

impl SelectorConfig {
    /// Checks that every kernel constant the plug-in selectors need exists.
    pub fn validate(&self) -> Result<()> {
        if !matches!(
            self.pilot,
            KernelFamily::VonMises | KernelFamily::WrappedNormal
        ) {
            return Err(Error::Capability(format!(
                "pilot kernel must be vonmises or wrappednormal, got {}",
                self.pilot
            )));
        }
        q_constants(self.kernel, self.r)?;
        if self.nstage == 0 || self.m_max == 0 {
            return Err(Error::domain("nstage and m_max must be at least 1"));
        }
        let (lo, hi) = self.ste_bracket;
        if !(lo > 0.0 && lo < hi) || !(self.ste_tol > 0.0) {
            return Err(Error::domain(
                "invalid solve-the-equation bracket or tolerance",
            ));
        }
        Ok(())
    }
}

/// One step of a selector, kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TraceStep {
    fn new(stage: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            psi_order: None,
            psi: None,
            pilot_h: None,
            pilot_nu: None,
            note: None,
        }
    }

    fn psi(mut self, order: usize, value: f64) -> Self {
        self.psi_order = Some(order);
        self.psi = Some(value);
        self
    }

    fn pilot(mut self, h: Option<f64>, nu: Option<f64>) -> Self {
        self.pilot_h = h;
        self.pilot_nu = nu;
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// The selected smoothing parameter with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingSelection {
    pub method: Method,
    pub kernel: KernelSpec,
    pub nu: f64,
    /// `h_K(ν)` of the selected kernel.
    pub h: f64,
    /// The bandwidth the selector aimed for before inverting to `ν`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_or_lambda: Option<f64>,
    pub fallback_uniform: bool,
    pub trace: Vec<TraceStep>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SmoothingSelection {
    fn from_kernel(
        method: Method,
        kernel: KernelSpec,
        h_target: Option<f64>,
        trace: Vec<TraceStep>,
        trunc: &FourierTruncation,
    ) -> Result<Self> {
        Ok(Self {
            method,
            nu: kernel.nu(),
            h: bandwidth_h(&kernel, trunc)?,
            h_target,
            kappa_or_lambda: kernel.native_param(),
            fallback_uniform: false,
            kernel,
            trace,
            warnings: Vec::new(),
        })
    }

    fn uniform(
        method: Method,
        family: KernelFamily,
        mut trace: Vec<TraceStep>,
        why: String,
    ) -> Self {
        trace.push(TraceStep::new("fallback").note(why));
        Self {
            method,
            kernel: KernelSpec::uniform(family),
            nu: 0.0,
            h: H_UNIFORM,
            h_target: None,
            kappa_or_lambda: None,
            fallback_uniform: true,
            trace,
            warnings: Vec::new(),
        }
    }
}

/// A plug-in bandwidth, or the signal to use the uniform kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlugIn {
    Value(f64),
    Uniform,
}

fn sign_pow(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `h_AMISE = ((2r+1) Q_{K;r,2} / (n (−1)^{r+2} ψ_{2r+4}))^{2/(2r+5)}`.
pub fn optimal_h_amise(psi_2r4: f64, n: usize, kernel: KernelFamily, r: usize) -> Result<PlugIn> {
    let q2 = q_constants(kernel, r)?
        .q2
        .ok_or_else(|| Error::Capability(format!("no Q2 for {kernel} at order {r}")))?;
    let denom = n as f64 * sign_pow(r) * psi_2r4;
    if !(denom > 0.0) || !denom.is_finite() {
        return Ok(PlugIn::Uniform);
    }
    let h = ((2 * r + 1) as f64 * q2 / denom).powf(2.0 / (2 * r + 5) as f64);
    Ok(if h.is_finite() && h > 0.0 {
        PlugIn::Value(h)
    } else {
        PlugIn::Uniform
    })
}

/// AMSE-optimal pilot bandwidth for `ψ̂_s`:
/// `(−2 Q_{L;s,1} / (n ψ_{s+2}))^{2/(s+3)}`.
pub fn pilot_h_amse(psi_s2: f64, n: usize, pilot: KernelFamily, s: usize) -> Result<PlugIn> {
    if !s.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "functional order must be even, got {s}"
        )));
    }
    let q1 = q_constants(pilot, s)?
        .q1
        .ok_or_else(|| Error::Capability(format!("no Q1 for {pilot} at order {s}")))?;
    let x = -2.0 * q1 / (n as f64 * psi_s2);
    if !(x > 0.0) || !x.is_finite() {
        return Ok(PlugIn::Uniform);
    }
    Ok(PlugIn::Value(x.powf(2.0 / (s + 3) as f64)))
}

/// Outcome of one link in a plug-in chain.
enum Link<T> {
    Ok(T),
    Uniform(String),
}

macro_rules! link {
    ($e:expr) => {
        match $e {
            Link::Ok(v) => v,
            Link::Uniform(why) => return Ok(Link::Uniform(why)),
        }
    };
}

fn invert(family: KernelFamily, h: f64, cfg: &SelectorConfig) -> Result<Link<KernelSpec>> {
    Ok(
        match solve_nu_from_h(family, h, cfg.exact_inversion, &cfg.trunc)? {
            NuSolution::Kernel(k) => Link::Ok(k),
            NuSolution::UniformFallback => {
                Link::Uniform(format!("bandwidth {h:.6e} is beyond the range of {family}"))
            }
        },
    )
}

/// `ψ̂_{s;ρ}` with `ρ` from the AMSE-optimal pilot built on `psi_s2 ≈ ψ_{s+2}`.
fn pilot_stage(
    sample: &CircularSample,
    psi_s2: f64,
    s: usize,
    cfg: &SelectorConfig,
    label: String,
    trace: &mut Vec<TraceStep>,
) -> Result<Link<f64>> {
    let n = sample.len();
    let ph = match pilot_h_amse(psi_s2, n, cfg.pilot, s)? {
        PlugIn::Value(h) => h,
        PlugIn::Uniform => {
            return Ok(Link::Uniform(format!(
                "psi_{} = {psi_s2:.6e} has the wrong sign for a pilot",
                s + 2
            )))
        }
    };
    let rho = match invert(cfg.pilot, ph, cfg)? {
        Link::Ok(k) => k,
        Link::Uniform(why) => {
            trace.push(TraceStep::new(label).pilot(Some(ph), Some(0.0)));
            return Ok(Link::Uniform(why));
        }
    };
    let psi = psi_hat(sample, &rho, s, &cfg.trunc)?.value;
    trace.push(
        TraceStep::new(label)
            .psi(s, psi)
            .pilot(Some(ph), Some(rho.nu())),
    );
    Ok(Link::Ok(psi))
}

fn finish(
    method: Method,
    sample: &CircularSample,
    psi_2r4: f64,
    cfg: &SelectorConfig,
    mut trace: Vec<TraceStep>,
) -> Result<Link<SmoothingSelection>> {
    let h = match optimal_h_amise(psi_2r4, sample.len(), cfg.kernel, cfg.r)? {
        PlugIn::Value(h) => h,
        PlugIn::Uniform => {
            return Ok(Link::Uniform(format!(
                "psi_{} = {psi_2r4:.6e} gives no positive bandwidth",
                2 * cfg.r + 4
            )))
        }
    };
    let k = link!(invert(cfg.kernel, h, cfg)?);
    trace.push(TraceStep::new("final").pilot(Some(h), Some(k.nu())));
    Ok(Link::Ok(SmoothingSelection::from_kernel(
        method,
        k,
        Some(h),
        trace,
        &cfg.trunc,
    )?))
}

/// Runs a plug-in chain; numerical failures and uniform signals both
/// produce the uniform fallback with the reason recorded.
fn run_chain(
    method: Method,
    cfg: &SelectorConfig,
    chain: impl FnOnce(&mut Vec<TraceStep>) -> Result<Link<SmoothingSelection>>,
) -> SmoothingSelection {
    let mut trace = Vec::new();
    match chain(&mut trace) {
        Ok(Link::Ok(sel)) => sel,
        Ok(Link::Uniform(why)) => SmoothingSelection::uniform(method, cfg.kernel, trace, why),
        Err(e) => {
            let mut sel = SmoothingSelection::uniform(
                method,
                cfg.kernel,
                trace,
                format!("numerical failure: {e}"),
            );
            sel.warnings.push(e.to_string());
            sel
        }
    }
}

fn check_input(sample: &CircularSample, cfg: &SelectorConfig) -> Result<()> {
    sample.require(2, "smoothing selection")?;
    cfg.validate()
}

/// Rule of thumb: `ψ_{2r+4}` of a single fitted von Mises density.
pub fn select_rt(sample: &CircularSample, cfg: &SelectorConfig) -> Result<SmoothingSelection> {
    check_input(sample, cfg)?;
    let order = 2 * cfg.r + 4;
    Ok(run_chain(Method::Rt, cfg, |trace| {
        let fit = fit_em(sample, 1, cfg.seed)?;
        let psi = psi_from_model(&fit.model, order)?;
        trace.push(
            TraceStep::new("reference")
                .psi(order, psi)
                .note(format!("von Mises fit, kappa = {:.6e}", fit.model.kappa)),
        );
        finish(Method::Rt, sample, psi, cfg, std::mem::take(trace))
    }))
}

/// `l`-stage direct plug-in: a mixture reference for `ψ_{2r+2l+4}`, then `l`
/// kernel estimates of successively lower order.
pub fn select_dpi(sample: &CircularSample, cfg: &SelectorConfig) -> Result<SmoothingSelection> {
    check_input(sample, cfg)?;
    let l = cfg.nstage;
    let top = 2 * cfg.r + 2 * l + 4;
    Ok(run_chain(Method::Dpi, cfg, |trace| {
        let fit = select_aic(sample, cfg.m_max, cfg.seed)?;
        let mut psi = psi_from_model(&fit.model, top)?;
        trace.push(TraceStep::new("reference").psi(top, psi).note(format!(
            "{}-component mixture, kappa = {:.6e}",
            fit.model.m, fit.model.kappa
        )));
        for stage in 1..=l {
            let s = top - 2 * stage;
            psi = link!(pilot_stage(
                sample,
                psi,
                s,
                cfg,
                format!("stage {stage}"),
                trace
            )?);
        }
        finish(Method::Dpi, sample, psi, cfg, std::mem::take(trace))
    }))
}

/// Ingredients of the solve-the-equation fixed point `h = T(h)`.
pub struct SteEquation<'a> {
    sample: &'a CircularSample,
    cfg: SelectorConfig,
    /// `γ(h) = gamma_scale · h^{(2r+5)/(2r+7)}`.
    gamma_scale: f64,
    q2: f64,
}

impl SteEquation<'_> {
    pub fn gamma(&self, h: f64) -> f64 {
        let r = self.cfg.r as f64;
        self.gamma_scale * h.powf((2.0 * r + 5.0) / (2.0 * r + 7.0))
    }

    /// `T(h) = ((2r+1) Q_{K;r,2} / (n (−1)^{r+2} ψ̂_{2r+4;ρ(h)}))^{2/(2r+5)}`
    /// with `h_L(ρ(h)) = γ(h)`; infinite when the estimate has the wrong sign.
    pub fn target(&self, h: f64) -> Result<f64> {
        let r = self.cfg.r;
        let rho = match solve_nu_from_h(
            self.cfg.pilot,
            self.gamma(h),
            self.cfg.exact_inversion,
            &self.cfg.trunc,
        )? {
            NuSolution::Kernel(k) => k,
            NuSolution::UniformFallback => return Ok(f64::INFINITY),
        };
        let psi = psi_hat(self.sample, &rho, 2 * r + 4, &self.cfg.trunc)?.value;
        let denom = self.sample.len() as f64 * sign_pow(r) * psi;
        if !(denom > 0.0) {
            return Ok(f64::INFINITY);
        }
        Ok(((2 * r + 1) as f64 * self.q2 / denom).powf(2.0 / (2 * r + 5) as f64))
    }

    /// `g(h) = h − T(h)`, with `T` capped so the function stays finite.
    pub fn g(&self, h: f64) -> f64 {
        match self.target(h) {
            Ok(t) => h - t.min(1e3),
            Err(_) => f64::NAN,
        }
    }
}

fn build_ste<'a>(
    sample: &'a CircularSample,
    cfg: &SelectorConfig,
    trace: &mut Vec<TraceStep>,
) -> Result<Link<SteEquation<'a>>> {
    let r = cfg.r;
    let fit = select_aic(sample, cfg.m_max, cfg.seed)?;
    let psi6 = psi_from_model(&fit.model, 2 * r + 6)?;
    let psi8 = psi_from_model(&fit.model, 2 * r + 8)?;
    trace.push(
        TraceStep::new("reference")
            .psi(2 * r + 6, psi6)
            .note(format!(
                "{}-component mixture, kappa = {:.6e}",
                fit.model.m, fit.model.kappa
            )),
    );
    trace.push(TraceStep::new("reference").psi(2 * r + 8, psi8));
    let p4 = link!(pilot_stage(
        sample,
        psi6,
        2 * r + 4,
        cfg,
        "pilot rho1".into(),
        trace
    )?);
    let p6 = link!(pilot_stage(
        sample,
        psi8,
        2 * r + 6,
        cfg,
        "pilot rho2".into(),
        trace
    )?);
    let q1 = q_constants(cfg.pilot, 2 * r + 4)?
        .q1
        .expect("even order has Q1");
    let q2 = q_constants(cfg.kernel, r)?
        .q2
        .expect("validated kernel has Q2");
    // both factors are negative for valid inputs; only their product is raised
    let constant = sign_pow(r + 1) * 2.0 * q1 / ((2 * r + 1) as f64 * q2);
    let product = constant * p4 / p6;
    if !(product > 0.0) || !product.is_finite() {
        return Ok(Link::Uniform(format!(
            "pilot ratio psi_{}/psi_{} has the wrong sign",
            2 * r + 4,
            2 * r + 6
        )));
    }
    Ok(Link::Ok(SteEquation {
        sample,
        cfg: *cfg,
        gamma_scale: product.powf(2.0 / (2 * r + 7) as f64),
        q2,
    }))
}

/// The `g` function of the solve-the-equation selector for inspection.
/// `None` when the pilot chain already signals the uniform kernel.
pub fn ste_equation<'a>(
    sample: &'a CircularSample,
    cfg: &SelectorConfig,
) -> Result<Option<SteEquation<'a>>> {
    check_input(sample, cfg)?;
    let mut trace = Vec::new();
    Ok(match build_ste(sample, cfg, &mut trace)? {
        Link::Ok(eq) => Some(eq),
        Link::Uniform(_) => None,
    })
}

const STE_SCAN: usize = 32;

/// First root of `g` from the lower end of `[lo, hi]`, located by a
/// logarithmic pre-scan; also reports how many sign changes the scan saw.
fn first_root(eq: &SteEquation<'_>, lo: f64, hi: f64, tol: f64) -> Result<(f64, usize)> {
    let pts: Vec<f64> = (0..STE_SCAN)
        .map(|i| lo * (hi / lo).powf(i as f64 / (STE_SCAN - 1) as f64))
        .collect();
    let vals: Vec<f64> = pts.iter().map(|&h| eq.g(h)).collect();
    let mut changes = Vec::new();
    for i in 0..STE_SCAN - 1 {
        if vals[i].is_finite()
            && vals[i + 1].is_finite()
            && vals[i].signum() != vals[i + 1].signum()
        {
            changes.push(i);
        }
    }
    let Some(&i) = changes.first() else {
        return Err(Error::NoBracket {
            g_lo: vals[0],
            g_hi: vals[STE_SCAN - 1],
        });
    };
    let mut xtol = tol * 1e-3 * pts[i];
    loop {
        let root = find_root(|h| eq.g(h), pts[i], pts[i + 1], xtol)?;
        let resid = eq.g(root);
        if resid.abs() < tol || xtol < 1e-15 * root {
            return Ok((root, changes.len()));
        }
        xtol *= 1e-3;
    }
}

/// Solve-the-equation plug-in: the pilot for `ψ̂_{2r+4}` is tied to the
/// final bandwidth through `γ(h)` and the fixed point `h = T(h)` is solved.
pub fn select_ste(sample: &CircularSample, cfg: &SelectorConfig) -> Result<SmoothingSelection> {
    check_input(sample, cfg)?;
    let mut warnings = Vec::new();
    if cfg.nstage != 2 {
        warnings.push(format!(
            "solve-the-equation supports two stages only; nstage = {} ignored",
            cfg.nstage
        ));
    }
    let mut no_bracket = None;
    let mut sel = run_chain(Method::Ste, cfg, |trace| {
        let eq = link!(build_ste(sample, cfg, trace)?);
        let (lo, hi) = cfg.ste_bracket;
        let found = match first_root(&eq, lo, hi, cfg.ste_tol) {
            Err(Error::NoBracket { .. }) => {
                trace.push(TraceStep::new("bracket").note("no sign change, widening lower end"));
                first_root(&eq, lo.min(1e-9), hi, cfg.ste_tol)
            }
            other => other,
        };
        let (root, changes) = match found {
            Ok(v) => v,
            Err(Error::NoBracket { g_lo, g_hi }) => {
                no_bracket = Some((g_lo, g_hi));
                return Ok(Link::Uniform("no bracketed root".into()));
            }
            Err(e) => return Err(e),
        };
        let resid = eq.g(root);
        let mut step = TraceStep::new("fixed point")
            .pilot(Some(eq.gamma(root)), None)
            .note(format!("h = {root:.12e}, |g(h)| = {:.3e}", resid.abs()));
        if changes > 1 {
            step = step.note(format!(
                "h = {root:.12e}, |g(h)| = {:.3e}, {changes} sign changes in pre-scan",
                resid.abs()
            ));
        }
        trace.push(step);
        let k = link!(invert(cfg.kernel, root, cfg)?);
        trace.push(TraceStep::new("final").pilot(Some(root), Some(k.nu())));
        Ok(Link::Ok(SmoothingSelection::from_kernel(
            Method::Ste,
            k,
            Some(root),
            std::mem::take(trace),
            &cfg.trunc,
        )?))
    });
    if let Some((g_lo, g_hi)) = no_bracket {
        // documented fallback: the direct plug-in answer, flagged
        let mut dpi = select_dpi(sample, cfg)?;
        dpi.method = Method::Ste;
        dpi.trace.insert(
            0,
            TraceStep::new("bracket").note(format!(
                "no root: g(lo) = {g_lo:.6e}, g(hi) = {g_hi:.6e}; using direct plug-in"
            )),
        );
        dpi.warnings
            .push("solve-the-equation had no bracketed root; direct plug-in used".into());
        sel = dpi;
    }
    sel.warnings.extend(warnings);
    Ok(sel)
}

/// Leave-one-out log-likelihood `Σ_i log f̂_{−i;ν}(Θ_i)`; `−∞` when some
/// leave-one-out density is not positive.
pub fn lcv_objective(
    sample: &CircularSample,
    k: &KernelSpec,
    trunc: &FourierTruncation,
) -> Result<f64> {
    sample.require(2, "likelihood cross-validation")?;
    let n = sample.len();
    if k.is_uniform() {
        return Ok(-(n as f64) * (2.0 * PI).ln());
    }
    let eval = KernelEval::new(k, 0, trunc)?;
    let a = sample.angles();
    let cs: Vec<(f64, f64)> = a.iter().map(|t| (t.cos(), t.sin())).collect();
    let mut loo = vec![0.0; n];
    for i in 0..n {
        let (ci, si) = cs[i];
        for j in (i + 1)..n {
            let (cj, sj) = cs[j];
            let v = eval.eval_cs(a[i] - a[j], ci * cj + si * sj, si * cj - ci * sj);
            loo[i] += v;
            loo[j] += v;
        }
    }
    let mut total = 0.0;
    for v in loo {
        let d = v / (n - 1) as f64;
        if !(d > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        total += d.ln();
    }
    Ok(total)
}

const LCV_GRID: usize = 64;
const LCV_H_MIN: f64 = 1e-4;

/// Likelihood cross-validation over `h ∈ [1e-4, π²/3]`: a 64-point
/// logarithmic grid followed by golden-section refinement around the best
/// grid point.
pub fn select_lcv(sample: &CircularSample, cfg: &SelectorConfig) -> Result<SmoothingSelection> {
    sample.require(2, "likelihood cross-validation")?;
    let family = cfg.kernel;
    let trunc = cfg.trunc;
    let kernel_at = |log_h: f64| -> Option<KernelSpec> {
        match solve_nu_from_h(family, log_h.exp(), true, &trunc) {
            Ok(sol) => Some(sol.into_spec(family)),
            Err(_) => None,
        }
    };
    let objective = |k: &KernelSpec| lcv_objective(sample, k, &trunc).unwrap_or(f64::NEG_INFINITY);
    let (a, b) = (LCV_H_MIN.ln(), H_UNIFORM.ln());
    let grid: Vec<f64> = (0..LCV_GRID)
        .map(|i| a + (b - a) * i as f64 / (LCV_GRID - 1) as f64)
        .collect();
    let mut best = (f64::NEG_INFINITY, KernelSpec::uniform(family), LCV_GRID - 1);
    for (i, &lh) in grid.iter().enumerate() {
        if let Some(k) = kernel_at(lh) {
            let v = objective(&k);
            if v > best.0 {
                best = (v, k, i);
            }
        }
    }
    let mut trace = vec![TraceStep::new("grid").note(format!(
        "best of {LCV_GRID} grid points: objective {:.9e}",
        best.0
    ))];
    let i = best.2;
    if i > 0 && i + 1 < LCV_GRID {
        let (mut lo, mut hi) = (grid[i - 1], grid[i + 1]);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let score = |lh: f64| kernel_at(lh).map_or(f64::NEG_INFINITY, |k| objective(&k));
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let (mut f1, mut f2) = (score(x1), score(x2));
        for _ in 0..40 {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = score(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = score(x2);
            }
            if hi - lo < 1e-6 {
                break;
            }
        }
        let (lh, fv) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if fv > best.0 {
            if let Some(k) = kernel_at(lh) {
                best = (fv, k, i);
                trace.push(TraceStep::new("golden section").note(format!("objective {fv:.9e}")));
            }
        }
    }
    if best.1.is_uniform() || best.0 == f64::NEG_INFINITY {
        return Ok(SmoothingSelection::uniform(
            Method::Lcv,
            family,
            trace,
            "cross-validation prefers the uniform kernel".into(),
        ));
    }
    SmoothingSelection::from_kernel(Method::Lcv, best.1, None, trace, &trunc)
}

/// Candidate kernels for the gold standard: the uniform kernel followed by
/// the exact inverses of `count` log-spaced bandwidths in `[1e-4, π²/3)`.
pub fn gold_standard_grid(
    family: KernelFamily,
    count: usize,
    trunc: &FourierTruncation,
) -> Result<Vec<KernelSpec>> {
    let (a, b) = (1e-4f64.ln(), H_UNIFORM.ln());
    let mut out = vec![KernelSpec::uniform(family)];
    for i in 0..count {
        let h = (a + (b - a) * i as f64 / count as f64).exp();
        if let NuSolution::Kernel(k) = solve_nu_from_h(family, h, true, trunc)? {
            out.push(k);
        }
    }
    out.sort_by(|x, y| x.nu().total_cmp(&y.nu()));
    out.dedup_by(|x, y| x.nu() == y.nu());
    Ok(out)
}

fn gold_from_scores(
    grid: &[KernelSpec],
    scores: impl Iterator<Item = Result<f64>>,
    trunc: &FourierTruncation,
) -> Result<(SmoothingSelection, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.enumerate() {
        let s = s?;
        // strict comparison keeps the smaller ν on ties (grid is ν-sorted)
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    let (i, ise) = best.ok_or_else(|| Error::domain("gold standard needs a nonempty grid"))?;
    let k = grid[i];
    let trace = vec![TraceStep::new("grid").note(format!("ISE {ise:.9e} at grid index {i}"))];
    let sel = if k.is_uniform() {
        let mut s = SmoothingSelection::uniform(
            Method::Gs,
            k.family(),
            trace,
            "uniform kernel minimizes ISE".into(),
        );
        s.fallback_uniform = false;
        s
    } else {
        SmoothingSelection::from_kernel(Method::Gs, k, None, trace, trunc)?
    };
    Ok((sel, ise))
}

/// ISE-minimizing kernel over `grid` (sorted by `ν`) against a known density,
/// by quadrature. Ties resolve to the smaller `ν`.
pub fn select_gold(
    sample: &CircularSample,
    truth: impl Fn(f64) -> f64,
    grid: &[KernelSpec],
    cfg: &SelectorConfig,
    quad: &QuadratureConfig,
) -> Result<(SmoothingSelection, f64)> {
    let scores = grid.iter().map(|k| {
        let est = KernelDensity::new(sample, k, 0, &cfg.trunc)?;
        ise_exact(&est, &truth, quad)
    });
    gold_from_scores(grid, scores, &cfg.trunc)
}

/// Fourier coefficients `α_j` for Parseval ISE evaluation.
pub fn ise_alphas(k: &KernelSpec, trunc: &FourierTruncation) -> Result<Vec<f64>> {
    alpha_table(k, 1e-10, trunc)
}

/// The gold standard with ISE computed from Fourier coefficients of the
/// truth, `truth[j-1] = (a_j, b_j)`.
pub fn select_gold_fourier(
    moments: &mut EmpiricalMoments,
    truth: &[(f64, f64)],
    grid: &[(KernelSpec, Vec<f64>)],
    trunc: &FourierTruncation,
) -> Result<(SmoothingSelection, f64)> {
    let kernels: Vec<KernelSpec> = grid.iter().map(|(k, _)| *k).collect();
    let scores: Vec<Result<f64>> = grid
        .iter()
        .map(|(_, alphas)| Ok(ise_fourier(moments, alphas, truth)))
        .collect();
    gold_from_scores(&kernels, scores.into_iter(), trunc)
}

/// Runs a data-driven selector by name (the gold standard needs the truth
/// and is not available here).
pub fn select(
    sample: &CircularSample,
    method: Method,
    cfg: &SelectorConfig,
) -> Result<SmoothingSelection> {
    match method {
        Method::Rt => select_rt(sample, cfg),
        Method::Dpi => select_dpi(sample, cfg),
        Method::Ste => select_ste(sample, cfg),
        Method::Lcv => select_lcv(sample, cfg),
        Method::Gs => Err(Error::Capability(
            "the gold standard needs the true density".into(),
        )),
    }
}
