//! Monte-Carlo benchmarking of the selectors against known densities.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ise_exact, ise_fourier, CircularSample, EmpiricalMoments, KernelDensity};
use crate::kernels::{FourierTruncation, KernelSpec};
use crate::mixture::{ComponentMixture, VonMisesComponent};
use crate::selectors::{
    gold_standard_grid, ise_alphas, select, select_gold_fourier, Method, SelectorConfig,
};
use crate::special::QuadratureConfig;

/// A reference density with an exact sampler.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub name: String,
    pub mixture: ComponentMixture,
}

impl ModelSpec {
    fn new(name: &str, parts: &[(f64, f64, f64)]) -> Self {
        Self {
            name: name.to_string(),
            mixture: ComponentMixture {
                components: parts
                    .iter()
                    .map(|&(weight, mu, kappa)| VonMisesComponent { weight, mu, kappa })
                    .collect(),
            },
        }
    }

    pub fn density(&self, theta: f64) -> f64 {
        self.mixture.density(theta)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> Result<CircularSample> {
        CircularSample::new(self.mixture.sample(rng, n))
    }

    /// `(a_j, b_j)` up to the order where the coefficients are negligible.
    pub fn fourier(&self) -> Result<Vec<(f64, f64)>> {
        self.mixture.fourier(self.mixture.fourier_order(0))
    }
}

/// The benchmark zoo: uniform, a single von Mises and three mixtures.
pub fn builtin_models() -> Vec<ModelSpec> {
    use std::f64::consts::PI;
    let third = 1.0 / 3.0;
    vec![
        ModelSpec::new("U", &[(1.0, 0.0, 0.0)]),
        ModelSpec::new("VM2", &[(1.0, 0.0, 2.0)]),
        ModelSpec::new("VM-MIX2", &[(0.5, 0.0, 8.0), (0.5, PI, 8.0)]),
        ModelSpec::new(
            "VM-MIX3",
            &[
                (third, 0.0, 10.0),
                (third, 2.0 * PI / 3.0, 10.0),
                (third, -2.0 * PI / 3.0, 10.0),
            ],
        ),
        ModelSpec::new("SKEW", &[(0.75, 0.0, 1.0), (0.25, 1.5, 6.0)]),
    ]
}

pub fn model_by_name(name: &str) -> Result<ModelSpec> {
    builtin_models()
        .into_iter()
        .find(|m| m.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::domain(format!("unknown model '{name}'")))
}

/// Aggregated ISE of one selector on one model and sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub model: String,
    pub selector: String,
    pub n: usize,
    /// Replicates that produced an ISE; hard errors are excluded.
    pub replicates: usize,
    pub mean_ise: f64,
    pub sd_ise: f64,
    pub mc_stderr: f64,
    pub seed: u64,
    pub fallbacks: usize,
    pub hard_errors: usize,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub selector: SelectorConfig,
    /// Number of log-spaced bandwidths in the gold-standard grid.
    pub gold_grid: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            selector: SelectorConfig::default(),
            gold_grid: 200,
        }
    }
}

/// Replicate `rep` draws from its own ChaCha stream so results do not
/// depend on scheduling.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Ise { ise: f64, fallback: bool },
    Failed,
}

struct IseContext<'a> {
    model: &'a ModelSpec,
    truth: Vec<(f64, f64)>,
    trunc: FourierTruncation,
    quad: QuadratureConfig,
}

impl IseContext<'_> {
    fn ise(
        &self,
        sample: &CircularSample,
        moments: &mut EmpiricalMoments,
        k: &KernelSpec,
    ) -> Result<f64> {
        match ise_alphas(k, &self.trunc) {
            Ok(alphas) => Ok(ise_fourier(moments, &alphas, &self.truth)),
            // slowly decaying coefficients: integrate directly
            Err(_) => {
                let est = KernelDensity::new(sample, k, 0, &self.trunc)?;
                ise_exact(&est, |t| self.model.density(t), &self.quad)
            }
        }
    }
}

/// Runs every selector and the gold standard on `replicates` shared samples.
/// The gold standard is always reported, under the name `gs`, last.
pub fn run_monte_carlo(
    model: &ModelSpec,
    selectors: &[Method],
    n: usize,
    replicates: usize,
    seed: u64,
    cfg: &SimConfig,
) -> Result<Vec<SimResult>> {
    if replicates == 0 {
        return Err(Error::domain("at least one replicate is required"));
    }
    let trunc = cfg.selector.trunc;
    let mut methods: Vec<Method> = Vec::new();
    for &m in selectors {
        if m != Method::Gs && !methods.contains(&m) {
            methods.push(m);
        }
    }
    let ctx = IseContext {
        model,
        truth: model.fourier()?,
        trunc,
        quad: QuadratureConfig::default(),
    };
    let grid: Vec<(KernelSpec, Vec<f64>)> =
        gold_standard_grid(cfg.selector.kernel, cfg.gold_grid, &trunc)?
            .into_iter()
            .map(|k| Ok((k, ise_alphas(&k, &trunc)?)))
            .collect::<Result<_>>()?;
    let max_order = grid
        .iter()
        .map(|(_, a)| a.len())
        .max()
        .unwrap_or(0)
        .max(ctx.truth.len());

    let per_rep: Vec<Vec<Outcome>> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let sample = match model.sample(&mut rng, n) {
                Ok(s) => s,
                Err(_) => return vec![Outcome::Failed; methods.len() + 1],
            };
            let mut moments = EmpiricalMoments::new(&sample, max_order);
            let scfg = SelectorConfig {
                seed: seed.wrapping_add(rep),
                ..cfg.selector
            };
            let mut row: Vec<Outcome> = methods
                .iter()
                .map(|&m| {
                    let out = select(&sample, m, &scfg).and_then(|sel| {
                        Ok((
                            ctx.ise(&sample, &mut moments, &sel.kernel)?,
                            sel.fallback_uniform,
                        ))
                    });
                    match out {
                        Ok((ise, fallback)) => Outcome::Ise { ise, fallback },
                        Err(_) => Outcome::Failed,
                    }
                })
                .collect();
            row.push(
                match select_gold_fourier(&mut moments, &ctx.truth, &grid, &trunc) {
                    Ok((sel, ise)) => Outcome::Ise {
                        ise,
                        fallback: sel.fallback_uniform,
                    },
                    Err(_) => Outcome::Failed,
                },
            );
            row
        })
        .collect();

    let names = methods
        .iter()
        .map(|m| m.name())
        .chain(std::iter::once(Method::Gs.name()));
    Ok(names
        .enumerate()
        .map(|(col, name)| {
            let mut ises = Vec::with_capacity(replicates);
            let (mut fallbacks, mut hard_errors) = (0, 0);
            for row in &per_rep {
                match row[col] {
                    Outcome::Ise { ise, fallback } => {
                        ises.push(ise);
                        fallbacks += usize::from(fallback);
                    }
                    Outcome::Failed => hard_errors += 1,
                }
            }
            let (mean, sd) = mean_sd(&ises);
            SimResult {
                model: model.name.clone(),
                selector: name.to_string(),
                n,
                replicates: ises.len(),
                mean_ise: mean,
                sd_ise: sd,
                mc_stderr: if ises.is_empty() {
                    f64::NAN
                } else {
                    sd / (ises.len() as f64).sqrt()
                },
                seed,
                fallbacks,
                hard_errors,
            }
        })
        .collect())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Markdown,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            "json" => Ok(Self::Json),
            _ => Err(Error::domain(format!("unknown table format '{s}'"))),
        }
    }
}

fn cell(r: &SimResult) -> String {
    format!("{:.3} ({:.3})", 100.0 * r.mean_ise, 100.0 * r.sd_ise)
}

/// League table: one row per (model, n), one column per selector, cells
/// `mean (sd)` of ISE×100. Markdown bolds the smallest non-gold mean.
pub fn emit_table(results: &[SimResult], format: TableFormat) -> Result<String> {
    if results.is_empty() {
        return Err(Error::domain("no results to tabulate"));
    }
    if format == TableFormat::Json {
        return serde_json::to_string_pretty(results).map_err(|e| Error::Io(e.to_string()));
    }
    let mut columns: Vec<&str> = Vec::new();
    let mut rows: Vec<(&str, usize)> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), &SimResult> = BTreeMap::new();
    for r in results {
        let c = position_or_push(&mut columns, r.selector.as_str());
        let row = position_or_push(&mut rows, (r.model.as_str(), r.n));
        cells.insert((row, c), r);
    }
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let header = ["model", "n"]
                .into_iter()
                .map(String::from)
                .chain(columns.iter().map(|c| c.to_string()));
            w.write_record(header).map_err(csv_err)?;
            for (i, (model, n)) in rows.iter().enumerate() {
                let mut rec = vec![model.to_string(), n.to_string()];
                rec.extend(
                    (0..columns.len())
                        .map(|c| cells.get(&(i, c)).map(|r| cell(r)).unwrap_or_default()),
                );
                w.write_record(rec).map_err(csv_err)?;
            }
            out = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
                .expect("csv output is utf-8");
        }
        TableFormat::Markdown => {
            let _ = writeln!(out, "| model | n | {} |", columns.join(" | "));
            let _ = writeln!(out, "|---|---:|{}", "---:|".repeat(columns.len()));
            for (i, (model, n)) in rows.iter().enumerate() {
                let best = (0..columns.len())
                    .filter(|&c| columns[c] != Method::Gs.name())
                    .filter_map(|c| cells.get(&(i, c)).map(|r| (c, r.mean_ise)))
                    .filter(|(_, m)| m.is_finite())
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(c, _)| c);
                let row: Vec<String> = (0..columns.len())
                    .map(|c| match cells.get(&(i, c)) {
                        Some(r) if Some(c) == best => format!("**{}**", cell(r)),
                        Some(r) => cell(r),
                        None => String::new(),
                    })
                    .collect();
                let _ = writeln!(out, "| {model} | {n} | {} |", row.join(" | "));
            }
        }
        TableFormat::Json => unreachable!(),
    }
    Ok(out)
}

fn position_or_push<T: PartialEq>(v: &mut Vec<T>, x: T) -> usize {
    v.iter().position(|y| *y == x).unwrap_or_else(|| {
        v.push(x);
        v.len() - 1
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::integrate_circle;
    use std::f64::consts::PI;

    #[test]
    fn zoo_densities() {
        let quad = QuadratureConfig::with_tol(1e-12);
        for m in builtin_models() {
            let mass = integrate_circle(|t| m.density(t), &quad).unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "{}", m.name);
            let mut rng = replicate_rng(1, 0);
            let s = m.sample(&mut rng, 200).unwrap();
            assert!(s.angles().iter().all(|t| (-PI..PI).contains(t)));
        }
        let u = model_by_name("U").unwrap();
        assert!((u.density(1.3) - 0.5 / PI).abs() < 1e-15);
        let bi = model_by_name("vm-mix2").unwrap();
        for t in [-2.0, 0.3, 1.1] {
            assert!((bi.density(t) - bi.density(t - PI)).abs() < 1e-12);
        }
    }

    fn small_cfg() -> SimConfig {
        SimConfig {
            gold_grid: 40,
            ..SimConfig::default()
        }
    }

    #[test]
    fn reproducible_and_gold_is_smallest() {
        let m = model_by_name("VM2").unwrap();
        let a = run_monte_carlo(&m, &[Method::Rt, Method::Dpi], 60, 12, 9, &small_cfg()).unwrap();
        let b = run_monte_carlo(
            &m,
            &[Method::Rt, Method::Dpi, Method::Gs],
            60,
            12,
            9,
            &small_cfg(),
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.len(), 3);
        assert_eq!(a[2].selector, "gs");
        for r in &a {
            assert!(r.mean_ise >= 0.0);
            assert!((r.mc_stderr - r.sd_ise / (r.replicates as f64).sqrt()).abs() < 1e-15);
            assert!(a[2].mean_ise <= r.mean_ise + r.mc_stderr);
        }
    }

    #[test]
    fn gold_ise_matches_quadrature() {
        let m = model_by_name("SKEW").unwrap();
        let cfg = small_cfg();
        let ctx = IseContext {
            model: &m,
            truth: m.fourier().unwrap(),
            trunc: cfg.selector.trunc,
            quad: QuadratureConfig::with_tol(1e-11),
        };
        let mut rng = replicate_rng(3, 4);
        let s = m.sample(&mut rng, 80).unwrap();
        let mut moments = EmpiricalMoments::new(&s, 10);
        for nu in [0.0, 0.5, 0.9, 0.99] {
            let k = KernelSpec::new(cfg.selector.kernel, nu).unwrap();
            let est = KernelDensity::new(&s, &k, 0, &ctx.trunc).unwrap();
            let q = ise_exact(&est, |t| m.density(t), &ctx.quad).unwrap();
            let f = ctx.ise(&s, &mut moments, &k).unwrap();
            assert!((q - f).abs() < 1e-9, "nu {nu}: {q} vs {f}");
        }
    }

    #[test]
    fn tables() {
        let r = |model: &str, sel: &str, mean: f64| SimResult {
            model: model.into(),
            selector: sel.into(),
            n: 50,
            replicates: 10,
            mean_ise: mean,
            sd_ise: 0.001,
            mc_stderr: 0.001 / 10f64.sqrt(),
            seed: 1,
            fallbacks: 0,
            hard_errors: 0,
        };
        let one = emit_table(&[r("U", "rt", 0.00064)], TableFormat::Csv).unwrap();
        let mut rd = csv::Reader::from_reader(one.as_bytes());
        let recs: Vec<csv::StringRecord> = rd.records().map(|x| x.unwrap()).collect();
        assert_eq!(recs.len(), 1);
        assert_eq!(&recs[0][2], "0.064 (0.100)");

        let rs = [
            r("U", "rt", 0.002),
            r("U", "dpi", 0.001),
            r("U", "gs", 0.0005),
        ];
        let md = emit_table(&rs, TableFormat::Markdown).unwrap();
        assert!(md.contains("**0.100 (0.100)**"));
        assert!(!md.contains("**0.050"));
        let js = emit_table(&rs, TableFormat::Json).unwrap();
        let back: Vec<SimResult> = serde_json::from_str(&js).unwrap();
        assert_eq!(back, rs.to_vec());
    }
}
