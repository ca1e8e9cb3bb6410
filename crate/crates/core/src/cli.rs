//! Command-line front end: ingestion, selection, density grids, mode
//! extraction and simulation runs.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    equispaced_grid, wrap_angle, CircularSample, DensityGrid, KernelDensity, DEFAULT_GRID_SIZE,
};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::selectors::{select, Method, SelectorConfig, SmoothingSelection};
use crate::sim::{
    builtin_models, emit_table, model_by_name, run_monte_carlo, SimConfig, SimResult, TableFormat,
};

const MINUTES_PER_DAY: f64 = 1440.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Radians,
    Degrees,
    /// Clock time `HH:MM` or `HHMM`.
    Hhmm,
    /// Minutes after midnight.
    Minutes,
}

impl InputFormat {
    pub fn is_time(self) -> bool {
        matches!(self, InputFormat::Hhmm | InputFormat::Minutes)
    }
}

/// Where and how to read a sample of angles.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestSpec {
    pub path: PathBuf,
    pub format: InputFormat,
    /// Column name (requires a header row) or 0-based index.
    pub column: Option<String>,
}

/// Maps minutes after midnight to `[−π, π)`; midnight is `−π`.
pub fn minutes_to_angle(t: f64) -> f64 {
    wrap_angle(2.0 * PI * t / MINUTES_PER_DAY - PI)
}

/// Inverse of [`minutes_to_angle`] in `[0, 1440)`.
pub fn angle_to_minutes(theta: f64) -> f64 {
    let t = (wrap_angle(theta) + PI) * MINUTES_PER_DAY / (2.0 * PI);
    t.rem_euclid(MINUTES_PER_DAY)
}

/// `HH:MM`, rounded to the nearest minute.
pub fn angle_to_clock(theta: f64) -> String {
    let m = (angle_to_minutes(theta).round() as i64).rem_euclid(1440);
    format!("{:02}:{:02}", m / 60, m % 60)
}

pub fn parse_clock(s: &str) -> Option<f64> {
    let s = s.trim();
    let (h, m) = match s.split_once(':') {
        Some((h, m)) => (h, m),
        None if s.len() == 3 || s.len() == 4 => s.split_at(s.len() - 2),
        None => return None,
    };
    if h.is_empty() || m.len() != 2 || !h.chars().chain(m.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
    (h < 24 && m < 60).then_some((60 * h + m) as f64)
}

fn field_to_angle(field: &str, format: InputFormat) -> Option<f64> {
    let num = || field.trim().parse::<f64>().ok().filter(|x| x.is_finite());
    match format {
        InputFormat::Radians => num().map(wrap_angle),
        InputFormat::Degrees => num().map(|d| wrap_angle(d * PI / 180.0)),
        InputFormat::Minutes => num().map(minutes_to_angle),
        InputFormat::Hhmm => parse_clock(field).map(minutes_to_angle),
    }
}

/// Parses delimited text with one observation per row. Blank lines and
/// lines starting with `#` are skipped; a first row that does not parse is
/// taken as a header.
pub fn parse_angles(
    text: &str,
    format: InputFormat,
    column: Option<&str>,
) -> Result<CircularSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let index_col = column.and_then(|c| c.parse::<usize>().ok());
    let mut col = index_col.unwrap_or(0);
    let mut angles = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            if let (Some(name), None) = (column, index_col) {
                col = rec
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("no column named '{name}' in header"),
                    })?;
                continue;
            }
            if rec
                .get(col)
                .and_then(|f| field_to_angle(f, format))
                .is_none()
            {
                continue;
            }
        }
        let field = rec.get(col).ok_or_else(|| Error::Parse {
            line,
            message: format!("missing column {col}"),
        })?;
        let theta = field_to_angle(field, format).ok_or_else(|| Error::Parse {
            line,
            message: format!("cannot read '{field}' as {format:?}"),
        })?;
        angles.push(theta);
    }
    CircularSample::new(angles)
}

pub fn ingest(spec: &IngestSpec) -> Result<CircularSample> {
    let mut text = String::new();
    if spec.path == Path::new("-") {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(&spec.path)
            .map_err(|e| Error::Io(format!("{}: {e}", spec.path.display())))?;
    }
    parse_angles(&text, spec.format, spec.column.as_deref())
}

pub fn cmd_select(
    sample: &CircularSample,
    cfg: &SelectorConfig,
    method: Method,
) -> Result<SmoothingSelection> {
    select(sample, method, cfg)
}

/// Either a selector run or a fixed concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    Select(Method),
    Fixed(f64),
}

fn resolve(
    sample: &CircularSample,
    cfg: &SelectorConfig,
    how: Smoothing,
) -> Result<(KernelSpec, String)> {
    match how {
        Smoothing::Select(m) => Ok((select(sample, m, cfg)?.kernel, m.name().to_string())),
        Smoothing::Fixed(nu) => Ok((KernelSpec::new(cfg.kernel, nu)?, "fixed".to_string())),
    }
}

/// `f̂^{(r)}` on `grid_size` equispaced points with `r = cfg.r`, as CSV with
/// a `#` metadata header.
pub fn cmd_density(
    sample: &CircularSample,
    cfg: &SelectorConfig,
    how: Smoothing,
    grid_size: usize,
) -> Result<(DensityGrid, String)> {
    if grid_size < 2 {
        return Err(Error::domain("grid size must be at least 2"));
    }
    let (k, label) = resolve(sample, cfg, how)?;
    let grid =
        KernelDensity::new(sample, &k, cfg.r, &cfg.trunc)?.on_grid(&equispaced_grid(grid_size));
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# method={label} kernel={} nu={:.9e} n={} deriv_order={}",
        k.family(),
        k.nu(),
        sample.len(),
        cfg.r
    );
    text.push_str(&grid.to_csv());
    Ok((grid, text))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Direction {
    pub angle: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clock: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeReport {
    pub selection: SmoothingSelection,
    pub uniform: bool,
    pub modes: Vec<Direction>,
    pub antimodes: Vec<Direction>,
    #[serde(skip)]
    pub deriv_grid: DensityGrid,
}

/// One point per 30 seconds of clock time.
pub const MODE_GRID: usize = 2880;

/// Modes and antimodes of the first-derivative estimate: sign changes of
/// `f̂′` on a fine grid, refined by bisection to 1e-6 rad.
pub fn cmd_modes(
    sample: &CircularSample,
    cfg: &SelectorConfig,
    how: Smoothing,
    clock: bool,
) -> Result<ModeReport> {
    let cfg = SelectorConfig { r: 1, ..*cfg };
    let selection = match how {
        Smoothing::Select(m) => select(sample, m, &cfg)?,
        Smoothing::Fixed(_) => {
            let (k, _) = resolve(sample, &cfg, how)?;
            let mut s = select(sample, Method::Rt, &cfg)?;
            s.kernel = k;
            s.nu = k.nu();
            s.fallback_uniform = k.is_uniform();
            s
        }
    };
    let thetas = equispaced_grid(MODE_GRID);
    let est = KernelDensity::new(sample, &selection.kernel, 1, &cfg.trunc)?;
    let deriv_grid = est.on_grid(&thetas);
    let mut report = ModeReport {
        uniform: selection.kernel.is_uniform(),
        selection,
        modes: Vec::new(),
        antimodes: Vec::new(),
        deriv_grid,
    };
    if report.uniform {
        return Ok(report);
    }
    let step = 2.0 * PI / MODE_GRID as f64;
    let v = &report.deriv_grid.values;
    for i in 0..MODE_GRID {
        let (a, b) = (v[i], v[(i + 1) % MODE_GRID]);
        let falling = a > 0.0 && b <= 0.0;
        let rising = a < 0.0 && b >= 0.0;
        if !(falling || rising) {
            continue;
        }
        let (mut lo, mut hi) = (thetas[i], thetas[i] + step);
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            let fm = est.value(mid);
            if (fm > 0.0) == (a > 0.0) && fm != 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let angle = wrap_angle(0.5 * (lo + hi));
        let d = Direction {
            angle,
            clock: clock.then(|| angle_to_clock(angle)),
        };
        if falling {
            report.modes.push(d);
        } else {
            report.antimodes.push(d);
        }
    }
    Ok(report)
}

pub fn cmd_simulate(
    models: &[String],
    selectors: &[Method],
    ns: &[usize],
    replicates: usize,
    seed: u64,
    cfg: &SimConfig,
) -> (Vec<SimResult>, Vec<Error>) {
    let zoo = if models.is_empty() || models.iter().any(|m| m.eq_ignore_ascii_case("all")) {
        Ok(builtin_models())
    } else {
        models
            .iter()
            .map(|m| model_by_name(m))
            .collect::<Result<Vec<_>>>()
    };
    let zoo = match zoo {
        Ok(z) => z,
        Err(e) => return (Vec::new(), vec![e]),
    };
    let mut results = Vec::new();
    let mut errors = Vec::new();
    for model in &zoo {
        for &n in ns {
            match run_monte_carlo(model, selectors, n, replicates, seed, cfg) {
                Ok(r) => results.extend(r),
                Err(e) => errors.push(e),
            }
        }
    }
    (results, errors)
}

#[derive(Debug, Parser)]
#[command(
    name = "circkde",
    version,
    about = "Circular kernel density estimation with plug-in smoothing selection"
)]
pub struct Cli {
    /// Seed for mixture-fit restarts and simulation streams.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select the smoothing parameter and print it as JSON.
    Select {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        selector: SelectorArgs,
        #[arg(long, default_value_t = 0)]
        deriv_order: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the density or derivative estimate on a grid as CSV.
    Density {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        selector: SelectorArgs,
        #[arg(long, default_value_t = 0)]
        deriv_order: usize,
        #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
        grid_size: usize,
        /// Use this concentration instead of a selector.
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report modes and antimodes from the first-derivative estimate.
    Modes {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        selector: SelectorArgs,
        #[arg(long)]
        nu: Option<f64>,
        /// Also write the derivative grid as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Monte-Carlo benchmark and write CSV and markdown tables.
    Simulate {
        /// Model names, or `all`.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        models: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "rt,dpi,ste,lcv")]
        selectors: Vec<Method>,
        #[arg(long = "n", value_delimiter = ',', default_value = "50,100")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long, default_value_t = 200)]
        gold_grid: usize,
        #[command(flatten)]
        selector: SelectorArgs,
        /// Output prefix; writes `<out>.csv`, `<out>.md` and `<out>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input file, or `-` for stdin.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Radians)]
    pub format: InputFormat,
    /// Column name or 0-based index.
    #[arg(long)]
    pub column: Option<String>,
}

impl InputArgs {
    fn spec(&self) -> IngestSpec {
        IngestSpec {
            path: self.input.clone(),
            format: self.format,
            column: self.column.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectorArgs {
    #[arg(long, default_value = "vonmises")]
    pub kernel: KernelFamily,
    #[arg(long, default_value = "vonmises")]
    pub pilot_kernel: KernelFamily,
    #[arg(long, default_value = "dpi")]
    pub method: Method,
    #[arg(long, default_value_t = 2)]
    pub nstage: usize,
    #[arg(long, default_value_t = 1)]
    pub mmax: usize,
    #[arg(long)]
    pub exact_inversion: bool,
}

impl SelectorArgs {
    fn config(&self, r: usize, seed: u64) -> SelectorConfig {
        SelectorConfig {
            kernel: self.kernel,
            pilot: self.pilot_kernel,
            r,
            nstage: self.nstage,
            m_max: self.mmax,
            exact_inversion: self.exact_inversion,
            seed,
            ..SelectorConfig::default()
        }
    }

    fn smoothing(&self, nu: Option<f64>) -> Smoothing {
        nu.map_or(Smoothing::Select(self.method), Smoothing::Fixed)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Prints a structured error to stderr.
pub fn report_error(e: &Error) {
    let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{body}");
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            1
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let seed = cli.seed;
    match cli.command {
        Command::Select {
            input,
            selector,
            deriv_order,
            out,
        } => {
            let sample = ingest(&input.spec())?;
            let sel = cmd_select(
                &sample,
                &selector.config(deriv_order, seed),
                selector.method,
            )?;
            emit(out.as_deref(), &to_json(&sel))?;
        }
        Command::Density {
            input,
            selector,
            deriv_order,
            grid_size,
            nu,
            out,
        } => {
            let sample = ingest(&input.spec())?;
            let cfg = selector.config(deriv_order, seed);
            let (_, text) = cmd_density(&sample, &cfg, selector.smoothing(nu), grid_size)?;
            emit(out.as_deref(), &text)?;
        }
        Command::Modes {
            input,
            selector,
            nu,
            out,
        } => {
            let sample = ingest(&input.spec())?;
            let cfg = selector.config(1, seed);
            let report = cmd_modes(
                &sample,
                &cfg,
                selector.smoothing(nu),
                input.format.is_time(),
            )?;
            if let Some(p) = out.as_deref() {
                emit(Some(p), &report.deriv_grid.to_csv())?;
            }
            print!("{}", to_json(&report));
        }
        Command::Simulate {
            models,
            selectors,
            ns,
            replicates,
            gold_grid,
            selector,
            out,
        } => {
            let cfg = SimConfig {
                selector: selector.config(0, seed),
                gold_grid,
            };
            let (results, errors) = cmd_simulate(&models, &selectors, &ns, replicates, seed, &cfg);
            for e in &errors {
                report_error(e);
            }
            if !results.is_empty() {
                let md = emit_table(&results, TableFormat::Markdown)?;
                if let Some(prefix) = out {
                    let with_ext = |ext: &str| {
                        let mut p = prefix.clone().into_os_string();
                        p.push(ext);
                        PathBuf::from(p)
                    };
                    emit(
                        Some(&with_ext(".csv")),
                        &emit_table(&results, TableFormat::Csv)?,
                    )?;
                    emit(Some(&with_ext(".md")), &md)?;
                    emit(
                        Some(&with_ext(".json")),
                        &emit_table(&results, TableFormat::Json)?,
                    )?;
                }
                print!("{md}");
            }
            let hard = results.iter().map(|r| r.hard_errors).sum::<usize>();
            if !errors.is_empty() || hard > 0 {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_round_trip() {
        for m in 0..1440 {
            let hhmm = format!("{:02}:{:02}", m / 60, m % 60);
            let theta = field_to_angle(&hhmm, InputFormat::Hhmm).unwrap();
            assert!((-PI..PI).contains(&theta));
            assert_eq!(angle_to_clock(theta), hhmm);
        }
        assert_eq!(minutes_to_angle(0.0), -PI);
        assert!(minutes_to_angle(720.0).abs() < 1e-15);
        assert_eq!(parse_clock("2025"), Some(1225.0));
        assert_eq!(parse_clock("930"), Some(570.0));
        assert_eq!(parse_clock("24:00"), None);
        assert_eq!(parse_clock("ab:cd"), None);
    }

    #[test]
    fn parsing() {
        let s = parse_angles(
            "# note\ntime,id\n20:25,1\n\n13:29,2\n",
            InputFormat::Hhmm,
            Some("time"),
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        let s = parse_angles("deg\n90\n-90\n450\n", InputFormat::Degrees, None).unwrap();
        assert!((s.angles()[0] - PI / 2.0).abs() < 1e-15);
        assert!((s.angles()[2] - PI / 2.0).abs() < 1e-12);
        let s = parse_angles("a,b\n1,0.5\n2,0.25\n", InputFormat::Radians, Some("1")).unwrap();
        assert_eq!(s.angles(), &[0.5, 0.25]);
        match parse_angles("0.1\n0.2\nnope\n", InputFormat::Radians, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_angles("x\n1\n", InputFormat::Radians, Some("y")),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    fn cluster(center: f64) -> CircularSample {
        // symmetric about the center, so the center is a critical point
        CircularSample::new((0..60).map(|i| wrap_angle(center + 0.2 * (i as f64 / 59.0 - 0.5))))
            .unwrap()
    }

    #[test]
    fn density_grids() {
        let s = cluster(1.0);
        let cfg = SelectorConfig::default();
        let (g, text) = cmd_density(&s, &cfg, Smoothing::Select(Method::Dpi), 512).unwrap();
        assert!((g.trapezoid() - 1.0).abs() < 1e-3);
        assert!(text.starts_with("# method=dpi"));
        let d1 = SelectorConfig { r: 1, ..cfg };
        let (g, _) = cmd_density(&s, &d1, Smoothing::Select(Method::Dpi), 512).unwrap();
        assert!(g.trapezoid().abs() < 1e-3);
        let (g, _) = cmd_density(&s, &cfg, Smoothing::Fixed(0.0), 64).unwrap();
        assert!(g.values.iter().all(|v| (v - 0.5 / PI).abs() < 1e-15));
    }

    #[test]
    fn modes_of_a_cluster() {
        let theta0 = 2.0;
        let s = cluster(theta0);
        let r = cmd_modes(
            &s,
            &SelectorConfig::default(),
            Smoothing::Select(Method::Dpi),
            true,
        )
        .unwrap();
        assert_eq!(r.modes.len(), r.antimodes.len());
        let best = r
            .modes
            .iter()
            .map(|m| wrap_angle(m.angle - theta0).abs())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.modes.len(), 1);
        assert!(best < 2.0 * 2.0 * PI / MODE_GRID as f64, "{best}");
        let u = cmd_modes(&s, &SelectorConfig::default(), Smoothing::Fixed(0.0), false).unwrap();
        assert!(u.uniform && u.modes.is_empty());
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from([
            "circkde",
            "--seed",
            "3",
            "select",
            "x.csv",
            "--format",
            "hhmm",
            "--method",
            "ste",
            "--kernel",
            "wrappednormal",
            "--mmax",
            "2",
            "--exact-inversion",
        ])
        .unwrap();
        assert_eq!(cli.seed, 3);
        let Command::Select {
            input, selector, ..
        } = cli.command
        else {
            panic!()
        };
        assert_eq!(input.format, InputFormat::Hhmm);
        assert_eq!(selector.method, Method::Ste);
        assert!(selector.exact_inversion);
        let cli =
            Cli::try_parse_from(["circkde", "simulate", "--selectors", "rt,dpi", "--n", "50"])
                .unwrap();
        let Command::Simulate { selectors, ns, .. } = cli.command else {
            panic!()
        };
        assert_eq!(selectors, vec![Method::Rt, Method::Dpi]);
        assert_eq!(ns, vec![50]);
    }
}
