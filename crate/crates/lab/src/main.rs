use std::cmp::Ordering;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gneiting_core::covariance::{make_radial, Family, Role};
use gneiting_core::cyclic::{self, Budget, Domain, Kernel, Method};
use gneiting_core::geometry::{BodyKind, ConvexBody};
use gneiting_core::regimes::{classify, LimitLaw, RegimeReport};
use gneiting_core::rosenblatt::{RosenblattOptions, RosenblattSpec};
use gneiting_lab::config::{Experiment, ExperimentConfig};
use gneiting_lab::ensemble::run_ensemble;
use gneiting_lab::exec::{build_pool, RayonExecutor};
use gneiting_lab::fieldsim::{FieldSampler, GridSpec};
use gneiting_lab::io::{num, write_csv, write_csv_to, write_json, write_raw, Provenance, RawHeader};
use gneiting_lab::verify::{run_suite, Suite};
use gneiting_lab::{Error, Result};
use serde_json::json;

/// Simulation and verification toolkit for Gneiting-class random fields.
#[derive(Debug, Parser)]
#[command(name = "gneiting", version)]
struct Cli {
    /// Worker threads (GNEITING_THREADS takes precedence; default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Classify (d1, d2, R, rho1, rho2) into a variance regime.
    Classify(ClassifyArgs),
    /// Simulate Y(t) replicates for every t of a config.
    Simulate(SimulateArgs),
    /// Cyclic coefficients c_k of a kernel on a domain.
    Cumulants(CumulantsArgs),
    /// Density, CDF and cumulants of a Rosenblatt-type law.
    Rosenblatt(RosenblattArgs),
    /// Run a verification suite; exit 0 on pass, 1 on fail.
    Verify(VerifyArgs),
    /// Separability gap sequence for a config.
    Separability(SeparabilityArgs),
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    d1: usize,
    #[arg(long)]
    d2: usize,
    /// Hermite rank.
    #[arg(long = "R", value_name = "R")]
    rank: usize,
    #[arg(long, required_unless_present = "grid")]
    rho1: Option<f64>,
    #[arg(long, required_unless_present = "grid")]
    rho2: Option<f64>,
    /// Emit a CSV over a (rho1, rho2) grid instead of one report.
    #[arg(long)]
    grid: bool,
    /// rho1 range `lo:hi:n` (cell midpoints); default `0:d1:100`.
    #[arg(long, requires = "grid")]
    rho1_range: Option<String>,
    /// rho2 range `lo:hi:n`; default `0:1.5*d2:100`.
    #[arg(long, requires = "grid")]
    rho2_range: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV of `t,replicate,y`.
    #[arg(long)]
    out: PathBuf,
    /// Also dump replicate 0 of the first t as a raw field.
    #[arg(long)]
    raw: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CumulantsArgs {
    /// `power-law` or a covariance family (`gen-cauchy`, `exponential`, ...).
    #[arg(long, default_value = "power-law")]
    kernel: String,
    #[arg(long)]
    alpha: Option<f64>,
    /// Family parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Vec<f64>,
    /// `box<d>` or `ball<d>` (unit box, ball of radius 1/2).
    #[arg(long, default_value = "box1")]
    domain: String,
    /// Single order or range `lo..hi` (inclusive).
    #[arg(long, default_value = "2..4")]
    k: String,
    /// `quadrature`, `mc` or `qmc`; default quadrature on 1-D bodies, mc otherwise.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value_t = 32)]
    batches: usize,
    #[arg(long, default_value_t = 20_000)]
    per_batch: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RosenblattArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value = "box1")]
    body1: String,
    #[arg(long, default_value = "box1")]
    body2: String,
    /// `lo:hi:step`, or `auto` for a tail-bound range.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    grid: String,
    /// Grid points for `--grid auto`.
    #[arg(long, default_value_t = 2001)]
    points: usize,
    #[arg(long, default_value_t = gneiting_core::rosenblatt::DEFAULT_ORDER)]
    order: usize,
    /// CSV of `x,pdf,cdf` (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON with cumulants and inversion diagnostics (default: next to `--out`).
    #[arg(long)]
    cumulants: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    suite: Suite,
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` of the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SeparabilityArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `budgets.k`.
    #[arg(long)]
    k: Option<usize>,
    /// CSV path (default `<output_dir>/separability_gap.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let pool = build_pool(cli.threads);
    match pool.install(|| run(cli.cmd)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// `Ok(false)` means a verification ran and failed.
fn run(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Classify(a) => cmd_classify(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Cumulants(a) => cmd_cumulants(a),
        Cmd::Rosenblatt(a) => cmd_rosenblatt(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Separability(a) => cmd_separability(a),
    }
    .map(|()| true)
    .or_else(|e| match e {
        VerifyFailed => Ok(false),
        Other(e) => Err(e),
    })
}

enum Outcome {
    VerifyFailed,
    Other(Error),
}
use Outcome::{Other, VerifyFailed};

impl From<Error> for Outcome {
    fn from(e: Error) -> Self {
        Other(e)
    }
}

impl From<gneiting_core::Error> for Outcome {
    fn from(e: gneiting_core::Error) -> Self {
        Other(e.into())
    }
}

type CmdResult = std::result::Result<(), Outcome>;

fn config_error(msg: impl Into<String>) -> Outcome {
    Other(Error::Config(msg.into()))
}

fn emit_csv(out: Option<&Path>, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    match out {
        Some(p) => write_csv(p, prov, header, rows),
        None => ignore_pipe(write_csv_to(std::io::stdout().lock(), prov, header, rows)),
    }
}

/// Closed pipes (`| head`) are not an error.
fn ignore_pipe(r: std::io::Result<()>) -> Result<()> {
    match r {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn print_stdout(text: &str) -> Result<()> {
    ignore_pipe(writeln!(std::io::stdout().lock(), "{text}"))
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn report_json(r: &RegimeReport) -> serde_json::Value {
    let law = match r.limit_law {
        LimitLaw::Gaussian => json!({"kind": "gaussian"}),
        LimitLaw::Rosenblatt { alpha, beta } => json!({"kind": "rosenblatt", "alpha": alpha, "beta": beta}),
        LimitLaw::Unknown => json!({"kind": "unknown"}),
    };
    let i = &r.inputs;
    json!({
        "regime": r.regime.name(),
        "exponent1": r.exponent1,
        "exponent2": r.exponent2,
        "limit_law": law,
        "inputs": {"d1": i.d1, "d2": i.d2, "R": i.rank, "rho1": i.rho1, "rho2": i.rho2},
    })
}

/// `lo:hi:n` as `n` cell midpoints of `(lo, hi)`.
fn midpoints(spec: &str) -> std::result::Result<Vec<f64>, Outcome> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || config_error(format!("range '{spec}' is not lo:hi:n"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 || lo.partial_cmp(&hi) != Some(Ordering::Less) {
        return Err(bad());
    }
    Ok((0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect())
}

fn cmd_classify(a: ClassifyArgs) -> CmdResult {
    if a.d1 == 0 || a.d2 == 0 || a.rank == 0 {
        return Err(config_error("d1, d2 and R must be positive"));
    }
    if !a.grid {
        let (rho1, rho2) = (a.rho1.expect("required"), a.rho2.expect("required"));
        if !(rho1 > 0.0 && rho2 > 0.0 && rho1.is_finite() && rho2.is_finite()) {
            return Err(config_error("rho1 and rho2 must be positive and finite"));
        }
        let text = serde_json::to_string_pretty(&report_json(&classify(a.d1, a.d2, a.rank, rho1, rho2))).map_err(Error::from)?;
        match &a.out {
            Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e))?,
            None => print_stdout(&text)?,
        }
        return Ok(());
    }
    let r1 = midpoints(a.rho1_range.as_deref().unwrap_or(&format!("0:{}:100", a.d1)))?;
    let r2 = midpoints(a.rho2_range.as_deref().unwrap_or(&format!("0:{}:100", 1.5 * a.d2 as f64)))?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, num);
    let mut rows = Vec::with_capacity(r1.len() * r2.len());
    for &x in &r1 {
        for &y in &r2 {
            let r = classify(a.d1, a.d2, a.rank, x, y);
            rows.push(vec![num(x), num(y), r.regime.name().into(), opt(r.exponent1), opt(r.exponent2)]);
        }
    }
    let prov = Provenance::new(command_line(), None, None);
    emit_csv(a.out.as_deref(), &prov, &["rho1", "rho2", "regime", "e1", "e2"], &rows)?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let exp = ExperimentConfig::load(&a.config)?;
    let c = &exp.config;
    let prov = Provenance::new(command_line(), Some(exp.config_hash.clone()), Some(c.master_seed));
    let mut rows = Vec::new();
    for &t in &c.t_ladder {
        log::info!("simulate t={t} reps={}", c.n_reps);
        let run = run_ensemble(&exp.covariance, &exp.window, t, &exp.functional.kind, c.n_reps, c.master_seed, &exp.ensemble_options())?;
        if !run.assumption_ok {
            log::warn!("rate condition violated at t={t}");
        }
        for (i, r) in run.ensemble.results.iter().enumerate() {
            rows.push(vec![num(t), i.to_string(), num(r.y_raw)]);
        }
    }
    write_csv(&a.out, &prov, &["t", "replicate", "y"], &rows)?;
    if let Some(raw) = &a.raw {
        dump_field(&exp, raw, &prov)?;
    }
    Ok(())
}

fn dump_field(exp: &Experiment, path: &Path, prov: &Provenance) -> Result<()> {
    let c = &exp.config;
    let t = c.t_ladder[0];
    let opts = exp.ensemble_options();
    let grid = GridSpec::with_cap(&exp.window, t, opts.h, opts.node_cap)?;
    let sampler = FieldSampler::new(&exp.covariance, &grid, &opts.sampler)?;
    let (values, _) = sampler.sample_pair(&mut FieldSampler::stream(c.master_seed, 0));
    let header = RawHeader { node_counts: &grid.node_counts, h: grid.h, t, seed: c.master_seed, method: sampler.method.name(), provenance: prov };
    write_raw(path, &header, &values)
}

fn parse_body(s: &str) -> std::result::Result<ConvexBody, Outcome> {
    let (kind, dim) = if let Some(d) = s.strip_prefix("box") {
        (BodyKind::UnitBox, d)
    } else if let Some(d) = s.strip_prefix("ball") {
        (BodyKind::CenteredBall, d)
    } else {
        return Err(config_error(format!("unknown domain '{s}' (expected box<d> or ball<d>)")));
    };
    let dim: usize = dim.parse().map_err(|_| config_error(format!("bad dimension in '{s}'")))?;
    if dim == 0 {
        return Err(config_error("domain dimension must be positive"));
    }
    Ok(match kind {
        BodyKind::UnitBox => ConvexBody::unit_box(dim),
        _ => ConvexBody::ball(dim, 0.5),
    })
}

fn parse_k(s: &str) -> std::result::Result<Vec<usize>, Outcome> {
    let bad = || config_error(format!("bad --k '{s}'"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.trim_start_matches('=').parse().map_err(|_| bad())?),
        None => {
            let k = s.parse().map_err(|_| bad())?;
            (k, k)
        }
    };
    if lo < 2 || hi < lo {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn cmd_cumulants(a: CumulantsArgs) -> CmdResult {
    let body = parse_body(&a.domain)?;
    let kernel = if a.kernel == "power-law" {
        Kernel::PowerLaw { alpha: a.alpha.ok_or_else(|| config_error("power-law needs --alpha"))? }
    } else {
        let family = Family::parse(&a.kernel).ok_or_else(|| config_error(format!("unknown kernel '{}'", a.kernel)))?;
        Kernel::Radial(make_radial(family, &a.params, body.dim, Role::Factor1)?)
    };
    let method = match a.method.as_deref() {
        None if body.dim == 1 => Method::TensorQuadrature,
        None | Some("mc") => Method::MonteCarlo,
        Some("quadrature") => Method::TensorQuadrature,
        Some("qmc") => Method::QuasiMonteCarlo,
        Some(m) => return Err(config_error(format!("unknown method '{m}'"))),
    };
    let budget = Budget { batches: a.batches, per_batch: a.per_batch, seed: a.seed, ..Budget::default() };
    let domain = Domain::body(body);
    let mut rows = Vec::new();
    for k in parse_k(&a.k)? {
        let c = cyclic::cyclic_integral_with(&kernel, &domain, k, method, &budget, &RayonExecutor)?;
        rows.push(vec![k.to_string(), num(c.value), c.stderr.map_or_else(String::new, num), c.n_points.to_string(), c.method.name().into()]);
    }
    let prov = Provenance::new(command_line(), None, Some(a.seed));
    emit_csv(a.out.as_deref(), &prov, &["k", "value", "stderr", "n_points", "method"], &rows)?;
    Ok(())
}

fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, Outcome> {
    let bad = || config_error(format!("grid '{s}' is not lo:hi:step"));
    let p: Vec<f64> = s.split(':').map(|x| x.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    if p.len() != 3 || p[0].partial_cmp(&p[1]) != Some(Ordering::Less) || p[2].is_nan() || p[2] <= 0.0 {
        return Err(bad());
    }
    let n = ((p[1] - p[0]) / p[2] + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| p[0] + i as f64 * p[2]).collect())
}

fn cmd_rosenblatt(a: RosenblattArgs) -> CmdResult {
    let opts = RosenblattOptions { order: a.order, ..Default::default() };
    let spec = RosenblattSpec::with_executor(a.alpha, a.beta, parse_body(&a.body1)?, parse_body(&a.body2)?, &opts, &RayonExecutor)?;
    let xs = if a.grid == "auto" { spec.auto_grid(a.points) } else { parse_grid(&a.grid)? };
    let pdf = spec.pdf(&xs)?;
    let cdf = spec.cdf(&xs)?;
    let rows: Vec<Vec<String>> = xs.iter().zip(&pdf.density).zip(&cdf).map(|((x, p), c)| vec![num(*x), num(*p), num(*c)]).collect();
    let prov = Provenance::new(command_line(), None, None);
    emit_csv(a.out.as_deref(), &prov, &["x", "pdf", "cdf"], &rows)?;

    let mass = trapezoid(&xs, &pdf.density);
    let cumulants: Vec<_> = spec.cumulants().iter().map(|c| json!({"k": c.k, "value": c.value, "stderr": c.stderr})).collect();
    let body = json!({
        "alpha": a.alpha,
        "beta": a.beta,
        "cumulants": cumulants,
        "grid_mass": mass,
        "clip_mass": pdf.clip_mass,
        "aliasing_bound": pdf.aliasing_bound,
        "xi_max": pdf.xi_max,
        "xi_step": pdf.xi_step,
        "gaussian_part": spec.gaussian_part(),
    });
    let json_path = a.cumulants.clone().or_else(|| a.out.as_ref().map(|p| p.with_extension("cumulants.json")));
    match json_path {
        Some(p) => write_json(&p, &prov, &body)?,
        None => {
            let text = serde_json::to_string(&body).map_err(Error::from)?;
            writeln!(std::io::stderr(), "{text}").map_err(|e| Error::io("<stderr>", e))?;
        }
    }
    Ok(())
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let mut exp = ExperimentConfig::load(&a.config)?;
    if let Some(d) = a.out_dir {
        exp.config.output_dir = d;
    }
    let v = run_suite(a.suite, &exp)?;
    print_stdout(&serde_json::to_string_pretty(&v).map_err(Error::from)?)?;
    if v.pass {
        Ok(())
    } else {
        Err(VerifyFailed)
    }
}

fn cmd_separability(a: SeparabilityArgs) -> CmdResult {
    let exp = ExperimentConfig::load(&a.config)?;
    let k = a.k.unwrap_or(exp.config.budgets.k);
    let gaps = cyclic::separability_gap_with(&exp.covariance, &exp.window, k, &exp.config.t_ladder, &exp.mc_budget(), &RayonExecutor)?;
    let rows: Vec<Vec<String>> = gaps
        .iter()
        .map(|g| vec![num(g.t), num(g.gap), num(g.stderr), num(g.joint), num(g.product), g.diff_stderr.map_or_else(String::new, num)])
        .collect();
    let out = a.out.unwrap_or_else(|| exp.config.output_dir.join("separability_gap.csv"));
    let prov = Provenance::new(command_line(), Some(exp.config_hash.clone()), Some(exp.config.master_seed));
    write_csv(&out, &prov, &["t", "gap", "stderr", "joint", "product", "diff_stderr"], &rows)?;
    Ok(())
}
