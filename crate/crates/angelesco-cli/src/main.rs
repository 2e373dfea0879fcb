//! Command line front end for the kernel library.
//!
//! Subcommands:
//!
//! * `kernel`: one off-diagonal evaluation of the limit kernel by any of the
//!   three routes (or all three, cross-checked to 1e-8).
//! * `converge`: rescaled finite-n kernels against the limit over a list of
//!   n, reporting (n, lhs, rhs, abs_error) rows.
//! * `verify`: named identity suites; JSON report with one entry per check.
//! * `gap`: endpoint of the spectral gap of the limit density.
//! * `grid`: kernel profile K(x, x + sign(x) h/2) or finite-n density
//!   K_n(x, x) over a uniform x grid.
//!
//! Exit codes: 0 success, 1 a verification verdict failed (report still
//! written), 2 invalid flags, 3 a numerical evaluation failed.  Precision is
//! taken from --prec, else the ANGELESCO_PREC_BITS environment variable,
//! else 256 bits.  Output goes to stdout, or with --out to a file written
//! through a temporary sibling and an atomic rename, so no partial files
//! survive a failure.  Identical flags produce byte-identical output.

use angelesco::{
    converge_to_angelesco, gap_endpoint, kernel_double, kernel_finite, kernel_pairing, kernel_psi,
    moments, run_suite, CheckResult, Error, Factor, KernelEvaluation, KernelParams,
    PrecisionContext, ScalingPoint, WeightSpec, WeightTemplate, SUITE_NAMES,
};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rug::Float;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_PREC_BITS: u32 = 256;
const DEFAULT_QUAD_TOL: f64 = 1e-30;
const MAX_SUBDIV: u32 = 20_000;
const PREC_ENV: &str = "ANGELESCO_PREC_BITS";

#[derive(Parser)]
#[command(
    name = "angelesco",
    version,
    about = "High-precision evaluation of the touching-interval scaling kernel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Working precision in bits (overrides ANGELESCO_PREC_BITS; default 256).
    #[arg(long, global = true)]
    prec: Option<u32>,
    /// Quadrature tolerance for the contour integrals.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; default json for kernel/verify/gap, csv for
    /// converge/grid.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the limit kernel at one off-diagonal point.
    Kernel(KernelArgs),
    /// Compare rescaled finite-n kernels with the limit over a list of n.
    Converge(ConvergeArgs),
    /// Run named verification suites and report each check.
    Verify(VerifyArgs),
    /// Endpoint of the spectral gap of the limit density.
    Gap(GapArgs),
    /// Kernel profile or finite-n density on a uniform x grid.
    Grid(GridArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Pairing,
    Double,
    Psi,
    All,
}

#[derive(clap::Args)]
struct KernelArgs {
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    tau: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    method: MethodArg,
}

#[derive(clap::Args)]
struct ConvergeArgs {
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    tau: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    gamma: f64,
    /// Comma-separated block sizes, each evaluated as an (n, n) ensemble.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    nlist: Vec<usize>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Suite name or "all".
    #[arg(long, default_value = "all")]
    suite: String,
    /// Block size for the trace suite.
    #[arg(long, default_value_t = 4)]
    n: usize,
}

#[derive(clap::Args)]
struct GapArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
}

#[derive(clap::Args)]
struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    xmin: f64,
    #[arg(long, allow_hyphen_values = true)]
    xmax: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    tau: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    beta: f64,
    /// Tabulate the finite-n density K_n(x, x) instead of the limit profile.
    #[arg(long = "finite-n")]
    finite_n: Option<usize>,
    /// Left interval endpoint for the finite-n density.
    #[arg(long, allow_hyphen_values = true, default_value_t = -1.0)]
    a: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    gamma: f64,
}

/// Flags every command resolves before computing.
struct RunConfig {
    precision_bits: u32,
    quad_tol: f64,
    output_path: Option<PathBuf>,
    output_format: OutputFormat,
}

/// Terminal failure: exit code plus a message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Failure {
        Failure { code: 2, message: message.into() }
    }

    fn from_error(err: Error, context: &str) -> Failure {
        let code = match err {
            Error::InvalidInput(_) | Error::DomainError(_) | Error::CoincidentPoints => 2,
            _ => 3,
        };
        Failure { code, message: format!("{context}: {err}") }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let default_format = match cli.command {
        Command::Kernel(_) | Command::Verify(_) | Command::Gap(_) => OutputFormat::Json,
        Command::Converge(_) | Command::Grid(_) => OutputFormat::Csv,
    };
    let precision_bits = match cli.prec {
        Some(bits) => bits,
        None => match std::env::var(PREC_ENV) {
            Ok(raw) => raw
                .trim()
                .parse::<u32>()
                .map_err(|_| Failure::invalid(format!("{PREC_ENV} must be an integer, got {raw:?}")))?,
            Err(_) => DEFAULT_PREC_BITS,
        },
    };
    let config = RunConfig {
        precision_bits,
        quad_tol: cli.tol.unwrap_or(DEFAULT_QUAD_TOL),
        output_path: cli.out,
        output_format: cli.format.unwrap_or(default_format),
    };
    let (document, verdict) = match &cli.command {
        Command::Kernel(args) => cmd_kernel(args, &config)?,
        Command::Converge(args) => cmd_converge(args, &config)?,
        Command::Verify(args) => cmd_verify(args, &config)?,
        Command::Gap(args) => cmd_gap(args, &config)?,
        Command::Grid(args) => cmd_grid(args, &config)?,
    };
    write_output(config.output_path.as_deref(), &document)?;
    Ok(verdict)
}

fn context(config: &RunConfig) -> Result<PrecisionContext, Failure> {
    PrecisionContext::new(config.precision_bits, config.quad_tol, MAX_SUBDIV)
        .map_err(|e| Failure::from_error(e, "precision flags"))
}

/// Decimal digits that reproduce every bit of the working precision.
fn decimal_digits(bits: u32) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize
}

fn fmt_float(value: &Float, digits: usize) -> String {
    format!("{value:.digits$e}")
}

fn render_csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn render_json(value: &serde_json::Value) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("json rendering cannot fail");
    out.push('\n');
    out
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), Failure> {
    match path {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(target) => {
            let name = target
                .file_name()
                .ok_or_else(|| Failure::invalid(format!("output path {target:?} has no file name")))?;
            let mut tmp_name = name.to_os_string();
            tmp_name.push(".tmp");
            let tmp = target.with_file_name(tmp_name);
            std::fs::write(&tmp, content)
                .map_err(|e| Failure::invalid(format!("cannot write {tmp:?}: {e}")))?;
            std::fs::rename(&tmp, target)
                .map_err(|e| Failure::invalid(format!("cannot rename {tmp:?} to {target:?}: {e}")))
        }
    }
}

fn require_finite(label: &str, value: f64) -> Result<(), Failure> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Failure::invalid(format!("--{label} must be finite, got {value}")))
    }
}

fn eval_one(
    method: MethodArg,
    x: f64,
    y: f64,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<KernelEvaluation, Failure> {
    let (label, result) = match method {
        MethodArg::Pairing => ("pairing", kernel_pairing(x, y, params, ctx)),
        MethodArg::Double => ("double", kernel_double(x, y, params, ctx)),
        MethodArg::Psi => ("psi", kernel_psi(x, y, params, ctx)),
        MethodArg::All => unreachable!("expanded by the caller"),
    };
    result.map_err(|e| Failure::from_error(e, &format!("kernel method {label} at ({x}, {y})")))
}

fn cmd_kernel(args: &KernelArgs, config: &RunConfig) -> Result<(String, u8), Failure> {
    for (label, v) in [("x", args.x), ("y", args.y)] {
        require_finite(label, v)?;
    }
    if args.x == args.y {
        return Err(Failure::invalid("coincident points unsupported"));
    }
    let params = KernelParams::new(args.beta, args.tau)
        .map_err(|e| Failure::from_error(e, "kernel parameters"))?;
    let ctx = context(config)?;
    let methods: Vec<MethodArg> = match args.method {
        MethodArg::All => vec![MethodArg::Pairing, MethodArg::Double, MethodArg::Psi],
        single => vec![single],
    };
    let evals: Vec<KernelEvaluation> = methods
        .iter()
        .map(|&m| eval_one(m, args.x, args.y, &params, &ctx))
        .collect::<Result<_, _>>()?;
    // Cross-route agreement is part of the "all" contract.
    let mut verdict = 0u8;
    if evals.len() > 1 {
        for i in 0..evals.len() {
            for j in i + 1..evals.len() {
                let a = evals[i].value.to_f64();
                let b = evals[j].value.to_f64();
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                if !(rel < 1e-8) {
                    eprintln!(
                        "warning: methods {} and {} disagree: relative spread {rel:e}",
                        evals[i].method, evals[j].method
                    );
                    verdict = 1;
                }
            }
        }
    }
    let digits = decimal_digits(config.precision_bits);
    let document = match config.output_format {
        OutputFormat::Json => {
            let results: Vec<serde_json::Value> = evals
                .iter()
                .map(|e| {
                    json!({
                        "method": e.method.to_string(),
                        "value": e.value.to_f64(),
                        "imag_residual": e.imag_residual.to_f64(),
                        "error_estimate": e.abs_error_estimate.to_f64(),
                    })
                })
                .collect();
            render_json(&json!({
                "schema": 1,
                "x": args.x,
                "y": args.y,
                "beta": args.beta,
                "tau": args.tau,
                "results": results,
            }))
        }
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = evals
                .iter()
                .map(|e| {
                    vec![
                        e.method.to_string(),
                        fmt_float(&e.value, digits),
                        fmt_float(&e.imag_residual, digits),
                        fmt_float(&e.abs_error_estimate, digits),
                    ]
                })
                .collect();
            render_csv("method,value,imag_residual,error_estimate", &rows)
        }
    };
    Ok((document, verdict))
}

fn cmd_converge(args: &ConvergeArgs, config: &RunConfig) -> Result<(String, u8), Failure> {
    for (label, v) in [
        ("x", args.x),
        ("y", args.y),
        ("tau", args.tau),
        ("beta", args.beta),
        ("alpha", args.alpha),
        ("gamma", args.gamma),
    ] {
        require_finite(label, v)?;
    }
    if args.nlist.is_empty() {
        return Err(Failure::invalid("--nlist must name at least one block size"));
    }
    let template = WeightTemplate {
        alpha: args.alpha,
        beta: args.beta,
        gamma: args.gamma,
        h1: Factor::One,
        h2: Factor::One,
    };
    let ctx = context(config)?;
    let mut rows = Vec::with_capacity(args.nlist.len());
    for &n in &args.nlist {
        let pt = ScalingPoint { x: args.x, y: args.y, tau: args.tau, n };
        let record = converge_to_angelesco(&pt, &template, &ctx)
            .map_err(|e| Failure::from_error(e, &format!("convergence comparison at n = {n}")))?;
        rows.push(record);
    }
    // The comparison passes when the error never grows along the list.
    let mut verdict = 0u8;
    for pair in rows.windows(2) {
        if pair[1].abs_error > pair[0].abs_error {
            eprintln!(
                "warning: abs_error grows from n = {} to n = {}",
                pair[0].n, pair[1].n
            );
            verdict = 1;
        }
    }
    let digits = decimal_digits(config.precision_bits);
    let document = match config.output_format {
        OutputFormat::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        fmt_float(&r.lhs, digits),
                        fmt_float(&r.rhs, digits),
                        fmt_float(&r.abs_error, digits),
                    ]
                })
                .collect();
            render_csv("n,lhs,rhs,abs_error", &table)
        }
        OutputFormat::Json => {
            let table: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "n": r.n,
                        "lhs": r.lhs.to_f64(),
                        "rhs": r.rhs.to_f64(),
                        "abs_error": r.abs_error.to_f64(),
                    })
                })
                .collect();
            render_json(&json!({
                "schema": 1,
                "x": args.x,
                "y": args.y,
                "tau": args.tau,
                "alpha": args.alpha,
                "beta": args.beta,
                "gamma": args.gamma,
                "rows": table,
            }))
        }
    };
    Ok((document, verdict))
}

fn cmd_verify(args: &VerifyArgs, config: &RunConfig) -> Result<(String, u8), Failure> {
    let suites: Vec<&str> = if args.suite == "all" {
        SUITE_NAMES.to_vec()
    } else if SUITE_NAMES.contains(&args.suite.as_str()) {
        vec![args.suite.as_str()]
    } else {
        return Err(Failure::invalid(format!(
            "unknown suite {:?}; expected one of {SUITE_NAMES:?} or \"all\"",
            args.suite
        )));
    };
    if args.n == 0 {
        return Err(Failure::invalid("--n must be at least 1"));
    }
    let ctx = context(config)?;
    // Fan the suites out; assembly stays in canonical order.
    let outcomes: Vec<Result<Vec<CheckResult>, Error>> = suites
        .par_iter()
        .map(|name| run_suite(name, args.n, &ctx))
        .collect();
    let mut checks = Vec::new();
    for (name, outcome) in suites.iter().zip(outcomes) {
        let batch = outcome.map_err(|e| Failure::from_error(e, &format!("suite {name}")))?;
        checks.extend(batch);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        eprintln!("{failed} of {} checks failed", checks.len());
    }
    let document = match config.output_format {
        OutputFormat::Json => render_json(&json!({
            "schema": 1,
            "suite": args.suite,
            "precision_bits": config.precision_bits,
            "checks": checks,
            "pass": failed == 0,
        })),
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = checks
                .iter()
                .map(|c| {
                    vec![
                        c.name.clone(),
                        format!("{:e}", c.max_error),
                        format!("{:e}", c.tolerance),
                        c.pass.to_string(),
                    ]
                })
                .collect();
            render_csv("name,max_error,tolerance,pass", &rows)
        }
    };
    Ok((document, if failed == 0 { 0 } else { 1 }))
}

fn cmd_gap(args: &GapArgs, config: &RunConfig) -> Result<(String, u8), Failure> {
    if !(args.a.is_finite() && args.a < 0.0) {
        return Err(Failure::invalid(format!(
            "gap endpoint needs a finite a < 0, got {}",
            args.a
        )));
    }
    let s = gap_endpoint(args.a).map_err(|e| Failure::from_error(e, "gap endpoint"))?;
    let document = match config.output_format {
        OutputFormat::Json => render_json(&json!({
            "schema": 1,
            "a": args.a,
            "s": s,
            "abs_s": s.abs(),
        })),
        OutputFormat::Csv => render_csv(
            "a,s,abs_s",
            &[vec![
                format!("{:e}", args.a),
                format!("{:e}", s),
                format!("{:e}", s.abs()),
            ]],
        ),
    };
    Ok((document, 0))
}

fn cmd_grid(args: &GridArgs, config: &RunConfig) -> Result<(String, u8), Failure> {
    for (label, v) in [("xmin", args.xmin), ("xmax", args.xmax), ("tau", args.tau), ("beta", args.beta)] {
        require_finite(label, v)?;
    }
    if args.steps == 0 {
        return Err(Failure::invalid("--steps must be at least 1"));
    }
    if !(args.xmin < args.xmax) {
        return Err(Failure::invalid("--xmin must lie below --xmax"));
    }
    let ctx = context(config)?;
    let h = (args.xmax - args.xmin) / args.steps as f64;
    let abscissa = |i: usize| args.xmin + i as f64 * h;
    // Each worker returns None for abscissas where the tabulated quantity is
    // undefined (the diagonal limit at x = 0; interval endpoints of the
    // finite-n density); those rows are omitted.
    let outcomes: Vec<Result<Option<(f64, Float)>, Failure>> = match args.finite_n {
        None => {
            let params = KernelParams::new(args.beta, args.tau)
                .map_err(|e| Failure::from_error(e, "kernel parameters"))?;
            let eps = 0.5 * h;
            (0..=args.steps)
                .into_par_iter()
                .map(|i| {
                    let x = abscissa(i);
                    if x == 0.0 {
                        return Ok(None);
                    }
                    let y = if x > 0.0 { x + eps } else { x - eps };
                    kernel_pairing(x, y, &params, &ctx)
                        .map(|e| Some((x, e.value)))
                        .map_err(|e| Failure::from_error(e, &format!("grid row x = {x}")))
                })
                .collect()
        }
        Some(n) => {
            if n == 0 {
                return Err(Failure::invalid("--finite-n must be at least 1"));
            }
            let spec = WeightSpec::new(args.a, args.alpha, args.beta, args.gamma, Factor::One, Factor::One)
                .map_err(|e| Failure::from_error(e, "weight flags"))?;
            let sys = moments(&spec, n, n, &ctx)
                .map_err(|e| Failure::from_error(e, "moment system"))?;
            (0..=args.steps)
                .into_par_iter()
                .map(|i| {
                    let x = abscissa(i);
                    if x <= args.a || x >= 1.0 || x == 0.0 {
                        return Ok(None);
                    }
                    kernel_finite(&sys, &spec, x, x)
                        .map(|v| Some((x, v)))
                        .map_err(|e| Failure::from_error(e, &format!("grid row x = {x}")))
                })
                .collect()
        }
    };
    let mut rows = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        if let Some(row) = outcome? {
            rows.push(row);
        }
    }
    let digits = decimal_digits(config.precision_bits);
    let document = match config.output_format {
        OutputFormat::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|(x, v)| vec![format!("{x:e}"), fmt_float(v, digits)])
                .collect();
            render_csv("x,value", &table)
        }
        OutputFormat::Json => {
            let table: Vec<serde_json::Value> = rows
                .iter()
                .map(|(x, v)| json!({"x": x, "value": v.to_f64()}))
                .collect();
            render_json(&json!({"schema": 1, "rows": table}))
        }
    };
    Ok((document, 0))
}
