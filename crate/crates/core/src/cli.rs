//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed verification check, 2 unreadable or malformed input,
//! 3 invalid parameters, 4 ε-selection infeasible under the window clamp.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::curvature::{
    bound_combined, curvature_from_derivatives, exact_corner_curvature_gamma, select_epsilon_with,
    CornerGeometry, CurvatureError, SelectOptions,
};
use crate::io::{fmt_f64, read_polyline, write_waypoints_csv};
use crate::kernel::Kernel;
use crate::mollify::{sample, Method, SmoothingConfig};
use crate::polyline::Polyline;
use crate::verify::{run_suite, Suite, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_BAD_PARAMS: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

pub const SEED_ENV: &str = "MOLLIPATH_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "mollipath",
    version,
    about = "Smooth waypoint paths by conventional and directional mollification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample position, derivatives and curvature of the smoothed path.
    Smooth(SmoothArgs),
    /// Sample curvature next to the closed-form corner bound.
    Curvature(SmoothArgs),
    /// Choose ε from a curvature budget.
    SelectEpsilon(SelectArgs),
    /// Run property checks on the bundled corpus.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Waypoints as JSON {"dimension": n, "waypoints": [[...], ...]} or CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Kernel table tolerance.
    #[arg(long = "kernel-tol", default_value_t = 1e-12)]
    pub kernel_tol: f64,
    /// Write the parsed waypoints back as CSV instead of running the command.
    #[arg(long = "echo-input")]
    pub echo_input: bool,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[command(flatten)]
    pub io: InputArgs,
    #[arg(long, default_value = "directional", value_parser = ["conventional", "directional", "combined"])]
    pub method: String,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Weight of the directional term for `--method combined`.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Sample over [a, b] instead of [0, p].
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub extend: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub io: InputArgs,
    #[arg(long = "kappa-max", allow_negative_numbers = true)]
    pub kappa_max: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Curvature samples per segment used to check the selected ε.
    #[arg(long = "samples-per-segment", default_value_t = 500)]
    pub samples_per_segment: usize,
    /// Also search for the smallest ε whose sampled curvature meets the budget.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long = "kernel-tol", default_value_t = 1e-12)]
    pub kernel_tol: f64,
}

/// Parameters recorded at the top of every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_max: Option<f64>,
    pub kernel_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunManifest {
    fn new(command: &str, kernel_tolerance: f64, output: &Option<PathBuf>) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            input: None,
            output: output.as_ref().map(|p| p.display().to_string()),
            method: None,
            eps: None,
            gamma: None,
            samples: None,
            t_range: None,
            kappa_max: None,
            kernel_tolerance,
            suite: None,
            seed: None,
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

/// Entry point used by the binary: reads the process arguments and `MOLLIPATH_SEED`.
pub fn main_with_env() -> i32 {
    let seed = std::env::var(SEED_ENV).ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(
        std::env::args_os(),
        seed.as_deref(),
        &mut stdout.lock(),
        &mut stderr.lock(),
    )
}

/// Runs the CLI with explicit arguments, seed override and streams; returns the exit code.
pub fn run<I, T>(args: I, seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_BAD_PARAMS,
            };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Smooth(a) => cmd_smooth(&a, out, err),
        Command::Curvature(a) => cmd_curvature(&a, out, err),
        Command::SelectEpsilon(a) => cmd_select_epsilon(&a, out, err),
        Command::Verify(a) => cmd_verify(&a, seed, out, err),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn emit(target: &Option<PathBuf>, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match target {
        Some(path) => fs::write(path, text).map_err(|e| {
            fail(
                EXIT_BAD_INPUT,
                format!("cannot write {}: {e}", path.display()),
            )
        }),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| fail(EXIT_BAD_INPUT, format!("cannot write output: {e}"))),
    }
}

fn load(io: &InputArgs) -> Result<(Polyline, Kernel), Failure> {
    let pl = read_polyline(&io.input).map_err(|e| fail(EXIT_BAD_INPUT, e.to_string()))?;
    let kernel = Kernel::bump(io.kernel_tol).map_err(|e| fail(EXIT_BAD_PARAMS, e.to_string()))?;
    Ok((pl, kernel))
}

/// Handles `--echo-input`; returns true when the command should stop.
fn echo(io: &InputArgs, pl: &Polyline, out: &mut dyn Write) -> Result<bool, Failure> {
    if !io.echo_input {
        return Ok(false);
    }
    let mut buf = Vec::new();
    write_waypoints_csv(pl, &mut buf).map_err(|e| fail(EXIT_BAD_INPUT, e.to_string()))?;
    emit(&io.output, &String::from_utf8_lossy(&buf), out)?;
    Ok(true)
}

struct Sampling {
    cfg: SmoothingConfig,
    range: [f64; 2],
    manifest: RunManifest,
}

fn sampling(
    a: &SmoothArgs,
    pl: &Polyline,
    command: &str,
    err: &mut dyn Write,
) -> Result<Sampling, Failure> {
    let method: Method = a
        .method
        .parse()
        .map_err(|e: String| fail(EXIT_BAD_PARAMS, e))?;
    let gamma = match (method, a.gamma) {
        (Method::Combined, g) => g.unwrap_or(1.0),
        (_, Some(_)) => {
            let _ = writeln!(err, "warning: --gamma is ignored for --method {method}");
            if method == Method::Directional {
                1.0
            } else {
                0.0
            }
        }
        (Method::Directional, None) => 1.0,
        (Method::Conventional, None) => 0.0,
    };
    let cfg = SmoothingConfig::new(method, a.epsilon, gamma)
        .map_err(|e| fail(EXIT_BAD_PARAMS, e.to_string()))?;
    if a.samples < 2 {
        return Err(fail(
            EXIT_BAD_PARAMS,
            format!("--samples must be at least 2, got {}", a.samples),
        ));
    }
    let range = match &a.extend {
        Some(v) => {
            let (lo, hi) = (v[0], v[1]);
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(fail(
                    EXIT_BAD_PARAMS,
                    format!("--extend needs finite a < b, got {lo} {hi}"),
                ));
            }
            [lo, hi]
        }
        None => [0.0, pl.end_parameter()],
    };
    if cfg.eps >= 1.0 {
        let _ = writeln!(
            err,
            "warning: eps >= 1, waypoint preservation is not guaranteed"
        );
    }
    if cfg.eps >= 0.5 {
        let _ = writeln!(
            err,
            "warning: eps >= 0.5, coincidence windows vanish and corners interact"
        );
    }
    let mut manifest = RunManifest::new(command, a.io.kernel_tol, &a.io.output);
    manifest.input = Some(a.io.input.display().to_string());
    manifest.method = Some(method.to_string());
    manifest.eps = Some(cfg.eps);
    manifest.gamma = Some(cfg.effective_gamma());
    manifest.samples = Some(a.samples);
    manifest.t_range = Some(range);
    Ok(Sampling {
        cfg,
        range,
        manifest,
    })
}

fn manifest_line(m: &RunManifest) -> String {
    format!(
        "# manifest {}\n",
        serde_json::to_string(m).expect("manifest serializes")
    )
}

fn cmd_smooth(a: &SmoothArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let (pl, kernel) = load(&a.io)?;
    if echo(&a.io, &pl, out)? {
        return Ok(EXIT_OK);
    }
    let s = sampling(a, &pl, "smooth", err)?;
    let path = sample(&pl, &kernel, &s.cfg, s.range[0], s.range[1], a.samples)
        .map_err(|e| fail(EXIT_BAD_PARAMS, e.to_string()))?;
    let n = pl.dimension();
    let mut text = manifest_line(&s.manifest);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|j| format!("x{j}")));
    header.extend((0..n).map(|j| format!("d1_{j}")));
    header.extend((0..n).map(|j| format!("d2_{j}")));
    header.push("kappa".into());
    text.push_str(&header.join(","));
    text.push('\n');
    for i in 0..path.len() {
        let mut row = vec![fmt_f64(path.parameters[i])];
        row.extend(path.positions[i].iter().map(|&v| fmt_f64(v)));
        row.extend(path.d1[i].iter().map(|&v| fmt_f64(v)));
        row.extend(path.d2[i].iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(path.curvature[i]));
        text.push_str(&row.join(","));
        text.push('\n');
    }
    emit(&a.io.output, &text, out)?;
    Ok(EXIT_OK)
}

fn corner_failure(e: CurvatureError) -> Failure {
    match e {
        CurvatureError::InvalidBudget(_) | CurvatureError::Smoothing(_) => {
            fail(EXIT_BAD_PARAMS, e.to_string())
        }
        _ => fail(EXIT_BAD_INPUT, e.to_string()),
    }
}

fn cmd_curvature(a: &SmoothArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let (pl, kernel) = load(&a.io)?;
    if echo(&a.io, &pl, out)? {
        return Ok(EXIT_OK);
    }
    let s = sampling(a, &pl, "curvature", err)?;
    let gamma = s.cfg.effective_gamma();
    let corners: Vec<CornerGeometry> = (1..pl.segment_count())
        .map(|c| CornerGeometry::at_waypoint(&pl, c))
        .collect::<Result<_, _>>()
        .map_err(corner_failure)?;
    let bound = corners
        .iter()
        .map(|g| bound_combined(g, &kernel, s.cfg.eps, gamma))
        .collect::<Result<Vec<_>, _>>()
        .map_err(corner_failure)?
        .into_iter()
        .fold(0.0, f64::max);
    let exact = corners.len() == 1;
    let path = sample(&pl, &kernel, &s.cfg, s.range[0], s.range[1], a.samples)
        .map_err(|e| fail(EXIT_BAD_PARAMS, e.to_string()))?;
    let mut text = manifest_line(&s.manifest);
    text.push_str("t,kappa,bound\n");
    for i in 0..path.len() {
        let t = path.parameters[i];
        let kappa = if exact {
            exact_corner_curvature_gamma(&corners[0], &kernel, s.cfg.eps, gamma, t)
                .unwrap_or(f64::NAN)
        } else {
            curvature_from_derivatives(&path.d1[i], &path.d2[i]).unwrap_or(f64::NAN)
        };
        text.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(t),
            fmt_f64(kappa),
            fmt_f64(bound)
        ));
    }
    emit(&a.io.output, &text, out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SelectOutput<'a> {
    manifest: &'a RunManifest,
    report: &'a crate::curvature::CurvatureReport,
}

fn cmd_select_epsilon(
    a: &SelectArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let (pl, kernel) = load(&a.io)?;
    if echo(&a.io, &pl, out)? {
        return Ok(EXIT_OK);
    }
    if !(a.kappa_max > 0.0 && a.kappa_max.is_finite()) {
        return Err(fail(
            EXIT_BAD_PARAMS,
            format!("--kappa-max must be positive, got {}", a.kappa_max),
        ));
    }
    if a.samples_per_segment == 0 {
        return Err(fail(
            EXIT_BAD_PARAMS,
            "--samples-per-segment must be positive",
        ));
    }
    let opts = SelectOptions {
        samples_per_segment: a.samples_per_segment,
        refine: a.refine,
        ..SelectOptions::default()
    };
    let report =
        select_epsilon_with(&pl, &kernel, a.kappa_max, a.gamma, &opts).map_err(corner_failure)?;
    let mut manifest = RunManifest::new("select-epsilon", a.io.kernel_tol, &a.io.output);
    manifest.input = Some(a.io.input.display().to_string());
    manifest.gamma = Some(a.gamma);
    manifest.kappa_max = Some(a.kappa_max);
    manifest.samples = Some(report.samples);
    let mut text = serde_json::to_string_pretty(&SelectOutput {
        manifest: &manifest,
        report: &report,
    })
    .map_err(|e| fail(EXIT_BAD_PARAMS, e.to_string()))?;
    text.push('\n');
    emit(&a.io.output, &text, out)?;
    if !report.feasible {
        let _ = writeln!(
            err,
            "warning: sampled curvature {} exceeds the budget {} at eps = {}",
            report.sampled_max_kappa, report.kappa_max, report.selected_eps
        );
    }
    Ok(if report.clamped && !report.feasible {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    })
}

fn cmd_verify(
    a: &VerifyArgs,
    seed: Option<&str>,
    out: &mut dyn Write,
    _err: &mut dyn Write,
) -> Result<i32, Failure> {
    let suite = Suite::parse(&a.suite).ok_or_else(|| {
        fail(
            EXIT_BAD_PARAMS,
            format!(
                "unknown suite `{}` (expected one of {})",
                a.suite,
                Suite::NAMES.join(", ")
            ),
        )
    })?;
    let seed = match seed {
        Some(s) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| fail(EXIT_BAD_PARAMS, format!("{SEED_ENV}={s} is not a u64")))?,
        None => DEFAULT_SEED,
    };
    let kernel = Kernel::bump(a.kernel_tol).map_err(|e| fail(EXIT_BAD_PARAMS, e.to_string()))?;
    let reports =
        run_suite(suite, &kernel, seed).map_err(|e| fail(EXIT_CHECK_FAILED, e.to_string()))?;
    let mut manifest = RunManifest::new("verify", a.kernel_tol, &a.output);
    manifest.suite = Some(a.suite.clone());
    manifest.seed = Some(seed);
    let mut text = serde_json::json!({ "manifest": manifest }).to_string();
    text.push('\n');
    for r in &reports {
        text.push_str(&r.to_json_line());
        text.push('\n');
    }
    emit(&a.output, &text, out)?;
    Ok(if reports.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
