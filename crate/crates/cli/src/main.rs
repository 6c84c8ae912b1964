//! nvrep: secret-key rates of NV-center quantum-repeater schemes.
//!
//! Subcommands: `rate` (one optimized or fixed operating point as JSON),
//! `sweep` (optimized rates over distance as CSV), `benchmarks`
//! (repeaterless bounds as CSV), `validate` (Monte-Carlo oracle suite) and
//! `runtime` (certification-experiment planning).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use nvrep_core::benchmarks::benchmark_set;
use nvrep_core::memory::Cutoff;
use nvrep_core::optimizer::{
    direct_nv_rate, optimize_point, sweep, FrequencyConversion, SweepSpec,
};
use nvrep_core::photonics::HardwareParameters;
use nvrep_core::schemes::Scheme;
use nvrep_core::stats::{certification_confidence, CertificationPlan};

mod validate;

const EXIT_CONFIG: u8 = 2;
const EXIT_ZERO_RATE: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(name = "nvrep", version, about = "Secret-key rates of NV-center quantum-repeater schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate at one distance as JSON; omitted free parameters are optimized.
    #[command(visible_alias = "optimize")]
    Rate(RateArgs),
    /// Optimized rates over a distance range as CSV.
    Sweep(SweepArgs),
    /// Repeaterless benchmark bounds over a distance range as CSV.
    Benchmarks(BenchmarksArgs),
    /// Monte-Carlo oracle suite against the closed-form models.
    Validate(ValidateArgs),
    /// Certification-experiment confidence and runtime.
    Runtime(RuntimeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Sisquare,
    SinglePhoton,
    Spads,
    Spotl,
    Direct,
}

impl SchemeArg {
    fn to_scheme(self) -> Scheme {
        match self {
            SchemeArg::Sisquare => Scheme::SiSquare,
            SchemeArg::SinglePhoton => Scheme::SinglePhoton,
            SchemeArg::Spads => Scheme::Spads,
            SchemeArg::Spotl => Scheme::Spotl,
            SchemeArg::Direct => Scheme::Direct,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepSchemeArg {
    Sisquare,
    SinglePhoton,
    Spads,
    Spotl,
    Direct,
    All,
}

impl SweepSchemeArg {
    fn to_schemes(self) -> Vec<Scheme> {
        match self {
            SweepSchemeArg::Sisquare => vec![Scheme::SiSquare],
            SweepSchemeArg::SinglePhoton => vec![Scheme::SinglePhoton],
            SweepSchemeArg::Spads => vec![Scheme::Spads],
            SweepSchemeArg::Spotl => vec![Scheme::Spotl],
            SweepSchemeArg::Direct => vec![Scheme::Direct],
            SweepSchemeArg::All => {
                vec![Scheme::SiSquare, Scheme::SinglePhoton, Scheme::Spads, Scheme::Spotl]
            }
        }
    }
}

#[derive(Args)]
struct DistanceArgs {
    /// Distance between Alice and Bob in km.
    #[arg(long)]
    distance_km: Option<f64>,
    /// Distance in units of the fiber attenuation length L0.
    #[arg(long)]
    distance_l0: Option<f64>,
}

impl DistanceArgs {
    fn resolve(&self, l0: f64) -> Result<f64, CliError> {
        match (self.distance_km, self.distance_l0) {
            (Some(km), None) => Ok(km),
            (None, Some(units)) => Ok(units * l0),
            _ => Err(CliError::config(
                "provide exactly one of --distance-km and --distance-l0",
            )),
        }
    }
}

#[derive(Args)]
struct RateArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[command(flatten)]
    distance: DistanceArgs,
    /// Hardware parameters: "table1" or a key-value file path.
    #[arg(long, default_value = "table1")]
    params: String,
    /// Emission angle in radians; optimized over the grid when omitted.
    #[arg(long)]
    theta: Option<f64>,
    /// Memory cutoff: a positive integer or "inf".
    #[arg(long)]
    n_star: Option<String>,
    /// Detection window in ns (5-30); optimized when omitted.
    #[arg(long)]
    t_w_ns: Option<f64>,
    /// Repeater position as a fraction of the total distance from Alice.
    #[arg(long)]
    position: Option<f64>,
    /// Telecom frequency-conversion preset (efficiency 0.3, L0 22 km, F_m 0.98).
    #[arg(long)]
    telecom: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    scheme: SweepSchemeArg,
    /// Start of the distance range in km.
    #[arg(long)]
    from: f64,
    /// End of the distance range in km.
    #[arg(long)]
    to: f64,
    /// Number of distance points (0 emits a header-only CSV).
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value = "table1")]
    params: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    telecom: bool,
    /// Keep every n-th theta grid point (1 = full grid).
    #[arg(long, default_value_t = 1)]
    theta_stride: usize,
}

#[derive(Args)]
struct BenchmarksArgs {
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value = "table1")]
    params: String,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    telecom: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Monte-Carlo trials per operating point.
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Negative control: perturb the analytic model to force a mismatch.
    #[arg(long)]
    tamper: bool,
}

#[derive(Args)]
struct RuntimeArgs {
    #[arg(long, value_enum, default_value = "single-photon")]
    scheme: SchemeArg,
    #[command(flatten)]
    distance: DistanceArgs,
    /// Experiment duration in hours; sets the attempt count.
    #[arg(long, default_value_t = 12.0)]
    hours: f64,
    /// Attempt count override (takes precedence over --hours).
    #[arg(long)]
    attempts: Option<u64>,
    /// Yield margin t_Y.
    #[arg(long, default_value_t = 2e-7)]
    t_y: f64,
    /// Per-basis QBER margin t_e.
    #[arg(long, default_value_t = 0.015)]
    t_e: f64,
    #[arg(long, default_value = "table1")]
    params: String,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<nvrep_core::Error> for CliError {
    fn from(e: nvrep_core::Error) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match cli.command {
        Command::Rate(args) => cmd_rate(args, started),
        Command::Sweep(args) => cmd_sweep(args, started),
        Command::Benchmarks(args) => cmd_benchmarks(args, started),
        Command::Validate(args) => validate::cmd_validate(args),
        Command::Runtime(args) => cmd_runtime(args, started),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn load_params(spec: &str) -> Result<HardwareParameters, CliError> {
    if spec == "table1" {
        return Ok(HardwareParameters::table1());
    }
    Ok(HardwareParameters::from_file(Path::new(spec))?)
}

fn parse_cutoff(text: &str) -> Result<Cutoff, CliError> {
    if text.eq_ignore_ascii_case("inf") || text.eq_ignore_ascii_case("infinite") {
        return Ok(Cutoff::Infinite);
    }
    let n: u64 = text
        .parse()
        .map_err(|_| CliError::config(format!("--n-star: expected a positive integer or \"inf\", got {text:?}")))?;
    let cutoff = Cutoff::Finite(n);
    cutoff.validate().map_err(CliError::from)?;
    Ok(cutoff)
}

fn cutoff_label(c: Cutoff) -> String {
    match c {
        Cutoff::Finite(n) => n.to_string(),
        Cutoff::Infinite => "inf".to_string(),
    }
}

/// Window length in ns, cleaned of the float noise from the 1e-9 round trip.
fn t_w_ns(t_w: f64) -> f64 {
    (t_w * 1e9 * 1e6).round() / 1e6
}

fn sha256_hex(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// Reproducibility header fields recorded on every output.
fn manifest_fields(params: &HardwareParameters, seed: Option<u64>, started: Instant) -> Vec<(String, String)> {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    vec![
        ("command".into(), argv.join(" ")),
        ("params_sha256".into(), sha256_hex(&params.to_key_value_text())),
        ("schema_sha256".into(), sha256_hex(SWEEP_HEADER)),
        ("seed".into(), seed.map_or("none".into(), |s| s.to_string())),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("wall_ms".into(), started.elapsed().as_millis().to_string()),
    ]
}

fn manifest_comment(params: &HardwareParameters, seed: Option<u64>, started: Instant) -> String {
    let fields: Vec<String> = manifest_fields(params, seed, started)
        .into_iter()
        .map(|(k, v)| format!("{k}={v:?}"))
        .collect();
    format!("# nvrep {}", fields.join(" "))
}

fn manifest_json(params: &HardwareParameters, seed: Option<u64>, started: Instant) -> serde_json::Value {
    let map: serde_json::Map<String, serde_json::Value> = manifest_fields(params, seed, started)
        .into_iter()
        .map(|(k, v)| (k, serde_json::Value::String(v)))
        .collect();
    serde_json::Value::Object(map)
}

fn build_spec(
    scheme: Scheme,
    length_km: f64,
    telecom: bool,
    theta: Option<f64>,
    n_star: Option<Cutoff>,
    t_w: Option<f64>,
    position: Option<f64>,
) -> SweepSpec {
    let mut spec = SweepSpec::new(scheme, length_km, length_km, 1);
    if telecom {
        spec.frequency_conversion = Some(FrequencyConversion::telecom());
    }
    if let Some(theta) = theta {
        spec.theta_grid = vec![theta];
    }
    if let Some(n_star) = n_star {
        spec.n_star_grid = vec![n_star];
    }
    if let Some(t_w) = t_w {
        spec.t_w_grid = vec![t_w];
    }
    if let Some(position) = position {
        spec.position_grid = Some(vec![position]);
    }
    spec
}

fn cmd_rate(args: RateArgs, started: Instant) -> Result<u8, CliError> {
    let params = load_params(&args.params)?;
    let scheme = args.scheme.to_scheme();
    let n_star = args.n_star.as_deref().map(parse_cutoff).transpose()?;
    let t_w = args.t_w_ns.map(|ns| ns * 1e-9);
    let l0 = if args.telecom { FrequencyConversion::telecom().l0_override } else { params.l0 };
    let length_km = args.distance.resolve(l0)?;
    let spec = build_spec(scheme, length_km, args.telecom, args.theta, n_star, t_w, args.position);
    let eff = spec.effective_params(&params);

    let (config, point) = optimize_point(&spec, &params, length_km)?;
    let direct_nv = direct_nv_rate(&spec, &params, length_km)?;
    let benchmarks = benchmark_set(length_km, &eff, direct_nv)?;
    let report = json!({
        "scheme": scheme.name(),
        "length_km": point.length_km,
        "l_over_l0": point.length_km / eff.l0,
        "theta": config.theta,
        "n_star": cutoff_label(config.n_star),
        "t_w_ns": t_w_ns(config.t_w),
        "position": config.position,
        "yield": point.yield_y,
        "e_x": point.qber.e_x,
        "e_y": point.qber.e_y,
        "e_z": point.qber.e_z,
        "skf": point.fraction,
        "n_modes": point.n_modes,
        "rate": point.rate,
        "benchmarks": {
            "cap_pure_loss": benchmarks.capacity,
            "cap_extended": benchmarks.extended,
            "cap_thermal": benchmarks.thermal,
            "rate_direct_nv": benchmarks.direct_nv,
        },
        "manifest": manifest_json(&params, None, started),
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    if point.rate == 0.0 {
        eprintln!("error: no positive rate at {length_km} km for any grid point");
        return Ok(EXIT_ZERO_RATE);
    }
    Ok(0)
}

const SWEEP_HEADER: &str = "L_km,L_over_L0,scheme,theta,n_star,t_w_ns,yield,e_x,e_y,e_z,skf,n_modes,rate,cap_pure_loss,cap_extended,cap_thermal,rate_direct_nv";

fn cmd_sweep(args: SweepArgs, started: Instant) -> Result<u8, CliError> {
    let params = load_params(&args.params)?;
    if args.theta_stride == 0 {
        return Err(CliError::config("--theta-stride must be at least 1"));
    }
    let mut body = String::new();
    writeln!(body, "{SWEEP_HEADER}").expect("string write");
    for scheme in args.scheme.to_schemes() {
        let mut spec = SweepSpec::new(scheme, args.from, args.to, args.steps);
        if args.telecom {
            spec.frequency_conversion = Some(FrequencyConversion::telecom());
        }
        if args.theta_stride > 1 {
            spec.theta_grid = spec.theta_grid.into_iter().step_by(args.theta_stride).collect();
        }
        let eff = spec.effective_params(&params);
        for row in sweep(&spec, &params)? {
            let p = &row.point;
            writeln!(
                body,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                p.length_km,
                p.length_km / eff.l0,
                scheme.name(),
                row.config.theta,
                cutoff_label(row.config.n_star),
                t_w_ns(row.config.t_w),
                p.yield_y,
                p.qber.e_x,
                p.qber.e_y,
                p.qber.e_z,
                p.fraction,
                p.n_modes,
                p.rate,
                row.benchmarks.capacity,
                row.benchmarks.extended,
                row.benchmarks.thermal,
                row.benchmarks.direct_nv,
            )
            .expect("string write");
        }
    }
    let manifest = manifest_comment(&params, None, started);
    std::fs::write(&args.out, format!("{manifest}\n{body}"))?;
    Ok(0)
}

fn cmd_benchmarks(args: BenchmarksArgs, started: Instant) -> Result<u8, CliError> {
    let params = load_params(&args.params)?;
    let mut spec = SweepSpec::new(Scheme::Direct, args.from, args.to, args.steps);
    if args.telecom {
        spec.frequency_conversion = Some(FrequencyConversion::telecom());
    }
    let eff = spec.effective_params(&params);
    let mut body = String::new();
    writeln!(body, "L_km,L_over_L0,cap_pure_loss,cap_extended,cap_thermal,rate_direct_nv")
        .expect("string write");
    for l in spec.distances() {
        let direct_nv = direct_nv_rate(&spec, &params, l)?;
        let b = benchmark_set(l, &eff, direct_nv)?;
        writeln!(
            body,
            "{},{},{},{},{},{}",
            l,
            l / eff.l0,
            b.capacity,
            b.extended,
            b.thermal,
            b.direct_nv
        )
        .expect("string write");
    }
    let manifest = manifest_comment(&params, None, started);
    let content = format!("{manifest}\n{body}");
    match &args.out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(0)
}

fn cmd_runtime(args: RuntimeArgs, started: Instant) -> Result<u8, CliError> {
    let params = load_params(&args.params)?;
    let scheme = args.scheme.to_scheme();
    let length_km = args.distance.resolve(params.l0)?;
    let n_attempts = match args.attempts {
        Some(n) => n,
        None => {
            if !(args.hours > 0.0) {
                return Err(CliError::config("--hours must be positive"));
            }
            CertificationPlan::attempts_for_duration(args.hours * 3600.0)
        }
    };
    let plan = CertificationPlan::new(n_attempts, args.t_y, args.t_e)?;

    let spec = build_spec(scheme, length_km, false, None, None, None, None);
    let (config, point) = optimize_point(&spec, &params, length_km)?;
    if point.rate == 0.0 {
        eprintln!("error: no positive rate at {length_km} km; nothing to certify");
        return Ok(EXIT_ZERO_RATE);
    }

    let base = json!({
        "scheme": scheme.name(),
        "length_km": length_km,
        "attempts": n_attempts,
        "duration_hours": plan.duration_s() / 3600.0,
        "t_y": plan.t_y,
        "t_e": plan.t_e,
        "operating_point": {
            "theta": config.theta,
            "n_star": cutoff_label(config.n_star),
            "t_w_ns": t_w_ns(config.t_w),
            "yield": point.yield_y,
            "e_x": point.qber.e_x,
            "e_y": point.qber.e_y,
            "e_z": point.qber.e_z,
            "rate": point.rate,
        },
        "manifest": manifest_json(&params, None, started),
    });

    if plan.raw_bits_per_basis(point.yield_y).is_err() {
        // Too short a run to sample any raw bits: nothing can be certified.
        let mut report = base;
        report["confidence"] = json!(0.0);
        report["certified_rate"] = json!(null);
        report["capacity_ratio"] = json!(null);
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
        return Ok(0);
    }

    match certification_confidence(&params, &point, &plan) {
        Ok(out) => {
            let mut report = base;
            report["confidence"] = json!(out.confidence);
            report["yield_tail"] = json!(out.yield_tail);
            report["qber_tails"] = json!(out.qber_tails);
            report["certified_rate"] = json!(out.certified_rate);
            report["capacity_ratio"] = json!(out.capacity_ratio);
            report["raw_bits_per_basis"] = json!(out.raw_bits_per_basis);
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
            Ok(0)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(EXIT_ZERO_RATE)
        }
    }
}
