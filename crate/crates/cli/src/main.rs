//! Command-line front end: model construction, verification, periodic
//! minimizers, cocycle diagnostics, spectrum tables, and energy sweeps.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or unreadable
//! input. Outputs embed the run configuration and a model hash so runs are
//! reproducible; identical inputs give byte-identical outputs regardless of
//! worker count.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use quasicurve::cocycle::{
    fibered_rotation_number, lyapunov_exponent, parabolic_reduce, schrodinger_cocycle, sup_norms,
    uh_test,
};
use quasicurve::curves::TwistModel;
use quasicurve::spectral::{dual_eigencheck, ids_estimate, spectral_measure_bound};
use quasicurve::{aubry, CircleDiffeo, FourierSeries, Irrational, QcError};

#[derive(Parser)]
#[command(name = "quasicurve", version, about = "Twist maps with exact invariant curves: construction, verification, and spectral diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model from a rotation number and a conjugacy, and certify it
    Construct(ConstructArgs),
    /// Re-check all certified identities of a model file
    Verify(VerifyArgs),
    /// Periodic action minimizer at a rational rotation number
    Minimize(MinimizeArgs),
    /// Lyapunov exponent, rotation number, and hyperbolicity at one energy
    Cocycle(CocycleArgs),
    /// Finite-section spectrum and IDS table over an energy grid
    Spectrum(SpectrumArgs),
    /// Energy sweep: LE, rotation number, IDS, hyperbolicity, measure factor
    Sweep(SweepArgs),
}

#[derive(Args, Serialize)]
struct ConstructArgs {
    /// Rotation number: golden, sqrt2m1, or a decimal in (0, 1)
    #[arg(long)]
    alpha: String,
    /// Conjugacy derivative harmonics, e.g. c1=0.3,s2=0.05 for
    /// phi' = 1 + 0.3 cos(2 pi x) + 0.05 sin(4 pi x)
    #[arg(long)]
    phi: String,
    #[arg(long, default_value_t = 256)]
    modes: usize,
    /// Sampling grid; raised to 4x modes if smaller
    #[arg(long, default_value_t = 2048)]
    grid: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    tol_invariance: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol_mean_f: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol_g_consistency: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_reduction: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol_bloch: f64,
    /// Relative l2 tolerance for the dual eigenvector residual
    #[arg(long, default_value_t = 1e-8)]
    tol_dual: f64,
}

#[derive(Args, Serialize)]
struct MinimizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    p: i64,
    #[arg(long)]
    q: u64,
    /// Calibration parameter of the action; defaults to p/q
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// CSV destination for the orbit (n,x,r,residual); summary JSON goes to stdout
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CocycleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    energy: f64,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    /// Imaginary phase offset for the strip Lyapunov exponent
    #[arg(long, default_value_t = 0.0)]
    strip: f64,
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
}

#[derive(Args, Serialize)]
struct SpectrumArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 2000)]
    size: usize,
    #[arg(long, allow_hyphen_values = true)]
    emin: f64,
    #[arg(long, allow_hyphen_values = true)]
    emax: f64,
    /// Number of energy samples
    #[arg(long, default_value_t = 21)]
    grid: usize,
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    emin: f64,
    #[arg(long, allow_hyphen_values = true)]
    emax: f64,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, default_value_t = 2000)]
    size: usize,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    /// Radius for the spectral-measure factor
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Construct(a) => run_construct(a),
        Command::Verify(a) => run_verify(a),
        Command::Minimize(a) => run_minimize(a),
        Command::Cocycle(a) => run_cocycle(a),
        Command::Spectrum(a) => run_spectrum(a),
        Command::Sweep(a) => run_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

// ---------------------------------------------------------------------------
// Errors and plumbing

#[derive(Debug)]
enum CliError {
    Usage(String),
    Verification(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Verification(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Verification(_) => 1,
        }
    }
}

impl From<QcError> for CliError {
    fn from(e: QcError) -> Self {
        match e {
            QcError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Verification(e.to_string()),
        }
    }
}

type CliResult = Result<ExitCode, CliError>;

fn workers(flag: usize) -> usize {
    std::env::var("AMSPEC_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(flag)
        .max(1)
}

/// FNV-1a over the model file bytes; stable fingerprint for output headers.
fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

struct LoadedModel {
    model: TwistModel,
    hash: u64,
}

fn load_model(path: &PathBuf) -> Result<LoadedModel, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Usage(format!("cannot read model {}: {e}", path.display())))?;
    let model: TwistModel = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Usage(format!("cannot parse model {}: {e}", path.display())))?;
    Ok(LoadedModel {
        model,
        hash: fnv64(&bytes),
    })
}

fn config_header<T: Serialize>(command: &str, args: &T, model_hash: Option<u64>) -> String {
    let cfg = serde_json::to_string(args).unwrap_or_default();
    let mut out = format!("# run: {{\"command\":\"{command}\",\"args\":{cfg}}}\n");
    if let Some(h) = model_hash {
        let _ = writeln!(out, "# model: {h:016x}");
    }
    out
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs `job` over `0..n`, gathering results in index order. Workers take
/// indices from a shared counter; output order never depends on timing.
fn parallel_map<T: Send, F: Fn(usize) -> T + Sync>(n: usize, n_workers: usize, job: F) -> Vec<T> {
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..n_workers.min(n).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let value = job(i);
                results.lock().unwrap()[i] = Some(value);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|v| v.unwrap())
        .collect()
}

// ---------------------------------------------------------------------------
// construct

/// Parses `c1=0.3,s2=0.05` into the periodic part of the conjugacy: the
/// `ck`/`sk` amplitudes are the cos/sin harmonics of `phi' - 1`.
fn parse_phi(spec: &str, n_modes: usize) -> Result<CircleDiffeo, CliError> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut harmonics: Vec<(usize, f64, f64)> = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("bad harmonic '{part}', expected ck=amp")))?;
        let amp: f64 = value
            .parse()
            .map_err(|_| CliError::Usage(format!("bad amplitude in '{part}'")))?;
        let (kind, k_str) = key.split_at(1);
        let k: usize = k_str
            .parse()
            .map_err(|_| CliError::Usage(format!("bad harmonic index in '{part}'")))?;
        if k == 0 {
            return Err(CliError::Usage("harmonic index must be >= 1".into()));
        }
        // integrate: cos(2 pi k x) -> sin(2 pi k x)/(2 pi k), sin -> -cos/(2 pi k)
        match kind {
            "c" => harmonics.push((k, 0.0, amp / (two_pi * k as f64))),
            "s" => harmonics.push((k, -amp / (two_pi * k as f64), 0.0)),
            _ => return Err(CliError::Usage(format!("bad harmonic kind in '{part}'"))),
        }
    }
    let p = FourierSeries::from_harmonics(&harmonics, n_modes);
    CircleDiffeo::new(p).map_err(|e| CliError::Usage(e.to_string()))
}

fn run_construct(args: ConstructArgs) -> CliResult {
    let alpha = Irrational::parse(&args.alpha).map_err(|e| CliError::Usage(e.to_string()))?;
    let phi = parse_phi(&args.phi, args.modes)?;
    let model = TwistModel::construct(alpha, phi, args.modes, args.grid)
        .map_err(|e| CliError::Verification(format!("certification failed: {e}")))?;
    let json = serde_json::to_string_pretty(&model)
        .map_err(|e| CliError::Verification(e.to_string()))?;
    std::fs::write(&args.output, &json)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", args.output.display())))?;
    let r = &model.meta.residuals;
    print!("{}", config_header("construct", &args, Some(fnv64(json.as_bytes()))));
    println!("invariance      {:.3e}", r.invariance);
    println!("mean_f          {:.3e}", r.mean_f);
    println!("g_consistency   {:.3e}", r.g_consistency);
    println!("deriv_identity  {:.3e}", r.derivative_identity);
    println!("strip_h0        {:.4}", model.strip_h0);
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// verify

fn run_verify(args: VerifyArgs) -> CliResult {
    let loaded = load_model(&args.model)?;
    let model = &loaded.model;
    print!("{}", config_header("verify", &args, Some(loaded.hash)));

    let mut checks: Vec<(&str, f64, f64)> = Vec::new();
    checks.push(("invariance", model.invariance_residual(), args.tol_invariance));
    checks.push(("mean_f", model.f.mean().abs(), args.tol_mean_f));
    let g_consistency = {
        // g = phi o R_alpha o phi^{-1} versus g = id + gamma' + f at the sample grid
        let grid = model.meta.grid;
        (0..grid)
            .map(|j| {
                let x = j as f64 / grid as f64;
                let via_conj = model.g_lift(x);
                let direct = x + model.gamma.eval(x) + model.f.eval(x) - model.gamma.mean
                    + model.alpha.value();
                (via_conj - direct).abs()
            })
            .fold(0.0, f64::max)
    };
    checks.push(("g_consistency", g_consistency, args.tol_g_consistency));
    match parabolic_reduce(model) {
        Ok(red) => checks.push(("reduction", red.residual, args.tol_reduction)),
        Err(e) => {
            println!("reduction       FAIL ({e})");
            checks.push(("reduction", f64::INFINITY, args.tol_reduction));
        }
    }
    let (bloch_vec, bloch_scalar) = quasicurve::cocycle::bloch_section_check(model);
    checks.push(("bloch", bloch_vec.max(bloch_scalar), args.tol_bloch));
    match dual_eigencheck(model) {
        Ok(dual) => {
            checks.push(("dual", dual.residual, args.tol_dual));
            checks.push(("potential_id", dual.potential_identity, args.tol_bloch));
        }
        Err(e) => {
            println!("dual            FAIL ({e})");
            checks.push(("dual", f64::INFINITY, args.tol_dual));
        }
    }

    let mut all_pass = true;
    for (name, value, tol) in &checks {
        let pass = value < tol;
        all_pass &= pass;
        println!(
            "{name:<15} {value:.3e}  (tol {tol:.1e})  {}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if all_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

// ---------------------------------------------------------------------------
// minimize

fn run_minimize(args: MinimizeArgs) -> CliResult {
    let loaded = load_model(&args.model)?;
    let model = &loaded.model;
    let a = args.a.unwrap_or(args.p as f64 / args.q as f64);
    let spec = aubry::PeriodicOrbitSpec::new(args.p, args.q, a)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let orbit = aubry::minimize_periodic(&model.f, &spec, args.tol)?;

    let mut csv = config_header("minimize", &args, Some(loaded.hash));
    csv.push_str("n,x,r,residual\n");
    let momenta = orbit.momenta();
    let q = orbit.points.len();
    let p = args.p as f64;
    for (n, (&x, &r)) in orbit.points.iter().zip(&momenta).enumerate() {
        let next = if n + 1 == q {
            orbit.points[0] + p
        } else {
            orbit.points[n + 1]
        };
        let prev = if n == 0 {
            orbit.points[q - 1] - p
        } else {
            orbit.points[n - 1]
        };
        let res = next - 2.0 * x + prev - model.f.eval(x.rem_euclid(1.0));
        let _ = writeln!(csv, "{n},{x:.15e},{r:.15e},{res:.3e}");
    }
    emit(args.output.as_ref(), &csv)?;

    let summary = serde_json::json!({
        "action": orbit.action,
        "top_eigenvalue": orbit.top_eigenvalue,
        "converged": orbit.converged,
        "residual_sup": orbit.residual_sup,
        "realized_rotation": orbit.realized_rotation,
    });
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// cocycle

fn run_cocycle(args: CocycleArgs) -> CliResult {
    let loaded = load_model(&args.model)?;
    let model = &loaded.model;
    let alpha = model.alpha.value();
    let cocycle = schrodinger_cocycle(&model.v, alpha, args.energy);
    let le = lyapunov_exponent(&cocycle, args.iters, args.strip, 16)?;
    let rho = fibered_rotation_number(&cocycle, args.iters)?;
    // sup-norm growth exponent: log-log slope over a short product track
    let track = sup_norms(&cocycle, 2000, 32);
    let fit = {
        let pts: Vec<(f64, f64)> = track
            .sup_norms
            .iter()
            .enumerate()
            .skip(9)
            .map(|(k, &s)| (((k + 1) as f64).ln(), s.max(1e-300).ln()))
            .collect();
        let n = pts.len() as f64;
        let (sx, sy, sxx, sxy) = pts.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(x, y)| {
            (acc.0 + x, acc.1 + y, acc.2 + x * x, acc.3 + x * y)
        });
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    let (uh, margin) = match uh_test(&cocycle, 4000, 16) {
        Ok(rep) => (
            serde_json::Value::Bool(rep.uniformly_hyperbolic),
            rep.margin,
        ),
        Err(QcError::Inconclusive { margin, .. }) => {
            (serde_json::Value::String("inconclusive".into()), margin)
        }
        Err(e) => return Err(e.into()),
    };
    print!("{}", config_header("cocycle", &args, Some(loaded.hash)));
    let out = serde_json::json!({
        "lyapunov": le,
        "rotation": rho,
        "sup_norm_growth_fit": fit,
        "uh": uh,
        "margin": margin,
    });
    println!("{out}");
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// spectrum / sweep

fn uh_cell(model: &TwistModel, energy: f64) -> String {
    let cocycle = schrodinger_cocycle(&model.v, model.alpha.value(), energy);
    match uh_test(&cocycle, 4000, 16) {
        Ok(rep) => rep.uniformly_hyperbolic.to_string(),
        Err(_) => "inconclusive".to_string(),
    }
}

fn run_spectrum(args: SpectrumArgs) -> CliResult {
    let loaded = load_model(&args.model)?;
    let model = &loaded.model;
    if args.grid < 2 || args.emax <= args.emin {
        return Err(CliError::Usage("need grid >= 2 and emax > emin".into()));
    }
    let alpha = model.alpha.value();
    let n_workers = workers(args.parallelism);
    let rows = parallel_map(args.grid, n_workers, |j| {
        let e = args.emin + (args.emax - args.emin) * j as f64 / (args.grid - 1) as f64;
        let est = ids_estimate(&model.v, alpha, args.phase, e, args.size, args.iters);
        let cocycle = schrodinger_cocycle(&model.v, alpha, e);
        let le = lyapunov_exponent(&cocycle, args.iters, 0.0, 8).unwrap_or(f64::NAN);
        let uh = uh_cell(model, e);
        match est {
            Ok(est) => {
                let rho = (1.0 - est.rotation) / 2.0;
                format!(
                    "{e:.9e},{:.9e},{:.9e},{le:.9e},{rho:.9e},{uh}\n",
                    est.counting, est.rotation
                )
            }
            Err(err) => format!("{e:.9e},nan,nan,{le:.9e},nan,{uh} ({err})\n"),
        }
    });
    let mut csv = config_header("spectrum", &args, Some(loaded.hash));
    csv.push_str("E,ids_counting,ids_rotation,lyapunov,rotation,uh\n");
    csv.extend(rows);
    emit(args.output.as_ref(), &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn run_sweep(args: SweepArgs) -> CliResult {
    let loaded = load_model(&args.model)?;
    let model = &loaded.model;
    if args.grid < 2 || args.emax <= args.emin {
        return Err(CliError::Usage("need grid >= 2 and emax > emin".into()));
    }
    let alpha = model.alpha.value();
    let n_workers = workers(args.parallelism);
    let rows = parallel_map(args.grid, n_workers, |j| {
        let e = args.emin + (args.emax - args.emin) * j as f64 / (args.grid - 1) as f64;
        let cocycle = schrodinger_cocycle(&model.v, alpha, e);
        let le = lyapunov_exponent(&cocycle, args.iters, 0.0, 8).unwrap_or(f64::NAN);
        let (ids_c, ids_r, rho) =
            match ids_estimate(&model.v, alpha, 0.0, e, args.size, args.iters) {
                Ok(est) => (est.counting, est.rotation, (1.0 - est.rotation) / 2.0),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
        let uh = uh_cell(model, e);
        let factor = spectral_measure_bound(model, e, args.eps, 32)
            .map(|f| format!("{f:.9e}"))
            .unwrap_or_else(|_| "overflow".to_string());
        format!("{e:.9e},{ids_c:.9e},{ids_r:.9e},{le:.9e},{rho:.9e},{uh},{factor}\n")
    });
    let mut csv = config_header("sweep", &args, Some(loaded.hash));
    csv.push_str("E,ids_counting,ids_rotation,lyapunov,rotation,uh,measure_factor\n");
    csv.extend(rows);
    emit(args.output.as_ref(), &csv)?;
    Ok(ExitCode::SUCCESS)
}
