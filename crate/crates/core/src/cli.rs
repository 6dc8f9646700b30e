//! Command-line surface tying the engine together.
//!
//! One subcommand per claim cluster plus data plumbing:
//! `bounds`, `simulate`, `sos-check`, `swap`, `robustness-sweep`, `phases`,
//! `sample`, `estimate`, `sweep`.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical-invariant failure
//! (a check the engine guarantees, like the quantum bound or the SOS
//! identity, did not hold).
//!
//! Flag precedence: command line > `--config` key=value file > defaults.
//! All randomness flows through explicit `--seed` flags, so every command is
//! deterministic given its arguments.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bellspec::{bell_value, violation_deficit, BellSpec};
use crate::error::{Error, Result};
use crate::hilbert::PartyDims;
use crate::lhv;
use crate::quantum::{
    self, apply_y_rotations, correlator_table, eq9_check, jz2_plus_jx2, phase_spin_statistic,
    random_singlet_mixture, random_singlet_pure, uniform_singlet_mixture, MeasurementAngles,
    NoiseModel,
};
use crate::sampler;
use crate::sos::{self, BlackBoxModel};
use crate::swap::extraction_report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "singlet-selftest", version, about = "Bell self-testing of many-body singlets")]
struct Cli {
    /// Output format: json, csv or text (sweeps default to csv).
    #[arg(long, global = true)]
    format: Option<String>,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Optional key=value config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Cap the rayon worker count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classical/quantum bounds and the brute-force LHV minimum.
    Bounds(BoundsArgs),
    /// Bell value and violation deficit of a (noisy) singlet realization.
    Simulate(SimulateArgs),
    /// Sum-of-squares identity and spectral bound on random black boxes.
    SosCheck(SosCheckArgs),
    /// SWAP extraction report for one realization.
    Swap(SwapArgs),
    /// Extraction reports across a grid of noise configurations (CSV).
    RobustnessSweep(RobustnessSweepArgs),
    /// The local-phases variant: rotated singlet, its Bell value, and the
    /// self-tested spin statistic.
    Phases(PhasesArgs),
    /// Simulate measurement rounds to a JSONL file.
    Sample(SampleArgs),
    /// Estimate the Bell value from a JSONL round file.
    Estimate(EstimateArgs),
    /// Noise-strength sweep of Bell value and scaling identity (CSV).
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Enumeration budget (strategy classes).
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated per-party phases (radians).
    #[arg(long)]
    phases: Option<String>,
    /// Singlet-manifold state: uniform | pure:SEED | mixed:SEED.
    #[arg(long)]
    state: Option<String>,
    /// Noise: depolarizing:P | dephasing:P | jitter:S[:SEED].
    #[arg(long)]
    noise: Option<String>,
}

#[derive(Debug, Args)]
struct SosCheckArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    phases: Option<String>,
    /// Comma-separated local dimensions, one per party.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Identity tolerance per unit dimension (default 1e-10).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct SwapArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    phases: Option<String>,
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    /// Embed the extracted state in the report.
    #[arg(long)]
    include_state: bool,
}

#[derive(Debug, Args)]
struct RobustnessSweepArgs {
    /// Comma-separated party counts (default 2,4).
    #[arg(long)]
    n_list: Option<String>,
    /// Comma-separated setting counts (default 3,4).
    #[arg(long)]
    k_list: Option<String>,
    /// Depolarizing strengths (default 0.02,0.05,0.1,0.15,0.2).
    #[arg(long)]
    depolarizing: Option<String>,
    /// Dephasing strengths (default 0.01,0.02,0.05,0.08,0.1).
    #[arg(long)]
    dephasing: Option<String>,
    /// Jitter strengths (default 0.02,0.05,0.08,0.1,0.15).
    #[arg(long)]
    jitter: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PhasesArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated per-party phases; `random:SEED` draws them uniformly
    /// from [−π, π].
    #[arg(long)]
    phases: Option<String>,
    /// LHV enumeration budget (the phases variant has no closed-form
    /// classical bound; skipped when the instance exceeds the budget).
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// JSONL round file produced by `sample`.
    #[arg(long)]
    rounds_file: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    phases: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Noise kind to sweep: depolarizing | dephasing | jitter.
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated strengths.
    #[arg(long)]
    values: Option<String>,
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

// ---------------------------------------------------------------------------
// Config file and resolution helpers
// ---------------------------------------------------------------------------

struct ConfigMap(HashMap<String, String>);

impl ConfigMap {
    fn empty() -> Self {
        ConfigMap(HashMap::new())
    }

    fn load(path: &PathBuf) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut map = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ParseLine {
                line: idx + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigMap(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::arg(format!("config key '{key}': cannot parse '{raw}'"))),
        }
    }
}

fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
    default: T,
) -> Result<T> {
    Ok(flag.or(cfg.get(key)?).unwrap_or(default))
}

fn resolve_required<T: std::str::FromStr>(flag: Option<T>, cfg: &ConfigMap, key: &str) -> Result<T> {
    flag.or(cfg.get(key)?)
        .ok_or_else(|| Error::arg(format!("missing required argument --{key}")))
}

fn resolve_optional<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
) -> Result<Option<T>> {
    Ok(flag.or(cfg.get(key)?))
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::arg(format!("bad number '{x}'"))))
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| Error::arg(format!("bad integer '{x}'"))))
        .collect()
}

fn parse_phases(n: usize, s: &str) -> Result<Vec<f64>> {
    if let Some(seed) = s.strip_prefix("random:") {
        use rand::{Rng, SeedableRng};
        let seed: u64 = seed.parse().map_err(|_| Error::arg(format!("bad seed in '{s}'")))?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        return Ok((0..n)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect());
    }
    let phases = parse_f64_list(s)?;
    if phases.len() != n {
        return Err(Error::arg(format!("{} phases for {n} parties", phases.len())));
    }
    Ok(phases)
}

/// Singlet-manifold state selector: uniform | pure:SEED | mixed:SEED.
fn build_state(n: usize, selector: &str) -> Result<crate::hilbert::QuantumState> {
    if selector == "uniform" {
        return uniform_singlet_mixture(n);
    }
    if let Some(seed) = selector.strip_prefix("pure:") {
        let seed: u64 = seed.parse().map_err(|_| Error::arg(format!("bad seed in '{selector}'")))?;
        return random_singlet_pure(n, seed);
    }
    if let Some(seed) = selector.strip_prefix("mixed:") {
        let seed: u64 = seed.parse().map_err(|_| Error::arg(format!("bad seed in '{selector}'")))?;
        return random_singlet_mixture(n, seed);
    }
    Err(Error::arg(format!(
        "unknown state '{selector}' (expected uniform, pure:SEED or mixed:SEED)"
    )))
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

enum Rendered {
    Json(serde_json::Value),
    Csv(String),
    /// Pre-formatted output (JSONL round data); format-agnostic.
    Raw(String),
}

fn render(rendered: &Rendered, format: &str) -> Result<String> {
    match (rendered, format) {
        (Rendered::Raw(s), _) => Ok(s.clone()),
        (Rendered::Json(v), "json") => Ok(format!("{}\n", serde_json::to_string_pretty(v)?)),
        (Rendered::Json(v), "text") => {
            let mut out = String::new();
            if let Some(map) = v.as_object() {
                for (key, val) in map {
                    out.push_str(&format!("{key}: {val}\n"));
                }
            } else {
                out.push_str(&format!("{v}\n"));
            }
            Ok(out)
        }
        (Rendered::Csv(s), "csv") => Ok(s.clone()),
        (Rendered::Csv(_), other) => {
            Err(Error::arg(format!("this command emits CSV; format '{other}' is not supported")))
        }
        (Rendered::Json(_), "csv") => Err(Error::arg("this command does not emit CSV")),
        (_, other) => Err(Error::arg(format!("unknown format '{other}'"))),
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Parses `argv` (including the program name), runs the command, writes the
/// report, and returns the process exit code.
pub fn dispatch_to<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/usage text; version/help are success.
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // Only the first initialization sticks; later calls are no-ops.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let cfg = match &cli.config {
        Some(path) => match ConfigMap::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return EXIT_VALIDATION;
            }
        },
        None => ConfigMap::empty(),
    };

    let is_sweep = matches!(cli.command, Command::RobustnessSweep(_) | Command::Sweep(_));
    let default_format = if is_sweep { "csv" } else { "json" };
    let format = cli.format.clone().unwrap_or_else(|| default_format.to_string());

    match execute(&cli.command, &cfg) {
        Ok((rendered, code)) => {
            let text = match render(&rendered, &format) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_VALIDATION;
                }
            };
            let write_result = match &cli.out {
                Some(path) => std::fs::write(path, text),
                None => out.write_all(text.as_bytes()),
            };
            if let Err(e) = write_result {
                eprintln!("error: {e}");
                return EXIT_VALIDATION;
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvariantViolated(_) => EXIT_INVARIANT,
                _ => EXIT_VALIDATION,
            }
        }
    }
}

/// As [`dispatch_to`], writing to standard output.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    dispatch_to(args, &mut std::io::stdout())
}

pub fn run() -> i32 {
    dispatch(std::env::args_os())
}

fn execute(cmd: &Command, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    match cmd {
        Command::Bounds(a) => cmd_bounds(a, cfg),
        Command::Simulate(a) => cmd_simulate(a, cfg),
        Command::SosCheck(a) => cmd_sos_check(a, cfg),
        Command::Swap(a) => cmd_swap(a, cfg),
        Command::RobustnessSweep(a) => cmd_robustness_sweep(a, cfg),
        Command::Phases(a) => cmd_phases(a, cfg),
        Command::Sample(a) => cmd_sample(a, cfg),
        Command::Estimate(a) => cmd_estimate(a, cfg),
        Command::Sweep(a) => cmd_sweep(a, cfg),
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_bounds(a: &BoundsArgs, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    let n = resolve_required(a.n, cfg, "n")?;
    let k = resolve_required(a.k, cfg, "k")?;
    let budget = resolve(a.budget, cfg, "budget", lhv::DEFAULT_BUDGET)?;
    let spec = BellSpec::new(n, k)?;
    let result = lhv::brute_force_min(&spec, budget)?;
    let classical = spec.classical_bound().ok();
    let report = serde_json::json!({
        "n": n,
        "k": k,
        "classical": classical,
        "quantum": spec.quantum_bound(),
        "brute_force": result.min_value,
        "enumerated": result.enumerated,
        "complete": result.complete,
        "witness": result.witness.outcomes(),
    });
    Ok((Rendered::Json(report), EXIT_OK))
}

/// Shared realization builder: singlet-manifold state (rotated when the spec
/// has phases) plus canonical angles, with optional noise on either.
fn build_realization(
    spec: &BellSpec,
    state_sel: &str,
    noise: Option<&NoiseModel>,
) -> Result<(crate::hilbert::QuantumState, MeasurementAngles)> {
    let base = build_state(spec.n(), state_sel)?;
    let state = if spec.has_phases() {
        apply_y_rotations(&base, spec.phases())?
    } else {
        base
    };
    let angles = MeasurementAngles::default_planar(spec.n(), spec.k())?;
    match noise {
        Some(m) => m.apply(&state, &angles),
        None => Ok((state, angles)),
    }
}

fn cmd_simulate(a: &SimulateArgs, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    let n = resolve_required(a.n, cfg, "n")?;
    let k = resolve_required(a.k, cfg, "k")?;
    let phases_raw: Option<String> = resolve_optional(a.phases.clone(), cfg, "phases")?;
    let state_sel: String = resolve(a.state.clone(), cfg, "state", "uniform".into())?;
    let noise_raw: Option<String> = resolve_optional(a.noise.clone(), cfg, "noise")?;

    let spec = match &phases_raw {
        Some(s) => BellSpec::with_phases(n, k, parse_phases(n, s)?)?,
        None => BellSpec::new(n, k)?,
    };
    let noise = noise_raw.as_deref().map(str::parse::<NoiseModel>).transpose()?;
    let (state, angles) = build_realization(&spec, &state_sel, noise.as_ref())?;

    let table = correlator_table(&state, &angles)?;
    let bell = bell_value(&table, &spec)?;
    let epsilon = violation_deficit(&bell)?;
    let mut report = serde_json::json!({
        "n": n,
        "k": k,
        "bell_value": bell.value,
        "epsilon": epsilon,
        "quantum_bound": spec.quantum_bound(),
        "classical_bound": spec.classical_bound().ok(),
    });
    if spec.has_phases() {
        report["phases"] = serde_json::json!(spec.phases());
        report["spin_statistic"] = serde_json::json!(phase_spin_statistic(&state, spec.phases())?);
    } else {
        let (lhs, rhs) = eq9_check(&state, k)?;
        // Under angle jitter the measured table is not the canonical one, so
        // report the identity sides for the actual measured value as well.
        report["scaling_lhs"] = serde_json::json!(bell.value + (n * k) as f64);
        report["scaling_rhs_ideal_angles"] = serde_json::json!(rhs);
        report["scaling_lhs_ideal_angles"] = serde_json::json!(lhs);
        report["jz2_plus_jx2"] = serde_json::json!(jz2_plus_jx2(&state)?);
    }
    Ok((Rendered::Json(report), EXIT_OK))
}

fn cmd_sos_check(a: &SosCheckArgs, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    let n = resolve_required(a.n, cfg, "n")?;
    let k = resolve_required(a.k, cfg, "k")?;
    let trials = resolve(a.trials, cfg, "trials", 20)?;
    let seed = resolve(a.seed, cfg, "seed", 0)?;
    let tol_per_dim = resolve(a.tol, cfg, "tol", crate::hilbert::OP_TOL_PER_DIM)?;
    let phases_raw: Option<String> = resolve_optional(a.phases.clone(), cfg, "phases")?;
    let dims_raw: String = resolve(a.dims.clone(), cfg, "dims", vec!["2"; n].join(","))?;

    let spec = match &phases_raw {
        Some(s) => BellSpec::with_phases(n, k, parse_phases(n, s)?)?,
        None => BellSpec::new(n, k)?,
    };
    let dims = PartyDims::new(parse_usize_list(&dims_raw)?)?;
    let tol = tol_per_dim * dims.total_dim() as f64;

    let mut max_residual: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    for t in 0..trials {
        let model = BlackBoxModel::random(&spec, &dims, seed.wrapping_add(t as u64))?;
        max_residual = max_residual.max(sos::sos_identity_residual(&model)?);
        let min_eig = crate::hilbert::min_eigenvalue(&sos::bell_operator(&model)?);
        min_margin = min_margin.min(min_eig - spec.quantum_bound());
    }
    let identity_ok = max_residual <= tol;
    let spectrum_ok = min_margin >= -1e-9;
    let report = serde_json::json!({
        "n": n,
        "k": k,
        "dims": dims.dims(),
        "trials": trials,
        "max_identity_residual": max_residual,
        "tolerance": tol,
        "min_eigenvalue_margin": min_margin,
        "identity_ok": identity_ok,
        "spectrum_ok": spectrum_ok,
    });
    let code = if identity_ok && spectrum_ok { EXIT_OK } else { EXIT_INVARIANT };
    Ok((Rendered::Json(report), code))
}

fn cmd_swap(a: &SwapArgs, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    let n = resolve_required(a.n, cfg, "n")?;
    let k = resolve_required(a.k, cfg, "k")?;
    let phases_raw: Option<String> = resolve_optional(a.phases.clone(), cfg, "phases")?;
    let state_sel: String = resolve(a.state.clone(), cfg, "state", "uniform".into())?;
    let noise_raw: Option<String> = resolve_optional(a.noise.clone(), cfg, "noise")?;

    let spec = match &phases_raw {
        Some(s) => BellSpec::with_phases(n, k, parse_phases(n, s)?)?,
        None => BellSpec::new(n, k)?,
    };
    let noise = noise_raw.as_deref().map(str::parse::<NoiseModel>).transpose()?;
    let (state, angles) = build_realization(&spec, &state_sel, noise.as_ref())?;
    let model = BlackBoxModel::from_angles(&spec, &angles)?;
    let report = extraction_report(&model, &state)?;
    let code = if report.bound_satisfied { EXIT_OK } else { EXIT_INVARIANT };
    Ok((Rendered::Json(report.to_json_value(a.include_state)), code))
}

pub const ROBUSTNESS_SWEEP_HEADER: &str =
    "n,k,kind,strength,seed,bell,epsilon,jz2_plus_jx2,jsq,bound,satisfied,vacuous";

fn cmd_robustness_sweep(a: &RobustnessSweepArgs, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    let n_list = parse_usize_list(&resolve(a.n_list.clone(), cfg, "n-list", "2,4".into())?)?;
    let k_list = parse_usize_list(&resolve(a.k_list.clone(), cfg, "k-list", "3,4".into())?)?;
    let depol =
        parse_f64_list(&resolve(a.depolarizing.clone(), cfg, "depolarizing", "0.02,0.05,0.1,0.15,0.2".into())?)?;
    let dephase =
        parse_f64_list(&resolve(a.dephasing.clone(), cfg, "dephasing", "0.01,0.02,0.05,0.08,0.1".into())?)?;
    let jitter =
        parse_f64_list(&resolve(a.jitter.clone(), cfg, "jitter", "0.02,0.05,0.08,0.1,0.15".into())?)?;
    let seed = resolve(a.seed, cfg, "seed", 0)?;

    let mut configs: Vec<(String, f64, u64)> = Vec::new();
    for &p in &depol {
        configs.push(("depolarizing".into(), p, 0));
    }
    for &p in &dephase {
        configs.push(("dephasing".into(), p, 0));
    }
    for (idx, &s) in jitter.iter().enumerate() {
        configs.push(("jitter".into(), s, seed.wrapping_add(idx as u64)));
    }

    let mut csv = String::from(ROBUSTNESS_SWEEP_HEADER);
    csv.push('\n');
    let mut all_ok = true;
    for &n in &n_list {
        for &k in &k_list {
            let spec = BellSpec::new(n, k)?;
            let base = uniform_singlet_mixture(n)?;
            let angles = MeasurementAngles::default_planar(n, k)?;
            for (kind, strength, jseed) in &configs {
                let model_noise: NoiseModel = match kind.as_str() {
                    "depolarizing" => NoiseModel::DepolarizingGlobal { strength: *strength },
                    "dephasing" => NoiseModel::DephasingLocal { strength: *strength },
                    _ => NoiseModel::AngleJitter { strength: *strength, seed: *jseed },
                };
                let (state, used_angles) = model_noise.apply(&base, &angles)?;
                let model = BlackBoxModel::from_angles(&spec, &used_angles)?;
                let r = extraction_report(&model, &state)?;
                all_ok &= r.bound_satisfied;
                csv.push_str(&format!(
                    "{n},{k},{kind},{strength},{jseed},{:.12},{:.12},{:.12e},{:.12e},{:.12},{},{}\n",
                    r.bell_value,
                    r.epsilon,
                    r.jz2_plus_jx2,
                    r.jsq,
                    r.bound,
                    r.bound_satisfied,
                    r.bound_vacuous
                ));
            }
        }
    }
    let code = if all_ok { EXIT_OK } else { EXIT_INVARIANT };
    Ok((Rendered::Csv(csv), code))
}

fn cmd_phases(a: &PhasesArgs, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    let n = resolve_required(a.n, cfg, "n")?;
    let k = resolve_required(a.k, cfg, "k")?;
    let phases_raw: String = resolve_required(a.phases.clone(), cfg, "phases")?;
    let budget = resolve(a.budget, cfg, "budget", lhv::DEFAULT_BUDGET)?;
    let phases = parse_phases(n, &phases_raw)?;
    let spec = BellSpec::with_phases(n, k, phases.clone())?;

    let state = quantum::rotated_singlet(n, &phases)?;
    let angles = MeasurementAngles::default_planar(n, k)?;
    let table = correlator_table(&state, &angles)?;
    let bell = bell_value(&table, &spec)?;
    let epsilon = violation_deficit(&bell)?;
    let statistic = phase_spin_statistic(&state, &phases)?;

    let lhv_min = if lhv::enumeration_size(&spec) <= budget as u128 {
        Some(lhv::brute_force_min(&spec, budget)?.min_value)
    } else {
        None
    };
    let report = serde_json::json!({
        "n": n,
        "k": k,
        "phases": phases,
        "bell_value": bell.value,
        "epsilon": epsilon,
        "quantum_bound": spec.quantum_bound(),
        "spin_statistic": statistic,
        "lhv_min": lhv_min,
    });
    Ok((Rendered::Json(report), EXIT_OK))
}

fn cmd_sample(a: &SampleArgs, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    let n = resolve_required(a.n, cfg, "n")?;
    let k = resolve_required(a.k, cfg, "k")?;
    let rounds = resolve(a.rounds, cfg, "rounds", 10_000)?;
    let seed = resolve(a.seed, cfg, "seed", 0)?;
    let state_sel: String = resolve(a.state.clone(), cfg, "state", "uniform".into())?;
    let noise_raw: Option<String> = resolve_optional(a.noise.clone(), cfg, "noise")?;

    let spec = BellSpec::new(n, k)?;
    let noise = noise_raw.as_deref().map(str::parse::<NoiseModel>).transpose()?;
    let (state, angles) = build_realization(&spec, &state_sel, noise.as_ref())?;
    let records = sampler::sample_rounds(&state, &angles, rounds, seed)?;
    let mut buf = Vec::new();
    sampler::write_rounds_to(&mut buf, &records)?;
    Ok((Rendered::Raw(String::from_utf8(buf).expect("JSONL is UTF-8")), EXIT_OK))
}

fn cmd_estimate(a: &EstimateArgs, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    let n = resolve_required(a.n, cfg, "n")?;
    let k = resolve_required(a.k, cfg, "k")?;
    let path: PathBuf = resolve_required(a.rounds_file.clone(), cfg, "rounds-file")?;
    let phases_raw: Option<String> = resolve_optional(a.phases.clone(), cfg, "phases")?;
    let spec = match &phases_raw {
        Some(s) => BellSpec::with_phases(n, k, parse_phases(n, s)?)?,
        None => BellSpec::new(n, k)?,
    };
    let records = sampler::read_rounds(&path)?;
    let report = sampler::estimate(&records, &spec)?;
    Ok((Rendered::Json(report.to_json_value(&spec)), EXIT_OK))
}

pub const SWEEP_HEADER: &str = "kind,strength,seed,bell,epsilon,scaling_lhs,scaling_rhs";

fn cmd_sweep(a: &SweepArgs, cfg: &ConfigMap) -> Result<(Rendered, i32)> {
    let n = resolve_required(a.n, cfg, "n")?;
    let k = resolve_required(a.k, cfg, "k")?;
    let kind: String = resolve(a.kind.clone(), cfg, "kind", "depolarizing".into())?;
    let values = parse_f64_list(&resolve(a.values.clone(), cfg, "values", "0,0.02,0.05,0.1,0.15,0.2".into())?)?;
    let seed = resolve(a.seed, cfg, "seed", 0)?;
    let state_sel: String = resolve(a.state.clone(), cfg, "state", "uniform".into())?;

    let spec = BellSpec::new(n, k)?;
    let base = build_state(n, &state_sel)?;
    let angles = MeasurementAngles::default_planar(n, k)?;

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for &v in &values {
        let model: NoiseModel = match kind.as_str() {
            "depolarizing" => NoiseModel::DepolarizingGlobal { strength: v },
            "dephasing" => NoiseModel::DephasingLocal { strength: v },
            "jitter" => NoiseModel::AngleJitter { strength: v, seed },
            other => return Err(Error::arg(format!("unknown sweep kind '{other}'"))),
        };
        let (state, used_angles) = model.apply(&base, &angles)?;
        let table = correlator_table(&state, &used_angles)?;
        let bell = bell_value(&table, &spec)?;
        let epsilon = violation_deficit(&bell)?;
        let lhs = bell.value + (n * k) as f64;
        let rhs = 2.0 * k as f64 * jz2_plus_jx2(&state)?;
        csv.push_str(&format!("{kind},{v},{seed},{:.12},{:.12},{lhs:.12},{rhs:.12}\n", bell.value, epsilon));
    }
    Ok((Rendered::Csv(csv), EXIT_OK))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swap::{robustness_bound, robustness_constants};

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut buf: Vec<u8> = Vec::new();
        let mut argv = vec!["singlet-selftest"];
        argv.extend_from_slice(args);
        let code = dispatch_to(argv, &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn bounds_command_reports_lemma_values() {
        let (code, out) = run_capture(&["bounds", "--n", "4", "--k", "3"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["classical"].as_f64().unwrap() - (-32.0 / 3.0)).abs() < 1e-9);
        assert_eq!(v["quantum"].as_f64().unwrap(), -12.0);
        assert!((v["brute_force"].as_f64().unwrap() - (-32.0 / 3.0)).abs() < 1e-9);
        assert!(v["complete"].as_bool().unwrap());
    }

    #[test]
    fn simulate_noiseless_singlet() {
        let (code, out) = run_capture(&["simulate", "--n", "2", "--k", "3", "--noise", "depolarizing:0"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["bell_value"].as_f64().unwrap() + 6.0).abs() < 1e-9);
        assert!(v["epsilon"].as_f64().unwrap() <= 1e-9);
    }

    #[test]
    fn sos_check_small_run() {
        let (code, out) = run_capture(&[
            "sos-check", "--n", "2", "--k", "3", "--dims", "2,3", "--trials", "5", "--seed", "1",
        ]);
        assert_eq!(code, EXIT_OK, "{out}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["identity_ok"].as_bool().unwrap());
        assert!(v["spectrum_ok"].as_bool().unwrap());
        assert!(v["max_identity_residual"].as_f64().unwrap() <= 6e-10);
    }

    #[test]
    fn swap_command_report() {
        let (code, out) = run_capture(&["swap", "--n", "2", "--k", "3", "--state", "pure:5"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["epsilon"].as_f64().unwrap() <= 1e-9);
        assert!(v["bound_satisfied"].as_bool().unwrap());
        assert!(v.get("extracted").is_none());
    }

    #[test]
    fn phases_command() {
        let (code, out) =
            run_capture(&["phases", "--n", "2", "--k", "3", "--phases", "0.4,-0.7"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["bell_value"].as_f64().unwrap() + 6.0).abs() < 1e-9);
        assert!(v["spin_statistic"].as_f64().unwrap() <= 1e-8);
        assert!(v["lhv_min"].as_f64().unwrap() > -6.0);
    }

    #[test]
    fn sweep_csv_schema() {
        let (code, out) = run_capture(&[
            "sweep", "--n", "2", "--k", "3", "--kind", "depolarizing", "--values", "0,0.1",
        ]);
        assert_eq!(code, EXIT_OK);
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_HEADER);
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn unknown_flags_exit_with_validation_error() {
        let (code, _) = run_capture(&["bounds", "--n", "2", "--k", "3", "--bogus"]);
        assert_eq!(code, EXIT_VALIDATION);
        let (code, _) = run_capture(&["no-such-command"]);
        assert_eq!(code, EXIT_VALIDATION);
        // Missing required argument.
        let (code, _) = run_capture(&["bounds", "--n", "2"]);
        assert_eq!(code, EXIT_VALIDATION);
    }

    #[test]
    fn config_file_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.conf");
        std::fs::write(&cfg_path, "n=4\nk=3\n# comment\n").unwrap();
        let cfg_str = cfg_path.to_str().unwrap();

        // Config supplies both values.
        let (code, out) = run_capture(&["bounds", "--config", cfg_str]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["n"].as_u64().unwrap(), 4);

        // Flags win over config.
        let (code, out) = run_capture(&["bounds", "--config", cfg_str, "--n", "2"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["n"].as_u64().unwrap(), 2);
        assert!((v["classical"].as_f64().unwrap() + 16.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn out_flag_writes_file_and_sample_estimate_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rounds_path = dir.path().join("rounds.jsonl");
        let (code, out) = run_capture(&[
            "sample", "--n", "2", "--k", "3", "--rounds", "4000", "--seed", "7", "--out",
            rounds_path.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.is_empty(), "report goes to the file");

        let (code, out) = run_capture(&[
            "estimate", "--rounds-file", rounds_path.to_str().unwrap(), "--n", "2", "--k", "3",
        ]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let bell_hat = v["bell_hat"].as_f64().unwrap();
        let stderr = v["stderr"].as_f64().unwrap();
        assert_eq!(v["rounds_used"].as_u64().unwrap(), 4000);
        assert!((bell_hat + 6.0).abs() <= 5.0 * stderr, "bell_hat {bell_hat} stderr {stderr}");
    }

    #[test]
    fn text_format_renders_flat_keys() {
        let (code, out) = run_capture(&["bounds", "--n", "2", "--k", "3", "--format", "text"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.lines().any(|l| l.starts_with("quantum: ")));
    }

    #[test]
    fn constants_are_exposed_somewhere_sensible() {
        // The robustness constants appear in swap reports through the bound;
        // spot-check the chain once more from the CLI layer's perspective.
        let c = robustness_constants();
        assert!((c.r - 751.553).abs() < 5e-4);
        assert!((robustness_bound(4, 0.01).unwrap() - 31.63).abs() < 0.01);
    }
}
