//! Command-line experiments: fidelity curves, single clones, universality
//! checks and the universal-broadcaster search sweep.

pub mod config;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qubit_broadcast::channels::{
    compute_coefficients_on_copy, default_omega_grid, default_theta_grid, BroadcastChannel,
};
use qubit_broadcast::cloners::{
    gisin_massar_channel, known_basis_broadcaster, omega_dqcm, optimal_mixed_fidelity,
};
use qubit_broadcast::densops::{qubit_from_params, BlochVector, QubitParams};
use qubit_broadcast::fidelity::{qubit_fidelity_closed_form, shrinking_factor};
use qubit_broadcast::nutsearch::{
    tradeoff_sweep, ChannelParameterization, SearchConfig, StateSample, DEFAULT_ANCILLA_DIM,
    DEFAULT_BUDGET, DEFAULT_COPIES, DEFAULT_RANDOM_STATES, DEFAULT_RESTARTS, UNIVERSALITY_TOL,
};
use qubit_broadcast::report::format_f64;

use config::{parse_config, Settings};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<qubit_broadcast::Error> for CliError {
    fn from(e: qubit_broadcast::Error) -> Self {
        use qubit_broadcast::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::DimensionMismatch(_)
            | E::NonFinite
            | E::NotDensityOperator(_) => CliError::Usage(e.to_string()),
            E::NotUnitary(_) | E::NegativeRadicand(_) | E::Inconsistent(_) => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qbcast",
    version,
    about = "Broadcasting experiments for mixed qubits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal 1→M clone fidelity over a uniform λ grid.
    FidelityCurve(FidelityCurveArgs),
    /// Run one cloning machine on one input and report the clones.
    Clone(CloneArgs),
    /// Tabulate clone fidelity and E-coefficient residuals over a grid.
    UniversalityCheck(UniversalityArgs),
    /// Search for channels with constant clone fidelity at each level.
    NutSweep(NutSweepArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// CSV output file; CSV goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    /// key=value settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Read every angle in degrees.
    #[arg(long)]
    pub degrees: bool,
    /// Worker threads for the search (default: all cores).
    #[arg(long)]
    pub threads: Option<String>,
}

#[derive(Debug, Args)]
pub struct MachineArgs {
    /// gm, omega-dqcm or known-basis.
    #[arg(long)]
    pub machine: Option<String>,
    /// Number of copies M.
    #[arg(long = "copies", short = 'M')]
    pub copies: Option<String>,
    /// Basis angle θ of the known-basis machine.
    #[arg(long)]
    pub machine_theta: Option<String>,
    /// Phase ω built into omega-dqcm or known-basis.
    #[arg(long)]
    pub machine_omega: Option<String>,
}

#[derive(Debug, Args)]
pub struct FidelityCurveArgs {
    #[arg(long = "copies", short = 'M')]
    pub copies: Option<String>,
    /// Number of λ grid points, endpoints included.
    #[arg(long)]
    pub lambda_steps: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CloneArgs {
    #[command(flatten)]
    pub machine: MachineArgs,
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct UniversalityArgs {
    #[command(flatten)]
    pub machine: MachineArgs,
    /// θ points in [0, π/2]; default grid when omitted.
    #[arg(long)]
    pub theta_steps: Option<String>,
    /// ω points in [0, 2π); default grid when omitted.
    #[arg(long)]
    pub omega_steps: Option<String>,
    /// λ points in [0, 1].
    #[arg(long)]
    pub lambda_steps: Option<String>,
    /// Restrict the grid to this θ.
    #[arg(long)]
    pub fix_theta: Option<String>,
    /// Restrict the grid to this ω.
    #[arg(long)]
    pub fix_omega: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct NutSweepArgs {
    #[arg(long = "copies", short = 'M')]
    pub copies: Option<String>,
    /// Ancilla dimension d.
    #[arg(long = "ancilla-dim", short = 'd')]
    pub ancilla_dim: Option<String>,
    /// Comma-separated target fidelity levels.
    #[arg(long, allow_hyphen_values = true)]
    pub levels: Option<String>,
    /// Objective evaluations per restart.
    #[arg(long, allow_hyphen_values = true)]
    pub budget: Option<String>,
    #[arg(long)]
    pub restarts: Option<String>,
    /// Random states added to the fixed probes.
    #[arg(long)]
    pub random_states: Option<String>,
    /// Sample every state at this single ω.
    #[arg(long)]
    pub fixed_omega: Option<String>,
    /// Start of restart 0: none or omega-dqcm.
    #[arg(long)]
    pub init: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

const COMMON_KEYS: [&str; 4] = ["seed", "output_path", "degrees", "threads"];
const MACHINE_KEYS: [&str; 4] = ["machine", "M", "machine_theta", "machine_omega"];

fn settings(
    command_keys: &[&str],
    common: &CommonArgs,
    mut flags: Vec<(&'static str, Option<String>)>,
) -> Result<Settings, CliError> {
    let allowed: Vec<&str> = command_keys.iter().chain(&COMMON_KEYS).copied().collect();
    let file = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            parse_config(&text)?
        }
        None => Default::default(),
    };
    flags.push(("seed", common.seed.clone()));
    flags.push(("threads", common.threads.clone()));
    flags.push((
        "output_path",
        common.out.as_ref().map(|p| p.display().to_string()),
    ));
    let s = Settings::merge(&allowed, file, flags, common.degrees)?;
    s.parsed::<u64>("seed")?;
    s.parsed::<usize>("threads")?;
    Ok(s)
}

fn machine_flags(m: &MachineArgs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("machine", m.machine.clone()),
        ("M", m.copies.clone()),
        ("machine_theta", m.machine_theta.clone()),
        ("machine_omega", m.machine_omega.clone()),
    ]
}

/// Where the CSV goes and where human-readable lines go.
struct Sink {
    csv: Box<dyn Write>,
    to_file: bool,
}

impl Sink {
    /// Opens the output before any computation so a bad path fails fast.
    fn open(s: &Settings) -> Result<Self, CliError> {
        match s.raw("output_path") {
            Some(path) => {
                let file = File::create(path)
                    .map_err(|e| CliError::Usage(format!("cannot write {path}: {e}")))?;
                Ok(Self {
                    csv: Box::new(file),
                    to_file: true,
                })
            }
            None => Ok(Self {
                csv: Box::new(io::stdout()),
                to_file: false,
            }),
        }
    }

    fn say(&self, line: &str) {
        if self.to_file {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }

    fn write_rows(&mut self, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let io_err = |e: csv::Error| CliError::Runtime(format!("writing CSV failed: {e}"));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut self.csv);
        w.write_record(header).map_err(io_err)?;
        for row in rows {
            w.write_record(row).map_err(io_err)?;
        }
        w.flush().map_err(|e| io_err(e.into()))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::FidelityCurve(a) => fidelity_curve(&a),
        Command::Clone(a) => clone(&a),
        Command::UniversalityCheck(a) => universality_check(&a),
        Command::NutSweep(a) => nut_sweep(&a),
    }
}

fn fidelity_curve(a: &FidelityCurveArgs) -> Result<(), CliError> {
    let s = settings(
        &["M", "lambda_steps"],
        &a.common,
        vec![
            ("M", a.copies.clone()),
            ("lambda_steps", a.lambda_steps.clone()),
        ],
    )?;
    let copies: usize = s.get("M", 2)?;
    let steps: usize = s.get("lambda_steps", 11)?;
    if copies < 2 {
        return Err(CliError::Usage(format!(
            "`M` must be at least 2, got {copies}"
        )));
    }
    if steps < 2 {
        return Err(CliError::Usage(format!(
            "`lambda_steps` must be at least 2, got {steps}"
        )));
    }
    let mut sink = Sink::open(&s)?;
    let rows = uniform(0.0, 1.0, steps, true)
        .into_iter()
        .map(|lambda| {
            let f = optimal_mixed_fidelity(copies, lambda)?.value();
            Ok(vec![format_f64(lambda), format_f64(f)])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    sink.write_rows(&["lambda", "fidelity"], &rows)
}

/// `n` evenly spaced points from `lo`; `closed` includes `hi`.
fn uniform(lo: f64, hi: f64, n: usize, closed: bool) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let intervals = if closed { n - 1 } else { n } as f64;
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / intervals)
                .collect()
        }
    }
}

fn build_machine(
    s: &Settings,
    default_theta: f64,
    default_omega: f64,
) -> Result<(String, BroadcastChannel), CliError> {
    let name = s.raw("machine").unwrap_or("gm").to_string();
    let copies: usize = s.get("M", 2)?;
    let theta = s.angle("machine_theta")?.unwrap_or(default_theta);
    let omega = s.angle("machine_omega")?.unwrap_or(default_omega);
    let ch = match name.as_str() {
        "gm" => gisin_massar_channel(copies)?,
        "omega-dqcm" => {
            if copies != 2 {
                return Err(CliError::Usage(format!(
                    "invalid parameter `M`: omega-dqcm makes 2 copies, got {copies}"
                )));
            }
            omega_dqcm(omega)?
        }
        "known-basis" => known_basis_broadcaster(theta, omega, copies)?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown machine `{other}` (expected gm, omega-dqcm or known-basis)"
            )))
        }
    };
    Ok((name, ch))
}

fn entries(rho: &qubit_broadcast::densops::DensityOperator) -> [qubit_broadcast::densops::C64; 4] {
    [rho.get(0, 0), rho.get(0, 1), rho.get(1, 0), rho.get(1, 1)]
}

fn clone(a: &CloneArgs) -> Result<(), CliError> {
    let mut keys = MACHINE_KEYS.to_vec();
    keys.extend(["theta", "omega", "lambda"]);
    let mut flags = machine_flags(&a.machine);
    flags.extend([
        ("theta", a.theta.clone()),
        ("omega", a.omega.clone()),
        ("lambda", a.lambda.clone()),
    ]);
    let s = settings(&keys, &a.common, flags)?;
    let p = QubitParams::new(
        s.angle("theta")?.unwrap_or(0.0),
        s.angle("omega")?.unwrap_or(0.0),
        s.get("lambda", 1.0)?,
    )?;
    let (name, ch) = build_machine(&s, p.theta, p.omega)?;
    let mut sink = Sink::open(&s)?;
    let rho_in = qubit_from_params(&p)?;
    let bloch_in = BlochVector::of(&rho_in)?.norm();
    sink.say(&format!(
        "machine {name}, M={}, d={}; input theta={} omega={} lambda={}",
        ch.copies(),
        ch.ancilla_dim(),
        p.theta,
        p.omega,
        p.lambda
    ));
    let mut rows = Vec::new();
    for copy in 0..ch.copies() {
        let rho_out = ch.clone_map(copy)?.apply(&rho_in)?;
        let e = entries(&rho_out);
        let fidelity = qubit_fidelity_closed_form(e[0].re, e[1], &p)?.value();
        let bloch_out = BlochVector::of(&rho_out)?.norm();
        let shrink = shrinking_factor(&rho_in, &rho_out)?
            .map(|f| format_f64(f.value()))
            .unwrap_or_else(|| "n/a".to_string());
        sink.say(&format!(
            "copy {copy}: rho00={} rho01={}{:+}i rho11={} fidelity={} bloch_in={} bloch_out={} shrinking={}",
            e[0].re, e[1].re, e[1].im, e[3].re, fidelity, bloch_in, bloch_out, shrink
        ));
        rows.push(vec![
            copy.to_string(),
            format_f64(e[0].re),
            format_f64(e[1].re),
            format_f64(e[1].im),
            format_f64(e[3].re),
            format_f64(fidelity),
            format_f64(bloch_in),
            format_f64(bloch_out),
            shrink,
        ]);
    }
    sink.write_rows(
        &[
            "copy",
            "rho00",
            "rho01_re",
            "rho01_im",
            "rho11",
            "fidelity",
            "bloch_in",
            "bloch_out",
            "shrinking_factor",
        ],
        &rows,
    )
}

fn universality_check(a: &UniversalityArgs) -> Result<(), CliError> {
    let mut keys = MACHINE_KEYS.to_vec();
    keys.extend([
        "theta_steps",
        "omega_steps",
        "lambda_steps",
        "fix_theta",
        "fix_omega",
    ]);
    let mut flags = machine_flags(&a.machine);
    flags.extend([
        ("theta_steps", a.theta_steps.clone()),
        ("omega_steps", a.omega_steps.clone()),
        ("lambda_steps", a.lambda_steps.clone()),
        ("fix_theta", a.fix_theta.clone()),
        ("fix_omega", a.fix_omega.clone()),
    ]);
    let s = settings(&keys, &a.common, flags)?;
    let fix_theta = s.angle("fix_theta")?;
    let fix_omega = s.angle("fix_omega")?;
    let thetas = match (fix_theta, s.parsed::<usize>("theta_steps")?) {
        (Some(t), _) => vec![t],
        (None, Some(n)) => uniform(0.0, FRAC_PI_2, n, true),
        (None, None) => default_theta_grid(),
    };
    let omegas = match (fix_omega, s.parsed::<usize>("omega_steps")?) {
        (Some(w), _) => vec![w],
        (None, Some(n)) => uniform(0.0, 2.0 * PI, n, false),
        (None, None) => default_omega_grid(),
    };
    let lambdas = uniform(0.0, 1.0, s.get("lambda_steps", 5)?, true);
    if thetas.is_empty() || omegas.is_empty() || lambdas.is_empty() {
        return Err(CliError::Usage("grid sizes must be at least 1".into()));
    }
    let (name, ch) = build_machine(&s, fix_theta.unwrap_or(0.0), fix_omega.unwrap_or(0.0))?;
    let mut sink = Sink::open(&s)?;

    let mut rows = Vec::new();
    let mut spread: f64 = 0.0;
    let (mut r_x, mut r_y): (f64, f64) = (0.0, 0.0);
    for copy in 0..ch.copies() {
        let map = ch.clone_map(copy)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &theta in &thetas {
            for &omega in &omegas {
                let co = compute_coefficients_on_copy(&ch, theta, omega, copy)?;
                let (ex, ey) = ((co.e_x - 1.0).abs(), co.e_y.norm());
                r_x = r_x.max(ex);
                r_y = r_y.max(ey);
                for &lambda in &lambdas {
                    let p = QubitParams::new(theta, omega, lambda)?;
                    let out = map.apply(&qubit_from_params(&p)?)?;
                    let f =
                        qubit_fidelity_closed_form(out.get(0, 0).re, out.get(0, 1), &p)?.value();
                    lo = lo.min(f);
                    hi = hi.max(f);
                    rows.push(vec![
                        copy.to_string(),
                        format_f64(theta),
                        format_f64(omega),
                        format_f64(lambda),
                        format_f64(f),
                        format_f64(ex),
                        format_f64(ey),
                    ]);
                }
            }
        }
        spread = spread.max(hi - lo);
    }
    let verdict = if spread < UNIVERSALITY_TOL {
        "UNIVERSAL"
    } else {
        "NOT-UNIVERSAL"
    };
    sink.write_rows(
        &[
            "copy",
            "theta",
            "omega",
            "lambda",
            "fidelity",
            "e_x_residual",
            "e_y_residual",
        ],
        &rows,
    )?;
    sink.say(&format!(
        "machine {name}: {} grid points per copy, fidelity spread {}, max |E_x-1| {}, max |E_y| {}",
        thetas.len() * omegas.len() * lambdas.len(),
        format_f64(spread),
        format_f64(r_x),
        format_f64(r_y)
    ));
    sink.say(&format!(
        "verdict: {verdict} (tolerance {UNIVERSALITY_TOL:e})"
    ));
    Ok(())
}

fn default_levels() -> Vec<f64> {
    (11..=20).map(|k| k as f64 / 20.0).collect()
}

fn nut_sweep(a: &NutSweepArgs) -> Result<(), CliError> {
    let s = settings(
        &[
            "M",
            "d",
            "levels",
            "budget",
            "restarts",
            "random_states",
            "fixed_omega",
            "init",
        ],
        &a.common,
        vec![
            ("M", a.copies.clone()),
            ("d", a.ancilla_dim.clone()),
            ("levels", a.levels.clone()),
            ("budget", a.budget.clone()),
            ("restarts", a.restarts.clone()),
            ("random_states", a.random_states.clone()),
            ("fixed_omega", a.fixed_omega.clone()),
            ("init", a.init.clone()),
        ],
    )?;
    let budget: i64 = s.get("budget", DEFAULT_BUDGET as i64)?;
    if budget <= 0 {
        return Err(CliError::Runtime(format!(
            "`budget` must be positive, got {budget}"
        )));
    }
    let seed: u64 = s.get("seed", 42)?;
    let levels = s.list("levels")?.unwrap_or_else(default_levels);
    let fixed_omega = s.angle("fixed_omega")?;
    let random_states: usize = s.get("random_states", DEFAULT_RANDOM_STATES)?;
    let mut cfg = SearchConfig {
        copies: s.get("M", DEFAULT_COPIES)?,
        ancilla_dim: s.get("d", DEFAULT_ANCILLA_DIM)?,
        budget: budget as usize,
        restarts: s.get("restarts", DEFAULT_RESTARTS)?,
        seed,
        initial: None,
    };
    match s.raw("init").unwrap_or("none") {
        "none" => {}
        "omega-dqcm" => {
            let ch = omega_dqcm(fixed_omega.unwrap_or(0.0))?;
            cfg.initial = Some(ChannelParameterization::encode(&ch)?);
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown init `{other}` (expected none or omega-dqcm)"
            )))
        }
    }
    let sample = match fixed_omega {
        Some(w) => StateSample::fixed_omega(w, seed, random_states),
        None => StateSample::generate(seed, random_states),
    };
    let threads: usize = s.get("threads", 0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))?;
    let mut sink = Sink::open(&s)?;
    let curve = pool.install(|| tradeoff_sweep(&cfg, &levels, &sample))?;
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| {
            vec![
                format_f64(p.target_level),
                format_f64(p.achieved_spread),
                format_f64(p.achieved_mean),
                p.evaluations_used.to_string(),
            ]
        })
        .collect();
    sink.write_rows(
        &[
            "target_level",
            "achieved_spread",
            "achieved_mean",
            "evaluations_used",
        ],
        &rows,
    )?;
    match curve.min_spread() {
        Some(min) => {
            let verdict = if min < UNIVERSALITY_TOL {
                "UNIVERSAL channel found"
            } else {
                "no UNIVERSAL channel found"
            };
            sink.say(&format!(
                "minimum spread {} over {} levels; {verdict} at tolerance {UNIVERSALITY_TOL:e} (numerical evidence, not a proof)",
                format_f64(min),
                curve.points.len()
            ));
        }
        None => sink.say("no levels requested; empty curve"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grids() {
        assert_eq!(uniform(0.0, 1.0, 3, true), vec![0.0, 0.5, 1.0]);
        assert_eq!(uniform(0.0, 1.0, 4, false), vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(uniform(0.3, 1.0, 1, true), vec![0.3]);
        assert!(uniform(0.0, 1.0, 0, true).is_empty());
    }

    #[test]
    fn default_levels_are_exact_twentieths() {
        let l = default_levels();
        assert_eq!(l.len(), 10);
        assert_eq!(l[0], 0.55);
        assert_eq!(l[9], 1.0);
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        let e: CliError = qubit_broadcast::Error::NonFinite.into();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        let e: CliError = qubit_broadcast::Error::Inconsistent("x".into()).into();
        assert_eq!(e.exit_code(), EXIT_RUNTIME);
    }
}
