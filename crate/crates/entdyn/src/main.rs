//! Command-line driver. Scenario files are flat `key = value` text (see
//! `config`); every subcommand that produces data writes one CSV
//! atomically. Worker count for the trajectory ensemble follows rayon's
//! RAYON_NUM_THREADS environment variable.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration/validation
//! failure.

use clap::{Parser, Subcommand};
use entdyn::channels::ChannelKind;
use entdyn::config::{ConfigError, ScenarioConfig};
use entdyn::ensemble::{self, EnsembleConfig, StudyChannel};
use entdyn::entanglement::{k_of_u, wootters_concurrence};
use entdyn::oracle::{self, BoundCurve};
use entdyn::report::{self, BoundsRow, OracleRow, SimulateRow};
use entdyn::trajectory::TrajectoryConfig;
use entdyn::unraveling::UnravelingPolicy;
use entdyn::{DensityMatrix, LindbladChannel, PureState};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "entdyn",
    about = "Entanglement dynamics of continuously monitored two-qubit open systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Path to the scenario file.
    #[arg(short, long)]
    config: PathBuf,
    /// Output CSV path (overrides output.path from the scenario).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trajectory ensemble and write checkpoint statistics.
    Simulate(ScenarioArgs),
    /// Evaluate the analytic bound curves for the configured scenario.
    Bounds(ScenarioArgs),
    /// Bound tightness over Haar-random initial states.
    Study(ScenarioArgs),
    /// Master-equation entanglement measures vs the closed forms.
    Oracle(ScenarioArgs),
    /// Run the built-in invariant suite.
    Selftest,
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => with_scenario(&args, simulate),
        Command::Bounds(args) => with_scenario(&args, bounds),
        Command::Study(args) => with_scenario(&args, study),
        Command::Oracle(args) => with_scenario(&args, oracle_cmd),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn with_scenario(
    args: &ScenarioArgs,
    run: impl FnOnce(&ScenarioConfig, &Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        CliError::Validation(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let config = ScenarioConfig::parse(&text)?;
    let output: PathBuf = match &args.output {
        Some(p) => p.clone(),
        None => config.output_path()?.into(),
    };
    run(&config, &output)
}

/// Oracle dt fine enough for the RK4 stability budget of this channel.
fn oracle_dt(dt: f64, channel: &LindbladChannel) -> f64 {
    let rate = channel.max_rate();
    if rate > 0.0 {
        dt.min(0.005 / rate)
    } else {
        dt
    }
}

/// Closed-form unconditional entanglement (C, C_A) when available.
fn closed_forms(
    channel: &LindbladChannel,
    psi: &PureState,
    gamma: f64,
    t: f64,
) -> (f64, f64) {
    let p = oracle::state_parameters(psi);
    match channel.kind() {
        ChannelKind::Dephasing => oracle::appendix_c_dephasing(p.c0, p.x0, p.w0, gamma, t),
        ChannelKind::Thermal { nbar } if nbar == 0.0 => {
            oracle::appendix_c_zero_t(p.c0, p.p11, gamma, t)
        }
        _ => (f64::NAN, f64::NAN),
    }
}

/// Analytic average-concurrence curve matching the configured policy, if
/// one exists; NaN otherwise.
fn policy_bound(
    channel: &LindbladChannel,
    policy: &UnravelingPolicy,
    psi: &PureState,
    gamma: f64,
    t: f64,
) -> f64 {
    let p = oracle::state_parameters(psi);
    match policy {
        UnravelingPolicy::Protection => p.c0,
        UnravelingPolicy::Fixed(u) => match k_of_u(channel, u) {
            Ok(k) => oracle::exponential_bound(p.c0, k, t),
            Err(_) => f64::NAN,
        },
        UnravelingPolicy::DephasingOpt(sign) => {
            oracle::dephasing_bounds(p.c0, p.x0, gamma, *sign, t).unwrap_or(f64::NAN)
        }
        UnravelingPolicy::ZeroTOpt(sign) => oracle::zero_t_bounds(p.c0, p.p11, gamma, *sign, t),
        UnravelingPolicy::InfTOptPlus => oracle::inf_t_bell_bound(p.c0, gamma, t),
        UnravelingPolicy::Localized => f64::NAN,
    }
}

fn simulate(config: &ScenarioConfig, output: &Path) -> Result<(), CliError> {
    let channel = config.channel()?;
    let policy = config.policy(&channel)?;
    let initial = config.initial_state()?;
    let gamma = config.gamma()?;
    let base = TrajectoryConfig {
        initial_state: initial.clone(),
        channel: channel.clone(),
        policy: policy.clone(),
        dt: config.dt()?,
        t_final: config.t_final()?,
        seed: config.seed()?,
        stream: 0,
        record_stride: 1,
        record_states: false,
        record_currents: false,
    };
    let warnings = base
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let ensemble_config = EnsembleConfig {
        base,
        n_traj: config.n_traj()?,
        checkpoints: config.checkpoints()?,
    };
    let stats = ensemble::run_ensemble(&ensemble_config).map_err(|e| match e {
        ensemble::EnsembleError::InvalidConfig(msg) => CliError::Validation(msg),
        other => CliError::Runtime(other.to_string()),
    })?;

    let times: Vec<f64> = stats.checkpoints.iter().map(|cp| cp.t).collect();
    let rho0 = DensityMatrix::from_pure(&initial);
    let oracle_rhos = oracle::master_at_times(
        &rho0,
        &channel,
        oracle_dt(ensemble_config.base.dt, &channel),
        &times,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    let rows: Vec<SimulateRow> = stats
        .checkpoints
        .iter()
        .zip(&oracle_rhos)
        .map(|(cp, oracle_rho)| {
            let (oracle_c, oracle_ca) = closed_forms(&channel, &initial, gamma, cp.t);
            SimulateRow {
                t: cp.t,
                mean_c: cp.mean_c,
                se_c: cp.se_c,
                var_c: cp.var_c,
                mean_eof: cp.mean_eof,
                oracle_c,
                oracle_ca,
                bound_value: policy_bound(&channel, &policy, &initial, gamma, cp.t),
                trace_dist: cp.rho.trace_distance(oracle_rho),
            }
        })
        .collect();
    report::write_atomic(output, &report::render_simulate(&rows))?;

    if config.record_states()? {
        let hist: Vec<(f64, &[u64])> = stats
            .checkpoints
            .iter()
            .map(|cp| (cp.t, cp.histogram.as_slice()))
            .collect();
        let mut hist_path = output.as_os_str().to_os_string();
        hist_path.push(".hist.csv");
        report::write_atomic(Path::new(&hist_path), &report::render_histogram(&hist))?;
    }
    if stats.fallback_events > 0 {
        eprintln!(
            "note: adaptive policy fell back to u = -I on {} steps",
            stats.fallback_events
        );
    }
    Ok(())
}

fn bounds(config: &ScenarioConfig, output: &Path) -> Result<(), CliError> {
    let channel = config.channel()?;
    let gamma = config.gamma()?;
    let psi = config.initial_state()?;
    let p = oracle::state_parameters(&psi);
    let curves: Vec<BoundCurve> = match channel.kind() {
        ChannelKind::Dephasing => vec![
            BoundCurve::DephasingPlus {
                c0: p.c0,
                x0: p.x0,
                gamma,
            },
            BoundCurve::DephasingMinus {
                c0: p.c0,
                x0: p.x0,
                gamma,
            },
            BoundCurve::AppCDephasingC {
                c0: p.c0,
                x0: p.x0,
                w0: p.w0,
                gamma,
            },
            BoundCurve::AppCDephasingCA {
                c0: p.c0,
                x0: p.x0,
                w0: p.w0,
                gamma,
            },
            BoundCurve::ExpLocal { c0: p.c0, k: gamma },
        ],
        ChannelKind::Thermal { nbar } if nbar == 0.0 => vec![
            BoundCurve::ZeroTPlus {
                c0: p.c0,
                p11: p.p11,
                gamma,
            },
            BoundCurve::ZeroTMinus {
                c0: p.c0,
                p11: p.p11,
                gamma,
            },
            BoundCurve::AppCZeroTC {
                c0: p.c0,
                p11: p.p11,
                gamma,
            },
            BoundCurve::AppCZeroTCA {
                c0: p.c0,
                p11: p.p11,
                gamma,
            },
            BoundCurve::ExpLocal { c0: p.c0, k: gamma },
        ],
        ChannelKind::InfiniteTemperature(_) => vec![BoundCurve::InfTBellPlus {
            c0: p.c0,
            big_gamma: gamma,
        }],
        other => {
            return Err(CliError::Validation(format!(
                "no analytic bound curves for channel kind {other:?}"
            )))
        }
    };
    let mut rows = Vec::new();
    for &t in &config.checkpoints()? {
        for curve in &curves {
            rows.push(BoundsRow {
                t,
                label: curve.label(),
                value: curve
                    .value(t)
                    .map_err(|e| CliError::Runtime(e.to_string()))?,
            });
        }
    }
    report::write_atomic(output, &report::render_bounds(&rows))?;
    Ok(())
}

fn study(config: &ScenarioConfig, output: &Path) -> Result<(), CliError> {
    let channel = match config.channel()?.kind() {
        ChannelKind::Dephasing => StudyChannel::Dephasing,
        ChannelKind::Thermal { nbar } if nbar == 0.0 => StudyChannel::ZeroT,
        other => {
            return Err(CliError::Validation(format!(
                "bound study supports dephasing and amplitude_damping channels, got {other:?}"
            )))
        }
    };
    let sign = config.opt_sign_or_plus()?;
    let rows = ensemble::bound_performance_study(
        channel,
        sign,
        config.gamma()?,
        &config.checkpoints()?,
        config.n_states()?,
        config.seed()?,
    )
    .map_err(|e| match e {
        ensemble::EnsembleError::InvalidConfig(msg) => CliError::Validation(msg),
        other => CliError::Runtime(other.to_string()),
    })?;
    let checkpoints = config.checkpoints()?;
    if let Some(&t_last) = checkpoints.iter().max_by(|a, b| a.total_cmp(b)) {
        eprintln!(
            "fraction of states with tightness ratio >= 0.8 at t = {t_last}: {}",
            ensemble::fraction_at_least(&rows, t_last, 0.8)
        );
    }
    report::write_atomic(output, &report::render_study(&rows))?;
    Ok(())
}

fn oracle_cmd(config: &ScenarioConfig, output: &Path) -> Result<(), CliError> {
    let channel = config.channel()?;
    let gamma = config.gamma()?;
    let psi = config.initial_state()?;
    let times = config.checkpoints()?;
    let rho0 = DensityMatrix::from_pure(&psi);
    let rhos = oracle::master_at_times(&rho0, &channel, oracle_dt(config.dt()?, &channel), &times)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let rows: Vec<OracleRow> = times
        .iter()
        .zip(&rhos)
        .map(|(&t, rho)| {
            let (app_c_c, app_c_ca) = closed_forms(&channel, &psi, gamma, t);
            OracleRow {
                t,
                wootters_c: wootters_concurrence(rho),
                app_c_c,
                app_c_ca,
            }
        })
        .collect();
    report::write_atomic(output, &report::render_oracle(&rows))?;
    Ok(())
}

fn selftest() -> Result<(), CliError> {
    let results = entdyn::selftest::run_selftest();
    let mut failures = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {} — {}", r.name, r.detail);
        if !r.passed {
            failures += 1;
        }
    }
    println!("{} checks, {} failed", results.len(), failures);
    if failures > 0 {
        Err(CliError::Runtime(format!("{failures} selftest checks failed")))
    } else {
        Ok(())
    }
}
