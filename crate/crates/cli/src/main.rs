//! `yardsale` — simulate / ensemble / verify workflows for the yard-sale
//! wealth-exchange model.
//!
//! Exit codes: 0 success; 1 runtime failure; 2 configuration error; 3 a
//! statistical acceptance check failed (a confidence interval excludes its
//! target). Diagnostics go to standard error; data goes to files (or to
//! standard output with `--stdout`).

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{
    parse_config, ConfigError, FractionSpec, RunConfigFile, DEFAULT_CONDENSATION_EPSILON,
};
use yardsale_core::{
    condensation_time_study, estimate_win_probabilities, run_ensemble, run_trajectory,
    verify_increment_bound, verify_stake_summability, GridPoint,
};

#[derive(Parser)]
#[command(name = "yardsale", version, about = "Yard-sale wealth-exchange model: simulation and statistical verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Number of trajectories for ensemble-style commands.
    #[arg(long, global = true, value_name = "K", default_value_t = 1000)]
    trajectories: u64,

    /// Override the master seed from the config.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,

    /// Override the output path prefix from the config.
    #[arg(long, global = true, value_name = "PREFIX")]
    out: Option<String>,

    /// Write data to standard output instead of files.
    #[arg(long, global = true)]
    stdout: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trajectory and write its metrics CSV.
    Simulate,
    /// Run an ensemble and write the aggregated summary.
    Ensemble,
    /// Check the one-step squared-norm increment identity and inequality.
    VerifyIncrement,
    /// Check the cumulative squared-stake budget.
    VerifySummability,
    /// Estimate per-agent win probabilities against their initial shares.
    WinProb,
    /// Tabulate condensation hitting times over a parameter grid.
    CondenseTimes {
        /// Comma-separated agent counts (default: the config value).
        #[arg(long, value_name = "N,N,...")]
        grid_n: Option<String>,
        /// Comma-separated win probabilities in [0.5, 1).
        #[arg(long, value_name = "P,P,...")]
        grid_p: Option<String>,
        /// Comma-separated constant stake fractions in (0, 1).
        #[arg(long, value_name = "B,B,...")]
        grid_beta: Option<String>,
        /// Comma-separated condensation epsilons in (0, 1).
        #[arg(long, value_name = "E,E,...")]
        grid_epsilon: Option<String>,
    },
}

enum CliError {
    Config(String),
    Runtime(String),
    CheckFailed(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(3)
        }
    }
}

/// `YARDSALE_THREADS` caps rayon's pool; results are bitwise identical for
/// any value, so this only trades wall-clock time.
fn init_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("YARDSALE_THREADS") {
        let n: usize = raw.parse().map_err(|_| {
            CliError::Config(format!(
                "YARDSALE_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
        if n == 0 {
            return Err(CliError::Config(
                "YARDSALE_THREADS must be at least 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("building thread pool: {e}")))?;
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    init_threads()?;

    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if cli.trajectories == 0 {
        return Err(CliError::Config("--trajectories must be at least 1".into()));
    }

    match &cli.command {
        Command::Simulate => simulate(&cli, &config),
        Command::Ensemble => ensemble(&cli, &config),
        Command::VerifyIncrement => verify_increment(&cli, &config),
        Command::VerifySummability => verify_summability(&cli, &config),
        Command::WinProb => win_prob(&cli, &config),
        Command::CondenseTimes {
            grid_n,
            grid_p,
            grid_beta,
            grid_epsilon,
        } => condense_times(
            &cli,
            &config,
            grid_n.as_deref(),
            grid_p.as_deref(),
            grid_beta.as_deref(),
            grid_epsilon.as_deref(),
        ),
    }
}

fn emit(cli: &Cli, path: String, data: &str) -> Result<(), CliError> {
    if cli.stdout {
        print!("{data}");
        Ok(())
    } else {
        std::fs::write(&path, data)
            .map_err(|e| CliError::Runtime(format!("writing {path}: {e}")))?;
        eprintln!("wrote {path}");
        Ok(())
    }
}

fn emit_json(cli: &Cli, path: String, doc: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::Runtime(format!("serializing {path}: {e}")))?;
    text.push('\n');
    emit(cli, path, &text)
}

fn runtime(e: yardsale_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn simulate(cli: &Cli, config: &RunConfigFile) -> Result<(), CliError> {
    let trajectory_config = config.trajectory_config()?;
    let record = run_trajectory(&trajectory_config).map_err(runtime)?;
    let last = record.snapshots.last().expect("step-0 snapshot");
    eprintln!(
        "simulate: stopped at step {} ({:?}), max_wealth {:.6}, gini {:.6}",
        last.step, record.stop_reason, last.max_wealth, last.gini
    );
    emit(
        cli,
        format!("{}.trajectory.csv", config.out),
        &output::render_trajectory_csv(&record),
    )
}

fn ensemble(cli: &Cli, config: &RunConfigFile) -> Result<(), CliError> {
    let template = config.trajectory_config()?;
    let summary =
        run_ensemble(&template, cli.trajectories, config.seed).map_err(runtime)?;
    eprintln!(
        "ensemble: {} trajectories, {} condensed, mean cumulative stake^2 {:.6}",
        summary.n_trajectories, summary.n_condensed, summary.cumulative_stake_sq.mean
    );
    emit_json(
        cli,
        format!("{}.summary.json", config.out),
        &output::summary_document(config, &summary),
    )
}

fn win_prob(cli: &Cli, config: &RunConfigFile) -> Result<(), CliError> {
    if config.p != 0.5 {
        return Err(CliError::Config(format!(
            "win-prob requires p = 0.5 (the win law is only claimed for the unbiased model), got p = {}",
            config.p
        )));
    }
    let mut template = config.trajectory_config()?;
    if template.condensation_epsilon.is_none() {
        template.condensation_epsilon = Some(DEFAULT_CONDENSATION_EPSILON);
        eprintln!(
            "win-prob: no condensation_epsilon in config; using default {DEFAULT_CONDENSATION_EPSILON}"
        );
    }
    let summary =
        run_ensemble(&template, cli.trajectories, config.seed).map_err(runtime)?;
    let report = estimate_win_probabilities(&summary).map_err(runtime)?;
    for row in &report.rows {
        eprintln!(
            "win-prob: agent {} initial {:.6} estimate {:.6} ci [{:.6}, {:.6}]{}",
            row.agent,
            row.initial_share,
            row.estimate,
            row.ci_lo,
            row.ci_hi,
            if row.within_ci { "" } else { "  <-- outside" }
        );
    }
    emit_json(
        cli,
        format!("{}.winprob.json", config.out),
        &output::report_document(config, "win_probabilities", &report),
    )?;
    if !report.all_within_ci {
        return Err(CliError::CheckFailed(
            "some initial share lies outside its 3-sigma win-frequency interval".into(),
        ));
    }
    Ok(())
}

fn require_plain(config: &RunConfigFile, what: &str) -> Result<(), CliError> {
    if config.lambda.is_some() || config.chi.is_some() {
        return Err(CliError::Config(format!(
            "{what} requires the plain model: remove `lambda` and `chi` from the config"
        )));
    }
    Ok(())
}

fn verify_increment(cli: &Cli, config: &RunConfigFile) -> Result<(), CliError> {
    require_plain(config, "verify-increment")?;
    let mut template = config.trajectory_config()?;
    // Fixed-horizon statistics: early stopping would truncate the per-step
    // ensemble.
    template.condensation_epsilon = None;
    let report =
        verify_increment_bound(&template, config.max_steps, cli.trajectories, config.seed)
            .map_err(runtime)?;
    eprintln!(
        "verify-increment: delta={} pooled gap {:.3e} (z {:.2}), identity diff z {:.2}, max per-step |gap z| {:.2}",
        report.delta,
        report.pooled_gap.mean,
        report.pooled_gap_z,
        report.pooled_diff_z,
        report.max_abs_step_gap_z
    );
    emit_json(
        cli,
        format!("{}.increment.json", config.out),
        &output::report_document(config, "increment", &report),
    )?;
    emit(
        cli,
        format!("{}.increment.csv", config.out),
        &output::render_increment_csv(&report),
    )?;
    if !report.passed {
        return Err(CliError::CheckFailed(format!(
            "increment check failed: pooled gap z {:.2}, identity diff z {:.2}",
            report.pooled_gap_z, report.pooled_diff_z
        )));
    }
    Ok(())
}

fn verify_summability(cli: &Cli, config: &RunConfigFile) -> Result<(), CliError> {
    require_plain(config, "verify-summability")?;
    let template = config.trajectory_config()?;
    let report = verify_stake_summability(&template, config.max_steps, cli.trajectories)
        .map_err(runtime)?;
    eprintln!(
        "verify-summability: mean cumulative stake^2 {:.6} vs bound {:.6} (+{:.1e} allowance)",
        report.cumulative_stake_sq.mean,
        report.bound,
        report.cumulative_stake_sq.half_width_3sigma
    );
    emit_json(
        cli,
        format!("{}.summability.json", config.out),
        &output::report_document(config, "summability", &report),
    )?;
    if !report.passed {
        return Err(CliError::CheckFailed(format!(
            "summability bound violated: mean {:.6} > {:.6} + 3 sigma",
            report.cumulative_stake_sq.mean, report.bound
        )));
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| CliError::Config(format!("bad {what} list entry {s:?}")))
        })
        .collect()
}

fn condense_times(
    cli: &Cli,
    config: &RunConfigFile,
    grid_n: Option<&str>,
    grid_p: Option<&str>,
    grid_beta: Option<&str>,
    grid_epsilon: Option<&str>,
) -> Result<(), CliError> {
    if config.chi.is_some() {
        return Err(CliError::Config(
            "condense-times: taxation precludes condensation; remove `chi` from the config".into(),
        ));
    }
    let ns: Vec<usize> = match grid_n {
        Some(raw) => parse_list(raw, "--grid-n")?,
        None => vec![config.n_agents],
    };
    let ps: Vec<f64> = match grid_p {
        Some(raw) => parse_list(raw, "--grid-p")?,
        None => vec![config.p],
    };
    for p in &ps {
        if !(0.5..1.0).contains(p) {
            return Err(CliError::Config(format!(
                "--grid-p entries must lie in [0.5, 1), got {p}"
            )));
        }
    }
    let betas: Vec<f64> = match grid_beta {
        Some(raw) => parse_list(raw, "--grid-beta")?,
        None => match config.fraction {
            FractionSpec::Constant { beta } => vec![beta],
            _ => {
                return Err(CliError::Config(
                    "condense-times sweeps constant fractions; pass --grid-beta or use a \
                     constant fraction config"
                        .into(),
                ))
            }
        },
    };
    let epsilons: Vec<f64> = match grid_epsilon {
        Some(raw) => parse_list(raw, "--grid-epsilon")?,
        None => vec![config
            .condensation_epsilon
            .unwrap_or(DEFAULT_CONDENSATION_EPSILON)],
    };

    let mut grid = Vec::new();
    for &n_agents in &ns {
        for &p in &ps {
            for &beta in &betas {
                for &epsilon in &epsilons {
                    grid.push(GridPoint {
                        n_agents,
                        delta: p - 0.5,
                        beta,
                        epsilon,
                    });
                }
            }
        }
    }

    let study = condensation_time_study(&grid, cli.trajectories, config.seed, config.max_steps)
        .map_err(|e| CliError::Config(e.to_string()))?;
    for note in &study.diagnostics {
        eprintln!("condense-times: {note}");
    }
    for row in &study.rows {
        if row.n_condensed < row.n_trajectories {
            eprintln!(
                "condense-times: grid point N={} delta={} beta={} eps={}: only {}/{} condensed \
                 within max_steps={}",
                row.point.n_agents,
                row.point.delta,
                row.point.beta,
                row.point.epsilon,
                row.n_condensed,
                row.n_trajectories,
                config.max_steps
            );
        }
    }
    emit(
        cli,
        format!("{}.condense_times.csv", config.out),
        &output::render_study_csv(&study),
    )
}
