use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use dtrp_cli::campaign::{checks, pool, run_campaign, Campaign, PRESETS};
use dtrp_cli::config::{ConfigError, RunConfig};
use dtrp_cli::output::{csv_bytes, json_bytes, write_atomic};
use dtrp_cli::runner::{bound_report, run_replication, RunStatus};

const EXIT_CONFIG: u8 = 1;
const EXIT_UNSTABLE: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "dtrp", version, about = "Dynamic traveling repairman simulator with limited-range sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replication of a TOML configuration.
    Run { config: PathBuf },
    /// Run a built-in preset or a campaign spec file.
    Campaign {
        /// Preset name or path to a TOML campaign spec.
        name: String,
        /// Evaluate the acceptance checks after running.
        #[arg(long)]
        check: bool,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the replication count of every point.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Print the analytic bounds for a configuration.
    Bounds { config: PathBuf },
    /// Parse and validate a configuration without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config } => run(&config),
        Command::Campaign {
            name,
            check,
            out,
            replications,
        } => campaign(&name, check, &out, replications),
        Command::Bounds { config } => {
            let c = RunConfig::load(&config)?;
            println!("{}", serde_json::to_string_pretty(&bound_report(&c)?)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            RunConfig::load(&config)?;
            println!("{}: ok", config.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run(path: &Path) -> Result<ExitCode> {
    let config = RunConfig::load(path)?;
    let want_events = config.output.events.is_some();
    let reps = pool()?.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| run_replication(&config, rep, ("", 0, "", None), want_events && rep == 0))
            .collect::<Result<Vec<_>, ConfigError>>()
    })?;
    for r in &reps {
        let rec = &r.record;
        match rec.t_sys_mean {
            Some(t) => println!(
                "{} seed={} T={t:.4} ±{:.4} bound={:.4} ratio={:.4} served={} {}",
                rec.run_id,
                rec.seed,
                rec.t_sys_ci.unwrap_or(f64::NAN),
                rec.bound_value,
                rec.ratio.unwrap_or(f64::NAN),
                rec.n_served.unwrap_or(0),
                rec.diagnostic,
            ),
            None => println!("{} seed={} {:?}: {}", rec.run_id, rec.seed, rec.status, rec.diagnostic),
        }
    }
    let records: Vec<_> = reps.iter().map(|r| r.record.clone()).collect();
    let metas: Vec<_> = reps.iter().map(|r| &r.meta).collect();
    if let Some(p) = &config.output.csv {
        write_atomic(p, &csv_bytes(&records)?)?;
    }
    if let Some(p) = &config.output.json {
        write_atomic(p, &json_bytes(&metas)?)?;
    }
    if let (Some(p), Some(events)) = (&config.output.events, reps.first().and_then(|r| r.events.as_ref())) {
        let text: String = events.iter().map(|e| format!("{e}\n")).collect();
        write_atomic(p, text.as_bytes())?;
    }
    if let Some(e) = reps.iter().find_map(|r| r.config_error.as_ref()) {
        eprintln!("error: {e}");
        return Ok(ExitCode::from(EXIT_CONFIG));
    }
    if records.iter().any(|r| r.status == RunStatus::Unstable) {
        return Ok(ExitCode::from(EXIT_UNSTABLE));
    }
    Ok(ExitCode::SUCCESS)
}

fn campaign(name: &str, check: bool, out: &Path, replications: Option<usize>) -> Result<ExitCode> {
    let mut c = match Campaign::preset(name) {
        Some(c) => c,
        None => {
            let path = Path::new(name);
            if !path.exists() {
                anyhow::bail!("unknown campaign {name:?}; presets are {PRESETS:?} or a spec file path");
            }
            Campaign::from_spec_file(path)?
        }
    };
    if let Some(n) = replications {
        c = c.with_replications(n);
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let result = run_campaign(&c)?;
    result.write(out)?;
    for s in &result.summaries {
        println!(
            "{} {}={} T={:.4} ±{:.4} ratio={:.4} ok={}/{}",
            s.spec, s.sweep_param, s.sweep_value, s.t_sys_mean, s.t_sys_ci, s.ratio, s.replications_ok, s.replications
        );
    }
    if !result.config_errors.is_empty() {
        for e in &result.config_errors {
            eprintln!("error: {e}");
        }
        return Ok(ExitCode::from(EXIT_CONFIG));
    }
    if check {
        let list = checks(&result);
        for k in &list {
            println!("{} {}: {}", if k.passed { "PASS" } else { "FAIL" }, k.name, k.detail);
        }
        if list.iter().any(|k| !k.passed) {
            return Ok(ExitCode::from(EXIT_CHECK));
        }
    }
    if result.any_unstable() {
        return Ok(ExitCode::from(EXIT_UNSTABLE));
    }
    Ok(ExitCode::SUCCESS)
}
