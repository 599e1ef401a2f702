//! `unlearnkit` command-line interface.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on runtime errors.

mod artifacts;
mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unlearnkit::unlearn::Method;

use crate::artifacts::{Root, DEFAULT_ROOT, ROOT_ENV};
use crate::commands::{parse_list, SweepSpec, UnlearnOutcome};
use crate::config::{ConfigError, ConfigMap, RunConfig};

#[derive(Parser)]
#[command(name = "unlearnkit", version, about = "Machine unlearning experiments on synthetic data")]
struct Cli {
    /// Artifact root directory.
    #[arg(long, global = true, env = ROOT_ENV, default_value = DEFAULT_ROOT)]
    root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Redo work even when artifacts already exist.
    #[arg(long)]
    force: bool,
    /// Overrides as `--key value`, `--key=value` or `key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the original model for a config.
    Train(RunArgs),
    /// Unlearn the forget set of a config and evaluate the result.
    Unlearn(RunArgs),
    /// Recompute the evaluation report of a finished run.
    Evaluate {
        /// Run directory, or a config hash under `<root>/runs`.
        run: String,
        /// Evaluate the original model against the run's split instead.
        #[arg(long)]
        original: bool,
    },
    /// Run a grid of methods, deletion ratios and seeds.
    Sweep {
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Comma-separated methods.
        #[arg(long, default_value = "neg_grad,rand_label,bad_t,scrub,salun")]
        methods: String,
        /// Deletion ratios in percent, e.g. `1..10` or `1,5,10`.
        #[arg(long, default_value = "1..10")]
        ratios: String,
        /// Seeds, e.g. `0..4` or `0,1`.
        #[arg(long, default_value = "0")]
        seeds: String,
        /// Parallel workers.
        #[arg(long, short, default_value_t = 1)]
        jobs: usize,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Build leaderboard tables from finished runs.
    Report {
        /// Run directories; defaults to every finished run in the manifest.
        runs: Vec<PathBuf>,
        /// Output directory; defaults to `<root>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl RunArgs {
    /// Accepts `--force` anywhere, including after the overrides.
    fn split_force(mut self) -> Self {
        let before = self.overrides.len();
        self.overrides.retain(|a| a != "--force");
        self.force |= self.overrides.len() != before;
        self
    }
}

fn load_config(config: Option<&PathBuf>, overrides: &[String]) -> anyhow::Result<ConfigMap> {
    let mut map = match config {
        Some(p) => ConfigMap::load(p)?,
        None => ConfigMap::default(),
    };
    map.apply_overrides(overrides)?;
    Ok(map)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let root = Root::new(&cli.root);
    match cli.command {
        Command::Train(args) => {
            let args = args.split_force();
            let cfg = RunConfig::from_map(&load_config(args.config.as_ref(), &args.overrides)?)?;
            let dir = commands::train(&root, &cfg, args.force)?;
            println!("{}", dir.display());
        }
        Command::Unlearn(args) => {
            let args = args.split_force();
            let cfg = RunConfig::from_map(&load_config(args.config.as_ref(), &args.overrides)?)?;
            match commands::unlearn_cmd(&root, &cfg, args.force)? {
                UnlearnOutcome::Ran(dir) => println!("{}", dir.display()),
                UnlearnOutcome::AlreadyDone(dir) => {
                    eprintln!("run already complete; use --force to redo");
                    println!("{}", dir.display());
                }
            }
        }
        Command::Evaluate { run, original } => {
            let dir = PathBuf::from(&run);
            let dir = if dir.is_dir() { dir } else { root.runs_dir().join(&run) };
            let report = commands::evaluate(&root, &dir, original)?;
            println!("{}", report.to_json()?);
        }
        Command::Sweep { config, methods, ratios, seeds, jobs, overrides } => {
            let base = load_config(config.as_ref(), &overrides)?;
            let methods = methods
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<Method>().map_err(|e| ConfigError(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = SweepSpec {
                methods,
                ratios: parse_list(&ratios, "ratio")?,
                seeds: parse_list(&seeds, "seed")?,
                jobs,
            };
            let s = commands::sweep(&root, &base, &spec)?;
            println!(
                "scheduled {} skipped {} done {} failed {}",
                s.scheduled, s.skipped, s.done, s.failed
            );
            if s.failed > 0 {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Report { runs, out } => {
            let runs = if runs.is_empty() { commands::completed_runs(&root)? } else { runs };
            let out = out.unwrap_or_else(|| root.path().join("report"));
            let md = commands::report(&runs, &out)?;
            print!("{md}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<ConfigError>()) {
        return 1;
    }
    match err.chain().find_map(|e| e.downcast_ref::<unlearnkit::Error>()) {
        Some(e) if e.is_config() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
