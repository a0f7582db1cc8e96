use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dexsearch::harness::{parse_config, parse_value, report, run, ExperimentConfig, HarnessError, RunReport};
use toml::Value;

#[derive(Parser)]
#[command(name = "dexsearch", version, about = "Contact-rich tree search and demonstration-bootstrapped RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow search trees toward the task goal, one per seed.
    Plan(RunArgs),
    /// Train goal-conditioned policies, one per seed.
    Train(RunArgs),
    /// Run a parameter grid (sweep.param / sweep.values).
    Sweep(RunArgs),
    /// Pre-train on planner demonstrations only and evaluate.
    PretrainEval(RunArgs),
    /// Verify a finished run directory and print its summary.
    Report {
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// box_push_1d, box_push_2d or planar_hand.
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory (default runs/<task>-<mode>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace an existing run directory.
    #[arg(long)]
    force: bool,
    /// Dotted-key override, e.g. --set planner.n_e_max=8 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    workers: Option<usize>,
}

fn config_error(location: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        location: location.into(),
        message: message.into(),
    }
}

fn build_config(mode: &str, args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| config_error(&p.display().to_string(), e.to_string()))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    let mut items = Vec::new();
    if let Some(t) = &args.task {
        items.push(("task".to_string(), Value::String(t.clone()), "--task".to_string()));
    }
    if let Some(s) = &args.seeds {
        items.push(("seeds".into(), Value::Array(s.iter().map(|&x| Value::Integer(x as i64)).collect()), "--seeds".into()));
    }
    if let Some(w) = args.workers {
        items.push(("workers".into(), Value::Integer(w as i64), "--workers".into()));
    }
    for s in &args.sets {
        let (k, v) = s.split_once('=').ok_or_else(|| config_error(&format!("--set {s}"), "expected KEY=VALUE"))?;
        items.push((k.trim().to_string(), parse_value(v.trim()), format!("--set {k}")));
    }
    items.push(("mode".into(), Value::String(mode.into()), "command".into()));
    cfg.set_all(items)?;
    Ok(cfg)
}

fn print_report(r: &RunReport) {
    println!("{}: {} jobs, {} failed", r.out.display(), r.jobs, r.failures.len());
    for (job, err) in &r.failures {
        println!("  {job}: {err}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Report { out } => report(out),
        Command::Plan(a) | Command::Train(a) | Command::Sweep(a) | Command::PretrainEval(a) => {
            let mode = match &cli.command {
                Command::Plan(_) => "plan",
                Command::Train(_) => "train",
                Command::Sweep(_) => "sweep",
                _ => "pretrain-eval",
            };
            build_config(mode, a).and_then(|cfg| {
                let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{}-{mode}", cfg.task.as_str())));
                run(&cfg, &out, a.force)
            })
        }
    };
    match result {
        Ok(r) => {
            print_report(&r);
            ExitCode::from(r.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
