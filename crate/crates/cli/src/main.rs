use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use channelwave_cli::{run, Command, RunConfig, Status};

/// Channel-localized norms of radial waves: batch experiments.
#[derive(Debug, Parser)]
#[command(name = "channelwave", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON config file; flags and overrides take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    jmin: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    jmax: Option<i32>,
    #[arg(long)]
    resolution: Option<usize>,
    /// Extra settings as key=value.
    overrides: Vec<String>,
}

fn resolve(args: &Args) -> Result<RunConfig, String> {
    let mut doc = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| e.to_string())?,
        None => Value::Object(Default::default()),
    };
    RunConfig::apply_overrides(&mut doc, &args.overrides).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::from_value(doc).map_err(|e| e.to_string())?;
    cfg.command = Some(args.command);
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    cfg.count = args.count.or(cfg.count);
    cfg.jmin = args.jmin.or(cfg.jmin);
    cfg.jmax = args.jmax.or(cfg.jmax);
    cfg.resolution = args.resolution.or(cfg.resolution);
    cfg.resolve().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(n) = std::env::var("CHANNELWAVE_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: CHANNELWAVE_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(Status::Usage as u8);
            }
        }
    }
    let cfg = match resolve(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Status::Usage as u8);
        }
    };
    match run(&cfg, &args.out) {
        Ok(res) => {
            print!("{}", res.table);
            println!("output: {}", res.dir.display());
            if res.outcome.passed() {
                ExitCode::from(Status::Pass as u8)
            } else {
                for a in res.outcome.assertions.iter().filter(|a| !a.pass) {
                    eprintln!("failed: {}", a.name);
                }
                ExitCode::from(Status::Fail as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Status::Usage as u8)
        }
    }
}
