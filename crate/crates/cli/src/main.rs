use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anneal_lab::config::{preset, RunConfig, StudyConfig, PRESET_NAMES};
use anneal_lab::runner;
use anneal_lab::Error;
use clap::{Args, Parser, Subcommand};

const DEFAULT_OUT: &str = "anneal-lab-out";

#[derive(Parser)]
#[command(name = "anneal-lab", version, about = "Annealing spectra of MWIS instances with XX-catalysts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one study from a config file (TOML or JSON) or a preset.
    Run(RunArgs),
    /// List the built-in presets.
    Presets,
    /// Print a preset as TOML, ready to edit.
    Show { name: String },
}

#[derive(Args)]
struct RunArgs {
    /// Config file; a manifest.json from an earlier run is accepted too.
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Output directory. Falls back to ANNEAL_LAB_OUT, then the config, then ./anneal-lab-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
    /// Accepted for interface stability; every computation is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Anneal time for dynamics studies.
    #[arg(long = "T", value_name = "T")]
    total_time: Option<f64>,
    #[arg(long)]
    jxx: Option<f64>,
    /// Integrator tolerance for dynamics studies.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    checkpoints: Option<usize>,
}

fn load(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), None) => RunConfig::from_path(path)?,
        (None, Some(name)) => preset(name)?,
        _ => return Err(Error::Config("give a config file or --preset".into())),
    };
    if let Some(j) = args.jxx {
        cfg.catalyst.jxx = j;
    }
    let dynamics_flags = args.total_time.is_some() || args.tolerance.is_some() || args.checkpoints.is_some();
    match &mut cfg.study {
        StudyConfig::Dynamics {
            total_time,
            tolerance,
            checkpoints,
        } => {
            *total_time = args.total_time.unwrap_or(*total_time);
            *tolerance = args.tolerance.unwrap_or(*tolerance);
            *checkpoints = args.checkpoints.unwrap_or(*checkpoints);
        }
        _ if dynamics_flags => {
            return Err(Error::Config("--T, --tolerance and --checkpoints apply to dynamics studies only".into()))
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(args: &RunArgs, cfg: &RunConfig) -> PathBuf {
    if let Some(dir) = &args.out {
        return dir.clone();
    }
    if let Some(dir) = std::env::var_os("ANNEAL_LAB_OUT").filter(|d| !d.is_empty()) {
        return PathBuf::from(dir);
    }
    PathBuf::from(cfg.output.directory.as_deref().unwrap_or(DEFAULT_OUT))
}

fn write_diagnostics(dir: &Path, cfg: &RunConfig, err: &Error) {
    let report = serde_json::json!({
        "tool": runner::TOOL_NAME,
        "version": runner::TOOL_VERSION,
        "study": cfg.study_name(),
        "error": err.to_string(),
        "error_debug": format!("{err:?}"),
        "config": cfg,
    });
    let written = std::fs::create_dir_all(dir).and_then(|_| {
        let text = serde_json::to_string_pretty(&report).unwrap_or_default();
        std::fs::write(dir.join("diagnostics.json"), text + "\n")
    });
    if let Err(e) = written {
        eprintln!("could not write diagnostics: {e}");
    }
}

fn run(args: RunArgs) -> ExitCode {
    let cfg = match load(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(1);
        }
    }
    let dir = output_dir(&args, &cfg);
    match runner::run(&cfg, &dir) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) if e.is_config() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("numeric failure: {e}");
            write_diagnostics(&dir, &cfg, &e);
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match preset(&name).and_then(|c| {
            toml::to_string(&c).map_err(|e| Error::Config(e.to_string()))
        }) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
