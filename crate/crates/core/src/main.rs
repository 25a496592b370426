use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use windfarm_sbo::cli::{
    checked_layout, cmd_aep, cmd_optimize, cmd_power, read_layout_csv, AepMethod, OptimizeMode,
    RasterSpec, RunConfig,
};
use windfarm_sbo::farm_model::WindCondition;
use windfarm_sbo::Result;

#[derive(Parser)]
#[command(
    version,
    about = "Wind farm layout optimization with PCE and Kriging surrogates"
)]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-turbine power for one wind condition.
    Power {
        #[arg(long)]
        layout: PathBuf,
        /// Direction the wind blows from, degrees clockwise from north.
        #[arg(long)]
        direction: f64,
        #[arg(long)]
        speed: f64,
        /// Write a hub-height speed raster to this CSV.
        #[arg(long)]
        raster: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        raster_step: f64,
        #[arg(long, default_value_t = 500.0)]
        raster_margin: f64,
    },
    /// Annual energy production of a layout.
    Aep {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, value_enum, default_value = "baseline")]
        method: AepMethod,
    },
    /// Optimize turbine positions on the configured grid.
    Optimize {
        #[arg(long, value_enum)]
        mode: Option<OptimizeMode>,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let mut c = RunConfig::default();
            let cwd =
                std::env::current_dir().map_err(|e| windfarm_sbo::Error::Config(e.to_string()))?;
            c.resolve_paths(&cwd);
            c
        }
    };
    cfg.apply_env()?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = load_config(&cli)?;
    if let Some(t) = (cfg.threads > 0).then_some(cfg.threads) {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    match cli.command {
        Command::Power {
            layout,
            direction,
            speed,
            raster,
            raster_step,
            raster_margin,
        } => {
            let setup = cfg.setup()?;
            let layout = checked_layout(&setup, read_layout_csv(&layout)?)?;
            let cond = WindCondition::new(direction, speed);
            let spec = RasterSpec {
                step_m: raster_step,
                margin_m: raster_margin,
            };
            if raster.is_some() && !(raster_step > 0.0 && raster_margin >= 0.0) {
                return Err(windfarm_sbo::Error::Config(
                    "raster step must be positive and margin non-negative".into(),
                ));
            }
            let (table, field) = cmd_power(&setup, &layout, cond, raster.as_ref().map(|_| &spec))?;
            print!("{table}");
            if let (Some(path), Some(field)) = (raster, field) {
                std::fs::write(&path, field)
                    .map_err(|e| windfarm_sbo::Error::Io { path, source: e })?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Aep { layout, method } => {
            let setup = cfg.setup()?;
            let layout = checked_layout(&setup, read_layout_csv(&layout)?)?;
            print!("{}", cmd_aep(&setup, &layout, method, cfg.seed)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize { mode, output } => {
            if let Some(m) = mode {
                cfg.optimize_mode = m;
            }
            if let Some(dir) = output {
                cfg.output_dir =
                    std::path::absolute(&dir).map_err(|e| windfarm_sbo::Error::Io {
                        path: dir,
                        source: e,
                    })?;
            }
            let setup = cfg.setup()?;
            let s = cmd_optimize(&setup)?;
            println!("evaluations: {}", s.evaluations);
            println!("farm_power_calls: {}", s.farm_power_calls);
            println!(
                "best_aep_gwh: {}",
                windfarm_sbo::cli::format_gwh(s.best_aep_wh)
            );
            println!(
                "best_baseline_aep_gwh: {}",
                windfarm_sbo::cli::format_gwh(s.best_baseline_aep_wh)
            );
            println!("output: {}", cfg.output_dir.display());
            if s.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("warning: evaluation cap reached before convergence");
                Ok(ExitCode::from(2))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
