use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use weldloop::expcli::{self, ExpError, ExperimentConfig, Surface};
use weldloop::weldsim::Preset;

#[derive(Parser)]
#[command(name = "weldloop", version, about = "Closed-loop laser-power control experiments on a surrogate weld process")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Config file of key = value lines, applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Surface preset: brushed, sandblasted or mixed.
    #[arg(long)]
    surface: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train on one surface and write CSVs and plots.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long)]
        out: PathBuf,
        /// Pace device steps at 10 ms.
        #[arg(long)]
        realtime: bool,
        /// Wait for a separate `weldloop device` process on this address.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Run the device side against a listening server.
    Device {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        server: String,
        #[arg(long)]
        realtime: bool,
    },
    /// Constant-power grid search only.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render SVG plots from the CSVs in DIR.
    Plot { dir: PathBuf },
}

fn load(common: &Common) -> Result<ExperimentConfig, ExpError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = common.surface {
        cfg.run.surface = Surface::Preset(p);
    }
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

fn summarize(report: &expcli::ExperimentReport) {
    println!(
        "baseline: best constant power {} W, mean return {:.4}",
        report.baseline.best_power, report.baseline.best_mean_return
    );
    if let Some(pct) = report.improvement_pct() {
        println!("improvement over baseline: {pct:+.2}%");
    }
    if let Some(k) = report.test_keyhole_fraction() {
        println!("keyhole fraction in late test episodes: {:.3}", k);
    }
    if let Some(bump) = report
        .last_test()
        .and_then(|e| expcli::mid_episode_power_bump(&e.steps.iter().map(|s| s.power_watts as f64).collect::<Vec<_>>()))
    {
        println!("last test episode mid-line power bump: {bump:+.2} W");
    }
    println!("elapsed: {:.1} s", report.elapsed.as_secs_f64());
}

fn run(cli: Cli) -> Result<(), ExpError> {
    match cli.cmd {
        Cmd::Run {
            common,
            episodes,
            out,
            realtime,
            listen,
        } => {
            let mut cfg = load(&common)?;
            if let Some(n) = episodes {
                cfg.run.episodes = n;
            }
            cfg.run.realtime |= realtime;
            let report = match listen {
                Some(addr) => {
                    let listener = TcpListener::bind(&addr).map_err(|e| ExpError::Net(format!("{addr}: {e}")))?;
                    let local = listener.local_addr().map_err(|e| ExpError::Net(e.to_string()))?;
                    println!("listening on {local}");
                    expcli::serve_experiment(&cfg, &out, listener)?
                }
                None => expcli::run_experiment(&cfg, &out)?,
            };
            summarize(&report);
        }
        Cmd::Device {
            common,
            server,
            realtime,
        } => {
            let mut cfg = load(&common)?;
            cfg.run.realtime |= realtime;
            let (_, state) = expcli::run_device(&cfg, &server, Duration::from_secs(10))?;
            println!(
                "device finished: {} episodes, {} epsilons consumed",
                state.episodes_run, state.epsilons_consumed
            );
        }
        Cmd::Baseline { common, out } => {
            let cfg = load(&common)?;
            let b = expcli::run_baseline(&cfg, &out)?;
            expcli::plot::plot_dir(&out)?;
            println!("best constant power {} W, mean return {:.4}", b.best_power, b.best_mean_return);
        }
        Cmd::Plot { dir } => {
            for name in expcli::plot::plot_dir(&dir)? {
                println!("{}", dir.join(name).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
