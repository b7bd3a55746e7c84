use std::fs;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use super::config::ExperimentConfig;
use super::trainer::{EpisodeSummary, LossRow, SacTrainer};
use super::ExpError;
use crate::device::{DeviceRuntime, EpisodeLog};
use crate::link::{
    device_session, duplex, server_session, trainer_queue, DeviceState, EpisodeMode, FramedConn, ServerConfig,
    ServerSummary, Transport,
};
use crate::weldsim::{grid_search_baseline, Baseline};

pub const TRAIN_RETURNS: &str = "train_returns.csv";
pub const TEST_RETURNS: &str = "test_returns.csv";
pub const BASELINE: &str = "baseline.csv";
pub const LOSSES: &str = "losses.csv";
pub const CONFIG_SNAPSHOT: &str = "config.txt";
pub const FINAL_POLICY: &str = "policy_final.bin";

pub fn trace_file(episode: u32) -> String {
    format!("trace_ep{episode}.csv")
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub baseline: Baseline,
    pub episodes: Vec<EpisodeSummary>,
    pub losses: Vec<LossRow>,
    pub server: ServerSummary,
    /// Device-side episode logs; empty when the device ran in another process.
    pub device_log: Vec<EpisodeLog>,
    pub device_versions: Vec<u32>,
    pub epsilons_consumed: u64,
    pub final_policy: Vec<u8>,
    pub elapsed: Duration,
    pub eval_window: usize,
}

impl ExperimentReport {
    pub fn test_episodes(&self) -> impl Iterator<Item = &EpisodeSummary> {
        self.episodes.iter().filter(|e| e.mode == EpisodeMode::Test)
    }

    /// Improvement of the last test returns over the best constant power.
    pub fn improvement_pct(&self) -> Option<f64> {
        let returns: Vec<f64> = self.test_episodes().map(|e| e.episode_return).collect();
        compare_to_baseline(&returns, self.baseline.best_mean_return, self.eval_window)
    }

    pub fn last_test(&self) -> Option<&EpisodeSummary> {
        self.test_episodes().last()
    }

    /// Pooled keyhole fraction over the last `eval_window` test episodes.
    pub fn test_keyhole_fraction(&self) -> Option<f64> {
        let tests: Vec<&EpisodeLog> = self.device_log.iter().filter(|l| l.mode == EpisodeMode::Test).collect();
        let tail = &tests[tests.len().saturating_sub(self.eval_window)..];
        let n: usize = tail.iter().map(|l| l.keyhole.len()).sum();
        if n == 0 {
            return None;
        }
        let k: usize = tail.iter().map(|l| l.keyhole.iter().filter(|&&b| b).count()).sum();
        Some(k as f64 / n as f64)
    }
}

/// `100 * (mean of the last `window` test returns - baseline) / baseline`.
pub fn compare_to_baseline(test_returns: &[f64], baseline_best: f64, window: usize) -> Option<f64> {
    let tail = &test_returns[test_returns.len().saturating_sub(window.max(1))..];
    if tail.is_empty() || baseline_best == 0.0 {
        return None;
    }
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    Some(100.0 * (mean - baseline_best) / baseline_best)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Mean power on steps 21-60 minus the larger of the means on steps 1-20
/// and 61-80.
pub fn mid_episode_power_bump(powers: &[f64]) -> Option<f64> {
    if powers.len() < 80 {
        return None;
    }
    let (head, mid, tail) = (&powers[..20], &powers[20..60], &powers[60..80]);
    Some(mean(mid) - mean(head).max(mean(tail)))
}

fn server_config(cfg: &ExperimentConfig) -> ServerConfig {
    ServerConfig {
        first_episode: 1,
        last_episode: cfg.run.episodes,
        schedule: cfg.run.schedule,
        steps_per_episode: crate::device::STEPS_PER_EPISODE as u16,
        seed: cfg.run.seed,
        timeout: Some(cfg.link.timeout),
        max_attempts: cfg.link.max_attempts,
    }
}

fn baseline_for(cfg: &ExperimentConfig) -> Result<Baseline, ExpError> {
    let profile = cfg.run.surface.profile(&cfg.sim)?;
    Ok(grid_search_baseline(
        &profile,
        &cfg.sim,
        &cfg.baseline.grid(),
        cfg.baseline.episodes_per_power,
        cfg.run.seed,
    )?)
}

fn create_out(out: &Path) -> Result<(), ExpError> {
    fs::create_dir_all(out).map_err(|e| ExpError::Io(out.to_path_buf(), e))
}

/// Run the server side against an already-connected transport, with the
/// trainer on its own thread behind a bounded queue.
fn serve<T: Transport>(
    cfg: &ExperimentConfig,
    io: T,
    trainer: &mut SacTrainer,
) -> Result<ServerSummary, ExpError> {
    let (mut queued, worker) = trainer_queue(cfg.link.queue_capacity);
    thread::scope(|s| {
        let t = s.spawn(move || worker.serve(trainer));
        let mut conn = FramedConn::new(io);
        let res = server_session(&mut conn, &server_config(cfg), &mut queued);
        drop(queued);
        drop(conn);
        t.join().map_err(|_| ExpError::Thread("trainer"))?;
        Ok(res?)
    })
}

/// Train with server and device in this process over an in-memory stream.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, ExpError> {
    cfg.validate()?;
    let start = Instant::now();
    create_out(out)?;
    let baseline = baseline_for(cfg)?;
    let profile = cfg.run.surface.profile(&cfg.sim)?;
    let mut trainer = SacTrainer::new(cfg.sac.clone(), cfg.run.seed);
    let mut runtime = DeviceRuntime::new(profile, cfg.sim.clone(), cfg.run.seed, cfg.run.realtime);
    let mut dstate = DeviceState::default();
    let (server_end, device_end) = duplex();
    let timeout = cfg.link.timeout;

    let (server, device) = thread::scope(|s| {
        let d = s.spawn(|| {
            let mut conn = FramedConn::new(device_end);
            device_session(&mut conn, &mut runtime, &mut dstate, Some(timeout))
        });
        let server = serve(cfg, server_end, &mut trainer);
        (server, d.join())
    });
    let server = server?;
    device.map_err(|_| ExpError::Thread("device"))??;

    let report = ExperimentReport {
        final_policy: trainer.agent.policy.export_blob(trainer.version).map_err(ExpError::Twin)?,
        baseline,
        episodes: trainer.episodes,
        losses: trainer.losses,
        server,
        device_log: runtime.log,
        device_versions: dstate.versions,
        epsilons_consumed: dstate.epsilons_consumed,
        elapsed: start.elapsed(),
        eval_window: cfg.run.eval_window,
    };
    super::output::write_all(out, cfg, &report)?;
    Ok(report)
}

/// Server half of a cross-process run: accept one device on `listener`.
pub fn serve_experiment(
    cfg: &ExperimentConfig,
    out: &Path,
    listener: TcpListener,
) -> Result<ExperimentReport, ExpError> {
    cfg.validate()?;
    let start = Instant::now();
    create_out(out)?;
    let baseline = baseline_for(cfg)?;
    let (stream, peer) = listener.accept().map_err(|e| ExpError::Net(e.to_string()))?;
    log::info!("device connected from {peer}");
    stream.set_nodelay(true).map_err(|e| ExpError::Net(e.to_string()))?;
    let mut trainer = SacTrainer::new(cfg.sac.clone(), cfg.run.seed);
    let server = serve(cfg, stream, &mut trainer)?;
    let report = ExperimentReport {
        final_policy: trainer.agent.policy.export_blob(trainer.version).map_err(ExpError::Twin)?,
        baseline,
        episodes: trainer.episodes,
        losses: trainer.losses,
        server,
        device_log: Vec::new(),
        device_versions: Vec::new(),
        epsilons_consumed: 0,
        elapsed: start.elapsed(),
        eval_window: cfg.run.eval_window,
    };
    super::output::write_all(out, cfg, &report)?;
    Ok(report)
}

/// Device half of a cross-process run. Retries the connection for up to
/// `connect_wait`.
pub fn run_device(
    cfg: &ExperimentConfig,
    server: &str,
    connect_wait: Duration,
) -> Result<(DeviceRuntime, DeviceState), ExpError> {
    cfg.validate()?;
    let addr = server
        .to_socket_addrs()
        .map_err(|e| ExpError::Net(format!("{server}: {e}")))?
        .next()
        .ok_or_else(|| ExpError::Net(format!("{server}: no address")))?;
    let deadline = Instant::now() + connect_wait;
    let stream = loop {
        match TcpStream::connect(addr) {
            Ok(s) => break s,
            Err(e) if Instant::now() < deadline => {
                log::debug!("connect {addr}: {e}, retrying");
                thread::sleep(Duration::from_millis(100));
            }
            Err(e) => return Err(ExpError::Net(format!("{addr}: {e}"))),
        }
    };
    stream.set_nodelay(true).map_err(|e| ExpError::Net(e.to_string()))?;
    let profile = cfg.run.surface.profile(&cfg.sim)?;
    let mut runtime = DeviceRuntime::new(profile, cfg.sim.clone(), cfg.run.seed, cfg.run.realtime);
    let mut state = DeviceState::default();
    let mut conn = FramedConn::new(stream);
    device_session(&mut conn, &mut runtime, &mut state, Some(cfg.link.timeout))?;
    Ok((runtime, state))
}

/// Grid-search baseline only.
pub fn run_baseline(cfg: &ExperimentConfig, out: &Path) -> Result<Baseline, ExpError> {
    cfg.validate()?;
    create_out(out)?;
    let b = baseline_for(cfg)?;
    super::output::write_baseline(&out.join(BASELINE), &b)?;
    Ok(b)
}
