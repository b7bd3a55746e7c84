use std::fs;
use std::path::Path;

use super::config::ExperimentConfig;
use super::run::{trace_file, ExperimentReport, BASELINE, CONFIG_SNAPSHOT, FINAL_POLICY, LOSSES, TEST_RETURNS, TRAIN_RETURNS};
use super::ExpError;
use crate::link::EpisodeMode;
use crate::weldsim::Baseline;

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>, ExpError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

pub fn write_baseline(path: &Path, b: &Baseline) -> Result<(), ExpError> {
    let mut w = writer(path, &["power", "mean_return"])?;
    for (p, r) in &b.table {
        w.write_record([p.to_string(), r.to_string()])?;
    }
    w.flush().map_err(|e| ExpError::Io(path.to_path_buf(), e))
}

/// Write every CSV, the config snapshot, and the final policy blob.
pub fn write_all(dir: &Path, cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<(), ExpError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| ExpError::Io(p, e)
    };
    let snap = dir.join(CONFIG_SNAPSHOT);
    fs::write(&snap, cfg.snapshot()).map_err(io(&snap))?;
    let blob = dir.join(FINAL_POLICY);
    fs::write(&blob, &report.final_policy).map_err(io(&blob))?;
    write_baseline(&dir.join(BASELINE), &report.baseline)?;

    let header = ["episode", "return", "policy_version"];
    let mut train = writer(&dir.join(TRAIN_RETURNS), &header)?;
    let mut test = writer(&dir.join(TEST_RETURNS), &header)?;
    for e in &report.episodes {
        let row = [e.episode.to_string(), e.episode_return.to_string(), e.policy_version.to_string()];
        if e.mode == EpisodeMode::Test {
            test.write_record(row)?;
            let path = dir.join(trace_file(e.episode));
            let mut tw = writer(&path, &["step", "OR", "OE", "power"])?;
            for (t, s) in e.steps.iter().enumerate() {
                tw.write_record([
                    (t + 1).to_string(),
                    s.or_volts.to_string(),
                    s.oe_volts.to_string(),
                    s.power_watts.to_string(),
                ])?;
            }
            tw.flush().map_err(io(&path))?;
        } else {
            train.write_record(row)?;
        }
    }
    train.flush().map_err(io(&dir.join(TRAIN_RETURNS)))?;
    test.flush().map_err(io(&dir.join(TEST_RETURNS)))?;

    let path = dir.join(LOSSES);
    let mut w = writer(
        &path,
        &["episode", "step", "critic1_loss", "critic2_loss", "actor_loss", "alpha", "entropy_estimate"],
    )?;
    for r in &report.losses {
        let l = &r.loss;
        w.write_record([
            r.episode.to_string(),
            r.step.to_string(),
            l.critic1.to_string(),
            l.critic2.to_string(),
            l.actor.to_string(),
            l.alpha.to_string(),
            l.entropy.to_string(),
        ])?;
    }
    w.flush().map_err(io(&path))?;
    super::plot::plot_dir(dir)?;
    Ok(())
}
