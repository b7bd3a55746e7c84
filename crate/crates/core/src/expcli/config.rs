use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Duration;

use super::ExpError;
use crate::link::{Schedule, DEFAULT_TIMEOUT};
use crate::twin::SacConfig;
use crate::weldsim::{Preset, Segment, SimParams, SurfaceProfile};

/// Which weld line the experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    Preset(Preset),
    Custom(Vec<Segment>),
}

impl Surface {
    pub fn profile(&self, sim: &SimParams) -> Result<SurfaceProfile, ExpError> {
        match self {
            Surface::Preset(p) => Ok(SurfaceProfile::preset(*p, sim.noise_brushed, sim.noise_sandblasted)),
            Surface::Custom(segs) => Ok(SurfaceProfile::new(segs.clone())?),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Surface::Preset(p) => p.name().to_string(),
            Surface::Custom(_) => "custom".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub surface: Surface,
    pub episodes: u32,
    pub seed: u64,
    pub schedule: Schedule,
    pub realtime: bool,
    /// Test episodes averaged for the headline comparison.
    pub eval_window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub power_min: f64,
    pub power_max: f64,
    pub power_step: f64,
    pub episodes_per_power: u32,
}

impl BaselineConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.power_max - self.power_min) / self.power_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.power_min + self.power_step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub timeout: Duration,
    pub max_attempts: u32,
    pub queue_capacity: usize,
}

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimParams,
    pub sac: SacConfig,
    pub run: RunConfig,
    pub baseline: BaselineConfig,
    pub link: LinkConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimParams::default(),
            sac: SacConfig::default(),
            run: RunConfig {
                surface: Surface::Preset(Preset::Sandblasted),
                episodes: 300,
                seed: 1,
                schedule: Schedule::default(),
                realtime: false,
                eval_window: 10,
            },
            baseline: BaselineConfig {
                power_min: 25.0,
                power_max: 100.0,
                power_step: 5.0,
                episodes_per_power: 20,
            },
            link: LinkConfig {
                timeout: DEFAULT_TIMEOUT,
                max_attempts: 3,
                queue_capacity: 4,
            },
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ExpError> {
    value.parse().map_err(|_| ExpError::Config(format!("{key}: cannot parse {value:?}")))
}

impl ExperimentConfig {
    /// Apply `key = value` lines on top of `self`. `#` starts a comment.
    /// Any `surface.segment` line replaces the preset with a custom profile.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ExpError> {
        let mut segments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ExpError::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "surface.segment" {
                segments.push(Segment::parse(v).map_err(|e| ExpError::Config(format!("line {}: {e}", i + 1)))?);
            } else {
                self.set(k, v)?;
            }
        }
        if !segments.is_empty() {
            self.run.surface = Surface::Custom(segments);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ExpError> {
        let s = &mut self.sim;
        let a = &mut self.sac;
        let r = &mut self.run;
        let b = &mut self.baseline;
        let l = &mut self.link;
        match key {
            "sim.lambda" => s.lambda = parse(key, v)?,
            "sim.c" => s.c = parse(key, v)?,
            "sim.a0" => s.a0 = parse(key, v)?,
            "sim.kappa" => s.kappa = parse(key, v)?,
            "sim.sa_ref" => s.sa_ref = parse(key, v)?,
            "sim.rho0" => s.rho0 = parse(key, v)?,
            "sim.w" => s.w = parse(key, v)?,
            "sim.m_kh" => s.m_kh = parse(key, v)?,
            "sim.m_max" => s.m_max = parse(key, v)?,
            "sim.or_peak" => s.or_peak = parse(key, v)?,
            "sim.or_kh_factor" => s.or_kh_factor = parse(key, v)?,
            "sim.b0" => s.b0 = parse(key, v)?,
            "sim.e0" => s.e0 = parse(key, v)?,
            "sim.e1" => s.e1 = parse(key, v)?,
            "sim.sigma_oe" => s.sigma_oe = parse(key, v)?,
            "sim.noise_brushed" => s.noise_brushed = parse(key, v)?,
            "sim.noise_sandblasted" => s.noise_sandblasted = parse(key, v)?,
            "sim.noise" => s.noise = parse(key, v)?,
            "sim.mm_per_step" => s.mm_per_step = parse(key, v)?,
            "sac.gamma" => a.gamma = parse(key, v)?,
            "sac.tau" => a.tau = parse(key, v)?,
            "sac.lr" => a.lr = parse(key, v)?,
            "sac.batch_size" => a.batch_size = parse(key, v)?,
            "sac.grad_steps" => a.grad_steps = parse(key, v)?,
            "sac.target_entropy" => a.target_entropy = parse(key, v)?,
            "sac.init_alpha" => a.init_alpha = parse(key, v)?,
            "sac.critic_hidden" => {
                a.critic_hidden = v
                    .split(',')
                    .map(|x| parse(key, x.trim()))
                    .collect::<Result<_, _>>()?
            }
            "sac.buffer_capacity" => a.buffer_capacity = parse(key, v)?,
            "sac.fake_quant" => a.fake_quant = parse(key, v)?,
            "run.surface" => r.surface = Surface::Preset(v.parse::<Preset>()?),
            "run.episodes" => r.episodes = parse(key, v)?,
            "run.seed" => r.seed = parse(key, v)?,
            "run.explore_episodes" => r.schedule.explore_episodes = parse(key, v)?,
            "run.test_every" => r.schedule.test_every = parse(key, v)?,
            "run.realtime" => r.realtime = parse(key, v)?,
            "run.eval_window" => r.eval_window = parse(key, v)?,
            "baseline.power_min" => b.power_min = parse(key, v)?,
            "baseline.power_max" => b.power_max = parse(key, v)?,
            "baseline.power_step" => b.power_step = parse(key, v)?,
            "baseline.episodes_per_power" => b.episodes_per_power = parse(key, v)?,
            "link.timeout_secs" => l.timeout = Duration::from_secs_f64(parse(key, v)?),
            "link.max_attempts" => l.max_attempts = parse(key, v)?,
            "link.queue_capacity" => l.queue_capacity = parse(key, v)?,
            _ => return Err(ExpError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExpError> {
        let bad = |m: &str| Err(ExpError::Config(m.to_string()));
        if self.run.episodes == 0 {
            return bad("run.episodes must be positive");
        }
        if self.sac.batch_size == 0 || self.sac.batch_size > self.sac.buffer_capacity {
            return bad("sac.batch_size must be in 1..=sac.buffer_capacity");
        }
        if self.sac.init_alpha.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("sac.init_alpha must be positive");
        }
        if self.baseline.power_step.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || self.baseline.power_min > self.baseline.power_max {
            return bad("baseline grid is empty");
        }
        if self.link.queue_capacity == 0 || self.link.max_attempts == 0 {
            return bad("link.queue_capacity and link.max_attempts must be positive");
        }
        self.run.surface.profile(&self.sim)?;
        Ok(())
    }

    /// Text that `apply_text` turns back into exactly this config.
    pub fn snapshot(&self) -> String {
        let s = &self.sim;
        let a = &self.sac;
        let r = &self.run;
        let b = &self.baseline;
        let l = &self.link;
        let hidden: Vec<String> = a.critic_hidden.iter().map(|h| h.to_string()).collect();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("sim.lambda", format!("{:?}", s.lambda));
        kv("sim.c", format!("{:?}", s.c));
        kv("sim.a0", format!("{:?}", s.a0));
        kv("sim.kappa", format!("{:?}", s.kappa));
        kv("sim.sa_ref", format!("{:?}", s.sa_ref));
        kv("sim.rho0", format!("{:?}", s.rho0));
        kv("sim.w", format!("{:?}", s.w));
        kv("sim.m_kh", format!("{:?}", s.m_kh));
        kv("sim.m_max", format!("{:?}", s.m_max));
        kv("sim.or_peak", format!("{:?}", s.or_peak));
        kv("sim.or_kh_factor", format!("{:?}", s.or_kh_factor));
        kv("sim.b0", format!("{:?}", s.b0));
        kv("sim.e0", format!("{:?}", s.e0));
        kv("sim.e1", format!("{:?}", s.e1));
        kv("sim.sigma_oe", format!("{:?}", s.sigma_oe));
        kv("sim.noise_brushed", format!("{:?}", s.noise_brushed));
        kv("sim.noise_sandblasted", format!("{:?}", s.noise_sandblasted));
        kv("sim.noise", s.noise.to_string());
        kv("sim.mm_per_step", format!("{:?}", s.mm_per_step));
        kv("sac.gamma", format!("{:?}", a.gamma));
        kv("sac.tau", format!("{:?}", a.tau));
        kv("sac.lr", format!("{:?}", a.lr));
        kv("sac.batch_size", a.batch_size.to_string());
        kv("sac.grad_steps", a.grad_steps.to_string());
        kv("sac.target_entropy", format!("{:?}", a.target_entropy));
        kv("sac.init_alpha", format!("{:?}", a.init_alpha));
        kv("sac.critic_hidden", hidden.join(","));
        kv("sac.buffer_capacity", a.buffer_capacity.to_string());
        kv("sac.fake_quant", a.fake_quant.to_string());
        match &r.surface {
            Surface::Preset(p) => kv("run.surface", p.name().to_string()),
            Surface::Custom(segs) => {
                for seg in segs {
                    kv("surface.segment", seg.to_string());
                }
            }
        }
        kv("run.episodes", r.episodes.to_string());
        kv("run.seed", r.seed.to_string());
        kv("run.explore_episodes", r.schedule.explore_episodes.to_string());
        kv("run.test_every", r.schedule.test_every.to_string());
        kv("run.realtime", r.realtime.to_string());
        kv("run.eval_window", r.eval_window.to_string());
        kv("baseline.power_min", format!("{:?}", b.power_min));
        kv("baseline.power_max", format!("{:?}", b.power_max));
        kv("baseline.power_step", format!("{:?}", b.power_step));
        kv("baseline.episodes_per_power", b.episodes_per_power.to_string());
        kv("link.timeout_secs", format!("{:?}", l.timeout.as_secs_f64()));
        kv("link.max_attempts", l.max_attempts.to_string());
        kv("link.queue_capacity", l.queue_capacity.to_string());
        out
    }

    pub fn load(path: &PathBuf) -> Result<Self, ExpError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExpError::Io(path.clone(), e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weldsim::SurfaceKind;

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("sim.lambda = 0.65\nsac.critic_hidden = 16, 8\nrun.seed = 9 # comment\nlink.timeout_secs = 2.5")
            .unwrap();
        let mut again = ExperimentConfig::default();
        again.apply_text(&cfg.snapshot()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(cfg.sac.critic_hidden, vec![16, 8]);
    }

    #[test]
    fn custom_surface_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("surface.segment = 20, 1.47, 0.4, brushed\nsurface.segment = 20, 1.1, 0.1, sandblasted")
            .unwrap();
        let Surface::Custom(segs) = &cfg.run.surface else { panic!() };
        assert_eq!(segs[1].kind, SurfaceKind::Sandblasted);
        let mut again = ExperimentConfig::default();
        again.apply_text(&cfg.snapshot()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("sim.nope", "1").is_err());
        assert!(cfg.set("sac.lr", "fast").is_err());
        assert!(matches!(cfg.set("run.surface", "polished"), Err(ExpError::Sim(_))));
    }

    #[test]
    fn default_grid_has_16_points() {
        let g = ExperimentConfig::default().baseline.grid();
        assert_eq!(g.len(), 16);
        assert_eq!((g[0], g[15]), (25.0, 100.0));
    }
}
