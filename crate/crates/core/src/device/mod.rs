//! Device runtime emulator: trigger gating, the act/observe loop, and FIFO
//! experience capture on top of a weld process.

use std::collections::VecDeque;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::link::{EpisodeMode, EpisodeRunner, ErrorCode, ExperiencePayload, StepRecord, FLAG_EXPLORE, FLAG_TEST};
use crate::qnet::{infer, quantize_obs, Action, QuantizedPolicy};
use crate::weldsim::{SensorReading, SimError, SimParams, SurfaceProfile, WeldEnv, POWER_MAX, POWER_MIN};

pub const TRIGGER_VOLTS: f64 = 0.1;
pub const MAX_TRIGGER_PROBES: u32 = 100;
pub const STEPS_PER_EPISODE: usize = 80;
pub const TICK: Duration = Duration::from_millis(10);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("no trigger after {0} probes")]
    TriggerTimeout(u32),
    #[error("{have} epsilons for {need} steps")]
    EpsilonUnderrun { have: usize, need: usize },
    #[error(transparent)]
    Process(#[from] SimError),
}

impl DeviceError {
    pub fn code(&self) -> ErrorCode {
        match self {
            DeviceError::TriggerTimeout(_) => ErrorCode::TriggerTimeout,
            DeviceError::EpsilonUnderrun { .. } => ErrorCode::EpsilonUnderrun,
            DeviceError::Process(_) => ErrorCode::Internal,
        }
    }
}

/// Anything the device can drive with a laser power and read two sensors from.
pub trait Process {
    /// Reading under `power` without advancing the line.
    fn probe(&mut self, power: f64) -> Result<SensorReading, SimError>;
    fn step(&mut self, power: f64) -> Result<SensorReading, SimError>;
    /// Whether the last step entered keyhole mode, when the process knows.
    fn keyhole(&self) -> Option<bool> {
        None
    }
}

impl Process for WeldEnv {
    fn probe(&mut self, power: f64) -> Result<SensorReading, SimError> {
        WeldEnv::probe(self, power)
    }

    fn step(&mut self, power: f64) -> Result<SensorReading, SimError> {
        WeldEnv::step(self, power)
    }

    fn keyhole(&self) -> Option<bool> {
        Some(self.state.keyhole)
    }
}

/// Probe at minimum power until OR reaches the trigger level; the triggering
/// reading is the first observation.
pub fn trigger_wait(env: &mut dyn Process) -> Result<SensorReading, DeviceError> {
    for _ in 0..MAX_TRIGGER_PROBES {
        let r = env.probe(POWER_MIN)?;
        if r.or_volts >= TRIGGER_VOLTS {
            return Ok(r);
        }
    }
    Err(DeviceError::TriggerTimeout(MAX_TRIGGER_PROBES))
}

/// Uniform random power over the full range.
pub fn exploration_policy(rng: &mut impl Rng) -> Action {
    Action::from_power(rng.random_range(POWER_MIN..=POWER_MAX))
}

/// Per-episode exploration generator held by the device.
pub fn exploration_rng(seed: u64, episode: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6578_706c_6f72_6521);
    rng.set_stream(episode as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutput {
    pub payload: ExperiencePayload,
    /// Keyhole flag after each step, when the process reports it.
    pub keyhole: Vec<bool>,
}

/// Run one episode. Explore mode draws powers from `explore_rng`; train mode
/// consumes `epsilons` in order; test mode uses the policy mean.
pub fn run_device_episode(
    policy: &QuantizedPolicy,
    epsilons: &[f32],
    env: &mut dyn Process,
    mode: EpisodeMode,
    episode_id: u32,
    explore_rng: &mut impl Rng,
    tick: Option<Duration>,
) -> Result<EpisodeOutput, DeviceError> {
    if mode == EpisodeMode::Train && epsilons.len() < STEPS_PER_EPISODE {
        return Err(DeviceError::EpsilonUnderrun {
            have: epsilons.len(),
            need: STEPS_PER_EPISODE,
        });
    }
    let mut obs = trigger_wait(env)?;
    let mut fifo = VecDeque::with_capacity(STEPS_PER_EPISODE);
    let mut keyhole = Vec::with_capacity(STEPS_PER_EPISODE);
    let start = Instant::now();
    #[allow(clippy::needless_range_loop)]
    for t in 0..STEPS_PER_EPISODE {
        let action = match mode {
            EpisodeMode::Explore => exploration_policy(explore_rng),
            EpisodeMode::Train => infer(policy, quantize_obs(obs.as_array()), epsilons[t] as f64),
            EpisodeMode::Test => infer(policy, quantize_obs(obs.as_array()), 0.0),
        };
        fifo.push_back(StepRecord {
            or_volts: obs.or_volts as f32,
            oe_volts: obs.oe_volts as f32,
            action_squashed: action.squashed as f32,
            power_watts: action.power_watts as f32,
        });
        obs = env.step(action.power_watts)?;
        keyhole.extend(env.keyhole());
        if let Some(tick) = tick {
            let due = start + tick * (t as u32 + 1);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
    }
    let flags = match mode {
        EpisodeMode::Explore => FLAG_EXPLORE,
        EpisodeMode::Train => 0,
        EpisodeMode::Test => FLAG_TEST,
    };
    Ok(EpisodeOutput {
        payload: ExperiencePayload {
            episode_id,
            steps: fifo.into_iter().collect(),
            final_obs: [obs.or_volts as f32, obs.oe_volts as f32],
            flags,
        },
        keyhole,
    })
}

/// Summary the device keeps for each finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode_id: u32,
    pub mode: EpisodeMode,
    pub policy_version: u32,
    pub keyhole: Vec<bool>,
}

impl EpisodeLog {
    pub fn keyhole_fraction(&self) -> f64 {
        self.keyhole.iter().filter(|&&k| k).count() as f64 / self.keyhole.len().max(1) as f64
    }
}

/// Simulated device: a fresh weld line per episode, keyed by (seed, episode).
#[derive(Debug, Clone)]
pub struct DeviceRuntime {
    pub profile: SurfaceProfile,
    pub params: SimParams,
    pub seed: u64,
    pub realtime: bool,
    pub log: Vec<EpisodeLog>,
}

impl DeviceRuntime {
    pub fn new(profile: SurfaceProfile, params: SimParams, seed: u64, realtime: bool) -> Self {
        Self {
            profile,
            params,
            seed,
            realtime,
            log: Vec::new(),
        }
    }
}

impl EpisodeRunner for DeviceRuntime {
    fn run(
        &mut self,
        policy: &QuantizedPolicy,
        epsilons: &[f32],
        episode_id: u32,
        mode: EpisodeMode,
    ) -> Result<ExperiencePayload, ErrorCode> {
        let mut env = WeldEnv::new(self.profile.clone(), self.params.clone(), self.seed, episode_id as u64);
        let mut rng = exploration_rng(self.seed, episode_id);
        let tick = self.realtime.then_some(TICK);
        match run_device_episode(policy, epsilons, &mut env, mode, episode_id, &mut rng, tick) {
            Ok(out) => {
                self.log.push(EpisodeLog {
                    episode_id,
                    mode,
                    policy_version: policy.version(),
                    keyhole: out.keyhole,
                });
                Ok(out.payload)
            }
            Err(e) => {
                log::warn!("episode {episode_id} aborted: {e}");
                Err(e.code())
            }
        }
    }
}
