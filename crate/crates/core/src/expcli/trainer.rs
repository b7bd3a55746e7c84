use crate::link::{EpisodeMode, EpisodePlan, ExperiencePayload, PolicyUpdate, StepRecord, Trainer};
use crate::twin::{LossRecord, ReplayBuffer, SacAgent, SacConfig, Transition};
use crate::weldsim::SENSOR_MAX_VOLTS;

/// What the server learned about one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub episode: u32,
    pub mode: EpisodeMode,
    pub policy_version: u32,
    pub episode_return: f64,
    pub steps: Vec<StepRecord>,
    pub final_obs: [f32; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub episode: u32,
    pub step: u64,
    pub loss: LossRecord,
}

/// Rebuild transitions from an experience stream; the reward of step `t`
/// is the OR reading that followed it.
pub fn transitions(exp: &ExperiencePayload) -> Vec<Transition> {
    let n = exp.steps.len();
    (0..n)
        .map(|t| {
            let obs = exp.obs(t).map(f64::from);
            let next_obs = exp.obs(t + 1).map(f64::from);
            Transition {
                obs,
                action: exp.steps[t].action_squashed as f64,
                reward: next_obs[0] / SENSOR_MAX_VOLTS,
                next_obs,
                done: t + 1 == n,
            }
        })
        .collect()
}

/// Server-side learner: replay buffer plus SAC, one training iteration after
/// every episode once the buffer holds a full batch.
pub struct SacTrainer {
    pub agent: SacAgent,
    pub buffer: ReplayBuffer,
    pub version: u32,
    pub episodes: Vec<EpisodeSummary>,
    pub losses: Vec<LossRow>,
}

impl SacTrainer {
    pub fn new(cfg: SacConfig, seed: u64) -> Self {
        Self {
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            agent: SacAgent::new(cfg, seed),
            version: 1,
            episodes: Vec::new(),
            losses: Vec::new(),
        }
    }

    fn export(&self) -> Result<PolicyUpdate, String> {
        let blob = self.agent.policy.export_blob(self.version).map_err(|e| e.to_string())?;
        Ok(PolicyUpdate {
            version: self.version,
            blob,
        })
    }
}

impl Trainer for SacTrainer {
    fn initial_policy(&mut self) -> Result<PolicyUpdate, String> {
        self.export()
    }

    fn on_experience(&mut self, plan: EpisodePlan, exp: ExperiencePayload) -> Result<PolicyUpdate, String> {
        let trans = transitions(&exp);
        let episode_return = trans.iter().map(|t| t.reward).sum();
        if plan.mode != EpisodeMode::Test {
            for t in trans {
                self.buffer.push(t);
            }
        }
        if self.buffer.len() >= self.agent.cfg.batch_size {
            let first = self.agent.steps();
            let trace = self.agent.update(&self.buffer).map_err(|e| e.to_string())?;
            self.losses.extend(trace.into_iter().enumerate().map(|(i, loss)| LossRow {
                episode: plan.episode_id,
                step: first + i as u64 + 1,
                loss,
            }));
        }
        self.episodes.push(EpisodeSummary {
            episode: plan.episode_id,
            mode: plan.mode,
            policy_version: self.version,
            episode_return,
            steps: exp.steps,
            final_obs: exp.final_obs,
        });
        self.version += 1;
        self.export()
    }
}
