use std::collections::BTreeSet;
use std::io;
use std::sync::mpsc::{channel, sync_channel, Receiver, Sender, SyncSender};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::frame::{encode_frame, DecoderStats, FrameDecoder};
use super::msg::{Control, EpisodeMode, EpsilonsPayload, ErrorCode, ExperiencePayload, Message};
use super::pipe::Transport;
use super::LinkError;
use crate::qnet::QuantizedPolicy;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("timed out; resume from episode {resume_from:?}")]
    Timeout { resume_from: Option<u32> },
    #[error("peer closed the connection")]
    Closed,
    #[error("sequence error: expected {expected}, got {got}")]
    Sequence { expected: u32, got: u32 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("peer reported {0:?}")]
    Remote(ErrorCode),
    #[error("trainer failed: {0}")]
    Trainer(String),
}

/// Message-level connection: framing, CRC, and per-direction sequence numbers.
pub struct FramedConn<T> {
    io: T,
    decoder: FrameDecoder,
    tx_seq: u32,
    rx_seq: u32,
    buf: Vec<u8>,
}

impl<T: Transport> FramedConn<T> {
    pub fn new(io: T) -> Self {
        Self {
            io,
            decoder: FrameDecoder::new(),
            tx_seq: 0,
            rx_seq: 0,
            buf: vec![0; 64 * 1024],
        }
    }

    pub fn set_timeout(&mut self, t: Option<Duration>) -> Result<(), SessionError> {
        Ok(self.io.set_read_timeout(t)?)
    }

    pub fn stats(&self) -> DecoderStats {
        self.decoder.stats()
    }

    pub fn get_mut(&mut self) -> &mut T {
        &mut self.io
    }

    /// Sequence number the next outgoing frame will carry.
    pub fn next_tx_seq(&self) -> u32 {
        self.tx_seq
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), SessionError> {
        let bytes = encode_frame(&msg.to_frame(self.tx_seq))?;
        self.io.write_all(&bytes)?;
        self.io.flush()?;
        self.tx_seq = self.tx_seq.wrapping_add(1);
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Message, SessionError> {
        loop {
            if let Some(frame) = self.decoder.next_frame()? {
                if frame.seq != self.rx_seq {
                    return Err(SessionError::Sequence {
                        expected: self.rx_seq,
                        got: frame.seq,
                    });
                }
                self.rx_seq = self.rx_seq.wrapping_add(1);
                return Ok(Message::from_frame(&frame)?);
            }
            let n = match self.io.read(&mut self.buf) {
                Ok(n) => n,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Err(SessionError::Timeout { resume_from: None })
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            };
            if n == 0 {
                return Err(SessionError::Closed);
            }
            self.decoder.push(&self.buf[..n]);
        }
    }
}

/// Episode numbering is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub explore_episodes: u32,
    pub test_every: u32,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            explore_episodes: 25,
            test_every: 10,
        }
    }
}

impl Schedule {
    pub fn mode(&self, episode: u32) -> EpisodeMode {
        if episode <= self.explore_episodes {
            EpisodeMode::Explore
        } else if self.test_every > 0 && episode.is_multiple_of(self.test_every) {
            EpisodeMode::Test
        } else {
            EpisodeMode::Train
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodePlan {
    pub episode_id: u32,
    pub mode: EpisodeMode,
}

/// Weights to deploy next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyUpdate {
    pub version: u32,
    pub blob: Vec<u8>,
}

impl PolicyUpdate {
    pub fn from_policy(p: &QuantizedPolicy) -> Self {
        Self {
            version: p.version(),
            blob: p.to_blob(),
        }
    }
}

/// Server-side learner hook.
pub trait Trainer {
    fn initial_policy(&mut self) -> Result<PolicyUpdate, String>;
    /// Consume one episode of experience and return the policy for the next.
    fn on_experience(&mut self, plan: EpisodePlan, exp: ExperiencePayload) -> Result<PolicyUpdate, String>;
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub first_episode: u32,
    pub last_episode: u32,
    pub schedule: Schedule,
    pub steps_per_episode: u16,
    pub seed: u64,
    pub timeout: Option<Duration>,
    pub max_attempts: u32,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            first_episode: 1,
            last_episode: 300,
            schedule: Schedule::default(),
            steps_per_episode: 80,
            seed: 0,
            timeout: Some(DEFAULT_TIMEOUT),
            max_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServerSummary {
    pub episodes_completed: u32,
    /// Episode ids of accepted EXPERIENCE payloads, in arrival order.
    pub experiences: Vec<u32>,
    pub steps_received: u64,
    pub epsilons_sent: u64,
    pub duplicates: u32,
    pub retries: u32,
    pub versions_sent: Vec<u32>,
}

/// Server-sampled exploration noise for one episode attempt. Every attempt
/// gets a fresh draw.
pub fn episode_epsilons(seed: u64, episode: u32, attempt: u32, n: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6570_735f_6e6f_6973);
    rng.set_stream(((episode as u64) << 16) | attempt as u64);
    (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v as f32
        })
        .collect()
}

/// Drive episodes `first_episode..=last_episode`: for each, send WEIGHTS,
/// EPSILONS and a start command, wait for the matching EXPERIENCE, and hand
/// it to the trainer. A timeout reports the episode to resume from.
pub fn server_session<T: Transport>(
    conn: &mut FramedConn<T>,
    cfg: &ServerConfig,
    trainer: &mut dyn Trainer,
) -> Result<ServerSummary, SessionError> {
    conn.set_timeout(cfg.timeout)?;
    let mut summary = ServerSummary::default();
    let mut seen = BTreeSet::new();
    let mut policy = trainer.initial_policy().map_err(SessionError::Trainer)?;
    for episode in cfg.first_episode..=cfg.last_episode {
        let plan = EpisodePlan {
            episode_id: episode,
            mode: cfg.schedule.mode(episode),
        };
        let with_resume = |e: SessionError| match e {
            SessionError::Timeout { .. } => SessionError::Timeout {
                resume_from: Some(episode),
            },
            other => other,
        };
        let mut attempt = 0;
        let exp = loop {
            conn.send(&Message::Weights(policy.blob.clone())).map_err(with_resume)?;
            summary.versions_sent.push(policy.version);
            let values = episode_epsilons(cfg.seed, episode, attempt, cfg.steps_per_episode as usize);
            summary.epsilons_sent += values.len() as u64;
            conn.send(&Message::Epsilons(EpsilonsPayload {
                episode_id: episode,
                values,
            }))
            .map_err(with_resume)?;
            conn.send(&Message::Control(Control::StartEpisode {
                episode_id: episode,
                policy_version: policy.version,
                mode: plan.mode,
            }))
            .map_err(with_resume)?;

            let outcome = loop {
                match conn.recv().map_err(with_resume)? {
                    Message::Experience(x) if seen.contains(&x.episode_id) => {
                        log::warn!("duplicate EXPERIENCE for episode {}, ignored", x.episode_id);
                        summary.duplicates += 1;
                    }
                    Message::Experience(x) if x.episode_id == episode => break Ok(x),
                    Message::Experience(x) => {
                        return Err(SessionError::Protocol(format!(
                            "EXPERIENCE for episode {} while running {episode}",
                            x.episode_id
                        )))
                    }
                    Message::Control(Control::Aborted { episode_id, code }) if episode_id == episode => {
                        break Err(code)
                    }
                    Message::Control(Control::Error(code)) => return Err(SessionError::Remote(code)),
                    other => {
                        return Err(SessionError::Protocol(format!(
                            "unexpected {:?} from device",
                            other.msg_type()
                        )))
                    }
                }
            };
            match outcome {
                Ok(x) => break x,
                Err(code) => {
                    attempt += 1;
                    summary.retries += 1;
                    log::warn!("episode {episode} aborted by device ({code:?}), attempt {attempt}");
                    if attempt >= cfg.max_attempts {
                        return Err(SessionError::Remote(code));
                    }
                }
            }
        };
        if exp.steps.len() != cfg.steps_per_episode as usize {
            return Err(SessionError::Protocol(format!(
                "episode {episode}: {} steps, expected {}",
                exp.steps.len(),
                cfg.steps_per_episode
            )));
        }
        seen.insert(episode);
        summary.experiences.push(episode);
        summary.steps_received += exp.steps.len() as u64;
        policy = trainer.on_experience(plan, exp).map_err(SessionError::Trainer)?;
        summary.episodes_completed += 1;
    }
    conn.send(&Message::Control(Control::Shutdown))?;
    Ok(summary)
}

/// Device-side episode execution hook.
pub trait EpisodeRunner {
    fn run(
        &mut self,
        policy: &QuantizedPolicy,
        epsilons: &[f32],
        episode_id: u32,
        mode: EpisodeMode,
    ) -> Result<ExperiencePayload, ErrorCode>;
}

/// Device state that survives reconnects.
#[derive(Debug, Default)]
pub struct DeviceState {
    pub policy: Option<QuantizedPolicy>,
    pub epsilons: Option<EpsilonsPayload>,
    /// Policy version in force for each episode started, in order.
    pub versions: Vec<u32>,
    pub episodes_run: u32,
    pub epsilons_consumed: u64,
    pub errors_sent: u32,
}

/// Serve commands until the server sends SHUTDOWN. Invalid requests are
/// answered with CONTROL(error) and the session continues.
pub fn device_session<T: Transport>(
    conn: &mut FramedConn<T>,
    runner: &mut dyn EpisodeRunner,
    state: &mut DeviceState,
    timeout: Option<Duration>,
) -> Result<(), SessionError> {
    conn.set_timeout(timeout)?;
    loop {
        match conn.recv()? {
            Message::Weights(blob) => match QuantizedPolicy::from_blob(&blob) {
                Ok(p) => {
                    let current = state.policy.as_ref().map(|q| q.version());
                    if current.is_some_and(|v| p.version() < v) {
                        state.errors_sent += 1;
                        conn.send(&Message::Control(Control::Error(ErrorCode::VersionRegression)))?;
                    } else {
                        state.policy = Some(p);
                    }
                }
                Err(e) => {
                    log::warn!("rejected weight blob: {e}");
                    state.errors_sent += 1;
                    conn.send(&Message::Control(Control::Error(ErrorCode::BadWeights)))?;
                }
            },
            Message::Epsilons(eps) => {
                if state.policy.is_none() {
                    state.errors_sent += 1;
                    conn.send(&Message::Control(Control::Error(ErrorCode::NoWeights)))?;
                } else {
                    state.epsilons = Some(eps);
                }
            }
            Message::Control(Control::StartEpisode {
                episode_id,
                policy_version,
                mode,
            }) => {
                let check = match (&state.policy, &state.epsilons) {
                    (None, _) => Err(ErrorCode::NoWeights),
                    (Some(p), _) if p.version() != policy_version => Err(ErrorCode::VersionMismatch),
                    (_, Some(e)) if e.episode_id == episode_id => Ok(()),
                    _ => Err(ErrorCode::NoEpsilons),
                };
                if let Err(code) = check {
                    state.errors_sent += 1;
                    conn.send(&Message::Control(Control::Error(code)))?;
                    continue;
                }
                let policy = state.policy.as_ref().expect("checked");
                let eps = state.epsilons.take().expect("checked");
                state.epsilons_consumed += eps.values.len() as u64;
                state.versions.push(policy.version());
                match runner.run(policy, &eps.values, episode_id, mode) {
                    Ok(x) => {
                        state.episodes_run += 1;
                        conn.send(&Message::Experience(x))?;
                    }
                    Err(code) => conn.send(&Message::Control(Control::Aborted { episode_id, code }))?,
                }
            }
            Message::Control(Control::Shutdown) => return Ok(()),
            other => {
                return Err(SessionError::Protocol(format!(
                    "unexpected {:?} from server",
                    other.msg_type()
                )))
            }
        }
    }
}

enum Job {
    Initial,
    Episode(EpisodePlan, ExperiencePayload),
}

/// Trainer adaptor that forwards work to another thread over a bounded queue;
/// `on_experience` blocks while the queue is full.
pub struct QueuedTrainer {
    jobs: SyncSender<Job>,
    replies: Receiver<Result<PolicyUpdate, String>>,
}

/// Receiving side of a [`QueuedTrainer`].
pub struct TrainerWorker {
    jobs: Receiver<Job>,
    replies: Sender<Result<PolicyUpdate, String>>,
}

pub fn trainer_queue(capacity: usize) -> (QueuedTrainer, TrainerWorker) {
    let (jtx, jrx) = sync_channel(capacity);
    let (rtx, rrx) = channel();
    (
        QueuedTrainer {
            jobs: jtx,
            replies: rrx,
        },
        TrainerWorker {
            jobs: jrx,
            replies: rtx,
        },
    )
}

impl QueuedTrainer {
    fn call(&mut self, job: Job) -> Result<PolicyUpdate, String> {
        self.jobs.send(job).map_err(|_| "trainer thread gone".to_string())?;
        self.replies.recv().map_err(|_| "trainer thread gone".to_string())?
    }
}

impl Trainer for QueuedTrainer {
    fn initial_policy(&mut self) -> Result<PolicyUpdate, String> {
        self.call(Job::Initial)
    }

    fn on_experience(&mut self, plan: EpisodePlan, exp: ExperiencePayload) -> Result<PolicyUpdate, String> {
        self.call(Job::Episode(plan, exp))
    }
}

impl TrainerWorker {
    /// Serve jobs until the sending side is dropped.
    pub fn serve(self, trainer: &mut dyn Trainer) {
        for job in self.jobs {
            let reply = match job {
                Job::Initial => trainer.initial_policy(),
                Job::Episode(plan, exp) => trainer.on_experience(plan, exp),
            };
            let failed = reply.is_err();
            if self.replies.send(reply).is_err() || failed {
                break;
            }
        }
    }
}
