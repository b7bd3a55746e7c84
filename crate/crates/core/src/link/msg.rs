use super::frame::{Frame, MsgType};
use super::LinkError;

/// What the device should do in an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum EpisodeMode {
    /// Uniform random power, network ignored.
    Explore = 0,
    /// Stochastic policy driven by the streamed epsilons.
    Train = 1,
    /// Policy mean only.
    Test = 2,
}

impl EpisodeMode {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(EpisodeMode::Explore),
            1 => Some(EpisodeMode::Train),
            2 => Some(EpisodeMode::Test),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeMode::Explore => "explore",
            EpisodeMode::Train => "train",
            EpisodeMode::Test => "test",
        }
    }
}

/// Error codes carried in CONTROL frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    NoWeights = 1,
    NoEpsilons = 2,
    VersionMismatch = 3,
    VersionRegression = 4,
    EpsilonUnderrun = 5,
    TriggerTimeout = 6,
    BadWeights = 7,
    Protocol = 8,
    Internal = 9,
}

impl ErrorCode {
    fn from_u16(v: u16) -> Option<Self> {
        use ErrorCode::*;
        [
            NoWeights,
            NoEpsilons,
            VersionMismatch,
            VersionRegression,
            EpsilonUnderrun,
            TriggerTimeout,
            BadWeights,
            Protocol,
            Internal,
        ]
        .into_iter()
        .find(|c| *c as u16 == v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonsPayload {
    pub episode_id: u32,
    pub values: Vec<f32>,
}

/// One device step: observation in volts and the action taken on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub or_volts: f32,
    pub oe_volts: f32,
    pub action_squashed: f32,
    pub power_watts: f32,
}

pub const FLAG_TEST: u8 = 1 << 0;
pub const FLAG_EXPLORE: u8 = 1 << 1;

/// Experience of one episode. Rewards are not carried; the server derives
/// them from the observation stream. `final_obs` is the reading after the
/// last action.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperiencePayload {
    pub episode_id: u32,
    pub steps: Vec<StepRecord>,
    pub final_obs: [f32; 2],
    pub flags: u8,
}

impl ExperiencePayload {
    pub fn is_test(&self) -> bool {
        self.flags & FLAG_TEST != 0
    }

    /// Observation seen before step `t` (`t == steps.len()` gives the final one).
    pub fn obs(&self, t: usize) -> [f32; 2] {
        match self.steps.get(t) {
            Some(s) => [s.or_volts, s.oe_volts],
            None => self.final_obs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    StartEpisode {
        episode_id: u32,
        policy_version: u32,
        mode: EpisodeMode,
    },
    Aborted {
        episode_id: u32,
        code: ErrorCode,
    },
    Error(ErrorCode),
    Shutdown,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// Serialized policy blob.
    Weights(Vec<u8>),
    Epsilons(EpsilonsPayload),
    Experience(ExperiencePayload),
    Control(Control),
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::Weights(_) => MsgType::Weights,
            Message::Epsilons(_) => MsgType::Epsilons,
            Message::Experience(_) => MsgType::Experience,
            Message::Control(_) => MsgType::Control,
        }
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::Weights(blob) => out.extend_from_slice(blob),
            Message::Epsilons(e) => {
                out.extend_from_slice(&e.episode_id.to_le_bytes());
                out.extend_from_slice(&(e.values.len() as u16).to_le_bytes());
                for v in &e.values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Message::Experience(x) => {
                out.extend_from_slice(&x.episode_id.to_le_bytes());
                out.extend_from_slice(&(x.steps.len() as u16).to_le_bytes());
                for s in &x.steps {
                    for v in [s.or_volts, s.oe_volts, s.action_squashed, s.power_watts] {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                out.extend_from_slice(&x.final_obs[0].to_le_bytes());
                out.extend_from_slice(&x.final_obs[1].to_le_bytes());
                out.push(x.flags);
            }
            Message::Control(c) => match *c {
                Control::StartEpisode {
                    episode_id,
                    policy_version,
                    mode,
                } => {
                    out.push(1);
                    out.extend_from_slice(&episode_id.to_le_bytes());
                    out.extend_from_slice(&policy_version.to_le_bytes());
                    out.push(mode as u8);
                }
                Control::Aborted { episode_id, code } => {
                    out.push(2);
                    out.extend_from_slice(&episode_id.to_le_bytes());
                    out.extend_from_slice(&(code as u16).to_le_bytes());
                }
                Control::Error(code) => {
                    out.push(3);
                    out.extend_from_slice(&(code as u16).to_le_bytes());
                }
                Control::Shutdown => out.push(4),
            },
        }
        out
    }

    pub fn to_frame(&self, seq: u32) -> Frame {
        Frame {
            msg_type: self.msg_type(),
            seq,
            payload: self.encode_payload(),
        }
    }

    pub fn from_frame(frame: &Frame) -> Result<Self, LinkError> {
        let mut r = Reader::new(&frame.payload);
        let msg = match frame.msg_type {
            MsgType::Weights => return Ok(Message::Weights(frame.payload.clone())),
            MsgType::Epsilons => {
                let episode_id = r.u32()?;
                let n = r.u16()? as usize;
                let values = (0..n).map(|_| r.f32()).collect::<Result<_, _>>()?;
                Message::Epsilons(EpsilonsPayload { episode_id, values })
            }
            MsgType::Experience => {
                let episode_id = r.u32()?;
                let n = r.u16()? as usize;
                let steps = (0..n)
                    .map(|_| {
                        Ok(StepRecord {
                            or_volts: r.f32()?,
                            oe_volts: r.f32()?,
                            action_squashed: r.f32()?,
                            power_watts: r.f32()?,
                        })
                    })
                    .collect::<Result<_, LinkError>>()?;
                let final_obs = [r.f32()?, r.f32()?];
                let flags = r.u8()?;
                Message::Experience(ExperiencePayload {
                    episode_id,
                    steps,
                    final_obs,
                    flags,
                })
            }
            MsgType::Control => {
                let code = |v: u16| ErrorCode::from_u16(v).ok_or(LinkError::Payload("unknown error code"));
                let c = match r.u8()? {
                    1 => Control::StartEpisode {
                        episode_id: r.u32()?,
                        policy_version: r.u32()?,
                        mode: EpisodeMode::from_u8(r.u8()?).ok_or(LinkError::Payload("unknown mode"))?,
                    },
                    2 => Control::Aborted {
                        episode_id: r.u32()?,
                        code: code(r.u16()?)?,
                    },
                    3 => Control::Error(code(r.u16()?)?),
                    4 => Control::Shutdown,
                    _ => return Err(LinkError::Payload("unknown control kind")),
                };
                Message::Control(c)
            }
        };
        if r.remaining() != 0 {
            return Err(LinkError::Payload("trailing payload bytes"));
        }
        Ok(msg)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], LinkError> {
        if self.remaining() < N {
            return Err(LinkError::Payload("truncated payload"));
        }
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, LinkError> {
        Ok(self.take::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16, LinkError> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32, LinkError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f32(&mut self) -> Result<f32, LinkError> {
        Ok(f32::from_le_bytes(self.take()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::frame::{encode_frame, FrameDecoder};

    fn roundtrip(m: &Message) -> Message {
        let bytes = encode_frame(&m.to_frame(5)).unwrap();
        let mut d = FrameDecoder::new();
        d.push(&bytes);
        Message::from_frame(&d.next_frame().unwrap().unwrap()).unwrap()
    }

    #[test]
    fn start_episode_frame_bytes() {
        let m = Message::Control(Control::StartEpisode {
            episode_id: 7,
            policy_version: 2,
            mode: EpisodeMode::Train,
        });
        let bytes = encode_frame(&m.to_frame(7)).unwrap();
        assert_eq!(&bytes[..7], &[0x57, 0x4C, 0x04, 0x07, 0x00, 0x00, 0x00]);
        assert_eq!(roundtrip(&m), m);
    }

    #[test]
    fn epsilons_layout() {
        let m = Message::Epsilons(EpsilonsPayload {
            episode_id: 3,
            values: vec![0.5; 80],
        });
        let p = m.encode_payload();
        assert_eq!(p.len(), 4 + 2 + 80 * 4);
        assert_eq!(&p[4..6], &80u16.to_le_bytes());
        assert_eq!(roundtrip(&m), m);
    }

    #[test]
    fn experience_roundtrip() {
        let steps = (0..80)
            .map(|i| StepRecord {
                or_volts: i as f32 * 0.1,
                oe_volts: 1.0,
                action_squashed: -0.25,
                power_watts: 53.125,
            })
            .collect();
        let m = Message::Experience(ExperiencePayload {
            episode_id: 12,
            steps,
            final_obs: [7.5, 4.0],
            flags: FLAG_TEST,
        });
        assert_eq!(roundtrip(&m), m);
    }

    #[test]
    fn malformed_payloads() {
        let f = Frame {
            msg_type: MsgType::Control,
            seq: 0,
            payload: vec![9],
        };
        assert!(Message::from_frame(&f).is_err());
        let f = Frame {
            msg_type: MsgType::Epsilons,
            seq: 0,
            payload: vec![0, 0, 0, 0, 2, 0, 1, 2, 3, 4],
        };
        assert!(Message::from_frame(&f).is_err());
        let f = Frame {
            msg_type: MsgType::Control,
            seq: 0,
            payload: vec![4, 0],
        };
        assert!(Message::from_frame(&f).is_err());
    }
}
