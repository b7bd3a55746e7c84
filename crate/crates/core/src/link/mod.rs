//! Device/server wire protocol.
//!
//! Frame layout (little-endian): magic `57 4C`, `msg_type:u8`, `seq:u32`,
//! `payload_len:u32`, payload, `crc32:u32` over header and payload.

mod frame;
mod msg;
mod pipe;
mod session;

pub use frame::{encode_frame, DecoderStats, Frame, FrameDecoder, MsgType, CRC_LEN, HEADER_LEN, MAGIC, MAX_PAYLOAD};
pub use msg::{
    Control, EpisodeMode, EpsilonsPayload, ErrorCode, ExperiencePayload, Message, StepRecord, FLAG_EXPLORE,
    FLAG_TEST,
};
pub use pipe::{duplex, PipeEnd, Transport};
pub use session::{
    device_session, episode_epsilons, server_session, trainer_queue, DeviceState, EpisodePlan, EpisodeRunner,
    FramedConn, PolicyUpdate, QueuedTrainer, Schedule, ServerConfig, ServerSummary, SessionError, Trainer,
    TrainerWorker, DEFAULT_TIMEOUT,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("payload of {0} bytes exceeds the 16 MiB limit")]
    Oversize(usize),
    #[error("malformed payload: {0}")]
    Payload(&'static str),
}
