use super::LinkError;

pub const MAGIC: [u8; 2] = [0x57, 0x4C];
/// magic(2) + type(1) + seq(4) + payload_len(4)
pub const HEADER_LEN: usize = 11;
pub const CRC_LEN: usize = 4;
pub const MAX_PAYLOAD: usize = 16 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Weights = 1,
    Epsilons = 2,
    Experience = 3,
    Control = 4,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(MsgType::Weights),
            2 => Some(MsgType::Epsilons),
            3 => Some(MsgType::Experience),
            4 => Some(MsgType::Control),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub seq: u32,
    pub payload: Vec<u8>,
}

/// Serialize one frame; the CRC-32 covers header and payload.
pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, LinkError> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(LinkError::Oversize(frame.payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + frame.payload.len() + CRC_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(frame.msg_type as u8);
    out.extend_from_slice(&frame.seq.to_le_bytes());
    out.extend_from_slice(&(frame.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&frame.payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Error counters kept by the decoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecoderStats {
    pub frames: u64,
    pub crc_dropped: u64,
    pub unknown_type: u64,
    /// Bytes skipped while searching for a frame start.
    pub resync_bytes: u64,
}

/// Incremental frame decoder: feed arbitrary chunks, pull whole frames.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    start: usize,
    stats: DecoderStats,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> DecoderStats {
        self.stats
    }

    pub fn buffered(&self) -> usize {
        self.buf.len() - self.start
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start * 2 >= self.buf.len() {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    fn consume(&mut self, n: usize) {
        self.start += n;
        if self.start == self.buf.len() {
            self.buf.clear();
            self.start = 0;
        }
    }

    /// Next complete frame, `Ok(None)` if more bytes are needed. Corrupt
    /// frames are dropped and counted; an oversize length is fatal.
    pub fn next_frame(&mut self) -> Result<Option<Frame>, LinkError> {
        loop {
            let data = &self.buf[self.start..];
            if data.len() < 2 {
                if data.len() == 1 && data[0] != MAGIC[0] {
                    self.stats.resync_bytes += 1;
                    self.consume(1);
                }
                return Ok(None);
            }
            if data[..2] != MAGIC {
                let skip = data
                    .windows(2)
                    .position(|w| w == MAGIC)
                    .unwrap_or(data.len() - 1 + usize::from(data[data.len() - 1] != MAGIC[0]));
                self.stats.resync_bytes += skip as u64;
                self.consume(skip);
                continue;
            }
            if data.len() < HEADER_LEN {
                return Ok(None);
            }
            let len = u32::from_le_bytes(data[7..11].try_into().expect("4 bytes")) as usize;
            if len > MAX_PAYLOAD {
                return Err(LinkError::Oversize(len));
            }
            let total = HEADER_LEN + len + CRC_LEN;
            if data.len() < total {
                return Ok(None);
            }
            let body = &data[..HEADER_LEN + len];
            let crc = u32::from_le_bytes(data[HEADER_LEN + len..total].try_into().expect("4 bytes"));
            if crc32fast::hash(body) != crc {
                self.stats.crc_dropped += 1;
                self.consume(total);
                continue;
            }
            let Some(msg_type) = MsgType::from_u8(data[2]) else {
                self.stats.unknown_type += 1;
                self.consume(total);
                continue;
            };
            let frame = Frame {
                msg_type,
                seq: u32::from_le_bytes(data[3..7].try_into().expect("4 bytes")),
                payload: data[HEADER_LEN..HEADER_LEN + len].to_vec(),
            };
            self.consume(total);
            self.stats.frames += 1;
            return Ok(Some(frame));
        }
    }
}
