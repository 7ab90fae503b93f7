use serde::{Deserialize, Serialize};

use super::WireError;
use crate::vradio::format::{cf32_to_sc16, sc16_to_cf32};
use crate::Cf32;

pub const FRAME_MAGIC: [u8; 4] = *b"IQTW";
pub const FRAME_VERSION: u8 = 1;
/// magic(4) version(1) format(1) channels(2) stream(4) source(4)
/// emulated(8) wallclock(8) samples(4)
pub const FRAME_HEADER_LEN: usize = 36;

/// Sample representation, used both for CPU buffers and on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SampleFormat {
    /// Complex float32, 8 bytes per sample.
    #[default]
    #[serde(rename = "fc32")]
    Cf32,
    /// Complex int16, 4 bytes per sample, full scale 32767.
    #[serde(rename = "sc16")]
    Ci16,
}

impl SampleFormat {
    pub const fn code(self) -> u8 {
        match self {
            SampleFormat::Cf32 => 0,
            SampleFormat::Ci16 => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, WireError> {
        match code {
            0 => Ok(SampleFormat::Cf32),
            1 => Ok(SampleFormat::Ci16),
            other => Err(WireError::UnknownFormat(other)),
        }
    }

    pub const fn bytes_per_complex(self) -> usize {
        match self {
            SampleFormat::Cf32 => 8,
            SampleFormat::Ci16 => 4,
        }
    }
}

/// Timestamped block of channel-interleaved baseband samples.
///
/// `stream_id` names the stream this frame belongs to on the current hop
/// (the sending TX stream towards the engine, the destination RX stream on the
/// way back). `source_id` always names the originating TX stream and is used
/// to order contributors deterministically at the receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalFrame {
    pub stream_id: u32,
    pub source_id: u32,
    /// Nanoseconds on the radio timeline.
    pub emulated_tx_time: i64,
    /// Nanoseconds on the host monotonic clock when the frame was sent.
    pub wallclock_tx_time: i64,
    pub num_samples: u32,
    pub num_channels: u16,
    pub sample_format: SampleFormat,
    /// Sample-major interleaving: s0ch0, s0ch1, ..., s1ch0, ...
    pub payload: Vec<u8>,
}

impl SignalFrame {
    /// Builds a frame from CPU samples, converting them to `format`.
    pub fn from_samples(
        format: SampleFormat,
        num_channels: u16,
        samples: &[Cf32],
    ) -> Result<Self, WireError> {
        let channels = num_channels as usize;
        if channels == 0 || samples.is_empty() {
            return Err(WireError::EmptyFrame);
        }
        if samples.len() % channels != 0 {
            return Err(WireError::ChannelMismatch {
                samples: samples.len(),
                channels,
            });
        }
        Ok(SignalFrame {
            stream_id: 0,
            source_id: 0,
            emulated_tx_time: 0,
            wallclock_tx_time: 0,
            num_samples: (samples.len() / channels) as u32,
            num_channels,
            sample_format: format,
            payload: samples_to_bytes(format, samples),
        })
    }

    /// Decodes the payload into CPU samples.
    pub fn samples(&self) -> Vec<Cf32> {
        bytes_to_samples(self.sample_format, &self.payload)
    }

    /// Replaces the payload, keeping the frame's current sample format.
    pub fn set_samples(&mut self, num_channels: u16, samples: &[Cf32]) {
        self.num_channels = num_channels;
        self.num_samples = (samples.len() / num_channels.max(1) as usize) as u32;
        self.payload = samples_to_bytes(self.sample_format, samples);
    }

    pub fn expected_payload_len(&self) -> usize {
        self.num_samples as usize
            * self.num_channels as usize
            * self.sample_format.bytes_per_complex()
    }

    fn check(&self) -> Result<(), WireError> {
        if self.num_samples == 0 || self.num_channels == 0 {
            return Err(WireError::EmptyFrame);
        }
        let expected = self.expected_payload_len();
        if expected != self.payload.len() {
            return Err(WireError::PayloadMismatch {
                expected,
                actual: self.payload.len(),
            });
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        self.check()?;
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&FRAME_MAGIC);
        out.push(FRAME_VERSION);
        out.push(self.sample_format.code());
        out.extend_from_slice(&self.num_channels.to_le_bytes());
        out.extend_from_slice(&self.stream_id.to_le_bytes());
        out.extend_from_slice(&self.source_id.to_le_bytes());
        out.extend_from_slice(&self.emulated_tx_time.to_le_bytes());
        out.extend_from_slice(&self.wallclock_tx_time.to_le_bytes());
        out.extend_from_slice(&self.num_samples.to_le_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(WireError::Truncated {
                needed: FRAME_HEADER_LEN,
                got: bytes.len(),
            });
        }
        if bytes[0..4] != FRAME_MAGIC {
            return Err(WireError::BadMagic);
        }
        if bytes[4] != FRAME_VERSION {
            return Err(WireError::UnsupportedVersion(bytes[4]));
        }
        let frame = SignalFrame {
            sample_format: SampleFormat::from_code(bytes[5])?,
            num_channels: u16::from_le_bytes([bytes[6], bytes[7]]),
            stream_id: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
            source_id: u32::from_le_bytes(bytes[12..16].try_into().unwrap()),
            emulated_tx_time: i64::from_le_bytes(bytes[16..24].try_into().unwrap()),
            wallclock_tx_time: i64::from_le_bytes(bytes[24..32].try_into().unwrap()),
            num_samples: u32::from_le_bytes(bytes[32..36].try_into().unwrap()),
            payload: bytes[FRAME_HEADER_LEN..].to_vec(),
        };
        frame.check()?;
        Ok(frame)
    }
}

fn samples_to_bytes(format: SampleFormat, samples: &[Cf32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * format.bytes_per_complex());
    match format {
        SampleFormat::Cf32 => {
            for s in samples {
                out.extend_from_slice(&s.re.to_le_bytes());
                out.extend_from_slice(&s.im.to_le_bytes());
            }
        }
        SampleFormat::Ci16 => {
            for s in samples {
                let q = cf32_to_sc16(*s);
                out.extend_from_slice(&q.re.to_le_bytes());
                out.extend_from_slice(&q.im.to_le_bytes());
            }
        }
    }
    out
}

fn bytes_to_samples(format: SampleFormat, bytes: &[u8]) -> Vec<Cf32> {
    match format {
        SampleFormat::Cf32 => bytes
            .chunks_exact(8)
            .map(|c| {
                Cf32::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                )
            })
            .collect(),
        SampleFormat::Ci16 => bytes
            .chunks_exact(4)
            .map(|c| {
                sc16_to_cf32(num_complex::Complex::new(
                    i16::from_le_bytes([c[0], c[1]]),
                    i16::from_le_bytes([c[2], c[3]]),
                ))
            })
            .collect(),
    }
}
