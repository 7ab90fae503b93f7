//! Receive-only MAVLink v1/v2 framing for the two telemetry messages the
//! engine consumes: GLOBAL_POSITION_INT and ATTITUDE.

const STX_V1: u8 = 0xFE;
const STX_V2: u8 = 0xFD;
const MSG_ATTITUDE: u32 = 30;
const MSG_GLOBAL_POSITION_INT: u32 = 33;
const SIGNED_FLAG: u8 = 0x01;
const SIGNATURE_LEN: usize = 13;

fn crc_extra(msg_id: u32) -> Option<u8> {
    match msg_id {
        MSG_ATTITUDE => Some(39),
        MSG_GLOBAL_POSITION_INT => Some(104),
        _ => None,
    }
}

/// CRC-16/MCRF4XX as used by MAVLink.
pub fn x25_crc(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bytes {
        crc = x25_step(crc, b);
    }
    crc
}

fn x25_step(crc: u16, b: u8) -> u16 {
    let mut tmp = b ^ (crc & 0xFF) as u8;
    tmp ^= tmp << 4;
    let t = tmp as u16;
    (crc >> 8) ^ (t << 8) ^ (t << 3) ^ (t >> 4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalPositionInt {
    pub time_boot_ms: u32,
    /// degrees
    pub lat: f64,
    pub lon: f64,
    /// metres above mean sea level
    pub alt_msl: f64,
    /// metres above home
    pub relative_alt: f64,
    /// north, east, down in m/s
    pub vel_ned: [f64; 3],
    /// degrees, `None` when unknown
    pub heading: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attitude {
    pub time_boot_ms: u32,
    pub roll: f32,
    pub pitch: f32,
    pub yaw: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MavMessage {
    GlobalPosition(GlobalPositionInt),
    Attitude(Attitude),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParserStats {
    pub messages: u64,
    pub bad_checksum: u64,
    pub skipped: u64,
    /// Bytes discarded while hunting for a start marker.
    pub garbage_bytes: u64,
}

/// Incremental parser over a telemetry byte stream.
#[derive(Debug, Default)]
pub struct MavParser {
    buf: Vec<u8>,
    stats: ParserStats,
}

fn le_i32(p: &[u8], o: usize) -> i32 {
    i32::from_le_bytes([p[o], p[o + 1], p[o + 2], p[o + 3]])
}
fn le_u32(p: &[u8], o: usize) -> u32 {
    u32::from_le_bytes([p[o], p[o + 1], p[o + 2], p[o + 3]])
}
fn le_i16(p: &[u8], o: usize) -> i16 {
    i16::from_le_bytes([p[o], p[o + 1]])
}
fn le_f32(p: &[u8], o: usize) -> f32 {
    f32::from_le_bytes([p[o], p[o + 1], p[o + 2], p[o + 3]])
}

fn decode(msg_id: u32, payload: &[u8]) -> Option<MavMessage> {
    // v2 strips trailing zeros; restore the full length
    let mut p = [0u8; 28];
    let n = payload.len().min(28);
    p[..n].copy_from_slice(&payload[..n]);
    match msg_id {
        MSG_GLOBAL_POSITION_INT => {
            let hdg = u16::from_le_bytes([p[26], p[27]]);
            Some(MavMessage::GlobalPosition(GlobalPositionInt {
                time_boot_ms: le_u32(&p, 0),
                lat: le_i32(&p, 4) as f64 * 1e-7,
                lon: le_i32(&p, 8) as f64 * 1e-7,
                alt_msl: le_i32(&p, 12) as f64 * 1e-3,
                relative_alt: le_i32(&p, 16) as f64 * 1e-3,
                vel_ned: [
                    le_i16(&p, 20) as f64 * 0.01,
                    le_i16(&p, 22) as f64 * 0.01,
                    le_i16(&p, 24) as f64 * 0.01,
                ],
                heading: (hdg != u16::MAX).then(|| hdg as f64 / 100.0),
            }))
        }
        MSG_ATTITUDE => Some(MavMessage::Attitude(Attitude {
            time_boot_ms: le_u32(&p, 0),
            roll: le_f32(&p, 4),
            pitch: le_f32(&p, 8),
            yaw: le_f32(&p, 12),
        })),
        _ => None,
    }
}

enum Step {
    NeedMore,
    /// Consume this many bytes, optionally yielding a message.
    Consume(usize, Option<MavMessage>),
}

impl MavParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> ParserStats {
        self.stats
    }

    /// Feeds bytes and returns every complete, valid message they finish.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<MavMessage> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut pos = 0;
        loop {
            match self.buf[pos..]
                .iter()
                .position(|b| *b == STX_V1 || *b == STX_V2)
            {
                None => {
                    self.stats.garbage_bytes += (self.buf.len() - pos) as u64;
                    pos = self.buf.len();
                    break;
                }
                Some(skip) => {
                    self.stats.garbage_bytes += skip as u64;
                    pos += skip;
                }
            }
            match self.step(pos) {
                Step::NeedMore => break,
                Step::Consume(n, msg) => {
                    pos += n;
                    if let Some(m) = msg {
                        out.push(m);
                    }
                }
            }
        }
        self.buf.drain(..pos);
        out
    }

    fn step(&mut self, at: usize) -> Step {
        let b = &self.buf[at..];
        let v2 = b[0] == STX_V2;
        let header = if v2 { 10 } else { 6 };
        if b.len() < 2 {
            return Step::NeedMore;
        }
        let len = b[1] as usize;
        if v2 && b.len() < 3 {
            return Step::NeedMore;
        }
        let sig = if v2 && b[2] & SIGNED_FLAG != 0 {
            SIGNATURE_LEN
        } else {
            0
        };
        let total = header + len + 2 + sig;
        if b.len() < total {
            return Step::NeedMore;
        }
        let msg_id = if v2 {
            u32::from_le_bytes([b[7], b[8], b[9], 0])
        } else {
            b[5] as u32
        };
        let Some(extra) = crc_extra(msg_id) else {
            // Unknown ids cannot be checked; skip by the declared length.
            self.stats.skipped += 1;
            return Step::Consume(total, None);
        };
        let mut crc = x25_crc(&b[1..header + len]);
        crc = x25_step(crc, extra);
        let got = u16::from_le_bytes([b[header + len], b[header + len + 1]]);
        if crc != got {
            self.stats.bad_checksum += 1;
            // resynchronize on the next byte
            return Step::Consume(1, None);
        }
        if !v2 && len < 28 {
            self.stats.skipped += 1;
            return Step::Consume(total, None);
        }
        let msg = decode(msg_id, &b[header..header + len]);
        self.stats.messages += 1;
        Step::Consume(total, msg)
    }
}

/// Parses every supported message in a self-contained byte buffer.
pub fn parse_position_update(bytes: &[u8]) -> Vec<MavMessage> {
    MavParser::new().push(bytes)
}

/// Builds a MAVLink v1 frame. Used by the examples and tests to synthesize
/// telemetry.
pub fn encode_v1(seq: u8, msg_id: u8, payload: &[u8]) -> Vec<u8> {
    let mut f = vec![STX_V1, payload.len() as u8, seq, 1, 1, msg_id];
    f.extend_from_slice(payload);
    let mut crc = x25_crc(&f[1..]);
    if let Some(e) = crc_extra(msg_id as u32) {
        crc = x25_step(crc, e);
    }
    f.extend_from_slice(&crc.to_le_bytes());
    f
}

/// GLOBAL_POSITION_INT payload from SI values (degrees, metres, m/s NED).
pub fn global_position_payload(
    time_boot_ms: u32,
    lat: f64,
    lon: f64,
    alt_msl: f64,
    rel_alt: f64,
    vel_ned: [f64; 3],
) -> Vec<u8> {
    let mut p = Vec::with_capacity(28);
    p.extend_from_slice(&time_boot_ms.to_le_bytes());
    p.extend_from_slice(&((lat * 1e7).round() as i32).to_le_bytes());
    p.extend_from_slice(&((lon * 1e7).round() as i32).to_le_bytes());
    p.extend_from_slice(&((alt_msl * 1e3).round() as i32).to_le_bytes());
    p.extend_from_slice(&((rel_alt * 1e3).round() as i32).to_le_bytes());
    for v in vel_ned {
        p.extend_from_slice(&((v * 100.0).round() as i16).to_le_bytes());
    }
    p.extend_from_slice(&u16::MAX.to_le_bytes());
    p
}

pub fn attitude_payload(time_boot_ms: u32, roll: f32, pitch: f32, yaw: f32) -> Vec<u8> {
    let mut p = Vec::with_capacity(28);
    p.extend_from_slice(&time_boot_ms.to_le_bytes());
    for v in [roll, pitch, yaw, 0.0, 0.0, 0.0] {
        p.extend_from_slice(&v.to_le_bytes());
    }
    p
}
