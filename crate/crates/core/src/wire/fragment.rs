use std::collections::{HashMap, VecDeque};
use std::time::{Duration, Instant};

use super::{SignalFrame, WireError};

pub const FRAGMENT_MAGIC: [u8; 2] = *b"IF";
/// magic(2) frame_id(4) frag_index(2) frag_count(2) slice_len(2)
pub const FRAGMENT_HEADER_LEN: usize = 12;
/// Largest UDP/IPv4 payload.
pub const MAX_DATAGRAM: usize = 65507;

/// One UDP datagram's worth of an encoded frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub frame_id: u32,
    pub frag_index: u16,
    pub frag_count: u16,
    pub payload: Vec<u8>,
}

impl Fragment {
    pub fn to_datagram(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAGMENT_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&FRAGMENT_MAGIC);
        out.extend_from_slice(&self.frame_id.to_le_bytes());
        out.extend_from_slice(&self.frag_index.to_le_bytes());
        out.extend_from_slice(&self.frag_count.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn parse(datagram: &[u8]) -> Result<Self, WireError> {
        if datagram.len() < FRAGMENT_HEADER_LEN {
            return Err(WireError::Truncated {
                needed: FRAGMENT_HEADER_LEN,
                got: datagram.len(),
            });
        }
        if datagram[0..2] != FRAGMENT_MAGIC {
            return Err(WireError::BadMagic);
        }
        let frame_id = u32::from_le_bytes(datagram[2..6].try_into().unwrap());
        let frag_index = u16::from_le_bytes([datagram[6], datagram[7]]);
        let frag_count = u16::from_le_bytes([datagram[8], datagram[9]]);
        let len = u16::from_le_bytes([datagram[10], datagram[11]]) as usize;
        if frag_count == 0 || frag_index >= frag_count {
            return Err(WireError::InvalidFragment("index out of range"));
        }
        if datagram.len() != FRAGMENT_HEADER_LEN + len {
            return Err(WireError::InvalidFragment(
                "length field disagrees with datagram",
            ));
        }
        Ok(Fragment {
            frame_id,
            frag_index,
            frag_count,
            payload: datagram[FRAGMENT_HEADER_LEN..].to_vec(),
        })
    }
}

/// Splits `bytes` into fragments whose datagrams are at most `mtu` bytes.
///
/// An empty input still produces one (header-only) fragment.
pub fn fragment(bytes: &[u8], mtu: usize, frame_id: u32) -> Result<Vec<Fragment>, WireError> {
    if mtu <= FRAGMENT_HEADER_LEN || mtu > MAX_DATAGRAM {
        return Err(WireError::InvalidMtu(mtu));
    }
    let slice = mtu - FRAGMENT_HEADER_LEN;
    let count = bytes.len().div_ceil(slice).max(1);
    if count > u16::MAX as usize {
        return Err(WireError::TooManyFragments {
            len: bytes.len(),
            mtu,
        });
    }
    if bytes.is_empty() {
        return Ok(vec![Fragment {
            frame_id,
            frag_index: 0,
            frag_count: 1,
            payload: Vec::new(),
        }]);
    }
    Ok(bytes
        .chunks(slice)
        .enumerate()
        .map(|(i, chunk)| Fragment {
            frame_id,
            frag_index: i as u16,
            frag_count: count as u16,
            payload: chunk.to_vec(),
        })
        .collect())
}

/// Per-sender frame id counter plus MTU, so callers only hand over frames.
#[derive(Debug, Clone)]
pub struct Fragmenter {
    mtu: usize,
    next_id: u32,
}

impl Fragmenter {
    pub fn new(mtu: usize) -> Result<Self, WireError> {
        if mtu <= FRAGMENT_HEADER_LEN || mtu > MAX_DATAGRAM {
            return Err(WireError::InvalidMtu(mtu));
        }
        Ok(Fragmenter { mtu, next_id: 0 })
    }

    /// Encodes `frame` and returns the datagrams to send, in order.
    pub fn datagrams(&mut self, frame: &SignalFrame) -> Result<Vec<Vec<u8>>, WireError> {
        let bytes = frame.encode()?;
        let id = self.next_id;
        self.next_id = self.next_id.wrapping_add(1);
        Ok(fragment(&bytes, self.mtu, id)?
            .iter()
            .map(Fragment::to_datagram)
            .collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReassemblyConfig {
    /// A partial frame older than this is dropped.
    pub timeout: Duration,
    /// A partial frame is dropped once this many newer frames have completed.
    pub max_newer_completed: u32,
}

impl Default for ReassemblyConfig {
    fn default() -> Self {
        ReassemblyConfig {
            timeout: Duration::from_millis(10),
            max_newer_completed: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReassemblyStats {
    pub completed: u64,
    pub dropped: u64,
    pub duplicates: u64,
    pub protocol_errors: u64,
}

#[derive(Debug)]
pub enum Reassembly {
    Complete(SignalFrame),
    Pending,
    /// The fragment caused its frame to be discarded (conflict or bad frame).
    Dropped,
}

struct Partial {
    frag_count: u16,
    pieces: Vec<Option<Vec<u8>>>,
    received: u16,
    first_seen: Instant,
    newer_completed: u32,
}

/// Collects fragments into frames. A frame is delivered whole or not at all.
pub struct ReassemblyTable {
    config: ReassemblyConfig,
    partials: HashMap<u32, Partial>,
    finished: VecDeque<u32>,
    stats: ReassemblyStats,
}

const FINISHED_MEMORY: usize = 256;

/// Serial-number comparison so ids keep ordering across wraparound.
fn is_newer(a: u32, b: u32) -> bool {
    (a.wrapping_sub(b) as i32) > 0
}

impl ReassemblyTable {
    pub fn new(config: ReassemblyConfig) -> Self {
        ReassemblyTable {
            config,
            partials: HashMap::new(),
            finished: VecDeque::new(),
            stats: ReassemblyStats::default(),
        }
    }

    pub fn stats(&self) -> ReassemblyStats {
        self.stats
    }

    pub fn pending(&self) -> usize {
        self.partials.len()
    }

    fn remember(&mut self, id: u32) {
        if self.finished.len() == FINISHED_MEMORY {
            self.finished.pop_front();
        }
        self.finished.push_back(id);
    }

    fn drop_partial(&mut self, id: u32) {
        if self.partials.remove(&id).is_some() {
            self.stats.dropped += 1;
            self.remember(id);
        }
    }

    /// Drops partial frames whose reassembly timeout has elapsed.
    pub fn expire(&mut self, now: Instant) -> usize {
        let timeout = self.config.timeout;
        let stale: Vec<u32> = self
            .partials
            .iter()
            .filter(|(_, p)| now.saturating_duration_since(p.first_seen) >= timeout)
            .map(|(id, _)| *id)
            .collect();
        for id in &stale {
            self.drop_partial(*id);
        }
        stale.len()
    }

    /// Parses a raw datagram and feeds it in. Unparseable datagrams count as
    /// protocol errors.
    pub fn push_datagram(&mut self, datagram: &[u8], now: Instant) -> Reassembly {
        match Fragment::parse(datagram) {
            Ok(frag) => self.push(frag, now),
            Err(_) => {
                self.stats.protocol_errors += 1;
                Reassembly::Dropped
            }
        }
    }

    pub fn push(&mut self, frag: Fragment, now: Instant) -> Reassembly {
        self.expire(now);
        let id = frag.frame_id;
        if frag.frag_count == 0 || frag.frag_index >= frag.frag_count {
            self.stats.protocol_errors += 1;
            return Reassembly::Dropped;
        }
        if self.finished.contains(&id) {
            self.stats.duplicates += 1;
            return Reassembly::Pending;
        }

        let partial = self.partials.entry(id).or_insert_with(|| Partial {
            frag_count: frag.frag_count,
            pieces: vec![None; frag.frag_count as usize],
            received: 0,
            first_seen: now,
            newer_completed: 0,
        });
        if partial.frag_count != frag.frag_count {
            self.stats.protocol_errors += 1;
            self.drop_partial(id);
            return Reassembly::Dropped;
        }
        let slot = &mut partial.pieces[frag.frag_index as usize];
        if slot.is_some() {
            self.stats.duplicates += 1;
            return Reassembly::Pending;
        }
        *slot = Some(frag.payload);
        partial.received += 1;
        if partial.received < partial.frag_count {
            return Reassembly::Pending;
        }

        let partial = self.partials.remove(&id).expect("entry exists");
        self.remember(id);
        let bytes: Vec<u8> = partial.pieces.into_iter().flatten().flatten().collect();

        let limit = self.config.max_newer_completed;
        let mut evicted = Vec::new();
        for (other, p) in self.partials.iter_mut() {
            if is_newer(id, *other) {
                p.newer_completed += 1;
                if p.newer_completed >= limit {
                    evicted.push(*other);
                }
            }
        }
        for other in evicted {
            self.drop_partial(other);
        }

        match SignalFrame::decode(&bytes) {
            Ok(frame) => {
                self.stats.completed += 1;
                Reassembly::Complete(frame)
            }
            Err(_) => {
                self.stats.protocol_errors += 1;
                self.stats.dropped += 1;
                Reassembly::Dropped
            }
        }
    }
}
