//! Receiver-side time-keyed superposition buffer.
//!
//! Positions are sample indices on the receiver's sample grid. Overlapping
//! contributions are summed sample by sample, always in key order
//! `(start, source, arrival)` so the result does not depend on arrival order.

use std::collections::{BTreeMap, HashMap};

use crate::Cf32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Buffered,
    /// The frame ended before the read cursor; it was discarded.
    Late,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewindError {
    pub requested: i64,
    pub cursor: i64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BufferStats {
    pub inserted: u64,
    pub late_arrivals: u64,
    pub overflows: u64,
    pub evicted_samples: u64,
}

struct Entry {
    /// Channel-interleaved samples.
    samples: Vec<Cf32>,
    /// Leading per-channel samples already consumed or evicted.
    skip: usize,
}

impl Entry {
    fn len(&self, channels: usize) -> usize {
        self.samples.len() / channels
    }
}

type Key = (i64, u32, u64);

pub struct TimedBuffer {
    channels: usize,
    capacity: i64,
    entries: BTreeMap<Key, Entry>,
    seq: u64,
    cursor: Option<i64>,
    max_end: Option<i64>,
    overflow: bool,
    watermarks: HashMap<u32, i64>,
    stats: BufferStats,
}

fn end_of(key: &Key, e: &Entry, channels: usize) -> i64 {
    key.0 + e.len(channels) as i64
}

impl TimedBuffer {
    /// `capacity` is the largest span, in samples, held ahead of the cursor.
    pub fn new(num_channels: usize, capacity: i64) -> Self {
        TimedBuffer {
            channels: num_channels.max(1),
            capacity: capacity.max(1),
            entries: BTreeMap::new(),
            seq: 0,
            cursor: None,
            max_end: None,
            overflow: false,
            watermarks: HashMap::new(),
            stats: BufferStats::default(),
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn cursor(&self) -> Option<i64> {
        self.cursor
    }

    pub fn stats(&self) -> BufferStats {
        self.stats
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// End of the latest data received from `source`.
    pub fn watermark(&self, source: u32) -> Option<i64> {
        self.watermarks.get(&source).copied()
    }

    /// Returns and clears the latched overflow flag.
    pub fn take_overflow(&mut self) -> bool {
        std::mem::take(&mut self.overflow)
    }

    /// Samples currently buffered from the cursor (or the oldest entry) to the
    /// latest end.
    pub fn span(&self) -> i64 {
        match (self.floor(), self.max_end) {
            (Some(f), Some(e)) => (e - f).max(0),
            _ => 0,
        }
    }

    fn floor(&self) -> Option<i64> {
        self.cursor
            .or_else(|| self.entries.iter().next().map(|(k, e)| k.0 + e.skip as i64))
    }

    /// Starts streaming at `pos`: older data is discarded and the overflow
    /// latch cleared.
    pub fn start_at(&mut self, pos: i64) {
        self.discard_before(pos);
        self.cursor = Some(pos);
        self.overflow = false;
    }

    pub fn insert(&mut self, start: i64, source: u32, samples: Vec<Cf32>) -> InsertOutcome {
        let c = self.channels;
        debug_assert_eq!(samples.len() % c, 0);
        let n = (samples.len() / c) as i64;
        let end = start + n;
        if n == 0 {
            return InsertOutcome::Buffered;
        }
        let wm = self.watermarks.entry(source).or_insert(end);
        *wm = (*wm).max(end);
        if let Some(cur) = self.cursor {
            if end <= cur {
                self.stats.late_arrivals += 1;
                return InsertOutcome::Late;
            }
        }
        let skip = self.cursor.map_or(0, |cur| (cur - start).max(0) as usize);
        self.entries
            .insert((start, source, self.seq), Entry { samples, skip });
        self.seq += 1;
        self.stats.inserted += 1;
        self.max_end = Some(self.max_end.map_or(end, |m| m.max(end)));

        if self.span() > self.capacity {
            let new_floor = self.max_end.unwrap() - self.capacity;
            self.discard_before(new_floor);
            if let Some(cur) = self.cursor.as_mut() {
                *cur = (*cur).max(new_floor);
            }
            self.overflow = true;
            self.stats.overflows += 1;
        }
        InsertOutcome::Buffered
    }

    fn discard_before(&mut self, pos: i64) {
        let c = self.channels;
        let mut evicted = 0u64;
        self.entries.retain(|k, e| {
            let eff = k.0 + e.skip as i64;
            let end = end_of(k, e, c);
            if end <= pos {
                evicted += (end - eff).max(0) as u64;
                false
            } else {
                if eff < pos {
                    evicted += (pos - eff) as u64;
                    e.skip = (pos - k.0) as usize;
                }
                true
            }
        });
        self.stats.evicted_samples += evicted;
        if self.entries.is_empty() {
            self.max_end = None;
        }
    }

    /// Sums every contribution to the window `[start, start + out.len()/channels)`
    /// into `out` (which is overwritten) and advances the cursor past it.
    pub fn drain(&mut self, start: i64, out: &mut [Cf32]) -> Result<(), RewindError> {
        let c = self.channels;
        if let Some(cur) = self.cursor {
            if start < cur {
                return Err(RewindError {
                    requested: start,
                    cursor: cur,
                });
            }
        }
        self.discard_before(start);
        out.iter_mut().for_each(|s| *s = Cf32::new(0.0, 0.0));
        let n = (out.len() / c) as i64;
        let window_end = start + n;

        let mut finished = Vec::new();
        for (key, e) in self.entries.range_mut(..(window_end, 0, 0)) {
            let eff = key.0 + e.skip as i64;
            let end = key.0 + (e.samples.len() / c) as i64;
            let from = eff.max(start);
            let to = end.min(window_end);
            if from < to {
                let src = &e.samples[((from - key.0) as usize) * c..((to - key.0) as usize) * c];
                let dst = &mut out[((from - start) as usize) * c..((to - start) as usize) * c];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += *s;
                }
            }
            if end <= window_end {
                finished.push(*key);
            } else {
                e.skip = (window_end - key.0) as usize;
            }
        }
        for k in finished {
            self.entries.remove(&k);
        }
        if self.entries.is_empty() {
            self.max_end = None;
        }
        self.cursor = Some(window_end);
        Ok(())
    }
}
