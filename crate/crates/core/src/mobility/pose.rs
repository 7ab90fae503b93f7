use std::sync::{Arc, RwLock};

use super::geometry::GeoPose;
use crate::vradio::host_now_ns;

/// Longest time a pose is carried forward along its velocity before it is
/// held in place.
pub const MAX_EXTRAPOLATION_NS: i64 = 200_000_000;

/// Latest-pose slot written by one telemetry source and read by any number of
/// processing threads.
#[derive(Debug, Clone, Default)]
pub struct PoseSlot {
    inner: Arc<RwLock<Option<GeoPose>>>,
}

impl PoseSlot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, pose: GeoPose) {
        *self.inner.write().unwrap() = Some(pose);
    }

    /// Applies a partial update (e.g. attitude only) to the stored pose.
    pub fn update(&self, f: impl FnOnce(&mut GeoPose)) {
        let mut g = self.inner.write().unwrap();
        let mut p = g.unwrap_or_default();
        f(&mut p);
        *g = Some(p);
    }

    pub fn latest(&self) -> Option<GeoPose> {
        *self.inner.read().unwrap()
    }

    /// Pose at host time `at_ns`, extrapolated for at most 200 ms.
    pub fn at(&self, at_ns: i64) -> Option<GeoPose> {
        let p = self.latest()?;
        let dt = (at_ns - p.timestamp).clamp(0, MAX_EXTRAPOLATION_NS);
        if dt == 0 || p.velocity == [0.0; 3] {
            return Some(p);
        }
        Some(p.extrapolate(dt as f64 / 1e9))
    }

    pub fn now(&self) -> Option<GeoPose> {
        self.at(host_now_ns())
    }
}
