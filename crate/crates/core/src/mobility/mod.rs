//! Node positions and orientations, and the link geometry derived from them.

pub mod geodesy;
pub mod geometry;
pub mod mavlink;
pub mod pose;
pub mod trajectory;
pub mod vehicle;

pub use geodesy::{ecef_to_geodetic, enu_to_geodetic, geodetic_to_ecef, geodetic_to_enu, Geodetic};
pub use geometry::{link_geometry, link_geometry_enu, Angles, GeoPose, LinkGeometry};
pub use mavlink::{parse_position_update, MavMessage, MavParser};
pub use pose::PoseSlot;
pub use trajectory::{Trajectory, Waypoint};
pub use vehicle::VehicleConnector;

#[derive(Debug, thiserror::Error)]
pub enum MobilityError {
    #[error("trajectory needs at least one waypoint")]
    EmptyTrajectory,
    #[error("waypoint speed must be positive, got {0}")]
    BadSpeed(f64),
    #[error("trajectory file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
