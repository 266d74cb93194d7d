//! Deterministic multi-vehicle driving simulator and protocol library for
//! occlusion-driven cooperative perception experiments.
//!
//! The crate simulates pre-crash driving scenarios in which a truck blocks
//! the ego vehicle's line of sight to a crossing vehicle, and evaluates how
//! much a utility-based two-round peer-selection protocol improves episode
//! outcomes over random peer selection, at matched communication budgets.

pub mod campaign;
pub mod episode;
pub mod geometry;
pub mod lidar;
pub mod perception;
pub mod metrics;
pub mod policy;
pub mod scenarios;
pub mod protocol;
pub mod world;

pub use geometry::{OrientedBox, Pose2D};
pub use world::{ControlSignal, EpisodeOutcome, GoalRegion, OutcomeStatus, VehicleId, WorldState};
