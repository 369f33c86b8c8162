//! Sagittal-plane gait trajectory engine for a powered lower-limb exoskeleton.
//!
//! Layers, bottom up:
//! - [`kinematics`]: planar leg forward/inverse kinematics
//! - [`minjerk`]: quintic minimum-jerk segments and piecewise trajectories
//! - [`params`]: gait parameter sets, presets and the config file format
//! - [`planner`]: per-step swing, stance and transfer trajectories
//! - [`engine`]: the trigger-driven step state machine
//! - [`trace`]: scripted runs, CSV export and step normalization

pub mod engine;
pub mod error;
pub mod kinematics;
pub mod minjerk;
pub mod params;
pub mod planner;
pub mod terrain;
pub mod trace;


pub use engine::{Engine, EngineState, Facing, Phase, Side, SupportSide};
pub use error::{EngineError, KinematicsError, ParamError, PlanError, TraceError, TrajectoryError};
pub use kinematics::{JointAngles, JointLimits, JointState, LegGeometry, PlanarPoint};
pub use minjerk::{JointTrajectory, QuinticSegment, Trajectory};
pub use params::{GaitParameters, ParameterSet, ParameterStore};
pub use planner::{Behavior, StepPlan};
