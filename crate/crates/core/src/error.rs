use thiserror::Error;

use crate::kinematics::Joint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("target ({x:.4}, {z:.4}) is outside the reachable annulus [{min_reach:.4}, {max_reach:.4}] m")]
    UnreachableTarget {
        x: f64,
        z: f64,
        min_reach: f64,
        max_reach: f64,
    },
    #[error("jacobian is singular (|det| = {det:.3e})")]
    SingularJacobian { det: f64 },
    #[error("{joint} angle {value:.4} rad outside range of motion [{min:.4}, {max:.4}]")]
    JointLimitExceeded {
        joint: Joint,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid leg geometry: {0}")]
    InvalidGeometry(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("segment duration must be positive, got {0}")]
    NonpositiveDuration(f64),
    #[error("non-finite boundary condition")]
    NonFinite,
    #[error("time {t} outside segment domain [0, {duration}]")]
    OutOfDomain { t: f64, duration: f64 },
    #[error("junction {index}: position jump {position_jump:.3e}, velocity jump {velocity_jump:.3e}")]
    DiscontinuousJunction {
        index: usize,
        position_jump: f64,
        velocity_jump: f64,
    },
    #[error("trajectory has no segments")]
    Empty,
    #[error("joint trajectories disagree on duration: {0:?}")]
    DurationMismatch([f64; 3]),
    #[error("sample period must be positive, got {0}")]
    NonpositivePeriod(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("start and goal coincide")]
    DegenerateStep,
    #[error("waypoint {index} unreachable: {source}")]
    UnreachableWaypoint {
        index: usize,
        #[source]
        source: KinematicsError,
    },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("invalid gait parameters: {0}")]
    InvalidParameters(String),
    #[error("incompatible behavior transition: {0}")]
    IncompatibleBehaviorTransition(String),
    #[error("no weight-transfer posture exists: {0}")]
    NoTransferPosture(String),
    #[error("{joint} speed {speed:.3} rad/s exceeds the {max:.3} rad/s cap")]
    SpeedLimitExceeded { joint: Joint, speed: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("behavior can only change while standing (phase is {0})")]
    BehaviorChangeWhileMoving(&'static str),
    #[error("incompatible behavior transition: {0}")]
    IncompatibleBehaviorTransition(String),
    #[error("unknown parameter set '{0}'")]
    UnknownParameterSet(String),
    #[error("control period must be positive, got {0}")]
    NonpositivePeriod(f64),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// A single failed parameter constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub constraint: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("parameter set '{set}' failed validation: {}", join(.violations))]
    Validation {
        set: String,
        violations: Vec<Violation>,
    },
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("scripted run needs at least one step")]
    NoSteps,
    #[error("behavior '{0}' does not step")]
    IdleBehavior(String),
    #[error("need at least {needed} complete steps, found {found}")]
    InsufficientSteps { needed: usize, found: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed trace: {0}")]
    Malformed(String),
}
