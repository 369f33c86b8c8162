//! Trigger-driven step state machine.
//!
//! The engine stands until the pilot triggers a step, then plays the planned
//! step tick by tick. A trigger that arrives in the last
//! [`TRIGGER_WINDOW`] seconds of a step is latched and starts the next step
//! without any standing dwell.
//!
//! Steps are planned when they start, from the posture the previous step
//! ended in and with the parameter set active at that moment. Time inside a
//! step is `ticks * dt`, never an accumulated sum, so runs are reproducible
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::kinematics::{forward_kinematics, JointLimits, JointState, LegGeometry, PlanarPoint};
use crate::params::{GaitParameters, ParameterStore};
use crate::planner::{plan_step, standing_posture, Behavior, BodyPose, Role, StepPhase, StepPlan};

pub use crate::planner::Facing;

/// A trigger is accepted this long before the end of a step (s).
pub const TRIGGER_WINDOW: f64 = 0.25;
pub const DEFAULT_DT: f64 = 0.002;
/// Slack on phase boundaries and the trigger window, far below any dt.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Standing,
    Transfer,
    Swing,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Standing => "standing",
            Phase::Transfer => "transfer",
            Phase::Swing => "swing",
        }
    }
}

impl From<StepPhase> for Phase {
    fn from(p: StepPhase) -> Self {
        match p {
            StepPhase::Transfer => Phase::Transfer,
            StepPhase::Swing => Phase::Swing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportSide {
    Left,
    Right,
    Double,
}

impl From<Side> for SupportSide {
    fn from(s: Side) -> Self {
        match s {
            Side::Left => SupportSide::Left,
            Side::Right => SupportSide::Right,
        }
    }
}

/// Snapshot of the engine after a tick. Plain data, safe to hand to other
/// threads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    /// Engine clock (s).
    pub time: f64,
    pub left: JointState,
    pub right: JointState,
    pub support_side: SupportSide,
    pub phase: Phase,
    pub phase_elapsed: f64,
    pub phase_duration: f64,
    /// Time left in the current step; zero while standing.
    pub step_remaining: f64,
    pub active_behavior: Behavior,
    pub pending_trigger: bool,
    pub hip_frame_x: f64,
    pub hip_frame_z: f64,
    pub step_count: u64,
    pub facing: Facing,
    /// Leg that is behind in the current standing posture.
    pub trailing_side: Side,
}

impl EngineState {
    pub fn leg(&self, side: Side) -> &JointState {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Foot reference point of one leg in world coordinates.
    pub fn foot(&self, geom: &LegGeometry, side: Side) -> PlanarPoint {
        let p = forward_kinematics(geom, &self.leg(side).angles);
        PlanarPoint::new(self.hip_frame_x + p.x, self.hip_frame_z + p.z - geom.ankle_height)
    }

    /// Seconds until a trigger would be accepted; zero when it would be now.
    pub fn time_to_trigger_window(&self) -> f64 {
        if self.phase == Phase::Standing {
            0.0
        } else {
            (self.step_remaining - TRIGGER_WINDOW).max(0.0)
        }
    }
}

/// The trigger acceptance rule: always while standing, otherwise only in the
/// last phase of a step with at most [`TRIGGER_WINDOW`] seconds left.
pub fn trigger_window_open(phase: Phase, in_last_phase: bool, remaining: f64) -> bool {
    match phase {
        Phase::Standing => true,
        _ => in_last_phase && remaining <= TRIGGER_WINDOW + TIME_EPS,
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub geometry: LegGeometry,
    pub limits: JointLimits,
    pub dt: f64,
    pub behavior: Behavior,
    pub store: ParameterStore,
    /// Parameter set to start with instead of the behavior's preset.
    pub params_name: Option<String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            geometry: LegGeometry::default(),
            limits: JointLimits::default(),
            dt: DEFAULT_DT,
            behavior: Behavior::FlatWalk,
            store: ParameterStore::new(),
            params_name: None,
        }
    }
}

#[derive(Debug, Clone)]
struct ActiveStep {
    plan: StepPlan,
    ticks: u64,
}

#[derive(Debug, Clone)]
pub struct Engine {
    geometry: LegGeometry,
    limits: JointLimits,
    dt: f64,
    store: ParameterStore,
    params_name: String,
    pose: BodyPose,
    step: Option<ActiveStep>,
    ticks: u64,
    state: EngineState,
}

impl Engine {
    /// Engine standing in the starting posture of `config.behavior`, trailing
    /// foot at the origin and the left leg behind.
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        if !(config.dt > 0.0) {
            return Err(EngineError::NonpositivePeriod(config.dt));
        }
        config.geometry.validate().map_err(crate::error::PlanError::from)?;
        let params_name = config
            .params_name
            .clone()
            .unwrap_or_else(|| config.behavior.preset().to_string());
        let params = params_for(&config.store, &params_name)?;
        let pose = initial_posture(config.behavior, &params, &config.geometry)?;
        let mut engine = Self {
            geometry: config.geometry,
            limits: config.limits,
            dt: config.dt,
            store: config.store,
            params_name,
            pose,
            step: None,
            ticks: 0,
            state: EngineState {
                time: 0.0,
                left: JointState::default(),
                right: JointState::default(),
                support_side: SupportSide::Double,
                phase: Phase::Standing,
                phase_elapsed: 0.0,
                phase_duration: 0.0,
                step_remaining: 0.0,
                active_behavior: config.behavior,
                pending_trigger: false,
                hip_frame_x: 0.0,
                hip_frame_z: 0.0,
                step_count: 0,
                facing: config.behavior.facing(),
                trailing_side: Side::Left,
            },
        };
        engine.hold();
        Ok(engine)
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn geometry(&self) -> &LegGeometry {
        &self.geometry
    }

    pub fn limits(&self) -> &JointLimits {
        &self.limits
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn params_name(&self) -> &str {
        &self.params_name
    }

    /// Parameters the next step will be planned with.
    pub fn params(&self) -> GaitParameters {
        self.store.params(&self.params_name).expect("active set exists")
    }

    /// Plan of the step in progress.
    pub fn current_plan(&self) -> Option<&StepPlan> {
        self.step.as_ref().map(|s| &s.plan)
    }

    /// Standing posture the engine is in, or will return to.
    pub fn pose(&self) -> &BodyPose {
        &self.pose
    }

    pub fn trigger_window_open(&self) -> bool {
        if !self.state.active_behavior.steps() {
            return false;
        }
        let in_last = match &self.step {
            Some(s) => self.state.phase == Phase::from(s.plan.last_phase()),
            None => true,
        };
        trigger_window_open(self.state.phase, in_last, self.state.step_remaining)
    }

    /// Request a step. Returns whether the request was accepted; an accepted
    /// trigger starts a step at the next tick or as soon as the current one
    /// ends.
    pub fn trigger(&mut self) -> bool {
        let accepted = self.trigger_window_open();
        if accepted {
            self.state.pending_trigger = true;
        }
        accepted
    }

    pub fn select_behavior(&mut self, behavior: Behavior) -> Result<(), EngineError> {
        self.require_standing()?;
        if behavior.steps() && behavior.facing() != self.state.facing {
            return Err(EngineError::IncompatibleBehaviorTransition(format!(
                "{behavior} needs facing {:?} but the pilot faces {:?}; reorient first",
                behavior.facing(),
                self.state.facing
            )));
        }
        let name = behavior.preset().to_string();
        let params = params_for(&self.store, &name)?;
        if let Behavior::SteppingStones(len) = behavior {
            params.with_step_length(len).map_err(|v| {
                crate::error::PlanError::InvalidParameters(
                    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
                )
            })?;
        }
        self.params_name = name;
        self.state.active_behavior = behavior;
        self.state.pending_trigger = false;
        Ok(())
    }

    /// Acknowledge that the pilot has turned around. The legs do not move;
    /// only the behaviors that may be selected change.
    pub fn reorient(&mut self, facing: Facing) -> Result<(), EngineError> {
        self.require_standing()?;
        if self.state.facing != facing {
            self.state.facing = facing;
            self.state.active_behavior = Behavior::Stand;
            self.state.pending_trigger = false;
        }
        Ok(())
    }

    /// Use a named parameter set for the following steps.
    pub fn set_params(&mut self, name: &str) -> Result<(), EngineError> {
        params_for(&self.store, name)?;
        self.params_name = name.to_string();
        Ok(())
    }

    /// Advance by one control period. Planning errors leave the engine
    /// standing in its last posture.
    pub fn tick(&mut self) -> Result<&EngineState, EngineError> {
        self.ticks += 1;
        self.state.time = self.ticks as f64 * self.dt;
        let result = match self.step.take() {
            None if self.state.pending_trigger => self.start_step(1),
            None => {
                self.hold();
                Ok(())
            }
            Some(mut step) => {
                step.ticks += 1;
                if step.ticks as f64 * self.dt >= step.plan.duration() - TIME_EPS {
                    self.finish_step(&step.plan);
                    if self.state.pending_trigger {
                        self.start_step(0)
                    } else {
                        self.hold();
                        Ok(())
                    }
                } else {
                    self.step = Some(step);
                    self.sample();
                    Ok(())
                }
            }
        };
        result.map(|()| &self.state)
    }

    fn require_standing(&self) -> Result<(), EngineError> {
        match self.state.phase {
            Phase::Standing => Ok(()),
            p => Err(EngineError::BehaviorChangeWhileMoving(p.name())),
        }
    }

    fn start_step(&mut self, ticks: u64) -> Result<(), EngineError> {
        self.state.pending_trigger = false;
        let params = self.params();
        match plan_step(self.state.active_behavior, &params, &self.geometry, &self.limits, &self.pose) {
            Ok(plan) => {
                self.step = Some(ActiveStep { plan, ticks });
                self.sample();
                Ok(())
            }
            Err(e) => {
                self.hold();
                Err(e.into())
            }
        }
    }

    fn finish_step(&mut self, plan: &StepPlan) {
        self.pose = plan.end;
        self.state.trailing_side = self.state.trailing_side.other();
        self.state.step_count += 1;
    }

    fn moving_side(&self, plan: &StepPlan) -> Side {
        match plan.moving_role {
            Role::Trailing => self.state.trailing_side,
            Role::Leading => self.state.trailing_side.other(),
        }
    }

    fn sample(&mut self) {
        let step = self.step.as_ref().expect("sampling needs a step");
        let plan = &step.plan;
        let t = (step.ticks as f64 * self.dt).min(plan.duration());
        let idx = plan
            .phases
            .iter()
            .rposition(|p| t >= p.start - TIME_EPS)
            .unwrap_or(0);
        let phase = &plan.phases[idx];
        let elapsed = (t - phase.start).clamp(0.0, phase.duration());
        let moving = phase.moving.evaluate_clamped(elapsed);
        let stance = plan.stance_at(t);
        let hip = plan.hip_at(t);
        let moving_side = self.moving_side(plan);
        let (left, right) = match moving_side {
            Side::Left => (moving, stance),
            Side::Right => (stance, moving),
        };
        let s = &mut self.state;
        s.left = left;
        s.right = right;
        s.phase = phase.phase.into();
        s.phase_elapsed = elapsed;
        s.phase_duration = phase.duration();
        s.step_remaining = plan.duration() - t;
        s.support_side = match phase.phase {
            StepPhase::Transfer => SupportSide::Double,
            StepPhase::Swing => moving_side.other().into(),
        };
        s.hip_frame_x = hip.x;
        s.hip_frame_z = hip.z;
    }

    fn hold(&mut self) {
        let trailing = JointState::at_rest(self.pose.trailing);
        let leading = JointState::at_rest(self.pose.leading);
        let s = &mut self.state;
        (s.left, s.right) = match s.trailing_side {
            Side::Left => (trailing, leading),
            Side::Right => (leading, trailing),
        };
        s.phase = Phase::Standing;
        s.phase_elapsed = 0.0;
        s.phase_duration = 0.0;
        s.step_remaining = 0.0;
        s.support_side = SupportSide::Double;
        s.hip_frame_x = self.pose.hip.x;
        s.hip_frame_z = self.pose.hip.z;
    }
}

fn params_for(store: &ParameterStore, name: &str) -> Result<GaitParameters, EngineError> {
    store
        .params(name)
        .ok_or_else(|| EngineError::UnknownParameterSet(name.to_string()))
}

fn initial_posture(behavior: Behavior, params: &GaitParameters, geom: &LegGeometry) -> Result<BodyPose, EngineError> {
    // descent starts from the posture an ascent ends in
    let b = match behavior {
        Behavior::StairsDown => Behavior::StairsUp,
        b => b,
    };
    Ok(standing_posture(b, params, geom, (0.0, 0.0))?)
}
