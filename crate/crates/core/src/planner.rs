//! Per-step trajectory planning.
//!
//! A step starts and ends in a standing posture with both feet down. The
//! *trailing* foot is the rear one and the *leading* foot the front one. A
//! forward step has two phases:
//!
//! 1. transfer: weight moves onto the leading leg. The trailing ankle
//!    plantar-flexes (toe-off) while the trailing toe stays on the ground,
//!    and the hips move forward and up.
//! 2. swing: the trailing foot travels through four Cartesian waypoints to a
//!    new foothold ahead of the leading foot, while the leading leg
//!    straightens and rotates the hips forward over its ankle.
//!
//! All positions are world coordinates in the sagittal plane. The leading
//! ankle stays fixed for the whole step and anchors the hip frame:
//! `hip(t) = anchor - fk(stance(t))`.
//!
//! Descending stairs replays an ascent step backwards in time, with the
//! toe-off removed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::kinematics::{
    angle_from_down, forward_kinematics, inverse_kinematics, jacobian, joint_velocities_from_cartesian, rotate, Joint,
    JointAngles, JointLimits, JointState, LegGeometry, PlanarPoint,
};
use crate::minjerk::{sample_times, JointTrajectory, QuinticSegment, Trajectory};
use crate::params::{GaitParameters, STONES_RANGE};

/// Tolerance when checking that a state matches a planned posture.
pub const POSTURE_TOLERANCE: f64 = 1e-6;
/// Sampling period of the joint range and speed check on every plan.
pub const LIMIT_CHECK_PERIOD: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Behavior {
    FlatWalk,
    StairsUp,
    StairsDown,
    RampUp,
    RampDown,
    /// Step length in meters.
    SteppingStones(f64),
    Stand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facing {
    Forward,
    /// Turned around at the top of a staircase, ready to descend backwards.
    Backward,
}

impl Behavior {
    /// Name of the builtin parameter set used by this behavior.
    pub fn preset(&self) -> &'static str {
        match self {
            Behavior::FlatWalk | Behavior::Stand => "flat",
            Behavior::StairsUp | Behavior::StairsDown => "stairs",
            Behavior::RampUp | Behavior::RampDown => "slopes",
            Behavior::SteppingStones(_) => "stones",
        }
    }

    pub fn facing(&self) -> Facing {
        match self {
            Behavior::StairsDown => Facing::Backward,
            _ => Facing::Forward,
        }
    }

    pub fn steps(&self) -> bool {
        !matches!(self, Behavior::Stand)
    }

    /// Phase order of one step.
    pub fn phase_order(&self) -> [StepPhase; 2] {
        match self {
            Behavior::StairsDown => [StepPhase::Swing, StepPhase::Transfer],
            _ => [StepPhase::Transfer, StepPhase::Swing],
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Behavior::FlatWalk => f.write_str("flat"),
            Behavior::StairsUp => f.write_str("stairs-up"),
            Behavior::StairsDown => f.write_str("stairs-down"),
            Behavior::RampUp => f.write_str("ramp-up"),
            Behavior::RampDown => f.write_str("ramp-down"),
            Behavior::SteppingStones(len) => write!(f, "stones:{len}"),
            Behavior::Stand => f.write_str("stand"),
        }
    }
}

impl FromStr for Behavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "flat" => Behavior::FlatWalk,
            "stairs-up" => Behavior::StairsUp,
            "stairs-down" => Behavior::StairsDown,
            "ramp-up" => Behavior::RampUp,
            "ramp-down" => Behavior::RampDown,
            "stand" => Behavior::Stand,
            other => {
                let len = other
                    .strip_prefix("stones:")
                    .ok_or_else(|| {
                        format!(
                            "unknown behavior '{other}' (expected flat, stairs-up, stairs-down, ramp-up, ramp-down, stones:<m>, stand)"
                        )
                    })?
                    .parse::<f64>()
                    .map_err(|e| format!("bad stepping-stone length in '{other}': {e}"))?;
                if !(STONES_RANGE.0..=STONES_RANGE.1).contains(&len) {
                    return Err(format!(
                        "stepping-stone length {len} m outside [{}, {}] m",
                        STONES_RANGE.0, STONES_RANGE.1
                    ));
                }
                Behavior::SteppingStones(len)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepPhase {
    Transfer,
    Swing,
}

impl StepPhase {
    pub fn name(self) -> &'static str {
        match self {
            StepPhase::Transfer => "transfer",
            StepPhase::Swing => "swing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Trailing,
    Leading,
}

/// Both legs and the hip position of a standing posture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyPose {
    pub hip: PlanarPoint,
    pub trailing: JointAngles,
    pub leading: JointAngles,
}

impl BodyPose {
    pub fn leg(&self, role: Role) -> &JointAngles {
        match role {
            Role::Trailing => &self.trailing,
            Role::Leading => &self.leading,
        }
    }

    pub fn ankle(&self, geom: &LegGeometry, role: Role) -> PlanarPoint {
        let p = forward_kinematics(geom, self.leg(role));
        PlanarPoint::new(self.hip.x + p.x, self.hip.z + p.z)
    }

    /// Foot reference point: directly below the ankle by the ankle height.
    pub fn sole(&self, geom: &LegGeometry, role: Role) -> PlanarPoint {
        self.ankle(geom, role).offset(0.0, -geom.ankle_height)
    }

    pub fn toe(&self, geom: &LegGeometry, role: Role) -> PlanarPoint {
        let (dx, dz) = geom.ankle_to_toe(self.leg(role).foot_pitch());
        self.ankle(geom, role).offset(dx, dz)
    }

    pub fn max_abs_diff(&self, other: &BodyPose) -> f64 {
        self.trailing
            .max_abs_diff(&other.trailing)
            .max(self.leading.max_abs_diff(&other.leading))
            .max((self.hip.x - other.hip.x).abs())
            .max((self.hip.z - other.hip.z).abs())
    }
}

/// Where the feet of a standing posture are placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stance {
    pub trailing_sole: (f64, f64),
    /// Trailing foot pitch (toes up positive).
    pub trailing_pitch: f64,
    pub step_length: f64,
    pub rise: f64,
    pub leading_pitch: f64,
}

/// Standing posture for a pair of footholds: hips at `hip_offset` of the
/// step ahead of the trailing foot, trailing knee straight and both feet
/// flat. When that leaves the leading leg too straight, the hips drop until
/// the leading knee reaches `min_landing_knee`.
pub fn canonical_posture(geom: &LegGeometry, params: &GaitParameters, st: &Stance) -> Result<BodyPose, PlanError> {
    let at = (st.trailing_sole.0, st.trailing_sole.1 + geom.ankle_height);
    let al = (at.0 + st.step_length, at.1 + st.rise);
    let reach = geom.max_reach();
    let lead_x = params.hip_offset * st.step_length;
    if lead_x >= reach {
        return Err(PlanError::NoTransferPosture(format!(
            "hip offset {lead_x:.3} m exceeds leg length"
        )));
    }
    let trail_hip = -(lead_x / reach).asin();
    let straight = forward_kinematics(geom, &JointAngles::new(trail_hip, 0.0, 0.0));
    let mut hip = PlanarPoint::new(at.0 - straight.x, at.1 - straight.z);
    let max_leading = geom.reach_at_knee(params.min_landing_knee);
    let mut trailing = JointAngles::new(trail_hip, 0.0, 0.0);
    let lead_rel = |hip: &PlanarPoint| PlanarPoint::new(al.0 - hip.x, al.1 - hip.z);
    let leading = if lead_rel(&hip).norm() <= max_leading {
        inverse_kinematics(geom, &lead_rel(&hip))
            .map_err(|e| PlanError::NoTransferPosture(format!("leading leg: {e}")))?
    } else {
        // leading-limited: lower the hips onto the leading-leg circle
        let dx = hip.x - al.0;
        let disc = max_leading * max_leading - dx * dx;
        if disc < 0.0 {
            return Err(PlanError::NoTransferPosture(format!(
                "leading foot {:.3} m ahead is out of reach",
                st.step_length
            )));
        }
        hip.z = al.1 + disc.sqrt();
        let t = inverse_kinematics(geom, &PlanarPoint::new(at.0 - hip.x, at.1 - hip.z))
            .map_err(|e| PlanError::NoTransferPosture(format!("trailing leg: {e}")))?;
        trailing = JointAngles::new(t.hip, t.knee, 0.0);
        inverse_kinematics(geom, &lead_rel(&hip))
            .map_err(|e| PlanError::NoTransferPosture(format!("leading leg: {e}")))?
    };
    trailing.ankle = st.trailing_pitch - trailing.shank_pitch();
    let leading = JointAngles::new(
        leading.hip,
        leading.knee,
        st.leading_pitch - (leading.hip - leading.knee),
    );
    Ok(BodyPose { hip, trailing, leading })
}

/// Swing waypoints for the foot reference point, with velocities.
///
/// The two apex waypoints sit `swing_height` above the higher endpoint, at
/// `pct_back` percent of the horizontal span from the start and `pct_front`
/// percent from the goal. They carry the average horizontal speed
/// `step_length / swing_time`; the endpoints are at rest.
pub fn compute_waypoints(
    params: &GaitParameters,
    start: &PlanarPoint,
    goal: &PlanarPoint,
) -> Result<[PlanarPoint; 4], PlanError> {
    let dx = goal.x - start.x;
    if start.distance(goal) < 1e-12 || dx.abs() < 1e-12 {
        return Err(PlanError::DegenerateStep);
    }
    let top = start.z.max(goal.z) + params.swing_height;
    let vx = dx.signum() * params.step_length / params.swing_time;
    Ok([
        PlanarPoint::new(start.x, start.z),
        PlanarPoint::with_velocity(start.x + params.pct_back / 100.0 * dx, top, vx, 0.0),
        PlanarPoint::with_velocity(start.x + (1.0 - params.pct_front / 100.0) * dx, top, vx, 0.0),
        PlanarPoint::new(goal.x, goal.z),
    ])
}

/// Split the swing time between the three waypoint segments in proportion
/// to the square root of their lengths.
pub fn segment_durations(waypoints: &[PlanarPoint; 4], swing_time: f64) -> [f64; 3] {
    let w: [f64; 3] = std::array::from_fn(|i| waypoints[i].distance(&waypoints[i + 1]).sqrt());
    let total: f64 = w.iter().sum();
    std::array::from_fn(|i| swing_time * w[i] / total)
}

/// Per-behavior shape of a forward step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSpec {
    pub step_length: f64,
    pub rise: f64,
    /// Pitch of the new foothold.
    pub terrain_pitch: f64,
    /// Plantar-flex the trailing ankle during transfer.
    pub toe_off: bool,
    /// Add the quick plantar-flexion at swing start.
    pub fast_toeoff: bool,
    /// Move the hips over the leading ankle during transfer (stairs).
    pub hip_over_leading: bool,
}

impl StepSpec {
    pub fn for_behavior(behavior: Behavior, params: &GaitParameters) -> Result<Self, PlanError> {
        let base = StepSpec {
            step_length: params.step_length,
            rise: 0.0,
            terrain_pitch: 0.0,
            toe_off: true,
            fast_toeoff: true,
            hip_over_leading: false,
        };
        Ok(match behavior {
            Behavior::FlatWalk => base,
            Behavior::StairsUp | Behavior::StairsDown => StepSpec {
                rise: params.step_rise,
                hip_over_leading: true,
                ..base
            },
            Behavior::RampUp => StepSpec {
                rise: params.step_rise,
                terrain_pitch: params.step_rise.atan2(params.step_length),
                hip_over_leading: true,
                ..base
            },
            Behavior::RampDown => StepSpec {
                rise: -params.step_rise,
                terrain_pitch: (-params.step_rise).atan2(params.step_length),
                fast_toeoff: false,
                hip_over_leading: true,
                ..base
            },
            Behavior::SteppingStones(len) => {
                params
                    .with_step_length(len)
                    .map_err(|v| PlanError::InvalidParameters(join(&v)))?;
                StepSpec {
                    step_length: len,
                    ..base
                }
            }
            Behavior::Stand => {
                return Err(PlanError::IncompatibleBehaviorTransition(
                    "stand does not step".to_string(),
                ))
            }
        })
    }
}

fn join(v: &[crate::error::Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One phase of a step: the moving leg's trajectory over `[start, start + duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    pub phase: StepPhase,
    pub start: f64,
    pub moving: JointTrajectory,
}

impl PhasePlan {
    pub fn duration(&self) -> f64 {
        self.moving.duration()
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub behavior: Behavior,
    /// Which leg of the starting posture moves.
    pub moving_role: Role,
    pub phases: Vec<PhasePlan>,
    /// Supporting leg over the whole step.
    pub stance: JointTrajectory,
    /// Ankle of the supporting leg; fixed during the step.
    pub anchor: PlanarPoint,
    /// Swing waypoints in world coordinates and the step times they are reached.
    pub waypoints: [PlanarPoint; 4],
    pub waypoint_times: [f64; 4],
    pub start: BodyPose,
    pub end: BodyPose,
    pub geometry: LegGeometry,
}

impl StepPlan {
    pub fn duration(&self) -> f64 {
        self.stance.duration()
    }

    pub fn phase(&self, phase: StepPhase) -> &PhasePlan {
        self.phases.iter().find(|p| p.phase == phase).expect("both phases present")
    }

    pub fn transfer(&self) -> &JointTrajectory {
        &self.phase(StepPhase::Transfer).moving
    }

    pub fn swing(&self) -> &JointTrajectory {
        &self.phase(StepPhase::Swing).moving
    }

    pub fn last_phase(&self) -> StepPhase {
        self.phases[self.phases.len() - 1].phase
    }

    /// Phase index at step time `t`; boundaries belong to the later phase.
    pub fn phase_index_at(&self, t: f64) -> usize {
        self.phases.iter().rposition(|p| t >= p.start).unwrap_or(0)
    }

    pub fn moving_at(&self, t: f64) -> JointState {
        let p = &self.phases[self.phase_index_at(t)];
        p.moving.evaluate_clamped(t - p.start)
    }

    pub fn stance_at(&self, t: f64) -> JointState {
        self.stance.evaluate_clamped(t)
    }


    /// Hip position and velocity in world coordinates.
    pub fn hip_at(&self, t: f64) -> PlanarPoint {
        hip_over_anchor(&self.geometry, &self.anchor, &self.stance_at(t))
    }

    /// Foot reference point of the moving and the supporting leg.
    pub fn feet_at(&self, t: f64) -> (PlanarPoint, PlanarPoint) {
        let hip = self.hip_at(t);
        let foot = |s: &JointState| {
            let p = forward_kinematics(&self.geometry, &s.angles);
            PlanarPoint::new(hip.x + p.x, hip.z + p.z - self.geometry.ankle_height)
        };
        (foot(&self.moving_at(t)), foot(&self.stance_at(t)))
    }

    /// Check every sampled joint command against range and speed limits.
    pub fn check_limits(&self, limits: &JointLimits) -> Result<(), PlanError> {
        for t in sample_times(self.duration(), LIMIT_CHECK_PERIOD)? {
            for s in [self.moving_at(t), self.stance_at(t)] {
                limits.check(&s.angles)?;
                for joint in Joint::ALL {
                    let speed = s.velocities.get(joint).abs();
                    if speed > limits.max_speed {
                        return Err(PlanError::SpeedLimitExceeded {
                            joint,
                            speed,
                            max: limits.max_speed,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// The same step played backwards in time.
    pub fn time_reverse(&self, behavior: Behavior) -> StepPlan {
        let total = self.duration();
        let phases = self
            .phases
            .iter()
            .rev()
            .map(|p| PhasePlan {
                phase: p.phase,
                start: total - p.end(),
                moving: p.moving.time_reverse(),
            })
            .collect::<Vec<_>>();
        let mut phases = phases;
        phases[0].start = 0.0;
        let mut waypoints = self.waypoints;
        waypoints.reverse();
        for w in &mut waypoints {
            w.vx = -w.vx;
            w.vz = -w.vz;
        }
        let mut waypoint_times = self.waypoint_times.map(|t| total - t);
        waypoint_times.reverse();
        StepPlan {
            behavior,
            // the moving leg finishes the forward step in front
            moving_role: match self.moving_role {
                Role::Trailing => Role::Leading,
                Role::Leading => Role::Trailing,
            },
            phases,
            stance: self.stance.time_reverse(),
            anchor: self.anchor,
            waypoints,
            waypoint_times,
            start: self.end,
            end: self.start,
            geometry: self.geometry,
        }
    }
}

fn hip_over_anchor(geom: &LegGeometry, anchor: &PlanarPoint, stance: &JointState) -> PlanarPoint {
    let p = forward_kinematics(geom, &stance.angles);
    let j = jacobian(geom, stance.angles.hip, stance.angles.knee);
    let (hd, kd) = (stance.velocities.hip, stance.velocities.knee);
    PlanarPoint::with_velocity(
        anchor.x - p.x,
        anchor.z - p.z,
        -(j[0][0] * hd + j[0][1] * kd),
        -(j[1][0] * hd + j[1][1] * kd),
    )
}

/// Upper intersection of two circles.
fn upper_intersection(c0: &PlanarPoint, r0: f64, c1: &PlanarPoint, r1: f64) -> Option<PlanarPoint> {
    let d = c0.distance(c1);
    if d < 1e-12 || d > r0 + r1 || d < (r0 - r1).abs() {
        return None;
    }
    let a = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d);
    let h = (r0 * r0 - a * a).max(0.0).sqrt();
    let (ux, uz) = ((c1.x - c0.x) / d, (c1.z - c0.z) / d);
    let (mx, mz) = (c0.x + a * ux, c0.z + a * uz);
    let p = PlanarPoint::new(mx - h * uz, mz + h * ux);
    let q = PlanarPoint::new(mx + h * uz, mz - h * ux);
    Some(if p.z >= q.z { p } else { q })
}

/// Trailing leg at the end of transfer, relative to the hip: the vector from
/// hip to toe in the thigh frame for the given knee flexion and ankle angle.
fn hip_to_toe_in_thigh_frame(geom: &LegGeometry, knee: f64, ankle: f64) -> PlanarPoint {
    let foot = rotate(ankle, geom.foot_forward_length, -geom.ankle_height);
    let below_knee = rotate(-knee, foot.0, foot.1 - geom.shank_length);
    PlanarPoint::new(below_knee.0, below_knee.1 - geom.thigh_length)
}

/// Trailing knee flexion, at least `min_knee`, for which the hip-to-toe
/// distance equals `distance`.
fn closing_knee(geom: &LegGeometry, ankle: f64, min_knee: f64, distance: f64) -> Result<f64, PlanError> {
    let len = |k: f64| hip_to_toe_in_thigh_frame(geom, k, ankle).norm();
    if len(min_knee) <= distance {
        return Ok(min_knee);
    }
    // hip-to-toe distance shrinks as the knee bends
    let (mut lo, mut hi) = (min_knee, std::f64::consts::FRAC_PI_2 * 1.5);
    if len(hi) > distance {
        return Err(PlanError::NoTransferPosture(format!(
            "trailing toe {distance:.3} m from the hip cannot be reached"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if len(mid) > distance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Transfer-phase result: both legs at the end of transfer and their
/// trajectories over the transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlan {
    pub hip: PlanarPoint,
    pub trailing: JointAngles,
    pub leading: JointAngles,
    pub trailing_trajectory: JointTrajectory,
    pub leading_trajectory: JointTrajectory,
}

/// Plan weight transfer from a standing posture.
///
/// The trailing toe stays on the ground: the trailing knee reaches
/// `preswing_knee` and the ankle reaches `-toe_off_angle` (or keeps its
/// current angle without toe-off), which fixes the hip-to-toe distance. The
/// hips end where that distance is met while the leading leg either rotates
/// rigidly about its ankle or, with `hip_over_leading`, straightens under
/// hips placed directly above the leading ankle.
pub fn plan_transfer(
    params: &GaitParameters,
    spec: &StepSpec,
    geom: &LegGeometry,
    pose: &BodyPose,
) -> Result<TransferPlan, PlanError> {
    let anchor = pose.ankle(geom, Role::Leading);
    let toe = pose.toe(geom, Role::Trailing);
    let ankle_end = if spec.toe_off && params.toe_off_angle > 0.0 {
        -params.toe_off_angle
    } else {
        pose.trailing.ankle
    };
    let chain = hip_to_toe_in_thigh_frame(geom, params.preswing_knee, ankle_end);
    let toe_radius = chain.norm();
    // hips placed at a given x: as high as the trailing toe allows, but no
    // higher than the leading leg reaches with its minimum knee flexion
    let hip_at_x = |x: f64| -> Result<(PlanarPoint, f64), PlanError> {
        let dx = x - toe.x;
        let disc = toe_radius * toe_radius - dx * dx;
        if disc < 0.0 {
            return Err(PlanError::NoTransferPosture(format!(
                "trailing toe {dx:.3} m behind the hips is out of reach"
            )));
        }
        let lead_dx = x - anchor.x;
        let lead_reach = geom.reach_at_knee(params.min_landing_knee);
        let ceiling = anchor.z + (lead_reach * lead_reach - lead_dx * lead_dx).max(0.0).sqrt();
        let hip = PlanarPoint::new(x, (toe.z + disc.sqrt()).min(ceiling));
        let knee = closing_knee(geom, ankle_end, params.preswing_knee, hip.distance(&toe))?;
        Ok((hip, knee))
    };
    // stop short of the next standing hip position so the hips keep moving
    // forward through the swing
    let hip_x_limit = anchor.x + 0.75 * params.hip_offset * spec.step_length;
    let (hip, knee_end, rigid) = if spec.hip_over_leading {
        let (hip, knee) = hip_at_x(anchor.x)?;
        (hip, knee, false)
    } else {
        let lead_radius = pose.hip.distance(&anchor);
        let hip = upper_intersection(&anchor, lead_radius, &toe, toe_radius).ok_or_else(|| {
            PlanError::NoTransferPosture("trailing toe and leading ankle circles do not meet".to_string())
        })?;
        if hip.x > hip_x_limit {
            let (hip, knee) = hip_at_x(hip_x_limit)?;
            (hip, knee, false)
        } else {
            (hip, params.preswing_knee, true)
        }
    };
    let chain = hip_to_toe_in_thigh_frame(geom, knee_end, ankle_end);
    let toe_rel = toe.minus(&hip);
    let trailing = JointAngles::new(
        angle_from_down(toe_rel.x, toe_rel.z) - angle_from_down(chain.x, chain.z),
        knee_end,
        ankle_end,
    );
    let ik = inverse_kinematics(geom, &anchor.minus(&hip))
        .map_err(|e| PlanError::NoTransferPosture(format!("leading leg: {e}")))?;
    let knee = if rigid { pose.leading.knee } else { ik.knee };
    let leading = JointAngles::new(
        ik.hip,
        knee,
        pose.leading.foot_pitch() - (ik.hip - knee),
    );
    let d = params.transfer_time;
    Ok(TransferPlan {
        hip,
        trailing,
        leading,
        trailing_trajectory: JointTrajectory::rest_to_rest(&pose.trailing, &trailing, d)?,
        leading_trajectory: JointTrajectory::rest_to_rest(&pose.leading, &leading, d)?,
    })
}

/// Supporting leg during swing: a rest-to-rest move from the end of transfer
/// to the straight trailing posture of the next stance. Hip and knee move
/// together, so the knee straightens monotonically, and the ankle keeps the
/// foot flat.
pub fn plan_stance(params: &GaitParameters, from: &JointAngles, to: &JointAngles) -> Result<JointTrajectory, PlanError> {
    Ok(JointTrajectory::rest_to_rest(from, to, params.swing_time)?)
}

/// Swing-leg trajectory through the four waypoints.
///
/// Each waypoint is converted to joint space relative to the hip position at
/// the waypoint time, and its Cartesian velocity (relative to the moving
/// hip) to joint rates. `start_angles` and `goal_angles` pin the end
/// configurations exactly.
#[allow(clippy::too_many_arguments)]
pub fn plan_swing(
    params: &GaitParameters,
    geom: &LegGeometry,
    anchor: &PlanarPoint,
    stance: &JointTrajectory,
    start_angles: &JointAngles,
    goal_angles: &JointAngles,
    fast_toeoff: bool,
) -> Result<(JointTrajectory, [PlanarPoint; 4], [f64; 4]), PlanError> {
    let hip0 = hip_over_anchor(geom, anchor, &stance.start());
    let hip1 = hip_over_anchor(geom, anchor, &stance.end());
    let foot = |hip: &PlanarPoint, q: &JointAngles| {
        let p = forward_kinematics(geom, q);
        PlanarPoint::new(hip.x + p.x, hip.z + p.z - geom.ankle_height)
    };
    let start = foot(&hip0, start_angles);
    let goal = foot(&hip1, goal_angles);
    let waypoints = compute_waypoints(params, &start, &goal)?;
    let durations = segment_durations(&waypoints, params.swing_time);
    let times = [
        0.0,
        durations[0],
        durations[0] + durations[1],
        params.swing_time,
    ];
    let mut knots = Vec::with_capacity(4);
    for (index, (wp, &t)) in waypoints.iter().zip(&times).enumerate() {
        let (q, rates) = match index {
            0 => (*start_angles, (0.0, 0.0)),
            3 => (*goal_angles, (0.0, 0.0)),
            _ => {
                let hip = hip_over_anchor(geom, anchor, &stance.evaluate_clamped(t));
                let rel = PlanarPoint::new(wp.x - hip.x, wp.z + geom.ankle_height - hip.z);
                let sol = inverse_kinematics(geom, &rel).map_err(|source| PlanError::UnreachableWaypoint { index, source })?;
                let q = sol.with_ankle(0.0);
                let rates = joint_velocities_from_cartesian(geom, &q, wp.vx - hip.vx, wp.vz - hip.vz)
                    .map_err(|source| PlanError::UnreachableWaypoint { index, source })?;
                (q, rates)
            }
        };
        knots.push((t, q, rates));
    }
    let hip = Trajectory::through(&knots.iter().map(|(t, q, r)| (*t, q.hip, r.0)).collect::<Vec<_>>())?;
    let knee = Trajectory::through(&knots.iter().map(|(t, q, r)| (*t, q.knee, r.1)).collect::<Vec<_>>())?;
    let ankle = swing_ankle(params, start_angles.ankle, goal_angles.ankle, fast_toeoff)?;
    let mut world = waypoints;
    world[0] = start;
    world[3] = goal;
    Ok((JointTrajectory::new(hip, knee, ankle)?, world, times))
}

/// Swing ankle: optional quick plantar flexion, then dorsiflexion for
/// clearance peaking halfway through the remaining time, then the landing
/// angle.
fn swing_ankle(params: &GaitParameters, from: f64, land: f64, fast_toeoff: bool) -> Result<Trajectory, PlanError> {
    let mut segments = Vec::with_capacity(3);
    let mut t0 = 0.0;
    let mut a0 = from;
    if fast_toeoff && params.fast_toeoff_extra > 0.0 {
        let a = from - params.fast_toeoff_extra;
        segments.push(QuinticSegment::rest_to_rest(a0, a, params.fast_toeoff_duration)?);
        t0 = params.fast_toeoff_duration;
        a0 = a;
    }
    let half = (params.swing_time - t0) / 2.0;
    let peak = land + params.swing_dorsiflexion;
    segments.push(QuinticSegment::rest_to_rest(a0, peak, half)?);
    segments.push(QuinticSegment::rest_to_rest(peak, land, params.swing_time - t0 - half)?);
    Ok(Trajectory::chain(segments)?)
}

/// Plan one step of `behavior` from a standing posture.
pub fn plan_step(
    behavior: Behavior,
    params: &GaitParameters,
    geom: &LegGeometry,
    limits: &JointLimits,
    current: &BodyPose,
) -> Result<StepPlan, PlanError> {
    params.validate_with(limits).map_err(|v| PlanError::InvalidParameters(join(&v)))?;
    let plan = match behavior {
        Behavior::StairsDown => plan_descent(params, geom, current)?,
        _ => {
            let spec = StepSpec::for_behavior(behavior, params)?;
            plan_forward(behavior, params, &spec, geom, current)?
        }
    };
    plan.check_limits(limits)?;
    Ok(plan)
}

/// Standing posture that a step of `behavior` would start from, with the
/// trailing foot at `trailing_sole`.
pub fn standing_posture(
    behavior: Behavior,
    params: &GaitParameters,
    geom: &LegGeometry,
    trailing_sole: (f64, f64),
) -> Result<BodyPose, PlanError> {
    let spec = match behavior {
        Behavior::Stand => StepSpec::for_behavior(Behavior::FlatWalk, params)?,
        _ => StepSpec::for_behavior(behavior, params)?,
    };
    canonical_posture(
        geom,
        params,
        &Stance {
            trailing_sole,
            trailing_pitch: spec.terrain_pitch,
            step_length: spec.step_length,
            rise: spec.rise,
            leading_pitch: spec.terrain_pitch,
        },
    )
}

fn plan_forward(
    behavior: Behavior,
    params: &GaitParameters,
    spec: &StepSpec,
    geom: &LegGeometry,
    current: &BodyPose,
) -> Result<StepPlan, PlanError> {
    let transfer = plan_transfer(params, spec, geom, current)?;
    let anchor = current.ankle(geom, Role::Leading);
    let next = canonical_posture(
        geom,
        params,
        &Stance {
            trailing_sole: (anchor.x, anchor.z - geom.ankle_height),
            trailing_pitch: current.leading.foot_pitch(),
            step_length: spec.step_length,
            rise: spec.rise,
            leading_pitch: spec.terrain_pitch,
        },
    )?;
    let stance_swing = plan_stance(params, &transfer.leading, &next.trailing)?;
    let (swing, waypoints, times) = plan_swing(
        params,
        geom,
        &anchor,
        &stance_swing,
        &transfer.trailing,
        &next.leading,
        spec.fast_toeoff,
    )?;
    let tt = params.transfer_time;
    Ok(StepPlan {
        behavior,
        moving_role: Role::Trailing,
        phases: vec![
            PhasePlan {
                phase: StepPhase::Transfer,
                start: 0.0,
                moving: transfer.trailing_trajectory,
            },
            PhasePlan {
                phase: StepPhase::Swing,
                start: tt,
                moving: swing,
            },
        ],
        stance: transfer.leading_trajectory.then(&stance_swing)?,
        anchor,
        waypoints,
        waypoint_times: times.map(|t| tt + t),
        start: *current,
        end: BodyPose {
            hip: next.hip,
            // the supporting leg trails in the next posture
            trailing: next.trailing,
            leading: next.leading,
        },
        geometry: *geom,
    })
}

/// Ascent step that ends in `current`, planned without toe-off; descent
/// replays it backwards.
pub fn ascent_for_descent(params: &GaitParameters, geom: &LegGeometry, current: &BodyPose) -> Result<StepPlan, PlanError> {
    let spec = StepSpec {
        toe_off: false,
        fast_toeoff: false,
        ..StepSpec::for_behavior(Behavior::StairsUp, params)?
    };
    let sole = current.sole(geom, Role::Trailing);
    let expected = standing_posture(Behavior::StairsUp, params, geom, (sole.x, sole.z))?;
    let mismatch = expected.max_abs_diff(current);
    if mismatch > POSTURE_TOLERANCE {
        return Err(PlanError::IncompatibleBehaviorTransition(format!(
            "descent needs the standing stairs posture (off by {mismatch:.2e})"
        )));
    }
    let before = standing_posture(
        Behavior::StairsUp,
        params,
        geom,
        (sole.x - spec.step_length, sole.z - spec.rise),
    )?;
    plan_forward(Behavior::StairsUp, params, &spec, geom, &before)
}

fn plan_descent(params: &GaitParameters, geom: &LegGeometry, current: &BodyPose) -> Result<StepPlan, PlanError> {
    let ascent = ascent_for_descent(params, geom, current)?;
    let mut plan = ascent.time_reverse(Behavior::StairsDown);
    // anchor the replay on the exact current state
    plan.start = *current;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::builtin;
    use crate::terrain::Terrain;
    use proptest::prelude::*;

    fn geom() -> LegGeometry {
        LegGeometry::default()
    }

    fn first_step(behavior: Behavior) -> (GaitParameters, StepPlan) {
        let p = builtin(behavior.preset()).unwrap();
        let pose = standing_posture(behavior, &p, &geom(), (0.0, 0.0)).unwrap();
        let plan = plan_step(behavior, &p, &geom(), &JointLimits::default(), &pose).unwrap();
        (p, plan)
    }

    /// Second step, planned from the end of the first.
    fn steady_step(behavior: Behavior) -> (GaitParameters, StepPlan) {
        let (p, first) = first_step(behavior);
        let plan = plan_step(behavior, &p, &geom(), &JointLimits::default(), &first.end).unwrap();
        (p, plan)
    }

    fn times(plan: &StepPlan, from: f64, to: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| (from + (to - from) * i as f64 / n as f64).min(plan.duration())).collect()
    }

    fn sign_changes(v: &[f64]) -> usize {
        let signs: Vec<f64> = v.iter().filter(|x| x.abs() > 1e-9).map(|x| x.signum()).collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    #[test]
    fn waypoints_flat() {
        let p = builtin("flat").unwrap();
        let w = compute_waypoints(&p, &PlanarPoint::new(0.0, 0.0), &PlanarPoint::new(0.4, 0.0)).unwrap();
        let expect = [(0.0, 0.0), (0.06, 0.1), (0.34, 0.1), (0.4, 0.0)];
        for (wp, (x, z)) in w.iter().zip(expect) {
            assert!((wp.x - x).abs() < 1e-12 && (wp.z - z).abs() < 1e-12, "{wp:?}");
        }
        assert_eq!((w[0].vx, w[3].vx), (0.0, 0.0));
        assert!((w[1].vx - 0.4).abs() < 1e-12 && w[1].vz == 0.0);
    }

    #[test]
    fn waypoints_stairs() {
        let p = builtin("stairs").unwrap();
        let w = compute_waypoints(&p, &PlanarPoint::new(0.0, 0.0), &PlanarPoint::new(0.29, 0.18)).unwrap();
        let expect = [(0.0, 0.0), (0.058, 0.33), (0.232, 0.33), (0.29, 0.18)];
        for (wp, (x, z)) in w.iter().zip(expect) {
            assert!((wp.x - x).abs() < 1e-12 && (wp.z - z).abs() < 1e-12, "{wp:?}");
        }
    }

    #[test]
    fn waypoints_degenerate() {
        let p = builtin("flat").unwrap();
        let a = PlanarPoint::new(0.1, 0.0);
        assert_eq!(compute_waypoints(&p, &a, &a), Err(PlanError::DegenerateStep));
    }

    #[test]
    fn behavior_strings() {
        for s in ["flat", "stairs-up", "stairs-down", "ramp-up", "ramp-down", "stones:0.5", "stand"] {
            let b: Behavior = s.parse().unwrap();
            assert_eq!(b.to_string(), s);
        }
        assert!("stones:0.7".parse::<Behavior>().is_err());
        assert!("stones:0.34".parse::<Behavior>().is_err());
        assert!("stones:x".parse::<Behavior>().is_err());
        assert!("hop".parse::<Behavior>().is_err());
    }

    #[test]
    fn stones_out_of_range_rejected_by_planner() {
        let p = builtin("stones").unwrap();
        let pose = standing_posture(Behavior::SteppingStones(0.5), &p, &geom(), (0.0, 0.0)).unwrap();
        let err = plan_step(Behavior::SteppingStones(0.7), &p, &geom(), &JointLimits::default(), &pose).unwrap_err();
        assert!(matches!(err, PlanError::InvalidParameters(_)), "{err}");
    }

    #[test]
    fn stand_does_not_plan() {
        let p = builtin("flat").unwrap();
        let pose = standing_posture(Behavior::Stand, &p, &geom(), (0.0, 0.0)).unwrap();
        assert!(matches!(
            plan_step(Behavior::Stand, &p, &geom(), &JointLimits::default(), &pose),
            Err(PlanError::IncompatibleBehaviorTransition(_))
        ));
    }

    #[test]
    fn durations() {
        let (_, flat) = first_step(Behavior::FlatWalk);
        assert!((flat.duration() - 1.4).abs() < 1e-12);
        assert!((flat.transfer().duration() - 0.4).abs() < 1e-12);
        assert!((flat.swing().duration() - 1.0).abs() < 1e-12);
        let (_, stairs) = first_step(Behavior::StairsUp);
        assert!((stairs.duration() - 2.7).abs() < 1e-12);
        assert!((stairs.transfer().duration() - 1.1).abs() < 1e-12);
        assert!((stairs.swing().duration() - 1.6).abs() < 1e-12);
    }

    #[test]
    fn swing_passes_through_waypoints() {
        for b in [Behavior::FlatWalk, Behavior::StairsUp, Behavior::RampUp, Behavior::RampDown, Behavior::SteppingStones(0.6)] {
            let (_, plan) = steady_step(b);
            for (wp, &t) in plan.waypoints.iter().zip(&plan.waypoint_times) {
                let (foot, _) = plan.feet_at(t);
                assert!(foot.distance(wp) < 1e-6, "{b}: {foot:?} vs {wp:?}");
            }
        }
    }

    #[test]
    fn swing_endpoints_at_rest() {
        let (_, plan) = steady_step(Behavior::FlatWalk);
        let s = plan.swing();
        for st in [s.start(), s.end()] {
            assert!(st.velocities.hip.abs() < 1e-12 && st.velocities.knee.abs() < 1e-12 && st.velocities.ankle.abs() < 1e-12);
        }
    }

    #[test]
    fn flat_middle_segment_clearance() {
        let (p, plan) = steady_step(Behavior::FlatWalk);
        let [_, t1, t2, _] = plan.waypoint_times;
        for t in times(&plan, t1, t2, 500) {
            let (foot, _) = plan.feet_at(t);
            assert!(foot.z >= p.swing_height - 1e-3, "z = {} at t = {t}", foot.z);
        }
    }

    #[test]
    fn apex_clearance_within_five_percent() {
        for b in [Behavior::FlatWalk, Behavior::StairsUp, Behavior::RampUp, Behavior::RampDown, Behavior::SteppingStones(0.45)] {
            let (p, plan) = steady_step(b);
            let swing = plan.phase(StepPhase::Swing);
            let apex = times(&plan, swing.start, swing.end(), 2000)
                .into_iter()
                .map(|t| plan.feet_at(t).0.z)
                .fold(f64::MIN, f64::max);
            let base = plan.waypoints[0].z.max(plan.waypoints[3].z);
            let clearance = apex - base;
            assert!((clearance - p.swing_height).abs() <= 0.05 * p.swing_height, "{b}: {clearance}");
        }
    }

    #[test]
    fn swing_foot_stays_above_terrain() {
        for b in [Behavior::FlatWalk, Behavior::StairsUp, Behavior::RampUp, Behavior::RampDown, Behavior::SteppingStones(0.69)] {
            let (p, plan) = first_step(b);
            let sole = plan.start.sole(&geom(), Role::Trailing);
            let terrain = Terrain::for_behavior(b, &p, (sole.x, sole.z));
            for t in times(&plan, 0.0, plan.duration(), 2000) {
                let (foot, _) = plan.feet_at(t);
                assert!(foot.z - terrain.height(foot.x) >= -1e-9, "{b}: foot {foot:?} at t = {t}");
            }
        }
    }

    #[test]
    fn flat_swing_hip_single_peaked() {
        let (_, plan) = steady_step(Behavior::FlatWalk);
        let d = plan.swing().duration();
        let v: Vec<f64> = (0..=1000).map(|i| plan.swing().evaluate(d * i as f64 / 1000.0).unwrap().velocities.hip).collect();
        assert_eq!(sign_changes(&v), 1);
    }

    #[test]
    fn stance_advances_one_step_and_straightens() {
        let (p, plan) = steady_step(Behavior::FlatWalk);
        let advance = plan.hip_at(plan.duration()).x - plan.hip_at(0.0).x;
        assert!((advance - p.step_length).abs() < 1e-9, "{advance}");
        assert!(plan.stance_at(plan.duration()).angles.knee.to_degrees() < 1.0);
        let hips: Vec<f64> = times(&plan, 0.0, plan.duration(), 1400).iter().map(|&t| plan.stance_at(t).angles.hip).collect();
        assert!(hips.windows(2).all(|w| w[1] <= w[0] + 1e-12), "stance hip not monotone");
        let knees: Vec<f64> = times(&plan, p.transfer_time, plan.duration(), 1000).iter().map(|&t| plan.stance_at(t).angles.knee).collect();
        assert!(knees.windows(2).all(|w| w[1] <= w[0] + 1e-12), "stance knee not monotone");
    }

    #[test]
    fn hip_moves_forward_monotonically() {
        for b in [Behavior::FlatWalk, Behavior::StairsUp, Behavior::RampUp, Behavior::RampDown, Behavior::SteppingStones(0.35), Behavior::SteppingStones(0.69)] {
            let (_, plan) = first_step(b);
            let xs: Vec<f64> = times(&plan, 0.0, plan.duration(), 2000).iter().map(|&t| plan.hip_at(t).x).collect();
            assert!(xs.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{b}");
        }
    }

    #[test]
    fn flat_toe_off_reaches_target_at_transfer_end() {
        let (p, plan) = steady_step(Behavior::FlatWalk);
        let a = plan.transfer().evaluate(0.4).unwrap().angles.ankle;
        assert!((a + p.toe_off_angle).abs() < 1e-12);
        // the plantar flexion is monotone through the transfer
        let v: Vec<f64> = times(&plan, 0.0, 0.4, 400).iter().map(|&t| plan.moving_at(t).velocities.ankle).collect();
        assert!(v.iter().all(|&x| x <= 1e-12));
        // then the quick extra push at swing start
        let extra = plan.swing().evaluate(p.fast_toeoff_duration).unwrap().angles.ankle;
        assert!((extra + p.toe_off_angle + p.fast_toeoff_extra).abs() < 1e-12);
    }

    #[test]
    fn zero_toe_off_holds_ankle() {
        let mut p = builtin("flat").unwrap();
        p.toe_off_angle = 0.0;
        let pose = standing_posture(Behavior::FlatWalk, &p, &geom(), (0.0, 0.0)).unwrap();
        let plan = plan_step(Behavior::FlatWalk, &p, &geom(), &JointLimits::default(), &pose).unwrap();
        let a0 = pose.trailing.ankle;
        for t in times(&plan, 0.0, 0.4, 100) {
            assert_eq!(plan.transfer().evaluate(t.min(0.4)).unwrap().angles.ankle, a0);
        }
        // fast push alone remains
        let extra = plan.swing().evaluate(p.fast_toeoff_duration).unwrap().angles.ankle;
        assert!((extra - (a0 - p.fast_toeoff_extra)).abs() < 1e-12);
    }

    #[test]
    fn trailing_toe_on_ground_at_transfer_ends() {
        for b in [Behavior::FlatWalk, Behavior::StairsUp, Behavior::RampUp, Behavior::RampDown] {
            let (p, plan) = steady_step(b);
            let toe0 = plan.start.toe(&geom(), Role::Trailing);
            let end = BodyPose {
                hip: plan.hip_at(p.transfer_time),
                trailing: plan.moving_at(p.transfer_time).angles,
                leading: plan.stance_at(p.transfer_time).angles,
            };
            let toe1 = end.toe(&geom(), Role::Trailing);
            assert!(toe0.distance(&toe1) < 1e-9, "{b}: {toe0:?} {toe1:?}");
        }
    }

    #[test]
    fn stairs_transfer_puts_hips_over_leading_ankle() {
        let (_, plan) = steady_step(Behavior::StairsUp);
        let hip = plan.hip_at(1.1);
        assert!((hip.x - plan.anchor.x).abs() < 1e-9);
        // center of mass rises during double support
        assert!(hip.z - plan.hip_at(0.0).z > 0.03);
    }

    #[test]
    fn ramp_down_has_no_fast_toe_off() {
        let (p, plan) = steady_step(Behavior::RampDown);
        let a0 = plan.swing().start().angles.ankle;
        assert!((a0 + p.toe_off_angle).abs() < 1e-12);
        assert_eq!(plan.swing().ankle.segments().len(), 2);
        let (_, up) = steady_step(Behavior::RampUp);
        assert_eq!(up.swing().ankle.segments().len(), 3);
    }

    #[test]
    fn stairs_swing_knee_exceeds_flat() {
        let peak = |b| {
            let (_, plan) = steady_step(b);
            let d = plan.swing().duration();
            (0..=1000).map(|i| plan.swing().evaluate(d * i as f64 / 1000.0).unwrap().angles.knee).fold(f64::MIN, f64::max)
        };
        assert!(peak(Behavior::StairsUp) > peak(Behavior::FlatWalk));
    }

    #[test]
    fn stairs_joint_extremes_within_limits() {
        let (_, plan) = steady_step(Behavior::StairsUp);
        let lim = JointLimits::default();
        for t in times(&plan, 0.0, plan.duration(), 2700) {
            for s in [plan.moving_at(t), plan.stance_at(t)] {
                lim.check(&s.angles).unwrap();
            }
        }
    }

    #[test]
    fn descent_is_reversed_ascent_without_toe_off() {
        let (p, up) = first_step(Behavior::StairsUp);
        let down = plan_step(Behavior::StairsDown, &p, &geom(), &JointLimits::default(), &up.end).unwrap();
        assert_eq!(down.phases[0].phase, StepPhase::Swing);
        assert_eq!(down.moving_role, Role::Leading);
        assert!((down.duration() - 2.7).abs() < 1e-12);
        let no_toe = ascent_for_descent(&p, &geom(), &up.end).unwrap();
        // ankle held during the ascent transfer, no fast push
        let a0 = no_toe.transfer().start().angles.ankle;
        assert!((no_toe.transfer().end().angles.ankle - a0).abs() < 1e-15);
        let d = no_toe.duration();
        for t in times(&no_toe, 0.0, d, 2700) {
            let fwd_m = no_toe.moving_at(d - t);
            let fwd_s = no_toe.stance_at(d - t);
            let (m, s) = (down.moving_at(t), down.stance_at(t));
            assert!(m.angles.max_abs_diff(&fwd_m.angles) < 1e-9, "t = {t}");
            assert!(s.angles.max_abs_diff(&fwd_s.angles) < 1e-9, "t = {t}");
            assert!((m.velocities.hip + fwd_m.velocities.hip).abs() < 1e-9);
        }
        // ends where the ascent began, one riser lower
        assert!((down.hip_at(d).z - (up.hip_at(0.0).z)).abs() < 1e-9);
    }

    #[test]
    fn descent_needs_stairs_posture() {
        let p = builtin("stairs").unwrap();
        let flat = standing_posture(Behavior::FlatWalk, &builtin("flat").unwrap(), &geom(), (0.0, 0.0)).unwrap();
        assert!(matches!(
            plan_step(Behavior::StairsDown, &p, &geom(), &JointLimits::default(), &flat),
            Err(PlanError::IncompatibleBehaviorTransition(_))
        ));
    }

    #[test]
    fn leading_limited_posture() {
        let p = builtin("slopes").unwrap();
        let pose = standing_posture(Behavior::RampDown, &p, &geom(), (0.0, 0.0)).unwrap();
        assert!((pose.leading.knee - p.min_landing_knee).abs() < 1e-9);
        assert!(pose.trailing.knee > 0.0);
        // both feet flat on the slope
        let pitch = (-p.step_rise).atan2(p.step_length);
        assert!((pose.leading.foot_pitch() - pitch).abs() < 1e-12);
        assert!((pose.trailing.foot_pitch() - pitch).abs() < 1e-12);
    }

    #[test]
    fn speed_cap_is_enforced() {
        let mut p = builtin("flat").unwrap();
        p.swing_time = 0.35;
        p.fast_toeoff_duration = 0.1;
        let pose = standing_posture(Behavior::FlatWalk, &p, &geom(), (0.0, 0.0)).unwrap();
        assert!(matches!(
            plan_step(Behavior::FlatWalk, &p, &geom(), &JointLimits::default(), &pose),
            Err(PlanError::SpeedLimitExceeded { .. })
        ));
    }

    #[test]
    fn parameter_change_only_affects_next_plan() {
        let (p, first) = first_step(Behavior::FlatWalk);
        let a = plan_step(Behavior::FlatWalk, &p, &geom(), &JointLimits::default(), &first.end).unwrap();
        let q = GaitParameters { step_length: 0.35, ..p };
        let b = plan_step(Behavior::FlatWalk, &q, &geom(), &JointLimits::default(), &first.end).unwrap();
        assert_eq!(a.start, b.start);
        let spacing = |plan: &StepPlan| plan.end.ankle(&geom(), Role::Leading).x - plan.anchor.x;
        assert!((spacing(&b) - 0.35).abs() < 1e-9);
        assert!((spacing(&a) - 0.4).abs() < 1e-9);
        assert_eq!(a.phases[0], b.phases[0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn random_flat_parameters(
            step_length in 0.3f64..0.5,
            swing_height in 0.06f64..0.14,
            pct_back in 10.0f64..25.0,
            pct_front in 10.0f64..25.0,
            swing_time in 0.9f64..1.6,
            transfer_time in 0.3f64..1.0,
        ) {
            let p = GaitParameters { step_length, swing_height, pct_back, pct_front, swing_time, transfer_time, ..builtin("flat").unwrap() };
            let pose = standing_posture(Behavior::FlatWalk, &p, &geom(), (0.0, 0.0)).unwrap();
            let first = plan_step(Behavior::FlatWalk, &p, &geom(), &JointLimits::default(), &pose).unwrap();
            let plan = plan_step(Behavior::FlatWalk, &p, &geom(), &JointLimits::default(), &first.end).unwrap();
            prop_assert!((plan.duration() - swing_time - transfer_time).abs() < 1e-12);
            prop_assert!((plan.end.hip.x - plan.start.hip.x - step_length).abs() < 1e-9);
            for (wp, &t) in plan.waypoints.iter().zip(&plan.waypoint_times) {
                prop_assert!(plan.feet_at(t).0.distance(wp) < 1e-6);
            }
            for i in 0..=500 {
                let t = plan.duration() * i as f64 / 500.0;
                prop_assert!(plan.feet_at(t).0.z >= -1e-9);
            }
        }
    }
}
