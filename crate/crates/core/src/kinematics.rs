//! Planar (sagittal) kinematics of one leg: hip pitch, knee flexion and
//! ankle pitch.
//!
//! Frame: origin at the hip joint, `x` forward, `z` up. Hip angle is positive
//! in flexion (thigh forward of vertical), knee is positive in flexion with
//! zero meaning a straight leg, ankle is positive in dorsiflexion. The
//! absolute pitch of the shank from vertical is `hip - knee`, and the foot
//! pitch (toes up positive) is `hip - knee + ankle`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::KinematicsError;

/// Targets closer than this to the workspace boundary are rejected.
pub const REACH_MARGIN: f64 = 1e-3;
/// Knee angles below this are flagged as near the straight-leg singularity.
pub const NEAR_SINGULAR_KNEE: f64 = 1.0 * std::f64::consts::PI / 180.0;
/// Minimum |det J| accepted when mapping Cartesian to joint velocities.
pub const SINGULAR_DET: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegGeometry {
    pub thigh_length: f64,
    pub shank_length: f64,
    /// Horizontal distance from the ankle joint to the toe contact.
    pub foot_forward_length: f64,
    /// Height of the ankle joint above the sole.
    pub ankle_height: f64,
}

impl Default for LegGeometry {
    fn default() -> Self {
        Self {
            thigh_length: 0.44,
            shank_length: 0.43,
            foot_forward_length: 0.15,
            ankle_height: 0.08,
        }
    }
}

impl LegGeometry {
    pub fn new(
        thigh_length: f64,
        shank_length: f64,
        foot_forward_length: f64,
        ankle_height: f64,
    ) -> Result<Self, KinematicsError> {
        let geom = Self {
            thigh_length,
            shank_length,
            foot_forward_length,
            ankle_height,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let fields = [
            ("thigh_length", self.thigh_length),
            ("shank_length", self.shank_length),
            ("foot_forward_length", self.foot_forward_length),
            ("ankle_height", self.ankle_height),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "{name} must be a positive length, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Hip-to-ankle distance with the knee straight.
    pub fn max_reach(&self) -> f64 {
        self.thigh_length + self.shank_length
    }

    pub fn min_reach(&self) -> f64 {
        (self.thigh_length - self.shank_length).abs()
    }

    /// Hip-to-ankle distance for a given knee flexion.
    pub fn reach_at_knee(&self, knee: f64) -> f64 {
        let (t, s) = (self.thigh_length, self.shank_length);
        (t * t + s * s + 2.0 * t * s * knee.cos()).sqrt()
    }

    /// Vector from the ankle joint to the toe contact for a given foot pitch.
    pub fn ankle_to_toe(&self, foot_pitch: f64) -> (f64, f64) {
        rotate(foot_pitch, self.foot_forward_length, -self.ankle_height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Joint {
    Hip,
    Knee,
    Ankle,
}

impl Joint {
    pub const ALL: [Joint; 3] = [Joint::Hip, Joint::Knee, Joint::Ankle];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Hip => "hip",
            Joint::Knee => "knee",
            Joint::Ankle => "ankle",
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hip, knee and ankle values for one leg. Used for angles (rad) as well as
/// angular rates (rad/s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub hip: f64,
    pub knee: f64,
    pub ankle: f64,
}

impl JointAngles {
    pub const ZERO: JointAngles = JointAngles {
        hip: 0.0,
        knee: 0.0,
        ankle: 0.0,
    };

    pub fn new(hip: f64, knee: f64, ankle: f64) -> Self {
        Self { hip, knee, ankle }
    }

    pub fn get(&self, joint: Joint) -> f64 {
        match joint {
            Joint::Hip => self.hip,
            Joint::Knee => self.knee,
            Joint::Ankle => self.ankle,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Joint) -> f64) -> Self {
        Self {
            hip: f(Joint::Hip),
            knee: f(Joint::Knee),
            ankle: f(Joint::Ankle),
        }
    }

    /// Absolute shank pitch from vertical.
    pub fn shank_pitch(&self) -> f64 {
        self.hip - self.knee
    }

    /// Absolute foot pitch, toes up positive.
    pub fn foot_pitch(&self) -> f64 {
        self.hip - self.knee + self.ankle
    }

    pub fn max_abs_diff(&self, other: &JointAngles) -> f64 {
        Joint::ALL
            .iter()
            .map(|&j| (self.get(j) - other.get(j)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub angles: JointAngles,
    pub velocities: JointAngles,
}

impl JointState {
    pub fn at_rest(angles: JointAngles) -> Self {
        Self {
            angles,
            velocities: JointAngles::ZERO,
        }
    }
}

/// Point in the sagittal plane with an attached velocity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub z: f64,
    pub vx: f64,
    pub vz: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, z: f64) -> Self {
        Self {
            x,
            z,
            vx: 0.0,
            vz: 0.0,
        }
    }

    pub fn with_velocity(x: f64, z: f64, vx: f64, vz: f64) -> Self {
        Self { x, z, vx, vz }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite() && self.vx.is_finite() && self.vz.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.z - other.z)
    }

    pub fn offset(&self, dx: f64, dz: f64) -> PlanarPoint {
        PlanarPoint {
            x: self.x + dx,
            z: self.z + dz,
            ..*self
        }
    }

    /// Position difference `self - other`; velocities subtract as well.
    pub fn minus(&self, other: &PlanarPoint) -> PlanarPoint {
        PlanarPoint {
            x: self.x - other.x,
            z: self.z - other.z,
            vx: self.vx - other.vx,
            vz: self.vz - other.vz,
        }
    }

    pub fn plus(&self, other: &PlanarPoint) -> PlanarPoint {
        PlanarPoint {
            x: self.x + other.x,
            z: self.z + other.z,
            vx: self.vx + other.vx,
            vz: self.vz + other.vz,
        }
    }
}

/// Allowed interval for one joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeOfMotion {
    pub min: f64,
    pub max: f64,
}

impl RangeOfMotion {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Per-joint range of motion and the shared angular speed cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub hip: RangeOfMotion,
    pub knee: RangeOfMotion,
    pub ankle: RangeOfMotion,
    pub max_speed: f64,
}

impl Default for JointLimits {
    /// 130 degree windows per joint and a 9 rad/s no-load speed cap.
    fn default() -> Self {
        let deg = |d: f64| d.to_radians();
        Self {
            hip: RangeOfMotion {
                min: deg(-40.0),
                max: deg(90.0),
            },
            knee: RangeOfMotion {
                min: 0.0,
                max: deg(130.0),
            },
            ankle: RangeOfMotion {
                min: deg(-65.0),
                max: deg(65.0),
            },
            max_speed: 9.0,
        }
    }
}

impl JointLimits {
    pub fn range(&self, joint: Joint) -> RangeOfMotion {
        match joint {
            Joint::Hip => self.hip,
            Joint::Knee => self.knee,
            Joint::Ankle => self.ankle,
        }
    }

    pub fn check(&self, q: &JointAngles) -> Result<(), KinematicsError> {
        for joint in Joint::ALL {
            let r = self.range(joint);
            let value = q.get(joint);
            // small slack so that exact boundary values from planning survive rounding
            if !(value >= r.min - 1e-12 && value <= r.max + 1e-12) {
                return Err(KinematicsError::JointLimitExceeded {
                    joint,
                    value,
                    min: r.min,
                    max: r.max,
                });
            }
        }
        Ok(())
    }

    pub fn speed_ok(&self, qd: &JointAngles) -> bool {
        Joint::ALL
            .iter()
            .all(|&j| qd.get(j).abs() <= self.max_speed)
    }
}

/// Rotate `(x, z)` counter-clockwise in the sagittal plane (toes-up positive).
pub fn rotate(angle: f64, x: f64, z: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (x * c - z * s, x * s + z * c)
}

/// Angle of a hip-relative vector measured from straight down, positive forward.
pub fn angle_from_down(x: f64, z: f64) -> f64 {
    x.atan2(-z)
}

/// Ankle position relative to the hip. Ankle angle does not affect it.
pub fn forward_kinematics(geom: &LegGeometry, q: &JointAngles) -> PlanarPoint {
    let (t, s) = (geom.thigh_length, geom.shank_length);
    let shank = q.hip - q.knee;
    PlanarPoint::new(
        t * q.hip.sin() + s * shank.sin(),
        -t * q.hip.cos() - s * shank.cos(),
    )
}

/// Ankle position and velocity relative to the hip.
pub fn forward_kinematics_with_rates(geom: &LegGeometry, state: &JointState) -> PlanarPoint {
    let p = forward_kinematics(geom, &state.angles);
    let j = jacobian(geom, state.angles.hip, state.angles.knee);
    let (hd, kd) = (state.velocities.hip, state.velocities.knee);
    PlanarPoint::with_velocity(
        p.x,
        p.z,
        j[0][0] * hd + j[0][1] * kd,
        j[1][0] * hd + j[1][1] * kd,
    )
}

/// 2x2 Jacobian d(x, z)/d(hip, knee) of [`forward_kinematics`].
pub fn jacobian(geom: &LegGeometry, hip: f64, knee: f64) -> [[f64; 2]; 2] {
    let (t, s) = (geom.thigh_length, geom.shank_length);
    let shank = hip - knee;
    [
        [t * hip.cos() + s * shank.cos(), -s * shank.cos()],
        [t * hip.sin() + s * shank.sin(), -s * shank.sin()],
    ]
}

/// Hip and knee angles solving the two-link chain, knee-flexed branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub hip: f64,
    pub knee: f64,
    /// Knee is within [`NEAR_SINGULAR_KNEE`] of straight.
    pub near_singular: bool,
}

impl IkSolution {
    pub fn with_ankle(&self, ankle: f64) -> JointAngles {
        JointAngles::new(self.hip, self.knee, ankle)
    }
}

/// Solve hip and knee for a hip-relative ankle target. The returned knee is
/// always in `[0, pi]`.
pub fn inverse_kinematics(
    geom: &LegGeometry,
    target: &PlanarPoint,
) -> Result<IkSolution, KinematicsError> {
    let (t, s) = (geom.thigh_length, geom.shank_length);
    let r2 = target.x * target.x + target.z * target.z;
    let r = r2.sqrt();
    let max_reach = geom.max_reach() - REACH_MARGIN;
    let min_reach = geom.min_reach() + REACH_MARGIN;
    if !target.x.is_finite() || !target.z.is_finite() || r > max_reach || r < min_reach {
        return Err(KinematicsError::UnreachableTarget {
            x: target.x,
            z: target.z,
            min_reach,
            max_reach,
        });
    }
    let cos_knee = ((r2 - t * t - s * s) / (2.0 * t * s)).clamp(-1.0, 1.0);
    let knee = cos_knee.acos();
    let offset = (s * knee.sin()).atan2(t + s * knee.cos());
    let hip = angle_from_down(target.x, target.z) + offset;
    Ok(IkSolution {
        hip,
        knee,
        near_singular: knee < NEAR_SINGULAR_KNEE,
    })
}

/// Map a Cartesian ankle velocity (relative to the hip) to hip and knee rates.
pub fn joint_velocities_from_cartesian(
    geom: &LegGeometry,
    q: &JointAngles,
    vx: f64,
    vz: f64,
) -> Result<(f64, f64), KinematicsError> {
    let j = jacobian(geom, q.hip, q.knee);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det.abs() < SINGULAR_DET {
        return Err(KinematicsError::SingularJacobian { det });
    }
    let hip_rate = (j[1][1] * vx - j[0][1] * vz) / det;
    let knee_rate = (-j[1][0] * vx + j[0][0] * vz) / det;
    Ok((hip_rate, knee_rate))
}
