//! Ground profiles used to check swing-foot clearance.
//!
//! Heights are measured from `origin`, the trailing foothold at the start of
//! a step, with `x` increasing in the direction of ascent.

use crate::params::GaitParameters;
use crate::planner::Behavior;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Flat,
    /// Risers halfway between footholds.
    Stairs,
    Ramp,
    /// Flat ground with footholds of `pad_length` at every step.
    Stones,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terrain {
    pub profile: Profile,
    pub run: f64,
    pub rise: f64,
    pub pad_length: f64,
    pub origin: (f64, f64),
}

impl Terrain {
    pub fn for_behavior(behavior: Behavior, params: &GaitParameters, origin: (f64, f64)) -> Self {
        let (profile, run, rise) = match behavior {
            Behavior::StairsUp | Behavior::StairsDown => (Profile::Stairs, params.step_length, params.step_rise),
            Behavior::RampUp => (Profile::Ramp, params.step_length, params.step_rise),
            Behavior::RampDown => (Profile::Ramp, params.step_length, -params.step_rise),
            Behavior::SteppingStones(len) => (Profile::Stones, len, 0.0),
            Behavior::FlatWalk | Behavior::Stand => (Profile::Flat, params.step_length, 0.0),
        };
        Self {
            profile,
            run,
            rise,
            pad_length: params.pad_length,
            origin,
        }
    }

    pub fn height(&self, x: f64) -> f64 {
        let u = (x - self.origin.0) / self.run;
        let dz = match self.profile {
            Profile::Flat | Profile::Stones => 0.0,
            Profile::Stairs => self.rise * (u + 0.5).floor(),
            Profile::Ramp => self.rise * u,
        };
        self.origin.1 + dz
    }

    /// Surface pitch, toes up positive.
    pub fn pitch(&self) -> f64 {
        match self.profile {
            Profile::Ramp => self.rise.atan2(self.run),
            _ => 0.0,
        }
    }

    /// Whether `x` lies on a foothold. Only stones have gaps.
    pub fn supports(&self, x: f64) -> bool {
        match self.profile {
            Profile::Stones => {
                let rel = x - self.origin.0;
                let nearest = (rel / self.run).round() * self.run;
                (rel - nearest).abs() <= self.pad_length / 2.0 + 1e-9
            }
            _ => true,
        }
    }
}
