//! Scripted engine runs, CSV traces and phase-normalized average steps.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineConfig, EngineState, Phase, Side, SupportSide};
use crate::error::TraceError;
use crate::kinematics::{Joint, JointAngles, LegGeometry};
use crate::minjerk::period_count;

/// Standing time before the first trigger of a scripted run (s).
pub const LEAD_IN: f64 = 0.1;
/// Points on the normalized step-time grid.
pub const GRID_POINTS: usize = 101;

pub fn lead_in_ticks(dt: f64) -> usize {
    period_count(LEAD_IN, dt)
}

/// One engine tick. Angles in rad, rates in rad/s, positions in m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    #[serde(rename = "t_s")]
    pub t: f64,
    pub phase: Phase,
    /// Number of the step in progress, counting from 1; 0 while standing.
    pub step: u64,
    pub support: SupportSide,
    #[serde(rename = "left_hip_rad")]
    pub left_hip: f64,
    #[serde(rename = "left_knee_rad")]
    pub left_knee: f64,
    #[serde(rename = "left_ankle_rad")]
    pub left_ankle: f64,
    #[serde(rename = "left_hip_vel_rad_s")]
    pub left_hip_vel: f64,
    #[serde(rename = "left_knee_vel_rad_s")]
    pub left_knee_vel: f64,
    #[serde(rename = "left_ankle_vel_rad_s")]
    pub left_ankle_vel: f64,
    #[serde(rename = "right_hip_rad")]
    pub right_hip: f64,
    #[serde(rename = "right_knee_rad")]
    pub right_knee: f64,
    #[serde(rename = "right_ankle_rad")]
    pub right_ankle: f64,
    #[serde(rename = "right_hip_vel_rad_s")]
    pub right_hip_vel: f64,
    #[serde(rename = "right_knee_vel_rad_s")]
    pub right_knee_vel: f64,
    #[serde(rename = "right_ankle_vel_rad_s")]
    pub right_ankle_vel: f64,
    #[serde(rename = "left_foot_x_m")]
    pub left_foot_x: f64,
    #[serde(rename = "left_foot_z_m")]
    pub left_foot_z: f64,
    #[serde(rename = "right_foot_x_m")]
    pub right_foot_x: f64,
    #[serde(rename = "right_foot_z_m")]
    pub right_foot_z: f64,
    #[serde(rename = "hip_frame_x_m")]
    pub hip_frame_x: f64,
    #[serde(rename = "hip_frame_z_m")]
    pub hip_frame_z: f64,
}

impl TraceRow {
    pub fn from_state(state: &EngineState, geom: &LegGeometry) -> Self {
        let (l, r) = (state.left, state.right);
        let lf = state.foot(geom, Side::Left);
        let rf = state.foot(geom, Side::Right);
        Self {
            t: state.time,
            phase: state.phase,
            step: match state.phase {
                Phase::Standing => 0,
                _ => state.step_count + 1,
            },
            support: state.support_side,
            left_hip: l.angles.hip,
            left_knee: l.angles.knee,
            left_ankle: l.angles.ankle,
            left_hip_vel: l.velocities.hip,
            left_knee_vel: l.velocities.knee,
            left_ankle_vel: l.velocities.ankle,
            right_hip: r.angles.hip,
            right_knee: r.angles.knee,
            right_ankle: r.angles.ankle,
            right_hip_vel: r.velocities.hip,
            right_knee_vel: r.velocities.knee,
            right_ankle_vel: r.velocities.ankle,
            left_foot_x: lf.x,
            left_foot_z: lf.z,
            right_foot_x: rf.x,
            right_foot_z: rf.z,
            hip_frame_x: state.hip_frame_x,
            hip_frame_z: state.hip_frame_z,
        }
    }

    pub fn angles(&self, side: Side) -> JointAngles {
        match side {
            Side::Left => JointAngles::new(self.left_hip, self.left_knee, self.left_ankle),
            Side::Right => JointAngles::new(self.right_hip, self.right_knee, self.right_ankle),
        }
    }

    pub fn foot(&self, side: Side) -> (f64, f64) {
        match side {
            Side::Left => (self.left_foot_x, self.left_foot_z),
            Side::Right => (self.right_foot_x, self.right_foot_z),
        }
    }
}

/// Run `steps` steps of `config.behavior`, triggering each one as soon as
/// the trigger window opens so that walking is continuous. The series starts
/// with the initial state and a standing lead-in of [`LEAD_IN`] seconds and
/// ends on the tick the engine is standing again.
pub fn run_scripted(config: EngineConfig, steps: usize) -> Result<Vec<TraceRow>, TraceError> {
    if steps == 0 {
        return Err(TraceError::NoSteps);
    }
    if !config.behavior.steps() {
        return Err(TraceError::IdleBehavior(config.behavior.to_string()));
    }
    let mut engine = Engine::new(config)?;
    let geom = *engine.geometry();
    let params = engine.params();
    let lead_in = lead_in_ticks(engine.dt());
    // generous bound so a stuck script fails instead of spinning
    let max_ticks = lead_in + (steps + 1) * period_count(params.step_time() * 4.0, engine.dt());

    let mut rows = vec![TraceRow::from_state(engine.state(), &geom)];
    for _ in 0..lead_in {
        rows.push(TraceRow::from_state(engine.tick()?, &geom));
    }
    let mut triggered = 0;
    for _ in 0..max_ticks {
        if triggered < steps && !engine.state().pending_trigger && engine.trigger() {
            triggered += 1;
        }
        let state = *engine.tick()?;
        rows.push(TraceRow::from_state(&state, &geom));
        if state.step_count as usize >= steps && state.phase == Phase::Standing {
            return Ok(rows);
        }
    }
    Err(TraceError::Malformed(format!("run did not finish {steps} steps within {max_ticks} ticks")))
}

/// Row types with a fixed CSV header.
pub trait CsvRecord: Serialize + for<'de> Deserialize<'de> {
    const COLUMNS: &'static [&'static str];
}

/// Header row then one row per record. Numbers use Rust's shortest
/// round-trip formatting, which does not depend on the locale.
pub fn write_csv<W: Write, T: CsvRecord>(rows: &[T], out: W) -> Result<(), TraceError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(T::COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read, T: CsvRecord>(input: R) -> Result<Vec<T>, TraceError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if !header.iter().eq(T::COLUMNS.iter().copied()) {
        return Err(TraceError::Malformed(format!(
            "unexpected header '{}'",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(TraceError::from)).collect()
}

pub fn export_csv<T: CsvRecord>(rows: &[T], path: impl AsRef<Path>) -> Result<(), TraceError> {
    let f = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(f))
}

pub fn import_csv<T: CsvRecord>(path: impl AsRef<Path>) -> Result<Vec<T>, TraceError> {
    read_csv(std::fs::File::open(path)?)
}

impl CsvRecord for TraceRow {
    const COLUMNS: &'static [&'static str] = &[
        "t_s",
        "phase",
        "step",
        "support",
        "left_hip_rad",
        "left_knee_rad",
        "left_ankle_rad",
        "left_hip_vel_rad_s",
        "left_knee_vel_rad_s",
        "left_ankle_vel_rad_s",
        "right_hip_rad",
        "right_knee_rad",
        "right_ankle_rad",
        "right_hip_vel_rad_s",
        "right_knee_vel_rad_s",
        "right_ankle_vel_rad_s",
        "left_foot_x_m",
        "left_foot_z_m",
        "right_foot_x_m",
        "right_foot_z_m",
        "hip_frame_x_m",
        "hip_frame_z_m",
    ];
}

/// One step cut out of a series: its samples from step time 0 to the end,
/// inclusive, with the phase each interval starts in.
#[derive(Debug, Clone)]
pub struct StepSlice {
    pub number: u64,
    pub rows: Vec<TraceRow>,
    pub phases: Vec<Phase>,
    /// The leg that swings.
    pub swing_side: Side,
}

impl StepSlice {
    pub fn duration(&self) -> f64 {
        self.rows[self.rows.len() - 1].t - self.rows[0].t
    }

    /// Fraction of the step spent in transfer, counted in ticks, and where
    /// that region sits on the normalized time axis.
    pub fn transfer_region(&self) -> (f64, f64) {
        let n = (self.rows.len() - 1) as f64;
        let idx: Vec<usize> = (0..self.rows.len() - 1)
            .filter(|&i| self.phases[i] == Phase::Transfer)
            .collect();
        match (idx.first(), idx.last()) {
            (Some(&a), Some(&b)) => (a as f64 / n, (b + 1) as f64 / n),
            _ => (0.0, 0.0),
        }
    }

    /// Angles of one role at normalized time `u` in [0, 1], linearly
    /// interpolated between ticks.
    pub fn angles_at(&self, role: LegRole, u: f64) -> JointAngles {
        let side = match role {
            LegRole::Swing => self.swing_side,
            LegRole::Stance => self.swing_side.other(),
        };
        let pos = u.clamp(0.0, 1.0) * (self.rows.len() - 1) as f64;
        let i = (pos.floor() as usize).min(self.rows.len() - 2);
        let w = pos - i as f64;
        let (a, b) = (self.rows[i].angles(side), self.rows[i + 1].angles(side));
        JointAngles::from_fn(|j| a.get(j) + w * (b.get(j) - a.get(j)))
    }
}

/// Split a series into its complete steps. A step entered from standing
/// starts at the standing sample just before it.
pub fn split_steps(rows: &[TraceRow]) -> Vec<StepSlice> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let number = rows[i].step;
        if number == 0 {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < rows.len() && rows[j].step == number {
            j += 1;
        }
        // complete only if the next sample (the step's end) exists
        if j < rows.len() {
            let start = if i > 0 && rows[i - 1].phase == Phase::Standing { i - 1 } else { i };
            let slice: Vec<TraceRow> = rows[start..=j].to_vec();
            let mut phases: Vec<Phase> = slice.iter().map(|r| r.phase).collect();
            phases[0] = rows[i].phase;
            let support = rows[i..j].iter().find(|r| r.phase == Phase::Swing).map(|r| r.support);
            let swing_side = match support {
                Some(SupportSide::Left) => Side::Right,
                Some(SupportSide::Right) => Side::Left,
                _ => {
                    i = j;
                    continue;
                }
            };
            out.push(StepSlice {
                number,
                rows: slice,
                phases,
                swing_side,
            });
        }
        i = j;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegRole {
    Swing,
    Stance,
}

/// Mean joint angles of the swing and the stance leg over normalized step
/// time, averaged over every complete step but the first.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedStepTrace {
    /// Normalized time grid, `GRID_POINTS` values from 0 to 1.
    pub u: Vec<f64>,
    pub swing: Vec<JointAngles>,
    pub stance: Vec<JointAngles>,
    /// Normalized time span of the transfer phase.
    pub transfer_region: (f64, f64),
    pub steps_averaged: usize,
}

impl NormalizedStepTrace {
    pub fn transfer_fraction(&self) -> f64 {
        self.transfer_region.1 - self.transfer_region.0
    }

    pub fn series(&self, role: LegRole, joint: Joint) -> Vec<f64> {
        let v = match role {
            LegRole::Swing => &self.swing,
            LegRole::Stance => &self.stance,
        };
        v.iter().map(|a| a.get(joint)).collect()
    }

    pub fn in_transfer(&self, u: f64) -> bool {
        u >= self.transfer_region.0 - 1e-12 && u <= self.transfer_region.1 + 1e-12
    }

    pub fn rows(&self) -> Vec<NormalizedRow> {
        (0..self.u.len())
            .map(|i| NormalizedRow {
                u: self.u[i],
                in_transfer: self.in_transfer(self.u[i]),
                swing_hip: self.swing[i].hip,
                swing_knee: self.swing[i].knee,
                swing_ankle: self.swing[i].ankle,
                stance_hip: self.stance[i].hip,
                stance_knee: self.stance[i].knee,
                stance_ankle: self.stance[i].ankle,
                transfer_start: self.transfer_region.0,
                transfer_end: self.transfer_region.1,
            })
            .collect()
    }
}

pub fn normalize_steps(rows: &[TraceRow]) -> Result<NormalizedStepTrace, TraceError> {
    let steps = split_steps(rows);
    if steps.len() < 2 {
        return Err(TraceError::InsufficientSteps {
            needed: 2,
            found: steps.len(),
        });
    }
    let used = &steps[1..];
    let n = used.len() as f64;
    let u: Vec<f64> = (0..GRID_POINTS).map(|k| k as f64 / (GRID_POINTS - 1) as f64).collect();
    let mean = |role: LegRole| -> Vec<JointAngles> {
        u.iter()
            .map(|&x| {
                let sum = used.iter().fold(JointAngles::ZERO, |acc, s| {
                    let a = s.angles_at(role, x);
                    JointAngles::from_fn(|j| acc.get(j) + a.get(j))
                });
                JointAngles::from_fn(|j| sum.get(j) / n)
            })
            .collect()
    };
    let (mut t0, mut t1) = (0.0, 0.0);
    for s in used {
        let (a, b) = s.transfer_region();
        t0 += a / n;
        t1 += b / n;
    }
    Ok(NormalizedStepTrace {
        swing: mean(LegRole::Swing),
        stance: mean(LegRole::Stance),
        u,
        transfer_region: (t0, t1),
        steps_averaged: used.len(),
    })
}

/// One grid point of a normalized step (angles in rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub u: f64,
    pub in_transfer: bool,
    #[serde(rename = "swing_hip_rad")]
    pub swing_hip: f64,
    #[serde(rename = "swing_knee_rad")]
    pub swing_knee: f64,
    #[serde(rename = "swing_ankle_rad")]
    pub swing_ankle: f64,
    #[serde(rename = "stance_hip_rad")]
    pub stance_hip: f64,
    #[serde(rename = "stance_knee_rad")]
    pub stance_knee: f64,
    #[serde(rename = "stance_ankle_rad")]
    pub stance_ankle: f64,
    pub transfer_start: f64,
    pub transfer_end: f64,
}

impl CsvRecord for NormalizedRow {
    const COLUMNS: &'static [&'static str] = &[
        "u",
        "in_transfer",
        "swing_hip_rad",
        "swing_knee_rad",
        "swing_ankle_rad",
        "stance_hip_rad",
        "stance_knee_rad",
        "stance_ankle_rad",
        "transfer_start",
        "transfer_end",
    ];
}
