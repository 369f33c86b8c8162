//! Gait parameter sets: built-in presets, validation and the TOML config
//! format.
//!
//! A config file holds one `[section]` per named set. Each section starts
//! from a base set (`base = "<name>"`, defaulting to the builtin of the same
//! name) and overrides individual keys. Lengths are meters, times seconds,
//! percentages 0..100 and angles degrees (keys ending in `_deg`). Unknown
//! keys are rejected so that typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ParamError, Violation};
use crate::kinematics::{JointLimits, LegGeometry, NEAR_SINGULAR_KNEE};

/// Step-length bounds for stepping stones.
pub const STONES_RANGE: (f64, f64) = (0.35, 0.69);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParameters {
    pub step_length: f64,
    /// Apex clearance above the higher of the two footholds.
    pub swing_height: f64,
    /// Horizontal position of the lift-off apex waypoint, percent of the step.
    pub pct_back: f64,
    /// Distance of the landing apex waypoint from the goal, percent of the step.
    pub pct_front: f64,
    pub swing_time: f64,
    pub transfer_time: f64,
    /// Trailing-ankle plantar flexion reached at the end of transfer (rad, >= 0).
    pub toe_off_angle: f64,
    /// Extra plantar flexion added quickly at swing start (rad, >= 0).
    pub fast_toeoff_extra: f64,
    pub fast_toeoff_duration: f64,
    /// Height gained per step; the sign is applied by the behavior.
    pub step_rise: f64,
    /// Hip position between the feet at rest, as a fraction of the step
    /// length measured from the trailing foot.
    pub hip_offset: f64,
    /// Trailing-knee flexion reached at the end of transfer.
    pub preswing_knee: f64,
    /// Smallest leading-knee flexion accepted when standing.
    pub min_landing_knee: f64,
    /// Extra dorsiflexion of the swing ankle at mid-swing.
    pub swing_dorsiflexion: f64,
    /// Accepted step lengths, when the step length is chosen per step.
    pub step_length_range: Option<(f64, f64)>,
    /// Foothold length on stepping-stone terrain.
    pub pad_length: f64,
}

impl Default for GaitParameters {
    fn default() -> Self {
        flat()
    }
}

fn flat() -> GaitParameters {
    GaitParameters {
        step_length: 0.4,
        swing_height: 0.1,
        pct_back: 15.0,
        pct_front: 15.0,
        swing_time: 1.0,
        transfer_time: 0.4,
        toe_off_angle: 20f64.to_radians(),
        fast_toeoff_extra: 10f64.to_radians(),
        fast_toeoff_duration: 0.15,
        step_rise: 0.0,
        hip_offset: 0.55,
        preswing_knee: 15f64.to_radians(),
        min_landing_knee: 10f64.to_radians(),
        swing_dorsiflexion: 5f64.to_radians(),
        step_length_range: None,
        pad_length: 0.15,
    }
}

fn stairs() -> GaitParameters {
    GaitParameters {
        step_length: 0.29,
        swing_height: 0.15,
        pct_back: 20.0,
        pct_front: 20.0,
        swing_time: 1.6,
        transfer_time: 1.1,
        step_rise: 0.18,
        hip_offset: 0.5,
        ..flat()
    }
}

fn slopes() -> GaitParameters {
    GaitParameters {
        step_length: 0.31,
        swing_height: 0.08,
        pct_back: 20.0,
        pct_front: 20.0,
        swing_time: 1.2,
        transfer_time: 0.6,
        step_rise: 0.08,
        // hips 5 cm in front of the trailing foot
        hip_offset: 0.05 / 0.31,
        ..flat()
    }
}

fn stones() -> GaitParameters {
    GaitParameters {
        step_length: 0.5,
        swing_height: 0.1,
        pct_back: 15.0,
        pct_front: 15.0,
        swing_time: 1.8,
        transfer_time: 0.6,
        step_length_range: Some(STONES_RANGE),
        ..flat()
    }
}

impl GaitParameters {
    pub fn step_time(&self) -> f64 {
        self.transfer_time + self.swing_time
    }

    /// Copy with a different step length, checked against `step_length_range`.
    pub fn with_step_length(&self, step_length: f64) -> Result<Self, Vec<Violation>> {
        let p = Self {
            step_length,
            ..*self
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        self.validate_with(&JointLimits::default())
    }

    pub fn validate_with(&self, limits: &JointLimits) -> Result<(), Vec<Violation>> {
        let mut v = Vec::new();
        let mut check = |ok: bool, field: &'static str, constraint: String| {
            if !ok {
                v.push(Violation { field, constraint });
            }
        };
        check(self.step_length > 0.0, "step_length", format!("must be > 0 m, got {}", self.step_length));
        check(self.swing_height > 0.0, "swing_height", format!("must be > 0 m, got {}", self.swing_height));
        check(
            self.pct_back > 0.0 && self.pct_back < 100.0,
            "pct_back",
            format!("must lie in (0, 100), got {}", self.pct_back),
        );
        check(
            self.pct_front > 0.0 && self.pct_front < 100.0,
            "pct_front",
            format!("must lie in (0, 100), got {}", self.pct_front),
        );
        check(
            self.pct_back + self.pct_front < 100.0,
            "pct_back + pct_front",
            format!("must be < 100, got {}", self.pct_back + self.pct_front),
        );
        check(self.swing_time > 0.0, "swing_time", format!("must be > 0 s, got {}", self.swing_time));
        check(self.transfer_time > 0.0, "transfer_time", format!("must be > 0 s, got {}", self.transfer_time));
        check(
            self.toe_off_angle >= 0.0 && limits.ankle.contains(-self.toe_off_angle),
            "toe_off_angle",
            format!(
                "plantar flexion {:.2} deg must be >= 0 and within the ankle range [{:.1}, {:.1}] deg",
                self.toe_off_angle.to_degrees(),
                limits.ankle.min.to_degrees(),
                limits.ankle.max.to_degrees()
            ),
        );
        check(
            self.fast_toeoff_extra >= 0.0 && limits.ankle.contains(-self.toe_off_angle - self.fast_toeoff_extra),
            "fast_toeoff_extra",
            format!(
                "must be >= 0 and keep toe-off within the ankle range, got {:.2} deg",
                self.fast_toeoff_extra.to_degrees()
            ),
        );
        check(
            self.fast_toeoff_duration > 0.0 && self.fast_toeoff_duration < self.swing_time / 2.0,
            "fast_toeoff_duration",
            format!("must lie in (0, swing_time / 2), got {}", self.fast_toeoff_duration),
        );
        check(
            self.step_rise.is_finite() && self.step_rise.abs() < self.step_length,
            "step_rise",
            format!("magnitude must be below step_length, got {}", self.step_rise),
        );
        check(
            self.hip_offset > 0.0 && self.hip_offset < 1.0,
            "hip_offset",
            format!("must lie in (0, 1), got {}", self.hip_offset),
        );
        check(
            self.preswing_knee > 0.0 && self.preswing_knee < std::f64::consts::FRAC_PI_2,
            "preswing_knee",
            format!("must lie in (0, 90) deg, got {:.2}", self.preswing_knee.to_degrees()),
        );
        check(
            self.min_landing_knee >= NEAR_SINGULAR_KNEE && self.min_landing_knee < std::f64::consts::FRAC_PI_2,
            "min_landing_knee",
            format!("must lie in [1, 90) deg, got {:.2}", self.min_landing_knee.to_degrees()),
        );
        check(
            self.swing_dorsiflexion >= 0.0 && self.swing_dorsiflexion < limits.ankle.max,
            "swing_dorsiflexion",
            format!("must be >= 0 and below the ankle limit, got {:.2} deg", self.swing_dorsiflexion.to_degrees()),
        );
        check(self.pad_length > 0.0, "pad_length", format!("must be > 0 m, got {}", self.pad_length));
        if let Some((lo, hi)) = self.step_length_range {
            check(
                lo > 0.0 && lo <= hi,
                "step_length_range",
                format!("bounds must satisfy 0 < lo <= hi, got [{lo}, {hi}]"),
            );
            check(
                self.step_length >= lo && self.step_length <= hi,
                "step_length",
                format!("must lie in [{lo}, {hi}] m, got {}", self.step_length),
            );
        }
        let all_finite = [
            self.step_length,
            self.swing_height,
            self.pct_back,
            self.pct_front,
            self.swing_time,
            self.transfer_time,
            self.toe_off_angle,
            self.fast_toeoff_extra,
            self.fast_toeoff_duration,
            self.hip_offset,
            self.preswing_knee,
            self.min_landing_knee,
            self.swing_dorsiflexion,
            self.pad_length,
        ]
        .iter()
        .all(|x| x.is_finite());
        check(all_finite, "*", "all values must be finite".to_string());
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Builtin,
    File(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub name: String,
    pub params: GaitParameters,
    pub source: Source,
}

pub const PRESET_NAMES: [&str; 4] = ["flat", "stairs", "slopes", "stones"];

pub fn builtin_presets() -> Vec<ParameterSet> {
    [("flat", flat()), ("stairs", stairs()), ("slopes", slopes()), ("stones", stones())]
        .into_iter()
        .map(|(name, params)| ParameterSet {
            name: name.to_string(),
            params,
            source: Source::Builtin,
        })
        .collect()
}

pub fn builtin(name: &str) -> Option<GaitParameters> {
    builtin_presets().into_iter().find(|s| s.name == name).map(|s| s.params)
}

/// Named parameter sets; starts with the builtins.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    sets: BTreeMap<String, ParameterSet>,
}

impl Default for ParameterStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParameterStore {
    pub fn new() -> Self {
        Self {
            sets: builtin_presets().into_iter().map(|s| (s.name.clone(), s)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&ParameterSet> {
        self.sets.get(name)
    }

    pub fn params(&self, name: &str) -> Option<GaitParameters> {
        self.sets.get(name).map(|s| s.params)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }

    pub fn sets(&self) -> impl Iterator<Item = &ParameterSet> {
        self.sets.values()
    }

    /// Insert or replace a set after validating it.
    pub fn insert(&mut self, set: ParameterSet) -> Result<(), ParamError> {
        set.params.validate().map_err(|violations| ParamError::Validation {
            set: set.name.clone(),
            violations,
        })?;
        self.sets.insert(set.name.clone(), set);
        Ok(())
    }

    /// Load a config file and add (or replace) every set it defines.
    pub fn load_file(&mut self, path: impl AsRef<Path>) -> Result<Vec<String>, ParamError> {
        let loaded = load_file(path)?;
        let names = loaded.iter().map(|s| s.name.clone()).collect();
        for set in loaded {
            self.sets.insert(set.name.clone(), set);
        }
        Ok(names)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    thigh_length: Option<f64>,
    shank_length: Option<f64>,
    foot_forward_length: Option<f64>,
    ankle_height: Option<f64>,
}

/// Leg geometry from a TOML file of top-level keys in meters
/// (`thigh_length`, `shank_length`, `foot_forward_length`, `ankle_height`).
/// Missing keys keep their defaults.
pub fn parse_geometry(text: &str) -> Result<LegGeometry, ParamError> {
    let f: GeometryFile = toml::from_str(text).map_err(|e| ParamError::Parse(e.to_string()))?;
    let d = LegGeometry::default();
    let g = LegGeometry {
        thigh_length: f.thigh_length.unwrap_or(d.thigh_length),
        shank_length: f.shank_length.unwrap_or(d.shank_length),
        foot_forward_length: f.foot_forward_length.unwrap_or(d.foot_forward_length),
        ankle_height: f.ankle_height.unwrap_or(d.ankle_height),
    };
    g.validate().map_err(|e| ParamError::Parse(format!("geometry: {e}")))?;
    Ok(g)
}

pub fn load_geometry(path: impl AsRef<Path>) -> Result<LegGeometry, ParamError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ParamError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_geometry(&text)
}

/// Read and validate every set in a config file.
pub fn load_file(path: impl AsRef<Path>) -> Result<Vec<ParameterSet>, ParamError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ParamError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text, Source::File(path.display().to_string()))
}

pub fn parse(text: &str, source: Source) -> Result<Vec<ParameterSet>, ParamError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ParamError::Parse(e.to_string()))?;
    let mut out = Vec::new();
    for (name, section) in &table {
        let section = section
            .as_table()
            .ok_or_else(|| ParamError::Parse(format!("'{name}' must be a [section]")))?;
        let params = parse_section(name, section)?;
        params.validate().map_err(|violations| ParamError::Validation {
            set: name.clone(),
            violations,
        })?;
        out.push(ParameterSet {
            name: name.clone(),
            params,
            source: source.clone(),
        });
    }
    Ok(out)
}

fn number(section: &str, key: &str, value: &toml::Value) -> Result<f64, ParamError> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(ParamError::Parse(format!("[{section}] {key}: expected a number"))),
    }
}

fn parse_section(name: &str, section: &toml::Table) -> Result<GaitParameters, ParamError> {
    let base_name = match section.get("base") {
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err(ParamError::Parse(format!("[{name}] base: expected a preset name"))),
        None => name.to_string(),
    };
    let mut p = builtin(&base_name).ok_or_else(|| {
        ParamError::Parse(format!(
            "[{name}] has no base: set base to one of {}",
            PRESET_NAMES.join(", ")
        ))
    })?;
    for (key, value) in section {
        let num = || number(name, key, value);
        match key.as_str() {
            "base" => {}
            "step_length" => p.step_length = num()?,
            "swing_height" => p.swing_height = num()?,
            "pct_back" => p.pct_back = num()?,
            "pct_front" => p.pct_front = num()?,
            "swing_time" => p.swing_time = num()?,
            "transfer_time" => p.transfer_time = num()?,
            "toe_off_angle_deg" => p.toe_off_angle = num()?.to_radians(),
            "fast_toeoff_extra_deg" => p.fast_toeoff_extra = num()?.to_radians(),
            "fast_toeoff_duration" => p.fast_toeoff_duration = num()?,
            "step_rise" => p.step_rise = num()?,
            "hip_offset" => p.hip_offset = num()?,
            "preswing_knee_deg" => p.preswing_knee = num()?.to_radians(),
            "min_landing_knee_deg" => p.min_landing_knee = num()?.to_radians(),
            "swing_dorsiflexion_deg" => p.swing_dorsiflexion = num()?.to_radians(),
            "pad_length" => p.pad_length = num()?,
            "step_length_range" => {
                let arr = value
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| ParamError::Parse(format!("[{name}] step_length_range: expected [min, max]")))?;
                p.step_length_range = Some((number(name, key, &arr[0])?, number(name, key, &arr[1])?));
            }
            other => return Err(ParamError::Parse(format!("[{name}] unknown key '{other}'"))),
        }
    }
    Ok(p)
}

/// Degrees rounded to 1e-9 so that whole-degree values print as such.
fn degrees(rad: f64) -> f64 {
    (rad.to_degrees() * 1e9).round() / 1e9
}

/// Serialize sets in the config format. Every key is written explicitly so
/// the output does not depend on the builtin defaults except for the
/// optional step-length range.
pub fn to_toml(sets: &[ParameterSet]) -> String {
    let mut s = String::new();
    for set in sets {
        let p = &set.params;
        let _ = writeln!(s, "[{}]", set.name);
        if p.step_length_range.is_none() {
            let _ = writeln!(s, "base = \"flat\"");
        } else {
            let _ = writeln!(s, "base = \"stones\"");
        }
        let _ = writeln!(s, "step_length = {:?}", p.step_length);
        let _ = writeln!(s, "swing_height = {:?}", p.swing_height);
        let _ = writeln!(s, "pct_back = {:?}", p.pct_back);
        let _ = writeln!(s, "pct_front = {:?}", p.pct_front);
        let _ = writeln!(s, "swing_time = {:?}", p.swing_time);
        let _ = writeln!(s, "transfer_time = {:?}", p.transfer_time);
        let _ = writeln!(s, "toe_off_angle_deg = {:?}", degrees(p.toe_off_angle));
        let _ = writeln!(s, "fast_toeoff_extra_deg = {:?}", degrees(p.fast_toeoff_extra));
        let _ = writeln!(s, "fast_toeoff_duration = {:?}", p.fast_toeoff_duration);
        let _ = writeln!(s, "step_rise = {:?}", p.step_rise);
        let _ = writeln!(s, "hip_offset = {:?}", p.hip_offset);
        let _ = writeln!(s, "preswing_knee_deg = {:?}", degrees(p.preswing_knee));
        let _ = writeln!(s, "min_landing_knee_deg = {:?}", degrees(p.min_landing_knee));
        let _ = writeln!(s, "swing_dorsiflexion_deg = {:?}", degrees(p.swing_dorsiflexion));
        let _ = writeln!(s, "pad_length = {:?}", p.pad_length);
        if let Some((lo, hi)) = p.step_length_range {
            let _ = writeln!(s, "step_length_range = [{lo:?}, {hi:?}]");
        }
        s.push('\n');
    }
    s
}
