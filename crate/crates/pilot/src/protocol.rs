//! Wire protocol: one JSON object per line, UTF-8, `\n` terminated.
//!
//! Every message carries `"v": 1` and a `type`. The remaining fields sit
//! next to them (no nesting). Fields a receiver does not know are ignored.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use exo_gait::engine::{EngineState, Facing, Phase, Side, SupportSide, TRIGGER_WINDOW};
use exo_gait::kinematics::LegGeometry;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Controller,
    Observer,
}

/// Messages a console sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Ask for a role. Sessions start as controller when the seat is free.
    Hello {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        role: Option<Role>,
    },
    Trigger {
        /// Echoed in the acknowledgement.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
    Behavior {
        /// `flat`, `stairs-up`, `stairs-down`, `ramp-up`, `ramp-down`,
        /// `stones:<m>` or `stand`.
        behavior: String,
        /// Turn around before selecting the behavior.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reorient: Option<Facing>,
    },
    Params {
        name: String,
    },
}

/// Messages the service sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(HelloMessage),
    State(StateMessage),
    TriggerAck {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        accepted: bool,
        phase: Phase,
        step_remaining: f64,
    },
    /// Confirms a behavior selection.
    Behavior {
        behavior: String,
        facing: Facing,
    },
    /// Confirms a parameter set selection.
    Params {
        name: String,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedMessage,
    UnsupportedVersion,
    NotController,
    ControllerTaken,
    InvalidBehavior,
    BehaviorChangeWhileMoving,
    IncompatibleTransition,
    UnknownParameterSet,
    PlanFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloMessage {
    pub role: Role,
    pub protocol: u32,
    pub rate_hz: f64,
    pub dt: f64,
    pub trigger_window: f64,
    pub thigh_length: f64,
    pub shank_length: f64,
    pub foot_forward_length: f64,
    pub ankle_height: f64,
}

impl HelloMessage {
    pub fn new(role: Role, rate_hz: f64, dt: f64, geom: &LegGeometry) -> Self {
        Self {
            role,
            protocol: PROTOCOL_VERSION,
            rate_hz,
            dt,
            trigger_window: TRIGGER_WINDOW,
            thigh_length: geom.thigh_length,
            shank_length: geom.shank_length,
            foot_forward_length: geom.foot_forward_length,
            ankle_height: geom.ankle_height,
        }
    }
}

/// Engine snapshot. Angles in rad, rates in rad/s, lengths in m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub t: f64,
    pub phase: Phase,
    pub phase_elapsed: f64,
    pub phase_duration: f64,
    pub step_remaining: f64,
    /// Seconds until a trigger would be accepted; 0 when armed.
    pub trigger_window_in: f64,
    pub trigger_armed: bool,
    pub behavior: String,
    pub params: String,
    pub facing: Facing,
    pub pending_trigger: bool,
    pub support: SupportSide,
    pub trailing_side: Side,
    pub step_count: u64,
    pub hip_frame_x: f64,
    pub hip_frame_z: f64,
    pub left_hip: f64,
    pub left_knee: f64,
    pub left_ankle: f64,
    pub left_hip_vel: f64,
    pub left_knee_vel: f64,
    pub left_ankle_vel: f64,
    pub right_hip: f64,
    pub right_knee: f64,
    pub right_ankle: f64,
    pub right_hip_vel: f64,
    pub right_knee_vel: f64,
    pub right_ankle_vel: f64,
}

impl StateMessage {
    pub fn new(s: &EngineState, params: &str, armed: bool) -> Self {
        Self {
            t: s.time,
            phase: s.phase,
            phase_elapsed: s.phase_elapsed,
            phase_duration: s.phase_duration,
            step_remaining: s.step_remaining,
            trigger_window_in: s.time_to_trigger_window(),
            trigger_armed: armed,
            behavior: s.active_behavior.to_string(),
            params: params.to_string(),
            facing: s.facing,
            pending_trigger: s.pending_trigger,
            support: s.support_side,
            trailing_side: s.trailing_side,
            step_count: s.step_count,
            hip_frame_x: s.hip_frame_x,
            hip_frame_z: s.hip_frame_z,
            left_hip: s.left.angles.hip,
            left_knee: s.left.angles.knee,
            left_ankle: s.left.angles.ankle,
            left_hip_vel: s.left.velocities.hip,
            left_knee_vel: s.left.velocities.knee,
            left_ankle_vel: s.left.velocities.ankle,
            right_hip: s.right.angles.hip,
            right_knee: s.right.angles.knee,
            right_ankle: s.right.angles.ankle,
            right_hip_vel: s.right.velocities.hip,
            right_knee_vel: s.right.velocities.knee,
            right_ankle_vel: s.right.velocities.ankle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0}, expected {PROTOCOL_VERSION}")]
    UnsupportedVersion(u64),
}

impl ProtocolError {
    pub fn code(&self) -> ErrorCode {
        match self {
            ProtocolError::Malformed(_) => ErrorCode::MalformedMessage,
            ProtocolError::UnsupportedVersion(_) => ErrorCode::UnsupportedVersion,
        }
    }

    pub fn reply(&self) -> ServerMessage {
        ServerMessage::Error {
            code: self.code(),
            message: self.to_string(),
        }
    }
}

#[derive(Serialize)]
struct Outgoing<'a, T> {
    v: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// One line, without the trailing newline.
pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(&Outgoing {
        v: PROTOCOL_VERSION,
        body: msg,
    })
    .expect("protocol messages always serialize")
}

/// Parse one line. The version is checked before the message type.
pub fn decode<T: DeserializeOwned>(line: &str) -> Result<T, ProtocolError> {
    let value: serde_json::Value =
        serde_json::from_str(line.trim()).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ProtocolError::Malformed("expected a JSON object".into()))?;
    match obj.get("v") {
        None => return Err(ProtocolError::Malformed("missing version field \"v\"".into())),
        Some(v) => match v.as_u64() {
            Some(1) => {}
            Some(other) => return Err(ProtocolError::UnsupportedVersion(other)),
            None => return Err(ProtocolError::Malformed(format!("version must be an integer, got {v}"))),
        },
    }
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

pub fn decode_command(line: &str) -> Result<ClientMessage, ProtocolError> {
    decode(line)
}

pub fn encode_state(state: &EngineState, params: &str, armed: bool) -> String {
    encode(&ServerMessage::State(StateMessage::new(state, params, armed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use exo_gait::engine::{Engine, EngineConfig};

    #[test]
    fn command_round_trip() {
        let commands = [
            ClientMessage::Hello { role: None },
            ClientMessage::Hello {
                role: Some(Role::Observer),
            },
            ClientMessage::Trigger { id: Some(7) },
            ClientMessage::Trigger { id: None },
            ClientMessage::Behavior {
                behavior: "stairs-down".into(),
                reorient: Some(Facing::Backward),
            },
            ClientMessage::Behavior {
                behavior: "stones:0.5".into(),
                reorient: None,
            },
            ClientMessage::Params { name: "stairs".into() },
        ];
        for c in commands {
            let line = encode(&c);
            assert!(line.contains("\"v\":1"), "{line}");
            assert_eq!(decode_command(&line).unwrap(), c);
            assert_eq!(encode(&decode_command(&line).unwrap()), line);
        }
    }

    #[test]
    fn wire_shape() {
        assert_eq!(encode(&ClientMessage::Trigger { id: Some(3) }), r#"{"v":1,"type":"trigger","id":3}"#);
        assert_eq!(
            decode_command(r#"{"type":"params","v":1,"name":"flat"}"#).unwrap(),
            ClientMessage::Params { name: "flat".into() }
        );
    }

    #[test]
    fn unknown_fields_ignored() {
        let c = decode_command(r#"{"v":1,"type":"trigger","id":1,"pressure":0.7,"extra":{"a":[1]}}"#).unwrap();
        assert_eq!(c, ClientMessage::Trigger { id: Some(1) });
    }

    #[test]
    fn version_is_mandatory() {
        assert!(matches!(
            decode_command(r#"{"type":"trigger"}"#),
            Err(ProtocolError::Malformed(m)) if m.contains("version")
        ));
        assert_eq!(
            decode_command(r#"{"v":2,"type":"trigger"}"#),
            Err(ProtocolError::UnsupportedVersion(2))
        );
        assert!(decode_command(r#"{"v":"1","type":"trigger"}"#).is_err());
    }

    #[test]
    fn garbage_is_malformed() {
        for line in ["", "not json", "[1,2]", r#"{"v":1}"#, r#"{"v":1,"type":"dance"}"#, r#"{"v":1,"type":"params"}"#] {
            let err = decode_command(line).unwrap_err();
            assert_eq!(err.code(), ErrorCode::MalformedMessage, "{line}");
            let reply = encode(&err.reply());
            assert!(reply.starts_with(r#"{"v":1,"type":"error","code":"malformed_message""#), "{reply}");
        }
    }

    #[test]
    fn state_message_maps_every_field() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.trigger();
        for _ in 0..600 {
            e.tick().unwrap();
        }
        let s = *e.state();
        let line = encode_state(&s, "flat", e.trigger_window_open());
        let back: ServerMessage = decode(&line).unwrap();
        let ServerMessage::State(m) = back else { panic!("{line}") };
        assert_eq!(m, StateMessage::new(&s, "flat", true));
        assert_eq!(m.phase, Phase::Swing);
        assert!((m.step_remaining - 0.2).abs() < 1e-9);
        assert_eq!(m.trigger_window_in, 0.0);
        assert_eq!(m.left_knee, s.left.angles.knee);
        assert_eq!(m.right_ankle_vel, s.right.velocities.ankle);
        assert!(line.contains(r#""type":"state""#));
        assert!(line.contains(r#""phase":"swing""#));
    }

    #[test]
    fn server_messages_round_trip() {
        let msgs = [
            ServerMessage::Hello(HelloMessage::new(Role::Observer, 50.0, 0.002, &LegGeometry::default())),
            ServerMessage::TriggerAck {
                id: Some(2),
                accepted: false,
                phase: Phase::Swing,
                step_remaining: 0.3,
            },
            ServerMessage::Behavior {
                behavior: "flat".into(),
                facing: Facing::Forward,
            },
            ServerMessage::Params { name: "x".into() },
            ServerMessage::Error {
                code: ErrorCode::NotController,
                message: "observers cannot trigger".into(),
            },
        ];
        for m in msgs {
            let back: ServerMessage = decode(&encode(&m)).unwrap();
            assert_eq!(back, m);
        }
    }
}
