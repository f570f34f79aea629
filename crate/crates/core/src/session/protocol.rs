//! Newline-delimited JSON messages exchanged with the viewer.

use serde::{Deserialize, Serialize};

use super::config::SessionConfig;
use super::engine::GazeEvent;
use crate::error::DroemError;
use crate::render::WireFrame;

pub const PROTOCOL_VERSION: u32 = 1;

/// How the service advances simulated time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clock {
    /// One step per `dt` of wall time.
    #[default]
    Wall,
    /// Steps are driven by gaze timestamps, as in scripted runs.
    Events,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    #[serde(flatten)]
    pub frame: WireFrame,
    pub step: u64,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Message {
    Hello {
        version: u32,
        #[serde(default)]
        clock: Clock,
    },
    Config {
        config: Box<SessionConfig>,
    },
    Gaze(GazeEvent),
    Frame(FrameMessage),
    Error {
        code: ErrorCode,
        detail: String,
    },
    Bye {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steps: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dropped: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        record: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    GazeDomain,
    GazeOrder,
    BadMessage,
    ConfigRejected,
    Internal,
}

impl ErrorCode {
    pub fn for_error(e: &DroemError) -> Self {
        match e {
            DroemError::GazeDomain(_) => ErrorCode::GazeDomain,
            DroemError::GazeOrder(_) => ErrorCode::GazeOrder,
            DroemError::Parse(_) | DroemError::Json(_) => ErrorCode::BadMessage,
            _ => ErrorCode::Internal,
        }
    }
}

impl Message {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        Message::Error { code, detail: detail.into() }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("messages serialize");
        s.push('\n');
        s
    }

    pub fn parse(line: &str) -> Result<Self, DroemError> {
        serde_json::from_str(line).map_err(|e| DroemError::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaze_wire_shape() {
        let m = Message::parse(r#"{"type":"gaze","t":0.5,"u":[0.1,-0.2],"du":[0,0],"xi":[1.5]}"#).unwrap();
        let Message::Gaze(g) = &m else { panic!("not a gaze") };
        assert_eq!(g.u, [0.1, -0.2]);
        assert_eq!(g.xi, vec![1.5]);
        let back: serde_json::Value = serde_json::from_str(&m.to_line()).unwrap();
        assert_eq!(back["type"], "gaze");
        assert!(back.get("observer").is_none());
    }

    #[test]
    fn error_wire_shape() {
        let line = Message::error(ErrorCode::GazeDomain, "|u| = 1.2").to_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["type"], "error");
        assert_eq!(v["code"], "gaze_domain");
    }

    #[test]
    fn frame_fields_are_flat() {
        let f = crate::render::Frame::zeros(2, 1, 1).to_wire();
        let m = Message::Frame(FrameMessage { frame: f, step: 3, digest: "00".into() });
        let v: serde_json::Value = serde_json::from_str(&m.to_line()).unwrap();
        for key in ["t", "w", "h", "fibers", "encoding", "data", "step"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(Message::parse(&m.to_line()).unwrap(), m);
        assert!(Message::parse("{\"type\":\"nope\"}").is_err());
    }
}
