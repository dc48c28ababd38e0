//! JSON control messages. Every message is an object tagged by `"type"`.

use serde::{Deserialize, Serialize};

use super::frame::FrameFormat;
use crate::error::{Error, Result};
use crate::selection::Tool;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SetCamera {
        position: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
    },
    EnterSelection {},
    Stroke {
        tool: Tool,
        path: Vec<[f64; 2]>,
        radius: f64,
    },
    CommitSelection {},
    ClearSelection {},
    SetTint {
        rgb: [f64; 3],
    },
    Pause {},
    Resume {},
    Stop {},
    Save {
        path: String,
    },
    /// Jump the viewer to a training camera.
    GotoView {
        #[serde(rename = "viewId")]
        view_id: u32,
    },
    /// Frame encoding the client wants.
    Hello {
        format: FrameFormat,
    },
    /// Run iterations synchronously; only valid when the session is not
    /// running a background optimizer.
    Step {
        iterations: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Status {
        iteration: u64,
        loss: f64,
        ips: f64,
        generation: u64,
    },
    Error {
        message: String,
    },
    SelectionInfo {
        #[serde(rename = "cloudSize")]
        cloud_size: usize,
        generation: u64,
    },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        Self::Error { message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("bad message: {e}")))
}

impl ClientMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}
