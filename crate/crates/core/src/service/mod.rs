//! Editing session: message handling, frame encoding, and the batch edit
//! path shared with the command line.

pub mod frame;
pub mod headless;
pub mod protocol;
pub mod session;

pub use frame::{decode_frame, decode_frame_rgba, encode_frame, FrameFormat, FrameHeader, FRAME_HEADER_LEN, FRAME_MAGIC};
pub use headless::{run_edit, EditOutcome};
pub use protocol::{parse_client_message, ClientMessage, ServerMessage};
pub use session::{training_targets, EditSettings, RunMode, Session, Targets, OVERLAY_COLOR};
