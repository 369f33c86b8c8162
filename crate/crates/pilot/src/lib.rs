//! Network endpoint that lets one pilot console drive the step engine and
//! any number of observers watch it.

pub mod protocol;
pub mod server;

pub use protocol::{ClientMessage, ErrorCode, ProtocolError, Role, ServerMessage, StateMessage};
pub use server::{serve, ServeError, ServiceConfig, ServiceHandle};
