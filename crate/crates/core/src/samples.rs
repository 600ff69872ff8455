//! Bundled example models.

use crate::model::{parse_model, ProgramModel};

/// Two clients open sockets through a shared library method that builds the
/// permission in a factory and logs to a file inside a privileged action.
pub const SOCKET_LOGGING: &str = include_str!("../data/socket_logging.model");

pub fn socket_logging() -> ProgramModel {
    parse_model(SOCKET_LOGGING).expect("bundled model parses")
}
