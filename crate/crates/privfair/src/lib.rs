//! File formats, experiment drivers, a chat-completion decision engine and
//! its mock server, built on `privfair-core`.

pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod formats;
pub mod mock;
pub mod prompt;
pub mod remote;
pub mod scenario;

pub use error::{Error, Result};
