//! Constructive-interference secure symbol-level precoding for multiuser
//! PSK downlinks with a single-antenna eavesdropper.

pub mod channel;
pub mod eavesdropper;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod precoders;
pub mod solver;

pub use error::{Error, Result};
