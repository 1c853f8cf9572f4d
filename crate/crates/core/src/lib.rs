//! Traction-inverter topology evaluation over a drive cycle.

pub mod analysis;
pub mod config;
pub mod device;
pub mod error;
pub mod explorer;
pub mod motor;
pub mod partial;
pub mod pipeline;
pub mod pwm;
pub mod sizing;
pub mod system;
pub mod vehicle;

pub use error::{Error, Result};
