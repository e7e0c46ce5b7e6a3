pub mod calibration;
pub mod cli;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod model;
pub mod offline;
pub mod online;
pub mod rational;
pub mod scenarios;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
