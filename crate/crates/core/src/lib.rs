//! Analytic models and a Monte-Carlo simulator for master/slave polling over
//! power-line channels, comparing DLC1000 source routing with SFN flooding.

pub mod channel;
pub mod cli;
pub mod dlc;
pub mod error;
pub mod metrics;
pub mod report;
pub mod sfn;
pub mod sim;

pub use error::{Error, Result};
