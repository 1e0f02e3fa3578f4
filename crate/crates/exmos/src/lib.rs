//! File formats, HTTP service and command line for the exmos steering
//! engine. The engine itself lives in `exmos-core`.

pub mod cli;
pub mod io;
pub mod service;
pub mod telemetry;
